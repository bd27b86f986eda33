use rand::Rng;
use smallvec::SmallVec;

use crate::model::{FrameGeometry, PhyProfile, Scheme};
use crate::traffic::{draw_latent, draw_power, PowerModel, Purpose, RngStream};
use crate::{Error, Result};

/// Slot or slice indices of one user's transmissions, in segment order.
pub type Positions = SmallVec<[u32; 8]>;

/// One user's transmissions within a frame.
#[derive(Clone, Debug, PartialEq)]
pub struct UserRecord {
    pub positions: Positions,
    /// Received Es/N0, linear, shared by all replicas.
    pub power_es: f64,
    /// Uniform draw fixing the outcome of every PER-curve decode attempt.
    pub latent_u: f64,
    /// CSA code index; for CRDSA and IRSA the replica count.
    pub code: u32,
}

/// A slotted frame: where every user transmitted and with what power.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameRealization {
    pub n_positions: u32,
    pub users: Vec<UserRecord>,
}

impl FrameRealization {
    pub fn new(n_positions: u32) -> Self {
        Self {
            n_positions,
            users: Vec::new(),
        }
    }

    /// Per-slice list of `(user, segment)` references.
    pub fn slice_members(&self) -> Vec<Vec<(usize, usize)>> {
        let mut slices = vec![Vec::new(); self.n_positions as usize];
        for (u, user) in self.users.iter().enumerate() {
            for (seg, &s) in user.positions.iter().enumerate() {
                slices[s as usize].push((u, seg));
            }
        }
        slices
    }

    /// Number of transmissions in each slice.
    pub fn occupancy(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_positions as usize];
        for user in &self.users {
            for &s in &user.positions {
                counts[s as usize] += 1;
            }
        }
        counts
    }

    pub fn transmissions(&self) -> usize {
        self.users.iter().map(|u| u.positions.len()).sum()
    }
}

/// Draws `amount` distinct indices from `0..length`.
fn distinct_positions<R: Rng + ?Sized>(rng: &mut R, length: u32, amount: u32, out: &mut Positions) {
    out.clear();
    if amount * 4 <= length {
        while (out.len() as u32) < amount {
            let s = rng.random_range(0..length);
            if !out.contains(&s) {
                out.push(s);
            }
        }
    } else {
        let picked = rand::seq::index::sample(rng, length as usize, amount as usize);
        out.extend(picked.iter().map(|i| i as u32));
    }
}

/// Places `users` users in a frame according to the scheme. Each purpose (degree or
/// code choice, placement, power, latent draw) reads its own sub-stream of `stream`.
pub fn place_replicas(
    scheme: &Scheme,
    geometry: &FrameGeometry,
    profile: &PhyProfile,
    users: u64,
    power: &PowerModel,
    stream: &RngStream,
) -> Result<FrameRealization> {
    let mut frame = FrameRealization::new(geometry.total_slices());
    place_replicas_into(&mut frame, scheme, geometry, profile, users, power, stream)?;
    Ok(frame)
}

pub(crate) fn place_replicas_into(
    frame: &mut FrameRealization,
    scheme: &Scheme,
    geometry: &FrameGeometry,
    profile: &PhyProfile,
    users: u64,
    power: &PowerModel,
    stream: &RngStream,
) -> Result<()> {
    let n_positions = match scheme {
        Scheme::Csa { .. } => geometry.total_slices(),
        Scheme::Essa { .. } => {
            return Err(Error::scenario("E-SSA has no slotted frame realization"))
        }
        _ => geometry.n_slots,
    };
    frame.n_positions = n_positions;
    frame.users.clear();
    let mut selection = stream.rng(Purpose::Selection);
    let mut placement = stream.rng(Purpose::Placement);
    let mut powers = stream.rng(Purpose::Power);
    let mut latent = stream.rng(Purpose::Latent);
    for _ in 0..users {
        let (code, count) = match scheme {
            Scheme::Crdsa { n_rep } => (*n_rep, *n_rep),
            Scheme::Irsa { degrees } => {
                let d = degrees.sample(&mut selection);
                (d, d)
            }
            Scheme::Csa { codebook } => {
                let c = codebook.sample(&mut selection);
                (c as u32, codebook.codes()[c].n())
            }
            Scheme::Essa { .. } => unreachable!(),
        };
        if count > n_positions {
            return Err(Error::scenario(format!(
                "a user needs {count} positions but the frame has {n_positions}"
            )));
        }
        let mut positions = Positions::new();
        distinct_positions(&mut placement, n_positions, count, &mut positions);
        frame.users.push(UserRecord {
            positions,
            power_es: draw_power(power, profile, &mut powers),
            latent_u: draw_latent(&mut latent),
            code,
        });
    }
    Ok(())
}
