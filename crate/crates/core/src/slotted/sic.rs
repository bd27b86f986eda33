use rayon::prelude::*;

use super::codebook::recoverable;
use super::frame::{place_replicas_into, FrameRealization};
use crate::model::{Scheme, SystemConfig};
use crate::reception::{attempt_decode, ReceptionModel};
use crate::traffic::{draw_user_count, Purpose, RngStream, TrafficModel};
use crate::{Error, Result};

/// Result of running the SIC decoder over one frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SicOutcome {
    pub decoded: Vec<bool>,
    /// Per user bit mask of segments decoded so far (CSA), or of replicas that
    /// decoded (CRDSA/IRSA).
    pub received: Vec<u64>,
    /// Passes that decoded at least one user.
    pub passes: u32,
}

impl SicOutcome {
    pub fn lost(&self) -> usize {
        self.decoded.iter().filter(|&&d| !d).count()
    }
}

#[derive(Default)]
struct Scratch {
    sum: Vec<f64>,
    count: Vec<u32>,
    newly: Vec<usize>,
}

/// Iterative SIC over a slotted frame.
///
/// Every pass evaluates all undecoded users against the slice contents at the start of
/// the pass; users decoded in the pass are cancelled (all their transmissions removed)
/// before the next one. CRDSA/IRSA users decode on their first successful replica; CSA
/// users decode once the received segments reach rank `k`. Stops after `n_iter` passes
/// or when a pass decodes nobody.
pub fn run_sic(
    frame: &FrameRealization,
    scheme: &Scheme,
    model: &ReceptionModel,
    n_iter: u32,
    n0: f64,
) -> SicOutcome {
    let mut scratch = Scratch::default();
    let mut outcome = SicOutcome::default();
    run_sic_with(frame, scheme, model, n_iter, n0, &mut scratch, &mut outcome);
    outcome
}

fn run_sic_with(
    frame: &FrameRealization,
    scheme: &Scheme,
    model: &ReceptionModel,
    n_iter: u32,
    n0: f64,
    scratch: &mut Scratch,
    outcome: &mut SicOutcome,
) {
    let n_users = frame.users.len();
    outcome.decoded.clear();
    outcome.decoded.resize(n_users, false);
    outcome.received.clear();
    outcome.received.resize(n_users, 0);
    outcome.passes = 0;
    let slices = frame.n_positions as usize;
    let codebook = match scheme {
        Scheme::Csa { codebook } => Some(codebook),
        _ => None,
    };

    for _ in 0..n_iter {
        scratch.sum.clear();
        scratch.sum.resize(slices, 0.0);
        scratch.count.clear();
        scratch.count.resize(slices, 0);
        for (user, _) in frame
            .users
            .iter()
            .zip(&outcome.decoded)
            .filter(|(_, &d)| !d)
        {
            for &s in &user.positions {
                scratch.sum[s as usize] += user.power_es;
                scratch.count[s as usize] += 1;
            }
        }

        scratch.newly.clear();
        for (u, user) in frame.users.iter().enumerate() {
            if outcome.decoded[u] {
                continue;
            }
            let mut got = 0u64;
            for (seg, &s) in user.positions.iter().enumerate() {
                if outcome.received[u] >> seg & 1 == 1 {
                    continue;
                }
                let s = s as usize;
                let interference = (scratch.sum[s] - user.power_es).max(0.0);
                let snir = user.power_es / (n0 + interference);
                if attempt_decode(model, snir, scratch.count[s] as usize - 1, user.latent_u) {
                    got |= 1 << seg;
                    if codebook.is_none() {
                        // first replica suffices
                        break;
                    }
                }
            }
            if got == 0 {
                continue;
            }
            outcome.received[u] |= got;
            let done = match codebook {
                Some(cb) => recoverable(&cb.codes()[user.code as usize], outcome.received[u]),
                None => true,
            };
            if done {
                scratch.newly.push(u);
            }
        }

        if scratch.newly.is_empty() {
            break;
        }
        outcome.passes += 1;
        for &u in &scratch.newly {
            outcome.decoded[u] = true;
        }
    }
}

/// Packet counters accumulated over frames or stream replications.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub trials: u64,
    pub sent: u64,
    pub lost: u64,
}

impl Counters {
    pub fn merge(self, other: Counters) -> Counters {
        Counters {
            trials: self.trials + other.trials,
            sent: self.sent + other.sent,
            lost: self.lost + other.lost,
        }
    }
}

fn check_slotted(config: &SystemConfig) -> Result<()> {
    config.validate()?;
    if !config.scheme.scheme.is_slotted() {
        return Err(Error::scenario("frame simulation needs a slotted scheme"));
    }
    Ok(())
}

/// Simulates `n_frames` independent frames. Frame `f` draws from stream
/// `(master_seed, f)`, so counters do not depend on the worker count.
pub fn simulate_frames(
    config: &SystemConfig,
    traffic: &TrafficModel,
    n_frames: u64,
    master_seed: u64,
) -> Result<Counters> {
    check_slotted(config)?;
    traffic.validate()?;
    if n_frames == 0 {
        return Err(Error::scenario("at least one frame is required"));
    }
    let scheme = &config.scheme.scheme;
    let counters = (0..n_frames)
        .into_par_iter()
        .map_init(
            || {
                (
                    FrameRealization::default(),
                    Scratch::default(),
                    SicOutcome::default(),
                )
            },
            |(frame, scratch, outcome), f| {
                let stream = RngStream::new(master_seed, f);
                let users = draw_user_count(traffic, &mut stream.rng(Purpose::Traffic));
                place_replicas_into(
                    frame,
                    scheme,
                    &config.geometry,
                    &config.profile,
                    users,
                    &config.power,
                    &stream,
                )
                .expect("validated configuration");
                run_sic_with(
                    frame,
                    scheme,
                    &config.reception,
                    config.scheme.n_iter,
                    config.noise,
                    scratch,
                    outcome,
                );
                Counters {
                    trials: 1,
                    sent: users,
                    lost: outcome.lost() as u64,
                }
            },
        )
        .reduce(Counters::default, Counters::merge);
    Ok(counters)
}

/// Draws one frame exactly as [`simulate_frames`] does for frame index `frame`.
pub fn realize_frame(
    config: &SystemConfig,
    traffic: &TrafficModel,
    master_seed: u64,
    frame: u64,
) -> Result<FrameRealization> {
    check_slotted(config)?;
    let stream = RngStream::new(master_seed, frame);
    let users = draw_user_count(traffic, &mut stream.rng(Purpose::Traffic));
    let mut out = FrameRealization::default();
    place_replicas_into(
        &mut out,
        &config.scheme.scheme,
        &config.geometry,
        &config.profile,
        users,
        &config.power,
        &stream,
    )?;
    Ok(out)
}

/// Histogram of slice cardinalities over `n_frames` frames: entry `i` counts slices
/// holding exactly `i` transmissions.
pub fn tally_cardinalities(
    config: &SystemConfig,
    traffic: &TrafficModel,
    n_frames: u64,
    master_seed: u64,
) -> Result<Vec<u64>> {
    check_slotted(config)?;
    traffic.validate()?;
    let merge = |mut a: Vec<u64>, b: Vec<u64>| {
        if a.len() < b.len() {
            a.resize(b.len(), 0);
        }
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
        a
    };
    let hist = (0..n_frames)
        .into_par_iter()
        .map_init(FrameRealization::default, |frame, f| {
            let stream = RngStream::new(master_seed, f);
            let users = draw_user_count(traffic, &mut stream.rng(Purpose::Traffic));
            place_replicas_into(
                frame,
                &config.scheme.scheme,
                &config.geometry,
                &config.profile,
                users,
                &config.power,
                &stream,
            )
            .expect("validated configuration");
            let mut hist = Vec::new();
            for c in frame.occupancy() {
                let c = c as usize;
                if hist.len() <= c {
                    hist.resize(c + 1, 0u64);
                }
                hist[c] += 1;
            }
            hist
        })
        .reduce(Vec::new, merge);
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::db_to_linear;
    use crate::slotted::frame::{Positions, UserRecord};
    use crate::slotted::{Code, Codebook};

    fn user(slots: &[u32], es: f64) -> UserRecord {
        UserRecord {
            positions: Positions::from_slice(slots),
            power_es: es,
            latent_u: 0.5,
            code: slots.len() as u32,
        }
    }

    fn frame(n: u32, users: Vec<UserRecord>) -> FrameRealization {
        FrameRealization {
            n_positions: n,
            users,
        }
    }

    const CRDSA2: Scheme = Scheme::Crdsa { n_rep: 2 };

    #[test]
    fn hand_peeling_chain() {
        let es = db_to_linear(10.0);
        let f = frame(4, vec![user(&[1, 2], es), user(&[2], es)]);
        let out = run_sic(&f, &CRDSA2, &ReceptionModel::Collision, 20, 1.0);
        assert_eq!(out.decoded, vec![true, true]);
        assert_eq!(out.passes, 2);
    }

    #[test]
    fn three_cycle_is_a_stopping_set() {
        let es = db_to_linear(10.0);
        let f = frame(
            4,
            vec![user(&[1, 2], es), user(&[2, 3], es), user(&[3, 1], es)],
        );
        let out = run_sic(&f, &CRDSA2, &ReceptionModel::Collision, 20, 1.0);
        assert_eq!(out.decoded, vec![false, false, false]);
        assert_eq!(out.passes, 0);
    }

    #[test]
    fn threshold_resolves_pairs_without_cancellation() {
        let es = db_to_linear(10.0);
        let f = frame(2, vec![user(&[0], es), user(&[0], es)]);
        let out = run_sic(
            &f,
            &Scheme::Crdsa { n_rep: 1 },
            &ReceptionModel::Threshold { rho_db: -2.0 },
            20,
            1.0,
        );
        assert_eq!(out.decoded, vec![true, true]);
        assert_eq!(out.passes, 1);
        let f3 = frame(2, vec![user(&[0], es), user(&[0], es), user(&[0], es)]);
        let out = run_sic(
            &f3,
            &Scheme::Crdsa { n_rep: 1 },
            &ReceptionModel::Threshold { rho_db: -2.0 },
            20,
            1.0,
        );
        assert_eq!(out.lost(), 3);
    }

    #[test]
    fn iteration_cap_limits_peeling() {
        let es = 10.0;
        // chain open at both ends: users 0 and 3 have a clean slot, 1 and 2 do not
        let f = frame(
            6,
            vec![
                user(&[0, 1], es),
                user(&[1, 2], es),
                user(&[2, 3], es),
                user(&[3, 4], es),
            ],
        );
        let capped = run_sic(&f, &CRDSA2, &ReceptionModel::Collision, 1, 1.0);
        assert_eq!(capped.decoded, vec![true, false, false, true]);
        assert_eq!(capped.passes, 1);
        let full = run_sic(&f, &CRDSA2, &ReceptionModel::Collision, 20, 1.0);
        assert_eq!(full.lost(), 0);
    }

    #[test]
    fn csa_needs_rank_k() {
        // k = 2 parity code; user A's segments 0 and 1 collide, segment 2 is clean
        let code = Code::new(&[vec![1, 0, 1], vec![0, 1, 1]], 1.0).unwrap();
        let scheme = Scheme::Csa {
            codebook: Codebook::new(vec![code]).unwrap(),
        };
        let mut a = user(&[0, 1, 2], 10.0);
        a.code = 0;
        let mut b = user(&[0, 1, 3], 10.0);
        b.code = 0;
        let f = frame(4, vec![a, b]);
        let out = run_sic(&f, &scheme, &ReceptionModel::Collision, 20, 1.0);
        // each user receives one clean segment only: rank 1 < 2
        assert_eq!(out.decoded, vec![false, false]);
        assert_eq!(out.received, vec![0b100, 0b100]);

        let mut c = user(&[0, 2, 3], 10.0);
        c.code = 0;
        let mut d = user(&[1, 4, 5], 10.0);
        d.code = 0;
        let f = frame(6, vec![c, d]);
        let out = run_sic(&f, &scheme, &ReceptionModel::Collision, 20, 1.0);
        assert_eq!(out.decoded, vec![true, true]);
    }

    #[test]
    fn sea_lone_user_with_low_per() {
        let curve = crate::reception::PerCurve::from_rows(&[(0.0, 0.5), (10.0, 1e-6)]).unwrap();
        let model = ReceptionModel::Sea { curve };
        let f = frame(8, vec![user(&[3, 5], db_to_linear(10.0))]);
        let out = run_sic(&f, &CRDSA2, &model, 20, 1.0);
        assert_eq!(out.decoded, vec![true]);
    }
}
