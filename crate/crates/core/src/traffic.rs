//! User populations, arrival times, received powers and reproducible random streams.

use rand::distr::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, Poisson};

use crate::model::{db_to_linear, esn0_from_ebn0, PhyProfile};
use crate::{Error, Result};

/// Upper bound on the number of users in one frame.
pub const MAX_USERS: u64 = 1_000_000;

/// Shape of the per-frame load, independent of its intensity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrafficKind {
    Constant,
    Poisson,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TrafficModel {
    Constant { users: u64 },
    Poisson { mean: f64 },
}

impl TrafficModel {
    /// Builds the model for a mean of `lambda` users per frame. Constant traffic rounds
    /// to the nearest integer.
    pub fn with_mean(kind: TrafficKind, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::scenario(format!(
                "arrival rate must be finite and >= 0, got {lambda}"
            )));
        }
        let model = match kind {
            TrafficKind::Constant => TrafficModel::Constant {
                users: lambda.round() as u64,
            },
            TrafficKind::Poisson => TrafficModel::Poisson { mean: lambda },
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TrafficModel::Constant { users } if users > MAX_USERS => Err(Error::scenario(format!(
                "{users} users per frame exceeds the maximum of {MAX_USERS}"
            ))),
            TrafficModel::Poisson { mean } if !(mean >= 0.0 && mean <= MAX_USERS as f64) => Err(
                Error::scenario(format!("Poisson mean {mean} outside [0, {MAX_USERS}]")),
            ),
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            TrafficModel::Constant { users } => users as f64,
            TrafficModel::Poisson { mean } => mean,
        }
    }
}

/// Received power distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PowerModel {
    /// Every packet arrives with the same Es/N0.
    Equal { esn0_db: f64 },
    /// Eb/N0 uniformly distributed in dB, drawn once per user.
    UniformDb { ebn0_min_db: f64, ebn0_max_db: f64 },
}

impl PowerModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PowerModel::Equal { esn0_db } if !esn0_db.is_finite() => {
                Err(Error::scenario("Es/N0 must be finite"))
            }
            PowerModel::UniformDb {
                ebn0_min_db,
                ebn0_max_db,
            } if !(ebn0_min_db.is_finite()
                && ebn0_max_db.is_finite()
                && ebn0_min_db <= ebn0_max_db) =>
            {
                Err(Error::scenario(format!(
                    "uniform power range [{ebn0_min_db}, {ebn0_max_db}] dB is invalid"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Independent sub-streams of one frame or replication.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Traffic = 1,
    Selection = 2,
    Placement = 3,
    Power = 4,
    Latent = 5,
    Arrivals = 6,
}

/// A reproducible random stream identified by a master seed and a stream index
/// (the frame or replication ordinal).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// Generator for one purpose. Distinct `(seed, index, purpose)` triples never share
    /// key material and stream id at the same time.
    pub fn rng(&self, purpose: Purpose) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Derives the seed of sub-experiment `index` (e.g. a sweep point) from a master seed.
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined value
    let mut z =
        master_seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn draw_user_count<R: Rng + ?Sized>(model: &TrafficModel, rng: &mut R) -> u64 {
    match *model {
        TrafficModel::Constant { users } => users,
        TrafficModel::Poisson { mean } if mean <= 0.0 => 0,
        TrafficModel::Poisson { mean } => {
            let poisson = Poisson::new(mean).expect("validated Poisson mean");
            let n: f64 = poisson.sample(rng);
            n as u64
        }
    }
}

/// Probability that a user places one of its transmissions in a given position.
pub fn slot_selection_probability(n_rep_mean: f64, n_positions: u32) -> Result<f64> {
    if !(n_rep_mean > 0.0) || n_positions == 0 || n_rep_mean > f64::from(n_positions) {
        return Err(Error::scenario(format!(
            "mean replicas {n_rep_mean} must lie in (0, {n_positions}]"
        )));
    }
    Ok(n_rep_mean / f64::from(n_positions))
}

/// Distribution of the number of transmissions sharing one position, truncated at
/// `i_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct CardinalityPmf {
    pub pmf: Vec<f64>,
    /// Probability mass above `i_max`.
    pub tail: f64,
}

impl CardinalityPmf {
    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(i, p)| i as f64 * p).sum()
    }
}

pub fn collision_cardinality_pmf(model: &TrafficModel, p: f64, i_max: usize) -> CardinalityPmf {
    let p = p.clamp(0.0, 1.0);
    let mut pmf = Vec::with_capacity(i_max + 1);
    match *model {
        TrafficModel::Constant { users } => {
            let n = users as f64;
            let mut ln_fact_i = 0.0;
            for i in 0..=i_max {
                if i > 0 {
                    ln_fact_i += (i as f64).ln();
                }
                if i as u64 > users {
                    pmf.push(0.0);
                    continue;
                }
                let value = if p == 0.0 {
                    if i == 0 {
                        1.0
                    } else {
                        0.0
                    }
                } else if p == 1.0 {
                    if i as u64 == users {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    let ln_binom = ln_falling(n, i) - ln_fact_i;
                    (ln_binom + i as f64 * p.ln() + (n - i as f64) * (1.0 - p).ln()).exp()
                };
                pmf.push(value);
            }
        }
        TrafficModel::Poisson { mean } => {
            let mu = mean * p;
            let mut ln_fact_i = 0.0;
            for i in 0..=i_max {
                if i > 0 {
                    ln_fact_i += (i as f64).ln();
                }
                let value = if mu == 0.0 {
                    if i == 0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (-mu + i as f64 * mu.ln() - ln_fact_i).exp()
                };
                pmf.push(value);
            }
        }
    }
    let total: f64 = pmf.iter().sum();
    CardinalityPmf {
        pmf,
        tail: (1.0 - total).max(0.0),
    }
}

/// `ln(n (n-1) ... (n-i+1))`
fn ln_falling(n: f64, i: usize) -> f64 {
    (0..i).map(|j| (n - j as f64).ln()).sum()
}

/// Linear Es/N0 of one user.
pub fn draw_power<R: Rng + ?Sized>(model: &PowerModel, profile: &PhyProfile, rng: &mut R) -> f64 {
    match *model {
        PowerModel::Equal { esn0_db } => db_to_linear(esn0_db),
        PowerModel::UniformDb {
            ebn0_min_db,
            ebn0_max_db,
        } => {
            let u: f64 = rng.random();
            let ebn0_db = ebn0_min_db + (ebn0_max_db - ebn0_min_db) * u;
            db_to_linear(esn0_from_ebn0(ebn0_db, profile))
        }
    }
}

pub fn draw_powers<R: Rng + ?Sized>(
    model: &PowerModel,
    count: usize,
    profile: &PhyProfile,
    rng: &mut R,
) -> Vec<f64> {
    (0..count)
        .map(|_| draw_power(model, profile, rng))
        .collect()
}

/// Uniform draw in the open interval (0, 1).
pub fn draw_latent<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Open01.sample(rng)
}

/// Start times of a homogeneous Poisson process with `lambda_per_frame` arrivals per
/// frame duration, over `[0, horizon)`.
pub fn draw_arrival_times<R: Rng + ?Sized>(
    lambda_per_frame: f64,
    horizon: f64,
    frame_duration: f64,
    rng: &mut R,
) -> Vec<f64> {
    if lambda_per_frame <= 0.0 {
        return Vec::new();
    }
    let rate = lambda_per_frame / frame_duration;
    let gaps = Exp::new(rate).expect("positive rate");
    let mut times = Vec::with_capacity((rate * horizon * 1.05) as usize + 16);
    let mut t = 0.0;
    loop {
        let gap: f64 = gaps.sample(rng);
        t += gap;
        if t >= horizon {
            break;
        }
        // exponential gaps are almost surely positive; skip the measure-zero tie
        if times.last().is_some_and(|&last| t <= last) {
            continue;
        }
        times.push(t);
    }
    times
}

/// Exactly `users` arrivals uniformly placed in every frame interval of `[0, horizon)`.
pub fn draw_constant_arrivals<R: Rng + ?Sized>(
    users: u64,
    horizon: f64,
    frame_duration: f64,
    rng: &mut R,
) -> Vec<f64> {
    let frames = (horizon / frame_duration).ceil() as u64;
    let mut times = Vec::with_capacity((users * frames) as usize);
    for f in 0..frames {
        let base = f as f64 * frame_duration;
        let span = (horizon - base).min(frame_duration);
        for _ in 0..users {
            let u: f64 = rng.random();
            times.push(base + u * span);
        }
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

/// Arrivals for a stream of the given traffic model.
pub fn draw_stream_arrivals<R: Rng + ?Sized>(
    model: &TrafficModel,
    horizon: f64,
    frame_duration: f64,
    rng: &mut R,
) -> Vec<f64> {
    match *model {
        TrafficModel::Constant { users } => {
            draw_constant_arrivals(users, horizon, frame_duration, rng)
        }
        TrafficModel::Poisson { mean } => draw_arrival_times(mean, horizon, frame_duration, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_rational::Ratio;

    fn qpsk_third() -> PhyProfile {
        PhyProfile::new(4, Ratio::new(1, 3), 1).unwrap()
    }

    #[test]
    fn constant_and_degenerate_counts() {
        let mut rng = RngStream::new(1, 0).rng(Purpose::Traffic);
        assert_eq!(
            draw_user_count(&TrafficModel::Constant { users: 7 }, &mut rng),
            7
        );
        assert_eq!(
            draw_user_count(&TrafficModel::Poisson { mean: 0.0 }, &mut rng),
            0
        );
    }

    #[test]
    fn poisson_count_mean() {
        let mut rng = RngStream::new(2, 0).rng(Purpose::Traffic);
        let model = TrafficModel::Poisson { mean: 192.0 };
        let n = 100_000;
        let sum: u64 = (0..n).map(|_| draw_user_count(&model, &mut rng)).sum();
        let mean = sum as f64 / n as f64;
        let bound = 3.0 * 192f64.sqrt() / (n as f64).sqrt();
        assert!((mean - 192.0).abs() < bound, "mean {mean}");
    }

    #[test]
    fn selection_probability() {
        assert_eq!(slot_selection_probability(2.0, 128).unwrap(), 1.0 / 64.0);
        assert_eq!(slot_selection_probability(3.5, 128).unwrap(), 0.02734375);
        assert_eq!(slot_selection_probability(16.0, 16).unwrap(), 1.0);
        assert!(slot_selection_probability(17.0, 16).is_err());
        assert!(slot_selection_probability(0.0, 16).is_err());
    }

    #[test]
    fn cardinality_pmfs() {
        let b = collision_cardinality_pmf(&TrafficModel::Constant { users: 2 }, 0.5, 4);
        assert_relative_eq!(b.pmf[1], 0.5, epsilon = 1e-15);
        assert_relative_eq!(b.pmf[0], 0.25, epsilon = 1e-15);
        assert_eq!(b.pmf[3], 0.0);

        let p = collision_cardinality_pmf(&TrafficModel::Poisson { mean: 192.0 }, 2.0 / 128.0, 60);
        assert_relative_eq!(p.mean(), 3.0, epsilon = 1e-9);
        assert_relative_eq!(p.pmf[0], (-3.0f64).exp(), epsilon = 1e-12);
        assert_relative_eq!(p.pmf[0], 0.049787, epsilon = 1e-6);
        assert!(p.tail < 1e-12);

        let zero = collision_cardinality_pmf(&TrafficModel::Poisson { mean: 0.0 }, 0.1, 3);
        assert_eq!(zero.pmf, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn equal_and_uniform_powers() {
        let mut rng = RngStream::new(3, 0).rng(Purpose::Power);
        let p = qpsk_third();
        let eq = draw_powers(&PowerModel::Equal { esn0_db: 10.0 }, 3, &p, &mut rng);
        for v in eq {
            assert_relative_eq!(v, 10.0, max_relative = 1e-14);
        }
        let model = PowerModel::UniformDb {
            ebn0_min_db: 2.0,
            ebn0_max_db: 9.0,
        };
        let offset = esn0_from_ebn0(0.0, &p);
        let samples = draw_powers(&model, 100_000, &p, &mut rng);
        let dbs: Vec<f64> = samples.iter().map(|&x| 10.0 * x.log10() - offset).collect();
        assert!(dbs.iter().all(|&d| (2.0 - 1e-9..=9.0 + 1e-9).contains(&d)));
        let mean = dbs.iter().sum::<f64>() / dbs.len() as f64;
        let sigma = 7.0 / 12f64.sqrt();
        assert!(
            (mean - 5.5).abs() < 3.0 * sigma / (dbs.len() as f64).sqrt(),
            "mean {mean}"
        );

        let degenerate = PowerModel::UniformDb {
            ebn0_min_db: 4.0,
            ebn0_max_db: 4.0,
        };
        let v = draw_power(&degenerate, &p, &mut rng);
        let w = draw_power(
            &PowerModel::Equal {
                esn0_db: esn0_from_ebn0(4.0, &p),
            },
            &p,
            &mut rng,
        );
        assert_relative_eq!(v, w, max_relative = 1e-14);
    }

    #[test]
    fn arrival_counts_and_gaps() {
        let mut rng = RngStream::new(4, 0).rng(Purpose::Arrivals);
        assert!(draw_arrival_times(0.0, 10.0, 1.0, &mut rng).is_empty());

        let times = draw_arrival_times(220.8, 1000.0, 1.0, &mut rng);
        let expected = 220_800.0;
        assert!((times.len() as f64 - expected).abs() < 4.0 * expected.sqrt());
        assert!(times.windows(2).all(|w| w[0] < w[1]));

        // Kolmogorov-Smirnov on the first 1e5 gaps against Exp(rate)
        let rate = 220.8;
        let mut gaps: Vec<f64> = times
            .windows(2)
            .take(100_000)
            .map(|w| w[1] - w[0])
            .collect();
        gaps.sort_by(f64::total_cmp);
        let n = gaps.len() as f64;
        let d = gaps
            .iter()
            .enumerate()
            .map(|(i, &g)| {
                let cdf = 1.0 - (-rate * g).exp();
                (cdf - i as f64 / n)
                    .abs()
                    .max(((i + 1) as f64 / n - cdf).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn constant_arrivals_fill_each_frame() {
        let mut rng = RngStream::new(5, 0).rng(Purpose::Arrivals);
        let times = draw_constant_arrivals(10, 5.0, 1.0, &mut rng);
        assert_eq!(times.len(), 50);
        for f in 0..5 {
            let c = times
                .iter()
                .filter(|&&t| t >= f as f64 && t < f as f64 + 1.0)
                .count();
            assert_eq!(c, 10);
        }
    }

    #[test]
    fn streams_reproducible_and_distinct() {
        let a: Vec<u64> = {
            let mut r = RngStream::new(9, 17).rng(Purpose::Placement);
            (0..4).map(|_| r.random()).collect()
        };
        let b: Vec<u64> = {
            let mut r = RngStream::new(9, 17).rng(Purpose::Placement);
            (0..4).map(|_| r.random()).collect()
        };
        let c: Vec<u64> = {
            let mut r = RngStream::new(9, 18).rng(Purpose::Placement);
            (0..4).map(|_| r.random()).collect()
        };
        let d: Vec<u64> = {
            let mut r = RngStream::new(9, 17).rng(Purpose::Power);
            (0..4).map(|_| r.random()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
    }

    #[test]
    fn traffic_model_from_rate() {
        assert_eq!(
            TrafficModel::with_mean(TrafficKind::Constant, 191.6).unwrap(),
            TrafficModel::Constant { users: 192 }
        );
        assert!(TrafficModel::with_mean(TrafficKind::Poisson, f64::NAN).is_err());
        assert!(TrafficModel::with_mean(TrafficKind::Poisson, 2e6).is_err());
    }
}
