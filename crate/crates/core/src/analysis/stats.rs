use crate::slotted::Counters;
use crate::{Error, Result};

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Packet loss ratio with a 95% Wilson score interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlrEstimate {
    pub plr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let low = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let high = if successes == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (low, high)
}

pub fn aggregate(counters: &Counters) -> Result<PlrEstimate> {
    if counters.sent == 0 {
        return Err(Error::NoPackets);
    }
    let (ci_low, ci_high) = wilson_interval(counters.lost, counters.sent, Z_95);
    Ok(PlrEstimate {
        plr: counters.lost as f64 / counters.sent as f64,
        ci_low,
        ci_high,
    })
}
