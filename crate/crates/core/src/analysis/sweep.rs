use std::io::Write;

use crate::analysis::stats::{wilson_interval, Z_95};
use crate::essa::simulate_stream;
use crate::model::{mean_arrival_rate, throughput, Scheme, SystemConfig};
use crate::slotted::{simulate_frames, Counters};
use crate::traffic::{derive_seed, TrafficModel};
use crate::{Error, Result};

pub const CSV_HEADER: &str = "g,sent,lost,plr,plr_ci_low,plr_ci_high,throughput";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub g: f64,
    pub sent: u64,
    pub lost: u64,
    pub plr: f64,
    pub plr_ci_low: f64,
    pub plr_ci_high: f64,
    pub throughput: f64,
}

impl SweepRow {
    /// Row for load `g` from raw counters. With nothing sent the loss ratio is 0 and
    /// the interval is the uninformative `[0, 1]`.
    pub fn from_counters(g: f64, c: &Counters) -> Self {
        let (plr, plr_ci_low, plr_ci_high) = if c.sent == 0 {
            (0.0, 0.0, 1.0)
        } else {
            let (lo, hi) = wilson_interval(c.lost, c.sent, Z_95);
            (c.lost as f64 / c.sent as f64, lo, hi)
        };
        Self {
            g,
            sent: c.sent,
            lost: c.lost,
            plr,
            plr_ci_low,
            plr_ci_high,
            throughput: throughput(g, plr),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.g, r.sent, r.lost, r.plr, r.plr_ci_low, r.plr_ci_high, r.throughput
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].plr <= w[1].plr)
    }
}

/// Ends a sweep early once the lower confidence bound of the loss ratio exceeds
/// `ci_low_ceiling`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopRule {
    pub ci_low_ceiling: f64,
}

/// Simulates every load in `grid` (packets per slot, or bits per chip for E-SSA).
/// For slotted schemes `frames_per_point` counts frames; for E-SSA it counts frame
/// durations. Point `g` uses the seed `derive_seed(master_seed, g.to_bits())`, so a
/// load gives the same counters whatever grid it appears in.
pub fn sweep(
    config: &SystemConfig,
    grid: &[f64],
    frames_per_point: u64,
    stop: Option<StopRule>,
    master_seed: u64,
) -> Result<SweepResult> {
    config.validate()?;
    if let Some(bad) = grid.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
        return Err(Error::scenario(format!(
            "loads must be finite and >= 0, got {bad}"
        )));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::scenario("the load grid must be sorted ascending"));
    }
    let mut result = SweepResult::default();
    for &g in grid {
        let lambda = mean_arrival_rate(g, &config.geometry, &config.profile);
        let traffic = TrafficModel::with_mean(config.traffic, lambda)?;
        let seed = derive_seed(master_seed, g.to_bits());
        let counters = match config.scheme.scheme {
            Scheme::Essa { .. } => simulate_stream(config, &traffic, frames_per_point, seed)?,
            _ => simulate_frames(config, &traffic, frames_per_point, seed)?,
        };
        let row = SweepRow::from_counters(g, &counters);
        log::debug!(
            "G = {g}: sent {} lost {} plr {}",
            row.sent,
            row.lost,
            row.plr
        );
        result.rows.push(row);
        if let Some(rule) = stop {
            if row.plr_ci_low > rule.ci_low_ceiling {
                break;
            }
        }
    }
    Ok(result)
}

/// Load at which the loss ratio reaches `target`, interpolating log-linearly between
/// the bracketing rows (linearly when the lower row has no losses). With a
/// non-monotone curve the last crossing is used.
pub fn load_at_target_plr(result: &SweepResult, target: f64) -> Result<f64> {
    if !result.is_monotone() {
        log::warn!("loss ratio is not monotone in the load; using the last crossing of {target}");
    }
    let rows = &result.rows;
    for i in (0..rows.len().saturating_sub(1)).rev() {
        let (a, b) = (&rows[i], &rows[i + 1]);
        if a.plr <= target && b.plr >= target {
            if b.plr == a.plr {
                return Ok(a.g);
            }
            let t = if a.plr > 0.0 {
                (target.ln() - a.plr.ln()) / (b.plr.ln() - a.plr.ln())
            } else {
                target / b.plr
            };
            return Ok(a.g + t * (b.g - a.g));
        }
    }
    Err(Error::TargetNotFound { target })
}
