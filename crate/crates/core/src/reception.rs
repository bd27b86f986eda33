//! Physical layer reception abstractions: collision channel, SNIR threshold and the
//! PER-curve link abstraction, plus the SNIR arithmetic used by the receivers.

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::model::linear_to_db;
use crate::{Error, Result};

/// Smallest PER returned by [`PerCurve::per_at`].
pub const PER_FLOOR: f64 = 1e-12;

/// Default bound on the max log10 residual of a polynomial fit.
pub const DEFAULT_FIT_RESIDUAL: f64 = 0.25;

/// Least-squares polynomial for `log10(PER)` as a function of Es/N0 in dB.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyFit {
    /// Ascending powers.
    pub coeffs: Vec<f64>,
    /// Max absolute log10 deviation over the samples.
    pub residual: f64,
}

impl PolyFit {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }
}

/// Packet error rate versus Es/N0, sampled and optionally polynomial-fitted.
#[derive(Clone, Debug, PartialEq)]
pub struct PerCurve {
    db: Vec<f64>,
    log_per: Vec<f64>,
    fit: Option<PolyFit>,
}

impl PerCurve {
    /// Validates and sorts `(esn0_db, per)` rows.
    pub fn from_rows(rows: &[(f64, f64)]) -> Result<Self> {
        for (i, &(db, per)) in rows.iter().enumerate() {
            if !db.is_finite() {
                return Err(Error::InvalidCurve(format!(
                    "row {}: Es/N0 {db} is not finite",
                    i + 1
                )));
            }
            if !(per > 0.0 && per <= 1.0) {
                return Err(Error::InvalidCurve(format!(
                    "row {}: PER {per} must lie in (0, 1]",
                    i + 1
                )));
            }
        }
        if rows.len() < 2 {
            return Err(Error::InvalidCurve(format!(
                "at least 2 rows are required, got {}",
                rows.len()
            )));
        }
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by(|&a, &b| rows[a].0.total_cmp(&rows[b].0));
        for pair in order.windows(2) {
            let (a, b) = (rows[pair[0]], rows[pair[1]]);
            if a.0 == b.0 {
                return Err(Error::InvalidCurve(format!(
                    "rows {} and {} repeat Es/N0 {} dB",
                    pair[0] + 1,
                    pair[1] + 1,
                    a.0
                )));
            }
            if b.1 > a.1 {
                return Err(Error::InvalidCurve(format!(
                    "non-monotone PER: row {} ({} dB, PER {}) exceeds row {} ({} dB, PER {})",
                    pair[1] + 1,
                    b.0,
                    b.1,
                    pair[0] + 1,
                    a.0,
                    a.1
                )));
            }
        }
        Ok(Self {
            db: order.iter().map(|&i| rows[i].0).collect(),
            log_per: order.iter().map(|&i| rows[i].1.log10()).collect(),
            fit: None,
        })
    }

    /// Parses the `esn0_db,per` CSV format. Rows must be strictly increasing in dB.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let headers = csv
            .headers()
            .map_err(|e| Error::InvalidCurve(e.to_string()))?
            .clone();
        if headers.len() != 2 || &headers[0] != "esn0_db" || &headers[1] != "per" {
            return Err(Error::InvalidCurve(format!(
                "expected header `esn0_db,per`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for (i, record) in csv.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| Error::InvalidCurve(format!("line {line}: {e}")))?;
            if record.len() != 2 {
                return Err(Error::InvalidCurve(format!(
                    "line {line}: expected 2 fields"
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::InvalidCurve(format!("line {line}: `{s}` is not a number")))
            };
            let row = (parse(&record[0])?, parse(&record[1])?);
            if let Some(&(prev, _)) = rows.last() {
                if row.0 <= prev {
                    return Err(Error::InvalidCurve(format!(
                        "line {line}: Es/N0 {} dB is not strictly increasing",
                        row.0
                    )));
                }
            }
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv(file).map_err(|e| Error::InvalidCurve(format!("{}: {e}", path.display())))
    }

    /// Logistic waterfall `PER = 1 / (1 + exp(slope (x - midpoint)))` sampled every
    /// 0.25 dB over `[lo_db, hi_db]`. Illustrative only.
    pub fn logistic(midpoint_db: f64, slope: f64, lo_db: f64, hi_db: f64) -> Self {
        let n = ((hi_db - lo_db) / 0.25).round() as usize;
        let rows: Vec<(f64, f64)> = (0..=n)
            .map(|i| {
                let x = lo_db + 0.25 * i as f64;
                let per = 1.0 / (1.0 + (slope * (x - midpoint_db)).exp());
                (x, per.max(PER_FLOOR))
            })
            .collect();
        Self::from_rows(&rows).expect("logistic curve is monotone")
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.db
            .iter()
            .zip(&self.log_per)
            .map(|(&d, &l)| (d, 10f64.powf(l)))
    }

    pub fn len(&self) -> usize {
        self.db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.db.is_empty()
    }

    pub fn fit(&self) -> Option<&PolyFit> {
        self.fit.as_ref()
    }

    /// Least-squares fit of `log10(PER)` against Es/N0 in dB.
    pub fn fit_log_per_polynomial(&self, degree: usize) -> Result<PolyFit> {
        let n = self.db.len();
        if degree >= n {
            return Err(Error::InvalidCurve(format!(
                "fit degree {degree} needs more than {n} samples"
            )));
        }
        let cols = degree + 1;
        let design = DMatrix::from_fn(n, cols, |r, c| self.db[r].powi(c as i32));
        let target = DVector::from_column_slice(&self.log_per);
        let svd = design.clone().svd(true, true);
        let max_sv = svd.singular_values.max();
        let eps = max_sv * 1e-12 * n.max(cols) as f64;
        let rank = svd.rank(eps);
        if rank < cols {
            return Err(Error::RankDeficient {
                rank,
                columns: cols,
            });
        }
        let solution = svd
            .solve(&target, eps)
            .map_err(|e| Error::InvalidCurve(e.to_string()))?;
        let coeffs: Vec<f64> = solution.iter().copied().collect();
        let fit = PolyFit {
            coeffs,
            residual: 0.0,
        };
        let residual = self
            .db
            .iter()
            .zip(&self.log_per)
            .map(|(&x, &y)| (fit.eval(x) - y).abs())
            .fold(0.0, f64::max);
        Ok(PolyFit { residual, ..fit })
    }

    /// Switches the curve to fitted mode. The fit must stay within `max_residual`
    /// and be non-increasing across the sampled range.
    pub fn with_fit(mut self, degree: usize, max_residual: f64) -> Result<Self> {
        let fit = self.fit_log_per_polynomial(degree)?;
        if fit.residual > max_residual {
            return Err(Error::InvalidCurve(format!(
                "degree-{degree} fit residual {:.3e} exceeds bound {max_residual:.3e}",
                fit.residual
            )));
        }
        let (lo, hi) = (self.db[0], self.db[self.db.len() - 1]);
        let steps = 512;
        let mut prev = f64::INFINITY;
        for i in 0..=steps {
            let y = fit.eval(lo + (hi - lo) * i as f64 / steps as f64);
            if y > prev + 1e-12 {
                return Err(Error::InvalidCurve(format!(
                    "degree-{degree} fit is not non-increasing over [{lo}, {hi}] dB"
                )));
            }
            prev = y;
        }
        self.fit = Some(fit);
        Ok(self)
    }

    /// PER at the given SNIR. Outside the sampled range the boundary value is used.
    pub fn per_at(&self, snir_db: f64) -> f64 {
        let last = self.db.len() - 1;
        let x = if snir_db.is_nan() {
            self.db[0]
        } else {
            snir_db.clamp(self.db[0], self.db[last])
        };
        let log_per = match &self.fit {
            Some(fit) => fit.eval(x),
            None => {
                let hi = self.db.partition_point(|&d| d <= x).min(last).max(1);
                let lo = hi - 1;
                let t = (x - self.db[lo]) / (self.db[hi] - self.db[lo]);
                self.log_per[lo] + t * (self.log_per[hi] - self.log_per[lo])
            }
        };
        10f64.powf(log_per).clamp(PER_FLOOR, 1.0)
    }
}

/// How a receiver decides whether a transmission is decoded.
#[derive(Clone, Debug, PartialEq)]
pub enum ReceptionModel {
    /// Only interference-free transmissions decode.
    Collision,
    /// Decodes iff SNIR in dB reaches `rho_db`.
    Threshold { rho_db: f64 },
    /// Decodes iff the packet's latent uniform exceeds the PER at its SNIR.
    Sea { curve: PerCurve },
}

impl ReceptionModel {
    pub fn name(&self) -> &'static str {
        match self {
            ReceptionModel::Collision => "collision",
            ReceptionModel::Threshold { .. } => "threshold",
            ReceptionModel::Sea { .. } => "sea",
        }
    }
}

/// `own / (n0 + sum(interferers))`
pub fn snir_slotted(own_es: f64, interferer_es: &[f64], n0: f64) -> f64 {
    own_es / (n0 + interferer_es.iter().sum::<f64>())
}

/// SNIR after despreading: interference is scaled by `1/sf` and weighted by the
/// fraction of time each interferer overlaps the packet.
pub fn snir_spread(own_es: f64, overlaps: &[(f64, f64)], sf: u32, n0: f64) -> f64 {
    let weighted: f64 = overlaps.iter().map(|&(es, beta)| beta * es).sum();
    own_es / (n0 + weighted / f64::from(sf))
}

pub fn attempt_decode(
    model: &ReceptionModel,
    snir: f64,
    n_interferers: usize,
    latent_u: f64,
) -> bool {
    match model {
        ReceptionModel::Collision => n_interferers == 0,
        ReceptionModel::Threshold { rho_db } => linear_to_db(snir) >= *rho_db,
        ReceptionModel::Sea { curve } => latent_u > curve.per_at(linear_to_db(snir)),
    }
}
