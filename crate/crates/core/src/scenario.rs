//! Scenario files: one TOML document describing a complete simulation campaign.
//!
//! ```toml
//! [scheme]
//! kind = "crdsa"          # crdsa | irsa | csa | essa
//! replicas = 3
//! iterations = 16
//!
//! [frame]
//! slots = 128
//!
//! [phy]
//! modulation = 4
//! fec_rate = "1/3"
//!
//! [traffic]
//! kind = "poisson"        # poisson | constant
//!
//! [power]
//! kind = "equal"
//! esn0_db = 10.0
//!
//! [reception]
//! kind = "threshold"      # collision | threshold | sea
//! rho_db = -2.0
//!
//! [sweep]
//! start = 0.1
//! stop = 0.9
//! step = 0.1
//! frames = 10000
//! ```
//!
//! Unknown keys, and keys that do not apply to the selected kind, are rejected.
//! Relative paths are resolved against the directory holding the scenario file.

use std::path::{Path, PathBuf};

use num_rational::Ratio;
use serde::Deserialize;

use crate::analysis::StopRule;
use crate::essa::WindowConfig;
use crate::model::{FrameGeometry, PhyProfile, Scheme, SchemeConfig, SystemConfig};
use crate::reception::{PerCurve, ReceptionModel, DEFAULT_FIT_RESIDUAL};
use crate::slotted::{Codebook, DegreeDistribution};
use crate::traffic::{PowerModel, TrafficKind};
use crate::{Error, Result};

/// Master seed used when neither the scenario nor the command line sets one.
pub const DEFAULT_SEED: u64 = 20_140_601;

pub const DEFAULT_ITERATIONS: u32 = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub config: SystemConfig,
    pub grid: Vec<f64>,
    pub frames: u64,
    pub seed: u64,
    pub stop: Option<StopRule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    scheme: SchemeSection,
    #[serde(default)]
    frame: FrameSection,
    phy: PhySection,
    traffic: TrafficSection,
    power: PowerSection,
    reception: ReceptionSection,
    sweep: SweepSection,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemeSection {
    kind: String,
    replicas: Option<u32>,
    degrees: Option<String>,
    codebook: Option<String>,
    iterations: Option<u32>,
    window: Option<f64>,
    step: Option<f64>,
    replication_frames: Option<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameSection {
    #[serde(default = "one_u32")]
    slots: u32,
    #[serde(default = "one_u32")]
    slices_per_slot: u32,
    #[serde(default = "one_f64")]
    duration: f64,
}

impl Default for FrameSection {
    fn default() -> Self {
        Self {
            slots: 1,
            slices_per_slot: 1,
            duration: 1.0,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PhySection {
    modulation: u32,
    fec_rate: String,
    #[serde(default = "one_u32")]
    spreading_factor: u32,
    packet_bits: Option<u32>,
    replica_power: Option<f64>,
    #[serde(default = "one_f64")]
    noise_density: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrafficSection {
    kind: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerSection {
    kind: String,
    esn0_db: Option<f64>,
    ebn0_min_db: Option<f64>,
    ebn0_max_db: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReceptionSection {
    kind: String,
    rho_db: Option<f64>,
    curve: Option<String>,
    fit_degree: Option<usize>,
    max_fit_residual: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    loads: Option<Vec<f64>>,
    start: Option<f64>,
    stop: Option<f64>,
    step: Option<f64>,
    frames: u64,
    seed: Option<u64>,
    stop_ci_low: Option<f64>,
}

fn one_u32() -> u32 {
    1
}

fn one_f64() -> f64 {
    1.0
}

/// Fails if any of the named optional keys is present.
fn forbid(section: &str, kind: &str, keys: &[(&str, bool)]) -> Result<()> {
    match keys.iter().find(|(_, present)| *present) {
        Some((key, _)) => Err(Error::scenario(format!(
            "[{section}] key `{key}` does not apply to kind \"{kind}\""
        ))),
        None => Ok(()),
    }
}

fn require<T>(value: Option<T>, section: &str, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::scenario(format!("[{section}] is missing `{key}`")))
}

fn resolve(base: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// `start, start + step, ...` up to and including `stop`, rounded to 1e-12.
pub fn load_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && start.is_finite() && stop.is_finite() && start <= stop) {
        return Err(Error::scenario(format!(
            "grid start {start}, stop {stop}, step {step} is invalid"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as u64;
    if n > 100_000 {
        return Err(Error::scenario("the load grid has more than 100000 points"));
    }
    Ok((0..=n)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses scenario text, resolving relative paths against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let file: File = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start].matches('\n').count() + 1)
                .unwrap_or(0);
            let message = e.message().replace('\n', " ");
            Error::scenario(format!("line {line}: {}", message.trim()))
        })?;
        build(file, base)
    }
}

fn build(file: File, base: &Path) -> Result<Scenario> {
    let s = &file.scheme;
    let n_iter = s.iterations.unwrap_or(DEFAULT_ITERATIONS);
    let is_essa = s.kind == "essa";
    if !is_essa {
        forbid(
            "scheme",
            &s.kind,
            &[
                ("window", s.window.is_some()),
                ("step", s.step.is_some()),
                ("replication_frames", s.replication_frames.is_some()),
            ],
        )?;
    }
    let scheme = match s.kind.as_str() {
        "crdsa" => {
            forbid(
                "scheme",
                "crdsa",
                &[
                    ("degrees", s.degrees.is_some()),
                    ("codebook", s.codebook.is_some()),
                ],
            )?;
            Scheme::Crdsa {
                n_rep: require(s.replicas, "scheme", "replicas")?,
            }
        }
        "irsa" => {
            forbid(
                "scheme",
                "irsa",
                &[
                    ("replicas", s.replicas.is_some()),
                    ("codebook", s.codebook.is_some()),
                ],
            )?;
            Scheme::Irsa {
                degrees: require(s.degrees.as_deref(), "scheme", "degrees")?
                    .parse::<DegreeDistribution>()?,
            }
        }
        "csa" => {
            forbid(
                "scheme",
                "csa",
                &[
                    ("replicas", s.replicas.is_some()),
                    ("degrees", s.degrees.is_some()),
                ],
            )?;
            Scheme::Csa {
                codebook: Codebook::load(
                    require(s.codebook.as_deref(), "scheme", "codebook")?,
                    base,
                )?,
            }
        }
        "essa" => {
            forbid(
                "scheme",
                "essa",
                &[
                    ("replicas", s.replicas.is_some()),
                    ("degrees", s.degrees.is_some()),
                    ("codebook", s.codebook.is_some()),
                ],
            )?;
            let d = WindowConfig::default();
            Scheme::Essa {
                window: WindowConfig {
                    window_len: s.window.unwrap_or(d.window_len),
                    step: s.step.unwrap_or(d.step),
                    replication_frames: s.replication_frames.unwrap_or(d.replication_frames),
                },
            }
        }
        other => {
            return Err(Error::scenario(format!(
                "unknown scheme kind \"{other}\" (expected crdsa, irsa, csa or essa)"
            )))
        }
    };

    let geometry = FrameGeometry {
        n_slots: file.frame.slots,
        slices_per_slot: file.frame.slices_per_slot,
        frame_duration: file.frame.duration,
    };

    let p = &file.phy;
    let fec_rate: Ratio<u64> = p.fec_rate.trim().parse().map_err(|_| {
        Error::scenario(format!(
            "FEC rate \"{}\" is not a fraction like 1/3",
            p.fec_rate
        ))
    })?;
    let mut profile = PhyProfile::new(p.modulation, fec_rate, p.spreading_factor)?;
    if let Some(bits) = p.packet_bits {
        profile.packet_bits = bits;
    }
    if let Some(power) = p.replica_power {
        profile.avg_replica_power = power;
    }

    let traffic = match file.traffic.kind.as_str() {
        "poisson" => TrafficKind::Poisson,
        "constant" => TrafficKind::Constant,
        other => {
            return Err(Error::scenario(format!(
                "unknown traffic kind \"{other}\" (expected poisson or constant)"
            )))
        }
    };

    let w = &file.power;
    let power = match w.kind.as_str() {
        "equal" => {
            forbid(
                "power",
                "equal",
                &[
                    ("ebn0_min_db", w.ebn0_min_db.is_some()),
                    ("ebn0_max_db", w.ebn0_max_db.is_some()),
                ],
            )?;
            PowerModel::Equal {
                esn0_db: require(w.esn0_db, "power", "esn0_db")?,
            }
        }
        "uniform_db" => {
            forbid("power", "uniform_db", &[("esn0_db", w.esn0_db.is_some())])?;
            PowerModel::UniformDb {
                ebn0_min_db: require(w.ebn0_min_db, "power", "ebn0_min_db")?,
                ebn0_max_db: require(w.ebn0_max_db, "power", "ebn0_max_db")?,
            }
        }
        other => {
            return Err(Error::scenario(format!(
                "unknown power kind \"{other}\" (expected equal or uniform_db)"
            )))
        }
    };

    let r = &file.reception;
    let reception = match r.kind.as_str() {
        "collision" | "threshold" => {
            forbid(
                "reception",
                &r.kind,
                &[
                    ("curve", r.curve.is_some()),
                    ("fit_degree", r.fit_degree.is_some()),
                    ("max_fit_residual", r.max_fit_residual.is_some()),
                ],
            )?;
            if r.kind == "collision" {
                forbid("reception", "collision", &[("rho_db", r.rho_db.is_some())])?;
                ReceptionModel::Collision
            } else {
                ReceptionModel::Threshold {
                    rho_db: require(r.rho_db, "reception", "rho_db")?,
                }
            }
        }
        "sea" => {
            forbid("reception", "sea", &[("rho_db", r.rho_db.is_some())])?;
            let path = resolve(base, require(r.curve.as_deref(), "reception", "curve")?);
            let mut curve = PerCurve::from_path(&path)?;
            if let Some(degree) = r.fit_degree {
                curve =
                    curve.with_fit(degree, r.max_fit_residual.unwrap_or(DEFAULT_FIT_RESIDUAL))?;
            } else if r.max_fit_residual.is_some() {
                return Err(Error::scenario(
                    "[reception] `max_fit_residual` needs `fit_degree`",
                ));
            }
            ReceptionModel::Sea { curve }
        }
        other => {
            return Err(Error::scenario(format!(
                "unknown reception kind \"{other}\" (expected collision, threshold or sea)"
            )))
        }
    };

    let config = SystemConfig {
        profile,
        geometry,
        scheme: SchemeConfig { scheme, n_iter },
        traffic,
        power,
        reception,
        noise: p.noise_density,
    };
    config.validate()?;

    let sw = &file.sweep;
    let grid = match (&sw.loads, sw.start, sw.stop, sw.step) {
        (Some(loads), None, None, None) => loads.clone(),
        (None, Some(start), Some(stop), Some(step)) => load_grid(start, stop, step)?,
        _ => {
            return Err(Error::scenario(
                "[sweep] needs either `loads` or all of `start`, `stop` and `step`",
            ))
        }
    };
    if grid.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
        return Err(Error::scenario("[sweep] loads must be finite and >= 0"));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::scenario("[sweep] loads must be sorted ascending"));
    }
    if sw.frames == 0 {
        return Err(Error::scenario("[sweep] `frames` must be at least 1"));
    }
    let stop = match sw.stop_ci_low {
        Some(c) if !(0.0..=1.0).contains(&c) => {
            return Err(Error::scenario("[sweep] `stop_ci_low` must lie in [0, 1]"))
        }
        Some(c) => Some(StopRule { ci_low_ceiling: c }),
        None => None,
    };
    Ok(Scenario {
        config,
        grid,
        frames: sw.frames,
        seed: sw.seed.unwrap_or(DEFAULT_SEED),
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CRDSA: &str = r#"
[scheme]
kind = "crdsa"
replicas = 3

[frame]
slots = 128

[phy]
modulation = 4
fec_rate = "1/3"

[traffic]
kind = "poisson"

[power]
kind = "equal"
esn0_db = 10.0

[reception]
kind = "collision"

[sweep]
start = 0.1
stop = 0.9
step = 0.1
frames = 100
"#;

    #[test]
    fn parses_example() {
        let s = Scenario::parse(CRDSA, Path::new(".")).unwrap();
        assert_eq!(s.grid.len(), 9);
        assert_eq!(s.grid[2], 0.3);
        assert_eq!(s.grid[8], 0.9);
        assert_eq!(s.seed, DEFAULT_SEED);
        assert_eq!(s.config.scheme.n_iter, DEFAULT_ITERATIONS);
        assert_eq!(s.config.scheme.scheme, Scheme::Crdsa { n_rep: 3 });
        assert!(s.stop.is_none());
    }

    #[test]
    fn unknown_key_rejected() {
        let text = CRDSA.replace("replicas = 3", "replicas = 3\nreplica = 2");
        let err = Scenario::parse(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("replica"), "{err}");
        assert!(!err.to_string().contains('\n'));
    }

    #[test]
    fn inapplicable_key_rejected() {
        let text = CRDSA.replace("kind = \"collision\"", "kind = \"collision\"\nrho_db = 0.0");
        let err = Scenario::parse(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("rho_db"), "{err}");
    }

    #[test]
    fn missing_curve_names_path() {
        let text = CRDSA.replace(
            "kind = \"collision\"",
            "kind = \"sea\"\ncurve = \"nope/curve.csv\"",
        );
        let err = Scenario::parse(&text, Path::new("/tmp/base")).unwrap_err();
        assert!(
            err.to_string().contains("/tmp/base/nope/curve.csv"),
            "{err}"
        );
        assert!(err.is_configuration());
    }

    #[test]
    fn grid_rounding() {
        let g = load_grid(0.05, 0.35, 0.05).unwrap();
        assert_eq!(g, vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35]);
    }
}
