//! Scenario description and the closed-form load, throughput and energy algebra.
//!
//! Loads are expressed in bits per symbol for slotted schemes and bits per chip for
//! spread schemes. Exact rational arithmetic is used for the processing gain so that
//! reference table values come out exactly; everything downstream is `f64`.

use num_rational::Ratio;

use crate::essa::WindowConfig;
use crate::reception::ReceptionModel;
use crate::slotted::{Codebook, DegreeDistribution};
use crate::traffic::{PowerModel, TrafficKind};
use crate::{Error, Result};

/// Physical layer parameters shared by every replica or segment of a packet.
#[derive(Clone, Debug, PartialEq)]
pub struct PhyProfile {
    /// Modulation cardinality `M`.
    pub modulation: u32,
    /// FEC code rate `r`.
    pub fec_rate: Ratio<u64>,
    /// Chips per symbol.
    pub spreading_factor: u32,
    /// Information bits per MAC packet.
    pub packet_bits: u32,
    /// Average transmit power per replica over the frame, in Watts.
    pub avg_replica_power: f64,
}

impl PhyProfile {
    pub fn new(modulation: u32, fec_rate: Ratio<u64>, spreading_factor: u32) -> Result<Self> {
        let profile = Self {
            modulation,
            fec_rate,
            spreading_factor,
            packet_bits: 1000,
            avg_replica_power: 1.0,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modulation < 2 || !self.modulation.is_power_of_two() {
            return Err(Error::scenario(format!(
                "modulation cardinality must be a power of two >= 2, got {}",
                self.modulation
            )));
        }
        if *self.fec_rate.numer() == 0 || self.fec_rate > Ratio::from_integer(1) {
            return Err(Error::scenario(format!(
                "FEC rate must lie in (0, 1], got {}",
                self.fec_rate
            )));
        }
        if self.spreading_factor == 0 {
            return Err(Error::scenario("spreading factor must be at least 1"));
        }
        if self.packet_bits == 0 {
            return Err(Error::scenario("packet size must be positive"));
        }
        if !(self.avg_replica_power > 0.0 && self.avg_replica_power.is_finite()) {
            return Err(Error::scenario("average replica power must be positive"));
        }
        Ok(())
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.modulation.trailing_zeros()
    }

    /// `r * log2(M)` as an exact rational.
    pub fn spectral_efficiency(&self) -> Ratio<u64> {
        self.fec_rate * Ratio::from_integer(u64::from(self.bits_per_symbol()))
    }
}

/// Frame layout: slots, CSA slices per slot and frame duration.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameGeometry {
    pub n_slots: u32,
    pub slices_per_slot: u32,
    /// Frame duration in seconds.
    pub frame_duration: f64,
}

impl FrameGeometry {
    pub fn slotted(n_slots: u32) -> Self {
        Self {
            n_slots,
            slices_per_slot: 1,
            frame_duration: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_slots == 0 {
            return Err(Error::scenario("a frame needs at least one slot"));
        }
        if self.slices_per_slot == 0 {
            return Err(Error::scenario("slices per slot must be at least 1"));
        }
        if !(self.frame_duration > 0.0 && self.frame_duration.is_finite()) {
            return Err(Error::scenario("frame duration must be positive"));
        }
        Ok(())
    }

    /// Number of positions a transmission can occupy: `k * N_slots`.
    pub fn total_slices(&self) -> u32 {
        self.n_slots * self.slices_per_slot
    }
}

/// Access scheme and the receiver's SIC iteration cap.
#[derive(Clone, Debug, PartialEq)]
pub enum Scheme {
    Crdsa { n_rep: u32 },
    Irsa { degrees: DegreeDistribution },
    Csa { codebook: Codebook },
    Essa { window: WindowConfig },
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Crdsa { .. } => "CRDSA",
            Scheme::Irsa { .. } => "IRSA",
            Scheme::Csa { .. } => "CSA",
            Scheme::Essa { .. } => "E-SSA",
        }
    }

    pub fn is_slotted(&self) -> bool {
        !matches!(self, Scheme::Essa { .. })
    }

    /// Mean number of packet-equivalents transmitted per user.
    pub fn mean_replicas(&self) -> f64 {
        match self {
            Scheme::Crdsa { n_rep } => f64::from(*n_rep),
            Scheme::Irsa { degrees } => degrees.mean(),
            Scheme::Csa { codebook } => codebook.mean_rate_inverse(),
            Scheme::Essa { .. } => 1.0,
        }
    }

    /// Mean number of slots or slices occupied per user.
    pub fn mean_positions(&self) -> f64 {
        match self {
            Scheme::Csa { codebook } => codebook.mean_length(),
            other => other.mean_replicas(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    /// SIC iteration cap (per frame, or per window for E-SSA).
    pub n_iter: u32,
}

impl SchemeConfig {
    pub fn validate(&self, geometry: &FrameGeometry) -> Result<()> {
        if self.n_iter == 0 {
            return Err(Error::scenario("the SIC iteration cap must be at least 1"));
        }
        let slots = geometry.n_slots;
        match &self.scheme {
            Scheme::Crdsa { n_rep } => {
                if *n_rep < 1 || *n_rep > slots {
                    return Err(Error::scenario(format!(
                        "CRDSA needs 1 <= replicas <= N_slots ({slots}), got {n_rep}"
                    )));
                }
            }
            Scheme::Irsa { degrees } => {
                if degrees.max_degree() > slots {
                    return Err(Error::scenario(format!(
                        "IRSA degree {} exceeds N_slots ({slots})",
                        degrees.max_degree()
                    )));
                }
            }
            Scheme::Csa { codebook } => {
                if codebook.k() != geometry.slices_per_slot {
                    return Err(Error::scenario(format!(
                        "codebook segments k = {} must equal slices per slot ({})",
                        codebook.k(),
                        geometry.slices_per_slot
                    )));
                }
                if codebook.max_length() > geometry.total_slices() {
                    return Err(Error::scenario(format!(
                        "CSA code length {} exceeds the {} available slices",
                        codebook.max_length(),
                        geometry.total_slices()
                    )));
                }
            }
            Scheme::Essa { window } => {
                window.validate()?;
                if slots != 1 {
                    return Err(Error::scenario("E-SSA frames have exactly one slot"));
                }
            }
        }
        if self.scheme.is_slotted()
            && geometry.slices_per_slot != 1
            && !matches!(self.scheme, Scheme::Csa { .. })
        {
            return Err(Error::scenario(
                "slices per slot > 1 is only meaningful for CSA",
            ));
        }
        Ok(())
    }
}

/// One complete simulation scenario. The traffic intensity is left open and set per
/// load point by the sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemConfig {
    pub profile: PhyProfile,
    pub geometry: FrameGeometry,
    pub scheme: SchemeConfig,
    pub traffic: TrafficKind,
    pub power: PowerModel,
    pub reception: ReceptionModel,
    /// Noise power spectral density, linear.
    pub noise: f64,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        self.geometry.validate()?;
        self.scheme.validate(&self.geometry)?;
        self.power.validate()?;
        if self.scheme.scheme.is_slotted() && self.profile.spreading_factor != 1 {
            return Err(Error::scenario(
                "slotted schemes require a spreading factor of 1",
            ));
        }
        if matches!(self.scheme.scheme, Scheme::Essa { .. })
            && matches!(self.reception, ReceptionModel::Collision)
        {
            return Err(Error::InvalidModel {
                model: "collision",
                scheme: "E-SSA",
            });
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return Err(Error::scenario("noise density must be positive"));
        }
        Ok(())
    }
}

/// Rates linking chip rate, bit rate and the frame-averaged bit rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkRates {
    pub processing_gain: f64,
    pub chip_rate: f64,
    pub bit_rate: f64,
    pub frame_avg_bit_rate: f64,
}

impl LinkRates {
    pub fn from_frame_avg_bit_rate(
        profile: &PhyProfile,
        geometry: &FrameGeometry,
        frame_avg_bit_rate: f64,
    ) -> Self {
        let processing_gain = processing_gain_f64(profile);
        let bit_rate = frame_avg_bit_rate * f64::from(geometry.n_slots);
        Self {
            processing_gain,
            chip_rate: bit_rate * processing_gain,
            bit_rate,
            frame_avg_bit_rate,
        }
    }
}

/// Chip rate over effective bit rate: `SF / (r log2 M)`.
pub fn processing_gain(profile: &PhyProfile) -> Ratio<u64> {
    Ratio::from_integer(u64::from(profile.spreading_factor)) / profile.spectral_efficiency()
}

pub fn processing_gain_f64(profile: &PhyProfile) -> f64 {
    ratio_to_f64(processing_gain(profile))
}

pub(crate) fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Mean packet arrivals per frame for normalized load `g`.
pub fn mean_arrival_rate(g: f64, geometry: &FrameGeometry, profile: &PhyProfile) -> f64 {
    f64::from(geometry.n_slots) * g * processing_gain_f64(profile)
}

/// Normalized load for `lambda` packets per frame; inverse of [`mean_arrival_rate`].
pub fn normalized_load(lambda: f64, geometry: &FrameGeometry, profile: &PhyProfile) -> f64 {
    lambda / (processing_gain_f64(profile) * f64::from(geometry.n_slots))
}

/// Occupied signaling rate in chips per second.
pub fn signaling_rate(
    profile: &PhyProfile,
    geometry: &FrameGeometry,
    frame_avg_bit_rate: f64,
) -> f64 {
    frame_avg_bit_rate * processing_gain_f64(profile) * f64::from(geometry.n_slots)
}

/// Carried load `G (1 - PLR)`.
pub fn throughput(g: f64, plr: f64) -> f64 {
    g * (1.0 - plr)
}

/// Energy spent per user and frame, in Joules.
pub fn energy_per_frame(avg_power: f64, n_rep_mean: f64, frame_duration: f64) -> f64 {
    avg_power * n_rep_mean * frame_duration
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyEfficiency {
    /// Bits per Joule.
    pub absolute: f64,
    /// Efficiency divided by `R_c / P_f`.
    pub normalized: f64,
}

pub fn energy_efficiency(
    throughput: f64,
    chip_rate: f64,
    n_rep_mean: f64,
    lambda: f64,
    avg_power: f64,
) -> Result<EnergyEfficiency> {
    if !(lambda > 0.0 && n_rep_mean > 0.0 && avg_power > 0.0 && chip_rate > 0.0) {
        return Err(Error::scenario(
            "energy efficiency needs positive arrival rate, replicas, power and chip rate",
        ));
    }
    let absolute = throughput * chip_rate / (n_rep_mean * lambda * avg_power);
    Ok(EnergyEfficiency {
        absolute,
        normalized: absolute * avg_power / chip_rate,
    })
}

/// Normalized energy efficiency at the target operating point where `T ~= G`:
/// `r log2 M / (N_rep N_slots SF)`.
pub fn approx_normalized_energy_efficiency(
    profile: &PhyProfile,
    geometry: &FrameGeometry,
    n_rep_mean: f64,
) -> f64 {
    ratio_to_f64(profile.spectral_efficiency())
        / (n_rep_mean * f64::from(geometry.n_slots) * f64::from(profile.spreading_factor))
}

/// Symbol SNR from bit SNR. Spreading is not included here; the spread SNIR
/// accounts for it.
pub fn esn0_from_ebn0(ebn0_db: f64, profile: &PhyProfile) -> f64 {
    ebn0_db + 10.0 * ratio_to_f64(profile.spectral_efficiency()).log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
