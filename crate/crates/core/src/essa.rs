//! Unslotted spread-spectrum ALOHA with a sliding-window SIC receiver.
//!
//! Packets start at arbitrary times and each occupies one frame duration. The
//! receiver slides a window over the stream; inside each window it runs synchronous
//! passes over the packets that fit entirely in the window, decoding those whose
//! despread SNIR allows it and cancelling them from every later interference sum.

use rayon::prelude::*;

use crate::model::{Scheme, SystemConfig};
use crate::reception::{attempt_decode, ReceptionModel};
use crate::slotted::Counters;
use crate::traffic::{
    draw_latent, draw_power, draw_stream_arrivals, Purpose, RngStream, TrafficModel,
};
use crate::{Error, Result};

/// Receiver window geometry, in units of the frame (packet) duration.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowConfig {
    pub window_len: f64,
    pub step: f64,
    /// Measured frame durations per independent stream replication.
    pub replication_frames: u32,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_len: 3.0,
            step: 1.0,
            replication_frames: 100,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_len >= 1.0 && self.window_len.is_finite()) {
            return Err(Error::scenario(
                "the SIC window must span at least one packet",
            ));
        }
        if !(self.step > 0.0 && self.step <= self.window_len) {
            return Err(Error::scenario(
                "the window step must lie in (0, window length]",
            ));
        }
        if f64::from(self.replication_frames) < 10.0 * self.window_len {
            return Err(Error::scenario(format!(
                "each replication must span at least 10 windows ({} frames)",
                (10.0 * self.window_len).ceil()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Packet {
    pub start: f64,
    /// Received Es/N0, linear.
    pub power_es: f64,
    pub latent_u: f64,
}

/// Asynchronous packets sorted by start time, all lasting `duration`.
#[derive(Clone, Debug, PartialEq)]
pub struct PacketStream {
    pub packets: Vec<Packet>,
    pub duration: f64,
}

impl PacketStream {
    pub fn new(mut packets: Vec<Packet>, duration: f64) -> Self {
        packets.sort_by(|a, b| a.start.total_cmp(&b.start));
        Self { packets, duration }
    }
}

/// Fraction of `duration` during which two packets starting at `a` and `b` overlap.
pub fn overlap_fraction(a: f64, b: f64, duration: f64) -> f64 {
    ((duration - (a - b).abs()) / duration).clamp(0.0, 1.0)
}

/// Decode state of every packet of a stream after the window receiver has run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StreamOutcome {
    pub decoded: Vec<bool>,
    /// How many times each packet's outcome was frozen; always 1 after a run.
    pub finalized: Vec<u8>,
    /// Windows processed.
    pub windows: u64,
}

/// Runs the sliding-window receiver over a stream.
///
/// A packet is a candidate in every window that fully contains it. Its outcome is
/// frozen once the window start moves past its start time, after which no later
/// window can contain it; undecoded frozen packets keep interfering.
pub fn run_window_sic(
    stream: &PacketStream,
    cfg: &WindowConfig,
    model: &ReceptionModel,
    n_iter: u32,
    sf: u32,
    n0: f64,
) -> Result<StreamOutcome> {
    run_window_sic_traced(stream, cfg, model, n_iter, sf, n0, |_, _| {})
}

/// As [`run_window_sic`], calling `trace(window_index, interference)` at the start
/// of every pass with the current per-packet interference sums.
pub fn run_window_sic_traced<F>(
    stream: &PacketStream,
    cfg: &WindowConfig,
    model: &ReceptionModel,
    n_iter: u32,
    sf: u32,
    n0: f64,
    mut trace: F,
) -> Result<StreamOutcome>
where
    F: FnMut(u64, &[f64]),
{
    if matches!(model, ReceptionModel::Collision) {
        return Err(Error::InvalidModel {
            model: "collision",
            scheme: "E-SSA",
        });
    }
    let packets = &stream.packets;
    let n = packets.len();
    let tau = stream.duration;
    let window = cfg.window_len * tau;
    let step = cfg.step * tau;
    let sf = f64::from(sf.max(1));

    // neighbours of i: packets whose start lies within one duration of i's start
    let mut lo = vec![0usize; n];
    let mut hi = vec![0usize; n];
    let (mut a, mut b) = (0usize, 0usize);
    for i in 0..n {
        let s = packets[i].start;
        while packets[a].start <= s - tau {
            a += 1;
        }
        while b < n && packets[b].start < s + tau {
            b += 1;
        }
        lo[i] = a;
        hi[i] = b;
    }
    let mut interference: Vec<f64> = (0..n)
        .map(|i| {
            (lo[i]..hi[i])
                .filter(|&j| j != i)
                .map(|j| {
                    overlap_fraction(packets[i].start, packets[j].start, tau) * packets[j].power_es
                })
                .sum()
        })
        .collect();

    let mut outcome = StreamOutcome {
        decoded: vec![false; n],
        finalized: vec![0; n],
        windows: 0,
    };
    let mut next_final = 0usize;
    let mut newly = Vec::new();
    let last_start = packets.last().map_or(0.0, |p| p.start);
    let mut k = 0u64;
    loop {
        let w = k as f64 * step;
        if n == 0 || w > last_start {
            break;
        }
        while next_final < n && packets[next_final].start < w {
            outcome.finalized[next_final] += 1;
            next_final += 1;
        }
        let first = next_final;
        let end = packets.partition_point(|p| p.start + tau <= w + window);
        let mut pending = (first..end.max(first))
            .filter(|&i| !outcome.decoded[i])
            .count();
        for _ in 0..n_iter {
            if pending == 0 {
                break;
            }
            trace(k, &interference);
            newly.clear();
            for i in first..end {
                if outcome.decoded[i] {
                    continue;
                }
                let p = &packets[i];
                let snir = p.power_es / (n0 + interference[i].max(0.0) / sf);
                let overlapping = hi[i] - lo[i] - 1;
                if attempt_decode(model, snir, overlapping, p.latent_u) {
                    newly.push(i);
                }
            }
            if newly.is_empty() {
                break;
            }
            pending -= newly.len();
            for &j in &newly {
                outcome.decoded[j] = true;
                let (sj, ej) = (packets[j].start, packets[j].power_es);
                for i in lo[j]..hi[j] {
                    if i != j {
                        interference[i] -= overlap_fraction(packets[i].start, sj, tau) * ej;
                    }
                }
            }
        }
        outcome.windows += 1;
        k += 1;
    }
    for f in &mut outcome.finalized[next_final..] {
        *f += 1;
    }
    Ok(outcome)
}

/// Draws the packet stream of replication `index`.
pub fn realize_stream(
    config: &SystemConfig,
    traffic: &TrafficModel,
    horizon_frames: f64,
    master_seed: u64,
    index: u64,
) -> PacketStream {
    let tau = config.geometry.frame_duration;
    let stream = RngStream::new(master_seed, index);
    let starts = draw_stream_arrivals(
        traffic,
        horizon_frames * tau,
        tau,
        &mut stream.rng(Purpose::Arrivals),
    );
    let mut powers = stream.rng(Purpose::Power);
    let mut latent = stream.rng(Purpose::Latent);
    let packets = starts
        .into_iter()
        .map(|start| Packet {
            start,
            power_es: draw_power(&config.power, &config.profile, &mut powers),
            latent_u: draw_latent(&mut latent),
        })
        .collect();
    PacketStream::new(packets, tau)
}

/// Simulates about `total_frames` measured frame durations, split into independent
/// replications of `replication_frames` each. Every replication is padded by one
/// window length on both sides; only packets lying entirely inside the measured span
/// are counted.
pub fn simulate_stream(
    config: &SystemConfig,
    traffic: &TrafficModel,
    total_frames: u64,
    master_seed: u64,
) -> Result<Counters> {
    config.validate()?;
    traffic.validate()?;
    let Scheme::Essa { window } = &config.scheme.scheme else {
        return Err(Error::scenario("stream simulation needs the E-SSA scheme"));
    };
    if total_frames == 0 {
        return Err(Error::scenario("at least one frame duration is required"));
    }
    let measured = f64::from(window.replication_frames);
    let replications = total_frames.div_ceil(u64::from(window.replication_frames));
    let horizon = measured + 2.0 * window.window_len;
    let tau = config.geometry.frame_duration;
    let (from, to) = (
        window.window_len * tau,
        (window.window_len + measured) * tau,
    );
    let counters = (0..replications)
        .into_par_iter()
        .map(|r| {
            let stream = realize_stream(config, traffic, horizon, master_seed, r);
            let outcome = run_window_sic(
                &stream,
                window,
                &config.reception,
                config.scheme.n_iter,
                config.profile.spreading_factor,
                config.noise,
            )
            .expect("validated reception model");
            let mut c = Counters {
                trials: 1,
                ..Counters::default()
            };
            for (p, &ok) in stream.packets.iter().zip(&outcome.decoded) {
                if p.start >= from && p.start + tau <= to {
                    c.sent += 1;
                    c.lost += u64::from(!ok);
                }
            }
            c
        })
        .reduce(Counters::default, Counters::merge);
    Ok(counters)
}
