use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::{Error, Result};

/// Probability mass function over the number of replicas a user sends, written in
/// polynomial notation (`0.5x2+0.28x3+0.22x8`).
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeDistribution {
    /// `(degree, probability)`, sorted by degree.
    entries: Vec<(u32, f64)>,
    cumulative: Vec<f64>,
}

impl DegreeDistribution {
    pub fn new(mut entries: Vec<(u32, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidDistribution("no degrees given".into()));
        }
        entries.sort_by_key(|&(d, _)| d);
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::InvalidDistribution(format!(
                    "degree {} appears more than once",
                    pair[0].0
                )));
            }
        }
        for &(d, p) in &entries {
            if d == 0 {
                return Err(Error::InvalidDistribution("degree 0 is not allowed".into()));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidDistribution(format!(
                    "probability {p} of degree {d} outside [0, 1]"
                )));
            }
        }
        let total: f64 = entries.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let mut acc = 0.0;
        let cumulative = entries
            .iter()
            .map(|&(_, p)| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self {
            entries,
            cumulative,
        })
    }

    /// All users send exactly `degree` replicas.
    pub fn regular(degree: u32) -> Self {
        Self::new(vec![(degree, 1.0)]).expect("regular distribution")
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    /// Mean degree, `Lambda'(1)`.
    pub fn mean(&self) -> f64 {
        self.entries.iter().map(|&(d, p)| f64::from(d) * p).sum()
    }

    pub fn max_degree(&self) -> u32 {
        self.entries.last().map_or(0, |&(d, _)| d)
    }

    /// Node-perspective polynomial `Lambda(x)`.
    pub fn node_poly(&self, x: f64) -> f64 {
        self.entries
            .iter()
            .map(|&(d, p)| p * x.powi(d as i32))
            .sum()
    }

    /// Edge-perspective polynomial `lambda(x) = Lambda'(x) / Lambda'(1)`.
    pub fn edge_poly(&self, x: f64) -> f64 {
        let num: f64 = self
            .entries
            .iter()
            .map(|&(d, p)| f64::from(d) * p * x.powi(d as i32 - 1))
            .sum();
        num / self.mean()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        if self.entries.len() == 1 {
            return self.entries[0].0;
        }
        let u: f64 = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.entries[idx.min(self.entries.len() - 1)].0
    }
}

impl fmt::Display for DegreeDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &(d, p)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            if p == 1.0 {
                write!(f, "x{d}")?;
            } else {
                write!(f, "{p}x{d}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for DegreeDistribution {
    type Err = Error;

    /// Parses terms like `0.5x2`, `x^3` or `0.22 x8` joined by `+`. Positions in parse
    /// errors are 0-based byte offsets.
    fn from_str(s: &str) -> Result<Self> {
        let bytes = s.as_bytes();
        let mut pos = 0;
        let mut entries = Vec::new();
        let skip_ws = |pos: &mut usize| {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
        };
        let err = |position: usize, message: &str| Error::Parse {
            position,
            message: message.to_string(),
        };
        loop {
            skip_ws(&mut pos);
            let start = pos;
            while pos < bytes.len()
                && (bytes[pos].is_ascii_digit() || matches!(bytes[pos], b'.' | b'e' | b'E'))
            {
                pos += 1;
            }
            let coeff = if pos > start {
                s[start..pos]
                    .parse::<f64>()
                    .map_err(|_| err(start, "malformed coefficient"))?
            } else {
                1.0
            };
            skip_ws(&mut pos);
            if pos < bytes.len() && bytes[pos] == b'*' {
                pos += 1;
                skip_ws(&mut pos);
            }
            if pos >= bytes.len() || bytes[pos] != b'x' {
                return Err(err(pos, "expected `x`"));
            }
            pos += 1;
            if pos < bytes.len() && bytes[pos] == b'^' {
                pos += 1;
            }
            let dstart = pos;
            while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                pos += 1;
            }
            let degree = if pos > dstart {
                s[dstart..pos]
                    .parse::<u32>()
                    .map_err(|_| err(dstart, "degree out of range"))?
            } else {
                1
            };
            if degree == 0 {
                return Err(err(dstart, "degree must be at least 1"));
            }
            entries.push((degree, coeff));
            skip_ws(&mut pos);
            if pos == bytes.len() {
                break;
            }
            if bytes[pos] != b'+' {
                return Err(err(pos, "expected `+` or end of input"));
            }
            pos += 1;
        }
        DegreeDistribution::new(entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::{Purpose, RngStream};

    #[test]
    fn parse_and_mean() {
        let d: DegreeDistribution = "x2".parse().unwrap();
        assert_eq!(d.mean(), 2.0);
        let g3: DegreeDistribution = "0.5x2+0.28x3+0.22x8".parse().unwrap();
        assert!((g3.mean() - 3.6).abs() < 1e-12);
        let g4: DegreeDistribution = "0.25 x^2 + 0.6x3 + 0.15x8".parse().unwrap();
        assert!((g4.mean() - 3.5).abs() < 1e-12);
        assert_eq!(g4.max_degree(), 8);
    }

    #[test]
    fn parse_errors_carry_position() {
        let e = "0.5x2+0.6x3".parse::<DegreeDistribution>().unwrap_err();
        assert!(e.to_string().contains("1.1"), "{e}");
        match "0.5x2+0.5y3".parse::<DegreeDistribution>() {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 9),
            other => panic!("{other:?}"),
        }
        match "0.5x2 0.5x3".parse::<DegreeDistribution>() {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 6),
            other => panic!("{other:?}"),
        }
        assert!("0.5x2+0.5x2".parse::<DegreeDistribution>().is_err());
        assert!("x0".parse::<DegreeDistribution>().is_err());
    }

    #[test]
    fn polynomials() {
        let d: DegreeDistribution = "0.5x2+0.5x4".parse().unwrap();
        assert!((d.node_poly(0.5) - (0.125 + 0.03125)).abs() < 1e-15);
        // lambda(x) = (0.5*2x + 0.5*4x^3)/3
        assert!((d.edge_poly(0.5) - (0.5 + 0.25) / 3.0).abs() < 1e-15);
        assert!((d.edge_poly(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sampling_frequencies() {
        let d: DegreeDistribution = "0.25x2+0.6x3+0.15x8".parse().unwrap();
        let mut rng = RngStream::new(11, 0).rng(Purpose::Selection);
        let n = 100_000;
        let mut counts = [0u64; 9];
        for _ in 0..n {
            counts[d.sample(&mut rng) as usize] += 1;
        }
        for &(deg, p) in d.entries() {
            let freq = counts[deg as usize] as f64 / n as f64;
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (freq - p).abs() < 3.0 * sigma,
                "degree {deg}: {freq} vs {p}"
            );
        }
        let mean = counts
            .iter()
            .enumerate()
            .map(|(d, &c)| d as f64 * c as f64)
            .sum::<f64>()
            / n as f64;
        assert!((mean - 3.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn display_round_trips() {
        let d: DegreeDistribution = "0.5x2+0.28x3+0.22x8".parse().unwrap();
        let again: DegreeDistribution = d.to_string().parse().unwrap();
        assert_eq!(d, again);
    }
}
