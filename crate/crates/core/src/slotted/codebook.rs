use std::path::Path;

use rand::Rng;

use crate::{Error, Result};

/// A binary linear block code mapping `k` packet segments onto `n` encoded segments.
#[derive(Clone, Debug, PartialEq)]
pub struct Code {
    k: u32,
    n: u32,
    /// Generator columns, bit `i` set when segment `i` contributes.
    columns: Vec<u64>,
    probability: f64,
}

impl Code {
    /// Builds a code from its `k` generator rows.
    pub fn new(rows: &[Vec<u8>], probability: f64) -> Result<Self> {
        let k = rows.len();
        if k == 0 || k > 64 {
            return Err(Error::InvalidCodebook(format!(
                "k = {k} must lie in [1, 64]"
            )));
        }
        let n = rows[0].len();
        if n < k || n > 64 {
            return Err(Error::InvalidCodebook(format!(
                "code length {n} must lie in [k = {k}, 64]"
            )));
        }
        let mut columns = vec![0u64; n];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidCodebook(format!(
                    "generator row {} has {} entries, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            for (j, &bit) in row.iter().enumerate() {
                match bit {
                    0 => {}
                    1 => columns[j] |= 1 << i,
                    other => {
                        return Err(Error::InvalidCodebook(format!(
                            "entry {other} is not binary"
                        )))
                    }
                }
            }
        }
        if !(probability > 0.0 && probability <= 1.0) {
            return Err(Error::InvalidCodebook(format!(
                "selection probability {probability} outside (0, 1]"
            )));
        }
        let code = Self {
            k: k as u32,
            n: n as u32,
            columns,
            probability,
        };
        if code.rank_of(code.all_segments()) != k {
            return Err(Error::InvalidCodebook(format!(
                "({n}, {k}) generator does not have full rank"
            )));
        }
        Ok(code)
    }

    /// Repetition code: one segment sent `n` times.
    pub fn repetition(n: u32, probability: f64) -> Result<Self> {
        Self::new(&[vec![1; n as usize]], probability)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn probability(&self) -> f64 {
        self.probability
    }

    pub fn columns(&self) -> &[u64] {
        &self.columns
    }

    /// Generator row `i` as 0/1 entries.
    pub fn row(&self, i: u32) -> Vec<u8> {
        self.columns.iter().map(|c| ((c >> i) & 1) as u8).collect()
    }

    pub fn all_segments(&self) -> u64 {
        if self.n == 64 {
            u64::MAX
        } else {
            (1u64 << self.n) - 1
        }
    }

    /// GF(2) rank of the generator columns selected by `mask`.
    pub fn rank_of(&self, mask: u64) -> usize {
        // xor basis indexed by leading bit
        let mut basis = [0u64; 64];
        let mut rank = 0;
        for (j, &col) in self.columns.iter().enumerate() {
            if mask >> j & 1 == 0 {
                continue;
            }
            let mut v = col;
            while v != 0 {
                let lead = 63 - v.leading_zeros() as usize;
                if basis[lead] == 0 {
                    basis[lead] = v;
                    rank += 1;
                    break;
                }
                v ^= basis[lead];
            }
            if rank == self.k as usize {
                break;
            }
        }
        rank
    }
}

/// True when the segments in `received` (bit mask over `0..n`) determine all `k`
/// source segments.
pub fn recoverable(code: &Code, received: u64) -> bool {
    code.rank_of(received) == code.k as usize
}

/// Set of codes users draw from, all sharing the same `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    codes: Vec<Code>,
    cumulative: Vec<f64>,
}

/// Names of the codebooks shipped with the crate.
pub const BUILTIN_CODEBOOKS: [&str; 4] = ["rep-2", "rate-1/2", "rate-1/3", "rate-3/5"];

impl Codebook {
    pub fn new(codes: Vec<Code>) -> Result<Self> {
        let Some(first) = codes.first() else {
            return Err(Error::InvalidCodebook("no codes given".into()));
        };
        let k = first.k;
        if let Some(bad) = codes.iter().find(|c| c.k != k) {
            return Err(Error::InvalidCodebook(format!(
                "all codes must share k = {k}, found k = {}",
                bad.k
            )));
        }
        let total: f64 = codes.iter().map(|c| c.probability).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidCodebook(format!(
                "selection probabilities sum to {total}, not 1"
            )));
        }
        let mut acc = 0.0;
        let cumulative = codes
            .iter()
            .map(|c| {
                acc += c.probability;
                acc
            })
            .collect();
        Ok(Self { codes, cumulative })
    }

    /// Illustrative codebooks. They are not the codebooks of any published CSA design.
    pub fn builtin(name: &str) -> Result<Self> {
        let rows = |lines: &[&str]| -> Vec<Vec<u8>> {
            lines
                .iter()
                .map(|l| l.bytes().map(|b| b - b'0').collect())
                .collect()
        };
        let codes = match name {
            "rep-2" => vec![Code::repetition(2, 1.0)?],
            "rate-1/2" => vec![
                Code::new(&rows(&["101", "011"]), 0.25)?,
                Code::new(&rows(&["1010", "0101"]), 0.5)?,
                Code::new(&rows(&["10101", "01011"]), 0.25)?,
            ],
            "rate-1/3" => vec![
                Code::new(&rows(&["1011", "0101"]), 0.25)?,
                Code::new(&rows(&["101101", "011011"]), 0.5)?,
                Code::new(&rows(&["10110110", "01101101"]), 0.25)?,
            ],
            "rate-3/5" => vec![
                Code::new(&rows(&["1001", "0101", "0011"]), 0.5)?,
                Code::new(&rows(&["100110", "010101", "001011"]), 0.5)?,
            ],
            other => {
                return Err(Error::InvalidCodebook(format!(
                    "unknown builtin codebook `{other}` (known: {})",
                    BUILTIN_CODEBOOKS.join(", ")
                )))
            }
        };
        Self::new(codes)
    }

    /// Parses the block format: a `k,n_h,prob` line followed by `k` generator rows
    /// of 0/1 characters, blocks separated by blank lines. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut codes = Vec::new();
        let mut header: Option<(usize, usize, f64, usize)> = None;
        let mut rows: Vec<Vec<u8>> = Vec::new();
        let finish =
            |header: &mut Option<(usize, usize, f64, usize)>,
             rows: &mut Vec<Vec<u8>>,
             codes: &mut Vec<Code>|
             -> Result<()> {
                if let Some((k, n, p, line)) = header.take() {
                    if rows.len() != k {
                        return Err(Error::InvalidCodebook(format!(
                            "block starting at line {line} has {} generator rows, expected {k}",
                            rows.len()
                        )));
                    }
                    if rows.iter().any(|r| r.len() != n) {
                        return Err(Error::InvalidCodebook(format!(
                            "block starting at line {line}: generator rows must have {n} entries"
                        )));
                    }
                    codes.push(Code::new(rows, p).map_err(|e| {
                        Error::InvalidCodebook(format!("block at line {line}: {e}"))
                    })?);
                    rows.clear();
                }
                Ok(())
            };
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                if raw.trim_start().starts_with('#') {
                    continue;
                }
                finish(&mut header, &mut rows, &mut codes)?;
                continue;
            }
            if header.is_none() {
                let fields: Vec<&str> = line.split(',').map(str::trim).collect();
                if fields.len() != 3 {
                    return Err(Error::InvalidCodebook(format!(
                        "line {line_no}: expected `k,n_h,prob`"
                    )));
                }
                let bad =
                    || Error::InvalidCodebook(format!("line {line_no}: malformed `k,n_h,prob`"));
                let k = fields[0].parse().map_err(|_| bad())?;
                let n = fields[1].parse().map_err(|_| bad())?;
                let p = fields[2].parse().map_err(|_| bad())?;
                header = Some((k, n, p, line_no));
            } else {
                let row: Vec<u8> = line
                    .bytes()
                    .map(|b| match b {
                        b'0' => Ok(0),
                        b'1' => Ok(1),
                        _ => Err(Error::InvalidCodebook(format!(
                            "line {line_no}: generator rows contain only 0 and 1"
                        ))),
                    })
                    .collect::<Result<_>>()?;
                rows.push(row);
            }
        }
        finish(&mut header, &mut rows, &mut codes)?;
        Self::new(codes)
    }

    /// Loads `builtin:<name>` or a codebook file.
    pub fn load(spec: &str, base: &Path) -> Result<Self> {
        if let Some(name) = spec.strip_prefix("builtin:") {
            return Self::builtin(name);
        }
        let path = base.join(spec);
        let text = std::fs::read_to_string(&path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        Self::parse(&text).map_err(|e| Error::InvalidCodebook(format!("{}: {e}", path.display())))
    }

    /// Serializes to the block format accepted by [`Codebook::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, code) in self.codes.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&format!("{},{},{}\n", code.k, code.n, code.probability));
            for r in 0..code.k {
                out.extend(code.row(r).iter().map(|&b| if b == 1 { '1' } else { '0' }));
                out.push('\n');
            }
        }
        out
    }

    pub fn codes(&self) -> &[Code] {
        &self.codes
    }

    pub fn k(&self) -> u32 {
        self.codes[0].k
    }

    pub fn max_length(&self) -> u32 {
        self.codes.iter().map(|c| c.n).max().unwrap_or(0)
    }

    /// Mean number of encoded segments per user.
    pub fn mean_length(&self) -> f64 {
        self.codes
            .iter()
            .map(|c| c.probability * f64::from(c.n))
            .sum()
    }

    /// Mean packet-equivalents transmitted per user, `n_h / k` on average.
    pub fn mean_rate_inverse(&self) -> f64 {
        self.mean_length() / f64::from(self.k())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.codes.len() == 1 {
            return 0;
        }
        let u: f64 = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.codes.len() - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parity() -> Code {
        // columns (1,0), (0,1), (1,1)
        Code::new(&[vec![1, 0, 1], vec![0, 1, 1]], 1.0).unwrap()
    }

    #[test]
    fn recoverability_examples() {
        let rep = Code::repetition(2, 1.0).unwrap();
        assert!(recoverable(&rep, 0b01));
        assert!(!recoverable(&rep, 0));
        let c = parity();
        assert!(!recoverable(&c, 0b100));
        assert!(recoverable(&c, 0b101));
        assert!(recoverable(&c, 0b011));
        assert!(recoverable(&c, 0b111));
    }

    #[test]
    fn rank_deficient_generator_rejected() {
        assert!(Code::new(&[vec![1, 1, 0], vec![1, 1, 0]], 1.0).is_err());
        assert!(Code::new(&[vec![1, 0], vec![0, 1], vec![1, 1]], 1.0).is_err());
        assert!(Code::new(&[vec![1, 2]], 1.0).is_err());
    }

    #[test]
    fn builtins_are_valid() {
        for name in BUILTIN_CODEBOOKS {
            let cb = Codebook::builtin(name).unwrap();
            assert!(cb.max_length() <= 8);
        }
        assert!((Codebook::builtin("rate-1/2").unwrap().mean_rate_inverse() - 2.0).abs() < 1e-12);
        assert!((Codebook::builtin("rate-1/3").unwrap().mean_rate_inverse() - 3.0).abs() < 1e-12);
        assert!(
            (Codebook::builtin("rate-3/5").unwrap().mean_rate_inverse() - 5.0 / 3.0).abs() < 1e-12
        );
        assert!(Codebook::builtin("nope").is_err());
    }

    #[test]
    fn text_format_round_trip() {
        let cb = Codebook::builtin("rate-1/2").unwrap();
        let again = Codebook::parse(&cb.to_text()).unwrap();
        assert_eq!(cb, again);
        let text = "# comment\n2,3,1.0\n101\n011\n";
        assert_eq!(Codebook::parse(text).unwrap().codes()[0], parity());
    }

    #[test]
    fn malformed_files() {
        assert!(Codebook::parse("2,3,1.0\n101\n").is_err());
        assert!(Codebook::parse("2,3,0.5\n101\n011\n").is_err());
        assert!(Codebook::parse("2,3\n101\n011\n").is_err());
        assert!(Codebook::parse("2,3,1\n1a1\n011\n").is_err());
        assert!(Codebook::parse("1,2,0.5\n11\n\n2,3,0.5\n101\n011\n").is_err());
    }
}
