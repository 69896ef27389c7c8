use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Dense feature matrix with one integer class label per row.
///
/// On disk: a header line `m d`, then `m` rows of `d` features followed by
/// the label, whitespace separated.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: DMatrix<f64>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch { expected: features.nrows(), found: labels.len() });
        }
        Ok(Dataset { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Rows `idx` as a new matrix.
    pub fn rows(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), self.dim(), |r, c| self.features[(idx[r], c)])
    }

    /// Binary targets used by the logistic loss: label parity.
    pub fn binary_targets(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| (self.labels[i] % 2) as f64).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut next_usize = |what: &str| -> Result<usize> {
            tokens
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {what}")))?
                .parse()
                .map_err(|e| Error::Parse(format!("bad {what}: {e}")))
        };
        let m = next_usize("sample count")?;
        let d = next_usize("dimension")?;
        let mut features = DMatrix::zeros(m, d);
        let mut labels = Vec::with_capacity(m);
        let mut rest = text.split_whitespace().skip(2);
        for r in 0..m {
            for c in 0..d {
                let tok = rest.next().ok_or_else(|| Error::Parse(format!("row {r}: expected {d} features")))?;
                features[(r, c)] =
                    tok.parse().map_err(|e| Error::Parse(format!("row {r} column {c}: {e}")))?;
            }
            let tok = rest.next().ok_or_else(|| Error::Parse(format!("row {r}: missing label")))?;
            labels.push(tok.parse().map_err(|e| Error::Parse(format!("row {r} label: {e}")))?);
        }
        if rest.next().is_some() {
            return Err(Error::Parse(format!("trailing data after {m} rows")));
        }
        Dataset::new(features, labels)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Dataset::parse(&fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.len(), self.dim());
        for r in 0..self.len() {
            for c in 0..self.dim() {
                let _ = write!(out, "{:e} ", self.features[(r, c)]);
            }
            let _ = writeln!(out, "{}", self.labels[r]);
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Gaussian blobs: `classes` centres drawn from `N(0, separation² I)`, rows
/// are centre plus unit noise, everything scaled by `1/√d`. Labels cycle
/// through the classes so class sizes differ by at most one.
pub fn make_classification(m: usize, d: usize, classes: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if m == 0 || d == 0 || classes == 0 {
        return Err(Error::invalid("classification data needs m, d, classes >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { crate::gauss(&mut rng) };
    let centres = DMatrix::from_fn(classes, d, |_, _| separation * normal());
    let scale = 1.0 / (d as f64).sqrt();
    let labels: Vec<usize> = (0..m).map(|i| i % classes).collect();
    let mut features = DMatrix::zeros(m, d);
    for r in 0..m {
        for c in 0..d {
            features[(r, c)] = scale * (centres[(labels[r], c)] + normal());
        }
    }
    Dataset::new(features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let ds = make_classification(12, 3, 4, 2.0, 9).unwrap();
        let back = Dataset::parse(&ds.to_text()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn parse_errors() {
        assert!(Dataset::parse("").is_err());
        assert!(Dataset::parse("2 1\n0.5 1\n").is_err());
        assert!(Dataset::parse("1 1\n0.5 x\n").is_err());
        assert!(Dataset::parse("1 1\n0.5 1\n7\n").is_err());
        let ds = Dataset::parse("2 2\n1 2 0\n3 4 1\n").unwrap();
        assert_eq!(ds.labels, vec![0, 1]);
        assert_eq!(ds.features[(1, 0)], 3.0);
    }

    #[test]
    fn parity_targets() {
        let ds = Dataset::parse("3 1\n0 0\n0 3\n0 8\n").unwrap();
        assert_eq!(ds.binary_targets(&[0, 1, 2]), vec![0.0, 1.0, 0.0]);
    }
}
