//! Joint spectra of commuting deterministic matrices.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use faer::Mat;

use crate::dsl::Rewrite;
use crate::error::{Error, Result};

/// Simultaneous eigenvalues of a family of commuting matrices of one
/// dimension: `tuples[k][c]` is the eigenvalue of `names[c]` along direction
/// `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumSpec {
    pub dim: String,
    pub names: Vec<String>,
    pub tuples: Vec<Vec<f64>>,
}

impl SpectrumSpec {
    pub fn new(dim: &str, names: &[&str], tuples: Vec<Vec<f64>>) -> Result<SpectrumSpec> {
        let s = SpectrumSpec {
            dim: dim.to_string(),
            names: names.iter().map(|n| n.to_string()).collect(),
            tuples,
        };
        s.check()?;
        Ok(s)
    }

    /// Every listed matrix equal to the identity.
    pub fn identity(dim: &str, names: &[&str]) -> SpectrumSpec {
        SpectrumSpec::new(dim, names, vec![vec![1.0; names.len()]]).unwrap()
    }

    /// Independent columns sharing a direction index, e.g.
    /// `from_columns("d", &[("Sigma", sig), ("Theta", th)])`.
    pub fn from_columns(dim: &str, cols: &[(&str, Vec<f64>)]) -> Result<SpectrumSpec> {
        let len = cols.first().map_or(0, |c| c.1.len());
        let tuples = (0..len).map(|k| cols.iter().map(|c| c.1.get(k).copied().unwrap_or(f64::NAN)).collect()).collect();
        let names: Vec<&str> = cols.iter().map(|c| c.0).collect();
        SpectrumSpec::new(dim, &names, tuples)
    }

    fn check(&self) -> Result<()> {
        if self.tuples.is_empty() {
            return Err(Error::Invalid(format!("spectrum for {} has no eigendirections", self.dim)));
        }
        for (k, t) in self.tuples.iter().enumerate() {
            if t.len() != self.names.len() {
                return Err(Error::Invalid(format!(
                    "spectrum for {}: direction {k} has {} values for {} matrices",
                    self.dim,
                    t.len(),
                    self.names.len()
                )));
            }
            if t.iter().any(|x| !x.is_finite()) {
                return Err(Error::Invalid(format!("spectrum for {}: non-finite value in direction {k}", self.dim)));
            }
        }
        Ok(())
    }

    /// CSV with a header row of matrix names and one row per direction.
    pub fn from_csv_reader<R: Read>(dim: &str, reader: R) -> Result<SpectrumSpec> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut tuples = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|x| x.parse::<f64>().map_err(|_| Error::parse(k + 2, 1, format!("bad number {x:?}"))))
                .collect::<Result<Vec<f64>>>()?;
            tuples.push(row);
        }
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        SpectrumSpec::new(dim, &refs, tuples)
    }

    pub fn from_csv(dim: &str, path: impl AsRef<Path>) -> Result<SpectrumSpec> {
        SpectrumSpec::from_csv_reader(dim, std::fs::File::open(path)?)
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.column_index(name)?;
        Some(self.tuples.iter().map(|t| t[c]).collect())
    }

    fn push_column(&mut self, name: &str, values: Vec<f64>) {
        self.names.push(name.to_string());
        for (t, v) in self.tuples.iter_mut().zip(values) {
            t.push(v);
        }
    }

    /// Adds the matrices implied by `rewrites`: `Sigma` from `Sigma_sqrt` or
    /// the positive root the other way round.
    pub fn derive(&self, rewrites: &[Rewrite]) -> Result<SpectrumSpec> {
        let mut out = self.clone();
        for rw in rewrites {
            match (out.column(&rw.base), out.column(&rw.target)) {
                (Some(b), None) => {
                    let t = b.iter().map(|x| x.powi(rw.power as i32)).collect();
                    out.push_column(&rw.target, t);
                }
                (None, Some(t)) => {
                    if t.iter().any(|x| *x < 0.0) && rw.power % 2 == 0 {
                        return Err(Error::Invalid(format!(
                            "{} has negative eigenvalues, no real root for {}",
                            rw.target, rw.base
                        )));
                    }
                    let b = t.iter().map(|x| x.signum() * x.abs().powf(1.0 / rw.power as f64)).collect();
                    out.push_column(&rw.base, b);
                }
                _ => {}
            }
        }
        Ok(out)
    }

    /// Diagonal `size x size` realization of `name`; direction `k` is reused
    /// in proportion when `size` differs from the number of directions.
    pub fn diagonal(&self, name: &str, size: usize) -> Option<Mat<f64>> {
        let c = self.column_index(name)?;
        let len = self.tuples.len();
        let mut m = Mat::zeros(size, size);
        for i in 0..size {
            m[(i, i)] = self.tuples[i * len / size][c];
        }
        Some(m)
    }
}

/// Finds the spectrum of dimension `dim` that lists `name`.
pub fn lookup<'a>(spectra: &'a [SpectrumSpec], dim: &str, name: &str) -> Option<&'a SpectrumSpec> {
    spectra.iter().find(|s| s.dim == dim && s.column_index(name).is_some())
}

/// Applies [`SpectrumSpec::derive`] to every spectrum.
pub fn derive_all(spectra: &[SpectrumSpec], rewrites: &[Rewrite]) -> Result<Vec<SpectrumSpec>> {
    spectra.iter().map(|s| s.derive(rewrites)).collect()
}

/// Named positive reals for constants (and any dimension left in a system).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NumericBinding {
    pub values: BTreeMap<String, f64>,
}

impl NumericBinding {
    pub fn new() -> NumericBinding {
        NumericBinding::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> NumericBinding {
        self.values.insert(name.to_string(), value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.values.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    /// `k=v,k=v`; values may be fractions such as `1/3`.
    pub fn parse(s: &str) -> Result<NumericBinding> {
        let mut out = NumericBinding::new();
        for (k, v) in parse_pairs(s)? {
            out.set(&k, parse_real(&v)?);
        }
        Ok(out)
    }
}

pub(crate) fn parse_pairs(s: &str) -> Result<Vec<(String, String)>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (k, v) = p.split_once('=').ok_or_else(|| Error::Invalid(format!("expected name=value, got {p:?}")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

pub(crate) fn parse_real(v: &str) -> Result<f64> {
    let bad = || Error::Invalid(format!("bad number {v:?}"));
    match v.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            Ok(a / b)
        }
        None => v.parse().map_err(|_| bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_square_and_root() {
        let rw = [Rewrite { base: "S".into(), power: 2, target: "Sigma".into() }];
        let s = SpectrumSpec::from_columns("d", &[("S", vec![1.0, 2.0])]).unwrap().derive(&rw).unwrap();
        assert_eq!(s.column("Sigma").unwrap(), vec![1.0, 4.0]);
        let s = SpectrumSpec::from_columns("d", &[("Sigma", vec![4.0, 9.0])]).unwrap().derive(&rw).unwrap();
        assert_eq!(s.column("S").unwrap(), vec![2.0, 3.0]);
    }

    #[test]
    fn csv_and_diagonal() {
        let s = SpectrumSpec::from_csv_reader("d", "Sigma, Theta\n1, 2\n3, 4\n".as_bytes()).unwrap();
        assert_eq!(s.tuples, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let m = s.diagonal("Theta", 4).unwrap();
        assert_eq!((m[(0, 0)], m[(1, 1)], m[(2, 2)], m[(3, 3)]), (2.0, 2.0, 4.0, 4.0));
        assert!(SpectrumSpec::from_csv_reader("d", "a,b\n1\n".as_bytes()).is_err());
    }

    #[test]
    fn binding_parse() {
        let b = NumericBinding::parse("lambda=0.1, p1=1/3").unwrap();
        assert_eq!(b.get("lambda"), Some(0.1));
        assert!((b.get("p1").unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(NumericBinding::parse("lambda").is_err());
    }
}
