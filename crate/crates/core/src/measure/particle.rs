use std::io::Write;

use crate::csv::{fmt_real, CsvWriter};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Empirical measure `(1/M) Σ δ_{a_m}` on the parameter space.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleMeasure<R> {
    pub dim: usize,
    /// `M × dim`, row-major.
    pub points: Vec<R>,
}

impl<R: Real> ParticleMeasure<R> {
    pub fn new(dim: usize, points: Vec<R>) -> Result<Self> {
        if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(Error::DegenerateMeasure("need M ≥ 1 particles of matching dimension".into()));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateMeasure("non-finite particle".into()));
        }
        Ok(Self { dim, points })
    }

    pub fn point_mass(a: &[R]) -> Self {
        Self {
            dim: a.len(),
            points: a.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn weight(&self) -> R {
        R::one() / R::from_usize_lossy(self.len())
    }

    pub fn particle(&self, m: usize) -> &[R] {
        &self.points[m * self.dim..(m + 1) * self.dim]
    }

    /// Coordinate-wise mean.
    pub fn mean(&self) -> Vec<R> {
        let mut mu = vec![R::zero(); self.dim];
        for m in 0..self.len() {
            for (acc, &v) in mu.iter_mut().zip(self.particle(m)) {
                *acc += v;
            }
        }
        let w = self.weight();
        mu.iter_mut().for_each(|v| *v *= w);
        mu
    }

    /// Coordinate-wise (biased) variance.
    pub fn variance(&self) -> Vec<R> {
        let mu = self.mean();
        let mut var = vec![R::zero(); self.dim];
        for m in 0..self.len() {
            for ((acc, &v), &c) in var.iter_mut().zip(self.particle(m)).zip(&mu) {
                *acc += (v - c) * (v - c);
            }
        }
        let w = self.weight();
        var.iter_mut().for_each(|v| *v *= w);
        var
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut header: Vec<String> = (0..self.dim).map(|i| format!("a{i}")).collect();
        header.push("weight".into());
        let mut out = CsvWriter::new(w, &header)?;
        let wt = fmt_real(self.weight());
        for m in 0..self.len() {
            let mut row: Vec<String> = self.particle(m).iter().map(|&x| fmt_real(x)).collect();
            row.push(wt.clone());
            out.row(&row)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_nan() {
        assert!(ParticleMeasure::<f64>::new(2, vec![]).is_err());
        assert!(ParticleMeasure::new(1, vec![f64::NAN]).is_err());
        assert!(ParticleMeasure::new(2, vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn mean_and_variance() {
        let p = ParticleMeasure::new(1, vec![1.0_f64, 3.0]).unwrap();
        assert_eq!(p.mean(), vec![2.0]);
        assert_eq!(p.variance(), vec![1.0]);
    }
}
