use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    #[default]
    Quadratic,
}

/// Terminal regression loss `L(x, y) = ½|x − y|²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TerminalLoss {
    #[serde(default)]
    pub kind: LossKind,
}

impl TerminalLoss {
    pub fn validate(&self, d1: usize, d2: usize) -> Result<()> {
        if d1 != d2 {
            return Err(Error::config(
                "loss.kind",
                format!("quadratic loss needs d1 = d2, got {d1} and {d2}"),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn value<R: Real>(&self, x: &[R], y: &[R]) -> R {
        let half = R::lit(0.5);
        x.iter().zip(y).fold(R::zero(), |s, (&p, &q)| s + half * (p - q) * (p - q))
    }

    #[inline]
    pub fn grad_x_into<R: Real>(&self, x: &[R], y: &[R], out: &mut [R]) {
        for ((o, &p), &q) in out.iter_mut().zip(x).zip(y) {
            *o = p - q;
        }
    }

    /// `∇²_x L`, row-major; identity for the quadratic loss.
    pub fn hess_x<R: Real>(&self, d1: usize) -> Vec<R> {
        let mut h = vec![R::zero(); d1 * d1];
        for i in 0..d1 {
            h[i * d1 + i] = R::one();
        }
        h
    }

    pub fn eval_loss<R: Real>(&self, x: &[R], y: &[R]) -> Result<(R, Vec<R>)> {
        if x.len() != y.len() {
            return Err(Error::Dimension(format!(
                "loss arguments have lengths {} and {}",
                x.len(),
                y.len()
            )));
        }
        let mut g = vec![R::zero(); x.len()];
        self.grad_x_into(x, y, &mut g);
        Ok((self.value(x, y), g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_is_zero() {
        let (v, g) = TerminalLoss::default().eval_loss(&[0.3_f64, -1.0], &[0.3, -1.0]).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn scalar_case() {
        let (v, g) = TerminalLoss::default().eval_loss(&[1.0_f64], &[0.0]).unwrap();
        assert_eq!((v, g[0]), (0.5, 1.0));
    }
}
