use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// One labelled sample as it appears in a configuration document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplePoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Label rule for synthetic one-dimensional datasets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticTarget {
    /// `y = x`: the network has nothing to learn.
    Identity,
    /// `y = x + amplitude`.
    Shift,
    /// `y = x + amplitude · sin(π x / x_max)`.
    Sine,
    /// `y = (1 + amplitude) x`.
    Stretch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSpec {
    Explicit {
        points: Vec<SamplePoint>,
    },
    /// `n` features evenly spaced on `[x_min, x_max]` (`d1 = d2 = 1`).
    Synthetic {
        n: usize,
        x_min: f64,
        x_max: f64,
        target: SyntheticTarget,
        #[serde(default)]
        amplitude: f64,
    },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Synthetic {
            n: 64,
            x_min: -1.5,
            x_max: 1.5,
            target: SyntheticTarget::Sine,
            amplitude: 0.5,
        }
    }
}

/// Empirical feature/label law `γ₀ = (1/N) Σ δ_{(x_i, y_i)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<R> {
    pub d1: usize,
    pub d2: usize,
    /// Features, `N × d1` row-major.
    pub xs: Vec<R>,
    /// Labels, `N × d2` row-major.
    pub ys: Vec<R>,
}

impl<R: Real> Dataset<R> {
    pub fn new(d1: usize, d2: usize, xs: Vec<R>, ys: Vec<R>) -> Result<Self> {
        if d1 == 0 || d2 == 0 || xs.is_empty() {
            return Err(Error::config("dataset", "need at least one point with d1, d2 ≥ 1"));
        }
        if !xs.len().is_multiple_of(d1) || !ys.len().is_multiple_of(d2) || xs.len() / d1 != ys.len() / d2 {
            return Err(Error::config("dataset", "feature and label counts disagree"));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::config("dataset", "non-finite coordinate"));
        }
        Ok(Self { d1, d2, xs, ys })
    }

    pub fn len(&self) -> usize {
        self.xs.len() / self.d1
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn x(&self, i: usize) -> &[R] {
        &self.xs[i * self.d1..(i + 1) * self.d1]
    }

    pub fn y(&self, i: usize) -> &[R] {
        &self.ys[i * self.d2..(i + 1) * self.d2]
    }

    /// Returns `(1/N) Σ (|x|² + |y|²)^{k/2}`.
    pub fn moment(&self, k: i32) -> R {
        let n = self.len();
        let mut acc = R::zero();
        for i in 0..n {
            let r2 = self.x(i).iter().chain(self.y(i)).fold(R::zero(), |s, &v| s + v * v);
            acc += r2.sqrt().powi(k);
        }
        acc / R::from_usize_lossy(n)
    }
}

impl DatasetSpec {
    pub fn build<R: Real>(&self, d1: usize) -> Result<Dataset<R>> {
        match self {
            DatasetSpec::Explicit { points } => {
                let first = points
                    .first()
                    .ok_or_else(|| Error::config("dataset.points", "empty dataset"))?;
                let d2 = first.y.len();
                let mut xs = Vec::with_capacity(points.len() * d1);
                let mut ys = Vec::with_capacity(points.len() * d2);
                for (i, p) in points.iter().enumerate() {
                    if p.x.len() != d1 || p.y.len() != d2 {
                        return Err(Error::config(
                            format!("dataset.points[{i}]"),
                            format!("expected x of length {d1} and y of length {d2}"),
                        ));
                    }
                    xs.extend(p.x.iter().map(|&v| R::lit(v)));
                    ys.extend(p.y.iter().map(|&v| R::lit(v)));
                }
                Dataset::new(d1, d2, xs, ys)
            }
            &DatasetSpec::Synthetic {
                n,
                x_min,
                x_max,
                target,
                amplitude,
            } => {
                if d1 != 1 {
                    return Err(Error::config("dataset.kind", "synthetic datasets require d1 = 1"));
                }
                if n == 0 {
                    return Err(Error::config("dataset.n", "must be at least 1"));
                }
                if !(x_min.is_finite() && x_max.is_finite() && x_min <= x_max) {
                    return Err(Error::config("dataset.x_min", "need finite x_min ≤ x_max"));
                }
                let scale = x_max.abs().max(x_min.abs()).max(f64::MIN_POSITIVE);
                let mut xs = Vec::with_capacity(n);
                let mut ys = Vec::with_capacity(n);
                for i in 0..n {
                    let x = if n == 1 {
                        0.5 * (x_min + x_max)
                    } else {
                        x_min + (x_max - x_min) * i as f64 / (n - 1) as f64
                    };
                    let y = match target {
                        SyntheticTarget::Identity => x,
                        SyntheticTarget::Shift => x + amplitude,
                        SyntheticTarget::Sine => x + amplitude * (std::f64::consts::PI * x / scale).sin(),
                        SyntheticTarget::Stretch => (1.0 + amplitude) * x,
                    };
                    xs.push(R::lit(x));
                    ys.push(R::lit(y));
                }
                Dataset::new(1, 1, xs, ys)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_labels_copy_features() {
        let d: Dataset<f64> = DatasetSpec::Synthetic {
            n: 5,
            x_min: -1.0,
            x_max: 1.0,
            target: SyntheticTarget::Identity,
            amplitude: 0.0,
        }
        .build(1)
        .unwrap();
        assert_eq!(d.len(), 5);
        assert_eq!(d.xs, d.ys);
        assert_eq!(d.x(0), &[-1.0]);
    }

    #[test]
    fn explicit_points_checked() {
        let spec = DatasetSpec::Explicit {
            points: vec![
                SamplePoint { x: vec![0.0], y: vec![1.0] },
                SamplePoint { x: vec![0.0, 1.0], y: vec![1.0] },
            ],
        };
        assert!(spec.build::<f64>(1).is_err());
        assert!(DatasetSpec::Explicit { points: vec![] }.build::<f64>(1).is_err());
    }
}
