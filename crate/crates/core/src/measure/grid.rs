use std::io::Write;

use crate::csv::{fmt_real, CsvWriter};
use crate::error::{Error, Result};
use crate::model::ConfinementPotential;
use crate::scalar::{pairwise_sum, Real};

/// Tensor grid of cell midpoints on `[−A, A]^d`, last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec<R> {
    pub dim: usize,
    pub res: usize,
    pub half_width: R,
    pub spacing: R,
    pub cell_volume: R,
    axis: Vec<R>,
}

impl<R: Real> GridSpec<R> {
    pub fn new(dim: usize, res: usize, half_width: R) -> Result<Self> {
        if dim == 0 || res < 2 {
            return Err(Error::config("measure.res", "need dim ≥ 1 and res ≥ 2"));
        }
        if !(half_width > R::zero() && half_width.is_finite()) {
            return Err(Error::config("measure.half_width", "must be positive"));
        }
        if (res as f64).powi(dim as i32) > 5.0e7 {
            return Err(Error::config("measure.res", "grid too large"));
        }
        let spacing = R::lit(2.0) * half_width / R::from_usize_lossy(res);
        let axis = (0..res)
            .map(|i| -half_width + (R::from_usize_lossy(i) + R::lit(0.5)) * spacing)
            .collect();
        Ok(Self {
            dim,
            res,
            half_width,
            spacing,
            cell_volume: spacing.powi(dim as i32),
            axis,
        })
    }

    pub fn cells(&self) -> usize {
        self.res.pow(self.dim as u32)
    }

    /// Midpoint coordinates along one axis.
    pub fn axis(&self) -> &[R] {
        &self.axis
    }

    /// Writes the midpoint of cell `c` into `out`.
    #[inline]
    pub fn point_into(&self, mut c: usize, out: &mut [R]) {
        for ax in (0..self.dim).rev() {
            out[ax] = self.axis[c % self.res];
            c /= self.res;
        }
    }

    pub fn point(&self, c: usize) -> Vec<R> {
        let mut p = vec![R::zero(); self.dim];
        self.point_into(c, &mut p);
        p
    }

    /// Linear stride of axis `ax`.
    #[inline]
    pub fn stride(&self, ax: usize) -> usize {
        self.res.pow((self.dim - 1 - ax) as u32)
    }

    #[inline]
    pub fn coord_index(&self, c: usize, ax: usize) -> usize {
        (c / self.stride(ax)) % self.res
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.dim == other.dim && self.res == other.res && self.half_width == other.half_width
    }

    /// Evaluates `f` at every midpoint.
    pub fn tabulate(&self, mut f: impl FnMut(&[R]) -> R) -> Vec<R> {
        let mut p = vec![R::zero(); self.dim];
        (0..self.cells())
            .map(|c| {
                self.point_into(c, &mut p);
                f(&p)
            })
            .collect()
    }

    /// Midpoint-rule integral of tabulated values.
    pub fn integrate(&self, values: &[R]) -> R {
        pairwise_sum(values) * self.cell_volume
    }

    /// Gradient of tabulated `g` by central differences, one-sided at faces.
    /// Output is `cells × dim`.
    pub fn gradient(&self, g: &[R]) -> Vec<R> {
        let n = self.res;
        let h = self.spacing;
        let two_h = R::lit(2.0) * h;
        let mut out = vec![R::zero(); self.cells() * self.dim];
        for c in 0..self.cells() {
            for ax in 0..self.dim {
                let s = self.stride(ax);
                let i = self.coord_index(c, ax);
                out[c * self.dim + ax] = if i == 0 {
                    (g[c + s] - g[c]) / h
                } else if i + 1 == n {
                    (g[c] - g[c - s]) / h
                } else {
                    (g[c + s] - g[c - s]) / two_h
                };
            }
        }
        out
    }
}

/// Smallest multiple of `0.25` such that the prior `∝ e^{−ℓ}` puts mass
/// below `tail` outside the centred ball of that radius (hence outside the box).
pub fn confining_half_width(potential: &ConfinementPotential, dim: usize, tail: f64) -> f64 {
    // radial density r^{d-1} e^{-ℓ(r)}; integrate by Simpson on [0, r_max]
    let dens = |r: f64| r.powi(dim as i32 - 1) * (-potential.radial(r)).exp();
    let mut r_max = 1.0;
    while potential.radial(r_max) < 745.0 {
        r_max *= 1.25;
    }
    let simpson = |a: f64, b: f64| {
        let n = 4000usize;
        let h = (b - a) / n as f64;
        let mut s = dens(a) + dens(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * dens(a + i as f64 * h);
        }
        s * h / 3.0
    };
    let total = simpson(0.0, r_max);
    let mut a = 0.25;
    while a < r_max && simpson(a, r_max) / total >= tail {
        a += 0.25;
    }
    a
}

/// Probability density sampled at cell midpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMeasure<R> {
    pub spec: GridSpec<R>,
    pub values: Vec<R>,
}

impl<R: Real> GridMeasure<R> {
    /// Wraps raw nonnegative density samples without normalizing.
    pub fn from_values(spec: GridSpec<R>, values: Vec<R>) -> Result<Self> {
        if values.len() != spec.cells() {
            return Err(Error::Dimension(format!(
                "grid has {} cells, got {} values",
                spec.cells(),
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= R::zero())) {
            return Err(Error::DegenerateMeasure("negative or non-finite density".into()));
        }
        Ok(Self { spec, values })
    }

    /// Normalized density proportional to `exp(log_values)`, with its
    /// log-normalizer, computed in log-sum-exp form.
    pub fn from_log_density(spec: GridSpec<R>, log_values: &[R]) -> Result<(Self, R)> {
        let m = log_values
            .iter()
            .copied()
            .fold(R::neg_infinity(), |a, b| if b > a { b } else { a });
        if !m.is_finite() {
            return Err(Error::DegenerateMeasure("log-density has no finite maximum".into()));
        }
        let shifted: Vec<R> = log_values.iter().map(|&l| (l - m).exp()).collect();
        let s = spec.integrate(&shifted);
        let log_z = m + s.ln();
        let values = log_values.iter().map(|&l| (l - log_z).exp()).collect();
        Ok((Self { spec, values }, log_z))
    }

    pub fn uniform(spec: GridSpec<R>) -> Self {
        let vol = R::from_usize_lossy(spec.cells()) * spec.cell_volume;
        let values = vec![R::one() / vol; spec.cells()];
        Self { spec, values }
    }

    pub fn mass(&self) -> R {
        self.spec.integrate(&self.values)
    }

    /// Quadrature weights `value × cell volume`.
    pub fn weights(&self) -> Vec<R> {
        self.values.iter().map(|&v| v * self.spec.cell_volume).collect()
    }

    /// Log-density with values floored at `1e-300`.
    pub fn log_values(&self) -> Vec<R> {
        let floor = R::min_positive_value().max(R::lit(1e-300));
        self.values.iter().map(|&v| v.max(floor).ln()).collect()
    }

    /// Expectation of a tabulated function.
    pub fn expect(&self, f: &[R]) -> R {
        let prod: Vec<R> = self.values.iter().zip(f).map(|(&v, &g)| v * g).collect();
        self.spec.integrate(&prod)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut header: Vec<String> = (0..self.spec.dim).map(|i| format!("a{i}")).collect();
        header.push("value".into());
        let mut out = CsvWriter::new(w, &header)?;
        let mut p = vec![R::zero(); self.spec.dim];
        for (c, &v) in self.values.iter().enumerate() {
            self.spec.point_into(c, &mut p);
            let mut row: Vec<String> = p.iter().map(|&x| fmt_real(x)).collect();
            row.push(fmt_real(v));
            out.row(&row)?;
        }
        Ok(())
    }
}

/// Rescales a grid density to unit mass and returns the log-normalizer.
pub fn normalize<R: Real>(m: &GridMeasure<R>) -> Result<(GridMeasure<R>, R)> {
    let mass = m.mass();
    if !(mass.is_finite() && mass > R::zero()) {
        return Err(Error::DegenerateMeasure(format!("mass {mass} cannot be normalized")));
    }
    let values = m.values.iter().map(|&v| v / mass).collect();
    Ok((
        GridMeasure {
            spec: m.spec.clone(),
            values,
        },
        mass.ln(),
    ))
}

/// Signed density on a grid (perturbation directions, mass typically zero).
#[derive(Clone, Debug, PartialEq)]
pub struct SignedGrid<R> {
    pub spec: GridSpec<R>,
    pub values: Vec<R>,
}

impl<R: Real> SignedGrid<R> {
    pub fn zeros(spec: GridSpec<R>) -> Self {
        let n = spec.cells();
        Self {
            spec,
            values: vec![R::zero(); n],
        }
    }

    pub fn mass(&self) -> R {
        self.spec.integrate(&self.values)
    }

    pub fn weights(&self) -> Vec<R> {
        self.values.iter().map(|&v| v * self.spec.cell_volume).collect()
    }
}
