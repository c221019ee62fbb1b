//! Quadrature of the activation field against a measure on the parameter
//! space, in both directions: drift sums over parameters at a feature point,
//! and cell sums over feature points at every grid parameter.

use rayon::prelude::*;

use crate::measure::{GridMeasure, GridSpec, ParticleMeasure, SignedGrid};
use crate::model::{Activation, ActivationField, FieldFamily};
use crate::scalar::Real;

/// Borrowed view of one node measure, probability or signed.
#[derive(Clone, Copy, Debug)]
pub enum NodeMeasure<'a, R> {
    Grid(&'a GridMeasure<R>),
    Signed(&'a SignedGrid<R>),
    Particle(&'a ParticleMeasure<R>),
}

/// Tensor layout of the `d1 = 1` componentwise tanh field: parameter
/// `(a1, a2)` with `e = exp(2 a1 x) · exp(2 a2)`.
#[derive(Clone, Debug)]
struct Tensor<R> {
    slope: Vec<R>,
    bias_exp: Vec<R>,
    /// Row sums of the weights; rows with zero weight are skipped.
    row_active: Vec<bool>,
    slope_max: R,
    bias_max: R,
}

impl<R: Real> Tensor<R> {
    fn new(spec: &GridSpec<R>, weights: &[R]) -> Self {
        let res = spec.res;
        let axis = spec.axis();
        let two = R::lit(2.0);
        let row_active = (0..res)
            .map(|i| weights[i * res..(i + 1) * res].iter().any(|&w| w != R::zero()))
            .collect();
        Self {
            slope: axis.to_vec(),
            bias_exp: axis.iter().map(|&b| (two * b).exp()).collect(),
            row_active,
            slope_max: spec.half_width,
            bias_max: spec.half_width,
        }
    }

    /// Whether `exp(2(|a1| |x| + |a2|))` stays representable.
    #[inline]
    fn safe(&self, x: R) -> bool {
        R::lit(2.0) * (self.slope_max * x.abs() + self.bias_max) < R::exp_limit()
    }
}

/// The same factorization for a particle cloud: one exponential per
/// particle and feature point.
#[derive(Clone, Debug)]
struct Scatter<R> {
    slope: Vec<R>,
    bias_exp: Vec<R>,
    bound: R,
}

impl<R: Real> Scatter<R> {
    fn new(points: &[R]) -> Self {
        let two = R::lit(2.0);
        let slope: Vec<R> = points.iter().step_by(2).copied().collect();
        let bias: Vec<R> = points.iter().skip(1).step_by(2).copied().collect();
        let max_abs = |v: &[R]| v.iter().fold(R::zero(), |m, x| m.max(x.abs()));
        Self {
            bound: max_abs(&slope).max(max_abs(&bias)),
            bias_exp: bias.iter().map(|&b| (two * b).exp()).collect(),
            slope,
        }
    }

    #[inline]
    fn safe(&self, x: R) -> bool {
        R::lit(2.0) * self.bound * (x.abs() + R::one()) < R::exp_limit()
    }
}

fn tensor_applicable(field: &ActivationField, dim: &usize) -> bool {
    field.family == FieldFamily::ComponentwiseRidge && field.d1 == 1 && field.sigma == Activation::Tanh && *dim == 2
}

/// A measure prepared for repeated drift evaluation.
#[derive(Clone, Debug)]
pub struct MeasureKernel<R> {
    field: ActivationField,
    dim: usize,
    points: Vec<R>,
    weights: Vec<R>,
    tensor: Option<Tensor<R>>,
    scatter: Option<Scatter<R>>,
}

impl<R: Real> MeasureKernel<R> {
    pub fn new(field: &ActivationField, m: NodeMeasure<'_, R>) -> Self {
        match m {
            NodeMeasure::Grid(g) => Self::from_grid(field, &g.spec, g.weights()),
            NodeMeasure::Signed(s) => Self::from_grid(field, &s.spec, s.weights()),
            NodeMeasure::Particle(p) => Self {
                field: *field,
                dim: p.dim,
                points: p.points.clone(),
                weights: vec![p.weight(); p.len()],
                tensor: None,
                scatter: tensor_applicable(field, &p.dim).then(|| Scatter::new(&p.points)),
            },
        }
    }

    fn from_grid(field: &ActivationField, spec: &GridSpec<R>, weights: Vec<R>) -> Self {
        let tensor = tensor_applicable(field, &spec.dim).then(|| Tensor::new(spec, &weights));
        let points = if tensor.is_some() {
            Vec::new()
        } else {
            (0..spec.cells()).flat_map(|c| spec.point(c)).collect()
        };
        Self {
            field: *field,
            dim: spec.dim,
            points,
            weights,
            tensor,
            scatter: None,
        }
    }

    /// `∫ b(x, a) dm(a)` and optionally `∫ ∇_x b(x, a) dm(a)`.
    pub fn drift(&self, x: &[R], f: &mut [R], jac: Option<&mut [R]>) {
        if let Some(t) = &self.tensor {
            if t.safe(x[0]) {
                let (v, j) = self.tensor_drift(t, x[0]);
                f[0] = v;
                if let Some(jac) = jac {
                    jac[0] = j;
                }
                return;
            }
        }
        if let Some(sc) = &self.scatter {
            if sc.safe(x[0]) {
                let two = R::lit(2.0);
                let w = self.weights[0];
                let (mut fv, mut jv) = (R::zero(), R::zero());
                for (&a1, &eb) in sc.slope.iter().zip(&sc.bias_exp) {
                    let (s, ds, _) = Activation::Tanh.jet_from_exp((two * a1 * x[0]).exp() * eb);
                    fv += s;
                    jv += ds * a1;
                }
                f[0] = w * fv;
                if let Some(jac) = jac {
                    jac[0] = w * jv;
                }
                return;
            }
        }
        self.direct_drift(x, f, jac);
    }

    fn tensor_drift(&self, t: &Tensor<R>, x: R) -> (R, R) {
        let res = t.slope.len();
        let two = R::lit(2.0);
        let (mut fv, mut jv) = (R::zero(), R::zero());
        for i in 0..res {
            if !t.row_active[i] {
                continue;
            }
            let e_row = (two * t.slope[i] * x).exp();
            let w = &self.weights[i * res..(i + 1) * res];
            let (mut sf, mut sj) = (R::zero(), R::zero());
            for j in 0..res {
                let (s, ds, _) = Activation::Tanh.jet_from_exp(e_row * t.bias_exp[j]);
                sf += w[j] * s;
                sj += w[j] * ds;
            }
            fv += sf;
            jv += sj * t.slope[i];
        }
        (fv, jv)
    }

    fn direct_drift(&self, x: &[R], f: &mut [R], jac: Option<&mut [R]>) {
        let d1 = self.field.d1;
        let mut b = vec![R::zero(); d1];
        f.iter_mut().for_each(|v| *v = R::zero());
        let mut jb = jac.as_ref().map(|_| vec![R::zero(); d1 * d1]);
        let mut jsum = jac.as_ref().map(|_| vec![R::zero(); d1 * d1]);
        for (c, &w) in self.weights.iter().enumerate() {
            if w == R::zero() {
                continue;
            }
            let a = &self.points[c * self.dim..(c + 1) * self.dim];
            self.field.eval_into(x, a, &mut b);
            for (fj, &bj) in f.iter_mut().zip(&b) {
                *fj += w * bj;
            }
            if let (Some(jb), Some(js)) = (jb.as_mut(), jsum.as_mut()) {
                self.field.jac_x_into(x, a, jb);
                for (s, &v) in js.iter_mut().zip(jb.iter()) {
                    *s += w * v;
                }
            }
        }
        if let (Some(jac), Some(js)) = (jac, jsum) {
            jac.copy_from_slice(&js);
        }
    }

    /// `∫ ∇²_x b(x, a) dm(a)`, indexed `(j*d1 + l)*d1 + m`.
    pub fn drift_hessian(&self, x: &[R], out: &mut [R]) {
        let d1 = self.field.d1;
        out.iter_mut().for_each(|v| *v = R::zero());
        if let Some(t) = &self.tensor {
            if t.safe(x[0]) {
                let res = t.slope.len();
                let two = R::lit(2.0);
                let mut acc = R::zero();
                for i in 0..res {
                    if !t.row_active[i] {
                        continue;
                    }
                    let e_row = (two * t.slope[i] * x[0]).exp();
                    let w = &self.weights[i * res..(i + 1) * res];
                    let mut s = R::zero();
                    for j in 0..res {
                        s += w[j] * Activation::Tanh.jet_from_exp(e_row * t.bias_exp[j]).2;
                    }
                    acc += s * t.slope[i] * t.slope[i];
                }
                out[0] = acc;
                return;
            }
        }
        let mut h = vec![R::zero(); d1 * d1 * d1];
        for (c, &w) in self.weights.iter().enumerate() {
            if w == R::zero() {
                continue;
            }
            let a = &self.points[c * self.dim..(c + 1) * self.dim];
            self.field.hess_x_into(x, a, &mut h);
            for (o, &v) in out.iter_mut().zip(&h) {
                *o += w * v;
            }
        }
    }
}

/// Feature-side data for a cell sum: points `x_p`, vector weights `u_p` and
/// optional matrix weights `M_p` (row-major `d1 × d1`).
pub struct CellSumInput<'a, R> {
    pub xs: &'a [R],
    pub u: &'a [R],
    pub m: Option<&'a [R]>,
}

/// `out[c] = Σ_p u_p · b(x_p, a_c) + Σ_p Σ_jl M_p[j,l] ∂_l b_j(x_p, a_c)` at
/// every cell midpoint `a_c` of `spec`.
pub fn cell_sums<R: Real>(field: &ActivationField, spec: &GridSpec<R>, input: &CellSumInput<'_, R>) -> Vec<R> {
    let d1 = field.d1;
    let np = input.xs.len() / d1;
    let res = spec.res;
    let mut out = vec![R::zero(); spec.cells()];
    if tensor_applicable(field, &spec.dim) {
        let axis = spec.axis();
        let two = R::lit(2.0);
        let bias_exp: Vec<R> = axis.iter().map(|&b| (two * b).exp()).collect();
        let tensor = Tensor {
            slope: axis.to_vec(),
            bias_exp,
            row_active: vec![true; res],
            slope_max: spec.half_width,
            bias_max: spec.half_width,
        };
        if input.xs.iter().all(|&x| tensor.safe(x)) {
            out.par_chunks_mut(res).enumerate().for_each(|(i, row)| {
                let a1 = tensor.slope[i];
                for p in 0..np {
                    let e_row = (two * a1 * input.xs[p]).exp();
                    let u = input.u[p];
                    let mw = input.m.map_or(R::zero(), |m| m[p] * a1);
                    for j in 0..res {
                        let (s, ds, _) = Activation::Tanh.jet_from_exp(e_row * tensor.bias_exp[j]);
                        row[j] += u * s + mw * ds;
                    }
                }
            });
            return out;
        }
    }
    out.par_iter_mut().enumerate().for_each(|(c, o)| {
        let a = spec.point(c);
        let mut b = vec![R::zero(); d1];
        let mut jb = vec![R::zero(); d1 * d1];
        let mut acc = R::zero();
        for p in 0..np {
            let x = &input.xs[p * d1..(p + 1) * d1];
            field.eval_into(x, &a, &mut b);
            let u = &input.u[p * d1..(p + 1) * d1];
            acc += u.iter().zip(&b).fold(R::zero(), |s, (&uu, &bb)| s + uu * bb);
            if let Some(m) = input.m {
                field.jac_x_into(x, &a, &mut jb);
                let mp = &m[p * d1 * d1..(p + 1) * d1 * d1];
                acc += mp.iter().zip(&jb).fold(R::zero(), |s, (&mm, &jj)| s + mm * jj);
            }
        }
        *o = acc;
    });
    out
}

/// `∫ b(x, a) dm(a)` for one node measure.
pub fn meanfield_drift<R: Real>(field: &ActivationField, x: &[R], m: NodeMeasure<'_, R>) -> Vec<R> {
    let mut f = vec![R::zero(); field.d1];
    MeasureKernel::new(field, m).drift(x, &mut f, None);
    f
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_grid(res: usize, mean: [f64; 2]) -> GridMeasure<f64> {
        let spec = GridSpec::new(2, res, 3.0).unwrap();
        let lv = spec.tabulate(|a| -((a[0] - mean[0]).powi(2) + (a[1] - mean[1]).powi(2)) / 0.5);
        GridMeasure::from_log_density(spec, &lv).unwrap().0
    }

    #[test]
    fn tensor_path_matches_direct_path() {
        let field = ActivationField::default();
        let g = gaussian_grid(24, [0.4, -0.2]);
        let k = MeasureKernel::new(&field, NodeMeasure::Grid(&g));
        assert!(k.tensor.is_some());
        let mut direct = k.clone();
        direct.tensor = None;
        direct.points = (0..g.spec.cells()).flat_map(|c| g.spec.point(c)).collect();
        for &x in &[-1.3, 0.0, 0.7, 2.5] {
            let (mut f1, mut j1, mut f2, mut j2) = ([0.0], [0.0], [0.0], [0.0]);
            k.drift(&[x], &mut f1, Some(&mut j1));
            direct.drift(&[x], &mut f2, Some(&mut j2));
            assert!((f1[0] - f2[0]).abs() < 1e-13, "{f1:?} {f2:?}");
            assert!((j1[0] - j2[0]).abs() < 1e-13);
            let (mut h1, mut h2) = ([0.0], [0.0]);
            k.drift_hessian(&[x], &mut h1);
            direct.drift_hessian(&[x], &mut h2);
            assert!((h1[0] - h2[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn scatter_path_matches_direct_path() {
        let field = ActivationField::default();
        let pts: Vec<f64> = (0..40).map(|i| ((i * 37 % 23) as f64 - 11.0) * 0.21).collect();
        let cloud = ParticleMeasure::new(2, pts).unwrap();
        let k = MeasureKernel::new(&field, NodeMeasure::Particle(&cloud));
        assert!(k.scatter.is_some());
        let mut direct = k.clone();
        direct.scatter = None;
        for &x in &[-1.3, 0.0, 0.7, 2.5] {
            let (mut f1, mut j1, mut f2, mut j2) = ([0.0], [0.0], [0.0], [0.0]);
            k.drift(&[x], &mut f1, Some(&mut j1));
            direct.drift(&[x], &mut f2, Some(&mut j2));
            assert!((f1[0] - f2[0]).abs() < 1e-14, "{f1:?} {f2:?}");
            assert!((j1[0] - j2[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn point_mass_drift_is_field_value() {
        let field = ActivationField::default();
        let p = ParticleMeasure::point_mass(&[0.8, -0.3]);
        let f = meanfield_drift(&field, &[0.5], NodeMeasure::Particle(&p));
        assert!((f[0] - (0.8f64 * 0.5 - 0.3).tanh()).abs() < 1e-15);
    }

    #[test]
    fn outer_weight_symmetric_measure_has_zero_drift() {
        let field = ActivationField::new(FieldFamily::RidgeWithOuterWeight, Activation::Tanh, 1);
        let spec = GridSpec::<f64>::new(3, 12, 3.0).unwrap();
        let lv = spec.tabulate(|a| -(a[0] * a[0] + (a[1] - 0.3).powi(2) + a[2] * a[2]));
        let g = GridMeasure::from_log_density(spec, &lv).unwrap().0;
        let f = meanfield_drift(&field, &[0.9], NodeMeasure::Grid(&g));
        assert!(f[0].abs() < 1e-15);
    }

    #[test]
    fn cell_sums_tensor_matches_generic() {
        let field = ActivationField::default();
        let spec = GridSpec::<f64>::new(2, 10, 3.0).unwrap();
        let xs = [0.3, -1.1, 2.0];
        let u = [0.5, -0.25, 1.5];
        let m = [0.2, 0.1, -0.7];
        let input = CellSumInput { xs: &xs, u: &u, m: Some(&m) };
        let fast = cell_sums(&field, &spec, &input);
        for c in 0..spec.cells() {
            let a = spec.point(c);
            let mut want = 0.0;
            for p in 0..3 {
                let (jx, _) = field.grad_field(&[xs[p]], &a).unwrap();
                want += u[p] * field.eval_field(&[xs[p]], &a).unwrap()[0] + m[p] * jx[0];
            }
            assert!((fast[c] - want).abs() < 1e-13);
        }
    }
}
