//! Continuous-level characteristics at a fixed control: positions, adjoint
//! gradients `Z = ∇u` and Hessians `H = ∇²u` on a grid with two RK4
//! sub-steps per control interval, plus the stage data needed to propagate
//! tangent particles `δX` forward and multiplier gradients `∇v` backward.

use rayon::prelude::*;

use crate::error::Result;
use crate::measure::{ControlPath, PerturbationPath};
use crate::model::{ProblemConfig, TimeGrid};
use crate::scalar::Real;
use crate::trajectory::{MeasureKernel, NodeMeasure, PathDrift, TangentFlow, RK4_WEIGHTS};

/// Sub-steps per control interval.
pub const SUBSTEPS: usize = 2;

/// Stage offsets (in units of the sub-step) and the stage each one builds on.
const STAGES: [(f64, usize); 4] = [(0.0, 0), (0.5, 0), (0.5, 1), (1.0, 2)];

#[derive(Clone, Debug)]
pub struct Characteristics<R> {
    pub grid: TimeGrid<R>,
    pub fine: TimeGrid<R>,
    pub n: usize,
    pub d1: usize,
    /// Fine-node positions, `fine nodes × n × d1`.
    pub x: Vec<R>,
    /// Fine-node `∇u`, `fine nodes × n × d1`.
    pub z: Vec<R>,
    /// Fine-node `∇²u`, `fine nodes × n × d1²`.
    pub hess: Vec<R>,
    fwd_x: Vec<R>,
    fwd_jac: Vec<R>,
    bwd_x: Vec<R>,
    bwd_jac: Vec<R>,
    bwd_z: Vec<R>,
    bwd_h: Vec<R>,
}

fn matvec_t<R: Real>(m: &[R], v: &[R], out: &mut [R]) {
    let d = v.len();
    for l in 0..d {
        let mut acc = R::zero();
        for j in 0..d {
            acc += m[j * d + l] * v[j];
        }
        out[l] = acc;
    }
}

fn matvec<R: Real>(m: &[R], v: &[R], out: &mut [R]) {
    let d = v.len();
    for j in 0..d {
        let mut acc = R::zero();
        for l in 0..d {
            acc += m[j * d + l] * v[l];
        }
        out[j] = acc;
    }
}

struct Particle<R> {
    x: Vec<R>,
    z: Vec<R>,
    h: Vec<R>,
    fwd_x: Vec<R>,
    fwd_jac: Vec<R>,
    bwd_x: Vec<R>,
    bwd_jac: Vec<R>,
    bwd_z: Vec<R>,
    bwd_h: Vec<R>,
}

impl<R: Real> Characteristics<R> {
    pub fn new(config: &ProblemConfig<R>, path: &ControlPath<R>) -> Result<Self> {
        let drift = PathDrift::new(config, path)?;
        let grid = config.grid;
        let fine = grid.refined(SUBSTEPS);
        let d1 = config.field.d1;
        let data = &config.dataset;
        let n = data.len();
        let steps = fine.nodes - 1;
        let h = fine.dt();
        let w: [R; 4] = RK4_WEIGHTS.map(R::lit);
        let loss = config.loss;

        let parts: Vec<Particle<R>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let dd = d1 * d1;
                let mut p = Particle {
                    x: Vec::with_capacity((steps + 1) * d1),
                    z: vec![R::zero(); (steps + 1) * d1],
                    h: vec![R::zero(); (steps + 1) * dd],
                    fwd_x: Vec::with_capacity(steps * 4 * d1),
                    fwd_jac: Vec::with_capacity(steps * 4 * dd),
                    bwd_x: vec![R::zero(); steps * 4 * d1],
                    bwd_jac: vec![R::zero(); steps * 4 * dd],
                    bwd_z: vec![R::zero(); steps * 4 * d1],
                    bwd_h: vec![R::zero(); steps * 4 * dd],
                };
                // forward positions
                let mut x = data.x(i).to_vec();
                p.x.extend_from_slice(&x);
                let mut ks = vec![vec![R::zero(); d1]; 4];
                let mut jac = vec![R::zero(); dd];
                let mut st = vec![R::zero(); d1];
                for m in 0..steps {
                    let k = m / SUBSTEPS;
                    for (s, &(c, prev)) in STAGES.iter().enumerate() {
                        for j in 0..d1 {
                            st[j] = x[j] + R::lit(c) * h * ks[prev][j];
                        }
                        drift.kernel(k).drift(&st, &mut ks[s], Some(&mut jac));
                        p.fwd_x.extend_from_slice(&st);
                        p.fwd_jac.extend_from_slice(&jac);
                    }
                    for j in 0..d1 {
                        x[j] += h * (w[0] * ks[0][j] + w[1] * ks[1][j] + w[2] * ks[2][j] + w[3] * ks[3][j]);
                    }
                    p.x.extend_from_slice(&x);
                }
                // backward (X, Z, H), re-seeding X at every fine node
                let xt = &p.x[steps * d1..];
                let mut z = vec![R::zero(); d1];
                loss.grad_x_into(xt, data.y(i), &mut z);
                let mut hm = loss.hess_x::<R>(d1);
                p.z[steps * d1..].copy_from_slice(&z);
                p.h[steps * dd..].copy_from_slice(&hm);
                let mut kx = vec![vec![R::zero(); d1]; 4];
                let mut kz = vec![vec![R::zero(); d1]; 4];
                let mut kh = vec![vec![R::zero(); dd]; 4];
                let (mut sx, mut sz, mut sh) = (vec![R::zero(); d1], vec![R::zero(); d1], vec![R::zero(); dd]);
                let mut hf = vec![R::zero(); dd * d1];
                let mut tmp = vec![R::zero(); d1];
                for m in (0..steps).rev() {
                    let k = m / SUBSTEPS;
                    let x0 = p.x[(m + 1) * d1..(m + 2) * d1].to_vec();
                    for (s, &(c, prev)) in STAGES.iter().enumerate() {
                        let a = -R::lit(c) * h;
                        for j in 0..d1 {
                            sx[j] = x0[j] + a * kx[prev][j];
                            sz[j] = z[j] + a * kz[prev][j];
                        }
                        for q in 0..dd {
                            sh[q] = hm[q] + a * kh[prev][q];
                        }
                        drift.kernel(k).drift(&sx, &mut kx[s], Some(&mut jac));
                        drift.kernel(k).drift_hessian(&sx, &mut hf);
                        matvec_t(&jac, &sz, &mut tmp);
                        for j in 0..d1 {
                            kz[s][j] = -tmp[j];
                        }
                        // −Jᵀ H − H J − Σ_j Z_j ∇²f_j
                        for r in 0..d1 {
                            for c2 in 0..d1 {
                                let mut acc = R::zero();
                                for q in 0..d1 {
                                    acc += jac[q * d1 + r] * sh[q * d1 + c2] + sh[r * d1 + q] * jac[q * d1 + c2];
                                }
                                for j in 0..d1 {
                                    acc += sz[j] * hf[(j * d1 + r) * d1 + c2];
                                }
                                kh[s][r * d1 + c2] = -acc;
                            }
                        }
                        let o = (m * 4 + s) * d1;
                        p.bwd_x[o..o + d1].copy_from_slice(&sx);
                        p.bwd_z[o..o + d1].copy_from_slice(&sz);
                        let oh = (m * 4 + s) * dd;
                        p.bwd_h[oh..oh + dd].copy_from_slice(&sh);
                        p.bwd_jac[oh..oh + dd].copy_from_slice(&jac);
                    }
                    for j in 0..d1 {
                        z[j] -= h * (w[0] * kz[0][j] + w[1] * kz[1][j] + w[2] * kz[2][j] + w[3] * kz[3][j]);
                    }
                    for q in 0..dd {
                        hm[q] -= h * (w[0] * kh[0][q] + w[1] * kh[1][q] + w[2] * kh[2][q] + w[3] * kh[3][q]);
                    }
                    p.z[m * d1..(m + 1) * d1].copy_from_slice(&z);
                    p.h[m * dd..(m + 1) * dd].copy_from_slice(&hm);
                }
                p
            })
            .collect();

        let interleave = |get: &dyn Fn(&Particle<R>) -> &Vec<R>, rows: usize, width: usize| {
            let mut out = vec![R::zero(); rows * n * width];
            for (i, p) in parts.iter().enumerate() {
                let src = get(p);
                for r in 0..rows {
                    out[(r * n + i) * width..(r * n + i + 1) * width].copy_from_slice(&src[r * width..(r + 1) * width]);
                }
            }
            out
        };
        let dd = d1 * d1;
        Ok(Self {
            grid,
            fine,
            n,
            d1,
            x: interleave(&|p| &p.x, steps + 1, d1),
            z: interleave(&|p| &p.z, steps + 1, d1),
            hess: interleave(&|p| &p.h, steps + 1, dd),
            fwd_x: interleave(&|p| &p.fwd_x, steps, 4 * d1),
            fwd_jac: interleave(&|p| &p.fwd_jac, steps, 4 * dd),
            bwd_x: interleave(&|p| &p.bwd_x, steps, 4 * d1),
            bwd_jac: interleave(&|p| &p.bwd_jac, steps, 4 * dd),
            bwd_z: interleave(&|p| &p.bwd_z, steps, 4 * d1),
            bwd_h: interleave(&|p| &p.bwd_h, steps, 4 * dd),
        })
    }

    fn steps(&self) -> usize {
        self.fine.nodes - 1
    }

    pub fn x_at(&self, m: usize, i: usize) -> &[R] {
        let o = (m * self.n + i) * self.d1;
        &self.x[o..o + self.d1]
    }

    pub fn z_at(&self, m: usize, i: usize) -> &[R] {
        let o = (m * self.n + i) * self.d1;
        &self.z[o..o + self.d1]
    }

    pub fn hess_at(&self, m: usize, i: usize) -> &[R] {
        let dd = self.d1 * self.d1;
        let o = (m * self.n + i) * dd;
        &self.hess[o..o + dd]
    }

    /// Signed-measure kernels for the control intervals of `eta`.
    pub(crate) fn kernels(&self, config: &ProblemConfig<R>, eta: &PerturbationPath<R>) -> Vec<MeasureKernel<R>> {
        eta.nodes[..self.grid.intervals()]
            .par_iter()
            .map(|e| MeasureKernel::new(&config.field, NodeMeasure::Signed(e)))
            .collect()
    }

    /// Tangent particles `δẊ = ∇f(X) δX + b(X, η)`, `δX(t0) = 0`, on the fine grid.
    pub fn tangent(&self, config: &ProblemConfig<R>, eta: &PerturbationPath<R>) -> TangentFlow<R> {
        let kernels = self.kernels(config, eta);
        let (n, d1) = (self.n, self.d1);
        let dd = d1 * d1;
        let steps = self.steps();
        let h = self.fine.dt();
        let w: [R; 4] = RK4_WEIGHTS.map(R::lit);
        let per: Vec<Vec<R>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut out = vec![R::zero(); (steps + 1) * d1];
                let mut dx = vec![R::zero(); d1];
                let mut kd = vec![vec![R::zero(); d1]; 4];
                let (mut st, mut src, mut tmp) = (vec![R::zero(); d1], vec![R::zero(); d1], vec![R::zero(); d1]);
                for m in 0..steps {
                    let k = m / SUBSTEPS;
                    for (s, &(c, prev)) in STAGES.iter().enumerate() {
                        for j in 0..d1 {
                            st[j] = dx[j] + R::lit(c) * h * kd[prev][j];
                        }
                        let o = ((m * n + i) * 4 + s) * d1;
                        let oj = ((m * n + i) * 4 + s) * dd;
                        kernels[k].drift(&self.fwd_x[o..o + d1], &mut src, None);
                        matvec(&self.fwd_jac[oj..oj + dd], &st, &mut tmp);
                        for j in 0..d1 {
                            kd[s][j] = tmp[j] + src[j];
                        }
                    }
                    for j in 0..d1 {
                        dx[j] += h * (w[0] * kd[0][j] + w[1] * kd[1][j] + w[2] * kd[2][j] + w[3] * kd[3][j]);
                    }
                    out[(m + 1) * d1..(m + 2) * d1].copy_from_slice(&dx);
                }
                out
            })
            .collect();
        let mut dx = vec![R::zero(); (steps + 1) * n * d1];
        for (i, traj) in per.into_iter().enumerate() {
            for m in 0..=steps {
                dx[(m * n + i) * d1..(m * n + i + 1) * d1].copy_from_slice(&traj[m * d1..(m + 1) * d1]);
            }
        }
        TangentFlow {
            grid: self.fine,
            n,
            d1,
            dx,
        }
    }

    /// `∇v` along the characteristics on the fine grid:
    /// `V̇ = −∇fᵀ V − ∇b(X, η)ᵀ Z − H b(X, η)`, `V(T) = 0`.
    pub fn grad_v(&self, config: &ProblemConfig<R>, eta: &PerturbationPath<R>) -> Vec<R> {
        let kernels = self.kernels(config, eta);
        let (n, d1) = (self.n, self.d1);
        let dd = d1 * d1;
        let steps = self.steps();
        let h = self.fine.dt();
        let w: [R; 4] = RK4_WEIGHTS.map(R::lit);
        let per: Vec<Vec<R>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut out = vec![R::zero(); (steps + 1) * d1];
                let mut v = vec![R::zero(); d1];
                let mut kv = vec![vec![R::zero(); d1]; 4];
                let mut st = vec![R::zero(); d1];
                let (mut b, mut jb) = (vec![R::zero(); d1], vec![R::zero(); dd]);
                let (mut t1, mut t2, mut t3) = (vec![R::zero(); d1], vec![R::zero(); d1], vec![R::zero(); d1]);
                for m in (0..steps).rev() {
                    let k = m / SUBSTEPS;
                    for (s, &(c, prev)) in STAGES.iter().enumerate() {
                        for j in 0..d1 {
                            st[j] = v[j] - R::lit(c) * h * kv[prev][j];
                        }
                        let o = ((m * n + i) * 4 + s) * d1;
                        let oj = ((m * n + i) * 4 + s) * dd;
                        kernels[k].drift(&self.bwd_x[o..o + d1], &mut b, Some(&mut jb));
                        matvec_t(&self.bwd_jac[oj..oj + dd], &st, &mut t1);
                        matvec_t(&jb, &self.bwd_z[o..o + d1], &mut t2);
                        matvec(&self.bwd_h[oj..oj + dd], &b, &mut t3);
                        for j in 0..d1 {
                            kv[s][j] = -(t1[j] + t2[j] + t3[j]);
                        }
                    }
                    for j in 0..d1 {
                        v[j] -= h * (w[0] * kv[0][j] + w[1] * kv[1][j] + w[2] * kv[2][j] + w[3] * kv[3][j]);
                    }
                    out[m * d1..(m + 1) * d1].copy_from_slice(&v);
                }
                out
            })
            .collect();
        let mut gv = vec![R::zero(); (steps + 1) * n * d1];
        for (i, traj) in per.into_iter().enumerate() {
            for m in 0..=steps {
                gv[(m * n + i) * d1..(m * n + i + 1) * d1].copy_from_slice(&traj[m * d1..(m + 1) * d1]);
            }
        }
        gv
    }

    /// Simpson weights of the fine nodes `2k, 2k+1, 2k+2` for the interval
    /// average.
    pub(crate) fn simpson() -> [R; 3] {
        [R::lit(1.0 / 6.0), R::lit(4.0 / 6.0), R::lit(1.0 / 6.0)]
    }

    /// `∫ (1/N) Σ_i (∇b(X, η²)ᵀ Z + H b(X, η²))·δX¹ dt`.
    pub fn rho_part(&self, config: &ProblemConfig<R>, eta2: &PerturbationPath<R>, dx1: &TangentFlow<R>) -> R {
        let kernels = self.kernels(config, eta2);
        let (n, d1) = (self.n, self.d1);
        let dd = d1 * d1;
        let sw = Self::simpson();
        let dt = self.grid.dt();
        let per_interval: Vec<R> = (0..self.grid.intervals())
            .into_par_iter()
            .map(|k| {
                let (mut b, mut jb) = (vec![R::zero(); d1], vec![R::zero(); dd]);
                let (mut t1, mut t2) = (vec![R::zero(); d1], vec![R::zero(); d1]);
                let mut acc = R::zero();
                for (q, &wq) in sw.iter().enumerate() {
                    let m = SUBSTEPS * k + q;
                    let mut sum = R::zero();
                    for i in 0..n {
                        kernels[k].drift(self.x_at(m, i), &mut b, Some(&mut jb));
                        matvec_t(&jb, self.z_at(m, i), &mut t1);
                        matvec(self.hess_at(m, i), &b, &mut t2);
                        let dx = dx1.at(m, i);
                        for j in 0..d1 {
                            sum += (t1[j] + t2[j]) * dx[j];
                        }
                    }
                    acc += wq * sum;
                }
                acc * dt / R::from_usize_lossy(n)
            })
            .collect();
        crate::scalar::pairwise_sum(&per_interval)
    }

    /// `∫ (1/N) Σ_i b(X, η¹)·∇v² dt`.
    pub fn v_part(&self, config: &ProblemConfig<R>, eta1: &PerturbationPath<R>, gv2: &[R]) -> R {
        let kernels = self.kernels(config, eta1);
        let (n, d1) = (self.n, self.d1);
        let sw = Self::simpson();
        let dt = self.grid.dt();
        let per_interval: Vec<R> = (0..self.grid.intervals())
            .into_par_iter()
            .map(|k| {
                let mut b = vec![R::zero(); d1];
                let mut acc = R::zero();
                for (q, &wq) in sw.iter().enumerate() {
                    let m = SUBSTEPS * k + q;
                    let mut sum = R::zero();
                    for i in 0..n {
                        kernels[k].drift(self.x_at(m, i), &mut b, None);
                        let o = (m * n + i) * d1;
                        for j in 0..d1 {
                            sum += b[j] * gv2[o + j];
                        }
                    }
                    acc += wq * sum;
                }
                acc * dt / R::from_usize_lossy(n)
            })
            .collect();
        crate::scalar::pairwise_sum(&per_interval)
    }
}
