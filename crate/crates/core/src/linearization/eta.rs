use rayon::prelude::*;

use crate::error::Result;
use crate::measure::{PerturbationPath, SignedGrid};
use crate::scalar::Real;
use crate::trajectory::{cell_sums, CellSumInput, TangentFlow};

use super::characteristics::{Characteristics, SUBSTEPS};
use super::multiplier::{solve_v, LinearizedMultiplier};
use super::system::LinearizedSystem;

/// Per-node bracket `k(a) = ⟨b(·,a)·∇u*; ρ⟩ + ∫ b(x,a)·∇v dγ*`, averaged
/// over each control interval; the final node uses its own instant with
/// `∇v = 0`.
pub fn bracket<R: Real>(
    sys: &LinearizedSystem<'_, R>,
    tangent: &TangentFlow<R>,
    v: &LinearizedMultiplier<R>,
) -> Vec<Vec<R>> {
    let chars = &sys.chars;
    let (n, d1) = (chars.n, chars.d1);
    let nodes = sys.path.grid.nodes;
    let spec = &sys.config.param_grid;
    let inv_n = R::one() / R::from_usize_lossy(n);
    let sw = Characteristics::<R>::simpson();
    (0..nodes)
        .into_par_iter()
        .map(|k| {
            let taps: Vec<(usize, R)> = if k + 1 < nodes {
                (0..3).map(|q| (SUBSTEPS * k + q, sw[q])).collect()
            } else {
                vec![(SUBSTEPS * k, R::one())]
            };
            let np = taps.len() * n;
            let mut xs = Vec::with_capacity(np * d1);
            let mut u = Vec::with_capacity(np * d1);
            let mut m = Vec::with_capacity(np * d1 * d1);
            for &(fm, w) in &taps {
                let s = w * inv_n;
                for i in 0..n {
                    let x = chars.x_at(fm, i);
                    let z = chars.z_at(fm, i);
                    let h = chars.hess_at(fm, i);
                    let dx = tangent.at(fm, i);
                    let gv = v.grad_fine(fm, i);
                    xs.extend_from_slice(x);
                    for j in 0..d1 {
                        let mut hd = R::zero();
                        for l in 0..d1 {
                            hd += h[j * d1 + l] * dx[l];
                        }
                        u.push(s * (hd + gv[j]));
                    }
                    for j in 0..d1 {
                        for l in 0..d1 {
                            m.push(s * z[j] * dx[l]);
                        }
                    }
                }
            }
            cell_sums(
                &sys.config.field,
                spec,
                &CellSumInput {
                    xs: &xs,
                    u: &u,
                    m: Some(&m),
                },
            )
        })
        .collect()
}

/// `η_k = −(ν*_k/ε)(k_k − c_k)` with `c_k` the `ν*_k`-average of the bracket.
pub fn eta_from<R: Real>(
    sys: &LinearizedSystem<'_, R>,
    tangent: &TangentFlow<R>,
    v: &LinearizedMultiplier<R>,
) -> PerturbationPath<R> {
    eta_from_bracket(sys, &bracket(sys, tangent, v))
}

/// Centres and scales tabulated brackets, one per node.
pub fn eta_from_bracket<R: Real>(sys: &LinearizedSystem<'_, R>, brackets: &[Vec<R>]) -> PerturbationPath<R> {
    let eps = sys.config.epsilon;
    let nodes = sys
        .measures()
        .iter()
        .zip(brackets)
        .map(|(m, kb)| {
            let c = m.expect(kb) / m.mass();
            let values = m.values.iter().zip(kb).map(|(&nu, &b)| -nu / eps * (b - c)).collect();
            SignedGrid {
                spec: m.spec.clone(),
                values,
            }
        })
        .collect();
    PerturbationPath {
        grid: sys.path.grid,
        nodes,
    }
}

/// The linearized fixed-point map `F(η) = eta_from(δX[η], v[η])`. Nontrivial
/// solutions of the linearized system are exactly the fixed points of `F`.
pub fn linearized_map<R: Real>(sys: &LinearizedSystem<'_, R>, eta: &PerturbationPath<R>) -> Result<PerturbationPath<R>> {
    let tangent = sys.fine_tangent(eta);
    let v = solve_v(sys, eta)?;
    Ok(eta_from(sys, &tangent, &v))
}
