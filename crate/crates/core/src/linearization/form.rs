use crate::error::Result;
use crate::measure::PerturbationPath;
use crate::optimizer::total_cost;
use crate::scalar::Real;

use super::system::LinearizedSystem;

/// Outcome of the second-order diagnostics; fields a given operation does
/// not compute stay `None`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SecondOrderReport<R> {
    /// `𝒥(η)`.
    pub j_form: Option<R>,
    /// `(λ, [J(ν*+λη) − 2J(ν*) + J(ν*−λη)]/λ²)` over the admissible ladder.
    pub fd2: Vec<(R, R)>,
    /// Per-node total variation between `η` and `F(η)` for the dominant
    /// direction.
    pub eta_residual: Option<R>,
    /// Power-iteration estimate of the leading eigenvalue of `F`.
    pub dominant_eig: Option<R>,
    /// Minimum sampled `I/(J − J*)`.
    pub pl_ratio: Option<R>,
    pub notes: Vec<String>,
}

impl<R: Real> SecondOrderReport<R> {
    /// Largest `|fd2 − 𝒥| / max(|𝒥|, floor)` over the ladder.
    pub fn fd2_discrepancy(&self, floor: R) -> Option<R> {
        let j = self.j_form?;
        self.fd2
            .iter()
            .map(|&(_, d)| (d - j).abs() / j.abs().max(floor))
            .fold(None, |acc: Option<R>, e| Some(acc.map_or(e, |a| a.max(e))))
    }
}

/// `𝒥(η) = ε Σ_k Δt ∫ η_k²/ν*_k + 2 ∫ ⟨b(·,η_t)·∇u*_t; ρ_t⟩ dt`, or `+∞`
/// when `η` charges a cell where `ν*` vanishes.
pub fn quadratic_form<R: Real>(sys: &LinearizedSystem<'_, R>, eta: &PerturbationPath<R>) -> R {
    if sys.singular(eta) {
        return R::infinity();
    }
    let tangent = sys.fine_tangent(eta);
    sys.config.epsilon * sys.inner(eta, eta) + R::lit(2.0) * sys.chars.rho_part(sys.config, eta, &tangent)
}

/// Both sides of the cross-term identity
/// `∫ ⟨b(·,η²)·∇u; ρ¹⟩ dt = ∫∫ b(x,η¹)·∇v² dγ dt`.
pub fn cross_term<R: Real>(sys: &LinearizedSystem<'_, R>, eta1: &PerturbationPath<R>, eta2: &PerturbationPath<R>) -> (R, R) {
    let tangent1 = sys.fine_tangent(eta1);
    let gv2 = sys.chars.grad_v(sys.config, eta2);
    (
        sys.chars.rho_part(sys.config, eta2, &tangent1),
        sys.chars.v_part(sys.config, eta1, &gv2),
    )
}

/// `[f(λ) − 2f(0) + f(−λ)] / λ²`.
pub fn central_second_difference<R: Real>(mut f: impl FnMut(R) -> Result<R>, lambda: R) -> Result<R> {
    let (p, z, m) = (f(lambda)?, f(R::zero())?, f(-lambda)?);
    Ok((p - R::lit(2.0) * z + m) / (lambda * lambda))
}

/// Compares `𝒥(η)` with central second differences of the cost along
/// `ν* + λη`. Ladder entries that would make a density negative are
/// dropped and noted.
pub fn second_derivative_check<R: Real>(
    sys: &LinearizedSystem<'_, R>,
    eta: &PerturbationPath<R>,
    ladder: &[R],
) -> Result<SecondOrderReport<R>> {
    let mut report = SecondOrderReport {
        j_form: Some(quadratic_form(sys, eta)),
        ..Default::default()
    };
    let j0 = total_cost(sys.config, sys.path)?.j;
    for &lambda in ladder {
        let (plus, minus) = match (eta.perturb(sys.path, lambda), eta.perturb(sys.path, -lambda)) {
            (Ok(p), Ok(m)) => (p, m),
            _ => {
                report
                    .notes
                    .push(format!("ladder truncated at λ = {lambda:e}: perturbed density turns negative"));
                continue;
            }
        };
        let jp = total_cost(sys.config, &plus)?.j;
        let jm = total_cost(sys.config, &minus)?.j;
        report.fd2.push((lambda, (jp - R::lit(2.0) * j0 + jm) / (lambda * lambda)));
    }
    Ok(report)
}
