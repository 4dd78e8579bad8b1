//! Dual certificate for σσᵀ under the shifted regulariser λ′, and the
//! transfer envelope for monotone changes.

use nalgebra::{DMatrix, DVector};

use crate::error::{input, Result};
use crate::sbm::{Mode, ModelParams, SpinAssignment};

/// Published upper bound on the real Grothendieck constant. Only used in
/// diagnostics.
pub const GROTHENDIECK: f64 = 1.783;

#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub gamma: Vec<f64>,
    pub min_gamma: f64,
    /// ‖Λσ‖_∞.
    pub residual: f64,
    pub lambda_min: f64,
}

impl CertificateReport {
    pub fn gamma_nonnegative(&self) -> bool {
        self.min_gamma >= 0.0
    }

    /// γ ≥ 0, ‖Λσ‖_∞ ≤ 1e-8·n, λ_min(Λ) ≥ -1e-6.
    pub fn passes(&self) -> bool {
        let n = self.gamma.len() as f64;
        self.gamma_nonnegative() && self.residual <= 1e-8 * n && self.lambda_min >= -1e-6
    }
}

/// γ_v = s((a-b)/2 + (λ-λ′) σ_v Σσ) with s = +1 (assortative) or -1, and
/// Λ = diag(γ) - R′, R′ = s((a-b)/(2n) σσᵀ + (λ-λ′) J), λ = (a+b)/2n.
///
/// The J coefficient is what makes Λσ = 0 hold exactly: (R′σ)_v equals
/// s((a-b)/2 σ_v + (λ-λ′) Σσ).
pub fn dual_certificate(params: &ModelParams, truth: &SpinAssignment, lambda_prime: f64) -> Result<CertificateReport> {
    let n = params.n;
    if truth.len() != n {
        return Err(input("truth length differs from n"));
    }
    let s = match params.mode {
        Mode::Assortative => 1.0,
        Mode::Dissortative => -1.0,
    };
    let nf = n as f64;
    let sigma = DVector::from_vec(truth.to_f64());
    let total = sigma.sum();
    let shift = params.lambda() - lambda_prime;
    let half_gap = (params.a - params.b) / 2.0;
    let gamma: Vec<f64> = sigma.iter().map(|&sv| s * (half_gap + shift * sv * total)).collect();
    let mut lam = DMatrix::from_fn(n, n, |i, j| -s * (half_gap / nf * sigma[i] * sigma[j] + shift));
    for (i, g) in gamma.iter().enumerate() {
        lam[(i, i)] += g;
    }
    let residual = (&lam * &sigma).amax();
    let lambda_min = lam.symmetric_eigenvalues().min();
    Ok(CertificateReport { min_gamma: gamma.iter().copied().fold(f64::INFINITY, f64::min), gamma, residual, lambda_min })
}

/// F(2 K_G α) with F(β) = 4nβ/|a-b|.
///
/// Let B̄ = E[B]. Off the diagonal B̄ = (a-b)/(2n) σσᵀ, so for Z ∈ Ω the
/// gap ⟨B̄, σσᵀ - Z⟩ is at least (a-b)/(2n) ‖σσᵀ - Z‖₁. For a maximiser Ẑ
/// of ⟨B, ·⟩ the same gap is at most ⟨B̄ - B, σσᵀ - Ẑ⟩ ≤ 2 K_G α with
/// α = ‖B - B̄‖_{∞→1}. Entries of σσᵀ - Z lie in [-2, 2], so the squared
/// Frobenius norm is at most twice the entrywise ℓ₁ norm.
pub fn transfer_envelope(alpha: f64, n: usize, a: f64, b: f64) -> f64 {
    4.0 * n as f64 * (2.0 * GROTHENDIECK * alpha) / (a - b).abs()
}

/// B - B̄ for a graph with the model λ: the centred adjacency, with
/// zero diagonal since A's unit diagonal is deterministic.
pub fn centred_adjacency(g: &crate::sbm::Graph, params: &ModelParams) -> DMatrix<f64> {
    let n = g.node_count();
    let nf = n as f64;
    let s = match params.mode {
        Mode::Assortative => 1.0,
        Mode::Dissortative => -1.0,
    };
    let mut m = DMatrix::from_fn(n, n, |u, v| {
        if u == v {
            0.0
        } else if g.spin(u) == g.spin(v) {
            -s * params.a / nf
        } else {
            -s * params.b / nf
        }
    });
    for (u, v) in g.edges() {
        m[(u, v)] += s;
        m[(v, u)] += s;
    }
    m
}
