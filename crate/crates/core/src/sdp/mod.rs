//! The partial-recovery SDP: maximise ⟨B, Z⟩ over symmetric PSD Z with
//! diag(Z) ≤ 1, where B = A - λJ and A carries ones on its diagonal.

mod admm;
pub mod certificate;
pub mod change;
pub mod cut_norm;
mod mixing;
pub mod rounding;

use nalgebra::{DMatrix, DVector};

use crate::error::{input, param, Residuals, Result};
use crate::sbm::{Graph, Mode};

pub use certificate::{dual_certificate, transfer_envelope, CertificateReport, GROTHENDIECK};
pub use change::{apply_change, sample_monotone_change, validate_monotone_change, ChangeBudget, MonotoneChange};
pub use cut_norm::{cut_norm, CutNormMode};
pub use rounding::{round_solution, Rounding};

/// How λ is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    /// (a+b)/2n, which needs the model parameters.
    Model { a: f64, b: f64 },
    /// log n / n, which does not.
    Fixed,
    Explicit(f64),
}

impl LambdaRule {
    pub fn value(&self, n: usize) -> f64 {
        let nf = n as f64;
        match *self {
            LambdaRule::Model { a, b } => (a + b) / (2.0 * nf),
            LambdaRule::Fixed => nf.ln() / nf,
            LambdaRule::Explicit(l) => l,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    Dense(DMatrix<f64>),
    /// `diag` on the diagonal, `edge + all` on adjacent pairs and `all` on
    /// every other off-diagonal pair.
    Structured {
        adjacency: Vec<Vec<usize>>,
        diag: f64,
        edge: f64,
        all: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpInstance {
    pub objective: Objective,
    pub lambda: f64,
}

impl SdpInstance {
    /// Any symmetric matrix as objective.
    pub fn from_matrix(b: DMatrix<f64>) -> Result<SdpInstance> {
        if !b.is_square() || b.nrows() == 0 {
            return Err(input("objective must be a nonempty square matrix"));
        }
        let n = b.nrows();
        for i in 0..n {
            for j in 0..i {
                if (b[(i, j)] - b[(j, i)]).abs() > 1e-12 * (1.0 + b[(i, j)].abs()) {
                    return Err(input(format!("objective is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(SdpInstance { objective: Objective::Dense(b), lambda: 0.0 })
    }

    pub fn n(&self) -> usize {
        match &self.objective {
            Objective::Dense(b) => b.nrows(),
            Objective::Structured { adjacency, .. } => adjacency.len(),
        }
    }

    pub fn dense(&self) -> DMatrix<f64> {
        match &self.objective {
            Objective::Dense(b) => b.clone(),
            Objective::Structured { adjacency, diag, edge, all } => {
                let n = adjacency.len();
                let mut b = DMatrix::from_element(n, n, *all);
                for (u, nb) in adjacency.iter().enumerate() {
                    b[(u, u)] = *diag;
                    for &v in nb {
                        b[(u, v)] += edge;
                    }
                }
                b
            }
        }
    }

    pub fn diag(&self, i: usize) -> f64 {
        match &self.objective {
            Objective::Dense(b) => b[(i, i)],
            Objective::Structured { diag, .. } => *diag,
        }
    }

    /// ⟨B, Z⟩.
    pub fn value(&self, z: &DMatrix<f64>) -> f64 {
        match &self.objective {
            Objective::Dense(b) => b.dot(z),
            Objective::Structured { adjacency, diag, edge, all } => {
                let total: f64 = z.sum();
                let trace = z.trace();
                let on_edges: f64 = adjacency.iter().enumerate().flat_map(|(u, nb)| nb.iter().map(move |&v| z[(u, v)])).sum();
                diag * trace + all * (total - trace) + edge * on_edges
            }
        }
    }
}

/// B from a graph: A - λJ with unit diagonal in assortative mode, and the
/// mirrored (2I - A) + λJ in dissortative mode so the diagonal stays
/// positive and entries favour opposite spins.
pub fn build_objective(g: &Graph, rule: LambdaRule, mode: Mode) -> Result<SdpInstance> {
    let n = g.node_count();
    if n < 2 {
        return Err(param("objective needs at least two nodes"));
    }
    let lambda = rule.value(n);
    if !lambda.is_finite() {
        return Err(param(format!("λ = {lambda} is not finite")));
    }
    let adjacency = (0..n).map(|v| g.neighbors(v).to_vec()).collect();
    let objective = match mode {
        Mode::Assortative => Objective::Structured { adjacency, diag: 1.0 - lambda, edge: 1.0, all: -lambda },
        Mode::Dissortative => Objective::Structured { adjacency, diag: 1.0 + lambda, edge: -1.0, all: lambda },
    };
    Ok(SdpInstance { objective, lambda })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// ADMM up to 64 nodes and the low-rank mixing method above.
    #[default]
    Auto,
    Admm,
    Mixing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Residual tolerance per node: the solver stops once both residuals are
    /// at most `tol * n`.
    pub tol: f64,
    pub max_iter: usize,
    pub method: Method,
    /// Factor width for the mixing method; defaults to ceil(sqrt(2n)) + 1.
    pub rank: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-6, max_iter: 5000, method: Method::Auto, rank: None }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub z: DMatrix<f64>,
    /// Z = V Vᵀ when the solver worked with a factor.
    pub factor: Option<DMatrix<f64>>,
    pub objective: f64,
    /// Σy + n·μ for the dual point y built from Z, where μ is its dual
    /// infeasibility. A valid upper bound on the optimum.
    pub upper_bound: f64,
    pub residuals: Residuals,
    pub method: Method,
}

pub const ADMM_MAX_NODES: usize = 64;

pub fn solve_sdp(inst: &SdpInstance, opts: &SolverOptions) -> Result<SdpSolution> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(param("tolerance must be positive and max_iter nonzero"));
    }
    let method = match opts.method {
        Method::Auto if inst.n() <= ADMM_MAX_NODES => Method::Admm,
        Method::Auto => Method::Mixing,
        m => m,
    };
    match method {
        Method::Admm => admm::solve(inst, opts),
        _ => mixing::solve(inst, opts),
    }
}

/// Dual point from a primal Z: y_i = (BZ)_ii / Z_ii where Z_ii > 0, else 0,
/// clipped at 0. Returns (Σy, dual infeasibility μ = max(0, -λ_min(diag(y) - B))).
pub(crate) fn dual_from_primal(b: &DMatrix<f64>, z: &DMatrix<f64>) -> (f64, f64) {
    let n = b.nrows();
    let bz_diag: Vec<f64> = (0..n).map(|i| b.row(i).dot(&z.column(i).transpose())).collect();
    let y: Vec<f64> = (0..n).map(|i| if z[(i, i)] > 1e-12 { (bz_diag[i] / z[(i, i)]).max(0.0) } else { 0.0 }).collect();
    let mut lam = -b.clone();
    for i in 0..n {
        lam[(i, i)] += y[i];
    }
    let min = lam.symmetric_eigenvalues().min();
    (y.iter().sum(), (-min).max(0.0))
}

/// Largest violation of Z ⪰ 0 and diag(Z) ≤ 1.
pub fn feasibility_violation(z: &DMatrix<f64>) -> f64 {
    let diag = (0..z.nrows()).map(|i| z[(i, i)] - 1.0).fold(0.0f64, f64::max);
    let eig = -z.clone().symmetric_eigenvalues().min();
    diag.max(eig).max(0.0)
}

pub(crate) fn outer(v: &DMatrix<f64>) -> DMatrix<f64> {
    v * v.transpose()
}

/// ‖σσᵀ - Z‖_F² for a ±1 vector σ.
pub fn distance_to_truth(z: &DMatrix<f64>, sigma: &[f64]) -> f64 {
    let s = DVector::from_column_slice(sigma);
    (s.clone() * s.transpose() - z).norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbm::{Spin, SpinAssignment};

    fn two_nodes(edge: bool) -> Graph {
        let spins = SpinAssignment::new(vec![Spin::Plus, Spin::Plus]);
        Graph::from_edges(spins, if edge { &[(0, 1)] } else { &[] }).unwrap()
    }

    #[test]
    fn objective_examples() {
        let b = build_objective(&two_nodes(false), LambdaRule::Explicit(0.0), Mode::Assortative).unwrap().dense();
        assert_eq!(b, DMatrix::identity(2, 2));
        let b = build_objective(&two_nodes(true), LambdaRule::Explicit(0.25), Mode::Assortative).unwrap().dense();
        assert_eq!(b, DMatrix::from_element(2, 2, 0.75));
        let n = 22026;
        assert!((LambdaRule::Fixed.value(n) - (n as f64).ln() / n as f64).abs() < 1e-18);
        assert!(build_objective(&Graph::empty(SpinAssignment::new(vec![Spin::Plus])), LambdaRule::Fixed, Mode::Assortative).is_err());
    }

    #[test]
    fn lambda_shift_is_rank_one() {
        let spins = SpinAssignment::new(vec![Spin::Plus, Spin::Minus, Spin::Plus, Spin::Minus]);
        let g = Graph::from_edges(spins, &[(0, 2), (1, 3), (0, 1)]).unwrap();
        // dyadic values keep the identity exact in floating point
        let (l, lp) = (0.375, 0.125);
        let b = build_objective(&g, LambdaRule::Explicit(l), Mode::Assortative).unwrap().dense();
        let bp = build_objective(&g, LambdaRule::Explicit(lp), Mode::Assortative).unwrap().dense();
        assert_eq!(bp - b, DMatrix::from_element(4, 4, l - lp));
    }

    #[test]
    fn structured_value_matches_dense() {
        let spins = SpinAssignment::new(vec![Spin::Plus; 5]);
        let g = Graph::from_edges(spins, &[(0, 1), (1, 2), (3, 4), (0, 4)]).unwrap();
        let z = DMatrix::from_fn(5, 5, |i, j| ((i * 7 + j * 7) % 5) as f64 / 5.0 - 0.4);
        for mode in [Mode::Assortative, Mode::Dissortative] {
            let inst = build_objective(&g, LambdaRule::Explicit(0.2), mode).unwrap();
            assert!((inst.value(&z) - inst.dense().dot(&z)).abs() < 1e-12);
        }
    }

    #[test]
    fn two_by_two_examples() {
        let opts = SolverOptions::default();
        let sol = solve_sdp(&SdpInstance::from_matrix(DMatrix::identity(2, 2)).unwrap(), &opts).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-5);
        assert!((sol.z.clone() - DMatrix::identity(2, 2)).amax() < 1e-3);
        let sol = solve_sdp(&SdpInstance::from_matrix(DMatrix::from_element(2, 2, 0.75)).unwrap(), &opts).unwrap();
        assert!((sol.objective - 3.0).abs() < 1e-5);
        assert!((sol.z.clone() - DMatrix::from_element(2, 2, 1.0)).amax() < 1e-3);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 2.0]);
        let sol = solve_sdp(&SdpInstance::from_matrix(b).unwrap(), &opts).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert!((sol.z.clone() - want).amax() < 1e-3);
        assert!(SdpInstance::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0])).is_err());
    }

    #[test]
    fn methods_agree_on_small_graph() {
        let p = crate::sbm::ModelParams::new(40, 12.0, 2.0, Mode::Assortative).unwrap();
        let g = crate::sbm::sample_precursor(&p, 3);
        let inst = build_objective(&g, LambdaRule::Model { a: 12.0, b: 2.0 }, Mode::Assortative).unwrap();
        let a = solve_sdp(&inst, &SolverOptions { method: Method::Admm, ..Default::default() }).unwrap();
        let m = solve_sdp(&inst, &SolverOptions { method: Method::Mixing, ..Default::default() }).unwrap();
        assert!((a.objective - m.objective).abs() < 1e-3 * a.objective.abs(), "{} {}", a.objective, m.objective);
        for s in [&a, &m] {
            assert!(feasibility_violation(&s.z) < 1e-6);
            assert!(s.upper_bound >= s.objective - 1e-9);
        }
    }
}
