//! Sign rounding of the top eigenvector of Z.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::SdpSolution;
use crate::error::{Error, Result};
use crate::rng;
use crate::sbm::{Spin, SpinAssignment};

#[derive(Debug, Clone)]
pub struct Rounding {
    pub spins: SpinAssignment,
    pub top: f64,
    pub second: f64,
    /// The top eigenspace is (numerically) more than one-dimensional, so
    /// the output is an arbitrary deterministic choice.
    pub degenerate: bool,
}

const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITER: usize = 10_000;
const DEGENERATE_GAP: f64 = 1e-6;

fn signs(x: &DVector<f64>) -> SpinAssignment {
    // Exact zeros go to +1.
    SpinAssignment::new(x.iter().map(|&v| Spin::from_bool(v >= 0.0)).collect())
}

/// Deterministic generic start so no eigenvector is orthogonal to it by
/// construction (a constant vector would be, for balanced spins).
fn start_vector(n: usize) -> DVector<f64> {
    let key = rng::derive_seed(0, "sdp/power-start", 0);
    let v = DVector::from_fn(n, |i, _| rng::hash_unit(key, i as u64) - 0.5);
    let norm = v.norm();
    v / norm
}

/// Power iteration for the top eigenpair of a PSD matrix, optionally
/// deflated by a known unit eigenvector. `None` on stagnation.
fn power(z: &DMatrix<f64>, deflate: Option<(&DVector<f64>, f64)>) -> Option<(DVector<f64>, f64)> {
    let apply = |x: &DVector<f64>| {
        let mut y = z * x;
        if let Some((u, l)) = deflate {
            y -= u * (l * u.dot(x));
        }
        y
    };
    let mut x = start_vector(z.nrows());
    if let Some((u, _)) = deflate {
        x -= u * u.dot(&x);
        let norm = x.norm();
        if norm == 0.0 {
            return Some((x, 0.0));
        }
        x /= norm;
    }
    let mut rayleigh = f64::NAN;
    for _ in 0..POWER_MAX_ITER {
        let y = apply(&x);
        let lambda = x.dot(&y);
        let norm = y.norm();
        if norm == 0.0 {
            return Some((x, 0.0));
        }
        let next = y / norm;
        let settled = (lambda - rayleigh).abs() <= POWER_TOL * lambda.abs().max(f64::MIN_POSITIVE)
            && (&next - &x).norm().min((&next + &x).norm()) <= POWER_TOL.sqrt();
        x = next;
        rayleigh = lambda;
        if settled {
            return Some((x, lambda));
        }
    }
    None
}

/// Top two eigenpairs of a symmetric matrix: power iteration with deflation,
/// falling back to a full eigendecomposition.
pub fn top_eigenpairs(z: &DMatrix<f64>) -> Result<(DVector<f64>, f64, f64)> {
    if z.nrows() == 0 {
        return Err(Error::Numeric("empty matrix".into()));
    }
    if z.nrows() == 1 {
        return Ok((DVector::from_element(1, 1.0), z[(0, 0)], f64::NEG_INFINITY));
    }
    if let Some((x, top)) = power(z, None) {
        if let Some((_, second)) = power(z, Some((&x, top))) {
            return Ok((x, top, second));
        }
    }
    full_eigen(z)
}

fn full_eigen(z: &DMatrix<f64>) -> Result<(DVector<f64>, f64, f64)> {
    let eig = SymmetricEigen::try_new(z.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = order[0];
    let second = order.get(1).map_or(f64::NEG_INFINITY, |&i| eig.eigenvalues[i]);
    Ok((eig.eigenvectors.column(top).into_owned(), eig.eigenvalues[top], second))
}

fn finish(x: DVector<f64>, top: f64, second: f64) -> Rounding {
    let degenerate = second >= top - DEGENERATE_GAP * top.abs().max(1.0);
    Rounding { spins: signs(&x), top, second, degenerate }
}

/// Signs of the top eigenvector of Z. With a factor Z = VVᵀ this reduces to
/// the r×r matrix VᵀV: if VᵀV u = μu then Z(Vu) = μ(Vu).
pub fn round_solution(sol: &SdpSolution) -> Result<Rounding> {
    match &sol.factor {
        Some(v) => {
            let (u, top, second) = full_eigen(&(v.transpose() * v))?;
            Ok(finish(v * u, top, second))
        }
        None => {
            let (x, top, second) = top_eigenpairs(&sol.z)?;
            Ok(finish(x, top, second))
        }
    }
}

/// Rounding of a bare matrix, for callers without a solver result.
pub fn round_matrix(z: &DMatrix<f64>) -> Result<Rounding> {
    let (x, top, second) = top_eigenpairs(z)?;
    Ok(finish(x, top, second))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbm::partial_recovery_score;
    use rand::Rng;

    fn sigma(n: usize, seed: u64) -> SpinAssignment {
        let mut r = rng::stream(seed, "test/sigma");
        SpinAssignment::new((0..n).map(|_| Spin::from_bool(r.random_bool(0.5))).collect())
    }

    #[test]
    fn rank_one_is_exact() {
        let s = sigma(50, 1);
        let x = DVector::from_vec(s.to_f64());
        let z = &x * x.transpose();
        let r = round_matrix(&z).unwrap();
        assert!(r.spins == s || r.spins == s.negated());
        assert!(!r.degenerate);
    }

    #[test]
    fn identity_is_flagged() {
        let r = round_matrix(&DMatrix::identity(6, 6)).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.spins.len(), 6);
        assert_eq!(round_matrix(&DMatrix::identity(6, 6)).unwrap().spins, r.spins);
    }

    #[test]
    fn small_noise_keeps_signs() {
        let n = 200;
        let s = sigma(n, 2);
        let x = DVector::from_vec(s.to_f64());
        let mut r = rng::stream(3, "test/noise");
        let g = DMatrix::from_fn(n, n, |_, _| r.random::<f64>() - 0.5);
        let mut noise = &g + g.transpose();
        let op = noise.clone().symmetric_eigenvalues().amax();
        noise *= 0.1 / op;
        let z = &x * x.transpose() + noise;
        let out = round_matrix(&z).unwrap();
        assert!(partial_recovery_score(&out.spins, &s).unwrap() >= 0.99);
        let (v, top, _) = full_eigen(&z).unwrap();
        let (w, top2, _) = top_eigenpairs(&z).unwrap();
        assert!((top - top2).abs() < 1e-6 * top);
        assert!(v.dot(&w).abs() > 1.0 - 1e-6);
    }
}
