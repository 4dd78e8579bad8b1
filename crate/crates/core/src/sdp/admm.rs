//! Two-block ADMM: X on the PSD cone, Y on {diag ≤ 1}, X = Y.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{dual_from_primal, Method, SdpInstance, SdpSolution, SolverOptions};
use crate::error::{Error, Residuals, Result};

fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut eig = SymmetricEigen::new(sym);
    eig.eigenvalues.iter_mut().for_each(|l| *l = l.max(0.0));
    eig.recompose()
}

/// Rescales rows and columns so no diagonal entry exceeds one; keeps PSD.
fn clamp_diag(mut x: DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let d: Vec<f64> = (0..n).map(|i| 1.0 / x[(i, i)].max(1.0).sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            x[(i, j)] *= d[i] * d[j];
        }
    }
    x
}

pub(super) fn solve(inst: &SdpInstance, opts: &SolverOptions) -> Result<SdpSolution> {
    let b = inst.dense();
    let n = b.nrows();
    let target = opts.tol * n as f64;
    let mut rho = 1.0;
    let mut y = DMatrix::<f64>::identity(n, n);
    let mut u = DMatrix::<f64>::zeros(n, n);
    let mut x = y.clone();
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        x = project_psd(&(&y - &u + &b / rho));
        let y_prev = y.clone();
        y = &x + &u;
        for i in 0..n {
            y[(i, i)] = y[(i, i)].min(1.0);
        }
        u += &x - &y;
        primal = (&x - &y).norm();
        dual = rho * (&y - &y_prev).norm();
        if primal <= target && dual <= target {
            break;
        }
        // Residual balancing, every few steps and only early on: adapting
        // every step can cycle without converging.
        if iterations % 20 != 0 || iterations > opts.max_iter / 2 {
            continue;
        }
        if primal > 10.0 * dual {
            rho *= 2.0;
            u /= 2.0;
        } else if dual > 10.0 * primal {
            rho /= 2.0;
            u *= 2.0;
        }
    }
    let residuals = Residuals { iterations, primal, dual };
    if primal > target || dual > target {
        return Err(Error::NotConverged(residuals));
    }
    let z = clamp_diag(x);
    let objective = b.dot(&z);
    let (sum_y, mu) = dual_from_primal(&b, &z);
    Ok(SdpSolution {
        objective,
        upper_bound: sum_y + n as f64 * mu,
        z,
        factor: None,
        residuals,
        method: Method::Admm,
    })
}
