//! ‖M‖_{∞→1} = max over x ∈ {±1}ⁿ of ‖Mx‖₁.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

pub const EXACT_MAX_NODES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutNormMode {
    Exact,
    /// Alternating sign ascent from random starts; a lower bound.
    Heuristic { starts: usize, seed: u64 },
}

pub fn cut_norm(m: &DMatrix<f64>, mode: CutNormMode) -> Result<f64> {
    if m.ncols() == 0 {
        return Ok(0.0);
    }
    match mode {
        CutNormMode::Exact => exact(m),
        CutNormMode::Heuristic { starts, seed } => Ok(heuristic(m, starts.max(1), seed)),
    }
}

/// Gray-code walk over x with x_0 = +1 (‖M(-x)‖₁ = ‖Mx‖₁), updating Mx by
/// one column per step.
fn exact(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.ncols();
    if n > EXACT_MAX_NODES {
        return Err(Error::Capacity(format!("exact cut norm enumerates 2^(n-1) vectors; n = {n} exceeds {EXACT_MAX_NODES}")));
    }
    let mut x = vec![1.0f64; n];
    let mut y: DVector<f64> = m * DVector::from_element(n, 1.0);
    let mut best = y.abs().sum();
    for step in 1u64..(1u64 << (n - 1)) {
        // Gray code flips bit = trailing zeros of step; offset by one to keep x_0 fixed.
        let j = step.trailing_zeros() as usize + 1;
        y.axpy(-2.0 * x[j], &m.column(j), 1.0);
        x[j] = -x[j];
        best = best.max(y.abs().sum());
    }
    Ok(best)
}

fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// ‖Mx‖₁ = max_y yᵀMx, so fixing one side and signing the other never
/// decreases the objective.
fn heuristic(m: &DMatrix<f64>, starts: usize, seed: u64) -> f64 {
    let n = m.ncols();
    let mut r = rng::stream(seed, "sdp/cut-norm");
    let mut best = 0.0f64;
    for _ in 0..starts {
        let mut x = DVector::from_fn(n, |_, _| if r.random_bool(0.5) { 1.0 } else { -1.0 });
        let mut value = (m * &x).abs().sum();
        loop {
            let y = (m * &x).map(sign);
            x = (m.transpose() * &y).map(sign);
            let next = (m * &x).abs().sum();
            if next <= value + 1e-12 * value.abs().max(1.0) {
                value = value.max(next);
                break;
            }
            value = next;
        }
        best = best.max(value);
    }
    best
}
