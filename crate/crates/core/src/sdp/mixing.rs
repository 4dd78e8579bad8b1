//! Low-rank coordinate ascent on Z = V Vᵀ with rows of norm at most one
//! (the "mixing method"). Each row update solves its subproblem exactly.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{dual_from_primal, outer, Method, Objective, SdpInstance, SdpSolution, SolverOptions};
use crate::error::{Error, Residuals, Result};
use crate::rng;

/// Row-major n×r factor.
struct Factor {
    v: Vec<f64>,
    r: usize,
}

impl Factor {
    fn row(&self, i: usize) -> &[f64] {
        &self.v[i * self.r..(i + 1) * self.r]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// g = Σ_{j≠i} B_ij v_j into `out`.
fn gradient(inst: &SdpInstance, f: &Factor, sum: &[f64], i: usize, out: &mut [f64]) {
    let r = f.r;
    match &inst.objective {
        Objective::Structured { adjacency, edge, all, .. } => {
            let vi = f.row(i);
            for k in 0..r {
                out[k] = all * (sum[k] - vi[k]);
            }
            for &j in &adjacency[i] {
                let vj = f.row(j);
                for k in 0..r {
                    out[k] += edge * vj[k];
                }
            }
        }
        Objective::Dense(b) => {
            out.iter_mut().for_each(|x| *x = 0.0);
            for j in 0..b.nrows() {
                if j == i {
                    continue;
                }
                let w = b[(i, j)];
                if w != 0.0 {
                    let vj = f.row(j);
                    for k in 0..r {
                        out[k] += w * vj[k];
                    }
                }
            }
        }
    }
}

pub(super) fn solve(inst: &SdpInstance, opts: &SolverOptions) -> Result<SdpSolution> {
    let n = inst.n();
    let r = opts.rank.unwrap_or(((2.0 * n as f64).sqrt().ceil() as usize + 1).min(n)).max(1);
    // Fixed stream: the solver is deterministic given its input.
    let mut init = rng::stream(0, "sdp/mixing-init");
    let mut f = Factor { v: (0..n * r).map(|_| init.sample::<f64, _>(StandardNormal)).collect(), r };
    for i in 0..n {
        let row = &mut f.v[i * r..(i + 1) * r];
        let norm = dot(row, row).sqrt();
        row.iter_mut().for_each(|x| *x /= norm);
    }
    let mut sum = vec![0.0; r];
    for i in 0..n {
        for k in 0..r {
            sum[k] += f.v[i * r + k];
        }
    }
    let b = inst.dense();
    let target = opts.tol * n as f64;
    let mut g = vec![0.0; r];
    let mut last = f64::NEG_INFINITY;
    let mut stall = 1e-9;
    let mut dual = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < opts.max_iter {
        sweeps += 1;
        let mut value = 0.0;
        for i in 0..n {
            gradient(inst, &f, &sum, i, &mut g);
            let gn = dot(&g, &g).sqrt();
            let d = inst.diag(i);
            let scale = if gn == 0.0 {
                continue;
            } else if d >= 0.0 {
                1.0 / gn
            } else {
                (gn / -d).min(1.0) / gn
            };
            let row = &mut f.v[i * r..(i + 1) * r];
            for k in 0..r {
                let new = g[k] * scale;
                sum[k] += new - row[k];
                row[k] = new;
            }
            let rn2 = dot(row, row);
            value += d * rn2 + dot(row, &g);
        }
        // `value` mixes old and new rows; it is only a progress signal.
        if (value - last).abs() <= stall * value.abs().max(1.0) {
            let z = outer(&to_matrix(&f, n));
            let (sum_y, mu) = dual_from_primal(&b, &z);
            dual = mu;
            if mu <= target {
                return Ok(SdpSolution {
                    objective: b.dot(&z),
                    upper_bound: sum_y + n as f64 * mu,
                    z,
                    factor: Some(to_matrix(&f, n)),
                    residuals: Residuals { iterations: sweeps, primal: 0.0, dual: mu },
                    method: Method::Mixing,
                });
            }
            stall /= 100.0;
        }
        last = value;
    }
    Err(Error::NotConverged(Residuals { iterations: sweeps, primal: 0.0, dual }))
}

fn to_matrix(f: &Factor, n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, f.r, &f.v)
}
