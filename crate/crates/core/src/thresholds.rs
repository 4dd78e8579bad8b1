//! Threshold calculators: Kesten-Stigum, the recursive-majority critical
//! noise ε*_k, Poisson majority, and the explicit semirandom separation.

use rand_distr::{Distribution, Poisson};
use statrs::function::factorial::ln_binomial;
use statrs::function::gamma::ln_gamma;

use crate::error::{param, Error, Result};
use crate::graph_adversary::delta_of_eps;
use crate::rng;

/// ε_crit = (1 - 1/sqrt(k))/2. Errors for k < 1, where no noise level
/// allows recovery; k = 1 gives the boundary value 0.
pub fn ks_threshold(k: f64) -> Result<f64> {
    if !(k >= 1.0) {
        return Err(Error::BelowThreshold(format!("k = {k} admits no recoverable noise level")));
    }
    Ok(0.5 * (1.0 - 1.0 / k.sqrt()))
}

/// k(1-2ε)² > 1.
pub fn ks_possible(k: f64, eps: f64) -> bool {
    k * (1.0 - 2.0 * eps).powi(2) > 1.0
}

fn binom_pmf(k: u64, i: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return if i == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if i == k { 1.0 } else { 0.0 };
    }
    (ln_binomial(k, i) + i as f64 * p.ln() + (k - i) as f64 * (1.0 - p).ln()).exp()
}

/// M_k(p) = P(Bin(k,p) > k/2) + ½ P(Bin(k,p) = k/2).
pub fn majority_fn(k: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    // Sum the smaller tail for accuracy; M_k(p) = 1 - M_k(1-p).
    if p > 0.5 {
        return 1.0 - majority_fn(k, 1.0 - p);
    }
    let mut m = 0.0;
    for i in 0..=k {
        if 2 * i > k {
            m += binom_pmf(k, i, p);
        } else if 2 * i == k {
            m += 0.5 * binom_pmf(k, i, p);
        }
    }
    m
}

const POISSON_TAIL: f64 = 1e-12;

/// Poisson pmf up to the point where the remaining tail is below 1e-12.
fn poisson_pmf_table(mean: f64) -> Vec<f64> {
    if mean <= 0.0 {
        return vec![1.0];
    }
    let mut out = Vec::new();
    let mut acc = 0.0;
    let mut i = 0u64;
    loop {
        let lp = i as f64 * mean.ln() - mean - ln_gamma(i as f64 + 1.0);
        let p = lp.exp();
        out.push(p);
        acc += p;
        if i as f64 > mean && 1.0 - acc < POISSON_TAIL {
            break;
        }
        i += 1;
    }
    out
}

/// P(Pois(kq) > Pois(k(1-q))) + ½ P(Pois(kq) = Pois(k(1-q))).
pub fn majority_fn_poisson(k: f64, q: f64) -> f64 {
    let x = poisson_pmf_table(k * q);
    let y = poisson_pmf_table(k * (1.0 - q));
    // P(X > j) via suffix sums of x.
    let mut above = vec![0.0; x.len() + 1];
    for i in (0..x.len()).rev() {
        above[i] = above[i + 1] + x[i];
    }
    let mut m = 0.0;
    for (j, &py) in y.iter().enumerate() {
        let gt = if j + 1 < above.len() { above[j + 1] } else { 0.0 };
        let eq = if j < x.len() { x[j] } else { 0.0 };
        m += py * (gt + 0.5 * eq);
    }
    m
}

/// M_k'(q): closed form (q(1-q))^{(k-1)/2} k C(k-1, (k-1)/2) for odd k;
/// central difference with h = 1e-6 for even k.
pub fn majority_derivative(k: u64, q: f64) -> f64 {
    if k % 2 == 1 {
        let h = (k - 1) / 2;
        let lc = ln_binomial(k - 1, h);
        if h == 0 {
            return 1.0;
        }
        let base = q * (1.0 - q);
        if base <= 0.0 {
            return 0.0;
        }
        (h as f64 * base.ln() + lc).exp() * k as f64
    } else {
        let h = 1e-6;
        let (lo, hi) = ((q - h).max(0.0), (q + h).min(1.0));
        (majority_fn(k, hi) - majority_fn(k, lo)) / (hi - lo)
    }
}

fn majority_derivative_poisson(k: f64, q: f64) -> f64 {
    // M_Pois(q) = Σ_l P(Pois(k) = l) M_l(q); M_0 is the constant 1/2.
    let w = poisson_pmf_table(k);
    w.iter()
        .enumerate()
        .skip(1)
        .map(|(l, &p)| {
            let l = l as u64;
            let odd = if l.is_multiple_of(2) { l - 1 } else { l };
            p * majority_derivative(odd, q)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MajorityModel {
    Regular,
    Poisson,
}

fn m_of(k: f64, model: MajorityModel, q: f64) -> f64 {
    match model {
        MajorityModel::Regular => majority_fn(k as u64, q),
        MajorityModel::Poisson => majority_fn_poisson(k, q),
    }
}

fn dm_of(k: f64, model: MajorityModel, q: f64) -> f64 {
    match model {
        MajorityModel::Regular => majority_derivative(k as u64, q),
        MajorityModel::Poisson => majority_derivative_poisson(k, q),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsStar {
    pub eps_star: f64,
    pub q_star: f64,
    pub p_star: f64,
}

const GOLDEN_TOL: f64 = 1e-10;
const PRESCAN: usize = 1000;

/// ε*_k from 1/(1-ε*) = max_q M_k(q)/q, with q* the maximiser and
/// p* = q*/(1-ε*).
///
/// The maximiser is bracketed by a 10³-point scan of [1/2, 1], located by
/// golden section, and then polished on the stationarity condition
/// q M'(q) = M(q).
pub fn eps_star(k: f64, model: MajorityModel) -> Result<EpsStar> {
    match model {
        MajorityModel::Regular if !(k >= 3.0 && k.fract() == 0.0) => {
            return Err(param(format!("regular model needs an integer k >= 3, got {k}")))
        }
        MajorityModel::Poisson if !(k > 1.0) => return Err(param(format!("Poisson model needs k > 1, got {k}"))),
        _ => {}
    }
    let g = |q: f64| m_of(k, model, q) / q;
    let grid: Vec<f64> = (0..=PRESCAN).map(|i| 0.5 + 0.5 * i as f64 / PRESCAN as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&q| g(q)).collect();
    let best = (0..vals.len()).max_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    if best == 0 || best == PRESCAN || vals[best] <= 1.0 {
        return Err(Error::Numeric(format!("no interior maximum of M_k(q)/q on [1/2, 1] for k = {k}")));
    }
    let (mut a, mut b) = (grid[best - 1], grid[best + 1]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    while b - a > GOLDEN_TOL {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + phi * (b - a);
            gd = g(d);
        }
    }
    let mut q = 0.5 * (a + b);
    // g is flat at the maximum, so golden section only resolves q to about
    // sqrt(machine eps); bisect the stationarity condition instead.
    let h = |q: f64| q * dm_of(k, model, q) - m_of(k, model, q);
    let (mut lo, mut hi) = (grid[best - 1], grid[best + 1]);
    let (hlo, hhi) = (h(lo), h(hi));
    if hlo > 0.0 && hhi < 0.0 && model == MajorityModel::Regular {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        q = 0.5 * (lo + hi);
    }
    let max = g(q);
    let eps_star = 1.0 - 1.0 / max;
    Ok(EpsStar { eps_star, q_star: q, p_star: q / (1.0 - eps_star) })
}

/// ½ - ½ sqrt(log k / k).
pub fn eps_star_asymptotic(k: f64) -> f64 {
    0.5 - 0.5 * (k.ln() / k).sqrt()
}

/// p_0 = 1, p_{t+1} = M_k(p_t (1-ε)); returns p_0..=p_steps.
pub fn recursion_iterates(k: u64, eps: f64, steps: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut p = 1.0;
    out.push(p);
    for _ in 0..steps {
        p = majority_fn(k, p * (1.0 - eps));
        out.push(p);
    }
    out
}

/// Greatest q in (0, 1-ε] with M_k(q) = q/(1-ε), if any above `floor`.
pub fn greatest_intersection(k: u64, eps: f64, floor: f64) -> Option<f64> {
    let f = |q: f64| majority_fn(k, q) - q / (1.0 - eps);
    let top = 1.0 - eps;
    let steps = 20_000;
    let mut hi = top;
    let mut fhi = f(hi);
    for i in 1..=steps {
        let lo = top - (top - floor) * i as f64 / steps as f64;
        let flo = f(lo);
        if flo >= 0.0 && fhi < 0.0 {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if f(m) >= 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            return Some(0.5 * (a + b));
        }
        hi = lo;
        fhi = flo;
    }
    None
}

/// P(X ∈ S) and E[X 1_S] for X ~ Pois(mean) and S given by a predicate.
fn poisson_restricted(mean: f64, keep: impl Fn(usize) -> bool) -> (f64, f64) {
    let pmf = poisson_pmf_table(mean);
    pmf.iter().enumerate().filter(|(i, _)| keep(*i)).fold((0.0, 0.0), |(p, e), (i, &x)| (p + x, e + i as f64 * x))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppendixABound {
    /// k³ p δ ε² P3² (kp + E3 E1).
    pub general: f64,
    /// k² p P3² (kp + E3 E1).
    pub k_k: f64,
    pub p: f64,
    pub p3: f64,
    pub e3: f64,
    pub e1: f64,
}

/// Explicit lower bound on k⁶ - k'⁶ and its simplified form K(k).
pub fn appendix_a_bound(k: f64, eps: f64) -> Result<AppendixABound> {
    if !(k >= 9.0) {
        return Err(param(format!("the explicit bound needs k >= 9, got {k}")));
    }
    let delta = delta_of_eps(eps)?;
    let p = k * (-k).exp();
    let (p3, m3) = poisson_restricted(k * (1.0 - p), |i| i >= 3);
    let e3 = m3 / p3;
    let (p1, m1) = poisson_restricted(k, |i| i != 1);
    let e1 = m1 / p1;
    let k_k = k * k * p * p3 * p3 * (k * p + e3 * e1);
    Ok(AppendixABound { general: k_k * k * delta * eps * eps, k_k, p, p3, e3, e1 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemirandomWindow {
    pub eps_lo: f64,
    pub eps_hi: f64,
    /// (k⁶ - K(k))^{1/6}.
    pub c: f64,
    pub nonempty: bool,
}

/// The noise interval where the random tree is recoverable but the
/// semirandom one provably is not: (k⁶ - K)^{1/6} < (1-2ε)⁻² < k.
pub fn semirandom_window(k: f64) -> Result<SemirandomWindow> {
    let bound = appendix_a_bound(k, 0.0)?;
    let c = (k.powi(6) - bound.k_k).powf(1.0 / 6.0);
    let eps_lo = 0.5 * (1.0 - c.powf(-0.5));
    let eps_hi = ks_threshold(k)?;
    Ok(SemirandomWindow { eps_lo, eps_hi, c, nonempty: eps_lo < eps_hi })
}

/// Monte-Carlo estimate of k'⁶ for the one-period process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KPrimeEstimate {
    pub k6: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
    /// Samples containing at least one cuttable level-3 node.
    pub cutting_samples: usize,
}

/// One level-2 subtree of the one-period tree (levels 2 to 6) under the
/// children-only marking rule: a level-3 node with a single child is
/// MARKED when its parent and its child both have at least three children
/// whose own child count is not 1. Returns the expected number of level-6
/// leaves lost given the sampled topology, i.e. the cut coin of
/// probability δε² is averaged out.
fn expected_loss_in_subtree(cut_prob: f64, r: &mut rng::SimRng, pois: &Poisson<f64>) -> f64 {
    let draw = |r: &mut rng::SimRng| pois.sample(r) as u64;
    let level3: Vec<u64> = (0..draw(r)).map(|_| draw(r)).collect();
    if level3.iter().filter(|&&x| x != 1).count() < 3 {
        return 0.0;
    }
    let mut loss = 0.0;
    for &x in &level3 {
        if x != 1 {
            continue;
        }
        // Child counts of the level-5 nodes below the single level-4 child.
        let level5: Vec<u64> = (0..draw(r)).map(|_| draw(r)).collect();
        if level5.iter().filter(|&&y| y != 1).count() >= 3 {
            loss += cut_prob * level5.iter().sum::<u64>() as f64;
        }
    }
    loss
}

/// Monte-Carlo k'⁶ = E[level-6 descendants of a base node].
///
/// Without cutting the expectation is exactly k⁶, and cuts only happen
/// inside independent level-2 subtrees, so the estimator samples those
/// subtrees and reports k⁶ - k² · mean(expected leaves lost per subtree).
pub fn estimate_k_prime6(k: f64, eps: f64, samples: usize, seed: u64) -> Result<KPrimeEstimate> {
    if !(k > 0.0) || samples < 2 {
        return Err(param("need k > 0 and at least two samples"));
    }
    let delta = delta_of_eps(eps)?;
    let pois = Poisson::new(k).map_err(|e| param(e.to_string()))?;
    let mut r = rng::stream(seed, "appendix-a/subtrees");
    let (mut sum, mut sum2, mut cutting) = (0.0f64, 0.0f64, 0usize);
    for _ in 0..samples {
        let d = expected_loss_in_subtree(delta * eps * eps, &mut r, &pois);
        sum += d;
        sum2 += d * d;
        if d > 0.0 {
            cutting += 1;
        }
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum2 - n * mean * mean) / (n - 1.0);
    let k2 = k * k;
    let k6 = k.powi(6);
    Ok(KPrimeEstimate {
        k6,
        estimate: k6 - k2 * mean,
        stderr: k2 * (var.max(0.0) / n).sqrt(),
        samples,
        cutting_samples: cutting,
    })
}

/// Everything the calculators know about one degree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdReport {
    pub k: f64,
    pub eps_crit_ks: f64,
    pub eps_star: f64,
    pub q_star: f64,
    pub p_star: f64,
    pub eps_star_asymptotic: f64,
    /// K(k), when k ≥ 9.
    pub appendix_a_bound: Option<f64>,
}

pub fn threshold_report(k: f64, model: MajorityModel) -> Result<ThresholdReport> {
    let es = eps_star(k, model)?;
    Ok(ThresholdReport {
        k,
        eps_crit_ks: ks_threshold(k)?,
        eps_star: es.eps_star,
        q_star: es.q_star,
        p_star: es.p_star,
        eps_star_asymptotic: eps_star_asymptotic(k),
        appendix_a_bound: if k >= 9.0 { Some(appendix_a_bound(k, 0.0)?.k_k) } else { None },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_examples() {
        assert_eq!(ks_threshold(1.0).unwrap(), 0.0);
        assert!((ks_threshold(4.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(ks_threshold(0.5).is_err());
        assert!(ks_possible(2.0, 0.1));
        assert!(!ks_possible(4.0, 0.25));
    }

    #[test]
    fn majority_small_k() {
        for i in 0..=20 {
            let p = i as f64 / 20.0;
            assert!((majority_fn(1, p) - p).abs() < 1e-14);
            assert!((majority_fn(2, p) - p).abs() < 1e-14);
            assert!((majority_fn(3, p) - (3.0 * p * p - 2.0 * p.powi(3))).abs() < 1e-14);
        }
        assert!((majority_fn(3, 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(majority_derivative(1, 0.3), 1.0);
        for i in 1..20 {
            let q = i as f64 / 20.0;
            assert!((majority_derivative(3, q) - 6.0 * q * (1.0 - q)).abs() < 1e-13);
        }
        let h = 1e-6;
        let fd = (majority_fn(11, 0.7 + h) - majority_fn(11, 0.7 - h)) / (2.0 * h);
        assert!((majority_derivative(11, 0.7) - fd).abs() < 1e-5);
        // even k equals the preceding odd k
        assert!((majority_derivative(4, 0.6) - majority_derivative(3, 0.6)).abs() < 1e-6);
    }

    #[test]
    fn poisson_majority_basics() {
        assert!((majority_fn_poisson(3.0, 0.5) - 0.5).abs() < 1e-12);
        assert!(majority_fn_poisson(3.0, 0.7) > 0.5);
        let h = 1e-6;
        let fd = (majority_fn_poisson(4.0, 0.6 + h) - majority_fn_poisson(4.0, 0.6 - h)) / (2.0 * h);
        assert!((majority_derivative_poisson(4.0, 0.6) - fd).abs() < 1e-6);
    }

    #[test]
    fn eps_star_three() {
        let e = eps_star(3.0, MajorityModel::Regular).unwrap();
        assert!((e.eps_star - 1.0 / 9.0).abs() < 1e-9);
        assert!((e.q_star - 0.75).abs() < 1e-9);
        assert!((e.p_star - 27.0 / 32.0).abs() < 1e-9);
        assert!(eps_star(2.0, MajorityModel::Regular).is_err());
        let p = eps_star(3.0, MajorityModel::Poisson).unwrap();
        assert!(p.eps_star > 0.0 && p.eps_star < 0.5 && p.q_star > 0.5);
    }

    #[test]
    fn asymptotic_examples() {
        let e = std::f64::consts::E;
        assert!((eps_star_asymptotic(e) - (0.5 - 0.5 / e.sqrt())).abs() < 1e-15);
        assert!((eps_star_asymptotic(1000.0) - 0.4585).abs() < 1e-4);
    }

    #[test]
    fn conditional_mean_identity() {
        for k in [9.0, 12.0, 20.0] {
            let b = appendix_a_bound(k, 0.3).unwrap();
            let closed = (k - k * (-k).exp()) / (1.0 - k * (-k).exp());
            assert!((b.e1 - closed).abs() < 1e-10);
            assert!(b.k_k > 0.0);
            assert!((b.general - b.k_k * k * 0.09).abs() < 1e-10 * b.general.max(1.0));
        }
        let (a, b, c) = (
            appendix_a_bound(9.0, 0.3).unwrap().k_k,
            appendix_a_bound(12.0, 0.3).unwrap().k_k,
            appendix_a_bound(20.0, 0.3).unwrap().k_k,
        );
        assert!(a > b && b > c && c < 1e-2, "{a} {b} {c}");
        assert!(appendix_a_bound(8.0, 0.3).is_err());
    }

    #[test]
    fn window_nine() {
        let w = semirandom_window(9.0).unwrap();
        assert!(w.nonempty);
        assert!((w.eps_hi - ks_threshold(9.0).unwrap()).abs() < 1e-15);
        assert!(((1.0 - 2.0 * w.eps_lo).powi(-2) - w.c).abs() < 1e-10);
    }

    #[test]
    fn loss_matches_poissonised_expectation() {
        // With Poisson births the counts of single-child and other children
        // are independent, so the general bound is the exact expected loss.
        // The formula below only needs k >= 9 for its simplified form, so
        // evaluate the general expression directly at k = 4.
        let (k, eps) = (4.0f64, 1.0 / 3.0);
        let p = k * (-k).exp();
        let (p3, m3) = poisson_restricted(k * (1.0 - p), |i| i >= 3);
        let (p1, m1) = poisson_restricted(k, |i| i != 1);
        let exact = k.powi(3) * p * eps * eps * p3 * p3 * (k * p + (m3 / p3) * (m1 / p1));
        let e = estimate_k_prime6(k, eps, 200_000, 5).unwrap();
        let lost = e.k6 - e.estimate;
        assert!((lost - exact).abs() < 4.0 * e.stderr, "{lost} vs {exact} ± {}", e.stderr);
        assert!(e.cutting_samples > 0 && e.estimate < e.k6);
    }

    #[test]
    fn no_cut_estimate_is_exact() {
        let e = estimate_k_prime6(9.0, 0.0, 100, 1).unwrap();
        assert_eq!(e.estimate, e.k6);
        assert_eq!(e.stderr, 0.0);
    }
}
