use rand::Rng;
use rayon::prelude::*;

use super::{binomial_stderr, mean_stderr, trial_seed, worker_pool, ExperimentKind, ExperimentOutput, ExperimentSpec, Table, TRIAL_HEADER};
use crate::error::{param, Error, Result};
use crate::graph_adversary::{apply_adversary, assign_markings};
use crate::rng;
use crate::sbm::{partial_recovery_score, sample_precursor, Graph, Mode, ModelParams, Spin, SpinAssignment};
use crate::sdp::{
    apply_change, build_objective, cut_norm, distance_to_truth, round_solution, sample_monotone_change, solve_sdp,
    transfer_envelope, ChangeBudget, CutNormMode, LambdaRule, SolverOptions,
};
use crate::sdp::certificate::centred_adjacency;
use crate::thresholds::{
    appendix_a_bound, estimate_k_prime6, greatest_intersection, ks_threshold, majority_fn, recursion_iterates,
    semirandom_window,
};
use crate::tree::Tree;
use crate::tree_model::{
    cutting_adversary_majority_breaker, sample_dist2, sample_dist4_detailed, sample_leaf_census, sample_plain,
    strong_adversary_asymmetric, strong_adversary_opposite_path, Birth, CensusAdversary,
};
use crate::tree_reconstruct::{
    exact_posterior, majority_vote, recursive_majority, simulate_recursive_majority_opposite_path, PosteriorModel,
};

/// Explicit trees larger than this (in expectation) are refused.
const MAX_EXPLICIT_NODES: f64 = 4.0e6;

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    match spec.kind {
        ExperimentKind::TreeThresholdSweep => run_tree_sweep(spec),
        ExperimentKind::Cobweb => run_cobweb(spec),
        ExperimentKind::GraphRecovery => run_graph_recovery(spec),
        ExperimentKind::SdpRobustness => run_sdp_robustness(spec),
        ExperimentKind::AppendixACheck => run_appendix_a_check(spec),
        ExperimentKind::RelativeSpin => run_relative_spin(spec),
    }
}

fn parse_mode(s: &str) -> Result<Mode> {
    match s {
        "assortative" => Ok(Mode::Assortative),
        "dissortative" => Ok(Mode::Dissortative),
        _ => Err(param(format!("mode must be assortative or dissortative, got `{s}`"))),
    }
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Assortative => "assortative",
        Mode::Dissortative => "dissortative",
    }
}

pub fn parse_lambda(s: &str, a: f64, b: f64) -> Result<LambdaRule> {
    match s {
        "model" => Ok(LambdaRule::Model { a, b }),
        "fixed" => Ok(LambdaRule::Fixed),
        x => x.parse::<f64>().map(LambdaRule::Explicit).map_err(|_| param(format!("bad lambda `{x}`"))),
    }
}

/// `none`, `delete-all`, `independent:ADD:DELETE` or `subset:M` (nodes 0..M).
pub fn parse_budget(s: &str) -> Result<ChangeBudget> {
    let bad = || param(format!("bad budget `{s}`"));
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["none"] => Ok(ChangeBudget::Empty),
        ["delete-all"] => Ok(ChangeBudget::DeleteAll),
        ["independent", add, del] => Ok(ChangeBudget::Independent {
            add: add.parse().map_err(|_| bad())?,
            delete: del.parse().map_err(|_| bad())?,
        }),
        ["subset", m] => Ok(ChangeBudget::WithinSubset((0..m.parse::<usize>().map_err(|_| bad())?).collect())),
        _ => Err(bad()),
    }
}

fn parse_sign(s: &str) -> Result<Spin> {
    match s {
        "+" | "+1" | "plus" => Ok(Spin::Plus),
        "-" | "-1" | "minus" => Ok(Spin::Minus),
        _ => Err(param(format!("bad sign `{s}`"))),
    }
}

/// Runs `trials` seeded trials on the worker pool, in index order.
fn run_trials<T: Send>(trials: usize, base: u64, f: impl Fn(u64) -> T + Sync) -> Result<Vec<(u64, T)>> {
    let pool = worker_pool()?;
    Ok(pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| {
                let s = trial_seed(base, i);
                (s, f(s))
            })
            .collect()
    }))
}

fn collect<T>(results: Vec<(u64, Result<T>)>) -> Result<Vec<(u64, T)>> {
    results.into_iter().map(|(s, r)| r.map(|v| (s, v))).collect()
}

fn push_trial(t: &mut Table, kind: ExperimentKind, point: &str, seed: u64, metric: &str, value: f64) {
    t.push(vec![kind.name().into(), point.into(), seed.into(), metric.into(), value.into()]);
}

/// Cartesian product of index ranges, last index fastest.
fn grid(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &s in sizes {
        out = out.into_iter().flat_map(|p| (0..s).map(move |i| [p.clone(), vec![i]].concat())).collect();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum TreeLaw {
    Poisson,
    Regular,
    Dist2,
    Dist4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Algo {
    Maj,
    RecMaj,
    Map,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum TreeAdversary {
    None,
    Cutting,
    OppositePath,
    Asymmetric { asym: f64, sign: Spin },
}

#[derive(Debug, Clone, Copy)]
struct TreePoint {
    k: f64,
    eps: f64,
    depth: usize,
    law: TreeLaw,
    algo: Algo,
    adversary: TreeAdversary,
}

impl TreePoint {
    fn birth(&self) -> Result<Birth> {
        match self.law {
            TreeLaw::Regular => {
                if self.k.fract() != 0.0 || self.k < 1.0 {
                    return Err(param(format!("regular trees need an integer k >= 1, got {}", self.k)));
                }
                Ok(Birth::Regular(self.k as usize))
            }
            _ => Ok(Birth::Poisson(self.k)),
        }
    }

    fn plain(&self) -> bool {
        matches!(self.law, TreeLaw::Poisson | TreeLaw::Regular)
    }

    /// Whether the trial can skip building the tree.
    fn streamed(&self) -> bool {
        self.plain()
            && matches!(
                (self.algo, self.adversary),
                (Algo::Maj, TreeAdversary::None | TreeAdversary::Cutting) | (Algo::RecMaj, TreeAdversary::OppositePath)
            )
    }

    fn check_size(&self) -> Result<()> {
        if self.streamed() {
            return Ok(());
        }
        let nodes: f64 = (0..=self.depth).map(|d| self.k.powi(d as i32)).sum();
        if nodes > MAX_EXPLICIT_NODES {
            return Err(Error::Capacity(format!(
                "an explicit tree with k={} and depth={} has about {nodes:.3e} nodes",
                self.k, self.depth
            )));
        }
        Ok(())
    }

    fn label(&self) -> String {
        format!(
            "k={};eps={};depth={};tree={};algo={};adversary={}",
            super::fmt_num(self.k),
            super::fmt_num(self.eps),
            self.depth,
            law_name(self.law),
            algo_name(self.algo),
            adversary_name(self.adversary)
        )
    }
}

fn law_name(l: TreeLaw) -> &'static str {
    match l {
        TreeLaw::Poisson => "poisson",
        TreeLaw::Regular => "regular",
        TreeLaw::Dist2 => "dist2",
        TreeLaw::Dist4 => "dist4",
    }
}

fn algo_name(a: Algo) -> &'static str {
    match a {
        Algo::Maj => "maj",
        Algo::RecMaj => "recmaj",
        Algo::Map => "map",
    }
}

fn adversary_name(a: TreeAdversary) -> &'static str {
    match a {
        TreeAdversary::None => "none",
        TreeAdversary::Cutting => "cutting",
        TreeAdversary::OppositePath => "opposite-path",
        TreeAdversary::Asymmetric { .. } => "asymmetric",
    }
}

/// One trial: 1.0 if the root spin is recovered, else 0.0.
fn tree_trial(p: &TreePoint, seed: u64) -> Result<f64> {
    let hit = |b: bool| if b { 1.0 } else { 0.0 };
    if p.streamed() {
        let birth = p.birth()?;
        return match p.algo {
            Algo::RecMaj => Ok(hit(simulate_recursive_majority_opposite_path(birth, p.eps, p.depth, seed)?)),
            _ => {
                let adv = if p.adversary == TreeAdversary::Cutting { CensusAdversary::Cutting } else { CensusAdversary::None };
                let c = sample_leaf_census(birth, p.eps, p.depth, adv, seed)?;
                Ok(match c.agree.cmp(&c.disagree) {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Less => 0.0,
                    std::cmp::Ordering::Equal => hit(rng::hash_coin(rng::derive_seed(seed, "sweep/tie", 0), 0)),
                })
            }
        };
    }
    let tree_seed = rng::derive_seed(seed, "sweep/tree", 0);
    let (tree, model): (Tree, PosteriorModel) = match p.law {
        TreeLaw::Poisson | TreeLaw::Regular => (sample_plain(p.birth()?, p.eps, p.depth, tree_seed)?, PosteriorModel::Plain { eps: p.eps }),
        TreeLaw::Dist2 => (sample_dist2(p.k, p.eps, p.depth, tree_seed)?, PosteriorModel::Dist2 { eps: p.eps }),
        TreeLaw::Dist4 => {
            let d = sample_dist4_detailed(p.k, p.eps, p.depth, tree_seed)?;
            let noise = d.noise.expect("noise is set for this law");
            (d.tree, PosteriorModel::EdgeNoise { noise, root_pair: d.root_pair })
        }
    };
    let truth = tree.root_spin();
    let observed = match p.adversary {
        TreeAdversary::None => tree,
        TreeAdversary::Cutting => cutting_adversary_majority_breaker(&tree),
        TreeAdversary::OppositePath => strong_adversary_opposite_path(&tree),
        TreeAdversary::Asymmetric { asym, sign } => {
            strong_adversary_asymmetric(&tree, p.eps, asym, sign, rng::derive_seed(seed, "sweep/asym", 0))?
        }
    };
    let est_seed = rng::derive_seed(seed, "sweep/estimator", 0);
    let est = match p.algo {
        Algo::Maj => majority_vote(&observed, est_seed),
        Algo::RecMaj => recursive_majority(&observed, est_seed),
        Algo::Map => {
            // The posterior can only be computed on the unmodified law.
            if p.adversary != TreeAdversary::None {
                return Err(param("algo=map is only defined without a tree adversary"));
            }
            exact_posterior(&observed, &model)?
        }
    };
    Ok(hit(est.spin == truth))
}

/// Success rate of root recovery over a grid of (k, ε, depth, tree law,
/// estimator, adversary).
pub fn run_tree_sweep(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let ks: Vec<f64> = spec.values("k", &["3"])?;
    let epss: Vec<f64> = spec.values("eps", &["0.1"])?;
    let depths: Vec<usize> = spec.values("depth", &["8"])?;
    let laws = spec
        .strings("tree", &["poisson"])
        .iter()
        .map(|s| match s.as_str() {
            "poisson" => Ok(TreeLaw::Poisson),
            "regular" => Ok(TreeLaw::Regular),
            "dist2" => Ok(TreeLaw::Dist2),
            "dist4" => Ok(TreeLaw::Dist4),
            _ => Err(param(format!("unknown tree law `{s}`"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let algos = spec
        .strings("algo", &["maj"])
        .iter()
        .map(|s| match s.as_str() {
            "maj" => Ok(Algo::Maj),
            "recmaj" => Ok(Algo::RecMaj),
            "map" => Ok(Algo::Map),
            _ => Err(param(format!("unknown algo `{s}`"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let asym: f64 = spec.scalar("asym", "0")?;
    let sign = parse_sign(&spec.scalar::<String>("sign", "+")?)?;
    let advs = spec
        .strings("adversary", &["none"])
        .iter()
        .map(|s| match s.as_str() {
            "none" => Ok(TreeAdversary::None),
            "cutting" => Ok(TreeAdversary::Cutting),
            "opposite-path" => Ok(TreeAdversary::OppositePath),
            "asymmetric" => Ok(TreeAdversary::Asymmetric { asym, sign }),
            _ => Err(param(format!("unknown tree adversary `{s}`"))),
        })
        .collect::<Result<Vec<_>>>()?;

    let mut points = Vec::new();
    for ix in grid(&[ks.len(), epss.len(), depths.len(), laws.len(), algos.len(), advs.len()]) {
        let p = TreePoint { k: ks[ix[0]], eps: epss[ix[1]], depth: depths[ix[2]], law: laws[ix[3]], algo: algos[ix[4]], adversary: advs[ix[5]] };
        p.birth()?;
        p.check_size()?;
        points.push(p);
    }

    let mut summary =
        Table::new(&["k", "eps", "depth", "tree", "algo", "adversary", "trials", "success_rate", "stderr"]);
    let mut trials = Table::new(&TRIAL_HEADER);
    for p in &points {
        let results = collect(run_trials(spec.trials, spec.seed, |s| tree_trial(p, s))?)?;
        let label = p.label();
        for &(s, v) in &results {
            push_trial(&mut trials, spec.kind, &label, s, "success", v);
        }
        let rate = results.iter().map(|r| r.1).sum::<f64>() / spec.trials as f64;
        summary.push(vec![
            p.k.into(),
            p.eps.into(),
            p.depth.into(),
            law_name(p.law).into(),
            algo_name(p.algo).into(),
            adversary_name(p.adversary).into(),
            spec.trials.into(),
            rate.into(),
            binomial_stderr(rate, spec.trials).into(),
        ]);
    }
    Ok(ExperimentOutput { summary, trials: Some(trials) })
}

/// Iterates of p ↦ M_k(p(1-ε)) from p = 1 in the (q, M_k(q)) plane, the
/// curve M_k on a grid, and the line q/(1-ε). Deterministic.
pub fn run_cobweb(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let ks: Vec<u64> = spec.values("k", &["3"])?;
    let epss: Vec<f64> = spec.values("eps", &["0.1"])?;
    let steps: usize = spec.scalar("iterations", "40")?;
    let points: usize = spec.scalar("curve-points", "101")?;
    if points < 2 {
        return Err(param("curve-points must be at least 2"));
    }
    let mut summary = Table::new(&["k", "eps", "series", "step", "q", "m_q", "line", "fixed_point"]);
    for &k in &ks {
        if k == 0 {
            return Err(param("k must be at least 1"));
        }
        for &eps in &epss {
            if !(0.0..=0.5).contains(&eps) {
                return Err(param(format!("eps must lie in [0, 1/2], got {eps}")));
            }
            let fixed = greatest_intersection(k, eps, 0.5).unwrap_or(f64::NAN);
            for (t, p) in recursion_iterates(k, eps, steps).into_iter().enumerate() {
                let q = p * (1.0 - eps);
                summary.push(vec![
                    k.into(),
                    eps.into(),
                    "iterate".into(),
                    t.into(),
                    q.into(),
                    majority_fn(k, q).into(),
                    (q / (1.0 - eps)).into(),
                    fixed.into(),
                ]);
            }
            for i in 0..points {
                let q = i as f64 / (points - 1) as f64;
                summary.push(vec![
                    k.into(),
                    eps.into(),
                    "curve".into(),
                    i.into(),
                    q.into(),
                    majority_fn(k, q).into(),
                    (q / (1.0 - eps)).into(),
                    fixed.into(),
                ]);
            }
        }
    }
    Ok(ExperimentOutput { summary, trials: None })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum GraphAdversary {
    None,
    Graph,
    Sdp,
    Both,
}

fn graph_adversary(s: &str) -> Result<GraphAdversary> {
    match s {
        "none" => Ok(GraphAdversary::None),
        "graph" => Ok(GraphAdversary::Graph),
        "sdp" => Ok(GraphAdversary::Sdp),
        "both" => Ok(GraphAdversary::Both),
        _ => Err(param(format!("unknown graph adversary `{s}`"))),
    }
}

fn graph_adversary_name(a: GraphAdversary) -> &'static str {
    match a {
        GraphAdversary::None => "none",
        GraphAdversary::Graph => "graph",
        GraphAdversary::Sdp => "sdp",
        GraphAdversary::Both => "both",
    }
}

/// Precursor, then the graph adversary and/or a monotone change.
fn observed_graph(params: &ModelParams, adv: GraphAdversary, budget: &ChangeBudget, seed: u64) -> Result<Graph> {
    let mut g = sample_precursor(params, rng::derive_seed(seed, "graph/precursor", 0));
    if matches!(adv, GraphAdversary::Graph | GraphAdversary::Both) {
        g = apply_adversary(&assign_markings(&g)?, params, rng::derive_seed(seed, "graph/adversary", 0))?.graph;
    }
    if matches!(adv, GraphAdversary::Sdp | GraphAdversary::Both) {
        let truth = g.spins().clone();
        let s = sample_monotone_change(&g, &truth, budget, params.mode, rng::derive_seed(seed, "graph/change", 0))?;
        g = apply_change(&g, &s)?;
    }
    Ok(g)
}

pub(crate) fn sdp_estimate(g: &Graph, rule: LambdaRule, mode: Mode) -> Result<(SpinAssignment, crate::sdp::SdpSolution)> {
    let inst = build_objective(g, rule, mode)?;
    let sol = solve_sdp(&inst, &SolverOptions::default())?;
    Ok((round_solution(&sol)?.spins, sol))
}

struct GraphPoint {
    params: ModelParams,
    adversary: GraphAdversary,
    budget: String,
    lambda: String,
}

fn graph_points(spec: &ExperimentSpec, with_budget: bool) -> Result<Vec<GraphPoint>> {
    let ns: Vec<usize> = spec.values("n", &["200"])?;
    let a_s: Vec<f64> = spec.values("a", &["20"])?;
    let b_s: Vec<f64> = spec.values("b", &["2"])?;
    let modes = spec.strings("mode", &["assortative"]).iter().map(|m| parse_mode(m)).collect::<Result<Vec<_>>>()?;
    let advs = if with_budget {
        spec.strings("adversary", &["none"]).iter().map(|s| graph_adversary(s)).collect::<Result<Vec<_>>>()?
    } else {
        vec![GraphAdversary::Sdp]
    };
    let budgets = spec.strings("budget", &["delete-all"]);
    let lambdas = spec.strings("lambda", &["model"]);
    let mut out = Vec::new();
    for ix in grid(&[ns.len(), a_s.len(), b_s.len(), modes.len(), advs.len(), budgets.len(), lambdas.len()]) {
        let params = ModelParams::new(ns[ix[0]], a_s[ix[1]], b_s[ix[2]], modes[ix[3]])?;
        parse_budget(&budgets[ix[5]])?;
        parse_lambda(&lambdas[ix[6]], params.a, params.b)?;
        out.push(GraphPoint { params, adversary: advs[ix[4]], budget: budgets[ix[5]].clone(), lambda: lambdas[ix[6]].clone() });
    }
    Ok(out)
}

fn graph_label(p: &GraphPoint) -> String {
    format!(
        "n={};a={};b={};mode={};adversary={};budget={};lambda={}",
        p.params.n,
        super::fmt_num(p.params.a),
        super::fmt_num(p.params.b),
        mode_name(p.params.mode),
        graph_adversary_name(p.adversary),
        p.budget,
        p.lambda
    )
}

/// SDP recovery on random or semirandom graphs. A trial whose solver does
/// not converge is recorded with NaN score and the run continues.
pub fn run_graph_recovery(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let points = graph_points(spec, true)?;
    let mut summary = Table::new(&[
        "n", "a", "b", "mode", "adversary", "budget", "lambda", "trials", "mean_score", "stderr", "mean_rel_spin", "failures",
    ]);
    let mut trials = Table::new(&TRIAL_HEADER);
    for p in &points {
        let budget = parse_budget(&p.budget)?;
        let rule = parse_lambda(&p.lambda, p.params.a, p.params.b)?;
        let results = run_trials(spec.trials, spec.seed, |s| -> Result<Option<f64>> {
            let g = observed_graph(&p.params, p.adversary, &budget, s)?;
            match sdp_estimate(&g, rule, p.params.mode) {
                Ok((est, _)) => Ok(Some(partial_recovery_score(&est, g.spins())?)),
                Err(Error::NotConverged(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })?;
        let results = collect(results)?;
        let label = graph_label(p);
        let mut scores = Vec::new();
        for &(s, v) in &results {
            let score = v.unwrap_or(f64::NAN);
            push_trial(&mut trials, spec.kind, &label, s, "converged", if v.is_some() { 1.0 } else { 0.0 });
            push_trial(&mut trials, spec.kind, &label, s, "score", score);
            scores.push(score);
        }
        let (mean, se, ok) = mean_stderr(&scores);
        let rel: Vec<f64> = scores.iter().map(|&e| e * e + (1.0 - e) * (1.0 - e)).collect();
        summary.push(vec![
            p.params.n.into(),
            p.params.a.into(),
            p.params.b.into(),
            mode_name(p.params.mode).into(),
            graph_adversary_name(p.adversary).into(),
            p.budget.clone().into(),
            p.lambda.clone().into(),
            spec.trials.into(),
            mean.into(),
            se.into(),
            mean_stderr(&rel).0.into(),
            (spec.trials - ok).into(),
        ]);
    }
    Ok(ExperimentOutput { summary, trials: Some(trials) })
}

struct RobustnessTrial {
    score: f64,
    err_pre: f64,
    err_post: f64,
    envelope: f64,
    identity_gap: f64,
    nnz: usize,
}

/// Solve, apply a monotone change, solve again, and compare the change in
/// ‖σσᵀ - Ẑ‖²_F with the transfer envelope.
pub fn run_sdp_robustness(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let points = graph_points(spec, false)?;
    let eta: f64 = spec.scalar("eta", "0.75")?;
    let starts: usize = spec.scalar("cut-starts", "8")?;
    let mut summary = Table::new(&[
        "n", "a", "b", "mode", "budget", "lambda", "trials", "eligible", "mean_err_pre", "mean_err_post", "mean_envelope",
        "envelope_holds", "max_identity_gap", "mean_nnz",
    ]);
    let mut trials = Table::new(&TRIAL_HEADER);
    for p in &points {
        let budget = parse_budget(&p.budget)?;
        let rule = parse_lambda(&p.lambda, p.params.a, p.params.b)?;
        let results = run_trials(spec.trials, spec.seed, |s| -> Result<RobustnessTrial> {
            let g = sample_precursor(&p.params, rng::derive_seed(s, "graph/precursor", 0));
            let sigma = g.spins().to_f64();
            let (est, sol) = sdp_estimate(&g, rule, p.params.mode)?;
            let score = partial_recovery_score(&est, g.spins())?;
            let alpha = cut_norm(&centred_adjacency(&g, &p.params), CutNormMode::Heuristic { starts, seed: s })?;
            let change = sample_monotone_change(&g, g.spins(), &budget, p.params.mode, rng::derive_seed(s, "graph/change", 0))?;
            let x = nalgebra::DVector::from_vec(sigma.clone());
            let identity_gap = (change.objective_delta().dot(&(&x * x.transpose())) - change.nnz() as f64).abs();
            let h = apply_change(&g, &change)?;
            let (_, sol2) = sdp_estimate(&h, rule, p.params.mode)?;
            Ok(RobustnessTrial {
                score,
                err_pre: distance_to_truth(&sol.z, &sigma),
                err_post: distance_to_truth(&sol2.z, &sigma),
                envelope: transfer_envelope(alpha, p.params.n, p.params.a, p.params.b),
                identity_gap,
                nnz: change.nnz(),
            })
        })?;
        let results = collect(results)?;
        let label = graph_label(p);
        let mut eligible = 0usize;
        let mut holds = true;
        let (mut pre, mut post, mut env, mut nnz) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut gap = 0.0f64;
        for (s, r) in &results {
            for (m, v) in [
                ("score", r.score),
                ("err_pre", r.err_pre),
                ("err_post", r.err_post),
                ("envelope", r.envelope),
                ("identity_gap", r.identity_gap),
                ("nnz", r.nnz as f64),
            ] {
                push_trial(&mut trials, spec.kind, &label, *s, m, v);
            }
            gap = gap.max(r.identity_gap);
            if r.score >= eta {
                eligible += 1;
                holds &= r.err_post <= r.envelope;
                pre.push(r.err_pre);
                post.push(r.err_post);
                env.push(r.envelope);
                nnz.push(r.nnz as f64);
            }
        }
        summary.push(vec![
            p.params.n.into(),
            p.params.a.into(),
            p.params.b.into(),
            mode_name(p.params.mode).into(),
            p.budget.clone().into(),
            p.lambda.clone().into(),
            spec.trials.into(),
            eligible.into(),
            mean_stderr(&pre).0.into(),
            mean_stderr(&post).0.into(),
            mean_stderr(&env).0.into(),
            holds.into(),
            gap.into(),
            mean_stderr(&nnz).0.into(),
        ]);
    }
    Ok(ExperimentOutput { summary, trials: Some(trials) })
}

/// Monte-Carlo k′⁶ on the one-period tree against the closed-form loss.
/// `eps = below-ks` means just below the KS threshold for that k. The
/// trial count is the number of sampled level-2 subtrees.
pub fn run_appendix_a_check(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let ks: Vec<f64> = spec.values("k", &["9"])?;
    let eps_raw = spec.strings("eps", &["below-ks"]);
    let mut summary = Table::new(&[
        "k", "eps", "samples", "k6", "k_prime6", "stderr", "loss", "loss_exact", "k_bound", "loss_within_4se", "bound_holds",
        "window_lo", "window_hi", "window_nonempty",
    ]);
    for &k in &ks {
        let window = semirandom_window(k)?;
        for e in &eps_raw {
            let eps = match e.as_str() {
                "below-ks" => ks_threshold(k)? - 1e-6,
                x => x.parse::<f64>().map_err(|_| param(format!("bad eps `{x}`")))?,
            };
            let bound = appendix_a_bound(k, eps)?;
            let est = estimate_k_prime6(k, eps, spec.trials, rng::derive_seed(spec.seed, "appendix-a", 0))?;
            let loss = est.k6 - est.estimate;
            summary.push(vec![
                k.into(),
                eps.into(),
                est.samples.into(),
                est.k6.into(),
                est.estimate.into(),
                est.stderr.into(),
                loss.into(),
                bound.general.into(),
                bound.k_k.into(),
                ((loss - bound.general).abs() <= 4.0 * est.stderr + 1e-9 * est.k6).into(),
                (loss >= bound.k_k - 3.0 * est.stderr).into(),
                window.eps_lo.into(),
                window.eps_hi.into(),
                window.nonempty.into(),
            ]);
        }
    }
    Ok(ExperimentOutput { summary, trials: None })
}

/// Fraction of random pairs (u, v) whose relative spin σ_uσ_v the
/// estimate gets right, against η² + (1-η)² from the partial-recovery
/// score of the same estimate.
pub fn run_relative_spin(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let points = graph_points(spec, true)?;
    let estimators = spec.strings("estimator", &["sdp"]);
    for e in &estimators {
        if !matches!(e.as_str(), "sdp" | "truth" | "random") {
            return Err(param(format!("unknown estimator `{e}`")));
        }
    }
    let pairs: usize = spec.scalar("pairs", "2000")?;
    let mut summary = Table::new(&[
        "n", "a", "b", "mode", "adversary", "estimator", "pairs", "trials", "pair_accuracy", "stderr", "from_score", "failures",
    ]);
    let mut trials = Table::new(&TRIAL_HEADER);
    for p in &points {
        if p.params.n < 2 {
            return Err(param("relative spins need n >= 2"));
        }
        let budget = parse_budget(&p.budget)?;
        let rule = parse_lambda(&p.lambda, p.params.a, p.params.b)?;
        for est_name in &estimators {
            let results = run_trials(spec.trials, spec.seed, |s| -> Result<Option<(f64, f64)>> {
                let g = observed_graph(&p.params, p.adversary, &budget, s)?;
                let truth = g.spins();
                let est = match est_name.as_str() {
                    "truth" => truth.clone(),
                    "random" => {
                        let mut r = rng::stream(s, "relative/random");
                        SpinAssignment::new((0..g.node_count()).map(|_| Spin::from_bool(r.random_bool(0.5))).collect())
                    }
                    _ => match sdp_estimate(&g, rule, p.params.mode) {
                        Ok((e, _)) => e,
                        Err(Error::NotConverged(_)) => return Ok(None),
                        Err(e) => return Err(e),
                    },
                };
                let eta = partial_recovery_score(&est, truth)?;
                let mut r = rng::stream(s, "relative/pairs");
                let n = g.node_count();
                let mut right = 0usize;
                for _ in 0..pairs {
                    let u = r.random_range(0..n);
                    let mut v = r.random_range(0..n - 1);
                    if v >= u {
                        v += 1;
                    }
                    right += usize::from(est.get(u) * est.get(v) == truth.get(u) * truth.get(v));
                }
                Ok(Some((right as f64 / pairs as f64, eta * eta + (1.0 - eta) * (1.0 - eta))))
            })?;
            let results = collect(results)?;
            let label = format!("{};estimator={est_name}", graph_label(p));
            let (mut acc, mut derived) = (Vec::new(), Vec::new());
            for &(s, v) in &results {
                let (x, y) = v.unwrap_or((f64::NAN, f64::NAN));
                push_trial(&mut trials, spec.kind, &label, s, "pair_accuracy", x);
                push_trial(&mut trials, spec.kind, &label, s, "from_score", y);
                acc.push(x);
                derived.push(y);
            }
            let (m, se, ok) = mean_stderr(&acc);
            summary.push(vec![
                p.params.n.into(),
                p.params.a.into(),
                p.params.b.into(),
                mode_name(p.params.mode).into(),
                graph_adversary_name(p.adversary).into(),
                est_name.clone().into(),
                pairs.into(),
                spec.trials.into(),
                m.into(),
                se.into(),
                mean_stderr(&derived).0.into(),
                (spec.trials - ok).into(),
            ]);
        }
    }
    Ok(ExperimentOutput { summary, trials: Some(trials) })
}
