use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use semirandom::graph_adversary::{apply_adversary, assign_markings, compute_markings, delta_of_eps};
use semirandom::graph_io::{read_graph, read_params, write_graph, write_params};
use semirandom::harness::{
    parse_budget, parse_lambda, run_experiment, run_tree_sweep, trial_seed, Cell, ExperimentKind, ExperimentSpec, Table,
};
use semirandom::sbm::{partial_recovery_score, sample_precursor};
use semirandom::sdp::rounding::round_solution;
use semirandom::sdp::{
    apply_change, build_objective, dual_certificate, sample_monotone_change, solve_sdp, Method,
    SolverOptions,
};
use semirandom::thresholds::{ks_possible, threshold_report, MajorityModel};
use semirandom::tree_model::{
    cutting_adversary_majority_breaker, eps_prime, sample_dist2, sample_dist4, sample_plain,
    strong_adversary_asymmetric, strong_adversary_opposite_path,
};
use semirandom::{Birth, Graph, Marking, Mode, ModelParams, Spin, Tree};

/// Explicit trees larger than this (in expected nodes) are refused.
const MAX_TREE_NODES: f64 = 4e6;

#[derive(Parser)]
#[command(name = "semirandom", version, about = "Semirandom block model and broadcast tree experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Assort,
    Dissort,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Assort => Mode::Assortative,
            ModeArg::Dissort => Mode::Dissortative,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Dist {
    D2,
    /// Same law as d2.
    D3,
    D4,
    Plain,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum TreeAdv {
    None,
    Cutting,
    OppPath,
    Asym,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Maj,
    Recmaj,
    Map,
}

#[derive(Clone, Copy, ValueEnum)]
enum BirthArg {
    Poisson,
    Regular,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Regular,
    Poisson,
}

#[derive(clap::Args)]
struct TreeArgs {
    #[arg(long, default_value_t = 3.0)]
    k: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 8)]
    depth: usize,
    #[arg(long, value_enum, default_value = "plain")]
    dist: Dist,
    /// Offspring law for plain trees.
    #[arg(long, value_enum, default_value = "poisson")]
    birth: BirthArg,
    #[arg(long, value_enum, default_value = "none")]
    adversary: TreeAdv,
    /// Extra flip probability for the asymmetric adversary.
    #[arg(long, default_value_t = 0.1)]
    asym: f64,
    /// Spin the asymmetric adversary pushes towards.
    #[arg(long, default_value = "+", allow_hyphen_values = true)]
    sign: String,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a labelled graph and write PREFIX.{edges,spins,marks,params}.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "assort")]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the cutting adversary on a stored graph and print "m w delta".
    Adversary {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to the mode in PREFIX.params.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample broadcast trees and record per-trial leaf censuses.
    TreeSim(TreeArgs),
    /// Monte-Carlo success rate of a root estimator.
    TreeRecover {
        #[arg(long, value_enum, default_value = "maj")]
        algo: Algo,
        #[command(flatten)]
        tree: TreeArgs,
    },
    /// Solve the SDP on a stored graph, optionally after a monotone change.
    Sdp {
        #[arg(long = "in")]
        input: PathBuf,
        /// model, fixed or a number.
        #[arg(long, default_value = "model")]
        lambda: String,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 5000)]
        max_iter: usize,
        /// none, delete-all, independent:ADD:DELETE or subset:M.
        #[arg(long, default_value = "none")]
        change_budget: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Threshold calculators for one degree.
    Thresholds {
        #[arg(long)]
        k: f64,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, value_enum, default_value = "regular")]
        model: ModelArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment spec file and write its CSVs.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        /// Defaults to the spec's `output`, then the current directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(table: &Table, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => table.write(p).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{}", table.to_csv()?);
            Ok(())
        }
    }
}

fn parse_sign(s: &str) -> Result<Spin> {
    match s {
        "+" | "+1" | "plus" => Ok(Spin::Plus),
        "-" | "-1" | "minus" => Ok(Spin::Minus),
        _ => bail!("sign must be + or -, got `{s}`"),
    }
}

fn check_tree_size(t: &TreeArgs) -> Result<()> {
    let mean = match (t.dist, t.birth) {
        (Dist::Plain, BirthArg::Regular) => t.k.round(),
        _ => t.k,
    };
    // Semirandom trees are sampled three levels deeper before cutting.
    let depth = t.depth + if t.dist == Dist::Plain { 0 } else { 3 };
    let expected = (0..=depth).map(|d| mean.powi(d as i32)).sum::<f64>();
    if expected > MAX_TREE_NODES {
        bail!("expected tree size {expected:.3e} exceeds {MAX_TREE_NODES:.0e} nodes; lower --depth or --k");
    }
    Ok(())
}

fn sample_tree(t: &TreeArgs, seed: u64) -> Result<Tree> {
    let tree = match t.dist {
        Dist::Plain => {
            let birth = match t.birth {
                BirthArg::Poisson => Birth::Poisson(t.k),
                BirthArg::Regular => Birth::Regular(t.k.round() as usize),
            };
            sample_plain(birth, t.eps, t.depth, seed)?
        }
        Dist::D2 | Dist::D3 => sample_dist2(t.k, t.eps, t.depth, seed)?,
        Dist::D4 => sample_dist4(t.k, t.eps, t.depth, seed)?,
    };
    Ok(match t.adversary {
        TreeAdv::None => tree,
        TreeAdv::Cutting => cutting_adversary_majority_breaker(&tree),
        TreeAdv::OppPath => strong_adversary_opposite_path(&tree),
        TreeAdv::Asym => strong_adversary_asymmetric(&tree, t.eps, t.asym, parse_sign(&t.sign)?, seed ^ 0x5eed)?,
    })
}

fn tree_sim(t: &TreeArgs) -> Result<()> {
    check_tree_size(t)?;
    let mut table = Table::new(&["trial", "seed", "root_spin", "nodes", "leaves", "plus_leaves", "minus_leaves"]);
    for i in 0..t.trials {
        let s = trial_seed(t.seed, i);
        let tree = sample_tree(t, s)?;
        let (plus, minus) = tree.leaf_census();
        table.push(vec![
            i.into(),
            s.into(),
            tree.root_spin().value().into(),
            tree.len().into(),
            tree.leaf_count().into(),
            plus.into(),
            minus.into(),
        ]);
    }
    emit(&table, t.out.as_deref())
}

fn tree_recover(algo: Algo, t: &TreeArgs) -> Result<()> {
    let law = match (t.dist, t.birth) {
        (Dist::Plain, BirthArg::Poisson) => "poisson",
        (Dist::Plain, BirthArg::Regular) => "regular",
        (Dist::D2 | Dist::D3, _) => "dist2",
        (Dist::D4, _) => "dist4",
    };
    let algo = match algo {
        Algo::Maj => "maj",
        Algo::Recmaj => "recmaj",
        Algo::Map => "map",
    };
    let adversary = match t.adversary {
        TreeAdv::None => "none",
        TreeAdv::Cutting => "cutting",
        TreeAdv::OppPath => "opposite-path",
        TreeAdv::Asym => "asymmetric",
    };
    parse_sign(&t.sign)?;
    let spec = ExperimentSpec::new(ExperimentKind::TreeThresholdSweep, t.trials, t.seed)?
        .set("k", &[t.k])?
        .set("eps", &[t.eps])?
        .set("depth", &[t.depth])?
        .set("tree", &[law])?
        .set("algo", &[algo])?
        .set("adversary", &[adversary])?
        .set("asym", &[t.asym])?
        .set("sign", &[t.sign.as_str()])?;
    emit(&run_tree_sweep(&spec)?.summary, t.out.as_deref())
}

/// Stored markings are kept if they agree with the marking rule.
fn marked(g: Graph) -> Result<Graph> {
    if g.markings().iter().all(|&m| m == Marking::None) {
        return Ok(assign_markings(&g)?);
    }
    if compute_markings(&g) != g.markings() {
        bail!("stored markings disagree with the marking rule");
    }
    Ok(g)
}

fn model_params(prefix: &Path, n: usize, mode: Option<Mode>) -> Result<ModelParams> {
    let stored = read_params(prefix)?
        .with_context(|| format!("{}.params is missing; the adversary needs a and b", prefix.display()))?;
    if stored.n != n {
        bail!("{}.params says n = {} but the graph has {n} nodes", prefix.display(), stored.n);
    }
    Ok(ModelParams::new(n, stored.a, stored.b, mode.unwrap_or(stored.mode))?)
}

fn sdp(
    input: &Path,
    lambda: &str,
    tol: f64,
    max_iter: usize,
    budget: &str,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let g = read_graph(input)?;
    let params = read_params(input)?;
    let mode = params.map_or(Mode::Assortative, |p| p.mode);
    let rule = match (lambda, params) {
        ("model", None) => bail!("lambda=model needs {}.params", input.display()),
        (_, Some(p)) => parse_lambda(lambda, p.a, p.b)?,
        (_, None) => parse_lambda(lambda, 0.0, 0.0)?,
    };
    let change = sample_monotone_change(&g, g.spins(), &parse_budget(budget)?, mode, seed)?;
    let h = apply_change(&g, &change)?;
    let inst = build_objective(&h, rule, mode)?;
    let sol = solve_sdp(&inst, &SolverOptions { tol, max_iter, ..SolverOptions::default() })?;
    let score = partial_recovery_score(&round_solution(&sol)?.spins, g.spins())?;
    let cert = params.map(|p| dual_certificate(&p, g.spins(), inst.lambda)).transpose()?;
    let method = match sol.method {
        Method::Admm => "admm",
        _ => "mixing",
    };
    let mut table = Table::new(&[
        "n", "edges", "lambda", "change_nnz", "method", "iterations", "primal_residual", "dual_residual", "objective",
        "upper_bound", "score", "certificate_min_gamma", "certificate_residual", "certificate_lambda_min",
        "certificate_passes",
    ]);
    let opt = |x: Option<f64>| x.map_or(Cell::Text(String::new()), Cell::Float);
    table.push(vec![
        h.node_count().into(),
        h.edge_count().into(),
        inst.lambda.into(),
        change.nnz().into(),
        method.into(),
        sol.residuals.iterations.into(),
        sol.residuals.primal.into(),
        sol.residuals.dual.into(),
        sol.objective.into(),
        sol.upper_bound.into(),
        score.into(),
        opt(cert.as_ref().map(|c| c.min_gamma)),
        opt(cert.as_ref().map(|c| c.residual)),
        opt(cert.as_ref().map(|c| c.lambda_min)),
        cert.as_ref().map_or(Cell::Text(String::new()), |c| c.passes().into()),
    ]);
    emit(&table, out)
}

fn thresholds(k: f64, eps: Option<f64>, model: ModelArg, out: Option<&Path>) -> Result<()> {
    let model = match model {
        ModelArg::Regular => {
            if k.fract() != 0.0 || k < 1.0 {
                bail!("the regular model needs a positive integer k, got {k}");
            }
            MajorityModel::Regular
        }
        ModelArg::Poisson => MajorityModel::Poisson,
    };
    let r = threshold_report(k, model)?;
    let mut header = vec![
        "k", "eps_crit_ks", "eps_star", "q_star", "p_star", "eps_star_asymptotic", "appendix_a_bound",
    ];
    let mut row: Vec<Cell> = vec![
        r.k.into(),
        r.eps_crit_ks.into(),
        r.eps_star.into(),
        r.q_star.into(),
        r.p_star.into(),
        r.eps_star_asymptotic.into(),
        r.appendix_a_bound.map_or(Cell::Text(String::new()), Cell::Float),
    ];
    if let Some(e) = eps {
        header.extend(["eps", "ks_possible", "below_eps_star", "delta", "eps_prime"]);
        row.extend([
            e.into(),
            ks_possible(k, e).into(),
            (e <= r.eps_star).into(),
            delta_of_eps(e)?.into(),
            eps_prime(e)?.into(),
        ]);
    }
    let mut table = Table::new(&header);
    table.push(row);
    emit(&table, out)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen { n, a, b, seed, mode, out } => {
            let params = ModelParams::new(n, a, b, mode.into())?;
            let g = assign_markings(&sample_precursor(&params, seed))?;
            write_graph(&out, &g)?;
            write_params(&out, &params)?;
            println!("{} {}", g.node_count(), g.edge_count());
        }
        Command::Adversary { input, seed, mode, out } => {
            let g = read_graph(&input)?;
            let params = model_params(&input, g.node_count(), mode.map(Mode::from))?;
            let outcome = apply_adversary(&marked(g)?, &params, seed)?;
            write_graph(&out, &outcome.graph)?;
            write_params(&out, &params)?;
            println!("{} {} {}", outcome.m, outcome.w, semirandom::harness::fmt_num(outcome.delta));
        }
        Command::TreeSim(t) => tree_sim(&t)?,
        Command::TreeRecover { algo, tree } => tree_recover(algo, &tree)?,
        Command::Sdp { input, lambda, tol, max_iter, change_budget, seed, out } => {
            sdp(&input, &lambda, tol, max_iter, &change_budget, seed, out.as_deref())?
        }
        Command::Thresholds { k, eps, model, out } => thresholds(k, eps, model, out.as_deref())?,
        Command::Experiment { spec, out } => {
            let text = std::fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let spec = ExperimentSpec::parse(&text)?;
            let dir = out.or_else(|| spec.output.clone()).unwrap_or_else(|| PathBuf::from("."));
            for p in run_experiment(&spec)?.write(&dir, spec.kind)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}
