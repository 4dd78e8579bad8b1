//! Seeded, reproducible experiment runs that write CSV.
//!
//! An experiment is described by a plain-text spec, one `key = value` per
//! line. Blank lines and lines starting with `#` are ignored. Grid values
//! are comma-separated lists; numeric grids also accept `start:step:stop`
//! (inclusive). Every spec needs `kind`, `trials` and `seed`.
//!
//! ```text
//! kind = tree-threshold-sweep
//! trials = 1000
//! seed = 7
//! k = 5
//! eps = 0.05
//! depth = 10
//! algo = maj, recmaj
//! adversary = none, cutting
//! ```

mod experiments;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{param, Error, Result};

pub use experiments::{
    parse_budget, parse_lambda, run_appendix_a_check, run_cobweb, run_experiment, run_graph_recovery,
    run_relative_spin, run_sdp_robustness, run_tree_sweep,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExperimentKind {
    TreeThresholdSweep,
    GraphRecovery,
    SdpRobustness,
    Cobweb,
    AppendixACheck,
    RelativeSpin,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::TreeThresholdSweep => "tree-threshold-sweep",
            ExperimentKind::GraphRecovery => "graph-recovery",
            ExperimentKind::SdpRobustness => "sdp-robustness",
            ExperimentKind::Cobweb => "cobweb",
            ExperimentKind::AppendixACheck => "appendix-a-check",
            ExperimentKind::RelativeSpin => "relative-spin",
        }
    }

    const ALL: [ExperimentKind; 6] = [
        ExperimentKind::TreeThresholdSweep,
        ExperimentKind::GraphRecovery,
        ExperimentKind::SdpRobustness,
        ExperimentKind::Cobweb,
        ExperimentKind::AppendixACheck,
        ExperimentKind::RelativeSpin,
    ];

    /// Grid keys the kind understands, besides kind/trials/seed/output.
    fn keys(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::TreeThresholdSweep => &["k", "eps", "depth", "tree", "algo", "adversary", "asym", "sign"],
            ExperimentKind::Cobweb => &["k", "eps", "iterations", "curve-points"],
            ExperimentKind::GraphRecovery => &["n", "a", "b", "mode", "adversary", "budget", "lambda"],
            ExperimentKind::SdpRobustness => &["n", "a", "b", "mode", "budget", "lambda", "eta", "cut-starts"],
            ExperimentKind::AppendixACheck => &["k", "eps"],
            ExperimentKind::RelativeSpin => &["n", "a", "b", "mode", "adversary", "estimator", "pairs"],
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| param(format!("unknown experiment kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub trials: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    grids: BTreeMap<String, Vec<String>>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn expand_range(v: &str) -> Option<Vec<String>> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    if parts.len() != 3 {
        return None;
    }
    let (a, s, b) = (parts[0].parse::<f64>().ok()?, parts[1].parse::<f64>().ok()?, parts[2].parse::<f64>().ok()?);
    if !(s > 0.0) || b < a {
        return None;
    }
    let count = ((b - a) / s + 1e-9).floor() as usize;
    Some((0..=count).map(|i| fmt_num(a + s * i as f64)).collect())
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, trials: usize, seed: u64) -> Result<Self> {
        if trials == 0 {
            return Err(param("trials must be at least 1"));
        }
        Ok(ExperimentSpec { kind, trials, seed, output: None, grids: BTreeMap::new() })
    }

    /// Sets a grid from display values; fails on keys the kind ignores.
    pub fn set<T: ToString>(mut self, key: &str, values: &[T]) -> Result<Self> {
        if !self.kind.keys().contains(&key) {
            return Err(param(format!("`{key}` is not a parameter of {}", self.kind.name())));
        }
        if values.is_empty() {
            return Err(param(format!("grid `{key}` is empty")));
        }
        self.grids.insert(key.to_string(), values.iter().map(ToString::to_string).collect());
        Ok(self)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut fields: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let (k, v) = s.split_once('=').ok_or_else(|| parse_err(line, "expected `key = value`"))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if k.is_empty() || v.is_empty() {
                return Err(parse_err(line, "empty key or value"));
            }
            if fields.insert(k.clone(), (line, v)).is_some() {
                return Err(parse_err(line, format!("duplicate key `{k}`")));
            }
        }
        let take = |fields: &mut BTreeMap<String, (usize, String)>, key: &str| {
            fields.remove(key).ok_or_else(|| parse_err(0, format!("missing required key `{key}`")))
        };
        let (kl, kind) = take(&mut fields, "kind")?;
        let kind = kind.parse::<ExperimentKind>().map_err(|e| parse_err(kl, e.to_string()))?;
        let (tl, trials) = take(&mut fields, "trials")?;
        let trials = trials.parse::<usize>().ok().filter(|&t| t >= 1).ok_or_else(|| parse_err(tl, "trials must be an integer >= 1"))?;
        let (sl, seed) = take(&mut fields, "seed")?;
        let seed = seed.parse::<u64>().map_err(|_| parse_err(sl, "seed must be an unsigned integer"))?;
        let output = fields.remove("output").map(|(_, v)| PathBuf::from(v));
        let mut grids = BTreeMap::new();
        for (k, (line, v)) in fields {
            if !kind.keys().contains(&k.as_str()) {
                return Err(parse_err(line, format!("`{k}` is not a parameter of {}", kind.name())));
            }
            let mut values = Vec::new();
            for item in v.split(',').map(str::trim) {
                if item.is_empty() {
                    return Err(parse_err(line, "empty grid entry"));
                }
                match expand_range(item) {
                    Some(r) => values.extend(r),
                    None if item.contains(':') && item.split(':').all(|p| p.trim().parse::<f64>().is_ok()) => {
                        return Err(parse_err(line, format!("bad range `{item}`")))
                    }
                    None => values.push(item.to_string()),
                }
            }
            grids.insert(k, values);
        }
        Ok(ExperimentSpec { kind, trials, seed, output, grids })
    }

    /// Canonical text form; parsing it gives back the same spec.
    pub fn to_text(&self) -> String {
        let mut s = format!("kind = {}\ntrials = {}\nseed = {}\n", self.kind.name(), self.trials, self.seed);
        if let Some(o) = &self.output {
            let _ = writeln!(s, "output = {}", o.display());
        }
        for (k, v) in &self.grids {
            let _ = writeln!(s, "{k} = {}", v.join(", "));
        }
        s
    }

    pub fn strings(&self, key: &str, default: &[&str]) -> Vec<String> {
        self.grids.get(key).cloned().unwrap_or_else(|| default.iter().map(|s| s.to_string()).collect())
    }

    pub fn values<T: FromStr>(&self, key: &str, default: &[&str]) -> Result<Vec<T>> {
        self.strings(key, default)
            .iter()
            .map(|s| s.parse::<T>().map_err(|_| param(format!("bad value `{s}` for `{key}`"))))
            .collect()
    }

    /// Single-valued parameter.
    pub fn scalar<T: FromStr>(&self, key: &str, default: &str) -> Result<T> {
        let v = self.values::<T>(key, &[default])?;
        if v.len() != 1 {
            return Err(param(format!("`{key}` takes a single value")));
        }
        Ok(v.into_iter().next().unwrap())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    /// Seeds use the full u64 range.
    UInt(u64),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}
impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}
impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::UInt(x)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}
impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}
impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}
impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// 12 significant digits, plain decimal where reasonable, trailing zeros
/// trimmed.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    let s = if (-5..15).contains(&mag) {
        let decimals = (11 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.11e}")
    };
    trim_zeros(s)
}

fn trim_zeros(s: String) -> String {
    let (mantissa, exp) = match s.find('e') {
        Some(i) => (s[..i].to_string(), s[i..].to_string()),
        None => (s, String::new()),
    };
    let mantissa = if mantissa.contains('.') {
        mantissa.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        mantissa
    };
    let mantissa = if mantissa == "-0" { "0".to_string() } else { mantissa };
    mantissa + &exp
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::UInt(i) => i.to_string(),
            Cell::Float(x) => fmt_num(*x),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::UInt(i) => Some(*i as f64),
            Cell::Float(x) => Some(*x),
            Cell::Bool(b) => Some(f64::from(u8::from(*b))),
            Cell::Text(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

/// A summary table plus, for Monte-Carlo kinds, one row per (trial, metric).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub summary: Table,
    pub trials: Option<Table>,
}

impl ExperimentOutput {
    /// Writes `<kind>.csv` and `<kind>_trials.csv` into `dir`. Trial
    /// records go first so a failure on the summary keeps them.
    pub fn write(&self, dir: &Path, kind: ExperimentKind) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        if let Some(t) = &self.trials {
            let p = dir.join(format!("{}_trials.csv", kind.name()));
            t.write(&p)?;
            written.push(p);
        }
        let p = dir.join(format!("{}.csv", kind.name()));
        self.summary.write(&p)?;
        written.push(p);
        Ok(written)
    }
}

pub const TRIAL_HEADER: [&str; 5] = ["experiment", "point", "seed", "metric", "value"];

/// Per-trial seed from the base seed and the trial index alone, so adding
/// trials never changes earlier ones.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    crate::rng::derive_seed(base, "trial", trial as u64)
}

/// Worker pool sized by SEMIRANDOM_WORKERS, or rayon's default.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("SEMIRANDOM_WORKERS") {
        let n = v.trim().parse::<usize>().map_err(|_| param(format!("SEMIRANDOM_WORKERS=`{v}` is not a count")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| param(e.to_string()))
}

/// Mean and standard error of the mean, skipping NaN.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64, usize) {
    let v: Vec<f64> = xs.iter().copied().filter(|x| !x.is_nan()).collect();
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let m = v.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (m, f64::NAN, 1);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (m, (var / n as f64).sqrt(), n)
}

/// √(p̂(1-p̂)/trials).
pub fn binomial_stderr(p: f64, trials: usize) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.1), "0.1");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(2.0), "2");
        assert_eq!(Cell::from(u64::MAX).render(), "18446744073709551615");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(123456.789), "123456.789");
        assert_eq!(fmt_num(1e-9), "1e-9");
        assert_eq!(fmt_num(f64::NAN), "nan");
        assert_eq!(fmt_num(531441.0), "531441");
    }

    #[test]
    fn spec_round_trip() {
        let text = "# sweep\nkind = tree-threshold-sweep\ntrials = 10\nseed = 3\nk = 3, 5\neps = 0.05:0.05:0.15\nalgo = maj\n";
        let s = ExperimentSpec::parse(text).unwrap();
        assert_eq!(s.kind, ExperimentKind::TreeThresholdSweep);
        assert_eq!(s.values::<f64>("eps", &[]).unwrap(), vec![0.05, 0.1, 0.15]);
        assert_eq!(s.values::<f64>("k", &[]).unwrap(), vec![3.0, 5.0]);
        assert_eq!(ExperimentSpec::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn spec_errors() {
        let bad = [
            ("trials = 1\nseed = 1\n", "kind"),
            ("kind = cobweb\nseed = 1\n", "trials"),
            ("kind = cobweb\ntrials = 1\n", "seed"),
            ("kind = cobweb\ntrials = 0\nseed = 1\n", "trials"),
            ("kind = cobweb\ntrials = 1\nseed = 1\nn = 5\n", "parameter"),
            ("kind = cobweb\ntrials = 1\nseed = 1\nk = 3\nk = 4\n", "duplicate"),
            ("kind = cobweb\ntrials = 1\nseed = 1\nk 3\n", "key = value"),
            ("kind = nope\ntrials = 1\nseed = 1\n", "unknown"),
            ("kind = cobweb\ntrials = 1\nseed = 1\nk = 3:0:5\n", "range"),
        ];
        for (text, needle) in bad {
            let e = ExperimentSpec::parse(text).unwrap_err().to_string();
            assert!(e.contains(needle), "{text:?} gave {e}");
        }
    }

    #[test]
    fn trial_seeds_are_stable() {
        assert_eq!(trial_seed(5, 3), trial_seed(5, 3));
        assert_ne!(trial_seed(5, 3), trial_seed(5, 4));
        assert_ne!(trial_seed(5, 3), trial_seed(6, 3));
    }
}
