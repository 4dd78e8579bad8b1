//! Text files for graphs.
//!
//! A graph with prefix `P` lives in up to four files:
//! - `P.edges`: first line `n m`, then `m` lines `u v` with `u < v`
//! - `P.spins`: one `+1` or `-1` per node
//! - `P.marks`: one `G`, `M` or `N` per node (optional)
//! - `P.params`: `n a b mode` from the generator (optional)

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sbm::{Graph, Marking, Mode, ModelParams, Spin, SpinAssignment};

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn perr(file: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: format!("{}: {}", file.display(), msg.into()) }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty())
}

pub fn mode_token(m: Mode) -> &'static str {
    match m {
        Mode::Assortative => "assort",
        Mode::Dissortative => "dissort",
    }
}

pub fn parse_mode_token(s: &str) -> Option<Mode> {
    match s {
        "assort" | "assortative" => Some(Mode::Assortative),
        "dissort" | "dissortative" => Some(Mode::Dissortative),
        _ => None,
    }
}

pub fn write_graph(prefix: &Path, g: &Graph) -> Result<()> {
    let mut edges = format!("{} {}\n", g.node_count(), g.edge_count());
    for (u, v) in g.edges() {
        edges.push_str(&format!("{u} {v}\n"));
    }
    fs::write(with_ext(prefix, "edges"), edges)?;
    let spins: String = g.spins().iter().map(|s| format!("{s}\n")).collect();
    fs::write(with_ext(prefix, "spins"), spins)?;
    if g.markings().iter().any(|&m| m != Marking::None) {
        let marks: String = g
            .markings()
            .iter()
            .map(|m| match m {
                Marking::Good => "G\n",
                Marking::Marked => "M\n",
                Marking::None => "N\n",
            })
            .collect();
        fs::write(with_ext(prefix, "marks"), marks)?;
    }
    Ok(())
}

pub fn write_params(prefix: &Path, p: &ModelParams) -> Result<()> {
    fs::write(with_ext(prefix, "params"), format!("{} {} {} {}\n", p.n, p.a, p.b, mode_token(p.mode)))?;
    Ok(())
}

/// Reads `P.params` if it exists.
pub fn read_params(prefix: &Path) -> Result<Option<ModelParams>> {
    let path = with_ext(prefix, "params");
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path)?;
    let f: Vec<&str> = text.split_whitespace().collect();
    if f.len() != 4 {
        return Err(perr(&path, 1, "expected `n a b mode`"));
    }
    let n = f[0].parse().map_err(|_| perr(&path, 1, "bad n"))?;
    let a = f[1].parse().map_err(|_| perr(&path, 1, "bad a"))?;
    let b = f[2].parse().map_err(|_| perr(&path, 1, "bad b"))?;
    let mode = parse_mode_token(f[3]).ok_or_else(|| perr(&path, 1, "bad mode"))?;
    Ok(Some(ModelParams::new(n, a, b, mode)?))
}

/// Reads `P.edges` and `P.spins`, plus `P.marks` when present.
pub fn read_graph(prefix: &Path) -> Result<Graph> {
    let path = with_ext(prefix, "edges");
    let text = fs::read_to_string(&path)?;
    let mut lines = data_lines(&text);
    let (hl, header) = lines.next().ok_or_else(|| perr(&path, 1, "missing `n m` header"))?;
    let h: Vec<usize> = header.split_whitespace().map(str::parse).collect::<std::result::Result<_, _>>().map_err(|_| perr(&path, hl, "bad header"))?;
    let [n, m] = h[..] else { return Err(perr(&path, hl, "header must be `n m`")) };
    let mut edges = Vec::with_capacity(m);
    for (line, l) in lines {
        let e: Vec<usize> = l.split_whitespace().map(str::parse).collect::<std::result::Result<_, _>>().map_err(|_| perr(&path, line, "bad edge"))?;
        let [u, v] = e[..] else { return Err(perr(&path, line, "edge must be `u v`")) };
        if u >= v {
            return Err(perr(&path, line, "edges must satisfy u < v"));
        }
        edges.push((u, v));
    }
    if edges.len() != m {
        return Err(perr(&path, hl, format!("header says {m} edges, found {}", edges.len())));
    }

    let spath = with_ext(prefix, "spins");
    let stext = fs::read_to_string(&spath)?;
    let spins = data_lines(&stext)
        .map(|(line, l)| match l {
            "+1" | "1" | "+" => Ok(Spin::Plus),
            "-1" | "\u{2212}1" | "-" => Ok(Spin::Minus),
            _ => Err(perr(&spath, line, format!("bad spin `{l}`"))),
        })
        .collect::<Result<Vec<_>>>()?;
    if spins.len() != n {
        return Err(perr(&spath, 0, format!("expected {n} spins, found {}", spins.len())));
    }
    let g = Graph::from_edges(SpinAssignment::new(spins), &edges)?;

    let mpath = with_ext(prefix, "marks");
    if !mpath.exists() {
        return Ok(g);
    }
    let mtext = fs::read_to_string(&mpath)?;
    let marks = data_lines(&mtext)
        .map(|(line, l)| match l {
            "G" => Ok(Marking::Good),
            "M" => Ok(Marking::Marked),
            "N" => Ok(Marking::None),
            _ => Err(perr(&mpath, line, format!("bad marking `{l}`"))),
        })
        .collect::<Result<Vec<_>>>()?;
    g.with_markings(marks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_adversary::assign_markings;
    use crate::sbm::sample_precursor;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = ModelParams::new(50, 6.0, 2.0, Mode::Assortative).unwrap();
        let g = assign_markings(&sample_precursor(&p, 3)).unwrap();
        let prefix = dir.path().join("g");
        write_graph(&prefix, &g).unwrap();
        write_params(&prefix, &p).unwrap();
        let h = read_graph(&prefix).unwrap();
        assert_eq!(h.spins(), g.spins());
        assert_eq!(h.markings(), g.markings());
        assert!(h.edges().eq(g.edges()));
        assert_eq!(read_params(&prefix).unwrap(), Some(p));
    }

    #[test]
    fn rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("bad");
        fs::write(with_ext(&prefix, "spins"), "+1\n-1\n").unwrap();
        for edges in ["2 1\n1 0\n", "2 1\n0 0\n", "2 2\n0 1\n", "2 1\n0 5\n", "x\n"] {
            fs::write(with_ext(&prefix, "edges"), edges).unwrap();
            assert!(read_graph(&prefix).is_err(), "{edges:?}");
        }
        fs::write(with_ext(&prefix, "edges"), "2 1\n0 1\n").unwrap();
        assert!(read_graph(&prefix).is_ok());
        fs::write(with_ext(&prefix, "spins"), "+1\n").unwrap();
        assert!(read_graph(&prefix).is_err());
    }
}
