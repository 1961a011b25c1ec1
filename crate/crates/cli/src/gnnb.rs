//! GNNB v1, a line-oriented text format for attributed, labeled graphs.
//!
//! ```text
//! # gnnb 1 <n> <m> <d0> <C>
//! # features
//! <n lines of d0 floats>
//! # labels
//! <n integers in [0, C), or -1 for unlabeled>
//! # edges
//! <m lines "src dst", each undirected edge once>
//! # split train
//! <node ids>
//! ```
//!
//! The split sections (`train`, `val`, `test`) are optional. Floats are
//! written in shortest round-trip form, so a write/read cycle is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use decorr_core::{DenseMatrix, Graph, Split};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    pub split: Option<Split>,
}

fn bad(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("gnnb line {line}: {msg}"))
}

struct Header {
    n: usize,
    m: usize,
    d0: usize,
    classes: usize,
}

fn parse_header(line: &str) -> Result<Header> {
    let tokens: Vec<&str> = line.trim_start_matches('#').split_whitespace().collect();
    if tokens.len() != 6 || tokens[0] != "gnnb" {
        return Err(bad(1, "expected `# gnnb 1 <n> <m> <d0> <C>`"));
    }
    if tokens[1] != "1" {
        return Err(bad(1, format!("unsupported version {}", tokens[1])));
    }
    let num = |i: usize| tokens[i].parse::<usize>().map_err(|e| bad(1, format!("{}: {e}", tokens[i])));
    Ok(Header {
        n: num(2)?,
        m: num(3)?,
        d0: num(4)?,
        classes: num(5)?,
    })
}

pub fn parse(text: &str) -> Result<Dataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (_, first) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
    let h = parse_header(first)?;

    let mut features: Option<Vec<f64>> = None;
    let mut labels: Option<Vec<Option<usize>>> = None;
    let mut edges: Option<Vec<(usize, usize)>> = None;
    let mut split = [None, None, None];
    let mut section: Option<(usize, String)> = None;
    let mut body: Vec<(usize, &str)> = Vec::new();

    let mut finish = |section: Option<(usize, String)>, body: &mut Vec<(usize, &str)>| -> Result<()> {
        let Some((at, name)) = section else {
            return match body.first() {
                Some(&(line, _)) => Err(bad(line, "data before the first section")),
                None => Ok(()),
            };
        };
        let parts: Vec<&str> = name.split_whitespace().collect();
        match parts.as_slice() {
            ["features"] => {
                if body.len() != h.n {
                    return Err(bad(at, format!("{} feature rows for {} nodes", body.len(), h.n)));
                }
                let mut data = Vec::with_capacity(h.n * h.d0);
                for &(line, text) in body.iter() {
                    let before = data.len();
                    for tok in text.split_whitespace() {
                        data.push(tok.parse::<f64>().map_err(|e| bad(line, format!("{tok}: {e}")))?);
                    }
                    if data.len() - before != h.d0 {
                        return Err(bad(line, format!("{} features, expected {}", data.len() - before, h.d0)));
                    }
                }
                features = Some(data);
            }
            ["labels"] => {
                let mut out = Vec::with_capacity(h.n);
                for &(line, text) in body.iter() {
                    for tok in text.split_whitespace() {
                        let v: i64 = tok.parse().map_err(|e| bad(line, format!("{tok}: {e}")))?;
                        out.push(match v {
                            -1 => None,
                            c if c >= 0 && (c as usize) < h.classes => Some(c as usize),
                            c => return Err(bad(line, format!("label {c} outside [0, {})", h.classes))),
                        });
                    }
                }
                if out.len() != h.n {
                    return Err(bad(at, format!("{} labels for {} nodes", out.len(), h.n)));
                }
                labels = Some(out);
            }
            ["edges"] => {
                if body.len() != h.m {
                    return Err(bad(at, format!("{} edges, header says {}", body.len(), h.m)));
                }
                let mut out = Vec::with_capacity(h.m);
                for &(line, text) in body.iter() {
                    let ids = parse_ids(line, text, h.n)?;
                    if ids.len() != 2 {
                        return Err(bad(line, "an edge needs exactly two node ids"));
                    }
                    out.push((ids[0], ids[1]));
                }
                edges = Some(out);
            }
            ["split", part] => {
                let slot = match *part {
                    "train" => 0,
                    "val" => 1,
                    "test" => 2,
                    other => return Err(bad(at, format!("unknown split section {other}"))),
                };
                let mut ids = Vec::new();
                for &(line, text) in body.iter() {
                    ids.extend(parse_ids(line, text, h.n)?);
                }
                split[slot] = Some(ids);
            }
            _ => return Err(bad(at, format!("unknown section `{name}`"))),
        }
        body.clear();
        Ok(())
    };

    for (line, text) in lines {
        if let Some(name) = text.strip_prefix('#') {
            finish(section.take(), &mut body)?;
            section = Some((line, name.trim().to_string()));
        } else {
            body.push((line, text));
        }
    }
    finish(section.take(), &mut body)?;

    let features = features.ok_or_else(|| bad(1, "missing features section"))?;
    let labels = labels.ok_or_else(|| bad(1, "missing labels section"))?;
    let edges = edges.ok_or_else(|| bad(1, "missing edges section"))?;
    let x = DenseMatrix::from_vec(h.n, h.d0, features)?;
    let graph = Graph::new(x, &edges, labels, h.classes)?;
    let split = match split {
        [None, None, None] => None,
        [Some(train), val, test] => {
            let s = Split {
                train,
                val: val.unwrap_or_default(),
                test: test.unwrap_or_default(),
            };
            s.validate(h.n).map_err(|e| CliError::Data(format!("gnnb split: {e}")))?;
            Some(s)
        }
        _ => return Err(bad(1, "split sections present without `split train`")),
    };
    Ok(Dataset { graph, split })
}

fn parse_ids(line: usize, text: &str, n: usize) -> Result<Vec<usize>> {
    text.split_whitespace()
        .map(|tok| {
            let id: usize = tok.parse().map_err(|e| bad(line, format!("{tok}: {e}")))?;
            if id >= n {
                return Err(bad(line, format!("node {id} out of range for {n} nodes")));
            }
            Ok(id)
        })
        .collect()
}

pub fn read(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(CliError::read(path))?;
    parse(&text).map_err(|e| match e {
        CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn to_string(g: &Graph, split: Option<&Split>) -> String {
    let x = g.features();
    let edges = g.edges();
    let mut out = String::new();
    let _ = writeln!(out, "# gnnb 1 {} {} {} {}", g.num_nodes(), edges.len(), x.cols(), g.num_classes());
    out.push_str("# features\n");
    for i in 0..x.rows() {
        push_joined(&mut out, x.row(i));
    }
    out.push_str("# labels\n");
    for l in g.labels() {
        let _ = writeln!(out, "{}", l.map_or(-1, |c| c as i64));
    }
    out.push_str("# edges\n");
    for (u, v) in edges {
        let _ = writeln!(out, "{u} {v}");
    }
    if let Some(s) = split {
        for (name, ids) in [("train", &s.train), ("val", &s.val), ("test", &s.test)] {
            let _ = writeln!(out, "# split {name}");
            push_joined(&mut out, ids);
        }
    }
    out
}

fn push_joined<T: std::fmt::Display>(out: &mut String, items: &[T]) {
    for (j, v) in items.iter().enumerate() {
        if j > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
}

pub fn write(path: &Path, g: &Graph, split: Option<&Split>) -> Result<()> {
    fs::write(path, to_string(g, split)).map_err(CliError::write(path))
}
