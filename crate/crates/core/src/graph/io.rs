//! Text formats for graphs, labels and signals.
//!
//! Edge list (UTF-8, 1-based, columns separated by a single tab):
//!
//! ```text
//! #nodes 3
//! 1 2 1
//! 2 3 0.5
//! ```
//!
//! Weights are written with 17 significant digits in `%.17g` style so that a
//! save/load round trip is bit-exact. Label and signal files are CSV with a
//! `node,value` header and 1-based node indices.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{EmpiricalGraph, GraphSignal, LabelSet};
use crate::error::{Error, Result};

/// Formats `v` like C's `printf("%.17g", v)`.
pub fn format_g17(v: f64) -> String {
    const PRECISION: i32 = 17;
    if v == 0.0 {
        return if v.is_sign_negative() { "-0" } else { "0" }.to_owned();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    // `{:e}` with PRECISION-1 fractional digits yields the correctly rounded
    // mantissa and the exponent after rounding.
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if !(-4..PRECISION).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (PRECISION - 1 - exp) as usize;
        strip_zeros(&format!("{:.*}", decimals, v)).to_owned()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn edge_list_to_string(g: &EmpiricalGraph) -> String {
    let mut out = String::new();
    writeln!(out, "#nodes {}", g.node_count()).unwrap();
    for (i, j, w) in g.edges() {
        writeln!(out, "{}\t{}\t{}", i + 1, j + 1, format_g17(w)).unwrap();
    }
    out
}

pub fn save_edge_list(g: &EmpiricalGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, edge_list_to_string(g)).map_err(|e| Error::io(path, e))
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<EmpiricalGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text, path)
}

pub fn parse_edge_list(text: &str, path: &Path) -> Result<EmpiricalGraph> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
    let node_count = match lines.next() {
        Some((_, header)) => header
            .strip_prefix("#nodes")
            .and_then(|rest| rest.trim().parse::<usize>().ok())
            .ok_or_else(|| err(1, "expected header `#nodes N`".into()))?,
        None => return Err(err(1, "empty file, expected header `#nodes N`".into())),
    };

    let mut edges = Vec::new();
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(err(line_no, format!("expected 3 tab-separated fields, got {}", fields.len())));
        }
        let index = |s: &str| -> Result<usize> {
            let v: usize = s
                .trim()
                .parse()
                .map_err(|_| err(line_no, format!("invalid node index `{s}`")))?;
            if v == 0 || v > node_count {
                return Err(err(line_no, format!("node index {v} outside 1..={node_count}")));
            }
            Ok(v - 1)
        };
        let i = index(fields[0])?;
        let j = index(fields[1])?;
        let w: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| err(line_no, format!("invalid weight `{}`", fields[2])))?;
        if i == j {
            return Err(err(line_no, format!("self-loop at node {}", i + 1)));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(err(line_no, format!("non-positive weight {w}")));
        }
        edges.push((i, j, w, line_no));
    }

    let mut seen = std::collections::HashSet::new();
    for &(i, j, _, line_no) in &edges {
        if !seen.insert((i.min(j), i.max(j))) {
            return Err(err(
                line_no,
                format!("duplicate edge ({}, {})", i.min(j) + 1, i.max(j) + 1),
            ));
        }
    }
    EmpiricalGraph::from_edges(node_count, edges.into_iter().map(|(i, j, w, _)| (i, j, w)))
}

fn write_node_values<I>(path: &Path, rows: I) -> Result<()>
where
    I: IntoIterator<Item = (usize, f64)>,
{
    let mut out = String::from("node,value\n");
    for (i, v) in rows {
        writeln!(out, "{},{}", i + 1, format_g17(v)).unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn read_node_values(path: &Path) -> Result<Vec<(usize, f64)>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = k + 2;
        let bad = |message: String| Error::Parse {
            path: path.to_owned(),
            line,
            message,
        };
        if record.len() != 2 {
            return Err(bad(format!("expected 2 fields, got {}", record.len())));
        }
        let node: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| bad(format!("invalid node `{}`", &record[0])))?;
        if node == 0 {
            return Err(bad("node indices are 1-based".into()));
        }
        let value: f64 = record[1]
            .trim()
            .parse()
            .map_err(|_| bad(format!("invalid value `{}`", &record[1])))?;
        rows.push((node - 1, value));
    }
    Ok(rows)
}

pub fn save_labels(labels: &LabelSet, path: impl AsRef<Path>) -> Result<()> {
    write_node_values(path.as_ref(), labels.iter())
}

pub fn load_labels(path: impl AsRef<Path>, node_count: usize) -> Result<LabelSet> {
    LabelSet::new(node_count, read_node_values(path.as_ref())?)
}

pub fn save_signal(x: &[f64], path: impl AsRef<Path>) -> Result<()> {
    write_node_values(path.as_ref(), x.iter().copied().enumerate())
}

/// Loads a dense signal; every node `1..=node_count` must appear exactly once.
pub fn load_signal(path: impl AsRef<Path>, node_count: usize) -> Result<GraphSignal> {
    let path = path.as_ref();
    let rows = read_node_values(path)?;
    let mut values = vec![None; node_count];
    for (i, v) in rows {
        let slot = values.get_mut(i).ok_or(Error::NodeOutOfRange {
            index: i,
            node_count,
        })?;
        if slot.replace(v).is_some() {
            return Err(Error::DuplicateLabel(i));
        }
    }
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| Error::Parse {
                path: path.to_owned(),
                line: 0,
                message: format!("missing value for node {}", i + 1),
            })
        })
        .collect::<Result<Vec<f64>>>()
        .map(GraphSignal::from)
}
