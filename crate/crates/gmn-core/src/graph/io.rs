//! `.gmngraph` text format.
//!
//! ```text
//! GMNGRAPH v1 n=<n> l=<l> edges=<m> task=<kind>
//! <u> <v>            (m lines)
//! <f> <f> ... <f>    (n lines of l floats)
//! LABELS node|graph  (optional)
//! <value lines>
//! ```
//!
//! Floats are written with 17 significant digits so a write/read round trip
//! reproduces every f64 bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Graph, GraphError, Labels, TaskKind};

pub fn write_graph(graph: &Graph, path: &Path) -> Result<(), GraphError> {
    fs::write(path, format_graph(graph))?;
    Ok(())
}

pub fn read_graph(path: &Path) -> Result<Graph, GraphError> {
    let text = fs::read_to_string(path)?;
    parse_graph(&text)
}

pub(crate) fn format_graph(graph: &Graph) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "GMNGRAPH v1 n={} l={} edges={} task={}",
        graph.n(),
        graph.feature_dim(),
        graph.num_edges(),
        graph.task().as_str()
    )
    .unwrap();
    for &(u, v) in graph.edges() {
        writeln!(out, "{u} {v}").unwrap();
    }
    for u in 0..graph.n() {
        let row = graph.feature_row(u);
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            write!(out, "{v:.16e}").unwrap();
        }
        out.push('\n');
    }
    match graph.labels() {
        Labels::None => {}
        Labels::Node(ls) => {
            out.push_str("LABELS node\n");
            for l in ls {
                writeln!(out, "{l}").unwrap();
            }
        }
        Labels::Graph(v) => {
            out.push_str("LABELS graph\n");
            writeln!(out, "{v:.16e}").unwrap();
        }
    }
    out
}

pub(crate) fn parse_graph(text: &str) -> Result<Graph, GraphError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file"))?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some("GMNGRAPH") {
        return Err(parse_err(1, "missing GMNGRAPH magic"));
    }
    let version = fields.next().unwrap_or("");
    if version != "v1" {
        return Err(GraphError::VersionMismatch { found: version.to_string() });
    }
    let mut n = None;
    let mut l = None;
    let mut m = None;
    let mut task = TaskKind::None;
    for field in fields {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| parse_err(1, &format!("malformed header field '{field}'")))?;
        match key {
            "n" => n = Some(parse_usize(value, 1, "n")?),
            "l" => l = Some(parse_usize(value, 1, "l")?),
            "edges" => m = Some(parse_usize(value, 1, "edges")?),
            "task" => {
                task = TaskKind::parse(value)
                    .ok_or_else(|| parse_err(1, &format!("unknown task '{value}'")))?
            }
            other => return Err(parse_err(1, &format!("unknown header key '{other}'"))),
        }
    }
    let n = n.ok_or_else(|| parse_err(1, "header missing n"))?;
    let l = l.ok_or_else(|| parse_err(1, "header missing l"))?;
    let m = m.ok_or_else(|| parse_err(1, "header missing edges"))?;

    let mut edges = Vec::with_capacity(m);
    let mut self_loops = false;
    for _ in 0..m {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| parse_err(0, "file truncated inside edge list"))?;
        let mut parts = line.split_whitespace();
        let u = parse_u32(parts.next().unwrap_or(""), idx + 1, "edge endpoint")?;
        let v = parse_u32(parts.next().unwrap_or(""), idx + 1, "edge endpoint")?;
        if parts.next().is_some() {
            return Err(parse_err(idx + 1, "trailing tokens on edge line"));
        }
        self_loops |= u == v;
        edges.push((u, v));
    }
    let mut x = Vec::with_capacity(n * l);
    for _ in 0..n {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| parse_err(0, "file truncated inside feature block"))?;
        let mut count = 0;
        for tok in line.split_whitespace() {
            x.push(parse_f64(tok, idx + 1, "feature")?);
            count += 1;
        }
        if count != l {
            return Err(parse_err(idx + 1, &format!("expected {l} features, got {count}")));
        }
    }
    let mut labels = Labels::None;
    if let Some((idx, line)) = lines.next() {
        if !line.trim().is_empty() {
            let mut parts = line.split_whitespace();
            if parts.next() != Some("LABELS") {
                return Err(parse_err(idx + 1, "expected LABELS block or end of file"));
            }
            match parts.next() {
                Some("node") => {
                    let mut ls = Vec::with_capacity(n);
                    for _ in 0..n {
                        let (lidx, lline) = lines
                            .next()
                            .ok_or_else(|| parse_err(0, "file truncated inside labels"))?;
                        ls.push(lline.trim().parse::<i64>().map_err(|_| {
                            parse_err(lidx + 1, &format!("bad node label '{}'", lline.trim()))
                        })?);
                    }
                    labels = Labels::Node(ls);
                }
                Some("graph") => {
                    let (lidx, lline) = lines
                        .next()
                        .ok_or_else(|| parse_err(0, "file truncated inside labels"))?;
                    labels = Labels::Graph(parse_f64(lline.trim(), lidx + 1, "graph label")?);
                }
                other => {
                    return Err(parse_err(idx + 1, &format!("bad label kind {other:?}")));
                }
            }
        }
    }
    Ok(Graph::build_with(n, &edges, x, l, self_loops)?.with_labels(labels, task))
}

fn parse_err(line: usize, msg: &str) -> GraphError {
    GraphError::ParseError { line, msg: msg.to_string() }
}

fn parse_usize(s: &str, line: usize, what: &str) -> Result<usize, GraphError> {
    s.parse().map_err(|_| parse_err(line, &format!("bad {what} '{s}'")))
}

fn parse_u32(s: &str, line: usize, what: &str) -> Result<u32, GraphError> {
    s.parse().map_err(|_| parse_err(line, &format!("bad {what} '{s}'")))
}

fn parse_f64(s: &str, line: usize, what: &str) -> Result<f64, GraphError> {
    let v: f64 = s
        .parse()
        .map_err(|_| parse_err(line, &format!("bad {what} '{s}'")))?;
    if !v.is_finite() {
        return Err(parse_err(line, &format!("non-finite {what} '{s}'")));
    }
    Ok(v)
}
