//! Plain-text graph format.
//!
//! ```text
//! Graph Nodes:
//! X1,X2,(L1),X3
//!
//! Graph Edges:
//! 1. X1 o-> X2
//! 2. L1 --> X3
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{Endpoint, MixedGraph};

pub fn to_text(g: &MixedGraph) -> String {
    let mut out = String::from("Graph Nodes:\n");
    let names: Vec<String> = g
        .nodes()
        .map(|v| {
            if g.is_latent(v) {
                format!("({})", g.name(v))
            } else {
                g.name(v).to_string()
            }
        })
        .collect();
    out.push_str(&names.join(","));
    out.push_str("\n\nGraph Edges:\n");
    for (i, e) in g.edges().iter().enumerate() {
        let (mut a, mut b, mut ea, mut eb) = (e.a, e.b, e.end_a, e.end_b);
        if ea == Endpoint::Arrow && eb != Endpoint::Arrow {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut ea, &mut eb);
        }
        let left = match ea {
            Endpoint::Tail => '-',
            Endpoint::Arrow => '<',
            Endpoint::Circle => 'o',
        };
        let _ = writeln!(
            out,
            "{}. {} {}-{} {}",
            i + 1,
            g.name(a),
            left,
            eb.symbol(),
            g.name(b)
        );
    }
    out
}

pub fn from_text(text: &str) -> Result<MixedGraph> {
    let mut g = MixedGraph::empty();
    let mut section = 0;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let err = |msg: String| Error::Parse {
            line: lineno + 1,
            msg,
        };
        if line.is_empty() {
            continue;
        }
        if line.eq_ignore_ascii_case("Graph Nodes:") {
            section = 1;
            continue;
        }
        if line.eq_ignore_ascii_case("Graph Edges:") {
            section = 2;
            continue;
        }
        match section {
            1 => {
                for tok in line
                    .split([',', ';'])
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                {
                    let (name, latent) =
                        match tok.strip_prefix('(').and_then(|t| t.strip_suffix(')')) {
                            Some(inner) => (inner.trim(), true),
                            None => (tok, false),
                        };
                    if g.node_id(name).is_some() {
                        return Err(err(format!("node {name} declared twice")));
                    }
                    g.add_node(name, latent);
                }
            }
            2 => {
                let body = match line.split_once(". ") {
                    Some((num, rest)) if num.chars().all(|c| c.is_ascii_digit()) => rest,
                    _ => line,
                };
                let parts: Vec<&str> = body.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(err(format!("expected `A xyz B`, got `{body}`")));
                }
                let mark = parts[1].as_bytes();
                if mark.len() != 3 || mark[1] != b'-' {
                    return Err(err(format!("bad edge mark `{}`", parts[1])));
                }
                let end_a = match mark[0] {
                    b'<' => Endpoint::Arrow,
                    b'o' => Endpoint::Circle,
                    b'-' => Endpoint::Tail,
                    _ => return Err(err(format!("bad left mark in `{}`", parts[1]))),
                };
                let end_b = match mark[2] {
                    b'>' => Endpoint::Arrow,
                    b'o' => Endpoint::Circle,
                    b'-' => Endpoint::Tail,
                    _ => return Err(err(format!("bad right mark in `{}`", parts[1]))),
                };
                let a = g
                    .node_id(parts[0])
                    .ok_or_else(|| err(format!("unknown node {}", parts[0])))?;
                let b = g
                    .node_id(parts[2])
                    .ok_or_else(|| err(format!("unknown node {}", parts[2])))?;
                g.add_edge(a, b, end_a, end_b)
                    .map_err(|e| err(e.to_string()))?;
            }
            _ => return Err(err("content before `Graph Nodes:`".into())),
        }
    }
    if section == 0 {
        return Err(Error::Parse {
            line: 0,
            msg: "missing `Graph Nodes:` header".into(),
        });
    }
    Ok(g)
}

pub fn read_graph(path: &Path) -> Result<MixedGraph> {
    from_text(&std::fs::read_to_string(path)?)
}

pub fn write_graph(path: &Path, g: &MixedGraph) -> Result<()> {
    std::fs::write(path, to_text(g))?;
    Ok(())
}
