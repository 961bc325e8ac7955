//! Tab-separated paired-tree files.
//!
//! ```text
//! #anchor	0	0
//! node_id	parent_id	x	y
//! 1	-	1.5	2.25
//! 2	1	0.5,1.25	3,4.5
//! ```
//!
//! Lines starting with `#` are comments, except `#anchor`, which sets the
//! anchor point (default `0 0`). The header row is required before any node
//! row. `x` and `y` are comma-separated series of equal length; the root's
//! parent is `-`.
#![allow(clippy::tabs_in_doc_comments)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;
use treecorr::tree::{NodeRecord, PairedTreeData, TreeError};

pub const HEADER: &str = "node_id\tparent_id\tx\ty";
const ROOT_PARENT: &str = "-";

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{message} at line {line}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Invalid(#[from] TreeError),
}

fn parse_number(s: &str, line: usize, what: &str) -> Result<f64, ParseError> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| ParseError::new(line, format!("invalid {what} value `{s}`")))
}

fn parse_series(s: &str, line: usize, what: &str) -> Result<Vec<f64>, ParseError> {
    s.split(',').map(|v| parse_number(v, line, what)).collect()
}

/// Parses file contents without validating the tree.
pub fn parse_paired_trees(text: &str) -> Result<PairedTreeData, ParseError> {
    let mut anchor = (0.0, 0.0);
    let mut seen_header = false;
    let mut nodes = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let row = raw.trim_end_matches('\r');
        if row.trim().is_empty() {
            continue;
        }
        if let Some(comment) = row.strip_prefix('#') {
            let fields: Vec<&str> = comment.split('\t').collect();
            if fields[0].trim() == "anchor" {
                if fields.len() != 3 {
                    return Err(ParseError::new(line, "anchor line needs two values"));
                }
                anchor = (
                    parse_number(fields[1], line, "anchor")?,
                    parse_number(fields[2], line, "anchor")?,
                );
            }
            continue;
        }
        if !seen_header {
            if row != HEADER {
                return Err(ParseError::new(
                    line,
                    format!("expected header `{}`", HEADER.replace('\t', "\\t")),
                ));
            }
            seen_header = true;
            continue;
        }
        let fields: Vec<&str> = row.split('\t').collect();
        if fields.len() != 4 {
            return Err(ParseError::new(
                line,
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(ParseError::new(line, "empty node id"));
        }
        let parent = match fields[1].trim() {
            ROOT_PARENT => None,
            "" => {
                return Err(ParseError::new(
                    line,
                    "empty parent id (use `-` for the root)",
                ))
            }
            p => Some(p),
        };
        let x = parse_series(fields[2], line, "x")?;
        let y = parse_series(fields[3], line, "y")?;
        if x.len() != y.len() {
            return Err(ParseError::new(line, "series length mismatch"));
        }
        nodes.push(NodeRecord::new(id, parent, x, y));
    }
    if !seen_header {
        return Err(ParseError::new(
            text.lines().count().max(1),
            "missing header row",
        ));
    }
    Ok(PairedTreeData::new(anchor, nodes))
}

/// Reads, parses and validates a paired-tree file.
pub fn load_paired_trees(path: &Path) -> Result<PairedTreeData, LoadError> {
    let text = fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_owned(),
        source,
    })?;
    let data = parse_paired_trees(&text)?;
    data.topology()?;
    Ok(data)
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// Serializes with shortest round-trip decimal formatting.
pub fn write_paired_trees(data: &PairedTreeData) -> String {
    let mut out = String::new();
    writeln!(out, "#anchor\t{}\t{}", data.anchor.0, data.anchor.1).unwrap();
    writeln!(out, "{HEADER}").unwrap();
    for n in &data.nodes {
        let parent = n.parent_id.as_deref().unwrap_or(ROOT_PARENT);
        writeln!(out, "{}\t{}\t{}\t{}", n.id, parent, join(&n.x), join(&n.y)).unwrap();
    }
    out
}
