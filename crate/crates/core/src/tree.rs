//! Paired tree-shaped datasets.
//!
//! A [`PairedTreeData`] holds one rooted topology whose nodes each carry two
//! aligned observation series (the `x` tree and the `y` tree), plus the fixed
//! anchor point the root's first observation grows from. Generations are
//! always recomputed from parent links; the root is generation 1.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("invalid tree data: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("node `{0}` has {1} observations; expected a single-observation (DSPGM) tree")]
    NotDegenerate(String, usize),
    #[error("expanded node id `{0}` collides with an existing node id")]
    IdCollision(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// One node as it appears in a file or generator output.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub id: String,
    pub parent_id: Option<String>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl NodeRecord {
    pub fn new(id: impl Into<String>, parent_id: Option<&str>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            parent_id: parent_id.map(str::to_owned),
            x,
            y,
        }
    }

    pub fn series_len(&self) -> usize {
        self.x.len()
    }
}

/// Topology plus aligned X/Y series per node and the root anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedTreeData {
    pub anchor: (f64, f64),
    pub nodes: Vec<NodeRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    NoRoot,
    MultipleRoots,
    DuplicateId,
    UnknownParent(String),
    Cycle,
    EmptySeries,
    SeriesLengthMismatch { x: usize, y: usize },
    NonFiniteValue,
}

/// A single invariant violation, attributed to a node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub node_id: String,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.rule {
            Rule::NoRoot => write!(f, "no root node"),
            Rule::MultipleRoots => write!(f, "node `{}`: multiple roots", self.node_id),
            Rule::DuplicateId => write!(f, "node `{}`: duplicate id", self.node_id),
            Rule::UnknownParent(p) => {
                write!(f, "node `{}`: unknown parent `{}`", self.node_id, p)
            }
            Rule::Cycle => write!(
                f,
                "node `{}`: not reachable from the root (cycle)",
                self.node_id
            ),
            Rule::EmptySeries => write!(f, "node `{}`: empty series", self.node_id),
            Rule::SeriesLengthMismatch { x, y } => write!(
                f,
                "node `{}`: series length mismatch (x has {}, y has {})",
                self.node_id, x, y
            ),
            Rule::NonFiniteValue => write!(f, "node `{}`: non-finite value", self.node_id),
        }
    }
}

/// Resolved parent/child structure of a valid dataset, indexed like
/// `PairedTreeData::nodes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub root: usize,
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    pub generation: Vec<u32>,
}

impl Topology {
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn max_generation(&self) -> u32 {
        self.generation.iter().copied().max().unwrap_or(0)
    }

    pub fn leaf_count(&self) -> usize {
        self.children.iter().filter(|c| c.is_empty()).count()
    }
}

/// Checks every structural invariant and reports all violations found.
pub fn validate(data: &PairedTreeData) -> Vec<Violation> {
    resolve(data).err().unwrap_or_default()
}

fn resolve(data: &PairedTreeData) -> Result<Topology, Vec<Violation>> {
    let mut violations = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::with_capacity(data.nodes.len());
    for (i, node) in data.nodes.iter().enumerate() {
        if index.insert(node.id.as_str(), i).is_some() {
            violations.push(Violation {
                node_id: node.id.clone(),
                rule: Rule::DuplicateId,
            });
        }
        if node.x.is_empty() && node.y.is_empty() {
            violations.push(Violation {
                node_id: node.id.clone(),
                rule: Rule::EmptySeries,
            });
        } else if node.x.len() != node.y.len() {
            violations.push(Violation {
                node_id: node.id.clone(),
                rule: Rule::SeriesLengthMismatch {
                    x: node.x.len(),
                    y: node.y.len(),
                },
            });
        }
        if node.x.iter().chain(&node.y).any(|v| !v.is_finite()) {
            violations.push(Violation {
                node_id: node.id.clone(),
                rule: Rule::NonFiniteValue,
            });
        }
    }
    if !data.anchor.0.is_finite() || !data.anchor.1.is_finite() {
        violations.push(Violation {
            node_id: "#anchor".into(),
            rule: Rule::NonFiniteValue,
        });
    }

    let n = data.nodes.len();
    let mut parent = vec![None; n];
    let mut children = vec![Vec::new(); n];
    let mut roots = Vec::new();
    for (i, node) in data.nodes.iter().enumerate() {
        match &node.parent_id {
            None => roots.push(i),
            Some(p) => match index.get(p.as_str()) {
                Some(&pi) => {
                    parent[i] = Some(pi);
                    children[pi].push(i);
                }
                None => violations.push(Violation {
                    node_id: node.id.clone(),
                    rule: Rule::UnknownParent(p.clone()),
                }),
            },
        }
    }
    match roots.len() {
        0 => violations.push(Violation {
            node_id: String::new(),
            rule: Rule::NoRoot,
        }),
        1 => {}
        _ => {
            for &r in &roots[1..] {
                violations.push(Violation {
                    node_id: data.nodes[r].id.clone(),
                    rule: Rule::MultipleRoots,
                });
            }
        }
    }

    let mut generation = vec![0u32; n];
    if let Some(&root) = roots.first() {
        generation[root] = 1;
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            for &c in &children[v] {
                if generation[c] == 0 {
                    generation[c] = generation[v] + 1;
                    stack.push(c);
                }
            }
        }
        for i in (0..n).filter(|&i| generation[i] == 0) {
            // unreachable: either an ancestor has an unknown parent (already
            // reported) or the parent chain loops
            let mut v = i;
            let mut steps = 0;
            let dangling = loop {
                match parent[v] {
                    None => break data.nodes[v].parent_id.is_some() || roots.len() > 1,
                    Some(p) if steps <= n => {
                        v = p;
                        steps += 1;
                    }
                    Some(_) => break false,
                }
            };
            if !dangling {
                violations.push(Violation {
                    node_id: data.nodes[i].id.clone(),
                    rule: Rule::Cycle,
                });
            }
        }
    }

    if violations.is_empty() {
        Ok(Topology {
            root: roots[0],
            parent,
            children,
            generation,
        })
    } else {
        Err(violations)
    }
}

/// Per-generation paired increments; `generations[0]` is generation 1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IncrementsByGeneration {
    pub generations: Vec<Vec<(f64, f64)>>,
}

impl IncrementsByGeneration {
    pub fn max_generation(&self) -> u32 {
        self.generations.len() as u32
    }

    /// Increments of generation `i` (1-based).
    pub fn generation(&self, i: u32) -> &[(f64, f64)] {
        &self.generations[(i - 1) as usize]
    }

    pub fn total(&self) -> usize {
        self.generations.iter().map(Vec::len).sum()
    }

    /// All increments across generations, generation by generation.
    pub fn pooled(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.generations.iter().flatten().copied()
    }

    pub fn map(&self, mut f: impl FnMut(u32, (f64, f64)) -> (f64, f64)) -> Self {
        let generations = self
            .generations
            .iter()
            .enumerate()
            .map(|(g, incs)| incs.iter().map(|&p| f(g as u32 + 1, p)).collect())
            .collect();
        Self { generations }
    }
}

impl PairedTreeData {
    pub fn new(anchor: (f64, f64), nodes: Vec<NodeRecord>) -> Self {
        Self { anchor, nodes }
    }

    /// Validates and resolves the parent links.
    pub fn topology(&self) -> Result<Topology, TreeError> {
        resolve(self).map_err(TreeError::Invalid)
    }

    pub fn is_degenerate(&self) -> bool {
        self.nodes.iter().all(|n| n.series_len() == 1)
    }

    pub fn observation_count(&self) -> usize {
        self.nodes.iter().map(NodeRecord::series_len).sum()
    }

    /// Expands every node holding a series of length `T` into a chain of `T`
    /// single-observation nodes; the original children hang off the last one.
    ///
    /// The first chain node keeps the original id, the k-th (k ≥ 2) is named
    /// `{id}#{k}`.
    pub fn to_dspgm(&self) -> Result<PairedTreeData, TreeError> {
        self.topology()?;
        if self.is_degenerate() {
            return Ok(self.clone());
        }
        let chain_id = |node: &NodeRecord, k: usize| -> String {
            if k == 1 {
                node.id.clone()
            } else {
                format!("{}#{}", node.id, k)
            }
        };
        let last_id: HashMap<&str, String> = self
            .nodes
            .iter()
            .map(|n| (n.id.as_str(), chain_id(n, n.series_len())))
            .collect();

        let mut nodes = Vec::with_capacity(self.observation_count());
        for node in &self.nodes {
            for k in 1..=node.series_len() {
                let parent_id = if k == 1 {
                    node.parent_id.as_ref().map(|p| last_id[p.as_str()].clone())
                } else {
                    Some(chain_id(node, k - 1))
                };
                nodes.push(NodeRecord {
                    id: chain_id(node, k),
                    parent_id,
                    x: vec![node.x[k - 1]],
                    y: vec![node.y[k - 1]],
                });
            }
        }
        let out = PairedTreeData::new(self.anchor, nodes);
        if let Err(TreeError::Invalid(v)) = out.topology() {
            let dup = v
                .into_iter()
                .find(|v| v.rule == Rule::DuplicateId)
                .map(|v| v.node_id)
                .unwrap_or_default();
            return Err(TreeError::IdCollision(dup));
        }
        Ok(out)
    }

    /// Increments per generation: generation 1 is taken against the anchor,
    /// deeper generations against the parent node. Within a generation the
    /// order follows the node order of `self.nodes`.
    pub fn extract_increments(&self) -> Result<IncrementsByGeneration, TreeError> {
        let topo = self.topology()?;
        if let Some(n) = self.nodes.iter().find(|n| n.series_len() != 1) {
            return Err(TreeError::NotDegenerate(n.id.clone(), n.series_len()));
        }
        let mut generations = vec![Vec::new(); topo.max_generation() as usize];
        for (i, node) in self.nodes.iter().enumerate() {
            let (px, py) = match topo.parent[i] {
                Some(p) => (self.nodes[p].x[0], self.nodes[p].y[0]),
                None => self.anchor,
            };
            generations[(topo.generation[i] - 1) as usize].push((node.x[0] - px, node.y[0] - py));
        }
        Ok(IncrementsByGeneration { generations })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: &str, parent: Option<&str>, x: &[f64], y: &[f64]) -> NodeRecord {
        NodeRecord::new(id, parent, x.to_vec(), y.to_vec())
    }

    #[test]
    fn minimal_tree_is_valid() {
        let data = PairedTreeData::new(
            (0.0, 0.0),
            vec![
                node("r", None, &[1.0], &[1.0]),
                node("c", Some("r"), &[2.0], &[2.0]),
            ],
        );
        assert!(validate(&data).is_empty());
        let topo = data.topology().unwrap();
        assert_eq!(topo.generation, vec![1, 2]);
    }

    #[test]
    fn unknown_parent_is_reported() {
        let data = PairedTreeData::new(
            (0.0, 0.0),
            vec![
                node("r", None, &[1.0], &[1.0]),
                node("c", Some("zz"), &[2.0], &[2.0]),
            ],
        );
        let report = validate(&data);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].node_id, "c");
        assert_eq!(report[0].rule, Rule::UnknownParent("zz".into()));
        assert!(report[0].to_string().contains("unknown parent"));
    }

    #[test]
    fn series_length_mismatch_is_reported() {
        let data = PairedTreeData::new(
            (0.0, 0.0),
            vec![node("r", None, &[1.0, 2.0], &[1.0, 2.0, 3.0])],
        );
        let report = validate(&data);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].rule, Rule::SeriesLengthMismatch { x: 2, y: 3 });
        assert!(report[0].to_string().contains("series length mismatch"));
    }

    #[test]
    fn roots_and_cycles() {
        let two_roots = PairedTreeData::new(
            (0.0, 0.0),
            vec![
                node("a", None, &[1.0], &[1.0]),
                node("b", None, &[1.0], &[1.0]),
            ],
        );
        assert_eq!(validate(&two_roots)[0].rule, Rule::MultipleRoots);

        let cyclic = PairedTreeData::new(
            (0.0, 0.0),
            vec![
                node("r", None, &[1.0], &[1.0]),
                node("a", Some("b"), &[1.0], &[1.0]),
                node("b", Some("a"), &[1.0], &[1.0]),
            ],
        );
        let report = validate(&cyclic);
        assert_eq!(report.len(), 2);
        assert!(report.iter().all(|v| v.rule == Rule::Cycle));

        let empty = PairedTreeData::new((0.0, 0.0), vec![]);
        assert_eq!(validate(&empty)[0].rule, Rule::NoRoot);
    }

    #[test]
    fn validate_is_idempotent() {
        let data = PairedTreeData::new(
            (0.0, 0.0),
            vec![
                node("r", None, &[1.0], &[f64::NAN]),
                node("r", Some("q"), &[], &[]),
            ],
        );
        let before = data.clone();
        let a = validate(&data);
        let b = validate(&data);
        assert_eq!(a, b);
        // NaN payload: compare structurally
        assert_eq!(format!("{data:?}"), format!("{before:?}"));
        assert!(!a.is_empty());
    }

    #[test]
    fn dspgm_identity_when_already_degenerate() {
        let data = PairedTreeData::new(
            (0.5, 0.5),
            vec![
                node("r", None, &[1.0], &[1.0]),
                node("c", Some("r"), &[2.0], &[3.0]),
            ],
        );
        assert_eq!(data.to_dspgm().unwrap(), data);
    }

    #[test]
    fn dspgm_expands_root_series_into_chain() {
        let data = PairedTreeData::new(
            (0.0, 0.0),
            vec![
                node("r", None, &[1.0, 3.0], &[1.0, 3.0]),
                node("c", Some("r"), &[7.0], &[7.0]),
            ],
        );
        let d = data.to_dspgm().unwrap();
        assert_eq!(d.nodes.len(), 3);
        let topo = d.topology().unwrap();
        let xs: Vec<f64> = d.nodes.iter().map(|n| n.x[0]).collect();
        assert_eq!(xs, vec![1.0, 3.0, 7.0]);
        assert_eq!(topo.generation, vec![1, 2, 3]);
        assert_eq!(d.nodes[2].parent_id.as_deref(), Some("r#2"));
        assert_eq!(d.anchor, data.anchor);
    }

    #[test]
    fn dspgm_binary_depth_three_with_pairs() {
        // 7 nodes, two observations each: hand expansion gives a 14-node tree
        // of depth 6 whose leaves are the last chain nodes of the 4 leaves.
        let mut nodes = vec![node("1", None, &[0.0, 1.0], &[0.0, 1.0])];
        for (id, p) in [
            ("2", "1"),
            ("3", "1"),
            ("4", "2"),
            ("5", "2"),
            ("6", "3"),
            ("7", "3"),
        ] {
            nodes.push(node(id, Some(p), &[0.0, 1.0], &[0.0, 1.0]));
        }
        let data = PairedTreeData::new((0.0, 0.0), nodes);
        let d = data.to_dspgm().unwrap();
        let topo = d.topology().unwrap();
        assert_eq!(d.nodes.len(), 14);
        assert_eq!(d.observation_count(), data.observation_count());
        assert_eq!(topo.max_generation(), 6);
        assert_eq!(topo.leaf_count(), 4);
    }

    #[test]
    fn dspgm_rejects_id_collision() {
        let data = PairedTreeData::new(
            (0.0, 0.0),
            vec![
                node("r", None, &[1.0, 2.0], &[1.0, 2.0]),
                node("r#2", Some("r"), &[3.0], &[3.0]),
            ],
        );
        assert!(matches!(data.to_dspgm(), Err(TreeError::IdCollision(_))));
    }

    #[test]
    fn increments_against_anchor_and_parent() {
        let data = PairedTreeData::new(
            (0.0, 0.0),
            vec![
                node("r", None, &[2.0], &[2.0]),
                node("c", Some("r"), &[5.0], &[1.0]),
            ],
        );
        let inc = data.extract_increments().unwrap();
        assert_eq!(inc.generation(1), &[(2.0, 2.0)]);
        assert_eq!(inc.generation(2), &[(3.0, -1.0)]);

        let zero = PairedTreeData::new((1.0, 1.0), vec![node("r", None, &[1.0], &[1.0])]);
        assert_eq!(
            zero.extract_increments().unwrap().generation(1),
            &[(0.0, 0.0)]
        );
    }

    #[test]
    fn increments_require_dspgm() {
        let data = PairedTreeData::new((0.0, 0.0), vec![node("r", None, &[1.0, 2.0], &[1.0, 2.0])]);
        assert!(matches!(
            data.extract_increments(),
            Err(TreeError::NotDegenerate(..))
        ));
    }
}
