//! Geocoded building graph and shortest-path routing.
//!
//! Rooms, corridors, stairs and entrances are nodes; walkable links are
//! undirected edges. Edge weights default to the great-circle distance
//! between endpoint geocodes plus a fixed penalty per floor crossed.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::document::{parse_versioned, DocumentError};
use crate::geo::{haversine_distance, GeoPoint};

pub const GRAPH_VERSION: u32 = 1;
pub const DEFAULT_STAIR_PENALTY_M: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Room,
    Corridor,
    Stair,
    Entrance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavNode {
    pub id: String,
    pub point: GeoPoint,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavEdge {
    pub a: String,
    pub b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_m: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphConfig {
    /// Added per floor crossed when a weight is derived from geocodes.
    pub stair_penalty_m: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            stair_penalty_m: DEFAULT_STAIR_PENALTY_M,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphProblem {
    DuplicateNode(String),
    InvalidGeocode(String),
    DanglingEndpoint { edge: usize, node: String },
    SelfLoop { edge: usize, node: String },
    DuplicateEdge { a: String, b: String },
    ZeroLength { a: String, b: String },
    InvalidWeight { a: String, b: String, weight: f64 },
}

impl fmt::Display for GraphProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DuplicateNode(id) => write!(f, "duplicate node id {id:?}"),
            Self::InvalidGeocode(id) => write!(f, "node {id:?} has an invalid geocode"),
            Self::DanglingEndpoint { edge, node } => write!(f, "edge #{edge} references unknown node {node:?}"),
            Self::SelfLoop { edge, node } => write!(f, "edge #{edge} connects {node:?} to itself"),
            Self::DuplicateEdge { a, b } => write!(f, "duplicate edge {a:?}-{b:?}"),
            Self::ZeroLength { a, b } => write!(f, "edge {a:?}-{b:?} joins co-located nodes"),
            Self::InvalidWeight { a, b, weight } => write!(f, "edge {a:?}-{b:?} has invalid weight {weight}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("invalid graph: {}", join(.0))]
    Build(Vec<GraphProblem>),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("{to:?} is unreachable from {from:?}")]
    Unreachable { from: String, to: String },
}

fn join(problems: &[GraphProblem]) -> String {
    problems.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Validated, immutable navigation graph. Nodes are held sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct NavGraph {
    nodes: Vec<NavNode>,
    index: BTreeMap<String, usize>,
    /// (a, b, weight) with a < b by index.
    edges: Vec<(usize, usize, f64)>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Route {
    pub nodes: Vec<String>,
    pub total_m: f64,
}

pub fn build_graph(nodes: Vec<NavNode>, edges: Vec<NavEdge>, config: &GraphConfig) -> Result<NavGraph, GraphError> {
    let mut problems = Vec::new();
    let mut nodes = nodes;
    nodes.sort_by(|a, b| a.id.cmp(&b.id));
    for pair in nodes.windows(2) {
        if pair[0].id == pair[1].id {
            problems.push(GraphProblem::DuplicateNode(pair[0].id.clone()));
        }
    }
    nodes.dedup_by(|a, b| a.id == b.id);
    for n in &nodes {
        if n.point.validate().is_err() {
            problems.push(GraphProblem::InvalidGeocode(n.id.clone()));
        }
    }
    let index: BTreeMap<String, usize> = nodes.iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();

    let mut seen = BTreeSet::new();
    let mut resolved = Vec::with_capacity(edges.len());
    for (i, e) in edges.iter().enumerate() {
        let (Some(&ia), Some(&ib)) = (index.get(&e.a), index.get(&e.b)) else {
            for end in [&e.a, &e.b] {
                if !index.contains_key(end) {
                    problems.push(GraphProblem::DanglingEndpoint {
                        edge: i,
                        node: end.clone(),
                    });
                }
            }
            continue;
        };
        if ia == ib {
            problems.push(GraphProblem::SelfLoop { edge: i, node: e.a.clone() });
            continue;
        }
        let key = (ia.min(ib), ia.max(ib));
        if !seen.insert(key) {
            problems.push(GraphProblem::DuplicateEdge {
                a: e.a.clone(),
                b: e.b.clone(),
            });
            continue;
        }
        let weight = match e.weight_m {
            Some(w) => w,
            None => {
                let (pa, pb) = (&nodes[ia].point, &nodes[ib].point);
                let floors = (pa.floor - pb.floor).unsigned_abs() as f64;
                haversine_distance(pa, pb) + floors * config.stair_penalty_m
            }
        };
        if e.weight_m.is_none() && weight == 0.0 {
            problems.push(GraphProblem::ZeroLength {
                a: e.a.clone(),
                b: e.b.clone(),
            });
            continue;
        }
        if !weight.is_finite() || weight <= 0.0 {
            problems.push(GraphProblem::InvalidWeight {
                a: e.a.clone(),
                b: e.b.clone(),
                weight,
            });
            continue;
        }
        resolved.push((key.0, key.1, weight));
    }
    if !problems.is_empty() {
        return Err(GraphError::Build(problems));
    }

    resolved.sort_by_key(|x| (x.0, x.1));
    let mut adjacency = vec![Vec::new(); nodes.len()];
    for &(a, b, w) in &resolved {
        adjacency[a].push((b, w));
        adjacency[b].push((a, w));
    }
    for adj in &mut adjacency {
        adj.sort_by_key(|(n, _)| *n);
    }
    Ok(NavGraph {
        nodes,
        index,
        edges: resolved,
        adjacency,
    })
}

/// Tentative route label. Ordered by cost, then by the node sequence;
/// node indices follow id order so index order is id order.
#[derive(Debug, Clone, PartialEq)]
struct Label {
    cost: f64,
    path: Vec<usize>,
}

impl Eq for Label {}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost.total_cmp(&other.cost).then_with(|| self.path.cmp(&other.path))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl NavGraph {
    pub fn nodes(&self) -> &[NavNode] {
        &self.nodes
    }

    pub fn node(&self, id: &str) -> Option<&NavNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    /// Undirected edges with resolved weights.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.edges
            .iter()
            .map(|&(a, b, w)| (self.nodes[a].id.as_str(), self.nodes[b].id.as_str(), w))
    }

    pub fn neighbors(&self, id: &str) -> impl Iterator<Item = (&str, f64)> {
        let adj = self.index.get(id).map(|&i| self.adjacency[i].as_slice()).unwrap_or(&[]);
        adj.iter().map(|&(n, w)| (self.nodes[n].id.as_str(), w))
    }

    pub fn edge_weight(&self, a: &str, b: &str) -> Option<f64> {
        let (ia, ib) = (*self.index.get(a)?, *self.index.get(b)?);
        self.adjacency[ia].iter().find(|(n, _)| *n == ib).map(|(_, w)| *w)
    }

    fn lookup(&self, id: &str) -> Result<usize, GraphError> {
        self.index.get(id).copied().ok_or_else(|| GraphError::UnknownNode(id.to_string()))
    }

    /// Dijkstra over labels of (cost, node sequence). Among routes of equal
    /// cost the lexicographically smallest id sequence is returned.
    pub fn shortest_path(&self, src: &str, dst: &str) -> Result<Route, GraphError> {
        let (s, t) = (self.lookup(src)?, self.lookup(dst)?);
        let mut best: Vec<Option<Label>> = vec![None; self.nodes.len()];
        let mut settled = vec![false; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        let start = Label { cost: 0.0, path: vec![s] };
        best[s] = Some(start.clone());
        heap.push(std::cmp::Reverse(start));

        while let Some(std::cmp::Reverse(label)) = heap.pop() {
            let u = *label.path.last().expect("non-empty path");
            if settled[u] || best[u].as_ref() != Some(&label) {
                continue;
            }
            settled[u] = true;
            if u == t {
                return Ok(Route {
                    nodes: label.path.iter().map(|&i| self.nodes[i].id.clone()).collect(),
                    total_m: label.cost,
                });
            }
            for &(v, w) in &self.adjacency[u] {
                if settled[v] {
                    continue;
                }
                let mut path = label.path.clone();
                path.push(v);
                let candidate = Label { cost: label.cost + w, path };
                if best[v].as_ref().is_none_or(|b| candidate < *b) {
                    best[v] = Some(candidate.clone());
                    heap.push(std::cmp::Reverse(candidate));
                }
            }
        }
        Err(GraphError::Unreachable {
            from: src.to_string(),
            to: dst.to_string(),
        })
    }

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            version: GRAPH_VERSION,
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeDoc {
                    id: n.id.clone(),
                    lat: n.point.lat,
                    lon: n.point.lon,
                    floor: n.point.floor,
                    kind: n.kind,
                })
                .collect(),
            edges: self
                .edges()
                .map(|(a, b, w)| NavEdge {
                    a: a.to_string(),
                    b: b.to_string(),
                    weight_m: Some(w),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("graph serializes")
    }

    pub fn from_json(text: &str, config: &GraphConfig) -> Result<Self, GraphLoadError> {
        let doc: GraphDocument = parse_versioned("graph", text, GRAPH_VERSION)?;
        Ok(doc.into_graph(config)?)
    }
}

pub fn shortest_path(g: &NavGraph, src: &str, dst: &str) -> Result<Route, GraphError> {
    g.shortest_path(src, dst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub floor: i32,
    pub kind: NodeKind,
}

/// On-disk graph: `{version, nodes: [{id, lat, lon, floor, kind}], edges: [{a, b, weight_m?}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub version: u32,
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<NavEdge>,
}

impl GraphDocument {
    pub fn into_graph(self, config: &GraphConfig) -> Result<NavGraph, GraphError> {
        let nodes = self
            .nodes
            .into_iter()
            .map(|n| NavNode {
                id: n.id,
                point: GeoPoint {
                    lat: n.lat,
                    lon: n.lon,
                    floor: n.floor,
                },
                kind: n.kind,
            })
            .collect();
        build_graph(nodes, self.edges, config)
    }
}

#[derive(Debug, Error)]
pub enum GraphLoadError {
    #[error(transparent)]
    Document(#[from] DocumentError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}
