//! Congestion-game topology: nodes, edges, origin-destination pairs with
//! explicit path sets, and the edge-path incidence algebra `q = Λμ`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the per-OD demand constraint.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub id: String,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathConfig {
    pub id: String,
    pub edges: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdConfig {
    pub origin: String,
    pub destination: String,
    pub demand: f64,
    pub paths: Vec<PathConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeConfig>,
    pub od_pairs: Vec<OdConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub id: String,
    /// Edge indices in traversal order.
    pub edges: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdPair {
    pub origin: usize,
    pub destination: usize,
    pub demand: f64,
    /// Column range of this pair's paths in the global path order.
    pub paths: Range<usize>,
}

/// A validated network. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: Vec<String>,
    edges: Vec<Edge>,
    od_pairs: Vec<OdPair>,
    paths: Vec<Path>,
}

impl Network {
    pub fn from_config(config: &NetworkConfig) -> Result<Self> {
        let mut node_index = BTreeMap::new();
        for (i, node) in config.nodes.iter().enumerate() {
            if node_index.insert(node.as_str(), i).is_some() {
                return Err(Error::Network(format!("duplicate node `{node}`")));
            }
        }
        let lookup_node = |name: &str| {
            node_index
                .get(name)
                .copied()
                .ok_or_else(|| Error::Network(format!("unknown node `{name}`")))
        };

        let mut edge_index = BTreeMap::new();
        let mut node_pairs = BTreeSet::new();
        let mut edges = Vec::with_capacity(config.edges.len());
        for (i, e) in config.edges.iter().enumerate() {
            let from = lookup_node(&e.from)?;
            let to = lookup_node(&e.to)?;
            if from == to {
                return Err(Error::Network(format!("edge `{}` is a self-loop", e.id)));
            }
            if !node_pairs.insert((from, to)) {
                return Err(Error::Network(format!(
                    "edge `{}` duplicates node pair ({}, {}); parallel edges are not representable",
                    e.id, e.from, e.to
                )));
            }
            if edge_index.insert(e.id.as_str(), i).is_some() {
                return Err(Error::Network(format!("duplicate edge id `{}`", e.id)));
            }
            edges.push(Edge {
                id: e.id.clone(),
                from,
                to,
            });
        }

        if config.od_pairs.is_empty() {
            return Err(Error::Network("no origin-destination pairs".into()));
        }

        let mut od_pairs = Vec::with_capacity(config.od_pairs.len());
        let mut paths = Vec::new();
        let mut path_ids = BTreeSet::new();
        for od in &config.od_pairs {
            let origin = lookup_node(&od.origin)?;
            let destination = lookup_node(&od.destination)?;
            if !(od.demand.is_finite() && od.demand > 0.0) {
                return Err(Error::Network(format!(
                    "demand for ({}, {}) must be positive, got {}",
                    od.origin, od.destination, od.demand
                )));
            }
            if od.paths.is_empty() {
                return Err(Error::Network(format!(
                    "OD pair ({}, {}) has no paths",
                    od.origin, od.destination
                )));
            }
            let start = paths.len();
            let mut seen = BTreeSet::new();
            for p in &od.paths {
                if !path_ids.insert(p.id.clone()) {
                    return Err(Error::Network(format!("duplicate path id `{}`", p.id)));
                }
                let edge_ids = p
                    .edges
                    .iter()
                    .map(|id| {
                        edge_index.get(id.as_str()).copied().ok_or_else(|| {
                            Error::Network(format!("path `{}` uses unknown edge `{id}`", p.id))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                check_walk(&p.id, &edge_ids, &edges, origin, destination, &config.nodes)?;
                if !seen.insert(edge_ids.clone()) {
                    return Err(Error::Network(format!(
                        "path `{}` duplicates another path of the same OD pair",
                        p.id
                    )));
                }
                paths.push(Path {
                    id: p.id.clone(),
                    edges: edge_ids,
                });
            }
            od_pairs.push(OdPair {
                origin,
                destination,
                demand: od.demand,
                paths: start..paths.len(),
            });
        }

        Ok(Network {
            nodes: config.nodes.clone(),
            edges,
            od_pairs,
            paths,
        })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn od_pairs(&self) -> &[OdPair] {
        &self.od_pairs
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn max_demand(&self) -> f64 {
        self.od_pairs.iter().map(|w| w.demand).fold(0.0, f64::max)
    }

    /// Uniform split of each OD demand over its paths.
    pub fn uniform_flow(&self) -> PathFlow {
        let mut flow = vec![0.0; self.num_paths()];
        for od in &self.od_pairs {
            let share = od.demand / od.paths.len() as f64;
            flow[od.paths.clone()].iter_mut().for_each(|x| *x = share);
        }
        PathFlow(flow)
    }

    /// Number of all-or-nothing assignments (vertices of the feasible set).
    pub fn vertex_count(&self) -> u128 {
        self.od_pairs
            .iter()
            .map(|w| w.paths.len() as u128)
            .product()
    }

    /// Enumerates every vertex of the product of scaled simplices.
    pub fn vertices(&self) -> impl Iterator<Item = PathFlow> + '_ {
        let sizes: Vec<usize> = self.od_pairs.iter().map(|w| w.paths.len()).collect();
        let total = self.vertex_count();
        (0..total).map(move |mut code| {
            let mut flow = vec![0.0; self.num_paths()];
            for (od, &k) in self.od_pairs.iter().zip(&sizes) {
                let pick = (code % k as u128) as usize;
                code /= k as u128;
                flow[od.paths.start + pick] = od.demand;
            }
            PathFlow(flow)
        })
    }
}

fn check_walk(
    path_id: &str,
    edges_on_path: &[usize],
    edges: &[Edge],
    origin: usize,
    destination: usize,
    names: &[String],
) -> Result<()> {
    let fail = |reason: String| Error::MalformedPath {
        path: path_id.to_string(),
        origin: names[origin].clone(),
        destination: names[destination].clone(),
        reason,
    };
    let Some(&first) = edges_on_path.first() else {
        return Err(fail("path has no edges".into()));
    };
    if edges[first].from != origin {
        return Err(fail(format!("first edge `{}` does not leave the origin", edges[first].id)));
    }
    for pair in edges_on_path.windows(2) {
        let (a, b) = (&edges[pair[0]], &edges[pair[1]]);
        if a.to != b.from {
            return Err(fail(format!("edge `{}` does not continue edge `{}`", b.id, a.id)));
        }
    }
    let last = &edges[*edges_on_path.last().unwrap()];
    if last.to != destination {
        return Err(fail(format!("last edge `{}` does not reach the destination", last.id)));
    }
    let unique: BTreeSet<_> = edges_on_path.iter().collect();
    if unique.len() != edges_on_path.len() {
        return Err(fail("path repeats an edge".into()));
    }
    Ok(())
}

/// Dense 0/1 edge-path incidence matrix, rows = edges, columns = paths.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<u8>,
}

impl IncidenceMatrix {
    pub fn build(network: &Network) -> Self {
        let rows = network.num_edges();
        let cols = network.num_paths();
        let mut entries = vec![0u8; rows * cols];
        for (p, path) in network.paths().iter().enumerate() {
            for &e in &path.edges {
                entries[e * cols + p] = 1;
            }
        }
        IncidenceMatrix {
            rows,
            cols,
            entries,
        }
    }

    pub fn num_edges(&self) -> usize {
        self.rows
    }

    pub fn num_paths(&self) -> usize {
        self.cols
    }

    pub fn get(&self, edge: usize, path: usize) -> u8 {
        self.entries[edge * self.cols + path]
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        self.entries.chunks(self.cols).map(<[u8]>::to_vec).collect()
    }

    /// `q = Λμ`.
    pub fn edge_flow(&self, flow: &[f64]) -> Result<EdgeFlow> {
        if flow.len() != self.cols {
            return Err(Error::Dimension {
                expected: self.cols,
                actual: flow.len(),
            });
        }
        Ok(EdgeFlow(self.apply(flow)))
    }

    /// `Λx` for any path-space vector (no feasibility assumed).
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.entries
            .chunks(self.cols)
            .map(|row| {
                row.iter()
                    .zip(x)
                    .filter(|(&a, _)| a == 1)
                    .map(|(_, &v)| v)
                    .sum()
            })
            .collect()
    }

    /// `Λᵀy` for an edge-space vector.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (row, &v) in self.entries.chunks(self.cols).zip(y) {
            for (o, &a) in out.iter_mut().zip(row) {
                if a == 1 {
                    *o += v;
                }
            }
        }
        out
    }
}

/// Flow per path; one scaled simplex slice per OD pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PathFlow(pub Vec<f64>);

impl PathFlow {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Clamps negatives and rescales each OD slice onto its demand when the
    /// slice has drifted past [`FEASIBILITY_TOL`]. Returns whether anything changed.
    pub fn renormalize(&mut self, network: &Network) -> bool {
        let mut changed = false;
        for od in network.od_pairs() {
            let slice = &mut self.0[od.paths.clone()];
            let negative = slice.iter().any(|&x| x < 0.0);
            let sum: f64 = slice.iter().map(|x| x.max(0.0)).sum();
            if negative || (sum - od.demand).abs() > FEASIBILITY_TOL * od.demand {
                changed = true;
                if sum > 0.0 {
                    slice
                        .iter_mut()
                        .for_each(|x| *x = x.max(0.0) * od.demand / sum);
                } else {
                    let share = od.demand / slice.len() as f64;
                    slice.iter_mut().for_each(|x| *x = share);
                }
            }
        }
        changed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFlow(pub Vec<f64>);

impl EdgeFlow {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FlowViolation {
    Dimension { expected: usize, actual: usize },
    Negative { path: String, value: f64 },
    NonFinite { path: String },
    Demand { od: usize, sum: f64, demand: f64 },
}

impl fmt::Display for FlowViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowViolation::Dimension { expected, actual } => {
                write!(f, "flow has {actual} entries, network has {expected} paths")
            }
            FlowViolation::Negative { path, value } => {
                write!(f, "negative flow {value} on path `{path}`")
            }
            FlowViolation::NonFinite { path } => write!(f, "non-finite flow on path `{path}`"),
            FlowViolation::Demand { od, sum, demand } => write!(
                f,
                "OD pair #{od}: flow sums to {sum} but demand is {demand} (off by {})",
                sum - demand
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowReport {
    pub violations: Vec<FlowViolation>,
}

impl FlowReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_flow(network: &Network, flow: &PathFlow) -> FlowReport {
    let mut violations = Vec::new();
    if flow.len() != network.num_paths() {
        violations.push(FlowViolation::Dimension {
            expected: network.num_paths(),
            actual: flow.len(),
        });
        return FlowReport { violations };
    }
    for (path, &x) in network.paths().iter().zip(flow.as_slice()) {
        if !x.is_finite() {
            violations.push(FlowViolation::NonFinite {
                path: path.id.clone(),
            });
        } else if x < 0.0 {
            violations.push(FlowViolation::Negative {
                path: path.id.clone(),
                value: x,
            });
        }
    }
    for (i, od) in network.od_pairs().iter().enumerate() {
        let sum: f64 = flow.as_slice()[od.paths.clone()].iter().sum();
        if (sum - od.demand).abs() > FEASIBILITY_TOL * od.demand {
            violations.push(FlowViolation::Demand {
                od: i,
                sum,
                demand: od.demand,
            });
        }
    }
    FlowReport { violations }
}
