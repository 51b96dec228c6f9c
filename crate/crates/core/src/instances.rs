//! Small desk-scale networks used by tests, the acceptance suite and the
//! shipped configs.

use std::collections::BTreeMap;

use crate::latency::{EdgeLatency, LatencyConfig};
use crate::network::{EdgeConfig, Network, NetworkConfig, OdConfig, PathConfig};

fn edge(id: &str, from: &str, to: &str) -> EdgeConfig {
    EdgeConfig {
        id: id.into(),
        from: from.into(),
        to: to.into(),
    }
}

fn path(id: &str, edges: &[&str]) -> PathConfig {
    PathConfig {
        id: id.into(),
        edges: edges.iter().map(|e| e.to_string()).collect(),
    }
}

fn nodes(names: &[&str]) -> Vec<String> {
    names.iter().map(|n| n.to_string()).collect()
}

fn latency(entries: &[(&str, f64, f64, f64)]) -> LatencyConfig {
    LatencyConfig {
        default: EdgeLatency::default(),
        edges: entries
            .iter()
            .map(|&(id, a, b, p)| (id.to_string(), EdgeLatency::new(a, b, p)))
            .collect::<BTreeMap<_, _>>(),
    }
}

/// Two disjoint two-hop routes `s→a→t` and `s→b→t`.
pub fn diamond_config(demand: f64) -> NetworkConfig {
    NetworkConfig {
        nodes: nodes(&["s", "a", "b", "t"]),
        edges: vec![
            edge("s-a", "s", "a"),
            edge("a-t", "a", "t"),
            edge("s-b", "s", "b"),
            edge("b-t", "b", "t"),
        ],
        od_pairs: vec![OdConfig {
            origin: "s".into(),
            destination: "t".into(),
            demand,
            paths: vec![path("P1", &["s-a", "a-t"]), path("P2", &["s-b", "b-t"])],
        }],
    }
}

pub fn diamond_network(demand: f64) -> Network {
    Network::from_config(&diamond_config(demand)).expect("diamond is valid")
}

pub fn single_edge_config(demand: f64) -> NetworkConfig {
    NetworkConfig {
        nodes: nodes(&["s", "t"]),
        edges: vec![edge("s-t", "s", "t")],
        od_pairs: vec![OdConfig {
            origin: "s".into(),
            destination: "t".into(),
            demand,
            paths: vec![path("P1", &["s-t"])],
        }],
    }
}

pub fn single_edge_network(demand: f64) -> Network {
    Network::from_config(&single_edge_config(demand)).expect("single edge is valid")
}

/// Diamond plus the shortcut `a→b`; third path is `s→a→b→t`.
pub fn braess_config(demand: f64) -> NetworkConfig {
    NetworkConfig {
        nodes: nodes(&["s", "a", "b", "t"]),
        edges: vec![
            edge("s-a", "s", "a"),
            edge("s-b", "s", "b"),
            edge("a-t", "a", "t"),
            edge("b-t", "b", "t"),
            edge("a-b", "a", "b"),
        ],
        od_pairs: vec![OdConfig {
            origin: "s".into(),
            destination: "t".into(),
            demand,
            paths: vec![
                path("P1", &["s-a", "a-t"]),
                path("P2", &["s-b", "b-t"]),
                path("P3", &["s-a", "a-b", "b-t"]),
            ],
        }],
    }
}

pub fn braess_network(demand: f64) -> Network {
    Network::from_config(&braess_config(demand)).expect("braess is valid")
}

/// Two OD pairs sharing edge `b-t`: `s→t` (demand 1) and `a→t` (demand 2).
pub fn two_od_config() -> NetworkConfig {
    NetworkConfig {
        nodes: nodes(&["s", "a", "b", "t"]),
        edges: vec![
            edge("s-a", "s", "a"),
            edge("a-t", "a", "t"),
            edge("s-b", "s", "b"),
            edge("b-t", "b", "t"),
            edge("a-b", "a", "b"),
        ],
        od_pairs: vec![
            OdConfig {
                origin: "s".into(),
                destination: "t".into(),
                demand: 1.0,
                paths: vec![path("P1", &["s-a", "a-t"]), path("P2", &["s-b", "b-t"])],
            },
            OdConfig {
                origin: "a".into(),
                destination: "t".into(),
                demand: 2.0,
                paths: vec![path("Q1", &["a-t"]), path("Q2", &["a-b", "b-t"])],
            },
        ],
    }
}

pub fn two_od_network() -> Network {
    Network::from_config(&two_od_config()).expect("two-OD network is valid")
}

/// All edges `l(q) = q`: the symmetric diamond, equilibrium `(0.5, 0.5)`.
pub fn diamond_symmetric_latency() -> LatencyConfig {
    latency(&[
        ("s-a", 0.0, 1.0, 1.0),
        ("a-t", 0.0, 1.0, 1.0),
        ("s-b", 0.0, 1.0, 1.0),
        ("b-t", 0.0, 1.0, 1.0),
    ])
}

/// Path latencies `2μ₁` and `μ₂ + 0.5`; interior equilibrium `(0.5, 0.5)`.
pub fn diamond_asymmetric_latency() -> LatencyConfig {
    latency(&[
        ("s-a", 0.0, 1.0, 1.0),
        ("a-t", 0.0, 1.0, 1.0),
        ("s-b", 0.5, 0.5, 1.0),
        ("b-t", 0.0, 0.5, 1.0),
    ])
}

/// Path latencies `2μ₁` and `μ₂ + 2.5`: the second route is dominated, so the
/// equilibrium `(1, 0)` sits on the boundary and the uniform start is not
/// optimal.
pub fn diamond_dominated_latency() -> LatencyConfig {
    latency(&[
        ("s-a", 0.0, 1.0, 1.0),
        ("a-t", 0.0, 1.0, 1.0),
        ("s-b", 1.25, 0.5, 1.0),
        ("b-t", 1.25, 0.5, 1.0),
    ])
}

/// Braess coefficients with an interior equilibrium using all three routes.
pub fn braess_latency() -> LatencyConfig {
    latency(&[
        ("s-a", 0.0, 1.0, 1.0),
        ("s-b", 1.0, 0.2, 1.0),
        ("a-t", 1.0, 0.2, 1.0),
        ("b-t", 0.0, 1.0, 1.0),
        ("a-b", 0.1, 0.5, 2.0),
    ])
}

pub fn single_edge_latency(a: f64, b: f64, p: f64) -> LatencyConfig {
    latency(&[("s-t", a, b, p)])
}

pub fn two_od_latency() -> LatencyConfig {
    latency(&[
        ("s-a", 0.2, 1.0, 1.0),
        ("a-t", 0.5, 0.5, 2.0),
        ("s-b", 0.1, 0.8, 1.0),
        ("b-t", 0.3, 0.4, 1.5),
        ("a-b", 0.4, 1.0, 1.0),
    ])
}
