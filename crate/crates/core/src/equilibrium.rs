//! Mean Wardrop equilibria as minimizers of the Beckmann potential.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::latency::{beckmann_potential, mean_path_latency, LatencySpec};
use crate::network::{IncidenceMatrix, Network, PathFlow};

/// Paths carrying less than this fraction of their OD demand count as unused
/// in the Wardrop residual.
pub const SUPPORT_TOL: f64 = 1e-9;

/// Largest path count accepted by the brute-force grid.
pub const GRID_MAX_PATHS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumSolution {
    pub flow: PathFlow,
    pub potential: f64,
    pub duality_gap: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `⟨∇Φ(μ), μ − s⟩` with `s` the all-or-nothing response; also returns `s`.
fn fw_gap(network: &Network, flow: &[f64], grad: &[f64]) -> (f64, Vec<f64>) {
    let mut target = vec![0.0; flow.len()];
    for od in network.od_pairs() {
        let best = cheapest(grad, od.paths.clone());
        target[best] = od.demand;
    }
    let gap = grad
        .iter()
        .zip(flow.iter().zip(&target))
        .map(|(g, (x, s))| g * (x - s))
        .sum();
    (gap, target)
}

fn cheapest(grad: &[f64], paths: std::ops::Range<usize>) -> usize {
    paths
        .min_by(|&a, &b| grad[a].total_cmp(&grad[b]))
        .expect("every OD pair has a path")
}

/// Exact minimization of `γ ↦ Φ(μ + γ·dir)` on `[0, 1]` by bisection on the
/// derivative `⟨∇Φ(μ + γ·dir), dir⟩`, which is nondecreasing.
fn line_search(spec: &LatencySpec, incidence: &IncidenceMatrix, flow: &[f64], dir: &[f64]) -> f64 {
    let slope = |gamma: f64| {
        let point: Vec<f64> = flow.iter().zip(dir).map(|(x, d)| x + gamma * d).collect();
        mean_path_latency(spec, incidence, &point)
            .iter()
            .zip(dir)
            .map(|(g, d)| g * d)
            .sum::<f64>()
    };
    if slope(1.0) <= 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Frank–Wolfe on `Φ` over `Δ` with pairwise steps taken one OD pair at a
/// time: shift mass from the most expensive used path onto the cheapest path,
/// with exact line search over the whole away mass. A full step empties the
/// away path, so boundary equilibria are reached exactly.
pub fn solve_mwe_frank_wolfe(
    spec: &LatencySpec,
    network: &Network,
    tol: f64,
    max_iters: usize,
) -> Result<EquilibriumSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "equilibrium tolerance must be positive, got {tol}"
        )));
    }
    let incidence = IncidenceMatrix::build(network);
    let mut flow = network.uniform_flow().0;
    let mut iterations = 0;
    let mut gap;
    loop {
        let grad = mean_path_latency(spec, &incidence, &flow);
        gap = fw_gap(network, &flow, &grad).0;
        if gap <= tol || iterations >= max_iters {
            break;
        }
        iterations += 1;
        for od in network.od_pairs() {
            let grad = mean_path_latency(spec, &incidence, &flow);
            let to = cheapest(&grad, od.paths.clone());
            let away = od
                .paths
                .clone()
                .filter(|&p| flow[p] > 0.0)
                .max_by(|&a, &b| grad[a].total_cmp(&grad[b]))
                .unwrap_or(to);
            if away == to || grad[away] <= grad[to] {
                continue;
            }
            let mass = flow[away];
            let mut dir = vec![0.0; flow.len()];
            dir[away] = -mass;
            dir[to] = mass;
            let gamma = line_search(spec, &incidence, &flow, &dir);
            if gamma == 1.0 {
                flow[away] = 0.0;
                flow[to] += mass;
            } else {
                flow[away] -= gamma * mass;
                flow[to] += gamma * mass;
            }
        }
        let mut pf = PathFlow(flow);
        pf.renormalize(network);
        flow = pf.0;
    }
    let potential = beckmann_potential(spec, &incidence, &flow);
    let flow = PathFlow(flow);
    let residual = wardrop_residual(spec, network, &flow);
    Ok(EquilibriumSolution {
        flow,
        potential,
        duality_gap: gap.max(0.0),
        residual,
        iterations,
        converged: gap <= tol,
    })
}

/// Compositions of `n` into `k` nonnegative parts, in lexicographic order.
fn compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for first in 0..=n {
        for mut rest in compositions(n - first, k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Exhaustive search over the grid with spacing `resolution·m_w` in every
/// OD slice. Independent of the Frank–Wolfe code path.
pub fn solve_mwe_grid(spec: &LatencySpec, network: &Network, resolution: f64) -> Result<EquilibriumSolution> {
    if network.num_paths() > GRID_MAX_PATHS {
        return Err(Error::GridTooLarge {
            max: GRID_MAX_PATHS,
            actual: network.num_paths(),
        });
    }
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "grid resolution must lie in (0, 1], got {resolution}"
        )));
    }
    let steps = (1.0 / resolution).round() as usize;
    let incidence = IncidenceMatrix::build(network);
    let slices: Vec<Vec<Vec<f64>>> = network
        .od_pairs()
        .iter()
        .map(|od| {
            compositions(steps, od.paths.len())
                .into_iter()
                .map(|c| c.iter().map(|&i| od.demand * i as f64 / steps as f64).collect())
                .collect()
        })
        .collect();

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut index = vec![0usize; slices.len()];
    let mut flow = vec![0.0; network.num_paths()];
    let mut evaluated = 0usize;
    loop {
        for (od, (&i, options)) in network.od_pairs().iter().zip(index.iter().zip(&slices)) {
            flow[od.paths.clone()].copy_from_slice(&options[i]);
        }
        evaluated += 1;
        let value = beckmann_potential(spec, &incidence, &flow);
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, flow.clone()));
        }
        // odometer increment over OD slices
        let mut pos = 0;
        loop {
            if pos == index.len() {
                let (potential, flow) = best.expect("grid is nonempty");
                let flow = PathFlow(flow);
                let grad = mean_path_latency(spec, &incidence, flow.as_slice());
                let (gap, _) = fw_gap(network, flow.as_slice(), &grad);
                let residual = wardrop_residual(spec, network, &flow);
                return Ok(EquilibriumSolution {
                    flow,
                    potential,
                    duality_gap: gap.max(0.0),
                    residual,
                    iterations: evaluated,
                    converged: true,
                });
            }
            index[pos] += 1;
            if index[pos] < slices[pos].len() {
                break;
            }
            index[pos] = 0;
            pos += 1;
        }
    }
}

/// Largest excess of a used path's mean latency over the cheapest path of its
/// OD pair. Zero exactly at a Wardrop equilibrium.
pub fn wardrop_residual(spec: &LatencySpec, network: &Network, flow: &PathFlow) -> f64 {
    let incidence = IncidenceMatrix::build(network);
    let lat = mean_path_latency(spec, &incidence, flow.as_slice());
    network
        .od_pairs()
        .iter()
        .map(|od| {
            let min = od.paths.clone().map(|p| lat[p]).fold(f64::INFINITY, f64::min);
            od.paths
                .clone()
                .filter(|&p| flow.0[p] > SUPPORT_TOL * od.demand)
                .map(|p| lat[p] - min)
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use crate::latency::random_feasible_flow;
    use crate::TrialRng;
    use rand::SeedableRng;

    fn spec(net: &Network, cfg: crate::latency::LatencyConfig) -> LatencySpec {
        LatencySpec::from_config(&cfg, net).unwrap()
    }

    #[test]
    fn symmetric_diamond() {
        let net = instances::diamond_network(1.0);
        let s = spec(&net, instances::diamond_symmetric_latency());
        let sol = solve_mwe_frank_wolfe(&s, &net, 1e-8, 10_000).unwrap();
        assert!(sol.converged);
        assert!((sol.flow.0[0] - 0.5).abs() < 1e-6);
        assert!((sol.potential - 0.5).abs() < 1e-6);
        assert!(sol.residual <= 1e-5);
    }

    #[test]
    fn asymmetric_diamond_equalizes_latencies() {
        let net = instances::diamond_network(1.0);
        let s = spec(&net, instances::diamond_asymmetric_latency());
        let sol = solve_mwe_frank_wolfe(&s, &net, 1e-10, 10_000).unwrap();
        assert!((sol.flow.0[0] - 0.5).abs() < 1e-6);
        let inc = IncidenceMatrix::build(&net);
        let lat = mean_path_latency(&s, &inc, sol.flow.as_slice());
        assert!((lat[0] - 1.0).abs() < 1e-6 && (lat[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn dominated_route_is_emptied() {
        let net = instances::diamond_network(1.0);
        let s = spec(&net, instances::diamond_dominated_latency());
        let sol = solve_mwe_frank_wolfe(&s, &net, 1e-8, 10_000).unwrap();
        assert_eq!(sol.flow.0, vec![1.0, 0.0]);
        assert_eq!(sol.residual, 0.0);
    }

    #[test]
    fn single_path_is_trivial() {
        let net = instances::single_edge_network(2.0);
        let s = spec(&net, instances::single_edge_latency(1.0, 2.0, 1.0));
        let sol = solve_mwe_frank_wolfe(&s, &net, 1e-8, 10).unwrap();
        assert_eq!(sol.flow.0, vec![2.0]);
        assert_eq!(sol.potential, 2.0 + 4.0);
        let grid = solve_mwe_grid(&s, &net, 1e-3).unwrap();
        assert_eq!(grid.potential, sol.potential);
        assert_eq!(wardrop_residual(&s, &net, &sol.flow), 0.0);
    }

    #[test]
    fn frank_wolfe_matches_grid() {
        let cases = [
            (instances::diamond_network(1.0), instances::diamond_symmetric_latency()),
            (instances::diamond_network(1.0), instances::diamond_asymmetric_latency()),
            (instances::braess_network(1.0), instances::braess_latency()),
            (instances::two_od_network(), instances::two_od_latency()),
        ];
        for (net, cfg) in cases {
            let s = spec(&net, cfg);
            let fw = solve_mwe_frank_wolfe(&s, &net, 1e-9, 100_000).unwrap();
            let resolution = if net.num_paths() > 2 { 2e-3 } else { 1e-3 };
            let grid = solve_mwe_grid(&s, &net, resolution).unwrap();
            assert!(fw.converged, "gap {} iters {} flow {:?}", fw.duality_gap, fw.iterations, fw.flow);
            assert!((fw.potential - grid.potential).abs() < 1e-3);
            assert!(fw.potential <= grid.potential + 1e-12);
            assert!(fw.residual <= 1e-5, "residual {}", fw.residual);
        }
    }

    #[test]
    fn braess_equilibrium_uses_every_route() {
        let net = instances::braess_network(1.0);
        let s = spec(&net, instances::braess_latency());
        let sol = solve_mwe_frank_wolfe(&s, &net, 1e-10, 100_000).unwrap();
        assert!(sol.flow.0.iter().all(|&x| x > 0.05), "{:?}", sol.flow);
    }

    #[test]
    fn residual_examples() {
        let net = instances::diamond_network(1.0);
        let s = spec(&net, instances::diamond_symmetric_latency());
        assert_eq!(wardrop_residual(&s, &net, &PathFlow(vec![0.5, 0.5])), 0.0);
        assert_eq!(wardrop_residual(&s, &net, &PathFlow(vec![1.0, 0.0])), 2.0);
    }

    #[test]
    fn minimality_witness() {
        let net = instances::braess_network(1.0);
        let s = spec(&net, instances::braess_latency());
        let sol = solve_mwe_frank_wolfe(&s, &net, 1e-10, 100_000).unwrap();
        let inc = IncidenceMatrix::build(&net);
        let mut rng = TrialRng::seed_from_u64(5);
        for _ in 0..1000 {
            let mu = random_feasible_flow(&net, &mut rng);
            assert!(beckmann_potential(&s, &inc, mu.as_slice()) >= sol.potential - 1e-12);
        }
    }

    #[test]
    fn grid_rejects_large_networks() {
        let mut cfg = instances::braess_config(1.0);
        cfg.edges.push(crate::network::EdgeConfig {
            id: "b-a".into(),
            from: "b".into(),
            to: "a".into(),
        });
        cfg.od_pairs[0].paths.push(crate::network::PathConfig {
            id: "P4".into(),
            edges: vec!["s-b".into(), "b-a".into(), "a-t".into()],
        });
        cfg.od_pairs[0].paths.push(crate::network::PathConfig {
            id: "P5".into(),
            edges: vec!["s-a".into(), "a-b".into(), "b-a".into(), "a-t".into()],
        });
        let net = Network::from_config(&cfg).unwrap();
        let s = LatencySpec::from_config(&Default::default(), &net).unwrap();
        assert!(matches!(
            solve_mwe_grid(&s, &net, 0.1),
            Err(Error::GridTooLarge { max: 4, actual: 5 })
        ));
    }
}
