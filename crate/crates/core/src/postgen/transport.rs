//! Exact balanced transportation problems via successive shortest paths.

use crate::error::{Error, Result};

/// A balanced transportation problem with integer marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportProblem {
    supplies: Vec<u64>,
    demands: Vec<u64>,
    costs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution {
    pub objective: f64,
    /// `flow[i][j]` units shipped from supply `i` to demand `j`.
    pub flow: Vec<Vec<u64>>,
}

impl TransportProblem {
    pub fn new(supplies: Vec<u64>, demands: Vec<u64>, costs: Vec<Vec<f64>>) -> Result<Self> {
        if supplies.is_empty() || demands.is_empty() {
            return Err(Error::InvalidTransport("empty marginals".into()));
        }
        if supplies.iter().chain(&demands).any(|&v| v == 0) {
            return Err(Error::InvalidTransport("marginals must be positive".into()));
        }
        if costs.len() != supplies.len() || costs.iter().any(|row| row.len() != demands.len()) {
            return Err(Error::InvalidTransport(format!(
                "cost matrix must be {}x{}",
                supplies.len(),
                demands.len()
            )));
        }
        if costs.iter().flatten().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidTransport(
                "costs must be finite and nonnegative".into(),
            ));
        }
        let supply: u64 = supplies.iter().sum();
        let demand: u64 = demands.iter().sum();
        if supply != demand {
            return Err(Error::MarginalMismatch { supply, demand });
        }
        Ok(TransportProblem {
            supplies,
            demands,
            costs,
        })
    }

    pub fn supplies(&self) -> &[u64] {
        &self.supplies
    }

    pub fn demands(&self) -> &[u64] {
        &self.demands
    }

    pub fn costs(&self) -> &[Vec<f64>] {
        &self.costs
    }

    pub fn total(&self) -> u64 {
        self.supplies.iter().sum()
    }

    /// Minimum-cost flow on the dense bipartite graph
    /// `source -> supplies -> demands -> sink` using Dijkstra with node
    /// potentials. Every augmentation ships at least one integer unit.
    pub fn solve(&self) -> TransportSolution {
        let (a, b) = (self.supplies.len(), self.demands.len());
        // Node layout: supplies 0..a, demands a..a+b, sink a+b. The source
        // is implicit: distance 0 to every supply with remaining stock.
        let sink = a + b;
        let nodes = a + b + 1;
        let mut rem_supply = self.supplies.clone();
        let mut rem_demand = self.demands.clone();
        let mut flow = vec![vec![0u64; b]; a];
        let mut potential = vec![0.0f64; nodes];
        let mut remaining = self.total();

        let mut dist = vec![f64::INFINITY; nodes];
        let mut parent = vec![usize::MAX; nodes];
        let mut done = vec![false; nodes];

        while remaining > 0 {
            dist.fill(f64::INFINITY);
            parent.fill(usize::MAX);
            done.fill(false);
            for i in 0..a {
                if rem_supply[i] > 0 {
                    dist[i] = 0.0;
                }
            }
            while let Some(u) = (0..nodes)
                .filter(|&v| !done[v] && dist[v].is_finite())
                .min_by(|&x, &y| dist[x].total_cmp(&dist[y]))
            {
                done[u] = true;
                if u == sink {
                    break;
                }
                let mut relax = |v: usize, cost: f64| {
                    let reduced = (cost + potential[u] - potential[v]).max(0.0);
                    let nd = dist[u] + reduced;
                    if nd < dist[v] {
                        dist[v] = nd;
                        parent[v] = u;
                    }
                };
                if u < a {
                    for j in 0..b {
                        relax(a + j, self.costs[u][j]);
                    }
                } else {
                    let j = u - a;
                    for (i, row) in flow.iter().enumerate() {
                        if row[j] > 0 {
                            relax(i, -self.costs[i][j]);
                        }
                    }
                    if rem_demand[j] > 0 {
                        relax(sink, 0.0);
                    }
                }
            }
            debug_assert!(dist[sink].is_finite(), "balanced problem always has a path");
            let bound = dist[sink];
            for v in 0..nodes {
                potential[v] += dist[v].min(bound);
            }

            // Walk back from the sink to find the bottleneck.
            let mut path = vec![sink];
            let mut v = sink;
            while parent[v] != usize::MAX {
                v = parent[v];
                path.push(v);
            }
            path.reverse();
            let first = path[0];
            let last_demand = path[path.len() - 2] - a;
            let mut delta = rem_supply[first].min(rem_demand[last_demand]);
            for edge in path.windows(2) {
                let (u, w) = (edge[0], edge[1]);
                if u >= a && u < sink && w < a {
                    delta = delta.min(flow[w][u - a]);
                }
            }
            for edge in path.windows(2) {
                let (u, w) = (edge[0], edge[1]);
                if u < a {
                    flow[u][w - a] += delta;
                } else if w < a {
                    flow[w][u - a] -= delta;
                }
            }
            rem_supply[first] -= delta;
            rem_demand[last_demand] -= delta;
            remaining -= delta;
        }

        let objective = flow
            .iter()
            .zip(&self.costs)
            .flat_map(|(f, c)| f.iter().zip(c))
            .map(|(&f, &c)| f as f64 * c)
            .sum();
        TransportSolution { objective, flow }
    }
}

/// Convenience wrapper: validate and solve.
pub fn solve_transport(
    supplies: Vec<u64>,
    demands: Vec<u64>,
    costs: Vec<Vec<f64>>,
) -> Result<TransportSolution> {
    Ok(TransportProblem::new(supplies, demands, costs)?.solve())
}
