//! Team orienteering with time windows, as a special case.
//!
//! A [`ToptwInstance`] maps onto the coalition model with one location per
//! node, unit workloads, single-agent coalitions of unit value and no soft
//! deadline. [`toptw_oracle`] solves the original problem by route
//! enumeration so the mapping can be checked against [`super::solve_exact`].
//!
//! Time convention shared by both sides: a route starts at time 0 at the
//! start node, and serving node `j` after node `i` (served at `s_i`) happens
//! at `max(s_i + travel(i, j) + 1, earliest_j)`, which must not exceed
//! `latest_j`. Waiting is free and the route need not return to the end node.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{units_ceil, Agent, Instance, Location, ModelError, NodeDemand, PrecedenceDag, Time, TravelModel};
use crate::rng;
use crate::values::ValueSpec;

/// Oracle limits.
pub const MAX_ORACLE_NODES: usize = 8;
pub const MAX_ORACLE_AGENTS: usize = 3;

#[derive(Debug, Error)]
pub enum ToptwError {
    #[error("toptw instance: {0}")]
    Invalid(String),
    #[error("oracle limited to {MAX_ORACLE_NODES} intermediate nodes and {MAX_ORACLE_AGENTS} agents, got {nodes} and {agents}")]
    TooLarge { nodes: usize, agents: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToptwNode {
    pub profit: f64,
    pub earliest: Time,
    pub latest: Time,
}

/// Nodes double as locations: `travel[i][j]` is the time from node `i` to
/// node `j`, service time at `j` included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToptwInstance {
    pub nodes: Vec<ToptwNode>,
    pub start_node: usize,
    pub end_node: usize,
    pub travel: Vec<Vec<Time>>,
    pub n_agents: usize,
}

impl ToptwInstance {
    pub fn validate(&self) -> Result<(), ToptwError> {
        let n = self.nodes.len();
        let bad = |m: String| Err(ToptwError::Invalid(m));
        if self.start_node >= n || self.end_node >= n || self.start_node == self.end_node {
            return bad(format!("start {} and end {} must be distinct node ids below {n}", self.start_node, self.end_node));
        }
        if self.n_agents == 0 {
            return bad("needs at least one agent".into());
        }
        if self.travel.len() != n || self.travel.iter().any(|r| r.len() != n) {
            return bad(format!("travel matrix must be {n}x{n}"));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.earliest > node.latest || !node.profit.is_finite() || node.profit < 0.0 {
                return bad(format!("node {i} has an invalid window or profit"));
            }
        }
        for v in [self.start_node, self.end_node] {
            if self.nodes[v].profit != 0.0 {
                return bad(format!("node {v} is a depot and must have zero profit"));
            }
        }
        Ok(())
    }

    /// Node ids other than the start and end.
    pub fn intermediates(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&v| v != self.start_node && v != self.end_node)
            .collect()
    }

    fn rho(&self, i: usize, j: usize) -> Time {
        if i == j {
            0
        } else {
            self.travel[i][j]
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self, ToptwError> {
        let t: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        t.validate()?;
        Ok(t)
    }

    /// Parses the whitespace column layout `id x y service profit open
    /// close`, first data row being the depot. Lines that do not hold seven
    /// numbers (headers, counts) are ignored. The depot is used as both start
    /// and end, so the end node is appended as a copy of it.
    pub fn from_solomon(text: &str, n_agents: usize) -> Result<Self, ToptwError> {
        struct Row {
            x: f64,
            y: f64,
            service: f64,
            profit: f64,
            open: f64,
            close: f64,
        }
        let rows: Vec<Row> = text
            .lines()
            .filter_map(|line| {
                let nums: Vec<f64> = line
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .ok()?;
                (nums.len() >= 7).then(|| Row {
                    x: nums[1],
                    y: nums[2],
                    service: nums[3],
                    profit: nums[4],
                    open: nums[5],
                    close: nums[6],
                })
            })
            .collect();
        if rows.is_empty() {
            return Err(ToptwError::Invalid("no data rows".into()));
        }
        let mut idx: Vec<usize> = (0..rows.len()).collect();
        idx.push(0);
        let nodes: Vec<ToptwNode> = idx
            .iter()
            .enumerate()
            .map(|(k, &r)| {
                let row = &rows[r];
                let depot = r == 0;
                ToptwNode {
                    profit: if depot { 0.0 } else { row.profit },
                    earliest: if depot && k > 0 { 0 } else { row.open.max(0.0).ceil() as Time },
                    latest: row.close.max(0.0).floor() as Time,
                }
            })
            .collect();
        let travel = idx
            .iter()
            .map(|&a| {
                idx.iter()
                    .map(|&b| {
                        if a == b {
                            return 0;
                        }
                        let (p, q) = (&rows[a], &rows[b]);
                        units_ceil(((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt() + q.service)
                    })
                    .collect()
            })
            .collect();
        let t = Self {
            end_node: nodes.len() - 1,
            nodes,
            start_node: 0,
            travel,
            n_agents,
        };
        t.validate()?;
        Ok(t)
    }
}

/// Coalition-model instance equivalent to `toptw`.
///
/// Intermediate nodes get unit workload, the start and end nodes zero
/// workload so they are complete from time 0 and never hold an agent.
/// Coalitions are single agents of unit value, the soft deadline equals the
/// hard one, every agent starts at the start node's location, and the start
/// node precedes and the end node follows every intermediate node.
pub fn reduce_toptw(toptw: &ToptwInstance) -> Result<Instance, ToptwError> {
    toptw.validate()?;
    let n = toptw.nodes.len();
    let locations = (0..n)
        .map(|id| Location {
            id,
            coords: [id as f64, 0.0],
        })
        .collect();
    let agents = (0..toptw.n_agents)
        .map(|id| Agent {
            id,
            initial_location: toptw.start_node,
            speed: 1.0,
        })
        .collect();
    let horizon = toptw.nodes.iter().map(|v| v.latest).max().unwrap_or(0);
    let nodes = toptw
        .nodes
        .iter()
        .enumerate()
        .map(|(v, node)| {
            let depot = v == toptw.start_node || v == toptw.end_node;
            if depot {
                NodeDemand::new(vec![v], 0.0, 0.0, 0, horizon, horizon)
            } else {
                NodeDemand::new(vec![v], 1.0, node.profit, node.earliest, node.latest, node.latest)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mids = toptw.intermediates();
    let edges = if mids.is_empty() {
        vec![(toptw.start_node, toptw.end_node)]
    } else {
        mids.iter()
            .flat_map(|&v| [(toptw.start_node, v), (v, toptw.end_node)])
            .collect()
    };
    let travel = TravelModel::Matrix {
        times: (0..n).map(|i| (0..n).map(|j| toptw.rho(i, j)).collect()).collect(),
    };
    let inst = Instance::new(locations, agents, nodes, PrecedenceDag::new(n, edges)?, travel, ValueSpec::default())?;
    Ok(inst.with_singleton_coalitions(true))
}

/// Best total profit over all sets of at most `n_agents` disjoint feasible
/// routes.
pub fn toptw_oracle(toptw: &ToptwInstance) -> Result<f64, ToptwError> {
    toptw.validate()?;
    let mids = toptw.intermediates();
    if mids.len() > MAX_ORACLE_NODES || toptw.n_agents > MAX_ORACLE_AGENTS {
        return Err(ToptwError::TooLarge {
            nodes: mids.len(),
            agents: toptw.n_agents,
        });
    }

    struct Search<'a> {
        t: &'a ToptwInstance,
        mids: Vec<usize>,
        used: Vec<bool>,
        best: f64,
    }

    impl Search<'_> {
        fn left(&self) -> f64 {
            self.mids
                .iter()
                .enumerate()
                .filter(|(k, _)| !self.used[*k])
                .map(|(_, &v)| self.t.nodes[v].profit)
                .sum()
        }

        /// Extends the route of `agent`, currently at `at` since `time`.
        fn route(&mut self, agent: usize, at: usize, time: Time, profit: f64) {
            if profit > self.best {
                self.best = profit;
            }
            if profit + self.left() <= self.best {
                return;
            }
            for k in 0..self.mids.len() {
                if self.used[k] {
                    continue;
                }
                let v = self.mids[k];
                let node = &self.t.nodes[v];
                let s = (time + self.t.rho(at, v) + 1).max(node.earliest);
                if s > node.latest {
                    continue;
                }
                self.used[k] = true;
                self.route(agent, v, s, profit + node.profit);
                self.used[k] = false;
            }
            if agent + 1 < self.t.n_agents {
                self.route(agent + 1, self.t.start_node, 0, profit);
            }
        }
    }

    let mut s = Search {
        t: toptw,
        used: vec![false; mids.len()],
        mids,
        best: 0.0,
    };
    s.route(0, toptw.start_node, 0, 0.0);
    Ok(s.best)
}

/// Random instance with integer profits and travel times on a small grid.
pub fn random_toptw(seed: u64, intermediates: usize, n_agents: usize) -> ToptwInstance {
    let mut r = rng::stream(seed, &[0x7074]);
    let n = intermediates + 2;
    let pts: Vec<(i64, i64)> = (0..n)
        .map(|v| {
            if v == n - 1 {
                (0, 0)
            } else {
                (r.random_range(0..8), r.random_range(0..8))
            }
        })
        .collect();
    let mut nodes: Vec<ToptwNode> = (0..n)
        .map(|_| {
            let earliest = r.random_range(0..12);
            ToptwNode {
                profit: r.random_range(1..=9) as f64,
                earliest,
                latest: earliest + r.random_range(1..=8),
            }
        })
        .collect();
    let horizon = nodes.iter().map(|v| v.latest).max().unwrap_or(0);
    for v in [0, n - 1] {
        nodes[v] = ToptwNode {
            profit: 0.0,
            earliest: 0,
            latest: horizon,
        };
    }
    let travel = pts
        .iter()
        .map(|&(ax, ay)| {
            pts.iter()
                .map(|&(bx, by)| units_ceil((((ax - bx).pow(2) + (ay - by).pow(2)) as f64).sqrt()))
                .collect()
        })
        .collect();
    ToptwInstance {
        nodes,
        start_node: 0,
        end_node: n - 1,
        travel,
        n_agents,
    }
}
