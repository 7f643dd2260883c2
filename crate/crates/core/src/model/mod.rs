//! Core domain types: locations, agents, node demands, precedences and the
//! problem instance, plus travel times and the objective.

mod coalition;
pub(crate) mod objective;
mod solution;
mod travel;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::values::{CoalitionValueModel, ValueKind, ValueSpec};

pub use coalition::Coalition;
pub use objective::{completion_status, penalty, score, score_with, visit_score, Accrual, Completion};
pub use solution::{NodeVisit, Solution, SolveMetadata, WorkEntry};
pub use travel::{haversine, TravelModel, EARTH_RADIUS_M};
pub(crate) use travel::units_ceil;

/// Discrete time on a grid with base unit 1.
pub type Time = u64;
pub type NodeId = usize;
pub type AgentId = usize;
pub type LocationId = usize;

/// Absolute tolerance for every real-valued comparison.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("unknown location id {0}")]
    UnknownLocation(LocationId),
    #[error("unknown agent id {0}")]
    UnknownAgent(AgentId),
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("location {id} has invalid geographic coordinates ({lat}, {lon})")]
    InvalidCoordinates { id: LocationId, lat: f64, lon: f64 },
    #[error("ids must be dense: expected {expected}, found {found}")]
    NonDenseId { expected: usize, found: usize },
    #[error("agent {0} must have a positive speed")]
    NonPositiveSpeed(AgentId),
    #[error("time window must satisfy earliest <= soft_latest <= hard_latest, got [{0}, {1}, {2}]")]
    InvalidWindow(Time, Time, Time),
    #[error("node demand needs at least one location")]
    NoLocations,
    #[error("workload and profit must be finite and non-negative")]
    NegativeDemand,
    #[error("precedence graph contains a cycle through node {0}")]
    Cycle(NodeId),
    #[error("precedence ({0}, {2}) is implied by ({0}, {1}) and ({1}, {2})")]
    TransitiveEdge(NodeId, NodeId, NodeId),
    #[error("precedence edge ({0}, {1}) is a self loop")]
    SelfLoop(NodeId, NodeId),
    #[error("instance needs at least one agent")]
    NoAgents,
    #[error("t_max must be {expected} (largest hard latest time), got {found}")]
    WrongTmax { expected: Time, found: Time },
    #[error("travel matrix must be {0}x{0} with a zero diagonal")]
    BadMatrix(usize),
    #[error("time {t} lies outside the window [{earliest}, {hard_latest}]")]
    OutsideWindow {
        t: Time,
        earliest: Time,
        hard_latest: Time,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub id: LocationId,
    /// (latitude, longitude) in geo mode, (x, y) in grid mode.
    pub coords: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: AgentId,
    pub initial_location: LocationId,
    pub speed: f64,
}

/// What a node asks for: where it can be worked, how much work, its profit
/// and its time window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDemand")]
pub struct NodeDemand {
    pub locations: Vec<LocationId>,
    pub workload: f64,
    pub profit: f64,
    pub earliest: Time,
    pub soft_latest: Time,
    pub hard_latest: Time,
}

#[derive(Deserialize)]
struct RawDemand {
    locations: Vec<LocationId>,
    workload: f64,
    profit: f64,
    earliest: Time,
    soft_latest: Time,
    hard_latest: Time,
}

impl TryFrom<RawDemand> for NodeDemand {
    type Error = ModelError;

    fn try_from(r: RawDemand) -> Result<Self, Self::Error> {
        NodeDemand::new(r.locations, r.workload, r.profit, r.earliest, r.soft_latest, r.hard_latest)
    }
}

impl NodeDemand {
    pub fn new(
        locations: Vec<LocationId>,
        workload: f64,
        profit: f64,
        earliest: Time,
        soft_latest: Time,
        hard_latest: Time,
    ) -> Result<Self, ModelError> {
        if !(earliest <= soft_latest && soft_latest <= hard_latest) {
            return Err(ModelError::InvalidWindow(earliest, soft_latest, hard_latest));
        }
        if locations.is_empty() {
            return Err(ModelError::NoLocations);
        }
        if !(workload.is_finite() && workload >= 0.0 && profit.is_finite() && profit >= 0.0) {
            return Err(ModelError::NegativeDemand);
        }
        Ok(Self {
            locations,
            workload,
            profit,
            earliest,
            soft_latest,
            hard_latest,
        })
    }

    pub fn in_window(&self, t: Time) -> bool {
        self.earliest <= t && t <= self.hard_latest
    }

    /// Zero-workload nodes need no work and count as complete from `earliest`.
    pub fn is_trivial(&self) -> bool {
        self.workload <= EPS
    }
}

/// Directed acyclic precedence graph over node ids, without edges that are
/// implied by two consecutive ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDag")]
pub struct PrecedenceDag {
    edges: Vec<(NodeId, NodeId)>,
    node_count: usize,
    #[serde(skip)]
    preds: Vec<Vec<NodeId>>,
    #[serde(skip)]
    succs: Vec<Vec<NodeId>>,
}

#[derive(Deserialize)]
struct RawDag {
    edges: Vec<(NodeId, NodeId)>,
    node_count: usize,
}

impl TryFrom<RawDag> for PrecedenceDag {
    type Error = ModelError;

    fn try_from(r: RawDag) -> Result<Self, Self::Error> {
        PrecedenceDag::new(r.node_count, r.edges)
    }
}

impl PrecedenceDag {
    pub fn empty(node_count: usize) -> Self {
        Self {
            edges: Vec::new(),
            node_count,
            preds: vec![Vec::new(); node_count],
            succs: vec![Vec::new(); node_count],
        }
    }

    pub fn new(node_count: usize, mut edges: Vec<(NodeId, NodeId)>) -> Result<Self, ModelError> {
        edges.sort_unstable();
        edges.dedup();
        let mut preds = vec![Vec::new(); node_count];
        let mut succs = vec![Vec::new(); node_count];
        for &(a, b) in &edges {
            if a >= node_count {
                return Err(ModelError::UnknownNode(a));
            }
            if b >= node_count {
                return Err(ModelError::UnknownNode(b));
            }
            if a == b {
                return Err(ModelError::SelfLoop(a, b));
            }
            succs[a].push(b);
            preds[b].push(a);
        }
        for &(a, b) in &edges {
            for &c in &succs[b] {
                if succs[a].contains(&c) {
                    return Err(ModelError::TransitiveEdge(a, b, c));
                }
            }
        }
        let dag = Self {
            edges,
            node_count,
            preds,
            succs,
        };
        dag.topological_order(|v| v)?;
        Ok(dag)
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn predecessors(&self, v: NodeId) -> &[NodeId] {
        &self.preds[v]
    }

    pub fn successors(&self, v: NodeId) -> &[NodeId] {
        &self.succs[v]
    }

    /// Topological order that always releases the ready node with the
    /// smallest key first.
    pub fn topological_order<K: Ord>(&self, key: impl Fn(NodeId) -> K) -> Result<Vec<NodeId>, ModelError> {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;

        let mut indegree: Vec<usize> = self.preds.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<(K, NodeId)>> = (0..self.node_count)
            .filter(|&v| indegree[v] == 0)
            .map(|v| Reverse((key(v), v)))
            .collect();
        let mut order = Vec::with_capacity(self.node_count);
        while let Some(Reverse((_, v))) = ready.pop() {
            order.push(v);
            for &s in &self.succs[v] {
                indegree[s] -= 1;
                if indegree[s] == 0 {
                    ready.push(Reverse((key(s), s)));
                }
            }
        }
        if order.len() < self.node_count {
            let stuck = (0..self.node_count).find(|&v| indegree[v] > 0).unwrap_or(0);
            return Err(ModelError::Cycle(stuck));
        }
        Ok(order)
    }
}

/// A full problem instance. Immutable once built; the coalition value memo
/// is the only interior state and is safe to share across threads.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "InstanceDoc", into = "InstanceDoc")]
pub struct Instance {
    pub locations: Vec<Location>,
    pub agents: Vec<Agent>,
    pub nodes: Vec<NodeDemand>,
    pub precedence: PrecedenceDag,
    pub travel: TravelModel,
    pub values: CoalitionValueModel,
    pub t_max: Time,
    /// Restricts every coalition to a single agent.
    pub singleton_coalitions: bool,
}

#[derive(Clone, Serialize, Deserialize)]
struct InstanceDoc {
    locations: Vec<Location>,
    agents: Vec<Agent>,
    nodes: Vec<NodeDemand>,
    precedence: PrecedenceDag,
    travel: TravelModel,
    #[serde(default)]
    values: ValueSpec,
    t_max: Time,
    #[serde(default)]
    singleton_coalitions: bool,
}

impl TryFrom<InstanceDoc> for Instance {
    type Error = ModelError;

    fn try_from(d: InstanceDoc) -> Result<Self, Self::Error> {
        let inst = Instance::new(d.locations, d.agents, d.nodes, d.precedence, d.travel, d.values)?
            .with_singleton_coalitions(d.singleton_coalitions);
        if inst.t_max != d.t_max {
            return Err(ModelError::WrongTmax {
                expected: inst.t_max,
                found: d.t_max,
            });
        }
        Ok(inst)
    }
}

impl From<Instance> for InstanceDoc {
    fn from(i: Instance) -> Self {
        InstanceDoc {
            values: i.values.spec(),
            locations: i.locations,
            agents: i.agents,
            nodes: i.nodes,
            precedence: i.precedence,
            travel: i.travel,
            t_max: i.t_max,
            singleton_coalitions: i.singleton_coalitions,
        }
    }
}

impl Instance {
    pub fn new(
        locations: Vec<Location>,
        agents: Vec<Agent>,
        nodes: Vec<NodeDemand>,
        precedence: PrecedenceDag,
        travel: TravelModel,
        values: ValueSpec,
    ) -> Result<Self, ModelError> {
        for (i, l) in locations.iter().enumerate() {
            if l.id != i {
                return Err(ModelError::NonDenseId { expected: i, found: l.id });
            }
            if let TravelModel::Geo { .. } = travel {
                let [lat, lon] = l.coords;
                if !((-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon)) {
                    return Err(ModelError::InvalidCoordinates { id: i, lat, lon });
                }
            }
        }
        if agents.is_empty() {
            return Err(ModelError::NoAgents);
        }
        for (i, a) in agents.iter().enumerate() {
            if a.id != i {
                return Err(ModelError::NonDenseId { expected: i, found: a.id });
            }
            if !(a.speed > 0.0 && a.speed.is_finite()) {
                return Err(ModelError::NonPositiveSpeed(i));
            }
            if a.initial_location >= locations.len() {
                return Err(ModelError::UnknownLocation(a.initial_location));
            }
        }
        for n in &nodes {
            if let Some(&l) = n.locations.iter().find(|&&l| l >= locations.len()) {
                return Err(ModelError::UnknownLocation(l));
            }
        }
        if precedence.node_count() != nodes.len() {
            return Err(ModelError::UnknownNode(precedence.node_count().max(nodes.len())));
        }
        if let TravelModel::Matrix { times } = &travel {
            let n = locations.len();
            let ok = times.len() == n
                && times.iter().all(|row| row.len() == n)
                && (0..n).all(|i| times[i][i] == 0);
            if !ok {
                return Err(ModelError::BadMatrix(n));
            }
        }
        let t_max = nodes.iter().map(|n| n.hard_latest).max().unwrap_or(0);
        let values = CoalitionValueModel::new(values.kind, values.seed, agents.len());
        Ok(Self {
            locations,
            agents,
            nodes,
            precedence,
            travel,
            values,
            t_max,
            singleton_coalitions: false,
        })
    }

    pub fn with_singleton_coalitions(mut self, on: bool) -> Self {
        self.singleton_coalitions = on;
        self
    }

    /// Swaps the coalition value model, keeping everything else.
    pub fn with_values(mut self, kind: ValueKind, seed: u64) -> Self {
        self.values = CoalitionValueModel::new(kind, seed, self.agents.len());
        self
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    /// `|A| * |V| * |L|`, the size measure used to gate exhaustive solving.
    pub fn dim(&self) -> usize {
        self.agents.len() * self.nodes.len() * self.locations.len()
    }

    /// Travel time of `agent` between two locations, rounded up to whole
    /// time units.
    pub fn travel_time(&self, agent: AgentId, from: LocationId, to: LocationId) -> Result<Time, ModelError> {
        if agent >= self.agents.len() {
            return Err(ModelError::UnknownAgent(agent));
        }
        for l in [from, to] {
            if l >= self.locations.len() {
                return Err(ModelError::UnknownLocation(l));
            }
        }
        Ok(self.rho(agent, from, to))
    }

    /// Unchecked travel time; ids must be valid.
    #[inline]
    pub(crate) fn rho(&self, agent: AgentId, from: LocationId, to: LocationId) -> Time {
        self.travel.time(
            self.agents[agent].speed,
            (from, self.locations[from].coords),
            (to, self.locations[to].coords),
        )
    }

    /// Completion time a zero-workload node has without any work.
    pub(crate) fn trivial_completion(&self, v: NodeId) -> Option<Time> {
        let d = &self.nodes[v];
        d.is_trivial().then_some(d.earliest)
    }

    /// Earliest time work on `v` may happen given the completion times known
    /// for its predecessors.
    pub(crate) fn precedence_release(&self, v: NodeId, completion: &[Option<Time>]) -> Time {
        let alpha = self.nodes[v].earliest;
        self.precedence
            .predecessors(v)
            .iter()
            .map(|&p| {
                let gamma_p = self.nodes[p].hard_latest;
                if alpha > gamma_p {
                    return 0;
                }
                match completion[p] {
                    Some(c) => c + 1,
                    None => gamma_p + 1,
                }
            })
            .max()
            .unwrap_or(0)
    }
}
