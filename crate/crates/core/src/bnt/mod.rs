//! Bounded Node Traversal: a greedy, anytime best-first heuristic.
//!
//! Nodes are visited one at a time. At every step each remaining node is
//! tried at each of its locations with the smallest coalition (in arrival
//! order) that finishes it in time; the best-scoring such singleton solution
//! is committed and the agents' availability updated. The partial solution is
//! feasible after every step, so stopping early always yields a usable plan.

mod refine;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use crate::model::{
    visit_score, Accrual, AgentId, Coalition, Instance, LocationId, NodeId, NodeVisit, Solution, SolveMetadata,
    Time, WorkEntry, EPS,
};

pub use refine::{refine, refine_runs};

/// Tolerance of the closed-form total-work filter; exact simulation decides.
const WORK_SLACK: f64 = 1e-6;

/// Optional stopping limits. Both unset means run to completion.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Budget {
    pub max_steps: Option<usize>,
    pub wall: Option<Duration>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn steps(n: usize) -> Self {
        Self {
            max_steps: Some(n),
            wall: None,
        }
    }

    pub fn wall_millis(ms: u64) -> Self {
        Self {
            max_steps: None,
            wall: Some(Duration::from_millis(ms)),
        }
    }

    fn allows(&self, steps: usize, started: Instant) -> bool {
        self.max_steps.is_none_or(|m| steps < m) && self.wall.is_none_or(|w| started.elapsed() < w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BntConfig {
    pub accrual: Accrual,
    /// Only let an agent go to a location it is at least as close to as to
    /// any other remaining node.
    pub proximity_filter: bool,
    pub budget: Budget,
}

impl Default for BntConfig {
    fn default() -> Self {
        Self {
            accrual: Accrual::Literal,
            proximity_filter: true,
            budget: Budget::unlimited(),
        }
    }
}

/// Where and from when an agent is available.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AgentAvail {
    /// Time of the agent's last work entry, 0 before its first one.
    pub free_at: Time,
    pub location: LocationId,
}

/// An agent that can reach a location in time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub agent: AgentId,
    /// Time the agent gets to the location.
    pub arrival: Time,
    /// First time it may work there.
    pub start: Time,
}

/// Feasible visit of one node, with its score under the configured accrual.
#[derive(Clone, Debug, PartialEq)]
pub struct SingletonSolution {
    pub visit: NodeVisit,
    pub completion: Time,
    pub score: f64,
}

/// Per agent, the nearest and second-nearest remaining node.
#[derive(Clone, Debug, Default)]
struct ProximityIndex {
    nearest: Vec<(Time, Option<NodeId>, Time)>,
}

impl ProximityIndex {
    fn build(instance: &Instance, avail: &[AgentAvail], remaining: &BTreeSet<NodeId>) -> Self {
        let nearest = avail
            .iter()
            .enumerate()
            .map(|(a, av)| {
                let mut best = (Time::MAX, None);
                let mut second = Time::MAX;
                for &v in remaining {
                    let d = instance.nodes[v]
                        .locations
                        .iter()
                        .map(|&l| instance.rho(a, av.location, l))
                        .min()
                        .unwrap_or(Time::MAX);
                    if d < best.0 {
                        second = best.0;
                        best = (d, Some(v));
                    } else if d < second {
                        second = d;
                    }
                }
                (best.0, best.1, second)
            })
            .collect();
        Self { nearest }
    }

    /// Distance from `agent` to the closest remaining node other than `v`.
    fn others(&self, agent: AgentId, v: NodeId) -> Time {
        let (best, node, second) = self.nearest[agent];
        if node == Some(v) {
            second
        } else {
            best
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchState {
    /// Nodes by earliest time, predecessors first.
    pub ordered_nodes: Vec<NodeId>,
    pub visited: BTreeSet<NodeId>,
    /// Nodes neither visited nor given up on.
    pub remaining: BTreeSet<NodeId>,
    pub agent_avail: Vec<AgentAvail>,
    /// Completion time of every node known to be complete.
    pub completion: Vec<Option<Time>>,
    pub partial: Solution,
    pub traversal_count: u64,
    /// Nodes not to expand at the current step.
    pub forbidden: BTreeSet<NodeId>,
    proximity: Option<ProximityIndex>,
}

impl SearchState {
    pub fn new(instance: &Instance, proximity_filter: bool) -> Self {
        let agent_avail = instance
            .agents
            .iter()
            .map(|a| AgentAvail {
                free_at: 0,
                location: a.initial_location,
            })
            .collect();
        let mut state = Self {
            ordered_nodes: sort_nodes(instance),
            visited: BTreeSet::new(),
            remaining: (0..instance.node_count()).collect(),
            agent_avail,
            completion: (0..instance.node_count())
                .map(|v| instance.trivial_completion(v))
                .collect(),
            partial: Solution::default(),
            traversal_count: 0,
            forbidden: BTreeSet::new(),
            proximity: proximity_filter.then(ProximityIndex::default),
        };
        state.refresh_proximity(instance);
        state
    }

    fn refresh_proximity(&mut self, instance: &Instance) {
        if self.proximity.is_some() {
            self.proximity = Some(ProximityIndex::build(instance, &self.agent_avail, &self.remaining));
        }
    }

    /// Commits a singleton solution: the node leaves the remaining set and
    /// every agent that worked it is now busy until its last entry there.
    pub fn commit(&mut self, instance: &Instance, s: SingletonSolution) {
        let v = s.visit.node;
        self.remaining.remove(&v);
        self.visited.insert(v);
        self.completion[v] = Some(s.completion);
        for e in &s.visit.entries {
            for a in e.coalition.members() {
                let av = &mut self.agent_avail[a];
                av.free_at = av.free_at.max(e.time);
                av.location = s.visit.location;
            }
        }
        self.partial.visits.push(s.visit);
        self.refresh_proximity(instance);
    }

    /// Drops a node without visiting it.
    pub fn skip(&mut self, instance: &Instance, v: NodeId) {
        if self.remaining.remove(&v) {
            self.refresh_proximity(instance);
        }
    }

    pub(crate) fn into_solution(self, solver: &str, started: Instant) -> Solution {
        let mut s = self.partial;
        s.metadata = SolveMetadata {
            solver: solver.to_string(),
            wall_millis: started.elapsed().as_secs_f64() * 1e3,
            traversals: self.traversal_count,
        };
        s
    }
}

/// Nodes in nondecreasing earliest time, ties by id, repaired so every
/// predecessor comes before its successors.
pub fn sort_nodes(instance: &Instance) -> Vec<NodeId> {
    instance
        .precedence
        .topological_order(|v| (instance.nodes[v].earliest, v))
        .expect("precedence graph is acyclic by construction")
}

/// Agents able to start work on `node` at `location` no later than its hard
/// deadline, by arrival time then id.
pub fn candidate_agents(state: &SearchState, instance: &Instance, node: NodeId, location: LocationId) -> Vec<Candidate> {
    let d = &instance.nodes[node];
    let release = instance.precedence_release(node, &state.completion).max(d.earliest);
    let mut out: Vec<Candidate> = state
        .agent_avail
        .iter()
        .enumerate()
        .filter_map(|(a, av)| {
            let travel = instance.rho(a, av.location, location);
            if let Some(p) = &state.proximity {
                if travel > p.others(a, node) {
                    return None;
                }
            }
            let arrival = av.free_at + travel;
            let from_start = instance.rho(a, instance.agents[a].initial_location, location);
            let start = (arrival.max(from_start) + 1).max(release);
            (start <= d.hard_latest).then_some(Candidate {
                agent: a,
                arrival,
                start,
            })
        })
        .collect();
    out.sort_by_key(|c| (c.arrival, c.agent));
    out
}

/// Smallest arrival-order prefix of `candidates` whose staggered schedule
/// finishes the node by its hard deadline.
pub fn form_min_coalition(
    instance: &Instance,
    node: NodeId,
    location: LocationId,
    candidates: &[Candidate],
    accrual: Accrual,
) -> Option<SingletonSolution> {
    let d = &instance.nodes[node];
    let first = candidates.first()?;
    if d.is_trivial() {
        // Complete at its earliest time by definition; work later would
        // count as work after completion.
        let entries = if first.start == d.earliest {
            vec![WorkEntry {
                time: first.start,
                coalition: Coalition::singleton(first.agent),
            }]
        } else {
            Vec::new()
        };
        return Some(finish(instance, node, location, entries, d.earliest, accrual));
    }
    if instance.singleton_coalitions {
        return candidates
            .iter()
            .find_map(|c| schedule(instance, node, location, std::slice::from_ref(c), accrual));
    }
    (1..=candidates.len()).find_map(|k| schedule(instance, node, location, &candidates[..k], accrual))
}

fn schedule(
    instance: &Instance,
    node: NodeId,
    location: LocationId,
    members: &[Candidate],
    accrual: Accrual,
) -> Option<SingletonSolution> {
    let d = &instance.nodes[node];
    let mut joins: Vec<(Time, AgentId)> = members.iter().map(|c| (c.start, c.agent)).collect();
    joins.sort_unstable();
    let first = joins[0].0;
    if first > d.hard_latest {
        return None;
    }
    let value = |c: &Coalition| instance.values.value(c, node, location).unwrap_or(0.0);

    // Upper bound on the work done by the hard deadline.
    let mut coalition = Coalition::new();
    let mut bound = 0.0;
    for (i, &(t, a)) in joins.iter().enumerate() {
        if t > d.hard_latest {
            break;
        }
        coalition.insert(a);
        let end = joins.get(i + 1).map_or(d.hard_latest + 1, |n| n.0.min(d.hard_latest + 1));
        bound += value(&coalition) * (end - t) as f64;
    }
    if bound < d.workload - WORK_SLACK {
        return None;
    }

    let mut coalition = Coalition::new();
    let mut next = 0;
    let mut u = 0.0;
    let mut done = 0.0;
    let mut entries = Vec::new();
    for t in first..=d.hard_latest {
        let mut grew = false;
        while next < joins.len() && joins[next].0 <= t {
            coalition.insert(joins[next].1);
            next += 1;
            grew = true;
        }
        if grew {
            u = value(&coalition);
        }
        done += u;
        entries.push(WorkEntry {
            time: t,
            coalition: coalition.clone(),
        });
        if done >= d.workload - EPS {
            return Some(finish(instance, node, location, entries, t, accrual));
        }
    }
    None
}

fn finish(
    instance: &Instance,
    node: NodeId,
    location: LocationId,
    entries: Vec<WorkEntry>,
    completion: Time,
    accrual: Accrual,
) -> SingletonSolution {
    let visit = NodeVisit::new(node, location, entries);
    let score = visit_score(&visit, instance, accrual);
    SingletonSolution {
        visit,
        completion,
        score,
    }
}

/// Best singleton solution for `node` over its locations, ties to the lower
/// location id.
pub fn best_singleton(state: &SearchState, instance: &Instance, node: NodeId, accrual: Accrual) -> Option<SingletonSolution> {
    let mut locations = instance.nodes[node].locations.clone();
    locations.sort_unstable();
    let mut best: Option<SingletonSolution> = None;
    for l in locations {
        let cands = candidate_agents(state, instance, node, l);
        if let Some(s) = form_min_coalition(instance, node, l, &cands, accrual) {
            if best.as_ref().is_none_or(|b| s.score > b.score + EPS) {
                best = Some(s);
            }
        }
    }
    best
}

/// Evaluates every remaining, non-forbidden node and returns the best
/// singleton solution; counts one traversal per evaluated node.
pub(crate) fn expand(state: &mut SearchState, instance: &Instance, accrual: Accrual) -> Vec<SingletonSolution> {
    let nodes: Vec<NodeId> = state
        .remaining
        .iter()
        .copied()
        .filter(|v| !state.forbidden.contains(v))
        .collect();
    state.traversal_count += nodes.len() as u64;
    nodes
        .into_iter()
        .filter_map(|v| best_singleton(state, instance, v, accrual))
        .filter(|s| s.score > EPS)
        .collect()
}

/// Greedy choice among expanded solutions: highest score, first wins ties.
pub(crate) fn argmax(options: &[SingletonSolution]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in options.iter().enumerate() {
        if best.is_none_or(|b| s.score > options[b].score + EPS) {
            best = Some(i);
        }
    }
    best
}

/// Runs the heuristic until no positive-score singleton solution is left or
/// the budget runs out. The returned plan is feasible whenever it stops.
pub fn solve_bnt(instance: &Instance, config: &BntConfig) -> Solution {
    let started = Instant::now();
    let mut state = SearchState::new(instance, config.proximity_filter);
    let mut steps = 0;
    while !state.remaining.is_empty() && config.budget.allows(steps, started) {
        let mut options = expand(&mut state, instance, config.accrual);
        let Some(i) = argmax(&options) else { break };
        state.commit(instance, options.swap_remove(i));
        steps += 1;
    }
    state.into_solution("bnt", started)
}
