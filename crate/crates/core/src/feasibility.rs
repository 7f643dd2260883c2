//! Solution validator.
//!
//! Four independent families of checks mirror the constraint groups of the
//! model. Every check collects all violations rather than stopping at the
//! first; an empty [`ViolationReport`] means the solution is feasible.
//!
//! * structural: one coalition per node and time, entries inside the window,
//!   well-formed coalitions and locations;
//! * temporal: one location per node, workload met, no work after completion;
//! * spatial: coalition members can reach the location from their start, and
//!   consecutive engagements of an agent leave time to travel;
//! * ordering: a successor is not worked inside its predecessor's window
//!   until the predecessor is complete.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::objective::accumulate;
use crate::model::{AgentId, Coalition, Completion, Instance, LocationId, NodeId, Solution, Time};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Structural,
    Temporal,
    Spatial,
    Ordering,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub family: Family,
    pub nodes: Vec<NodeId>,
    pub agents: Vec<AgentId>,
    pub time: Option<Time>,
    pub detail: String,
}

impl Violation {
    fn new(family: Family, nodes: Vec<NodeId>, agents: Vec<AgentId>, time: Option<Time>, detail: String) -> Self {
        Self {
            family,
            nodes,
            agents,
            time,
            detail,
        }
    }

    fn sort_key(&self) -> (NodeId, Time, Family) {
        (
            self.nodes.first().copied().unwrap_or(NodeId::MAX),
            self.time.unwrap_or(0),
            self.family,
        )
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.family, self.detail)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn count(&self, family: Family) -> usize {
        self.violations.iter().filter(|v| v.family == family).count()
    }

    pub fn families(&self) -> BTreeSet<Family> {
        self.violations.iter().map(|v| v.family).collect()
    }

    /// One JSON object per line.
    pub fn to_json_lines(&self) -> String {
        self.violations
            .iter()
            .map(|v| serde_json::to_string(v).expect("violation serialises") + "\n")
            .collect()
    }

    fn push(&mut self, v: Violation) {
        self.violations.push(v);
    }

    fn extend(&mut self, other: ViolationReport) {
        self.violations.extend(other.violations);
    }
}

/// A work entry whose node, location and coalition are all within range.
struct Engagement<'a> {
    node: NodeId,
    location: LocationId,
    time: Time,
    coalition: &'a Coalition,
}

fn well_formed<'a>(solution: &'a Solution, instance: &'a Instance) -> impl Iterator<Item = Engagement<'a>> + 'a {
    let n = instance.agent_count();
    solution
        .visits
        .iter()
        .filter(move |v| v.node < instance.node_count() && instance.nodes[v.node].locations.contains(&v.location))
        .flat_map(move |v| {
            v.entries
                .iter()
                .filter(move |e| !e.coalition.is_empty() && e.coalition.span() <= n)
                .map(move |e| Engagement {
                    node: v.node,
                    location: v.location,
                    time: e.time,
                    coalition: &e.coalition,
                })
        })
}

/// Completion time of every node, as far as the solution's work goes.
fn completions(solution: &Solution, instance: &Instance) -> Vec<Option<Time>> {
    let mut by_node: BTreeMap<NodeId, Vec<Engagement<'_>>> = BTreeMap::new();
    for e in well_formed(solution, instance) {
        by_node.entry(e.node).or_default().push(e);
    }
    (0..instance.node_count())
        .map(|v| {
            if let Some(c) = instance.trivial_completion(v) {
                return Some(c);
            }
            let es = by_node.get(&v)?;
            accumulate(instance, v, es.iter().map(|e| (e.time, e.coalition, e.location))).time()
        })
        .collect()
}

pub fn check_structural(solution: &Solution, instance: &Instance) -> ViolationReport {
    let mut report = ViolationReport::default();
    let n = instance.agent_count();
    let mut times: BTreeMap<NodeId, BTreeMap<Time, usize>> = BTreeMap::new();
    for visit in &solution.visits {
        let v = visit.node;
        let Some(demand) = instance.nodes.get(v) else {
            report.push(Violation::new(
                Family::Structural,
                vec![v],
                vec![],
                None,
                format!("unknown node {v}"),
            ));
            continue;
        };
        if !demand.locations.contains(&visit.location) {
            report.push(Violation::new(
                Family::Structural,
                vec![v],
                vec![],
                None,
                format!("location {} is not a possible location of node {v}", visit.location),
            ));
        }
        for e in &visit.entries {
            let t = e.time;
            *times.entry(v).or_default().entry(t).or_default() += 1;
            if e.coalition.is_empty() {
                report.push(Violation::new(
                    Family::Structural,
                    vec![v],
                    vec![],
                    Some(t),
                    format!("empty coalition on node {v} at t={t}"),
                ));
            }
            if e.coalition.span() > n {
                report.push(Violation::new(
                    Family::Structural,
                    vec![v],
                    e.coalition.members().filter(|&a| a >= n).collect(),
                    Some(t),
                    format!("coalition on node {v} at t={t} names unknown agents"),
                ));
            }
            if instance.singleton_coalitions && e.coalition.len() > 1 {
                report.push(Violation::new(
                    Family::Structural,
                    vec![v],
                    e.coalition.members().collect(),
                    Some(t),
                    format!("instance allows singleton coalitions only, node {v} at t={t} has {}", e.coalition.len()),
                ));
            }
            if !demand.in_window(t) {
                report.push(Violation::new(
                    Family::Structural,
                    vec![v],
                    e.coalition.members().collect(),
                    Some(t),
                    format!(
                        "node {v} worked at t={t} outside its window [{}, {}]",
                        demand.earliest, demand.hard_latest
                    ),
                ));
            }
        }
    }
    for (v, per_time) in times {
        for (t, count) in per_time {
            if count > 1 {
                report.push(Violation::new(
                    Family::Structural,
                    vec![v],
                    vec![],
                    Some(t),
                    format!("node {v} has {count} coalitions at t={t}"),
                ));
            }
        }
    }
    report
}

pub fn check_temporal(solution: &Solution, instance: &Instance) -> ViolationReport {
    let mut report = ViolationReport::default();
    let mut locations: BTreeMap<NodeId, BTreeSet<LocationId>> = BTreeMap::new();
    for visit in solution.visits.iter().filter(|v| v.node < instance.node_count()) {
        locations.entry(visit.node).or_default().insert(visit.location);
    }
    let mut work: BTreeMap<NodeId, Vec<Engagement<'_>>> = BTreeMap::new();
    for e in well_formed(solution, instance) {
        work.entry(e.node).or_default().push(e);
    }
    for (&v, locs) in &locations {
        if locs.len() > 1 {
            report.push(Violation::new(
                Family::Temporal,
                vec![v],
                vec![],
                None,
                format!("node {v} visited in {} locations {:?}", locs.len(), locs),
            ));
        }
        let es = work.remove(&v).unwrap_or_default();
        let status = accumulate(instance, v, es.iter().map(|e| (e.time, e.coalition, e.location)));
        match status {
            Completion::Complete { at } => {
                for e in es.iter().filter(|e| e.time > at) {
                    report.push(Violation::new(
                        Family::Temporal,
                        vec![v],
                        e.coalition.members().collect(),
                        Some(e.time),
                        format!("node {v} worked at t={} after completing at t={at}", e.time),
                    ));
                }
            }
            Completion::Incomplete { remaining } => {
                report.push(Violation::new(
                    Family::Temporal,
                    vec![v],
                    vec![],
                    None,
                    format!("node {v} visited but {remaining:.6} work units short of its workload"),
                ));
            }
        }
    }
    report
}

pub fn check_spatial(solution: &Solution, instance: &Instance) -> ViolationReport {
    let mut report = ViolationReport::default();
    let mut timeline: Vec<Vec<(Time, NodeId, LocationId)>> = vec![Vec::new(); instance.agent_count()];
    for e in well_formed(solution, instance) {
        let lambda = e
            .coalition
            .members()
            .map(|a| instance.rho(a, instance.agents[a].initial_location, e.location))
            .max()
            .unwrap_or(0);
        if e.time <= lambda {
            let late: Vec<AgentId> = e
                .coalition
                .members()
                .filter(|&a| e.time <= instance.rho(a, instance.agents[a].initial_location, e.location))
                .collect();
            report.push(Violation::new(
                Family::Spatial,
                vec![e.node],
                late,
                Some(e.time),
                format!(
                    "coalition cannot reach location {} of node {} before t={} (works at t={})",
                    e.location,
                    e.node,
                    lambda + 1,
                    e.time
                ),
            ));
        }
        for a in e.coalition.members() {
            timeline[a].push((e.time, e.node, e.location));
        }
    }
    for (a, events) in timeline.iter_mut().enumerate() {
        events.sort_unstable();
        for pair in events.windows(2) {
            let (t1, v1, l1) = pair[0];
            let (t2, v2, l2) = pair[1];
            if t1 == t2 {
                report.push(Violation::new(
                    Family::Spatial,
                    vec![v2, v1],
                    vec![a],
                    Some(t2),
                    format!("agent {a} engaged on nodes {v1} and {v2} at the same time t={t2}"),
                ));
                continue;
            }
            let travel = instance.rho(a, l1, l2);
            if t2 <= t1 + travel {
                report.push(Violation::new(
                    Family::Spatial,
                    vec![v2, v1],
                    vec![a],
                    Some(t2),
                    format!(
                        "agent {a} works node {v1} at t={t1} and node {v2} at t={t2}, but travel takes {travel}"
                    ),
                ));
            }
        }
    }
    report
}

pub fn check_ordering(solution: &Solution, instance: &Instance) -> ViolationReport {
    let mut report = ViolationReport::default();
    let done = completions(solution, instance);
    let mut work: BTreeMap<NodeId, BTreeSet<Time>> = BTreeMap::new();
    for e in well_formed(solution, instance) {
        work.entry(e.node).or_default().insert(e.time);
    }
    for &(pred, succ) in instance.precedence.edges() {
        let alpha = instance.nodes[succ].earliest;
        let gamma_pred = instance.nodes[pred].hard_latest;
        if alpha > gamma_pred {
            continue;
        }
        let Some(times) = work.get(&succ) else { continue };
        let offending = times
            .range(alpha..=gamma_pred)
            .find(|&&t| done[pred].is_none_or(|c| t <= c));
        if let Some(&t) = offending {
            let why = match done[pred] {
                Some(c) => format!("completes at t={c}"),
                None => "is never completed".to_string(),
            };
            report.push(Violation::new(
                Family::Ordering,
                vec![succ, pred],
                vec![],
                Some(t),
                format!("node {succ} worked at t={t} but its predecessor {pred} {why}"),
            ));
        }
    }
    report
}

/// All four families, ordered by node id then time.
pub fn validate(solution: &Solution, instance: &Instance) -> ViolationReport {
    let mut report = check_structural(solution, instance);
    report.extend(check_temporal(solution, instance));
    report.extend(check_spatial(solution, instance));
    report.extend(check_ordering(solution, instance));
    report.violations.sort_by_key(Violation::sort_key);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NodeVisit;
    use crate::testutil::{demand, entry, grid_instance, grid_instance_with};

    fn sol(visits: Vec<NodeVisit>) -> Solution {
        Solution::from_visits(visits)
    }

    #[test]
    fn empty_solution_is_feasible() {
        let inst = grid_instance(&[[0.0, 0.0]], &[(0, 1.0)], vec![demand(0, 1.0, 1.0, (0, 3, 5))]);
        let s = Solution::default();
        assert!(check_structural(&s, &inst).is_empty());
        assert!(check_temporal(&s, &inst).is_empty());
        assert!(check_spatial(&s, &inst).is_empty());
        assert!(check_ordering(&s, &inst).is_empty());
        assert!(validate(&s, &inst).is_empty());
    }

    #[test]
    fn structural_examples() {
        let inst = grid_instance(&[[0.0, 0.0]], &[(0, 1.0), (0, 1.0)], vec![demand(0, 2.0, 1.0, (0, 3, 5))]);
        let dup = sol(vec![NodeVisit::new(0, 0, vec![entry(2, &[0]), entry(2, &[1])])]);
        assert_eq!(check_structural(&dup, &inst).len(), 1);
        let late = sol(vec![NodeVisit::new(0, 0, vec![entry(6, &[0])])]);
        assert_eq!(check_structural(&late, &inst).len(), 1);
    }

    #[test]
    fn temporal_examples() {
        let inst = grid_instance(
            &[[0.0, 0.0], [0.0, 0.0]],
            &[(0, 1.0)],
            vec![NodeDemand::new(vec![0, 1], 2.0, 1.0, 0, 3, 5).unwrap()],
        );
        let ok = sol(vec![NodeVisit::new(0, 0, vec![entry(1, &[0]), entry(2, &[0])])]);
        assert!(check_temporal(&ok, &inst).is_empty());

        let split = sol(vec![
            NodeVisit::new(0, 0, vec![entry(1, &[0])]),
            NodeVisit::new(0, 1, vec![entry(2, &[0])]),
        ]);
        assert_eq!(check_temporal(&split, &inst).len(), 1);

        // Oracle: cumulative unit work 1, 2 reaches w=2 at t=2, so t=3 is extra.
        let extra = sol(vec![NodeVisit::new(0, 0, vec![entry(1, &[0]), entry(2, &[0]), entry(3, &[0])])]);
        let r = check_temporal(&extra, &inst);
        assert_eq!(r.len(), 1);
        assert_eq!(r.violations[0].time, Some(3));
    }

    use crate::model::NodeDemand;

    #[test]
    fn temporal_flags_incomplete_visit() {
        let inst = grid_instance(&[[0.0, 0.0]], &[(0, 1.0)], vec![demand(0, 3.0, 1.0, (0, 3, 5))]);
        let short = sol(vec![NodeVisit::new(0, 0, vec![entry(1, &[0])])]);
        assert_eq!(check_temporal(&short, &inst).count(Family::Temporal), 1);
    }

    #[test]
    fn spatial_examples() {
        // Colocated agent, work from t = max(1, alpha).
        let inst = grid_instance(&[[0.0, 0.0]], &[(0, 1.0)], vec![demand(0, 1.0, 1.0, (0, 3, 5))]);
        let ok = sol(vec![NodeVisit::new(0, 0, vec![entry(1, &[0])])]);
        assert!(check_spatial(&ok, &inst).is_empty());
        let at_zero = sol(vec![NodeVisit::new(0, 0, vec![entry(0, &[0])])]);
        assert_eq!(check_spatial(&at_zero, &inst).len(), 1);

        // Agent 5 cells away works at t=3.
        let far = grid_instance(&[[0.0, 0.0], [5.0, 0.0]], &[(0, 1.0)], vec![demand(1, 1.0, 1.0, (0, 6, 9))]);
        let early = sol(vec![NodeVisit::new(0, 1, vec![entry(3, &[0])])]);
        assert_eq!(check_spatial(&early, &far).len(), 1);

        // Finishes v1 at t=4, travel 3, works v2 at t=6.
        let hop = grid_instance(
            &[[0.0, 0.0], [3.0, 0.0]],
            &[(0, 1.0)],
            vec![demand(0, 1.0, 1.0, (0, 9, 9)), demand(1, 1.0, 1.0, (0, 9, 9))],
        );
        let tight = sol(vec![
            NodeVisit::new(0, 0, vec![entry(4, &[0])]),
            NodeVisit::new(1, 1, vec![entry(6, &[0])]),
        ]);
        assert_eq!(check_spatial(&tight, &hop).len(), 1);
        let fine = sol(vec![
            NodeVisit::new(0, 0, vec![entry(4, &[0])]),
            NodeVisit::new(1, 1, vec![entry(8, &[0])]),
        ]);
        assert!(check_spatial(&fine, &hop).is_empty());
    }

    #[test]
    fn spatial_flags_double_booking() {
        let inst = grid_instance(
            &[[0.0, 0.0]],
            &[(0, 1.0)],
            vec![demand(0, 1.0, 1.0, (0, 9, 9)), demand(0, 1.0, 1.0, (0, 9, 9))],
        );
        let s = sol(vec![
            NodeVisit::new(0, 0, vec![entry(2, &[0])]),
            NodeVisit::new(1, 0, vec![entry(2, &[0])]),
        ]);
        assert_eq!(check_spatial(&s, &inst).len(), 1);
    }

    #[test]
    fn ordering_examples() {
        let coords = [[0.0, 0.0]];
        // Disjoint windows: no constraint.
        let disjoint = grid_instance_with(
            &coords,
            &[(0, 1.0), (0, 1.0)],
            vec![demand(0, 1.0, 1.0, (1, 3, 3)), demand(0, 1.0, 1.0, (4, 6, 6))],
            vec![(0, 1)],
        );
        let s = sol(vec![
            NodeVisit::new(0, 0, vec![entry(2, &[0])]),
            NodeVisit::new(1, 0, vec![entry(5, &[1])]),
        ]);
        assert!(check_ordering(&s, &disjoint).is_empty());

        let overlap = grid_instance_with(
            &coords,
            &[(0, 1.0), (0, 1.0)],
            vec![demand(0, 2.0, 1.0, (1, 8, 8)), demand(0, 1.0, 1.0, (1, 8, 8))],
            vec![(0, 1)],
        );
        // v1 never completes while v2 is worked inside the overlap.
        let s = sol(vec![NodeVisit::new(1, 0, vec![entry(2, &[1])])]);
        assert_eq!(check_ordering(&s, &overlap).len(), 1);
        // Oracle: v1 accumulates 1 at t=2 and 2 at t=3, so it completes at t=3.
        let s = sol(vec![
            NodeVisit::new(0, 0, vec![entry(2, &[0]), entry(3, &[0])]),
            NodeVisit::new(1, 0, vec![entry(5, &[1])]),
        ]);
        assert!(check_ordering(&s, &overlap).is_empty());
        let s = sol(vec![
            NodeVisit::new(0, 0, vec![entry(2, &[0]), entry(3, &[0])]),
            NodeVisit::new(1, 0, vec![entry(3, &[1])]),
        ]);
        assert_eq!(check_ordering(&s, &overlap).len(), 1);
    }

    #[test]
    fn zero_workload_predecessor_is_done_at_its_earliest_time() {
        let inst = grid_instance_with(
            &[[0.0, 0.0]],
            &[(0, 1.0)],
            vec![demand(0, 0.0, 0.0, (0, 9, 9)), demand(0, 1.0, 1.0, (0, 9, 9))],
            vec![(0, 1)],
        );
        let s = sol(vec![NodeVisit::new(1, 0, vec![entry(1, &[0])])]);
        assert!(validate(&s, &inst).is_empty());
    }

    #[test]
    fn validate_collects_across_families() {
        let inst = grid_instance(
            &[[0.0, 0.0], [3.0, 0.0]],
            &[(0, 1.0), (0, 1.0)],
            vec![demand(0, 2.0, 1.0, (0, 9, 9)), demand(1, 1.0, 1.0, (0, 9, 9))],
        );
        let s = sol(vec![
            NodeVisit::new(0, 0, vec![entry(3, &[0]), entry(3, &[1])]),
            NodeVisit::new(1, 1, vec![entry(5, &[0])]),
        ]);
        let r = validate(&s, &inst);
        assert!(r.len() >= 2);
        assert!(r.families().contains(&Family::Structural));
        assert!(r.families().contains(&Family::Spatial));
        let keys: Vec<_> = r.violations.iter().map(Violation::sort_key).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(r.to_json_lines().lines().count(), r.len());
    }

    #[test]
    fn singleton_flag_enforced() {
        let inst = grid_instance(&[[0.0, 0.0]], &[(0, 1.0), (0, 1.0)], vec![demand(0, 2.0, 1.0, (0, 9, 9))])
            .with_singleton_coalitions(true);
        let s = sol(vec![NodeVisit::new(0, 0, vec![entry(1, &[0, 1])])]);
        assert_eq!(check_structural(&s, &inst).len(), 1);
    }
}
