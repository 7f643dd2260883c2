use serde::{Deserialize, Serialize};

use super::{Coalition, Instance, LocationId, ModelError, NodeDemand, NodeId, NodeVisit, Solution, Time, EPS};

/// How profit accrues over a visit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accrual {
    /// One profit term per worked time step, discounted by the penalty at
    /// that step.
    #[default]
    Literal,
    /// A single profit term at the completion time.
    Completion,
}

impl std::str::FromStr for Accrual {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "literal" => Ok(Accrual::Literal),
            "completion" => Ok(Accrual::Completion),
            other => Err(format!("unknown accrual mode `{other}`")),
        }
    }
}

/// Penalty multiplier for working a node at time `t`: 1 up to the soft
/// latest time, then decreasing linearly, still positive at the hard latest
/// time.
pub fn penalty(t: Time, demand: &NodeDemand) -> Result<f64, ModelError> {
    if !demand.in_window(t) {
        return Err(ModelError::OutsideWindow {
            t,
            earliest: demand.earliest,
            hard_latest: demand.hard_latest,
        });
    }
    Ok(penalty_unchecked(t, demand))
}

#[inline]
pub(crate) fn penalty_unchecked(t: Time, d: &NodeDemand) -> f64 {
    if t <= d.soft_latest {
        1.0
    } else {
        1.0 - (t - d.soft_latest) as f64 / (d.hard_latest - d.soft_latest + 1) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum Completion {
    Complete { at: Time },
    Incomplete { remaining: f64 },
}

impl Completion {
    pub fn time(&self) -> Option<Time> {
        match *self {
            Completion::Complete { at } => Some(at),
            Completion::Incomplete { .. } => None,
        }
    }
}

/// Accumulates coalition work over `entries` in time order and reports when
/// the workload is met.
///
/// A zero-workload node is complete at its earliest time whether or not it
/// is worked.
pub fn completion_status(visit: &NodeVisit, instance: &Instance) -> Completion {
    accumulate(
        instance,
        visit.node,
        visit.entries.iter().map(|e| (e.time, &e.coalition, visit.location)),
    )
}

pub(crate) fn accumulate<'a>(
    instance: &Instance,
    node: NodeId,
    entries: impl Iterator<Item = (Time, &'a Coalition, LocationId)>,
) -> Completion {
    let demand = &instance.nodes[node];
    if demand.is_trivial() {
        return Completion::Complete { at: demand.earliest };
    }
    let mut sorted: Vec<_> = entries.collect();
    sorted.sort_by_key(|e| e.0);
    let mut done = 0.0;
    for (t, c, l) in sorted {
        done += instance.values.value(c, node, l).unwrap_or(0.0);
        if done >= demand.workload - EPS {
            return Completion::Complete { at: t };
        }
    }
    Completion::Incomplete {
        remaining: demand.workload - done,
    }
}

/// Score of a single visit under the given accrual mode.
pub fn visit_score(visit: &NodeVisit, instance: &Instance, accrual: Accrual) -> f64 {
    let Some(demand) = instance.nodes.get(visit.node) else {
        return 0.0;
    };
    match accrual {
        Accrual::Literal => visit
            .entries
            .iter()
            .filter(|e| demand.in_window(e.time))
            .map(|e| demand.profit * penalty_unchecked(e.time, demand))
            .sum(),
        Accrual::Completion => {
            if visit.entries.is_empty() {
                return 0.0;
            }
            match completion_status(visit, instance) {
                Completion::Complete { at } if demand.in_window(at) => demand.profit * penalty_unchecked(at, demand),
                _ => 0.0,
            }
        }
    }
}

/// Total score of a solution: the sum, over every work entry, of the node's
/// profit times the penalty at that time.
pub fn score(solution: &Solution, instance: &Instance) -> f64 {
    score_with(solution, instance, Accrual::Literal)
}

pub fn score_with(solution: &Solution, instance: &Instance, accrual: Accrual) -> f64 {
    solution
        .visits
        .iter()
        .map(|v| visit_score(v, instance, accrual))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WorkEntry;
    use crate::testutil::grid_instance;

    fn demand(alpha: Time, beta: Time, gamma: Time) -> NodeDemand {
        NodeDemand::new(vec![0], 1.0, 1.0, alpha, beta, gamma).unwrap()
    }

    #[test]
    fn penalty_branches() {
        let d = demand(0, 5, 9);
        assert_eq!(penalty(3, &d).unwrap(), 1.0);
        assert!((penalty(7, &d).unwrap() - 0.6).abs() < 1e-12);
        assert!((penalty(9, &d).unwrap() - 0.2).abs() < 1e-12);
        assert!(penalty(10, &d).is_err());
        assert!(penalty(0, &demand(1, 5, 9)).is_err());
    }

    fn entry(t: Time, members: &[usize]) -> WorkEntry {
        WorkEntry {
            time: t,
            coalition: members.iter().copied().collect(),
        }
    }

    #[test]
    fn score_examples() {
        let nodes = vec![
            NodeDemand::new(vec![0], 1.0, 2.0, 0, 5, 9).unwrap(),
            NodeDemand::new(vec![0], 2.0, 1.0, 0, 5, 9).unwrap(),
        ];
        let inst = grid_instance(&[[0.0, 0.0]], &[(0, 1.0)], nodes);
        assert_eq!(score(&Solution::default(), &inst), 0.0);

        let one = Solution::from_visits(vec![NodeVisit::new(0, 0, vec![entry(3, &[0])])]);
        assert!((score(&one, &inst) - 2.0).abs() < 1e-12);

        let two = Solution::from_visits(vec![NodeVisit::new(1, 0, vec![entry(5, &[0]), entry(7, &[0])])]);
        assert!((score(&two, &inst) - 1.6).abs() < 1e-12);
        // Completion accrual credits only the completion step (t = 7).
        assert!((score_with(&two, &inst, Accrual::Completion) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn completion_examples() {
        let nodes = vec![
            NodeDemand::new(vec![0], 0.0, 1.0, 4, 5, 9).unwrap(),
            NodeDemand::new(vec![0], 3.0, 1.0, 0, 5, 9).unwrap(),
        ];
        let inst = grid_instance(&[[0.0, 0.0]], &[(0, 1.0)], nodes);
        assert_eq!(
            completion_status(&NodeVisit::new(0, 0, vec![]), &inst),
            Completion::Complete { at: 4 }
        );
        let full = NodeVisit::new(1, 0, vec![entry(2, &[0]), entry(3, &[0]), entry(4, &[0])]);
        assert_eq!(completion_status(&full, &inst), Completion::Complete { at: 4 });
        let short = NodeVisit::new(1, 0, vec![entry(2, &[0]), entry(3, &[0])]);
        match completion_status(&short, &inst) {
            Completion::Incomplete { remaining } => assert!((remaining - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn accrual_parses() {
        assert_eq!("literal".parse::<Accrual>().unwrap(), Accrual::Literal);
        assert_eq!("completion".parse::<Accrual>().unwrap(), Accrual::Completion);
        assert!("sometimes".parse::<Accrual>().is_err());
    }
}
