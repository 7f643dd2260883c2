//! Earliest-deadline-first baseline.
//!
//! Uses the same candidate selection and coalition formation as [`crate::bnt`]
//! but takes nodes in a fixed time-window order and commits the first
//! feasible visit of each, without comparing scores across nodes. One pass,
//! no revisiting.

use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bnt::{best_singleton, SearchState};
use crate::model::{Accrual, Instance, NodeId, Solution};

/// Which window bound orders the nodes; the other breaks ties, then id.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdfKey {
    #[default]
    Earliest,
    Deadline,
}

impl FromStr for EdfKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "earliest" | "alpha" => Ok(EdfKey::Earliest),
            "deadline" | "gamma" => Ok(EdfKey::Deadline),
            other => Err(format!("unknown EDF key '{other}' (expected earliest or deadline)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdfConfig {
    pub accrual: Accrual,
    pub proximity_filter: bool,
    pub key: EdfKey,
}

impl Default for EdfConfig {
    fn default() -> Self {
        Self {
            accrual: Accrual::Literal,
            proximity_filter: true,
            key: EdfKey::Earliest,
        }
    }
}

/// Processing order: by the configured key, predecessors first.
pub fn edf_order(instance: &Instance, key: EdfKey) -> Vec<NodeId> {
    let dag = &instance.precedence;
    let order = match key {
        EdfKey::Earliest => dag.topological_order(|v| {
            let d = &instance.nodes[v];
            (d.earliest, d.hard_latest, v)
        }),
        EdfKey::Deadline => dag.topological_order(|v| {
            let d = &instance.nodes[v];
            (d.hard_latest, d.earliest, v)
        }),
    };
    order.expect("precedence graph is acyclic by construction")
}

pub fn solve_edf(instance: &Instance, config: &EdfConfig) -> Solution {
    let started = Instant::now();
    let mut state = SearchState::new(instance, config.proximity_filter);
    for v in edf_order(instance, config.key) {
        state.traversal_count += 1;
        match best_singleton(&state, instance, v, config.accrual) {
            Some(s) => state.commit(instance, s),
            None => state.skip(instance, v),
        }
    }
    state.into_solution("edf", started)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnt::{solve_bnt, BntConfig};
    use crate::feasibility::validate;
    use crate::model::score;
    use crate::testutil::{demand, grid_instance, grid_instance_with};

    #[test]
    fn everything_servable_is_visited_in_order() {
        let inst = grid_instance(
            &[[0.0, 0.0]],
            &[(0, 1.0), (0, 1.0), (0, 1.0)],
            vec![
                demand(0, 1.0, 1.0, (6, 9, 9)),
                demand(0, 1.0, 1.0, (2, 9, 9)),
                demand(0, 1.0, 1.0, (4, 9, 9)),
            ],
        );
        let s = solve_edf(&inst, &EdfConfig::default());
        assert_eq!(s.visits.iter().map(|v| v.node).collect::<Vec<_>>(), vec![1, 2, 0]);
        assert_eq!(s.metadata.traversals, 3);
        assert!(validate(&s, &inst).is_empty());
    }

    #[test]
    fn earliest_first_loses_to_greedy_on_contention() {
        // One agent, time for one node only. Node 0 opens first; node 1 pays
        // more. Literal scores: EDF gets 3 * 1 = 3, BNT 3 * 5 = 15.
        let inst = grid_instance(
            &[[0.0, 0.0]],
            &[(0, 1.0)],
            vec![demand(0, 3.0, 1.0, (0, 4, 4)), demand(0, 3.0, 5.0, (1, 4, 4))],
        );
        let edf = solve_edf(&inst, &EdfConfig::default());
        let bnt = solve_bnt(&inst, &BntConfig::default());
        assert_eq!(edf.visits.len(), 1);
        assert_eq!(edf.visits[0].node, 0);
        assert!((score(&edf, &inst) - 3.0).abs() < 1e-12);
        assert!((score(&bnt, &inst) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn empty_instance() {
        let inst = grid_instance(&[[0.0, 0.0]], &[(0, 1.0)], vec![]);
        assert!(solve_edf(&inst, &EdfConfig::default()).is_empty());
    }

    #[test]
    fn keys_and_precedence() {
        let inst = grid_instance_with(
            &[[0.0, 0.0]],
            &[(0, 1.0)],
            vec![
                demand(0, 1.0, 1.0, (1, 20, 30)),
                demand(0, 1.0, 1.0, (2, 5, 6)),
                demand(0, 1.0, 1.0, (0, 20, 40)),
            ],
            vec![(2, 1)],
        );
        assert_eq!(edf_order(&inst, EdfKey::Earliest), vec![2, 0, 1]);
        assert_eq!(edf_order(&inst, EdfKey::Deadline), vec![0, 2, 1]);
        assert_eq!("gamma".parse::<EdfKey>().unwrap(), EdfKey::Deadline);
    }
}
