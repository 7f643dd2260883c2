//! Re-execution: repeated runs that each take a different path.
//!
//! Runs walk a shared tree of committed-node sequences. A run follows the
//! greedy choice among branches not yet exhausted, so the first run is the
//! plain heuristic and later runs diverge at the deepest point that still has
//! an unexplored alternative. A branch is exhausted once all of its feasible
//! children are; when the root is, every leaf has been reached and further
//! runs would repeat themselves.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use super::{argmax, expand, BntConfig, SearchState};
use crate::model::{score_with, Instance, NodeId, Solution};

#[derive(Default)]
struct Branch {
    parent: Option<(usize, NodeId)>,
    /// Nodes with a positive singleton solution here, once expanded.
    feasible: Option<Vec<NodeId>>,
    next: BTreeMap<NodeId, usize>,
    exhausted_children: BTreeSet<NodeId>,
    exhausted: bool,
}

struct Tree {
    branches: Vec<Branch>,
}

impl Tree {
    fn new() -> Self {
        Self {
            branches: vec![Branch::default()],
        }
    }

    fn child(&mut self, at: usize, v: NodeId) -> usize {
        if let Some(&c) = self.branches[at].next.get(&v) {
            return c;
        }
        let c = self.branches.len();
        self.branches.push(Branch {
            parent: Some((at, v)),
            ..Branch::default()
        });
        self.branches[at].next.insert(v, c);
        c
    }

    fn close(&mut self, mut at: usize) {
        loop {
            self.branches[at].exhausted = true;
            let Some((p, v)) = self.branches[at].parent else { return };
            let parent = &mut self.branches[p];
            parent.exhausted_children.insert(v);
            let done = parent
                .feasible
                .as_ref()
                .is_some_and(|f| f.iter().all(|c| parent.exhausted_children.contains(c)));
            if !done {
                return;
            }
            at = p;
        }
    }
}

/// Every run of a refinement with at most `runs` runs, in execution order.
/// Fewer runs are returned when the search space is exhausted earlier or the
/// wall-clock budget expires; `max_steps` bounds each run.
pub fn refine_runs(instance: &Instance, config: &BntConfig, runs: usize) -> Vec<Solution> {
    let started = Instant::now();
    let mut tree = Tree::new();
    let mut out = Vec::new();
    for r in 0..runs.max(1) {
        let wall_left = config.budget.wall.is_none_or(|w| started.elapsed() < w);
        if tree.branches[0].exhausted || (r > 0 && !wall_left) {
            break;
        }
        let run_started = Instant::now();
        let mut state = SearchState::new(instance, config.proximity_filter);
        let mut at = 0;
        let mut steps = 0;
        while !state.remaining.is_empty() && config.budget.allows(steps, started) {
            state.forbidden = tree.branches[at].exhausted_children.clone();
            let mut options = expand(&mut state, instance, config.accrual);
            if tree.branches[at].feasible.is_none() {
                tree.branches[at].feasible = Some(options.iter().map(|s| s.visit.node).collect());
            }
            let Some(i) = argmax(&options) else { break };
            let chosen = options.swap_remove(i);
            at = tree.child(at, chosen.visit.node);
            state.commit(instance, chosen);
            steps += 1;
        }
        tree.close(at);
        out.push(state.into_solution("bnt", run_started));
    }
    out
}

/// Best solution over up to `runs` runs; ties keep the earliest run. With a
/// single run this is exactly [`super::solve_bnt`].
pub fn refine(instance: &Instance, config: &BntConfig, runs: usize) -> Solution {
    let started = Instant::now();
    let all = refine_runs(instance, config, runs);
    let traversals = all.iter().map(|s| s.metadata.traversals).sum();
    let mut best: Option<(f64, Solution)> = None;
    for s in all {
        let sc = score_with(&s, instance, config.accrual);
        if best.as_ref().is_none_or(|(b, _)| sc > *b) {
            best = Some((sc, s));
        }
    }
    let mut sol = best.map(|(_, s)| s).unwrap_or_default();
    sol.metadata.solver = "bnt".to_string();
    sol.metadata.traversals = traversals;
    sol.metadata.wall_millis = started.elapsed().as_secs_f64() * 1e3;
    sol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnt::{best_singleton, solve_bnt};
    use crate::feasibility::validate;
    use crate::model::{score, Accrual, EPS};
    use crate::testutil::{demand, grid_instance};

    fn contested() -> Instance {
        // One agent, three nodes that overlap in time: greedy grabs the
        // single most valuable node, which is not the best plan.
        grid_instance(
            &[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            &[(0, 1.0)],
            vec![
                demand(0, 1.0, 1.0, (0, 4, 4)),
                demand(1, 3.0, 2.5, (0, 8, 8)),
                demand(2, 1.0, 1.0, (4, 8, 8)),
            ],
        )
    }

    /// Best score over committing nodes in every order, passing over nodes
    /// that have no positive singleton solution when their turn comes.
    fn best_over_orderings(instance: &Instance, cfg: &BntConfig) -> f64 {
        fn go(instance: &Instance, cfg: &BntConfig, order: &mut Vec<NodeId>, left: &mut Vec<NodeId>, best: &mut f64) {
            if left.is_empty() {
                let mut state = SearchState::new(instance, cfg.proximity_filter);
                for &v in order.iter() {
                    if let Some(s) = best_singleton(&state, instance, v, cfg.accrual).filter(|s| s.score > EPS) {
                        state.commit(instance, s);
                    }
                }
                *best = best.max(score_with(&state.partial, instance, cfg.accrual));
                return;
            }
            for i in 0..left.len() {
                let v = left.remove(i);
                order.push(v);
                go(instance, cfg, order, left, best);
                order.pop();
                left.insert(i, v);
            }
        }
        let mut best = 0.0;
        go(instance, cfg, &mut vec![], &mut (0..instance.node_count()).collect(), &mut best);
        best
    }

    #[test]
    fn one_run_is_the_plain_heuristic() {
        let inst = contested();
        let cfg = BntConfig::default();
        let a = refine(&inst, &cfg, 1);
        let b = solve_bnt(&inst, &cfg);
        assert_eq!(a.visits, b.visits);
        assert_eq!(a.metadata.traversals, b.metadata.traversals);
    }

    #[test]
    fn score_is_nondecreasing_in_runs() {
        let inst = contested();
        let cfg = BntConfig {
            proximity_filter: false,
            ..BntConfig::default()
        };
        let mut last = f64::NEG_INFINITY;
        for r in 1..=6 {
            let s = refine(&inst, &cfg, r);
            assert!(validate(&s, &inst).is_empty());
            let sc = score(&s, &inst);
            assert!(sc >= last);
            last = sc;
        }
        assert!(last > score(&solve_bnt(&inst, &cfg), &inst));
    }

    #[test]
    fn factorial_runs_match_every_ordering() {
        let inst = contested();
        for proximity_filter in [false, true] {
            for accrual in [Accrual::Literal, Accrual::Completion] {
                let cfg = BntConfig {
                    proximity_filter,
                    accrual,
                    ..BntConfig::default()
                };
                let got = score_with(&refine(&inst, &cfg, 6), &inst, accrual);
                let want = best_over_orderings(&inst, &cfg);
                assert!((got - want).abs() < 1e-9, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn stops_once_exhausted() {
        let inst = grid_instance(&[[0.0, 0.0]], &[(0, 1.0)], vec![demand(0, 1.0, 1.0, (0, 3, 5))]);
        assert_eq!(refine_runs(&inst, &BntConfig::default(), 10).len(), 1);
    }
}
