//! Exhaustive solver for small instances, and the team orienteering
//! reduction it is checked against.
//!
//! The solver steps through time. At each step every agent either idles or
//! works one node at one location; agents on the same node form that step's
//! coalition. The state after a step is the per-agent position and last work
//! time plus the per-node progress, so the optimum over all schedules is a
//! memoised recursion over `(t, state)`. Agents whose last engagement no
//! longer constrains them and nodes whose window has passed are normalised
//! away, which keeps the state space small enough at the capped size.

pub mod toptw;

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::model::{
    objective::penalty_unchecked, Accrual, Coalition, Instance, LocationId, NodeId, NodeVisit, Solution,
    SolveMetadata, Time, WorkEntry, EPS,
};

pub use toptw::{random_toptw, reduce_toptw, toptw_oracle, ToptwError, ToptwInstance, ToptwNode};

/// Largest `|A| * |V| * |L|` solved by default.
pub const DEFAULT_CAP: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactConfig {
    pub cap: usize,
    pub accrual: Accrual,
    /// Give up once this many states are memoised.
    pub max_states: usize,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CAP,
            accrual: Accrual::Literal,
            max_states: 4_000_000,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ExactError {
    #[error("instance too large for the exact solver: dim = {dim} exceeds cap {cap}")]
    TooLarge { dim: usize, cap: usize },
    #[error("search exceeded {0} memoised states")]
    StateLimit(usize),
}

#[derive(Clone, Debug)]
pub struct ExactOutcome {
    pub solution: Solution,
    pub score: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum AgentSlot {
    /// Only the distance from its start location limits the agent.
    Free,
    Busy { last: Time, at: LocationId },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum NodeSlot {
    Open,
    /// Work started at `at`; `done` holds the bits of the cumulative work.
    Working { at: LocationId, done: u64 },
    /// Complete, or no longer workable.
    Closed,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct State {
    agents: Box<[AgentSlot]>,
    nodes: Box<[NodeSlot]>,
}

type Choice = Option<(NodeId, LocationId)>;

struct Dp<'a> {
    inst: &'a Instance,
    cfg: &'a ExactConfig,
    /// Per agent and location, the longest trip from there.
    reach: Vec<Vec<Time>>,
    /// Per agent and location, the trip from the agent's start.
    from_start: Vec<Vec<Time>>,
    horizon: Time,
    memo: HashMap<(Time, State), f64>,
}

impl<'a> Dp<'a> {
    fn new(inst: &'a Instance, cfg: &'a ExactConfig) -> Self {
        let nl = inst.locations.len();
        let reach = (0..inst.agent_count())
            .map(|a| (0..nl).map(|p| (0..nl).map(|l| inst.rho(a, p, l)).max().unwrap_or(0)).collect())
            .collect();
        let from_start = inst
            .agents
            .iter()
            .map(|ag| (0..nl).map(|l| inst.rho(ag.id, ag.initial_location, l)).collect())
            .collect();
        Self {
            inst,
            cfg,
            reach,
            from_start,
            horizon: inst.t_max,
            memo: HashMap::new(),
        }
    }

    /// State as seen at the start of step `t`, or `None` if a started node
    /// can no longer be finished.
    fn normalise(&self, mut s: State, t: Time) -> Option<State> {
        for (a, slot) in s.agents.iter_mut().enumerate() {
            if let AgentSlot::Busy { last, at } = *slot {
                if last + self.reach[a][at] < t {
                    *slot = AgentSlot::Free;
                }
            }
        }
        for (v, slot) in s.nodes.iter_mut().enumerate() {
            let d = &self.inst.nodes[v];
            match *slot {
                NodeSlot::Working { .. } if t > d.hard_latest => return None,
                NodeSlot::Open if t > d.hard_latest || (d.is_trivial() && t > d.earliest) => {
                    *slot = NodeSlot::Closed;
                }
                _ => {}
            }
        }
        Some(s)
    }

    fn precedence_ok(&self, s: &State, v: NodeId, t: Time) -> bool {
        let alpha = self.inst.nodes[v].earliest;
        self.inst.precedence.predecessors(v).iter().all(|&p| {
            let gamma = self.inst.nodes[p].hard_latest;
            alpha > gamma || t > gamma || s.nodes[p] == NodeSlot::Closed
        })
    }

    /// Per agent, the (node, location) pairs it may work at `t`.
    fn options(&self, s: &State, t: Time) -> Vec<Vec<(NodeId, LocationId)>> {
        let mut workable: Vec<(NodeId, LocationId)> = Vec::new();
        for (v, slot) in s.nodes.iter().enumerate() {
            let d = &self.inst.nodes[v];
            let ok_time = if d.is_trivial() {
                t == d.earliest
            } else {
                d.earliest <= t && t <= d.hard_latest
            };
            if !ok_time || !self.precedence_ok(s, v, t) {
                continue;
            }
            match *slot {
                NodeSlot::Open => {
                    let mut ls = d.locations.clone();
                    ls.sort_unstable();
                    workable.extend(ls.into_iter().map(|l| (v, l)));
                }
                NodeSlot::Working { at, .. } => workable.push((v, at)),
                NodeSlot::Closed => {}
            }
        }
        (0..self.inst.agent_count())
            .map(|a| {
                workable
                    .iter()
                    .copied()
                    .filter(|&(_, l)| {
                        t > self.from_start[a][l]
                            && match s.agents[a] {
                                AgentSlot::Free => true,
                                AgentSlot::Busy { last, at } => t > last + self.inst.rho(a, at, l),
                            }
                    })
                    .collect()
            })
            .collect()
    }

    /// Every consistent joint choice, idle first for each agent.
    fn assignments(&self, opts: &[Vec<(NodeId, LocationId)>]) -> Vec<Vec<Choice>> {
        fn go(singleton: bool, opts: &[Vec<(NodeId, LocationId)>], picked: &mut Vec<Choice>, out: &mut Vec<Vec<Choice>>) {
            let a = picked.len();
            if a == opts.len() {
                out.push(picked.clone());
                return;
            }
            picked.push(None);
            go(singleton, opts, picked, out);
            picked.pop();
            for &(v, l) in &opts[a] {
                let clash = picked
                    .iter()
                    .flatten()
                    .any(|&(pv, pl)| pv == v && (pl != l || singleton));
                if !clash {
                    picked.push(Some((v, l)));
                    go(singleton, opts, picked, out);
                    picked.pop();
                }
            }
        }
        let mut out = Vec::new();
        go(self.inst.singleton_coalitions, opts, &mut Vec::with_capacity(opts.len()), &mut out);
        out
    }

    /// Gain of a joint choice and the raw state after it.
    fn apply(&self, s: &State, t: Time, choice: &[Choice]) -> (f64, State) {
        let mut next = s.clone();
        let mut teams: BTreeMap<NodeId, (LocationId, Coalition)> = BTreeMap::new();
        for (a, c) in choice.iter().enumerate() {
            if let Some((v, l)) = *c {
                teams.entry(v).or_insert_with(|| (l, Coalition::new())).1.insert(a);
                next.agents[a] = AgentSlot::Busy { last: t, at: l };
            }
        }
        let mut gain = 0.0;
        for (v, (l, team)) in teams {
            let d = &self.inst.nodes[v];
            let reward = d.profit * penalty_unchecked(t, d);
            if d.is_trivial() {
                gain += reward;
                next.nodes[v] = NodeSlot::Closed;
                continue;
            }
            let before = match s.nodes[v] {
                NodeSlot::Working { done, .. } => f64::from_bits(done),
                _ => 0.0,
            };
            let done = before + self.inst.values.value(&team, v, l).unwrap_or(0.0);
            let complete = done >= d.workload - EPS;
            match self.cfg.accrual {
                Accrual::Literal => gain += reward,
                Accrual::Completion if complete => gain += reward,
                Accrual::Completion => {}
            }
            next.nodes[v] = if complete {
                NodeSlot::Closed
            } else {
                NodeSlot::Working {
                    at: l,
                    done: done.to_bits(),
                }
            };
        }
        (gain, next)
    }

    fn value(&mut self, t: Time, s: State) -> Result<f64, ExactError> {
        if t > self.horizon || s.nodes.iter().all(|n| *n == NodeSlot::Closed) {
            return Ok(0.0);
        }
        let key = (t, s);
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        if self.memo.len() >= self.cfg.max_states {
            return Err(ExactError::StateLimit(self.cfg.max_states));
        }
        let s = key.1.clone();
        let choices = self.assignments(&self.options(&s, t));
        let mut best = f64::NEG_INFINITY;
        for c in &choices {
            let total = self.step_total(&s, t, c)?;
            if total > best {
                best = total;
            }
        }
        self.memo.insert(key, best);
        Ok(best)
    }

    fn step_total(&mut self, s: &State, t: Time, c: &[Choice]) -> Result<f64, ExactError> {
        let (gain, raw) = self.apply(s, t, c);
        Ok(match self.normalise(raw, t + 1) {
            Some(next) => gain + self.value(t + 1, next)?,
            None => f64::NEG_INFINITY,
        })
    }
}

/// Maximum-score solution by exhaustive search. Refuses instances whose
/// `|A| * |V| * |L|` exceeds `config.cap`.
pub fn solve_exact(instance: &Instance, config: &ExactConfig) -> Result<ExactOutcome, ExactError> {
    let started = std::time::Instant::now();
    let dim = instance.dim();
    if dim > config.cap {
        return Err(ExactError::TooLarge { dim, cap: config.cap });
    }
    let mut dp = Dp::new(instance, config);
    let initial = State {
        agents: vec![AgentSlot::Free; instance.agent_count()].into(),
        nodes: vec![NodeSlot::Open; instance.node_count()].into(),
    };
    let mut state = dp.normalise(initial, 0).expect("nothing started yet");
    let score = dp.value(0, state.clone())?;

    // Replay: at each step take the first choice that attains the optimum.
    let mut work: BTreeMap<NodeId, (LocationId, Vec<WorkEntry>)> = BTreeMap::new();
    let mut target = score;
    for t in 0..=dp.horizon {
        if state.nodes.iter().all(|n| *n == NodeSlot::Closed) {
            break;
        }
        let choices = dp.assignments(&dp.options(&state, t));
        let mut taken = None;
        for c in choices {
            if dp.step_total(&state, t, &c)? == target {
                taken = Some(c);
                break;
            }
        }
        let c = taken.expect("optimal choice is reproducible");
        let (gain, raw) = dp.apply(&state, t, &c);
        let mut teams: BTreeMap<NodeId, (LocationId, Coalition)> = BTreeMap::new();
        for (a, ch) in c.iter().enumerate() {
            if let Some((v, l)) = *ch {
                teams.entry(v).or_insert_with(|| (l, Coalition::new())).1.insert(a);
            }
        }
        for (v, (l, coalition)) in teams {
            work.entry(v).or_insert_with(|| (l, Vec::new())).1.push(WorkEntry { time: t, coalition });
        }
        state = dp.normalise(raw, t + 1).expect("optimal path stays alive");
        target = dp.value(t + 1, state.clone())?;
        debug_assert!(gain >= 0.0);
    }
    let visits = work
        .into_iter()
        .map(|(v, (l, entries))| NodeVisit::new(v, l, entries))
        .collect();
    let solution = Solution {
        visits,
        metadata: SolveMetadata {
            solver: "exact".to_string(),
            wall_millis: started.elapsed().as_secs_f64() * 1e3,
            traversals: dp.memo.len() as u64,
        },
    };
    Ok(ExactOutcome { solution, score })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnt::{solve_bnt, BntConfig};
    use crate::edf::{solve_edf, EdfConfig};
    use crate::feasibility::validate;
    use crate::model::{score, score_with};
    use crate::testutil::{demand, grid_instance, grid_instance_with};

    #[test]
    fn single_node_unique_optimum() {
        let inst = grid_instance(&[[0.0, 0.0]], &[(0, 1.0)], vec![demand(0, 1.0, 3.0, (0, 4, 6))]);
        let out = solve_exact(&inst, &ExactConfig::default()).unwrap();
        assert!((out.score - 3.0).abs() < 1e-12);
        assert!((score(&out.solution, &inst) - out.score).abs() < 1e-12);
        assert!(validate(&out.solution, &inst).is_empty());
    }

    #[test]
    fn empty_instance_scores_zero() {
        let inst = grid_instance(&[[0.0, 0.0]], &[(0, 1.0)], vec![]);
        let out = solve_exact(&inst, &ExactConfig::default()).unwrap();
        assert!(out.solution.is_empty());
        assert_eq!(out.score, 0.0);
    }

    #[test]
    fn refuses_over_cap() {
        let inst = grid_instance(&[[0.0, 0.0]; 3], &[(0, 1.0); 3], vec![demand(0, 1.0, 1.0, (0, 4, 6)); 3]);
        assert_eq!(
            solve_exact(&inst, &ExactConfig::default()).unwrap_err(),
            ExactError::TooLarge { dim: 27, cap: 25 }
        );
    }

    #[test]
    fn literal_accrual_rewards_every_work_step() {
        // Hand count: one agent, w = 3 at unit rate over t = 1..3, beta = 2,
        // gamma = 4. psi(1) = psi(2) = 1, psi(3) = 1 - (3-2)/(4-2+1) = 2/3.
        let inst = grid_instance(&[[0.0, 0.0]], &[(0, 1.0)], vec![demand(0, 3.0, 1.0, (0, 2, 4))]);
        let out = solve_exact(&inst, &ExactConfig::default()).unwrap();
        assert!((out.score - (2.0 + 2.0 / 3.0)).abs() < 1e-12, "{}", out.score);
        let cfg = ExactConfig {
            accrual: Accrual::Completion,
            ..ExactConfig::default()
        };
        let out = solve_exact(&inst, &cfg).unwrap();
        assert!((out.score - 2.0 / 3.0).abs() < 1e-12);
        assert!((score_with(&out.solution, &inst, Accrual::Completion) - out.score).abs() < 1e-12);
    }

    #[test]
    fn coalition_beats_sequential_when_needed() {
        // Two agents, w = 4 in [1, 2]: only working together (u = 2 per
        // step) finishes in time.
        let inst = grid_instance(&[[0.0, 0.0]], &[(0, 1.0), (0, 1.0)], vec![demand(0, 4.0, 1.0, (0, 2, 2))]);
        let out = solve_exact(&inst, &ExactConfig::default()).unwrap();
        assert!((out.score - 2.0).abs() < 1e-12);
        assert!(out.solution.visits[0].entries.iter().all(|e| e.coalition.len() == 2));
        assert!(validate(&out.solution, &inst).is_empty());
    }

    #[test]
    fn respects_precedence() {
        let inst = grid_instance_with(
            &[[0.0, 0.0]],
            &[(0, 1.0), (0, 1.0)],
            vec![demand(0, 2.0, 1.0, (0, 6, 6)), demand(0, 1.0, 5.0, (0, 3, 6))],
            vec![(0, 1)],
        );
        let out = solve_exact(&inst, &ExactConfig::default()).unwrap();
        assert!(validate(&out.solution, &inst).is_empty());
        assert!((score(&out.solution, &inst) - out.score).abs() < 1e-12);
    }

    #[test]
    fn dominates_heuristics_on_small_instances() {
        for seed in 0..12u64 {
            let inst = crate::scenarios::tiny_instance(seed, crate::values::ValueKind::Superadditive);
            let out = solve_exact(&inst, &ExactConfig::default()).unwrap();
            assert!(validate(&out.solution, &inst).is_empty(), "seed {seed}");
            assert!((score(&out.solution, &inst) - out.score).abs() < 1e-9);
            let b = score(&solve_bnt(&inst, &BntConfig::default()), &inst);
            let e = score(&solve_edf(&inst, &EdfConfig::default()), &inst);
            assert!(out.score >= b - 1e-9 && out.score >= e - 1e-9, "seed {seed}: {} {b} {e}", out.score);
        }
    }
}
