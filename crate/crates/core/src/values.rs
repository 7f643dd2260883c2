//! Coalition value functions.
//!
//! Each [`ValueKind`] realises `u(C, v, l)`, the work a coalition does on a
//! node per time unit. Values are random but seeded: the draw for a key is
//! produced by a generator seeded from `(seed, kind, key)`, then memoised, so
//! a value is a pure function of the model and the coalition. Size-only kinds
//! key the memo on `|C|`; the other kinds key it on the member set.

use std::fmt;
use std::str::FromStr;

use dashmap::DashMap;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Coalition, LocationId, NodeId};
use crate::rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    #[default]
    Superadditive,
    Uniform,
    Normal,
    ModifiedUniform,
    ModifiedNormal,
    AgentBased,
    Ndcs,
    CongestedNdcs,
}

impl ValueKind {
    pub const ALL: [ValueKind; 8] = [
        ValueKind::Superadditive,
        ValueKind::Uniform,
        ValueKind::Normal,
        ValueKind::ModifiedUniform,
        ValueKind::ModifiedNormal,
        ValueKind::AgentBased,
        ValueKind::Ndcs,
        ValueKind::CongestedNdcs,
    ];

    /// Whether values depend on coalition size only.
    pub fn size_only(self) -> bool {
        matches!(
            self,
            ValueKind::Superadditive
                | ValueKind::Uniform
                | ValueKind::Normal
                | ValueKind::ModifiedUniform
                | ValueKind::ModifiedNormal
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            ValueKind::Superadditive => "superadditive",
            ValueKind::Uniform => "uniform",
            ValueKind::Normal => "normal",
            ValueKind::ModifiedUniform => "modified_uniform",
            ValueKind::ModifiedNormal => "modified_normal",
            ValueKind::AgentBased => "agent_based",
            ValueKind::Ndcs => "ndcs",
            ValueKind::CongestedNdcs => "congested_ndcs",
        }
    }

    fn tag(self) -> u64 {
        0x5641_4c00 + self as u64
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ValueKind {
    type Err = ValuesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ValueKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ValuesError::UnknownKind(s.to_string()))
    }
}

/// The serialisable part of a value model: `{"kind": ..., "seed": ...}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueSpec {
    pub kind: ValueKind,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ValuesError {
    #[error("coalition values are undefined for the empty coalition")]
    EmptyCoalition,
    #[error("coalition mentions agent {0} but the model has {1} agents")]
    AgentOutOfRange(usize, usize),
    #[error("{0} values are not size-based and are initialised lazily")]
    NotSizeBased(ValueKind),
    #[error("unknown value kind `{0}`")]
    UnknownKind(String),
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum MemoKey {
    Size(usize),
    Set(Coalition),
}

const SALT_AGENT: u64 = 0xa6e7;
const SALT_BASE: u64 = 0xba5e;
const SALT_COIN: u64 = 0xc011;
const SALT_CUT: u64 = 0xc07;

pub struct CoalitionValueModel {
    kind: ValueKind,
    seed: u64,
    n_agents: usize,
    memo: DashMap<MemoKey, f64>,
    agent_perf: Vec<f64>,
}

impl CoalitionValueModel {
    pub fn new(kind: ValueKind, seed: u64, n_agents: usize) -> Self {
        let agent_perf = if kind == ValueKind::AgentBased {
            (0..n_agents)
                .map(|a| rng::stream(seed, &[kind.tag(), SALT_AGENT, a as u64]).random::<f64>() * 10.0)
                .collect()
        } else {
            Vec::new()
        };
        Self {
            kind,
            seed,
            n_agents,
            memo: DashMap::new(),
            agent_perf,
        }
    }

    pub fn kind(&self) -> ValueKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn spec(&self) -> ValueSpec {
        ValueSpec {
            kind: self.kind,
            seed: self.seed,
        }
    }

    /// Individual performance `p_a` of each agent (agent-based kind only).
    pub fn agent_performance(&self) -> &[f64] {
        &self.agent_perf
    }

    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }

    /// Work done by `coalition` on `node` at `location` in one time unit.
    ///
    /// None of the built-in kinds depend on the node or location.
    pub fn value(&self, coalition: &Coalition, _node: NodeId, _location: LocationId) -> Result<f64, ValuesError> {
        if coalition.is_empty() {
            return Err(ValuesError::EmptyCoalition);
        }
        if coalition.span() > self.n_agents {
            return Err(ValuesError::AgentOutOfRange(coalition.span() - 1, self.n_agents));
        }
        if self.kind == ValueKind::Superadditive {
            return Ok(coalition.len() as f64);
        }
        let key = if self.kind.size_only() {
            MemoKey::Size(coalition.len())
        } else {
            MemoKey::Set(coalition.clone())
        };
        if let Some(v) = self.memo.get(&key) {
            return Ok(*v);
        }
        let v = self.draw(coalition);
        Ok(*self.memo.entry(key).or_insert(v))
    }

    /// Fills the memo for every coalition size up front.
    pub fn precompute_size_based(&self) -> Result<(), ValuesError> {
        if !self.kind.size_only() {
            return Err(ValuesError::NotSizeBased(self.kind));
        }
        for k in 1..=self.n_agents {
            let c: Coalition = (0..k).collect();
            let v = self.draw(&c);
            self.memo.entry(MemoKey::Size(k)).or_insert(v);
        }
        Ok(())
    }

    /// Memoised values of the size table, `(size, value)` in size order.
    pub fn size_table(&self) -> Vec<(usize, f64)> {
        let mut t: Vec<_> = self
            .memo
            .iter()
            .filter_map(|e| match e.key() {
                MemoKey::Size(k) => Some((*k, *e.value())),
                MemoKey::Set(_) => None,
            })
            .collect();
        t.sort_by_key(|e| e.0);
        t
    }

    fn draw(&self, c: &Coalition) -> f64 {
        let size = c.len() as f64;
        let tag = self.kind.tag();
        let size_key = [tag, c.len() as u64];
        let v = match self.kind {
            ValueKind::Superadditive => size,
            ValueKind::Uniform => rng::stream(self.seed, &size_key).random::<f64>() * size,
            ValueKind::Normal => {
                let mut r = rng::stream(self.seed, &size_key);
                gaussian(&mut r, 10.0 * size, 0.01)
            }
            ValueKind::ModifiedUniform => {
                let mut r = rng::stream(self.seed, &size_key);
                let base = r.random::<f64>() * 10.0 * size;
                base + bonus(&mut r)
            }
            ValueKind::ModifiedNormal => {
                let mut r = rng::stream(self.seed, &size_key);
                let base = gaussian(&mut r, 10.0 * size, 0.01);
                base + bonus(&mut r)
            }
            ValueKind::AgentBased => {
                let mut r = rng::stream(self.seed, &set_key(tag, c));
                c.members()
                    .map(|a| r.random::<f64>() * 2.0 * self.agent_perf[a])
                    .sum()
            }
            ValueKind::Ndcs => self.ndcs_base(c),
            ValueKind::CongestedNdcs => {
                let omega = self.ndcs_base(c);
                let mut key = set_key(tag, c);
                key.push(SALT_COIN);
                let congested = rng::stream(self.seed, &key).random::<f64>() < size / (self.n_agents as f64 + 1.0);
                if congested {
                    *key.last_mut().unwrap() = SALT_CUT;
                    let cut = omega / 10.0 + rng::stream(self.seed, &key).random::<f64>() * (omega - omega / 10.0);
                    omega - cut
                } else {
                    omega
                }
            }
        };
        v.max(0.0)
    }

    /// The NDCS draw for `c`; shared by both NDCS kinds so congestion only
    /// ever lowers the plain value.
    fn ndcs_base(&self, c: &Coalition) -> f64 {
        let mut key = set_key(ValueKind::Ndcs.tag(), c);
        key.push(SALT_BASE);
        let size = c.len() as f64;
        gaussian(&mut rng::stream(self.seed, &key), size, size.sqrt()).max(0.0)
    }
}

fn set_key(tag: u64, c: &Coalition) -> Vec<u64> {
    let mut key = Vec::with_capacity(c.words().len() + 2);
    key.push(tag);
    key.push(c.words().len() as u64);
    key.extend_from_slice(c.words());
    key
}

fn gaussian(r: &mut impl Rng, mean: f64, std_dev: f64) -> f64 {
    Normal::new(mean, std_dev).expect("finite parameters").sample(r)
}

/// `U(0, 50)` with probability 1/5, else 0.
fn bonus(r: &mut impl Rng) -> f64 {
    if r.random::<f64>() < 0.2 {
        r.random::<f64>() * 50.0
    } else {
        0.0
    }
}

impl Clone for CoalitionValueModel {
    fn clone(&self) -> Self {
        Self::new(self.kind, self.seed, self.n_agents)
    }
}

impl fmt::Debug for CoalitionValueModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoalitionValueModel")
            .field("kind", &self.kind)
            .field("seed", &self.seed)
            .field("n_agents", &self.n_agents)
            .field("memo_len", &self.memo.len())
            .finish()
    }
}
