use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use smallvec::SmallVec;

use super::AgentId;

/// A set of agents, stored as a bit-set over agent ids.
///
/// The representation is canonical: trailing zero words are trimmed, so two
/// coalitions with the same members compare and hash equal regardless of how
/// they were built.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coalition {
    words: SmallVec<[u64; 2]>,
}

impl Coalition {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(agent: AgentId) -> Self {
        let mut c = Self::new();
        c.insert(agent);
        c
    }

    pub fn insert(&mut self, agent: AgentId) {
        let (word, bit) = (agent / 64, agent % 64);
        if self.words.len() <= word {
            self.words.resize(word + 1, 0);
        }
        self.words[word] |= 1 << bit;
    }

    pub fn remove(&mut self, agent: AgentId) {
        let (word, bit) = (agent / 64, agent % 64);
        if let Some(w) = self.words.get_mut(word) {
            *w &= !(1 << bit);
        }
        self.trim();
    }

    pub fn contains(&self, agent: AgentId) -> bool {
        let (word, bit) = (agent / 64, agent % 64);
        self.words.get(word).is_some_and(|w| w & (1 << bit) != 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Largest member id plus one, or zero for the empty coalition.
    pub fn span(&self) -> usize {
        match self.words.last() {
            Some(w) => (self.words.len() - 1) * 64 + (64 - w.leading_zeros() as usize),
            None => 0,
        }
    }

    pub fn is_subset(&self, other: &Coalition) -> bool {
        self.words
            .iter()
            .enumerate()
            .all(|(i, w)| w & !other.words.get(i).copied().unwrap_or(0) == 0)
    }

    /// Members in ascending id order.
    pub fn members(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let bit = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i * 64 + bit)
            })
        })
    }

    /// Raw words of the canonical bit-set, lowest agent ids first.
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    fn trim(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }
}

impl FromIterator<AgentId> for Coalition {
    fn from_iter<I: IntoIterator<Item = AgentId>>(iter: I) -> Self {
        let mut c = Coalition::new();
        for a in iter {
            c.insert(a);
        }
        c
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.members()).finish()
    }
}

impl Serialize for Coalition {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.members())
    }
}

impl<'de> Deserialize<'de> for Coalition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let members = Vec::<AgentId>::deserialize(deserializer)?;
        Ok(members.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_after_remove() {
        let mut a: Coalition = [3, 70].into_iter().collect();
        a.remove(70);
        assert_eq!(a, Coalition::singleton(3));
        assert_eq!(a.words().len(), 1);
    }

    #[test]
    fn members_ascending() {
        let c: Coalition = [130, 2, 64, 0].into_iter().collect();
        assert_eq!(c.members().collect::<Vec<_>>(), vec![0, 2, 64, 130]);
        assert_eq!(c.len(), 4);
        assert_eq!(c.span(), 131);
        assert!(c.contains(64));
        assert!(!c.contains(65));
    }

    #[test]
    fn subset() {
        let small: Coalition = [1, 2].into_iter().collect();
        let big: Coalition = [1, 2, 100].into_iter().collect();
        assert!(small.is_subset(&big));
        assert!(!big.is_subset(&small));
        assert!(Coalition::new().is_subset(&small));
    }

    #[test]
    fn serde_as_member_list() {
        let c: Coalition = [5, 1].into_iter().collect();
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(json, "[1,5]");
        let back: Coalition = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }
}
