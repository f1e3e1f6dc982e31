//! Combination classes for the Baseline2 kinds.
//!
//! Baseline2 treats every distinct (subject, predicate, object) triplet
//! type seen in training as its own class. The table fixes a deterministic
//! class order and maps between combination indices, their predicate
//! component, and the context labels they require.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// One combination class: subject label, predicate index, object label.
pub type Combo = (String, usize, String);

/// Deterministically ordered set of training combination classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComboTable {
    combos: Vec<Combo>,
}

impl ComboTable {
    /// Build from raw triplets; duplicates collapse and the class order is
    /// the sorted order, so the same training set always produces the same
    /// table.
    pub fn from_triplets<I>(triplets: I) -> Self
    where
        I: IntoIterator<Item = Combo>,
    {
        let set: BTreeSet<Combo> = triplets.into_iter().collect();
        ComboTable {
            combos: set.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.combos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.combos.is_empty()
    }

    pub fn get(&self, combo: usize) -> Option<&Combo> {
        self.combos.get(combo)
    }

    /// The predicate component of a combination class.
    pub fn combo_to_predicate(&self, combo: usize) -> Result<usize> {
        self.combos
            .get(combo)
            .map(|(_, p, _)| *p)
            .ok_or_else(|| Error::UnknownCombo(format!("index {combo} of {}", self.len())))
    }

    /// Class index of an exact triplet, if it was seen in training.
    pub fn index_of(&self, subject: &str, predicate: usize, object: &str) -> Option<usize> {
        self.combos
            .binary_search_by(|(s, p, o)| {
                (s.as_str(), *p, o.as_str()).cmp(&(subject, predicate, object))
            })
            .ok()
    }

    /// All classes whose context labels match the given pair, with their
    /// predicate components. Pairs never seen in training yield nothing;
    /// downstream scoring emits no candidates for them.
    pub fn matching_context(&self, subject: &str, object: &str) -> Vec<(usize, usize)> {
        self.combos
            .iter()
            .enumerate()
            .filter(|(_, (s, _, o))| s == subject && o == object)
            .map(|(idx, (_, p, _))| (idx, *p))
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Combo)> {
        self.combos.iter().enumerate()
    }
}
