//! Importance ordering of excluded term classes.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fcidump::IntegralTable;
use crate::hamiltonian::{ConjClass, TermSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub class: ConjClass,
    /// Nonnegative ranking score.
    pub score: f64,
    /// Signed energy contribution for energetic rankings, the score otherwise.
    pub value: f64,
}

/// Entries by nonincreasing score; equal scores by ascending canonical key.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    fn from_entries(mut entries: Vec<RankedEntry>) -> Self {
        entries.sort_by(compare);
        RankedList { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn classes(&self) -> impl Iterator<Item = &ConjClass> {
        self.entries.iter().map(|e| &e.class)
    }
}

fn compare(a: &RankedEntry, b: &RankedEntry) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.class.canonical.cmp(&b.class.canonical))
}

/// Rank by `|epsilon|`.
pub fn rank_energetic(contribs: Vec<(ConjClass, f64)>) -> RankedList {
    RankedList::from_entries(
        contribs
            .into_iter()
            .map(|(class, eps)| RankedEntry {
                class,
                // abs() maps -0.0 to +0.0 so zero scores tie
                score: eps.abs(),
                value: eps,
            })
            .collect(),
    )
}

/// Rank the classes of `pool` by their largest coefficient magnitude.
pub fn rank_coefficient(table: &IntegralTable, pool: &TermSet) -> RankedList {
    let entries = pool
        .included_classes()
        .into_par_iter()
        .map(|class| {
            let score = class.max_abs_coefficient(table);
            RankedEntry {
                class,
                score,
                value: score,
            }
        })
        .collect();
    RankedList::from_entries(entries)
}

/// The first `min(m, len)` classes.
pub fn take_top(ranked: &RankedList, m: usize) -> Vec<ConjClass> {
    ranked.classes().take(m).cloned().collect()
}
