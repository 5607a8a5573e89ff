//! Running non-dominated set over (accuracy, cost).

use serde::{Deserialize, Serialize};

use crate::genotype::Individual;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveRecord {
    pub genotype: Individual,
    pub accuracy: f64,
    pub cost: u64,
    pub delta_c: f64,
    pub fitness: f64,
}

/// `a` dominates `b` when it is at least as accurate and at most as costly,
/// and strictly better in one of the two.
pub fn dominates(a_acc: f64, a_cost: u64, b_acc: f64, b_cost: u64) -> bool {
    a_acc >= b_acc && a_cost <= b_cost && (a_acc > b_acc || a_cost < b_cost)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParetoArchive {
    records: Vec<ArchiveRecord>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts `rec` unless an existing member dominates it or already sits
    /// at the same (accuracy, cost) point. Evicts members `rec` dominates.
    /// Returns whether it was inserted.
    pub fn offer(&mut self, rec: ArchiveRecord) -> bool {
        let blocked = self.records.iter().any(|m| {
            dominates(m.accuracy, m.cost, rec.accuracy, rec.cost)
                || (m.accuracy == rec.accuracy && m.cost == rec.cost)
        });
        if blocked {
            return false;
        }
        self.records
            .retain(|m| !dominates(rec.accuracy, rec.cost, m.accuracy, m.cost));
        self.records.push(rec);
        true
    }

    pub fn records(&self) -> &[ArchiveRecord] {
        &self.records
    }

    /// Members ordered by increasing cost.
    pub fn sorted_by_cost(&self) -> Vec<&ArchiveRecord> {
        let mut v: Vec<_> = self.records.iter().collect();
        v.sort_by(|a, b| a.cost.cmp(&b.cost).then(b.accuracy.total_cmp(&a.accuracy)));
        v
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}
