use serde::{Deserialize, Serialize};

use crate::mdp::{ControlAction, DiscreteState, N_ACTIONS, N_STATES};

/// Tabular action values over the ten states and nine feed levels.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QTable {
    pub values: [[f64; N_ACTIONS]; N_STATES],
    pub visits: [[u64; N_ACTIONS]; N_STATES],
}

impl QTable {
    pub fn zeros() -> Self {
        Self::default()
    }

    pub fn from_values(values: [[f64; N_ACTIONS]; N_STATES]) -> Self {
        Self {
            values,
            visits: [[0; N_ACTIONS]; N_STATES],
        }
    }

    pub fn get(&self, s: DiscreteState, a: ControlAction) -> f64 {
        self.values[s.index()][a.index()]
    }

    pub fn set(&mut self, s: DiscreteState, a: ControlAction, value: f64) {
        self.values[s.index()][a.index()] = value;
    }

    pub fn row(&self, s: DiscreteState) -> &[f64; N_ACTIONS] {
        &self.values[s.index()]
    }

    pub fn max_value(&self, s: DiscreteState) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Highest-valued action; ties go to the lowest feed level.
    pub fn greedy(&self, s: DiscreteState) -> ControlAction {
        let row = self.row(s);
        let mut best = 0;
        for (i, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = i;
            }
        }
        ControlAction::from_index(best)
    }

    /// The `k` highest-valued actions in descending order, ties by lowest level.
    pub fn top_k(&self, s: DiscreteState, k: usize) -> Vec<ControlAction> {
        let row = self.row(s);
        let mut idx: Vec<usize> = (0..N_ACTIONS).collect();
        // stable sort keeps lower indices first among equal values
        idx.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap_or(std::cmp::Ordering::Equal));
        idx.into_iter()
            .take(k.min(N_ACTIONS))
            .map(ControlAction::from_index)
            .collect()
    }

    pub(crate) fn visit(&mut self, s: DiscreteState, a: ControlAction) {
        self.visits[s.index()][a.index()] += 1;
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }

    /// Cell-wise maximum of values and of visit counts, so combining a table
    /// with itself returns it unchanged.
    pub fn elementwise_max(&self, other: &QTable) -> QTable {
        let mut out = QTable::zeros();
        for s in 0..N_STATES {
            for a in 0..N_ACTIONS {
                out.values[s][a] = self.values[s][a].max(other.values[s][a]);
                out.visits[s][a] = self.visits[s][a].max(other.visits[s][a]);
            }
        }
        out
    }
}
