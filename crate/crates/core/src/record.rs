//! Sampled time series of one simulation run.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::scenario::ScenarioSpec;
use crate::sim::SimConfig;
use crate::spacevec::PerUnitBase;

/// Per-string signals, in column order. Recorded as `s<k>_<signal>`.
pub const STRING_SIGNALS: [&str; 10] = [
    "vpcc", "p", "q", "p_virt", "q_virt", "i", "i_ref0", "omega", "v_ref", "phi_rel",
];

/// Link-level signals appended after all strings.
pub const LINK_SIGNALS: [&str; 3] = ["v_on", "v_dc_off", "i_dc"];

pub fn string_column(string: usize, signal: &str) -> String {
    format!("s{}_{}", string + 1, signal)
}

/// Fixed column layout for `n_strings` strings.
pub fn column_names(n_strings: usize) -> Vec<String> {
    let mut cols = Vec::with_capacity(1 + n_strings * STRING_SIGNALS.len() + LINK_SIGNALS.len());
    cols.push(String::from("t"));
    for k in 0..n_strings {
        cols.extend(STRING_SIGNALS.iter().map(|s| string_column(k, s)));
    }
    cols.extend(LINK_SIGNALS.iter().map(|s| String::from(*s)));
    cols
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum RunStatus {
    Converged,
    /// Run aborted at `t` because a state left the admissible range.
    Diverged {
        t: f64,
    },
}

impl RunStatus {
    pub fn diverged_at(&self) -> Option<f64> {
        match self {
            Self::Converged => None,
            Self::Diverged { t } => Some(*t),
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RecordHeader {
    pub version: String,
    pub scenario: ScenarioSpec,
    pub config: SimConfig,
    pub system_base: PerUnitBase,
    pub string_bases: Vec<PerUnitBase>,
    /// Virtual inertia `M = 2 H omega_base` of each string, pu time.
    pub inertia_m: Vec<f64>,
    pub status: RunStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub header: RecordHeader,
    pub columns: Vec<String>,
    /// Column-major samples; every column has the same length.
    pub data: Vec<Vec<f64>>,
}

impl RunRecord {
    pub fn new(header: RecordHeader, columns: Vec<String>) -> Self {
        let data = columns.iter().map(|_| Vec::new()).collect();
        Self { header, columns, data }
    }

    pub fn status(&self) -> RunStatus {
        self.header.status
    }

    pub fn n_strings(&self) -> usize {
        (self.columns.len() - 1 - LINK_SIGNALS.len()) / STRING_SIGNALS.len()
    }

    pub fn len(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends one row; `row` must match the column count.
    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match columns");
        for (col, &v) in self.data.iter_mut().zip(row) {
            col.push(v);
        }
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .position(|c| c == name)
            .map(|i| self.data[i].as_slice())
    }

    pub fn time(&self) -> &[f64] {
        &self.data[0]
    }

    pub fn string_signal(&self, string: usize, signal: &str) -> Option<&[f64]> {
        self.column(&string_column(string, signal))
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data.iter().map(|c| c[i]).collect()
    }
}
