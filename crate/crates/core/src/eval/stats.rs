//! Pause-duration histograms and moments per group.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::group_name;
use crate::ingest::{extract_intervals, Transcript};
use crate::tokenizer::{quantize_seconds, BIN_WIDTH_S, N_BINS};

/// First bin of the long-pause view (0.8 s).
pub const LONG_PAUSE_FIRST_BIN: usize = 80;
pub const LONG_PAUSE_MIN_S: f64 = 0.8;
pub const LONG_PAUSE_MAX_S: f64 = 3.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    /// Unbiased sample variance; 0 for fewer than two values.
    pub variance: f64,
}

impl Moments {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Moments::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let variance =
            if n > 1 { values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Moments { count: n as u64, mean, variance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPauseStats {
    pub all: Moments,
    /// Pauses within [0.8, 3.0] s.
    pub long: Moments,
}

/// 10 ms bin counts per group.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PauseHistogram {
    pub groups: BTreeMap<String, Vec<u64>>,
}

impl PauseHistogram {
    /// `bin_start_s,bin_end_s,group,count`, bins from `first_bin` up.
    fn csv_from(&self, first_bin: usize) -> String {
        let mut out = String::from("bin_start_s,bin_end_s,group,count\n");
        for (group, counts) in &self.groups {
            for (b, c) in counts.iter().enumerate().skip(first_bin) {
                let start = b as f64 * BIN_WIDTH_S;
                let _ = writeln!(out, "{:.2},{:.2},{},{}", start, start + BIN_WIDTH_S, group, c);
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        self.csv_from(0)
    }

    /// Only the bins covering [0.8 s, 3.0 s).
    pub fn long_pause_csv(&self) -> String {
        self.csv_from(LONG_PAUSE_FIRST_BIN)
    }

    pub fn total(&self, group: &str) -> u64 {
        self.groups.get(group).map(|c| c.iter().sum()).unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauseStats {
    #[serde(skip)]
    pub histogram: PauseHistogram,
    pub groups: BTreeMap<String, GroupPauseStats>,
}

/// Histogram and moments of inter-word pauses. The terminal pause of each
/// transcript (0 by convention, not an observed gap) is excluded.
pub fn pause_stats(dataset: &[Transcript]) -> PauseStats {
    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for t in dataset {
        let iv = extract_intervals(t);
        let gaps = &iv.pauses[..iv.pauses.len().saturating_sub(1)];
        values.entry(group_name(t.label).to_string()).or_default().extend_from_slice(gaps);
    }
    let mut histogram = PauseHistogram::default();
    let mut groups = BTreeMap::new();
    for (g, v) in values {
        let mut counts = vec![0u64; N_BINS];
        for &p in &v {
            // Pauses come from validated finite timestamps.
            counts[quantize_seconds(p).expect("finite pause")] += 1;
        }
        let long: Vec<f64> = v.iter().copied().filter(|p| (LONG_PAUSE_MIN_S..=LONG_PAUSE_MAX_S).contains(p)).collect();
        groups.insert(g.clone(), GroupPauseStats { all: Moments::of(&v), long: Moments::of(&long) });
        histogram.groups.insert(g, counts);
    }
    PauseStats { histogram, groups }
}
