//! Seeded two-population corpus generator with lognormal word durations and
//! pauses.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{normalize_word, Label, TimedWord, Transcript};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupTiming {
    /// Log-space mean and std of word durations.
    pub duration_mu: f64,
    pub duration_sigma: f64,
    /// Log-space mean and std of pauses.
    pub pause_mu: f64,
    pub pause_sigma: f64,
}

impl GroupTiming {
    pub fn new(duration_median_s: f64, duration_sigma: f64, pause_median_s: f64, pause_sigma: f64) -> Self {
        GroupTiming { duration_mu: duration_median_s.ln(), duration_sigma, pause_mu: pause_median_s.ln(), pause_sigma }
    }

    /// `exp(mu + sigma^2 / 2)`.
    pub fn expected_pause(&self) -> f64 {
        (self.pause_mu + self.pause_sigma * self.pause_sigma / 2.0).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextMode {
    /// Both groups draw from the whole template pool.
    #[default]
    Shared,
    /// Control draws even-indexed templates, AD odd-indexed ones.
    GroupSpecific,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub n_per_group: usize,
    pub words_min: usize,
    pub words_max: usize,
    pub text_mode: TextMode,
    pub seed: u64,
    pub id_prefix: String,
    pub templates: Vec<String>,
    pub control: GroupTiming,
    pub ad: GroupTiming,
}

const DEFAULT_TEMPLATES: [&str; 12] = [
    "the boy is reaching for the jar on the shelf",
    "the woman is drying a plate at the sink",
    "water is running over the edge of the sink",
    "the girl is asking for something to eat",
    "the stool is tipping over under him",
    "there are cups and dishes on the counter",
    "she looks out of the window at the garden",
    "the curtains are open and the sun is out",
    "he is handing a cookie to his sister",
    "the mother does not notice the water",
    "there is a path and some trees outside",
    "the cupboard door is open above the counter",
];

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_per_group: 100,
            words_min: 36,
            words_max: 44,
            text_mode: TextMode::Shared,
            seed: 0,
            id_prefix: "synth".into(),
            templates: DEFAULT_TEMPLATES.iter().map(|s| s.to_string()).collect(),
            control: GroupTiming::new(0.3, 0.3, 0.15, 0.4),
            ad: GroupTiming::new(0.3, 0.3, 0.45, 0.4),
        }
    }
}

impl SynthSpec {
    pub fn timing(&self, label: Label) -> &GroupTiming {
        match label {
            Label::Control => &self.control,
            Label::Ad => &self.ad,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(format!("synth: {m}")));
        if self.words_min == 0 || self.words_min > self.words_max {
            return fail(format!("need 1 <= words_min <= words_max, got {}..{}", self.words_min, self.words_max));
        }
        for (name, g) in [("control", &self.control), ("ad", &self.ad)] {
            let ok = g.duration_sigma > 0.0
                && g.pause_sigma > 0.0
                && g.duration_mu.is_finite()
                && g.pause_mu.is_finite()
                && g.duration_sigma.is_finite()
                && g.pause_sigma.is_finite();
            if !ok {
                return fail(format!("{name}: mu must be finite and sigma > 0"));
            }
        }
        if self.templates.is_empty() {
            return fail("template pool is empty".into());
        }
        if self.text_mode == TextMode::GroupSpecific && self.templates.len() < 2 {
            return fail("group_specific text needs at least two templates".into());
        }
        for (i, t) in self.templates.iter().enumerate() {
            let words: Vec<&str> = t.split_whitespace().collect();
            if words.is_empty() || words.iter().any(|w| normalize_word(w).is_empty()) {
                return fail(format!("template {i} has an empty word"));
            }
        }
        if self.id_prefix.is_empty() {
            return fail("id_prefix is empty".into());
        }
        Ok(())
    }

    fn pool(&self, label: Label) -> Vec<Vec<&str>> {
        self.templates
            .iter()
            .enumerate()
            .filter(|(i, _)| match self.text_mode {
                TextMode::Shared => true,
                TextMode::GroupSpecific => i % 2 == label.as_index(),
            })
            .map(|(_, t)| t.split_whitespace().collect())
            .collect()
    }
}

/// Generates `2 * n_per_group` labeled transcripts, control first.
/// `end_i = start_i + duration_i`, `start_{i+1} = end_i + pause_i`, with both
/// draws clamped to [0, 3] s.
pub fn generate(spec: &SynthSpec) -> Result<Vec<Transcript>> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, Stream::Synth, 0);
    let mut out = Vec::with_capacity(2 * spec.n_per_group);
    for label in [Label::Control, Label::Ad] {
        let timing = spec.timing(label);
        let durations = LogNormal::new(timing.duration_mu, timing.duration_sigma)
            .map_err(|e| Error::Config(format!("synth: {e}")))?;
        let pauses =
            LogNormal::new(timing.pause_mu, timing.pause_sigma).map_err(|e| Error::Config(format!("synth: {e}")))?;
        let pool = spec.pool(label);
        for i in 0..spec.n_per_group {
            let n_words = rng.random_range(spec.words_min..=spec.words_max);
            let mut text: Vec<&str> = Vec::with_capacity(n_words + 16);
            while text.len() < n_words {
                text.extend_from_slice(&pool[rng.random_range(0..pool.len())]);
            }
            text.truncate(n_words);
            let mut t = 0.0;
            let mut words = Vec::with_capacity(n_words);
            for w in text {
                let d = durations.sample(&mut rng).clamp(0.0, 3.0);
                let p = pauses.sample(&mut rng).clamp(0.0, 3.0);
                words.push(TimedWord::new(w, t, t + d));
                t = t + d + p;
            }
            out.push(Transcript {
                id: format!("{}-{}-{:05}", spec.id_prefix, label.name(), i),
                label: Some(label),
                words,
            });
        }
    }
    Ok(out)
}

/// Pearson chi-square statistic comparing normalized word counts between the
/// two groups, with its degrees of freedom. A sanity signal only.
pub fn word_chi_square(transcripts: &[Transcript]) -> (f64, usize) {
    let mut table: BTreeMap<String, [f64; 2]> = BTreeMap::new();
    for t in transcripts {
        let Some(label) = t.label else { continue };
        for w in &t.words {
            table.entry(w.normalized()).or_insert([0.0; 2])[label.as_index()] += 1.0;
        }
    }
    let col = table.values().fold([0.0; 2], |acc, r| [acc[0] + r[0], acc[1] + r[1]]);
    let total = col[0] + col[1];
    if total == 0.0 || col[0] == 0.0 || col[1] == 0.0 {
        return (0.0, 0);
    }
    let mut chi = 0.0;
    for r in table.values() {
        let row = r[0] + r[1];
        for g in 0..2 {
            let e = row * col[g] / total;
            chi += (r[g] - e) * (r[g] - e) / e;
        }
    }
    (chi, table.len().saturating_sub(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{extract_intervals, to_jsonl, validate_dataset};

    #[test]
    fn zero_per_group_is_empty() {
        let spec = SynthSpec { n_per_group: 0, ..SynthSpec::default() };
        assert!(generate(&spec).unwrap().is_empty());
    }

    #[test]
    fn counts_labels_and_validity() {
        let spec = SynthSpec { n_per_group: 7, ..SynthSpec::default() };
        let ts = generate(&spec).unwrap();
        assert_eq!(ts.len(), 14);
        assert_eq!(ts.iter().filter(|t| t.label == Some(Label::Ad)).count(), 7);
        validate_dataset(&ts).unwrap();
        for t in &ts {
            assert!((spec.words_min..=spec.words_max).contains(&t.words.len()));
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = SynthSpec { n_per_group: 5, seed: 42, ..SynthSpec::default() };
        assert_eq!(to_jsonl(&generate(&spec).unwrap()), to_jsonl(&generate(&spec).unwrap()));
        let other = SynthSpec { seed: 43, ..spec.clone() };
        assert_ne!(to_jsonl(&generate(&spec).unwrap()), to_jsonl(&generate(&other).unwrap()));
    }

    #[test]
    fn timeline_tiles_exactly() {
        let ts = generate(&SynthSpec { n_per_group: 3, ..SynthSpec::default() }).unwrap();
        for t in &ts {
            let iv = extract_intervals(t);
            let span = t.words.last().unwrap().end - t.words[0].start;
            let sum: f64 = iv.durations.iter().sum::<f64>() + iv.pauses.iter().sum::<f64>();
            assert!((span - sum).abs() < 1e-9, "{span} vs {sum}");
        }
    }

    #[test]
    fn group_specific_splits_templates() {
        let spec = SynthSpec {
            n_per_group: 20,
            text_mode: TextMode::GroupSpecific,
            templates: vec!["alpha beta".into(), "gamma delta".into()],
            ..SynthSpec::default()
        };
        let ts = generate(&spec).unwrap();
        for t in ts {
            let allowed: &[&str] =
                if t.label == Some(Label::Control) { &["alpha", "beta"] } else { &["gamma", "delta"] };
            assert!(t.words.iter().all(|w| allowed.contains(&w.text.as_str())));
        }
    }

    #[test]
    fn invalid_specs() {
        let bad_sigma =
            SynthSpec { ad: GroupTiming { pause_sigma: 0.0, ..SynthSpec::default().ad }, ..SynthSpec::default() };
        assert!(generate(&bad_sigma).is_err());
        assert!(generate(&SynthSpec { words_min: 5, words_max: 4, ..SynthSpec::default() }).is_err());
        assert!(generate(&SynthSpec { templates: vec![], ..SynthSpec::default() }).is_err());
    }

    #[test]
    fn chi_square_is_zero_for_identical_counts() {
        let mk = |id: &str, label| Transcript {
            id: id.into(),
            label: Some(label),
            words: vec![TimedWord::new("a", 0.0, 0.1), TimedWord::new("b", 0.2, 0.3)],
        };
        let (chi, dof) = word_chi_square(&[mk("x", Label::Control), mk("y", Label::Ad)]);
        assert_eq!(chi, 0.0);
        assert_eq!(dof, 1);
    }
}
