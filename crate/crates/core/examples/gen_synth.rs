//! Generates a small two-group corpus, writes it as JSONL and prints
//! per-group pause moments next to the lognormal expectation.
//!
//! ```text
//! cargo run --example gen_synth -- corpus.jsonl
//! ```

use pause_lm::eval::pause_stats;
use pause_lm::ingest::{parse_dataset, write_dataset, Label};
use pause_lm::synth::{generate, word_chi_square, SynthSpec, TextMode};

fn main() -> pause_lm::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synth.jsonl".into());
    let spec = SynthSpec { n_per_group: 50, seed: 3, ..SynthSpec::default() };
    let corpus = generate(&spec)?;
    write_dataset(&out, &corpus)?;
    let reread = parse_dataset(&out)?;
    println!("wrote {} transcripts to {out} (re-read {})", corpus.len(), reread.len());

    let stats = pause_stats(&corpus);
    for label in [Label::Control, Label::Ad] {
        let m = &stats.groups[label.name()].all;
        println!(
            "{:<8} pauses {:>5}  mean {:.3}s  var {:.4}  expected mean {:.3}s",
            label.name(),
            m.count,
            m.mean,
            m.variance,
            spec.timing(label).expected_pause()
        );
    }

    let (shared, dof) = word_chi_square(&corpus);
    let specific = generate(&SynthSpec { text_mode: TextMode::GroupSpecific, ..spec })?;
    let (split, split_dof) = word_chi_square(&specific);
    println!("word chi-square, shared text: {shared:.1} on {dof} dof");
    println!("word chi-square, group-specific text: {split:.1} on {split_dof} dof");
    Ok(())
}
