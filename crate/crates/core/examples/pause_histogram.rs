//! Writes per-group 10 ms pause histograms as CSV (full range and the
//! long-pause view from 0.8 s) and prints a coarse text rendering.
//!
//! ```text
//! cargo run --example pause_histogram -- out_dir
//! ```

use std::fs;
use std::path::PathBuf;

use pause_lm::eval::pause_stats;
use pause_lm::synth::{generate, SynthSpec};

fn main() -> pause_lm::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let corpus = generate(&SynthSpec { n_per_group: 100, seed: 4, ..SynthSpec::default() })?;
    let stats = pause_stats(&corpus);
    let full = dir.join("pause_histogram.csv");
    let long = dir.join("pause_histogram_long.csv");
    fs::write(&full, stats.histogram.to_csv()).expect("write csv");
    fs::write(&long, stats.histogram.long_pause_csv()).expect("write csv");
    println!("wrote {} and {}", full.display(), long.display());

    // 100 ms buckets up to 1.5 s.
    for (group, counts) in &stats.histogram.groups {
        println!("\n{group}");
        let buckets: Vec<u64> = counts.chunks(10).take(15).map(|c| c.iter().sum()).collect();
        let tallest = buckets.iter().copied().max().unwrap_or(0).max(1);
        for (b, &n) in buckets.iter().enumerate() {
            println!("{:>4.1}s {:>5} {}", b as f64 / 10.0, n, "#".repeat((60 * n / tallest) as usize));
        }
        let g = &stats.groups[group];
        println!("long pauses (0.8-3.0 s): {} with mean {:.3}s", g.long.count, g.long.mean);
    }
    Ok(())
}
