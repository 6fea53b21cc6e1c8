//! Probes the input embedding with one-hot tables to show that each
//! position receives `word + position + concat(duration, pause)`, and that
//! the ablation flags zero the corresponding half.
//!
//! ```text
//! cargo run --example embedding_probe
//! ```

use pause_lm::model::{compose_embeddings, ModelConfig, ModelParams};
use pause_lm::tokenizer::PauseToken;

fn main() -> pause_lm::Result<()> {
    let cfg = ModelConfig { d_model: 8, n_heads: 2, vocab_size: 10, ..ModelConfig::default() };
    let mut p = ModelParams::zeros(&cfg);
    p.word_table.row_mut(7).fill(1.0);
    p.pos_table.row_mut(0).fill(0.1);
    p.dur_table.row_mut(25).fill(10.0);
    p.pause_table.row_mut(42).fill(100.0);
    let tok = [PauseToken { dur_bin: 25, pause_bin: 42 }];

    for (name, disable_duration, disable_pause) in
        [("full", false, false), ("no duration", true, false), ("no pause", false, true), ("neither", true, true)]
    {
        let c = ModelConfig { disable_duration, disable_pause, ..cfg.clone() };
        let e = compose_embeddings(&[7], &tok, &p, &c)?;
        println!("{name:<12} {:?}", e.row(0));
    }
    Ok(())
}
