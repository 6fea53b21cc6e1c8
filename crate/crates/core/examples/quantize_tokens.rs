//! Turns one timestamped transcript into the joint word and pause-token
//! sequence the model consumes.
//!
//! ```text
//! cargo run --example quantize_tokens
//! ```

use pause_lm::ingest::{extract_intervals, parse_jsonl};
use pause_lm::tokenizer::{bin_center, encode, Vocabulary, NULL_BIN};

const RECORD: &str = r#"{"id": "demo", "label": 1, "words": [
  {"w": "The", "start": 0.00, "end": 0.21},
  {"w": "boy", "start": 0.24, "end": 0.55},
  {"w": "is", "start": 1.62, "end": 1.70},
  {"w": "um", "start": 2.10, "end": 2.43},
  {"w": "reaching.", "start": 5.90, "end": 6.41}
]}"#;

fn main() -> pause_lm::Result<()> {
    let transcripts = parse_jsonl(&RECORD.replace('\n', " "))?;
    let t = &transcripts[0];
    let iv = extract_intervals(t);
    let vocab = Vocabulary::build(&transcripts, 1)?;
    let seq = &encode(t, &iv, &vocab, 16)?[0];

    println!("{:<4} {:<10} {:>7} {:>7} {:>8} {:>9}", "pos", "token", "dur_bin", "pau_bin", "pause_s", "decoded_s");
    for pos in 0..seq.active_len() {
        let tok = seq.pause_tokens[pos];
        let decoded =
            if tok.pause_bin == NULL_BIN { "-".to_string() } else { format!("{:.3}", bin_center(tok.pause_bin)?) };
        println!(
            "{:<4} {:<10} {:>7} {:>7} {:>8.3} {:>9}",
            pos,
            vocab.token(seq.word_ids[pos]).unwrap_or("?"),
            tok.dur_bin,
            tok.pause_bin,
            seq.pause_seconds[pos],
            decoded
        );
    }
    println!("pauses beyond 2.99 s share bin 299; special positions carry NULL_BIN = {NULL_BIN}");
    Ok(())
}
