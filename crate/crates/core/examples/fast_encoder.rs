//! Radius-first list decoding on a multi-shell codebook: distortion penalty
//! and distance evaluations against exhaustive search.
//!
//! ```bash
//! cargo run --release --example fast_encoder
//! ```

use fibquant::codebook::{multishell_init, shell_polish};
use fibquant::codec::{FastEncoder, FastEncoderConfig};
use fibquant::eval::{fast_complexity, fast_penalty};
use fibquant::source::sample_blocks;

fn main() -> fibquant::Result<()> {
    let d = 64;
    for k in [2, 4, 8] {
        let train = sample_blocks(d, k, 256 * 100, 3)?;
        let cb = shell_polish(&multishell_init(d, k, 16, 16)?, &train, 16, 10)?;
        for list in [1, 2, 4] {
            let fe = FastEncoder::new(
                cb.clone(),
                FastEncoderConfig {
                    shells: 16,
                    parents: 4,
                    list,
                    seed: 1,
                },
            )?;
            let p = fast_penalty(&fe, d, 50_000, 9)?;
            println!(
                "k={k} T={list}: penalty {:+.3} dB, {:.1} evaluations per block (exhaustive: 256), {:.1}% blocks differ",
                p.penalty_db,
                p.mean_evaluations,
                100.0 * p.mismatch_rate
            );
        }
    }
    let ns = [256, 1024, 4096, 16384];
    for (n, evals) in fast_complexity(d, 8, &ns, 2, 2000, 1)? {
        println!("N={n:>5}: {evals:>7.1} evaluations per block");
    }
    Ok(())
}
