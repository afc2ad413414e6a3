//! Builds a Beta-quantile codebook, refines it with multi-restart Lloyd,
//! writes it as FQCB and reads it back.
//!
//! ```bash
//! cargo run --release --example build_codebook -- 64 2 64
//! ```

use fibquant::codebook::{build_codebook, deserialize_codebook, serialize_codebook, BuildOptions, Layout};
use fibquant::eval::held_out_mse;
use fibquant::LloydConfig;

fn main() -> fibquant::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let d = args.next().unwrap_or(64);
    let k = args.next().unwrap_or(2);
    let n = args.next().unwrap_or(64);

    let built = build_codebook(d, k, n, &BuildOptions::new(Layout::BetaQuantile, LloydConfig::standard(n, 1)))?;
    for r in &built.report.restarts {
        println!(
            "restart {}: {:.6e} -> {:.6e} ({} iterations, {} repairs)",
            r.restart,
            r.initial,
            r.final_distortion,
            r.after_centroid.len(),
            r.repairs
        );
    }
    println!("best restart: {}", built.report.best_restart);

    let init = held_out_mse(&built.init, d, 100_000, 99)?;
    let refined = held_out_mse(&built.codebook, d, 100_000, 99)?;
    println!("held-out per-coordinate MSE: init {:.6e}, refined {:.6e}", init.mean, refined.mean);

    let bytes = serialize_codebook(&built.codebook);
    let back = deserialize_codebook(&bytes)?;
    println!("FQCB: {} bytes, hash {:#018x}", bytes.len(), back.content_hash());
    assert_eq!(back.codewords(), built.codebook.codewords());
    Ok(())
}
