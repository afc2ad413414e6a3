//! Per-vector cosine and NMSE of the full pipeline on Gaussian rows, for
//! FibQuant and scalar Lloyd–Max.
//!
//! ```bash
//! cargo run --release --example fidelity_table
//! ```

use fibquant::eval::{fidelity_sweep, CodecSpec, FidelityConfig, LloydPolicy};

fn main() -> fibquant::Result<()> {
    let cfg = FidelityConfig {
        d: 64,
        codecs: vec![
            CodecSpec::FibQuant { k: 2, n: 64 },
            CodecSpec::FibQuant { k: 4, n: 256 },
            CodecSpec::FibQuant { k: 8, n: 256 },
            CodecSpec::Scalar { bits: 4 },
            CodecSpec::Scalar { bits: 3 },
            CodecSpec::Scalar { bits: 2 },
        ],
        tokens: 10_000,
        queries: 0,
        seeds: vec![1],
        lloyd: LloydPolicy::default(),
    };
    println!("{:<20} {:>6} {:>8} {:>10}", "codec", "b", "cosine", "NMSE dB");
    for p in fidelity_sweep(&cfg)? {
        let name = format!("{} k={} N={}", p.codec, p.k, p.n);
        println!(
            "{name:<20} {:>6.3} {:>8.4} {:>10.2}",
            p.rate_bits_per_coord,
            p.mean_cosine.unwrap_or(f64::NAN),
            p.nmse_db.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
