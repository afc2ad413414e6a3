//! Matched-rate sweep of FibQuant against scalar Lloyd–Max on the canonical
//! source, written as CSV to stdout.
//!
//! ```bash
//! cargo run --release --example rate_distortion > rd.csv
//! ```

use fibquant::eval::{rd_sweep, write_csv, CodecSpec, LloydPolicy, SweepConfig};

fn main() -> fibquant::Result<()> {
    let cfg = SweepConfig {
        d: 64,
        codecs: vec![
            CodecSpec::FibQuant { k: 32, n: 64 },
            CodecSpec::FibQuant { k: 8, n: 16 },
            CodecSpec::FibQuant { k: 4, n: 16 },
            CodecSpec::FibQuant { k: 2, n: 4 },
            CodecSpec::FibQuant { k: 4, n: 256 },
            CodecSpec::FibQuant { k: 2, n: 64 },
            CodecSpec::Scalar { bits: 1 },
            CodecSpec::Scalar { bits: 2 },
            CodecSpec::Scalar { bits: 3 },
        ],
        samples: 20_000,
        seeds: vec![1],
        lloyd: LloydPolicy::capped(5e10),
    };
    let points = rd_sweep(&cfg)?;
    for p in &points {
        eprintln!("{:<12} k={:<2} N={:<4} b={:.4} mse={:.4e}", p.codec, p.k, p.n, p.rate_bits_per_coord, p.per_coord_mse);
    }
    write_csv(&points, std::io::stdout().lock())
}
