//! Bits per cached vector, compression ratios, and the analytic gain and
//! large-d distortion predictors.
//!
//! ```bash
//! cargo run --release --example compression_accounting
//! ```

use fibquant::eval::{
    compression_ratio, high_rate_gain, int_compression_ratio, shell_distortion_prediction, to_db, CapMode,
    LatticeTable,
};

fn main() -> fibquant::Result<()> {
    let d = 64;
    println!("{:<14} {:>8} {:>8} {:>12}", "(k, N)", "bits", "exact", "byte-aligned");
    for (k, n) in [(64, 16384), (32, 16384), (16, 8192), (8, 256), (4, 256), (2, 64), (1, 16)] {
        let a = compression_ratio(d, k, n, 16, 16)?;
        println!(
            "{:<14} {:>8.1} {:>7.2}x {:>11.2}x",
            format!("({k}, {n})"),
            a.exact_bits,
            a.exact_ratio,
            a.byte_aligned_ratio
        );
    }
    for b in [2, 4, 8] {
        println!("INT{b}: {:.2}x", int_compression_ratio(d, b, 16));
    }

    let table = LatticeTable::standard();
    for k in [1, 2, 3, 4, 8] {
        let g = high_rate_gain(d, k, &table)?;
        let cell = g.gamma_cell.map(|c| format!("{:.3} dB", to_db(c))).unwrap_or_else(|| "unavailable".into());
        println!("k={k}: cell gain {cell}, density gain {:.3} dB", to_db(g.gamma_dens));
    }

    for b in [0.5, 1.0, 2.0] {
        let fixed = shell_distortion_prediction(0.5, b, CapMode::FixedCap)?;
        let lloyd = shell_distortion_prediction(0.5, b, CapMode::LloydCap)?;
        println!("rho=0.5 b={b}: fixed caps {fixed:.5}, centroid caps {lloyd:.5}");
    }
    Ok(())
}
