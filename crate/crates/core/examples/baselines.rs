//! The scalar Lloyd–Max and per-token INT baselines.
//!
//! ```bash
//! cargo run --release --example baselines
//! ```

use fibquant::baselines::{int_dequantize_token, int_quantize_token, scalar_lloyd_table};
use fibquant::eval::{gaussian_rows, held_out_mse};

fn main() -> fibquant::Result<()> {
    let d = 64;
    for bits in 1..=4 {
        let table = scalar_lloyd_table(d, bits, 1)?;
        let mse = held_out_mse(&table, d, 200_000, 2)?;
        println!(
            "Lloyd–Max b={bits}: {} levels, held-out MSE {:.4e} ({:.4} of the coordinate variance)",
            table.levels().len(),
            mse.mean,
            mse.mean * d as f64
        );
    }
    let rows = gaussian_rows(1000, d, 4)?;
    for bits in [2, 4, 8] {
        let mut err = 0.0;
        let mut energy = 0.0;
        for x in rows.rows() {
            let tok = int_quantize_token(x, bits)?;
            let y = int_dequantize_token(&tok);
            err += x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            energy += x.iter().map(|a| a * a).sum::<f64>();
        }
        println!("INT{bits}: NMSE {:.2} dB", 10.0 * (err / energy).log10());
    }
    Ok(())
}
