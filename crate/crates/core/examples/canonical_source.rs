//! Samples the canonical block source f_{d,k} and compares its radial
//! moments with the closed forms.
//!
//! ```bash
//! cargo run --release --example canonical_source -- 64 2
//! ```

use fibquant::source::{density_f, radial_moments, sample_block_marginal, sample_block_polar, SourceSpec};

fn main() -> fibquant::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let d = args.next().unwrap_or(64);
    let k = args.next().unwrap_or(2);
    let spec = SourceSpec::new(d, k)?;
    let (mean, var) = radial_moments(spec)?;
    println!("f_{{{d},{k}}}: E|x|^2 = {mean:.6e}, Var|x|^2 = {var:.6e}");

    let n = 100_000;
    for (name, samples) in [
        ("marginal", sample_block_marginal(spec, n, 1)?),
        ("polar", sample_block_polar(spec, n, 1)?),
    ] {
        let sq: Vec<f64> = samples.rows().map(|x| x.iter().map(|v| v * v).sum()).collect();
        let m = sq.iter().sum::<f64>() / n as f64;
        let v = sq.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        println!("{name:>8} sampler, n={n}: E|x|^2 = {m:.6e}, Var|x|^2 = {v:.6e}");
    }

    let mut origin = vec![0.0; k];
    println!("density at 0: {:.6}", density_f(spec, &origin)?);
    origin[0] = (k as f64 / d as f64).sqrt();
    println!("density at the typical radius: {:.6}", density_f(spec, &origin)?);
    Ok(())
}
