//! Deterministic direction sets: Fibonacci spiral (k=2), Fibonacci sphere
//! (k=3) and Roberts–Kronecker (k≥4), with their worst-case packing.
//!
//! ```bash
//! cargo run --release --example directions
//! ```

use fibquant::directions::{default_directions, kronecker_root, DirectionScheme};
use fibquant::points::dist_sq;

fn main() -> fibquant::Result<()> {
    for (k, n) in [(2, 16), (3, 32), (4, 256), (8, 256)] {
        let set = default_directions(k, n)?;
        let mut min = f64::INFINITY;
        for i in 0..n {
            for j in 0..i {
                min = min.min(dist_sq(set.direction(i), set.direction(j)));
            }
        }
        println!(
            "k={k} N={n:<4} {:?}: min pairwise distance {:.4}",
            set.scheme(),
            min.sqrt()
        );
    }
    for k in [2, 4, 8] {
        println!("Roberts–Kronecker root for k={k}: {:.10}", kronecker_root(k));
    }
    let spiral = default_directions(2, 4)?;
    assert_eq!(spiral.scheme(), DirectionScheme::for_dimension(2)?);
    for i in 0..4 {
        println!("spiral[{i}] = {:?}", spiral.direction(i));
    }
    Ok(())
}
