//! Project a few vectors onto the capped simplex and time a large one.
use std::time::Instant;

use rosc::projection::{project_bounded_simplex, BoundedSimplexProjector};

fn main() -> rosc::Result<()> {
    let z = [0.9, 1.4, -0.2, 0.6, 0.3];
    for m in [1, 2, 5] {
        let p = project_bounded_simplex(&z, m)?;
        let sum: f64 = p.as_slice().iter().sum();
        println!("M={m}: {:?} (sum {sum:.3})", p.as_slice());
    }

    // The reusable projector avoids allocating per call.
    let n = 1 << 18;
    let mut v: Vec<f64> = (0..n).map(|i| ((i * 7919) % 1000) as f64 / 250.0 - 1.0).collect();
    let mut proj = BoundedSimplexProjector::new();
    let start = Instant::now();
    proj.project_in_place(&mut v, n / 10)?;
    println!(
        "N={n}: projected in {:.2} ms, sum {:.1}",
        start.elapsed().as_secs_f64() * 1e3,
        v.iter().sum::<f64>()
    );
    Ok(())
}
