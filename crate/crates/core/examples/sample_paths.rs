//! Maintain K sample paths whose column averages track a moving target.
use rosc::projection::project_bounded_simplex;
use rosc::sampler::{positive_variation, quantize_probs, RngStream, SamplePathEnsemble};

fn main() -> rosc::Result<()> {
    let (n, m, k) = (6, 2, 10u32);
    let mut rng = RngStream::labeled(9, "example");
    let mut ens = SamplePathEnsemble::new(k as usize, n, m, &mut rng)?;
    let mut prev = quantize_probs(&vec![0.0; n], k, m)?;
    for step in 0..5 {
        let z: Vec<f64> = (0..n).map(|i| ((i + step) % n) as f64 / 3.0).collect();
        let p = project_bounded_simplex(&z, m)?;
        let pq = quantize_probs(p.as_slice(), k, m)?;
        let stats = ens.update(&pq, &mut rng)?;
        println!(
            "step {step}: counts {:?}  insertions {}  variation {:.2}  followed path {:?}",
            ens.column_counts(),
            stats.insertions,
            positive_variation(&prev, &pq),
            ens.decision().as_bits().iter().map(|&b| u8::from(b)).collect::<Vec<_>>()
        );
        prev = pq;
    }
    Ok(())
}
