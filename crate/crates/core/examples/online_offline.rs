//! The online fractional iterates coincide with `W` sweeps of offline descent.
use rosc::gradient::offline_pgd;
use rosc::model::CostModel;
use rosc::workloads::{gen_poisson, PoissonParams};
use rosc::{fractional_trace, run_rosc, PredictionOracle, RoscConfig};

fn main() -> rosc::Result<()> {
    let trace = gen_poisson(
        &PoissonParams {
            N: 30,
            T: 60,
            ..Default::default()
        },
        5,
    )?;
    let cost = CostModel::uniform(0.05, 5.0, trace.services(), 4, 0.1)?;
    for w in [0, 1, 3, 8] {
        let rec = run_rosc(&trace, &PredictionOracle::exact(&trace), &RoscConfig::new(cost.clone(), w, 20, 0))?;
        let online = fractional_trace(&rec).expect("fractional iterates are recorded");
        let offline = offline_pgd(&trace, &cost, w)?;
        let gap = online
            .iter()
            .zip(&offline)
            .flat_map(|(a, b)| a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        println!("W={w}: max |online - offline| = {gap:.3e}");
    }
    Ok(())
}
