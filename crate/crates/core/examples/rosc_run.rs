//! A single run of the randomized online policy with exact predictions.
use rosc::model::CostModel;
use rosc::workloads::{gen_replacement, ReplacementParams};
use rosc::{run_rosc, PredictionOracle, RoscConfig};

fn main() -> rosc::Result<()> {
    let trace = gen_replacement(
        &ReplacementParams {
            N: 100,
            T: 2000,
            ..Default::default()
        },
        1,
    )?;
    // alpha = 0.05, beta* = 200 alpha, capacity 10, gamma 0.05
    let cost = CostModel::uniform(0.05, 10.0, trace.services(), 10, 0.05)?;
    let cfg = RoscConfig::new(cost, 10, 100, 42);
    let rec = run_rosc(&trace, &PredictionOracle::exact(&trace), &cfg)?;
    println!(
        "total {:.1} = forwarding {:.1} + switching {:.1} in {:.1} ms",
        rec.total_cost,
        rec.total_forward(),
        rec.total_switch(),
        rec.runtime_ms
    );
    let cached = rec.decisions.last().map_or(0, |d| d.iter().filter(|&&x| x > 0.5).count());
    println!("services cached in the last slot: {cached}");
    Ok(())
}
