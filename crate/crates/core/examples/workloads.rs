//! Generate one trace per workload model and report its non-stationarity.
use rosc::model::path_length;
use rosc::workloads::{GeneratorParams, PiecewiseParams, PoissonParams, ReplacementParams};

fn main() -> rosc::Result<()> {
    let models = [
        GeneratorParams::Replacement(ReplacementParams {
            N: 200,
            T: 1000,
            ..Default::default()
        }),
        GeneratorParams::Poisson(PoissonParams {
            N: 200,
            T: 1000,
            ..Default::default()
        }),
        GeneratorParams::Piecewise(PiecewiseParams {
            N: 200,
            T: 1000,
            ..Default::default()
        }),
    ];
    for params in &models {
        let trace = params.generate(7)?;
        let t = trace.horizon() as f64;
        println!(
            "{:<12} requests/slot {:>7.1}  peak {:>5.0}  H_T/T at M=10: {:.3}",
            params.name(),
            trace.total_requests() / t,
            trace.max_slot_total(),
            path_length(&trace, 10) / t,
        );
    }
    Ok(())
}
