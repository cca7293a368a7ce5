//! Cost as prediction noise grows, for the online policy and receding horizon.
use rosc::bench::{run_policy, PolicyKind, RunParams};
use rosc::workloads::{gen_replacement, ReplacementParams};

fn main() -> rosc::Result<()> {
    let trace = gen_replacement(
        &ReplacementParams {
            N: 100,
            T: 1000,
            ..Default::default()
        },
        2,
    )?;
    for r in [0.0, 0.01, 0.03, 0.1] {
        let params = RunParams {
            noise: r,
            noisy_baselines: true,
            ..Default::default()
        };
        let rosc = run_policy(PolicyKind::Rosc, &trace, &params, 0)?.total_cost;
        let rhc = run_policy(PolicyKind::Rhc, &trace, &params, 0)?.total_cost;
        println!("R={r:<5} rosc {rosc:>9.1}  rhc {rhc:>9.1}");
    }
    Ok(())
}
