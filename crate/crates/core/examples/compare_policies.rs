//! Every policy on one small trace, including the exact dynamic optimum.
use rosc::bench::{regret, run_policy, PolicyKind, RunParams};
use rosc::workloads::{gen_replacement, ReplacementParams};

fn main() -> rosc::Result<()> {
    let trace = gen_replacement(
        &ReplacementParams {
            N: 8,
            T: 40,
            U: 100,
            lifetime: rosc::workloads::Lifetime::Geometric { mean: 8.0 },
            ..Default::default()
        },
        3,
    )?;
    let params = RunParams {
        capacity: 3,
        window: 5,
        paths: 50,
        ratio: 20.0,
        ..Default::default()
    };
    let opt = run_policy(PolicyKind::OptDp, &trace, &params, 0)?.total_cost;
    for kind in PolicyKind::ALL {
        let rec = run_policy(kind, &trace, &params, 0)?;
        println!(
            "{:<11} cost {:>8.2}  regret vs exact {:>7.2}",
            kind.name(),
            rec.total_cost,
            regret(rec.total_cost, opt)
        );
    }
    Ok(())
}
