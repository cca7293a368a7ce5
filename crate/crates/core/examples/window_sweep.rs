//! Window sweep over several seeds, written to a results directory.
use rosc::bench::{run_experiment, Axis, ExperimentSpec, PolicyKind, RunParams, Sweep};
use rosc::workloads::{GeneratorParams, ReplacementParams};

fn main() -> rosc::Result<()> {
    let spec = ExperimentSpec {
        workload: GeneratorParams::Replacement(ReplacementParams {
            N: 100,
            T: 500,
            ..Default::default()
        }),
        seeds: (0..3).collect(),
        policies: vec![PolicyKind::Rosc, PolicyKind::Rhc, PolicyKind::Chc],
        base: RunParams::default(),
        sweeps: vec![Sweep {
            axis: Axis::W,
            values: vec![1.0, 5.0, 10.0, 20.0],
        }],
        jobs: 1,
        write_runs: false,
    };
    let out = std::env::temp_dir().join("rosc_window_sweep");
    let report = run_experiment(&spec, Some(&out))?;
    print!("{}", report.costs_csv(Some(Axis::W)));
    print!("{}", report.runtimes_csv());
    eprintln!("tables written to {}", out.display());
    Ok(())
}
