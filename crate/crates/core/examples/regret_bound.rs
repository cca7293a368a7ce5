//! Measured regret against the theoretical ceiling on tiny instances.
use rosc::baselines::{exact_opt_dp, DpBudget};
use rosc::bench::{regret, regret_bound};
use rosc::model::{path_length, CostModel};
use rosc::workloads::{gen_replacement, Lifetime, ReplacementParams};
use rosc::{run_rosc, GammaPolicy, PredictionOracle, RoscConfig};

fn main() -> rosc::Result<()> {
    for seed in 0..4 {
        let trace = gen_replacement(
            &ReplacementParams {
                N: 6,
                T: 30,
                U: 50,
                lifetime: Lifetime::Geometric { mean: 5.0 },
                ..Default::default()
            },
            seed,
        )?;
        let (m, w, k) = (2, 4, 16);
        let h = path_length(&trace, m);
        let cost = CostModel::uniform(0.05, 2.0, trace.services(), m, 0.05)?;
        let opt = exact_opt_dp(&trace, &cost, DpBudget::default())?.total_cost;
        let oracle = PredictionOracle::exact(&trace);
        let runs = 100;
        let mut mean = 0.0;
        for s in 0..runs {
            let cfg = RoscConfig::new(cost.clone(), w, k, s).with_gamma(GammaPolicy::Theorem {
                path_length: h,
                horizon: trace.horizon(),
            });
            mean += run_rosc(&trace, &oracle, &cfg)?.total_cost / runs as f64;
        }
        let bound = regret_bound(&cost, trace.services(), trace.horizon(), trace.max_slot_total(), k, w, h)?;
        println!(
            "seed {seed}: H_T {h:>4}  regret {:>7.2}  bound {:>10.1} (gradient {:.1}, rounding {:.1}, path {:.1})",
            regret(mean, opt),
            bound.total,
            bound.gradient_term,
            bound.rounding_term,
            bound.path_term
        );
    }
    Ok(())
}
