//! Acceptance harness: one PASS/FAIL line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rosc::bench::{regret, run_policy, PolicyKind, RunParams};
use rosc::model::path_length;
use rosc::projection::{project_bounded_simplex, BoundedSimplexProjector};
use rosc::sampler::{insertions_between, positive_variation, quantize_probs, RngStream, SamplePathEnsemble};
use rosc::validate::{online_offline_suite, projection_suite, sampler_suite, regret_ceiling_suite};
use rosc::workloads::{gen_piecewise, gen_replacement, PiecewiseParams, ReplacementParams};
use rosc::ArrivalTrace;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn c1_projection_exactness() -> Outcome {
    let start = Instant::now();
    let r = projection_suite(10_000, 11).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        r.passed && secs < 30.0,
        format!("{} cases, {} failures, max err {:.2e}, {secs:.1} s", r.cases, r.failures, r.worst),
    )
}

fn c2_projection_scaling() -> Outcome {
    // One repetition times a batch of calls (~20 ms) at every size in turn, so a
    // slow stretch on the host is spread over all sizes instead of hitting one.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut proj = BoundedSimplexProjector::new();
    let exps: Vec<usize> = (14..=18).collect();
    let inputs: Vec<Vec<Vec<f64>>> = exps
        .iter()
        .map(|&e| {
            let batch = (1usize << (20 - e)).max(1);
            (0..batch)
                .map(|_| (0..1usize << e).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
                .collect()
        })
        .collect();
    let mut z = Vec::new();
    let mut times = vec![Vec::new(); exps.len()];
    for rep in 0..12 {
        for (i, batch) in inputs.iter().enumerate() {
            let m = batch[0].len() / 8;
            let start = Instant::now();
            for input in batch {
                z.clear();
                z.extend_from_slice(input);
                proj.project_in_place(&mut z, m).unwrap();
                std::hint::black_box(&z);
            }
            // the first pass sizes the scratch buffers
            if rep > 0 {
                times[i].push(start.elapsed().as_secs_f64() / batch.len() as f64);
            }
        }
    }
    let medians: Vec<f64> = times.into_iter().map(median).collect();
    let ratios: Vec<f64> = medians.windows(2).map(|w| w[1] / w[0]).collect();
    let worst = ratios.iter().cloned().fold(0.0, f64::max);
    outcome(
        worst <= 2.5,
        format!(
            "per-doubling ratios {:?}",
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>()
        ),
    )
}

fn c3_online_equals_offline() -> Outcome {
    let start = Instant::now();
    let r = online_offline_suite(50, 13).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        r.passed && secs < 60.0,
        format!("{} instances, max err {:.2e}, {secs:.1} s", r.cases, r.worst),
    )
}

fn random_target(rng: &mut impl Rng, n: usize, m: usize, k: u32) -> rosc::sampler::QuantizedProbs {
    let z: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let p = project_bounded_simplex(&z, m).unwrap();
    quantize_probs(p.as_slice(), k, m).unwrap()
}

fn c4_sampler() -> Outcome {
    let inv = sampler_suite(1000, 14).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut worst_ratio = 0.0f64;
    let instances = 20;
    for _ in 0..instances {
        let n = rng.random_range(2..=12);
        let m = rng.random_range(1..=n);
        let k = rng.random_range(4..=64u32);
        let (mut a, mut b) = (random_target(&mut rng, n, m, k), random_target(&mut rng, n, m, k));
        while positive_variation(&a, &b) == 0.0 {
            a = random_target(&mut rng, n, m, k);
            b = random_target(&mut rng, n, m, k);
        }
        let mut per_path = Vec::new();
        for seed in 0..200 {
            let mut stream = RngStream::new(seed, 0);
            let mut ens = SamplePathEnsemble::new(k as usize, n, m, &mut stream).unwrap();
            ens.update(&a, &mut stream).unwrap();
            let before = ens.clone();
            ens.update(&b, &mut stream).unwrap();
            per_path.push(insertions_between(&before, &ens) as f64 / f64::from(k));
        }
        worst_ratio = worst_ratio.max(mean(&per_path) / (3.0 * positive_variation(&a, &b)));
    }
    outcome(
        inv.passed && worst_ratio <= 1.05,
        format!(
            "{} updates, {} invariant failures; worst insertions/(3 x variation) {worst_ratio:.3} over {instances} instances x 200 seeds",
            inv.cases, inv.failures
        ),
    )
}

fn c5_regret_ceiling() -> Outcome {
    let start = Instant::now();
    let r = regret_ceiling_suite(20, 100, 15).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        r.passed && secs < 300.0,
        format!("{} instances, {} above bound, tightest margin {:.1}, {secs:.1} s", r.cases, r.failures, r.worst),
    )
}

fn c6_sublinear_regret() -> Outcome {
    let seeds = 5;
    let mut per_t = Vec::new();
    let mut h_norm = Vec::new();
    for t in [500usize, 1000, 2000, 4000] {
        let k = (t as f64).sqrt().round() as u32;
        let params = RunParams {
            capacity: 5,
            window: 10,
            paths: k,
            ..Default::default()
        };
        let (mut regs, mut hs) = (Vec::new(), Vec::new());
        for seed in 0..seeds {
            let trace = gen_piecewise(
                &PiecewiseParams {
                    N: 50,
                    T: t,
                    ..Default::default()
                },
                seed,
            )
            .unwrap();
            let r = run_policy(PolicyKind::Rosc, &trace, &params, seed).unwrap();
            let o = run_policy(PolicyKind::PseudoOpt, &trace, &params, seed).unwrap();
            regs.push(regret(r.total_cost, o.total_cost) / t as f64);
            hs.push(path_length(&trace, 5) / (t as f64).sqrt());
        }
        per_t.push(mean(&regs));
        h_norm.push(mean(&hs));
    }
    let inversions = per_t.windows(2).filter(|w| w[1] >= w[0]).count();
    outcome(
        inversions <= 1,
        format!(
            "Reg/T {:?}, H_T/sqrt(T) {:?}",
            per_t.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>(),
            h_norm.iter().map(|h| format!("{h:.1}")).collect::<Vec<_>>()
        ),
    )
}

fn desk_traces() -> Vec<ArrivalTrace> {
    (0..10)
        .map(|seed| {
            gen_replacement(
                &ReplacementParams {
                    N: 100,
                    T: 2000,
                    ..Default::default()
                },
                seed,
            )
            .unwrap()
        })
        .collect()
}

fn mean_cost(kind: PolicyKind, traces: &[ArrivalTrace], params: &RunParams) -> f64 {
    let costs: Vec<f64> = traces
        .iter()
        .enumerate()
        .map(|(s, tr)| run_policy(kind, tr, params, s as u64).unwrap().total_cost)
        .collect();
    mean(&costs)
}

fn c7_trends(traces: &[ArrivalTrace]) -> Outcome {
    let base = RunParams::default();
    let rosc = mean_cost(PolicyKind::Rosc, traces, &base);
    let rhc = mean_cost(PolicyKind::Rhc, traces, &base);
    let chc = mean_cost(PolicyKind::Chc, traces, &base);
    let a = rosc < rhc && rosc < chc;
    let by_w: Vec<f64> = [1, 5, 10, 20]
        .iter()
        .map(|&w| {
            mean_cost(
                PolicyKind::Rosc,
                traces,
                &RunParams {
                    window: w,
                    ..base.clone()
                },
            )
        })
        .collect();
    let b = by_w.windows(2).all(|w| w[1] <= w[0] * 1.02);
    let noisy = mean_cost(
        PolicyKind::Rosc,
        traces,
        &RunParams {
            noise: 0.03,
            ..base.clone()
        },
    );
    let c = noisy < rhc;
    outcome(
        a && b && c,
        format!(
            "(a) {} ROSC {rosc:.0} RHC {rhc:.0} CHC {chc:.0}; (b) {} by W {:?}; (c) {} ROSC(R=0.03) {noisy:.0} vs RHC {rhc:.0}",
            if a { "ok" } else { "FAIL" },
            if b { "ok" } else { "FAIL" },
            by_w.iter().map(|c| format!("{c:.0}")).collect::<Vec<_>>(),
            if c { "ok" } else { "FAIL" },
        ),
    )
}

fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

fn c8_runtime_shape(traces: &[ArrivalTrace]) -> Outcome {
    let windows = [1usize, 5, 10, 15, 20];
    let trace = &traces[0];
    let slots = trace.horizon() as f64;
    let params = |w: usize| RunParams {
        window: w,
        ..Default::default()
    };
    for &w in &windows {
        run_policy(PolicyKind::Rosc, trace, &params(w), 0).unwrap();
        run_policy(PolicyKind::Rhc, trace, &params(w), 0).unwrap();
    }
    // Interleave windows within each repetition so slow periods hit all of them.
    let reps = 9;
    let mut samples = vec![vec![Vec::new(); windows.len()]; 2];
    for rep in 0..reps {
        for (i, &w) in windows.iter().enumerate() {
            for (j, kind) in [PolicyKind::Rosc, PolicyKind::Rhc].into_iter().enumerate() {
                let rec = run_policy(kind, trace, &params(w), rep).unwrap();
                samples[j][i].push(rec.runtime_ms / slots);
            }
        }
    }
    let rhc: Vec<f64> = samples.pop().unwrap().into_iter().map(median).collect();
    let rosc: Vec<f64> = samples.pop().unwrap().into_iter().map(median).collect();
    let xs: Vec<f64> = windows.iter().map(|&w| w as f64).collect();
    let r2 = r_squared(&xs, &rosc);
    let rosc_ratio = rosc[4] / rosc[0];
    let rhc_ratio = rhc[4] / rhc[0];
    outcome(
        r2 >= 0.9 && rhc_ratio >= 2.0 * rosc_ratio,
        format!("ROSC R^2 {r2:.3}, ratio W20/W1 ROSC {rosc_ratio:.2} RHC {rhc_ratio:.2}"),
    )
}

fn c9_determinism(traces: &[ArrivalTrace]) -> Outcome {
    let small = gen_replacement(
        &ReplacementParams {
            N: 8,
            T: 40,
            ..Default::default()
        },
        9,
    )
    .unwrap();
    let regen = gen_replacement(
        &ReplacementParams {
            N: 100,
            T: 2000,
            ..Default::default()
        },
        3,
    )
    .unwrap();
    let mut same = regen.to_csv_string() == traces[3].to_csv_string();
    let params = RunParams {
        noise: 0.05,
        noisy_baselines: true,
        capacity: 3,
        pseudo_iterations: 20,
        ..Default::default()
    };
    let mut checked = 0;
    for kind in PolicyKind::ALL {
        let trace = if kind == PolicyKind::OptDp { &small } else { &traces[3] };
        let a = run_policy(kind, trace, &params, 77).unwrap();
        let b = run_policy(kind, trace, &params, 77).unwrap();
        same &= a.costs_csv_string() == b.costs_csv_string()
            && a.decisions_csv_string() == b.decisions_csv_string();
        checked += 1;
    }
    outcome(same, format!("{checked} policies and the trace generator reproduce byte-identical CSVs"))
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |id: u32, name: &str, o: Outcome| {
        all &= o.passed;
        println!("[{}] criterion {id} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    };
    report(1, "projection exactness", c1_projection_exactness());
    report(2, "projection scaling", c2_projection_scaling());
    report(3, "online iterates equal offline descent", c3_online_equals_offline());
    report(4, "sampler invariants", c4_sampler());
    report(5, "regret below bound", c5_regret_ceiling());
    report(6, "regret per slot decreasing in T", c6_sublinear_regret());
    let traces = desk_traces();
    report(7, "cost trends at desk scale", c7_trends(&traces));
    report(8, "runtime shape in W", c8_runtime_shape(&traces));
    report(9, "determinism", c9_determinism(&traces));
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
