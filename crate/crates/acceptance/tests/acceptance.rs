//! Acceptance suite. Each criterion prints one PASS/FAIL line with its
//! measurements; the binary exits non-zero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slamorl::adaptive_reward::{adapt_weights, base_weights, ObjectiveMap};
use slamorl::agent::{softmax, softmax_backward, Mlp, ACTOR_SIZES, CRITIC_SIZES};
use slamorl::cluster_sim::{ClusterSim, WorkloadSpec};
use slamorl::domain::{
    apply_action, Action, ComplianceVector, PreferenceMode, ResourceBounds, ResourceConfig, SlaSpec, StateVector,
    NUM_ACTIONS, STATE_DIM,
};
use slamorl::init::{run_baseline_probes, HistoricalLog, InitMode, BASELINE_CONFIGS};
use slamorl::orchestrator::{pareto_indices, run, Method, RunConfig};
use slamorl::reporting::{render_report, Recommendation, RecommendationKind, RunSummary};
use slamorl_validation::{episodes_to_90_of, median, synthetic_workload, NUM_SYNTHETIC};

const MODEL_TOL: f64 = 1e-9;
const WEIGHT_SUM_TOL: f64 = 1e-9;
const GRAD_REL_TOL: f64 = 1e-4;
const FD_STEP: f64 = 1e-5;
const BASELINE_TOL: f64 = 1e-9;
const PREFERENCE_MIN_GAIN_PCT: f64 = 10.0;
const CLAIMED_INIT_REDUCTION_PCT: f64 = 60.0;
const SEEDS: u64 = 10;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn c1_closed_form() -> Outcome {
    let sim = ClusterSim::default();
    let cfg = |g, c| ResourceConfig { gpus: g, cpus: c };
    let w = WorkloadSpec { noise_sigma: 0.0, ..synthetic_workload(0) };
    let cases = [
        ("hourly_cost(1,4)", sim.hourly_cost(cfg(1, 4)), 7.0),
        ("hourly_cost(4,8)", sim.hourly_cost(cfg(4, 8)), 24.0),
        ("epoch_time(2,4)", sim.epoch_time(cfg(2, 4), &w), w.t_base_s / 2.16),
        ("epoch_time(4,8)", sim.epoch_time(cfg(4, 8), &w), w.t_base_s / 4.42),
    ];
    for (name, got, want) in cases {
        check((got - want).abs() <= MODEL_TOL, format!("{name} = {got}, expected {want}"))?;
    }
    Ok("4 closed-form values within 1e-9".into())
}

fn c2_weights() -> Outcome {
    let expected = [
        (PreferenceMode::TimePriority, [0.6, 0.1, 0.3]),
        (PreferenceMode::CostPriority, [0.1, 0.6, 0.3]),
        (PreferenceMode::Balanced, [0.3, 0.3, 0.4]),
    ];
    for (mode, w) in expected {
        check(base_weights(mode).as_array() == w, format!("base weights for {mode}"))?;
    }
    let map = ObjectiveMap::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let sev: [f64; 6] = std::array::from_fn(|_| if rng.random_bool(0.5) { rng.random_range(0.0..=1.0) } else { 0.0 });
        let alpha = rng.random_range(0.0..=2.0);
        let mode = PreferenceMode::ALL[rng.random_range(0..3)];
        let w = adapt_weights(base_weights(mode), &ComplianceVector::from_severities(sev), alpha, &map);
        worst = worst.max((w.sum() - 1.0).abs());
    }
    check(worst <= WEIGHT_SUM_TOL, format!("weight sum off by {worst}"))?;

    // Raising one dimension's severity never lowers its objective's weight.
    let mut runner = TestRunner::new(ProptestConfig { cases: 2000, ..ProptestConfig::default() });
    let strategy = (
        prop::array::uniform6(0.0f64..=1.0),
        0usize..6,
        0.0f64..=1.0,
        0.0f64..=2.0,
        0usize..3,
    );
    runner
        .run(&strategy, |(mut sev, dim, bump, alpha, mode)| {
            let base = base_weights(PreferenceMode::ALL[mode]);
            let objective = match dim {
                0 | 2 => 0,
                1 => 1,
                _ => 2,
            };
            let before = adapt_weights(base, &ComplianceVector::from_severities(sev), alpha, &map).as_array();
            sev[dim] = (sev[dim] + bump).min(1.0);
            let after = adapt_weights(base, &ComplianceVector::from_severities(sev), alpha, &map).as_array();
            prop_assert!(after[objective] >= before[objective] - 1e-12);
            Ok(())
        })
        .map_err(|e| format!("monotonicity: {e}"))?;
    Ok(format!("base weights exact; max |sum - 1| = {worst:.1e} over 1e4 draws; monotone over 2000 cases"))
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Compares `backward` against central differences on a random subset of
/// parameters and on every input coordinate.
fn grad_check(net: &Mlp, input: &[f64], loss: &dyn Fn(&[f64]) -> (f64, Vec<f64>), rng: &mut ChaCha8Rng) -> f64 {
    let trace = net.forward_cached(input);
    let (_, d_out) = loss(trace.output());
    let mut grads = vec![0.0; net.num_params()];
    let d_in = net.backward(&trace, &d_out, &mut grads);
    let eval_params = |p: &[f64]| {
        let mut m = net.clone();
        m.set_params(p).unwrap();
        loss(&m.forward(input)).0
    };
    let mut worst = 0.0f64;
    let base = net.params().to_vec();
    for _ in 0..40 {
        let k = rng.random_range(0..base.len());
        let mut p = base.clone();
        p[k] += FD_STEP;
        let up = eval_params(&p);
        p[k] -= 2.0 * FD_STEP;
        let down = eval_params(&p);
        worst = worst.max(rel_err(grads[k], (up - down) / (2.0 * FD_STEP)));
    }
    for (k, analytic) in d_in.iter().enumerate() {
        let mut x = input.to_vec();
        x[k] += FD_STEP;
        let up = loss(&net.forward(&x)).0;
        x[k] -= 2.0 * FD_STEP;
        let down = loss(&net.forward(&x)).0;
        worst = worst.max(rel_err(*analytic, (up - down) / (2.0 * FD_STEP)));
    }
    worst
}

fn c3_gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_actor, mut worst_critic) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let actor = Mlp::he_uniform(&ACTOR_SIZES, 1.0, &mut rng);
        let critic = Mlp::he_uniform(&CRITIC_SIZES, 1.0, &mut rng);
        let state: Vec<f64> = (0..STATE_DIM).map(|_| rng.random_range(0.0..1.0)).collect();
        let q: Vec<f64> = (0..NUM_ACTIONS).map(|_| rng.random_range(-1.0..1.0)).collect();
        let entropy_coef = rng.random_range(0.0..0.1);
        // Actor objective: -E_pi[Q] - c * H(pi).
        let actor_loss = |logits: &[f64]| {
            let p = softmax(logits);
            let h: f64 = -p.iter().map(|v| v * v.ln()).sum::<f64>();
            let value: f64 = -p.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>() - entropy_coef * h;
            let d_p: Vec<f64> = q.iter().zip(&p).map(|(qk, pk)| -qk + entropy_coef * (pk.ln() + 1.0)).collect();
            (value, softmax_backward(&p, &d_p))
        };
        worst_actor = worst_actor.max(grad_check(&actor, &state, &actor_loss, &mut rng));

        let mut x = state.clone();
        let mut one_hot = vec![0.0; NUM_ACTIONS];
        one_hot[rng.random_range(0..NUM_ACTIONS)] = 1.0;
        x.extend(one_hot);
        let target = rng.random_range(-1.0..1.0);
        let critic_loss = |out: &[f64]| ((out[0] - target).powi(2), vec![2.0 * (out[0] - target)]);
        worst_critic = worst_critic.max(grad_check(&critic, &x, &critic_loss, &mut rng));
    }
    check(
        worst_actor <= GRAD_REL_TOL && worst_critic <= GRAD_REL_TOL,
        format!("max relative error actor {worst_actor:.2e}, critic {worst_critic:.2e}"),
    )?;
    Ok(format!("100 points; max relative error actor {worst_actor:.2e}, critic {worst_critic:.2e}"))
}

fn brute_force_front(points: &[(f64, f64)]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            let (t, c) = points[i];
            !points.iter().any(|&(u, d)| u <= t && d <= c && (u < t || d < c))
        })
        .collect()
}

fn c4_pareto() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut total = 0;
    for set in 0..200 {
        let n = rng.random_range(1..=1000);
        // Coarse grids in half the sets force ties and duplicates.
        let coarse = set % 2 == 0;
        let points: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                if coarse {
                    (rng.random_range(0..30) as f64, rng.random_range(0..30) as f64)
                } else {
                    (rng.random_range(0.0..1e4), rng.random_range(0.0..1e3))
                }
            })
            .collect();
        let mut fast = pareto_indices(&points).map_err(|e| e.to_string())?;
        fast.sort_unstable();
        let slow = brute_force_front(&points);
        check(fast == slow, format!("set {set} (n = {n}): fronts differ"))?;
        total += slow.len();
    }
    Ok(format!("200 sets match the O(n^2) filter ({total} front points)"))
}

fn c5_contracts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let mut r = || rng.random_range(0.0..=1.0);
        let s = StateVector {
            allocation: [r(), r()],
            utilization: [r(), r()],
            progress: [r(), r()],
            compliance: std::array::from_fn(|_| 1.0),
            severity: [0.0; 6],
            preference: [0.0, 0.0, 1.0],
        };
        check(s.flatten().len() == 21, "flattened state is not 21-dimensional")?;
    }
    let mut seen = [false; NUM_ACTIONS];
    for i in 0..NUM_ACTIONS {
        let a = Action::from_index(i).map_err(|e| e.to_string())?;
        check(a.index() == i, format!("index round trip failed at {i}"))?;
        check(!seen[i], "duplicate action")?;
        seen[i] = true;
    }
    check(Action::from_index(NUM_ACTIONS).is_err(), "index 9 accepted")?;
    let bounds = ResourceBounds::default();
    let mut checked = 0;
    for cfg in bounds.grid() {
        for a in Action::all() {
            let next = apply_action(cfg, a, &bounds);
            check(bounds.contains(next), format!("{cfg} + {a:?} escaped to {next}"))?;
            checked += 1;
        }
    }
    Ok(format!("state length 21; 9-action bijection; {checked} clamped transitions in bounds"))
}

fn c6_preferences() -> Outcome {
    let mut lines = Vec::new();
    for i in 0..NUM_SYNTHETIC {
        let w = synthetic_workload(i);
        let collect = |method, mode| -> Result<(f64, f64), String> {
            let mut times = Vec::new();
            let mut costs = Vec::new();
            for seed in 0..SEEDS {
                let o = run(&RunConfig::new(w.clone(), SlaSpec::new(mode), method, seed)).map_err(|e| e.to_string())?;
                times.push(o.selected.total_time_s);
                costs.push(o.selected.total_cost_usd);
            }
            Ok((median(times), median(costs)))
        };
        let (time_t, time_c) = collect(Method::Full, PreferenceMode::TimePriority)?;
        let (cost_t, cost_c) = collect(Method::Full, PreferenceMode::CostPriority)?;
        let (basic_t, basic_c) = collect(Method::Basic, PreferenceMode::Balanced)?;
        let time_gain = (basic_t - time_t) / basic_t * 100.0;
        let cost_gain = (basic_c - cost_c) / basic_c * 100.0;
        lines.push(format!(
            "{}: time {:.0}s vs {:.0}s, cost ${:.2} vs ${:.2}, gain over basic {:.1}% / {:.1}%",
            w.name, time_t, cost_t, cost_c, time_c, time_gain, cost_gain
        ));
        check(time_t <= cost_t, format!("{}: time-priority median time {time_t} > cost-priority {cost_t}", w.name))?;
        check(cost_c <= time_c, format!("{}: cost-priority median cost {cost_c} > time-priority {time_c}", w.name))?;
        check(
            time_gain >= PREFERENCE_MIN_GAIN_PCT && cost_gain >= PREFERENCE_MIN_GAIN_PCT,
            format!("{}: gain over basic {time_gain:.1}% / {cost_gain:.1}%", w.name),
        )?;
    }
    Ok(lines.join("; "))
}

fn c7_initialization() -> Outcome {
    let w = synthetic_workload(0);
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for mode in PreferenceMode::ALL {
        let cfg = |method, seed| RunConfig::new(w.clone(), SlaSpec::new(mode), method, seed);
        let (mut base_runs, mut target_logs, mut skip) = (Vec::new(), Vec::new(), Vec::new());
        for seed in 0..SEEDS {
            let prior = run(&cfg(Method::Full, seed + 1000)).map_err(|e| e.to_string())?;
            let logs = HistoricalLog::from_trace(&prior.trace, &w);
            let br = run(&cfg(Method::BaseRuns, seed)).map_err(|e| e.to_string())?;
            let tl = run(&RunConfig { logs: Some(logs), ..cfg(Method::WithTargetLogs, seed) }).map_err(|e| e.to_string())?;
            let sk =
                run(&RunConfig { init_override: Some(InitMode::Skip), ..cfg(Method::Full, seed) }).map_err(|e| e.to_string())?;
            base_runs.push(episodes_to_90_of(&br));
            target_logs.push(episodes_to_90_of(&tl));
            skip.push(episodes_to_90_of(&sk));
        }
        let (b, t, s) = (median(base_runs), median(target_logs), median(skip));
        let reduction = |x: f64| (s - x) / s * 100.0;
        lines.push(format!(
            "{mode}: base_runs {b} ({:.0}%), with_target_logs {t} ({:.0}%), skip {s}",
            reduction(b),
            reduction(t)
        ));
        if !(b < s && t < s) {
            failures.push(mode.label());
        }
    }
    let detail = format!("{}; reference reduction {CLAIMED_INIT_REDUCTION_PCT}%", lines.join("; "));
    check(failures.is_empty(), format!("not strictly faster for {failures:?}: {detail}"))?;
    Ok(detail)
}

fn c8_adaptive_weights() -> Outcome {
    let w = synthetic_workload(0);
    let relaxed = |mode| {
        let mut s = SlaSpec::new(mode);
        s.gpu_util_target = Some(0.05);
        s.cpu_util_target = Some(0.05);
        s.throughput_target_sps = Some(1.0);
        s
    };
    let mut scenarios = Vec::new();
    let mut s = relaxed(PreferenceMode::Balanced);
    s.throughput_target_sps = Some(390.0);
    scenarios.push(("balanced/throughput", s));
    let mut s = relaxed(PreferenceMode::TimePriority);
    s.gpu_util_target = Some(0.7);
    scenarios.push(("time/gpu_util", s));
    let mut s = relaxed(PreferenceMode::TimePriority);
    s.cpu_util_target = Some(0.6);
    scenarios.push(("time/cpu_util", s));
    let mut s = relaxed(PreferenceMode::CostPriority);
    s.gpu_util_target = Some(0.7);
    s.throughput_target_sps = Some(115.0);
    scenarios.push(("cost/gpu_util+throughput", s));
    let mut s = relaxed(PreferenceMode::Balanced);
    s.gpu_util_target = Some(0.6);
    s.cpu_util_target = Some(0.6);
    s.throughput_target_sps = Some(150.0);
    scenarios.push(("balanced/util+throughput", s));

    let (mut wins, mut losses) = (0, Vec::new());
    let mut lines = Vec::new();
    for (name, sla) in scenarios {
        let (mut adaptive, mut fixed) = (Vec::new(), Vec::new());
        for seed in 0..SEEDS {
            let cfg = RunConfig::new(w.clone(), sla.clone(), Method::Full, seed);
            adaptive.push(run(&cfg).map_err(|e| e.to_string())?.compliance_rate());
            fixed.push(run(&RunConfig { adapt_weights: false, ..cfg }).map_err(|e| e.to_string())?.compliance_rate());
        }
        let (a, f) = (median(adaptive), median(fixed));
        lines.push(format!("{name} {a:.3} vs {f:.3}"));
        if a > f {
            wins += 1;
        } else if a < f {
            losses.push(name);
        }
    }
    let detail = format!("adaptive vs fixed: {}", lines.join(", "));
    check(losses.is_empty() && wins >= 3, format!("{wins}/5 strict wins, lower on {losses:?}: {detail}"))?;
    Ok(detail)
}

fn golden_summaries() -> (RunSummary, RunSummary, [Recommendation; 3]) {
    let mut compliance = ComplianceVector::all_met();
    compliance.met[2] = false;
    compliance.severity[2] = 0.1;
    let baseline = RunSummary {
        method: "basic".into(),
        strategy: PreferenceMode::Balanced,
        workload: "sample".into(),
        seed: 42,
        gpus: 1,
        cpus: 4,
        memory_gb: 12.0,
        total_time_s: 31.4 * 60.0,
        total_cost_usd: 1.9647,
        throughput_sps: 1640.3,
        compliance,
        compliance_rate: 0.0,
        episodes: 1,
    };
    let optimized = RunSummary {
        method: "full".into(),
        cpus: 6,
        memory_gb: 14.0,
        total_time_s: 14.56 * 60.0,
        total_cost_usd: 1.97,
        throughput_sps: 1712.4,
        compliance: ComplianceVector::all_met(),
        compliance_rate: 0.9,
        episodes: 10,
        ..baseline.clone()
    };
    let rec = |kind, gpus, cpus, memory_gb, minutes: f64, cost| Recommendation {
        kind,
        config: ResourceConfig { gpus, cpus },
        memory_gb,
        total_time_s: minutes * 60.0,
        time_change_pct: (minutes - 14.56) / 14.56 * 100.0,
        total_cost_usd: cost,
    };
    let recs = [
        rec(RecommendationKind::TimeCritical, 2, 9, 25.0, 8.66, 13.43),
        rec(RecommendationKind::CostCritical, 1, 2, 10.0, 20.1, 1.84),
        rec(RecommendationKind::Balanced, 1, 6, 14.0, 14.56, 1.97),
    ];
    (baseline, optimized, recs)
}

fn c9_golden() -> Outcome {
    let (baseline, optimized, recs) = golden_summaries();
    let rendered = render_report(&baseline, &optimized, &recs);
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/report.txt");
    if std::env::var_os("SLAMORL_UPDATE_GOLDEN").is_some() {
        std::fs::write(path, &rendered).map_err(|e| e.to_string())?;
    }
    let golden = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    if rendered != golden {
        let line = rendered.lines().zip(golden.lines()).position(|(a, b)| a != b).map_or(rendered.lines().count().min(golden.lines().count()) + 1, |i| i + 1);
        return Err(format!("rendered report differs from golden file (first differing line {line})"));
    }
    check(golden.contains("- Time: 53.6% (faster)\n"), "golden file lost the time line")?;
    Ok(format!("{} bytes identical", golden.len()))
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let workload_file = concat!(env!("CARGO_MANIFEST_DIR"), "/../../workloads/resnet.cfg");
    let start = Instant::now();
    let mut traces = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let code = slamorl_cli::run_cli([
            "slamorl".as_ref(),
            "run".as_ref(),
            "--workload".as_ref(),
            workload_file.as_ref(),
            "--seed".as_ref(),
            "42".as_ref(),
            "--out-dir".as_ref(),
            out.as_os_str(),
        ] as [&std::ffi::OsStr; 8]);
        check(code == 0, format!("run exited with {code}"))?;
        traces.push(std::fs::read(out.join("trace.csv")).map_err(|e| e.to_string())?);
    }
    let secs = start.elapsed().as_secs_f64();
    check(traces[0] == traces[1], "trace.csv differs between identical runs")?;
    check(secs < 30.0, format!("took {secs:.1}s"))?;
    Ok(format!("two runs produced identical {}-byte traces", traces[0].len()))
}

fn c11_baseline_estimates() -> Outcome {
    let sim = ClusterSim::default();
    let mut worst = 0.0f64;
    let mut n = 0;
    for i in 0..NUM_SYNTHETIC {
        for epochs in [1, 7, 20, 50, 333] {
            let w = WorkloadSpec { noise_sigma: 0.0, total_epochs: epochs, ..synthetic_workload(i) };
            let probe = run_baseline_probes(&sim, &w, i as u64).map_err(|e| e.to_string())?;
            check(probe.estimates.len() == BASELINE_CONFIGS.len(), "wrong number of estimates")?;
            for est in &probe.estimates {
                let truth = sim.epoch_time(est.config, &w);
                worst = worst.max((est.epoch_time_s - truth).abs());
                worst = worst.max((est.total_time_s - truth * epochs as f64).abs() / epochs as f64);
                n += 1;
            }
        }
    }
    check(worst <= BASELINE_TOL, format!("max epoch-time error {worst:.2e}"))?;
    Ok(format!("{n} estimates; max epoch-time error {worst:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("closed-form cost and time models", c1_closed_form),
        ("weight mechanism", c2_weights),
        ("actor and critic gradient checks", c3_gradients),
        ("Pareto oracle equivalence", c4_pareto),
        ("state and action contracts", c5_contracts),
        ("preference separation", c6_preferences),
        ("initialization value", c7_initialization),
        ("adaptive vs static weights", c8_adaptive_weights),
        ("report golden file", c9_golden),
        ("CLI determinism", c10_determinism),
        ("baseline-estimation soundness", c11_baseline_estimates),
    ];
    if std::env::args().any(|a| a == "--list") {
        for (i, (name, _)) in criteria.iter().enumerate() {
            println!("criterion {:02} [{name}]: test", i + 1);
        }
        return;
    }
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = format!("criterion {:02}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|p| id.contains(p.as_str()) || name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("{id} PASS [{name}] ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id} FAIL [{name}] ({secs:.1}s): {detail}");
            }
        }
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
