//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so the lines are
//! always visible.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::ExitCode;
use std::thread;
use std::time::{Duration, Instant};

use diffperf_core::{
    allocate_closed_form, allocate_numeric_oracle, allocate_subclasses, compute_stats, partition, per_flow_ratio,
    ratio, verify_kkt, ClassId, EstimatorConfig, FlowId, FlowThroughputSample, InterClassInput, Rational,
    ThroughputEstimator,
};
use diffperf_sim::{run, sweep, RunOutput, Scenario, SweepParam};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SHIPPED: [&str; 6] = [
    "scenario1",
    "scenario2",
    "scenario2_baseline",
    "scenario3",
    "buffer_study",
    "buffer_study_baseline",
];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"));
    Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn closed_form_vs_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..1000 {
        let k = rng.random_range(1..=6);
        let alpha = match rng.random_range(0..3) {
            0 => rng.random_range(0.05..0.95),
            1 => 1.0,
            _ => rng.random_range(1.05..16.0),
        };
        let cap = rng.random_range(1e6..1e9);
        let mut input = InterClassInput::new(cap, alpha);
        for i in 0..k {
            let n = if i == 0 {
                rng.random_range(1..40)
            } else {
                rng.random_range(0..40)
            };
            input = input.with_class(format!("c{i}"), rng.random_range(0.1..10.0), n);
        }
        let alloc = allocate_closed_form(&input).expect("valid instance");
        let oracle = allocate_numeric_oracle(&input, 1e-12).expect("valid instance");
        if !verify_kkt(&input, &alloc, 1e-9) {
            failures += 1;
        }
        for (id, x) in &alloc.shares {
            let o = oracle.shares[id];
            if *x == 0.0 && o < 1e-9 * cap {
                continue;
            }
            let e = rel(*x, o);
            worst = worst.max(e);
            if e > 1e-6 {
                failures += 1;
            }
        }
    }
    let took = start.elapsed();
    verdict(
        failures == 0 && took < Duration::from_secs(10),
        format!("1000 instances, worst rel err {worst:.2e}, {failures} failures, {took:.2?}"),
    )
}

fn exact_weight_ratio() -> Verdict {
    let one = ratio(1, 1);
    let input = InterClassInput::new(ratio(50_000_000, 1), one)
        .with_class("G", ratio(3, 1), 13)
        .with_class("S", ratio(2, 1), 13)
        .with_class("B", ratio(1, 1), 13);
    let alloc = allocate_closed_form(&input).expect("valid");
    let (g, s, b) = (ClassId::from("G"), ClassId::from("S"), ClassId::from("B"));
    let gb = per_flow_ratio(&alloc, &input, &g, &b).expect("non-empty");
    let sb = per_flow_ratio(&alloc, &input, &s, &b).expect("non-empty");
    let total_ok = alloc.total() == ratio(50_000_000, 1);
    verdict(
        gb == ratio(3, 1) && sb == ratio(2, 1) && total_ok,
        format!("G:B = {gb}, S:B = {sb}, total exact = {total_ok}"),
    )
}

fn intra_class_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let betas: Vec<Rational> = (0..=8).map(|q| ratio(-8 + q, 4)).collect();
    let mut violations = 0;
    let mut checks = 0;
    for _ in 0..200 {
        let n = rng.random_range(3..=50usize);
        let xs: Vec<i64> = (0..n).map(|_| rng.random_range(0..20_000)).collect();
        let sum: i64 = xs.iter().sum();
        // class capacity at least the total throughput, so mean <= X/n
        let cap = ratio(sum + rng.random_range(1..50_000), 1);
        let gamma = ratio(rng.random_range(0..=4), 4);
        let samples: Vec<_> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| FlowThroughputSample::new(i as u64, ratio(*x, 1)))
            .collect();
        let stats = compute_stats(&samples).expect("non-empty");
        let fair = cap.clone() / ratio(n as i64, 1);
        let mut prev_lower_mean: Option<Rational> = None;
        let mut prev_upper: Option<Rational> = None;
        for beta in &betas {
            let part = partition(&samples, &stats, beta.clone()).expect("valid beta");
            let a = allocate_subclasses(&part, &samples, &stats, cap.clone(), gamma.clone()).expect("valid");
            checks += 1;
            if a.capacity_lower.clone() + a.capacity_upper.clone() != cap {
                violations += 1;
            }
            if !part.lower.is_empty() {
                let lm = part
                    .lower
                    .iter()
                    .map(|f| ratio(xs[f.0 as usize], 1))
                    .fold(ratio(0, 1), |a, b| a + b)
                    / ratio(part.lower.len() as i64, 1);
                if lm > a.per_flow_lower {
                    violations += 1;
                }
                if prev_lower_mean.as_ref().is_some_and(|p| lm < *p) {
                    violations += 1;
                }
                prev_lower_mean = Some(lm);
            }
            if !part.upper.is_empty() {
                if a.per_flow_upper < fair {
                    violations += 1;
                }
                if prev_upper.as_ref().is_some_and(|p| a.per_flow_upper < *p) {
                    violations += 1;
                }
                prev_upper = Some(a.per_flow_upper.clone());
            }
        }
    }
    verdict(
        violations == 0,
        format!("200 sets x 9 betas ({checks} cases), {violations} violations"),
    )
}

fn worked_example() -> Verdict {
    let mbps = |x: i64| ratio(x * 1_000_000, 1);
    let samples: Vec<_> = [2, 4, 6, 8]
        .iter()
        .enumerate()
        .map(|(i, x)| FlowThroughputSample::new(i as u64, mbps(*x)))
        .collect();
    let stats = compute_stats(&samples).expect("non-empty");
    let part = partition(&samples, &stats, ratio(-1, 4)).expect("valid");
    let a = allocate_subclasses(&part, &samples, &stats, mbps(20), ratio(1, 2)).expect("valid");
    verdict(
        a.capacity_lower == mbps(8) && a.capacity_upper == mbps(12),
        format!("(X_L, X_H) = ({}, {}) bps", a.capacity_lower, a.capacity_upper),
    )
}

fn ewma() -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    for dq in [0i64, 1, 4, 7] {
        let delta = ratio(dq, 8);
        let cfg = EstimatorConfig::new(delta.clone(), ratio(1, 1), ratio(1, 1));
        let mut est = ThroughputEstimator::new(cfg, ratio(0, 1)).expect("valid");
        est.register_flow(FlowId(1), "G".into(), ratio(0, 1)).expect("new flow");
        let target = ratio(8_000_000, 1);
        let mut gap = target.clone();
        for t in 1..=12i64 {
            est.ingest_counter(FlowId(1), 1_000_000 * t as u64, ratio(t, 1))
                .expect("monotone");
            let x = est.update_epoch(ratio(t, 1))[&FlowId(1)].clone();
            gap *= delta.clone();
            ok &= target.clone() - x == gap;
        }
    }
    notes.push("constant input: gap = delta^k exactly for delta in {0, 1/8, 1/2, 7/8}".to_string());

    // delta = 0 tracks a varying rate exactly
    let cfg = EstimatorConfig::new(ratio(0, 1), ratio(1, 1), ratio(1, 1));
    let mut est = ThroughputEstimator::new(cfg, ratio(0, 1)).expect("valid");
    est.register_flow(FlowId(1), "G".into(), ratio(0, 1)).expect("new flow");
    let mut counter = 0u64;
    for t in 1..=10i64 {
        let bytes = 100_000 * (t as u64 % 4 + 1);
        counter += bytes;
        est.ingest_counter(FlowId(1), counter, ratio(t, 1)).expect("monotone");
        let x = est.update_epoch(ratio(t, 1))[&FlowId(1)].clone();
        ok &= x == ratio(8 * bytes as i64, 1);
    }
    notes.push("delta = 0 equals instantaneous rate".to_string());
    verdict(ok, notes.join("; "))
}

fn conservation(runs: &BTreeMap<&str, RunOutput>, buffers: &BTreeMap<&str, u64>) -> Verdict {
    let mut bad = Vec::new();
    for (name, out) in runs {
        let limit = buffers[name];
        if !out.violations.is_empty() {
            bad.push(format!("{name}: {}", out.violations[0]));
        }
        if out.link.iter().any(|r| r.queue_bytes > limit) {
            bad.push(format!("{name}: queue above buffer"));
        }
    }
    verdict(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} shipped scenarios ran clean", runs.len())
        } else {
            bad.join("; ")
        },
    )
}

fn scenario1_alpha() -> Verdict {
    let sc = scenario("scenario1");
    let start = Instant::now();
    let runs = sweep(&sc, SweepParam::Alpha, &[1.0, 2.0, 4.0]).expect("scenario1 sweep");
    let took = start.elapsed();
    let mut ok = took < Duration::from_secs(120 * 3);
    let mut parts = Vec::new();
    let mut spreads = Vec::new();
    for (alpha, out) in &runs {
        let pc = &out.aggregates.per_class;
        let thr = |c: &str| pc[&ClassId::from(c)].mean_throughput_bps;
        let q = |c: &str| pc[&ClassId::from(c)].mean_qoe;
        let gb = thr("G") / thr("B");
        let sb = thr("S") / thr("B");
        let (egb, esb) = (3f64.powf(1.0 / alpha), 2f64.powf(1.0 / alpha));
        ok &= rel(gb, egb) <= 0.10 && rel(sb, esb) <= 0.10;
        if *alpha == 1.0 {
            ok &= q("G") >= q("S") && q("S") >= q("B");
        }
        spreads.push(q("G") - q("B"));
        parts.push(format!(
            "a={alpha}: G/B {gb:.3} (want {egb:.3}), S/B {sb:.3} (want {esb:.3}), QoE G/S/B {:.0}/{:.0}/{:.0}",
            q("G"),
            q("S"),
            q("B")
        ));
    }
    ok &= spreads.windows(2).all(|w| w[1] < w[0]);
    parts.push(format!("{took:.2?} for three runs"));
    verdict(ok, parts.join("; "))
}

fn rtt_unfairness(baseline: &RunOutput) -> Verdict {
    let by = |c: usize| {
        mean(
            baseline
                .flows
                .iter()
                .filter(|f| f.rtt_component == c)
                .map(|f| f.mean_throughput_bps),
        )
    };
    let (short, long) = (by(0), by(1));
    verdict(
        long < 0.85 * short,
        format!(
            "long {:.3} Mbps vs short {:.3} Mbps, ratio {:.3}",
            long / 1e6,
            short / 1e6,
            long / short
        ),
    )
}

fn diffperf_improvement(dp: &RunOutput, baseline: &RunOutput) -> Verdict {
    let lower: BTreeSet<FlowId> = dp
        .flows
        .iter()
        .filter(|f| f.lower_fraction >= 0.5)
        .map(|f| f.flow_id)
        .collect();
    let qoe_of = |out: &RunOutput, set: &BTreeSet<FlowId>| {
        mean(
            out.flows
                .iter()
                .filter(|f| set.contains(&f.flow_id))
                .filter_map(|f| f.client.qoe),
        )
    };
    let dp_lower = qoe_of(dp, &lower);
    let base_lower = qoe_of(baseline, &lower);
    let (dp_all, base_all) = (dp.aggregates.overall.mean_qoe, baseline.aggregates.overall.mean_qoe);
    verdict(
        !lower.is_empty() && dp_lower > base_lower && dp_all >= base_all,
        format!(
            "{} lower flows: QoE {dp_lower:.1} vs baseline {base_lower:.1}; population {dp_all:.1} vs {base_all:.1} ({:.2}x)",
            lower.len(),
            dp_all / base_all
        ),
    )
}

fn gamma_tradeoff() -> Verdict {
    let sc = scenario("scenario2");
    let runs = sweep(&sc, SweepParam::Gamma, &[0.0, 0.5, 1.0]).expect("gamma sweep");
    let agg: Vec<f64> = runs
        .iter()
        .map(|(_, o)| o.aggregates.aggregate_throughput_bps)
        .collect();
    let jain: Vec<f64> = runs.iter().map(|(_, o)| o.aggregates.jain_index).collect();
    let up = agg.windows(2).all(|w| w[1] >= w[0]);
    let down = jain.windows(2).all(|w| w[1] <= w[0]);
    verdict(
        up && down,
        format!(
            "aggregate Mbps {} (non-decreasing: {up}); Jain {} (non-increasing: {down})",
            agg.iter()
                .map(|a| format!("{:.4}", a / 1e6))
                .collect::<Vec<_>>()
                .join(" / "),
            jain.iter().map(|j| format!("{j:.4}")).collect::<Vec<_>>().join(" / ")
        ),
    )
}

fn buffer_study() -> Verdict {
    let buffers = [100_000.0, 1_000_000.0, 10_000_000.0];
    let (dp, base) = thread::scope(|s| {
        let a = s.spawn(|| sweep(&scenario("buffer_study"), SweepParam::Buffer, &buffers).expect("buffer sweep"));
        let b =
            s.spawn(|| sweep(&scenario("buffer_study_baseline"), SweepParam::Buffer, &buffers).expect("buffer sweep"));
        (a.join().expect("sweep thread"), b.join().expect("sweep thread"))
    });
    let stall = |runs: &[(f64, RunOutput)]| -> Vec<f64> {
        runs.iter().map(|(_, o)| o.aggregates.overall.mean_stall_s).collect()
    };
    let (d, b) = (stall(&dp), stall(&base));
    let min_at_1mb = |v: &[f64]| v[1] < v[0] && v[1] < v[2];
    let u_shape = min_at_1mb(&d) && min_at_1mb(&b);
    let reduces = d.iter().zip(&b).all(|(x, y)| x < y);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.1}")).collect::<Vec<_>>().join("/");
    verdict(
        u_shape && reduces,
        format!(
            "stall s at 100KB/1MB/10MB: DiffPerf {} vs baseline {}; minimum at 1 MB: {u_shape}; strict reduction: {reduces}",
            fmt(&d),
            fmt(&b)
        ),
    )
}

fn scenario3_dynamics(out: &RunOutput, took: Duration) -> Verdict {
    let sc = scenario("scenario3");
    let capacity = sc.link.capacity_bps.round() as u64;
    let epochs = &out.epoch_meta;
    let mut checked = 0;
    let mut bad = Vec::new();
    for w in epochs.windows(2) {
        if !w[0].departures.is_empty() && !w[1].planned.is_empty() {
            checked += 1;
            if w[1].total_rate_bps != capacity {
                bad.push(w[1].t);
            }
        }
    }
    let idle = sc.estimator_config().idle_timeout;
    let mut dips = Vec::new();
    for p in &sc.workload.pauses {
        if p.duration <= idle {
            continue;
        }
        let end = p.start + p.duration;
        let dipped = epochs
            .iter()
            .any(|e| e.t > p.start + idle && e.t <= end && !e.planned.contains(&p.flow));
        let back = epochs.iter().any(|e| e.t > end && e.planned.contains(&p.flow));
        dips.push((p.flow, dipped && back));
    }
    let dip_ok = !dips.is_empty() && dips.iter().all(|d| d.1);
    verdict(
        checked > 0 && bad.is_empty() && dip_ok && took < Duration::from_secs(300),
        format!(
            "{checked} departure epochs, {} without full reallocation; pause dip seen and recovered: {:?}; {took:.2?}",
            bad.len(),
            dips
        ),
    )
}

fn main() -> ExitCode {
    // One shared pass over the shipped scenarios feeds several criteria.
    let mut buffers = BTreeMap::new();
    let mut timings = BTreeMap::new();
    let runs: BTreeMap<&str, RunOutput> = thread::scope(|s| {
        let handles: Vec<_> = SHIPPED
            .iter()
            .map(|name| {
                let sc = scenario(name);
                buffers.insert(*name, sc.link.buffer_cells_bytes());
                (
                    *name,
                    s.spawn(move || {
                        let start = Instant::now();
                        let out = run(&sc);
                        (out, start.elapsed())
                    }),
                )
            })
            .collect();
        handles
            .into_iter()
            .filter_map(|(name, h)| {
                let (out, took) = h.join().expect("run thread");
                timings.insert(name, took);
                match out {
                    Ok(o) => Some((name, o)),
                    Err(e) => {
                        eprintln!("{name}: {e}");
                        None
                    }
                }
            })
            .collect()
    });
    let all_ran = runs.len() == SHIPPED.len();

    let mut results: Vec<(u32, &str, Verdict)> = vec![
        (1, "closed form matches oracle", closed_form_vs_oracle()),
        (2, "exact per-flow weight ratio", exact_weight_ratio()),
        (3, "sub-class monotonicity suite", intra_class_suite()),
        (4, "worked intra-class example", worked_example()),
        (5, "EWMA estimator", ewma()),
    ];
    let c6 = conservation(&runs, &buffers);
    results.push((
        6,
        "simulator conservation",
        if all_ran {
            c6
        } else {
            verdict(false, format!("a shipped scenario failed to run; {}", c6.detail))
        },
    ));
    results.push((7, "scenario 1 alpha sweep", scenario1_alpha()));
    let missing = || verdict(false, "prerequisite run failed");
    results.push((
        8,
        "RTT unfairness in baseline",
        runs.get("scenario2_baseline").map_or_else(missing, rtt_unfairness),
    ));
    results.push((
        9,
        "DiffPerf improves lower sub-class",
        match (runs.get("scenario2"), runs.get("scenario2_baseline")) {
            (Some(d), Some(b)) => diffperf_improvement(d, b),
            _ => missing(),
        },
    ));
    results.push((10, "gamma tradeoff", gamma_tradeoff()));
    results.push((11, "buffer-size study", buffer_study()));
    results.push((
        12,
        "scenario 3 dynamics",
        runs.get("scenario3")
            .map_or_else(missing, |o| scenario3_dynamics(o, timings["scenario3"])),
    ));

    let mut failed = 0;
    for (n, name, v) in &results {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        if !v.pass {
            failed += 1;
        }
        println!("criterion {n:>2} {tag}  {name}: {}", v.detail);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
