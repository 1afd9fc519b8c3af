//! Acceptance suite: one PASS/FAIL line per criterion; exits non-zero on any failure.

#[path = "../../core/tests/support/rational.rs"]
#[allow(dead_code)]
mod rational;

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use fedsim::accounting::{CostParams, EventCounts};
use fedsim::config::{Method, ObjectiveShape, ObjectiveSpec, RunConfig, TopologySpec};
use fedsim::consensus::{build_laplacian, gossip_rounds, gossip_step, mean_deviation_norm, Topology};
use fedsim::objective::{NoiseModel, Objective, Quadratic};
use fedsim::rng::RngStream;
use fedsim::theory::{
    bound_for_config, bound_t1, bound_t2, bound_t4, bound_t5, check_t3_ordering, evaluate_t1, evaluate_t2,
    evaluate_t4, evaluate_t5, lr_feasible, params_for_config, uniform_nu_omega, TheoryParams,
};
use fedsim::trainer::validators::{lemma1, lemma3};
use fedsim::trainer::{expected_gradient_metric, run_config, RunRecord};
use fedsim::ParamVector;
use fedsim_cli::{parse_config, run_experiment};

type BoundFn = fn(&TheoryParams) -> fedsim::Result<fedsim::theory::BoundReport>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    if took > limit {
        o.passed = false;
    }
    o.detail = format!("{} [{:.2?} of {:?}]", o.detail, took, limit);
    o
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn seed_stats(cfg: &RunConfig, seeds: u64) -> (f64, f64) {
    let v: Vec<f64> = (0..seeds)
        .map(|s| {
            let c = RunConfig { seed: s, ..cfg.clone() };
            expected_gradient_metric(&run_config(&c).unwrap()).unwrap()
        })
        .collect();
    mean_se(&v)
}

/// `a <= b` allowing two combined standard errors.
fn not_above(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.0 + 2.0 * (a.1 * a.1 + b.1 * b.1).sqrt()
}

fn quadratic_cfg() -> RunConfig {
    RunConfig {
        n_agents: 4,
        participants: 4,
        eta: 0.01,
        epochs: 10,
        epoch_len: 100,
        batch_len: 1,
        ..RunConfig::default()
    }
}

fn same_record(a: &RunRecord, b: &RunRecord) -> bool {
    a.rows == b.rows
        && a.final_theta
            .as_slice()
            .iter()
            .zip(b.final_theta.as_slice())
            .all(|(x, y)| x.to_bits() == y.to_bits())
}

fn table_ii() -> Outcome {
    let base = RunConfig {
        n_agents: 7,
        participants: 7,
        epochs: 500,
        epoch_len: 1500,
        batch_len: 256,
        ..RunConfig::default()
    };
    let mut ok = base.iterations() == 3000;
    let mut notes = Vec::new();
    for (tau, comm) in [(1, 21000.0), (10, 2100.0), (15, 1400.0)] {
        let cfg = RunConfig { tau, ..base.clone() };
        let r = EventCounts::from_schedule(&cfg, &[tau; 7], 0).report(&CostParams::default());
        ok &= r.comm == comm && r.comp == 21000.0 && r.inter_comm == 0.0;
        notes.push(format!("tau={tau}: {}/{}", r.comm, r.comp));
    }
    for (degree, rounds, inter) in [(26, 1, 78000.0), (32, 1, 96000.0), (26, 2, 156000.0)] {
        let cfg = RunConfig {
            tau: 1,
            method: Method::Consensus,
            consensus_rounds: rounds,
            ..base.clone()
        };
        let r = EventCounts::from_schedule(&cfg, &[1; 7], degree).report(&CostParams::default());
        ok &= r.inter_comm == inter && r.inter_comp == inter && r.comp == 21000.0;
        notes.push(format!("deg={degree},E={rounds}: {}", r.inter_comm));
    }
    outcome(ok, notes.join("; "))
}

fn oracle() -> Outcome {
    let mut rng = RngStream::new(2024, 0);
    let mut worst = 0.0f64;
    let mut sign_ok = true;
    for _ in 0..10_000 {
        let p = rational::random_params(&mut rng);
        let exact = rational::evaluate(&p);
        let (feasible, lhs) = lr_feasible(&p);
        sign_ok &= feasible == exact.lr_lhs.is_non_positive();
        let checked: [(BoundFn, _); 4] = [
            (bound_t1, &exact.t1),
            (bound_t2, &exact.t2),
            (bound_t4, &exact.t4),
            (bound_t5, &exact.t5),
        ];
        for (f, e) in checked {
            if let Ok(r) = f(&p) {
                worst = worst.max(rational::rel_err(r.total, e));
            }
        }
        for (v, e) in [
            (lhs, &exact.lr_lhs),
            (evaluate_t1(&p).total, &exact.t1),
            (evaluate_t2(&p).total, &exact.t2),
            (evaluate_t4(&p).total, &exact.t4),
            (evaluate_t5(&p).total, &exact.t5),
        ] {
            worst = worst.max(rational::rel_err(v, e));
        }
    }
    outcome(worst <= 1e-12 && sign_ok, format!("worst relative error {worst:.3e} over 10^4 points"))
}

fn reductions() -> Outcome {
    let mut rng = RngStream::new(99, 2);
    let mut formulas = true;
    for _ in 0..1000 {
        let p = rational::random_params(&mut rng);
        let at_tau = TheoryParams {
            nu: p.tau as f64,
            omega_sq: 0.0,
            ..p.clone()
        };
        formulas &= evaluate_t2(&at_tau).total == evaluate_t1(&p).total;
        formulas &= evaluate_t5(&TheoryParams { rounds: 0, ..p.clone() }).total == evaluate_t1(&p).total;
    }
    let base = RunConfig {
        n_agents: 6,
        participants: 5,
        tau: 6,
        eta: 0.05,
        epochs: 3,
        epoch_len: 40,
        objective: ObjectiveSpec {
            shape: ObjectiveShape::Wells {
                dim: 4,
                sharpness: 1.0,
                offset: 1.0,
                weight: 1.0,
            },
            beta: 0.3,
            sigma_sq: 1.0,
            theta0: None,
        },
        ..RunConfig::default()
    };
    let mut runs = true;
    for seed in 0..5 {
        for timing_range in [None, Some([2, 6])] {
            let mut plain = RunConfig { seed, ..base.clone() };
            plain.timing.tau_range = timing_range;
            let reference = run_config(&plain).unwrap();
            let decay = RunConfig {
                method: Method::Decay,
                decay_lambda: 1.0,
                ..plain.clone()
            };
            let gossip = RunConfig {
                method: Method::Consensus,
                consensus_rounds: 0,
                topology: Some(TopologySpec::Ring),
                ..plain.clone()
            };
            runs &= same_record(&reference, &run_config(&decay).unwrap());
            runs &= same_record(&reference, &run_config(&gossip).unwrap());
        }
    }
    outcome(formulas && runs, format!("formula identities {formulas}, bitwise run identities {runs}"))
}

fn t4_limits() -> Outcome {
    let mut p = params_for_config(&quadratic_cfg()).unwrap().unwrap();
    let mut worst_total = 0.0f64;
    let mut worst_local = 0.0f64;
    let mut worst_zero = 0.0f64;
    for tau in 2..=20 {
        p.tau = tau;
        let (nu, omega_sq) = uniform_nu_omega(tau);
        let t2 = evaluate_t2(&TheoryParams { nu, omega_sq, ..p.clone() });
        let t4 = evaluate_t4(&TheoryParams {
            decay_lambda: 1.0 - 1e-6,
            ..p.clone()
        });
        worst_total = worst_total.max((t4.total - t2.total).abs() / t2.total);
        worst_local = worst_local.max((t4.term_local - t2.term_local).abs() / t2.term_local);
        let near_zero = evaluate_t4(&TheoryParams {
            decay_lambda: 1e-9,
            ..p.clone()
        });
        let target = 2.0 * p.eta * p.eta * p.l * p.l * p.sigma_sq;
        worst_zero = worst_zero.max((near_zero.term_local - target).abs() / target);
    }
    outcome(
        worst_total <= 1e-3 && worst_zero <= 1e-6,
        format!(
            "lambda->1 total rel {worst_total:.2e} (term_local alone {worst_local:.2e}); lambda->0 term_local rel {worst_zero:.2e}"
        ),
    )
}

fn t3_grid() -> Outcome {
    let mut checked = 0;
    let mut failures = 0;
    for (eta, sigma_sq, beta) in [(0.01, 1.0, 0.0), (0.001, 4.0, 0.5), (0.02, 0.1, 1.0)] {
        for tau in 2..=20 {
            for j in 1..=20 {
                let p = TheoryParams {
                    l: 1.0,
                    beta,
                    sigma_sq,
                    m: 4,
                    tau,
                    eta,
                    delta_f: 3.0,
                    k: 1000,
                    decay_lambda: 0.05 * j as f64,
                    ..TheoryParams::default()
                };
                if !lr_feasible(&p).0 {
                    continue;
                }
                checked += 1;
                if !check_t3_ordering(&p) {
                    failures += 1;
                }
            }
        }
    }
    outcome(failures == 0 && checked > 0, format!("{failures} violations over {checked} feasible grid points"))
}

fn gossip() -> Outcome {
    let topologies = [
        Topology::path(5).unwrap(),
        Topology::ring(7).unwrap(),
        Topology::complete(5).unwrap(),
        Topology::random(6, 2, 3, &mut RngStream::new(3, 0), 1000).unwrap(),
        Topology::new(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap(),
    ];
    let mut rng = RngStream::new(11, 1);
    let (mut mean_ok, mut contract_ok, mut limit_ok) = (true, true, true);
    let mut residuals = Vec::new();
    for topo in &topologies {
        let spec = build_laplacian(topo).unwrap();
        let eps = 0.9 / topo.delta() as f64;
        let rho = spec.perron_rho(eps);
        residuals.push(format!("{:.1e}", rho.powi(200)));
        for _ in 0..100 {
            let g: Vec<ParamVector> = (0..topo.n())
                .map(|_| ParamVector::new((0..3).map(|_| 10.0 * rng.standard_normal()).collect()).unwrap())
                .collect();
            let mean = |v: &[ParamVector]| -> Vec<f64> {
                (0..3).map(|c| v.iter().map(|x| x[c]).sum::<f64>() / v.len() as f64).collect()
            };
            let target = mean(&g);
            let scale = target.iter().map(|x| x.abs()).fold(1.0, f64::max);
            let mut cur = g.clone();
            for _ in 0..5 {
                let before = mean_deviation_norm(&cur);
                cur = gossip_step(&cur, topo, eps).unwrap();
                contract_ok &= mean_deviation_norm(&cur) <= (rho + 1e-9) * before;
                for (a, b) in mean(&cur).iter().zip(&target) {
                    mean_ok &= (a - b).abs() <= 1e-12 * scale;
                }
            }
            let long = gossip_rounds(&g, topo, eps, 200).unwrap();
            for v in &long {
                for (x, t) in v.as_slice().iter().zip(&target) {
                    limit_ok &= (x - t).abs() <= 1e-9;
                }
            }
        }
    }
    let p5 = build_laplacian(&Topology::path(5).unwrap()).unwrap().mu2;
    let p3 = build_laplacian(&Topology::path(3).unwrap()).unwrap().eigenvalues;
    let k4 = build_laplacian(&Topology::complete(4).unwrap()).unwrap().eigenvalues;
    let spectra_ok = (p5 - 0.381966).abs() <= 1e-6
        && (p5 - 0.3820).abs() < 5e-5
        && p3.iter().zip([0.0, 1.0, 3.0]).all(|(a, b)| (a - b).abs() <= 1e-9)
        && k4.iter().zip([0.0, 4.0, 4.0, 4.0]).all(|(a, b)| (a - b).abs() <= 1e-9);
    outcome(
        mean_ok && contract_ok && limit_ok && spectra_ok,
        format!(
            "mean {mean_ok}, contraction {contract_ok}, 200-round limit {limit_ok} (rho^200 {}), spectra {spectra_ok} (path5 mu2 = {p5:.6})",
            residuals.join(" ")
        ),
    )
}

fn noise() -> Outcome {
    let obj = Objective::quadratic(
        Quadratic::diagonal(&[0.5, 1.0, 2.0, 0.25], &[0.0; 4]).unwrap(),
        NoiseModel::new(0.5, 1.0).unwrap(),
    );
    let theta = ParamVector::new(vec![1.0, -1.0, 0.5, 2.0]).unwrap();
    let grad = obj.full_gradient(&theta).unwrap();
    let n = 100_000;
    let mut rng = RngStream::new(5, 0);
    let mut sum = [0.0; 4];
    let mut sum_sq = [0.0; 4];
    let mut dev = 0.0;
    for _ in 0..n {
        let g = obj.sample_gradient(&theta, &mut rng).unwrap();
        for c in 0..4 {
            sum[c] += g[c];
            sum_sq[c] += g[c] * g[c];
        }
        dev += g.sub(&grad).unwrap().norm_sq().unwrap();
    }
    let nf = n as f64;
    let unbiased = (0..4).all(|c| {
        let mean = sum[c] / nf;
        let var = sum_sq[c] / nf - mean * mean;
        (mean - grad[c]).abs() <= 4.0 * (var / nf).sqrt()
    });
    let expected = obj.noise.variance(grad.norm_sq().unwrap());
    let variance_ok = ((dev / nf) - expected).abs() <= 0.03 * expected;
    let mut lemmas = true;
    for m in [2, 4, 8] {
        lemmas &= lemma1(&obj, &theta, m, n, 7).unwrap().passed();
        lemmas &= lemma3(&obj, &theta, m, n, 7).unwrap().passed();
    }
    outcome(
        unbiased && variance_ok && lemmas,
        format!("unbiased {unbiased}, variance law {variance_ok}, lemma validators {lemmas}"),
    )
}

fn sandwich() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let mut check = |cfg: RunConfig, label: String| {
        let (name, bound) = bound_for_config(&cfg).unwrap().unwrap();
        let (mean, se) = seed_stats(&cfg, 20);
        let pass = bound.feasible && mean + 3.0 * se <= bound.total;
        ok &= pass;
        notes.push(format!("{label}: {mean:.4} <= {name} {:.4}", bound.total));
    };
    for tau in [1, 5, 10] {
        check(RunConfig { tau, ..quadratic_cfg() }, format!("tau={tau}"));
    }
    for rounds in [1, 2] {
        let cfg = RunConfig {
            method: Method::Consensus,
            consensus_eps: 0.2,
            consensus_rounds: rounds,
            topology: Some(TopologySpec::Path),
            ..quadratic_cfg()
        };
        check(cfg, format!("path4 E={rounds}"));
    }
    outcome(ok, notes.join("; "))
}

fn wells(x0: f64, sigma_sq: f64, eta: f64, epochs: usize) -> RunConfig {
    RunConfig {
        n_agents: 8,
        participants: 8,
        eta,
        epochs,
        epoch_len: 100,
        objective: ObjectiveSpec {
            shape: ObjectiveShape::Wells {
                dim: 5,
                sharpness: 1.0,
                offset: 1.0,
                weight: 1.0,
            },
            beta: 0.0,
            sigma_sq,
            theta0: Some(vec![x0; 5]),
        },
        ..RunConfig::default()
    }
}

fn spearman_is_one(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] < w[1])
}

fn trends() -> Outcome {
    // (a) start on the slope of the basin so progress is visible
    let a_base = wells(1.5, 1.0, 0.2, 3);
    let a: Vec<(f64, f64)> = [1, 5, 10, 15]
        .into_iter()
        .map(|tau| seed_stats(&RunConfig { tau, ..a_base.clone() }, 20))
        .collect();
    let a_means: Vec<f64> = a.iter().map(|s| s.0).collect();
    let a_ok = spearman_is_one(&a_means) && a.windows(2).all(|w| not_above(w[0], w[1]));

    // (b) start at the minimum where the noise floor dominates
    let mut b_base = RunConfig { tau: 15, ..wells(0.0, 4.0, 0.05, 5) };
    b_base.timing.tau_range = Some([1, 15]);
    let plain = seed_stats(&b_base, 20);
    let decayed: Vec<(f64, f64)> = [0.92, 0.95, 0.98]
        .into_iter()
        .map(|decay_lambda| {
            seed_stats(
                &RunConfig {
                    method: Method::Decay,
                    decay_lambda,
                    ..b_base.clone()
                },
                20,
            )
        })
        .collect();
    let b_ok = decayed.iter().all(|d| not_above(*d, plain))
        && decayed[1..].iter().chain([&plain]).all(|d| decayed[0].0 < d.0);

    // (c) denser graph gossips faster
    let c_base = RunConfig { tau: 10, ..wells(2.0, 1.0, 0.05, 5) };
    let pavg = seed_stats(&c_base, 20);
    let gossip = |topo: TopologySpec| {
        seed_stats(
            &RunConfig {
                method: Method::Consensus,
                consensus_rounds: 1,
                consensus_eps: 0.1,
                topology: Some(topo),
                ..c_base.clone()
            },
            20,
        )
    };
    let sparse = gossip(TopologySpec::Path);
    let dense = gossip(TopologySpec::Complete);
    let c_ok = not_above(dense, sparse) && not_above(sparse, pavg) && not_above(dense, pavg);

    outcome(
        a_ok && b_ok && c_ok,
        format!(
            "(a) {a_ok} {a_means:.5?}; (b) {b_ok} plain {:.5} decay {:.5?}; (c) {c_ok} complete {:.6} path {:.6} pavg {:.6}",
            plain.0,
            decayed.iter().map(|d| d.0).collect::<Vec<_>>(),
            dense.0,
            sparse.0,
            pavg.0
        ),
    )
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let text = r#"
seeds = [3, 4]

[run]
method = "decay"
n_agents = 6
participants = 5
tau = 5
decay_lambda = 0.9
epochs = 2
epoch_len = 50

[run.objective]
kind = "wells"
dim = 3
beta = 0.2

[run.timing]
kind = "uniform"
spread = 0.3

[[sweep]]
path = "eta"
values = [0.01, 0.05]
"#;
    let tmp = tempfile::tempdir().unwrap();
    let mut trees = Vec::new();
    for (name, jobs) in [("seq", Some(1)), ("again", Some(1)), ("par", Some(4))] {
        let mut spec = parse_config(text).unwrap();
        spec.output.dir = tmp.path().join(name);
        run_experiment(&spec, jobs).unwrap();
        trees.push(read_tree(&spec.output.dir));
    }
    let ok = trees[0] == trees[1] && trees[0] == trees[2] && trees[0].len() == 6;
    outcome(ok, format!("{} files compared across sequential, rerun and 4-worker runs", trees[0].len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("cost table replication", Duration::from_secs(1), table_ii),
        ("bound oracle agreement", Duration::from_secs(10), oracle),
        ("reduction identities", Duration::from_secs(60), reductions),
        ("decay bound limits", Duration::from_secs(1), t4_limits),
        ("decay ordering grid", Duration::from_secs(1), t3_grid),
        ("gossip properties", Duration::from_secs(10), gossip),
        ("noise statistics", Duration::from_secs(60), noise),
        ("empirical vs bound", Duration::from_secs(300), sandwich),
        ("qualitative trends", Duration::from_secs(900), trends),
        ("determinism", Duration::from_secs(120), determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        let o = timed(limit, f);
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("{tag} criterion {}: {name}: {}", i + 1, o.detail);
        if !o.passed {
            failed.push(i + 1);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
