//! Acceptance suite: one PASS/FAIL line per criterion, with its tolerance
//! and runtime limit. Exits nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use staged_select::alignment::ROW_TOLERANCE;
use staged_select::enumerate::DEFAULT_ENUMERATION_CAP;
use staged_select::experiments::{
    coupled_dominance_sweep, default_drift_schedule, dependent_model_experiment, mc_estimate,
};
use staged_select::oracle::{
    audit_coupling, dp_optimal_value, exact_expected_value, exact_expected_values,
    exhaustive_strategy_search, lemma_sweep, CouplingAudit,
};
use staged_select::{
    full_catalog, greedy_strategy, DiscreteLaw, DriftModel, IncrementModel, ProcessModel, Schedule,
    StrategySpec,
};

const EXACT_CAP: u64 = DEFAULT_ENUMERATION_CAP;
const SEARCH_CAP: u64 = 1_000_000;

const C1_LIMIT: Duration = Duration::from_secs(1);
const C2_LIMIT: Duration = Duration::from_secs(60);
const C3_LIMIT: Duration = Duration::from_secs(60);
const C4_LIMIT: Duration = Duration::from_secs(120);
const C4_GAUSSIAN_REPS: usize = 100_000;
const C5_LIMIT: Duration = Duration::from_secs(180);
const C6_GAUSSIAN_REPS: usize = 1_000;
const C6_TOLERANCE: f64 = 1e-12;
const C7_LIMIT: Duration = Duration::from_secs(5);
const C7_TRIALS: u64 = 10_000;
const C7_MAX_K: usize = 16;
const C8_LIMIT: Duration = Duration::from_secs(30);
const C8_REPS: usize = 1_000_000;
const C8_SIGMAS: f64 = 4.0;
const C9_LIMIT: Duration = Duration::from_secs(120);
const C9_REPS: usize = 100_000;
const C9_SIGMAS: f64 = 3.0;

const SEED: u64 = 20_240_601;

fn r(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn discrete(support: &[f64], probs: &[(i64, i64)]) -> ProcessModel {
    IncrementModel::discrete(
        support.to_vec(),
        probs.iter().map(|&(n, d)| r(n, d)).collect(),
    )
    .unwrap()
    .into()
}

fn rademacher() -> ProcessModel {
    IncrementModel::rademacher(1.0).unwrap().into()
}

fn instance_a() -> (ProcessModel, Schedule) {
    (rademacher(), Schedule::new(&[1, 2], &[2, 1], 3, 2).unwrap())
}

/// Discrete instances with N in {3, 4}, support sizes 2 and 3, k in {2, 3}.
fn exact_instances() -> Vec<(&'static str, ProcessModel, Schedule)> {
    let (m, s) = instance_a();
    vec![
        ("A: N=3 rademacher t=(1,2)", m, s),
        (
            "B: N=3 {-1,0,2} t=(1,2)",
            discrete(&[-1.0, 0.0, 2.0], &[(1, 4), (1, 2), (1, 4)]),
            Schedule::new(&[1, 2], &[2, 1], 3, 2).unwrap(),
        ),
        (
            "C: N=4 rademacher t=(1,2,3)",
            rademacher(),
            Schedule::new(&[1, 2, 3], &[3, 2, 1], 4, 3).unwrap(),
        ),
        (
            "D: N=4 {-1,0,1} t=(1,2)",
            discrete(&[-1.0, 0.0, 1.0], &[(1, 3), (1, 3), (1, 3)]),
            Schedule::new(&[1, 2], &[2, 1], 4, 2).unwrap(),
        ),
        (
            "E: N=3 {-2,1} t=(1,3)",
            discrete(&[-2.0, 1.0], &[(1, 3), (2, 3)]),
            Schedule::new(&[1, 3], &[2, 1], 3, 3).unwrap(),
        ),
        (
            "F: N=4 {-1,0,3} t=(1,2,3)",
            discrete(&[-1.0, 0.0, 3.0], &[(1, 2), (1, 4), (1, 4)]),
            Schedule::new(&[1, 2, 3], &[3, 2, 1], 4, 3).unwrap(),
        ),
    ]
}

type Check<'a> = Box<dyn FnOnce() -> Outcome + 'a>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut out = f();
    let elapsed = start.elapsed();
    out.detail += &format!(
        " [{:.2}s, limit {}s]",
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    out.pass &= elapsed <= limit;
    out
}

fn c1() -> Outcome {
    timed(C1_LIMIT, || {
        let (m, s) = instance_a();
        let g = exact_expected_value(&m, &s, &greedy_strategy(), EXACT_CAP).unwrap();
        let (dp, _) = dp_optimal_value(&m, &s, EXACT_CAP).unwrap();
        Outcome {
            pass: g.value == r(17, 16) && dp.value == r(17, 16),
            detail: format!(
                "greedy = {}, dp = {}, expected 17/16 exactly",
                g.value, dp.value
            ),
        }
    })
}

fn c2() -> Outcome {
    timed(C2_LIMIT, || {
        let mut pass = true;
        let mut notes = Vec::new();
        for (name, m, s) in exact_instances() {
            let values = exact_expected_values(&m, &s, &full_catalog(), EXACT_CAP).unwrap();
            let (dp, _) = dp_optimal_value(&m, &s, EXACT_CAP).unwrap();
            let greedy = &values[0].value;
            let ok = *greedy == dp.value && values.iter().all(|v| v.value <= *greedy);
            pass &= ok;
            notes.push(format!(
                "{name}: greedy = dp = {greedy}{}",
                if ok { "" } else { " FAILED" }
            ));
        }
        Outcome {
            pass,
            detail: format!("{} instances, exact; {}", notes.len(), notes.join("; ")),
        }
    })
}

fn c3() -> Outcome {
    timed(C3_LIMIT, || {
        let (m, s) = instance_a();
        let search = exhaustive_strategy_search(&m, &s, SEARCH_CAP).unwrap();
        let (dp, _) = dp_optimal_value(&m, &s, EXACT_CAP).unwrap();
        Outcome {
            pass: search.best == dp.value,
            detail: format!(
                "exhaustive best = {} over {} policies, dp = {}",
                search.best, search.tried, dp.value
            ),
        }
    })
}

fn c4() -> Outcome {
    timed(C4_LIMIT, || {
        let (m, s) = instance_a();
        let mut violations = 0;
        for alg in full_catalog() {
            let a = audit_coupling(&m, &s, &alg, EXACT_CAP).unwrap();
            violations += a.atoms - a.dominance_ok;
        }
        let g: ProcessModel = IncrementModel::gaussian(0.0, 1.0).unwrap().into();
        let gs = Schedule::new(&[2, 4, 8], &[8, 4, 1], 16, 8).unwrap();
        let three = [
            StrategySpec::AntiGreedy,
            StrategySpec::LaggedGreedy,
            StrategySpec::DriftAware,
        ];
        let rows = coupled_dominance_sweep(&g, &gs, &three, C4_GAUSSIAN_REPS, SEED).unwrap();
        let mc: usize = rows.iter().map(|r| r.dominance_violations).sum();
        Outcome {
            pass: violations == 0 && mc == 0,
            detail: format!(
                "64 atoms x {} strategies: {violations} violations; {C4_GAUSSIAN_REPS} gaussian \
                 realizations (N=16, k=3) x 3 strategies: {mc} violations",
                full_catalog().len()
            ),
        }
    })
}

/// Exhaustive coupling audits of every instance and strategy, shared by the
/// measure-preservation and inversion criteria.
fn all_audits() -> Vec<(&'static str, CouplingAudit)> {
    let mut out = Vec::new();
    for (name, m, s) in exact_instances() {
        for alg in full_catalog() {
            out.push((name, audit_coupling(&m, &s, &alg, EXACT_CAP).unwrap()));
        }
    }
    out
}

fn c5(audits: &[(&str, CouplingAudit)], audit_time: Duration) -> Outcome {
    let mut pass = true;
    let mut audited = 0u64;
    for (name, a) in audits {
        let ok = a.bijective
            && a.pushforward_ok == a.atoms
            && a.permutation_ok == a.atoms
            && a.coupled_greedy_value == a.greedy_value;
        if !ok {
            eprintln!("criterion 5 failure on {name}: {a:?}");
        }
        pass &= ok;
        audited += a.atoms;
    }
    Outcome {
        pass: pass && audit_time <= C5_LIMIT,
        detail: format!(
            "{} instances x {} strategies ({audited} atom audits): bijective, P(phi(x)) = P(x), \
             measurable block permutations, E[greedy(phi(X))] = E[greedy(X)], zero tolerance",
            exact_instances().len(),
            full_catalog().len()
        ) + &format!(
            " [{:.2}s, limit {}s]",
            audit_time.as_secs_f64(),
            C5_LIMIT.as_secs()
        ),
    }
}

fn c6(audits: &[(&str, CouplingAudit)]) -> Outcome {
    let atoms: u64 = audits.iter().map(|(_, a)| a.atoms).sum();
    let exact_failures: u64 = audits.iter().map(|(_, a)| a.atoms - a.inversion_ok).sum();
    let g: ProcessModel = IncrementModel::gaussian(0.0, 1.0).unwrap().into();
    let gs = Schedule::new(&[2, 4, 8], &[8, 4, 1], 16, 8).unwrap();
    let rows =
        coupled_dominance_sweep(&g, &gs, &full_catalog(), C6_GAUSSIAN_REPS, SEED + 6).unwrap();
    let worst = rows
        .iter()
        .map(|r| r.max_inversion_error)
        .fold(0.0, f64::max);
    Outcome {
        pass: exact_failures == 0 && worst <= C6_TOLERANCE && ROW_TOLERANCE <= C6_TOLERANCE,
        detail: format!(
            "{atoms} atom audits: {exact_failures} inexact inversions; {C6_GAUSSIAN_REPS} gaussian \
             ensembles x {} strategies: max error {worst:e} (tolerance {C6_TOLERANCE:e})",
            full_catalog().len()
        ),
    }
}

fn c7() -> Outcome {
    timed(C7_LIMIT, || {
        let per_k = C7_TRIALS / C7_MAX_K as u64;
        let mut found = 0;
        for k in 1..=C7_MAX_K {
            found += lemma_sweep(k, per_k, SEED + k as u64)
                .unwrap()
                .counterexamples
                .len();
        }
        Outcome {
            pass: found == 0,
            detail: format!(
                "{} triples, k = 1..={C7_MAX_K}: {found} counterexamples",
                per_k * C7_MAX_K as u64
            ),
        }
    })
}

fn c8() -> Outcome {
    timed(C8_LIMIT, || {
        let (m, s) = instance_a();
        let est = mc_estimate(&m, &s, &greedy_strategy(), C8_REPS, SEED).unwrap();
        let dev = (est.mean - 17.0 / 16.0).abs() / est.stderr;
        Outcome {
            pass: dev <= C8_SIGMAS,
            detail: format!(
                "{C8_REPS} reps: mean {:.5} +- {:.5}, {dev:.2} stderr from 17/16 (limit {C8_SIGMAS})",
                est.mean, est.stderr
            ),
        }
    })
}

fn c9() -> Outcome {
    timed(C9_LIMIT, || {
        let s = default_drift_schedule();
        let drift = DriftModel::default_experiment();
        let with = dependent_model_experiment(&drift, &s, C9_REPS, SEED).unwrap();
        let zero =
            DriftModel::new(drift.base.clone(), DiscreteLaw::degenerate(0.0).unwrap()).unwrap();
        let without = dependent_model_experiment(&zero, &s, C9_REPS, SEED).unwrap();
        let wins = with.advantage >= C9_SIGMAS * with.advantage_stderr;
        let vanishes = without.advantage <= C9_SIGMAS * without.advantage_stderr;
        Outcome {
            pass: wins && vanishes,
            detail: format!(
                "drift: drift_aware - greedy = {:.4} ({:.1} paired stderr, need >= {C9_SIGMAS}); \
                 zero drift: {:.4} ({:.1} paired stderr, need <= {C9_SIGMAS})",
                with.advantage, with.z, without.advantage, without.z
            ),
        }
    })
}

fn run_cli(args: &[&str], threads: &str) -> (Vec<u8>, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_staged-select"))
        .args(args)
        .env("STAGED_SELECT_THREADS", threads)
        .output()
        .expect("binary runs");
    (out.stdout, out.status.code().unwrap_or(-1))
}

fn c10(dir: &Path) -> Outcome {
    let cfg = dir.join("instance_a.json");
    std::fs::write(
        &cfg,
        r#"{"model": {"kind": "discrete", "support": [1, -1], "probs": ["1/2", "1/2"]},
            "schedule": {"times": [1, 2], "sizes": [2, 1], "N": 3, "T": 2},
            "strategy": {"name": "anti_greedy"}}"#,
    )
    .unwrap();
    let gauss = dir.join("gaussian.json");
    std::fs::write(
        &gauss,
        r#"{"model": {"kind": "gaussian", "stddev": 1},
            "schedule": {"times": [2, 4, 8], "sizes": [8, 4, 1], "N": 16, "T": 8}}"#,
    )
    .unwrap();
    let (cfg, gauss) = (cfg.to_str().unwrap(), gauss.to_str().unwrap());
    let commands: Vec<Vec<&str>> = vec![
        vec!["validate", "--config", cfg],
        vec!["simulate", "--config", cfg, "--seed", "7"],
        vec![
            "simulate", "--config", gauss, "--seed", "7", "--format", "json",
        ],
        vec!["verify", "--config", cfg],
        vec![
            "verify", "--config", gauss, "--mode", "mc", "--reps", "2000",
        ],
        vec!["oracle", "--config", cfg, "--search"],
        vec!["lemma", "--k", "8", "--trials", "2000", "--seed", "3"],
        vec!["compare", "--reps", "5000", "--seed", "1"],
        vec![
            "compare", "--reps", "5000", "--seed", "1", "--format", "json",
        ],
        vec!["compare", "--reps", "300", "--coupled"],
        vec!["drift", "--reps", "5000", "--seed", "2"],
        vec![
            "drift",
            "--reps",
            "5000",
            "--seed",
            "2",
            "--zero-drift",
            "--format",
            "json",
        ],
    ];
    let mut mismatches = Vec::new();
    for args in &commands {
        let runs: Vec<(Vec<u8>, i32)> = ["1", "8", "1", "8"]
            .iter()
            .map(|t| run_cli(args, t))
            .collect();
        let same = runs.iter().all(|r| r == &runs[0]) && runs[0].1 == 0 && !runs[0].0.is_empty();
        if !same {
            mismatches.push(args.join(" "));
        }
    }
    Outcome {
        pass: mismatches.is_empty(),
        detail: format!(
            "{} commands x 2 runs x threads {{1, 8}}: {}",
            commands.len(),
            if mismatches.is_empty() {
                "byte-identical".to_string()
            } else {
                format!("differ or fail: {}", mismatches.join(" | "))
            }
        ),
    }
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let audits = all_audits();
    let audit_time = start.elapsed();
    let criteria: Vec<(&str, Check)> = vec![
        ("exact optimality of greedy on instance A", Box::new(c1)),
        ("exact inequality on discrete instances", Box::new(c2)),
        ("backward induction equals exhaustive search", Box::new(c3)),
        ("pathwise dominance under the coupling", Box::new(c4)),
        (
            "measure preservation of the coupling",
            Box::new(|| c5(&audits, audit_time)),
        ),
        ("inversion of the coupling", Box::new(|| c6(&audits))),
        ("order-statistic inequality", Box::new(c7)),
        ("Monte Carlo consistency", Box::new(c8)),
        ("history helps under persistent drift", Box::new(c9)),
        (
            "deterministic CLI output across thread counts",
            Box::new(|| c10(dir.path())),
        ),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.into_iter().enumerate() {
        let out = check();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!out.pass);
        println!("{tag} criterion {}: {name}: {}", k + 1, out.detail);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
