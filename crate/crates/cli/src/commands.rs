use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::json;
use staged_select::alignment::{build_alignment, AlignmentWitness, PairCheckKind, ROW_TOLERANCE};
use staged_select::config::{CapSpec, Instance, ModelSpec, OutputFormat, RunConfig, ScheduleSpec};
use staged_select::enumerate::PathSpace;
use staged_select::experiments::{
    compare_strategies, coupled_dominance_sweep, default_drift_schedule,
    dependent_model_experiment, replication, Comparison, CoupledRow,
};
use staged_select::oracle::{
    audit_coupling, dp_optimal_value, exact_expected_values, exhaustive_strategy_search,
    lemma_sweep, CouplingAudit,
};
use staged_select::seeding::Digest;
use staged_select::{
    full_catalog, greedy_strategy, run_selection, sample_ensemble, DiscreteLaw, DriftModel,
    ProcessModel, Strategy, StrategySpec,
};

use crate::error::{CliError, CliResult};
use crate::output::{csv_bytes, emit, json_bytes, optional_real, rational, real};
use crate::{Cli, Command, Format, Mode, Run};

const DEFAULT_SEED: u64 = 0;
const DEFAULT_VERIFY_REPS: usize = 10_000;
const DEFAULT_COMPARE_REPS: usize = 10_000;
const DEFAULT_DRIFT_REPS: usize = 100_000;

/// Parses JSON, naming the offending field on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("at `{path}`: {}", e.into_inner()))
    })
}

fn load_config(path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_json(&text)
}

fn parse_strategy(text: &str) -> CliResult<StrategySpec> {
    let text = text.trim();
    if text.starts_with('{') {
        parse_json(text)
    } else {
        parse_json(&json!({ "name": text }).to_string())
    }
}

/// Resolved settings of one command: flags win over the config file.
struct Ctx {
    cfg: RunConfig,
    instance: Instance,
    seed: u64,
    reps: Option<usize>,
    strategies: Vec<StrategySpec>,
    format: Format,
    out: Option<std::path::PathBuf>,
}

impl Ctx {
    fn new(
        cli: &Cli,
        run: &Run,
        fallback: Option<RunConfig>,
        default_format: Format,
    ) -> CliResult<Self> {
        let cfg = match (&run.config, fallback) {
            (Some(p), _) => load_config(p)?,
            (None, Some(cfg)) => cfg,
            (None, None) => return Err(CliError::Config("--config is required".into())),
        };
        let instance = cfg.instance()?;
        let strategies = match &run.strategy {
            Some(s) => vec![parse_strategy(s)?],
            None => match (&cfg.strategies, &cfg.strategy) {
                (Some(list), _) => list.clone(),
                (None, Some(s)) => vec![s.clone()],
                (None, None) => full_catalog(),
            },
        };
        if strategies.is_empty() {
            return Err(CliError::Config("`strategies` must not be empty".into()));
        }
        let format = cli.format.unwrap_or(match cfg.output.format {
            Some(OutputFormat::Csv) => Format::Csv,
            Some(OutputFormat::Json) => Format::Json,
            None => default_format,
        });
        let out = cli
            .out
            .clone()
            .or_else(|| cfg.output.path.clone().map(Into::into));
        Ok(Self {
            seed: run.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
            reps: run.reps.or(cfg.reps),
            cfg,
            instance,
            strategies,
            format,
            out,
        })
    }

    fn caps(&self) -> CapSpec {
        self.cfg.caps
    }

    fn emit(&self, bytes: &[u8]) -> CliResult<()> {
        emit(self.out.as_deref(), bytes)
    }
}

pub fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Validate { run } => validate(cli, run),
        Command::Simulate { run, summary } => simulate(cli, run, summary.as_deref()),
        Command::Verify { run, mode, witness } => verify(cli, run, *mode, witness.as_deref()),
        Command::Oracle {
            run,
            search,
            dp_table,
        } => oracle(cli, run, *search, dp_table.as_deref()),
        Command::Lemma { k, trials, seed } => lemma(cli, *k, *trials, *seed),
        Command::Compare { run, coupled } => compare(cli, run, *coupled),
        Command::Drift { run, zero_drift } => drift(cli, run, *zero_drift),
    }
}

fn validate(cli: &Cli, run: &Run) -> CliResult<()> {
    let ctx = Ctx::new(cli, run, None, Format::Json)?;
    let Instance { model, schedule } = &ctx.instance;
    let atoms = PathSpace::new(
        model,
        schedule.n(),
        schedule.horizon(),
        ctx.caps().enumeration,
    )
    .ok()
    .map(|s| s.len());
    let report = json!({
        "ok": true,
        "model": model.tag(),
        "independent": model.is_independent(),
        "schedule": ScheduleSpec::from(schedule),
        "stages": schedule.stages(),
        "strategies": ctx.strategies.iter().map(|s| s.id()).collect::<Vec<_>>(),
        "enumerable_atoms": atoms,
    });
    ctx.emit(&json_bytes(&report)?)
}

fn simulate(cli: &Cli, run: &Run, summary: Option<&Path>) -> CliResult<()> {
    let ctx = Ctx::new(cli, run, None, Format::Csv)?;
    let Instance { model, schedule } = &ctx.instance;
    let alg = match (&run.strategy, &ctx.cfg.strategy) {
        (Some(_), _) => ctx.strategies[0].clone(),
        (None, Some(s)) => s.clone(),
        (None, None) => greedy_strategy(),
    };
    let x = sample_ensemble(model, schedule.n(), schedule.horizon(), ctx.seed)?;
    let trace = run_selection(&x, schedule, &alg)?;
    let bytes = match ctx.format {
        Format::Csv => {
            let mut rows = Vec::new();
            for i in 0..schedule.n() {
                rows.push(vec![
                    "0".into(),
                    "0".into(),
                    i.to_string(),
                    real(0.0),
                    String::new(),
                    "true".into(),
                ]);
            }
            for rec in &trace.stages {
                for i in 0..schedule.n() {
                    rows.push(vec![
                        rec.stage.to_string(),
                        rec.time.to_string(),
                        i.to_string(),
                        optional_real(rec.values[i]),
                        rec.indices[i].to_string(),
                        rec.survivors.contains(&i).to_string(),
                    ]);
                }
            }
            csv_bytes(
                &[
                    "stage",
                    "time",
                    "process_id",
                    "value",
                    "temporal_index",
                    "survived",
                ],
                rows,
            )?
        }
        Format::Json => json_bytes(&trace)?,
    };
    ctx.emit(&bytes)?;
    if let Some(path) = summary {
        let mut digest = Digest::default();
        digest.push_f64s(x.values());
        let report = json!({
            "strategy": trace.strategy,
            "model": model.tag(),
            "schedule": ScheduleSpec::from(schedule),
            "seed": ctx.seed,
            "final_index": trace.final_index,
            "final_value": trace.final_value,
            "ensemble_digest": format!("{:016x}", digest.finish()),
        });
        emit(Some(path), &json_bytes(&report)?)?;
    }
    Ok(())
}

fn witness_rows(label: &str, w: &AlignmentWitness, rows: &mut Vec<Vec<String>>, strategy: &str) {
    for c in &w.dominance_report.checks {
        rows.push(vec![
            label.to_string(),
            strategy.to_string(),
            c.stage.to_string(),
            c.time.to_string(),
            match c.kind {
                PairCheckKind::Carried => "carried".into(),
                PairCheckKind::Reranked => "reranked".into(),
            },
            c.key.to_string(),
            c.x_process.to_string(),
            c.y_process.to_string(),
            real(c.x_value),
            real(c.y_value),
            c.ok.to_string(),
        ]);
    }
}

const WITNESS_HEADER: [&str; 11] = [
    "realization",
    "strategy",
    "stage",
    "time",
    "kind",
    "pair_key",
    "x_process",
    "y_process",
    "x_value",
    "y_value",
    "dominance_ok",
];

fn verdict(ok: bool) -> &'static str {
    if ok {
        "OK"
    } else {
        "FAIL"
    }
}

fn audit_json(a: &CouplingAudit) -> serde_json::Value {
    json!({
        "strategy": a.strategy,
        "atoms": a.atoms,
        "dominance_ok": a.dominance_ok,
        "permutation_ok": a.permutation_ok,
        "inversion_ok": a.inversion_ok,
        "pushforward_ok": a.pushforward_ok,
        "bijective": a.bijective,
        "alg_value": rational(&a.alg_value),
        "coupled_greedy_value": rational(&a.coupled_greedy_value),
        "greedy_value": rational(&a.greedy_value),
        "ok": a.ok(),
    })
}

fn verify(cli: &Cli, run: &Run, mode: Mode, witness: Option<&Path>) -> CliResult<()> {
    let ctx = Ctx::new(cli, run, None, Format::Csv)?;
    let Instance { model, schedule } = &ctx.instance;
    let mut witness_table = Vec::new();
    let all_ok;
    let bytes = match mode {
        Mode::Exhaustive => {
            let audits = ctx
                .strategies
                .iter()
                .map(|alg| audit_coupling(model, schedule, alg, ctx.caps().enumeration))
                .collect::<Result<Vec<_>, _>>()?;
            if witness.is_some() {
                let space = PathSpace::new(
                    model,
                    schedule.n(),
                    schedule.horizon(),
                    ctx.caps().enumeration,
                )?;
                for alg in &ctx.strategies {
                    for (k, atom) in space.atoms(0..space.len()).enumerate() {
                        let w = build_alignment(&atom.ensemble, schedule, alg)?;
                        witness_rows(&k.to_string(), &w, &mut witness_table, &alg.id());
                    }
                }
            }
            all_ok = audits.iter().all(CouplingAudit::ok);
            match ctx.format {
                Format::Json => json_bytes(&audits.iter().map(audit_json).collect::<Vec<_>>())?,
                Format::Csv => {
                    let mut text = String::new();
                    for a in &audits {
                        let n = a.atoms;
                        let pushforward = a.pushforward_ok == n
                            && a.bijective
                            && a.coupled_greedy_value == a.greedy_value;
                        text += &format!(
                            "{}: {}/{n} atoms: dominance {}, permutation {}, pushforward {}, inversion {}\n",
                            a.strategy,
                            a.dominance_ok.min(a.permutation_ok).min(a.pushforward_ok).min(a.inversion_ok),
                            verdict(a.dominance_ok == n && a.alg_value <= a.greedy_value),
                            verdict(a.permutation_ok == n),
                            verdict(pushforward),
                            verdict(a.inversion_ok == n),
                        );
                        text += &format!(
                            "  E[alg] = {}, E[greedy(phi(X))] = {}, E[greedy] = {}\n",
                            rational(&a.alg_value),
                            rational(&a.coupled_greedy_value),
                            rational(&a.greedy_value)
                        );
                    }
                    text.into_bytes()
                }
            }
        }
        Mode::Mc => {
            let reps = ctx.reps.unwrap_or(DEFAULT_VERIFY_REPS);
            let rows = coupled_dominance_sweep(model, schedule, &ctx.strategies, reps, ctx.seed)?;
            if witness.is_some() {
                for alg in &ctx.strategies {
                    for r in 0..reps {
                        let x = replication(model, schedule, ctx.seed, r)?;
                        let w = build_alignment(&x, schedule, alg)?;
                        witness_rows(&r.to_string(), &w, &mut witness_table, &alg.id());
                    }
                }
            }
            all_ok = rows.iter().all(|r| r.ok(ROW_TOLERANCE));
            match ctx.format {
                Format::Json => json_bytes(&rows)?,
                Format::Csv => {
                    let mut text = String::new();
                    for r in &rows {
                        let n = r.realizations;
                        let bad = r.dominance_violations.max(r.permutation_violations);
                        text += &format!(
                            "{}: {}/{n} realizations: dominance {}, permutation {}, inversion {} (max error {})\n",
                            r.strategy,
                            n - bad,
                            verdict(r.dominance_violations == 0),
                            verdict(r.permutation_violations == 0),
                            verdict(r.max_inversion_error <= ROW_TOLERANCE),
                            real(r.max_inversion_error),
                        );
                    }
                    text.into_bytes()
                }
            }
        }
    };
    ctx.emit(&bytes)?;
    if let Some(path) = witness {
        emit(Some(path), &csv_bytes(&WITNESS_HEADER, witness_table)?)?;
    }
    if all_ok {
        Ok(())
    } else {
        Err(CliError::Verification(
            "coupling checks reported violations".into(),
        ))
    }
}

fn oracle(cli: &Cli, run: &Run, search: bool, dp_table: Option<&Path>) -> CliResult<()> {
    let ctx = Ctx::new(cli, run, None, Format::Json)?;
    let Instance { model, schedule } = &ctx.instance;
    let caps = ctx.caps();
    let atoms = PathSpace::new(model, schedule.n(), schedule.horizon(), caps.enumeration)?.len();
    let values = exact_expected_values(model, schedule, &ctx.strategies, caps.enumeration)?;
    let (dp, table) = dp_optimal_value(model, schedule, caps.enumeration)?;
    let exhaustive = if search {
        Some(exhaustive_strategy_search(model, schedule, caps.search)?)
    } else {
        None
    };
    let greedy = values.iter().find(|v| v.instance.strategy == "greedy");
    let exceeding: Vec<&str> = values
        .iter()
        .filter(|v| v.value > dp.value)
        .map(|v| v.instance.strategy.as_str())
        .collect();
    let search_mismatch = exhaustive.as_ref().is_some_and(|e| e.best != dp.value);

    let bytes = match ctx.format {
        Format::Json => json_bytes(&json!({
            "instance": {
                "model": model.tag(),
                "schedule": ScheduleSpec::from(schedule),
                "atoms": atoms,
            },
            "strategies": values.iter().map(|v| json!({
                "strategy": v.instance.strategy,
                "exact_value": rational(&v.value),
                "exceeds_dp": v.value > dp.value,
            })).collect::<Vec<_>>(),
            "dp_optimal": rational(&dp.value),
            "dp_decisions": table.entries.len(),
            "greedy_equals_dp": greedy.map(|g| g.value == dp.value),
            "exhaustive": exhaustive.as_ref().map(|e| json!({
                "best": rational(&e.best),
                "policies": e.tried,
                "equals_dp": e.best == dp.value,
            })),
        }))?,
        Format::Csv => {
            let mut rows: Vec<Vec<String>> = values
                .iter()
                .map(|v| {
                    vec![
                        v.instance.strategy.clone(),
                        rational(&v.value),
                        (v.value > dp.value).to_string(),
                    ]
                })
                .collect();
            rows.push(vec![
                "dp_optimal".into(),
                rational(&dp.value),
                "false".into(),
            ]);
            if let Some(e) = &exhaustive {
                rows.push(vec![
                    "exhaustive_search".into(),
                    rational(&e.best),
                    (e.best > dp.value).to_string(),
                ]);
            }
            csv_bytes(&["strategy", "exact_value", "exceeds_dp"], rows)?
        }
    };
    ctx.emit(&bytes)?;
    if let Some(path) = dp_table {
        let rows = table.entries.iter().map(|d| {
            vec![
                d.stage.to_string(),
                d.history.clone(),
                d.chosen
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join(" "),
            ]
        });
        emit(
            Some(path),
            &csv_bytes(&["stage", "history", "chosen"], rows)?,
        )?;
    }
    if !exceeding.is_empty() {
        return Err(CliError::Verification(format!(
            "strategies exceed the dynamic-programming optimum: {}",
            exceeding.join(", ")
        )));
    }
    if search_mismatch {
        return Err(CliError::Verification(
            "exhaustive search disagrees with the dynamic-programming optimum".into(),
        ));
    }
    Ok(())
}

fn lemma(cli: &Cli, k: usize, trials: u64, seed: u64) -> CliResult<()> {
    if trials == 0 {
        return Err(CliError::Config("--trials must be at least 1".into()));
    }
    let sweep = lemma_sweep(k, trials, seed)?;
    let bytes = match cli.format.unwrap_or(Format::Csv) {
        Format::Json => json_bytes(&sweep)?,
        Format::Csv => {
            let mut text = format!(
                "k={k} trials={trials} seed={seed} counterexamples={}\n",
                sweep.counterexamples.len()
            );
            for c in &sweep.counterexamples {
                text += &serde_json::to_string(c)?;
                text.push('\n');
            }
            text.into_bytes()
        }
    };
    emit(cli.out.as_deref(), &bytes)?;
    if sweep.counterexamples.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "{} counterexamples",
            sweep.counterexamples.len()
        )))
    }
}

const COMPARE_HEADER: [&str; 8] = [
    "strategy",
    "reps",
    "mean",
    "stderr",
    "ci_lo",
    "ci_hi",
    "paired_diff_vs_greedy",
    "paired_stderr",
];

fn comparison_csv(c: &Comparison) -> CliResult<Vec<u8>> {
    csv_bytes(
        &COMPARE_HEADER,
        c.rows.iter().map(|r| {
            vec![
                r.strategy.clone(),
                r.replications.to_string(),
                real(r.mean),
                real(r.stderr),
                real(r.ci95.0),
                real(r.ci95.1),
                real(r.paired_diff_vs_greedy),
                real(r.paired_stderr),
            ]
        }),
    )
}

fn coupled_csv(rows: &[CoupledRow]) -> CliResult<Vec<u8>> {
    csv_bytes(
        &[
            "strategy",
            "realizations",
            "dominance_violations",
            "permutation_violations",
            "max_inversion_error",
            "mean_gap",
        ],
        rows.iter().map(|r| {
            vec![
                r.strategy.clone(),
                r.realizations.to_string(),
                r.dominance_violations.to_string(),
                r.permutation_violations.to_string(),
                real(r.max_inversion_error),
                real(r.mean_gap),
            ]
        }),
    )
}

/// Gaussian(0, 1) increments, N = 16, times (2, 4, 8), sizes (8, 4, 1).
pub fn default_compare_config() -> RunConfig {
    RunConfig::new(
        ModelSpec::Gaussian {
            mean: 0.0,
            stddev: 1.0,
        },
        ScheduleSpec {
            times: vec![2, 4, 8],
            sizes: vec![8, 4, 1],
            n: 16,
            horizon: 8,
        },
    )
}

fn compare(cli: &Cli, run: &Run, coupled: bool) -> CliResult<()> {
    let ctx = Ctx::new(cli, run, Some(default_compare_config()), Format::Csv)?;
    let Instance { model, schedule } = &ctx.instance;
    let reps = ctx.reps.unwrap_or(DEFAULT_COMPARE_REPS);
    if coupled {
        let rows = coupled_dominance_sweep(model, schedule, &ctx.strategies, reps, ctx.seed)?;
        let bytes = match ctx.format {
            Format::Csv => coupled_csv(&rows)?,
            Format::Json => json_bytes(&rows)?,
        };
        ctx.emit(&bytes)?;
        if rows.iter().all(|r| r.ok(ROW_TOLERANCE)) {
            return Ok(());
        }
        return Err(CliError::Verification(
            "coupled sweep reported violations".into(),
        ));
    }
    let c = compare_strategies(model, schedule, &ctx.strategies, reps, ctx.seed)?;
    let bytes = match ctx.format {
        Format::Csv => comparison_csv(&c)?,
        Format::Json => json_bytes(&c)?,
    };
    ctx.emit(&bytes)
}

fn law_spec(law: &DiscreteLaw) -> (Vec<f64>, Vec<String>) {
    (
        law.support().to_vec(),
        law.probs().iter().map(rational).collect(),
    )
}

fn model_spec(m: &staged_select::IncrementModel) -> ModelSpec {
    use staged_select::IncrementModel as M;
    match m {
        M::Discrete(law) => {
            let (support, probs) = law_spec(law);
            ModelSpec::Discrete { support, probs }
        }
        M::Gaussian { mean, stddev } => ModelSpec::Gaussian {
            mean: *mean,
            stddev: *stddev,
        },
        M::Uniform { lo, hi } => ModelSpec::Uniform { lo: *lo, hi: *hi },
        M::Rademacher { scale } => ModelSpec::Rademacher { scale: *scale },
    }
}

/// Drift `{+1, -1}` over rare jumps `{-6, 0, +6}`, N = 8, times (3, 10), sizes (2, 1).
pub fn default_drift_config() -> RunConfig {
    let d = DriftModel::default_experiment();
    let (drift_support, drift_probs) = law_spec(&d.drift);
    RunConfig::new(
        ModelSpec::Drift {
            base: Box::new(model_spec(&d.base)),
            drift_support,
            drift_probs,
        },
        ScheduleSpec::from(&default_drift_schedule()),
    )
}

fn drift(cli: &Cli, run: &Run, zero_drift: bool) -> CliResult<()> {
    let ctx = Ctx::new(cli, run, Some(default_drift_config()), Format::Csv)?;
    let Instance { model, schedule } = &ctx.instance;
    let ProcessModel::Drift(d) = model else {
        return Err(CliError::Config(
            "the drift experiment needs a model of kind `drift`".into(),
        ));
    };
    let d = if zero_drift {
        DriftModel::new(d.base.clone(), DiscreteLaw::degenerate(0.0)?)?
    } else {
        d.clone()
    };
    let reps = ctx.reps.unwrap_or(DEFAULT_DRIFT_REPS);
    let report = dependent_model_experiment(&d, schedule, reps, ctx.seed)?;
    let bytes = match ctx.format {
        Format::Csv => comparison_csv(&report.comparison)?,
        Format::Json => json_bytes(&report)?,
    };
    ctx.emit(&bytes)
}
