//! `dft`: reduce, analyse and cross-check dynamic fault trees.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use dft_core::algebra::{free_variables, EventTerm, SideCondition};
use dft_core::bench::{ComparisonReport, BENCHMARK_NAMES};
use dft_core::galileo::{to_structure_function, DftModel, StructureError, StructureFunction};
use dft_core::markov::{
    build_ctmc, mean_time_to_failure, parse_state_budget, transient_failure_probability, STATE_BUDGET_VAR,
};
use dft_core::qualitative::{extract_cut_sequences, minimize};
use dft_core::rewrite::{apply_reduction, decide_equivalence, rule_catalog, verify_rules, Mode, Verdict, CERTIFICATE_SEED};
use dft_core::simulate::simulate_model;

#[derive(Parser)]
#[command(name = "dft", version, about = "Dynamic fault tree reduction and analysis")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Leave wall-clock timings out of the output so it is byte-stable.
    #[arg(long, global = true)]
    no_timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    /// The reduced term as one line of text.
    Sop,
    /// Original, reduced term, conditions and certificate as JSON.
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a model and print its statistics.
    Parse { file: PathBuf },
    /// Normalize the structure function and certify the result.
    Reduce {
        file: PathBuf,
        #[arg(long, value_enum)]
        emit: Option<Emit>,
    },
    /// Minimized cut sequences of the reduced structure function.
    Cutseq { file: PathBuf },
    /// Probability that the top event has occurred by `--time`.
    Prob {
        file: PathBuf,
        #[arg(long)]
        time: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Analyse the certified reduced structure function.
        #[arg(long)]
        reduced: bool,
    },
    /// Mean time to failure.
    Mttf {
        file: PathBuf,
        #[arg(long)]
        reduced: bool,
    },
    /// Monte Carlo estimate of the failure probability by `--time`.
    Mc {
        file: PathBuf,
        #[arg(long)]
        time: f64,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Check every catalog rule exhaustively.
    VerifyRules {
        #[arg(long, default_value_t = 4)]
        max_vars: usize,
    },
    /// Decide whether two terms (or model files) have the same failure time.
    Equiv {
        a: String,
        b: String,
        /// Sample this many valuations instead of choosing automatically.
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long, default_value_t = CERTIFICATE_SEED)]
        seed: u64,
    },
    /// Before/after-reduction comparison on the built-in benchmarks.
    Bench {
        /// One benchmark; all of them when omitted.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        time: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

/// Why a command failed, and the exit code that goes with it.
enum Failure {
    /// Bad flags, unreadable input or malformed files.
    Usage(String),
    /// The input was understood but the analysis says no.
    Analysis(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Analysis(_) => 1,
        }
    }
}

fn usage(e: impl Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn analysis(e: impl Display) -> Failure {
    Failure::Analysis(e.to_string())
}

type Outcome = Result<(), Failure>;

struct Ctx<'w> {
    format: Format,
    timings: bool,
    /// Value of `DFT_STATE_BUDGET`, if set.
    budget_var: Option<String>,
    out: &'w mut dyn Write,
}

impl Ctx<'_> {
    fn emit(&mut self, table: impl Display, json: Value) -> Outcome {
        match self.format {
            Format::Table => self.line(table),
            Format::Json => self.line(serde_json::to_string_pretty(&json).expect("JSON values serialize")),
        }
    }

    fn line(&mut self, text: impl Display) -> Outcome {
        writeln!(self.out, "{text}").map_err(|e| usage(format!("cannot write output: {e}")))
    }

    fn wall(&self, clock: Instant) -> Value {
        if self.timings {
            json!(clock.elapsed().as_secs_f64())
        } else {
            Value::Null
        }
    }
}

fn main() -> ExitCode {
    let budget_var = std::env::var(STATE_BUDGET_VAR).ok();
    ExitCode::from(run_cli(
        std::env::args_os(),
        budget_var,
        &mut std::io::stdout(),
        &mut std::io::stderr(),
    ))
}

/// Runs one invocation, writing results to `out` and diagnostics to `err`.
/// Returns the exit code.
fn run_cli(
    args: impl IntoIterator<Item = impl Into<OsString> + Clone>,
    budget_var: Option<String>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful output.
            if e.exit_code() == 0 {
                let _ = write!(out, "{}", e.render());
                return 0;
            }
            let _ = write!(err, "{}", e.render());
            return 2;
        }
    };
    let mut ctx = Ctx {
        format: cli.format,
        timings: !cli.no_timings,
        budget_var,
        out,
    };
    match run(&mut ctx, cli.command) {
        Ok(()) => 0,
        Err(f) => {
            let (Failure::Usage(msg) | Failure::Analysis(msg)) = &f;
            let _ = writeln!(err, "dft: {msg}");
            f.code()
        }
    }
}

fn run(ctx: &mut Ctx, command: Command) -> Outcome {
    match command {
        Command::Parse { file } => cmd_parse(ctx, &file),
        Command::Reduce { file, emit } => cmd_reduce(ctx, &file, emit),
        Command::Cutseq { file } => cmd_cutseq(ctx, &file),
        Command::Prob {
            file,
            time,
            tol,
            reduced,
        } => {
            check_time(time)?;
            if !(tol > 0.0) {
                return Err(usage(format!("--tol must be > 0, got {tol}")));
            }
            cmd_prob(ctx, &file, time, tol, reduced)
        }
        Command::Mttf { file, reduced } => cmd_mttf(ctx, &file, reduced),
        Command::Mc {
            file,
            time,
            trials,
            seed,
        } => {
            check_time(time)?;
            if trials == 0 {
                return Err(usage("--trials must be at least 1"));
            }
            cmd_mc(ctx, &file, time, trials, seed)
        }
        Command::VerifyRules { max_vars } => cmd_verify_rules(ctx, max_vars),
        Command::Equiv { a, b, samples, seed } => {
            if samples == Some(0) {
                return Err(usage("--samples must be at least 1"));
            }
            cmd_equiv(ctx, &a, &b, samples, seed)
        }
        Command::Bench { model, time, tol } => {
            check_time(time)?;
            if !(tol > 0.0) {
                return Err(usage(format!("--tol must be > 0, got {tol}")));
            }
            cmd_bench(ctx, model.as_deref(), time, tol)
        }
    }
}

fn check_time(t: f64) -> Outcome {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("--time must be finite and >= 0, got {t}")))
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<DftModel, Failure> {
    DftModel::parse(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn structure(model: &DftModel) -> Result<StructureFunction, Failure> {
    to_structure_function(model).map_err(|e| match e {
        StructureError::Invalid(vs) => analysis(
            vs.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("\ndft: "),
        ),
        other => analysis(other),
    })
}

impl Ctx<'_> {
    fn budget(&self) -> Result<usize, Failure> {
        parse_state_budget(self.budget_var.as_deref()).map_err(usage)
    }
}

fn cmd_parse(ctx: &mut Ctx, path: &Path) -> Outcome {
    let model = load_model(path)?;
    if let Err(vs) = model.validate() {
        let list: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
        return Err(analysis(format!(
            "{} violation(s) in {}\ndft: {}",
            vs.len(),
            path.display(),
            list.join("\ndft: ")
        )));
    }
    let mut kinds: BTreeMap<String, usize> = BTreeMap::new();
    for (_, g) in model.gates() {
        *kinds.entry(g.kind.to_string()).or_default() += 1;
    }
    let events = model.basic_events().count();
    let gates = model.gates().count();
    let table = format!(
        "toplevel     {}\nbasic events {events}\ngates        {gates}{}",
        model.toplevel,
        kinds.iter().map(|(k, n)| format!("\n  {k:<10} {n}")).collect::<String>()
    );
    ctx.emit(
        table,
        json!({
            "file": path.display().to_string(),
            "toplevel": model.toplevel,
            "basic_events": events,
            "gates": gates,
            "gate_kinds": kinds,
        }),
    )
}

/// Structure function of the model and its certified reduction.
fn reduce(path: &Path) -> Result<(StructureFunction, dft_core::rewrite::Reduction), Failure> {
    let sf = structure(&load_model(path)?)?;
    let reduction = apply_reduction(&sf.term, &sf.conditions).map_err(analysis)?;
    Ok((sf, reduction))
}

fn certificate_text(v: &Verdict) -> String {
    match v {
        Verdict::Equivalent { patterns } => format!("equivalent (exact, {patterns} comparison patterns)"),
        Verdict::SampledEquivalent { trials, accepted, seed } => {
            format!("equivalent (sampled, {accepted} of {trials} valuations admitted, seed {seed})")
        }
        Verdict::NotEquivalent { witness, left, right } => {
            format!("NOT equivalent: {left} vs {right} at {witness:?}")
        }
    }
}

fn conditions_json(conds: &[SideCondition]) -> Value {
    json!(conds.iter().map(|c| c.to_string()).collect::<Vec<_>>())
}

fn cmd_reduce(ctx: &mut Ctx, path: &Path, emit: Option<Emit>) -> Outcome {
    let (sf, reduction) = reduce(path)?;
    let value = json!({
        "original": sf.term.to_string(),
        "reduced": reduction.reduced.to_sop_string(),
        "variables_before": free_variables(&sf.term).len(),
        "variables_after": free_variables(&reduction.reduced).len(),
        "conditions": conditions_json(&sf.conditions),
        "certificate": reduction.certificate,
    });
    match emit {
        Some(Emit::Sop) => ctx.line(reduction.reduced.to_sop_string()),
        Some(Emit::Json) => ctx.line(serde_json::to_string_pretty(&value).expect("serializable")),
        None => ctx.emit(
            format!(
                "original     {}\nreduced      {}\ncertificate  {}",
                sf.term,
                reduction.reduced.to_sop_string(),
                certificate_text(&reduction.certificate)
            ),
            value,
        ),
    }
}

fn cmd_cutseq(ctx: &mut Ctx, path: &Path) -> Outcome {
    let (_, reduction) = reduce(path)?;
    let summary = minimize(&extract_cut_sequences(&reduction.reduced).map_err(analysis)?);
    ctx.emit(
        format!(
            "{} cut sequence(s)\n{}certificate  {}",
            summary.sequences.len(),
            summary,
            certificate_text(&reduction.certificate)
        ),
        json!({ "cut_summary": summary, "certificate": reduction.certificate }),
    )
}

/// The structure function to analyse, reduced on request.
fn analysed(path: &Path, reduced: bool) -> Result<StructureFunction, Failure> {
    if reduced {
        let (sf, reduction) = reduce(path)?;
        Ok(sf.with_term(reduction.reduced))
    } else {
        structure(&load_model(path)?)
    }
}

fn cmd_prob(ctx: &mut Ctx, path: &Path, t: f64, tol: f64, reduced: bool) -> Outcome {
    let budget = ctx.budget()?;
    let sf = analysed(path, reduced)?;
    let clock = Instant::now();
    let ctmc = build_ctmc(&sf, budget).map_err(analysis)?;
    let p = transient_failure_probability(&ctmc, t, tol).map_err(analysis)?;
    let wall = ctx.wall(clock);
    let mut table = format!(
        "probability  {p:.12e}\ntime         {t}\ntolerance    {tol:e}\nstates       {}\ntransitions  {}\nreduced      {reduced}",
        ctmc.state_count(),
        ctmc.transition_count()
    );
    if let Some(w) = wall.as_f64() {
        table.push_str(&format!("\nwall (s)     {w:.3}"));
    }
    ctx.emit(
        table,
        json!({
            "probability": p,
            "time": t,
            "tolerance": tol,
            "states": ctmc.state_count(),
            "transitions": ctmc.transition_count(),
            "reduced": reduced,
            "wall_time": wall,
        }),
    )
}

fn cmd_mttf(ctx: &mut Ctx, path: &Path, reduced: bool) -> Outcome {
    let budget = ctx.budget()?;
    let sf = analysed(path, reduced)?;
    let ctmc = build_ctmc(&sf, budget).map_err(analysis)?;
    let m = mean_time_to_failure(&ctmc).map_err(analysis)?;
    ctx.emit(
        format!("mttf         {m}\nstates       {}\nreduced      {reduced}", ctmc.state_count()),
        json!({ "mttf": m, "states": ctmc.state_count(), "reduced": reduced }),
    )
}

fn cmd_mc(ctx: &mut Ctx, path: &Path, t: f64, trials: u64, seed: u64) -> Outcome {
    let model = load_model(path)?;
    let est = simulate_model(&model, t, trials, seed).map_err(analysis)?;
    ctx.emit(
        format!(
            "p_hat        {:.9e}\nstderr       {:.3e}\nfailures     {}\ntrials       {}\nseed         {}\ntime         {}",
            est.p_hat, est.stderr, est.failures, est.trials, est.seed, est.time
        ),
        json!(est),
    )
}

fn cmd_verify_rules(ctx: &mut Ctx, max_vars: usize) -> Outcome {
    let report = verify_rules(&rule_catalog(), max_vars);
    let mut table = String::new();
    for e in report.entries.iter().filter(|e| !e.passed) {
        table.push_str(&format!("FAILED {}: {} = {}\n", e.provenance, e.lhs, e.rhs));
    }
    table.push_str(&format!("{} rules verified, {} failures", report.rules, report.failures));
    ctx.emit(table, json!(report))?;
    if report.failures > 0 {
        return Err(analysis(format!("{} rule(s) failed verification", report.failures)));
    }
    Ok(())
}

/// A term given inline, or a model file whose structure function and side
/// conditions are used.
fn operand(arg: &str) -> Result<(EventTerm, Vec<SideCondition>), Failure> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = read(path)?;
        if let Ok(model) = DftModel::parse(&text) {
            let sf = structure(&model)?;
            return Ok((sf.term, sf.conditions));
        }
        let term = text.parse().map_err(|e| usage(format!("{arg}: {e}")))?;
        return Ok((term, Vec::new()));
    }
    let term = arg.parse().map_err(|e| usage(format!("`{arg}`: {e}")))?;
    Ok((term, Vec::new()))
}

fn cmd_equiv(ctx: &mut Ctx, a: &str, b: &str, samples: Option<u64>, seed: u64) -> Outcome {
    let (ta, mut conditions) = operand(a)?;
    let (tb, more) = operand(b)?;
    for c in more {
        if !conditions.contains(&c) {
            conditions.push(c);
        }
    }
    let mut vars = free_variables(&ta);
    vars.extend(free_variables(&tb));
    for c in &conditions {
        vars.extend(c.variables());
    }
    let mode = match samples {
        Some(trials) => Mode::Sampled { trials, seed },
        None => Mode::auto(vars.len(), seed),
    };
    let verdict = decide_equivalence(&ta, &tb, &conditions, mode).map_err(analysis)?;
    ctx.emit(
        certificate_text(&verdict),
        json!({ "left": ta.to_string(), "right": tb.to_string(), "mode": mode, "verdict": verdict }),
    )?;
    if let Verdict::NotEquivalent { .. } = verdict {
        return Err(analysis("the terms are not equivalent"));
    }
    Ok(())
}

fn cmd_bench(ctx: &mut Ctx, model: Option<&str>, t: f64, tol: f64) -> Outcome {
    let names: Vec<&str> = match model {
        Some(name) if BENCHMARK_NAMES.contains(&name) => vec![name],
        Some(name) => {
            return Err(usage(format!(
                "unknown benchmark `{name}` (expected one of {})",
                BENCHMARK_NAMES.join(", ")
            )))
        }
        None => BENCHMARK_NAMES.to_vec(),
    };
    let mut report = ComparisonReport::run(&names, t, tol, ctx.budget()?).map_err(analysis)?;
    if !ctx.timings {
        report.clear_timings();
    }
    ctx.emit(&report, json!(report))
}

#[cfg(test)]
mod tests;
