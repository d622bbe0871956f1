use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use casekg::config::{ConfigError, RunConfig};
use casekg::formats::{load_lexicon, AnnotationError};
use casekg::gateway::audit::{read_audit_log, render_script, script_from_audit};
use casekg::pipeline::{failure_table, Pipeline, RunOutcome, SetupError, Stage};
use casekg::report::{compare_runs, evaluate_run, render_structure, render_table, EvalOptions, ReportError};
use casekg::templates::export_builtin_templates;
use casekg_core::eval::Averaging;
use casekg_core::Mode;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "casekg", version, about = "Build and evaluate knowledge graphs from case documents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract opinion sections and write token chunks
    Ingest(RunArgs),
    /// Run type-wise coreference resolution (full mode only)
    Coref(RunArgs),
    /// Run chunk-level entity and relationship extraction
    Extract(RunArgs),
    /// Filter, merge and export graphs
    Build(RunArgs),
    /// Run every stage, reusing finished cases unless --force
    Run {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        force: bool,
    },
    /// Score the graphs of one run
    Eval {
        /// Run output directory
        run_dir: PathBuf,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Compare a baseline run against a full-pipeline run
    Compare {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        corekg: PathBuf,
        /// Directory for comparison.json / .csv
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Turn an audit log into a digest-keyed replay script
    RecordScript {
        #[arg(long)]
        audit: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the built-in coreference templates to a directory for editing
    Templates { dir: PathBuf },
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    /// Replay completions from a script instead of calling an endpoint
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    chunk_size: Option<usize>,
    #[arg(long)]
    overlap: Option<usize>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    template_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AveragingArg {
    Macro,
    Micro,
}

#[derive(Args, Clone)]
struct EvalArgs {
    /// Takes eval defaults (threshold, annotation files) from a run config
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<u8>,
    #[arg(long)]
    overrides: Option<PathBuf>,
    #[arg(long)]
    noise: Option<PathBuf>,
    /// Government lexicon additions used when no noise file is given
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long, value_enum)]
    averaging: Option<AveragingArg>,
    #[arg(long)]
    strict: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_setup_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn is_setup_error(e: &anyhow::Error) -> bool {
    e.chain()
        .any(|c| c.is::<SetupError>() || c.is::<ConfigError>() || c.is::<AnnotationError>() || c.is::<ReportError>())
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Ingest(a) => stage(a, Stage::Ingest),
        Command::Coref(a) => stage(a, Stage::Coref),
        Command::Extract(a) => stage(a, Stage::Extract),
        Command::Build(a) => stage(a, Stage::Build),
        Command::Run { run, force } => {
            let p = Pipeline::new(run_config(&run)?)?;
            report_outcome(p.run(force)?)
        }
        Command::Eval { run_dir, eval } => {
            let m = evaluate_run(&run_dir, &eval_options(&eval)?)?;
            println!("{}", serde_json::to_string_pretty(&m.aggregate)?);
            if !m.excluded_failed_cases.is_empty() {
                println!("excluded failed cases: {}", m.excluded_failed_cases.join(", "));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { baseline, corekg, out, eval } => {
            let doc = compare_runs(&baseline, &corekg, &eval_options(&eval)?, &out)?;
            print!("{}", render_table(&doc.table));
            if !doc.structure.is_empty() {
                print!("\n{}", render_structure(&doc.structure));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::RecordScript { audit, out } => {
            let recorded = script_from_audit(&read_audit_log(&audit)?);
            std::fs::write(&out, render_script(&recorded.lines))
                .with_context(|| format!("writing {}", out.display()))?;
            println!("{} entries written to {}", recorded.lines.len(), out.display());
            if recorded.failed_calls_skipped > 0 {
                println!("{} failed calls skipped", recorded.failed_calls_skipped);
            }
            for d in &recorded.conflicting_digests {
                log::warn!("digest {d} had differing responses; kept the first");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Templates { dir } => {
            for p in export_builtin_templates(&dir)? {
                println!("{}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn stage(args: RunArgs, stage: Stage) -> anyhow::Result<ExitCode> {
    let p = Pipeline::new(run_config(&args)?)?;
    report_outcome(p.run_stage(stage)?)
}

fn report_outcome(outcome: RunOutcome) -> anyhow::Result<ExitCode> {
    println!("{} completion calls", outcome.log.llm_calls);
    if outcome.all_succeeded() {
        return Ok(ExitCode::SUCCESS);
    }
    eprint!("{}", failure_table(&outcome.failures));
    Ok(ExitCode::FAILURE)
}

fn run_config(a: &RunArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => {
            let (Some(corpus), Some(out)) = (&a.corpus, &a.out) else {
                return Err(ConfigError::Invalid("pass --config, or both --corpus and --out".into()).into());
            };
            RunConfig::new(corpus, out, a.mode.unwrap_or(Mode::Corekg))
        }
    };
    cfg.apply_env(|k| std::env::var(k).ok());
    let cwd = Path::new(".");
    if let Some(v) = &a.corpus {
        cfg.corpus_dir = cwd.join(v);
    }
    if let Some(v) = &a.out {
        cfg.output_dir = cwd.join(v);
    }
    if let Some(v) = a.mode {
        cfg.mode = v;
    }
    if let Some(v) = &a.script {
        cfg.gateway.script = Some(v.clone());
    }
    if let Some(v) = &a.base_url {
        cfg.gateway.base_url = v.clone();
    }
    if let Some(v) = &a.model {
        cfg.gateway.model = v.clone();
    }
    if let Some(v) = a.parallelism {
        cfg.parallelism = v;
    }
    if let Some(v) = a.chunk_size {
        cfg.chunking.chunk_size = v;
    }
    if let Some(v) = a.overlap {
        cfg.chunking.overlap = v;
    }
    if let Some(v) = &a.lexicon {
        cfg.extraction.lexicon = Some(v.clone());
    }
    if let Some(v) = &a.template_dir {
        cfg.coref.template_dir = Some(v.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn eval_options(a: &EvalArgs) -> anyhow::Result<EvalOptions> {
    let base = a.config.as_deref().map(RunConfig::load).transpose()?;
    let ev = base.as_ref().map(|c| c.eval.clone()).unwrap_or_default();
    let lexicon_path = a.lexicon.clone().or_else(|| base.as_ref().and_then(|c| c.extraction.lexicon.clone()));
    let averaging = match a.averaging {
        Some(AveragingArg::Macro) => Averaging::Macro,
        Some(AveragingArg::Micro) => Averaging::Micro,
        None => ev.averaging,
    };
    Ok(EvalOptions::load(
        a.threshold.unwrap_or(ev.threshold),
        a.overrides.as_deref().or(ev.overrides.as_deref()),
        a.noise.as_deref().or(ev.noise.as_deref()),
        load_lexicon(lexicon_path.as_deref())?,
        averaging,
        a.strict || ev.strict,
    )?)
}
