//! Experiment runner CLI.
//!
//! Subcommands mirror the experiment pipeline: `train`, `poison`, `attack`,
//! `evaluate`, `diff-bits`, `defend`, `sweep`, `report`. All of them read
//! the same flat TOML config (`--config`); `--seed` overrides the config
//! seed and `--out` picks the artifact directory.
//!
//! Exit codes: 0 success, 1 config error, 2 runtime error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use trojanlab::bitflip::count_flipped_bits;
use trojanlab::error::Error;
use trojanlab::experiment::{
    prepare, run_defense, run_experiment, sweep, ExperimentConfig, Prepared, SweepParam,
};
use trojanlab::metrics::evaluate;
use trojanlab::report::{
    render_csv, render_markdown, render_sweep_csv, reports_from_json, reports_to_json,
    AttackReport,
};
use trojanlab::weights::{read_weights_file, write_weights_file};

#[derive(Parser)]
#[command(name = "trojanlab", version, about = "Textual trojan insertion lab")]
struct Cli {
    /// Experiment config file (flat TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the benign model; writes benign.tjtx and vocab.json.
    Train,
    /// Build the poisoned dataset; writes poison/clean.jsonl and
    /// poison/triggered.jsonl.
    Poison,
    /// Run the configured attack variants end to end and write reports.
    Attack,
    /// Evaluate a weight file on the held-out split.
    Evaluate {
        /// Weight file; defaults to <out>/benign.tjtx.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Count changed parameters and flipped bits between two weight files.
    DiffBits {
        #[arg(long)]
        benign: PathBuf,
        #[arg(long)]
        trojan: PathBuf,
    },
    /// Attack the plain and the factorized classifier, reporting both.
    Defend,
    /// Sweep a parameter (e, bits, or samples) over a value list.
    Sweep {
        #[arg(long)]
        param: String,
        /// Comma-separated values, e.g. --values 0,0.005,0.01,0.05
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Variant to sweep; defaults to the first configured one.
        #[arg(long)]
        variant: Option<String>,
    },
    /// Re-render report.csv and report.md from report.json.
    Report,
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn error(&self) -> &Error {
        match self {
            Failure::Config(e) | Failure::Runtime(e) => e,
        }
    }
}

fn runtime(e: Error) -> Failure {
    // Invalid values surfacing from any stage are still config mistakes.
    fn is_config(e: &Error) -> bool {
        match e {
            Error::InvalidConfig(_) => true,
            Error::Stage { source, .. } => is_config(source),
            _ => false,
        }
    }
    if is_config(&e) {
        Failure::Config(e)
    } else {
        Failure::Runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.error());
            ExitCode::from(failure.code())
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path).map_err(Failure::Config)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.attack.seed = seed;
    }
    cfg.validate().map_err(Failure::Config)?;
    Ok(cfg)
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::Runtime(e.into()))
}

fn write_reports(out: &Path, reports: &[AttackReport]) -> Result<(), Failure> {
    write(&out.join("report.csv"), &render_csv(reports))?;
    write(&out.join("report.md"), &render_markdown(reports))?;
    write(&out.join("report.json"), &reports_to_json(reports))?;
    Ok(())
}

fn save_model_files(out: &Path, prep: &Prepared) -> Result<(), Failure> {
    write_weights_file(&prep.benign, out.join("benign.tjtx")).map_err(Failure::Runtime)?;
    write(&out.join("vocab.json"), &prep.vocab.to_json())?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(&cli)?;
    let out = cli.out.clone();
    std::fs::create_dir_all(&out).map_err(|e| Failure::Runtime(e.into()))?;

    match &cli.command {
        Command::Train => {
            let prep = prepare(&cfg).map_err(runtime)?;
            save_model_files(&out, &prep)?;
            println!(
                "benign model: ACC {:.2}%  trigger hit rate {:.2}%",
                prep.acc * 100.0,
                prep.asr_benign * 100.0
            );
            println!("wrote {}", out.join("benign.tjtx").display());
        }
        Command::Poison => {
            let prep = prepare(&cfg).map_err(runtime)?;
            let dir = out.join("poison");
            std::fs::create_dir_all(&dir).map_err(|e| Failure::Runtime(e.into()))?;
            let mut clean = String::new();
            for s in &prep.poisoned.clean {
                clean.push_str(&serde_json::to_string(s).expect("sample serializes"));
                clean.push('\n');
            }
            let mut triggered = String::new();
            for t in &prep.poisoned.triggered {
                triggered.push_str(&serde_json::to_string(t).expect("sample serializes"));
                triggered.push('\n');
            }
            write(&dir.join("clean.jsonl"), &clean)?;
            write(&dir.join("triggered.jsonl"), &triggered)?;
            println!(
                "poisoned dataset: {} clean + {} triggered -> {}",
                prep.poisoned.clean.len(),
                prep.poisoned.triggered.len(),
                dir.display()
            );
        }
        Command::Attack => {
            let run = run_experiment(&cfg).map_err(runtime)?;
            save_model_files(&out, &run.prepared)?;
            write(&out.join("config.toml"), &cfg.to_toml())?;
            for vr in &run.runs {
                let name = &vr.report.variant;
                write_weights_file(&vr.trojan, out.join(format!("trojan_{name}.tjtx")))
                    .map_err(Failure::Runtime)?;
                write(&out.join(format!("diff_{name}.csv")), &vr.diff.to_csv())?;
                write(&out.join(format!("diff_{name}.json")), &vr.diff.summary_json())?;
            }
            let reports = run.reports();
            write_reports(&out, &reports)?;
            print!("{}", render_markdown(&reports));
            println!("artifacts in {}", out.display());
        }
        Command::Evaluate { weights } => {
            let prep = prepare(&cfg).map_err(runtime)?;
            let path = weights.clone().unwrap_or_else(|| out.join("benign.tjtx"));
            let params = read_weights_file(&path).map_err(Failure::Runtime)?;
            let (acc, asr) = evaluate(
                &params,
                &prep.eval_clean,
                &prep.eval_triggered,
                cfg.attack.target_class,
                &prep.vocab,
            )
            .map_err(runtime)?;
            println!(
                "{}: accuracy {:.2}%  ASR {:.2}%",
                path.display(),
                acc * 100.0,
                asr * 100.0
            );
        }
        Command::DiffBits { benign, trojan } => {
            let a = read_weights_file(benign).map_err(Failure::Runtime)?;
            let b = read_weights_file(trojan).map_err(Failure::Runtime)?;
            let diff = count_flipped_bits(&a, &b, cfg.quant_scheme).map_err(runtime)?;
            write(&out.join("diff.csv"), &diff.to_csv())?;
            write(&out.join("diff.json"), &diff.summary_json())?;
            println!(
                "TPN {}  TBN {}  ({} encoding)",
                diff.tpn, diff.tbn, diff.scheme
            );
        }
        Command::Defend => {
            let run = run_defense(&cfg).map_err(runtime)?;
            write(&out.join("defense.csv"), &render_csv(&run.reports))?;
            write(&out.join("defense.md"), &render_markdown(&run.reports))?;
            write(&out.join("defense.json"), &reports_to_json(&run.reports))?;
            print!("{}", render_markdown(&run.reports));
            println!("artifacts in {}", out.display());
        }
        Command::Sweep {
            param,
            values,
            variant,
        } => {
            let param: SweepParam = param.parse().map_err(Failure::Config)?;
            let mut cfg = cfg;
            if let Some(name) = variant {
                cfg.variants = vec![name.parse().map_err(Failure::Config)?];
            }
            let swept = sweep(param, values, &cfg).map_err(runtime)?;
            let csv = render_sweep_csv(param.name(), &swept.values, &swept.reports);
            write(&out.join(format!("sweep_{}.csv", param.name())), &csv)?;
            write(
                &out.join(format!("sweep_{}.json", param.name())),
                &reports_to_json(&swept.reports),
            )?;
            print!("{csv}");
        }
        Command::Report => {
            let text = std::fs::read_to_string(out.join("report.json"))
                .map_err(|e| Failure::Runtime(e.into()))?;
            let reports = reports_from_json(&text).map_err(Failure::Runtime)?;
            write_reports(&out, &reports)?;
            print!("{}", render_markdown(&reports));
        }
    }
    Ok(())
}
