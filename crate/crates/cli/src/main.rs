//! Command-line front end for confidence-scoring experiments.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use confprobe::data::synthetic::{generate, SyntheticSpec};
use confprobe::data::write_csv;
use confprobe::pipeline::{
    parse_methods, prepare_data, run_experiment, stage_train_base, stage_train_meta,
    stage_train_probes, write_evaluation, write_importance, write_quadrants, ExperimentConfig,
    RunDir, Trained,
};
use confprobe::{Error, Result};

#[derive(Parser)]
#[command(name = "confprobe", version, about = "Probe-based confidence scoring for classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write all reports.
    Run(RunArgs),
    /// Train the base classifier on train-base.
    TrainBase(RunArgs),
    /// Train one linear probe per layer of the saved base model.
    TrainProbes(RunArgs),
    /// Train the configured meta-models.
    TrainMeta(RunArgs),
    /// Write ROC, PR, sweep and probe accuracy reports plus summary.json.
    Evaluate(RunArgs),
    /// Write feature importance of the GBM meta-models.
    Importance(RunArgs),
    /// Write per-sample confusion quadrants.
    Quadrants(RunArgs),
    /// Write a synthetic train/test/out-of-domain CSV corpus.
    GenerateData(GenerateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated methods; overrides the config's method list.
    #[arg(long)]
    methods: Option<String>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Directory for train.csv, test.csv and ood.csv.
    #[arg(long)]
    out: PathBuf,
    /// Generator parameters (TOML); defaults when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Generator seed; overrides `seed` from `--spec`.
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn load(&self) -> Result<(ExperimentConfig, RunDir)> {
        let mut cfg = ExperimentConfig::from_file(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(list) = &self.methods {
            cfg.meta.methods = parse_methods(list)?;
            cfg.validate()?;
        }
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok((cfg, RunDir::new(out)))
    }
}

fn generate_data(args: &GenerateArgs) -> Result<()> {
    let mut spec: SyntheticSpec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            toml::from_str(&text).map_err(|e| Error::Config {
                field: "spec".into(),
                message: e.message().to_string(),
            })?
        }
        None => SyntheticSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let data = generate(&spec)?;
    fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    write_csv(&data.train, &args.out.join("train.csv"))?;
    write_csv(&data.test, &args.out.join("test.csv"))?;
    write_csv(&data.ood, &args.out.join("ood.csv"))?;
    println!(
        "wrote {} train, {} test, {} out-of-domain samples to {}",
        data.train.len(),
        data.test.len(),
        data.ood.len(),
        args.out.display()
    );
    Ok(())
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn execute(command: &Command) -> Result<()> {
    if let Command::GenerateData(args) = command {
        return generate_data(args);
    }
    let args = match command {
        Command::Run(a)
        | Command::TrainBase(a)
        | Command::TrainProbes(a)
        | Command::TrainMeta(a)
        | Command::Evaluate(a)
        | Command::Importance(a)
        | Command::Quadrants(a) => a,
        Command::GenerateData(_) => unreachable!(),
    };
    let (cfg, dir) = args.load()?;
    let data = prepare_data(&cfg)?;
    match command {
        Command::Run(_) => {
            let summary = run_experiment(&cfg, &dir)?;
            for m in &summary.methods {
                match m.pooled_auc {
                    Some(p) => println!("{:<14} auc {:.4}  pooled {:.4}", m.method, m.in_domain_auc, p),
                    None => println!("{:<14} auc {:.4}", m.method, m.in_domain_auc),
                }
            }
        }
        Command::TrainBase(_) => {
            let base = stage_train_base(&cfg, &data, &dir)?;
            println!("base test accuracy {:.4}", base.accuracy(&data.test)?);
        }
        Command::TrainProbes(_) => {
            let base = dir.load_base()?;
            let probes = stage_train_probes(&cfg, &data, &base, &dir)?;
            for (i, acc) in probes.accuracy_report(&base, &data.test)?.iter().enumerate() {
                println!("probe {} test accuracy {acc:.4}", i + 1);
            }
        }
        Command::TrainMeta(_) => {
            let base = dir.load_base()?;
            let probes = dir.load_probes(&base)?;
            for (m, _) in stage_train_meta(&cfg, &data, &base, &probes, &dir)? {
                println!("trained {m}");
            }
        }
        Command::Evaluate(_) => {
            let summary = write_evaluation(&cfg, &data, &Trained::load(&cfg, &dir)?, &dir)?;
            for m in &summary.methods {
                println!("{:<14} auc {:.4}", m.method, m.in_domain_auc);
            }
        }
        Command::Importance(_) => {
            for s in write_importance(&Trained::load(&cfg, &dir)?, &dir)? {
                if let Some(share) = s.non_final_share {
                    println!("{:<14} non-final layer share {share:.4}", s.method);
                }
            }
        }
        Command::Quadrants(_) => write_quadrants(&cfg, &data, &Trained::load(&cfg, &dir)?, &dir)?,
        Command::GenerateData(_) => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
