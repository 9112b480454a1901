use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dr_blend::dnn::{self, features_matrix, Mlp, TaskKind};
use dr_blend::experiment::{
    self, emit_report, parse_csv, render_table, ExperimentConfig, FixtureSpec, ReportFormat,
    ReportRow, Task,
};
use dr_blend::feature_store::{
    binarize_labels, read_fvec, split_indices, write_fvec, LabeledFeatureSet, SplitSpec,
};
use dr_blend::fusion::{blend_dataset, blend_pair_dataset, BlendConfig};
use dr_blend::metrics::{confusion_matrix, EvalReport};
use dr_blend::{Error, Result};

#[derive(Parser)]
#[command(
    name = "drblend",
    version,
    about = "Blended deep-feature fusion and MLP evaluation for DR grading"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Experiment config file (key = value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one setting, e.g. `-s train.lr=0.001`. Repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Blend aligned modality files into one FVEC.
    Fuse {
        #[arg(long)]
        fc1: PathBuf,
        #[arg(long)]
        fc2: PathBuf,
        /// Third modality; omit for a two-stage fc1+fc2 blend.
        #[arg(long)]
        third: Option<PathBuf>,
        /// Pool modes per stage, e.g. `max,avg,avg`.
        #[arg(long, default_value = "max,avg,avg")]
        modes: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the MLP on one FVEC and save a checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Validation FVEC; by default a share of `--data` is held out.
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate a checkpoint on an FVEC.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "text")]
        format: ReportFormat,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full pipeline: load, blend, split, fit, evaluate, report.
    Experiment {
        #[command(flatten)]
        overrides: Overrides,
        /// Format printed to stdout.
        #[arg(long, default_value = "text")]
        format: ReportFormat,
    },
    /// Generate synthetic aligned fc1/fc2/third FVEC files.
    Fixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        n_per_class: usize,
        #[arg(long, default_value_t = 5)]
        classes: usize,
        /// fc1,fc2,third dimensions.
        #[arg(long, default_value = "64,64,32")]
        dims: String,
        #[arg(long, default_value_t = 10.0)]
        separation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Tabulate one or more CSV reports.
    Report {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("drblend: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Fuse {
            fc1,
            fc2,
            third,
            modes,
            out,
        } => fuse(&fc1, &fc2, third.as_deref(), &modes, &out),
        Command::Train {
            data,
            val,
            out,
            overrides,
        } => train(&data, val.as_deref(), &out, &overrides),
        Command::Eval {
            model,
            data,
            format,
            out,
        } => eval(&model, &data, format, out.as_deref()),
        Command::Experiment { overrides, format } => {
            let cfg = ExperimentConfig::load(overrides.config.as_deref(), &overrides.set)?;
            let outcome = experiment::run_experiment(&cfg)?;
            experiment::write_outputs(&cfg, &outcome)?;
            print!("{}", experiment::report::render(&outcome.report, format));
            Ok(())
        }
        Command::Fixture {
            out,
            n_per_class,
            classes,
            dims,
            separation,
            seed,
        } => {
            let d: Vec<usize> = dims
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad dims '{dims}'")))
                })
                .collect::<Result<_>>()?;
            let [d1, d2, d3] = d[..] else {
                return Err(Error::Config(format!(
                    "--dims needs three values, got '{dims}'"
                )));
            };
            let spec = FixtureSpec {
                n_per_class,
                n_classes: classes,
                dims: (d1, d2, d3),
                separation,
                seed,
            };
            for p in experiment::write_fixture(&spec, &out)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Report { csv } => {
            let rows = csv
                .iter()
                .map(|p| {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                        path: p.clone(),
                        source: e,
                    })?;
                    let name = p.file_stem().map_or_else(
                        || p.display().to_string(),
                        |s| s.to_string_lossy().into_owned(),
                    );
                    Ok((name, parse_csv(&text)?))
                })
                .collect::<Result<Vec<(String, ReportRow)>>>()?;
            print!("{}", render_table(&rows));
            Ok(())
        }
    }
}

fn fuse(fc1: &Path, fc2: &Path, third: Option<&Path>, modes: &str, out: &Path) -> Result<()> {
    let modes = experiment::config::parse_modes(modes)?;
    let a = read_fvec(fc1)?;
    let b = read_fvec(fc2)?;
    let blended = match (third, &modes[..]) {
        (Some(t), &[s1, s2, s3]) => blend_dataset(
            &a,
            &b,
            &read_fvec(t)?,
            &BlendConfig {
                stage1: s1,
                stage2: s2,
                stage3: s3,
            },
        )?,
        (None, &[s1, s2]) => blend_pair_dataset(
            &a,
            &b,
            &BlendConfig {
                stage1: s1,
                stage2: s2,
                ..BlendConfig::default()
            },
        )?,
        _ => {
            return Err(Error::Config(
                "--modes needs three modes with --third, two without".into(),
            ))
        }
    };
    write_fvec(&blended, out)?;
    eprintln!(
        "{} rows x {} -> {}",
        blended.len(),
        blended.dim(),
        out.display()
    );
    Ok(())
}

fn labels_for(task: Task, set: LabeledFeatureSet) -> Result<LabeledFeatureSet> {
    match (task, set.n_classes()) {
        (Task::Identify, 5) => binarize_labels(&set),
        _ => Ok(set),
    }
}

fn train(data: &Path, val: Option<&Path>, out: &Path, overrides: &Overrides) -> Result<()> {
    let cfg = ExperimentConfig::load(overrides.config.as_deref(), &overrides.set)?;
    let data = labels_for(cfg.task, read_fvec(data)?)?;
    let (fit, val) = match val {
        Some(p) => (data, labels_for(cfg.task, read_fvec(p)?)?),
        None => {
            let idx = split_indices(
                data.labels(),
                &SplitSpec {
                    train_fraction: 1.0 - cfg.validation_fraction,
                    ..cfg.split
                },
            )?;
            (data.select(&idx.train)?, data.select(&idx.test)?)
        }
    };
    let net = Mlp::init(cfg.mlp_config(fit.dim(), fit.n_classes()), cfg.train.seed)?;
    let (net, hist) = dnn::train(net, &fit, &val, &cfg.train)?;
    net.save(out)?;
    eprintln!(
        "{} epochs, best epoch {} (train loss {:.4}, val loss {:.4}, val acc {:.2}%) -> {}",
        hist.epochs_run,
        hist.best_epoch + 1,
        hist.best_train_loss(),
        hist.best_val_loss(),
        100.0 * hist.val_accuracy[hist.best_epoch],
        out.display()
    );
    Ok(())
}

fn eval(model: &Path, data: &Path, format: ReportFormat, out: Option<&Path>) -> Result<()> {
    let net = Mlp::load(model)?;
    let kind = net.config().task_kind;
    let task = match kind {
        TaskKind::Binary => Task::Identify,
        TaskKind::Multiclass => Task::Severity,
    };
    let set = labels_for(task, read_fvec(data)?)?;
    let probs = net.predict_proba(features_matrix(&set).view())?;
    let preds = dnn::decide(probs.view(), kind);
    let test_loss = dnn::loss(probs.view(), set.labels(), kind)?;
    let cm = confusion_matrix(set.labels(), &preds, net.config().n_classes())?;
    let report = EvalReport::from_confusion(cm, 0, test_loss)?;
    match out {
        Some(p) => emit_report(&report, format, p),
        None => {
            print!("{}", experiment::report::render(&report, format));
            Ok(())
        }
    }
}
