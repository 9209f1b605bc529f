//! Command-line surface: conversion, inspection, training, evaluation, and
//! property checks. Exit codes: 0 success, 1 user/data error, 2 internal
//! invariant violation (a caught panic).

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use equihg::check::{run_check, CheckKind};
use equihg::chemio::{
    load_dataset, load_molecules, parse_smiles, parse_xyz, read_sdf_file, split_dataset,
    DatasetRecord, Molecule,
};
use equihg::config::{load_config, Settings};
use equihg::error::{Error, Result};
use equihg::hypergraph::{build_hypergraph, perceive_conjugation};
use equihg::model::ModelKind;
use equihg::trainer;
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "equihg",
    version,
    about = "Molecular hypergraph networks with an E(3)-equivariant geometric encoder"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse molecules and write one hypergraph JSON object per line
    Convert {
        /// Input: .sdf/.xyz/.smi file or a directory of .xyz files
        input: PathBuf,
        /// Input format; inferred from the extension when omitted
        #[arg(long, value_enum)]
        format: Option<InputFormat>,
        /// Output file; stdout when omitted
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print a per-molecule summary with the hypergraph dump
    Inspect {
        /// Input: .sdf/.xyz/.smi file or a directory of .xyz files
        input: PathBuf,
        /// Input format; inferred from the extension when omitted
        #[arg(long, value_enum)]
        format: Option<InputFormat>,
    },
    /// Train a model and keep the best-validation checkpoint
    Train {
        #[command(flatten)]
        data: DataFlags,
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Shuffle and initialization seed
        #[arg(long)]
        seed: Option<u64>,
        /// Target column to fit
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        eval_every: Option<usize>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Report the denormalized MAE of a checkpoint on one split
    Eval {
        checkpoint: PathBuf,
        /// Which split of the dataset to score
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        /// Expected model kind; errors when the checkpoint disagrees
        #[arg(long, value_parser = kind_value)]
        kind: Option<ModelKind>,
        #[command(flatten)]
        data: DataFlags,
    },
    /// Verify a model property on sampled molecules with random parameters
    Check {
        /// One of: equivariance, permutation, gradcheck
        #[arg(value_parser = check_kind_value)]
        kind: CheckKind,
        /// Model kind to instantiate
        #[arg(long, value_parser = kind_value, default_value = "equihgnn")]
        model: ModelKind,
        /// Seed for parameters and sampled transforms
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        data: DataFlags,
    },
}

#[derive(Args)]
struct DataFlags {
    /// Config file with [model]/[train]/[data] sections; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// SDF file or directory of .xyz files
    #[arg(long)]
    molecules: Option<PathBuf>,
    /// CSV with a name column plus one column per target
    #[arg(long)]
    targets: Option<PathBuf>,
    /// Keep only the first N records
    #[arg(long)]
    n: Option<usize>,
    /// Seed for the train/val/test split
    #[arg(long)]
    split_seed: Option<u64>,
}

#[derive(Args)]
struct ModelFlags {
    /// Model kind: equihgnn, mhnn or gin
    #[arg(long, value_parser = kind_value)]
    kind: Option<ModelKind>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    geo_layers: Option<usize>,
    #[arg(long)]
    hg_layers: Option<usize>,
    #[arg(long)]
    head_layers: Option<usize>,
    #[arg(long)]
    cutoff: Option<f64>,
    #[arg(long)]
    max_neighbors: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Sdf,
    Xyz,
    Smiles,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl SplitArg {
    fn name(self) -> &'static str {
        match self {
            SplitArg::Train => "train",
            SplitArg::Val => "val",
            SplitArg::Test => "test",
        }
    }
}

fn kind_value(s: &str) -> std::result::Result<ModelKind, String> {
    ModelKind::parse(s).ok_or_else(|| format!("{s:?} is not one of equihgnn, mhnn, gin"))
}

fn check_kind_value(s: &str) -> std::result::Result<CheckKind, String> {
    Ok(match s {
        "equivariance" => CheckKind::Equivariance,
        "permutation" => CheckKind::Permutation,
        "gradcheck" => CheckKind::Gradcheck,
        other => {
            return Err(format!(
                "{other:?} is not one of equivariance, permutation, gradcheck"
            ))
        }
    })
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(cli)));
    let code = match outcome {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            1
        }
        Err(_) => {
            eprintln!("internal error: invariant violated (see panic message above)");
            2
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Convert {
            input,
            format,
            output,
        } => cmd_convert(&input, format, output.as_deref()),
        Command::Inspect { input, format } => cmd_inspect(&input, format),
        Command::Train {
            data,
            model,
            epochs,
            batch_size,
            lr,
            seed,
            target,
            eval_every,
            out_dir,
        } => {
            let mut s = settings_from(&data)?;
            apply_model_flags(&mut s, &model);
            if let Some(v) = epochs {
                s.train.epochs = v;
            }
            if let Some(v) = batch_size {
                s.train.batch_size = v;
            }
            if let Some(v) = lr {
                s.train.lr = v;
            }
            if let Some(v) = seed {
                s.train.seed = v;
                s.model.seed = v;
            }
            if let Some(v) = target {
                s.train.target_name = v;
            }
            if let Some(v) = eval_every {
                s.train.eval_every = v;
            }
            if let Some(v) = out_dir {
                s.train.out_dir = v;
            }
            cmd_train(s)
        }
        Command::Eval {
            checkpoint,
            split,
            kind,
            data,
        } => cmd_eval(&checkpoint, split, kind, settings_from(&data)?),
        Command::Check {
            kind,
            model,
            seed,
            data,
        } => cmd_check(kind, model, seed, settings_from(&data)?),
    }
}

/// Config file (when given), then data flags, then EQUIHG_THREADS.
fn settings_from(flags: &DataFlags) -> Result<Settings> {
    let mut s = match &flags.config {
        Some(path) => load_config(path)?,
        None => Settings::default(),
    };
    if let Some(p) = &flags.molecules {
        s.data.molecules = Some(p.clone());
    }
    if let Some(p) = &flags.targets {
        s.data.targets = Some(p.clone());
    }
    if let Some(n) = flags.n {
        s.data.n = Some(n);
    }
    if let Some(seed) = flags.split_seed {
        s.data.split_seed = seed;
    }
    if let Ok(raw) = std::env::var("EQUIHG_THREADS") {
        s.train.threads = raw
            .parse()
            .map_err(|_| Error::Config(format!("EQUIHG_THREADS must be an integer, got {raw:?}")))?;
    }
    Ok(s)
}

fn apply_model_flags(s: &mut Settings, flags: &ModelFlags) {
    if let Some(v) = flags.kind {
        s.model.kind = v;
    }
    if let Some(v) = flags.hidden {
        s.model.hidden = v;
    }
    if let Some(v) = flags.geo_layers {
        s.model.geo_layers = v;
    }
    if let Some(v) = flags.hg_layers {
        s.model.hg_layers = v;
    }
    if let Some(v) = flags.head_layers {
        s.model.head_layers = v;
    }
    if let Some(v) = flags.cutoff {
        s.model.cutoff = v;
    }
    if let Some(v) = flags.max_neighbors {
        s.model.max_neighbors = v;
    }
}

fn infer_format(path: &Path, format: Option<InputFormat>) -> Result<Option<InputFormat>> {
    if format.is_some() {
        return Ok(format);
    }
    if path.is_dir() {
        return Ok(None); // directory of .xyz files
    }
    match path
        .extension()
        .map(|e| e.to_string_lossy().to_lowercase())
        .as_deref()
    {
        Some("sdf") | Some("mol") => Ok(Some(InputFormat::Sdf)),
        Some("xyz") => Ok(Some(InputFormat::Xyz)),
        Some("smi") | Some("smiles") => Ok(Some(InputFormat::Smiles)),
        _ => Err(Error::Config(format!(
            "cannot infer format of {}; pass --format",
            path.display()
        ))),
    }
}

/// SMILES files: one molecule per line, optionally followed by a name.
/// Returns per-line errors instead of failing fast so `convert` can report
/// every bad record.
fn read_smiles_lines(path: &Path) -> Result<Vec<std::result::Result<Molecule, Error>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (smiles, name) = match line.split_once(char::is_whitespace) {
            Some((s, rest)) => (s, rest.trim().to_string()),
            None => (line, format!("line{}", i + 1)),
        };
        out.push(
            parse_smiles(smiles)
                .map(|mut m| {
                    m.name = name;
                    m
                })
                .map_err(|e| Error::parse(path, i + 1, e.to_string())),
        );
    }
    Ok(out)
}

fn read_input(path: &Path, format: Option<InputFormat>) -> Result<Vec<Molecule>> {
    match infer_format(path, format)? {
        None => load_molecules(path),
        Some(InputFormat::Sdf) => read_sdf_file(path),
        Some(InputFormat::Xyz) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let stem = path.file_stem().unwrap_or_default().to_string_lossy();
            Ok(vec![parse_xyz(&text, &stem, path)?])
        }
        Some(InputFormat::Smiles) => read_smiles_lines(path)?.into_iter().collect(),
    }
}

fn cmd_convert(input: &Path, format: Option<InputFormat>, output: Option<&Path>) -> Result<()> {
    // SMILES inputs are converted record by record so one bad line does not
    // hide the rest; SDF/xyz parsers fail the file with a line-numbered error.
    let inferred = infer_format(input, format)?;
    let (molecules, failures) = match inferred {
        Some(InputFormat::Smiles) => {
            let mut ok = Vec::new();
            let mut errs = Vec::new();
            for res in read_smiles_lines(input)? {
                match res {
                    Ok(m) => ok.push(m),
                    Err(e) => errs.push(e),
                }
            }
            (ok, errs)
        }
        _ => (read_input(input, inferred)?, Vec::new()),
    };

    let mut lines = String::new();
    for mol in molecules {
        let hg = build_hypergraph(&perceive_conjugation(mol));
        lines.push_str(&hg.to_json());
        lines.push('\n');
    }
    match output {
        Some(path) => std::fs::write(path, lines).map_err(|e| Error::io(path, e))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(lines.as_bytes())
                .map_err(|e| Error::io(Path::new("<stdout>"), e))?;
        }
    }
    for e in &failures {
        eprintln!("error: {e}");
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Error::Data(format!(
            "{} record(s) failed to parse",
            failures.len()
        )))
    }
}

fn cmd_inspect(input: &Path, format: Option<InputFormat>) -> Result<()> {
    let molecules = read_input(input, format)?;
    let mut stdout = std::io::stdout().lock();
    let wio = |e: std::io::Error| Error::io(Path::new("<stdout>"), e);
    for mol in molecules {
        let mol = perceive_conjugation(mol);
        let hg = build_hypergraph(&mol);
        writeln!(
            stdout,
            "{}: atoms={} bonds={} hyperedges={}",
            mol.name,
            mol.n_atoms(),
            mol.bonds.len(),
            hg.hyperedges.len()
        )
        .map_err(wio)?;
        writeln!(stdout, "  {}", hg.to_json()).map_err(wio)?;
    }
    Ok(())
}

fn load_records(s: &Settings) -> Result<Vec<DatasetRecord>> {
    let molecules = s.data.molecules.as_ref().ok_or_else(|| {
        Error::Config("no molecule source configured; pass --molecules or set [data] molecules".into())
    })?;
    let targets = s.data.targets.as_ref().ok_or_else(|| {
        Error::Config("no targets file configured; pass --targets or set [data] targets".into())
    })?;
    let loaded = load_dataset(molecules, targets, &[s.train.target_name.clone()])?;
    if loaded.unmatched_molecules > 0 || loaded.unmatched_targets > 0 {
        eprintln!(
            "note: skipped {} molecule(s) without target rows and {} target row(s) without molecules",
            loaded.unmatched_molecules, loaded.unmatched_targets
        );
    }
    let mut records = loaded.records;
    if let Some(n) = s.data.n {
        records.truncate(n);
    }
    Ok(records)
}

fn cmd_train(s: Settings) -> Result<()> {
    let records = load_records(&s)?;
    let (train, val, _test) = split_dataset(records, s.data.split_seed)?;
    let outcome = trainer::train(s.model.clone(), &s.train, &train, &val)?;
    println!("metrics: {}", outcome.metrics_path.display());
    println!(
        "best checkpoint: {} (val MAE {} at epoch {})",
        outcome.best_checkpoint.display(),
        outcome.best_val_mae,
        outcome.persisted.last().map(|p| p.0).unwrap_or(0),
    );
    Ok(())
}

fn cmd_eval(
    checkpoint: &Path,
    split: SplitArg,
    kind: Option<ModelKind>,
    s: Settings,
) -> Result<()> {
    let records = load_records(&s)?;
    let (train, val, test) = split_dataset(records, s.data.split_seed)?;
    let chosen = match split {
        SplitArg::Train => train,
        SplitArg::Val => val,
        SplitArg::Test => test,
    };
    let report = trainer::evaluate(checkpoint, &chosen, split.name(), kind)?;
    println!("{}", report.to_json());
    let out = checkpoint
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(format!("eval_{}.json", split.name()));
    std::fs::write(&out, report.to_json() + "\n").map_err(|e| Error::io(&out, e))?;
    println!("report: {}", out.display());
    Ok(())
}

fn cmd_check(kind: CheckKind, model_kind: ModelKind, seed: u64, s: Settings) -> Result<()> {
    let molecules = s.data.molecules.as_ref().ok_or_else(|| {
        Error::Config("no molecule source configured; pass --molecules or set [data] molecules".into())
    })?;
    let mut mols = load_molecules(molecules)?;
    if let Some(n) = s.data.n {
        mols.truncate(n);
    }
    let report = run_check(kind, model_kind, &mols, seed)?;
    println!(
        "{} ({}): max deviation {:e} over {} cases, tolerance {:e} -> {}",
        kind.as_str(),
        model_kind.as_str(),
        report.max_deviation,
        report.cases,
        report.tolerance,
        if report.passed() { "ok" } else { "FAILED" },
    );
    if report.passed() {
        Ok(())
    } else {
        Err(Error::Data(format!(
            "{} check failed: max deviation {:e} exceeds {:e}",
            kind.as_str(),
            report.max_deviation,
            report.tolerance
        )))
    }
}
