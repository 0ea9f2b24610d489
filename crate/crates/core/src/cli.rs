//! `msdn` command-line interface.
//!
//! Exit codes: 0 success, 2 usage/argument/IO, 3 invalid data, 4 non-finite
//! numerics, 5 shape mismatch, 6 gradient check failure. On error the first
//! stderr line is `msdn: error[<code>]: <message>`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::ablation::{ablation_csv, run_ablation};
use crate::check::{check_total_loss, InstanceDims, GRAD_TOLERANCE};
use crate::data::{generate_synthetic, load_container, save_container, SynthSpec};
use crate::error::{Error, Result};
use crate::eval::{evaluate, Mode, PredictConfig};
use crate::losses::LossConfig;
use crate::model::{forward, Dims, ModelParams};
use crate::ndmath::Matrix;
use crate::training::{train, write_history_csv, TrainConfig};

/// Environment variable that overrides any `--seed` flag.
pub const SEED_ENV: &str = "MSDN_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "msdn",
    version,
    about = "Mutual attention zero-shot learning toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset container.
    GenData(GenDataArgs),
    /// Train both sub-nets and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint (CZSL accuracy and GZSL U/S/H).
    Eval(EvalArgs),
    /// Finite-difference check of the objective's gradients.
    GradCheck(GradCheckArgs),
    /// Train and evaluate every ablation variant.
    Ablate(AblateArgs),
    /// Export attention weights and embeddings for one image.
    ExportAttention(ExportArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// key=value generator settings; defaults apply to missing keys.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// key=value training config; defaults apply to missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "czsl")]
    pub mode: String,
    #[arg(long, default_value_t = 0.9)]
    pub alpha1: f64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha2: f64,
    /// Metric CSV (`metric,value`).
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-class CSV (`class_id,split,accuracy`).
    #[arg(long)]
    pub per_class: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    /// k,r,dv,da,cs,cu
    #[arg(long, default_value = "5,4,8,6,3,2")]
    pub dims: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Scales the analytic W2 gradient by 1.1 (negative control).
    #[arg(long, hide = true)]
    pub inject_grad_bug: bool,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.9)]
    pub alpha1: f64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha2: f64,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub image: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let code = e.exit_code();
            eprintln!("msdn: error[{code}]: {}", e.to_string().replace('\n', " "));
            code
        }
    }
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| {
            Error::Argument(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))
        }),
        Err(_) => Ok(None),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn train_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        Some(p) => TrainConfig::from_kv(&read_text(p)?),
        None => Ok(TrainConfig::default()),
    }
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::GradCheck(a) => grad_check_cmd(a),
        Command::Ablate(a) => ablate_cmd(a),
        Command::ExportAttention(a) => export_cmd(a),
    }
}

fn gen_data(a: GenDataArgs) -> Result<i32> {
    let mut spec = match &a.spec {
        Some(p) => SynthSpec::from_kv(&read_text(p)?)?,
        None => SynthSpec::default(),
    };
    if let Some(seed) = env_seed()?.or(a.seed) {
        spec.seed = seed;
    }
    let ds = generate_synthetic(&spec)?;
    save_container(&ds, &a.out)?;
    let f = &ds.features;
    println!("features {}x{}x{}", f.images(), f.regions(), f.dim());
    println!(
        "attributes {}x{}",
        ds.attributes.rows(),
        ds.attributes.cols()
    );
    println!(
        "class_semantics {}x{}",
        ds.class_semantics.rows(),
        ds.class_semantics.cols()
    );
    println!(
        "labels {} train {} test_seen {} test_unseen {}",
        ds.labels.len(),
        ds.train_idx.len(),
        ds.test_seen_idx.len(),
        ds.test_unseen_idx.len()
    );
    Ok(0)
}

fn train_cmd(a: TrainArgs) -> Result<i32> {
    let cfg = train_config(a.config.as_deref())?;
    let ds = load_container(&a.data)?;
    let out = train(&ds, &cfg)?;
    out.params.save(&a.out)?;
    if let Some(h) = &a.history {
        write_history_csv(h, &out.history)?;
    }
    if let Some(last) = out.history.last() {
        println!(
            "epochs {} final total {} (acec_a2v {}, acec_v2a {}, distill {})",
            out.history.len(),
            last.total,
            last.acec_a2v,
            last.acec_v2a,
            last.distill
        );
    } else {
        println!("epochs 0");
    }
    Ok(0)
}

fn load_model_for(ds_path: &Path, ckpt: &Path) -> Result<(crate::data::Dataset, ModelParams)> {
    let ds = load_container(ds_path)?;
    let params = ModelParams::load(ckpt)?;
    params.check_compatible(Dims::of(&ds))?;
    Ok((ds, params))
}

fn eval_cmd(a: EvalArgs) -> Result<i32> {
    let cfg = PredictConfig {
        alpha1: a.alpha1,
        alpha2: a.alpha2,
        mode: a.mode.parse()?,
    };
    cfg.validate()?;
    let (ds, params) = load_model_for(&a.data, &a.checkpoint)?;
    let report = evaluate(&params, &ds, &cfg)?;
    report.write_metrics(&a.out)?;
    if let Some(p) = &a.per_class {
        report.write_per_class(p)?;
    }
    match cfg.mode {
        Mode::Czsl => println!("acc {:.4}", report.acc),
        Mode::Gzsl => println!(
            "U {:.4} S {:.4} H {:.4}",
            report.unseen, report.seen, report.harmonic
        ),
    }
    Ok(0)
}

fn grad_check_cmd(a: GradCheckArgs) -> Result<i32> {
    let dims: InstanceDims = a.dims.parse()?;
    let seed = env_seed()?.unwrap_or(a.seed);
    let results = check_total_loss(dims, seed, &LossConfig::default(), a.inject_grad_bug)?;
    let mut worst: Option<(&str, &crate::ndmath::GradCheck)> = None;
    for (name, r) in &results {
        println!("{name} max_rel_error {:e}", r.max_rel_error);
        if worst.is_none_or(|(_, w)| r.max_rel_error > w.max_rel_error) {
            worst = Some((name, r));
        }
    }
    match worst {
        Some((name, w)) if w.max_rel_error > GRAD_TOLERANCE => Err(Error::Gradient(format!(
            "{name}[{}] analytic {} numeric {} rel_error {:e} > {GRAD_TOLERANCE:e}",
            w.worst_index, w.worst_analytic, w.worst_numeric, w.max_rel_error
        ))),
        _ => {
            println!("ok: all matrices within {GRAD_TOLERANCE:e}");
            Ok(0)
        }
    }
}

fn ablate_cmd(a: AblateArgs) -> Result<i32> {
    let cfg = train_config(a.config.as_deref())?;
    let fused = PredictConfig {
        alpha1: a.alpha1,
        alpha2: a.alpha2,
        mode: Mode::Czsl,
    };
    fused.validate()?;
    let ds = load_container(&a.data)?;
    let rows = run_ablation(&ds, &cfg, fused)?;
    let csv = ablation_csv(&rows);
    write_text(&a.out, &csv)?;
    print!("{csv}");
    Ok(0)
}

fn matrix_csv(m: &Matrix, row_label: &str, col_prefix: &str) -> String {
    let mut out = String::from(row_label);
    for c in 0..m.cols() {
        out.push_str(&format!(",{col_prefix}{c}"));
    }
    out.push('\n');
    for r in 0..m.rows() {
        out.push_str(&r.to_string());
        for v in m.row(r) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

fn export_cmd(a: ExportArgs) -> Result<i32> {
    let (ds, params) = load_model_for(&a.data, &a.checkpoint)?;
    let n = ds.features.images();
    if a.image >= n {
        return Err(Error::Argument(format!(
            "image index {} out of range for {n} images",
            a.image
        )));
    }
    let trace = forward(&ds.features.image(a.image), &ds.attributes, &params)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    write_text(
        &a.out.join("beta.csv"),
        &matrix_csv(trace.beta(), "attribute", "region_"),
    )?;
    write_text(
        &a.out.join("tau.csv"),
        &matrix_csv(trace.tau(), "region", "attribute_"),
    )?;
    let mut scores = String::from("attribute,psi,Psi\n");
    for (k, (p, q)) in trace.psi().iter().zip(trace.psi_mapped()).enumerate() {
        scores.push_str(&format!("{k},{p},{q}\n"));
    }
    write_text(&a.out.join("scores.csv"), &scores)?;
    println!(
        "wrote beta ({}x{}), tau ({}x{}) and scores for image {} to {}",
        trace.beta().rows(),
        trace.beta().cols(),
        trace.tau().rows(),
        trace.tau().cols(),
        a.image,
        a.out.display()
    );
    Ok(0)
}
