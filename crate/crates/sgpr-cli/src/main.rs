//! `sgpr`: command-line pipeline for synthetic GPR sparse-representation
//! experiments. Subcommands cover the full chain: simulate → preprocess →
//! learn → code/eval → train → classify → score → report, plus a timing
//! bench. Every run is reproducible from its seed; each output file gets a
//! `.prov.json` sidecar with the resolved configuration.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sgpr_core::classify::{self, TrainParams};
use sgpr_core::dictionary_learning::{self as dl, DlAlgorithm, LearnConfig};
use sgpr_core::evaluation;
use sgpr_core::io;
use sgpr_core::preprocess;
use sgpr_core::signal_model::{self, AcquisitionSpec, BScan, LabeledDataset, PulseSpec};
use sgpr_core::sparse_coding::StopRule;
use std::path::{Path, PathBuf};

mod render;

#[derive(Parser)]
#[command(name = "sgpr", version, about = "Sparse-representation GPR toolkit")]
struct Cli {
    /// Master seed; all randomness derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Verbose progress logging on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic dataset (or a point-target B-scan).
    Simulate(SimulateArgs),
    /// Run an ordered pre-processing pipeline over a container.
    Preprocess(PreprocessArgs),
    /// Sparse-code a dataset over a dictionary.
    Code(CodeArgs),
    /// Learn a dictionary.
    Learn(LearnArgs),
    /// Parameter sweep with CV / K-S / DKW metrics.
    Eval(EvalArgs),
    /// Train the linear classifier on sparse-code features.
    Train(TrainArgs),
    /// Predict labels for a dataset.
    Classify(ClassifyArgs),
    /// Score predictions against ground truth (and optional halos).
    Score(ScoreArgs),
    /// Render human-readable tables from score/timing files.
    Report(ReportArgs),
    /// Wall-time comparison of the dictionary learners.
    Bench(BenchArgs),
}

#[derive(Args)]
struct AcquisitionFlags {
    /// Samples per profile (M).
    #[arg(long, default_value_t = 128)]
    samples: usize,
    /// Stroboscopic sampling interval T_s in seconds.
    #[arg(long, default_value_t = 25e-12)]
    sample_interval: f64,
    /// Pulse center frequency in Hz.
    #[arg(long, default_value_t = 2e9)]
    fc: f64,
    /// Pulse peak amplitude.
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    /// Soil relative permittivity ε_r.
    #[arg(long, default_value_t = 4.0)]
    permittivity: f64,
    /// Soil conductivity in S/m.
    #[arg(long, default_value_t = 0.01)]
    conductivity: f64,
    /// Additive white Gaussian noise standard deviation.
    #[arg(long, default_value_t = 0.015)]
    noise: f64,
}

impl AcquisitionFlags {
    fn acquisition(&self, seed: u64) -> Result<AcquisitionSpec> {
        Ok(AcquisitionSpec::new(
            self.samples,
            self.sample_interval,
            self.permittivity,
            self.conductivity,
            self.noise,
            seed,
        )?)
    }

    fn pulse(&self) -> Result<PulseSpec> {
        Ok(PulseSpec::new(self.fc, self.amplitude)?)
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Output container path.
    #[arg(short, long)]
    output: PathBuf,
    /// Per-class profile counts (clutter,large,medium,small).
    #[arg(long, default_value = "463,168,167,128")]
    counts: String,
    /// Also export the dataset as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Synthesize a single point-target B-scan instead of a class dataset.
    #[arg(long)]
    bscan: bool,
    /// B-scan: target position along the line (m).
    #[arg(long, default_value_t = 0.32)]
    target_x: f64,
    /// B-scan: target depth (m).
    #[arg(long, default_value_t = 0.10)]
    target_depth: f64,
    /// B-scan: number of traces.
    #[arg(long, default_value_t = 64)]
    traces: usize,
    /// B-scan: trace spacing Δx (m).
    #[arg(long, default_value_t = 0.01)]
    dx: f64,
    #[command(flatten)]
    acq: AcquisitionFlags,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Input container (.sgpr or .csv).
    #[arg(short, long)]
    input: PathBuf,
    /// Output container path.
    #[arg(short, long)]
    output: PathBuf,
    /// Ordered pipeline, e.g. `dewow:31,bg-pca:2,gate:40:400`.
    /// Ops: gate:a:b, dewow:w, bg-mean, bg-pca:n, gain-exp:k, migrate:er.
    #[arg(long)]
    ops: String,
    /// Trace spacing Δx in meters (used by migrate).
    #[arg(long, default_value_t = 0.01)]
    dx: f64,
    /// Sampling interval T_s in seconds (used by migrate).
    #[arg(long, default_value_t = 25e-12)]
    sample_interval: f64,
}

#[derive(Args)]
struct CodeArgs {
    /// Input dataset.
    #[arg(short, long)]
    input: PathBuf,
    /// Dictionary container.
    #[arg(short, long)]
    dictionary: PathBuf,
    /// Stop rule, e.g. `s=4`, `delta=0.1`, or `s=6,delta=0.05`.
    #[arg(long, default_value = "s=4")]
    stop: String,
    /// Output triplet CSV.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct LearnFlags {
    /// Number of trained atoms K.
    #[arg(long, default_value_t = 640)]
    atoms: usize,
    /// Iterations N_t (K-SVD and ODL).
    #[arg(long, default_value_t = 100)]
    iterations: usize,
    /// New-element mini-batch size N_b (DOMINODL).
    #[arg(long, default_value_t = 30)]
    new_batch: usize,
    /// Previous-element mini-batch size N_r (DOMINODL).
    #[arg(long, default_value_t = 10)]
    prev_batch: usize,
    /// Drop-off age N_u in iterations (DOMINODL).
    #[arg(long, default_value_t = 10)]
    drop_off: usize,
    /// Coding residual threshold δ (default: 0.1 × median column norm).
    #[arg(long)]
    delta: Option<f64>,
    /// DOMINODL convergence threshold χ.
    #[arg(long, default_value_t = 0.25)]
    chi: f64,
    /// ODL ℓ1 regularization λ.
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
}

impl LearnFlags {
    fn config(&self, seed: u64) -> LearnConfig {
        LearnConfig {
            atom_count: self.atoms,
            iterations: self.iterations,
            new_batch: self.new_batch,
            prev_batch: self.prev_batch,
            drop_off_age: self.drop_off,
            residual_threshold: self.delta,
            convergence_threshold: self.chi,
            odl_lambda: self.lambda,
            seed,
        }
    }
}

#[derive(Args)]
struct LearnArgs {
    /// Training dataset.
    #[arg(short, long)]
    input: PathBuf,
    /// Learner: ksvd | odl | cbwlsu | dominodl.
    #[arg(long)]
    algo: String,
    /// Output dictionary container.
    #[arg(short, long)]
    output: PathBuf,
    /// Optional per-iteration report CSV.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    learn: LearnFlags,
}

#[derive(Args)]
struct EvalArgs {
    /// Training dataset.
    #[arg(short, long)]
    input: PathBuf,
    /// Learner to sweep.
    #[arg(long)]
    algo: String,
    /// Grid file: one `key=value,key=value` combination per line
    /// (keys: k, nt, nb, nr, nu, delta, chi, lambda, seed).
    #[arg(long)]
    grid: PathBuf,
    /// Output metric CSV.
    #[arg(short, long)]
    output: PathBuf,
    /// Optional similarity-histogram CSV (one column per combination).
    #[arg(long)]
    histograms: Option<PathBuf>,
    /// DKW confidence level α.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Stop rule used when re-coding for evaluation.
    #[arg(long, default_value = "s=4")]
    code_stop: String,
    #[command(flatten)]
    learn: LearnFlags,
}

#[derive(Args)]
struct TrainArgs {
    /// Training dataset.
    #[arg(short, long)]
    input: PathBuf,
    /// Dictionary container.
    #[arg(short, long)]
    dictionary: PathBuf,
    /// Output model JSON.
    #[arg(short, long)]
    output: PathBuf,
    /// Feature stop rule.
    #[arg(long, default_value = "s=4")]
    stop: String,
    /// Training epochs.
    #[arg(long, default_value_t = 60)]
    epochs: usize,
    /// L2 regularization strength.
    #[arg(long, default_value_t = 1e-4)]
    reg: f64,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Dataset to classify.
    #[arg(short, long)]
    input: PathBuf,
    /// Dictionary container.
    #[arg(short, long)]
    dictionary: PathBuf,
    /// Trained model JSON.
    #[arg(short, long)]
    model: PathBuf,
    /// Output label CSV.
    #[arg(short, long)]
    output: PathBuf,
    /// Feature stop rule.
    #[arg(long, default_value = "s=4")]
    stop: String,
    /// Random row-subsampling rate in (0, 1]; the same pattern restricts
    /// profiles and dictionary rows.
    #[arg(long)]
    rate: Option<f64>,
    /// Classification-map width (profiles per survey line).
    #[arg(long)]
    map_width: Option<usize>,
    /// Classification-map height (number of survey lines).
    #[arg(long)]
    map_height: Option<usize>,
    /// Output P5 graymap path.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Output map CSV path.
    #[arg(long)]
    map_csv: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Predicted label CSV.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth dataset (labels and class table).
    #[arg(long)]
    truth: PathBuf,
    /// Output confusion CSV.
    #[arg(short, long)]
    output: PathBuf,
    /// Output scalar-score CSV.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Target-halo CSV (id,class,x0,y0,x1,y1) for P_d/P_fa scoring.
    #[arg(long)]
    halos: Option<PathBuf>,
    /// Classification-map CSV matching the halo coordinates.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Class index treated as clutter for detection scoring.
    #[arg(long, default_value_t = 0)]
    clutter_class: u16,
    /// Fraction of halo pixels that must carry a mine label for detection.
    #[arg(long, default_value_t = 2.0 / 3.0)]
    detect_threshold: f64,
}

#[derive(Args)]
struct ReportArgs {
    /// Confusion CSV to render.
    #[arg(long)]
    confusion: Option<PathBuf>,
    /// Score CSV to render.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Timing CSV to render.
    #[arg(long)]
    timing: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Training dataset.
    #[arg(short, long)]
    input: PathBuf,
    /// Comma-separated learners to time.
    #[arg(long, default_value = "ksvd,odl,cbwlsu,dominodl")]
    algos: String,
    /// Problem sizes as `LxK`, separated by `;` (default: whole set).
    #[arg(long)]
    sizes: Option<String>,
    /// Output timing CSV.
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    learn: LearnFlags,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => simulate(&args, cli.seed, cli.verbose),
        Command::Preprocess(args) => preprocess_cmd(&args, cli.seed),
        Command::Code(args) => code(&args, cli.seed),
        Command::Learn(args) => learn_cmd(&args, cli.seed, cli.verbose),
        Command::Eval(args) => eval_cmd(&args, cli.seed),
        Command::Train(args) => train_cmd(&args, cli.seed),
        Command::Classify(args) => classify_cmd(&args, cli.seed),
        Command::Score(args) => score_cmd(&args, cli.seed),
        Command::Report(args) => report_cmd(&args),
        Command::Bench(args) => bench_cmd(&args, cli.seed),
    }
}

/// Parse a stop rule like `s=4`, `delta=0.1`, or `s=4,delta=0.1`.
fn parse_stop(text: &str) -> Result<StopRule> {
    let mut sparsity = None;
    let mut delta = None;
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("bad stop rule entry '{part}'"))?;
        match key.trim() {
            "s" => sparsity = Some(value.trim().parse::<usize>().context("bad sparsity")?),
            "delta" => delta = Some(value.trim().parse::<f64>().context("bad delta")?),
            other => bail!("unknown stop key '{other}' (use s= or delta=)"),
        }
    }
    let rule = match (sparsity, delta) {
        (Some(s), Some(d)) => StopRule::both(s, d)?,
        (Some(s), None) => StopRule::sparsity(s)?,
        (None, Some(d)) => StopRule::residual(d)?,
        (None, None) => bail!("stop rule must set s= and/or delta="),
    };
    Ok(rule)
}

fn parse_counts(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| t.trim().parse::<usize>().context("bad count"))
        .collect()
}

/// Write the provenance sidecar `<output>.prov.json`: resolved configuration
/// and versions, no timestamps, so repeated runs are byte-identical.
fn write_sidecar(output: &Path, subcommand: &str, seed: u64, args: &[(&str, String)]) -> Result<()> {
    let mut map = serde_json::Map::new();
    map.insert("tool".into(), "sgpr".into());
    map.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    map.insert("subcommand".into(), subcommand.into());
    map.insert("seed".into(), seed.into());
    let mut resolved = serde_json::Map::new();
    for (key, value) in args {
        resolved.insert((*key).into(), value.clone().into());
    }
    map.insert("args".into(), serde_json::Value::Object(resolved));
    let path = sidecar_path(output);
    std::fs::write(&path, serde_json::to_vec_pretty(&map)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".prov.json");
    output.with_file_name(name)
}

fn simulate(args: &SimulateArgs, seed: u64, verbose: u8) -> Result<()> {
    let pulse = args.acq.pulse()?;
    let acq = args.acq.acquisition(seed)?;
    let dataset = if args.bscan {
        let positions: Vec<f64> = (0..args.traces).map(|i| i as f64 * args.dx).collect();
        let scan =
            signal_model::synthesize_bscan(args.target_x, args.target_depth, &acq, &positions, &pulse)?;
        LabeledDataset::new(
            scan.data,
            vec![0; args.traces],
            vec!["trace".to_string()],
        )?
    } else {
        let classes = signal_model::default_classes();
        let counts = parse_counts(&args.counts)?;
        if counts.len() != classes.len() {
            bail!(
                "expected {} counts (one per class: {}), got {}",
                classes.len(),
                classes
                    .iter()
                    .map(|c| c.name.as_str())
                    .collect::<Vec<_>>()
                    .join(","),
                counts.len()
            );
        }
        signal_model::generate_dataset(&pulse, &classes, &counts, &acq, seed)?
    };
    if verbose > 0 {
        eprintln!(
            "simulated {} profiles x {} samples",
            dataset.column_count(),
            dataset.sample_count()
        );
    }
    io::write_dataset(&args.output, &dataset)?;
    write_sidecar(
        &args.output,
        "simulate",
        seed,
        &[
            ("counts", args.counts.clone()),
            ("bscan", args.bscan.to_string()),
            ("samples", args.acq.samples.to_string()),
            ("sample_interval", args.acq.sample_interval.to_string()),
            ("fc", args.acq.fc.to_string()),
            ("permittivity", args.acq.permittivity.to_string()),
            ("conductivity", args.acq.conductivity.to_string()),
            ("noise", args.acq.noise.to_string()),
        ],
    )?;
    if let Some(csv) = &args.csv {
        io::write_dataset_csv(csv, &dataset)?;
        write_sidecar(csv, "simulate", seed, &[("format", "csv".to_string())])?;
    }
    Ok(())
}

enum PipelineOp {
    Gate(usize, usize),
    Dewow(usize),
    BgMean,
    BgPca(usize),
    GainExp(f64),
    Migrate(f64),
}

fn parse_ops(text: &str) -> Result<Vec<PipelineOp>> {
    let mut ops = Vec::new();
    for item in text.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let mut parts = item.split(':');
        let name = parts.next().unwrap();
        let rest: Vec<&str> = parts.collect();
        let op = match (name, rest.as_slice()) {
            ("gate", [a, b]) => PipelineOp::Gate(
                a.parse().context("gate start")?,
                b.parse().context("gate end")?,
            ),
            ("dewow", [w]) => PipelineOp::Dewow(w.parse().context("dewow window")?),
            ("bg-mean", []) => PipelineOp::BgMean,
            ("bg-pca", [n]) => PipelineOp::BgPca(n.parse().context("bg-pca components")?),
            ("gain-exp", [k]) => PipelineOp::GainExp(k.parse().context("gain-exp factor")?),
            ("migrate", [er]) => PipelineOp::Migrate(er.parse().context("migrate permittivity")?),
            _ => bail!("bad pipeline op '{item}'"),
        };
        ops.push(op);
    }
    if ops.is_empty() {
        bail!("pipeline has no operations");
    }
    Ok(ops)
}

fn preprocess_cmd(args: &PreprocessArgs, seed: u64) -> Result<()> {
    let dataset = io::read_dataset_auto(&args.input)?;
    let ops = parse_ops(&args.ops)?;
    let mut scan = BScan {
        data: dataset.data,
        sample_interval_s: args.sample_interval,
        trace_spacing_m: args.dx,
    };
    for op in &ops {
        scan = match op {
            PipelineOp::Gate(a, b) => BScan {
                data: preprocess::time_gate_matrix(&scan.data, *a, *b)?,
                ..scan
            },
            PipelineOp::Dewow(w) => preprocess::dewow(&scan, *w)?,
            PipelineOp::BgMean => preprocess::background_subtraction_mean(&scan)?,
            PipelineOp::BgPca(n) => preprocess::background_subtraction_pca(&scan, *n)?,
            PipelineOp::GainExp(k) => {
                let gain = preprocess::GainCurve::exponential(scan.sample_count(), *k)?;
                BScan {
                    data: preprocess::time_gain_matrix(&scan.data, &gain)?,
                    ..scan
                }
            }
            PipelineOp::Migrate(er) => {
                let vp = signal_model::phase_velocity(*er);
                preprocess::fk_migrate(&scan, vp)?
            }
        };
    }
    let out = LabeledDataset::new(scan.data, dataset.labels, dataset.class_names)?;
    io::write_dataset(&args.output, &out)?;
    write_sidecar(
        &args.output,
        "preprocess",
        seed,
        &[
            ("input", args.input.display().to_string()),
            ("ops", args.ops.clone()),
            ("dx", args.dx.to_string()),
            ("sample_interval", args.sample_interval.to_string()),
        ],
    )?;
    Ok(())
}

fn code(args: &CodeArgs, seed: u64) -> Result<()> {
    let dataset = io::read_dataset_auto(&args.input)?;
    let dict = io::read_dictionary(&args.dictionary)?;
    let stop = parse_stop(&args.stop)?;
    let codes = sgpr_core::sparse_coding::batch_omp(dataset.data.view(), dict.atoms.view(), &stop)?;
    io::write_codes_csv(&args.output, &codes)?;
    write_sidecar(
        &args.output,
        "code",
        seed,
        &[
            ("input", args.input.display().to_string()),
            ("dictionary", args.dictionary.display().to_string()),
            ("stop", args.stop.clone()),
        ],
    )?;
    Ok(())
}

fn learn_cmd(args: &LearnArgs, seed: u64, verbose: u8) -> Result<()> {
    let dataset = io::read_dataset_auto(&args.input)?;
    let algo: DlAlgorithm = args.algo.parse()?;
    let config = args.learn.config(seed);
    let (dict, _codes, report) = dl::learn(algo, dataset.data.view(), &config)?;
    if verbose > 0 {
        eprintln!(
            "{algo}: {} iterations in {:.3} s",
            report.iterations, report.wall_time_secs
        );
    }
    io::write_dictionary(&args.output, &dict)?;
    write_sidecar(
        &args.output,
        "learn",
        seed,
        &[
            ("input", args.input.display().to_string()),
            ("algo", args.algo.clone()),
            ("atoms", config.atom_count.to_string()),
            ("iterations", config.iterations.to_string()),
            ("new_batch", config.new_batch.to_string()),
            ("prev_batch", config.prev_batch.to_string()),
            ("drop_off", config.drop_off_age.to_string()),
            ("delta", format!("{:?}", config.residual_threshold)),
            ("chi", config.convergence_threshold.to_string()),
            ("lambda", config.odl_lambda.to_string()),
        ],
    )?;
    if let Some(report_path) = &args.report {
        // wall time deliberately left out: report files are part of the
        // deterministic payload
        let mut out = String::from("iteration,error,dropoffs,prev_pool\n");
        for i in 0..report.iterations {
            let err = report
                .reconstruction_errors
                .get(i)
                .copied()
                .unwrap_or(f64::NAN);
            let drops = report.dropoff_counts.get(i).copied().unwrap_or(0);
            let pool = report.prev_pool_sizes.get(i).copied().unwrap_or(0);
            out.push_str(&format!("{},{},{},{}\n", i + 1, err, drops, pool));
        }
        std::fs::write(report_path, out)
            .with_context(|| format!("writing {}", report_path.display()))?;
        write_sidecar(report_path, "learn", seed, &[("algo", args.algo.clone())])?;
    }
    Ok(())
}

fn eval_cmd(args: &EvalArgs, seed: u64) -> Result<()> {
    let dataset = io::read_dataset_auto(&args.input)?;
    let algo: DlAlgorithm = args.algo.parse()?;
    let base = args.learn.config(seed);
    let grid = io::read_grid_file(&args.grid, &base)?;
    let reference = evaluation::reference_config(&base);
    let code_stop = parse_stop(&args.code_stop)?;
    let (reports, samples) = evaluation::parameter_sweep_detailed(
        algo,
        &grid,
        dataset.data.view(),
        &reference,
        &code_stop,
        args.alpha,
    )?;
    io::write_metrics_csv(&args.output, &reports)?;
    write_sidecar(
        &args.output,
        "eval",
        seed,
        &[
            ("input", args.input.display().to_string()),
            ("algo", args.algo.clone()),
            ("grid", args.grid.display().to_string()),
            ("alpha", args.alpha.to_string()),
            ("code_stop", args.code_stop.clone()),
        ],
    )?;
    if let Some(hist_path) = &args.histograms {
        let columns: Vec<(String, [u32; 100])> = samples
            .iter()
            .map(|(label, sims)| (label.clone(), evaluation::epdf_histogram(sims)))
            .collect();
        io::write_histograms_csv(hist_path, &columns)?;
        write_sidecar(hist_path, "eval", seed, &[("algo", args.algo.clone())])?;
    }
    Ok(())
}

fn train_cmd(args: &TrainArgs, seed: u64) -> Result<()> {
    let dataset = io::read_dataset_auto(&args.input)?;
    let dict = io::read_dictionary(&args.dictionary)?;
    let stop = parse_stop(&args.stop)?;
    let features = classify::extract_features(dataset.data.view(), dict.atoms.view(), &stop)?;
    let params = TrainParams {
        l2_regularization: args.reg,
        epochs: args.epochs,
        seed,
    };
    let model = classify::train_classifier(
        features.to_dense().view(),
        &dataset.labels,
        &dataset.class_names,
        &params,
    )?;
    println!("training accuracy: {:.4}", model.training_accuracy);
    io::write_model(&args.output, &model)?;
    write_sidecar(
        &args.output,
        "train",
        seed,
        &[
            ("input", args.input.display().to_string()),
            ("dictionary", args.dictionary.display().to_string()),
            ("stop", args.stop.clone()),
            ("epochs", args.epochs.to_string()),
            ("reg", args.reg.to_string()),
        ],
    )?;
    Ok(())
}

fn classify_cmd(args: &ClassifyArgs, seed: u64) -> Result<()> {
    let dataset = io::read_dataset_auto(&args.input)?;
    let dict = io::read_dictionary(&args.dictionary)?;
    let model = io::read_model(&args.model)?;
    let stop = parse_stop(&args.stop)?;

    let predictions = match args.rate {
        Some(rate) if rate < 1.0 => {
            // restrict profiles and dictionary rows with the same pattern;
            // features stay length-K so the trained model still applies
            let rows = classify::subsample_rows(dataset.sample_count(), rate, seed)?;
            let y_sub = classify::restrict_rows(dataset.data.view(), &rows);
            let d_sub = classify::restrict_rows(dict.atoms.view(), &rows);
            let features = classify::extract_features(y_sub.view(), d_sub.view(), &stop)?;
            classify::predict(&model, features.to_dense().view())
        }
        _ => {
            let features =
                classify::extract_features(dataset.data.view(), dict.atoms.view(), &stop)?;
            classify::predict(&model, features.to_dense().view())
        }
    };

    io::write_labels_csv(&args.output, &predictions, &model.class_names)?;
    write_sidecar(
        &args.output,
        "classify",
        seed,
        &[
            ("input", args.input.display().to_string()),
            ("dictionary", args.dictionary.display().to_string()),
            ("model", args.model.display().to_string()),
            ("stop", args.stop.clone()),
            ("rate", format!("{:?}", args.rate)),
        ],
    )?;

    if let (Some(w), Some(h)) = (args.map_width, args.map_height) {
        let map = classify::render_map(&predictions, w, h)?;
        if let Some(pgm) = &args.map {
            io::write_map_pgm(pgm, &map, model.class_count())?;
            write_sidecar(pgm, "classify", seed, &[("format", "pgm".to_string())])?;
        }
        if let Some(csv) = &args.map_csv {
            io::write_map_csv(csv, &map)?;
            write_sidecar(csv, "classify", seed, &[("format", "map-csv".to_string())])?;
        }
    }
    Ok(())
}

fn score_cmd(args: &ScoreArgs, seed: u64) -> Result<()> {
    let predictions = io::read_labels_csv(&args.pred)?;
    let truth = io::read_dataset_auto(&args.truth)?;
    let cm = classify::confusion(&predictions, &truth.labels, truth.class_count())?;
    io::write_confusion_csv(&args.output, &cm, &truth.class_names)?;
    write_sidecar(
        &args.output,
        "score",
        seed,
        &[
            ("pred", args.pred.display().to_string()),
            ("truth", args.truth.display().to_string()),
        ],
    )?;

    let mut scores: Vec<(String, f64)> = vec![
        ("overall_accuracy".to_string(), cm.overall_accuracy()),
    ];
    for (i, pcc) in cm.per_class_pcc().iter().enumerate() {
        scores.push((format!("pcc_{}", truth.class_names[i]), *pcc));
    }
    if let (Some(halo_path), Some(map_path)) = (&args.halos, &args.map) {
        let halos = io::read_halos_csv(halo_path)?;
        let map = io::read_map_csv(map_path)?;
        let hs = classify::halo_scores(&map, &halos, args.clutter_class, args.detect_threshold)?;
        scores.push(("p_d".to_string(), hs.p_d));
        scores.push(("p_fa".to_string(), hs.p_fa));
        scores.push(("pcc_clutter_map".to_string(), hs.clutter_pcc));
        for (class, pcc) in hs.per_class_pcc {
            scores.push((format!("pcc_halo_class{class}"), pcc));
        }
    }
    if let Some(score_path) = &args.scores {
        io::write_scores_csv(score_path, &scores)?;
        write_sidecar(score_path, "score", seed, &[])?;
    }
    for (name, value) in &scores {
        println!("{name}: {value:.4}");
    }
    Ok(())
}

fn report_cmd(args: &ReportArgs) -> Result<()> {
    if args.confusion.is_none() && args.scores.is_none() && args.timing.is_none() {
        bail!("report needs at least one of --confusion, --scores, --timing");
    }
    if let Some(path) = &args.confusion {
        let (cm, names) = io::read_confusion_csv(path)?;
        print!("{}", render::confusion_table(&cm, &names));
    }
    if let Some(path) = &args.scores {
        let scores = io::read_scores_csv(path)?;
        print!("{}", render::score_table(&scores));
    }
    if let Some(path) = &args.timing {
        let rows = io::read_timing_csv(path)?;
        print!("{}", render::timing_table(&rows));
    }
    Ok(())
}

fn parse_sizes(text: &str) -> Result<Vec<(usize, usize)>> {
    text.split(';')
        .map(|item| {
            let (l, k) = item
                .trim()
                .split_once('x')
                .ok_or_else(|| anyhow!("bad size '{item}' (expected LxK)"))?;
            Ok((
                l.trim().parse::<usize>().context("bad L")?,
                k.trim().parse::<usize>().context("bad K")?,
            ))
        })
        .collect()
}

fn bench_cmd(args: &BenchArgs, seed: u64) -> Result<()> {
    let dataset = io::read_dataset_auto(&args.input)?;
    let algorithms: Vec<DlAlgorithm> = args
        .algos
        .split(',')
        .map(|a| a.trim().parse::<DlAlgorithm>().map_err(anyhow::Error::from))
        .collect::<Result<_>>()?;
    let sizes = match &args.sizes {
        Some(text) => parse_sizes(text)?,
        None => vec![(dataset.column_count(), args.learn.atoms)],
    };
    let config = args.learn.config(seed);
    let rows = dl::complexity_probe(dataset.data.view(), &algorithms, &sizes, &config)?;
    io::write_timing_csv(&args.output, &rows)?;
    write_sidecar(
        &args.output,
        "bench",
        seed,
        &[
            ("input", args.input.display().to_string()),
            ("algos", args.algos.clone()),
            ("sizes", format!("{sizes:?}")),
        ],
    )?;
    print!("{}", render::timing_table(&rows));
    Ok(())
}
