//! Subcommand front end: dataset generation, training, sampling, and the
//! evaluation harnesses. Every run writes a manifest next to its outputs
//! that is sufficient to reproduce it.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use genplanner::dataset::{build_dataset, read_dataset, write_dataset};
use genplanner::eval::{
    conditioning_ablation, evaluate, steps_sweep, table_header, CondConfig,
    EvalReport,
};
use genplanner::render::{render, render_ground_truth, DEFAULT_SCALE};
use genplanner::sample::{ddim_sample, euler_sample, SampleTrace};
use genplanner::train::{train, TrainConfig};
use genplanner::{load_checkpoint, save_checkpoint, NetConfig, PlannerError, Variant};
use genplanner_core::{binarize, encode_condition, make_schedule, DatasetConfig, MazeInstance};

#[derive(Parser)]
#[command(name = "genplanner", version, about = "Generative path planning on grid mazes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a maze dataset file
    GenData(GenDataArgs),
    /// Train a model and write a checkpoint
    Train(TrainArgs),
    /// Sample one plan from a checkpoint and render it
    Sample(SampleArgs),
    /// Evaluate a checkpoint on a dataset's eval split
    Eval(EvalArgs),
    /// Evaluate across a list of sampling step counts
    Sweep(SweepArgs),
    /// Train and evaluate across conditioning-channel subsets
    Ablate(AblateArgs),
}

#[derive(Args, Serialize)]
struct GenDataArgs {
    /// Grid side length
    #[arg(long)]
    size: usize,
    /// Train split size
    #[arg(long)]
    train: usize,
    /// Eval split size
    #[arg(long)]
    eval: usize,
    /// Minimum shortest-path edge length
    #[arg(long = "min-path-len", default_value_t = 1)]
    min_path_len: usize,
    /// Independent wall probability per cell
    #[arg(long = "wall-prob", default_value_t = 0.15)]
    wall_prob: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset path (.gpln)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    /// Model variant: diff, flow, or cnn
    #[arg(long, value_parser = parse_variant)]
    variant: Variant,
    /// Input dataset (.gpln)
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 2e-4)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// U-Net base channel count
    #[arg(long = "base-channels")]
    base_channels: Option<usize>,
    /// U-Net depth (downsampling levels)
    #[arg(long)]
    depth: Option<usize>,
    /// Diffusion schedule length
    #[arg(long = "schedule-t", default_value_t = 1000)]
    schedule_t: usize,
    /// Output checkpoint path (.gpck)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct SampleArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset providing the maze to plan in
    #[arg(long)]
    data: PathBuf,
    /// Index into the dataset's eval split
    #[arg(long = "maze-index", default_value_t = 0)]
    maze_index: usize,
    #[arg(long, default_value_t = 50)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the per-step clean-sample estimates as frames
    #[arg(long = "dump-intermediates", default_value_t = false)]
    dump_intermediates: bool,
    /// Output image path (.png)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 50)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output report path (.json)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct SweepArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated step counts, e.g. 50,30,20,10,5,1
    #[arg(long, value_delimiter = ',', default_value = "50,30,20,10,5,1")]
    steps: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct AblateArgs {
    /// Model variant to ablate
    #[arg(long, value_parser = parse_variant, default_value = "flow")]
    variant: Variant,
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated channel subsets from {none,startend,walls,full}
    #[arg(long, value_delimiter = ',', default_value = "none,startend,walls,full")]
    channels: Vec<String>,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 2e-4)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "base-channels")]
    base_channels: Option<usize>,
    #[arg(long, default_value_t = 50)]
    steps: usize,
    #[arg(long = "schedule-t", default_value_t = 1000)]
    schedule_t: usize,
    #[arg(long)]
    out: PathBuf,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::from_tag(s).ok_or_else(|| format!("unknown variant '{s}' (expected diff, flow, or cnn)"))
}

#[derive(Serialize)]
struct RunManifest<'a, C: Serialize> {
    subcommand: &'a str,
    tool_version: &'a str,
    config: &'a C,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

fn write_manifest<C: Serialize>(
    subcommand: &str,
    config: &C,
    inputs: &[&Path],
    outputs: &[&Path],
) -> Result<(), PlannerError> {
    let primary = outputs
        .first()
        .expect("every subcommand has at least one output");
    let manifest = RunManifest {
        subcommand,
        tool_version: env!("CARGO_PKG_VERSION"),
        config,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    let mut name = primary.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    let path = primary.with_file_name(name);
    let body = serde_json::to_vec_pretty(&manifest)?;
    std::fs::write(path, body)?;
    Ok(())
}

fn cmd_gen_data(args: &GenDataArgs) -> Result<(), PlannerError> {
    let config = DatasetConfig {
        grid_size: args.size,
        train_count: args.train,
        eval_count: args.eval,
        min_path_len: args.min_path_len,
        wall_prob: args.wall_prob,
        seed: args.seed,
    };
    let ds = build_dataset(&config)?;
    write_dataset(&ds, &args.out)?;
    write_manifest("gen-data", args, &[], &[&args.out])?;
    println!(
        "wrote {} ({} train / {} eval, {}x{})",
        args.out.display(),
        ds.train().len(),
        ds.eval().len(),
        ds.height,
        ds.width
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train_config_from(
    variant: Variant,
    grid_size: usize,
    epochs: usize,
    batch: usize,
    lr: f64,
    seed: u64,
    base_channels: Option<usize>,
    depth: Option<usize>,
    schedule_t: usize,
) -> TrainConfig {
    let mut net = NetConfig::with_defaults(grid_size, variant);
    if let Some(b) = base_channels {
        net.base_channels = b;
    }
    if let Some(d) = depth {
        net.depth = d;
    }
    let mut tc = TrainConfig::with_defaults(net);
    tc.epochs = epochs;
    tc.batch_size = batch;
    tc.learning_rate = lr;
    tc.seed = seed;
    tc.schedule_t = schedule_t;
    tc
}

fn cmd_train(args: &TrainArgs) -> Result<(), PlannerError> {
    let ds = read_dataset(&args.data)?;
    let tc = train_config_from(
        args.variant,
        ds.height,
        args.epochs,
        args.batch,
        args.lr,
        args.seed,
        args.base_channels,
        args.depth,
        args.schedule_t,
    );
    let (params, trace) = train(&tc, &ds)?;
    save_checkpoint(&params, &args.out)?;

    let mut loss_name = args.out.file_name().unwrap_or_default().to_os_string();
    loss_name.push(".loss.json");
    let loss_path = args.out.with_file_name(loss_name);
    std::fs::write(&loss_path, serde_json::to_vec_pretty(&trace)?)?;

    write_manifest("train", args, &[&args.data], &[&args.out, &loss_path])?;
    let last = trace.last().map(|s| s.mean_loss).unwrap_or(f64::NAN);
    println!(
        "trained {} for {} epochs (final loss {last:.6}) -> {}",
        args.variant.tag(),
        args.epochs,
        args.out.display()
    );
    Ok(())
}

fn pick_instance(ds: &genplanner::dataset::Dataset, index: usize) -> Result<&MazeInstance, PlannerError> {
    ds.eval().get(index).ok_or_else(|| {
        PlannerError::Config(format!(
            "maze index {index} out of range (eval split has {})",
            ds.eval().len()
        ))
    })
}

fn cmd_sample(args: &SampleArgs) -> Result<(), PlannerError> {
    let params = load_checkpoint(&args.checkpoint)?;
    let ds = read_dataset(&args.data)?;
    let inst = pick_instance(&ds, args.maze_index)?;
    if inst.height() != params.config.grid_size {
        return Err(PlannerError::Config(format!(
            "dataset grid {} does not match model grid {}",
            inst.height(),
            params.config.grid_size
        )));
    }
    let c = encode_condition(inst);
    let record = args.dump_intermediates;
    let trace: SampleTrace = match params.config.variant {
        Variant::FlowVelocity => euler_sample(&params, &c, args.steps, args.seed, record)?,
        Variant::DiffusionEps => {
            let sched = make_schedule(1000)?;
            ddim_sample(&params, &c, args.steps, &sched, args.seed, record)?
        }
        Variant::Baseline => SampleTrace {
            final_state: genplanner::forward_baseline(&params, &c)?,
            intermediates: None,
        },
    };
    let mask = binarize(&trace.final_state)?;
    render(inst, &mask, DEFAULT_SCALE)
        .save(&args.out)
        .map_err(|e| PlannerError::Io(std::io::Error::other(e)))?;

    let mut outputs: Vec<PathBuf> = vec![args.out.clone()];

    // Ground-truth reference image next to the generation.
    let mut gt_name = args.out.file_stem().unwrap_or_default().to_os_string();
    gt_name.push("_truth.png");
    let gt_path = args.out.with_file_name(gt_name);
    render_ground_truth(inst, DEFAULT_SCALE)
        .save(&gt_path)
        .map_err(|e| PlannerError::Io(std::io::Error::other(e)))?;
    outputs.push(gt_path);

    if let Some(frames) = &trace.intermediates {
        for (k, (_t, est)) in frames.iter().enumerate() {
            let frame_mask = binarize(est)?;
            let mut name = args.out.file_stem().unwrap_or_default().to_os_string();
            name.push(format!("_frame{k:03}.png"));
            let path = args.out.with_file_name(name);
            render(inst, &frame_mask, DEFAULT_SCALE)
                .save(&path)
                .map_err(|e| PlannerError::Io(std::io::Error::other(e)))?;
            outputs.push(path);
        }
    }
    let out_refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    write_manifest(
        "sample",
        args,
        &[&args.checkpoint, &args.data],
        &out_refs,
    )?;
    let row = genplanner::eval::score_mask(&mask, inst);
    println!(
        "sampled maze {} ({} steps): valid={} single={} -> {}",
        args.maze_index,
        args.steps,
        row.valid,
        row.single,
        args.out.display()
    );
    Ok(())
}

fn print_reports(reports: &[EvalReport]) {
    println!("{}", table_header());
    for r in reports {
        println!("{}", r.table_line());
    }
}

fn cmd_eval(args: &EvalArgs) -> Result<(), PlannerError> {
    let params = load_checkpoint(&args.checkpoint)?;
    let ds = read_dataset(&args.data)?;
    let report = evaluate(&params, ds.eval(), args.steps, 1000, args.seed)?;
    std::fs::write(&args.out, serde_json::to_vec_pretty(&report)?)?;
    write_manifest("eval", args, &[&args.checkpoint, &args.data], &[&args.out])?;
    print_reports(std::slice::from_ref(&report));
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), PlannerError> {
    if args.steps.is_empty() {
        return Err(PlannerError::Config("step list is empty".into()));
    }
    let params = load_checkpoint(&args.checkpoint)?;
    let ds = read_dataset(&args.data)?;
    let reports = steps_sweep(&params, ds.eval(), &args.steps, 1000, args.seed)?;
    std::fs::write(&args.out, serde_json::to_vec_pretty(&reports)?)?;
    write_manifest("sweep", args, &[&args.checkpoint, &args.data], &[&args.out])?;
    print_reports(&reports);
    Ok(())
}

fn cmd_ablate(args: &AblateArgs) -> Result<(), PlannerError> {
    let configs: Vec<CondConfig> = args
        .channels
        .iter()
        .map(|s| {
            CondConfig::from_label(s).ok_or_else(|| {
                PlannerError::Config(format!(
                    "unknown channel subset '{s}' (expected none, startend, walls, or full)"
                ))
            })
        })
        .collect::<Result<_, _>>()?;
    let ds = read_dataset(&args.data)?;
    let tc = train_config_from(
        args.variant,
        ds.height,
        args.epochs,
        args.batch,
        args.lr,
        args.seed,
        args.base_channels,
        None,
        args.schedule_t,
    );
    let results = conditioning_ablation(&tc, &ds, &configs, args.steps, args.seed)?;
    let reports: Vec<&EvalReport> = results.iter().map(|(_, r)| r).collect();
    let owned: Vec<EvalReport> = reports.iter().map(|r| (*r).clone()).collect();
    std::fs::write(&args.out, serde_json::to_vec_pretty(&owned)?)?;
    write_manifest("ablate", args, &[&args.data], &[&args.out])?;
    print_reports(&owned);
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), PlannerError> {
    match &cli.command {
        Command::GenData(a) => cmd_gen_data(a),
        Command::Train(a) => cmd_train(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Ablate(a) => cmd_ablate(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                PlannerError::Numerical(_) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}
