use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sarcnn::cnn::{evaluate_indices, Hyper, TrainConfig};
use sarcnn::datasets::{
    gen_count_dataset, gen_multiscatterer_dataset, gen_radius_dataset, gen_shape_dataset, ice_class_counts,
    load_checkpoint, load_dataset, load_ice_dataset, save_checkpoint, save_dataset, shape_for_label,
    synthetic_textures, write_pgm, GrayImage, LabeledDataset, Mode, SimConfig, Task,
};
use sarcnn::harness::{
    percent, run_ice, run_multiscatterer_sweep, run_radius_and_count, run_shape_comparison, run_texture_standin,
    train_and_test, ExperimentConfig, Scale, MULTI_RADII, STANDIN_PER_CLASS, STANDIN_SIZE,
};
use sarcnn::{Error, Result};

#[derive(Parser)]
#[command(name = "sarcnn", version, about = "Circular SAR simulation and CNN classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SimArgs {
    /// Use the fixed fast-time interval [5, 23] instead of the geometric one.
    #[arg(long)]
    paper_times: bool,
    /// Feed raw data to the network without per-sample min-max scaling.
    #[arg(long)]
    no_normalize: bool,
    /// Backprojection tolerance.
    #[arg(long, default_value_t = 0.1)]
    tol: f64,
}

impl SimArgs {
    fn config(&self) -> SimConfig {
        SimConfig {
            paper_times: self.paper_times,
            normalize_raw: !self.no_normalize,
            tolerance: self.tol,
            ..SimConfig::default()
        }
    }
}

#[derive(Args, Clone)]
struct TrainArgs {
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    adam_eps: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1)]
    validate_every: usize,
    /// Keep the last epoch instead of the best-validation one.
    #[arg(long)]
    last_epoch: bool,
}

impl TrainArgs {
    fn config(&self, epochs: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            adam_beta1: self.beta1,
            adam_beta2: self.beta2,
            adam_epsilon: self.adam_eps,
            batch_size: self.batch_size,
            max_epochs: epochs,
            seed,
            validate_every: self.validate_every,
            keep_best: !self.last_epoch,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GenTask {
    Shape,
    Multi,
    Radius,
    Count,
    Ice,
    Textures,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Raw,
    Backprojected,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Raw => Mode::Raw,
            ModeArg::Backprojected => Mode::Backprojected,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Shapes,
    Multi,
    RadiusCount,
    Ice,
    IceStandin,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Validation,
    Test,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset and write it as a SARD container.
    GenDataset {
        #[arg(long, value_enum)]
        task: GenTask,
        #[arg(long, default_value_t = 5.0)]
        height: f64,
        #[arg(long, value_enum, default_value = "raw")]
        mode: ModeArg,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Samples per class (default depends on the task and scale).
        #[arg(long)]
        n_per_class: Option<usize>,
        /// Total samples for the count task.
        #[arg(long)]
        n_total: Option<usize>,
        /// Bump radius for the multi task.
        #[arg(long, default_value_t = 2.0)]
        radius: f64,
        /// Ice image root (class directories 1..8).
        #[arg(long)]
        root: Option<PathBuf>,
        /// Texture side for the textures task.
        #[arg(long, default_value_t = 64)]
        size: usize,
        /// Use the original experiment sizes as defaults.
        #[arg(long)]
        paper_scale: bool,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a network on a SARD dataset; writes a checkpoint and a report.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Report file (printed to stdout when omitted).
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 13)]
        filter_size: usize,
        /// Number of filters (16 for ice, 1 otherwise by default).
        #[arg(long)]
        filters: Option<usize>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Evaluate a checkpoint on a dataset split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Run one of the experiments end to end.
    Experiment {
        #[arg(value_enum)]
        which: Experiment,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        paper_scale: bool,
        /// Heights for the shape comparison.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 5.0, 10.0])]
        heights: Vec<f64>,
        /// Radii for the multi-scatterer sweep.
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        /// Ice image root.
        #[arg(long)]
        root: Option<PathBuf>,
        /// Epoch override.
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Report file (printed to stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate one shape scene and write its raw data or image.
    Simulate {
        /// Shape label: 1 circle, 2 square, 3 ellipse, 4 rhombus.
        #[arg(long, default_value_t = 1)]
        label: u8,
        #[arg(long, value_delimiter = ',', default_values_t = vec![4.5, 4.5])]
        center: Vec<f64>,
        #[arg(long, default_value_t = 5.0)]
        height: f64,
        #[arg(long, value_enum, default_value = "raw")]
        mode: ModeArg,
        #[command(flatten)]
        sim: SimArgs,
        /// Output file; `.pgm` writes an image, anything else CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the number of images in each ice class directory.
    IceCounts {
        #[arg(long)]
        root: PathBuf,
    },
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn print_counts(d: &LabeledDataset) {
    let (a, b, c) = d.splits().sizes();
    println!("task = {}", d.task());
    println!("samples = {}", d.len());
    println!("input_size = {}", d.input_size());
    println!("splits = {a},{b},{c}");
    println!("class,count");
    for (k, n) in d.class_counts().iter().enumerate() {
        println!("{},{n}", k + 1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenDataset {
            task,
            height,
            mode,
            seed,
            n_per_class,
            n_total,
            radius,
            root,
            size,
            paper_scale,
            sim,
            out,
        } => {
            let scale = if paper_scale { Scale::full() } else { Scale::desk() };
            let cfg = sim.config();
            let d = match task {
                GenTask::Shape => gen_shape_dataset(
                    n_per_class.unwrap_or(scale.shape_per_class),
                    height,
                    mode.into(),
                    seed,
                    &cfg,
                )?,
                GenTask::Multi => {
                    gen_multiscatterer_dataset(radius, n_per_class.unwrap_or(scale.multi_per_class), seed, &cfg)?
                }
                GenTask::Radius => gen_radius_dataset(n_per_class.unwrap_or(scale.radius_per_class), seed, &cfg)?,
                GenTask::Count => gen_count_dataset(
                    n_total.or(n_per_class.map(|n| 3 * n)).unwrap_or(scale.count_total),
                    seed,
                    &cfg,
                )?,
                GenTask::Ice => {
                    let root = root.ok_or_else(|| Error::InvalidParameter("--root is required for ice".into()))?;
                    load_ice_dataset(&root, n_per_class.unwrap_or(scale.ice_per_class), seed)?
                }
                GenTask::Textures => synthetic_textures(n_per_class.unwrap_or(4), size, seed)?,
            };
            save_dataset(&out, &d)?;
            print_counts(&d);
            Ok(())
        }
        Command::Train {
            dataset,
            out,
            report,
            epochs,
            seed,
            filter_size,
            filters,
            train,
        } => {
            let started = Instant::now();
            let d = load_dataset(&dataset)?;
            let k = filters.unwrap_or(if d.task() == Task::Ice { 16 } else { 1 });
            let hyper = Hyper::new(d.input_size(), filter_size, k, d.class_count())?;
            let tc = train.config(epochs, seed);
            let config = vec![
                ("dataset".to_string(), dataset.display().to_string()),
                ("task".to_string(), d.task().to_string()),
                ("filters".to_string(), k.to_string()),
                ("filter_size".to_string(), filter_size.to_string()),
                ("learning_rate".to_string(), tc.learning_rate.to_string()),
                ("adam_beta1".to_string(), tc.adam_beta1.to_string()),
                ("adam_beta2".to_string(), tc.adam_beta2.to_string()),
                ("adam_epsilon".to_string(), tc.adam_epsilon.to_string()),
                ("batch_size".to_string(), tc.batch_size.to_string()),
                ("keep_best".to_string(), tc.keep_best.to_string()),
            ];
            let rep = train_and_test("train", &d, hyper, &tc, config, started)?;
            save_checkpoint(&out, &rep.params)?;
            write_text(report.as_deref(), &rep.render())
        }
        Command::Eval {
            checkpoint,
            dataset,
            split,
            seed,
        } => {
            let params = load_checkpoint(&checkpoint)?;
            let d = load_dataset(&dataset)?;
            let all: Vec<usize> = (0..d.len()).collect();
            let (name, idx) = match split {
                SplitArg::Train => ("train", &d.splits().train),
                SplitArg::Validation => ("validation", &d.splits().validation),
                SplitArg::Test => ("test", &d.splits().test),
                SplitArg::All => ("all", &all),
            };
            let cm = evaluate_indices(&params, &d, idx, seed)?;
            println!("[evaluation]");
            println!("checkpoint = {}", checkpoint.display());
            println!("dataset = {}", dataset.display());
            println!("split = {name}");
            println!("samples = {}", cm.total());
            println!("accuracy = {}", percent(cm.accuracy()));
            println!("\n[confusion]");
            print!("{}", cm.to_csv());
            Ok(())
        }
        Command::Experiment {
            which,
            seed,
            paper_scale,
            heights,
            radii,
            root,
            epochs,
            sim,
            train,
            out,
        } => {
            let mut scale = if paper_scale { Scale::full() } else { Scale::desk() };
            if let Some(e) = epochs {
                scale.epochs = e;
                scale.ice_epochs = e;
            }
            let cfg = ExperimentConfig {
                seed,
                scale,
                sim: sim.config(),
                train: train.config(scale.epochs, seed),
            };
            let text = match which {
                Experiment::Shapes => run_shape_comparison(&heights, &cfg)?.render(),
                Experiment::Multi => {
                    let radii = radii.unwrap_or_else(|| MULTI_RADII.to_vec());
                    run_multiscatterer_sweep(&radii, &cfg)?.render()
                }
                Experiment::RadiusCount => {
                    let (r, c) = run_radius_and_count(&cfg)?;
                    format!("{}\n{}", r.render(), c.render())
                }
                Experiment::Ice => {
                    let root = root.ok_or_else(|| {
                        Error::Dataset(
                            "the ice experiment needs --root pointing at the Sentinel-1 ice imagery \
                             (class directories 1..8); it is not bundled"
                                .into(),
                        )
                    })?;
                    run_ice(&root, &cfg)?.render()
                }
                Experiment::IceStandin => {
                    let (rep, train_acc) = run_texture_standin(STANDIN_PER_CLASS, STANDIN_SIZE, &cfg)?;
                    format!(
                        "{}\n[training_split]\naccuracy = {}\n",
                        rep.render(),
                        percent(train_acc)
                    )
                }
            };
            write_text(out.as_deref(), &text)
        }
        Command::Simulate {
            label,
            center,
            height,
            mode,
            sim,
            out,
        } => {
            if center.len() != 2 {
                return Err(Error::InvalidParameter("--center takes two values".into()));
            }
            let cfg = sim.config();
            let shape = shape_for_label(label, (center[0], center[1]))?;
            let mode: Mode = mode.into();
            let simulator = cfg.simulator(height)?;
            let values = simulator.input(&[shape], mode)?;
            let n = match mode {
                Mode::Raw => cfg.n_t,
                Mode::Backprojected => cfg.grid.n(),
            };
            let cols = values.len() / n;
            if out.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
                let mut px = values.clone();
                sarcnn::datasets::normalize_unit(&mut px);
                write_pgm(
                    &out,
                    &GrayImage {
                        width: cols,
                        height: n,
                        pixels: px,
                    },
                    255,
                )?;
            } else {
                let mut text = String::new();
                for row in values.chunks(cols) {
                    let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                    text.push_str(&line.join(","));
                    text.push('\n');
                }
                write_text(Some(&out), &text)?;
            }
            println!("wrote {}x{} {} to {}", n, cols, mode, out.display());
            Ok(())
        }
        Command::IceCounts { root } => {
            let counts = ice_class_counts(&root)?;
            println!("class,count");
            for (k, n) in counts.iter().enumerate() {
                println!("{},{n}", k + 1);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: kind={} message={msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}
