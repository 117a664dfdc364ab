//! `snnq` command line: synthesize, train, evaluate, export, check gradients
//! and sweep bit widths.
//!
//! Settings resolve in three layers: built-in defaults, an optional
//! `key = value` file (`--config`, `#` starts a comment), then command-line
//! flags and `--set key=value`. The resolved settings are logged to stderr
//! before every run.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{
    gen_synthetic, read_event_file, split, to_frames, write_event_file, EventStream, FrameTensor,
    SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::model_io::{
    compression_ratio, export_quantized, import_quantized, load_checkpoint, model_size_bytes,
    save_checkpoint_with, CheckpointMeta, CHECKPOINT_MAGIC, QUANT_MAGIC,
};
use crate::network::{build_network, presets::preset, Network};
use crate::quantizer::{temperature_at, Precision};
use crate::trainer::{evaluate, gradcheck, train_with, TrainConfig};

pub const SWEEP_BITS: [u32; 5] = [32, 8, 4, 2, 1];
pub const SWEEP_CSV_HEADER: &str = "bits,train_acc,test_acc,model_bytes,compression_ratio";

/// Every setting the CLI understands.
#[derive(Clone, Debug, PartialEq)]
pub struct CliConfig {
    pub preset: String,
    pub bits: u32,
    pub timesteps: usize,
    pub init_seed: u64,
    pub train: TrainConfig,
    pub classes: usize,
    pub samples_per_class: usize,
    pub height: u16,
    pub width: u16,
    pub events_per_sample: usize,
    pub noise_rate: f64,
    pub duration_us: u32,
    pub data_seed: u64,
    pub test_fraction: f64,
    pub data: Option<PathBuf>,
    pub out: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub h: f64,
    pub threshold: f64,
    pub threads: usize,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            preset: "desk-tiny".into(),
            bits: 32,
            timesteps: 10,
            init_seed: 3,
            train: TrainConfig {
                epochs: 50,
                ..TrainConfig::default()
            },
            classes: 3,
            samples_per_class: 250,
            height: 16,
            width: 16,
            events_per_sample: 600,
            noise_rate: 0.1,
            duration_us: 100_000,
            data_seed: 1,
            test_fraction: 0.2,
            data: None,
            out: PathBuf::from("out"),
            checkpoint: None,
            model: None,
            metrics: None,
            h: 1e-6,
            threshold: 1e-3,
            threads: 0,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "preset",
    "bits",
    "timesteps",
    "init_seed",
    "epochs",
    "lr0",
    "t_max",
    "batch_size",
    "seed",
    "t0",
    "rate",
    "classes",
    "samples_per_class",
    "height",
    "width",
    "events_per_sample",
    "noise_rate",
    "duration_us",
    "data_seed",
    "test_fraction",
    "data",
    "out",
    "checkpoint",
    "model",
    "metrics",
    "h",
    "threshold",
    "threads",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default()
}

impl CliConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "preset" => self.preset = v.to_string(),
            "bits" => {
                let bits: u32 = parse(key, v)?;
                Precision::from_bits(bits).map_err(|e| Error::Config(format!("bits: {e}")))?;
                self.bits = bits;
            }
            "timesteps" => self.timesteps = parse(key, v)?,
            "init_seed" => self.init_seed = parse(key, v)?,
            "epochs" => self.train.epochs = parse(key, v)?,
            "lr0" => self.train.lr0 = parse(key, v)?,
            "t_max" => self.train.t_max = parse(key, v)?,
            "batch_size" => self.train.batch_size = parse(key, v)?,
            "seed" => self.train.seed = parse(key, v)?,
            "t0" => self.train.t0 = parse(key, v)?,
            "rate" => self.train.rate = parse(key, v)?,
            "classes" => self.classes = parse(key, v)?,
            "samples_per_class" => self.samples_per_class = parse(key, v)?,
            "height" => self.height = parse(key, v)?,
            "width" => self.width = parse(key, v)?,
            "events_per_sample" => self.events_per_sample = parse(key, v)?,
            "noise_rate" => self.noise_rate = parse(key, v)?,
            "duration_us" => self.duration_us = parse(key, v)?,
            "data_seed" => self.data_seed = parse(key, v)?,
            "test_fraction" => self.test_fraction = parse(key, v)?,
            "data" => self.data = opt_path(v),
            "out" => self.out = PathBuf::from(v),
            "checkpoint" => self.checkpoint = opt_path(v),
            "model" => self.model = opt_path(v),
            "metrics" => self.metrics = opt_path(v),
            "h" => self.h = parse(key, v)?,
            "threshold" => self.threshold = parse(key, v)?,
            "threads" => self.threads = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a `key = value` document.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v).map_err(|e| {
                Error::Config(format!(
                    "line {}: {}",
                    n + 1,
                    e.to_string().trim_start_matches("config: ")
                ))
            })?;
        }
        Ok(())
    }

    pub fn entries(&self) -> BTreeMap<&'static str, String> {
        let t = &self.train;
        let mut m = BTreeMap::new();
        m.insert("preset", self.preset.clone());
        m.insert("bits", self.bits.to_string());
        m.insert("timesteps", self.timesteps.to_string());
        m.insert("init_seed", self.init_seed.to_string());
        m.insert("epochs", t.epochs.to_string());
        m.insert("lr0", t.lr0.to_string());
        m.insert("t_max", t.t_max.to_string());
        m.insert("batch_size", t.batch_size.to_string());
        m.insert("seed", t.seed.to_string());
        m.insert("t0", t.t0.to_string());
        m.insert("rate", t.rate.to_string());
        m.insert("classes", self.classes.to_string());
        m.insert("samples_per_class", self.samples_per_class.to_string());
        m.insert("height", self.height.to_string());
        m.insert("width", self.width.to_string());
        m.insert("events_per_sample", self.events_per_sample.to_string());
        m.insert("noise_rate", self.noise_rate.to_string());
        m.insert("duration_us", self.duration_us.to_string());
        m.insert("data_seed", self.data_seed.to_string());
        m.insert("test_fraction", self.test_fraction.to_string());
        m.insert("data", show_path(&self.data));
        m.insert("out", self.out.display().to_string());
        m.insert("checkpoint", show_path(&self.checkpoint));
        m.insert("model", show_path(&self.model));
        m.insert("metrics", show_path(&self.metrics));
        m.insert("h", self.h.to_string());
        m.insert("threshold", self.threshold.to_string());
        m.insert("threads", self.threads.to_string());
        m
    }

    /// Resolved settings as a `key = value` document that [`apply_text`]
    /// accepts.
    ///
    /// [`apply_text`]: Self::apply_text
    pub fn render(&self) -> String {
        self.entries()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        let mut s = SyntheticSpec::moving_bars(self.classes, self.samples_per_class);
        s.height = self.height;
        s.width = self.width;
        s.events_per_sample = self.events_per_sample;
        s.noise_rate = self.noise_rate;
        s.duration_us = self.duration_us;
        s
    }

    pub fn network(&self, bits: u32) -> Result<Network> {
        let spec = preset(&self.preset)?
            .with_precision(Precision::from_bits(bits)?)
            .with_timesteps(self.timesteps);
        build_network(spec, self.init_seed)
    }

    fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.out.join("model.snnc"))
    }

    fn model_path(&self) -> PathBuf {
        self.model
            .clone()
            .unwrap_or_else(|| self.out.join("model.snnq"))
    }

    fn metrics_path(&self) -> PathBuf {
        self.metrics
            .clone()
            .unwrap_or_else(|| self.out.join("metrics.csv"))
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "snnq",
    version,
    about = "Quantization-aware training for spiking neural networks"
)]
struct Cli {
    /// key = value settings file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override any setting; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Flags {
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    lr0: Option<f64>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    samples_per_class: Option<usize>,
    /// Directory of event files; synthetic data is generated when absent
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    metrics: Option<PathBuf>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let mut push = |k: &'static str, val: Option<String>| {
            if let Some(val) = val {
                v.push((k, val));
            }
        };
        let p = |x: &Option<PathBuf>| x.as_ref().map(|p| p.display().to_string());
        push("preset", self.preset.clone());
        push("bits", self.bits.map(|x| x.to_string()));
        push("seed", self.seed.map(|x| x.to_string()));
        push("epochs", self.epochs.map(|x| x.to_string()));
        push("rate", self.rate.map(|x| x.to_string()));
        push("lr0", self.lr0.map(|x| x.to_string()));
        push("classes", self.classes.map(|x| x.to_string()));
        push(
            "samples_per_class",
            self.samples_per_class.map(|x| x.to_string()),
        );
        push("data", p(&self.data));
        push("out", p(&self.out));
        push("checkpoint", p(&self.checkpoint));
        push("model", p(&self.model));
        push("metrics", p(&self.metrics));
        v
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic event dataset, one file per sample
    Synth(Flags),
    /// Train, then write a checkpoint and a metrics CSV
    Train(Flags),
    /// Accuracy of a checkpoint or quantized model on the test split
    Eval(Flags),
    /// Pack a low-bit checkpoint into a quantized model file
    Export(Flags),
    /// Load a quantized model and evaluate it
    ImportEval(Flags),
    /// Finite-difference check of the BPTT gradients
    Gradcheck(Flags),
    /// Train at 32, 8, 4, 2 and 1 bits; CSV of accuracy and compression
    SweepBits(Flags),
}

/// Runs the CLI and returns the process exit code: 0 on success, 2 for
/// usage or configuration errors, 1 for runtime failures.
pub fn dispatch<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => 2,
                _ => 1,
            }
        }
    }
}

fn resolve(cli: &Cli, flags: &Flags) -> Result<CliConfig> {
    let mut cfg = CliConfig::default();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        cfg.apply_text(&text).map_err(|e| {
            Error::Config(format!(
                "{}: {}",
                path.display(),
                e.to_string().trim_start_matches("config: ")
            ))
        })?;
    }
    for (k, v) in flags.pairs() {
        cfg.set(k, &v)?;
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k, v)?;
    }
    Ok(cfg)
}

fn init_threads(cfg: &CliConfig) -> Result<()> {
    let env =
        match std::env::var("SNNQ_THREADS") {
            Ok(v) if !v.trim().is_empty() => Some(v.trim().parse::<usize>().map_err(|_| {
                Error::Config(format!("SNNQ_THREADS must be an integer, got `{v}`"))
            })?),
            _ => None,
        };
    let n = match (env, cfg.threads) {
        (Some(e), 0) => e,
        (Some(e), c) => e.min(c),
        (None, c) => c,
    };
    if n > 0 {
        // fails only if a pool already exists, e.g. on a second in-process run
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let flags = match &cli.command {
        Command::Synth(f)
        | Command::Train(f)
        | Command::Eval(f)
        | Command::Export(f)
        | Command::ImportEval(f)
        | Command::Gradcheck(f)
        | Command::SweepBits(f) => f,
    };
    let cfg = resolve(&cli, flags)?;
    init_threads(&cfg)?;
    eprint!("# resolved config\n{}", cfg.render());
    match &cli.command {
        Command::Synth(_) => cmd_synth(&cfg),
        Command::Train(_) => cmd_train(&cfg),
        Command::Eval(_) => cmd_eval(&cfg),
        Command::Export(_) => cmd_export(&cfg),
        Command::ImportEval(_) => cmd_import_eval(&cfg),
        Command::Gradcheck(_) => cmd_gradcheck(&cfg),
        Command::SweepBits(_) => cmd_sweep(&cfg),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    crate::model_io::write_atomic(path, text.as_bytes())
}

/// Event file name for sample `index` of class `label`.
pub fn event_file_name(index: usize, label: usize) -> String {
    format!("sample_{index:05}_c{label}.aer")
}

/// Reads every `.aer` file of a directory in name order; labels come from
/// the file headers.
pub fn read_event_dir(dir: &Path) -> Result<Vec<(EventStream, usize)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "aer"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::EmptyDataset);
    }
    paths
        .iter()
        .map(|p| {
            let s = read_event_file(p)?;
            let label = s.label as usize;
            Ok((s, label))
        })
        .collect()
}

fn dataset(cfg: &CliConfig) -> Result<(Vec<FrameTensor>, Vec<FrameTensor>)> {
    let streams = match &cfg.data {
        Some(dir) => read_event_dir(dir)?,
        None => gen_synthetic(&cfg.synthetic_spec(), cfg.data_seed)?,
    };
    let (train, test) = split(&streams, cfg.test_fraction, cfg.data_seed.wrapping_add(1))?;
    Ok((
        to_frames(&train, cfg.timesteps)?,
        to_frames(&test, cfg.timesteps)?,
    ))
}

fn cmd_synth(cfg: &CliConfig) -> Result<()> {
    let streams = gen_synthetic(&cfg.synthetic_spec(), cfg.data_seed)?;
    create_dir(&cfg.out)?;
    for (i, (s, label)) in streams.iter().enumerate() {
        write_event_file(cfg.out.join(event_file_name(i, *label)), s)?;
    }
    println!(
        "wrote {} event files ({} classes) to {}",
        streams.len(),
        cfg.classes,
        cfg.out.display()
    );
    Ok(())
}

/// Trains one network from the resolved settings.
pub fn train_network(
    cfg: &CliConfig,
    bits: u32,
    train_set: &[FrameTensor],
    test_set: &[FrameTensor],
) -> Result<(Network, crate::trainer::TrainHistory)> {
    let mut net = cfg.network(bits)?;
    let history = train_with(&mut net, train_set, test_set, &cfg.train, |r| {
        eprintln!(
            "epoch {:>3} lr {:.3e} T {:.1} loss {:.5} train {:.4} test {:.4}",
            r.epoch, r.lr, r.temperature, r.train_loss, r.train_acc, r.test_acc
        )
    })?;
    Ok((net, history))
}

fn cmd_train(cfg: &CliConfig) -> Result<()> {
    let (train_set, test_set) = dataset(cfg)?;
    let (net, history) = train_network(cfg, cfg.bits, &train_set, &test_set)?;
    let ckpt = cfg.checkpoint_path();
    create_parent(&ckpt)?;
    let meta = CheckpointMeta {
        epoch: cfg.train.epochs as u64,
        temperature: history.last().map_or(0.0, |r| r.temperature),
        seed: cfg.train.seed,
    };
    save_checkpoint_with(&net, &meta, &ckpt)?;
    let metrics = cfg.metrics_path();
    write_text(&metrics, &history.to_csv())?;
    let last = history.last();
    println!(
        "trained {}-bit {}: train {:.4} test {:.4}; checkpoint {} metrics {}",
        cfg.bits,
        cfg.preset,
        last.map_or(0.0, |r| r.train_acc),
        last.map_or(0.0, |r| r.test_acc),
        ckpt.display(),
        metrics.display()
    );
    Ok(())
}

/// Loads a checkpoint or a quantized model, telling them apart by magic.
pub fn load_any(path: &Path) -> Result<Network> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match bytes.get(..4) {
        Some(m) if m == QUANT_MAGIC => import_quantized(path),
        Some(m) if m == CHECKPOINT_MAGIC => load_checkpoint(path),
        _ => Err(Error::Corrupt(format!(
            "{} is neither a checkpoint nor a quantized model",
            path.display()
        ))),
    }
}

fn cmd_eval(cfg: &CliConfig) -> Result<()> {
    let path = cfg.model.clone().unwrap_or_else(|| cfg.checkpoint_path());
    let net = load_any(&path)?;
    let (_, test_set) = dataset(cfg)?;
    let acc = evaluate(&net, &test_set)?;
    println!(
        "{}: test accuracy {acc:.4} on {} samples",
        path.display(),
        test_set.len()
    );
    Ok(())
}

fn cmd_export(cfg: &CliConfig) -> Result<()> {
    let net = load_checkpoint(cfg.checkpoint_path())?;
    let path = cfg.model_path();
    create_parent(&path)?;
    let s = export_quantized(&net, &path)?;
    println!(
        "exported {}-bit model to {}: {} bytes, compression ratio {:.2}",
        net.spec().precision.bits(),
        path.display(),
        s.bytes,
        s.compression_ratio
    );
    Ok(())
}

fn cmd_import_eval(cfg: &CliConfig) -> Result<()> {
    let path = cfg.model_path();
    let imported = import_quantized(&path)?;
    let (_, test_set) = dataset(cfg)?;
    let acc = evaluate(&imported, &test_set)?;
    println!(
        "{}: test accuracy {acc:.4} on {} samples",
        path.display(),
        test_set.len()
    );
    let ckpt = cfg.checkpoint_path();
    if ckpt.exists() {
        let original = load_checkpoint(&ckpt)?;
        let mut mismatches = 0;
        for f in &test_set {
            if original.predict(f)? != imported.predict(f)? {
                mismatches += 1;
            }
        }
        println!(
            "prediction mismatches against {}: {mismatches}",
            ckpt.display()
        );
        if mismatches > 0 {
            return Err(Error::Corrupt(format!(
                "{mismatches} predictions differ from the checkpoint"
            )));
        }
    }
    Ok(())
}

fn cmd_gradcheck(cfg: &CliConfig) -> Result<()> {
    let mut net = cfg.network(cfg.bits)?;
    net.set_temperature(temperature_at(0, cfg.train.t0, cfg.train.rate)?)?;
    let sample = match cfg.data {
        Some(_) => dataset(cfg)?.0.swap_remove(0),
        None => {
            // One synthetic sample sized to the network input.
            let input = net.spec().input;
            let mut spec = cfg.synthetic_spec();
            let bars = SyntheticSpec::moving_bars(net.n_classes().max(2), 1);
            spec.n_classes = bars.n_classes;
            spec.samples_per_class = 1;
            spec.patterns = bars.patterns;
            spec.height = input.height as u16;
            spec.width = input.width as u16;
            let streams = gen_synthetic(&spec, cfg.data_seed)?;
            to_frames(&streams[..1], cfg.timesteps)?.swap_remove(0)
        }
    };
    let r = gradcheck(&net, &sample, cfg.h, cfg.threshold)?;
    println!(
        "checked {} parameters: max relative error {:.3e} at {}, flip fraction {:.4}, {} over {:.1e}",
        r.checked,
        r.max_rel_err,
        r.worst_coordinate.map(|c| c.to_string()).unwrap_or_else(|| "-".into()),
        r.flip_fraction,
        r.over_threshold,
        r.threshold
    );
    if r.over_threshold > 0 {
        return Err(Error::InvalidParam(format!(
            "{} coordinates exceed relative error {}",
            r.over_threshold, r.threshold
        )));
    }
    Ok(())
}

fn cmd_sweep(cfg: &CliConfig) -> Result<()> {
    let (train_set, test_set) = dataset(cfg)?;
    let mut csv = String::from(SWEEP_CSV_HEADER);
    csv.push('\n');
    for bits in SWEEP_BITS {
        eprintln!("# {bits}-bit");
        let (net, history) = train_network(cfg, bits, &train_set, &test_set)?;
        let last = history.last();
        csv.push_str(&format!(
            "{bits},{},{},{},{}\n",
            last.map_or(0.0, |r| r.train_acc),
            last.map_or(0.0, |r| r.test_acc),
            model_size_bytes(&net, bits)?,
            compression_ratio(&net, bits)?
        ));
    }
    let path = cfg.out.join("sweep_bits.csv");
    write_text(&path, &csv)?;
    print!("{csv}");
    Ok(())
}
