//! `sdelay` command line: every pipeline stage reads and writes files so the
//! stages can be chained, diffed and rerun deterministically.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use super::model_file::{load_model, save_model};
use super::records::{load_dataset, load_traces, save_dataset, save_log, save_traces};
use super::synthetic::{gen_synthetic, SyntheticTask};
use crate::delayq::{run_backend, Backend, BackendOptions, EventLog};
use crate::metrics::{
    compare_traces, cost_report, preset_report, scaling_sweep, sweep_csv, Preset, EVENT_BITS,
};
use crate::network::{NeuronParams, Raster, Readout};
use crate::train::{
    bptt_train, evaluate, finetune, init_model, prune_delays, quant_finetune, quantize, PruneMode,
    PruneSpec, PruneTarget, QuantSpec, TrainConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "sdelay",
    version,
    about = "Train delay-parameterized SNNs and run them on delay-queue models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a delayed-coincidence dataset.
    GenData(GenDataArgs),
    /// Initialise and train a model with surrogate-gradient BPTT.
    Train(TrainArgs),
    /// Prune delay synapses or axons.
    Prune(PruneArgs),
    /// Continue training the surviving synapses.
    Finetune(FinetuneArgs),
    /// Map weights to a deployment precision.
    Quantize(QuantizeArgs),
    /// Run a model on a dataset with one executor and record the traces.
    Sim(SimArgs),
    /// Measure the accuracy of a model on a labelled dataset.
    Eval(EvalArgs),
    /// Compare two trace files recorded on the same dataset.
    Compare(CompareArgs),
    /// Memory cost of the delay structures.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 32)]
    pub timesteps: usize,
    #[arg(long, value_delimiter = ',', default_value = "2,6,10")]
    pub lags: Vec<usize>,
    #[arg(long, default_value_t = 8)]
    pub tail: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
}

/// Training hyperparameters; flags override values from `--config`.
#[derive(Debug, Args)]
pub struct HyperArgs {
    /// JSON file with a full training configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl HyperArgs {
    fn config(&self) -> anyhow::Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(p) => serde_json::from_str(&read_text(p)?)
                .with_context(|| format!("parsing training config {}", p.display()))?,
            None => TrainConfig::default(),
        };
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.lr {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        Ok(cfg)
    }

    /// As [`HyperArgs::config`], with `--epochs` and `--lr` applied to the
    /// fine-tune stage.
    fn finetune_config(&self) -> anyhow::Result<TrainConfig> {
        let mut cfg = self.config()?;
        if let Some(e) = self.epochs {
            cfg.finetune_epochs = e;
        }
        if let Some(lr) = self.lr {
            cfg.finetune_learning_rate = lr;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Training log, one JSON record per epoch.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "8,8")]
    pub hidden: Vec<usize>,
    /// Output classes; defaults to the largest label plus one.
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.0)]
    pub threshold: f64,
    /// Hidden delay levels are `{0, stride, ...}` below this limit.
    #[arg(long)]
    pub delay_limit: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// Platform maximum delay; training fails if the delay set exceeds it.
    #[arg(long)]
    pub max_delay: Option<usize>,
    #[arg(long, value_enum, default_value_t = ReadoutArg::SpikeCount)]
    pub readout: ReadoutArg,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ReadoutArg {
    SpikeCount,
    MaxMembrane,
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Synapse)]
    pub mode: ModeArg,
    /// `K` levels (or axons per neuron in axonal mode), `per-neuron:K`,
    /// `count:N` or `fraction:F`.
    #[arg(long)]
    pub target: String,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Synapse,
    Axonal,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args)]
pub struct QuantizeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// float64, bf16 or int2..int8.
    #[arg(long)]
    pub scheme: String,
    /// Fine-tune on this labelled dataset with the forward pass running at
    /// the target precision, instead of rounding once after training.
    #[arg(long)]
    pub finetune: Option<PathBuf>,
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub backend: BackendArg,
    /// Trace file, one JSON trace per sample.
    #[arg(long)]
    pub trace: PathBuf,
    /// Per-connection delivery log in text form.
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Disable the zero-skipping filter of the circular queue.
    #[arg(long)]
    pub no_wvu: bool,
    /// Hard queue capacity in events.
    #[arg(long)]
    pub capacity: Option<usize>,
    /// Ring slots per neuron (default: max delay + 1).
    #[arg(long)]
    pub ring_slots: Option<usize>,
    /// Let the shared queue enqueue one copy per useful axon.
    #[arg(long)]
    pub multi_copy: bool,
    /// Cost report (JSON) from the recorded traffic.
    #[arg(long)]
    pub cost: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BackendArg {
    Dense,
    Scdq,
    Ring,
    Sharedq,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Dense => Backend::Dense,
            BackendArg::Scdq => Backend::Scdq,
            BackendArg::Ring => Backend::Ring,
            BackendArg::Sharedq => Backend::SharedQ,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Full fidelity report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Print the reference-platform memory figures.
    #[arg(long)]
    pub memory: bool,
    #[arg(long, value_enum, default_value_t = PresetArg::All)]
    pub preset: PresetArg,
    /// Worst-case capacity sweep over delay slots and presynaptic counts.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub sweep_max_delay_slots: u64,
    #[arg(long, value_delimiter = ',', default_value = "48,256")]
    pub sweep_presynaptic: Vec<u64>,
    /// Preset figures as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Truenorth,
    Loihi,
    Spinnaker,
    All,
}

fn read_text(p: &Path) -> anyhow::Result<String> {
    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn load_data(p: &Path) -> anyhow::Result<Vec<Raster>> {
    load_dataset(p).with_context(|| format!("loading dataset {}", p.display()))
}

fn load(p: &Path) -> anyhow::Result<crate::network::NetworkModel> {
    load_model(p).with_context(|| format!("loading model {}", p.display()))
}

/// Parses `args` (including the program name) and runs the command, writing
/// human-readable output to `out`.
pub fn run_args<I, T>(args: I, out: &mut impl Write) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run(Cli::try_parse_from(args)?, out)
}

pub fn run(cli: Cli, out: &mut impl Write) -> anyhow::Result<()> {
    match cli.command {
        Command::GenData(a) => gen_data(a, out),
        Command::Train(a) => train(a, out),
        Command::Prune(a) => prune(a, out),
        Command::Finetune(a) => finetune_cmd(a, out),
        Command::Quantize(a) => quantize_cmd(a, out),
        Command::Sim(a) => sim(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Compare(a) => compare(a, out),
        Command::Report(a) => report(a, out),
    }
}

fn gen_data(a: GenDataArgs, out: &mut impl Write) -> anyhow::Result<()> {
    let task = SyntheticTask {
        timesteps: a.timesteps,
        lags: a.lags,
        tail: a.tail,
        noise: a.noise,
    };
    let data = gen_synthetic(&task, a.n, a.seed)?;
    save_dataset(&a.out, &data)?;
    writeln!(out, "wrote {} samples to {}", data.len(), a.out.display())?;
    Ok(())
}

fn train(a: TrainArgs, out: &mut impl Write) -> anyhow::Result<()> {
    let data = load_data(&a.data)?;
    let first = data.first().context("the training set is empty")?;
    let classes = match a.classes {
        Some(c) => c,
        None => data
            .iter()
            .filter_map(Raster::label)
            .max()
            .map_or(0, |m| m + 1),
    };
    if classes == 0 {
        bail!("cannot infer the number of classes from an unlabelled dataset");
    }
    let mut cfg = a.hyper.config()?;
    if let Some(v) = a.delay_limit {
        cfg.delay_limit = v;
    }
    if let Some(v) = a.stride {
        cfg.delay_stride = v;
    }
    let mut widths = vec![first.channels()];
    widths.extend(&a.hidden);
    widths.push(classes);
    let neuron = NeuronParams::new(a.tau, a.threshold)?;
    let mut model = init_model(&widths, neuron, first.timesteps(), &cfg)?;
    model.set_readout(match a.readout {
        ReadoutArg::SpikeCount => Readout::SpikeCount,
        ReadoutArg::MaxMembrane => Readout::MaxMembrane,
    });
    model.set_max_delay(a.max_delay)?;
    let trained = bptt_train(&model, &data, &cfg)?;
    save_model(&a.out, &trained.model)?;
    if let Some(log) = &a.log {
        save_log(log, &trained.log)?;
    }
    let last = trained.log.last();
    writeln!(
        out,
        "trained {:?} for {} epochs: loss {:.4}, train accuracy {:.2}%",
        widths,
        cfg.epochs,
        last.map_or(f64::NAN, |r| r.loss),
        last.map_or(f64::NAN, |r| 100.0 * r.accuracy)
    )?;
    Ok(())
}

fn prune(a: PruneArgs, out: &mut impl Write) -> anyhow::Result<()> {
    let model = load(&a.model)?;
    let spec = PruneSpec {
        mode: match a.mode {
            ModeArg::Synapse => PruneMode::Synapse,
            ModeArg::Axonal => PruneMode::Axonal,
        },
        target: a.target.parse::<PruneTarget>()?,
    };
    let pruned = prune_delays(&model, &spec)?;
    save_model(&a.out, &pruned)?;
    let levels: Vec<usize> = pruned
        .connections()
        .iter()
        .map(|w| w.num_levels())
        .collect();
    writeln!(
        out,
        "pruned ({} {}): {} -> {} live synapses, levels per connection {:?}",
        spec.mode,
        spec.target,
        model.num_parameters(),
        pruned.num_parameters(),
        levels
    )?;
    Ok(())
}

fn finetune_cmd(a: FinetuneArgs, out: &mut impl Write) -> anyhow::Result<()> {
    let model = load(&a.model)?;
    let data = load_data(&a.data)?;
    let cfg = a.hyper.finetune_config()?;
    let tuned = finetune(&model, &data, &cfg)?;
    save_model(&a.out, &tuned.model)?;
    if let Some(log) = &a.log {
        save_log(log, &tuned.log)?;
    }
    writeln!(out, "fine-tuned for {} epochs", tuned.log.len())?;
    Ok(())
}

fn quantize_cmd(a: QuantizeArgs, out: &mut impl Write) -> anyhow::Result<()> {
    let model = load(&a.model)?;
    let spec: QuantSpec = a.scheme.parse()?;
    let q = match &a.finetune {
        Some(path) => {
            let data = load_data(path)?;
            let cfg = a.hyper.finetune_config()?;
            let tuned = quant_finetune(&model, &data, &cfg, spec)?;
            if let Some(log) = &a.log {
                save_log(log, &tuned.log)?;
            }
            tuned.model
        }
        None => quantize(&model, spec)?,
    };
    save_model(&a.out, &q)?;
    writeln!(out, "quantized to {spec}, scales {:?}", q.scales())?;
    Ok(())
}

fn sim(a: SimArgs, out: &mut impl Write) -> anyhow::Result<()> {
    let model = load(&a.model)?;
    let data = load_data(&a.data)?;
    let backend = Backend::from(a.backend);
    let opts = BackendOptions {
        wvu_filter: !a.no_wvu,
        capacity: a.capacity,
        ring_slots: a.ring_slots,
        multi_copy: a.multi_copy,
        record_events: a.events.is_some(),
    };
    let runs = data
        .par_iter()
        .map(|r| run_backend(backend, &model, r, &opts))
        .collect::<crate::Result<Vec<_>>>()?;
    let traces: Vec<_> = runs.iter().map(|r| r.trace.clone()).collect();
    save_traces(&a.trace, &traces)?;
    if let Some(path) = &a.events {
        let mut text = String::new();
        for (n, run) in runs.iter().enumerate() {
            let _ = writeln!(text, "# sample {n}");
            text.push_str(
                &run.events
                    .as_ref()
                    .map_or_else(String::new, EventLog::to_text),
            );
        }
        fs::write(path, text)?;
    }
    if let Some(path) = &a.cost {
        let report = cost_report(&model, &runs, EVENT_BITS);
        fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    let labelled: Vec<_> = traces
        .iter()
        .filter_map(|t| t.label.map(|y| (t.prediction, y)))
        .collect();
    write!(out, "simulated {} samples on {backend}", traces.len())?;
    if !labelled.is_empty() {
        let hits = labelled.iter().filter(|(p, y)| p == y).count();
        write!(
            out,
            ", accuracy {:.2}%",
            100.0 * hits as f64 / labelled.len() as f64
        )?;
    }
    writeln!(out)?;
    Ok(())
}

fn eval(a: EvalArgs, out: &mut impl Write) -> anyhow::Result<()> {
    let model = load(&a.model)?;
    let data = load_data(&a.data)?;
    let acc = evaluate(&model, &data)?;
    writeln!(
        out,
        "accuracy {:.2}% on {} samples",
        100.0 * acc,
        data.len()
    )?;
    Ok(())
}

fn compare(a: CompareArgs, out: &mut impl Write) -> anyhow::Result<()> {
    let reference = load_traces(&a.reference)?;
    let test = load_traces(&a.test)?;
    let rep = compare_traces(&reference, &test)?;
    writeln!(out, "samples: {}", rep.samples)?;
    writeln!(out, "prediction consistency: {:.2}%", rep.consistency)?;
    writeln!(out, "bit-identical traces: {}", rep.bit_identical)?;
    if let (Some(r), Some(t)) = (rep.reference.accuracy, rep.test.accuracy) {
        writeln!(
            out,
            "accuracy: reference {:.2}%, test {:.2}%",
            100.0 * r,
            100.0 * t
        )?;
    }
    writeln!(
        out,
        "avg spikes per layer (reference): {:?}",
        rep.reference.avg_spikes_per_layer
    )?;
    writeln!(
        out,
        "avg spikes per layer (test): {:?}",
        rep.test.avg_spikes_per_layer
    )?;
    writeln!(out, "vmem rmse per layer: {:?}", rep.vmem_rmse_per_layer)?;
    if let Some(path) = &a.json {
        fs::write(path, serde_json::to_string_pretty(&rep)? + "\n")?;
    }
    Ok(())
}

fn report(a: ReportArgs, out: &mut impl Write) -> anyhow::Result<()> {
    if !a.memory && a.csv.is_none() && a.json.is_none() {
        bail!("nothing to report: pass --memory, --csv or --json");
    }
    let presets: Vec<Preset> = match a.preset {
        PresetArg::Truenorth => vec![Preset::TrueNorth],
        PresetArg::Loihi => vec![Preset::Loihi],
        PresetArg::Spinnaker => vec![Preset::SpiNNaker],
        PresetArg::All => Preset::ALL.to_vec(),
    };
    let reports: Vec<_> = presets.into_iter().map(preset_report).collect();
    if a.memory {
        for r in &reports {
            write!(out, "{}", r.to_text())?;
        }
    }
    if let Some(path) = &a.json {
        fs::write(path, serde_json::to_string_pretty(&reports)? + "\n")?;
    }
    if let Some(path) = &a.csv {
        let ds: Vec<u64> = (1..=a.sweep_max_delay_slots).collect();
        let rows = scaling_sweep(&ds, &a.sweep_presynaptic);
        fs::write(path, sweep_csv(&rows, EVENT_BITS))?;
        writeln!(out, "wrote {} sweep rows to {}", rows.len(), path.display())?;
    }
    Ok(())
}
