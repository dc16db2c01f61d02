use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use robustcast::attack::attack_sweep;
use robustcast::certificate::{certify_horizons, certify_horizons_relative, CertificateConfig};
use robustcast::forecaster::{train, InputNoise, Model, NoiseMode, TrainConfig};
use robustcast::harness::{
    eval_series_from, export_samples_csv, ingest_csv, run_adversarial_pipeline_with_artifacts,
    run_timeshift_pipeline_with_artifacts, ExperimentConfig, IngestOptions, RunReport,
};
use robustcast::rng::derive_seed;
use robustcast::smoothing::{smooth_forecast, SmoothingConfig};
use robustcast::{Error, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "robustcast", version, about = "Robust probabilistic forecasting experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Absolute,
    Relative,
}

impl From<Mode> for NoiseMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Absolute => NoiseMode::Absolute,
            Mode::Relative => NoiseMode::Relative,
        }
    }
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Override the replicate seeds, comma separated.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Override the output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(clap::Args)]
struct SeriesArgs {
    /// Input CSV with header `id,timestamp,value`; every row is context.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    prediction_length: usize,
    /// Use only the last values of each series as context.
    #[arg(long)]
    context_length: Option<usize>,
}

impl SeriesArgs {
    fn load(&self) -> Result<Vec<robustcast::TimeSeries>> {
        let opts = IngestOptions {
            context_length: self.context_length,
            prediction_length: self.prediction_length,
            has_future: false,
            fail_fast: true,
        };
        Ok(ingest_csv(&self.input, &opts)?.series)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on the config's dataset (first seed) and save a checkpoint.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Randomized training with the config's `sigma_tr` (default: vanilla).
        #[arg(long)]
        randomized: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Threshold sweep of the mean-shift attack on one evaluation series.
    Attack {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        /// Index among the evaluation series.
        #[arg(long, default_value_t = 0)]
        series_index: usize,
        /// Attack the input-smoothed model with the config's smoothing.
        #[arg(long)]
        smoothed: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample paths of the input-smoothed model for every series in a CSV.
    Smooth {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        series: SeriesArgs,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Mode::Relative)]
        noise_mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV `id,path,horizon,value` in original units.
        #[arg(long)]
        out: PathBuf,
    },
    /// Wasserstein certificate of the smoothed model for every series in a CSV.
    Certify {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        series: SeriesArgs,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 20000)]
        n_cdf: usize,
        /// 1-based horizons, comma separated (default: all).
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<usize>>,
        #[arg(long, value_enum, default_value_t = Mode::Absolute)]
        noise_mode: Mode,
        #[arg(long, default_value_t = 100)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Adversarial pipeline: vanilla, RS, RT, RT+RS over the eta grid.
    EvalAdv {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Time-shift pipeline: vanilla, FS, RT, RT+FS over the rho grid.
    EvalShift {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Print a saved report.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Table,
    Summary,
    Raw,
    Json,
}

fn write_json(path: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { cfg, randomized, out } => {
            let cfg = cfg.load()?;
            let seed = cfg.seeds[0];
            let data = cfg.dataset.load(derive_seed(seed, &[1]))?;
            let ctx = data.iter().map(|s| s.context_length()).min().unwrap_or(1);
            let tau = cfg.dataset.prediction_length();
            let init = cfg.model.init(tau, ctx, derive_seed(seed, &[2]))?;
            let sigma_tr = if randomized { cfg.sigma_tr } else { 0.0 };
            let tcfg = TrainConfig {
                sigma_tr,
                seed: derive_seed(seed, &[3]),
                context_length: Some(ctx),
                ..cfg.training.clone()
            };
            let (model, report) = train(init, &data, &tcfg)?;
            let mut meta = BTreeMap::new();
            meta.insert("config_hash".into(), cfg.hash());
            meta.insert("sigma_tr".into(), sigma_tr.to_string());
            meta.insert("context_length".into(), ctx.to_string());
            model.save(&out, meta)?;
            write_json(None, &serde_json::to_value(&report)?)
        }
        Command::Attack { cfg, model, series_index, smoothed, out } => {
            let cfg = cfg.load()?;
            let (model, _) = Model::load(&model)?;
            let data = cfg.dataset.load(derive_seed(cfg.seeds[0], &[1]))?;
            let series = eval_series_from(&cfg, &data)?;
            let s = series
                .get(series_index)
                .ok_or_else(|| Error::InvalidArgument(format!("series index {series_index} out of range")))?;
            let scale = s.scale();
            let future = s.future().expect("evaluation series have futures");
            let refs: Vec<f64> = cfg.attack.horizons.iter().map(|&h| future[h - 1] / scale).collect();
            let noise = smoothed.then(|| InputNoise { mode: cfg.smoothing.noise_mode, sigma: cfg.smoothing.sigma });
            let sweep = attack_sweep(&model, noise, &s.scaled_context(), &refs, &cfg.attack)?;
            write_json(Some(&out), &json!({ "series": s.id, "scale": scale, "sweep": sweep }))
        }
        Command::Smooth { model, series, sigma, n, noise_mode, seed, out } => {
            let (model, _) = Model::load(&model)?;
            let data = series.load()?;
            let first = data.first().ok_or_else(|| Error::InvalidArgument("input has no series".into()))?;
            let mut all = Vec::new();
            for (i, s) in data.iter().enumerate() {
                let scfg = SmoothingConfig { sigma, n, noise_mode: noise_mode.into(), seed: derive_seed(seed, &[i as u64]) };
                let samples = smooth_forecast(&model, &s.scaled_context(), s.prediction_length(), &scfg)?;
                all.push((s.id.clone(), samples.scaled_by(s.scale())));
            }
            if all.len() == 1 {
                return export_samples_csv(&out, &first.id, &all[0].1);
            }
            let dir = out.with_extension("");
            std::fs::create_dir_all(&dir)?;
            for (id, samples) in &all {
                export_samples_csv(&dir.join(format!("{id}.csv")), id, samples)?;
            }
            Ok(())
        }
        Command::Certify { model, series, sigma, n_cdf, horizons, noise_mode, bootstrap, seed, out } => {
            let (model, _) = Model::load(&model)?;
            let data = series.load()?;
            let mut reports = Vec::new();
            for (i, s) in data.iter().enumerate() {
                let hs = horizons.clone().unwrap_or_else(|| (1..=s.prediction_length()).collect());
                let cfg = CertificateConfig { sigma, n_cdf, grid_points: 1001, bootstrap, seed: derive_seed(seed, &[i as u64]) };
                let x = s.scaled_context();
                let (headline, per) = match NoiseMode::from(noise_mode) {
                    NoiseMode::Absolute => certify_horizons(&model, &x, &hs, &cfg)?,
                    NoiseMode::Relative => certify_horizons_relative(&model, &x, &hs, &cfg)?,
                };
                reports.push(json!({ "series": s.id, "headline": headline, "horizons": per }));
            }
            write_json(out.as_deref(), &json!({ "certificates": reports }))
        }
        Command::EvalAdv { cfg } => {
            let cfg = cfg.load()?;
            let report = run_adversarial_pipeline_with_artifacts(&cfg, Some(&cfg.output_dir))?;
            report.write(&cfg.output_dir, "adversarial")?;
            print!("{}", report.render_table());
            Ok(())
        }
        Command::EvalShift { cfg } => {
            let cfg = cfg.load()?;
            let report = run_timeshift_pipeline_with_artifacts(&cfg, Some(&cfg.output_dir))?;
            report.write(&cfg.output_dir, "timeshift")?;
            print!("{}", report.render_table());
            Ok(())
        }
        Command::Report { input, format } => {
            let report = RunReport::from_json(&std::fs::read_to_string(&input)?)?;
            match format {
                ReportFormat::Table => print!("{}", report.render_table()),
                ReportFormat::Summary => print!("{}", report.summary_csv()?),
                ReportFormat::Raw => print!("{}", report.raw_csv()?),
                ReportFormat::Json => println!("{}", report.to_json()),
            }
            Ok(())
        }
    }
}

fn fail(kind: &str, message: String) -> ExitCode {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string()),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), e.to_string()),
    }
}
