//! Command-line interface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use steercov_core::imgproc::{apply_chain, Image, TransformSpec};
use steercov_core::nn::{load_model, Model, Network};
use steercov_core::oracle::ViolationRecord;

use crate::config::RunConfig;
use crate::dataset::Dataset;
use crate::error::{HarnessError, Result};
use crate::experiments::{run_coverage_correlation, run_guided, run_oracle, run_transform_study};
use crate::fixture;
use crate::report::{
    read_violations, write_error_csv, write_generated, write_json, write_jsonl, write_sweep_csv,
    Meta, Report,
};

#[derive(Debug, Parser)]
#[command(name = "steercov", version, about = "Coverage-guided metamorphic testing for steering models")]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,

    #[command(subcommand)]
    pub command: Command,
}

/// Settings that override the config file.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Model file (binary container or JSON).
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Dataset directory with labels.csv.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the dataset and model and print a summary.
    IngestCheck,
    /// Apply a chain of transformations to one image.
    Transform {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Transformation such as `rotation:6` or `blur:median:3`; repeatable.
        #[arg(long = "apply", required = true)]
        chain: Vec<String>,
    },
    /// Per-frame coverage against steering output.
    Coverage,
    /// Every simple transformation over its grid for each seed.
    Study,
    /// Coverage-guided search; writes generated images.
    Search,
    /// Metamorphic oracle with the λ × ε sweep.
    Oracle,
    /// All experiments into one report.
    Report,
    /// Re-run every violation in a JSON-lines file and compare predictions.
    Replay {
        #[arg(long)]
        violations: PathBuf,
    },
    /// Write a synthetic dataset, models and config.
    Synth {
        #[arg(long, default_value_t = 100)]
        frames: usize,
    },
}

impl Overrides {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.model {
            cfg.model = Some(v.clone());
        }
        if let Some(v) = &self.dataset {
            cfg.dataset = Some(v.clone());
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = self.seed {
            cfg.rng_seed = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.threshold {
            cfg.threshold = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

struct Inputs {
    cfg: RunConfig,
    model: Model,
    data: Dataset,
}

impl Inputs {
    fn load(cfg: RunConfig) -> Result<Self> {
        let model = load_model(cfg.model_path()?)?;
        let data = Dataset::ingest(cfg.dataset_path()?)?;
        let need: usize = model.input_shape().iter().product();
        if let Some(f) = data.frames.iter().find(|f| f.image.data().len() != need) {
            return Err(steercov_core::Error::Shape(format!(
                "frame {} is {}x{}x{}, model {} expects {:?}",
                f.id,
                f.image.height(),
                f.image.width(),
                f.image.channels(),
                model.name(),
                model.input_shape()
            ))
            .into());
        }
        Ok(Self { cfg, model, data })
    }

    fn meta(&self) -> Meta {
        Meta::new(&self.cfg, self.model.name(), &self.model, self.data.len())
    }

    fn seeds(&self) -> &[crate::dataset::Frame] {
        self.data.seeds(self.cfg.max_seeds)
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn study(&self, report: &mut Report) -> Result<()> {
        let (section, _) = run_transform_study(&self.model, self.seeds(), &self.cfg)?;
        report.study = Some(section);
        Ok(())
    }

    fn search(&self, report: &mut Report) -> Result<()> {
        let run = run_guided(&self.model, self.seeds(), &self.cfg)?;
        write_generated(&self.out("generated"), &run.result)?;
        report.guided = Some(run.section);
        Ok(())
    }

    fn oracle(&self, report: &mut Report) -> Result<()> {
        let run = run_oracle(&self.model, self.model.name(), &self.data.frames, &self.cfg)?;
        write_jsonl(&self.out("violations.jsonl"), &run.violations)?;
        write_error_csv(
            &self.out("errors.csv"),
            &run.section.errors,
            &[self.model.name().to_string()],
        )?;
        write_sweep_csv(&self.out("sweep.csv"), &run.section.sweep, run.section.default_cell)?;
        report.oracle = Some(run.section);
        Ok(())
    }

    fn coverage(&self, report: &mut Report) -> Result<()> {
        report.coverage = Some(run_coverage_correlation(
            &self.model,
            &self.data.frames,
            self.cfg.threshold(),
        )?);
        Ok(())
    }
}

/// Re-applies each violation's provenance to its frame and checks that the
/// model reproduces the recorded prediction exactly. Returns the number of
/// records checked.
pub fn replay(model: &Model, data: &Dataset, violations: &[ViolationRecord]) -> Result<usize> {
    for v in violations {
        let frame = data.frame(&v.image_id).ok_or_else(|| {
            HarnessError::Dataset(format!("violation refers to unknown frame {}", v.image_id))
        })?;
        let img = apply_chain(&frame.image, &v.provenance)?;
        let (pred, _) = model.forward(&img.to_tensor(model.input_shape())?)?;
        if pred as f64 != v.transformed {
            return Err(HarnessError::Invariant(format!(
                "frame {} via {:?}: replay gives {pred}, recorded {}",
                v.image_id,
                v.provenance.iter().map(ToString::to_string).collect::<Vec<_>>(),
                v.transformed
            )));
        }
    }
    Ok(violations.len())
}

fn write_report(path: &Path, report: &Report) -> Result<String> {
    write_json(path, report)?;
    Ok(format!("wrote {}", path.display()))
}

/// Runs one command; returns the text to print on success.
pub fn run(cli: &Cli) -> Result<String> {
    if let Command::Synth { frames } = cli.command {
        let root = cli
            .overrides
            .out
            .clone()
            .ok_or_else(|| HarnessError::Config("synth needs --out".into()))?;
        let fx = fixture::synthesize(&root, frames, cli.overrides.seed.unwrap_or(0))?;
        return Ok(format!(
            "dataset {}\nmodels {} {}\nconfig {}",
            fx.dataset.display(),
            fx.cnn.display(),
            fx.lstm.display(),
            fx.config.display()
        ));
    }
    let cfg = cli.overrides.resolve()?;
    if let Command::Transform {
        input,
        output,
        chain,
    } = &cli.command
    {
        let chain = chain
            .iter()
            .map(|s| s.parse::<TransformSpec>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        let img = Image::load(input)?;
        apply_chain(&img, &chain)?.save(output)?;
        return Ok(format!("wrote {}", output.display()));
    }

    let inputs = Inputs::load(cfg)?;
    let mut report = Report::new(inputs.meta());
    match &cli.command {
        Command::IngestCheck => {
            let labels: Vec<f64> = inputs.data.frames.iter().map(|f| f.label).collect();
            let lo = labels.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = labels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            Ok(format!(
                "{} frames, labels in [{lo}, {hi}]\nmodel {} ({}), input {:?}, {} neurons, fingerprint {}",
                inputs.data.len(),
                inputs.model.name(),
                inputs.cfg.model_path()?.display(),
                inputs.model.input_shape(),
                inputs.model.total_neurons(),
                report.meta.model_fingerprint
            ))
        }
        Command::Coverage => {
            inputs.coverage(&mut report)?;
            write_report(&inputs.out("coverage.json"), &report)
        }
        Command::Study => {
            inputs.study(&mut report)?;
            write_report(&inputs.out("study.json"), &report)
        }
        Command::Search => {
            inputs.search(&mut report)?;
            write_report(&inputs.out("search.json"), &report)
        }
        Command::Oracle => {
            inputs.oracle(&mut report)?;
            write_report(&inputs.out("oracle.json"), &report)
        }
        Command::Report => {
            inputs.coverage(&mut report)?;
            inputs.study(&mut report)?;
            inputs.search(&mut report)?;
            inputs.oracle(&mut report)?;
            write_report(&inputs.out("report.json"), &report)
        }
        Command::Replay { violations } => {
            let records = read_violations(violations)?;
            let n = replay(&inputs.model, &inputs.data, &records)?;
            Ok(format!("{n} violations replayed exactly"))
        }
        Command::Transform { .. } | Command::Synth { .. } => unreachable!("handled above"),
    }
}
