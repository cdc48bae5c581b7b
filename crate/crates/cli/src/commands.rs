use std::path::{Path, PathBuf};

use serde::Serialize;
use sli::{fit, one_slice_out, predict_with, simulate_grf, CvMode, FittedModel, PredictOptions, STPoint};

use crate::config::{base_dir, PredictionSection, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::{cv_table, open_output, read_samples, read_targets, write_cv_metrics, write_predictions, write_samples};
use crate::model::ModelFile;

pub const CONFIG_BEGIN: &str = "# --- resolved configuration ---";
pub const CONFIG_END: &str = "# --- end of resolved configuration ---";

/// Writes the resolved settings to the run log, between marker comments so
/// that the block can be saved and replayed as a config file.
fn log_config(command: &str, toml_text: &str) {
    eprintln!("sli {command}");
    eprintln!("{CONFIG_BEGIN}");
    eprint!("{toml_text}");
    eprintln!("{CONFIG_END}");
}

pub struct SimulateArgs {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.data.path = std::path::absolute(out).map_err(|e| CliError::usage(e.to_string()))?;
    }
    let spec = cfg.grf_spec()?;
    log_config("simulate", &cfg.to_toml());

    let data = simulate_grf(&spec)?;
    write_samples(open_output(Some(&cfg.data.path))?, &data)?;
    let n = data.len() as f64;
    let mean = data.mean();
    let sd = if data.len() > 1 { (data.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    eprintln!(
        "wrote {} samples ({} locations x {} slices) to {}",
        data.len(),
        data.distinct_locations().len(),
        data.distinct_times().len(),
        cfg.data.path.display()
    );
    eprintln!("sample mean {mean:.6}, sample sd {sd:.6}");
    Ok(())
}

pub struct FitArgs {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
}

fn default_model_path(config: &Path) -> PathBuf {
    base_dir(config).join("model.toml")
}

pub fn fit_model(args: &FitArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    let data = read_samples(&cfg.data.path, cfg.data.dimension)?;
    cfg.resolve(&data)?;
    log_config("fit", &cfg.to_toml());

    let model = fit(&data, &cfg.fit_config()?)?;
    report_fit(&model);
    let out = args.out.clone().unwrap_or_else(|| default_model_path(&args.config));
    ModelFile::from_model(&model, cfg.data.clone()).write(&out)?;
    eprintln!("model written to {}", out.display());
    Ok(())
}

fn report_fit(model: &FittedModel) {
    let p = &model.params;
    if let Some(d) = &model.diagnostics {
        eprintln!("termination: {:?} after {} iterations, {} evaluations", d.termination, d.iterations, d.evaluations);
        eprintln!("nll: {:.6} (initial {:.6})", model.nll, d.nll_initial);
        eprintln!("sparsity index: {:.4}% ({} nonzeros)", 100.0 * d.sparsity_index, d.nnz);
        let trace: Vec<String> = d.nll_trace.iter().map(|v| format!("{v:.6}")).collect();
        eprintln!("nll trace: {}", trace.join(" "));
    }
    eprintln!("trend coefficients: {:?}", p.trend.coefficients);
    eprintln!(
        "lambda {:e}, c1 {:e}, mu_s {}, mu_t {}",
        p.precision.lambda, p.precision.c1, p.bandwidth.mu_s, p.bandwidth.mu_t
    );
}

pub struct PredictArgs {
    pub model: PathBuf,
    pub config: Option<PathBuf>,
    pub targets: Option<PathBuf>,
    pub level: Option<f64>,
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct PredictRun<'a> {
    model: &'a Path,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<&'a Path>,
    prediction: &'a PredictionSection,
}

pub fn predict(args: &PredictArgs) -> CliResult<()> {
    let model_file = ModelFile::read(&args.model)?;
    let dim = model_file.data.dimension;
    let mut section = match &args.config {
        Some(path) => RunConfig::load(path)?.prediction,
        None => PredictionSection::default(),
    };
    if let Some(t) = &args.targets {
        section.targets = Some(std::path::absolute(t).map_err(|e| CliError::usage(e.to_string()))?);
        section.grid = None;
    }
    if let Some(level) = args.level {
        section.level = level;
    }
    if !(section.level > 0.0 && section.level < 1.0) {
        return Err(CliError::usage(format!("level must lie in (0, 1), got {}", section.level)));
    }
    let targets: Vec<STPoint> = match (&section.targets, &section.grid) {
        (Some(path), _) => read_targets(path, dim)?,
        (None, Some(grid)) => {
            if grid.axes.len() != dim {
                return Err(CliError::usage(format!("prediction.grid has {} axes but the model has dimension {dim}", grid.axes.len())));
            }
            let locs = grid.locations();
            grid.times.iter().flat_map(|t| locs.iter().map(move |s| STPoint::new(s.clone(), *t))).collect()
        }
        (None, None) => return Err(CliError::usage("no targets: pass --targets or set prediction.targets or prediction.grid")),
    };
    let model_path = std::path::absolute(&args.model).map_err(|e| CliError::usage(e.to_string()))?;
    let out_path = args.out.as_deref().map(std::path::absolute).transpose().map_err(|e| CliError::usage(e.to_string()))?;
    let run = PredictRun { model: &model_path, out: out_path.as_deref(), prediction: &section };
    log_config("predict", &toml::to_string_pretty(&run).expect("settings are serializable"));

    let model = model_file.load()?;
    let options = PredictOptions { level: section.level, variance: section.variance };
    let result = predict_with(&model, &targets, &options)?;
    write_predictions(open_output(args.out.as_deref())?, dim, &result)?;
    eprintln!("predicted {} targets", result.len());
    Ok(())
}

pub struct CvArgs {
    pub config: PathBuf,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub per_slice: bool,
}

pub fn cross_validate(args: &CvArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(m) = &args.model {
        cfg.cv.model = Some(std::path::absolute(m).map_err(|e| CliError::usage(e.to_string()))?);
    }
    let data = read_samples(&cfg.data.path, cfg.data.dimension)?;
    cfg.resolve(&data)?;
    let mode = match &cfg.cv.model {
        Some(path) => {
            let m = ModelFile::read(path)?;
            if m.data.dimension != cfg.data.dimension {
                return Err(CliError::usage("model and data dimensions differ"));
            }
            CvMode::Fixed(m.params)
        }
        None => cfg.cv_mode()?,
    };
    log_config("cv", &cfg.to_toml());

    let report = one_slice_out(&mode, &data)?;
    if let Some(out) = &args.out {
        write_cv_metrics(open_output(Some(out))?, &report)?;
        eprintln!("metrics written to {}", out.display());
    }
    print!("{}", cv_table(&report, args.per_slice));
    Ok(())
}
