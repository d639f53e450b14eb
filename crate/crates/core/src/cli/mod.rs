//! The `senseaug` command line. Exit codes: 0 success, 1 usage or parse
//! error, 2 I/O failure, 3 evaluator failure.

pub mod evaluators;
pub mod plot;
pub mod simulate;

use std::ffi::OsString;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

use crate::augment::{apply, AugmentError, AugmentationKind, AugmentationSpec, KernelParams};
use crate::image::{ImageBuffer, ImageError};
use crate::metrics::{kid, FeatureSet, MetricsError};
use crate::policy::SortOrder;
use crate::sensitivity::{
    run_sensitivity_analysis, solve_levels_dense, LevelSet, SAConfig, SensitivityError,
};

use evaluators::parse_evaluator;
use plot::{load_plot_input, render_svg, trace_rows, write_trace};
use simulate::{run_simulation, SimulationConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Evaluator(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Evaluator(_) => 3,
        }
    }
}

fn image_error(path: &Path, e: ImageError) -> CliError {
    match e {
        ImageError::Io(_) => CliError::io(path, e),
        other => CliError::Usage(format!("{}: {other}", path.display())),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "senseaug",
    version,
    about = "Sensitivity-guided image augmentation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply one basis perturbation to an image (PPM or PNG).
    Perturb {
        input: PathBuf,
        output: PathBuf,
        /// Kind name, e.g. r_lighter, shear_x_neg, blur.
        #[arg(long)]
        kind: AugmentationKind,
        /// Magnitude in [0, 1].
        #[arg(long)]
        alpha: f64,
        /// Seed for the noise kernel.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// KID between two feature CSV files (header id,f0,...).
    Kid {
        features_a: PathBuf,
        features_b: PathBuf,
    },
    /// Solve sensitivity levels against an evaluator.
    Solve {
        /// analytic:power:<p>, table:<csv> or exec:<command>.
        #[arg(long)]
        evaluator: String,
        /// Comma-separated kinds, or "all".
        #[arg(long, default_value = "all")]
        kinds: String,
        /// Level count L; L - 1 levels are solved per kind.
        #[arg(long = "levels", short = 'L', default_value_t = 5)]
        levels: usize,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long, default_value_t = 50)]
        max_refinements: usize,
        /// Output JSON path for the level sets.
        #[arg(long)]
        out: PathBuf,
        /// Also run the dense grid baseline with this many points.
        #[arg(long)]
        compare_dense: Option<usize>,
        /// Write the sampled knots and levels as a trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the simulated training loop from a TOML or JSON config.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `loop.sort_order`: ascending puts the lowest accuracy
        /// first, so it gets the most probability mass.
        #[arg(long)]
        sort_order: Option<SortOrder>,
    },
    /// Render a solve output or trace CSV as SVG.
    Plot {
        input: PathBuf,
        output: PathBuf,
        /// Kind to draw; defaults to the first kind in the input.
        #[arg(long)]
        kind: Option<AugmentationKind>,
    },
}

/// Parses `args` (including the program name) and runs the command, writing
/// to the given streams. Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(
    command: Command,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    match command {
        Command::Perturb {
            input,
            output,
            kind,
            alpha,
            seed,
        } => cmd_perturb(&input, &output, kind, alpha, seed, stdout, stderr),
        Command::Kid {
            features_a,
            features_b,
        } => cmd_kid(&features_a, &features_b, stdout),
        Command::Solve {
            evaluator,
            kinds,
            levels,
            epsilon,
            max_refinements,
            out,
            compare_dense,
            trace,
        } => {
            let cfg = SAConfig {
                levels,
                epsilon,
                max_refinements,
                ..SAConfig::default()
            };
            let kinds =
                AugmentationKind::parse_list(&kinds).map_err(|e| CliError::Usage(e.to_string()))?;
            let opts = SolveOptions {
                out: &out,
                compare_dense,
                trace: trace.as_deref(),
            };
            cmd_solve(&evaluator, &kinds, &cfg, &opts, stdout, stderr)
        }
        Command::Simulate {
            config,
            out,
            sort_order,
        } => cmd_simulate_with(&config, &out, sort_order, stdout),
        Command::Plot {
            input,
            output,
            kind,
        } => cmd_plot(&input, &output, kind),
    }
}

fn write_out(stdout: &mut dyn Write, text: impl Display) -> Result<(), CliError> {
    writeln!(stdout, "{text}").map_err(|e| CliError::Io(format!("stdout: {e}")))
}

pub fn cmd_perturb(
    input: &Path,
    output: &Path,
    kind: AugmentationKind,
    alpha: f64,
    seed: u64,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let spec = AugmentationSpec::new(kind, alpha)
        .map_err(|e| CliError::Usage(e.to_string()))?
        .with_seed(seed);
    let img = ImageBuffer::load(input).map_err(|e| image_error(input, e))?;
    let kernel = spec
        .kernel_params(img.width(), img.height())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if let KernelParams::Blur { kernel_size, sigma } = kernel {
        let _ = writeln!(stderr, "blur: kernel size {kernel_size}, sigma {sigma:.4}");
    }
    if let KernelParams::Noise { sigma } = kernel {
        let _ = writeln!(stderr, "noise: sigma {sigma:.4}, seed {seed}");
    }
    let out = apply(&spec, &img).map_err(|e| match e {
        AugmentError::DegenerateCrop { .. } => CliError::Usage(format!("{input:?}: {e}")),
        other => CliError::Usage(other.to_string()),
    })?;
    out.save(output).map_err(|e| image_error(output, e))?;
    let report = json!({
        "kind": spec.kind,
        "magnitude": spec.magnitude,
        "seed": spec.seed,
        "kernel": kernel,
        "width": out.width(),
        "height": out.height(),
    });
    write_out(stdout, report)
}

fn load_features(path: &Path) -> Result<FeatureSet, CliError> {
    std::fs::metadata(path).map_err(|e| CliError::io(path, e))?;
    FeatureSet::from_csv(path).map_err(|e| CliError::Usage(e.to_string()))
}

pub fn cmd_kid(a: &Path, b: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let fa = load_features(a)?;
    let fb = load_features(b)?;
    let value = kid(&fa, &fb).map_err(|e: MetricsError| CliError::Usage(e.to_string()))?;
    // avoid printing -0.000000000 for an exact zero
    write_out(stdout, format!("{{\"kid\": {:.9}}}", value + 0.0))
}

pub struct SolveOptions<'a> {
    pub out: &'a Path,
    pub compare_dense: Option<usize>,
    pub trace: Option<&'a Path>,
}

fn sensitivity_error(e: &SensitivityError) -> CliError {
    match e {
        SensitivityError::Evaluator { .. } | SensitivityError::BadMeasurement { .. } => {
            CliError::Evaluator(e.to_string())
        }
        other => CliError::Usage(other.to_string()),
    }
}

pub fn cmd_solve(
    evaluator: &str,
    kinds: &[AugmentationKind],
    cfg: &SAConfig,
    opts: &SolveOptions,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let ev = parse_evaluator(evaluator)?;
    let results = run_sensitivity_analysis(&ev, kinds, cfg).map_err(|e| sensitivity_error(&e))?;
    let mut sets: Vec<LevelSet> = Vec::new();
    let mut first_error = None;
    for (kind, r) in kinds.iter().zip(results) {
        match r {
            Ok(set) => {
                let mut line = format!("{}\tadaptive {}", set.kind, set.evaluations_used);
                if let Some(n) = opts.compare_dense {
                    let dense = solve_levels_dense(&ev, set.kind, cfg, n)
                        .map_err(|e| sensitivity_error(&e))?;
                    line.push_str(&format!("\tdense {}", dense.evaluations_used));
                }
                if set.fallback {
                    line.push_str("\tfallback uniform");
                }
                write_out(stdout, line)?;
                sets.push(set);
            }
            Err(e) => {
                let _ = writeln!(stderr, "{kind}: {e}");
                first_error.get_or_insert(e);
            }
        }
    }
    let json = serde_json::to_string_pretty(&sets).expect("level sets serialise");
    std::fs::write(opts.out, format!("{json}\n")).map_err(|e| CliError::io(opts.out, e))?;
    if let Some(path) = opts.trace {
        let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        write_trace(file, &trace_rows(0, &sets, cfg)).map_err(|e| CliError::io(path, e))?;
    }
    match first_error {
        Some(e) => Err(sensitivity_error(&e)),
        None => Ok(()),
    }
}

pub fn cmd_simulate(config: &Path, out: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    cmd_simulate_with(config, out, None, stdout)
}

pub fn cmd_simulate_with(
    config: &Path,
    out: &Path,
    sort_order: Option<SortOrder>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let mut cfg = SimulationConfig::load(config)?;
    if let Some(order) = sort_order {
        cfg.loop_cfg.sort_order = order;
    }
    let (_, summary) = run_simulation(&cfg, out)?;
    write_out(
        stdout,
        format!(
            "{} steps, {} validations, {} analysis rounds; peak image memory {} bytes ({} per image), offline copies avoided: {}",
            summary.train_steps,
            summary.validations,
            summary.sa_rounds,
            summary.peak_image_bytes,
            summary.image_footprint,
            summary.offline_copies
        ),
    )
}

pub fn cmd_plot(
    input: &Path,
    output: &Path,
    kind: Option<AugmentationKind>,
) -> Result<(), CliError> {
    let rows = load_plot_input(input)?;
    let kind = match kind.or_else(|| rows.first().map(|r| r.kind)) {
        Some(k) => k,
        None => {
            return Err(CliError::Usage(format!(
                "{}: nothing to plot",
                input.display()
            )))
        }
    };
    let svg = render_svg(&rows, kind)?;
    std::fs::write(output, svg).map_err(|e| CliError::io(output, e))
}
