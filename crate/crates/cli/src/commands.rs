//! Subcommands and their flags.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use numdiff::optimize::{fit_gamma_model, GammaObservation};
use numdiff::spectrum::power_spectrum;
use numdiff::synthetic::{
    brute_force_grid_against, default_savgol_grid, gamma_sweep_against, generate, logspace, pareto_front,
    heuristic_training_sweep, Noise, ProblemConfig, ProblemKind, SweepRecord, TrainingConfig,
};
use numdiff::{estimate_cutoff_frequency, optimize_params, suggest_gamma, Method, MethodParams};

use crate::error::{CliError, CliResult};
use crate::svg::{Chart, Series, Style};
use crate::table::{format_number, ingest, read_table, write_atomic, write_table, ColumnSpec, Table};

#[derive(Debug, Parser)]
#[command(name = "numdiff", version, about = "Differentiate noisy time series with automatically tuned parameters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Power spectrum, cutoff frequency and the loss weight it implies.
    Spectrum(SpectrumArgs),
    /// Estimate the derivative with tuned parameters.
    Diff(DiffArgs),
    /// Trace metrics against ground truth over a grid of loss weights.
    Sweep(SweepArgs),
    /// Write a synthetic problem with its ground truth.
    Synth(SynthArgs),
    /// Calibrate the loss-weight heuristic on sinusoids.
    FitGamma(FitGammaArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Sampling interval; overrides any time column.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Time column name (default `t`).
    #[arg(long)]
    pub time_col: Option<String>,
    /// Value column name (default `y`, or the only non-time column).
    #[arg(long)]
    pub value_col: Option<String>,
}

impl InputArgs {
    fn spec(&self) -> ColumnSpec {
        ColumnSpec { dt: self.dt, time_col: self.time_col.clone(), value_col: self.value_col.clone() }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Directory for output files; created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also write SVG diagnostics.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Cutoff frequency in Hz instead of the spectral estimate.
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

/// Loss weight: a positive number or `auto`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaChoice {
    Auto,
    Value(f64),
}

impl FromStr for GammaChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(GammaChoice::Auto);
        }
        match s.parse::<f64>() {
            Ok(g) if g.is_finite() && g > 0.0 => Ok(GammaChoice::Value(g)),
            _ => Err(format!("expected a positive number or 'auto', got '{s}'")),
        }
    }
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value = "savgol", value_parser = parse_method)]
    pub method: Method,
    #[arg(long, default_value = "auto")]
    pub gamma: GammaChoice,
    /// Cutoff frequency in Hz for `--gamma auto`.
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Synthetic problem kind to generate.
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    pub problem: Option<String>,
    /// Measured data instead of a synthetic problem; needs `--truth-col`.
    #[arg(long, requires = "truth_col")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub time_col: Option<String>,
    #[arg(long)]
    pub value_col: Option<String>,
    /// Column holding the true derivative.
    #[arg(long)]
    pub truth_col: Option<String>,
    /// Duration of the synthetic problem in seconds.
    #[arg(long, default_value_t = 10.0)]
    pub duration: f64,
    /// Noise standard deviation as a fraction of the amplitude.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "savgol", value_parser = parse_method)]
    pub method: Method,
    /// `logspace:a:b:n` (exponents of ten) or a comma-separated list.
    #[arg(long, default_value = "logspace:-4:2:25")]
    pub grid: String,
    /// Also score the default Savitzky-Golay parameter grid.
    #[arg(long)]
    pub brute: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value = "sine")]
    pub kind: String,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long, default_value_t = 4.0)]
    pub duration: f64,
    /// Noise standard deviation as a fraction of the amplitude.
    #[arg(long, default_value_t = 0.0, conflicts_with = "noise_abs")]
    pub noise: f64,
    /// Noise standard deviation in signal units.
    #[arg(long)]
    pub noise_abs: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sine frequency in Hz.
    #[arg(long)]
    pub freq: Option<f64>,
    /// Sine amplitude.
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct FitGammaArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,5")]
    pub freqs: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.001,0.01,0.1")]
    pub dts: Vec<f64>,
    /// Noise standard deviations as fractions of the unit amplitude.
    #[arg(long, value_delimiter = ',', default_value = "0.005,0.05")]
    pub noises: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "4,25")]
    pub durations: Vec<f64>,
    #[arg(long, default_value = "logspace:-4:2:25")]
    pub grid: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: numdiff::Error| e.to_string())
}

/// Parses `logspace:a:b:n` or a comma-separated list into a positive,
/// strictly ascending grid.
pub fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let bad = |why: &str| CliError::Usage(format!("malformed grid '{spec}': {why}"));
    let grid = if let Some(rest) = spec.strip_prefix("logspace:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(bad("expected logspace:a:b:n"));
        };
        let a: f64 = a.trim().parse().map_err(|_| bad("start exponent is not a number"))?;
        let b: f64 = b.trim().parse().map_err(|_| bad("end exponent is not a number"))?;
        let n: usize = n.trim().parse().map_err(|_| bad("count is not a whole number"))?;
        if !(a.is_finite() && b.is_finite()) || n == 0 {
            return Err(bad("exponents must be finite and the count positive"));
        }
        logspace(a, b, n)
    } else {
        spec.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad(&format!("'{}' is not a number", v.trim()))))
            .collect::<CliResult<Vec<f64>>>()?
    };
    if grid.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
        return Err(bad("values must be positive"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("values must be strictly ascending"));
    }
    Ok(grid)
}

/// Output streams for a command; tests pass buffers.
pub struct Io<'a> {
    pub stdout: &'a mut dyn std::io::Write,
    pub stderr: &'a mut dyn std::io::Write,
}

impl Io<'_> {
    fn say(&mut self, line: &str) {
        let _ = writeln!(self.stdout, "{line}");
    }

    fn warn(&mut self, line: &str) {
        let _ = writeln!(self.stderr, "warning: {line}");
    }
}

pub fn execute(cli: Cli, io: &mut Io) -> CliResult<()> {
    match cli.command {
        Command::Spectrum(a) => spectrum(a, io),
        Command::Diff(a) => diff(a, io),
        Command::Sweep(a) => sweep(a, io),
        Command::Synth(a) => synth(a, io),
        Command::FitGamma(a) => fit_gamma(a, io),
    }
}

fn out_dir(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("cannot create {}: {e}", out.display())))
}

fn positive(name: &str, v: Option<f64>) -> CliResult<()> {
    match v {
        Some(x) if !(x.is_finite() && x > 0.0) => Err(CliError::Usage(format!("{name} must be positive, got {x}"))),
        _ => Ok(()),
    }
}

fn spectrum(a: SpectrumArgs, io: &mut Io) -> CliResult<()> {
    positive("--cutoff", a.cutoff)?;
    let data = ingest(&a.input.input, &a.input.spec())?;
    let spec = power_spectrum(&data.series)?;
    let suggestion = suggest_gamma(&data.series, a.cutoff)?;
    let estimated = match a.cutoff {
        Some(_) => None,
        None => Some(estimate_cutoff_frequency(&spec)?),
    };

    out_dir(&a.out.out)?;
    let mut table = Table::new(&["frequency", "power"]);
    for (f, p) in spec.frequencies.iter().zip(&spec.power) {
        table.push_row(&[*f, *p]);
    }
    write_table(&a.out.out.join("spectrum.csv"), &table)?;
    if a.out.plot {
        let chart = Chart {
            title: "Power spectrum".into(),
            x_label: "frequency (Hz)".into(),
            y_label: "power".into(),
            log_x: true,
            log_y: true,
            series: vec![Series {
                label: "periodogram".into(),
                color: "black",
                style: Style::Line,
                points: spec.frequencies.iter().copied().zip(spec.power.iter().copied()).skip(1).collect(),
            }],
            markers: vec![(suggestion.cutoff, format!("cutoff {:.3e} Hz", suggestion.cutoff))],
        };
        write_atomic(&a.out.out.join("spectrum.svg"), &chart.render())?;
    }

    io.say(&format!("cutoff_hz: {:.6e}", suggestion.cutoff));
    io.say(&format!("cutoff_source: {}", if estimated.is_some() { "spectrum" } else { "override" }));
    io.say(&format!("gamma: {:.6e}", suggestion.gamma));
    for w in &suggestion.warnings {
        io.warn(w);
    }
    Ok(())
}

fn diff(a: DiffArgs, io: &mut Io) -> CliResult<()> {
    positive("--cutoff", a.cutoff)?;
    if a.cutoff.is_some() && a.gamma != GammaChoice::Auto {
        return Err(CliError::Usage("--cutoff only applies with --gamma auto".into()));
    }
    let data = ingest(&a.input.input, &a.input.spec())?;
    let series = &data.series;
    let (gamma, cutoff, warnings) = match a.gamma {
        GammaChoice::Auto => {
            let s = suggest_gamma(series, a.cutoff)?;
            (s.gamma, Some(s.cutoff), s.warnings)
        }
        GammaChoice::Value(g) => (g, None, Vec::new()),
    };
    out_dir(&a.out.out)?;

    let mut report = String::new();
    let _ = writeln!(report, "method: {}", a.method);
    let _ = writeln!(report, "gamma: {}", format_number(gamma));
    let _ = writeln!(report, "gamma_source: {}", if cutoff.is_some() { "auto" } else { "explicit" });
    match cutoff {
        Some(c) => {
            let _ = writeln!(report, "cutoff_hz: {}", format_number(c));
        }
        None => report.push_str("cutoff_hz: none\n"),
    }
    let _ = writeln!(report, "samples: {}", series.len());
    let _ = writeln!(report, "dt: {}", format_number(series.dt()));

    let result = match optimize_params(a.method, series, gamma, None) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(report, "status: failed");
            let _ = writeln!(report, "error: {e}");
            write_warnings(&mut report, &warnings);
            write_atomic(&a.out.out.join("report.txt"), &report)?;
            for w in &warnings {
                io.warn(w);
            }
            return Err(CliError::Numerical(e.to_string()));
        }
    };

    let l = &result.best_loss;
    report.push_str("status: ok\n");
    let _ = writeln!(report, "params: {}", result.best_params);
    let _ = writeln!(report, "loss_total: {}", format_number(l.total));
    let _ = writeln!(report, "loss_fidelity: {}", format_number(l.fidelity));
    let _ = writeln!(report, "loss_smoothness: {}", format_number(l.smoothness));
    let _ = writeln!(report, "mu: {}", format_number(l.mu));
    let _ = writeln!(report, "starts: {}", result.starts.len());
    for (i, s) in result.starts.iter().enumerate() {
        let _ = writeln!(
            report,
            "start {i}: from {} ({}) to {} ({}), {} iterations{}",
            s.initial,
            format_number(s.initial_loss),
            s.params,
            format_number(s.loss),
            s.iterations,
            if s.converged { "" } else { ", not converged" }
        );
    }
    write_warnings(&mut report, &warnings);

    let mut table = Table::new(&["t", "y", "x_hat", "dxdt_hat"]);
    for k in 0..series.len() {
        table.push_row(&[data.times[k], series.values()[k], result.estimate.x_hat[k], result.estimate.dxdt_hat[k]]);
    }
    write_table(&a.out.out.join("result.csv"), &table)?;
    write_atomic(&a.out.out.join("report.txt"), &report)?;
    if a.out.plot {
        let chart = Chart {
            title: format!("Derivative estimate ({})", a.method),
            x_label: "t".into(),
            y_label: "dx/dt".into(),
            series: vec![Series {
                label: "dxdt_hat".into(),
                color: "darkviolet",
                style: Style::Line,
                points: data.times.iter().copied().zip(result.estimate.dxdt_hat.iter().copied()).collect(),
            }],
            ..Default::default()
        };
        write_atomic(&a.out.out.join("result.svg"), &chart.render())?;
    }

    io.say(&format!("method: {}", a.method));
    io.say(&format!("gamma: {:.6e}", gamma));
    io.say(&format!("params: {}", result.best_params));
    io.say(&format!("loss: {:.6e}", l.total));
    for w in &warnings {
        io.warn(w);
    }
    Ok(())
}

fn write_warnings(report: &mut String, warnings: &[String]) {
    if warnings.is_empty() {
        report.push_str("warnings: none\n");
    }
    for w in warnings {
        let _ = writeln!(report, "warning: {w}");
    }
}

fn param_headers(method: Method) -> &'static [&'static str] {
    match method {
        Method::Butterworth => &["order", "cutoff"],
        Method::SavGol => &["window", "polyorder", "smooth_window"],
        Method::Kalman => &["q", "r"],
        Method::Tvrj => &["gamma_tv"],
    }
}

fn param_values(p: &MethodParams) -> Vec<f64> {
    match p {
        MethodParams::Butterworth(b) => vec![b.order() as f64, b.cutoff()],
        MethodParams::SavGol(s) => vec![s.window() as f64, s.polyorder() as f64, s.smooth_window() as f64],
        MethodParams::Kalman(k) => vec![k.q(), k.r()],
        MethodParams::Tvrj(t) => vec![t.gamma_tv()],
    }
}

const METRIC_HEADERS: [&str; 5] = ["rmse", "error_correlation", "loss_total", "fidelity", "smoothness"];

fn records_table(method: Method, records: &[SweepRecord], with_gamma: bool) -> Table {
    let mut headers: Vec<&str> = Vec::new();
    if with_gamma {
        headers.push("gamma");
    }
    headers.extend_from_slice(param_headers(method));
    headers.extend_from_slice(&METRIC_HEADERS);
    let mut table = Table::new(&headers);
    for r in records {
        let mut row = Vec::with_capacity(headers.len());
        if with_gamma {
            row.push(r.gamma.unwrap_or(f64::NAN));
        }
        row.extend(param_values(&r.params));
        row.extend([r.metrics.rmse, r.metrics.error_correlation, r.loss.total, r.loss.fidelity, r.loss.smoothness]);
        table.push_row(&row);
    }
    table
}

fn sweep(a: SweepArgs, io: &mut Io) -> CliResult<()> {
    let grid = parse_grid(&a.grid)?;
    let (series, truth) = match (&a.problem, &a.input) {
        (Some(kind), None) => {
            let kind: ProblemKind = kind.parse()?;
            let cfg = ProblemConfig {
                dt: a.dt.unwrap_or(0.01),
                duration: a.duration,
                noise: Noise::Relative(a.noise),
                seed: a.seed,
            };
            let p = generate(&kind, &cfg)?;
            (p.noisy, p.truth_dxdt)
        }
        (None, Some(path)) => {
            let spec = ColumnSpec { dt: a.dt, time_col: a.time_col.clone(), value_col: a.value_col.clone() };
            let data = ingest(path, &spec)?;
            let truth_col = a.truth_col.as_deref().expect("clap requires --truth-col with --input");
            let table = read_table(path)?;
            let truth = table
                .column(truth_col)
                .ok_or_else(|| CliError::Usage(format!("{}: no column named '{truth_col}'", path.display())))?
                .to_vec();
            (data.series, truth)
        }
        _ => return Err(CliError::Usage("give exactly one of --problem or --input".into())),
    };

    let records = gamma_sweep_against(a.method, &series, &truth, &grid)?;
    let brute = if a.brute { Some(brute_force_grid_against(&series, &truth, &default_savgol_grid(series.len()))?) } else { None };

    out_dir(&a.out.out)?;
    write_table(&a.out.out.join("sweep.csv"), &records_table(a.method, &records, true))?;
    if let Some(b) = &brute {
        write_table(&a.out.out.join("grid.csv"), &records_table(Method::SavGol, b, false))?;
    }
    if a.out.plot {
        let mut series_list = Vec::new();
        if let Some(b) = &brute {
            let front = pareto_front(b);
            series_list.push(Series {
                label: format!("{} grid points", b.len()),
                color: "gray",
                style: Style::Dots,
                points: b.iter().map(|r| (r.metrics.error_correlation, r.metrics.rmse)).collect(),
            });
            series_list.push(Series {
                label: "grid front".into(),
                color: "black",
                style: Style::Line,
                points: front.iter().map(|&i| (b[i].metrics.error_correlation, b[i].metrics.rmse)).collect(),
            });
        }
        series_list.push(Series {
            label: "loss-weight sweep".into(),
            color: "darkviolet",
            style: Style::Line,
            points: records.iter().map(|r| (r.metrics.error_correlation, r.metrics.rmse)).collect(),
        });
        let chart = Chart {
            title: format!("Accuracy trade-off ({})", a.method),
            x_label: "error correlation".into(),
            y_label: "RMSE".into(),
            log_y: true,
            series: series_list,
            ..Default::default()
        };
        write_atomic(&a.out.out.join("pareto.svg"), &chart.render())?;
    }
    io.say(&format!("sweep points: {}", records.len()));
    if let Some(b) = &brute {
        io.say(&format!("grid points: {}", b.len()));
    }
    Ok(())
}

fn synth(a: SynthArgs, io: &mut Io) -> CliResult<()> {
    let mut kind: ProblemKind = a.kind.parse()?;
    if a.freq.is_some() || a.amplitude.is_some() {
        match &mut kind {
            ProblemKind::Sine { freq, amplitude } => {
                positive("--freq", a.freq)?;
                *freq = a.freq.unwrap_or(*freq);
                *amplitude = a.amplitude.unwrap_or(*amplitude);
            }
            _ => return Err(CliError::Usage("--freq and --amplitude only apply to --kind sine".into())),
        }
    }
    let noise = match a.noise_abs {
        Some(s) => Noise::Absolute(s),
        None => Noise::Relative(a.noise),
    };
    let p = generate(&kind, &ProblemConfig { dt: a.dt, duration: a.duration, noise, seed: a.seed })?;
    out_dir(&a.out.out)?;
    let mut table = Table::new(&["t", "y", "x_true", "dxdt_true"]);
    let t = p.times();
    for k in 0..p.noisy.len() {
        table.push_row(&[t[k], p.noisy.values()[k], p.truth_x[k], p.truth_dxdt[k]]);
    }
    write_table(&a.out.out.join("problem.csv"), &table)?;
    if a.out.plot {
        let chart = Chart {
            title: format!("Synthetic problem ({})", p.kind),
            x_label: "t".into(),
            y_label: "x".into(),
            series: vec![
                Series {
                    label: "y".into(),
                    color: "gray",
                    style: Style::Dots,
                    points: t.iter().copied().zip(p.noisy.values().iter().copied()).collect(),
                },
                Series {
                    label: "x_true".into(),
                    color: "black",
                    style: Style::Line,
                    points: t.iter().copied().zip(p.truth_x.iter().copied()).collect(),
                },
            ],
            ..Default::default()
        };
        write_atomic(&a.out.out.join("problem.svg"), &chart.render())?;
    }
    io.say(&format!("kind: {}", p.kind));
    io.say(&format!("samples: {}", p.noisy.len()));
    io.say(&format!("noise_sigma: {:.6e}", p.noise_sigma));
    Ok(())
}

fn fit_gamma(a: FitGammaArgs, io: &mut Io) -> CliResult<()> {
    let gamma_grid = parse_grid(&a.grid)?;
    for (name, values) in [("--freqs", &a.freqs), ("--dts", &a.dts), ("--durations", &a.durations)] {
        for v in values.iter() {
            positive(name, Some(*v))?;
        }
    }
    if a.noises.iter().any(|n| !(n.is_finite() && *n >= 0.0)) {
        return Err(CliError::Usage("--noises must be non-negative".into()));
    }
    let config = TrainingConfig {
        freqs: a.freqs,
        dts: a.dts,
        noise_fractions: a.noises,
        durations: a.durations,
        gamma_grid,
        seed: a.seed,
    };
    let observations = heuristic_training_sweep(&config)?;
    let fit = fit_gamma_model(&observations.iter().map(|o| GammaObservation::from(*o)).collect::<Vec<_>>())?;

    out_dir(&a.out.out)?;
    let mut table = Table::new(&["freq", "dt", "noise_fraction", "duration", "gamma", "gamma_index"]);
    for o in &observations {
        table.push_row(&[o.freq, o.dt, o.noise_fraction, o.duration, o.gamma, o.gamma_index as f64]);
    }
    write_table(&a.out.out.join("training.csv"), &table)?;
    let m = &fit.model;
    let mut text = String::new();
    let _ = writeln!(text, "observations: {}", observations.len());
    let _ = writeln!(text, "coef_log_freq: {}", format_number(m.coef_log_freq));
    let _ = writeln!(text, "coef_log_dt: {}", format_number(m.coef_log_dt));
    let _ = writeln!(text, "intercept: {}", format_number(m.intercept));
    let _ = writeln!(text, "r_squared: {}", format_number(fit.r_squared));
    let _ = writeln!(text, "adjusted_r_squared: {}", format_number(fit.adjusted_r_squared));
    write_atomic(&a.out.out.join("fit.txt"), &text)?;
    io.say(text.trim_end());
    Ok(())
}
