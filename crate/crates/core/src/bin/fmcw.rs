//! `fmcw`: synthesize, estimate, bound and simulate from the command line.
//!
//! Every subcommand reads an optional TOML file, applies `--set key=value`
//! overrides on top of it and writes CSV into the output directory
//! (`--out`, else `$FMCW_OUT_DIR`, else the working directory).
//!
//! Exit status: 0 on success, 1 for usage, configuration or I/O errors,
//! 2 when the numerics fail (unresolved peaks, singular systems, ...),
//! 3 when a parking run stops at the frame limit without reaching the goal.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use fmcw_core::config::{load_document, parse_document};
use fmcw_core::crb::{crb_at_snr, write_crb_csv};
use fmcw_core::estimate::{estimate_targets, Algorithm, EstimatorOptions};
use fmcw_core::experiments::{run_point_cloud, run_rmse_sweep, write_point_cloud_csv, write_point_summary_csv, Scenario};
use fmcw_core::signal::synthesize_measurement;
use fmcw_core::slam::{run_parking, ParkingRun, ParkingScene, ReferencePath, SceneEstimator};
use fmcw_core::spectral::{bias_prediction, fft2d_spectrum, lse_slice, music2d_spectrum, write_spectrum_csv};
use fmcw_core::{Error, MeasurementMatrix, RadarConfig, Target};

#[derive(Parser)]
#[command(name = "fmcw", version, about = "FMCW MIMO radar range/angle estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, env = "FMCW_OUT_DIR", default_value = ".")]
    out: PathBuf,
    /// Override a configuration key, e.g. `--set sweep.trials=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Random seed; replaces the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a measurement matrix to measurement.toml + measurement.bin.
    Synth(Common),
    /// Estimate targets from a measurement (synthesized from --config unless --input is given).
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "mle")]
        algo: Algorithm,
        /// Header written by `synth`; samples are read from the sibling .bin file.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Also write the algorithm's spectrum (2D for FFT/MUSIC, fixed-range slice for LSE).
        #[arg(long)]
        spectrum: bool,
        /// Zero-padding factor of the written 2D spectrum.
        #[arg(long, default_value_t = 8)]
        pad: usize,
    },
    /// Predicted 2D-FFT range and angle bias for a single target.
    Bias {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        theta_deg: f64,
    },
    /// Cramér–Rao bounds of the first target over an SNR range.
    Crb {
        #[command(flatten)]
        common: Common,
        /// `start:step:stop` in dB, or a single value.
        #[arg(long, default_value = "0:5:30", allow_hyphen_values = true)]
        snr_db: String,
    },
    /// Monte-Carlo RMSE versus SNR.
    Sweep(Common),
    /// Scatterer point-cloud accuracy at the scene's snapshot pose.
    Pointcloud {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "fft2d,music2d,lse,mle")]
        estimators: String,
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
    /// Closed-loop back-in parking with radar/ICP localization.
    Park {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "exact,fft2d,music2d,lse,mle")]
        estimators: String,
        /// Number of consecutive seeds starting at --seed (default 1).
        #[arg(long, default_value_t = 1)]
        seeds: u64,
    },
}

/// Targets plus noise for `synth`, `estimate` and `crb`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasurementSpec {
    #[serde(default = "RadarConfig::automotive_77ghz")]
    radar: RadarConfig,
    targets: Vec<Target>,
    /// Per-target SNR of the first target; noiseless when absent.
    snr_db: Option<f64>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    estimator: EstimatorOptions,
}

impl MeasurementSpec {
    fn sigma(&self) -> f64 {
        self.snr_db
            .map_or(0.0, |snr| self.radar.sigma_for_snr(self.targets[0].a, snr))
    }

    fn synthesize(&self) -> Result<MeasurementMatrix, Failure> {
        Ok(synthesize_measurement(&self.radar, &self.targets, self.sigma(), self.seed)?)
    }
}

/// Error plus the exit status it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_numerical() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Synth(common) => synth(&common),
        Command::Estimate {
            common,
            algo,
            input,
            spectrum,
            pad,
        } => estimate(&common, algo, input.as_deref(), spectrum, pad),
        Command::Bias { common, theta_deg } => bias(&common, theta_deg),
        Command::Crb { common, snr_db } => crb(&common, &snr_db),
        Command::Sweep(common) => sweep(&common),
        Command::Pointcloud {
            common,
            estimators,
            trials,
        } => pointcloud(&common, &estimators, trials),
        Command::Park {
            common,
            estimators,
            seeds,
        } => park(&common, &estimators, seeds),
    }
}

impl Common {
    fn log_startup(&self) {
        match &self.config {
            Some(p) => eprintln!("config: {}", p.display()),
            None => eprintln!("config: built-in defaults"),
        }
        for ov in &self.overrides {
            eprintln!("override: {ov}");
        }
        if let Some(s) = self.seed {
            eprintln!("override: seed={s}");
        }
    }

    fn out_file(&self, name: &str) -> CliResult<BufWriter<File>> {
        fs::create_dir_all(&self.out).map_err(|e| usage(format!("{}: {e}", self.out.display())))?;
        let path = self.out.join(name);
        let f = File::create(&path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        Ok(BufWriter::new(f))
    }

    fn measurement(&self) -> CliResult<MeasurementSpec> {
        self.log_startup();
        let path = self
            .config
            .as_deref()
            .ok_or_else(|| usage("--config is required (a file with `targets`)"))?;
        let mut spec: MeasurementSpec = load_document(path, &self.overrides)?;
        if spec.targets.is_empty() {
            return Err(usage("configuration has no targets"));
        }
        for t in &spec.targets {
            t.validate(&spec.radar)?;
        }
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        Ok(spec)
    }

    fn scene(&self) -> CliResult<ParkingScene> {
        self.log_startup();
        Ok(match &self.config {
            Some(p) => ParkingScene::load(p, &self.overrides)?,
            None => ParkingScene::parse(fmcw_core::slam::DEFAULT_SCENE, &self.overrides)?,
        })
    }
}

fn io(path: &str) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| usage(format!("{path}: {e}"))
}

fn synth(common: &Common) -> CliResult {
    let spec = common.measurement()?;
    let z = spec.synthesize()?;
    fs::create_dir_all(&common.out).map_err(|e| usage(format!("{}: {e}", common.out.display())))?;
    let header = common.out.join("measurement.toml");
    z.write_pair(&header, &header.with_extension("bin"))?;
    println!(
        "synth: {}x{} samples, {} targets, sigma {:.4e} -> {}",
        z.rows(),
        z.cols(),
        spec.targets.len(),
        z.sigma(),
        header.display()
    );
    Ok(())
}

fn estimate(common: &Common, algo: Algorithm, input: Option<&Path>, spectrum: bool, pad: usize) -> CliResult {
    let spec = common.measurement()?;
    let z = match input {
        Some(h) => MeasurementMatrix::read_pair(h, &h.with_extension("bin"))?,
        None => spec.synthesize()?,
    };
    let k = spec.targets.len();
    let out = estimate_targets(algo, &z, k, &spec.estimator)?;
    let name = format!("estimate_{algo}.csv");
    let mut w = common.out_file(&name)?;
    writeln!(w, "target,r_m,theta_deg,a,psi,power").map_err(io(&name))?;
    for (i, (e, p)) in out.estimates.iter().zip(&out.power).enumerate() {
        writeln!(w, "{i},{},{},{},{},{p}", e.r, e.theta.to_degrees(), e.a, e.psi).map_err(io(&name))?;
    }
    if let Some(d) = &out.ml_diagnostics {
        d.write_csv(common.out_file("ml_iterations.csv")?).map_err(io("ml_iterations.csv"))?;
    }
    if spectrum {
        let sname = format!("spectrum_{algo}.csv");
        let mut w = common.out_file(&sname)?;
        match algo {
            Algorithm::Fft2d | Algorithm::Mle => write_spectrum_csv(&mut w, &fft2d_spectrum(&z, pad, pad)),
            Algorithm::Music2d => write_spectrum_csv(&mut w, &music2d_spectrum(&z, k, spec.estimator.subarray, pad, pad)?),
            Algorithm::Lse => {
                // Angle cut through the first target's range, 0.01° steps.
                let thetas: Vec<f64> = (-9000..=9000).map(|i| (i as f64 * 0.01).to_radians()).collect();
                let values = lse_slice(&z, spec.targets[0].r, &thetas);
                writeln!(w, "theta_deg,magnitude").and_then(|_| {
                    thetas
                        .iter()
                        .zip(&values)
                        .try_for_each(|(t, v)| writeln!(w, "{},{v}", t.to_degrees()))
                })
            }
        }
        .map_err(io(&sname))?;
    }
    let summary: Vec<String> = out
        .estimates
        .iter()
        .map(|e| format!("({:.6} m, {:.4} deg)", e.r, e.theta.to_degrees()))
        .collect();
    println!("estimate {algo}: {}", summary.join(" "));
    Ok(())
}

fn radar_only(common: &Common) -> CliResult<RadarConfig> {
    // Other sections (targets, sweep, ...) belong to other subcommands.
    #[derive(Deserialize)]
    struct RadarFile {
        #[serde(default = "RadarConfig::automotive_77ghz")]
        radar: RadarConfig,
        #[serde(flatten)]
        _rest: toml::Table,
    }
    let file: RadarFile = match &common.config {
        Some(p) => load_document(p, &common.overrides)?,
        None => parse_document("", &common.overrides)?,
    };
    Ok(file.radar)
}

fn bias(common: &Common, theta_deg: f64) -> CliResult {
    common.log_startup();
    let radar = radar_only(common)?;
    let (r_b, t_b) = bias_prediction(&radar, theta_deg.to_radians())?;
    let mut w = common.out_file("bias.csv")?;
    writeln!(w, "theta_deg,range_bias_m,angle_bias_deg\n{theta_deg},{r_b},{}", t_b.to_degrees()).map_err(io("bias.csv"))?;
    println!("bias at {theta_deg} deg: range {r_b:.4} m, angle {:.3} deg", t_b.to_degrees());
    Ok(())
}

/// `a:step:b` inclusive, or a single number.
fn parse_range(s: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("bad SNR range `{s}`")))?;
    match parts[..] {
        [v] => Ok(vec![v]),
        [a, step, b] if step > 0.0 && b >= a => {
            let n = ((b - a) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| a + i as f64 * step).collect())
        }
        _ => Err(usage(format!("SNR range `{s}` must be a:step:b with step > 0 and b >= a"))),
    }
}

fn crb(common: &Common, snr_db: &str) -> CliResult {
    let spec = common.measurement()?;
    let target = spec.targets[0];
    let rows = parse_range(snr_db)?
        .into_iter()
        .map(|snr| Ok((snr, crb_at_snr(&spec.radar, &target, snr)?)))
        .collect::<Result<Vec<_>, Error>>()?;
    write_crb_csv(common.out_file("crb.csv")?, &rows).map_err(io("crb.csv"))?;
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    println!(
        "crb: {} points, sigma_r {:.3e} -> {:.3e} m, sigma_theta {:.3e} -> {:.3e} deg",
        rows.len(),
        first.1.sigma_r,
        last.1.sigma_r,
        first.1.sigma_theta.to_degrees(),
        last.1.sigma_theta.to_degrees()
    );
    Ok(())
}

fn sweep(common: &Common) -> CliResult {
    common.log_startup();
    let path = common.config.as_deref().ok_or_else(|| usage("--config is required"))?;
    let mut scenario = Scenario::load(path, &common.overrides)?;
    if let Some(s) = common.seed {
        scenario.sweep.seed_base = s;
    }
    let table = run_rmse_sweep(&scenario)?;
    table.write_csv(common.out_file("rmse.csv")?).map_err(io("rmse.csv"))?;
    println!("sweep: {} rows over {} trials -> rmse.csv", table.rows.len(), table.trials);
    Ok(())
}

fn parse_estimators(list: &str) -> CliResult<Vec<SceneEstimator>> {
    let v = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<SceneEstimator>())
        .collect::<Result<Vec<_>, Error>>()?;
    if v.is_empty() {
        return Err(usage("no estimators given"));
    }
    Ok(v)
}

fn pointcloud(common: &Common, estimators: &str, trials: usize) -> CliResult {
    let scene = common.scene()?;
    let seed = common.seed.unwrap_or(0);
    if trials == 0 {
        return Err(usage("--trials must be >= 1"));
    }
    let mut rows = Vec::new();
    for est in parse_estimators(estimators)? {
        let s = run_point_cloud(&scene, est, trials, seed)?;
        println!(
            "pointcloud {}: {}/{} detected, rmse r {:.5} m, theta {:.3} deg, position {:.4} m",
            s.estimator, s.detected, s.scatterers, s.rmse_r, s.rmse_theta_deg, s.rmse_position
        );
        rows.push(s);
    }
    write_point_summary_csv(common.out_file("pointcloud_summary.csv")?, &rows).map_err(io("pointcloud_summary.csv"))?;
    write_point_cloud_csv(common.out_file("pointcloud_points.csv")?, &rows).map_err(io("pointcloud_points.csv"))?;
    Ok(())
}

fn park(common: &Common, estimators: &str, seeds: u64) -> CliResult {
    let scene = common.scene()?;
    let first = common.seed.unwrap_or(1);
    if seeds == 0 {
        return Err(usage("--seeds must be >= 1"));
    }
    let reference = ReferencePath::from_spec(&scene.path)?;
    let mut w = common.out_file("reference_path.csv")?;
    writeln!(w, "s,x,y,psi").map_err(io("reference_path.csv"))?;
    for p in &reference.points {
        writeln!(w, "{},{},{},{}", p.s, p.position[0], p.position[1], p.heading).map_err(io("reference_path.csv"))?;
    }
    drop(w);

    let mut runs: Vec<ParkingRun> = Vec::new();
    for est in parse_estimators(estimators)? {
        for seed in first..first + seeds {
            let run = run_parking(&scene, est, seed)?;
            println!(
                "park {} seed {}: {} frames, completed {}, final position error {:.4} m",
                run.estimator, seed, run.frames, run.completed, run.final_position_error
            );
            let name = format!("trajectory_{}_seed{seed}.csv", run.estimator);
            run.write_csv(common.out_file(&name)?).map_err(io(&name))?;
            runs.push(run);
        }
    }
    let mut w = common.out_file("park_summary.csv")?;
    writeln!(
        w,
        "estimator,seed,frames,completed,final_position_error_m,final_heading_error_deg,final_goal_distance_m,dead_reckoned_frames,unconverged_icp_frames,failed_radar_frames"
    )
    .map_err(io("park_summary.csv"))?;
    for r in &runs {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.estimator,
            r.seed,
            r.frames,
            r.completed,
            r.final_position_error,
            r.final_heading_error.to_degrees(),
            r.final_goal_distance,
            r.dead_reckoned_frames,
            r.unconverged_icp_frames,
            r.failed_radar_frames
        )
        .map_err(io("park_summary.csv"))?;
    }
    let aborted = runs.iter().filter(|r| !r.completed).count();
    if aborted > 0 {
        return Err(Failure {
            code: 3,
            message: format!("{aborted} of {} runs stopped before reaching the goal", runs.len()),
        });
    }
    Ok(())
}
