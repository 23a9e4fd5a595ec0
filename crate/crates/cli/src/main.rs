use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use optonoise::colfile::ColumnFile;
use optonoise::config::{validate_config, ConfigReport, ParamFile};
use optonoise::drive::synthesize;
use optonoise::sweep::{
    parse_engines, run_sweep, Axis, DriveFamily, Grid, Manifest, Preset, SweepPlan, DEFAULT_SAMPLES, DEFAULT_SEED,
};
use optonoise::{DriveSpec, Sideband};

/// Overrides the default output directory (`--out` still wins).
const OUT_ENV: &str = "OPTONOISE_OUT";
const DEFAULT_OUT: &str = "optonoise-out";

const EXIT_USAGE: u8 = 1;
const EXIT_ALL_FAILED: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "optonoise", version, about = "Noise- and two-tone-driven optomechanics sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a parameter sweep and write CSV plus a JSON manifest.
    Sweep(SweepArgs),
    /// Check a parameter file and print derived quantities.
    Validate(ValidateArgs),
    /// Synthesize one drive envelope into a binary column file.
    Envelope(EnvelopeArgs),
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Parameter file (TOML, Hz) or bundled preset name.
    #[arg(long, default_value = "paper_device", conflicts_with = "manifest")]
    params: String,
    /// power_sweep_blue_noise, bandwidth_sweep_blue_noise,
    /// spacing_sweep_blue_twotone, spacing_sweep_red_twotone or custom.
    #[arg(long, required_unless_present = "manifest")]
    preset: Option<String>,
    /// Comma-separated subset of analytic,quasistatic,langevin.
    #[arg(long)]
    engine: Option<String>,
    /// start:stop:steps[:log]
    #[arg(long)]
    grid: Option<String>,
    /// Base seed; row seeds derive from it [default: 20150417]
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [env: OPTONOISE_OUT]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo samples per quasi-static noise point.
    #[arg(long)]
    samples: Option<u64>,
    /// Langevin simulated time, s.
    #[arg(long)]
    duration: Option<f64>,
    /// Langevin integration step, s.
    #[arg(long)]
    dt: Option<f64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Repetitions per grid point, each with its own seed.
    #[arg(long)]
    repeats: Option<u32>,
    /// Rerun the plan stored in a manifest.
    #[arg(long, conflicts_with_all = ["preset", "engine", "grid", "seed", "samples", "duration", "dt", "repeats"])]
    manifest: Option<PathBuf>,
    /// Custom plans: noise, two_tone or coherent.
    #[arg(long)]
    drive: Option<String>,
    /// Custom plans: red or blue.
    #[arg(long)]
    sideband: Option<String>,
    /// Custom plans: nbar0, sigma_hz or delta_hz.
    #[arg(long)]
    axis: Option<String>,
    /// Custom plans: comma-separated values held fixed on each curve.
    #[arg(long)]
    fixed: Option<String>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long)]
    params: String,
    /// Sample step to check against the drive band, s.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct EnvelopeArgs {
    #[arg(long, default_value = "paper_device")]
    params: String,
    /// noise, two_tone or coherent.
    #[arg(long)]
    drive: String,
    #[arg(long)]
    sideband: String,
    /// Mean intracavity photon number.
    #[arg(long)]
    nbar0: f64,
    /// Noise bandwidth or tone spacing, Hz.
    #[arg(long, default_value_t = 0.0)]
    width_hz: f64,
    #[arg(long)]
    duration: f64,
    #[arg(long)]
    dt: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
}

/// Error carrying its exit status.
struct Failure {
    code: u8,
    message: String,
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: e.to_string(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Sweep(args) => sweep(args),
        Command::Validate(args) => validate(args),
        Command::Envelope(args) => envelope(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn parse_list(text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| usage(format!("`{s}` is not a number"))))
        .collect()
}

fn build_plan(args: &SweepArgs, file: &ParamFile) -> Result<SweepPlan, Failure> {
    let p = file.to_params().map_err(usage)?;
    let preset: Preset = args.preset.as_deref().unwrap_or_default().parse().map_err(usage)?;
    let mut plan = if preset == Preset::Custom {
        let need = |v: &Option<String>, flag: &str| {
            v.clone()
                .ok_or_else(|| usage(format!("--preset custom needs --{flag}")))
        };
        let drive: DriveFamily = need(&args.drive, "drive")?.parse().map_err(usage)?;
        let grid: Grid = need(&args.grid, "grid")?.parse().map_err(usage)?;
        let axis: Axis = match &args.axis {
            Some(a) => a.parse().map_err(usage)?,
            None => Axis::Nbar0,
        };
        let curves = match &args.fixed {
            Some(list) => parse_list(list)?,
            None if drive == DriveFamily::Coherent => vec![],
            None => return Err(usage("--preset custom needs --fixed for noise and two-tone drives")),
        };
        SweepPlan {
            preset,
            drive,
            sideband: Sideband::Blue,
            axis,
            grid,
            curves,
            engines: vec![optonoise::sweep::Engine::Analytic],
            seed: DEFAULT_SEED,
            repeats: 1,
            samples: DEFAULT_SAMPLES,
            duration: None,
            dt: None,
        }
    } else {
        for (flag, given) in [("drive", &args.drive), ("axis", &args.axis), ("fixed", &args.fixed), ("sideband", &args.sideband)] {
            if given.is_some() {
                return Err(usage(format!("--{flag} applies only to --preset custom")));
            }
        }
        SweepPlan::preset(preset, &p).map_err(usage)?
    };
    if let Some(s) = &args.sideband {
        plan.sideband = s.parse().map_err(usage)?;
    }
    if let Some(g) = &args.grid {
        plan.grid = g.parse().map_err(usage)?;
    }
    if let Some(e) = &args.engine {
        plan.engines = parse_engines(e).map_err(usage)?;
    }
    plan.seed = args.seed.unwrap_or(plan.seed);
    plan.samples = args.samples.unwrap_or(plan.samples);
    plan.repeats = args.repeats.unwrap_or(plan.repeats);
    plan.duration = args.duration.or(plan.duration);
    plan.dt = args.dt.or(plan.dt);
    plan.validate(&p).map_err(usage)?;
    Ok(plan)
}

fn sweep(args: SweepArgs) -> Result<u8, Failure> {
    let (plan, file, source) = match &args.manifest {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let m = Manifest::from_json(&text).map_err(usage)?;
            (m.plan, m.params, m.params_source)
        }
        None => {
            let file = ParamFile::load(&args.params).map_err(|e| usage(format!("{}: {e}", args.params)))?;
            (build_plan(&args, &file)?, file, args.params.clone())
        }
    };
    let p = file.to_params().map_err(usage)?;
    let dir = out_dir(args.out);
    std::fs::create_dir_all(&dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;

    info!("running {} rows of {}", plan.row_count(), plan.preset);
    let started = Instant::now();
    let result = run_sweep(&plan, &p, args.jobs).map_err(usage)?;
    let wall = started.elapsed().as_secs_f64();

    let csv_name = format!("{}.csv", plan.preset);
    let csv_path = dir.join(&csv_name);
    let manifest_path = dir.join(format!("{}.manifest.json", plan.preset));
    write(&csv_path, &result.csv_string())?;
    let manifest = Manifest::new(&result, file, &source, &csv_name, wall);
    write(&manifest_path, &manifest.to_json())?;

    let failed = result.failed_count();
    let total = result.rows.len();
    eprintln!(
        "{total} rows ({failed} failed) in {wall:.2} s -> {}, {}",
        csv_path.display(),
        manifest_path.display()
    );
    Ok(match failed {
        0 => 0,
        n if n == total => EXIT_ALL_FAILED,
        _ => EXIT_PARTIAL,
    })
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn validate(args: ValidateArgs) -> Result<u8, Failure> {
    let file = ParamFile::load(&args.params).map_err(|e| usage(format!("{}: {e}", args.params)))?;
    let report = validate_config(&file, args.dt).map_err(usage)?;
    for w in &report.warnings {
        warn!("{w}");
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        print_report(&report);
    }
    Ok(0)
}

fn print_report(r: &ConfigReport) {
    println!("{:<20} {:>14} {:>14}", "parameter", "Hz", "rad/s");
    for (name, rate) in [("omega_m", &r.omega_m), ("gamma", &r.gamma), ("kappa", &r.kappa), ("g0", &r.g0)] {
        println!("{name:<20} {:>14.6e} {:>14.6e}", rate.hz, rate.rad_s);
    }
    println!("{:<20} {:>14.6e}", "n_th", r.n_th);
    let note = if r.n_ba_defaulted { " (default kappa^2/16omega_m^2)" } else { "" };
    println!("{:<20} {:>14.6e}{note}", "n_ba", r.n_ba);
    println!("{:<20} {:>14.6e}", "n_max", r.n_max);
    println!("{:<20} {:>14.6e}", "threshold_photons", r.threshold_photons);
    println!("{:<20} {:>14.6e}", "threshold_flux", r.threshold_flux);
    println!("{:<20} {:>14.6e}", "q_red", r.q_red);
    println!("{:<20} {:>14.6e}", "q_blue", r.q_blue);
    for w in &r.warnings {
        println!("warning: {w}");
    }
}

fn envelope(args: EnvelopeArgs) -> Result<u8, Failure> {
    let file = ParamFile::load(&args.params).map_err(|e| usage(format!("{}: {e}", args.params)))?;
    let p = file.to_params().map_err(usage)?;
    let sideband: Sideband = args.sideband.parse().map_err(usage)?;
    let width = args.width_hz * std::f64::consts::TAU;
    let flux = p.flux_from_nbar0(args.nbar0);
    let spec = match args.drive.parse::<DriveFamily>().map_err(usage)? {
        DriveFamily::Noise => DriveSpec::box_noise(sideband, width, flux),
        DriveFamily::TwoTone => DriveSpec::two_tone(sideband, width, (flux / 2.0).sqrt()),
        DriveFamily::Coherent => DriveSpec::coherent(sideband, args.nbar0),
    };
    spec.validate(&p).map_err(usage)?;
    let env = synthesize(&p, &spec, args.duration, args.dt, args.seed).map_err(usage)?;
    let mut buf = Vec::new();
    ColumnFile::from_envelope(&env).write_to(&mut buf).map_err(usage)?;
    std::fs::write(&args.out, buf).map_err(|e| usage(format!("{}: {e}", args.out.display())))?;
    eprintln!("{} samples -> {}", env.len(), args.out.display());
    Ok(0)
}
