//! Batch sweeps over drive power, bandwidth or tone spacing.
//!
//! A [`SweepPlan`] fixes everything that determines the output: the
//! drive family, the swept axis and its grid, the values held fixed on
//! each curve, the engines and the base seed. Rows are computed in
//! parallel and written in plan order, so equal plans give equal CSV bytes
//! regardless of thread count.
//!
//! CSV columns, in order (see [`CSV_COLUMNS`]):
//!
//! | column                 | meaning                                                  |
//! |------------------------|----------------------------------------------------------|
//! | `preset`               | preset tag                                               |
//! | `curve`                | index into the plan's fixed values                       |
//! | `engine`               | `analytic`, `quasistatic` or `langevin`                  |
//! | `repeat`               | repetition index                                         |
//! | `axis`                 | swept quantity (`nbar0`, `sigma_hz`, `delta_hz`)         |
//! | `axis_value`           | grid value                                               |
//! | `sideband`             | `red` or `blue`                                          |
//! | `sigma_hz`             | noise full bandwidth / 2 pi (empty for tones)            |
//! | `delta_hz`             | tone spacing / 2 pi (empty unless two-tone)              |
//! | `F0`                   | mean incident flux, photons/s                            |
//! | `nbar0`                | mean intracavity photon number                           |
//! | `gamma_opt_over_gamma` | `4 g0^2 nbar0 / (kappa gamma)`                           |
//! | `mean_n_m`             | mean phonon occupancy                                    |
//! | `stderr`               | standard error of `mean_n_m` (empty if deterministic)    |
//! | `unstable_fraction`    | share of unstable samples or probability (empty if n/a)  |
//! | `q05`, `q50`, `q95`    | quantiles of `mean_n_m` over the repeats of this point   |
//! | `seed`                 | seed of this row                                         |
//! | `model`                | closed form, `monte_carlo`, `time_average`, `langevin`   |
//! | `status`               | `ok` or `failed`                                         |
//! | `message`              | failure reason (commas replaced)                         |
//!
//! Numbers use Rust's shortest round-trip exponent format (`{:e}`).

use std::fmt::{self, Write as _};
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::AnalyticModel;
use crate::config::ParamFile;
use crate::drive::{coherent_envelope, two_tone_envelope, MAX_PHASE_STEP};
use crate::error::{Error, Result};
use crate::langevin::{integrate, occupancy_from_trace, Drive, SimConfig};
use crate::params::{DriveKind, DriveSpec, PhysParams, Sideband};
use crate::quasistatic::{quantile, quasistatic_mc, quasistatic_timeavg, MIN_MC_SAMPLES};
use crate::rng::derive_seed;

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_150_417;

pub const DEFAULT_SAMPLES: u64 = 1_000_000;

/// Langevin traces keep at most this many states.
const MAX_RECORDS: usize = 200_000;

pub const CSV_COLUMNS: [&str; 22] = [
    "preset",
    "curve",
    "engine",
    "repeat",
    "axis",
    "axis_value",
    "sideband",
    "sigma_hz",
    "delta_hz",
    "F0",
    "nbar0",
    "gamma_opt_over_gamma",
    "mean_n_m",
    "stderr",
    "unstable_fraction",
    "q05",
    "q50",
    "q95",
    "seed",
    "model",
    "status",
    "message",
];

fn plan_error(msg: impl Into<String>) -> Error {
    Error::Plan(msg.into())
}

macro_rules! str_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($text => Ok($name::$variant),)+
                    other => {
                        let known: Vec<&str> = Self::ALL.iter().map(|v| v.as_str()).collect();
                        Err(plan_error(format!(
                            "unknown {} `{other}` (expected one of: {})",
                            stringify!($name).to_lowercase(),
                            known.join(", ")
                        )))
                    }
                }
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Blue noise, occupancy versus photon number at three bandwidths.
    PowerSweepBlueNoise,
    /// Blue noise, occupancy versus bandwidth at fixed photon number.
    BandwidthSweepBlueNoise,
    /// Blue two-tone drive, occupancy versus tone spacing.
    SpacingSweepBlueTwotone,
    /// Red two-tone drive, occupancy versus tone spacing.
    SpacingSweepRedTwotone,
    Custom,
}

str_enum!(Preset {
    PowerSweepBlueNoise => "power_sweep_blue_noise",
    BandwidthSweepBlueNoise => "bandwidth_sweep_blue_noise",
    SpacingSweepBlueTwotone => "spacing_sweep_blue_twotone",
    SpacingSweepRedTwotone => "spacing_sweep_red_twotone",
    Custom => "custom",
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Analytic,
    Quasistatic,
    Langevin,
}

str_enum!(Engine {
    Analytic => "analytic",
    Quasistatic => "quasistatic",
    Langevin => "langevin",
});

/// Parses a comma-separated engine list, dropping repeats.
pub fn parse_engines(list: &str) -> Result<Vec<Engine>> {
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let e: Engine = item.parse()?;
        if !out.contains(&e) {
            out.push(e);
        }
    }
    if out.is_empty() {
        return Err(plan_error("at least one engine must be selected"));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveFamily {
    Noise,
    TwoTone,
    Coherent,
}

str_enum!(DriveFamily {
    Noise => "noise",
    TwoTone => "two_tone",
    Coherent => "coherent",
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Mean intracavity photon number.
    Nbar0,
    /// Noise bandwidth, Hz.
    SigmaHz,
    /// Tone spacing, Hz.
    DeltaHz,
}

str_enum!(Axis {
    Nbar0 => "nbar0",
    SigmaHz => "sigma_hz",
    DeltaHz => "delta_hz",
});

/// `start:stop:steps[:log]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    pub log: bool,
}

impl Grid {
    pub fn linear(start: f64, stop: f64, steps: usize) -> Self {
        Grid { start, stop, steps, log: false }
    }

    pub fn log(start: f64, stop: f64, steps: usize) -> Self {
        Grid { start, stop, steps, log: true }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                let t = i as f64 / last;
                if i == 0 {
                    self.start
                } else if i == self.steps - 1 {
                    self.stop
                } else if self.log {
                    (self.start.ln() + t * (self.stop.ln() - self.start.ln())).exp()
                } else {
                    self.start + t * (self.stop - self.start)
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(plan_error("grid bounds must be finite"));
        }
        if self.steps == 0 {
            return Err(plan_error("grid needs at least one step"));
        }
        if self.log && !(self.start > 0.0 && self.stop > 0.0) {
            return Err(plan_error("log grid bounds must be > 0"));
        }
        if self.steps > 1 {
            let v = self.values();
            let up = v.windows(2).all(|w| w[1] > w[0]);
            let down = v.windows(2).all(|w| w[1] < w[0]);
            if !(up || down) {
                return Err(plan_error(format!("grid {self} is not strictly monotone")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}:{:e}:{}", self.start, self.stop, self.steps)?;
        if self.log {
            f.write_str(":log")?;
        }
        Ok(())
    }
}

impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(plan_error(format!("grid `{s}` is not start:stop:steps[:log]")));
        }
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| plan_error(format!("grid `{s}`: `{t}` is not a number")))
        };
        let steps = parts[2]
            .trim()
            .parse::<usize>()
            .map_err(|_| plan_error(format!("grid `{s}`: `{}` is not a step count", parts[2])))?;
        let log = match parts.get(3).map(|t| t.trim()) {
            None | Some("lin") => false,
            Some("log") => true,
            Some(other) => return Err(plan_error(format!("grid `{s}`: unknown scale `{other}`"))),
        };
        let grid = Grid {
            start: num(parts[0])?,
            stop: num(parts[1])?,
            steps,
            log,
        };
        grid.validate()?;
        Ok(grid)
    }
}

/// Complete description of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub preset: Preset,
    pub drive: DriveFamily,
    pub sideband: Sideband,
    pub axis: Axis,
    pub grid: Grid,
    /// Value held fixed along each curve: the bandwidth or spacing in Hz
    /// when the axis is `nbar0`, otherwise `nbar0`. Empty for coherent
    /// drives.
    pub curves: Vec<f64>,
    pub engines: Vec<Engine>,
    pub seed: u64,
    pub repeats: u32,
    /// Monte Carlo samples per quasi-static noise point.
    pub samples: u64,
    /// Langevin simulated time, s. Defaults to `500 / gamma`.
    pub duration: Option<f64>,
    /// Langevin step, s. Defaults to the largest allowed step.
    pub dt: Option<f64>,
}

impl SweepPlan {
    /// Default plan for a named preset. Grids and fixed values scale with
    /// the coherent self-oscillation threshold `n0*` of `p`.
    pub fn preset(preset: Preset, p: &PhysParams<f64>) -> Result<Self> {
        let n_star = AnalyticModel::new(p)?.self_oscillation_threshold_photons();
        let hz = |w: f64| w / std::f64::consts::TAU;
        let (gamma_hz, kappa_hz, omega_hz) = (hz(p.gamma), hz(p.kappa), hz(p.omega_m));
        let base = SweepPlan {
            preset,
            drive: DriveFamily::Noise,
            sideband: Sideband::Blue,
            axis: Axis::Nbar0,
            grid: Grid::log(0.05 * n_star, 3.0 * n_star, 41),
            curves: vec![],
            engines: vec![Engine::Analytic, Engine::Quasistatic],
            seed: DEFAULT_SEED,
            repeats: 1,
            samples: DEFAULT_SAMPLES,
            duration: None,
            dt: None,
        };
        let plan = match preset {
            Preset::PowerSweepBlueNoise => SweepPlan {
                curves: power_sweep_bandwidths(p),
                ..base
            },
            Preset::BandwidthSweepBlueNoise => SweepPlan {
                axis: Axis::SigmaHz,
                grid: Grid::log(0.1 * gamma_hz, (2.0 * kappa_hz).min(1.9 * omega_hz), 31),
                curves: vec![0.5 * n_star],
                ..base
            },
            Preset::SpacingSweepBlueTwotone => SweepPlan {
                drive: DriveFamily::TwoTone,
                axis: Axis::DeltaHz,
                grid: Grid::log(0.01 * gamma_hz, kappa_hz.min(omega_hz), 31),
                curves: vec![0.4 * n_star],
                ..base
            },
            Preset::SpacingSweepRedTwotone => SweepPlan {
                drive: DriveFamily::TwoTone,
                sideband: Sideband::Red,
                axis: Axis::DeltaHz,
                grid: Grid::log(0.01 * gamma_hz, kappa_hz.min(omega_hz), 31),
                curves: vec![25.0 * n_star],
                ..base
            },
            Preset::Custom => {
                return Err(plan_error(
                    "the custom preset has no defaults; give drive, axis, grid and fixed values",
                ))
            }
        };
        Ok(plan)
    }

    pub fn validate(&self, p: &PhysParams<f64>) -> Result<()> {
        self.grid.validate()?;
        if self.engines.is_empty() {
            return Err(plan_error("at least one engine must be selected"));
        }
        if self.repeats == 0 {
            return Err(plan_error("repeats must be >= 1"));
        }
        let axis_ok = match self.drive {
            DriveFamily::Noise => matches!(self.axis, Axis::Nbar0 | Axis::SigmaHz),
            DriveFamily::TwoTone => matches!(self.axis, Axis::Nbar0 | Axis::DeltaHz),
            DriveFamily::Coherent => self.axis == Axis::Nbar0,
        };
        if !axis_ok {
            return Err(plan_error(format!("axis `{}` does not apply to a {} drive", self.axis, self.drive)));
        }
        match self.drive {
            DriveFamily::Coherent if !self.curves.is_empty() => {
                return Err(plan_error("coherent drives take no fixed values"));
            }
            DriveFamily::Noise | DriveFamily::TwoTone if self.curves.is_empty() => {
                return Err(plan_error("at least one fixed value is needed"));
            }
            _ => {}
        }
        if self.engines.contains(&Engine::Quasistatic)
            && self.drive == DriveFamily::Noise
            && self.samples < MIN_MC_SAMPLES as u64
        {
            return Err(plan_error(format!("samples must be >= {MIN_MC_SAMPLES}")));
        }
        for (name, v) in [("duration", self.duration), ("dt", self.dt)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(plan_error(format!("{name} must be > 0, got {v}")));
                }
            }
        }
        for point in self.points() {
            self.spec(p, &point).validate(p).map_err(|e| plan_error(e.to_string()))?;
        }
        Ok(())
    }

    fn curve_count(&self) -> usize {
        self.curves.len().max(1)
    }

    fn points(&self) -> Vec<Point> {
        let grid = self.grid.values();
        let mut out = Vec::with_capacity(self.curve_count() * grid.len());
        for curve in 0..self.curve_count() {
            let fixed = self.curves.get(curve).copied();
            for (index, &x) in grid.iter().enumerate() {
                let tau = std::f64::consts::TAU;
                let (nbar0, width_hz) = match self.axis {
                    Axis::Nbar0 => (x, fixed),
                    _ => (fixed.unwrap_or(0.0), Some(x)),
                };
                let width = width_hz.map(|w| w * tau);
                out.push(Point {
                    curve,
                    index,
                    axis_value: x,
                    nbar0,
                    width,
                });
            }
        }
        out
    }

    fn spec(&self, p: &PhysParams<f64>, point: &Point) -> DriveSpec<f64> {
        let flux = p.flux_from_nbar0(point.nbar0);
        match self.drive {
            DriveFamily::Noise => DriveSpec::box_noise(self.sideband, point.width.unwrap_or(0.0), flux),
            // nbar0 counts both tones: mean flux is 2 alpha_in^2
            DriveFamily::TwoTone => DriveSpec::two_tone(self.sideband, point.width.unwrap_or(0.0), (flux / 2.0).sqrt()),
            DriveFamily::Coherent => DriveSpec::coherent(self.sideband, point.nbar0),
        }
    }

    /// Seed shared by every engine at one (point, repeat).
    pub fn row_seed(&self, curve: usize, index: usize, repeat: u32) -> u64 {
        let point = (curve * self.grid.steps + index) as u64;
        derive_seed(derive_seed(self.seed, point), repeat as u64)
    }

    pub fn row_count(&self) -> usize {
        self.curve_count() * self.grid.steps * self.engines.len() * self.repeats as usize
    }
}

/// 2 Hz, 400 Hz and 200 kHz when the device admits them. Otherwise the
/// same ratios to the reference device: the first two scale with gamma
/// (120 Hz), the last with kappa (1.06 MHz).
fn power_sweep_bandwidths(p: &PhysParams<f64>) -> Vec<f64> {
    let literal = [2.0, 400.0, 200e3];
    let omega_hz = p.omega_m / std::f64::consts::TAU;
    if literal.iter().all(|&s| s / 2.0 < omega_hz) {
        return literal.to_vec();
    }
    let gamma_hz = p.gamma / std::f64::consts::TAU;
    let kappa_hz = p.kappa / std::f64::consts::TAU;
    vec![2.0 * gamma_hz / 120.0, 400.0 * gamma_hz / 120.0, 200e3 * kappa_hz / 1.06e6]
}

#[derive(Debug, Clone, Copy)]
struct Point {
    curve: usize,
    index: usize,
    axis_value: f64,
    nbar0: f64,
    /// Bandwidth or spacing, rad/s.
    width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub curve: usize,
    pub engine: Engine,
    pub repeat: u32,
    pub axis_value: f64,
    pub sigma_hz: Option<f64>,
    pub delta_hz: Option<f64>,
    pub flux: f64,
    pub nbar0: f64,
    pub gamma_opt_over_gamma: f64,
    pub mean_n_m: Option<f64>,
    pub stderr: Option<f64>,
    pub unstable_fraction: Option<f64>,
    pub quantiles: Option<[f64; 3]>,
    pub seed: u64,
    pub model: &'static str,
    pub error: Option<String>,
    /// Index of the grid point within its curve.
    pub index: usize,
}

impl Row {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub plan: SweepPlan,
    pub rows: Vec<Row>,
}

impl SweepResult {
    pub fn failed_count(&self) -> usize {
        self.rows.iter().filter(|r| r.failed()).count()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.csv_string().as_bytes())?;
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut s = CSV_COLUMNS.join(",");
        s.push('\n');
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.rows {
            let q = |i: usize| opt(r.quantiles.map(|q| q[i]));
            let fields = [
                self.plan.preset.to_string(),
                r.curve.to_string(),
                r.engine.to_string(),
                r.repeat.to_string(),
                self.plan.axis.to_string(),
                format!("{:e}", r.axis_value),
                self.plan.sideband.as_str().to_string(),
                opt(r.sigma_hz),
                opt(r.delta_hz),
                format!("{:e}", r.flux),
                format!("{:e}", r.nbar0),
                format!("{:e}", r.gamma_opt_over_gamma),
                opt(r.mean_n_m),
                opt(r.stderr),
                opt(r.unstable_fraction),
                q(0),
                q(1),
                q(2),
                r.seed.to_string(),
                r.model.to_string(),
                if r.failed() { "failed" } else { "ok" }.to_string(),
                r.error.as_deref().map(sanitize).unwrap_or_default(),
            ];
            let _ = writeln!(s, "{}", fields.join(","));
        }
        s
    }
}

fn sanitize(msg: &str) -> String {
    msg.chars()
        .map(|c| match c {
            ',' => ';',
            '"' => '\'',
            '\n' | '\r' => ' ',
            c => c,
        })
        .collect()
}

struct EngineOut {
    mean: f64,
    stderr: Option<f64>,
    unstable_fraction: Option<f64>,
    model: &'static str,
}

/// Runs every (point, engine, repeat) of `plan`. `jobs` bounds the worker
/// threads; `None` uses the global pool. Engine failures are recorded in
/// the affected rows; only an invalid plan is an error.
pub fn run_sweep(plan: &SweepPlan, p: &PhysParams<f64>, jobs: Option<usize>) -> Result<SweepResult> {
    plan.validate(p)?;
    let run = || run_rows(plan, p);
    let rows = match jobs {
        Some(0) => return Err(plan_error("jobs must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| plan_error(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    Ok(SweepResult {
        plan: plan.clone(),
        rows,
    })
}

fn run_rows(plan: &SweepPlan, p: &PhysParams<f64>) -> Vec<Row> {
    let mut tasks = Vec::with_capacity(plan.row_count());
    for point in plan.points() {
        for &engine in &plan.engines {
            for repeat in 0..plan.repeats {
                tasks.push((point, engine, repeat));
            }
        }
    }
    let mut rows: Vec<Row> = tasks
        .par_iter()
        .map(|&(point, engine, repeat)| evaluate(plan, p, point, engine, repeat))
        .collect();

    // quantiles over the repeats of each (point, engine)
    for group in rows.chunk_by_mut(|a, b| a.curve == b.curve && a.index == b.index && a.engine == b.engine) {
        let means: Vec<f64> = group.iter().filter_map(|r| r.mean_n_m).collect();
        if means.is_empty() {
            continue;
        }
        let q = [quantile(&means, 0.05), quantile(&means, 0.5), quantile(&means, 0.95)];
        for r in group.iter_mut() {
            r.quantiles = Some(q);
        }
    }
    rows
}

fn evaluate(plan: &SweepPlan, p: &PhysParams<f64>, point: Point, engine: Engine, repeat: u32) -> Row {
    let spec = plan.spec(p, &point);
    let seed = plan.row_seed(point.curve, point.index, repeat);
    let flux = spec.mean_flux(p);
    let to_hz = |w: f64| w / std::f64::consts::TAU;
    let (sigma_hz, delta_hz) = match spec.kind {
        DriveKind::BoxNoise { sigma, .. } => (Some(to_hz(sigma)), None),
        DriveKind::TwoTone { delta, .. } => (None, Some(to_hz(delta))),
        DriveKind::CoherentTone { .. } => (None, None),
    };
    let out = match engine {
        Engine::Analytic => run_analytic(p, &spec, point.nbar0),
        Engine::Quasistatic => run_quasistatic(plan, p, &spec, seed),
        Engine::Langevin => run_langevin(plan, p, &spec, seed),
    };
    let mut row = Row {
        curve: point.curve,
        index: point.index,
        engine,
        repeat,
        axis_value: point.axis_value,
        sigma_hz,
        delta_hz,
        flux,
        nbar0: point.nbar0,
        gamma_opt_over_gamma: p.gamma_opt_bar(point.nbar0) / p.gamma,
        mean_n_m: None,
        stderr: None,
        unstable_fraction: None,
        quantiles: None,
        seed,
        model: "",
        error: None,
    };
    match out {
        Ok(o) if o.mean.is_finite() => {
            row.mean_n_m = Some(o.mean);
            row.stderr = o.stderr;
            row.unstable_fraction = o.unstable_fraction;
            row.model = o.model;
        }
        Ok(o) => row.error = Some(format!("non-finite occupancy {}", o.mean)),
        Err(e) => {
            log::warn!("{engine} failed at {} = {:e}: {e}", plan.axis, point.axis_value);
            row.error = Some(e.to_string());
        }
    }
    row
}

/// Picks the closed form by comparing the drive width with the mechanical
/// linewidth scale `gamma + gamma_opt`: wider drives use the linear
/// (quantum-noise or independent-tone) result, narrower ones the adiabatic
/// forms.
fn run_analytic(p: &PhysParams<f64>, spec: &DriveSpec<f64>, nbar0: f64) -> Result<EngineOut> {
    let model = AnalyticModel::new(p)?;
    let scale = p.gamma + p.gamma_opt_bar(nbar0);
    let flux = spec.mean_flux(p);
    let s = spec.sideband;
    let linear = |pred: crate::analytic::OccupancyPrediction<f64>| EngineOut {
        mean: pred.n_m,
        stderr: None,
        unstable_fraction: None,
        model: pred.model.as_str(),
    };
    Ok(match spec.kind {
        DriveKind::CoherentTone { n0 } => linear(model.occupancy_coherent(model.backaction_damping_coherent(s, n0))),
        DriveKind::BoxNoise { sigma, .. } if sigma >= scale => linear(model.occupancy_noise_qna(s, flux, sigma)),
        DriveKind::BoxNoise { .. } => match s {
            Sideband::Blue => {
                let pred = model.occupancy_blue_noise_narrow(flux);
                EngineOut {
                    unstable_fraction: Some(model.unstable_probability(flux)),
                    ..linear(pred)
                }
            }
            Sideband::Red => EngineOut {
                mean: model.quasistatic_occupancy_closed_form(p.q_parameter(s), flux)?,
                stderr: None,
                unstable_fraction: Some(0.0),
                model: crate::analytic::ModelTag::QuasiStatic.as_str(),
            },
        },
        DriveKind::TwoTone { delta, .. } if delta >= scale => {
            linear(model.occupancy_coherent(model.backaction_damping_coherent(s, nbar0)))
        }
        DriveKind::TwoTone { .. } => linear(model.occupancy_two_tone_narrow(s, nbar0)),
    })
}

/// Noise: Rayleigh Monte Carlo. Tones: time average over the envelope.
fn run_quasistatic(plan: &SweepPlan, p: &PhysParams<f64>, spec: &DriveSpec<f64>, seed: u64) -> Result<EngineOut> {
    let q = p.q_parameter(spec.sideband);
    let model = match spec.kind {
        DriveKind::BoxNoise { .. } => "monte_carlo",
        _ => "time_average",
    };
    let r = match spec.kind {
        DriveKind::BoxNoise { flux, .. } => quasistatic_mc(p, q, flux, plan.samples as usize, seed)?,
        DriveKind::TwoTone { delta, .. } => {
            // 64 beat periods, 4096 samples each
            let period = if delta > 0.0 { std::f64::consts::TAU / delta } else { 1.0 };
            let env = two_tone_envelope(spec, 64.0 * period, period / 4096.0)?;
            quasistatic_timeavg(p, q, &env, 0.0)?
        }
        DriveKind::CoherentTone { n0 } => {
            let env = coherent_envelope(spec.sideband, n0, p, 1.0, 0.5)?;
            quasistatic_timeavg(p, q, &env, 0.0)?
        }
    };
    Ok(EngineOut {
        mean: r.mean_n_m,
        stderr: Some(r.stderr),
        unstable_fraction: Some(r.unstable_fraction),
        model,
    })
}

fn run_langevin(plan: &SweepPlan, p: &PhysParams<f64>, spec: &DriveSpec<f64>, seed: u64) -> Result<EngineOut> {
    let band = spec.envelope_bandwidth();
    let dt = plan.dt.unwrap_or_else(|| {
        let mut dt = 0.09 / p.kappa;
        if band > 0.0 {
            // band is the half-width; synthesis needs dt * full width <= MAX_PHASE_STEP
            dt = dt.min(0.9 * MAX_PHASE_STEP / (2.0 * band));
        }
        dt
    });
    let duration = plan.duration.unwrap_or(500.0 / p.gamma);
    let steps = (duration / dt).ceil() as usize;
    let cfg = SimConfig::new(dt, duration, duration / 5.0, seed)
        .with_saturation(p.n_max)
        .with_stride(steps.div_ceil(MAX_RECORDS));
    let trace = integrate(p, Drive::Spec(*spec), &cfg)?;
    let est = occupancy_from_trace(&trace, cfg.transient_skip)?;
    Ok(EngineOut {
        mean: est.mean,
        stderr: Some(est.stderr),
        unstable_fraction: None,
        model: "langevin",
    })
}

/// Everything needed to rerun a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub plan: SweepPlan,
    pub params: ParamFile,
    /// Where the parameters came from (preset name or path), informational.
    pub params_source: String,
    pub csv: String,
    pub columns: Vec<String>,
    pub rows: usize,
    pub failed_rows: usize,
    /// Row seeds in CSV order.
    pub seeds: Vec<u64>,
    pub wall_time_s: f64,
}

impl Manifest {
    pub fn new(result: &SweepResult, params: ParamFile, params_source: &str, csv: &str, wall_time_s: f64) -> Self {
        Manifest {
            tool: "optonoise".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            plan: result.plan.clone(),
            params,
            params_source: params_source.into(),
            csv: csv.into(),
            columns: CSV_COLUMNS.iter().map(|s| s.to_string()).collect(),
            rows: result.rows.len(),
            failed_rows: result.failed_count(),
            seeds: result.rows.iter().map(|r| r.seed).collect(),
            wall_time_s,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| plan_error(format!("manifest: {e}")))
    }
}
