//! Device constants, drive descriptions and the scalar quantities derived
//! from them.
//!
//! Every rate and frequency is stored as an angular quantity (rad/s).
//! Conversion from ordinary frequency happens once, at ingestion
//! ([`crate::config`]).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::real::Real;

/// Which mechanical sideband of the pump cavity the drive is centred on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sideband {
    /// Cooling (beam-splitter) interaction.
    Red,
    /// Amplifying (parametric) interaction.
    Blue,
}

impl Sideband {
    /// `+1` for red, `-1` for blue: the sign of the optical damping.
    #[inline]
    pub fn sign<T: Real>(self) -> T {
        match self {
            Sideband::Red => T::one(),
            Sideband::Blue => -T::one(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sideband::Red => "red",
            Sideband::Blue => "blue",
        }
    }
}

impl std::str::FromStr for Sideband {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "red" | "rsb" => Ok(Sideband::Red),
            "blue" | "bsb" => Ok(Sideband::Blue),
            other => Err(invalid("sideband", format!("unknown sideband `{other}`"))),
        }
    }
}

/// Optomechanical device constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams<T> {
    /// Mechanical resonance, rad/s.
    pub omega_m: T,
    /// Mechanical damping (intrinsic, or broadened by a probe tone), rad/s.
    pub gamma: T,
    /// Pump cavity decay rate, rad/s.
    pub kappa: T,
    /// Single-photon coupling, rad/s.
    pub g0: T,
    /// Equilibrium (thermal plus technical) occupancy.
    pub n_th: T,
    /// Backaction-limit correction from finite sideband resolution.
    pub n_ba: T,
    /// Occupancy assigned to a self-oscillating mechanical mode.
    pub n_max: T,
}

impl<T: Real> PhysParams<T> {
    /// Validated constructor. `n_ba = None` selects the sideband-resolution
    /// default `kappa^2 / (16 omega_m^2)`.
    pub fn new(
        omega_m: T,
        gamma: T,
        kappa: T,
        g0: T,
        n_th: T,
        n_ba: Option<T>,
        n_max: T,
    ) -> Result<Self> {
        let n_ba = n_ba.unwrap_or_else(|| default_n_ba(kappa, omega_m));
        let p = PhysParams {
            omega_m,
            gamma,
            kappa,
            g0,
            n_th,
            n_ba,
            n_max,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega_m", self.omega_m),
            ("gamma", self.gamma),
            ("kappa", self.kappa),
            ("n_max", self.n_max),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > T::zero()) {
                return Err(invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        let non_negative = [("g0", self.g0), ("n_th", self.n_th), ("n_ba", self.n_ba)];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= T::zero()) {
                return Err(invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// `omega_m > kappa`.
    pub fn is_resolved(&self) -> bool {
        self.omega_m > self.kappa
    }

    pub fn require_resolved(&self) -> Result<()> {
        if self.is_resolved() {
            Ok(())
        } else {
            Err(Error::UnresolvedSideband {
                omega_m: self.omega_m.as_f64(),
                kappa: self.kappa.as_f64(),
            })
        }
    }

    /// Mean intracavity photon number produced by an incident flux:
    /// `kappa * F0 / omega_m^2`.
    #[inline]
    pub fn nbar0_from_flux(&self, flux: T) -> T {
        self.kappa * flux / (self.omega_m * self.omega_m)
    }

    /// Inverse of [`Self::nbar0_from_flux`].
    #[inline]
    pub fn flux_from_nbar0(&self, nbar0: T) -> T {
        nbar0 * self.omega_m * self.omega_m / self.kappa
    }

    /// Signed input-to-damping transduction `±4 g0^2 / (gamma omega_m^2)`,
    /// positive on the red side.
    #[inline]
    pub fn q_parameter(&self, sideband: Sideband) -> T {
        let four = T::lit(4.0);
        sideband.sign::<T>() * four * self.g0 * self.g0 / (self.gamma * self.omega_m * self.omega_m)
    }

    /// Optical damping magnitude set by a mean photon number:
    /// `4 g0^2 nbar0 / kappa`.
    #[inline]
    pub fn gamma_opt_bar(&self, nbar0: T) -> T {
        T::lit(4.0) * self.g0 * self.g0 * nbar0 / self.kappa
    }

    /// Photon number at which `gamma_opt_bar` equals `gamma_opt`.
    #[inline]
    pub fn nbar0_for_gamma_opt(&self, gamma_opt: T) -> T {
        gamma_opt * self.kappa / (T::lit(4.0) * self.g0 * self.g0)
    }

    pub fn derived(&self, sideband: Sideband, flux: T) -> DerivedScalars<T> {
        let nbar0 = self.nbar0_from_flux(flux);
        DerivedScalars {
            nbar0,
            gamma_opt: self.gamma_opt_bar(nbar0),
            q: self.q_parameter(sideband),
        }
    }

    /// Converts every field to another scalar width.
    pub fn cast<U: Real>(&self) -> PhysParams<U> {
        let c = |x: T| U::lit(x.as_f64());
        PhysParams {
            omega_m: c(self.omega_m),
            gamma: c(self.gamma),
            kappa: c(self.kappa),
            g0: c(self.g0),
            n_th: c(self.n_th),
            n_ba: c(self.n_ba),
            n_max: c(self.n_max),
        }
    }
}

impl PhysParams<f64> {
    /// Device used for the blue-noise and two-tone measurements:
    /// `omega_m/2pi = 9.22 MHz`, `gamma/2pi = 120 Hz`, `kappa/2pi = 1.06 MHz`,
    /// `g0/2pi = 39 Hz`, `n_max = 1e10`.
    pub fn paper_device() -> Self {
        crate::config::ParamFile::paper_device()
            .to_params()
            .expect("bundled preset is valid")
    }

    /// Same device with the probe tone on: `gamma/2pi = 220 Hz`, `n_th = 12.1`.
    pub fn paper_device_probe() -> Self {
        crate::config::ParamFile::paper_device_probe()
            .to_params()
            .expect("bundled preset is valid")
    }

    /// Dimensionless test set: `kappa = 1`, `omega_m = 10`, `gamma = 1e-3`,
    /// `g0 = 1e-3` (threshold at 250 photons), `n_th = 100`, `n_max = 1e6`.
    pub fn scaled() -> Self {
        PhysParams::new(10.0, 1e-3, 1.0, 1e-3, 100.0, Some(0.0), 1e6).expect("valid")
    }
}

/// `kappa^2 / (16 omega_m^2)`.
pub fn default_n_ba<T: Real>(kappa: T, omega_m: T) -> T {
    kappa * kappa / (T::lit(16.0) * omega_m * omega_m)
}

/// Scalars shared by the analytic and quasi-static layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedScalars<T> {
    pub nbar0: T,
    /// Unsigned optical damping from the mean photon number, rad/s.
    pub gamma_opt: T,
    /// Signed transduction coefficient, s (per unit flux).
    pub q: T,
}

/// Spectral shape of the drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriveKind<T> {
    /// Single coherent tone producing `n0` intracavity photons.
    CoherentTone { n0: T },
    /// Flat-top noise of full width `sigma` (rad/s) and total flux `flux`
    /// (photons/s).
    BoxNoise { sigma: T, flux: T },
    /// Two equal tones `delta` (rad/s) apart, each of amplitude `alpha_in`
    /// (sqrt(photons/s)).
    TwoTone { delta: T, alpha_in: T },
}

/// A drive: spectral shape plus the sideband it is centred on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec<T> {
    pub sideband: Sideband,
    #[serde(flatten)]
    pub kind: DriveKind<T>,
}

impl<T: Real> DriveSpec<T> {
    pub fn coherent(sideband: Sideband, n0: T) -> Self {
        DriveSpec {
            sideband,
            kind: DriveKind::CoherentTone { n0 },
        }
    }

    pub fn box_noise(sideband: Sideband, sigma: T, flux: T) -> Self {
        DriveSpec {
            sideband,
            kind: DriveKind::BoxNoise { sigma, flux },
        }
    }

    pub fn two_tone(sideband: Sideband, delta: T, alpha_in: T) -> Self {
        DriveSpec {
            sideband,
            kind: DriveKind::TwoTone { delta, alpha_in },
        }
    }

    pub fn validate(&self, p: &PhysParams<T>) -> Result<()> {
        let non_negative = |name, v: T| {
            if v.is_finite() && v >= T::zero() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be finite and >= 0, got {v}")))
            }
        };
        match self.kind {
            DriveKind::CoherentTone { n0 } => non_negative("n0", n0),
            DriveKind::BoxNoise { sigma, flux } => {
                if !(sigma.is_finite() && sigma > T::zero()) {
                    return Err(invalid("sigma", format!("must be > 0, got {sigma}")));
                }
                non_negative("flux", flux)?;
                if sigma / T::lit(2.0) >= p.omega_m {
                    return Err(invalid(
                        "sigma",
                        format!(
                            "noise band half-width {} overlaps the carrier (omega_m = {})",
                            sigma / T::lit(2.0),
                            p.omega_m
                        ),
                    ));
                }
                Ok(())
            }
            DriveKind::TwoTone { delta, alpha_in } => {
                non_negative("delta", delta)?;
                non_negative("alpha_in", alpha_in)
            }
        }
    }

    /// Time-averaged incident flux `<|r|^2>`, photons/s.
    pub fn mean_flux(&self, p: &PhysParams<T>) -> T {
        match self.kind {
            DriveKind::CoherentTone { n0 } => p.flux_from_nbar0(n0),
            DriveKind::BoxNoise { flux, .. } => flux,
            DriveKind::TwoTone { alpha_in, .. } => T::lit(2.0) * alpha_in * alpha_in,
        }
    }

    /// Mean intracavity photon number, counting every spectral component.
    pub fn nbar0(&self, p: &PhysParams<T>) -> T {
        match self.kind {
            DriveKind::CoherentTone { n0 } => n0,
            _ => p.nbar0_from_flux(self.mean_flux(p)),
        }
    }

    /// Highest envelope frequency, rad/s (zero for a single tone).
    pub fn envelope_bandwidth(&self) -> T {
        match self.kind {
            DriveKind::CoherentTone { .. } => T::zero(),
            DriveKind::BoxNoise { sigma, .. } => sigma / T::lit(2.0),
            DriveKind::TwoTone { delta, .. } => delta / T::lit(2.0),
        }
    }

    /// SHA-256 of the canonical JSON encoding (fields widened to f64).
    pub fn digest(&self) -> [u8; 32] {
        use sha2::{Digest, Sha256};
        let spec64 = self.cast::<f64>();
        let json = serde_json::to_string(&spec64).expect("drive spec serializes");
        let out = Sha256::digest(json.as_bytes());
        let mut bytes = [0u8; 32];
        bytes.copy_from_slice(&out);
        bytes
    }

    pub fn cast<U: Real>(&self) -> DriveSpec<U> {
        let c = |x: T| U::lit(x.as_f64());
        let kind = match self.kind {
            DriveKind::CoherentTone { n0 } => DriveKind::CoherentTone { n0: c(n0) },
            DriveKind::BoxNoise { sigma, flux } => DriveKind::BoxNoise {
                sigma: c(sigma),
                flux: c(flux),
            },
            DriveKind::TwoTone { delta, alpha_in } => DriveKind::TwoTone {
                delta: c(delta),
                alpha_in: c(alpha_in),
            },
        };
        DriveSpec {
            sideband: self.sideband,
            kind,
        }
    }
}
