mod common;

use std::f64::consts::{PI, TAU};

use common::{ks_critical_1pct, ks_statistic, mean};
use num_complex::Complex;
use optonoise::colfile::ColumnFile;
use optonoise::drive::{box_noise_envelope, coherent_envelope, sample_rayleigh_amplitude, two_tone_envelope};
use optonoise::langevin::{integrate, Drive, SimConfig};
use optonoise::spectral::{periodogram, welch_psd, Window};
use optonoise::{DriveSpec, PhysParams, Sideband};
use proptest::prelude::*;

const SIGMA: f64 = TAU * 400.0;

fn envelope(seed: u64) -> optonoise::EnvelopeF64 {
    let spec = DriveSpec::box_noise(Sideband::Blue, SIGMA, 1.0);
    box_noise_envelope(&spec, 100.0, 0.1 / SIGMA, seed).unwrap()
}

#[test]
fn mean_power_seed_averaged() {
    let means: Vec<f64> = (0..4).map(|s| envelope(s).mean_power()).collect();
    let m = mean(&means);
    assert!((0.98..=1.02).contains(&m), "{means:?}");
    for x in means {
        assert!((0.97..=1.03).contains(&x));
    }
}

#[test]
fn amplitude_distribution_is_rayleigh() {
    let env = envelope(11);
    // one sample per correlation time 2 pi / sigma
    let stride = (TAU / (SIGMA * env.dt)).round() as usize;
    let amps: Vec<f64> = env.samples.iter().step_by(stride).map(|z| z.norm()).collect();
    let d = ks_statistic(&amps, |r| 1.0 - (-r * r).exp());
    assert!(d < ks_critical_1pct(amps.len()), "KS {d} over {} samples", amps.len());
}

#[test]
fn decorrelates_after_one_correlation_time() {
    let mut worst: f64 = 0.0;
    for seed in 0..3 {
        let env = envelope(100 + seed);
        let lag = (TAU / (SIGMA * env.dt)).round() as usize;
        let n = env.len() - lag;
        let mut acc = Complex::new(0.0, 0.0);
        for i in 0..n {
            acc += env.samples[i].conj() * env.samples[i + lag];
        }
        let c = acc.norm() / n as f64 / env.mean_power();
        worst = worst.max(c);
    }
    assert!(worst < 0.3, "{worst}");
}

#[test]
fn power_stays_in_band() {
    let env = envelope(7);
    let edge = SIGMA / TAU / 2.0;
    // the realization is periodic over its length, so a full-length
    // rectangular segment has no leakage at all
    for segments in [1usize, 4] {
        let psd = welch_psd(&env.samples, env.dt, env.len() / segments, 0.0, Window::Rectangular).unwrap();
        let total = psd.integral();
        let inside = psd.band(-edge - psd.df, edge + psd.df).integral();
        let leak = 1.0 - inside / total;
        assert!(leak < 0.01, "{segments} segments: leakage {leak}");
    }
}

#[test]
fn parseval_on_generated_envelopes() {
    let p = PhysParams::scaled();
    let spec = DriveSpec::box_noise(Sideband::Red, 0.05, 3.0);
    let envs = [
        box_noise_envelope(&spec, 5000.0, 0.5, 9).unwrap(),
        two_tone_envelope(&DriveSpec::two_tone(Sideband::Red, 0.01, 2.0), 3000.0, 1.0).unwrap(),
        coherent_envelope(Sideband::Blue, 40.0, &p, 100.0, 0.25).unwrap(),
    ];
    for env in &envs {
        let energy: f64 = env.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * env.dt;
        let psd = periodogram(&env.samples, env.dt).unwrap();
        let span = env.len() as f64 * env.dt;
        assert!((psd.integral() * span - energy).abs() <= 1e-9 * energy, "{:?}", env.spec);
    }
}

#[test]
fn envelopes_are_reproducible() {
    let a = envelope(3);
    let b = envelope(3);
    assert_eq!(a.samples, b.samples);
    assert_ne!(a.samples, envelope(4).samples);
}

#[test]
fn two_tone_and_coherent_levels() {
    let alpha = 3.0;
    let delta = 0.02;
    let period = TAU / delta;
    let env = two_tone_envelope(&DriveSpec::two_tone(Sideband::Blue, delta, alpha), 50.0 * period, period / 1000.0).unwrap();
    let n = 50 * 1000;
    let avg = env.samples[..n].iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
    assert!((avg - 2.0 * alpha * alpha).abs() < 1e-9);
    let flat = two_tone_envelope(&DriveSpec::two_tone(Sideband::Blue, 0.0, alpha), 10.0, 1.0).unwrap();
    assert!(flat.samples.iter().all(|z| (z.re - 2.0 * alpha).abs() < 1e-12 && z.im == 0.0));

    let p = PhysParams::paper_device();
    let c = coherent_envelope(Sideband::Red, 1e4, &p, 1e-3, 1e-4).unwrap();
    let r = c.samples[0].norm();
    assert!((r - (1e4 * p.omega_m * p.omega_m / p.kappa).sqrt()).abs() < 1e-6 * r);
    assert!((r - 2.245e6).abs() < 0.01e6, "{r}");
}

#[test]
fn rayleigh_inversion_examples() {
    assert_eq!(sample_rayleigh_amplitude(1.0, 0.0).unwrap(), 0.0);
    let one: f64 = sample_rayleigh_amplitude(1.0, 1.0 - (-1.0f64).exp()).unwrap();
    assert!((one - 1.0).abs() < 1e-12);
    let r: f64 = sample_rayleigh_amplitude(2.0, 1.0 - (-4.0f64).exp()).unwrap();
    assert!((r - 8f64.sqrt()).abs() < 1e-12);
    assert!(sample_rayleigh_amplitude(1.0, 1.0).is_err());
}

#[test]
fn column_file_round_trips() {
    let env = envelope(21);
    let file = ColumnFile::from_envelope(&env);
    let mut buf = Vec::new();
    file.write_to(&mut buf).unwrap();
    let back = ColumnFile::read_from(buf.as_slice()).unwrap();
    assert_eq!(back.channel("r").unwrap(), env.samples.as_slice());
    assert_eq!(back.seed, Some(21));
    assert_eq!(back.dt, env.dt);

    let p = PhysParams::scaled();
    let cfg = SimConfig::new(0.1, 200.0, 0.0, 8);
    let trace = integrate(&p, Drive::Spec(DriveSpec::coherent(Sideband::Red, 10.0)), &cfg).unwrap();
    let file = ColumnFile::from_trace(&trace, 10);
    let mut buf = Vec::new();
    file.write_to(&mut buf).unwrap();
    let back = ColumnFile::read_from(buf.as_slice()).unwrap();
    assert_eq!(back.downsample, 10);
    assert!((back.dt - 1.0).abs() < 1e-12);
    let b = back.channel("b").unwrap();
    assert_eq!(b.len(), trace.len().div_ceil(10));
    assert_eq!(b[3], trace.b[30]);
    assert_eq!(back.channel("alpha").unwrap().len(), b.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rayleigh_inverse_cdf(flux in 1e-3..1e6f64, u in 0.0..0.999999f64) {
        let r = sample_rayleigh_amplitude(flux, u).unwrap();
        // CDF of the Rayleigh law with mean power `flux`
        let cdf = 1.0 - (-r * r / flux).exp();
        prop_assert!((cdf - u).abs() < 1e-9);
    }

    #[test]
    fn box_noise_parseval(seed in any::<u64>(), flux in 0.1..10.0f64, sigma in 0.01..0.1f64) {
        let spec = DriveSpec::box_noise(Sideband::Red, sigma, flux);
        let env = box_noise_envelope(&spec, 2000.0, 0.5, seed).unwrap();
        let energy: f64 = env.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * env.dt;
        let psd = periodogram(&env.samples, env.dt).unwrap();
        prop_assert!((psd.integral() * env.len() as f64 * env.dt - energy).abs() <= 1e-9 * energy);
        prop_assert!(psd.band(-1e9, -sigma / (4.0 * PI) - psd.df).integral() <= 1e-20 + 1e-12 * psd.integral());
    }
}
