use std::f64::consts::TAU;

use num_complex::Complex;
use optonoise::langevin::{integrate, Drive, SimConfig};
use optonoise::rng::{complex_normal, stream_rng};
use optonoise::spectral::{lineshape_diagnostics, lorentzian, lorentzian_fit, welch_psd, FitInit, Psd, Window};
use optonoise::{DriveSpec, PhysParams, Sideband};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn grid_psd(lo: f64, hi: f64, n: usize, mut f: impl FnMut(f64) -> f64) -> Psd<f64> {
    let df = (hi - lo) / (n - 1) as f64;
    let frequencies: Vec<f64> = (0..n).map(|i| lo + i as f64 * df).collect();
    let values = frequencies.iter().map(|&x| f(x)).collect();
    Psd {
        frequencies,
        values,
        segment_count: 1,
        equivalent_segments: 1.0,
        window: Window::Rectangular,
        df,
    }
}

/// Complex Ornstein–Uhlenbeck samples: exact Lorentzian process with
/// amplitude decay `gamma/2` (power FWHM `gamma`) and variance `area`.
fn lorentzian_process(gamma: f64, area: f64, dt: f64, n: usize, seed: u64) -> Vec<Complex<f64>> {
    let mut rng = stream_rng(seed, 0);
    let decay = (-gamma * dt / 2.0).exp();
    let var = area * (1.0 - decay * decay);
    let mut z = complex_normal::<f64, _>(&mut rng, area);
    (0..n)
        .map(|_| {
            z = z * decay + complex_normal(&mut rng, var);
            z
        })
        .collect()
}

#[test]
fn noiseless_round_trip() {
    let psd = grid_psd(-2000.0, 2000.0, 801, |f| lorentzian(f, 0.0, 100.0, 50.0, 0.0));
    let fit = lorentzian_fit(&psd, FitInit::Auto).unwrap();
    assert!(fit.converged);
    assert!(fit.center.abs() < 1e-6 * 100.0);
    assert!((fit.fwhm / 100.0 - 1.0).abs() < 1e-6);
    assert!((fit.area / 50.0 - 1.0).abs() < 1e-6);
    assert!(fit.baseline.abs() < 1e-6);
}

#[test]
fn multiplicative_noise_five_percent() {
    for seed in 0..10 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(1.0, 0.05).unwrap();
        let mut psd = grid_psd(-2000.0, 2000.0, 801, |f| lorentzian(f, 0.0, 100.0, 50.0, 0.0));
        psd.values.iter_mut().for_each(|v| *v *= noise.sample(&mut rng));
        let fit = lorentzian_fit(&psd, FitInit::Auto).unwrap();
        assert!((fit.fwhm / 100.0 - 1.0).abs() < 0.05, "seed {seed}: {fit:?}");
        assert!((fit.area / 50.0 - 1.0).abs() < 0.05, "seed {seed}: {fit:?}");
    }
}

#[test]
fn welch_average_of_lorentzian_process() {
    let gamma = TAU * 100.0;
    let dt = 1e-5;
    let seg = 20480;
    for seed in 0..6 {
        let x = lorentzian_process(gamma, 50.0, dt, 200 * seg, seed);
        let psd = welch_psd(&x, dt, seg, 0.0, Window::Hann).unwrap();
        assert_eq!(psd.segment_count, 200);
        let fit = lorentzian_fit(&psd.band(-1000.0, 1000.0), FitInit::Auto).unwrap();
        assert!((fit.fwhm / 100.0 - 1.0).abs() < 0.05, "seed {seed}: {fit:?}");
        assert!((fit.area / 50.0 - 1.0).abs() < 0.05, "seed {seed}: {fit:?}");
        let d = lineshape_diagnostics(&psd.band(-1000.0, 1000.0), &fit).unwrap();
        assert!(!d.distorted, "seed {seed}: {d:?}");
    }
}

#[test]
fn thermal_trace_recovers_damping_and_occupancy() {
    let p: PhysParams<f64> = PhysParams::new(10.0, 1e-2, 1.0, 0.0, 100.0, Some(0.0), 1e6).unwrap();
    let cfg = SimConfig::new(0.1, 2e6, 0.0, 77).with_stride(10);
    let trace = integrate(&p, Drive::Spec(DriveSpec::coherent(Sideband::Red, 0.0)), &cfg).unwrap();
    let fwhm_hz = p.gamma / TAU;
    let seg = ((25.0 / fwhm_hz) / trace.dt).round() as usize;
    let psd = welch_psd(&trace.b, trace.dt, seg, 0.5, Window::Hann).unwrap();
    let fit = lorentzian_fit(&psd.band(-30.0 * fwhm_hz, 30.0 * fwhm_hz), FitInit::Auto).unwrap();
    assert!((fit.fwhm * TAU / p.gamma - 1.0).abs() < 0.1, "{fit:?}");
    // |b|^2 includes the symmetrized half quantum
    assert!((fit.area - 0.5 - p.n_th).abs() < 0.1 * p.n_th, "{fit:?}");
}

#[test]
fn fit_is_translation_and_scale_covariant() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(1.0, 0.05).unwrap();
    let base = grid_psd(-500.0, 500.0, 401, |f| lorentzian(f, 12.0, 40.0, 7.0, 0.01) * noise.sample(&mut rng));
    let fit = lorentzian_fit(&base, FitInit::Auto).unwrap();

    let shift = 1234.5;
    let mut moved = base.clone();
    moved.frequencies.iter_mut().for_each(|f| *f += shift);
    let g = lorentzian_fit(&moved, FitInit::Auto).unwrap();
    assert!((g.center - fit.center - shift).abs() < 1e-9 * shift);
    assert!((g.fwhm / fit.fwhm - 1.0).abs() < 1e-9);
    assert!((g.area / fit.area - 1.0).abs() < 1e-9);

    let c = 3.7e4;
    let mut scaled = base.clone();
    scaled.values.iter_mut().for_each(|v| *v *= c);
    let h = lorentzian_fit(&scaled, FitInit::Auto).unwrap();
    assert!((h.area / (c * fit.area) - 1.0).abs() < 1e-9);
    assert!((h.baseline / (c * fit.baseline) - 1.0).abs() < 1e-7);
    assert!((h.center - fit.center).abs() < 1e-9 * fit.fwhm);
    assert!((h.fwhm / fit.fwhm - 1.0).abs() < 1e-9);
}

#[test]
fn real_input_gives_symmetric_psd() {
    let mut rng = stream_rng(9, 0);
    let x: Vec<Complex<f64>> = (0..8192).map(|_| Complex::new(complex_normal::<f64, _>(&mut rng, 1.0).re, 0.0)).collect();
    let psd = welch_psd(&x, 0.01, 1024, 0.5, Window::Hann).unwrap();
    let n = psd.len();
    // ascending grid from -N/2: bin k pairs with bin N - k
    for k in 1..n / 2 {
        let (a, b) = (psd.values[k], psd.values[n - k]);
        assert!((a - b).abs() <= 1e-12 * a.max(b), "{k}: {a} {b}");
    }
}

#[test]
fn psd_and_fit_serialize() {
    let psd = grid_psd(-10.0, 10.0, 41, |f| lorentzian(f, 0.0, 2.0, 5.0, 0.0));
    let mut csv = Vec::new();
    psd.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("freq,value\n"));
    assert_eq!(text.lines().count(), 42);
    let fit = lorentzian_fit(&psd, FitInit::Auto).unwrap();
    let json = serde_json::to_value(fit).unwrap();
    assert!((json["fwhm"].as_f64().unwrap() - 2.0).abs() < 1e-6);
}

#[test]
fn narrowband_drive_distorts_lineshape() {
    let p: PhysParams<f64> = PhysParams::new(10.0, 1e-2, 1.0, 5e-3, 100.0, Some(0.0), 1e6).unwrap();
    let flux = p.flux_from_nbar0(p.nbar0_for_gamma_opt(0.6 * p.gamma));
    let score = |sigma: f64, seed: u64| {
        let cfg = SimConfig::new(0.1, 2e6, 2e4, seed).with_saturation(p.n_max).with_stride(10);
        let trace = integrate(&p, Drive::Spec(DriveSpec::box_noise(Sideband::Blue, sigma, flux)), &cfg).unwrap();
        let fwhm_hz = 0.4 * p.gamma / TAU;
        let seg = ((25.0 / fwhm_hz) / trace.dt).round() as usize;
        let start = trace.index_at(2e4);
        let psd = welch_psd(&trace.b[start..], trace.dt, seg, 0.5, Window::Hann).unwrap();
        let band = psd.band(-30.0 * fwhm_hz, 30.0 * fwhm_hz);
        let fit = lorentzian_fit(&band, FitInit::Auto).unwrap();
        lineshape_diagnostics(&band, &fit).unwrap().score
    };
    let broad = score(p.kappa / 5.0, 1);
    let narrow = score(p.gamma / 5.0, 2);
    assert!(narrow > broad, "narrow {narrow} vs broad {broad}");
}
