//! Scoring functions against numerical oracles.

mod common;

use std::f64::consts::PI;

use common::fisher_crlb;
use sbltomo::metrics::{angular_bias, crlb_elevation};
use sbltomo::model::AcquisitionGeometry;
use sbltomo::sim::{SuperresPreset, SUPERRES_SLANT_RANGE, WAVELENGTH};
use sbltomo::{DVector, C64};

#[test]
fn crlb_matches_fisher_information_on_superres_geometry() {
    let geo = SuperresPreset::new(0).geometry;
    assert_eq!(geo.len(), 25);
    assert!((geo.slant_range() - SUPERRES_SLANT_RANGE).abs() < 1e-9);
    for snr_db in [0.0, 6.0, 10.0, 20.0] {
        let snr = 10f64.powf(snr_db / 10.0);
        let closed = crlb_elevation(&geo, snr).unwrap();
        let oracle = fisher_crlb(&geo, snr);
        let rel = (closed - oracle).abs() / oracle;
        println!("snr {snr_db} dB: closed form {closed:.9} m, Fisher {oracle:.9} m, rel {rel:.2e}");
        assert!(rel <= 1e-6, "relative error {rel:e} at {snr_db} dB");
    }
}

#[test]
fn crlb_matches_fisher_information_on_irregular_geometry() {
    let geo = AcquisitionGeometry::new(
        WAVELENGTH,
        SUPERRES_SLANT_RANGE,
        vec![-140.0, -97.0, -10.0, 3.0, 55.0, 121.0, 180.0],
    )
    .unwrap();
    let snr = 4.0;
    let rel = (crlb_elevation(&geo, snr).unwrap() - fisher_crlb(&geo, snr)).abs()
        / fisher_crlb(&geo, snr);
    assert!(rel <= 1e-6, "relative error {rel:e}");
}

#[test]
fn angular_bias_against_real_embedding() {
    // Angle between complex lines equals the smallest angle between the
    // real 2N-vectors of a and e^{jφ}b over φ; scan φ finely, then refine.
    let a = DVector::from_vec(vec![
        C64::new(1.0, 0.2),
        C64::new(-0.3, 0.7),
        C64::new(0.5, -0.5),
    ]);
    let b = DVector::from_vec(vec![
        C64::new(0.4, 0.9),
        C64::new(0.1, -0.2),
        C64::new(-0.6, 0.3),
    ]);
    let real_angle = |phi: f64| {
        let bb = &b * C64::from_polar(1.0, phi);
        let dot: f64 = a
            .iter()
            .zip(bb.iter())
            .map(|(x, y)| x.re * y.re + x.im * y.im)
            .sum();
        (dot / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos()
    };
    let (mut lo, mut hi) = (0.0, 2.0 * PI);
    for _ in 0..6 {
        let step = (hi - lo) / 1000.0;
        let best = (0..=1000)
            .map(|k| lo + k as f64 * step)
            .min_by(|x, y| real_angle(*x).total_cmp(&real_angle(*y)))
            .unwrap();
        lo = best - step;
        hi = best + step;
    }
    let oracle = real_angle(0.5 * (lo + hi));
    let got = angular_bias(&a, &b).unwrap();
    assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
}

#[test]
fn angular_bias_is_accurate_for_tiny_angles() {
    let a = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    for eps in [1e-3f64, 1e-6, 1e-9, 1e-12] {
        let b = DVector::from_vec(vec![C64::new(eps.cos(), 0.0), C64::new(eps.sin(), 0.0)])
            * C64::from_polar(2.0, 1.1);
        let got = angular_bias(&a, &b).unwrap();
        assert!((got - eps).abs() <= 1e-6 * eps, "{got} vs {eps}");
    }
}
