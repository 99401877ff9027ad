//! PCA versus kernel-PCA steering-vector estimates on paired samples.

use sbltomo::experiment::{run_angular_bias, ExperimentConfig, ExperimentKind};

#[test]
fn kernel_pca_beats_pca_on_the_weaker_scatterer() {
    let mut cfg = ExperimentConfig::preset(ExperimentKind::AngularBias);
    cfg.samples = 200;
    cfg.base_seed = 2024;
    let report = run_angular_bias(&cfg).unwrap();
    let pca = report.biases_deg("pca", 0);
    let kpca = report.biases_deg("kpca", 0);
    let wins = pca.iter().zip(&kpca).filter(|(p, k)| k < p).count();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!(
        "weaker scatterer: PCA mean {:.2}°, KPCA mean {:.2}°, KPCA better on {wins}/200",
        mean(&pca),
        mean(&kpca)
    );
    assert!(mean(&kpca) < mean(&pca));
    assert!(
        wins > 120,
        "KPCA better on only {wins} of 200 paired samples"
    );
}
