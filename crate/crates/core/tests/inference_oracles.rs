//! Simulation-based checks of the likelihood and sampler against known truth.

use strainmix::inference::{run_chain, summarize, McmcConfig, PriorSpec};
use strainmix::model::{sample_log_likelihood, ModelParams};
use strainmix::selection::{harmonic_mean_log_marginal, select_k};
use strainmix::simulator::{simulate_sample, SimConfig};

fn sim(k: usize, alpha: f64, m: usize, c: u32, seed: u64) -> strainmix::simulator::SimulatedSample {
    simulate_sample(&SimConfig {
        k,
        alpha,
        m,
        coverage: c,
        seed,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn truth_outscores_perturbed_parameters() {
    // With 500 SNPs the truth should beat a visibly wrong parameter set in
    // almost every replicate.
    let mut wins = 0;
    for seed in 0..100 {
        let s = sim(2, 0.1, 500, 100, seed);
        let truth = &s.truth;
        let shifted: Vec<f64> = {
            let w0 = (truth.weights[0] - 0.15).max(0.5);
            vec![w0, 1.0 - w0]
        };
        let wrong = ModelParams::new(shifted, (truth.alpha + 0.1).min(1.0), truth.nu).unwrap();
        let ll_truth = sample_log_likelihood(&s.data, &s.plaf, truth).unwrap();
        let ll_wrong = sample_log_likelihood(&s.data, &s.plaf, &wrong).unwrap();
        if ll_truth > ll_wrong {
            wins += 1;
        }
    }
    assert!(wins >= 95, "truth won {wins}/100");
}

#[test]
fn single_strain_alpha_is_recovered() {
    let cfg = McmcConfig {
        n_iterations: 3000,
        burn_in: 600,
        ..Default::default()
    };
    let mut covered = 0;
    for seed in 0..10 {
        let s = sim(1, 0.2, 500, 100, seed);
        let chain = run_chain(&s.data, &s.plaf, 1, &PriorSpec::default(), &McmcConfig { seed, ..cfg.clone() }).unwrap();
        let summary = summarize(&chain).unwrap();
        assert!((summary.median_alpha - 0.2).abs() < 0.05, "seed {seed}: {}", summary.median_alpha);
        assert!(summary.alpha_ci_95.lo <= summary.median_alpha && summary.median_alpha <= summary.alpha_ci_95.hi);
        if summary.alpha_ci_95.lo <= 0.2 && 0.2 <= summary.alpha_ci_95.hi {
            covered += 1;
        }
        // The sampler should land at least as high as the truth.
        let ll_truth = sample_log_likelihood(&s.data, &s.plaf, &s.truth).unwrap();
        assert!(summary.max_log_likelihood > ll_truth - 2.0, "seed {seed}");
    }
    // Nominal coverage is 95%; 8 of 10 leaves room for binomial noise.
    assert!(covered >= 8, "truth inside the 95% interval in {covered}/10 runs");
}

#[test]
fn alpha_interval_narrows_with_more_snps() {
    let cfg = McmcConfig {
        n_iterations: 3000,
        burn_in: 600,
        seed: 1,
        ..Default::default()
    };
    let widths: Vec<f64> = [150, 500, 2500]
        .iter()
        .map(|&m| {
            let s = sim(1, 0.3, m, 100, 4);
            let chain = run_chain(&s.data, &s.plaf, 1, &PriorSpec::default(), &cfg).unwrap();
            let ci = summarize(&chain).unwrap().alpha_ci_95;
            ci.hi - ci.lo
        })
        .collect();
    assert!(widths[0] > widths[1] && widths[1] > widths[2], "{widths:?}");
}

#[test]
fn unmixed_sample_selects_one_strain() {
    let s = sim(1, 0.05, 300, 80, 21);
    let cfg = McmcConfig {
        n_iterations: 2000,
        burn_in: 400,
        seed: 3,
        ..Default::default()
    };
    let result = select_k(&s.data, &s.plaf, 1..=3, &PriorSpec::default(), &cfg).unwrap();
    assert_eq!(result.selected_k, 1);
    for score in &result.scores {
        assert!(score.hme_log_marginal <= score.max_log_likelihood);
    }
    let chain = run_chain(&s.data, &s.plaf, 2, &PriorSpec::default(), &cfg).unwrap();
    assert!(harmonic_mean_log_marginal(&chain).unwrap() <= summarize(&chain).unwrap().max_log_likelihood);
}
