//! Flat CSV layouts for posterior summaries and selection sweeps.

use strainmix::inference::{Interval, PosteriorSummary, Restriction};
use strainmix::selection::{ModelScore, SelectionResult};

pub const SUMMARY_COLUMNS: [&str; 15] = [
    "sample_id",
    "k",
    "restriction",
    "n_snps",
    "n_draws",
    "max_log_likelihood",
    "alpha_median",
    "alpha_lo",
    "alpha_hi",
    "nu_median",
    "nu_lo",
    "nu_hi",
    "w_median",
    "w_lo",
    "w_hi",
];

pub const SELECTION_COLUMNS: [&str; 10] = [
    "sample_id",
    "k",
    "restriction",
    "n_free_params",
    "max_log_likelihood",
    "bic",
    "hme_log_marginal",
    "log_prior_k",
    "selected",
    "selector",
];

/// One fitted model for one sample, as reported in `summary.csv/json`.
#[derive(Clone, Debug, serde::Serialize)]
pub struct SampleFit {
    pub sample_id: String,
    pub k: usize,
    pub restriction: Restriction,
    pub n_snps: usize,
    pub summary: PosteriorSummary,
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn bounds(intervals: &[Interval]) -> (String, String) {
    (
        join(intervals.iter().map(|i| i.lo)),
        join(intervals.iter().map(|i| i.hi)),
    )
}

pub fn summary_row(fit: &SampleFit) -> Vec<String> {
    let s = &fit.summary;
    let (w_lo, w_hi) = bounds(&s.weight_ci_95);
    vec![
        fit.sample_id.clone(),
        fit.k.to_string(),
        fit.restriction.to_string(),
        fit.n_snps.to_string(),
        s.n_draws.to_string(),
        s.max_log_likelihood.to_string(),
        s.median_alpha.to_string(),
        s.alpha_ci_95.lo.to_string(),
        s.alpha_ci_95.hi.to_string(),
        s.median_nu.to_string(),
        s.nu_ci_95.lo.to_string(),
        s.nu_ci_95.hi.to_string(),
        join(s.weight_medians.iter().copied()),
        w_lo,
        w_hi,
    ]
}

pub fn selection_rows(result: &SelectionResult) -> Vec<Vec<String>> {
    result
        .scores
        .iter()
        .map(|s: &ModelScore| {
            let selected = s.k == result.selected_k && s.restriction == result.selected_restriction;
            vec![
                result.sample_id.clone(),
                s.k.to_string(),
                s.restriction.to_string(),
                s.n_free_params.to_string(),
                s.max_log_likelihood.to_string(),
                s.bic.to_string(),
                s.hme_log_marginal.to_string(),
                s.log_prior_k.map(|v| v.to_string()).unwrap_or_default(),
                selected.to_string(),
                format!("{:?}", result.selector).to_lowercase(),
            ]
        })
        .collect()
}
