//! Choosing the number of strains: BIC and harmonic-mean marginal likelihood
//! over a sweep of `k`, plus the comparison against the restricted models.

use std::cmp::Ordering;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{
    max_observed_log_likelihood, run_restricted_chain, summarize, McmcConfig, PosteriorChain,
    PosteriorSummary, PriorSpec, Restriction,
};
use crate::model::{Plaf, SampleData};
use crate::special::ln_zero_truncated_poisson;

/// Largest `k` a sweep may include; the band count grows as `2^k`.
pub const MAX_SELECT_K: usize = 8;

/// `-2 max_ll + d ln(n_obs)`, with `n_obs` the number of SNPs.
pub fn bic(max_log_likelihood: f64, n_free_params: usize, n_obs: usize) -> f64 {
    bic_with_log_n(max_log_likelihood, n_free_params, (n_obs.max(1) as f64).ln())
}

pub fn bic_with_log_n(max_log_likelihood: f64, n_free_params: usize, ln_n_obs: f64) -> f64 {
    -2.0 * max_log_likelihood + n_free_params as f64 * ln_n_obs
}

/// Free continuous parameters: `k - 1` for the simplex W, plus alpha and nu
/// where they are sampled.
pub fn n_free_params(k: usize, restriction: Restriction) -> usize {
    match restriction {
        Restriction::Full => (k - 1) + 2,
        Restriction::AlphaZero => (k - 1) + 1,
        Restriction::KOne => 2,
    }
}

/// `ln [ (1/n) sum_i exp(-ll_i) ]^-1` over the stored draws.
pub fn harmonic_mean_log_marginal(chain: &PosteriorChain) -> Result<f64> {
    let max = max_observed_log_likelihood(chain)?;
    let min = chain.log_likelihoods().fold(f64::INFINITY, f64::min);
    let n = chain.draws.len() as f64;
    // mean of exp(min - ll_i), each term in (0, 1]
    let mean = chain.log_likelihoods().map(|ll| (min - ll).exp()).sum::<f64>() / n;
    let value = min - mean.ln();
    // The harmonic mean never exceeds the largest term; min() absorbs rounding.
    Ok(value.min(max))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    #[default]
    Bic,
    Hme,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub k: usize,
    pub restriction: Restriction,
    pub bic: f64,
    pub hme_log_marginal: f64,
    /// `ln P(k)` under the zero-truncated Poisson prior, when prior odds are on.
    pub log_prior_k: Option<f64>,
    pub max_log_likelihood: f64,
    pub n_free_params: usize,
    pub summary: PosteriorSummary,
}

impl ModelScore {
    fn hme_with_prior(&self) -> f64 {
        self.hme_log_marginal + self.log_prior_k.unwrap_or(0.0)
    }

    /// Orders scores from best to worst; ties go to smaller k, then to the
    /// more restricted model.
    pub fn compare(&self, other: &ModelScore, selector: Selector) -> Ordering {
        let primary = match selector {
            Selector::Bic => self.bic.total_cmp(&other.bic),
            Selector::Hme => other.hme_with_prior().total_cmp(&self.hme_with_prior()),
        };
        primary
            .then(self.k.cmp(&other.k))
            .then(self.restriction.parsimony_rank().cmp(&other.restriction.parsimony_rank()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionOptions {
    pub k_range: RangeInclusive<usize>,
    pub selector: Selector,
    pub prior_odds: bool,
    /// Also fit the alpha-zero sweep and the k-one model.
    pub include_restricted: bool,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        Self {
            k_range: 1..=7,
            selector: Selector::Bic,
            prior_odds: false,
            include_restricted: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub sample_id: String,
    pub n_snps: usize,
    pub selector: Selector,
    pub scores: Vec<ModelScore>,
    pub selected_k: usize,
    pub selected_restriction: Restriction,
}

impl SelectionResult {
    pub fn selected(&self) -> &ModelScore {
        self.scores
            .iter()
            .find(|s| s.k == self.selected_k && s.restriction == self.selected_restriction)
            .expect("selected score present")
    }

    pub fn score(&self, k: usize, restriction: Restriction) -> Option<&ModelScore> {
        self.scores
            .iter()
            .find(|s| s.k == k && s.restriction == restriction)
    }

    /// Best-scoring entry within one restriction family.
    pub fn best_for(&self, restriction: Restriction) -> Option<&ModelScore> {
        self.scores
            .iter()
            .filter(|s| s.restriction == restriction)
            .min_by(|a, b| a.compare(b, self.selector))
    }
}

pub fn score_chain(
    chain: &PosteriorChain,
    restriction: Restriction,
    n_obs: usize,
    priors: &PriorSpec,
    prior_odds: bool,
) -> Result<ModelScore> {
    let summary = summarize(chain)?;
    let d = n_free_params(chain.k, restriction);
    Ok(ModelScore {
        k: chain.k,
        restriction,
        bic: bic(summary.max_log_likelihood, d, n_obs),
        hme_log_marginal: harmonic_mean_log_marginal(chain)?,
        log_prior_k: prior_odds.then(|| ln_zero_truncated_poisson(chain.k as u32, priors.k_prior_rate)),
        max_log_likelihood: summary.max_log_likelihood,
        n_free_params: d,
        summary,
    })
}

/// Fits the full model for every `k` in the range (plus the restricted
/// models when enabled) and selects by `opts.selector`.
///
/// The k-one model and the full model at k = 1 are the same model; both rows
/// are scored from one chain, so they tie and the tie goes to k-one.
pub fn select_k_with(
    data: &SampleData,
    plaf: &Plaf,
    priors: &PriorSpec,
    cfg: &McmcConfig,
    opts: &SelectionOptions,
) -> Result<SelectionResult> {
    select_k_detailed(data, plaf, priors, cfg, opts).map(|(result, _)| result)
}

/// [`select_k_with`], also returning every fitted chain (the full k = 1
/// chain stands in for k-one).
pub fn select_k_detailed(
    data: &SampleData,
    plaf: &Plaf,
    priors: &PriorSpec,
    cfg: &McmcConfig,
    opts: &SelectionOptions,
) -> Result<(SelectionResult, Vec<PosteriorChain>)> {
    let (lo, hi) = (*opts.k_range.start(), *opts.k_range.end());
    if lo == 0 || lo > hi {
        return Err(Error::Config(format!("empty or invalid k range {lo}..={hi}")));
    }
    if hi > MAX_SELECT_K {
        return Err(Error::Config(format!("k range ends at {hi}, above {MAX_SELECT_K}")));
    }

    let mut fits: Vec<(usize, Restriction)> = Vec::new();
    if opts.include_restricted && lo > 1 {
        fits.push((1, Restriction::KOne));
    }
    for k in lo..=hi {
        fits.push((k, Restriction::Full));
    }
    if opts.include_restricted {
        fits.extend((lo..=hi).map(|k| (k, Restriction::AlphaZero)));
    }

    let chains: Vec<(usize, Restriction, PosteriorChain)> = fits
        .par_iter()
        .map(|&(k, restriction)| {
            run_restricted_chain(data, plaf, k, restriction, priors, cfg)
                .map(|c| (k, restriction, c))
                .map_err(|e| Error::Fit {
                    sample: data.sample_id.clone(),
                    k,
                    restriction: restriction.to_string(),
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;

    let n_obs = data.len();
    let mut scores = Vec::with_capacity(chains.len() + 1);
    for (k, restriction, chain) in &chains {
        scores.push(score_chain(chain, *restriction, n_obs, priors, opts.prior_odds)?);
        if opts.include_restricted && *k == 1 && *restriction == Restriction::Full {
            scores.push(score_chain(chain, Restriction::KOne, n_obs, priors, opts.prior_odds)?);
        }
    }
    scores.sort_by(|a, b| {
        a.k.cmp(&b.k)
            .then(b.restriction.parsimony_rank().cmp(&a.restriction.parsimony_rank()))
    });

    let best = scores
        .iter()
        .min_by(|a, b| a.compare(b, opts.selector))
        .expect("at least one fit");
    let result = SelectionResult {
        sample_id: data.sample_id.clone(),
        n_snps: n_obs,
        selector: opts.selector,
        selected_k: best.k,
        selected_restriction: best.restriction,
        scores,
    };
    Ok((result, chains.into_iter().map(|(_, _, c)| c).collect()))
}

pub fn select_k(
    data: &SampleData,
    plaf: &Plaf,
    k_range: RangeInclusive<usize>,
    priors: &PriorSpec,
    cfg: &McmcConfig,
) -> Result<SelectionResult> {
    let opts = SelectionOptions {
        k_range,
        ..Default::default()
    };
    select_k_with(data, plaf, priors, cfg, &opts)
}

/// Per-sample outcome of full vs alpha-zero vs k-one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub sample_id: String,
    pub full_k: usize,
    pub full_bic: f64,
    pub alpha_zero_k: usize,
    pub alpha_zero_bic: f64,
    pub k_one_bic: f64,
    pub winner: Restriction,
    pub winner_k: usize,
}

/// Reduces a selection sweep to the best member of each family and the
/// overall BIC winner.
pub fn compare_restrictions(result: &SelectionResult) -> Result<Comparison> {
    let pick = |r: Restriction| {
        result
            .scores
            .iter()
            .filter(|s| s.restriction == r)
            .min_by(|a, b| a.compare(b, Selector::Bic))
            .ok_or_else(|| Error::Config(format!("selection result has no {r} fit")))
    };
    let full = pick(Restriction::Full)?;
    let alpha_zero = pick(Restriction::AlphaZero)?;
    let k_one = pick(Restriction::KOne)?;
    let winner = [full, alpha_zero, k_one]
        .into_iter()
        .min_by(|a, b| a.compare(b, Selector::Bic))
        .expect("three candidates");
    Ok(Comparison {
        sample_id: result.sample_id.clone(),
        full_k: full.k,
        full_bic: full.bic,
        alpha_zero_k: alpha_zero.k,
        alpha_zero_bic: alpha_zero.bic,
        k_one_bic: k_one.bic,
        winner: winner.restriction,
        winner_k: winner.k,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonTally {
    pub full: usize,
    pub alpha_zero: usize,
    pub k_one: usize,
}

impl ComparisonTally {
    pub fn from_comparisons<'a>(rows: impl IntoIterator<Item = &'a Comparison>) -> Self {
        rows.into_iter().fold(Self::default(), |mut t, c| {
            match c.winner {
                Restriction::Full => t.full += 1,
                Restriction::AlphaZero => t.alpha_zero += 1,
                Restriction::KOne => t.k_one += 1,
            }
            t
        })
    }

    pub fn get(&self, r: Restriction) -> usize {
        match r {
            Restriction::Full => self.full,
            Restriction::AlphaZero => self.alpha_zero,
            Restriction::KOne => self.k_one,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{Draw, Interval};
    use crate::model::{ModelParams, SnpCounts};

    fn chain_with(lls: &[f64]) -> PosteriorChain {
        PosteriorChain {
            sample_id: "s".into(),
            k: 1,
            restriction: Restriction::Full,
            draws: lls
                .iter()
                .map(|&ll| Draw {
                    iteration: 0,
                    params: ModelParams::new(vec![1.0], 0.1, 2.0).unwrap(),
                    log_likelihood: ll,
                })
                .collect(),
            acceptance: vec![],
            config: McmcConfig::default(),
            chain_seed: 0,
        }
    }

    fn score(k: usize, restriction: Restriction, bic: f64) -> ModelScore {
        let chain = chain_with(&[-1.0]);
        ModelScore {
            k,
            restriction,
            bic,
            hme_log_marginal: -bic / 2.0,
            log_prior_k: None,
            max_log_likelihood: -1.0,
            n_free_params: n_free_params(k, restriction),
            summary: summarize(&chain).unwrap(),
        }
    }

    #[test]
    fn bic_examples() {
        assert_eq!(bic_with_log_n(-100.0, 3, 2.0), 206.0);
        assert!((bic(-100.0, 3, 1000) - (200.0 + 3.0 * 1000f64.ln())).abs() < 1e-12);
        assert_eq!(bic(-42.0, 0, 17), 84.0);
        assert!(bic(-50.0, 2, 100) < bic(-50.0, 3, 100));
    }

    #[test]
    fn free_parameter_counts() {
        assert_eq!(n_free_params(3, Restriction::Full), 4);
        assert_eq!(n_free_params(3, Restriction::AlphaZero), 3);
        assert_eq!(n_free_params(1, Restriction::KOne), 2);
        assert_eq!(n_free_params(1, Restriction::Full), n_free_params(1, Restriction::KOne));
    }

    #[test]
    fn harmonic_mean_examples() {
        assert_eq!(harmonic_mean_log_marginal(&chain_with(&[-7.5; 10])).unwrap(), -7.5);
        let v = harmonic_mean_log_marginal(&chain_with(&[0.0, -(3f64.ln())])).unwrap();
        assert!((v + 2f64.ln()).abs() < 1e-14, "{v}");
        let lls = [-1000.0, -1003.0, -999.5, -2000.0];
        assert!(harmonic_mean_log_marginal(&chain_with(&lls)).unwrap() <= -999.5);
        assert!(matches!(harmonic_mean_log_marginal(&chain_with(&[])), Err(Error::EmptyChain)));
    }

    #[test]
    fn tie_breaks_prefer_small_k_then_restricted() {
        let a = score(2, Restriction::Full, 10.0);
        let b = score(3, Restriction::Full, 10.0);
        assert_eq!(a.compare(&b, Selector::Bic), Ordering::Less);
        let full1 = score(1, Restriction::Full, 10.0);
        let kone = score(1, Restriction::KOne, 10.0);
        assert_eq!(kone.compare(&full1, Selector::Bic), Ordering::Less);
        let az = score(2, Restriction::AlphaZero, 10.0);
        assert_eq!(az.compare(&a, Selector::Bic), Ordering::Less);
        assert_eq!(score(4, Restriction::Full, 9.0).compare(&a, Selector::Bic), Ordering::Less);
    }

    #[test]
    fn comparison_and_tally() {
        let result = SelectionResult {
            sample_id: "s".into(),
            n_snps: 100,
            selector: Selector::Bic,
            scores: vec![
                score(1, Restriction::Full, 50.0),
                score(1, Restriction::KOne, 50.0),
                score(2, Restriction::Full, 30.0),
                score(1, Restriction::AlphaZero, 70.0),
                score(2, Restriction::AlphaZero, 40.0),
            ],
            selected_k: 2,
            selected_restriction: Restriction::Full,
        };
        let c = compare_restrictions(&result).unwrap();
        assert_eq!((c.winner, c.winner_k, c.full_k, c.alpha_zero_k), (Restriction::Full, 2, 2, 2));
        let tally = ComparisonTally::from_comparisons([&c, &c]);
        assert_eq!(tally.full, 2);
        assert_eq!(result.best_for(Restriction::AlphaZero).unwrap().bic, 40.0);
        assert_eq!(result.selected().bic, 30.0);
    }

    #[test]
    fn select_k_guards_range() {
        let data = SampleData::new("s", vec![SnpCounts::new(3, 3)]);
        let plaf = Plaf::new(vec![0.5]).unwrap();
        let cfg = McmcConfig::default();
        let pr = PriorSpec::default();
        assert!(select_k(&data, &plaf, 1..=9, &pr, &cfg).is_err());
        #[allow(clippy::reversed_empty_ranges)]
        let empty = 3..=2;
        assert!(select_k(&data, &plaf, empty, &pr, &cfg).is_err());
        assert!(select_k(&data, &plaf, 0..=2, &pr, &cfg).is_err());
    }

    #[test]
    fn select_k_scores_every_fit() {
        let counts: Vec<_> = (0..60)
            .map(|j| if j % 3 == 0 { SnpCounts::new(2, 40) } else { SnpCounts::new(41, 1) })
            .collect();
        let plaf = Plaf::new((1..=60).map(|j| j as f64 / 61.0).collect()).unwrap();
        let data = SampleData::new("s", counts);
        let cfg = McmcConfig {
            n_iterations: 600,
            burn_in: 100,
            thin: 2,
            seed: 4,
            ..Default::default()
        };
        let opts = SelectionOptions {
            k_range: 1..=3,
            prior_odds: true,
            ..Default::default()
        };
        let res = select_k_with(&data, &plaf, &PriorSpec::default(), &cfg, &opts).unwrap();
        // full 1..=3, alpha-zero 1..=3 and k-one
        assert_eq!(res.scores.len(), 7);
        let full1 = res.score(1, Restriction::Full).unwrap();
        let kone = res.score(1, Restriction::KOne).unwrap();
        assert_eq!(full1.bic, kone.bic);
        for s in &res.scores {
            assert!(s.hme_log_marginal <= s.max_log_likelihood);
            assert!(s.log_prior_k.is_some());
            let Interval { lo, hi } = &s.summary.alpha_ci_95;
            assert!(lo <= &s.summary.median_alpha && &s.summary.median_alpha <= hi);
        }
        let best = res.selected();
        assert!(res.scores.iter().all(|s| best.bic <= s.bic));
        // unmixed data: the k = 1 fits tie and k-one wins over full
        assert_ne!(
            (res.selected_k, res.selected_restriction),
            (1, Restriction::Full)
        );
    }
}
