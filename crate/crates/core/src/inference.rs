//! Metropolis-Hastings sampling of `(alpha, W, nu)` for one sample at fixed `k`.
//!
//! Each iteration updates the blocks alpha, W and nu in that order. Every
//! proposal is an independent draw from the block's prior, so the prior and
//! proposal densities cancel and a proposal is accepted with probability
//! `min(1, L(proposal) / L(current))`.

use std::fmt;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{clamp_wsaf, BandSet, BandState, ModelParams, Plaf, SampleData, SampleLikelihood};
use crate::seed::{chain_seed, rng_from_seed, ChainRng};

/// Value alpha is pinned to under the alpha-zero restriction.
pub const ALPHA_ZERO_VALUE: f64 = 0.001;

const MAX_INIT_DRAWS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    /// Symmetric Dirichlet concentration for W given k.
    pub dirichlet_concentration: f64,
    /// Mean of the exponential prior on nu (rate = 1 / mean).
    pub nu_mean: f64,
    /// Rate of the zero-truncated Poisson prior on k.
    pub k_prior_rate: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            dirichlet_concentration: 1.0,
            nu_mean: 5.0,
            k_prior_rate: 2.0,
        }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dirichlet_concentration", self.dirichlet_concentration),
            ("nu_mean", self.nu_mean),
            ("k_prior_rate", self.k_prior_rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }

    fn draw_weights<R: Rng>(&self, k: usize, rng: &mut R) -> Vec<f64> {
        if k == 1 {
            return vec![1.0];
        }
        let gamma = Gamma::new(self.dirichlet_concentration, 1.0).expect("validated concentration");
        loop {
            let raw: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
            let total: f64 = raw.iter().sum();
            if total > 0.0 && raw.iter().all(|x| *x > 0.0) {
                let mut w: Vec<f64> = raw.into_iter().map(|x| x / total).collect();
                w.sort_by(|a, b| b.total_cmp(a));
                return w;
            }
        }
    }

    fn draw_alpha<R: Rng>(&self, rng: &mut R) -> f64 {
        rng.gen::<f64>()
    }

    fn draw_nu<R: Rng>(&self, rng: &mut R) -> f64 {
        loop {
            let nu = Exp::new(1.0 / self.nu_mean).expect("validated mean").sample(rng);
            if nu > 0.0 {
                return nu;
            }
        }
    }
}

pub const DEFAULT_PILOT_STARTS: usize = 8;
pub const DEFAULT_PILOT_ITERATIONS: usize = 500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub n_iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Fixed lower bound on nu; proposals below it are rejected.
    pub nu_lower_bound: Option<f64>,
    /// Reject states where some mixed band's beta-binomial would be bimodal.
    pub nu_unimodal: bool,
    /// Number of short pilot runs, each started from its own prior draw. The
    /// main chain starts from the best state any pilot visited. Zero or one
    /// means a single prior draw.
    #[serde(default)]
    pub pilot_starts: usize,
    #[serde(default)]
    pub pilot_iterations: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_iterations: 10_000,
            burn_in: 2_000,
            thin: 5,
            seed: 0,
            nu_lower_bound: None,
            nu_unimodal: false,
            pilot_starts: DEFAULT_PILOT_STARTS,
            pilot_iterations: DEFAULT_PILOT_ITERATIONS,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iterations {
            return Err(Error::Config(format!(
                "burn_in {} must be below n_iterations {}",
                self.burn_in, self.n_iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if let Some(b) = self.nu_lower_bound {
            if !(b > 0.0) {
                return Err(Error::Config(format!("nu_lower_bound {b} must be positive")));
            }
        }
        Ok(())
    }
}

/// Which parameters a fit is allowed to move.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Restriction {
    /// All of alpha, W and nu free.
    Full,
    /// alpha pinned to [`ALPHA_ZERO_VALUE`].
    AlphaZero,
    /// A single strain, alpha and nu free.
    KOne,
}

impl Restriction {
    pub const ALL: [Restriction; 3] = [Restriction::Full, Restriction::AlphaZero, Restriction::KOne];

    pub fn as_str(&self) -> &'static str {
        match self {
            Restriction::Full => "full",
            Restriction::AlphaZero => "alpha_zero",
            Restriction::KOne => "k_one",
        }
    }

    /// Lower is more restricted; used for tie-breaking.
    pub fn parsimony_rank(&self) -> u8 {
        match self {
            Restriction::KOne => 0,
            Restriction::AlphaZero => 1,
            Restriction::Full => 2,
        }
    }
}

impl fmt::Display for Restriction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Alpha,
    Weights,
    Nu,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockAcceptance {
    pub block: Block,
    pub proposed: usize,
    pub accepted: usize,
}

impl BlockAcceptance {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub iteration: usize,
    pub params: ModelParams,
    pub log_likelihood: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorChain {
    pub sample_id: String,
    pub k: usize,
    pub restriction: Restriction,
    pub draws: Vec<Draw>,
    pub acceptance: Vec<BlockAcceptance>,
    pub config: McmcConfig,
    /// Seed actually used for this chain's RNG stream.
    pub chain_seed: u64,
}

impl PosteriorChain {
    pub fn acceptance_rate(&self, block: Block) -> Option<f64> {
        self.acceptance.iter().find(|a| a.block == block).map(BlockAcceptance::rate)
    }

    pub fn log_likelihoods(&self) -> impl Iterator<Item = f64> + '_ {
        self.draws.iter().map(|d| d.log_likelihood)
    }

    /// CSV with columns `iteration, alpha, w_1..w_k, nu, log_likelihood`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["iteration".to_string(), "alpha".to_string()];
        header.extend((1..=self.k).map(|i| format!("w_{i}")));
        header.push("nu".into());
        header.push("log_likelihood".into());
        wtr.write_record(&header)?;
        for d in &self.draws {
            let mut row = vec![d.iteration.to_string(), d.params.alpha.to_string()];
            row.extend(d.params.weights.iter().map(f64::to_string));
            row.push(d.params.nu.to_string());
            row.push(d.log_likelihood.to_string());
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// One independence Metropolis-Hastings step.
///
/// `evaluate` receives the acceptance floor `current_ll + ln u` and returns
/// the proposal's log-likelihood if it reaches that floor, `None` otherwise.
/// Returns the accepted log-likelihood, or `None` on rejection.
pub fn independence_step<R, F>(rng: &mut R, current_ll: f64, evaluate: F) -> Option<f64>
where
    R: Rng,
    F: FnOnce(f64) -> Option<f64>,
{
    let u: f64 = 1.0 - rng.gen::<f64>();
    let floor = current_ll + u.ln();
    evaluate(floor).filter(|ll| *ll >= floor)
}

/// Smallest nu for which every band other than the all-reference and
/// all-non-reference ones has both beta shape parameters of at least one,
/// judged at PLAF 0.5. Zero when there is no such band (k = 1).
pub fn unimodal_nu_bound(band_set: &BandSet, weights: &[f64], alpha: f64) -> f64 {
    let full = (1u32 << band_set.k()) - 1;
    band_set
        .subset_sums(weights)
        .into_iter()
        .zip(band_set.bands())
        .filter(|(_, b)| b.subset_mask != 0 && b.subset_mask != full)
        .map(|(s, _)| {
            let q = clamp_wsaf((1.0 - alpha) * s + alpha * 0.5);
            1.0 / q.min(1.0 - q)
        })
        .fold(0.0, f64::max)
}

struct ChainSetup<'a> {
    lik: SampleLikelihood,
    band_set: BandSet,
    priors: &'a PriorSpec,
    cfg: &'a McmcConfig,
    restriction: Restriction,
}

impl ChainSetup<'_> {
    fn in_support(&self, p: &ModelParams) -> bool {
        if let Some(b) = self.cfg.nu_lower_bound {
            if p.nu < b {
                return false;
            }
        }
        if self.cfg.nu_unimodal && p.nu < unimodal_nu_bound(&self.band_set, &p.weights, p.alpha) {
            return false;
        }
        true
    }

    fn evaluate_above(&self, p: &ModelParams, floor: f64) -> Option<f64> {
        if !self.in_support(p) {
            return None;
        }
        let state = BandState::from_weights(&self.band_set, &p.weights, p.alpha, p.nu);
        self.lik.log_likelihood_above(&state, floor)
    }

    fn draw_initial(&self, rng: &mut ChainRng) -> Result<(ModelParams, f64)> {
        let k = self.band_set.k();
        for _ in 0..MAX_INIT_DRAWS {
            let alpha = match self.restriction {
                Restriction::AlphaZero => ALPHA_ZERO_VALUE,
                _ => self.priors.draw_alpha(rng),
            };
            let weights = self.priors.draw_weights(k, rng);
            let nu = self.priors.draw_nu(rng);
            let params = ModelParams {
                k,
                weights,
                alpha,
                nu,
            };
            if let Some(ll) = self.evaluate_above(&params, f64::NEG_INFINITY) {
                if ll.is_finite() {
                    return Ok((params, ll));
                }
            }
        }
        Err(Error::InitFailed(MAX_INIT_DRAWS))
    }

    /// One pass over `blocks`, each an independence proposal from the prior.
    fn sweep(
        &self,
        blocks: &[Block],
        rng: &mut ChainRng,
        current: &mut ModelParams,
        current_ll: &mut f64,
        mut acceptance: Option<&mut Vec<BlockAcceptance>>,
    ) {
        let k = self.band_set.k();
        for (i, block) in blocks.iter().enumerate() {
            let mut proposal = current.clone();
            match block {
                Block::Alpha => proposal.alpha = self.priors.draw_alpha(rng),
                Block::Weights => proposal.weights = self.priors.draw_weights(k, rng),
                Block::Nu => proposal.nu = self.priors.draw_nu(rng),
            }
            let accepted =
                independence_step(rng, *current_ll, |floor| self.evaluate_above(&proposal, floor));
            if let Some(stats) = acceptance.as_deref_mut() {
                stats[i].proposed += 1;
                stats[i].accepted += usize::from(accepted.is_some());
            }
            if let Some(ll) = accepted {
                *current = proposal;
                *current_ll = ll;
            }
        }
    }

    /// Starting state: a prior draw, or with pilots the best state visited by
    /// `pilot_starts` short runs from independent prior draws.
    fn initial_state(&self, blocks: &[Block], rng: &mut ChainRng) -> Result<(ModelParams, f64)> {
        if self.cfg.pilot_starts <= 1 || self.cfg.pilot_iterations == 0 {
            return self.draw_initial(rng);
        }
        let mut best: Option<(ModelParams, f64)> = None;
        for _ in 0..self.cfg.pilot_starts {
            let (mut current, mut current_ll) = self.draw_initial(rng)?;
            let mut local = (current.clone(), current_ll);
            for _ in 0..self.cfg.pilot_iterations {
                self.sweep(blocks, rng, &mut current, &mut current_ll, None);
                if current_ll > local.1 {
                    local = (current.clone(), current_ll);
                }
            }
            if best.as_ref().map_or(true, |b| local.1 > b.1) {
                best = Some(local);
            }
        }
        Ok(best.expect("pilot_starts >= 2"))
    }

    fn blocks(&self) -> Vec<Block> {
        let mut blocks = Vec::with_capacity(3);
        if self.restriction != Restriction::AlphaZero {
            blocks.push(Block::Alpha);
        }
        if self.band_set.k() > 1 {
            blocks.push(Block::Weights);
        }
        blocks.push(Block::Nu);
        blocks
    }
}

/// Runs a full-model chain at `k`.
pub fn run_chain(
    data: &SampleData,
    plaf: &Plaf,
    k: usize,
    priors: &PriorSpec,
    cfg: &McmcConfig,
) -> Result<PosteriorChain> {
    run_restricted_chain(data, plaf, k, Restriction::Full, priors, cfg)
}

/// Runs a chain under `restriction`. [`Restriction::KOne`] requires `k == 1`.
///
/// The chain's RNG seed is `cfg.seed` mixed with a hash of the sample id, `k`
/// and the parameter blocks being sampled, so a k-one fit and a full fit at
/// k = 1 (the same model) share a stream.
pub fn run_restricted_chain(
    data: &SampleData,
    plaf: &Plaf,
    k: usize,
    restriction: Restriction,
    priors: &PriorSpec,
    cfg: &McmcConfig,
) -> Result<PosteriorChain> {
    priors.validate()?;
    cfg.validate()?;
    if restriction == Restriction::KOne && k != 1 {
        return Err(Error::Config(format!("k_one restriction with k = {k}")));
    }
    let tag = match restriction {
        Restriction::AlphaZero => "alpha_zero",
        Restriction::Full | Restriction::KOne => "full",
    };
    let seed = chain_seed(cfg.seed, &data.sample_id, k, tag);
    let setup = ChainSetup {
        lik: SampleLikelihood::new(data, plaf)?,
        band_set: BandSet::new(k)?,
        priors,
        cfg,
        restriction,
    };
    let mut rng = rng_from_seed(seed);
    let blocks = setup.blocks();
    let (mut current, mut current_ll) = setup.initial_state(&blocks, &mut rng)?;

    let mut acceptance: Vec<BlockAcceptance> = blocks
        .iter()
        .map(|&block| BlockAcceptance {
            block,
            proposed: 0,
            accepted: 0,
        })
        .collect();
    let n_kept = (cfg.n_iterations - cfg.burn_in).div_ceil(cfg.thin);
    let mut draws = Vec::with_capacity(n_kept);

    for iteration in 0..cfg.n_iterations {
        setup.sweep(&blocks, &mut rng, &mut current, &mut current_ll, Some(&mut acceptance));
        if iteration >= cfg.burn_in && (iteration - cfg.burn_in) % cfg.thin == 0 {
            draws.push(Draw {
                iteration,
                params: current.clone(),
                log_likelihood: current_ll,
            });
        }
    }

    Ok(PosteriorChain {
        sample_id: data.sample_id.clone(),
        k,
        restriction,
        draws,
        acceptance,
        config: cfg.clone(),
        chain_seed: seed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    /// Draw with the highest log-likelihood.
    pub map_params: ModelParams,
    pub max_log_likelihood: f64,
    pub median_alpha: f64,
    pub alpha_ci_95: Interval,
    pub weight_medians: Vec<f64>,
    pub weight_ci_95: Vec<Interval>,
    pub median_nu: f64,
    pub nu_ci_95: Interval,
    pub n_draws: usize,
}

/// Linear-interpolation quantile of sorted data (Hyndman-Fan type 7).
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn median_and_ci(mut values: Vec<f64>) -> (f64, Interval) {
    values.sort_by(f64::total_cmp);
    (
        quantile_sorted(&values, 0.5),
        Interval {
            lo: quantile_sorted(&values, 0.025),
            hi: quantile_sorted(&values, 0.975),
        },
    )
}

fn map_draw(chain: &PosteriorChain) -> Result<&Draw> {
    chain
        .draws
        .iter()
        .reduce(|best, d| if d.log_likelihood > best.log_likelihood { d } else { best })
        .ok_or(Error::EmptyChain)
}

pub fn max_observed_log_likelihood(chain: &PosteriorChain) -> Result<f64> {
    map_draw(chain).map(|d| d.log_likelihood)
}

/// Posterior medians and equal-tailed 95% intervals, plus the
/// highest-likelihood draw.
pub fn summarize(chain: &PosteriorChain) -> Result<PosteriorSummary> {
    let map = map_draw(chain)?;
    let (median_alpha, alpha_ci_95) =
        median_and_ci(chain.draws.iter().map(|d| d.params.alpha).collect());
    let (median_nu, nu_ci_95) = median_and_ci(chain.draws.iter().map(|d| d.params.nu).collect());
    let (weight_medians, weight_ci_95) = (0..chain.k)
        .map(|i| median_and_ci(chain.draws.iter().map(|d| d.params.weights[i]).collect()))
        .unzip();
    Ok(PosteriorSummary {
        map_params: map.params.clone(),
        max_log_likelihood: map.log_likelihood,
        median_alpha,
        alpha_ci_95,
        weight_medians,
        weight_ci_95,
        median_nu,
        nu_ci_95,
        n_draws: chain.draws.len(),
    })
}
