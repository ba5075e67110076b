//! Band structure, beta-binomial emission and per-sample likelihood.
//!
//! For `k` strains every SNP falls into one of `2^k` bands, one per subset of
//! strains carrying the non-reference allele. A band's within-sample allele
//! frequency (WSAF) at population-level allele frequency (PLAF) `p` is
//!
//! ```text
//! q_r(p) = (1 - alpha) * sum_{s in r} w_s + alpha * p
//! ```
//!
//! and the SNP lands in band `r` with probability
//! `lambda_r(p) = p^|r| * (1 - p)^(k - |r|)`. The exponent on `(1 - p)` is
//! `k - |r|`: it is the only choice for which the band weights sum to one.
//!
//! Read counts given the band follow a beta-binomial with mean `q_r` and
//! shape `nu`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{ln_choose, ln_gamma, ln_rising};

/// WSAF values are clamped into `[WSAF_EPSILON, 1 - WSAF_EPSILON]` before the
/// beta-binomial is evaluated, so bands at exactly 0 or 1 keep positive shape
/// parameters.
pub const WSAF_EPSILON: f64 = 1e-6;

/// Upper bound on `k` accepted by [`BandSet::new`].
pub const MAX_BAND_K: usize = 16;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-10;

// Stride used to interleave SNPs when accumulating the sample likelihood.
const VISIT_STRIDE: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnpCounts {
    pub ref_reads: u32,
    pub nonref_reads: u32,
}

impl SnpCounts {
    pub fn new(ref_reads: u32, nonref_reads: u32) -> Self {
        Self {
            ref_reads,
            nonref_reads,
        }
    }

    pub fn total(&self) -> u32 {
        self.ref_reads + self.nonref_reads
    }

    /// Observed non-reference fraction, `None` at zero coverage.
    pub fn wsaf(&self) -> Option<f64> {
        match self.total() {
            0 => None,
            t => Some(self.nonref_reads as f64 / t as f64),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleData {
    pub sample_id: String,
    pub counts: Vec<SnpCounts>,
}

impl SampleData {
    pub fn new(sample_id: impl Into<String>, counts: Vec<SnpCounts>) -> Self {
        Self {
            sample_id: sample_id.into(),
            counts,
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Population-level allele frequencies, one per SNP, each strictly in (0, 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Plaf(Vec<f64>);

impl Plaf {
    pub fn new(freqs: Vec<f64>) -> Result<Self> {
        if let Some((j, p)) = freqs
            .iter()
            .enumerate()
            .find(|(_, p)| !(**p > 0.0 && **p < 1.0))
        {
            return Err(Error::Domain(format!("PLAF[{j}] = {p} is not in (0, 1)")));
        }
        Ok(Self(freqs))
    }

    pub fn freqs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for Plaf {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Plaf::new(v)
    }
}

impl From<Plaf> for Vec<f64> {
    fn from(p: Plaf) -> Self {
        p.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Band {
    /// Bit `s` set iff strain `s` carries the non-reference allele.
    pub subset_mask: u32,
    pub cardinality: u32,
}

/// The `2^k` bands for `k` strains, indexed by subset mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BandSet {
    k: usize,
    bands: Vec<Band>,
}

impl BandSet {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 || k > MAX_BAND_K {
            return Err(Error::Domain(format!("k = {k} outside 1..={MAX_BAND_K}")));
        }
        let bands = (0..1u32 << k)
            .map(|mask| Band {
                subset_mask: mask,
                cardinality: mask.count_ones(),
            })
            .collect();
        Ok(Self { k, bands })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    /// Sum of `weights` over the strains in each band, in band order.
    pub fn subset_sums(&self, weights: &[f64]) -> Vec<f64> {
        assert_eq!(weights.len(), self.k, "weight vector length != k");
        self.bands
            .iter()
            .map(|band| {
                let mut sum = 0.0;
                for (s, w) in weights.iter().enumerate() {
                    if band.subset_mask & (1 << s) != 0 {
                        sum += w;
                    }
                }
                sum
            })
            .collect()
    }
}

/// One parameter state for a sample at fixed `k`.
///
/// Weights are kept sorted in descending order; the likelihood is invariant
/// under relabelling strains, so this picks one representative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub k: usize,
    pub weights: Vec<f64>,
    pub alpha: f64,
    pub nu: f64,
}

impl ModelParams {
    pub fn new(mut weights: Vec<f64>, alpha: f64, nu: f64) -> Result<Self> {
        weights.sort_by(|a, b| b.total_cmp(a));
        let params = Self {
            k: weights.len(),
            weights,
            alpha,
            nu,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.weights.len() != self.k {
            return Err(Error::Domain(format!(
                "k = {} with {} weights",
                self.k,
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !(*w > 0.0 && *w <= 1.0)) {
            return Err(Error::Domain(format!("weights {:?} not in (0, 1]", self.weights)));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::Domain(format!("weights sum to {sum}")));
        }
        if self.weights.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Domain("weights not sorted descending".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Domain(format!("alpha = {} not in [0, 1]", self.alpha)));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::Domain(format!("nu = {} must be positive", self.nu)));
        }
        Ok(())
    }
}

fn check_plaf_value(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("PLAF {p} is not in (0, 1)")))
    }
}

/// `lambda_r(p) = p^|r| (1-p)^(k-|r|)` for every band.
pub fn band_weights(band_set: &BandSet, p: f64) -> Result<Vec<f64>> {
    check_plaf_value(p)?;
    let k = band_set.k() as i32;
    Ok(band_set
        .bands()
        .iter()
        .map(|b| {
            let c = b.cardinality as i32;
            p.powi(c) * (1.0 - p).powi(k - c)
        })
        .collect())
}

/// Band WSAF `q_r(p)` for every band, before clamping.
pub fn band_wsaf(band_set: &BandSet, params: &ModelParams, p: f64) -> Result<Vec<f64>> {
    if params.k != band_set.k() {
        return Err(Error::LengthMismatch {
            expected: band_set.k(),
            found: params.k,
        });
    }
    check_plaf_value(p)?;
    let keep = 1.0 - params.alpha;
    let drift = params.alpha * p;
    Ok(band_set
        .subset_sums(&params.weights)
        .into_iter()
        .map(|s| keep * s + drift)
        .collect())
}

#[inline]
pub fn clamp_wsaf(q: f64) -> f64 {
    q.clamp(WSAF_EPSILON, 1.0 - WSAF_EPSILON)
}

/// Log beta-binomial probability of `counts` under mean `q` and shape `nu`,
/// including the binomial coefficient.
pub fn beta_binomial_log_pmf(counts: SnpCounts, q: f64, nu: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("band WSAF {q} not in (0, 1)")));
    }
    if !(nu > 0.0) {
        return Err(Error::Domain(format!("nu = {nu} must be positive")));
    }
    let n = counts.nonref_reads as f64;
    let r = counts.ref_reads as f64;
    let a = q * nu;
    let b = (1.0 - q) * nu;
    let value = ln_choose(counts.total() as u64, counts.nonref_reads as u64) + ln_gamma(n + a)
        - ln_gamma(a)
        + ln_gamma(r + b)
        - ln_gamma(b)
        + ln_gamma(nu)
        - ln_gamma(n + r + nu);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(format!(
            "beta-binomial at counts {counts:?}, q = {q}, nu = {nu}"
        )))
    }
}

/// Per-SNP quantities that do not depend on the parameters.
#[derive(Clone, Copy, Debug)]
struct PreparedSnp {
    nonref: u32,
    reference: u32,
    total: f64,
    ln_choose: f64,
    p: f64,
    ln_p: f64,
    ln_1mp: f64,
}

impl PreparedSnp {
    fn new(counts: SnpCounts, p: f64) -> Self {
        Self {
            nonref: counts.nonref_reads,
            reference: counts.ref_reads,
            total: counts.total() as f64,
            ln_choose: ln_choose(counts.total() as u64, counts.nonref_reads as u64),
            p,
            ln_p: p.ln(),
            ln_1mp: (-p).ln_1p(),
        }
    }
}

/// Parameter-dependent quantities shared by every SNP.
#[derive(Clone, Debug)]
pub struct BandState {
    k: usize,
    subset_sums: Vec<f64>,
    cardinalities: Vec<u32>,
    keep: f64,
    alpha: f64,
    nu: f64,
    ln_gamma_nu: f64,
}

impl BandState {
    pub fn new(band_set: &BandSet, params: &ModelParams) -> Result<Self> {
        if params.k != band_set.k() {
            return Err(Error::LengthMismatch {
                expected: band_set.k(),
                found: params.k,
            });
        }
        Ok(Self::from_weights(band_set, &params.weights, params.alpha, params.nu))
    }

    /// Builds the state from weights in any label order.
    pub fn from_weights(band_set: &BandSet, weights: &[f64], alpha: f64, nu: f64) -> Self {
        Self {
            k: band_set.k(),
            subset_sums: band_set.subset_sums(weights),
            cardinalities: band_set.bands().iter().map(|b| b.cardinality).collect(),
            keep: 1.0 - alpha,
            alpha,
            nu,
            ln_gamma_nu: ln_gamma(nu),
        }
    }

    fn snp_log_likelihood(&self, snp: &PreparedSnp, scratch: &mut [f64]) -> f64 {
        let k = self.k as u32;
        let drift = self.alpha * snp.p;
        let mut max = f64::NEG_INFINITY;
        for ((slot, &sum), &c) in scratch
            .iter_mut()
            .zip(&self.subset_sums)
            .zip(&self.cardinalities)
        {
            let q = clamp_wsaf(self.keep * sum + drift);
            let a = q * self.nu;
            let b = (1.0 - q) * self.nu;
            let t = c as f64 * snp.ln_p
                + (k - c) as f64 * snp.ln_1mp
                + ln_rising(a, snp.nonref)
                + ln_rising(b, snp.reference);
            *slot = t;
            if t > max {
                max = t;
            }
        }
        let sum: f64 = scratch.iter().map(|t| (t - max).exp()).sum();
        snp.ln_choose + self.ln_gamma_nu - ln_gamma(snp.total + self.nu) + max + sum.ln()
    }
}

/// A sample aligned with its PLAF, ready for repeated likelihood evaluation.
#[derive(Clone, Debug)]
pub struct SampleLikelihood {
    snps: Vec<PreparedSnp>,
    order: Vec<usize>,
}

impl SampleLikelihood {
    pub fn new(data: &SampleData, plaf: &Plaf) -> Result<Self> {
        if data.len() != plaf.len() {
            return Err(Error::LengthMismatch {
                expected: plaf.len(),
                found: data.len(),
            });
        }
        let snps = data
            .counts
            .iter()
            .zip(plaf.freqs())
            .map(|(&c, &p)| PreparedSnp::new(c, p))
            .collect::<Vec<_>>();
        let m = snps.len();
        let stride = VISIT_STRIDE.min(m.max(1));
        let order = (0..stride)
            .flat_map(|offset| (offset..m).step_by(stride))
            .collect();
        Ok(Self { snps, order })
    }

    pub fn n_snps(&self) -> usize {
        self.snps.len()
    }

    pub fn log_likelihood(&self, state: &BandState) -> f64 {
        self.log_likelihood_above(state, f64::NEG_INFINITY)
            .unwrap_or(f64::NEG_INFINITY)
    }

    /// Sample log-likelihood, or `None` as soon as the running total falls
    /// below `floor`.
    ///
    /// Every per-SNP term is a log-probability and therefore non-positive, so
    /// the partial sum only decreases and an early exit is exact. The
    /// summation order is fixed, so the returned value is identical to
    /// [`SampleLikelihood::log_likelihood`] whenever it is `Some`.
    pub fn log_likelihood_above(&self, state: &BandState, floor: f64) -> Option<f64> {
        let mut scratch = vec![0.0; state.subset_sums.len()];
        let mut total = 0.0;
        for &j in &self.order {
            total += state.snp_log_likelihood(&self.snps[j], &mut scratch);
            if !(total >= floor) {
                return None;
            }
        }
        Some(total)
    }

    /// Per-SNP log-likelihood terms in SNP order.
    pub fn snp_terms(&self, state: &BandState) -> Vec<f64> {
        let mut scratch = vec![0.0; state.subset_sums.len()];
        self.snps
            .iter()
            .map(|s| state.snp_log_likelihood(s, &mut scratch))
            .collect()
    }
}

/// Log-likelihood of one SNP: the `lambda`-weighted beta-binomial mixture over
/// all bands, evaluated with log-sum-exp.
pub fn snp_log_likelihood(
    counts: SnpCounts,
    band_set: &BandSet,
    params: &ModelParams,
    p: f64,
) -> Result<f64> {
    check_plaf_value(p)?;
    let state = BandState::new(band_set, params)?;
    let mut scratch = vec![0.0; band_set.len()];
    Ok(state.snp_log_likelihood(&PreparedSnp::new(counts, p), &mut scratch))
}

/// Log-likelihood of a whole sample: the sum of per-SNP terms.
pub fn sample_log_likelihood(data: &SampleData, plaf: &Plaf, params: &ModelParams) -> Result<f64> {
    let lik = SampleLikelihood::new(data, plaf)?;
    let state = BandState::new(&BandSet::new(params.k)?, params)?;
    let value = lik.log_likelihood(&state);
    if value.is_finite() || lik.n_snps() == 0 {
        Ok(value)
    } else {
        Err(Error::NonFinite(format!("sample {}", data.sample_id)))
    }
}
