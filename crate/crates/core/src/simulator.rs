//! Synthetic data from the generative model, and the simulation study driver.

use std::fs;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inference::{McmcConfig, PriorSpec, Restriction};
use crate::model::{clamp_wsaf, BandSet, ModelParams, Plaf, SampleData, SnpCounts, WSAF_EPSILON};
use crate::seed::{child_seed, rng_from_seed};
use crate::selection::{select_k_with, SelectionOptions, SelectionResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub sample_id: String,
    /// Number of SNPs.
    pub m: usize,
    /// Total reads per SNP.
    pub coverage: u32,
    pub k: usize,
    pub alpha: f64,
    pub nu: f64,
    /// Strain proportions; drawn from a uniform Dirichlet when absent.
    pub weights: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            sample_id: "sim".into(),
            m: 500,
            coverage: 100,
            k: 1,
            alpha: 0.01,
            nu: 10.0,
            weights: None,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.coverage == 0 || self.k == 0 {
            return Err(Error::Config("m, coverage and k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} not in [0, 1]", self.alpha)));
        }
        if !(self.nu > 0.0) {
            return Err(Error::Config(format!("nu {} must be positive", self.nu)));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.k {
                return Err(Error::Config(format!("{} weights for k = {}", w.len(), self.k)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatedSample {
    pub data: SampleData,
    pub plaf: Plaf,
    pub truth: ModelParams,
}

/// PLAF `j / M` for `j = 1..=M`, with the last SNP clamped below one.
pub fn even_plaf(m: usize) -> Plaf {
    Plaf::new(
        (1..=m)
            .map(|j| (j as f64 / m as f64).min(1.0 - WSAF_EPSILON))
            .collect(),
    )
    .expect("j/M clamped into (0, 1)")
}

fn draw_dirichlet<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
    let gamma = Gamma::new(1.0, 1.0).unwrap();
    loop {
        let raw: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
        let total: f64 = raw.iter().sum();
        if raw.iter().all(|x| *x > 0.0) {
            return raw.into_iter().map(|x| x / total).collect();
        }
    }
}

/// Beta-binomial draw with mean `q` and shape `nu`.
pub fn sample_beta_binomial<R: Rng>(rng: &mut R, total: u32, q: f64, nu: f64) -> u32 {
    let x = Gamma::new(q * nu, 1.0).unwrap().sample(rng);
    let y = Gamma::new((1.0 - q) * nu, 1.0).unwrap().sample(rng);
    let theta = if x + y > 0.0 { x / (x + y) } else { q };
    Binomial::new(total as u64, theta.clamp(0.0, 1.0))
        .unwrap()
        .sample(rng) as u32
}

/// Draws a band for a SNP at PLAF `p`: each strain independently carries the
/// non-reference allele with probability `p`, which gives band `r` probability
/// `p^|r| (1-p)^(k-|r|)`.
pub fn sample_band<R: Rng>(rng: &mut R, k: usize, p: f64) -> u32 {
    (0..k).fold(0u32, |mask, s| if rng.gen::<f64>() < p { mask | 1 << s } else { mask })
}

/// Read counts for every SNP of one sample given its parameters and PLAF.
pub fn simulate_counts<R: Rng>(
    rng: &mut R,
    params: &ModelParams,
    plaf: &Plaf,
    totals: impl IntoIterator<Item = u32>,
) -> Vec<SnpCounts> {
    let band_set = BandSet::new(params.k).expect("valid k");
    let sums = band_set.subset_sums(&params.weights);
    plaf.freqs()
        .iter()
        .zip(totals)
        .map(|(&p, total)| {
            let band = sample_band(rng, params.k, p) as usize;
            let q = clamp_wsaf((1.0 - params.alpha) * sums[band] + params.alpha * p);
            let nonref = sample_beta_binomial(rng, total, q, params.nu);
            SnpCounts::new(total - nonref, nonref)
        })
        .collect()
}

pub fn simulate_sample(cfg: &SimConfig) -> Result<SimulatedSample> {
    cfg.validate()?;
    let mut rng = rng_from_seed(cfg.seed);
    let weights = match &cfg.weights {
        Some(w) => w.clone(),
        None => draw_dirichlet(cfg.k, &mut rng),
    };
    let truth = ModelParams::new(weights, cfg.alpha, cfg.nu)?;
    let plaf = even_plaf(cfg.m);
    let counts = simulate_counts(&mut rng, &truth, &plaf, std::iter::repeat(cfg.coverage));
    Ok(SimulatedSample {
        data: SampleData::new(cfg.sample_id.clone(), counts),
        plaf,
        truth,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub sample_id: String,
    pub params: ModelParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortTruth {
    pub config: SimConfig,
    pub n_samples: usize,
    pub plaf: Plaf,
    pub samples: Vec<TruthRecord>,
}

/// `n` samples sharing one SNP panel; sample `i` uses seed
/// `child_seed(cfg.seed, [i])` and id `{cfg.sample_id}_{i+1}` (or the bare id
/// when `n == 1`).
pub fn simulate_cohort(cfg: &SimConfig, n: usize) -> Result<(Dataset, CohortTruth)> {
    if n == 0 {
        return Err(Error::Config("cohort needs at least one sample".into()));
    }
    let sims = (0..n)
        .map(|i| {
            let sample_cfg = SimConfig {
                sample_id: if n == 1 {
                    cfg.sample_id.clone()
                } else {
                    format!("{}_{}", cfg.sample_id, i + 1)
                },
                seed: if n == 1 { cfg.seed } else { child_seed(cfg.seed, &[i as u64]) },
                ..cfg.clone()
            };
            simulate_sample(&sample_cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let plaf = sims[0].plaf.clone();
    let truth = CohortTruth {
        config: cfg.clone(),
        n_samples: n,
        plaf,
        samples: sims
            .iter()
            .map(|s| TruthRecord {
                sample_id: s.data.sample_id.clone(),
                params: s.truth.clone(),
            })
            .collect(),
    };
    let snp_ids = (1..=cfg.m).map(|j| format!("snp{j}")).collect();
    let ds = Dataset::new(snp_ids, sims.into_iter().map(|s| s.data).collect())?;
    Ok((ds, truth))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyGrid {
    pub m_values: Vec<usize>,
    pub c_values: Vec<u32>,
    pub alpha_values: Vec<f64>,
    pub k_values: Vec<usize>,
    pub replicates: usize,
}

impl Default for StudyGrid {
    fn default() -> Self {
        Self {
            m_values: vec![50, 150, 500, 2500],
            c_values: vec![10, 25, 100, 250],
            alpha_values: vec![0.01, 0.1, 0.5],
            k_values: vec![1, 3],
            replicates: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    pub m: usize,
    pub c: u32,
    pub alpha: f64,
    pub k: usize,
}

impl StudyGrid {
    pub fn validate(&self) -> Result<()> {
        if self.m_values.is_empty()
            || self.c_values.is_empty()
            || self.alpha_values.is_empty()
            || self.k_values.is_empty()
            || self.replicates == 0
        {
            return Err(Error::Config("study grid has an empty dimension".into()));
        }
        Ok(())
    }

    /// Cells in row-major order over (m, c, alpha, k).
    pub fn cells(&self) -> Vec<StudyCell> {
        let mut cells = Vec::new();
        for &m in &self.m_values {
            for &c in &self.c_values {
                for &alpha in &self.alpha_values {
                    for &k in &self.k_values {
                        cells.push(StudyCell { m, c, alpha, k });
                    }
                }
            }
        }
        cells
    }

    pub fn n_runs(&self) -> usize {
        self.m_values.len()
            * self.c_values.len()
            * self.alpha_values.len()
            * self.k_values.len()
            * self.replicates
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyOptions {
    pub seed: u64,
    pub k_range: RangeInclusive<usize>,
    pub nu: f64,
    pub include_restricted: bool,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            k_range: 1..=5,
            nu: 10.0,
            include_restricted: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub m: usize,
    pub c: u32,
    pub alpha: f64,
    pub k_true: usize,
    pub replicate: usize,
    pub k_hat: Option<usize>,
    /// Mean squared deviation of posterior-median W from truth, both sorted
    /// descending, from the full fit at the true k.
    pub w_msd: Option<f64>,
    /// `|alpha_hat - alpha| / alpha` from the same fit.
    pub alpha_and: Option<f64>,
    pub runtime_seconds: f64,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub m: usize,
    pub c: u32,
    pub alpha: f64,
    pub k_true: usize,
    pub n_ok: usize,
    pub mean_k_hat: f64,
    pub frac_correct_k: f64,
    pub mean_w_msd: f64,
    pub median_w_msd: f64,
    pub mean_alpha_and: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
    pub cells: Vec<CellSummary>,
    pub n_failed: usize,
}

pub const STUDY_CSV_HEADER: [&str; 10] = [
    "m",
    "c",
    "alpha",
    "k_true",
    "replicate",
    "k_hat",
    "w_msd",
    "alpha_and",
    "runtime_seconds",
    "status",
];

/// Mean squared deviation between two proportion vectors after sorting both
/// descending; the shorter one is padded with zeros.
pub fn weight_msd(estimate: &[f64], truth: &[f64]) -> f64 {
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    };
    let (a, b) = (sorted(estimate), sorted(truth));
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            let d = a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0);
            d * d
        })
        .sum::<f64>()
        / n as f64
}

pub fn alpha_normalized_deviation(estimate: f64, truth: f64) -> f64 {
    (estimate - truth).abs() / truth
}

/// Simulates and fits one replicate of one grid cell, returning its study row
/// and, when the fit succeeded, the full selection sweep.
pub fn run_replicate(
    cell: &StudyCell,
    cell_index: usize,
    replicate: usize,
    priors: &PriorSpec,
    cfg: &McmcConfig,
    opts: &StudyOptions,
) -> (StudyRow, Option<SelectionResult>) {
    let start = Instant::now();
    let sim_seed = child_seed(opts.seed, &[cell_index as u64, replicate as u64]);
    let outcome = (|| -> Result<(usize, f64, f64, SelectionResult)> {
        let sim = simulate_sample(&SimConfig {
            sample_id: format!("cell{cell_index}_rep{replicate}"),
            m: cell.m,
            coverage: cell.c,
            k: cell.k,
            alpha: cell.alpha,
            nu: opts.nu,
            weights: None,
            seed: sim_seed,
        })?;
        let chain_cfg = McmcConfig {
            seed: child_seed(sim_seed, &[u64::MAX]),
            ..cfg.clone()
        };
        let sel_opts = SelectionOptions {
            k_range: opts.k_range.clone(),
            include_restricted: opts.include_restricted,
            ..Default::default()
        };
        let result = select_k_with(&sim.data, &sim.plaf, priors, &chain_cfg, &sel_opts)?;
        let at_truth = result
            .score(cell.k, Restriction::Full)
            .ok_or_else(|| Error::Config(format!("k = {} outside the fitted range", cell.k)))?;
        let w_msd = weight_msd(&at_truth.summary.weight_medians, &sim.truth.weights);
        let alpha_and = alpha_normalized_deviation(at_truth.summary.median_alpha, cell.alpha);
        Ok((result.selected_k, w_msd, alpha_and, result))
    })();
    let runtime_seconds = start.elapsed().as_secs_f64();
    let (k_hat, w_msd, alpha_and, status, selection) = match outcome {
        Ok((k, w, a, sel)) => (Some(k), Some(w), Some(a), "ok".to_string(), Some(sel)),
        Err(e) => (None, None, None, format!("failed: {e}"), None),
    };
    let row = StudyRow {
        m: cell.m,
        c: cell.c,
        alpha: cell.alpha,
        k_true: cell.k,
        replicate,
        k_hat,
        w_msd,
        alpha_and,
        runtime_seconds,
        status,
    };
    (row, selection)
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    crate::inference::quantile_sorted(&v, 0.5)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn summarize_cell(cell: &StudyCell, rows: &[StudyRow]) -> CellSummary {
    let ok: Vec<&StudyRow> = rows.iter().filter(|r| r.k_hat.is_some()).collect();
    let k_hats: Vec<f64> = ok.iter().map(|r| r.k_hat.unwrap() as f64).collect();
    let msd: Vec<f64> = ok.iter().filter_map(|r| r.w_msd).collect();
    let and: Vec<f64> = ok.iter().filter_map(|r| r.alpha_and).collect();
    CellSummary {
        m: cell.m,
        c: cell.c,
        alpha: cell.alpha,
        k_true: cell.k,
        n_ok: ok.len(),
        mean_k_hat: mean(&k_hats),
        frac_correct_k: if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().filter(|r| r.k_hat == Some(cell.k)).count() as f64 / ok.len() as f64
        },
        mean_w_msd: mean(&msd),
        median_w_msd: median(msd),
        mean_alpha_and: mean(&and),
    }
}

fn opt_to_string<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

pub fn write_study_csv<W: Write>(rows: &[StudyRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(STUDY_CSV_HEADER)?;
    for r in rows {
        wtr.write_record([
            r.m.to_string(),
            r.c.to_string(),
            r.alpha.to_string(),
            r.k_true.to_string(),
            r.replicate.to_string(),
            opt_to_string(&r.k_hat),
            opt_to_string(&r.w_msd),
            opt_to_string(&r.alpha_and),
            format!("{:.3}", r.runtime_seconds),
            r.status.clone(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(cells: &[CellSummary], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for c in cells {
        wtr.serialize(c)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Simulates and fits every (cell, replicate) of the grid, writing
/// `study.csv` (one row per run, failures included) and `summary.csv` (one
/// row per cell) into `out_dir`.
///
/// Runs are spread over the current rayon pool. Each run's RNG streams derive
/// from `(opts.seed, cell index, replicate)`, so output does not depend on
/// scheduling.
pub fn run_study(
    grid: &StudyGrid,
    priors: &PriorSpec,
    cfg: &McmcConfig,
    out_dir: &Path,
    opts: &StudyOptions,
) -> Result<StudyReport> {
    grid.validate()?;
    priors.validate()?;
    cfg.validate()?;
    if let Some(k) = grid.k_values.iter().find(|k| !opts.k_range.contains(k)) {
        return Err(Error::Config(format!("true k = {k} outside the fitted k range")));
    }
    fs::create_dir_all(out_dir)?;

    let cells = grid.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..grid.replicates).map(move |r| (c, r)))
        .collect();
    let rows: Vec<StudyRow> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let (row, _) = run_replicate(&cells[c], c, r, priors, cfg, opts);
            log::info!(
                "cell m={} c={} alpha={} k={} rep={} -> {}",
                row.m,
                row.c,
                row.alpha,
                row.k_true,
                row.replicate,
                row.status
            );
            row
        })
        .collect();

    let summaries: Vec<CellSummary> = cells
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            let r = grid.replicates;
            summarize_cell(cell, &rows[i * r..(i + 1) * r])
        })
        .collect();

    write_study_csv(&rows, fs::File::create(out_dir.join("study.csv"))?)?;
    write_summary_csv(&summaries, fs::File::create(out_dir.join("summary.csv"))?)?;
    let n_failed = rows.iter().filter(|r| r.k_hat.is_none()).count();
    Ok(StudyReport {
        rows,
        cells: summaries,
        n_failed,
    })
}
