use std::ops::RangeInclusive;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use strainmix::data::{FilterConfig, InputFormat};
use strainmix::inference::{McmcConfig, PriorSpec, DEFAULT_PILOT_ITERATIONS, DEFAULT_PILOT_STARTS};
use strainmix::selection::{Selector, MAX_SELECT_K};

#[derive(Parser, Debug)]
#[command(name = "strainmix", version, about = "Strain mixture inference from SNP read counts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit the mixture model to every sample of a read-count table
    Fit(FitArgs),
    /// Simulate a cohort with known parameters
    Simulate(SimulateArgs),
    /// Run the simulation study over a parameter grid
    Study(StudyArgs),
    /// Compare the full model against the alpha-zero and k-one restrictions
    Compare(CompareArgs),
    /// Filter the input and write the pooled PLAF
    Plaf(PlafArgs),
}

impl Command {
    pub fn jobs(&self) -> Option<usize> {
        match self {
            Command::Fit(a) => a.common.jobs,
            Command::Simulate(a) => a.common.jobs,
            Command::Study(a) => a.common.jobs,
            Command::Compare(a) => a.common.jobs,
            Command::Plaf(a) => a.common.jobs,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Output directory; must not exist yet
    #[arg(long)]
    pub out: PathBuf,

    /// Top-level seed; drawn from system entropy when omitted
    #[arg(long)]
    pub seed: Option<u64>,

    /// Worker threads (default: all cores)
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Read-count table (long TSV or JSON)
    #[arg(long)]
    pub input: PathBuf,

    /// Input format; inferred from the extension when omitted
    #[arg(long, value_parser = parse_format)]
    pub format: Option<InputFormat>,
}

impl InputArgs {
    pub fn resolved_format(&self) -> InputFormat {
        self.format.unwrap_or_else(|| match self.input.extension() {
            Some(ext) if ext.eq_ignore_ascii_case("json") => InputFormat::Json,
            _ => InputFormat::Tsv,
        })
    }
}

#[derive(Args, Debug, Clone)]
pub struct FilterArgs {
    /// Drop SNPs whose pooled minor allele frequency is below this
    #[arg(long, default_value_t = 0.01)]
    pub min_maf: f64,

    /// Drop samples with more than this many low-coverage SNPs
    #[arg(long, default_value_t = 4000)]
    pub max_low_coverage_snps: usize,

    /// Read depth below which a SNP counts as low coverage
    #[arg(long, default_value_t = 20)]
    pub low_coverage_threshold: u32,

    /// Keep SNPs with zero reads in some sample
    #[arg(long)]
    pub keep_missing: bool,
}

impl FilterArgs {
    pub fn config(&self) -> FilterConfig {
        FilterConfig {
            min_maf: self.min_maf,
            max_low_coverage_snps: self.max_low_coverage_snps,
            low_coverage_threshold: self.low_coverage_threshold,
            drop_missing: !self.keep_missing,
        }
    }
}

pub const DEFAULT_ITERATIONS: usize = 10_000;

#[derive(Args, Debug, Clone)]
pub struct McmcArgs {
    /// MCMC iterations per chain [default: 10000; 2000 for `study --scale smoke`]
    #[arg(long)]
    pub iterations: Option<usize>,

    /// Iterations discarded before draws are kept [default: iterations / 5]
    #[arg(long)]
    pub burn_in: Option<usize>,

    #[arg(long, default_value_t = 5)]
    pub thin: usize,

    /// Reject nu values that would make any mixed band bimodal
    #[arg(long)]
    pub nu_unimodal: bool,

    /// Fixed lower bound on nu
    #[arg(long)]
    pub nu_lower_bound: Option<f64>,

    /// Short pilot runs from independent prior draws; the chain starts from
    /// the best state they reach (1 = start from a single prior draw)
    #[arg(long, default_value_t = DEFAULT_PILOT_STARTS)]
    pub pilot_starts: usize,

    /// Iterations per pilot run
    #[arg(long, default_value_t = DEFAULT_PILOT_ITERATIONS)]
    pub pilot_iterations: usize,
}

impl McmcArgs {
    pub fn config(&self, seed: u64) -> McmcConfig {
        self.config_with_default(seed, DEFAULT_ITERATIONS)
    }

    pub fn config_with_default(&self, seed: u64, default_iterations: usize) -> McmcConfig {
        let n_iterations = self.iterations.unwrap_or(default_iterations);
        McmcConfig {
            n_iterations,
            burn_in: self.burn_in.unwrap_or(n_iterations / 5),
            thin: self.thin,
            seed,
            nu_lower_bound: self.nu_lower_bound,
            nu_unimodal: self.nu_unimodal,
            pilot_starts: self.pilot_starts,
            pilot_iterations: self.pilot_iterations,
        }
    }

    pub fn priors(&self) -> PriorSpec {
        PriorSpec::default()
    }
}

#[derive(Args, Debug, Clone)]
pub struct SelectArgs {
    /// Candidate strain numbers, `LO-HI` or a single value
    #[arg(long, default_value = "1-7", value_parser = parse_k_range)]
    pub k_range: RangeInclusive<usize>,

    /// Add the zero-truncated Poisson prior on k to harmonic-mean scores
    #[arg(long)]
    pub prior_odds: bool,

    #[arg(long, value_enum, default_value_t = SelectorArg::Bic)]
    pub selector: SelectorArg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectorArg {
    Bic,
    Hme,
}

impl From<SelectorArg> for Selector {
    fn from(s: SelectorArg) -> Self {
        match s {
            SelectorArg::Bic => Selector::Bic,
            SelectorArg::Hme => Selector::Hme,
        }
    }
}

/// `auto` or a fixed strain number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KChoice {
    Auto,
    Fixed(usize),
}

#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    #[command(flatten)]
    pub select: SelectArgs,

    /// Number of strains, or `auto` to select over --k-range
    #[arg(long, default_value = "auto", value_parser = parse_k_choice)]
    pub k: KChoice,

    /// Also fit the alpha-zero and k-one restrictions during selection
    #[arg(long)]
    pub restricted: bool,

    /// Write every fitted chain as CSV under chains/
    #[arg(long)]
    pub dump_chains: bool,

    /// Also render each sample's figure data as SVG
    #[arg(long)]
    pub svg: bool,

    /// Truth JSON from `simulate`; adds a score.csv against it
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Number of SNPs
    #[arg(long, default_value_t = 500)]
    pub m: usize,

    /// Read depth per SNP
    #[arg(long, default_value_t = 100)]
    pub c: u32,

    #[arg(long, default_value_t = 1)]
    pub k: usize,

    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,

    #[arg(long, default_value_t = 10.0)]
    pub nu: f64,

    /// Comma-separated strain proportions; Dirichlet(1) draws when omitted
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,

    /// Number of samples in the cohort
    #[arg(long, default_value_t = 1)]
    pub samples: usize,

    #[arg(long, default_value = "sim")]
    pub sample_id: String,

    #[arg(long, value_parser = parse_format, default_value = "tsv")]
    pub format: InputFormat,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// The full published grid
    Full,
    /// At most 24 runs for quick checks
    Smoke,
}

#[derive(Args, Debug, Clone)]
pub struct StudyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub mcmc: McmcArgs,

    #[arg(long, value_enum, default_value_t = Scale::Full)]
    pub scale: Scale,

    /// Candidate strain numbers for selection
    #[arg(long, default_value = "1-5", value_parser = parse_k_range)]
    pub k_range: RangeInclusive<usize>,

    /// Override the grid's SNP counts (comma-separated)
    #[arg(long, value_delimiter = ',')]
    pub m_values: Option<Vec<usize>>,

    #[arg(long, value_delimiter = ',')]
    pub c_values: Option<Vec<u32>>,

    #[arg(long, value_delimiter = ',')]
    pub alpha_values: Option<Vec<f64>>,

    #[arg(long, value_delimiter = ',')]
    pub k_values: Option<Vec<usize>>,

    #[arg(long)]
    pub replicates: Option<usize>,

    /// Shape of the simulated beta-binomial
    #[arg(long, default_value_t = 10.0)]
    pub nu: f64,

    /// Skip the alpha-zero and k-one fits
    #[arg(long)]
    pub no_restricted: bool,
}

#[derive(Args, Debug, Clone)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[command(flatten)]
    pub mcmc: McmcArgs,

    #[arg(long, default_value = "1-7", value_parser = parse_k_range)]
    pub k_range: RangeInclusive<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct PlafArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub filter: FilterArgs,

    /// Compute PLAF on the raw table without filtering
    #[arg(long)]
    pub no_filter: bool,
}

fn parse_format(s: &str) -> Result<InputFormat, String> {
    s.parse().map_err(|e: strainmix::Error| e.to_string())
}

pub fn parse_k_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let parse = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| format!("invalid k `{t}`"))
    };
    let (lo, hi) = match s.split_once('-').or_else(|| s.split_once("..")) {
        Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
        None => {
            let k = parse(s)?;
            (k, k)
        }
    };
    if lo == 0 || lo > hi {
        return Err(format!("k range `{s}` is empty or starts at 0"));
    }
    if hi > MAX_SELECT_K {
        return Err(format!("k range `{s}` ends above {MAX_SELECT_K}"));
    }
    Ok(lo..=hi)
}

fn parse_k_choice(s: &str) -> Result<KChoice, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(KChoice::Auto);
    }
    match s.parse::<usize>() {
        Ok(k) if (1..=MAX_SELECT_K).contains(&k) => Ok(KChoice::Fixed(k)),
        _ => Err(format!("k must be `auto` or 1..={MAX_SELECT_K}, got `{s}`")),
    }
}
