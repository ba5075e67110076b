use serde_json::json;
use strainmix::simulator::{run_study, StudyGrid, StudyOptions, STUDY_CSV_HEADER};

use crate::args::{Scale, StudyArgs, DEFAULT_ITERATIONS};
use crate::failure::{CmdResult, EXIT_INFERENCE, EXIT_OK, EXIT_PARTIAL};
use crate::output::{resolve_seed, Manifest, OutputDir};

pub const SUMMARY_COLUMNS: [&str; 10] = [
    "m",
    "c",
    "alpha",
    "k_true",
    "n_ok",
    "mean_k_hat",
    "frac_correct_k",
    "mean_w_msd",
    "median_w_msd",
    "mean_alpha_and",
];

const SMOKE_ITERATIONS: usize = 2_000;

/// Two SNP counts, two depths, one alpha, k in {1, 3}, three replicates:
/// 24 runs.
pub fn smoke_grid() -> StudyGrid {
    StudyGrid {
        m_values: vec![50, 150],
        c_values: vec![25, 100],
        alpha_values: vec![0.1],
        k_values: vec![1, 3],
        replicates: 3,
    }
}

pub fn resolve_grid(args: &StudyArgs) -> StudyGrid {
    let mut grid = match args.scale {
        Scale::Full => StudyGrid::default(),
        Scale::Smoke => smoke_grid(),
    };
    if let Some(v) = &args.m_values {
        grid.m_values = v.clone();
    }
    if let Some(v) = &args.c_values {
        grid.c_values = v.clone();
    }
    if let Some(v) = &args.alpha_values {
        grid.alpha_values = v.clone();
    }
    if let Some(v) = &args.k_values {
        grid.k_values = v.clone();
    }
    if let Some(r) = args.replicates {
        grid.replicates = r;
    }
    grid
}

pub fn run(args: &StudyArgs, command_line: &str) -> CmdResult {
    let seed = resolve_seed(args.common.seed);
    let grid = resolve_grid(args);
    let default_iterations = match args.scale {
        Scale::Full => DEFAULT_ITERATIONS,
        Scale::Smoke => SMOKE_ITERATIONS,
    };
    let cfg = args.mcmc.config_with_default(seed.value, default_iterations);
    let opts = StudyOptions {
        seed: seed.value,
        k_range: args.k_range.clone(),
        nu: args.nu,
        include_restricted: !args.no_restricted,
    };
    let mut out = OutputDir::create(&args.common.out)?;
    let manifest = Manifest::new(
        "study",
        command_line,
        seed,
        json!({ "grid": grid, "mcmc": cfg, "options": opts, "priors": args.mcmc.priors() }),
    );
    log::info!("study: {} runs", grid.n_runs());
    let report = run_study(&grid, &args.mcmc.priors(), &cfg, &out.path(""), &opts)?;
    out.record("study.csv", &STUDY_CSV_HEADER);
    out.record("summary.csv", &SUMMARY_COLUMNS);
    out.finish(manifest)?;

    let total = report.rows.len();
    Ok(match report.n_failed {
        0 => EXIT_OK,
        n if n == total => {
            log::error!("all {total} study runs failed");
            EXIT_INFERENCE
        }
        n => {
            log::warn!("{n} of {total} study runs failed; see study.csv");
            EXIT_PARTIAL
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoke_grid_is_small() {
        assert!(smoke_grid().n_runs() <= 24);
        assert_eq!(StudyGrid::default().n_runs(), 960);
    }
}
