use rayon::prelude::*;
use serde_json::json;
use strainmix::selection::{
    compare_restrictions, select_k_with, Comparison, ComparisonTally, SelectionOptions, SelectionResult, Selector,
};

use crate::args::CompareArgs;
use crate::failure::{CmdResult, Failure, EXIT_OK};
use crate::output::{resolve_seed, Manifest, OutputDir};
use crate::plaf::{prepare, write_plaf};
use crate::report::{selection_rows, SELECTION_COLUMNS};

pub const COMPARISON_COLUMNS: [&str; 8] = [
    "sample_id",
    "full_k",
    "full_bic",
    "alpha_zero_k",
    "alpha_zero_bic",
    "k_one_bic",
    "winner",
    "winner_k",
];

fn comparison_row(c: &Comparison) -> [String; 8] {
    [
        c.sample_id.clone(),
        c.full_k.to_string(),
        c.full_bic.to_string(),
        c.alpha_zero_k.to_string(),
        c.alpha_zero_bic.to_string(),
        c.k_one_bic.to_string(),
        c.winner.to_string(),
        c.winner_k.to_string(),
    ]
}

pub fn run(args: &CompareArgs, command_line: &str) -> CmdResult {
    let seed = resolve_seed(args.common.seed);
    let filter = args.filter.config();
    let cfg = args.mcmc.config(seed.value);
    let priors = args.mcmc.priors();
    let opts = SelectionOptions {
        k_range: args.k_range.clone(),
        selector: Selector::Bic,
        prior_odds: false,
        include_restricted: true,
    };
    let mut out = OutputDir::create(&args.common.out)?;
    let manifest = Manifest::new(
        "compare",
        command_line,
        seed,
        json!({ "k_range": [opts.k_range.start(), opts.k_range.end()], "mcmc": cfg, "priors": priors, "filter": filter }),
    )
    .with_input(&args.input.input)?;
    let prepared = prepare(&args.input, Some(&filter))?;
    cfg.validate()?;

    let results: Vec<(SelectionResult, Comparison)> = prepared
        .dataset
        .samples
        .par_iter()
        .map(|s| {
            let result = select_k_with(s, &prepared.plaf, &priors, &cfg, &opts)?;
            let cmp = compare_restrictions(&result)?;
            log::info!(
                "{}: winner {} (k={}); bic full={:.2} alpha_zero={:.2} k_one={:.2}",
                cmp.sample_id,
                cmp.winner,
                cmp.winner_k,
                cmp.full_bic,
                cmp.alpha_zero_bic,
                cmp.k_one_bic
            );
            Ok((result, cmp))
        })
        .collect::<strainmix::Result<_>>()
        .map_err(Failure::inference)?;

    let tally = ComparisonTally::from_comparisons(results.iter().map(|(_, c)| c));
    write_plaf(&mut out, &prepared.dataset, &prepared.plaf)?;
    out.write_json("filter_report.json", &prepared.report)?;
    out.write_csv(
        "comparison.csv",
        &COMPARISON_COLUMNS,
        results.iter().map(|(_, c)| comparison_row(c)),
    )?;
    out.write_csv(
        "selection.csv",
        &SELECTION_COLUMNS,
        results.iter().flat_map(|(r, _)| selection_rows(r)),
    )?;
    let selections: Vec<&SelectionResult> = results.iter().map(|(r, _)| r).collect();
    out.write_json("selection.json", &selections)?;
    // Cohort-level view: summed per-sample BIC differences against the full
    // model (positive favours the full model).
    let sum_diff = |f: fn(&Comparison) -> f64| results.iter().map(|(_, c)| f(c) - c.full_bic).sum::<f64>();
    out.write_json(
        "tally.json",
        &json!({
            "n_samples": results.len(),
            "wins": tally,
            "summed_bic_difference": {
                "alpha_zero_minus_full": sum_diff(|c| c.alpha_zero_bic),
                "k_one_minus_full": sum_diff(|c| c.k_one_bic),
            },
        }),
    )?;
    out.finish(manifest)?;
    println!(
        "full {} / alpha_zero {} / k_one {} (of {} samples)",
        tally.full,
        tally.alpha_zero,
        tally.k_one,
        results.len()
    );
    Ok(EXIT_OK)
}
