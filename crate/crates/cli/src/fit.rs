use anyhow::Context;
use rayon::prelude::*;
use serde_json::json;
use strainmix::inference::{run_chain, summarize, PosteriorChain, Restriction};
use strainmix::model::{Plaf, SampleData};
use strainmix::selection::{select_k_detailed, SelectionOptions, SelectionResult};
use strainmix::simulator::{alpha_normalized_deviation, weight_msd, CohortTruth};
use strainmix::Error;

use crate::args::{FitArgs, KChoice};
use crate::failure::{CmdResult, Failure, EXIT_OK};
use crate::figure::{figure_points, figure_rows, render_svg, FIGURE_COLUMNS};
use crate::output::{resolve_seed, safe_name, Manifest, OutputDir};
use crate::plaf::{prepare, write_plaf};
use crate::report::{selection_rows, summary_row, SampleFit, SELECTION_COLUMNS, SUMMARY_COLUMNS};

const SCORE_COLUMNS: [&str; 7] = [
    "sample_id",
    "k_true",
    "k_fit",
    "alpha_true",
    "alpha_median",
    "alpha_and",
    "w_msd",
];

struct SampleOutcome {
    fit: SampleFit,
    selection: Option<SelectionResult>,
    chains: Vec<PosteriorChain>,
}

fn fit_sample(
    data: &SampleData,
    plaf: &Plaf,
    args: &FitArgs,
    seed: u64,
) -> strainmix::Result<SampleOutcome> {
    let cfg = args.mcmc.config(seed);
    let priors = args.mcmc.priors();
    let outcome = match args.k {
        KChoice::Fixed(k) => {
            let chain = run_chain(data, plaf, k, &priors, &cfg).map_err(|e| Error::Fit {
                sample: data.sample_id.clone(),
                k,
                restriction: Restriction::Full.to_string(),
                source: Box::new(e),
            })?;
            SampleOutcome {
                fit: SampleFit {
                    sample_id: data.sample_id.clone(),
                    k,
                    restriction: Restriction::Full,
                    n_snps: data.len(),
                    summary: summarize(&chain)?,
                },
                selection: None,
                chains: vec![chain],
            }
        }
        KChoice::Auto => {
            let opts = SelectionOptions {
                k_range: args.select.k_range.clone(),
                selector: args.select.selector.into(),
                prior_odds: args.select.prior_odds,
                include_restricted: args.restricted,
            };
            let (result, chains) = select_k_detailed(data, plaf, &priors, &cfg, &opts)?;
            let best = result.selected();
            SampleOutcome {
                fit: SampleFit {
                    sample_id: data.sample_id.clone(),
                    k: best.k,
                    restriction: best.restriction,
                    n_snps: data.len(),
                    summary: best.summary.clone(),
                },
                selection: Some(result),
                chains,
            }
        }
    };
    let s = &outcome.fit.summary;
    log::info!(
        "{}: k={} ({}) alpha={:.4} nu={:.2} max_ll={:.2}",
        data.sample_id,
        outcome.fit.k,
        outcome.fit.restriction,
        s.median_alpha,
        s.median_nu,
        s.max_log_likelihood
    );
    Ok(outcome)
}

fn load_truth(path: &std::path::Path) -> CmdResult<CohortTruth> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading truth file {}", path.display()))
        .map_err(Failure::input)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing truth file {}", path.display()))
        .map_err(Failure::input)
}

pub fn run(args: &FitArgs, command_line: &str) -> CmdResult {
    let seed = resolve_seed(args.common.seed);
    let filter = args.filter.config();
    let mut out = OutputDir::create(&args.common.out)?;
    let settings = json!({
        "k": match args.k { KChoice::Auto => "auto".to_string(), KChoice::Fixed(k) => k.to_string() },
        "k_range": [args.select.k_range.start(), args.select.k_range.end()],
        "selector": format!("{:?}", args.select.selector).to_lowercase(),
        "prior_odds": args.select.prior_odds,
        "restricted": args.restricted,
        "mcmc": args.mcmc.config(seed.value),
        "priors": args.mcmc.priors(),
        "filter": filter,
    });
    let manifest = Manifest::new("fit", command_line, seed, settings).with_input(&args.input.input)?;
    let prepared = prepare(&args.input, Some(&filter))?;
    let truth = args.truth.as_deref().map(load_truth).transpose()?;
    args.mcmc.config(seed.value).validate()?;

    let outcomes: Vec<SampleOutcome> = prepared
        .dataset
        .samples
        .par_iter()
        .map(|s| fit_sample(s, &prepared.plaf, args, seed.value))
        .collect::<strainmix::Result<_>>()
        .map_err(Failure::inference)?;

    write_plaf(&mut out, &prepared.dataset, &prepared.plaf)?;
    out.write_json("filter_report.json", &prepared.report)?;
    let fits: Vec<&SampleFit> = outcomes.iter().map(|o| &o.fit).collect();
    out.write_csv("summary.csv", &SUMMARY_COLUMNS, fits.iter().map(|f| summary_row(f)))?;
    out.write_json("summary.json", &fits)?;
    if args.k == KChoice::Auto {
        let selections: Vec<&SelectionResult> =
            outcomes.iter().filter_map(|o| o.selection.as_ref()).collect();
        out.write_csv(
            "selection.csv",
            &SELECTION_COLUMNS,
            selections.iter().flat_map(|r| selection_rows(r)),
        )?;
        out.write_json("selection.json", &selections)?;
    }

    for (o, data) in outcomes.iter().zip(&prepared.dataset.samples) {
        let name = safe_name(&o.fit.sample_id);
        let points = figure_points(data, &prepared.plaf, &o.fit.summary.map_params, seed.value)?;
        out.write_csv(&format!("figures/{name}.csv"), &FIGURE_COLUMNS, figure_rows(&points))?;
        if args.svg {
            let mut w = out.writer(&format!("figures/{name}.svg"))?;
            std::io::Write::write_all(&mut w, render_svg(&o.fit.sample_id, &points).as_bytes())?;
            std::io::Write::flush(&mut w)?;
        }
        if args.dump_chains {
            for chain in &o.chains {
                let rel = format!("chains/{name}_k{}_{}.csv", chain.k, chain.restriction);
                let mut w = out.writer(&rel)?;
                chain.write_csv(&mut w)?;
                std::io::Write::flush(&mut w)?;
            }
        }
    }

    if let Some(truth) = truth {
        let mut rows = Vec::new();
        for o in &outcomes {
            let Some(t) = truth.samples.iter().find(|t| t.sample_id == o.fit.sample_id) else {
                log::warn!("no truth record for sample {}", o.fit.sample_id);
                continue;
            };
            let s = &o.fit.summary;
            rows.push([
                o.fit.sample_id.clone(),
                t.params.k.to_string(),
                o.fit.k.to_string(),
                t.params.alpha.to_string(),
                s.median_alpha.to_string(),
                alpha_normalized_deviation(s.median_alpha, t.params.alpha).to_string(),
                weight_msd(&s.weight_medians, &t.params.weights).to_string(),
            ]);
        }
        out.write_csv("score.csv", &SCORE_COLUMNS, rows)?;
    }

    out.finish(manifest)?;
    Ok(EXIT_OK)
}
