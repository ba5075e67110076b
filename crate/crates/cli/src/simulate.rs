use std::io::Write;

use serde_json::json;
use strainmix::data::InputFormat;
use strainmix::simulator::{simulate_cohort, SimConfig};

use crate::args::SimulateArgs;
use crate::failure::{CmdResult, EXIT_OK};
use crate::output::{resolve_seed, Manifest, OutputDir};

pub fn run(args: &SimulateArgs, command_line: &str) -> CmdResult {
    let seed = resolve_seed(args.common.seed);
    let cfg = SimConfig {
        sample_id: args.sample_id.clone(),
        m: args.m,
        coverage: args.c,
        k: args.k,
        alpha: args.alpha,
        nu: args.nu,
        weights: args.weights.clone(),
        seed: seed.value,
    };
    let mut out = OutputDir::create(&args.common.out)?;
    let manifest = Manifest::new(
        "simulate",
        command_line,
        seed,
        json!({ "config": cfg, "samples": args.samples }),
    );
    let (dataset, truth) = simulate_cohort(&cfg, args.samples)?;
    let mut w = match args.format {
        InputFormat::Tsv => {
            out.record("counts.tsv", &["snp_id", "sample_id", "ref", "nonref"]);
            let mut w = std::io::BufWriter::new(std::fs::File::create(out.path("counts.tsv"))?);
            dataset.write_tsv(&mut w)?;
            w
        }
        InputFormat::Json => {
            let mut w = out.writer("counts.json")?;
            dataset.write_json(&mut w)?;
            w
        }
    };
    w.flush()?;
    out.write_json("truth.json", &truth)?;
    log::info!(
        "simulated {} samples x {} SNPs (k={}, alpha={})",
        dataset.n_samples(),
        dataset.n_snps(),
        cfg.k,
        cfg.alpha
    );
    out.finish(manifest)?;
    Ok(EXIT_OK)
}
