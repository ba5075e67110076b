use serde_json::json;
use strainmix::data::{apply_filters, compute_plaf, load_counts, Dataset, FilterConfig, FilterReport};
use strainmix::model::Plaf;

use crate::args::{InputArgs, PlafArgs};
use crate::failure::{CmdResult, EXIT_OK};
use crate::output::{resolve_seed, Manifest, OutputDir};

pub const PLAF_COLUMNS: [&str; 2] = ["snp_id", "plaf"];

/// Loaded, filtered input with its pooled PLAF.
pub struct Prepared {
    pub dataset: Dataset,
    pub report: FilterReport,
    pub plaf: Plaf,
}

pub fn prepare(input: &InputArgs, filter: Option<&FilterConfig>) -> CmdResult<Prepared> {
    let raw = load_counts(&input.input, input.resolved_format())?;
    let (dataset, report) = match filter {
        Some(cfg) => apply_filters(raw, cfg)?,
        None => {
            let report = FilterReport {
                samples_in: raw.n_samples(),
                snps_in: raw.n_snps(),
                samples_out: raw.n_samples(),
                snps_out: raw.n_snps(),
                ..Default::default()
            };
            (raw, report)
        }
    };
    let plaf = compute_plaf(&dataset)?;
    log::info!(
        "{} samples x {} SNPs after filtering ({} samples, {} SNPs in)",
        report.samples_out,
        report.snps_out,
        report.samples_in,
        report.snps_in
    );
    Ok(Prepared { dataset, report, plaf })
}

pub fn write_plaf(out: &mut OutputDir, dataset: &Dataset, plaf: &Plaf) -> CmdResult<()> {
    out.write_csv(
        "plaf.csv",
        &PLAF_COLUMNS,
        dataset
            .snp_ids
            .iter()
            .zip(plaf.freqs())
            .map(|(id, p)| [id.clone(), p.to_string()]),
    )
}

pub fn run(args: &PlafArgs, command_line: &str) -> CmdResult {
    let seed = resolve_seed(args.common.seed);
    let filter = args.filter.config();
    let mut out = OutputDir::create(&args.common.out)?;
    let settings = json!({
        "filter": if args.no_filter { None } else { Some(&filter) },
    });
    let manifest = Manifest::new("plaf", command_line, seed, settings).with_input(&args.input.input)?;
    let prepared = prepare(&args.input, (!args.no_filter).then_some(&filter))?;
    write_plaf(&mut out, &prepared.dataset, &prepared.plaf)?;
    out.write_json("filter_report.json", &prepared.report)?;
    out.finish(manifest)?;
    Ok(EXIT_OK)
}
