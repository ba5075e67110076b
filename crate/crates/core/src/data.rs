//! Read-count tables: loading, QC filtering and the pooled PLAF estimate.
//!
//! Two input formats are accepted. The canonical TSV has the header
//! `snp_id<TAB>sample_id<TAB>ref<TAB>nonref` and one row per (SNP, sample)
//! cell. The JSON form is an object with `snp_ids`, `sample_ids` and two
//! integer matrices `ref` and `nonref`, each with one row per sample and one
//! column per SNP. Missing data is `ref = 0, nonref = 0` in both.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{clamp_wsaf, Plaf, SampleData, SnpCounts};

pub const TSV_HEADER: &str = "snp_id\tsample_id\tref\tnonref";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Tsv,
    Json,
}

impl FromStr for InputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(Self::Tsv),
            "json" => Ok(Self::Json),
            other => Err(Error::Config(format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: Vec<SampleData>,
    pub snp_ids: Vec<String>,
    pub plaf: Option<Plaf>,
}

impl Dataset {
    /// Checks that ids are unique and every sample covers every SNP.
    pub fn new(snp_ids: Vec<String>, samples: Vec<SampleData>) -> Result<Self> {
        check_unique("SNP", &snp_ids)?;
        let sample_ids: Vec<String> = samples.iter().map(|s| s.sample_id.clone()).collect();
        check_unique("sample", &sample_ids)?;
        for s in &samples {
            if s.len() != snp_ids.len() {
                return Err(Error::Ragged(format!(
                    "sample {} has {} SNPs, expected {}",
                    s.sample_id,
                    s.len(),
                    snp_ids.len()
                )));
            }
        }
        Ok(Self {
            samples,
            snp_ids,
            plaf: None,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn n_snps(&self) -> usize {
        self.snp_ids.len()
    }

    pub fn sample(&self, id: &str) -> Option<&SampleData> {
        self.samples.iter().find(|s| s.sample_id == id)
    }

    fn keep_snps(&mut self, keep: &[bool]) {
        let retain = |v: &mut Vec<_>| {
            let mut it = keep.iter();
            v.retain(|_| *it.next().unwrap());
        };
        retain(&mut self.snp_ids);
        for s in &mut self.samples {
            let mut it = keep.iter();
            s.counts.retain(|_| *it.next().unwrap());
        }
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TSV_HEADER}")?;
        for (j, snp) in self.snp_ids.iter().enumerate() {
            for s in &self.samples {
                let c = s.counts[j];
                writeln!(out, "{snp}\t{}\t{}\t{}", s.sample_id, c.ref_reads, c.nonref_reads)?;
            }
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        let doc = JsonCounts {
            snp_ids: self.snp_ids.clone(),
            sample_ids: self.samples.iter().map(|s| s.sample_id.clone()).collect(),
            reference: self
                .samples
                .iter()
                .map(|s| s.counts.iter().map(|c| c.ref_reads as i64).collect())
                .collect(),
            nonref: self
                .samples
                .iter()
                .map(|s| s.counts.iter().map(|c| c.nonref_reads as i64).collect())
                .collect(),
        };
        serde_json::to_writer(out, &doc)?;
        Ok(())
    }
}

fn check_unique(kind: &'static str, ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId {
                kind,
                id: id.clone(),
            });
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct JsonCounts {
    snp_ids: Vec<String>,
    sample_ids: Vec<String>,
    #[serde(rename = "ref")]
    reference: Vec<Vec<i64>>,
    nonref: Vec<Vec<i64>>,
}

pub fn load_counts(path: &Path, format: InputFormat) -> Result<Dataset> {
    let file = File::open(path)?;
    match format {
        InputFormat::Tsv => parse_tsv(BufReader::new(file), path),
        InputFormat::Json => parse_json(BufReader::new(file), path),
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_count(field: &str, name: &str, path: &Path, line: usize) -> Result<u32> {
    field.parse::<u32>().map_err(|_| {
        parse_error(
            path,
            line,
            format!("{name} count {field:?} is not a non-negative integer"),
        )
    })
}

pub fn parse_tsv<R: BufRead>(reader: R, path: &Path) -> Result<Dataset> {
    let mut lines = reader.lines();
    match lines.next() {
        Some(header) => {
            let header = header?;
            if header.trim_end_matches('\r') != TSV_HEADER {
                return Err(parse_error(
                    path,
                    1,
                    format!("expected header {TSV_HEADER:?}, found {header:?}"),
                ));
            }
        }
        None => return Err(parse_error(path, 1, "empty file")),
    }

    let mut snp_index: HashMap<String, usize> = HashMap::new();
    let mut sample_index: HashMap<String, usize> = HashMap::new();
    let mut snp_ids = Vec::new();
    let mut sample_ids = Vec::new();
    let mut cells: HashMap<(usize, usize), SnpCounts> = HashMap::new();

    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(parse_error(
                path,
                lineno,
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let reference = parse_count(fields[2], "ref", path, lineno)?;
        let nonref = parse_count(fields[3], "nonref", path, lineno)?;
        let snp = *snp_index.entry(fields[0].to_string()).or_insert_with(|| {
            snp_ids.push(fields[0].to_string());
            snp_ids.len() - 1
        });
        let sample = *sample_index.entry(fields[1].to_string()).or_insert_with(|| {
            sample_ids.push(fields[1].to_string());
            sample_ids.len() - 1
        });
        if cells
            .insert((snp, sample), SnpCounts::new(reference, nonref))
            .is_some()
        {
            return Err(parse_error(
                path,
                lineno,
                format!("duplicate cell for SNP {} and sample {}", fields[0], fields[1]),
            ));
        }
    }

    let mut samples = Vec::with_capacity(sample_ids.len());
    for (si, sid) in sample_ids.iter().enumerate() {
        let mut counts = Vec::with_capacity(snp_ids.len());
        for (ji, snp) in snp_ids.iter().enumerate() {
            match cells.get(&(ji, si)) {
                Some(c) => counts.push(*c),
                None => {
                    return Err(Error::Ragged(format!("no row for SNP {snp} in sample {sid}")));
                }
            }
        }
        samples.push(SampleData::new(sid.clone(), counts));
    }
    Dataset::new(snp_ids, samples)
}

pub fn parse_json<R: std::io::Read>(reader: R, path: &Path) -> Result<Dataset> {
    let doc: JsonCounts = serde_json::from_reader(reader).map_err(|e| {
        parse_error(path, e.line(), e.to_string())
    })?;
    let n = doc.sample_ids.len();
    let m = doc.snp_ids.len();
    if doc.reference.len() != n || doc.nonref.len() != n {
        return Err(Error::Ragged(format!(
            "expected {n} rows in ref and nonref, found {} and {}",
            doc.reference.len(),
            doc.nonref.len()
        )));
    }
    let mut samples = Vec::with_capacity(n);
    for (i, sid) in doc.sample_ids.iter().enumerate() {
        let (r, a) = (&doc.reference[i], &doc.nonref[i]);
        if r.len() != m || a.len() != m {
            return Err(Error::Ragged(format!(
                "sample {sid}: expected {m} columns, found {} ref and {} nonref",
                r.len(),
                a.len()
            )));
        }
        let mut counts = Vec::with_capacity(m);
        for j in 0..m {
            let convert = |v: i64, name: &str| {
                u32::try_from(v).map_err(|_| {
                    Error::Domain(format!(
                        "sample {sid}, SNP {}: {name} count {v} is not a non-negative integer",
                        doc.snp_ids[j]
                    ))
                })
            };
            counts.push(SnpCounts::new(convert(r[j], "ref")?, convert(a[j], "nonref")?));
        }
        samples.push(SampleData::new(sid.clone(), counts));
    }
    Dataset::new(doc.snp_ids, samples)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub min_maf: f64,
    pub max_low_coverage_snps: usize,
    pub low_coverage_threshold: u32,
    pub drop_missing: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_maf: 0.01,
            max_low_coverage_snps: 4000,
            low_coverage_threshold: 20,
            drop_missing: true,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.min_maf) {
            return Err(Error::Config(format!("min_maf {} not in [0, 0.5)", self.min_maf)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub samples_in: usize,
    pub snps_in: usize,
    pub removed_samples: Vec<String>,
    pub snps_removed_missing: usize,
    pub snps_removed_maf: usize,
    pub snps_removed_invariant: usize,
    pub samples_out: usize,
    pub snps_out: usize,
}

/// Applies the QC filters in a fixed order: low-coverage samples, SNPs with
/// missing cells, low pooled minor-allele frequency, then SNPs without
/// variation across the retained samples.
pub fn apply_filters(mut ds: Dataset, cfg: &FilterConfig) -> Result<(Dataset, FilterReport)> {
    cfg.validate()?;
    let mut report = FilterReport {
        samples_in: ds.n_samples(),
        snps_in: ds.n_snps(),
        ..Default::default()
    };
    ds.plaf = None;

    let (kept, dropped): (Vec<_>, Vec<_>) = ds.samples.into_iter().partition(|s| {
        s.counts
            .iter()
            .filter(|c| c.total() < cfg.low_coverage_threshold)
            .count()
            <= cfg.max_low_coverage_snps
    });
    report.removed_samples = dropped.into_iter().map(|s| s.sample_id).collect();
    ds.samples = kept;
    if ds.samples.is_empty() {
        return Err(Error::EmptyAfterFilter("sample"));
    }

    if cfg.drop_missing {
        let keep: Vec<bool> = (0..ds.n_snps())
            .map(|j| ds.samples.iter().all(|s| s.counts[j].total() > 0))
            .collect();
        report.snps_removed_missing = keep.iter().filter(|k| !**k).count();
        ds.keep_snps(&keep);
    }

    let pooled = pooled_counts(&ds);
    let keep: Vec<bool> = pooled
        .iter()
        .map(|&(nonref, total)| {
            if total == 0 {
                return false;
            }
            let f = nonref as f64 / total as f64;
            f.min(1.0 - f) >= cfg.min_maf
        })
        .collect();
    report.snps_removed_maf = keep.iter().filter(|k| !**k).count();
    ds.keep_snps(&keep);

    let keep: Vec<bool> = (0..ds.n_snps())
        .map(|j| {
            let any_nonref = ds.samples.iter().any(|s| s.counts[j].nonref_reads > 0);
            let any_ref = ds.samples.iter().any(|s| s.counts[j].ref_reads > 0);
            any_nonref && any_ref
        })
        .collect();
    report.snps_removed_invariant = keep.iter().filter(|k| !**k).count();
    ds.keep_snps(&keep);

    if ds.n_snps() == 0 {
        return Err(Error::EmptyAfterFilter("SNP"));
    }
    report.samples_out = ds.n_samples();
    report.snps_out = ds.n_snps();
    Ok((ds, report))
}

fn pooled_counts(ds: &Dataset) -> Vec<(u64, u64)> {
    (0..ds.n_snps())
        .map(|j| {
            ds.samples.iter().fold((0u64, 0u64), |(n, t), s| {
                let c = s.counts[j];
                (n + c.nonref_reads as u64, t + c.total() as u64)
            })
        })
        .collect()
}

/// Pooled non-reference read fraction per SNP (the binomial MLE), clamped
/// into `[1e-6, 1 - 1e-6]`.
pub fn compute_plaf(ds: &Dataset) -> Result<Plaf> {
    let freqs = pooled_counts(ds)
        .into_iter()
        .zip(&ds.snp_ids)
        .map(|((nonref, total), id)| {
            if total == 0 {
                Err(Error::ZeroCoverage(id.clone()))
            } else {
                Ok(clamp_wsaf(nonref as f64 / total as f64))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Plaf::new(freqs)
}
