//! `agreement`: paired pre/post label agreement per biomarker:
//! concordance with a bootstrap CI, Cohen's kappa, and McNemar testing of
//! the discordant counts.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde_json::{json, Value};
use triagebench_core::cohort::{load_paired, PairedLabelRecord};
use triagebench_core::inference::{cohen_kappa_from_counts, mcnemar, McNemarMode};
use triagebench_core::resample;

use crate::report::{p_value_json, Report, SectionError};

#[derive(Debug, Args)]
pub struct AgreementArgs {
    /// Paired labels CSV (case_id, biomarker, pre_label, post_label)
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn biomarker_row(
    records: &[&PairedLabelRecord],
    resamples: usize,
    seed: u64,
    level: f64,
) -> Result<Value> {
    let pp = records.iter().filter(|r| r.pre_positive && r.post_positive).count();
    let pn = records.iter().filter(|r| r.pre_positive && !r.post_positive).count();
    let np = records.iter().filter(|r| !r.pre_positive && r.post_positive).count();
    let nn = records.iter().filter(|r| !r.pre_positive && !r.post_positive).count();
    let n = records.len();

    let concordant: Vec<bool> =
        records.iter().map(|r| r.pre_positive == r.post_positive).collect();
    let concordance = resample::bootstrap_ci(
        &concordant,
        |idx, data| {
            Some(idx.iter().filter(|&&i| data[i]).count() as f64 / idx.len() as f64)
        },
        resamples,
        seed,
        level,
    )?;

    let kappa = cohen_kappa_from_counts(pp, pn, np, nn);
    // No discordant pairs: the test is inapplicable (reported as null).
    let mcnemar_p = mcnemar(pn, np, McNemarMode::Auto).ok();

    Ok(json!({
        "n": n,
        "counts": {"pp": pp, "pn": pn, "np": np, "nn": nn},
        "pre_positive": pp + pn,
        "post_positive": pp + np,
        "concordance": {
            "point": concordance.point,
            "lo": concordance.lo,
            "hi": concordance.hi,
        },
        "cohen_kappa": match kappa {
            Ok(k) => json!({
                "kappa": k.kappa,
                "interpretation": k.interpretation.to_string(),
            }),
            Err(e) => json!({"error": e.to_string()}),
        },
        "mcnemar": mcnemar_p.map(p_value_json),
    }))
}

pub fn run(args: &AgreementArgs) -> Result<Report> {
    let seed = super::resolve_seed(args.seed);
    let records = load_paired(&args.input)?;

    let mut by_biomarker: BTreeMap<String, Vec<&PairedLabelRecord>> = BTreeMap::new();
    for r in &records {
        by_biomarker.entry(r.biomarker.clone()).or_default().push(r);
    }

    let mut report = Report::new(
        "agreement",
        json!({
            "input": args.input,
            "seed": seed,
            "resamples": args.resamples,
            "level": args.level,
            "out": args.out,
        }),
    );
    let mut rows = serde_json::Map::new();
    for (biomarker, recs) in &by_biomarker {
        match biomarker_row(recs, args.resamples, seed, args.level) {
            Ok(v) => {
                rows.insert(biomarker.clone(), v);
            }
            Err(e) => report.errors.push(SectionError {
                section: format!("agreement:{biomarker}"),
                message: e.to_string(),
            }),
        }
    }
    report.insert("biomarkers", Value::Object(rows));
    Ok(report)
}
