//! Parsing of inline schema and policy specifications.
//!
//! Schema: `"negative,positive;positive=positive"` or a path to a JSON
//! file with `{"names": [...], "positive_index": n}`.
//!
//! Policy: `"ruleout_npv:min_npv=1.0"`, `"rulein_ppv:min_ppv=0.9,pick=smallest"`,
//! `"rescue_burden:min_rescue_rate=0.4,max_review_burden=0.4"`,
//! `"sensitivity_floor:min_sensitivity=0.98"`.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use triagebench_core::cohort::ClassMap;
use triagebench_core::policy::{Pick, ThresholdPolicy};

pub fn parse_class_map(spec: &str) -> Result<ClassMap> {
    let trimmed = spec.trim();
    if trimmed.ends_with(".json") || Path::new(trimmed).is_file() {
        let text = std::fs::read_to_string(trimmed)
            .with_context(|| format!("reading schema file {trimmed}"))?;
        return serde_json::from_str::<ClassMap>(&text)
            .with_context(|| format!("parsing schema file {trimmed}"));
    }
    let mut names: Vec<String> = Vec::new();
    let mut positive: Option<String> = None;
    for (i, segment) in trimmed.split(';').enumerate() {
        let segment = segment.trim();
        if i == 0 {
            let list = segment.strip_prefix("classes=").unwrap_or(segment);
            names = list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        } else if let Some(p) = segment.strip_prefix("positive=") {
            positive = Some(p.trim().to_string());
        } else if !segment.is_empty() {
            bail!("unrecognized schema segment '{segment}'");
        }
    }
    let positive_index = match positive {
        Some(p) => Some(
            names
                .iter()
                .position(|n| *n == p)
                .ok_or_else(|| anyhow!("positive class '{p}' is not among the class names"))?,
        ),
        None if names.len() == 2 => Some(1),
        None => None,
    };
    Ok(ClassMap::new(names, positive_index)?)
}

fn parse_kv(body: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for pair in body.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| anyhow!("expected key=value, got '{pair}'"))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn required_f64(map: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    map.get(key)
        .ok_or_else(|| anyhow!("policy is missing '{key}'"))?
        .parse()
        .with_context(|| format!("parsing policy value '{key}'"))
}

pub fn parse_policy(spec: &str) -> Result<ThresholdPolicy> {
    let (variant, body) = spec.trim().split_once(':').unwrap_or((spec.trim(), ""));
    let kv = parse_kv(body)?;
    let policy = match variant {
        "ruleout_npv" | "rule_out_npv" => {
            ThresholdPolicy::RuleOutNpv { min_npv: required_f64(&kv, "min_npv")? }
        }
        "rulein_ppv" | "rule_in_ppv" => {
            let pick = match kv.get("pick").map(String::as_str) {
                Some("smallest") => Pick::Smallest,
                Some("largest") | None => Pick::Largest,
                Some(other) => bail!("unknown pick '{other}'"),
            };
            ThresholdPolicy::RuleInPpv { min_ppv: required_f64(&kv, "min_ppv")?, pick }
        }
        "rescue_burden" => ThresholdPolicy::RescueBurden {
            min_rescue_rate: required_f64(&kv, "min_rescue_rate")?,
            max_review_burden: required_f64(&kv, "max_review_burden")?,
        },
        "sensitivity_floor" => ThresholdPolicy::SensitivityFloor {
            min_sensitivity: required_f64(&kv, "min_sensitivity")?,
        },
        other => bail!("unknown policy variant '{other}'"),
    };
    policy.validate()?;
    Ok(policy)
}

pub fn parse_rates(spec: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("parsing rate '{s}'"))
        })
        .collect()
}
