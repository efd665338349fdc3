//! Case-level data model, CSV ingestion, validation, and subgroup selection.
//!
//! All analyses downstream consume the types defined here. Cohorts are
//! immutable after load and safe to share across concurrent analyses.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SCORE_SUM_TOL: f64 = 1e-6;

/// Ordered class labels plus an optional designated positive/event class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassMap {
    names: Vec<String>,
    positive_index: Option<usize>,
}

impl ClassMap {
    pub fn new(names: Vec<String>, positive_index: Option<usize>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Schema("class list must be non-empty".into()));
        }
        let unique: BTreeSet<&String> = names.iter().collect();
        if unique.len() != names.len() {
            return Err(Error::Schema("class names must be unique".into()));
        }
        if let Some(idx) = positive_index {
            if idx >= names.len() {
                return Err(Error::Schema(format!(
                    "positive_index {idx} out of range for {} classes",
                    names.len()
                )));
            }
        }
        Ok(Self { names, positive_index })
    }

    /// Binary map with the second class treated as positive.
    pub fn binary(negative: &str, positive: &str) -> Result<Self> {
        Self::new(vec![negative.to_string(), positive.to_string()], Some(1))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn positive_index(&self) -> Option<usize> {
        self.positive_index
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.names.iter().position(|n| n == label)
    }
}

/// Clinical stage the record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Pre,
    Intra,
    Post,
}

impl Stage {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pre" => Some(Stage::Pre),
            "intra" => Some(Stage::Intra),
            "post" => Some(Stage::Post),
            _ => None,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Pre => write!(f, "pre"),
            Stage::Intra => write!(f, "intra"),
            Stage::Post => write!(f, "post"),
        }
    }
}

/// Role a cohort plays in the evaluation pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CohortRole {
    Train,
    Val,
    InternalTest,
    RetrospectiveExternal,
    Prospective,
}

impl CohortRole {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Some(Self::Train),
            "val" => Some(Self::Val),
            "internal_test" => Some(Self::InternalTest),
            "retrospective_external" => Some(Self::RetrospectiveExternal),
            "prospective" => Some(Self::Prospective),
            _ => None,
        }
    }
}

/// One case: per-class score vector, reference label, and grouping metadata.
///
/// `scores` always has one entry per class. Files that provide a single
/// positive-class score store the implied complement on the other class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub true_label: usize,
    pub scores: Vec<f64>,
    pub subgroup_tags: BTreeSet<String>,
    pub center: String,
    pub stage: Option<Stage>,
}

impl CaseRecord {
    /// Score of the designated positive class.
    pub fn positive_score(&self, class_map: &ClassMap) -> f64 {
        let idx = class_map.positive_index().unwrap_or(1.min(self.scores.len() - 1));
        self.scores[idx]
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.subgroup_tags.contains(tag)
    }
}

/// A validated, immutable set of case records sharing one class map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub name: String,
    pub class_map: ClassMap,
    pub records: Vec<CaseRecord>,
    pub role: CohortRole,
}

impl Cohort {
    /// Build a cohort, enforcing record invariants. Fails on empty input,
    /// duplicate case ids, score-vector shape errors, or out-of-range scores.
    pub fn new(
        name: String,
        class_map: ClassMap,
        records: Vec<CaseRecord>,
        role: CohortRole,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Empty(format!("cohort '{name}' has no records")));
        }
        let mut seen = BTreeSet::new();
        for (i, rec) in records.iter().enumerate() {
            validate_record(rec, &class_map, i + 1)?;
            if !seen.insert(rec.case_id.clone()) {
                return Err(Error::Record {
                    row: i + 1,
                    message: format!("duplicate case_id '{}'", rec.case_id),
                });
            }
        }
        Ok(Self { name, class_map, records, role })
    }

    /// Construct without the non-empty check; used for derived cohorts such
    /// as subgroup selections, which may legitimately be empty.
    fn derived(&self, name: String, records: Vec<CaseRecord>) -> Cohort {
        Cohort { name, class_map: self.class_map.clone(), records, role: self.role }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Count of cases per class, keyed by class name.
    pub fn class_distribution(&self) -> BTreeMap<String, usize> {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for rec in &self.records {
            let name = self.class_map.names()[rec.true_label].clone();
            *counts.entry(name).or_insert(0) += 1;
        }
        counts
    }

    /// Records carrying `tag`. An empty result is valid (callers may warn).
    pub fn subgroup_filter(&self, tag: &str) -> Result<Cohort> {
        if tag.is_empty() {
            return Err(Error::InvalidArgument("subgroup tag must be non-empty".into()));
        }
        let records: Vec<CaseRecord> =
            self.records.iter().filter(|r| r.has_tag(tag)).cloned().collect();
        Ok(self.derived(format!("{}:{tag}", self.name), records))
    }

    /// Positive-class scores and binary labels, for binary metric routines.
    /// Requires a designated positive class (or exactly two classes).
    pub fn binary_scores_labels(&self) -> Result<(Vec<f64>, Vec<bool>)> {
        let pos = match self.class_map.positive_index() {
            Some(p) => p,
            None if self.class_map.len() == 2 => 1,
            None => {
                return Err(Error::Schema(
                    "positive class is not designated and task is not binary".into(),
                ))
            }
        };
        let scores = self.records.iter().map(|r| r.scores[pos]).collect();
        let labels = self.records.iter().map(|r| r.true_label == pos).collect();
        Ok((scores, labels))
    }
}

fn validate_record(rec: &CaseRecord, class_map: &ClassMap, row: usize) -> Result<()> {
    if rec.scores.len() != class_map.len() {
        return Err(Error::Record {
            row,
            message: format!(
                "case '{}': {} scores for {} classes",
                rec.case_id,
                rec.scores.len(),
                class_map.len()
            ),
        });
    }
    for (k, &s) in rec.scores.iter().enumerate() {
        if !(0.0..=1.0).contains(&s) || s.is_nan() {
            return Err(Error::Record {
                row,
                message: format!(
                    "case '{}': score_{} = {s} outside [0,1]",
                    rec.case_id,
                    class_map.names()[k]
                ),
            });
        }
    }
    if rec.true_label >= class_map.len() {
        return Err(Error::Record {
            row,
            message: format!("case '{}': label index {} out of range", rec.case_id, rec.true_label),
        });
    }
    Ok(())
}

/// One biomarker's paired pre-/post-operative binary labels for a case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedLabelRecord {
    pub case_id: String,
    pub biomarker: String,
    pub pre_positive: bool,
    pub post_positive: bool,
}

/// Numeric or categorical covariate value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Covariate {
    Numeric(f64),
    Category(String),
}

/// Time-to-event record with optional model risk score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub case_id: String,
    /// Follow-up time in months; strictly positive.
    pub time: f64,
    /// True when the event was observed, false when censored.
    pub event: bool,
    pub covariates: BTreeMap<String, Covariate>,
    pub risk_score: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experience {
    Junior,
    Senior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    WithoutAi,
    WithAi,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::WithoutAi => write!(f, "without_ai"),
            Condition::WithAi => write!(f, "with_ai"),
        }
    }
}

/// Reader response: a class index, or the timeout marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Response {
    Class(usize),
    Timeout,
}

/// One pathologist-case-condition read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderObservation {
    pub reader_id: String,
    pub experience: Experience,
    pub case_id: String,
    pub task: String,
    pub condition: Condition,
    pub period: u8,
    pub with_ai_first: bool,
    pub response: Response,
    pub correct: bool,
    /// 1-10 Likert score; present iff the read did not time out.
    pub confidence: Option<u8>,
    pub time_s: f64,
    pub timed_out: bool,
}

/// Column layout expected in a cohort CSV, resolved against a [`ClassMap`].
#[derive(Debug, Clone)]
pub struct CohortSchema {
    pub class_map: ClassMap,
    pub name: String,
    pub role: CohortRole,
}

/// Load and validate a cohort CSV.
///
/// Expected header: `case_id,label` plus either a single `score` column
/// (positive-class probability, complement implied) or one `score_<class>`
/// column per class (must sum to 1 within 1e-6). Optional columns: `tags`
/// (semicolon-delimited), `center`, `stage`.
pub fn load_cohort(path: &Path, schema: &CohortSchema) -> Result<Cohort> {
    let mut reader = csv_reader(path)?;
    let headers = read_headers(&mut reader, path)?;
    let class_map = &schema.class_map;

    let col = |name: &str| headers.iter().position(|h| h == name);
    let case_col = col("case_id")
        .ok_or_else(|| Error::Schema("missing column 'case_id'".into()))?;
    let label_col = col("label").ok_or_else(|| Error::Schema("missing column 'label'".into()))?;
    let tags_col = col("tags");
    let center_col = col("center");
    let stage_col = col("stage");

    // Either a single positive-class score or full per-class columns.
    let single_score_col = col("score");
    let class_score_cols: Vec<Option<usize>> = class_map
        .names()
        .iter()
        .map(|n| col(&format!("score_{n}")))
        .collect();
    let have_all_class_cols = class_score_cols.iter().all(|c| c.is_some());
    if single_score_col.is_none() && !have_all_class_cols {
        let missing: Vec<String> = class_map
            .names()
            .iter()
            .zip(&class_score_cols)
            .filter(|(_, c)| c.is_none())
            .map(|(n, _)| format!("score_{n}"))
            .collect();
        return Err(Error::Schema(format!(
            "missing column 'score' (or per-class columns {})",
            missing.join(", ")
        )));
    }
    if single_score_col.is_some() && class_map.positive_index().is_none() && class_map.len() != 2 {
        return Err(Error::Schema(
            "single 'score' column requires a designated positive class".into(),
        ));
    }

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 2; // 1-based, after the header
        let row = row.map_err(|e| Error::Csv { path: display(path), source: e })?;
        let field = |c: usize| row.get(c).unwrap_or("").trim().to_string();

        let case_id = field(case_col);
        if case_id.is_empty() {
            return Err(Error::Record { row: row_no, message: "empty case_id".into() });
        }

        let label_str = field(label_col);
        let true_label = class_map.index_of(&label_str).ok_or_else(|| Error::Record {
            row: row_no,
            message: format!("unknown class label '{label_str}'"),
        })?;

        let scores = if have_all_class_cols {
            let mut v = Vec::with_capacity(class_map.len());
            for (k, c) in class_score_cols.iter().enumerate() {
                let raw = field(c.unwrap());
                let s: f64 = raw.parse().map_err(|_| Error::Record {
                    row: row_no,
                    message: format!("unparseable score_{} '{raw}'", class_map.names()[k]),
                })?;
                v.push(s);
            }
            let sum: f64 = v.iter().sum();
            if (sum - 1.0).abs() > SCORE_SUM_TOL {
                return Err(Error::Record {
                    row: row_no,
                    message: format!("scores sum to {sum}, expected 1 within {SCORE_SUM_TOL}"),
                });
            }
            v
        } else {
            let raw = field(single_score_col.unwrap());
            let s: f64 = raw.parse().map_err(|_| Error::Record {
                row: row_no,
                message: format!("unparseable score '{raw}'"),
            })?;
            let pos = class_map.positive_index().unwrap_or(1);
            let mut v = vec![0.0; class_map.len()];
            v[pos] = s;
            // Complement on the single other class; binary only.
            if class_map.len() != 2 {
                return Err(Error::Schema(
                    "single 'score' column is only valid for binary class maps".into(),
                ));
            }
            v[1 - pos] = 1.0 - s;
            v
        };

        let subgroup_tags: BTreeSet<String> = match tags_col {
            Some(c) => field(c)
                .split(';')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(str::to_string)
                .collect(),
            None => BTreeSet::new(),
        };

        let rec = CaseRecord {
            case_id,
            true_label,
            scores,
            subgroup_tags,
            center: center_col.map(field).unwrap_or_default(),
            stage: stage_col.and_then(|c| Stage::parse(&field(c))),
        };
        validate_record(&rec, class_map, row_no)?;
        records.push(rec);
    }

    if records.is_empty() {
        return Err(Error::Empty(format!("no records in {}", display(path))));
    }
    Cohort::new(schema.name.clone(), class_map.clone(), records, schema.role)
}

/// Write a cohort back to CSV with full per-class score columns.
/// `load_cohort(write_cohort(c))` reproduces `c` exactly.
pub fn write_cohort(cohort: &Cohort, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Csv { path: display(path), source: e })?;
    let mut header = vec!["case_id".to_string(), "label".to_string()];
    header.extend(cohort.class_map.names().iter().map(|n| format!("score_{n}")));
    header.extend(["tags".to_string(), "center".to_string(), "stage".to_string()]);
    w.write_record(&header).map_err(|e| Error::Csv { path: display(path), source: e })?;
    for rec in &cohort.records {
        let mut row = vec![
            rec.case_id.clone(),
            cohort.class_map.names()[rec.true_label].clone(),
        ];
        row.extend(rec.scores.iter().map(|s| format!("{s}")));
        row.push(rec.subgroup_tags.iter().cloned().collect::<Vec<_>>().join(";"));
        row.push(rec.center.clone());
        row.push(rec.stage.map(|s| s.to_string()).unwrap_or_default());
        w.write_record(&row).map_err(|e| Error::Csv { path: display(path), source: e })?;
    }
    w.flush().map_err(|e| Error::Io { path: display(path), source: e })?;
    Ok(())
}

/// Load paired pre/post biomarker labels: `case_id,biomarker,pre_label,post_label`
/// with label values `negative` / `positive`.
pub fn load_paired(path: &Path) -> Result<Vec<PairedLabelRecord>> {
    let mut reader = csv_reader(path)?;
    let headers = read_headers(&mut reader, path)?;
    let idx = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    };
    let (case_c, bio_c, pre_c, post_c) =
        (idx("case_id")?, idx("biomarker")?, idx("pre_label")?, idx("post_label")?);

    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 2;
        let row = row.map_err(|e| Error::Csv { path: display(path), source: e })?;
        let get = |c: usize| row.get(c).unwrap_or("").trim().to_string();
        let parse_label = |raw: &str| -> Result<bool> {
            match raw.to_ascii_lowercase().as_str() {
                "positive" | "1" => Ok(true),
                "negative" | "0" => Ok(false),
                other => Err(Error::Record {
                    row: row_no,
                    message: format!("label '{other}' is not negative/positive"),
                }),
            }
        };
        out.push(PairedLabelRecord {
            case_id: get(case_c),
            biomarker: get(bio_c),
            pre_positive: parse_label(&get(pre_c))?,
            post_positive: parse_label(&get(post_c))?,
        });
    }
    if out.is_empty() {
        return Err(Error::Empty(format!("no records in {}", display(path))));
    }
    Ok(out)
}

/// Load survival records: `case_id,time_months,event,risk_score,cov_*`.
/// `risk_score` may be empty; `cov_*` columns parse as numeric when possible,
/// otherwise as categories.
pub fn load_survival(path: &Path) -> Result<Vec<SurvivalRecord>> {
    let mut reader = csv_reader(path)?;
    let headers = read_headers(&mut reader, path)?;
    let idx = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    };
    let case_c = idx("case_id")?;
    let time_c = idx("time_months")?;
    let event_c = idx("event")?;
    let risk_c = headers.iter().position(|h| h == "risk_score");
    let cov_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix("cov_").map(|n| (i, n.to_string())))
        .collect();

    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 2;
        let row = row.map_err(|e| Error::Csv { path: display(path), source: e })?;
        let get = |c: usize| row.get(c).unwrap_or("").trim().to_string();

        let time: f64 = get(time_c).parse().map_err(|_| Error::Record {
            row: row_no,
            message: format!("unparseable time_months '{}'", get(time_c)),
        })?;
        if time.is_nan() || time <= 0.0 {
            return Err(Error::Record {
                row: row_no,
                message: format!("time_months must be > 0, got {time}"),
            });
        }
        let event = match get(event_c).as_str() {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::Record {
                    row: row_no,
                    message: format!("event '{other}' is not 0/1"),
                })
            }
        };
        let risk_score = match risk_c {
            Some(c) => {
                let raw = get(c);
                if raw.is_empty() {
                    None
                } else {
                    Some(raw.parse().map_err(|_| Error::Record {
                        row: row_no,
                        message: format!("unparseable risk_score '{raw}'"),
                    })?)
                }
            }
            None => None,
        };
        let mut covariates = BTreeMap::new();
        for (c, name) in &cov_cols {
            let raw = get(*c);
            if raw.is_empty() {
                continue;
            }
            let value = match raw.parse::<f64>() {
                Ok(v) => Covariate::Numeric(v),
                Err(_) => Covariate::Category(raw),
            };
            covariates.insert(name.clone(), value);
        }
        out.push(SurvivalRecord { case_id: get(case_c), time, event, covariates, risk_score });
    }
    if out.is_empty() {
        return Err(Error::Empty(format!("no records in {}", display(path))));
    }
    Ok(out)
}

/// Load reader-study observations:
/// `reader_id,experience,case_id,task,condition,period,with_ai_first,response,correct,confidence,time_s,timed_out`.
pub fn load_reader(path: &Path) -> Result<Vec<ReaderObservation>> {
    let mut reader = csv_reader(path)?;
    let headers = read_headers(&mut reader, path)?;
    let idx = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    };
    let cols = [
        idx("reader_id")?,
        idx("experience")?,
        idx("case_id")?,
        idx("task")?,
        idx("condition")?,
        idx("period")?,
        idx("with_ai_first")?,
        idx("response")?,
        idx("correct")?,
        idx("confidence")?,
        idx("time_s")?,
        idx("timed_out")?,
    ];

    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 2;
        let row = row.map_err(|e| Error::Csv { path: display(path), source: e })?;
        let get = |c: usize| row.get(c).unwrap_or("").trim().to_string();
        let bad = |message: String| Error::Record { row: row_no, message };

        let experience = match get(cols[1]).to_ascii_lowercase().as_str() {
            "junior" => Experience::Junior,
            "senior" => Experience::Senior,
            other => return Err(bad(format!("experience '{other}' is not junior/senior"))),
        };
        let condition = match get(cols[4]).to_ascii_lowercase().as_str() {
            "without_ai" => Condition::WithoutAi,
            "with_ai" => Condition::WithAi,
            other => return Err(bad(format!("condition '{other}' is not without_ai/with_ai"))),
        };
        let period: u8 = match get(cols[5]).as_str() {
            "1" => 1,
            "2" => 2,
            other => return Err(bad(format!("period '{other}' is not 1/2"))),
        };
        let with_ai_first = parse_bool(&get(cols[6]))
            .ok_or_else(|| bad(format!("with_ai_first '{}' is not a boolean", get(cols[6]))))?;
        let timed_out = parse_bool(&get(cols[11]))
            .ok_or_else(|| bad(format!("timed_out '{}' is not a boolean", get(cols[11]))))?;
        let correct = parse_bool(&get(cols[8]))
            .ok_or_else(|| bad(format!("correct '{}' is not a boolean", get(cols[8]))))?;
        let response = match get(cols[7]).as_str() {
            "TIMEOUT" => Response::Timeout,
            raw => Response::Class(
                raw.parse()
                    .map_err(|_| bad(format!("response '{raw}' is not a class index or TIMEOUT")))?,
            ),
        };
        let confidence_raw = get(cols[9]);
        let confidence: Option<u8> = if confidence_raw.is_empty() {
            None
        } else {
            let v: u8 = confidence_raw
                .parse()
                .map_err(|_| bad(format!("confidence '{confidence_raw}' is not an integer")))?;
            if !(1..=10).contains(&v) {
                return Err(bad(format!("confidence {v} outside 1-10")));
            }
            Some(v)
        };
        let time_s: f64 = get(cols[10])
            .parse()
            .map_err(|_| bad(format!("unparseable time_s '{}'", get(cols[10]))))?;
        if time_s.is_nan() || time_s <= 0.0 {
            return Err(bad(format!("time_s must be > 0, got {time_s}")));
        }

        // Timeout consistency rules.
        if timed_out {
            if correct {
                return Err(bad("timed-out read cannot be correct".into()));
            }
            if response != Response::Timeout {
                return Err(bad("timed-out read must have response TIMEOUT".into()));
            }
            if confidence.is_some() {
                return Err(bad("timed-out read cannot carry a confidence score".into()));
            }
        } else {
            if response == Response::Timeout {
                return Err(bad("response TIMEOUT requires timed_out = true".into()));
            }
            if confidence.is_none() {
                return Err(bad("completed read must carry a confidence score".into()));
            }
        }

        out.push(ReaderObservation {
            reader_id: get(cols[0]),
            experience,
            case_id: get(cols[2]),
            task: get(cols[3]),
            condition,
            period,
            with_ai_first,
            response,
            correct,
            confidence,
            time_s,
            timed_out,
        });
    }
    if out.is_empty() {
        return Err(Error::Empty(format!("no records in {}", display(path))));
    }
    Ok(out)
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::Csv { path: display(path), source: e })
}

fn read_headers(reader: &mut csv::Reader<std::fs::File>, path: &Path) -> Result<Vec<String>> {
    Ok(reader
        .headers()
        .map_err(|e| Error::Csv { path: display(path), source: e })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect())
}

fn display(path: &Path) -> String {
    path.display().to_string()
}
