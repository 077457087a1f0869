//! Opinion-score processing: differential scores, subject screening, Grubbs
//! sample rejection, Z-scores and sigmoid rescaling into DMOS.
//!
//! Processing order is fixed: differential scores, then subject screening,
//! then a single Grubbs pass over samples, then per-subject Z-scores mapped
//! through a logistic sigmoid and averaged per sample.

mod anova;
mod content;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::stats::{mean, sample_std, t_quantile};
use crate::{Error, Result};

pub use anova::{anova_from_observations, two_way_anova, AnovaRow, AnovaTable};
pub use content::{colorfulness, spatial_information};

pub const DEFAULT_ALPHA: f64 = 0.025;
pub const DEFAULT_RANGE_THRESH: f64 = 7.0;
pub const DEFAULT_STD_THRESH: f64 = 1.2;

/// Canonical `<sequence>_<gqp>_<tqp>` sample identifier.
pub fn sample_id(sequence: &str, gqp: i32, tqp: i32) -> String {
    format!("{sequence}_{gqp}_{tqp}")
}

/// Splits a canonical sample id; the sequence name may itself contain `_`.
pub fn parse_sample_id(id: &str) -> Option<(String, i32, i32)> {
    let mut it = id.rsplitn(3, '_');
    let tqp = it.next()?.parse().ok()?;
    let gqp = it.next()?.parse().ok()?;
    let seq = it.next()?;
    (!seq.is_empty()).then(|| (seq.to_string(), gqp, tqp))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleInfo {
    pub id: String,
    pub sequence: String,
    pub gqp: i32,
    pub tqp: i32,
}

/// Subjects × distorted samples, plus each subject's reference ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    pub subjects: Vec<String>,
    pub samples: Vec<SampleInfo>,
    /// `scores[subject][sample]`; `None` where the subject did not rate it.
    pub scores: Vec<Vec<Option<f64>>>,
    /// `(subject index, sequence)` → rating of the undistorted reference.
    pub ref_scores: BTreeMap<(usize, String), f64>,
}

#[derive(Debug, Deserialize)]
struct RatingRecord {
    subject_id: String,
    sample_id: String,
    sequence: String,
    gqp: i32,
    tqp: i32,
    score: f64,
}

fn lowercase_headers<R: Read>(reader: R) -> Result<csv::Reader<R>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: csv::StringRecord = rdr.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
    rdr.set_headers(headers);
    Ok(rdr)
}

impl RatingMatrix {
    /// Reads a ratings CSV (`subject_id,sample_id,sequence,gqp,tqp,score`,
    /// header names case-insensitive). Rows with `gqp = tqp = 0` rate the
    /// reference of their sequence.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = lowercase_headers(reader)?;
        let mut subject_index: BTreeMap<String, ()> = BTreeMap::new();
        let mut sample_meta: BTreeMap<String, SampleInfo> = BTreeMap::new();
        let mut records = Vec::new();
        for (line, rec) in rdr.deserialize::<RatingRecord>().enumerate() {
            let rec = rec?;
            let row = line + 2;
            if !(0.0..=100.0).contains(&rec.score) {
                return Err(Error::Data(format!(
                    "row {row}: score {} outside [0, 100]",
                    rec.score
                )));
            }
            subject_index.insert(rec.subject_id.clone(), ());
            if !(rec.gqp == 0 && rec.tqp == 0) {
                let info = SampleInfo {
                    id: rec.sample_id.clone(),
                    sequence: rec.sequence.clone(),
                    gqp: rec.gqp,
                    tqp: rec.tqp,
                };
                if let Some(prev) = sample_meta.get(&rec.sample_id) {
                    if *prev != info {
                        return Err(Error::Data(format!(
                            "row {row}: sample '{}' maps to more than one (sequence, gqp, tqp)",
                            rec.sample_id
                        )));
                    }
                } else {
                    sample_meta.insert(rec.sample_id.clone(), info);
                }
            }
            records.push((row, rec));
        }
        let subjects: Vec<String> = subject_index.into_keys().collect();
        let samples: Vec<SampleInfo> = sample_meta.into_values().collect();
        if samples.is_empty() {
            return Err(Error::Empty("ratings contain no distorted samples"));
        }
        let subj_pos: HashMap<&str, usize> = subjects
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let samp_pos: HashMap<&str, usize> = samples
            .iter()
            .enumerate()
            .map(|(j, s)| (s.id.as_str(), j))
            .collect();

        let mut scores = vec![vec![None; samples.len()]; subjects.len()];
        let mut ref_scores = BTreeMap::new();
        for (row, rec) in &records {
            let i = subj_pos[rec.subject_id.as_str()];
            let duplicate = if rec.gqp == 0 && rec.tqp == 0 {
                ref_scores.insert((i, rec.sequence.clone()), rec.score).is_some()
            } else {
                scores[i][samp_pos[rec.sample_id.as_str()]]
                    .replace(rec.score)
                    .is_some()
            };
            if duplicate {
                return Err(Error::Data(format!(
                    "row {row}: subject '{}' rated '{}' more than once",
                    rec.subject_id, rec.sample_id
                )));
            }
        }
        Ok(Self {
            subjects,
            samples,
            scores,
            ref_scores,
        })
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }
}

/// Differential scores `d = s_ref − s`, aligned with the rating matrix.
pub type DiffMatrix = Vec<Vec<Option<f64>>>;

pub fn differential_scores(r: &RatingMatrix) -> Result<DiffMatrix> {
    let mut missing = BTreeSet::new();
    let d = r
        .scores
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .zip(&r.samples)
                .map(|(s, info)| {
                    let s = (*s)?;
                    match r.ref_scores.get(&(i, info.sequence.clone())) {
                        Some(reference) => Some(reference - s),
                        None => {
                            missing.insert((r.subjects[i].clone(), info.sequence.clone()));
                            None
                        }
                    }
                })
                .collect()
        })
        .collect();
    if !missing.is_empty() {
        let list: Vec<String> = missing.iter().map(|(s, q)| format!("({s}, {q})")).collect();
        return Err(Error::MissingReference(list.join(", ")));
    }
    Ok(d)
}

/// Standardises with the sample (`K − 1`) standard deviation.
pub fn zscore(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "z-score of {} values",
            values.len()
        )));
    }
    let m = mean(values);
    let s = sample_std(values);
    if s.is_nan() || s <= 0.0 {
        return Err(Error::ZeroVariance("z-score of a constant vector".into()));
    }
    Ok(values.iter().map(|v| (v - m) / s).collect())
}

/// Per-subject statistics used by [`screen_subjects`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectStats {
    pub range: f64,
    pub std: f64,
    pub rejected: bool,
}

/// Standardises every sample across its raters, then rejects a subject when
/// both the range and the standard deviation of that subject's standardised
/// scores exceed the thresholds.
pub fn screen_subjects(d: &DiffMatrix, range_thresh: f64, std_thresh: f64) -> Vec<SubjectStats> {
    let n_subj = d.len();
    let n_samp = d.first().map_or(0, Vec::len);
    let mut per_subject: Vec<Vec<f64>> = vec![Vec::new(); n_subj];
    for j in 0..n_samp {
        let raters: Vec<(usize, f64)> = d
            .iter()
            .enumerate()
            .filter_map(|(i, row)| row[j].map(|v| (i, v)))
            .collect();
        if raters.len() < 2 {
            continue;
        }
        let vals: Vec<f64> = raters.iter().map(|r| r.1).collect();
        // A sample everybody scored identically contributes zeros.
        let z = zscore(&vals).unwrap_or_else(|_| vec![0.0; vals.len()]);
        for ((i, _), zi) in raters.iter().zip(z) {
            per_subject[*i].push(zi);
        }
    }
    per_subject
        .iter()
        .map(|z| {
            if z.len() < 2 {
                return SubjectStats {
                    range: 0.0,
                    std: 0.0,
                    rejected: false,
                };
            }
            let lo = z.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let std = sample_std(z);
            SubjectStats {
                range: hi - lo,
                std,
                rejected: hi - lo > range_thresh && std > std_thresh,
            }
        })
        .collect()
}

/// Two-sided Grubbs critical value for `n` observations.
pub fn grubbs_critical(alpha: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "Grubbs test needs n >= 3, got {n}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("significance level {alpha}")));
    }
    let nf = n as f64;
    let t = t_quantile(alpha / (2.0 * nf), nf - 2.0)?;
    Ok((nf - 1.0) / nf.sqrt() * (t * t / (nf - 2.0 + t * t)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrubbsOutcome {
    /// Test statistic; `None` when all ratings of the sample are equal.
    pub statistic: Option<f64>,
    pub critical: f64,
    pub n: usize,
    pub rejected: bool,
}

/// Single-pass Grubbs test per sample over the ratings of active subjects.
pub fn grubbs_filter(d: &DiffMatrix, active: &[bool], alpha: f64) -> Result<Vec<GrubbsOutcome>> {
    let n_samp = d.first().map_or(0, Vec::len);
    (0..n_samp)
        .map(|j| {
            let vals: Vec<f64> = d
                .iter()
                .zip(active)
                .filter(|(_, a)| **a)
                .filter_map(|(row, _)| row[j])
                .collect();
            let n = vals.len();
            if n < 3 {
                return Err(Error::InvalidArgument(format!(
                    "sample {j} has {n} ratings; the Grubbs test needs at least 3"
                )));
            }
            let critical = grubbs_critical(alpha, n)?;
            let m = mean(&vals);
            let s = sample_std(&vals);
            if s.is_nan() || s <= 0.0 {
                return Ok(GrubbsOutcome {
                    statistic: None,
                    critical,
                    n,
                    rejected: false,
                });
            }
            let g = vals.iter().map(|v| (v - m).abs()).fold(0.0, f64::max) / s;
            Ok(GrubbsOutcome {
                statistic: Some(g),
                critical,
                n,
                rejected: g > critical,
            })
        })
        .collect()
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmosOptions {
    pub alpha: f64,
    pub range_thresh: f64,
    pub std_thresh: f64,
}

impl Default for DmosOptions {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            range_thresh: DEFAULT_RANGE_THRESH,
            std_thresh: DEFAULT_STD_THRESH,
        }
    }
}

pub const FLAG_GRUBBS: &str = "grubbs";
pub const FLAG_ZERO_STD: &str = "zero_std";
pub const FLAG_SCREENED: &str = "screened";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmosRow {
    pub sample_id: String,
    /// `None` for rejected samples.
    pub dmos: Option<f64>,
    pub n_subjects: usize,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DmosTable {
    pub rows: Vec<DmosRow>,
}

/// Full pipeline output: the table plus the intermediate decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct DmosReport {
    pub table: DmosTable,
    pub subjects: Vec<SubjectStats>,
    pub grubbs: Vec<GrubbsOutcome>,
}

impl DmosReport {
    pub fn rejected_subjects<'a>(&self, ratings: &'a RatingMatrix) -> Vec<&'a str> {
        self.subjects
            .iter()
            .zip(&ratings.subjects)
            .filter(|(s, _)| s.rejected)
            .map(|(_, name)| name.as_str())
            .collect()
    }
}

/// Runs the whole pipeline on a rating matrix.
pub fn dmos(ratings: &RatingMatrix, opts: &DmosOptions) -> Result<DmosReport> {
    let d = differential_scores(ratings)?;
    let subjects = screen_subjects(&d, opts.range_thresh, opts.std_thresh);
    let active: Vec<bool> = subjects.iter().map(|s| !s.rejected).collect();
    if !active.iter().any(|a| *a) {
        return Err(Error::Data("subject screening rejected every subject".into()));
    }
    let grubbs = grubbs_filter(&d, &active, opts.alpha)?;

    let n_samp = ratings.n_samples();
    let mut sums = vec![0.0; n_samp];
    let mut counts = vec![0usize; n_samp];
    for (i, row) in d.iter().enumerate() {
        if !active[i] {
            continue;
        }
        let kept: Vec<(usize, f64)> = (0..n_samp)
            .filter(|j| !grubbs[*j].rejected)
            .filter_map(|j| row[j].map(|v| (j, v)))
            .collect();
        if kept.is_empty() {
            continue;
        }
        let vals: Vec<f64> = kept.iter().map(|k| k.1).collect();
        let name = &ratings.subjects[i];
        let z = zscore(&vals).map_err(|e| match e {
            Error::InvalidArgument(_) => {
                Error::ZeroVariance(format!("subject '{name}' has a single retained sample"))
            }
            Error::ZeroVariance(_) => {
                Error::ZeroVariance(format!("subject '{name}' has no spread over retained samples"))
            }
            other => other,
        })?;
        for ((j, _), zi) in kept.iter().zip(z) {
            sums[*j] += sigmoid(zi);
            counts[*j] += 1;
        }
    }

    let rows = ratings
        .samples
        .iter()
        .enumerate()
        .map(|(j, info)| {
            let mut flags = Vec::new();
            if grubbs[j].rejected {
                flags.push(FLAG_GRUBBS.to_string());
            }
            if grubbs[j].statistic.is_none() {
                flags.push(FLAG_ZERO_STD.to_string());
            }
            if d.iter().zip(&active).any(|(row, a)| !a && row[j].is_some()) {
                flags.push(FLAG_SCREENED.to_string());
            }
            let dmos = (!grubbs[j].rejected && counts[j] > 0).then(|| sums[j] / counts[j] as f64);
            DmosRow {
                sample_id: info.id.clone(),
                dmos,
                n_subjects: if dmos.is_some() { counts[j] } else { 0 },
                flags,
            }
        })
        .collect();
    Ok(DmosReport {
        table: DmosTable { rows },
        subjects,
        grubbs,
    })
}

impl DmosTable {
    /// `sample_id,dmos,n_subjects,flags`; flags are `;`-separated and the
    /// DMOS cell is empty for rejected samples.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["sample_id", "dmos", "n_subjects", "flags"])?;
        for r in &self.rows {
            w.write_record([
                r.sample_id.clone(),
                r.dmos.map(|v| v.to_string()).unwrap_or_default(),
                r.n_subjects.to_string(),
                r.flags.join(";"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Rec {
            sample_id: String,
            dmos: Option<f64>,
            n_subjects: usize,
            #[serde(default)]
            flags: Option<String>,
        }
        let mut rdr = lowercase_headers(reader)?;
        let rows = rdr
            .deserialize::<Rec>()
            .map(|r| {
                let r = r?;
                Ok(DmosRow {
                    sample_id: r.sample_id,
                    dmos: r.dmos,
                    n_subjects: r.n_subjects,
                    flags: r
                        .flags
                        .unwrap_or_default()
                        .split(';')
                        .filter(|s| !s.is_empty())
                        .map(str::to_string)
                        .collect(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { rows })
    }

    /// Retained samples as `(sample_id, dmos)`.
    pub fn retained(&self) -> impl Iterator<Item = (&str, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.dmos.map(|v| (r.sample_id.as_str(), v)))
    }
}
