//! Reading objective score tables (point-metric or projection-metric CSV) and
//! pairing them with DMOS for benchmarking.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;

use pcqa::pooling::MEAN_GAMMA;
use pcqa::subjective::{sample_id, DmosTable};

use crate::CliError;

/// Sequences of the human-figure session; matched case-insensitively as a
/// prefix of the sequence name. Everything else belongs to the object session.
pub const HUMAN_SEQUENCES: [&str; 10] = [
    "longdress",
    "redandblack",
    "loot",
    "soldier",
    "the20smaria",
    "ulliwegner",
    "ricardo",
    "phil",
    "andrew",
    "sarah",
];

pub fn is_human(sequence: &str) -> bool {
    let s = sequence.to_ascii_lowercase();
    HUMAN_SEQUENCES.iter().any(|h| s.starts_with(h))
}

/// Identifies one objective score series.
#[derive(Debug, Clone, PartialEq, PartialOrd)]
pub struct SeriesKey {
    pub metric: String,
    pub pooling: String,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ObjectiveScore {
    pub sample_id: String,
    pub sequence: String,
    pub value: f64,
}

/// Score series in first-appearance order of their keys.
pub type Series = Vec<(SeriesKey, Vec<ObjectiveScore>)>;

/// A series key with its objective scores and matching DMOS values.
pub type Paired = (SeriesKey, Vec<f64>, Vec<f64>);

fn column(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    headers
        .iter()
        .position(|h| names.iter().any(|n| h.trim().eq_ignore_ascii_case(n)))
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str, row: usize) -> Result<T, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Data(format!("objective row {row}: cannot parse {what} '{s}'")))
}

/// Columns are found by header name, case-insensitively: `sequence`, `gqp`,
/// `tqp`, a metric name (`metric_name` or `metric`), a value (`value` or
/// `s_final`) and an optional `gamma`. A gamma of 1/3 is reported as mean
/// pooling, any other gamma as weighted pooling and no gamma as `none`.
pub fn read_objective<R: Read>(reader: R) -> Result<Series, CliError> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let headers = rdr.headers().map_err(pcqa::Error::from)?.clone();
    let need = |names: &[&str]| {
        column(&headers, names)
            .ok_or_else(|| CliError::Data(format!("objective CSV lacks a '{}' column", names[0])))
    };
    let c_seq = need(&["sequence"])?;
    let c_g = need(&["gqp"])?;
    let c_t = need(&["tqp"])?;
    let c_metric = need(&["metric_name", "metric"])?;
    let c_value = need(&["value", "s_final"])?;
    let c_gamma = column(&headers, &["gamma"]);

    let mut series: Series = Vec::new();
    let mut seen = HashSet::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(pcqa::Error::from)?;
        let row = n + 2;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let sequence = field(c_seq).trim().to_string();
        let gqp: i32 = parse_num(field(c_g), "gQP", row)?;
        let tqp: i32 = parse_num(field(c_t), "tQP", row)?;
        let value: f64 = parse_num(field(c_value), "value", row)?;
        let gamma = match c_gamma.map(field) {
            Some(g) if !g.trim().is_empty() => Some(parse_num::<f64>(g, "gamma", row)?),
            _ => None,
        };
        let pooling = match gamma {
            None => "none",
            Some(g) if (g - MEAN_GAMMA).abs() < 1e-9 => "mean",
            Some(_) => "weighted",
        };
        let key = SeriesKey {
            metric: field(c_metric).trim().to_string(),
            pooling: pooling.to_string(),
            gamma,
        };
        let id = sample_id(&sequence, gqp, tqp);
        if !seen.insert((
            id.clone(),
            key.metric.clone(),
            key.pooling.clone(),
            gamma.map(f64::to_bits),
        )) {
            return Err(CliError::Data(format!(
                "objective row {row}: duplicate score for sample '{id}', metric '{}'",
                key.metric
            )));
        }
        let score = ObjectiveScore {
            sample_id: id,
            sequence,
            value,
        };
        match series.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(score),
            None => series.push((key, vec![score])),
        }
    }
    Ok(series)
}

/// Pairs each series with DMOS values for the chosen session. Every objective
/// sample must appear in the DMOS table; samples rejected during subjective
/// processing are skipped.
pub fn pair_with_dmos(series: &Series, dmos: &DmosTable, session: &str) -> Result<Vec<Paired>, CliError> {
    let table: BTreeMap<&str, Option<f64>> =
        dmos.rows.iter().map(|r| (r.sample_id.as_str(), r.dmos)).collect();
    let mut out = Vec::new();
    for (key, scores) in series {
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for s in scores {
            let d = table.get(s.sample_id.as_str()).ok_or_else(|| {
                CliError::Data(format!("orphan sample id '{}': no DMOS entry", s.sample_id))
            })?;
            let in_session = match session {
                "all" => true,
                "human" => is_human(&s.sequence),
                _ => !is_human(&s.sequence),
            };
            if let (Some(d), true) = (d, in_session) {
                x.push(s.value);
                y.push(*d);
            }
        }
        out.push((key.clone(), x, y));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_both_layouts() {
        let point = "Sequence,gQP,tQP,metric_name,value\nloot,20,27,d1_psnr,inf\nloot,28,27,d1_psnr,61.5\n";
        let s = read_objective(point.as_bytes()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].0.pooling, "none");
        assert_eq!(s[0].1[0].value, f64::INFINITY);
        assert_eq!(s[0].1[1].sample_id, "loot_28_27");

        let proj = "sequence,gQP,tQP,metric,gamma,front,back,left,right,top,bottom,S_final\n\
                    Nike180,20,27,ssim,0.19,1,1,1,1,1,1,0.9\n\
                    Nike180,20,27,ssim,0.3333333333333333,1,1,1,1,1,1,0.8\n";
        let s = read_objective(proj.as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].0.pooling, "weighted");
        assert_eq!(s[1].0.pooling, "mean");
        assert_eq!(s[1].1[0].value, 0.8);
    }

    #[test]
    fn sessions() {
        assert!(is_human("redandblack_vox10_1450"));
        assert!(is_human("The20sMaria"));
        assert!(!is_human("Bananamesh"));
    }

    #[test]
    fn duplicates_rejected() {
        let dup = "sequence,gqp,tqp,metric,value\nA,1,1,m,1\nA,1,1,m,2\n";
        assert!(read_objective(dup.as_bytes()).is_err());
    }
}
