//! Objective-vs-subjective benchmarking: five-parameter logistic mapping,
//! correlation rows and CSV/JSON report tables.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix5, Vector5};
use serde::{Deserialize, Serialize};

use crate::stats::{krocc, mean, plcc, rmse, srocc};
use crate::{Error, Result};

/// Minimum number of finite pairs for a fit or a report row.
pub const MIN_PAIRS: usize = 5;
pub const MAX_ITERATIONS: usize = 500;
pub const REL_TOLERANCE: f64 = 1e-10;

/// `q(x) = b1·(1/2 − 1/(1 + exp(b2·(x − b3)))) + b4·x + b5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub b5: f64,
}

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + t.exp())
}

impl LogisticParams {
    pub fn eval(&self, x: f64) -> f64 {
        self.b1 * (0.5 - logistic(self.b2 * (x - self.b3))) + self.b4 * x + self.b5
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.b1, self.b2, self.b3, self.b4, self.b5]
    }

    fn from_vector(v: &Vector5<f64>) -> Self {
        Self {
            b1: v[0],
            b2: v[1],
            b3: v[2],
            b4: v[3],
            b5: v[4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub params: LogisticParams,
    pub sse: f64,
    pub iterations: usize,
    /// False when the iteration cap was reached before the SSE settled.
    pub converged: bool,
}

fn sse_of(p: &LogisticParams, x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (p.eval(*a) - b).powi(2)).sum()
}

/// Least-squares line `(slope, intercept)`.
fn affine_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Levenberg-Marquardt fit of the logistic mapping from `x` to `y`.
///
/// The optimisation runs on standardised `x` for conditioning and maps the
/// parameters back afterwards. If the result is worse than the best line the
/// line is returned (`b1 = 0`).
pub fn fit_logistic(x: &[f64], y: &[f64]) -> Result<LogisticFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores vs {} targets",
            x.len(),
            y.len()
        )));
    }
    if x.len() < MIN_PAIRS {
        return Err(Error::InvalidArgument(format!(
            "logistic fit needs at least {MIN_PAIRS} pairs, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("logistic fit on non-finite values".into()));
    }
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
        (l.min(*v), h.max(*v))
    });
    if lo == hi {
        return Err(Error::ZeroVariance("objective scores are all equal".into()));
    }

    let mx = mean(x);
    let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
    let xs: Vec<f64> = x.iter().map(|a| (a - mx) / sx).collect();

    let (slope, intercept) = affine_fit(&xs, y);
    let y_range =
        y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - y.iter().cloned().fold(f64::INFINITY, f64::min);
    let xs_range = (hi - lo) / sx;
    let direction = if slope < 0.0 { -1.0 } else { 1.0 };
    let mut beta = Vector5::new(y_range, direction * 4.0 / xs_range, median(&xs), slope, intercept);

    let residuals_and_jacobian = |b: &Vector5<f64>| {
        let mut jtj = Matrix5::zeros();
        let mut jtr = Vector5::zeros();
        for (xi, yi) in xs.iter().zip(y) {
            let l = logistic(b[1] * (xi - b[2]));
            let dl = l * (1.0 - l);
            let r = b[0] * (0.5 - l) + b[3] * xi + b[4] - yi;
            let g = Vector5::new(0.5 - l, b[0] * dl * (xi - b[2]), -b[0] * dl * b[1], *xi, 1.0);
            jtj += g * g.transpose();
            jtr += g * r;
        }
        (jtj, jtr)
    };
    let sse = |b: &Vector5<f64>| sse_of(&LogisticParams::from_vector(b), &xs, y);

    let mut current = sse(&beta);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        if current == 0.0 {
            converged = true;
            break;
        }
        let (jtj, jtr) = residuals_and_jacobian(&beta);
        let mut improved = false;
        while lambda < 1e16 {
            let mut damped = jtj;
            for k in 0..5 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            if let Some(step) = damped.lu().solve(&(-jtr)) {
                let candidate = beta + step;
                let trial = sse(&candidate);
                if trial.is_finite() && trial <= current {
                    let rel = (current - trial) / current;
                    beta = candidate;
                    current = trial;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = true;
                    converged = rel < REL_TOLERANCE;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            // No descent direction left at any damping: a stationary point.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    if !converged {
        log::warn!("logistic fit stopped after {MAX_ITERATIONS} iterations without settling");
    }

    let params = LogisticParams {
        b1: beta[0],
        b2: beta[1] / sx,
        b3: beta[2] * sx + mx,
        b4: beta[3] / sx,
        b5: beta[4] - beta[3] * mx / sx,
    };
    let fitted = sse_of(&params, x, y);
    let (a_slope, a_intercept) = affine_fit(x, y);
    let line = LogisticParams {
        b1: 0.0,
        b2: params.b2,
        b3: params.b3,
        b4: a_slope,
        b5: a_intercept,
    };
    let line_sse = sse_of(&line, x, y);
    let (params, sse) = if fitted.is_finite() && fitted <= line_sse {
        (params, fitted)
    } else {
        (line, line_sse)
    };
    Ok(LogisticFit {
        params,
        sse,
        iterations,
        converged,
    })
}

/// Correlation figures for one objective metric against subjective scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub plcc: f64,
    pub srocc: f64,
    pub krocc: f64,
    pub rmse: f64,
    pub n: usize,
    pub fit: LogisticFit,
}

/// Drops pairs with non-finite entries (lossless PSNR sentinels), fits the
/// logistic mapping, then reports PLCC/RMSE on the mapped scores and
/// SROCC/KROCC on the raw scores.
pub fn evaluate_metric(x: &[f64], y: &[f64]) -> Result<Evaluation> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores vs {} targets",
            x.len(),
            y.len()
        )));
    }
    let (xf, yf): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .unzip();
    if xf.len() < MIN_PAIRS {
        return Err(Error::InvalidArgument(format!(
            "{} finite score pairs; at least {MIN_PAIRS} required",
            xf.len()
        )));
    }
    let fit = fit_logistic(&xf, &yf)?;
    let predicted: Vec<f64> = xf.iter().map(|v| fit.params.eval(*v)).collect();
    Ok(Evaluation {
        plcc: plcc(&predicted, &yf)?,
        srocc: srocc(&xf, &yf)?,
        krocc: krocc(&xf, &yf)?,
        rmse: rmse(&predicted, &yf)?,
        n: xf.len(),
        fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub session: String,
    pub metric: String,
    pub pooling: String,
    /// View weight; `None` for metrics without view pooling.
    pub gamma: Option<f64>,
    pub plcc: f64,
    pub srocc: f64,
    pub krocc: f64,
    pub rmse: f64,
    pub n: usize,
    pub params: LogisticParams,
}

impl ReportRow {
    pub fn new(session: &str, metric: &str, pooling: &str, gamma: Option<f64>, e: &Evaluation) -> Self {
        Self {
            session: session.to_string(),
            metric: metric.to_string(),
            pooling: pooling.to_string(),
            gamma,
            plcc: e.plcc,
            srocc: e.srocc,
            krocc: e.krocc,
            rmse: e.rmse,
            n: e.n,
            params: e.fit.params,
        }
    }

    fn sort_key_cmp(&self, other: &Self) -> Ordering {
        let g = |r: &Self| r.gamma.unwrap_or(f64::NEG_INFINITY);
        self.session
            .cmp(&other.session)
            .then_with(|| self.metric.cmp(&other.metric))
            .then_with(|| self.pooling.cmp(&other.pooling))
            .then_with(|| g(self).total_cmp(&g(other)))
    }
}

pub const REPORT_HEADER: [&str; 14] = [
    "session", "metric", "pooling", "gamma", "plcc", "srocc", "krocc", "rmse", "n", "b1", "b2", "b3", "b4",
    "b5",
];

/// Four-decimal rendering; negative zero is printed as zero.
pub fn round4(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<ReportRow>,
}

impl BenchmarkReport {
    pub fn new(mut rows: Vec<ReportRow>) -> Self {
        rows.sort_by(ReportRow::sort_key_cmp);
        Self { rows }
    }

    fn cells(row: &ReportRow) -> Vec<String> {
        let mut c = vec![
            row.session.clone(),
            row.metric.clone(),
            row.pooling.clone(),
            row.gamma.map(round4).unwrap_or_default(),
            round4(row.plcc),
            round4(row.srocc),
            round4(row.krocc),
            round4(row.rmse),
            row.n.to_string(),
        ];
        c.extend(row.params.as_array().iter().map(|v| round4(*v)));
        c
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(REPORT_HEADER)?;
        for row in &self.rows {
            w.write_record(Self::cells(row))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }

    /// JSON array of objects keyed like the CSV columns, carrying the same
    /// rounded values.
    pub fn to_json(&self) -> Result<String> {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let cells = Self::cells(row);
                let mut obj = serde_json::Map::new();
                for (i, (key, cell)) in REPORT_HEADER.iter().zip(cells).enumerate() {
                    let value = match i {
                        0..=2 => serde_json::Value::String(cell),
                        8 => serde_json::Value::from(row.n),
                        _ => cell
                            .parse::<f64>()
                            .ok()
                            .and_then(serde_json::Number::from_f64)
                            .map_or(serde_json::Value::Null, serde_json::Value::Number),
                    };
                    obj.insert((*key).to_string(), value);
                }
                serde_json::Value::Object(obj)
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&rows)?;
        s.push('\n');
        Ok(s)
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::Empty("benchmark report has no rows"));
        }
        std::fs::create_dir_all(dir)?;
        std::fs::File::create(dir.join(format!("{stem}.csv")))?.write_all(self.to_csv()?.as_bytes())?;
        std::fs::File::create(dir.join(format!("{stem}.json")))?.write_all(self.to_json()?.as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::average_ranks;

    const TRUE: LogisticParams = LogisticParams {
        b1: 0.8,
        b2: -0.35,
        b3: 32.0,
        b4: -0.004,
        b5: 0.6,
    };

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| 20.0 + 25.0 * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn recovers_noise_free_curve() {
        let x = grid(50);
        let y: Vec<f64> = x.iter().map(|v| TRUE.eval(*v)).collect();
        let fit = fit_logistic(&x, &y).unwrap();
        let pred: Vec<f64> = x.iter().map(|v| fit.params.eval(*v)).collect();
        assert!(rmse(&pred, &y).unwrap() < 1e-6, "{fit:?}");
    }

    #[test]
    fn affine_data_fits_exactly() {
        let x = grid(12);
        let y: Vec<f64> = x.iter().map(|v| 0.02 * v - 0.1).collect();
        let fit = fit_logistic(&x, &y).unwrap();
        assert!(fit.sse < 1e-20, "{fit:?}");
    }

    #[test]
    fn preconditions() {
        assert!(fit_logistic(&[1.0; 6], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).is_err());
        assert!(fit_logistic(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).is_err());
        let x = [1.0, f64::INFINITY, 2.0, 3.0, 4.0, 5.0];
        assert!(evaluate_metric(&x[..5], &[0.1, 0.2, 0.3, 0.4, 0.5]).is_err());
    }

    #[test]
    fn never_worse_than_line() {
        let x: Vec<f64> = (0..30).map(|i| ((i * 37) % 30) as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| ((v * 1.7).sin() + 0.1 * v) / 3.0).collect();
        let fit = fit_logistic(&x, &y).unwrap();
        let (s, c) = affine_fit(&x, &y);
        let line: f64 = x.iter().zip(&y).map(|(a, b)| (s * a + c - b).powi(2)).sum();
        assert!(fit.sse <= line + 1e-12);
    }

    #[test]
    fn sentinels_are_excluded() {
        let x = grid(10);
        let y: Vec<f64> = x.iter().map(|v| TRUE.eval(*v)).collect();
        let mut xi = x.clone();
        xi.push(f64::INFINITY);
        let mut yi = y.clone();
        yi.push(0.01);
        assert_eq!(
            evaluate_metric(&x, &y).unwrap(),
            evaluate_metric(&xi, &yi).unwrap()
        );
    }

    #[test]
    fn fitted_curve_preserves_ranks() {
        let x = grid(20);
        let y: Vec<f64> = x.iter().map(|v| TRUE.eval(*v) + 0.01 * (v * 3.1).sin()).collect();
        let e = evaluate_metric(&x, &y).unwrap();
        let q: Vec<f64> = x.iter().map(|v| e.fit.params.eval(*v)).collect();
        let monotone = q.windows(2).all(|w| w[1] < w[0]) || q.windows(2).all(|w| w[1] > w[0]);
        if monotone {
            let rq: Vec<f64> = average_ranks(&q);
            let rx: Vec<f64> = average_ranks(&x);
            let flipped: Vec<f64> = rx.iter().map(|r| x.len() as f64 + 1.0 - r).collect();
            assert!(rq == rx || rq == flipped);
        }
    }

    fn row(session: &str, metric: &str, gamma: Option<f64>) -> ReportRow {
        let x = grid(8);
        let y: Vec<f64> = x.iter().map(|v| TRUE.eval(*v)).collect();
        ReportRow::new(
            session,
            metric,
            "weighted",
            gamma,
            &evaluate_metric(&x, &y).unwrap(),
        )
    }

    #[test]
    fn report_is_sorted_and_stable() {
        let rows = vec![
            row("human", "ssim", Some(0.19)),
            row("all", "psnr", None),
            row("all", "gmsd", Some(0.2)),
        ];
        let a = BenchmarkReport::new(rows.clone());
        let b = BenchmarkReport::new(rows.into_iter().rev().collect());
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        let csv = a.to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], REPORT_HEADER.join(","));
        assert!(lines[1].starts_with("all,gmsd,weighted,0.2000,"));
        assert!(lines[2].starts_with("all,psnr,weighted,,"));
        assert!(lines[3].starts_with("human,ssim,"));
        let json: serde_json::Value = serde_json::from_str(&a.to_json().unwrap()).unwrap();
        assert_eq!(json.as_array().unwrap().len(), 3);
        assert_eq!(json[0]["gamma"], serde_json::json!(0.2));
    }

    #[test]
    fn rounding() {
        assert_eq!(round4(0.26614), "0.2661");
        assert_eq!(round4(-0.00001), "0.0000");
        assert_eq!(round4(f64::INFINITY), "inf");
    }
}
