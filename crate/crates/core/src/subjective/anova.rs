//! Balanced two-way ANOVA with interaction.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::stats::{f_quantile, f_tail};
use crate::{Error, Result};

const F_CRIT_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub ss: f64,
    pub df: usize,
    /// Mean square; `None` for the total row.
    pub ms: Option<f64>,
    /// Effect rows only.
    pub f: Option<f64>,
    pub p: Option<f64>,
    pub f_crit: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub factor_a: AnovaRow,
    pub factor_b: AnovaRow,
    pub interaction: AnovaRow,
    pub error: AnovaRow,
    pub total: AnovaRow,
}

impl AnovaTable {
    pub fn rows(&self) -> [(&'static str, &AnovaRow); 5] {
        [
            ("factor_a", &self.factor_a),
            ("factor_b", &self.factor_b),
            ("interaction", &self.interaction),
            ("error", &self.error),
            ("total", &self.total),
        ]
    }

    /// `source,ss,df,ms,f,p,f_crit` with the given names for the two factors.
    pub fn write_csv<W: Write>(&self, out: W, name_a: &str, name_b: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["source", "ss", "df", "ms", "f", "p", "f_crit"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (name, row) in self.rows() {
            let label = match name {
                "factor_a" => name_a,
                "factor_b" => name_b,
                other => other,
            };
            w.write_record([
                label.to_string(),
                row.ss.to_string(),
                row.df.to_string(),
                opt(row.ms),
                opt(row.f),
                opt(row.p),
                opt(row.f_crit),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn effect(ss: f64, df: usize, ms_error: f64, df_error: usize) -> Result<AnovaRow> {
    let ms = ss / df as f64;
    let f = if ms_error > 0.0 {
        ms / ms_error
    } else if ms > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(AnovaRow {
        ss,
        df,
        ms: Some(ms),
        f: Some(f),
        p: Some(f_tail(f, df as f64, df_error as f64)?),
        f_crit: Some(f_quantile(F_CRIT_LEVEL, df as f64, df_error as f64)?),
    })
}

/// `cells[a][b]` holds the replicates of level `a` of the first factor and
/// level `b` of the second. Every cell must have the same number of
/// replicates, at least two.
pub fn two_way_anova(cells: &[Vec<Vec<f64>>]) -> Result<AnovaTable> {
    let a = cells.len();
    let b = cells.first().map_or(0, Vec::len);
    if a < 2 || b < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2x2 levels, got {a}x{b}"
        )));
    }
    if cells.iter().any(|row| row.len() != b) {
        return Err(Error::Unbalanced("ragged level grid".into()));
    }
    let r = cells[0][0].len();
    if cells.iter().flatten().any(|c| c.len() != r) {
        return Err(Error::Unbalanced("cells have different replicate counts".into()));
    }
    if r < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 replicates per cell".into(),
        ));
    }
    if cells.iter().flatten().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite observation".into()));
    }

    let (af, bf, rf) = (a as f64, b as f64, r as f64);
    let cell_mean: Vec<Vec<f64>> = cells
        .iter()
        .map(|row| row.iter().map(|c| c.iter().sum::<f64>() / rf).collect())
        .collect();
    let grand = cell_mean.iter().flatten().sum::<f64>() / (af * bf);
    let mean_a: Vec<f64> = cell_mean.iter().map(|row| row.iter().sum::<f64>() / bf).collect();
    let mean_b: Vec<f64> = (0..b)
        .map(|j| cell_mean.iter().map(|row| row[j]).sum::<f64>() / af)
        .collect();

    let ss_a = bf * rf * mean_a.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_b = af * rf * mean_b.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut ss_ab = 0.0;
    let mut ss_e = 0.0;
    let mut ss_t = 0.0;
    for i in 0..a {
        for j in 0..b {
            let m = cell_mean[i][j];
            ss_ab += (m - mean_a[i] - mean_b[j] + grand).powi(2);
            for v in &cells[i][j] {
                ss_e += (v - m).powi(2);
                ss_t += (v - grand).powi(2);
            }
        }
    }
    ss_ab *= rf;

    let df_a = a - 1;
    let df_b = b - 1;
    let df_ab = df_a * df_b;
    let df_e = a * b * (r - 1);
    let ms_e = ss_e / df_e as f64;
    Ok(AnovaTable {
        factor_a: effect(ss_a, df_a, ms_e, df_e)?,
        factor_b: effect(ss_b, df_b, ms_e, df_e)?,
        interaction: effect(ss_ab, df_ab, ms_e, df_e)?,
        error: AnovaRow {
            ss: ss_e,
            df: df_e,
            ms: Some(ms_e),
            f: None,
            p: None,
            f_crit: None,
        },
        total: AnovaRow {
            ss: ss_t,
            df: a * b * r - 1,
            ms: None,
            f: None,
            p: None,
            f_crit: None,
        },
    })
}

/// Groups `(level_a, level_b, value)` observations by their sorted levels and
/// runs [`two_way_anova`]. Returns the level labels alongside the table.
pub fn anova_from_observations(obs: &[(i64, i64, f64)]) -> Result<(Vec<i64>, Vec<i64>, AnovaTable)> {
    let mut grid: BTreeMap<i64, BTreeMap<i64, Vec<f64>>> = BTreeMap::new();
    for &(la, lb, v) in obs {
        grid.entry(la).or_default().entry(lb).or_default().push(v);
    }
    let levels_a: Vec<i64> = grid.keys().copied().collect();
    let mut levels_b: Vec<i64> = grid.values().flat_map(|m| m.keys().copied()).collect();
    levels_b.sort_unstable();
    levels_b.dedup();
    let cells: Vec<Vec<Vec<f64>>> = levels_a
        .iter()
        .map(|la| {
            levels_b
                .iter()
                .map(|lb| grid[la].get(lb).cloned().unwrap_or_default())
                .collect()
        })
        .collect();
    if cells.iter().flatten().any(Vec::is_empty) {
        return Err(Error::Unbalanced(
            "some factor level combinations have no observations".into(),
        ));
    }
    let table = two_way_anova(&cells)?;
    Ok((levels_a, levels_b, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn partition_gap(t: &AnovaTable) -> f64 {
        (t.factor_a.ss + t.factor_b.ss + t.interaction.ss + t.error.ss - t.total.ss).abs()
    }

    #[test]
    fn constant_observations_have_zero_ss() {
        let cells = vec![vec![vec![4.0; 3]; 3]; 3];
        let t = two_way_anova(&cells).unwrap();
        for (_, row) in t.rows() {
            assert_eq!(row.ss, 0.0);
        }
        assert_eq!(t.factor_a.p, Some(1.0));
    }

    #[test]
    fn additive_model_has_no_interaction() {
        let ea = [0.0, 1.0, 3.0];
        let eb = [0.0, -2.0, 0.5];
        let noise = [0.1, -0.1];
        let cells: Vec<Vec<Vec<f64>>> = ea
            .iter()
            .map(|a| {
                eb.iter()
                    .map(|b| noise.iter().map(|n| 10.0 + a + b + n).collect())
                    .collect()
            })
            .collect();
        let t = two_way_anova(&cells).unwrap();
        assert!(t.interaction.ss < 1e-20);
        // SS_A = b·r·Σ(ea − mean)², mean of ea = 4/3.
        let m = 4.0 / 3.0;
        let expect_a = 6.0 * ea.iter().map(|v| (v - m).powi(2)).sum::<f64>();
        assert!((t.factor_a.ss - expect_a).abs() < 1e-9);
        assert!((t.error.ss - 9.0 * 0.02).abs() < 1e-12);
        assert_eq!(
            (t.factor_a.df, t.interaction.df, t.error.df, t.total.df),
            (2, 4, 9, 17)
        );
        assert!(partition_gap(&t) < 1e-9);
    }

    #[test]
    fn rejects_unbalanced() {
        let mut cells = vec![vec![vec![1.0, 2.0]; 3]; 3];
        cells[1][2].push(3.0);
        assert!(matches!(two_way_anova(&cells), Err(Error::Unbalanced(_))));
        assert!(anova_from_observations(&[(1, 1, 1.0), (1, 1, 2.0), (2, 2, 1.0), (2, 2, 3.0)]).is_err());
    }

    #[test]
    fn grouping_sorts_levels() {
        let mut obs = Vec::new();
        for (k, g) in [36, 20, 28].iter().enumerate() {
            for t in [47, 27, 37] {
                obs.push((*g, t, k as f64 + t as f64 / 10.0));
                obs.push((*g, t, k as f64 + t as f64 / 10.0 + 0.5));
            }
        }
        let (la, lb, t) = anova_from_observations(&obs).unwrap();
        assert_eq!(la, vec![20, 28, 36]);
        assert_eq!(lb, vec![27, 37, 47]);
        assert!(partition_gap(&t) < 1e-9);
    }
}
