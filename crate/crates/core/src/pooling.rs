//! Pooling of six per-view scores into one point cloud score.
//!
//! `S = (1 − γ)/4 · (front + left + right + back) + γ/2 · (top + bottom)`.
//! γ = 1/3 weights all views equally (mean pooling); the weighted default is
//! γ = 0.19, with [0.13, 0.31] as the recommended range.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::iqa::IqaMetric;
use crate::projection::{project_pair, ProjectionOptions, ViewKind, ViewSet};
use crate::{Error, PointCloud, Result};

pub const DEFAULT_GAMMA: f64 = 0.19;
pub const MEAN_GAMMA: f64 = 1.0 / 3.0;
pub const RECOMMENDED_GAMMA: (f64, f64) = (0.13, 0.31);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewScores {
    pub front: f64,
    pub back: f64,
    pub left: f64,
    pub right: f64,
    pub top: f64,
    pub bottom: f64,
    pub gamma: f64,
}

impl ViewScores {
    pub fn get(&self, kind: ViewKind) -> f64 {
        match kind {
            ViewKind::Front => self.front,
            ViewKind::Back => self.back,
            ViewKind::Left => self.left,
            ViewKind::Right => self.right,
            ViewKind::Top => self.top,
            ViewKind::Bottom => self.bottom,
        }
    }

    /// Builds from scores ordered as [`ViewKind::ALL`].
    pub fn from_ordered(scores: [f64; 6], gamma: f64) -> Self {
        let [front, back, left, right, top, bottom] = scores;
        Self {
            front,
            back,
            left,
            right,
            top,
            bottom,
            gamma,
        }
    }

    pub fn as_ordered(&self) -> [f64; 6] {
        [
            self.front,
            self.back,
            self.left,
            self.right,
            self.top,
            self.bottom,
        ]
    }
}

/// Lateral/vertical view weights `((1 − γ)/4, γ/2)`.
pub fn view_weights(gamma: f64) -> (f64, f64) {
    ((1.0 - gamma) / 4.0, gamma / 2.0)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("gamma {gamma} outside [0, 1]")))
    }
}

/// Logs a warning when `gamma` is outside the recommended interval.
pub fn warn_if_unusual_gamma(gamma: f64) {
    let (lo, hi) = RECOMMENDED_GAMMA;
    if !(lo..=hi).contains(&gamma) {
        log::warn!("gamma {gamma} is outside the recommended interval [{lo}, {hi}]");
    }
}

pub fn pool_views(v: &ViewScores) -> Result<f64> {
    check_gamma(v.gamma)?;
    let s = v.as_ordered();
    if s.iter().all(|x| x.is_finite()) {
        // Same weights written as an interpolation between the lateral and
        // vertical means: equal inputs come back bit-exact.
        let lateral = ((v.front + v.left) + (v.right + v.back)) / 4.0;
        let vertical = (v.top + v.bottom) / 2.0;
        return Ok(lateral + v.gamma * (vertical - lateral));
    }
    // Infinite sentinels: skip zero-weight views so 0·∞ never appears.
    let (wl, wv) = view_weights(v.gamma);
    let mut acc = 0.0;
    for (kind, score) in ViewKind::ALL.iter().zip(s) {
        let w = match kind {
            ViewKind::Top | ViewKind::Bottom => wv,
            _ => wl,
        };
        if w > 0.0 {
            acc += w * score;
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PcqaOptions {
    pub projection: ProjectionOptions,
    /// Pool image metrics only over pixels occupied in either view.
    pub masked: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcqaScore {
    pub views: ViewScores,
    pub score: f64,
    pub higher_is_better: bool,
}

/// Scores each aligned pair of views with `metric` and pools with `gamma`.
pub fn score_view_sets(
    reference: &ViewSet,
    distorted: &ViewSet,
    metric: &dyn IqaMetric,
    gamma: f64,
    masked: bool,
) -> Result<PcqaScore> {
    check_gamma(gamma)?;
    let scores: Vec<f64> = reference
        .views
        .par_iter()
        .zip(distorted.views.par_iter())
        .map(|(a, b)| {
            let mask: Option<Vec<bool>> = masked.then(|| {
                a.occupancy
                    .iter()
                    .zip(&b.occupancy)
                    .map(|(x, y)| *x || *y)
                    .collect()
            });
            metric.score(&a.to_image(), &b.to_image(), mask.as_deref())
        })
        .collect::<Result<_>>()?;
    let views = ViewScores::from_ordered(scores.try_into().expect("six views"), gamma);
    Ok(PcqaScore {
        views,
        score: pool_views(&views)?,
        higher_is_better: metric.higher_is_better(),
    })
}

/// Projects both clouds on their union box, scores each aligned view pair and
/// pools with `gamma`.
pub fn projection_pcqa(
    reference: &PointCloud,
    distorted: &PointCloud,
    metric: &dyn IqaMetric,
    gamma: f64,
    opts: &PcqaOptions,
) -> Result<PcqaScore> {
    check_gamma(gamma)?;
    let (rv, dv) = project_pair(reference, distorted, &opts.projection)?;
    score_view_sets(&rv, &dv, metric, gamma, opts.masked)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vs(s: [f64; 6], gamma: f64) -> ViewScores {
        ViewScores::from_ordered(s, gamma)
    }

    #[test]
    fn equal_views_return_themselves() {
        for g in [0.0, 0.13, 0.19, 0.31, 1.0, 0.77] {
            for s in [0.0, 1.0, 0.123456789, 41.7, -3.3, 1e-300] {
                assert_eq!(pool_views(&vs([s; 6], g)).unwrap(), s);
            }
        }
    }

    #[test]
    fn third_is_plain_mean() {
        let p = pool_views(&vs([1.0, 2.0, 3.0, 4.0, 5.0, 6.0], MEAN_GAMMA)).unwrap();
        assert!((p - 3.5).abs() < 1e-12);
    }

    #[test]
    fn default_gamma_example() {
        // lateral views 1, vertical views 0
        let p = pool_views(&vs([1.0, 1.0, 1.0, 1.0, 0.0, 0.0], DEFAULT_GAMMA)).unwrap();
        assert!((p - 0.81).abs() < 1e-12);
    }

    #[test]
    fn gamma_out_of_range() {
        assert!(pool_views(&vs([1.0; 6], -0.01)).is_err());
        assert!(pool_views(&vs([1.0; 6], 1.01)).is_err());
        assert!(pool_views(&vs([1.0; 6], f64::NAN)).is_err());
    }

    #[test]
    fn infinite_sentinel_propagates() {
        assert_eq!(pool_views(&vs([f64::INFINITY; 6], 0.19)).unwrap(), f64::INFINITY);
        // With γ = 0 an infinite top view carries no weight.
        let s = [30.0, 30.0, 30.0, 30.0, f64::INFINITY, 30.0];
        assert_eq!(pool_views(&vs(s, 0.0)).unwrap(), 30.0);
        assert_eq!(pool_views(&vs(s, 0.19)).unwrap(), f64::INFINITY);
    }

    #[test]
    fn weights_sum_to_one() {
        for g in [0.0, 0.13, 0.19, 0.31, 1.0] {
            let (wl, wv) = view_weights(g);
            assert!((4.0 * wl + 2.0 * wv - 1.0).abs() < 1e-15);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn monotone_in_each_view(
                s in prop::array::uniform6(-100.0f64..100.0),
                g in 0.0f64..=1.0,
                k in 0usize..6,
                bump in 0.0f64..10.0,
            ) {
                let base = pool_views(&vs(s, g)).unwrap();
                let mut t = s;
                t[k] += bump;
                prop_assert!(pool_views(&vs(t, g)).unwrap() >= base - 1e-12);
            }

            #[test]
            fn linear_in_scores(
                a in prop::array::uniform6(-10.0f64..10.0),
                b in prop::array::uniform6(-10.0f64..10.0),
                g in 0.0f64..=1.0,
            ) {
                let sum: [f64; 6] = std::array::from_fn(|i| a[i] + b[i]);
                let lhs = pool_views(&vs(sum, g)).unwrap();
                let rhs = pool_views(&vs(a, g)).unwrap() + pool_views(&vs(b, g)).unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }
}
