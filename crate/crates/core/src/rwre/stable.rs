//! Survival of a symmetric stable walk above a linear drift line.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::law::sample_symmetric_stable;
use crate::par;
use crate::rng::CounterRng;

/// `P(X > x)` for the standard symmetric stable law with characteristic
/// function `e^{-|t|^α}`, from the Gil-Pelaez inversion formula.
pub fn stable_tail(alpha: f64, x: f64) -> f64 {
    let upper = 40f64.powf(1.0 / alpha);
    // enough Simpson panels to resolve both the oscillation and the decay
    let panels = (((upper * x.abs()) * 40.0) as usize).max(20_000) & !1;
    let h = upper / panels as f64;
    let f = |t: f64| if t == 0.0 { x } else { (t * x).sin() * (-t.powf(alpha)).exp() / t };
    let mut s = f(0.0) + f(upper);
    for i in 1..panels {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 - s * h / (3.0 * PI)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StableRow {
    pub n: usize,
    pub survivors: usize,
    pub estimate: f64,
    pub stderr: f64,
    /// 95% Wilson interval.
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StableReport {
    pub alpha: f64,
    pub drift: f64,
    pub episodes: usize,
    pub rows: Vec<StableRow>,
    /// Weighted least-squares slope of `ln P` on `ln n` over the cells with
    /// survivors; `None` with fewer than two such cells.
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub fitted_points: usize,
}

const Z95: f64 = 1.959_963_984_540_054;

fn wilson(hits: usize, m: usize) -> (f64, f64) {
    let (m, p) = (m as f64, hits as f64 / m as f64);
    let z2 = Z95 * Z95;
    let centre = (p + z2 / (2.0 * m)) / (1.0 + z2 / m);
    let half = Z95 * (p * (1.0 - p) / m + z2 / (4.0 * m * m)).sqrt() / (1.0 + z2 / m);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Monte Carlo estimate of `P(S_k > c k for all k <= n)` on each `n` of the
/// grid, where `S` sums standard symmetric `α`-stable steps. Episode `i`
/// draws from stream `(seed, i)` and runs until it first drops to the line or
/// passes the largest `n`.
pub fn stable_ray_decay(alpha: f64, drift: f64, grid: &[usize], episodes: usize, seed: u64) -> Result<StableReport> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::param("alpha", format!("must lie in (1, 2], got {alpha}")));
    }
    if !(drift > 0.0) || !drift.is_finite() {
        return Err(Error::param("drift", format!("must be positive, got {drift}")));
    }
    if grid.is_empty() || grid[0] == 0 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("grid", "must be positive and strictly increasing"));
    }
    if episodes == 0 {
        return Err(Error::param("episodes", "must be >= 1"));
    }
    let horizon = *grid.last().expect("nonempty");
    // survival[k] = episodes alive after k steps, k in 1..=horizon
    let blocks = par::map_blocks(episodes, |range| {
        let mut alive = vec![0usize; horizon + 1];
        for i in range {
            let mut rng = CounterRng::new(seed, i as u64);
            let mut s = 0.0;
            for k in 1..=horizon {
                s += sample_symmetric_stable(alpha, &mut rng);
                if s <= drift * k as f64 {
                    break;
                }
                alive[k] += 1;
            }
        }
        alive
    });
    let mut alive = vec![0usize; horizon + 1];
    for b in blocks {
        for (a, x) in alive.iter_mut().zip(b) {
            *a += x;
        }
    }
    let rows: Vec<StableRow> = grid
        .iter()
        .map(|&n| {
            let hits = alive[n];
            let p = hits as f64 / episodes as f64;
            let (ci_low, ci_high) = wilson(hits, episodes);
            StableRow {
                n,
                survivors: hits,
                estimate: p,
                stderr: (p * (1.0 - p) / episodes as f64).sqrt(),
                ci_low,
                ci_high,
            }
        })
        .collect();
    let points: Vec<(f64, f64, f64)> = rows
        .iter()
        .filter(|r| r.survivors > 0 && r.survivors < episodes)
        .map(|r| {
            let w = episodes as f64 * r.estimate / (1.0 - r.estimate);
            ((r.n as f64).ln(), r.estimate.ln(), w)
        })
        .collect();
    let (slope, slope_stderr) = weighted_slope(&points);
    Ok(StableReport { alpha, drift, episodes, rows, slope, slope_stderr, fitted_points: points.len() })
}

/// Slope and its standard error for points `(x, y, weight)`; weights are
/// inverse variances of `y`.
fn weighted_slope(points: &[(f64, f64, f64)]) -> (Option<f64>, Option<f64>) {
    if points.len() < 2 {
        return (None, None);
    }
    let sw: f64 = points.iter().map(|p| p.2).sum();
    let xm = points.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let ym = points.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = points.iter().map(|p| p.2 * (p.0 - xm).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| p.2 * (p.0 - xm) * (p.1 - ym)).sum();
    (Some(sxy / sxx), Some(sxx.recip().sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk1d::McEstimate;

    #[test]
    fn tail_oracle_known_cases() {
        // α = 2 gives N(0, 2)
        let normal = |x: f64| 0.5 * statrs::function::erf::erfc(x / 2.0);
        for x in [0.0, 0.5, 1.0, 2.5] {
            assert!((stable_tail(2.0, x) - normal(x)).abs() < 1e-9, "x={x}");
        }
        for alpha in [1.2, 1.5, 1.9] {
            assert!((stable_tail(alpha, 0.0) - 0.5).abs() < 1e-12);
            assert!((stable_tail(alpha, 1.0) + stable_tail(alpha, -1.0) - 1.0).abs() < 1e-9);
        }
        // tail index: x^α P(X > x) tends to Γ(α) sin(πα/2) / π
        let alpha: f64 = 1.5;
        let limit = statrs::function::gamma::gamma(alpha) * (PI * alpha / 2.0).sin() / PI;
        let x: f64 = 200.0;
        assert!((x.powf(alpha) * stable_tail(alpha, x) / limit - 1.0).abs() < 0.01);
    }

    #[test]
    fn one_step_matches_oracle() {
        for c in [0.5, 1.0, 2.0] {
            let r = stable_ray_decay(1.5, c, &[1], 200_000, 3).unwrap();
            let est = McEstimate::from_counts(r.rows[0].survivors, r.episodes);
            let exact = stable_tail(1.5, c);
            assert!(est.within(exact, 3.0), "c={c}: {est:?} vs {exact}");
            assert!(r.rows[0].ci_low <= exact && exact <= r.rows[0].ci_high);
        }
    }

    #[test]
    fn survival_falls_with_drift() {
        let mut prev = 1.0;
        for c in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let p = stable_ray_decay(1.5, c, &[2], 50_000, 11).unwrap().rows[0].estimate;
            assert!(p <= prev, "c={c}");
            prev = p;
        }
        assert!(prev < 0.01);
    }

    #[test]
    fn decay_slope_and_zero_cells() {
        let r = stable_ray_decay(1.5, 1.0, &[10, 20, 40, 80], 100_000, 1).unwrap();
        assert!(r.rows.windows(2).all(|w| w[1].estimate <= w[0].estimate));
        let slope = r.slope.unwrap();
        assert!((-2.5..=-0.5).contains(&slope), "{r:?}");
        // a drift so large that late cells are empty
        let r = stable_ray_decay(1.5, 50.0, &[1, 2, 50], 20_000, 1).unwrap();
        let last = r.rows.last().unwrap();
        if last.survivors == 0 {
            assert!(last.ci_high > 0.0);
            assert!(r.fitted_points < 3);
        }
        assert!(stable_ray_decay(0.9, 1.0, &[1], 10, 0).is_err());
        assert!(stable_ray_decay(1.5, 0.0, &[1], 10, 0).is_err());
    }

    #[test]
    fn weighted_slope_recovers_a_line() {
        let pts: Vec<_> = (1..6).map(|i| (i as f64, 3.0 - 1.5 * i as f64, i as f64)).collect();
        assert!((weighted_slope(&pts).0.unwrap() + 1.5).abs() < 1e-12);
        assert_eq!(weighted_slope(&pts[..1]), (None, None));
    }
}
