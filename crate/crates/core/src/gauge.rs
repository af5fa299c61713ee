//! Gauges, Hausdorff content and capacity of trees.
//!
//! Capacity in gauge `φ` is the effective conductance from a unit resistor
//! above the root down to level `N`, the edge into a level-`i` vertex
//! carrying resistance `φ(i)^{-1} - φ(i-1)^{-1}`. The energy of a boundary
//! measure uses the same increments: `I(μ) = Σ_v r(|v|)·μ(T_v)²`.

use std::fmt;
use std::str::FromStr;

use num::{BigRational, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::tree_resistance;
use crate::scalar::rational_to_f64;
use crate::tree::{min_cutset, Cutset, ExplicitTree, GrowthProfile};
use crate::walk1d::{partial_sums, SeriesReport, Verdict};

#[derive(Clone, Debug, PartialEq)]
pub enum Gauge {
    /// `n^{-α}`
    Power(f64),
    /// `e^{-βn}`
    Exp(f64),
    /// `φ(1), φ(2), ..`; held constant past the end.
    Tabulated(Vec<f64>),
}

impl Gauge {
    /// `φ(n)`, with `φ(0) = 1`.
    pub fn eval(&self, n: usize) -> f64 {
        if n == 0 {
            return 1.0;
        }
        match self {
            Self::Power(a) => (n as f64).powf(-a),
            Self::Exp(b) => (-b * n as f64).exp(),
            Self::Tabulated(v) => v[n.min(v.len()) - 1],
        }
    }

    /// `φ(n)^{-1} - φ(n-1)^{-1}` for `n >= 1`; `1` at `n = 0` (root resistor).
    pub fn increment(&self, n: usize) -> f64 {
        if n == 0 {
            1.0
        } else {
            1.0 / self.eval(n) - 1.0 / self.eval(n - 1)
        }
    }

    /// Positive and nonincreasing on `[0, horizon]`.
    pub fn validate(&self, horizon: usize) -> Result<()> {
        match self {
            Self::Power(a) if !(*a >= 0.0) => return Err(Error::InvalidGauge(format!("exponent {a} < 0"))),
            Self::Exp(b) if !(*b >= 0.0) => return Err(Error::InvalidGauge(format!("rate {b} < 0"))),
            Self::Tabulated(v) if v.is_empty() => return Err(Error::InvalidGauge("empty table".into())),
            _ => {}
        }
        let mut prev = 1.0;
        for n in 1..=horizon {
            let v = self.eval(n);
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidGauge(format!("φ({n}) = {v} is not positive")));
            }
            if v > prev {
                return Err(Error::InvalidGauge(format!("φ increases at n = {n} ({prev} -> {v})")));
            }
            prev = v;
        }
        Ok(())
    }
}

impl fmt::Display for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Power(a) => write!(f, "pow:{a}"),
            Self::Exp(b) => write!(f, "exp:{b}"),
            Self::Tabulated(v) => {
                write!(f, "tab:")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                Ok(())
            }
        }
    }
}

/// `pow:α`, `exp:β`, `tab:v1,v2,..`
impl FromStr for Gauge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidGauge(format!("expected pow:α, exp:β or tab:v1,v2,.., got `{s}`"));
        let (head, rest) = s.trim().split_once(':').ok_or_else(bad)?;
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        match head {
            "pow" => Ok(Self::Power(num(rest)?)),
            "exp" => Ok(Self::Exp(num(rest)?)),
            "tab" => Ok(Self::Tabulated(
                rest.split(|c| c == ',' || c == '\n')
                    .filter(|t| !t.trim().is_empty())
                    .map(num)
                    .collect::<Result<_>>()?,
            )),
            _ => Err(bad()),
        }
    }
}

/// Probability weights on the level-`N` vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryMeasure {
    weights: Vec<f64>,
}

impl BoundaryMeasure {
    pub fn new(tree: &ExplicitTree, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != tree.leaves().len() {
            return Err(Error::param("measure", "one weight per level-N vertex required"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::param("measure", "weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param("measure", format!("weights sum to {total}")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(tree: &ExplicitTree) -> Self {
        let n = tree.leaves().len();
        Self { weights: vec![1.0 / n as f64; n] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// `min_Π Σ_{σ∈Π} φ(|σ|)` over cutsets at depth `>= min_level`.
pub fn hausdorff_content(tree: &ExplicitTree, gauge: &Gauge, min_level: usize) -> Result<(f64, Cutset)> {
    if min_level == 0 {
        return Err(Error::param("min_level", "must be >= 1"));
    }
    gauge.validate(tree.depth())?;
    min_cutset(tree, |v| gauge.eval(tree.vertex_depth(v)), min_level)
}

/// Content for every `min_level` in `1..=N`.
pub fn content_by_min_level(tree: &ExplicitTree, gauge: &Gauge) -> Result<Vec<f64>> {
    (1..=tree.depth())
        .map(|m| hausdorff_content(tree, gauge, m).map(|(v, _)| v))
        .collect()
}

/// Capacity as the effective conductance of the gauge network.
pub fn capacity_network(tree: &ExplicitTree, gauge: &Gauge) -> Result<f64> {
    gauge.validate(tree.depth())?;
    let r = tree_resistance(tree, |v| gauge.increment(tree.vertex_depth(v)));
    Ok(1.0 / (gauge.increment(0) + r))
}

/// Subtree masses `μ(T_v)`.
fn subtree_masses(tree: &ExplicitTree, mu: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; tree.len()];
    let first_leaf = tree.leaves().start;
    for (i, w) in mu.iter().enumerate() {
        m[first_leaf + i] = *w;
    }
    for v in (1..tree.len()).rev() {
        let p = tree.parent(v).expect("non-root");
        let x = m[v];
        m[p] += x;
    }
    m
}

/// `I_φ(μ) = ∬ φ(|ξ∧η|)^{-1} dμ dμ`.
pub fn energy(tree: &ExplicitTree, gauge: &Gauge, mu: &BoundaryMeasure) -> f64 {
    let m = subtree_masses(tree, mu.weights());
    (0..tree.len())
        .map(|v| gauge.increment(tree.vertex_depth(v)) * m[v] * m[v])
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyResult {
    pub capacity: f64,
    pub measure: BoundaryMeasure,
    pub iterations: usize,
    pub converged: bool,
    /// Frank-Wolfe duality gap at the returned measure (an upper bound on
    /// its excess energy).
    pub gap: f64,
}

/// Relative gap; it bounds the relative capacity error. Tighter targets stall
/// on measures with near-zero atoms.
pub const DEFAULT_ENERGY_TOLERANCE: f64 = 1e-7;
pub const DEFAULT_ENERGY_ITERATIONS: usize = 100_000;

/// Euclidean projection onto the probability simplex.
fn project_simplex(y: &mut [f64]) {
    let mut u: Vec<f64> = y.to_vec();
    u.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (j, &x) in u.iter().enumerate() {
        acc += x;
        let t = (acc - 1.0) / (j + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    for x in y.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// Capacity as `1 / min_μ I_φ(μ)`, by accelerated projected gradient with
/// backtracking and adaptive restart. Stops once the Frank-Wolfe gap is
/// below `tolerance` times the energy.
pub fn capacity_energy(
    tree: &ExplicitTree,
    gauge: &Gauge,
    tolerance: f64,
    max_iterations: usize,
) -> Result<EnergyResult> {
    gauge.validate(tree.depth())?;
    let leaves = tree.leaves();
    let n = leaves.len();
    let r: Vec<f64> = (0..tree.len()).map(|v| gauge.increment(tree.vertex_depth(v))).collect();
    // gradient 2Kμ: for leaf ξ, 2 Σ_{v ≤ ξ} r(v) μ(T_v)
    let grad = |mu: &[f64], out: &mut [f64]| -> f64 {
        let m = subtree_masses(tree, mu);
        let mut acc = vec![0.0; tree.len()];
        let mut e = 0.0;
        for v in 0..tree.len() {
            let up = tree.parent(v).map_or(0.0, |p| acc[p]);
            acc[v] = up + r[v] * m[v];
            e += r[v] * m[v] * m[v];
        }
        for (i, g) in out.iter_mut().enumerate() {
            *g = 2.0 * acc[leaves.start + i];
        }
        e
    };
    let mut x = vec![1.0 / n as f64; n];
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut g = vec![0.0; n];
    let mut gx = vec![0.0; n];
    // curvature guess from the uniform point; backtracking corrects it
    let mut lip = {
        let e = grad(&x, &mut g);
        2.0 * e.max(1e-300) * n as f64
    };
    let mut fx = grad(&x, &mut gx);
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut trial = vec![0.0; n];
    while iterations < max_iterations {
        iterations += 1;
        let fy = grad(&y, &mut g);
        loop {
            for i in 0..n {
                trial[i] = y[i] - g[i] / lip;
            }
            project_simplex(&mut trial);
            let mut lin = 0.0;
            let mut sq = 0.0;
            for i in 0..n {
                let d = trial[i] - y[i];
                lin += g[i] * d;
                sq += d * d;
            }
            let ft = grad(&trial, &mut gx);
            if ft <= fy + lin + 0.5 * lip * sq + 1e-15 * fy.abs() {
                break;
            }
            lip *= 2.0;
        }
        let f_new = grad(&trial, &mut gx);
        // adaptive restart when the objective goes up
        let restart = f_new > fx;
        let t_next = if restart { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
        for i in 0..n {
            let xi = trial[i];
            y[i] = if restart { xi } else { xi + (t - 1.0) / t_next * (xi - x[i]) };
            x[i] = xi;
        }
        t = t_next;
        fx = f_new;
        let lin: f64 = (0..n).map(|i| gx[i] * x[i]).sum();
        let min_g = gx.iter().copied().fold(f64::INFINITY, f64::min);
        gap = 0.5 * (lin - min_g);
        if gap <= tolerance * fx {
            converged = true;
            break;
        }
        lip *= 0.9;
    }
    Ok(EnergyResult {
        capacity: 1.0 / fx,
        measure: BoundaryMeasure { weights: x },
        iterations,
        converged,
        gap,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RpResult {
    pub rp: f64,
    /// `2 / R_p`
    pub bound: f64,
    /// Non-integer growth somewhere in the profile.
    #[serde(rename = "virtual")]
    pub is_virtual: bool,
}

/// `R_p = p_N^{-1} λ_N^{-1} + Σ_{i<N} p_i^{-1} (λ_i^{-1} - λ_{i+1}^{-1})`.
pub fn rp_symmetric(profile: &GrowthProfile, gauge: &Gauge) -> Result<RpResult> {
    let n = profile.len();
    gauge.validate(n)?;
    let inv: Vec<BigRational> = profile.level_sizes().iter().map(|l| l.recip()).collect();
    let mut rp = rational_to_f64(&inv[n]) / gauge.eval(n);
    for i in 0..n {
        let diff = &inv[i] - &inv[i + 1];
        if !diff.is_zero() {
            rp += rational_to_f64(&diff) / gauge.eval(i);
        }
    }
    Ok(RpResult {
        rp,
        bound: 2.0 / rp,
        is_virtual: !profile.is_integral(),
    })
}

/// Level-size families for the series tests.
#[derive(Clone, Debug, PartialEq)]
pub enum SizeLaw {
    /// `c·(n + shift)^γ`
    PowerShift { c: f64, gamma: f64, shift: f64 },
    /// `⌈n^γ⌉`
    CeilPower { gamma: f64 },
    /// `e^{βn}`
    Exponential { beta: f64 },
    /// Explicit level sizes `|Γ_1|, |Γ_2|, ..`.
    Tabulated(Vec<f64>),
}

impl SizeLaw {
    pub fn size(&self, n: usize) -> f64 {
        let x = n as f64;
        match self {
            Self::PowerShift { c, gamma, shift } => c * (x + shift).powf(*gamma),
            Self::CeilPower { gamma } => x.powf(*gamma).ceil(),
            Self::Exponential { beta } => (beta * x).exp(),
            Self::Tabulated(v) => v[n.clamp(1, v.len()) - 1],
        }
    }

    pub fn from_profile(profile: &GrowthProfile) -> Self {
        Self::Tabulated(profile.level_sizes_f64()[1..].to_vec())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionReport {
    /// `Σ n^{-1/2} |Γ_n|^{-1}`
    pub capacity_series: SeriesReport,
    /// `Σ n^{-3/2} log |Γ_n|`
    pub regularity_series: SeriesReport,
    /// For spherically symmetric trees: `transient`, `recurrent` or `undetermined`.
    pub prediction: &'static str,
}

pub fn criterion_series(law: &SizeLaw, horizon: usize) -> CriterionReport {
    let (cap, reg) = match law {
        SizeLaw::PowerShift { gamma, .. } | SizeLaw::CeilPower { gamma } => (
            if *gamma > 0.5 { Verdict::Converges } else { Verdict::Diverges },
            Verdict::Converges,
        ),
        SizeLaw::Exponential { beta } => {
            if *beta > 0.0 {
                (Verdict::Converges, Verdict::Diverges)
            } else {
                (Verdict::Diverges, Verdict::Converges)
            }
        }
        SizeLaw::Tabulated(_) => (Verdict::Undetermined, Verdict::Undetermined),
    };
    let prediction = match (cap, reg) {
        (Verdict::Converges, _) => "transient",
        (Verdict::Diverges, Verdict::Converges) => "recurrent",
        _ => "undetermined",
    };
    CriterionReport {
        capacity_series: SeriesReport {
            verdict: cap,
            partial_sums: partial_sums(horizon, |n| (n as f64).powf(-0.5) / law.size(n)),
        },
        regularity_series: SeriesReport {
            verdict: reg,
            partial_sums: partial_sums(horizon, |n| (n as f64).powf(-1.5) * law.size(n).ln()),
        },
        prediction,
    }
}
