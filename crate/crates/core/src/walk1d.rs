//! One-dimensional mean-zero walks: boundary crossing, hitting tails,
//! conditional moments.
//!
//! The lattice DP carries the law of `S_k` restricted to the survival event
//! on a window `[-cap, cap]` with `cap = K·sd·√n`. Mass leaving the window is
//! set aside; counting it as survived gives the upper end of the bracket and
//! as killed the lower end.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::law::{IncrementLaw, Lattice};
use crate::par;
use crate::rng::CounterRng;

pub const DEFAULT_CAP_MULTIPLIER: f64 = 12.0;
/// Bracket width above which callers should warn.
pub const BRACKET_WARN: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryFn {
    Zero,
    /// `a·n^b`
    Power { a: f64, b: f64 },
    /// `a·n^b·log(n+1)^c`
    PowerLog { a: f64, b: f64, c: f64 },
    /// `f(1), f(2), ..`; held constant past the end.
    Tabulated(Vec<f64>),
}

impl BoundaryFn {
    pub fn eval(&self, n: usize) -> f64 {
        let x = n as f64;
        match self {
            Self::Zero => 0.0,
            Self::Power { a, b } => a * x.powf(*b),
            Self::PowerLog { a, b, c } => a * x.powf(*b) * (x + 1.0).ln().powf(*c),
            Self::Tabulated(v) => match v.len() {
                0 => 0.0,
                len => v[n.clamp(1, len) - 1],
            },
        }
    }

    /// Nonnegative and nondecreasing on `[1, horizon]`.
    pub fn validate(&self, horizon: usize) -> Result<()> {
        let mut prev = 0.0;
        for n in 1..=horizon {
            let v = self.eval(n);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidBoundary(format!("f({n}) = {v} is not a nonnegative number")));
            }
            if v < prev {
                return Err(Error::InvalidBoundary(format!("f decreases at n = {n}")));
            }
            prev = v;
        }
        Ok(())
    }
}

impl fmt::Display for BoundaryFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "zero"),
            Self::Power { a, b } => write!(f, "pow:{a}:{b}"),
            Self::PowerLog { a, b, c } => write!(f, "powlog:{a}:{b}:{c}"),
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

/// `zero`, `pow:a:b`, `powlog:a:b:c`, `tab:f1,f2,..`
impl FromStr for BoundaryFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, rest) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let nums = |sep: char| -> Result<Vec<f64>> {
            rest.split(sep)
                .filter(|t| !t.trim().is_empty())
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidBoundary(format!("bad number `{t}` in `{s}`")))
                })
                .collect()
        };
        match (head, nums(if head == "tab" { ',' } else { ':' })?.as_slice()) {
            ("zero", []) => Ok(Self::Zero),
            ("pow", [a, b]) => Ok(Self::Power { a: *a, b: *b }),
            ("powlog", [a, b, c]) => Ok(Self::PowerLog { a: *a, b: *b, c: *c }),
            ("tab", v) => Ok(Self::Tabulated(v.to_vec())),
            _ => Err(Error::InvalidBoundary(format!(
                "expected zero, pow:a:b, powlog:a:b:c or tab:.., got `{s}`"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converges,
    Diverges,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesReport {
    pub verdict: Verdict,
    /// `(n, Σ_{k<=n} term(k))` at powers of two and at the horizon.
    pub partial_sums: Vec<(usize, f64)>,
}

pub(crate) fn partial_sums(horizon: usize, term: impl Fn(usize) -> f64) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let mut acc = 0.0;
    for n in 1..=horizon {
        acc += term(n);
        if n.is_power_of_two() || n == horizon {
            out.push((n, acc));
        }
    }
    out
}

/// Verdict on `Σ n^{-3/2} f(n)`.
pub fn summability_verdict(f: &BoundaryFn, horizon: usize) -> SeriesReport {
    let verdict = match f {
        BoundaryFn::Zero => Verdict::Converges,
        BoundaryFn::Power { a, b } => {
            if *a == 0.0 || *b < 0.5 {
                Verdict::Converges
            } else {
                Verdict::Diverges
            }
        }
        BoundaryFn::PowerLog { a, b, c } => {
            if *a == 0.0 || *b < 0.5 || (*b == 0.5 && *c < -1.0) {
                Verdict::Converges
            } else {
                Verdict::Diverges
            }
        }
        BoundaryFn::Tabulated(_) => Verdict::Undetermined,
    };
    SeriesReport {
        verdict,
        partial_sums: partial_sums(horizon, |n| (n as f64).powf(-1.5) * f.eval(n)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProbBracket {
    pub lower: f64,
    pub upper: f64,
}

impl ProbBracket {
    pub fn exact(p: f64) -> Self {
        Self { lower: p, upper: p }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn contains(&self, p: f64, slack: f64) -> bool {
        self.lower - slack <= p && p <= self.upper + slack
    }

    pub fn warning(&self, cap_multiplier: f64) -> Option<String> {
        (self.width() > BRACKET_WARN).then(|| {
            format!(
                "bracket width {:.3e} exceeds {BRACKET_WARN:e}; try a cap multiplier above {cap_multiplier}",
                self.width()
            )
        })
    }
}

/// Restricted law of `S_k` over the window `[lo, hi]` (lattice units).
pub struct DpState<'a> {
    pub step: usize,
    pub lo: i64,
    pub mass: &'a [f64],
    /// Mass that left the window so far.
    pub escaped: f64,
}

impl DpState<'_> {
    pub fn alive(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn bracket(&self) -> ProbBracket {
        let alive = self.alive().min(1.0);
        ProbBracket {
            lower: alive,
            upper: (alive + self.escaped).min(1.0),
        }
    }

    pub fn moment(&self, p: i32, unit: f64) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .map(|(i, m)| m * ((self.lo + i as i64) as f64 * unit).powi(p))
            .sum()
    }
}

fn cap_units(law: &Lattice, n: usize, cap_multiplier: f64) -> Result<i64> {
    if cap_multiplier < 4.0 {
        return Err(Error::param("cap_multiplier", format!("must be >= 4, got {cap_multiplier}")));
    }
    let spread = law.max_value().abs().max(law.min_value().abs());
    let cap = (cap_multiplier * law.sd_units() * (n as f64).sqrt()).ceil() as i64;
    Ok(cap.max(spread))
}

/// Run the lattice DP for `n` steps, killing paths with `S_k < barrier(k)`
/// (lattice units; `None` = no constraint at step `k`). `visit` sees the
/// state after every step listed in `checkpoints`.
pub fn run_barrier_dp(
    law: &Lattice,
    n: usize,
    cap_multiplier: f64,
    barrier: impl Fn(usize) -> Option<i64>,
    checkpoints: &[usize],
    mut visit: impl FnMut(&DpState<'_>),
) -> Result<()> {
    let cap = cap_units(law, n, cap_multiplier)?;
    let width = (2 * cap + 1) as usize;
    let mut cur = vec![0.0f64; width];
    let mut next = vec![0.0f64; width];
    let idx = |x: i64| (x + cap) as usize;
    cur[idx(0)] = 1.0;
    let mut escaped = 0.0f64;
    let atoms: Vec<(i64, f64)> = law.atoms().filter(|&(_, p)| p > 0.0).collect();
    let mut checkpoints: Vec<usize> = checkpoints.to_vec();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let mut cp = checkpoints.iter().peekable();
    // `None` once every path has been killed or has left the window
    let mut window = Some((0i64, 0i64));
    for k in 0..=n {
        if k > 0 {
            window = window.and_then(|(lo, hi)| {
                let new_lo = (lo + law.min_value()).max(-cap);
                let new_hi = (hi + law.max_value()).min(cap);
                for &(v, p) in &atoms {
                    let out_low: f64 = (lo..=hi.min(-cap - v - 1)).map(|x| cur[idx(x)]).sum();
                    let out_high: f64 = (lo.max(cap - v + 1)..=hi).map(|x| cur[idx(x)]).sum();
                    escaped += p * (out_low + out_high);
                }
                if new_lo > new_hi {
                    return None;
                }
                next[idx(new_lo)..=idx(new_hi)].fill(0.0);
                for &(v, p) in &atoms {
                    // source x lands on x + v; keep sources whose target stays inside
                    let src_lo = lo.max(-cap - v);
                    let src_hi = hi.min(cap - v);
                    if src_lo <= src_hi {
                        let src = &cur[idx(src_lo)..=idx(src_hi)];
                        let dst = &mut next[idx(src_lo + v)..=idx(src_hi + v)];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += p * s;
                        }
                    }
                }
                std::mem::swap(&mut cur, &mut next);
                let lo_k = match barrier(k) {
                    Some(b) if b > new_lo => b,
                    _ => new_lo,
                };
                (lo_k <= new_hi).then_some((lo_k, new_hi))
            });
        }
        while cp.peek().is_some_and(|&&c| c == k) {
            let mass = match window {
                Some((lo, hi)) => &cur[idx(lo)..=idx(hi)],
                None => &cur[..0],
            };
            let lo = window.map_or(0, |w| w.0);
            visit(&DpState { step: k, lo, mass, escaped });
            cp.next();
        }
    }
    Ok(())
}

/// Barrier in lattice units for the real-valued condition `S_k >= g`.
pub fn lattice_barrier(g: f64, unit: f64) -> i64 {
    (g / unit - 1e-12).ceil() as i64
}

/// `P(S_k >= f(k) for all k in [a, n])` for every `n` in `grid`.
pub fn stay_above_grid(
    law: &Lattice,
    f: &BoundaryFn,
    a: usize,
    grid: &[usize],
    cap_multiplier: f64,
) -> Result<Vec<ProbBracket>> {
    signed_barrier_grid(law, |k| f.eval(k), a, grid, cap_multiplier)
}

fn signed_barrier_grid(
    law: &Lattice,
    g: impl Fn(usize) -> f64,
    a: usize,
    grid: &[usize],
    cap_multiplier: f64,
) -> Result<Vec<ProbBracket>> {
    if a == 0 {
        return Err(Error::param("a", "must be >= 1"));
    }
    let n = grid.iter().copied().max().unwrap_or(0);
    if let Some(&bad) = grid.iter().find(|&&m| m < a) {
        return Err(Error::param("n", format!("grid value {bad} is below the start a = {a}")));
    }
    let unit = law.unit();
    let mut found = std::collections::BTreeMap::new();
    run_barrier_dp(
        law,
        n,
        cap_multiplier,
        |k| (k >= a).then(|| lattice_barrier(g(k), unit)),
        grid,
        |st| {
            found.insert(st.step, st.bracket());
        },
    )?;
    Ok(grid.iter().map(|m| found[m]).collect())
}

pub fn dp_stay_above(law: &Lattice, f: &BoundaryFn, a: usize, n: usize, cap_multiplier: f64) -> Result<ProbBracket> {
    if n < a {
        return Err(Error::param("n", format!("n = {n} is below a = {a}")));
    }
    Ok(stay_above_grid(law, f, a, &[n], cap_multiplier)?[0])
}

/// `P(S_k >= -f(k) for 1 <= k <= n)` on a grid.
pub fn stay_above_negative_grid(
    law: &Lattice,
    f: &BoundaryFn,
    grid: &[usize],
    cap_multiplier: f64,
) -> Result<Vec<ProbBracket>> {
    signed_barrier_grid(law, |k| -f.eval(k), 1, grid, cap_multiplier)
}

/// `P(T_h > n)` with `T_h = min{k >= 1 : S_k < -h}`.
pub fn dp_hitting_tail(law: &Lattice, h: f64, n: usize, cap_multiplier: f64) -> Result<ProbBracket> {
    Ok(hitting_tail_grid(law, h, &[n], cap_multiplier)?[0])
}

pub fn hitting_tail_grid(law: &Lattice, h: f64, grid: &[usize], cap_multiplier: f64) -> Result<Vec<ProbBracket>> {
    if !(h >= 0.0) {
        return Err(Error::param("h", format!("must be >= 0, got {h}")));
    }
    signed_barrier_grid(law, |_| -h, 1, grid, cap_multiplier)
}

/// `E(S_n^p | T_0 > n)`.
pub fn dp_conditional_moment(law: &Lattice, n: usize, p: i32, cap_multiplier: f64) -> Result<f64> {
    Ok(conditional_moment_grid(law, &[n], p, cap_multiplier)?[0])
}

pub fn conditional_moment_grid(law: &Lattice, grid: &[usize], p: i32, cap_multiplier: f64) -> Result<Vec<f64>> {
    if !(p == 1 || p == 2) {
        return Err(Error::param("power", format!("must be 1 or 2, got {p}")));
    }
    let n = grid.iter().copied().max().unwrap_or(0);
    let unit = law.unit();
    let mut found = std::collections::BTreeMap::new();
    run_barrier_dp(law, n, cap_multiplier, |k| (k >= 1).then_some(0), grid, |st| {
        let alive = st.alive();
        found.insert(st.step, (alive > 0.0).then(|| st.moment(p, unit) / alive));
    })?;
    grid.iter()
        .map(|m| {
            found[m].ok_or_else(|| Error::param("n", format!("P(T_0 > {m}) = 0; conditional moment undefined")))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub episodes: usize,
}

impl McEstimate {
    pub fn from_counts(hits: usize, episodes: usize) -> Self {
        let p = hits as f64 / episodes as f64;
        Self {
            estimate: p,
            stderr: (p * (1.0 - p) / episodes as f64).sqrt(),
            episodes,
        }
    }

    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        (self.estimate - target).abs() <= sigmas * self.stderr.max(1.0 / self.episodes as f64)
    }
}

/// Monte Carlo estimate of `P(S_k >= f(k) for k in [a, n])`, episode `i`
/// drawing from stream `(seed, i)`.
pub fn mc_stay_above(
    law: &IncrementLaw,
    f: &BoundaryFn,
    a: usize,
    n: usize,
    episodes: usize,
    seed: u64,
) -> Result<McEstimate> {
    Ok(mc_stay_above_grid(law, f, a, &[n], episodes, seed)?[0])
}

/// As [`mc_stay_above`] at every `n` of a grid, sharing episodes.
pub fn mc_stay_above_grid(
    law: &IncrementLaw,
    f: &BoundaryFn,
    a: usize,
    grid: &[usize],
    episodes: usize,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    if episodes == 0 {
        return Err(Error::param("episodes", "must be >= 1"));
    }
    if a == 0 {
        return Err(Error::param("a", "must be >= 1"));
    }
    let n = grid.iter().copied().max().unwrap_or(0);
    let bound: Vec<f64> = (0..=n).map(|k| f.eval(k)).collect();
    let per_block = par::map_blocks(episodes, |range| {
        let mut hits = vec![0usize; grid.len()];
        for ep in range {
            let mut rng = CounterRng::new(seed, ep as u64);
            let mut s = 0.0;
            let mut alive_until = n;
            for (k, b) in bound.iter().enumerate().skip(1) {
                s += law.sample(&mut rng);
                if k >= a && s < *b {
                    alive_until = k - 1;
                    break;
                }
            }
            for (h, &m) in hits.iter_mut().zip(grid) {
                if m <= alive_until {
                    *h += 1;
                }
            }
        }
        hits
    });
    let mut totals = vec![0usize; grid.len()];
    for block in per_block {
        for (t, h) in totals.iter_mut().zip(block) {
            *t += h;
        }
    }
    Ok(totals.into_iter().map(|h| McEstimate::from_counts(h, episodes)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticsRow {
    pub n: usize,
    /// `P(A(f; n_f, n))`
    pub above: ProbBracket,
    /// `P(T_0 > n)`
    pub positive: ProbBracket,
    /// `P(A(-f; 1, n))`
    pub above_negative: ProbBracket,
}

impl AsymptoticsRow {
    pub fn scaled(&self, b: &ProbBracket) -> f64 {
        (self.n as f64).sqrt() * b.mid()
    }
}

pub fn asymptotics_report(
    law: &Lattice,
    f: &BoundaryFn,
    n_f: usize,
    grid: &[usize],
    cap_multiplier: f64,
) -> Result<Vec<AsymptoticsRow>> {
    let n = grid.iter().copied().max().unwrap_or(0);
    f.validate(n.max(1))?;
    let above = stay_above_grid(law, f, n_f, grid, cap_multiplier)?;
    let positive = hitting_tail_grid(law, 0.0, grid, cap_multiplier)?;
    let above_negative = stay_above_negative_grid(law, f, grid, cap_multiplier)?;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &n)| AsymptoticsRow {
            n,
            above: above[i],
            positive: positive[i],
            above_negative: above_negative[i],
        })
        .collect())
}

/// Default flatness ratio for [`scan_n_f`].
pub const N_F_FLATNESS: f64 = 0.9;

/// Starting time `n_f`: the smallest power of two `m` with `4m <= max_n`
/// whose normalized survival `√n·P(A(f; m, n))` at `n = 4m` is at least
/// `ratio` times its value at `n = 2m`. Returns 1 when no candidate
/// flattens out (the divergent signature).
pub fn scan_n_f(law: &Lattice, f: &BoundaryFn, max_n: usize, ratio: f64, cap_multiplier: f64) -> Result<usize> {
    let mut m = 1usize;
    while 4 * m <= max_n {
        let b = stay_above_grid(law, f, m, &[2 * m, 4 * m], cap_multiplier)?;
        let s2 = (2.0 * m as f64).sqrt() * b[0].mid();
        let s4 = (4.0 * m as f64).sqrt() * b[1].mid();
        if s2 > 0.0 && s4 >= ratio * s2 {
            return Ok(m);
        }
        m *= 2;
    }
    Ok(1)
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn monotone_in_n_and_boundary(shift in 0.0f64..2.0, b in 0.0f64..0.6, n in 2usize..200) {
            let law = Lattice::rademacher();
            let f = BoundaryFn::Power { a: 1.0, b };
            let g = BoundaryFn::PowerLog { a: 1.0 + shift, b, c: 0.0 };
            let grid = [n - 1, n];
            let pf = stay_above_grid(&law, &f, 1, &grid, DEFAULT_CAP_MULTIPLIER).unwrap();
            let pg = stay_above_grid(&law, &g, 1, &grid, DEFAULT_CAP_MULTIPLIER).unwrap();
            prop_assert!(pf[1].upper <= pf[0].upper + 1e-15);
            prop_assert!(pg[1].upper <= pf[1].upper + 1e-15);
        }
    }
}
