//! Target sets and their compilation into per-level transition tables.
//!
//! Every supported target is decided level by level from a small state: the
//! partial sum (in lattice units) for band and half-space targets, or the
//! bitmask of boxes still containing the prefix for box unions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num::{BigRational, One, Zero};

use crate::error::{Error, Result};
use crate::law::IncrementLaw;
use crate::scalar::{format_rational, parse_rational, rational_to_f64, ratio, Scalar};
use crate::walk1d::{lattice_barrier, BoundaryFn};

/// Closed interval `[lo, hi]` of one coordinate.
pub type Interval = (BigRational, BigRational);

#[derive(Clone, Debug, PartialEq)]
pub enum TargetSet {
    /// `lower[k] <= S_{k+1} <= upper[k]`; infinite bounds allowed.
    SumBand { lower: Vec<f64>, upper: Vec<f64> },
    /// Independent retention: coordinate `k` is kept with probability `q[k]`.
    Box { q: Vec<BigRational> },
    /// Union of coordinate boxes, one interval per level for each box.
    UnionOfBoxes { boxes: Vec<Vec<Interval>> },
    /// `S_k >= f(k)` for `k >= n_f`, unconstrained before.
    HalfSpaceFrom { f: BoundaryFn, n_f: usize },
}

impl TargetSet {
    /// `Σ x_i >= 0` for every prefix.
    pub fn nonnegative_sums() -> Self {
        Self::HalfSpaceFrom { f: BoundaryFn::Zero, n_f: 1 }
    }

    /// `c·n < S_n < c·n²` as a closed band on a lattice of spacing `unit`.
    pub fn stable_corridor(c: f64, n: usize, unit: f64) -> Self {
        let slack = 0.5 * unit;
        let lower = (1..=n).map(|k| c * k as f64 + slack).collect();
        let upper = (1..=n).map(|k| c * (k * k) as f64 - slack).collect();
        Self::SumBand { lower, upper }
    }

    /// The two-box target on `[0,1]³`:
    /// `([0,1/2]×[2ε,1]×[0,1]) ∪ ([1/2,1]×[0,1]×[4ε,1])`.
    pub fn counterexample(eps: &BigRational) -> Result<Self> {
        let two = ratio(2, 1);
        let four = ratio(4, 1);
        if !(eps > &ratio(0, 1) && &four * eps < ratio(1, 1)) {
            return Err(Error::param("eps", "need 0 < ε < 1/4"));
        }
        let (zero, one, half) = (ratio(0, 1), ratio(1, 1), ratio(1, 2));
        Ok(Self::UnionOfBoxes {
            boxes: vec![
                vec![(zero.clone(), half.clone()), (&two * eps, one.clone()), (zero.clone(), one.clone())],
                vec![(half, one.clone()), (zero.clone(), one.clone()), (&four * eps, one)],
            ],
        })
    }

    /// Number of constrained levels, `None` when unbounded.
    pub fn len(&self) -> Option<usize> {
        match self {
            Self::SumBand { lower, .. } => Some(lower.len()),
            Self::Box { q } => Some(q.len()),
            Self::UnionOfBoxes { boxes } => boxes.first().map(Vec::len),
            Self::HalfSpaceFrom { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidTarget(m));
        match self {
            Self::SumBand { lower, upper } => {
                if lower.len() != upper.len() {
                    return bad("band bounds have different lengths".into());
                }
                for (k, (l, u)) in lower.iter().zip(upper).enumerate() {
                    if l.is_nan() || u.is_nan() || l > u {
                        return bad(format!("band at level {} has lower {l} > upper {u}", k + 1));
                    }
                }
            }
            Self::Box { q } => {
                for (k, x) in q.iter().enumerate() {
                    if x < &ratio(0, 1) || x > &ratio(1, 1) {
                        return bad(format!("retention {} at level {} is outside [0, 1]", format_rational(x), k + 1));
                    }
                }
            }
            Self::UnionOfBoxes { boxes } => {
                if boxes.is_empty() || boxes.len() > 64 {
                    return bad(format!("need 1..=64 boxes, got {}", boxes.len()));
                }
                let n = boxes[0].len();
                for (b, bx) in boxes.iter().enumerate() {
                    if bx.len() != n {
                        return bad(format!("box {b} has {} levels, expected {n}", bx.len()));
                    }
                    if let Some((k, _)) = bx.iter().enumerate().find(|(_, (lo, hi))| lo > hi) {
                        return bad(format!("box {b} has an empty interval at level {}", k + 1));
                    }
                }
            }
            Self::HalfSpaceFrom { f, n_f } => {
                if *n_f == 0 {
                    return bad("n_f must be >= 1".into());
                }
                if !f.eval(*n_f).is_finite() {
                    return bad(format!("boundary {f} is not finite at n_f = {n_f}"));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for TargetSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(",");
        match self {
            Self::SumBand { lower, upper } => write!(
                f,
                "band:{};{}",
                join(&mut lower.iter().map(|x| x.to_string())),
                join(&mut upper.iter().map(|x| x.to_string()))
            ),
            Self::Box { q } => write!(f, "box:{}", join(&mut q.iter().map(format_rational))),
            Self::UnionOfBoxes { boxes } => {
                let parts: Vec<String> = boxes
                    .iter()
                    .map(|b| {
                        b.iter()
                            .map(|(lo, hi)| format!("[{},{}]", format_rational(lo), format_rational(hi)))
                            .collect::<Vec<_>>()
                            .join("x")
                    })
                    .collect();
                write!(f, "union:{}", parts.join("|"))
            }
            Self::HalfSpaceFrom { f: g, n_f } => write!(f, "half:{n_f}:{g}"),
        }
    }
}

/// `band:l1,l2,..;u1,u2,..` (`inf`, `-inf` allowed), `box:q1,q2,..`,
/// `union:[a,b]x[c,d]|[e,f]x[g,h]`, `half:n_f:<boundary>`, `nonneg`,
/// `counterexample:ε`.
impl FromStr for TargetSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |why: &str| Error::InvalidTarget(format!("`{s}`: {why}"));
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        let floats = |t: &str| -> Result<Vec<f64>> {
            t.split(',')
                .filter(|x| !x.trim().is_empty())
                .map(|x| x.trim().parse::<f64>().map_err(|_| bad("bad number")))
                .collect()
        };
        let target = match head {
            "nonneg" => Self::nonnegative_sums(),
            "band" => {
                let (l, u) = rest.split_once(';').ok_or_else(|| bad("expected lower;upper"))?;
                Self::SumBand { lower: floats(l)?, upper: floats(u)? }
            }
            "box" => Self::Box {
                q: rest.split(',').map(parse_rational).collect::<Result<_>>()?,
            },
            "union" => {
                let mut boxes = Vec::new();
                for part in rest.split('|') {
                    let mut bx = Vec::new();
                    for iv in part.split('x') {
                        let body = iv
                            .trim()
                            .strip_prefix('[')
                            .and_then(|t| t.strip_suffix(']'))
                            .ok_or_else(|| bad("intervals are written [a,b]"))?;
                        let (a, b) = body.split_once(',').ok_or_else(|| bad("intervals are written [a,b]"))?;
                        bx.push((parse_rational(a)?, parse_rational(b)?));
                    }
                    boxes.push(bx);
                }
                Self::UnionOfBoxes { boxes }
            }
            "half" => {
                let (n_f, g) = rest.split_once(':').ok_or_else(|| bad("expected half:n_f:boundary"))?;
                Self::HalfSpaceFrom {
                    f: g.parse()?,
                    n_f: n_f.trim().parse().map_err(|_| bad("bad n_f"))?,
                }
            }
            "counterexample" => Self::counterexample(&parse_rational(rest)?)?,
            _ => return Err(bad("unknown target kind")),
        };
        target.validate()?;
        Ok(target)
    }
}

/// Per-level transition table over reachable states.
///
/// `states[k]` lists the states alive after `k` coordinates (sorted);
/// `rows[k][i]` is the law of the next state from `states[k][i]`: the dead
/// mass and the alive successors as indices into `states[k + 1]`.
#[derive(Clone, Debug)]
pub(crate) struct Table<S> {
    pub states: Vec<Vec<i64>>,
    pub rows: Vec<Vec<Row<S>>>,
    /// Coordinate symbols per level in increasing coordinate order, with
    /// their successor index (or `None` when the prefix dies).
    pub symbols: Vec<Vec<Vec<(f64, S, Option<u32>)>>>,
}

#[derive(Clone, Debug)]
pub(crate) struct Row<S> {
    pub dead: S,
    pub alive: Vec<(u32, S)>,
}

impl<S: Scalar> Table<S> {
    pub fn depth(&self) -> usize {
        self.rows.len()
    }
}

/// Default cap on tracked `(level, state)` pairs.
pub const STATE_BUDGET: usize = 2_000_000;

enum Rule {
    Sum { lo: Vec<i64>, hi: Vec<i64> },
    Mask { masks: Vec<Vec<u64>> },
}

impl Rule {
    fn step(&self, state: i64, k: usize, symbol: i64) -> Option<i64> {
        match self {
            Self::Sum { lo, hi } => {
                let next = state.checked_add(symbol)?;
                (lo[k] <= next && next <= hi[k]).then_some(next)
            }
            Self::Mask { masks } => {
                let next = state as u64 & masks[k][symbol as usize];
                (next != 0).then_some(next as i64)
            }
        }
    }
}

fn prob<S: Scalar>(p: f64, exact: Option<&BigRational>) -> Result<S> {
    match exact {
        Some(r) => Ok(S::from_rational(r)),
        None if S::EXACT => Err(Error::NotExact("law probabilities are not rational".into())),
        None => Ok(S::from_f64(p)),
    }
}

/// Coordinate atoms per level: `(symbol, coordinate value for ordering, prob)`.
type Atoms<S> = Vec<Vec<(i64, f64, S)>>;

fn sum_rule<S: Scalar>(
    law: &IncrementLaw,
    n: usize,
    bound: impl Fn(usize) -> (f64, f64),
) -> Result<(Rule, Atoms<S>)> {
    let lat = law.require_lattice()?;
    let unit = lat.unit();
    let exact = lat.exact_probs();
    let mut atoms = Vec::new();
    for (i, (v, p)) in lat.atoms().enumerate() {
        if p > 0.0 {
            atoms.push((v, v as f64 * unit, prob::<S>(p, exact.map(|e| &e[i]))?));
        }
    }
    let (mut lo, mut hi) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for k in 0..n {
        let (l, u) = bound(k + 1);
        lo.push(if l == f64::NEG_INFINITY { i64::MIN } else { lattice_barrier(l, unit) });
        hi.push(if u == f64::INFINITY { i64::MAX } else { (u / unit + 1e-12).floor() as i64 });
    }
    Ok((Rule::Sum { lo, hi }, vec![atoms; n]))
}

fn box_rule<S: Scalar>(q: &[BigRational], n: usize) -> (Rule, Atoms<S>) {
    let atoms = q[..n]
        .iter()
        .map(|qk| {
            let mut row = Vec::new();
            if !qk.is_zero() {
                row.push((0, 0.0, S::from_rational(qk)));
            }
            if !qk.is_one() {
                row.push((1, 1.0, S::from_rational(&(ratio(1, 1) - qk))));
            }
            row
        })
        .collect();
    (Rule::Mask { masks: vec![vec![1, 0]; n] }, atoms)
}

fn union_rule<S: Scalar>(law: &IncrementLaw, boxes: &[Vec<Interval>], n: usize) -> Result<(Rule, Atoms<S>)> {
    let mut masks = Vec::with_capacity(n);
    let mut atoms = Vec::with_capacity(n);
    let contains = |b: &[Interval], k: usize, x: &BigRational| &b[k].0 <= x && x <= &b[k].1;
    for k in 0..n {
        let mut level_masks = Vec::new();
        let mut level_atoms = Vec::new();
        if let Some(lat) = law.as_lattice() {
            // every atom is its own cell
            let exact = lat.exact_probs();
            for (i, (v, p)) in lat.atoms().enumerate() {
                let x = BigRational::from_float(v as f64 * lat.unit()).expect("finite");
                let mask = boxes
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| contains(b, k, &x))
                    .fold(0u64, |m, (j, _)| m | 1 << j);
                if p > 0.0 {
                    level_atoms.push((level_masks.len() as i64, rational_to_f64(&x), prob::<S>(p, exact.map(|e| &e[i]))?));
                    level_masks.push(mask);
                }
            }
        } else {
            // continuous law: cells between consecutive endpoints
            let mut cuts: Vec<BigRational> = boxes.iter().flat_map(|b| [b[k].0.clone(), b[k].1.clone()]).collect();
            cuts.sort();
            cuts.dedup();
            let cdf = |x: Option<&BigRational>| -> Result<(f64, Option<BigRational>)> {
                match (law, x) {
                    (IncrementLaw::Uniform01, Some(x)) => {
                        let c = x.clone().max(ratio(0, 1)).min(ratio(1, 1));
                        Ok((rational_to_f64(&c), Some(c)))
                    }
                    (IncrementLaw::Uniform01, None) => Ok((1.0, Some(ratio(1, 1)))),
                    (_, Some(x)) => Ok((law.cdf(rational_to_f64(x))?, None)),
                    (_, None) => Ok((1.0, None)),
                }
            };
            let mut prev = (0.0, matches!(law, IncrementLaw::Uniform01).then(|| ratio(0, 1)));
            for i in 0..=cuts.len() {
                let next = cdf(cuts.get(i))?;
                let mask = if i == 0 || i == cuts.len() {
                    0
                } else {
                    let mid = (&cuts[i - 1] + &cuts[i]) / ratio(2, 1);
                    boxes
                        .iter()
                        .enumerate()
                        .filter(|(_, b)| contains(b, k, &mid))
                        .fold(0u64, |m, (j, _)| m | 1 << j)
                };
                let p = next.0 - prev.0;
                let exact = match (&next.1, &prev.1) {
                    (Some(a), Some(b)) => Some(a - b),
                    _ => None,
                };
                let positive = exact.as_ref().map_or(p > 0.0, |e| e > &ratio(0, 1));
                if positive {
                    let order = cuts.get(i).map_or(f64::INFINITY, rational_to_f64);
                    level_atoms.push((level_masks.len() as i64, order, prob::<S>(p, exact.as_ref())?));
                    level_masks.push(mask);
                }
                prev = next;
            }
        }
        masks.push(level_masks);
        atoms.push(level_atoms);
    }
    Ok((Rule::Mask { masks }, atoms))
}

/// Compile `target` restricted to its first `n` coordinates.
pub(crate) fn compile<S: Scalar>(target: &TargetSet, law: &IncrementLaw, n: usize) -> Result<Table<S>> {
    compile_with_budget(target, law, n, STATE_BUDGET)
}

pub(crate) fn compile_with_budget<S: Scalar>(
    target: &TargetSet,
    law: &IncrementLaw,
    n: usize,
    budget: usize,
) -> Result<Table<S>> {
    target.validate()?;
    if let Some(len) = target.len() {
        if len < n {
            return Err(Error::InvalidTarget(format!("target constrains {len} levels, {n} needed")));
        }
    }
    let (rule, atoms, initial) = match target {
        TargetSet::SumBand { lower, upper } => {
            let (r, a) = sum_rule::<S>(law, n, |k| (lower[k - 1], upper[k - 1]))?;
            (r, a, 0)
        }
        TargetSet::HalfSpaceFrom { f, n_f } => {
            let (r, a) = sum_rule::<S>(law, n, |k| {
                (if k >= *n_f { f.eval(k) } else { f64::NEG_INFINITY }, f64::INFINITY)
            })?;
            (r, a, 0)
        }
        TargetSet::Box { q } => {
            let (r, a) = box_rule::<S>(q, n);
            (r, a, 1)
        }
        TargetSet::UnionOfBoxes { boxes } => {
            let (r, a) = union_rule::<S>(law, boxes, n)?;
            let all = if boxes.len() == 64 { u64::MAX } else { (1u64 << boxes.len()) - 1 };
            (r, a, all as i64)
        }
    };
    let mut states = vec![vec![initial]];
    let mut rows = Vec::with_capacity(n);
    let mut symbols = Vec::with_capacity(n);
    let mut total = 1usize;
    for k in 0..n {
        let mut next: BTreeMap<i64, u32> = BTreeMap::new();
        let mut raw: Vec<Vec<(f64, S, Option<i64>)>> = Vec::new();
        for &s in &states[k] {
            let row: Vec<_> = atoms[k]
                .iter()
                .map(|(sym, order, p)| (*order, p.clone(), rule.step(s, k, *sym)))
                .collect();
            for (_, _, t) in &row {
                if let Some(t) = t {
                    next.insert(*t, 0);
                }
            }
            raw.push(row);
        }
        total += next.len();
        if total > budget {
            let per_level = next.len().max(1);
            return Err(Error::StateSpaceTooLarge { estimate: total + per_level * (n - k - 1), budget });
        }
        for (i, v) in next.values_mut().enumerate() {
            *v = i as u32;
        }
        let mut level_rows = Vec::with_capacity(raw.len());
        let mut level_syms = Vec::with_capacity(raw.len());
        for row in raw {
            let mut dead = S::zero();
            let mut alive: BTreeMap<u32, S> = BTreeMap::new();
            let mut syms = Vec::with_capacity(row.len());
            for (order, p, t) in row {
                let idx = t.map(|t| next[&t]);
                match idx {
                    None => dead = dead + p.clone(),
                    Some(j) => {
                        let e = alive.entry(j).or_insert_with(S::zero);
                        *e = e.clone() + p.clone();
                    }
                }
                syms.push((order, p, idx));
            }
            syms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("ordered coordinates"));
            level_rows.push(Row { dead, alive: alive.into_iter().collect() });
            level_syms.push(syms);
        }
        states.push(next.into_keys().collect());
        rows.push(level_rows);
        symbols.push(level_syms);
    }
    Ok(Table { states, rows, symbols })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for s in [
            "band:0,0,-inf;inf,5,inf",
            "box:1,99/100,97/99",
            "union:[0,1/2]x[1/50,1]|[1/2,1]x[0,1]",
            "half:3:pow:1:0.25",
        ] {
            let t: TargetSet = s.parse().unwrap();
            assert_eq!(t.to_string().parse::<TargetSet>().unwrap(), t, "{s}");
        }
        assert!("box:3/2".parse::<TargetSet>().is_err());
        assert!("band:1;0".parse::<TargetSet>().is_err());
        let c: TargetSet = "counterexample:1/100".parse().unwrap();
        assert_eq!(c.len(), Some(3));
    }

    #[test]
    fn counterexample_cells_are_exact() {
        let t = TargetSet::counterexample(&ratio(1, 100)).unwrap();
        let table = compile::<BigRational>(&t, &IncrementLaw::Uniform01, 3).unwrap();
        // level 1: [0,1/2] keeps box 0, [1/2,1] keeps box 1
        assert_eq!(table.states[1], vec![1, 2]);
        let r = &table.rows[1][0];
        assert_eq!(r.dead, ratio(1, 50));
        assert!(compile::<BigRational>(&t, &IncrementLaw::gaussian(0.0, 1.0).unwrap(), 3).is_err());
        assert!(compile::<f64>(&t, &IncrementLaw::gaussian(0.0, 1.0).unwrap(), 3).is_ok());
    }

    #[test]
    fn budget_is_enforced() {
        let t = TargetSet::nonnegative_sums();
        let e = compile_with_budget::<f64>(&t, &IncrementLaw::rademacher(), 100, 50).unwrap_err();
        assert!(matches!(e, Error::StateSpaceTooLarge { .. }));
        let e = compile::<f64>(&t, &IncrementLaw::gaussian(0.0, 1.0).unwrap(), 4).unwrap_err();
        assert!(matches!(e, Error::NeedsQuantization { .. }));
    }
}
