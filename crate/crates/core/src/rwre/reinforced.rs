//! Edge-reinforced walk, its urn description and the i.i.d. mixture
//! description of the exits from a single vertex.

use num::BigRational;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::par;
use crate::rng::{derive_seed, CounterRng};
use crate::scalar::ratio;
use crate::tree::ExplicitTree;
use crate::walk1d::McEstimate;

/// Edge weights of the reinforced walk, indexed by the lower endpoint.
///
/// On a tree the crossings of an edge alternate in direction, so every second
/// crossing completes an out-and-back pair. `pending[v]` marks an edge crossed
/// an odd number of times; its weight is raised when the pair completes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UrnState {
    pub weights: Vec<u64>,
    pub pending: Vec<bool>,
}

impl UrnState {
    pub fn new(vertices: usize) -> Self {
        Self { weights: vec![1; vertices], pending: vec![false; vertices] }
    }

    /// Record one crossing of the edge into `v`.
    pub fn cross(&mut self, v: usize) {
        if self.pending[v] {
            self.weights[v] += 1;
        }
        self.pending[v] = !self.pending[v];
    }

    /// Completed return trips on the edge into `v`.
    pub fn return_trips(&self, v: usize) -> u64 {
        self.weights[v] - 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReinforcedReport {
    pub steps: usize,
    pub root_visits: usize,
    pub max_depth: usize,
    pub position: usize,
    /// `exits[v]`: the edges used to leave `v`, in order; `0` is the parent
    /// edge and `j + 1` the edge to the `j`-th child.
    pub exits: Vec<Vec<u32>>,
    pub state: UrnState,
}

/// Run the reinforced walk from the root for `steps` steps; the walker
/// chooses a neighbour with probability proportional to the edge weight.
pub fn reinforced_episode(tree: &ExplicitTree, steps: usize, seed: u64) -> Result<ReinforcedReport> {
    if steps == 0 {
        return Err(Error::param("steps", "must be >= 1"));
    }
    if tree.len() < 2 {
        return Err(Error::InvalidTree("the walk needs at least one edge".into()));
    }
    let mut rng = CounterRng::new(seed, 0);
    let mut state = UrnState::new(tree.len());
    let mut exits = vec![Vec::new(); tree.len()];
    let (mut v, mut root_visits, mut max_depth) = (tree.root(), 0, 0);
    for _ in 0..steps {
        let kids = tree.children(v);
        let up = if v == tree.root() { 0 } else { state.weights[v] };
        let total = up + kids.clone().map(|c| state.weights[c]).sum::<u64>();
        let mut u = rng.random_range(0..total);
        let (next, edge, color) = if u < up {
            (tree.parent(v).expect("non-root"), v, 0)
        } else {
            u -= up;
            let mut pick = (kids.start, 1);
            for (j, c) in kids.enumerate() {
                if u < state.weights[c] {
                    pick = (c, j as u32 + 1);
                    break;
                }
                u -= state.weights[c];
            }
            (pick.0, pick.0, pick.1)
        };
        exits[v].push(color);
        state.cross(edge);
        v = next;
        if v == tree.root() {
            root_visits += 1;
        }
        max_depth = max_depth.max(tree.vertex_depth(v));
    }
    Ok(ReinforcedReport { steps, root_visits, max_depth, position: v, exits, state })
}

fn check_colors(d: usize, colors: &[usize]) -> Result<()> {
    if d == 0 {
        return Err(Error::param("d", "must be >= 1"));
    }
    if let Some(c) = colors.iter().find(|&&c| c == 0 || c > d) {
        return Err(Error::param("colors", format!("color {c} outside 1..={d}")));
    }
    Ok(())
}

/// Probability of drawing `colors` in order from an urn started with one ball
/// of each of `d` colors, each drawn ball returned with a copy.
pub fn polya_sequence_prob(d: usize, colors: &[usize]) -> Result<BigRational> {
    check_colors(d, colors)?;
    let mut w = vec![1i64; d + 1];
    let mut p = ratio(1, 1);
    for (t, &c) in colors.iter().enumerate() {
        p *= ratio(w[c], (d + t) as i64);
        w[c] += 1;
    }
    Ok(p)
}

fn factorial(n: usize) -> BigRational {
    (1..=n as i64).fold(ratio(1, 1), |acc, k| acc * ratio(k, 1))
}

/// `E Π_t p_{c_t}` for `p` uniform on the simplex, from the Dirichlet moment
/// formula `Π_c n_c! (d-1)! / (d-1+T)!`.
pub fn dirichlet_exit_prob(d: usize, colors: &[usize]) -> Result<BigRational> {
    check_colors(d, colors)?;
    let mut counts = vec![0usize; d + 1];
    for &c in colors {
        counts[c] += 1;
    }
    let num = counts.iter().fold(factorial(d - 1), |acc, &n| acc * factorial(n));
    Ok(num / factorial(d - 1 + colors.len()))
}

/// Colors of sequence number `index` among the `d^k` sequences, first color
/// most significant.
pub fn decode_sequence(d: usize, k: usize, mut index: usize) -> Vec<usize> {
    let mut out = vec![0; k];
    for slot in out.iter_mut().rev() {
        *slot = index % d + 1;
        index /= d;
    }
    out
}

fn encode_sequence(d: usize, colors: impl IntoIterator<Item = usize>) -> usize {
    colors.into_iter().fold(0, |acc, c| acc * d + (c - 1))
}

/// Largest number of cells in an equivalence test.
pub const MAX_CELLS: usize = 1024;
pub const SIGNIFICANCE: f64 = 0.001;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub pass: bool,
    pub counts: Vec<usize>,
}

fn chi_square(counts: Vec<usize>, probs: &[f64]) -> ChiSquare {
    let m: usize = counts.iter().sum();
    let statistic = counts
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * m as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = probs.len() - 1;
    let p_value = if dof == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(dof as f64).expect("dof >= 1").cdf(statistic)
    };
    ChiSquare { statistic, dof, p_value, pass: p_value >= SIGNIFICANCE, counts }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub degree: usize,
    pub prefix: usize,
    pub episodes: usize,
    /// Exact urn probability of each exit sequence, in lexicographic order.
    pub exact: Vec<String>,
    pub exact_float: Vec<f64>,
    /// The reinforced walk on a star with `degree` leaves.
    pub reinforced: ChiSquare,
    /// Exits drawn i.i.d. from weights `U_c / Σ U`, `U_c` unit exponentials.
    pub environment: ChiSquare,
    /// Reinforced walk: frequency of equal first two exits (urn value `2/(d+1)`).
    pub first_two_equal: Option<McEstimate>,
    pub significance: f64,
    pub pass: bool,
}

/// Compare the first `k` exits from the centre of a star with `d` leaves under
/// the reinforced walk and under a random environment with exponential edge
/// labels against the exact urn table.
pub fn equivalence_test(d: usize, k: usize, episodes: usize, seed: u64) -> Result<EquivalenceReport> {
    if d == 0 || k == 0 {
        return Err(Error::param("d", "degree and prefix length must be >= 1"));
    }
    let cells = (0..k).try_fold(1usize, |acc, _| acc.checked_mul(d).filter(|&c| c <= MAX_CELLS));
    let cells = cells.ok_or_else(|| Error::param("k", format!("d^k must be at most {MAX_CELLS}")))?;
    if episodes == 0 {
        return Err(Error::param("episodes", "must be >= 1"));
    }
    let exact: Vec<BigRational> = (0..cells)
        .map(|i| polya_sequence_prob(d, &decode_sequence(d, k, i)))
        .collect::<Result<_>>()?;
    let exact_float: Vec<f64> = exact.iter().map(crate::scalar::rational_to_f64).collect();
    let star = ExplicitTree::from_levels(&[vec![d]])?;
    let tally = |sim: &(dyn Fn(u64) -> Result<usize> + Sync)| -> Result<Vec<usize>> {
        let blocks = par::map_blocks(episodes, |range| -> Result<Vec<usize>> {
            let mut c = vec![0usize; cells];
            for i in range {
                c[sim(derive_seed(seed, i as u64))?] += 1;
            }
            Ok(c)
        });
        let mut total = vec![0usize; cells];
        for b in blocks {
            for (t, x) in total.iter_mut().zip(b?) {
                *t += x;
            }
        }
        Ok(total)
    };
    let reinforced = tally(&|s| {
        let r = reinforced_episode(&star, 2 * k - 1, s)?;
        Ok(encode_sequence(d, r.exits[0].iter().map(|&c| c as usize)))
    })?;
    let environment = tally(&|s| {
        let mut rng = CounterRng::new(derive_seed(s, 1), 0);
        let u: Vec<f64> = (0..d).map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = u.iter().sum();
        let draws = (0..k).map(|_| {
            let mut x = rng.random::<f64>() * total;
            for (j, w) in u.iter().enumerate() {
                if x < *w {
                    return j + 1;
                }
                x -= w;
            }
            d
        });
        Ok(encode_sequence(d, draws.collect::<Vec<_>>()))
    })?;
    let first_two_equal = (k >= 2).then(|| {
        let hits = (0..cells)
            .filter(|&i| {
                let seq = decode_sequence(d, k, i);
                seq[0] == seq[1]
            })
            .map(|i| reinforced[i])
            .sum();
        McEstimate::from_counts(hits, episodes)
    });
    let reinforced = chi_square(reinforced, &exact_float);
    let environment = chi_square(environment, &exact_float);
    Ok(EquivalenceReport {
        degree: d,
        prefix: k,
        episodes,
        exact: exact.iter().map(crate::scalar::format_rational).collect(),
        exact_float,
        pass: reinforced.pass && environment.pass,
        reinforced,
        environment,
        first_two_equal,
        significance: SIGNIFICANCE,
    })
}
