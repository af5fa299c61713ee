//! The acceptance battery. Every criterion is an executable check with its
//! tolerance pinned here; seeds are fixed so each run is reproducible.

use std::f64::consts::PI;
use std::time::Instant;

use num::BigRational;
use rand::Rng;

use rwre_core::gauge::{capacity_energy, capacity_network, rp_symmetric, Gauge};
use rwre_core::law::{IncrementLaw, Lattice};
use rwre_core::network::{bottleneck_bound, effective_conductance, sample_environment};
use rwre_core::percolation::{
    certified_gauge, marginals, moment_bounds, psi_exact, psi_symmetric, survival_exact, theorem42_chain, TargetSet,
    CHAIN_TOLERANCE,
};
use rwre_core::rng::{derive_seed, CounterRng};
use rwre_core::rwre::{
    conductance_scaling_mc, decode_sequence, dirichlet_exit_prob, equivalence_test, polya_sequence_prob, power_growth,
    stable_ray_decay, ScalingVerdict,
};
use rwre_core::scalar::{parse_rational, ratio};
use rwre_core::tree::{ExplicitTree, GrowthProfile};
use rwre_core::walk1d::{
    conditional_moment_grid, hitting_tail_grid, scan_n_f, stay_above_grid, BoundaryFn, DEFAULT_CAP_MULTIPLIER,
    N_F_FLATNESS,
};

use crate::commands::{Counterexample, Experiment};
use crate::emit::Output;

pub const CRITERIA: usize = 15;

/// Criteria known to be unattainable as stated. Their line still reads FAIL;
/// `analysed` records whether the measured values match the analysis of why.
pub const KNOWN_FAILURES: &[usize] = &[7];

const K: f64 = DEFAULT_CAP_MULTIPLIER;

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
    pub analysed: Option<bool>,
}

impl Outcome {
    pub fn status(&self) -> &'static str {
        if self.pass { "PASS" } else { "FAIL" }
    }

    pub fn line(&self) -> String {
        format!("{} {:>2} {} [{:.1}s]: {}", self.status(), self.id, self.name, self.seconds, self.detail)
    }

    /// A failure that is neither expected nor explained.
    pub fn unexpected(&self) -> bool {
        !self.pass && !(KNOWN_FAILURES.contains(&self.id) && self.analysed == Some(true))
    }
}

struct Check {
    pass: bool,
    detail: String,
    analysed: Option<bool>,
}

fn check(pass: bool, detail: String) -> Result<Check, String> {
    Ok(Check { pass, detail, analysed: None })
}

type Criterion = (&'static str, fn() -> Result<Check, String>);

fn table() -> [Criterion; CRITERIA] {
    [
        ("counterexample exactness", c1),
        ("symmetrization chain", c2),
        ("Feller asymptotics", c3),
        ("convergent boundary", c4),
        ("divergent boundary", c5),
        ("conditional second moment", c6),
        ("hitting-tail sandwich", c7),
        ("bottleneck bound", c8),
        ("capacity consistency", c9),
        ("second-moment bounds", c10),
        ("transience dichotomy", c11),
        ("urn equivalence", c12),
        ("Psi consistency", c13),
        ("stable decay", c14),
        ("determinism", c15),
    ]
}

pub fn run_suite(ids: &[usize], mut on_done: impl FnMut(&Outcome)) -> Vec<Outcome> {
    let all = table();
    ids.iter()
        .map(|&id| {
            let (name, f) = all[id - 1];
            let start = Instant::now();
            let result = f();
            let seconds = start.elapsed().as_secs_f64();
            let o = match result {
                Ok(c) => Outcome { id, name, pass: c.pass, detail: c.detail, seconds, analysed: c.analysed },
                Err(e) => Outcome { id, name, pass: false, detail: format!("error: {e}"), seconds, analysed: None },
            };
            on_done(&o);
            o
        })
        .collect()
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn c1() -> Result<Check, String> {
    let start = Instant::now();
    let mut params = Counterexample { eps: Some("0.01".into()) };
    params.fill();
    let Output::Json(v) = params.execute(None).map_err(err)?.output else {
        return Err("expected json".into());
    };
    let seconds = start.elapsed().as_secs_f64();
    let rational = |key: &str| -> Result<BigRational, String> {
        v[key].as_str().ok_or(format!("missing {key}")).and_then(|s| parse_rational(s).map_err(err))
    };
    let (p_b, p_sb) = (rational("p_b")?, rational("p_sb")?);
    let pass = p_b == ratio(124_971, 125_000)
        && p_b == rational("p_b_closed_form")?
        && p_sb <= ratio(9997, 10_000)
        && p_sb < p_b
        && seconds < 1.0;
    check(pass, format!("P(B)={p_b} P(S(B))={p_sb} ({:.17}) in {seconds:.3}s", v["p_sb_float"].as_f64().unwrap_or(f64::NAN)))
}

fn random_tree(rng: &mut CounterRng, depth: usize) -> ExplicitTree {
    let mut levels = Vec::new();
    let mut width = 1;
    for _ in 0..depth {
        let row: Vec<usize> = (0..width).map(|_| rng.random_range(1..=3)).collect();
        width = row.iter().sum();
        levels.push(row);
    }
    ExplicitTree::from_levels(&levels).expect("valid levels")
}

fn random_lattice(rng: &mut CounterRng) -> IncrementLaw {
    let k = rng.random_range(2..=3);
    let mut values: Vec<i64> = Vec::new();
    while values.len() < k {
        let v = rng.random_range(-2..=2);
        if !values.contains(&v) {
            values.push(v);
        }
    }
    let weights: Vec<i64> = (0..k).map(|_| rng.random_range(1..=4)).collect();
    let total: i64 = weights.iter().sum();
    let probs = weights.iter().map(|w| ratio(*w, total)).collect();
    IncrementLaw::Lattice(Lattice::exact(1.0, values, probs).expect("valid lattice"))
}

fn random_target(rng: &mut CounterRng, depth: usize) -> TargetSet {
    if rng.random_bool(0.4) {
        TargetSet::Box { q: (0..depth).map(|_| ratio(rng.random_range(1..=8), 8)).collect() }
    } else {
        let lower: Vec<f64> = (0..depth)
            .map(|_| if rng.random_bool(0.3) { f64::NEG_INFINITY } else { rng.random_range(-2..=1) as f64 })
            .collect();
        let upper = lower
            .iter()
            .map(|l| if rng.random_bool(0.5) { f64::INFINITY } else { l.max(-2.0) + rng.random_range(1..=4) as f64 })
            .collect();
        TargetSet::SumBand { lower, upper }
    }
}

fn c2() -> Result<Check, String> {
    let (mut done, mut draws, mut swaps, mut worst) = (0, 0u64, 0, f64::NEG_INFINITY);
    while done < 500 {
        let mut rng = CounterRng::new(2024, draws);
        draws += 1;
        let depth = rng.random_range(1..=4);
        let tree = random_tree(&mut rng, depth);
        let law = random_lattice(&mut rng);
        let target = random_target(&mut rng, depth);
        // symmetrization needs positive marginals; redraw otherwise
        if marginals(&law, &target, depth).map_err(err)?.floats.last().copied().unwrap_or(0.0) == 0.0 {
            continue;
        }
        let r = theorem42_chain(&tree, &law, &target).map_err(err)?;
        let chain = [r.p_b_tree, r.p_b_sym, r.p_sb_sym, r.two_over_rp];
        worst = chain.windows(2).map(|w| w[0] - w[1]).fold(worst, f64::max);
        if !r.chain_holds {
            return check(false, format!("instance {draws}: {chain:?}"));
        }
        swaps += r.counterexample_to_swap as usize;
        done += 1;
    }
    check(true, format!("500 instances ({draws} drawn), largest step {worst:.3e} <= {CHAIN_TOLERANCE:e}; {swaps} with P(S(B);Γ) < P(B;Γ)"))
}

fn c3() -> Result<Check, String> {
    let n = 4096usize;
    let b = hitting_tail_grid(&Lattice::rademacher(), 0.0, &[n], K).map_err(err)?[0];
    // P(T_0 > 2m) = C(2m, m) 4^{-m}
    let m = n / 2;
    let exact: f64 = (1..=m).map(|i| (m + i) as f64 / (4 * i) as f64).product();
    let scaled = (n as f64).sqrt() * b.mid();
    let feller = (2.0 / PI).sqrt();
    let rel = (scaled / feller - 1.0).abs();
    check(
        rel <= 0.03 && b.contains(exact, 1e-12),
        format!("sqrt(n) P(T_0>n) = {scaled:.6} vs {feller:.6} (rel {rel:.4}); DP {:.12e} vs binomial {exact:.12e}", b.mid()),
    )
}

fn normalized(f: &BoundaryFn, grid: &[usize]) -> Result<(usize, Vec<f64>), String> {
    let lattice = Lattice::rademacher();
    let n_f = scan_n_f(&lattice, f, grid[0], N_F_FLATNESS, K).map_err(err)?;
    let b = stay_above_grid(&lattice, f, n_f, grid, K).map_err(err)?;
    Ok((n_f, grid.iter().zip(b).map(|(&n, b)| (n as f64).sqrt() * b.mid()).collect()))
}

fn c4() -> Result<Check, String> {
    let (n_f, s) = normalized(&BoundaryFn::Power { a: 1.0, b: 0.25 }, &[1 << 10, 1 << 17])?;
    check(s[1] >= 0.5 * s[0], format!("n_f={n_f}: s(2^10)={:.6} s(2^17)={:.6} ratio {:.4} >= 0.5", s[0], s[1], s[1] / s[0]))
}

fn c5() -> Result<Check, String> {
    let (n_f, s) = normalized(&BoundaryFn::Power { a: 1.0, b: 0.5 }, &[1 << 10, 1 << 16])?;
    check(s[0] >= 2.0 * s[1], format!("n_f={n_f}: s(2^10)={:.6} s(2^16)={:.6} factor {:.3} >= 2", s[0], s[1], s[0] / s[1]))
}

fn c6() -> Result<Check, String> {
    let grid = [256, 1024, 4096];
    let m = conditional_moment_grid(&Lattice::rademacher(), &grid, 2, K).map_err(err)?;
    let r: Vec<f64> = grid.iter().zip(&m).map(|(&n, v)| v / n as f64).collect();
    let pass = r.windows(2).all(|w| w[0] < w[1]) && (1.5..=2.05).contains(&r[2]);
    check(pass, format!("E(S_n^2|T_0>n)/n = {:.5}, {:.5}, {:.5} at n = 2^8, 2^10, 2^12", r[0], r[1], r[2]))
}

fn c7() -> Result<Check, String> {
    let n = 4096usize;
    let lattice = Lattice::rademacher();
    let feller = (2.0 / PI).sqrt();
    let (mut pass, mut analysed, mut parts) = (true, true, Vec::new());
    for h in [1.0, 2.0, 4.0] {
        let b = hitting_tail_grid(&lattice, h, &[n], K).map_err(err)?[0];
        let s = (n as f64).sqrt() * b.mid();
        pass &= (0.55..=1.1).contains(&(s / h));
        // T_h waits for S < -h, i.e. S <= -(h+1) on the integers
        analysed &= ((s / (h + 1.0)) / feller - 1.0).abs() <= 0.05;
        parts.push(format!("h={h}: {:.4}", s / h));
    }
    Ok(Check {
        pass,
        detail: format!(
            "sqrt(n) P(T_h>n)/h {} (band [0.55, 1.1]); strict T_h makes this ~ sqrt(2/pi)(h+1)/h, {}",
            parts.join(", "),
            if analysed { "which matches within 5%" } else { "which does NOT match" }
        ),
        analysed: Some(analysed),
    })
}

fn c8() -> Result<Check, String> {
    let mut worst: f64 = 0.0;
    for i in 0..1000u64 {
        let mut rng = CounterRng::new(8, i);
        let depth = rng.random_range(1..=6);
        let tree = random_tree(&mut rng, depth);
        let law = match i % 3 {
            0 => IncrementLaw::rademacher(),
            1 => IncrementLaw::gaussian(0.0, 1.0).map_err(err)?,
            _ => random_lattice(&mut rng),
        };
        let cond = sample_environment(&tree, &law, derive_seed(8, i));
        let c = effective_conductance(&tree, &cond);
        let (b, _) = bottleneck_bound(&tree, &cond).map_err(err)?;
        worst = worst.max(c / b);
        if c > b * (1.0 + 1e-12) {
            return check(false, format!("instance {i}: C_eff {c} > bound {b}"));
        }
    }
    check(true, format!("1000 instances, max C_eff / bound = {worst:.6}"))
}

fn c9() -> Result<Check, String> {
    let gauges = [Gauge::Power(0.5), Gauge::Exp(std::f64::consts::LN_2), Gauge::Power(1.0)];
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let mut rng = CounterRng::new(9, i);
        let depth = rng.random_range(1..=6);
        let tree = random_tree(&mut rng, depth);
        let g = &gauges[i as usize % 3];
        let net = capacity_network(&tree, g).map_err(err)?;
        let en = capacity_energy(&tree, g, 1e-9, 200_000).map_err(err)?;
        let rel = (en.capacity - net).abs() / net;
        worst = worst.max(rel);
        if rel > 1e-6 {
            return check(false, format!("tree {i}: network {net} energy {}", en.capacity));
        }
    }
    let mut worst_rp: f64 = 0.0;
    for i in 0..100u64 {
        let mut rng = CounterRng::new(90, i);
        let depth = rng.random_range(1..=6);
        let growth: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=3)).collect();
        let tree = ExplicitTree::symmetric(&growth, depth).map_err(err)?;
        let profile = GrowthProfile::from_integers(&growth).map_err(err)?;
        let g = &gauges[i as usize % 3];
        let cap = capacity_network(&tree, g).map_err(err)?;
        let rp = rp_symmetric(&profile, g).map_err(err)?;
        let rel = (rp.bound - 2.0 * cap).abs() / (2.0 * cap);
        worst_rp = worst_rp.max(rel);
        if rel > 1e-12 {
            return check(false, format!("symmetric {growth:?}: 2/R_p {} vs 2 Cap {}", rp.bound, 2.0 * cap));
        }
    }
    check(true, format!("max relative gap network/energy {worst:.2e} (<= 1e-6), 2/R_p vs 2 Cap {worst_rp:.2e} (<= 1e-12)"))
}

fn c10() -> Result<Check, String> {
    let tree = ExplicitTree::full(2, 8);
    let cases = [
        ("Bernoulli q=3/4", IncrementLaw::Uniform01, TargetSet::Box { q: vec![ratio(3, 4); 8] }),
        ("Rademacher nonnegative", IncrementLaw::rademacher(), TargetSet::nonnegative_sums()),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, law, target) in cases {
        let s = survival_exact(&tree, &law, &target).map_err(err)?;
        let g = certified_gauge(&law, &target, 8).map_err(err)?;
        let b = moment_bounds(&tree, &s.marginals, &Gauge::Tabulated(g[1..].to_vec())).map_err(err)?;
        pass &= b.second_moment_lower <= s.survival + 1e-12 && s.survival <= b.first_moment_upper + 1e-12;
        parts.push(format!("{name}: {:.6} <= {:.6} <= {:.6}", b.second_moment_lower, s.survival, b.first_moment_upper));
    }
    check(pass, parts.join("; "))
}

fn c11() -> Result<Check, String> {
    let law = IncrementLaw::rademacher();
    let depths = [16, 64, 256];
    let path = conductance_scaling_mc(&[1; 256], &law, &depths, 200, 11).map_err(err)?;
    let quad = conductance_scaling_mc(&power_growth(2.0, 256).map_err(err)?, &law, &depths, 200, 11).map_err(err)?;
    check(
        path.verdict == ScalingVerdict::RecurrentLike && quad.verdict == ScalingVerdict::TransientLike,
        format!(
            "path median ratio {:.3e} (<= 0.05), quadratic {:.4} (>= 0.25); medians {:.4e} -> {:.4e} and {:.4} -> {:.4}",
            path.median_ratio,
            quad.median_ratio,
            path.rows[0].conductance_median,
            path.rows[2].conductance_median,
            quad.rows[0].conductance_median,
            quad.rows[2].conductance_median
        ),
    )
}

fn c12() -> Result<Check, String> {
    let mut sequences = 0;
    for d in 1..=5usize {
        for k in 0..=6usize {
            for i in 0..d.pow(k as u32) {
                let seq = decode_sequence(d, k, i);
                if polya_sequence_prob(d, &seq).map_err(err)? != dirichlet_exit_prob(d, &seq).map_err(err)? {
                    return check(false, format!("urn and mixture differ at d={d} {seq:?}"));
                }
                sequences += 1;
            }
        }
    }
    let r = equivalence_test(2, 3, 100_000, 12).map_err(err)?;
    let same = r.first_two_equal.ok_or("prefix too short")?;
    let pass = r.pass && same.within(2.0 / 3.0, 3.0);
    check(
        pass,
        format!(
            "{sequences} sequences exact; chi-square p = {:.4} (reinforced), {:.4} (exponential); P(first two equal) = {:.5} ± {:.5}",
            r.reinforced.p_value, r.environment.p_value, same.estimate, same.stderr
        ),
    )
}

fn c13() -> Result<Check, String> {
    let mut worst: f64 = 0.0;
    for i in 0..200u64 {
        let mut rng = CounterRng::new(13, i);
        let depth = rng.random_range(1..=4);
        let growth: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=3)).collect();
        let tree = ExplicitTree::symmetric(&growth, depth).map_err(err)?;
        let profile = GrowthProfile::from_integers(&growth).map_err(err)?;
        let law = random_lattice(&mut rng);
        let target = random_target(&mut rng, depth);
        let exact = survival_exact(&tree, &law, &target).map_err(err)?.survival;
        let psi = psi_symmetric(&profile, &law, &target, depth).map_err(err)?;
        worst = worst.max((1.0 - psi - exact).abs());
    }
    let binary = GrowthProfile::from_integers(&[2, 2]).map_err(err)?;
    let psi = psi_exact(&binary, &IncrementLaw::rademacher(), &TargetSet::nonnegative_sums(), 2)
        .map_err(err)?
        .ok_or("binary profile is integral")?;
    let value = ratio(1, 1) - psi;
    check(worst <= 1e-12 && value == ratio(3, 4), format!("max |1 - Psi - P| = {worst:.2e} over 200; binary depth 2 gives {value}"))
}

fn c14() -> Result<Check, String> {
    let r = stable_ray_decay(1.5, 1.0, &[10, 20, 40, 80], 1_000_000, 14).map_err(err)?;
    let slope = r.slope.ok_or("fewer than two nonzero cells")?;
    let cells: Vec<String> = r.rows.iter().map(|c| format!("{:.3e}", c.estimate)).collect();
    check(
        (-2.0..=-1.0).contains(&slope),
        format!("slope {slope:.4} ± {:.4} over P = [{}]", r.slope_stderr.unwrap_or(f64::NAN), cells.join(", ")),
    )
}

/// Small runs of every subcommand, each at two worker counts.
pub fn determinism_cases() -> Vec<Vec<&'static str>> {
    vec![
        vec!["walk1d", "--grid", "64,256"],
        vec!["walk1d", "--mode", "mc", "--law", "gauss:0:1", "--boundary", "pow:1:0.25", "--grid", "16,64", "--episodes", "20000", "--seed", "7"],
        vec!["capacity", "--offspring", "1,1,1", "--depth", "5", "--seed", "3"],
        vec!["network", "--offspring", "1,1,1", "--depth", "5", "--environments", "50", "--seed", "3"],
        vec!["percolate", "--growth", "2,3,2", "--target", "band:-1,-1,0;2,2,2"],
        vec!["thm42-check", "--growth", "2,1,2", "--target", "box:1/2,3/4,1/3", "--law", "uniform"],
        vec!["counterexample", "--eps", "1/50"],
        vec!["rwre", "--profile", "quadratic", "--depths", "4,16,32", "--environments", "40", "--seed", "5"],
        vec!["rwre", "--profile", "path", "--depths", "8,32", "--environments", "40", "--seed", "5", "--format", "json"],
        vec!["reinforced", "--degree", "3", "--prefix", "2", "--episodes", "20000", "--seed", "5"],
        vec!["stable", "--grid", "5,10,20", "--episodes", "50000", "--seed", "5"],
    ]
}

fn c15() -> Result<Check, String> {
    let dir = tempfile::tempdir().map_err(err)?;
    let mut compared = 0;
    for (i, case) in determinism_cases().into_iter().enumerate() {
        let mut outputs = Vec::new();
        for threads in ["1", "3"] {
            let out = dir.path().join(format!("case{i}-t{threads}.out"));
            let mut args = vec!["rwre".to_string()];
            args.extend(case.iter().map(|s| s.to_string()));
            args.extend(["--threads".into(), threads.into(), "--out".into(), out.display().to_string()]);
            let code = crate::run(&args);
            if code != 0 {
                return check(false, format!("`{}` exited with {code}", case.join(" ")));
            }
            if !crate::verify_artifact(&out).map_err(err)? {
                return check(false, format!("`{}`: digest does not verify", case.join(" ")));
            }
            outputs.push(std::fs::read(&out).map_err(err)?);
        }
        if outputs[0] != outputs[1] {
            return check(false, format!("`{}` differs between 1 and 3 threads", case.join(" ")));
        }
        compared += 1;
    }
    // the same run from a config file reproduces the flag run byte for byte
    let cfg = dir.path().join("stable.json");
    std::fs::write(&cfg, r#"{"command": "stable", "seed": 5, "grid": [5, 10, 20], "episodes": 50000}"#).map_err(err)?;
    let via_file = dir.path().join("from-config.out");
    let code = crate::run(["rwre", "stable", "--config", &cfg.display().to_string(), "--out", &via_file.display().to_string()]);
    let flag_run = dir.path().join(format!("case{}-t1.out", determinism_cases().len() - 1));
    let same = code == 0 && std::fs::read(&via_file).map_err(err)? == std::fs::read(&flag_run).map_err(err)?;
    check(same, format!("{compared} runs byte-identical at 1 and 3 threads, digests verified; config file run identical: {same}"))
}
