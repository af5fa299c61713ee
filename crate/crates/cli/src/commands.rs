//! One parameter set per subcommand. Every field is optional on the command
//! line and in config files; `fill` supplies the defaults, and the filled
//! set is what the config digest covers.

use std::path::PathBuf;

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use rwre_core::gauge::{capacity_energy, capacity_network, content_by_min_level, criterion_series, rp_symmetric, Gauge, SizeLaw};
use rwre_core::law::IncrementLaw;
use rwre_core::network::{bottleneck_bound, effective_conductance, escape_probability, sample_environment};
use rwre_core::percolation::{certified_gauge, counterexample, moment_bounds, survival_exact, theorem42_chain, TargetSet};
use rwre_core::rng::derive_seed;
use rwre_core::rwre::{conductance_scaling_mc, equivalence_test, power_growth, stable_ray_decay, stable_tail};
use rwre_core::scalar::parse_rational;
use rwre_core::tree::{ExplicitTree, TreeSpec};
use rwre_core::walk1d::{mc_stay_above_grid, scan_n_f, stay_above_grid, BoundaryFn, N_F_FLATNESS};

use crate::emit::{Output, Table};
use crate::error::CliError;
use crate::Format;

pub struct Run {
    pub output: Output,
    pub exit: i32,
    /// Extra manifest fields.
    pub manifest: Option<Value>,
}

impl From<Output> for Run {
    fn from(output: Output) -> Self {
        Run { output, exit: 0, manifest: None }
    }
}

pub trait Experiment: Serialize + DeserializeOwned + Default + Clone + Sync {
    const NAME: &'static str;
    /// Whether the results form a table (and so may be written as CSV).
    const TABLE: bool;
    fn fill(&mut self);
    fn needs_seed(&self) -> bool;
    fn execute(&self, seed: Option<u64>) -> Result<Run, CliError>;

    fn default_format() -> Format {
        if Self::TABLE { Format::Csv } else { Format::Json }
    }
}

fn set<T>(slot: &mut Option<T>, value: T) {
    slot.get_or_insert(value);
}

fn get<T: Clone>(slot: &Option<T>) -> T {
    slot.clone().expect("filled with a default")
}

fn law(spec: &str) -> Result<IncrementLaw, CliError> {
    spec.parse().map_err(CliError::param("law"))
}

fn target(spec: &str) -> Result<TargetSet, CliError> {
    let t: TargetSet = spec.parse().map_err(CliError::param("target"))?;
    t.validate().map_err(CliError::param("target"))?;
    Ok(t)
}

fn grid(name: &str, values: &[usize]) -> Result<(), CliError> {
    if values.is_empty() || values[0] == 0 || values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::config(name, "must be positive and strictly increasing"));
    }
    Ok(())
}

fn positive(name: &str, value: usize) -> Result<(), CliError> {
    if value == 0 {
        return Err(CliError::config(name, "must be >= 1"));
    }
    Ok(())
}

fn seed_of(seed: Option<u64>) -> u64 {
    seed.expect("checked by the dispatcher")
}

/// Where a finite tree comes from. Exactly one of `tree`, `growth` and
/// `offspring` is used; with none given the full binary tree of depth 4.
#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default)]
pub struct TreeSource {
    /// Tree file: {"children": [[...], ...], "depth": N}, child counts per level
    #[arg(long)]
    pub tree: Option<PathBuf>,
    /// Growth numbers of a spherically symmetric tree, e.g. 2,1,3
    #[arg(long, value_delimiter = ',')]
    pub growth: Option<Vec<usize>>,
    /// Galton-Watson offspring weights on 1, 2, .. children (uses the seed)
    #[arg(long, value_delimiter = ',')]
    pub offspring: Option<Vec<f64>>,
    /// Truncation depth
    #[arg(long)]
    pub depth: Option<usize>,
}

impl TreeSource {
    fn fill(&mut self) {
        if self.tree.is_none() && self.growth.is_none() && self.offspring.is_none() {
            self.growth = Some(vec![2; 4]);
        }
    }

    fn needs_seed(&self) -> bool {
        self.offspring.is_some()
    }

    fn build(&self, seed: Option<u64>) -> Result<ExplicitTree, CliError> {
        let given = [self.tree.is_some(), self.growth.is_some(), self.offspring.is_some()];
        if given.iter().filter(|&&b| b).count() != 1 {
            return Err(CliError::config("tree", "give exactly one of tree, growth, offspring"));
        }
        let tree = if let Some(path) = &self.tree {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config("tree", format!("cannot read {}: {e}", path.display())))?;
            let spec: TreeSpec = serde_json::from_str(&text).map_err(|e| CliError::config("tree", e))?;
            ExplicitTree::from_spec(&spec).map_err(CliError::param("tree"))?
        } else if let Some(g) = &self.growth {
            ExplicitTree::symmetric(g, self.depth.unwrap_or(g.len())).map_err(CliError::param("growth"))?
        } else {
            let depth = self.depth.ok_or_else(|| CliError::config("depth", "required with offspring"))?;
            let w = self.offspring.as_ref().expect("checked");
            ExplicitTree::galton_watson(w, depth, derive_seed(seed_of(seed), 0)).map_err(CliError::param("offspring"))?
        };
        match self.depth {
            Some(d) if d < tree.depth() => tree.truncate(d).map_err(CliError::param("depth")),
            Some(d) if d > tree.depth() => Err(CliError::config("depth", format!("tree has depth {}", tree.depth()))),
            _ => Ok(tree),
        }
    }
}

/// Boundary-crossing probabilities P(S_k >= f(k) for n_f <= k <= n)
#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default)]
pub struct Walk1d {
    /// Increment law: rademacher, lattice:-1:1/3,1:2/3, gauss:0:1, stable:1.5, logexp
    #[arg(long)]
    pub law: Option<String>,
    /// Boundary f: zero, pow:a:b, powlog:a:b:c, tab:f1,f2,..
    #[arg(long)]
    pub boundary: Option<String>,
    /// Horizons n
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    /// dp (exact, lattice laws) or mc
    #[arg(long)]
    pub mode: Option<String>,
    /// First constrained step; scanned when unset (dp) or 1 (mc)
    #[arg(long)]
    pub n_f: Option<usize>,
    /// DP state cap in standard deviations times sqrt(n)
    #[arg(long)]
    pub cap_multiplier: Option<f64>,
    /// Monte Carlo episodes
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Quantize a continuous law onto this many atoms for the DP
    #[arg(long)]
    pub quantize: Option<usize>,
}

impl Experiment for Walk1d {
    const NAME: &'static str = "walk1d";
    const TABLE: bool = true;

    fn fill(&mut self) {
        set(&mut self.law, "rademacher".into());
        set(&mut self.boundary, "zero".into());
        set(&mut self.grid, vec![1024, 4096]);
        set(&mut self.mode, "dp".into());
        set(&mut self.cap_multiplier, rwre_core::walk1d::DEFAULT_CAP_MULTIPLIER);
        set(&mut self.episodes, 100_000);
    }

    fn needs_seed(&self) -> bool {
        self.mode.as_deref() == Some("mc")
    }

    fn execute(&self, seed: Option<u64>) -> Result<Run, CliError> {
        let law = law(&get(&self.law))?;
        let f: BoundaryFn = get(&self.boundary).parse().map_err(CliError::param("boundary"))?;
        let grid_n = get(&self.grid);
        grid("grid", &grid_n)?;
        f.validate(*grid_n.last().expect("nonempty")).map_err(CliError::param("boundary"))?;
        let k = get(&self.cap_multiplier);
        let mut table = Table::new(&["n", "p_lower", "p_upper", "sqrt_n_p", "stderr"]);
        match get(&self.mode).as_str() {
            "dp" => {
                let lattice = match (law.as_lattice(), self.quantize) {
                    (Some(l), None) => l.clone(),
                    (_, Some(atoms)) => law.quantize(atoms).map_err(CliError::param("quantize"))?,
                    (None, None) => {
                        return Err(CliError::config("law", format!("{law} is not a lattice law; set quantize or use mode mc")))
                    }
                };
                let n_f = match self.n_f {
                    Some(n) => n,
                    None => scan_n_f(&lattice, &f, grid_n[0], N_F_FLATNESS, k)?,
                };
                positive("n_f", n_f)?;
                let brackets = stay_above_grid(&lattice, &f, n_f, &grid_n, k)?;
                let mut widest: f64 = 0.0;
                for (&n, b) in grid_n.iter().zip(&brackets) {
                    widest = widest.max(b.width());
                    table.push(vec![n.into(), b.lower.into(), b.upper.into(), ((n as f64).sqrt() * b.mid()).into(), 0.0.into()]);
                }
                table.note("n_f", n_f);
                table.note("max_bracket_width", widest);
            }
            "mc" => {
                let n_f = self.n_f.unwrap_or(1);
                positive("n_f", n_f)?;
                let episodes = get(&self.episodes);
                positive("episodes", episodes)?;
                let est = mc_stay_above_grid(&law, &f, n_f, &grid_n, episodes, seed_of(seed))?;
                for (&n, e) in grid_n.iter().zip(&est) {
                    let s = (n as f64).sqrt();
                    table.push(vec![n.into(), e.estimate.into(), e.estimate.into(), (s * e.estimate).into(), e.stderr.into()]);
                }
                table.note("n_f", n_f);
            }
            other => return Err(CliError::config("mode", format!("expected dp or mc, got `{other}`"))),
        }
        Ok(Output::Table(table).into())
    }
}

/// Capacity by the resistor network and by energy minimization, content and R_p
#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default)]
pub struct Capacity {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: TreeSource,
    /// Gauge: pow:α, exp:β, tab:v1,v2,.. or tab:@file.csv
    #[arg(long)]
    pub gauge: Option<String>,
    /// Relative duality-gap tolerance of the energy minimizer
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

fn gauge(spec: &str) -> Result<Gauge, CliError> {
    match spec.strip_prefix("tab:@") {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::config("gauge", format!("cannot read {path}: {e}")))?;
            format!("tab:{}", text.trim()).parse().map_err(CliError::param("gauge"))
        }
        None => spec.parse().map_err(CliError::param("gauge")),
    }
}

impl Experiment for Capacity {
    const NAME: &'static str = "capacity";
    const TABLE: bool = false;

    fn fill(&mut self) {
        self.source.fill();
        set(&mut self.gauge, "pow:0.5".into());
        set(&mut self.tolerance, rwre_core::gauge::DEFAULT_ENERGY_TOLERANCE);
        set(&mut self.max_iterations, rwre_core::gauge::DEFAULT_ENERGY_ITERATIONS);
    }

    fn needs_seed(&self) -> bool {
        self.source.needs_seed()
    }

    fn execute(&self, seed: Option<u64>) -> Result<Run, CliError> {
        let tree = self.source.build(seed)?;
        let g = gauge(&get(&self.gauge))?;
        g.validate(tree.depth()).map_err(CliError::param("gauge"))?;
        let network = capacity_network(&tree, &g)?;
        let energy = capacity_energy(&tree, &g, get(&self.tolerance), get(&self.max_iterations))?;
        let profile = tree.symmetrize();
        let rp = rp_symmetric(&profile, &g)?;
        let series = criterion_series(&SizeLaw::from_profile(&profile), tree.depth());
        Output::json(&json!({
            "cap_network": network,
            "cap_energy": energy.capacity,
            "energy_converged": energy.converged,
            "energy_iterations": energy.iterations,
            "energy_gap": energy.gap,
            "content_by_min_level": content_by_min_level(&tree, &g)?,
            "rp": rp,
            "series_verdicts": series,
        }))
        .map(Run::from)
    }
}

/// Effective conductance, escape probability and bottleneck bound per environment
#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default)]
pub struct Network {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: TreeSource,
    /// Law of the labels X; the edge into v has conductance e^{S(v)}
    #[arg(long)]
    pub law: Option<String>,
    /// Number of environments
    #[arg(long)]
    pub environments: Option<usize>,
}

impl Experiment for Network {
    const NAME: &'static str = "network";
    const TABLE: bool = true;

    fn fill(&mut self) {
        self.source.fill();
        set(&mut self.law, "rademacher".into());
        set(&mut self.environments, 100);
    }

    fn needs_seed(&self) -> bool {
        true
    }

    fn execute(&self, seed: Option<u64>) -> Result<Run, CliError> {
        let tree = self.source.build(seed)?;
        let law = law(&get(&self.law))?;
        let m = get(&self.environments);
        positive("environments", m)?;
        let rows = rwre_core::par::map_indexed(m, |e| -> rwre_core::Result<_> {
            let s = derive_seed(seed_of(seed), e as u64 + 1);
            let cond = sample_environment(&tree, &law, s);
            Ok((s, effective_conductance(&tree, &cond), escape_probability(&tree, &cond), bottleneck_bound(&tree, &cond)?.0))
        });
        let mut table = Table::new(&["seed", "c_eff", "escape_p", "bottleneck"]);
        for r in rows {
            let (s, c, p, b) = r?;
            table.push(vec![s.into(), c.into(), p.into(), b.into()]);
        }
        Ok(Output::Table(table).into())
    }
}

/// Survival probability of a target percolation
#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default)]
pub struct Percolate {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: TreeSource,
    /// Increment law of the labels
    #[arg(long)]
    pub law: Option<String>,
    /// Target: nonneg, band:l1,..;u1,.., box:q1,.., union:[a,b]x[c,d]|.., counterexample:ε
    #[arg(long)]
    pub target: Option<String>,
}

impl Experiment for Percolate {
    const NAME: &'static str = "percolate";
    const TABLE: bool = false;

    fn fill(&mut self) {
        self.source.fill();
        set(&mut self.law, "rademacher".into());
        set(&mut self.target, "nonneg".into());
    }

    fn needs_seed(&self) -> bool {
        self.source.needs_seed()
    }

    fn execute(&self, seed: Option<u64>) -> Result<Run, CliError> {
        let tree = self.source.build(seed)?;
        let law = law(&get(&self.law))?;
        let target = target(&get(&self.target))?;
        let report = survival_exact(&tree, &law, &target)?;
        let mut value = serde_json::to_value(&report).map_err(|e| CliError::Compute(e.to_string()))?;
        // moment bounds need positive marginals
        if let Ok(g) = certified_gauge(&law, &target, tree.depth()) {
            let b = moment_bounds(&tree, &report.marginals, &Gauge::Tabulated(g[1..].to_vec()))?;
            value["first_moment_upper"] = json!(b.first_moment_upper);
            value["second_moment_lower"] = json!(b.second_moment_lower);
        }
        Ok(Output::Json(value).into())
    }
}

/// The chain P(B;Γ) <= P(B;S(Γ)) <= P(S(B);S(Γ)) <= 2/R_p
#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default)]
pub struct Thm42Check {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: TreeSource,
    /// Increment law of the labels
    #[arg(long)]
    pub law: Option<String>,
    /// Target set (see percolate --help)
    #[arg(long)]
    pub target: Option<String>,
}

impl Experiment for Thm42Check {
    const NAME: &'static str = "thm42-check";
    const TABLE: bool = false;

    fn fill(&mut self) {
        self.source.fill();
        set(&mut self.law, "rademacher".into());
        set(&mut self.target, "nonneg".into());
    }

    fn needs_seed(&self) -> bool {
        self.source.needs_seed()
    }

    fn execute(&self, seed: Option<u64>) -> Result<Run, CliError> {
        let tree = self.source.build(seed)?;
        let r = theorem42_chain(&tree, &law(&get(&self.law))?, &target(&get(&self.target))?)?;
        let exact = |x: &Option<num::BigRational>| x.as_ref().map(rwre_core::scalar::format_rational);
        Output::json(&json!({
            "p_b_gamma": r.p_b_tree,
            "p_b_sgamma": r.p_b_sym,
            "p_sb_sgamma": r.p_sb_sym,
            "cap_bound": r.two_over_rp,
            "chain_holds": r.chain_holds,
            "swap_counterexample": r.counterexample_to_swap,
            "p_sb_gamma": r.p_sb_tree,
            "p_b_gamma_exact": exact(&r.p_b_tree_exact),
            "p_sb_gamma_exact": exact(&r.p_sb_tree_exact),
            "marginals": r.marginals,
            "virtual": r.is_virtual,
        }))
        .map(Run::from)
    }
}

/// The three-level counterexample to symmetrizing the target alone
#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default)]
pub struct Counterexample {
    /// ε as a decimal or fraction
    #[arg(long)]
    pub eps: Option<String>,
}

impl Experiment for Counterexample {
    const NAME: &'static str = "counterexample";
    const TABLE: bool = false;

    fn fill(&mut self) {
        set(&mut self.eps, "1/100".into());
    }

    fn needs_seed(&self) -> bool {
        false
    }

    fn execute(&self, _seed: Option<u64>) -> Result<Run, CliError> {
        let eps = parse_rational(&get(&self.eps)).map_err(CliError::param("eps"))?;
        let report = counterexample(&eps).map_err(CliError::param("eps"))?;
        Output::json(&report).map(Run::from)
    }
}

/// Conductance scaling in depth across sampled environments
#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default)]
pub struct Rwre {
    /// Growth profile: path, binary, quadratic, pow:γ or growth:f1,f2,..
    #[arg(long)]
    pub profile: Option<String>,
    /// Law of the labels X
    #[arg(long)]
    pub law: Option<String>,
    /// Depths N at which the conductance is computed
    #[arg(long, value_delimiter = ',')]
    pub depths: Option<Vec<usize>>,
    /// Number of environments
    #[arg(long)]
    pub environments: Option<usize>,
}

fn profile(spec: &str, depth: usize) -> Result<Vec<usize>, CliError> {
    let growth = match spec.split_once(':') {
        None if spec == "path" => vec![1; depth],
        None if spec == "binary" => vec![2; depth],
        None if spec == "quadratic" => power_growth(2.0, depth).map_err(CliError::param("profile"))?,
        Some(("pow", g)) => {
            let g: f64 = g.trim().parse().map_err(|_| CliError::config("profile", format!("bad exponent `{g}`")))?;
            power_growth(g, depth).map_err(CliError::param("profile"))?
        }
        Some(("growth", list)) => list
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::config("profile", format!("bad growth list `{list}`")))?,
        _ => return Err(CliError::config("profile", format!("expected path, binary, quadratic, pow:γ or growth:.., got `{spec}`"))),
    };
    if growth.len() < depth {
        return Err(CliError::config("profile", format!("has {} levels, depth {depth} requested", growth.len())));
    }
    Ok(growth)
}

impl Experiment for Rwre {
    const NAME: &'static str = "rwre";
    const TABLE: bool = true;

    fn fill(&mut self) {
        set(&mut self.profile, "quadratic".into());
        set(&mut self.law, "rademacher".into());
        set(&mut self.depths, vec![16, 64, 256]);
        set(&mut self.environments, 200);
    }

    fn needs_seed(&self) -> bool {
        true
    }

    fn execute(&self, seed: Option<u64>) -> Result<Run, CliError> {
        let depths = get(&self.depths);
        grid("depths", &depths)?;
        let growth = profile(&get(&self.profile), *depths.last().expect("nonempty"))?;
        let law = law(&get(&self.law))?;
        let r = conductance_scaling_mc(&growth, &law, &depths, get(&self.environments), seed_of(seed))?;
        let mut table = Table::new(&[
            "depth", "vertices", "c_q1", "c_median", "c_q3", "escape_q1", "escape_median", "escape_q3",
        ]);
        for row in &r.rows {
            table.push(vec![
                row.depth.into(),
                row.vertices.into(),
                row.conductance_q1.into(),
                row.conductance_median.into(),
                row.conductance_q3.into(),
                row.escape_q1.into(),
                row.escape_median.into(),
                row.escape_q3.into(),
            ]);
        }
        table.note("median_ratio", r.median_ratio);
        table.note("verdict", serde_json::to_value(r.verdict).expect("enum").as_str().unwrap_or("").to_string());
        Ok(Output::Table(table).into())
    }
}

/// Exit sequences of the reinforced walk and of the exponential environment
/// at the centre of a star, against the exact urn table
#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default)]
pub struct Reinforced {
    /// Number of leaves of the star
    #[arg(long)]
    pub degree: Option<usize>,
    /// Number of exits compared
    #[arg(long)]
    pub prefix: Option<usize>,
    /// Episodes per side
    #[arg(long)]
    pub episodes: Option<usize>,
}

impl Experiment for Reinforced {
    const NAME: &'static str = "reinforced";
    const TABLE: bool = false;

    fn fill(&mut self) {
        set(&mut self.degree, 2);
        set(&mut self.prefix, 3);
        set(&mut self.episodes, 100_000);
    }

    fn needs_seed(&self) -> bool {
        true
    }

    fn execute(&self, seed: Option<u64>) -> Result<Run, CliError> {
        let r = equivalence_test(get(&self.degree), get(&self.prefix), get(&self.episodes), seed_of(seed))?;
        Output::json(&r).map(Run::from)
    }
}

/// Survival of a stable walk above the line c·k
#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default)]
pub struct Stable {
    /// Stability index in (0, 2]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Slope c of the line
    #[arg(long)]
    pub drift: Option<f64>,
    /// Horizons n
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    /// Walks per horizon
    #[arg(long)]
    pub episodes: Option<usize>,
}

impl Experiment for Stable {
    const NAME: &'static str = "stable";
    const TABLE: bool = true;

    fn fill(&mut self) {
        set(&mut self.alpha, 1.5);
        set(&mut self.drift, 1.0);
        set(&mut self.grid, vec![10, 20, 40, 80]);
        set(&mut self.episodes, 1_000_000);
    }

    fn needs_seed(&self) -> bool {
        true
    }

    fn execute(&self, seed: Option<u64>) -> Result<Run, CliError> {
        let (alpha, drift) = (get(&self.alpha), get(&self.drift));
        let r = stable_ray_decay(alpha, drift, &get(&self.grid), get(&self.episodes), seed_of(seed))?;
        let mut table = Table::new(&["n", "survivors", "estimate", "stderr", "ci_low", "ci_high"]);
        for row in &r.rows {
            table.push(vec![
                row.n.into(),
                row.survivors.into(),
                row.estimate.into(),
                row.stderr.into(),
                row.ci_low.into(),
                row.ci_high.into(),
            ]);
        }
        table.note("slope", r.slope.unwrap_or(f64::NAN));
        table.note("slope_stderr", r.slope_stderr.unwrap_or(f64::NAN));
        table.note("fitted_points", r.fitted_points);
        table.note("one_step_tail", stable_tail(alpha, drift));
        Ok(Output::Table(table).into())
    }
}

/// Run the acceptance criteria
#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default)]
pub struct Accept {
    /// Criteria suite; only `primary` exists
    #[arg(long)]
    pub suite: Option<String>,
    /// Run only these criteria, e.g. 1,13
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<usize>>,
}

impl Experiment for Accept {
    const NAME: &'static str = "accept";
    const TABLE: bool = true;

    fn fill(&mut self) {
        set(&mut self.suite, "primary".into());
    }

    fn needs_seed(&self) -> bool {
        false
    }

    fn execute(&self, _seed: Option<u64>) -> Result<Run, CliError> {
        if get(&self.suite) != "primary" {
            return Err(CliError::config("suite", "the only suite is `primary`"));
        }
        let ids = match &self.only {
            Some(ids) => {
                if let Some(bad) = ids.iter().find(|&&i| !(1..=crate::accept::CRITERIA).contains(&i)) {
                    return Err(CliError::config("only", format!("no criterion {bad}")));
                }
                ids.clone()
            }
            None => (1..=crate::accept::CRITERIA).collect(),
        };
        let outcomes = crate::accept::run_suite(&ids, |o| eprintln!("{}", o.line()));
        let mut table = Table::new(&["id", "status", "name", "detail"]);
        for o in &outcomes {
            table.push(vec![o.id.into(), o.status().into(), o.name.into(), o.detail.clone().into()]);
        }
        let failed = outcomes.iter().filter(|o| !o.pass).count();
        table.note("passed", outcomes.len() - failed);
        table.note("failed", failed);
        let manifest = json!(outcomes.iter().map(|o| json!({"id": o.id, "name": o.name, "pass": o.pass, "analysed": o.analysed, "detail": o.detail, "seconds": o.seconds})).collect::<Vec<_>>());
        Ok(Run { output: Output::Table(table), exit: if failed == 0 { 0 } else { 1 }, manifest: Some(manifest) })
    }
}
