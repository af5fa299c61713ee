//! Laws of the i.i.d. labels `X(σ)`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use num::{BigRational, One, Signed, Zero};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::scalar::{format_rational, parse_rational, rational_to_f64, ratio};

/// Default number of atoms used when quantizing a continuous law.
pub const DEFAULT_ATOMS: usize = 128;

/// Finitely supported law on the lattice `unit · Z`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    unit: f64,
    values: Vec<i64>,
    probs: Vec<f64>,
    exact: Option<Vec<BigRational>>,
}

impl Lattice {
    /// Exact law with rational probabilities summing to one.
    pub fn exact(unit: f64, values: Vec<i64>, probs: Vec<BigRational>) -> Result<Self> {
        if values.len() != probs.len() || values.is_empty() {
            return Err(Error::InvalidLaw("values and probabilities differ in length".into()));
        }
        if probs.iter().any(|p| p.is_negative()) {
            return Err(Error::InvalidLaw("negative probability".into()));
        }
        let total: BigRational = probs.iter().sum();
        if !total.is_one() {
            return Err(Error::InvalidLaw(format!(
                "probabilities sum to {}, not 1",
                format_rational(&total)
            )));
        }
        let mut pairs: Vec<(i64, BigRational)> = values.into_iter().zip(probs).collect();
        pairs.sort_by_key(|(v, _)| *v);
        let mut merged: Vec<(i64, BigRational)> = Vec::with_capacity(pairs.len());
        for (v, p) in pairs {
            match merged.last_mut() {
                Some((w, q)) if *w == v => *q += p,
                _ => merged.push((v, p)),
            }
        }
        let (values, probs): (Vec<i64>, Vec<BigRational>) = merged.into_iter().unzip();
        let f = probs.iter().map(rational_to_f64).collect();
        let mut law = Self::build(unit, values, f)?;
        law.exact = Some(probs);
        Ok(law)
    }

    /// Float law; probabilities must sum to one within `1e-15` per atom.
    pub fn new(unit: f64, values: Vec<i64>, probs: Vec<f64>) -> Result<Self> {
        if values.len() != probs.len() || values.is_empty() {
            return Err(Error::InvalidLaw("values and probabilities differ in length".into()));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidLaw("probabilities must be finite and nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-15 * probs.len().max(1) as f64 {
            return Err(Error::InvalidLaw(format!("probabilities sum to {total}, not 1")));
        }
        Self::build(unit, values, probs)
    }

    fn build(unit: f64, values: Vec<i64>, probs: Vec<f64>) -> Result<Self> {
        if !(unit > 0.0) || !unit.is_finite() {
            return Err(Error::InvalidLaw(format!("lattice unit must be positive, got {unit}")));
        }
        let mut pairs: Vec<(i64, f64)> = values.into_iter().zip(probs).collect();
        pairs.sort_by_key(|&(v, _)| v);
        let mut values: Vec<i64> = Vec::with_capacity(pairs.len());
        let mut merged: Vec<f64> = Vec::with_capacity(pairs.len());
        for (v, p) in pairs {
            if values.last() == Some(&v) {
                *merged.last_mut().expect("non-empty") += p;
            } else {
                values.push(v);
                merged.push(p);
            }
        }
        Ok(Self {
            unit,
            values,
            probs: merged,
            exact: None,
        })
    }

    pub fn rademacher() -> Self {
        Self::exact(1.0, vec![-1, 1], vec![ratio(1, 2), ratio(1, 2)]).expect("valid")
    }

    /// Point mass at `c`.
    pub fn constant(c: f64) -> Self {
        if c == 0.0 {
            return Self::exact(1.0, vec![0], vec![BigRational::one()]).expect("valid");
        }
        Self::exact(c.abs(), vec![c.signum() as i64], vec![BigRational::one()]).expect("valid")
    }

    pub fn unit(&self) -> f64 {
        self.unit
    }

    /// Support in lattice units, increasing.
    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn exact_probs(&self) -> Option<&[BigRational]> {
        self.exact.as_deref()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.values.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.atoms().map(|(v, p)| v as f64 * p).sum::<f64>() * self.unit
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean() / self.unit;
        self.atoms()
            .map(|(v, p)| (v as f64 - m).powi(2) * p)
            .sum::<f64>()
            * self.unit
            * self.unit
    }

    /// Standard deviation in lattice units.
    pub fn sd_units(&self) -> f64 {
        self.variance().sqrt() / self.unit
    }

    pub fn min_value(&self) -> i64 {
        self.values[0]
    }

    pub fn max_value(&self) -> i64 {
        *self.values.last().expect("non-empty")
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (v, p) in self.atoms() {
            acc += p;
            if u < acc {
                return v as f64 * self.unit;
            }
        }
        self.max_value() as f64 * self.unit
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum IncrementLaw {
    Lattice(Lattice),
    Gaussian { mean: f64, sd: f64 },
    /// Symmetric stable law with characteristic function `exp(-|scale·t|^α)`.
    SymmetricStable { alpha: f64, scale: f64 },
    /// Law of `log(E1 / E2)` for independent unit exponentials (standard logistic).
    LogExponentialRatio,
    /// Uniform on `[0, 1]`; the coordinate law of box targets.
    Uniform01,
}

impl IncrementLaw {
    pub fn rademacher() -> Self {
        Self::Lattice(Lattice::rademacher())
    }

    pub fn gaussian(mean: f64, sd: f64) -> Result<Self> {
        if !(sd > 0.0) || !mean.is_finite() || !sd.is_finite() {
            return Err(Error::InvalidLaw(format!("gaussian needs sd > 0, got {sd}")));
        }
        Ok(Self::Gaussian { mean, sd })
    }

    pub fn stable(alpha: f64, scale: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) || !(scale > 0.0) {
            return Err(Error::InvalidLaw(format!(
                "stable law needs alpha in (0, 2] and scale > 0, got alpha={alpha}, scale={scale}"
            )));
        }
        Ok(Self::SymmetricStable { alpha, scale })
    }

    pub fn name(&self) -> String {
        self.to_string()
    }

    pub fn as_lattice(&self) -> Option<&Lattice> {
        match self {
            Self::Lattice(l) => Some(l),
            _ => None,
        }
    }

    /// Lattice view, or an error telling the caller to quantize.
    pub fn require_lattice(&self) -> Result<&Lattice> {
        self.as_lattice().ok_or_else(|| Error::NeedsQuantization { law: self.name() })
    }

    pub fn mean(&self) -> Option<f64> {
        match self {
            Self::Lattice(l) => Some(l.mean()),
            Self::Gaussian { mean, .. } => Some(*mean),
            Self::SymmetricStable { alpha, .. } => (*alpha > 1.0).then_some(0.0),
            Self::LogExponentialRatio => Some(0.0),
            Self::Uniform01 => Some(0.5),
        }
    }

    pub fn variance(&self) -> Option<f64> {
        match self {
            Self::Lattice(l) => Some(l.variance()),
            Self::Gaussian { sd, .. } => Some(sd * sd),
            Self::SymmetricStable { alpha, scale } => (*alpha == 2.0).then(|| 2.0 * scale * scale),
            Self::LogExponentialRatio => Some(PI * PI / 3.0),
            Self::Uniform01 => Some(1.0 / 12.0),
        }
    }

    /// `E e^{λX}`, `+∞` where it diverges.
    pub fn mgf(&self, lambda: f64) -> f64 {
        match self {
            Self::Lattice(l) => l
                .atoms()
                .map(|(v, p)| p * (lambda * v as f64 * l.unit).exp())
                .sum(),
            Self::Gaussian { mean, sd } => (lambda * mean + 0.5 * lambda * lambda * sd * sd).exp(),
            Self::SymmetricStable { alpha, scale } => {
                if lambda == 0.0 {
                    1.0
                } else if *alpha == 2.0 {
                    (lambda * lambda * scale * scale).exp()
                } else {
                    f64::INFINITY
                }
            }
            Self::LogExponentialRatio => {
                if lambda == 0.0 {
                    1.0
                } else if lambda.abs() >= 1.0 {
                    f64::INFINITY
                } else {
                    PI * lambda / (PI * lambda).sin()
                }
            }
            Self::Uniform01 => {
                if lambda == 0.0 {
                    1.0
                } else {
                    lambda.exp_m1() / lambda
                }
            }
        }
    }

    /// `P(X <= x)` where available in closed form.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(match self {
            Self::Lattice(l) => l
                .atoms()
                .filter(|&(v, _)| v as f64 * l.unit <= x)
                .map(|(_, p)| p)
                .sum(),
            Self::Gaussian { mean, sd } => Normal::new(*mean, *sd)
                .map_err(|e| Error::InvalidLaw(e.to_string()))?
                .cdf(x),
            Self::LogExponentialRatio => 1.0 / (1.0 + (-x).exp()),
            Self::Uniform01 => x.clamp(0.0, 1.0),
            Self::SymmetricStable { .. } => {
                return Err(Error::InvalidLaw(
                    "stable law has no closed-form distribution function".into(),
                ))
            }
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Lattice(l) => l.sample(rng),
            Self::Gaussian { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            Self::SymmetricStable { alpha, scale } => scale * sample_symmetric_stable(*alpha, rng),
            Self::LogExponentialRatio => {
                let u: f64 = open01(rng);
                (u / (1.0 - u)).ln()
            }
            Self::Uniform01 => rng.random(),
        }
    }

    /// Symmetric lattice approximation with `atoms` cells on `±8 sd`,
    /// mean exactly zero by symmetry.
    pub fn quantize(&self, atoms: usize) -> Result<Lattice> {
        if let Self::Lattice(l) = self {
            return Ok(l.clone());
        }
        if atoms < 2 {
            return Err(Error::param("quantize", "need at least 2 atoms"));
        }
        let sd = match self {
            Self::Gaussian { mean, sd } if *mean == 0.0 => *sd,
            Self::LogExponentialRatio => PI / 3f64.sqrt(),
            _ => {
                return Err(Error::InvalidLaw(format!(
                    "{self} cannot be quantized (needs a mean-zero gaussian or logistic law)"
                )))
            }
        };
        let half_width = 8.0 * sd;
        let h = 2.0 * half_width / atoms as f64;
        let mut probs: Vec<f64> = (0..atoms)
            .map(|j| {
                let lo = -half_width + j as f64 * h;
                let lo_cdf = if j == 0 { 0.0 } else { self.cdf(lo)? };
                let hi_cdf = if j + 1 == atoms { 1.0 } else { self.cdf(lo + h)? };
                Ok(hi_cdf - lo_cdf)
            })
            .collect::<Result<_>>()?;
        for j in 0..atoms / 2 {
            let avg = 0.5 * (probs[j] + probs[atoms - 1 - j]);
            probs[j] = avg;
            probs[atoms - 1 - j] = avg;
        }
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        let values = (0..atoms as i64).map(|j| 2 * j + 1 - atoms as i64).collect();
        Lattice::build(h / 2.0, values, probs)
    }
}

impl From<Lattice> for IncrementLaw {
    fn from(l: Lattice) -> Self {
        Self::Lattice(l)
    }
}

fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Chambers-Mallows-Stuck draw from the standard symmetric stable law,
/// characteristic function `exp(-|t|^α)`.
pub fn sample_symmetric_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = PI * (open01(rng) - 0.5);
    let w: f64 = Exp1.sample(rng);
    if alpha == 1.0 {
        return v.tan();
    }
    let a = (alpha * v).sin() / v.cos().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha);
    debug_assert!(v.abs() < FRAC_PI_2);
    a * b
}

/// `-log min_{0<=λ<=1} E e^{λX}`, by golden-section search.
pub fn backward_push(law: &IncrementLaw) -> Result<f64> {
    let probe = law.mgf(1e-3);
    if !probe.is_finite() {
        return Err(Error::DivergentMgf(law.name()));
    }
    let f = |l: f64| law.mgf(l);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-12 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let min = [f(0.0), f(1.0), f(0.5 * (a + b))]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(-min.ln())
}

impl fmt::Display for IncrementLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Lattice(l) => {
                if l == &Lattice::rademacher() {
                    return write!(f, "rademacher");
                }
                write!(f, "lattice:")?;
                for (i, &v) in l.values.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    match &l.exact {
                        Some(ex) => write!(f, "{v}:{}", format_rational(&ex[i]))?,
                        None => write!(f, "{v}:{:e}", l.probs[i])?,
                    }
                }
                if l.unit != 1.0 {
                    write!(f, ";unit={}", l.unit)?;
                }
                Ok(())
            }
            Self::Gaussian { mean, sd } => write!(f, "gauss:{mean}:{sd}"),
            Self::SymmetricStable { alpha, scale } => write!(f, "stable:{alpha}:{scale}"),
            Self::LogExponentialRatio => write!(f, "logexp"),
            Self::Uniform01 => write!(f, "uniform"),
        }
    }
}

/// Parses `rademacher`, `lattice:-1:1/3,1:2/3[;unit=0.5]`, `const:c`,
/// `gauss[:mean:sd]`, `stable:alpha[:scale]`, `logexp`, `uniform`.
impl FromStr for IncrementLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        let num = |x: &str| -> Result<f64> {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidLaw(format!("bad number `{x}` in `{s}`")))
        };
        let args: Vec<&str> = if rest.is_empty() { vec![] } else { rest.split(':').collect() };
        match head {
            "rademacher" => Ok(Self::rademacher()),
            "uniform" => Ok(Self::Uniform01),
            "logexp" | "logistic" => Ok(Self::LogExponentialRatio),
            "gauss" | "gaussian" | "normal" => match args.as_slice() {
                [] => Self::gaussian(0.0, 1.0),
                [m, sd] => Self::gaussian(num(m)?, num(sd)?),
                _ => Err(Error::InvalidLaw(format!("expected gauss:mean:sd, got `{s}`"))),
            },
            "stable" => match args.as_slice() {
                [a] => Self::stable(num(a)?, 1.0),
                [a, c] => Self::stable(num(a)?, num(c)?),
                _ => Err(Error::InvalidLaw(format!("expected stable:alpha:scale, got `{s}`"))),
            },
            "const" => match args.as_slice() {
                [c] => Ok(Self::Lattice(Lattice::constant(num(c)?))),
                _ => Err(Error::InvalidLaw(format!("expected const:c, got `{s}`"))),
            },
            "lattice" => {
                let (atoms, unit) = match rest.split_once(';') {
                    Some((a, u)) => {
                        let u = u
                            .trim()
                            .strip_prefix("unit=")
                            .ok_or_else(|| Error::InvalidLaw(format!("expected ;unit=u in `{s}`")))?;
                        (a, num(u)?)
                    }
                    None => (rest, 1.0),
                };
                let mut values = Vec::new();
                let mut probs = Vec::new();
                for atom in atoms.split(',') {
                    let (v, p) = atom
                        .split_once(':')
                        .ok_or_else(|| Error::InvalidLaw(format!("expected value:prob, got `{atom}`")))?;
                    values.push(
                        v.trim()
                            .parse::<i64>()
                            .map_err(|_| Error::InvalidLaw(format!("lattice value `{v}` is not an integer")))?,
                    );
                    probs.push(parse_rational(p).map_err(|_| {
                        Error::InvalidLaw(format!("probability `{p}` is not a number"))
                    })?);
                }
                if probs.iter().any(|p| p.is_zero()) {
                    let keep: Vec<usize> = (0..probs.len()).filter(|&i| !probs[i].is_zero()).collect();
                    values = keep.iter().map(|&i| values[i]).collect();
                    probs = keep.iter().map(|&i| probs[i].clone()).collect();
                }
                Ok(Self::Lattice(Lattice::exact(unit, values, probs)?))
            }
            _ => Err(Error::InvalidLaw(format!("unknown law `{s}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["rademacher", "lattice:-1:2/3,1:1/3", "gauss:0:1", "stable:1.5:1", "logexp", "uniform"] {
            let law: IncrementLaw = s.parse().unwrap();
            assert_eq!(law.to_string().parse::<IncrementLaw>().unwrap(), law, "{s}");
        }
        assert!("lattice:-1:1/2,1:1/3".parse::<IncrementLaw>().is_err());
        assert!("cauchy".parse::<IncrementLaw>().is_err());
    }

    #[test]
    fn lattice_moments() {
        let r = Lattice::rademacher();
        assert_eq!(r.mean(), 0.0);
        assert_eq!(r.variance(), 1.0);
        let l: IncrementLaw = "lattice:0:1/2,2:1/4,-2:1/4;unit=0.5".parse().unwrap();
        assert_eq!(l.mean(), Some(0.0));
        assert!((l.variance().unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn backward_push_examples() {
        for law in [
            IncrementLaw::rademacher(),
            IncrementLaw::gaussian(0.0, 2.0).unwrap(),
            IncrementLaw::LogExponentialRatio,
        ] {
            assert!(backward_push(&law).unwrap().abs() < 1e-12, "{law}");
        }
        let b = 0.7;
        let degenerate = IncrementLaw::Lattice(Lattice::constant(-b));
        assert!((backward_push(&degenerate).unwrap() - b).abs() < 1e-12);
        let skew: IncrementLaw = "lattice:1:1/3,-1:2/3".parse().unwrap();
        let expected = (3.0 / (2.0 * 2f64.sqrt())).ln();
        assert!((backward_push(&skew).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.05889).abs() < 1e-5);
        assert!(matches!(
            backward_push(&IncrementLaw::stable(1.5, 1.0).unwrap()),
            Err(Error::DivergentMgf(_))
        ));
    }

    #[test]
    fn zero_mixture_does_not_increase_push() {
        let skew: IncrementLaw = "lattice:1:1/3,-1:2/3".parse().unwrap();
        let base = backward_push(&skew).unwrap();
        for q in [ratio(1, 10), ratio(1, 2), ratio(9, 10)] {
            let one_minus = BigRational::one() - &q;
            let mix = Lattice::exact(
                1.0,
                vec![1, -1, 0],
                vec![&q * ratio(1, 3), &q * ratio(2, 3), one_minus],
            )
            .unwrap();
            assert!(backward_push(&mix.into()).unwrap() <= base + 1e-12);
        }
    }

    #[test]
    fn quantization_is_centered() {
        for law in [IncrementLaw::gaussian(0.0, 1.0).unwrap(), IncrementLaw::LogExponentialRatio] {
            let q = law.quantize(DEFAULT_ATOMS).unwrap();
            assert_eq!(q.values().len(), DEFAULT_ATOMS);
            assert!(q.mean().abs() < 1e-12);
            let rel = (q.variance() - law.variance().unwrap()).abs() / law.variance().unwrap();
            assert!(rel < 0.01, "{law}: {rel}");
        }
        assert!(IncrementLaw::stable(1.5, 1.0).unwrap().quantize(128).is_err());
    }

    #[test]
    fn samplers_have_right_location() {
        let mut rng = CounterRng::new(3, 0);
        let n = 200_000;
        let logistic: f64 = (0..n)
            .map(|_| IncrementLaw::LogExponentialRatio.sample(&mut rng))
            .sum::<f64>()
            / n as f64;
        assert!(logistic.abs() < 0.03);
        // symmetric stable: median zero, P(X > 0) = 1/2
        let pos = (0..n)
            .filter(|_| sample_symmetric_stable(1.5, &mut rng) > 0.0)
            .count() as f64
            / n as f64;
        assert!((pos - 0.5).abs() < 0.01);
        // alpha = 2 is gaussian with variance 2
        let var: f64 = (0..n)
            .map(|_| sample_symmetric_stable(2.0, &mut rng).powi(2))
            .sum::<f64>()
            / n as f64;
        assert!((var - 2.0).abs() < 0.05);
    }
}
