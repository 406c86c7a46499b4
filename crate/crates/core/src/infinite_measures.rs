//! σ-finite invariant measures on finitely supported sequences.
//!
//! The model space is the set of 0-1 sequences with finitely many ones, with
//! orbit `k` the sequences having exactly `k` ones. An invariant measure is
//! `ν = Σ_k c_k · counting_k` ([`OrbitSigmaFinite`]). With the weight
//! `f(x) = Π_{x_i = 1} q^i` every orbit has finite `f`-mass
//!
//! ```text
//! m_k = Σ_{i_1 < … < i_k} q^{i_1 + … + i_k} = q^{k(k+1)/2} / Π_{j=1..k} (1 − q^j),
//! ```
//!
//! so `P_f(ν) = fν / ν(f)` is a probability measure whenever `Σ_k c_k m_k`
//! is finite, and everything below is exact.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::Serialize;

use crate::averaging::{limit_average_many, monomial_average_uniform, AveragingReport, LimitConfig, LimitReport, Monomial, Observable, Schedule};
use crate::cocycles::{Cocycle, WeightFunction};
use crate::error::{Error, Result};
use crate::group::{act, orbit, BinaryConfig, ChainLevel, Permutation, MAX_ENUMERATION_DEGREE};
use crate::measures::{support_relation, AtomicMeasure, Cylinder, OrbitSigmaFinite, Relation};
use crate::numeric::{format_rational, int, rat, to_f64, ExtendedReal, Rational};

/// Decay ratio of the canonical weight function.
pub fn canonical_decay() -> Rational {
    rat(1, 4)
}

/// `f(x) = Π_{x_i = 1} 4^{-i}`: positive and summable over every orbit.
pub fn make_fibrewise_f() -> WeightFunction {
    WeightFunction::coordinate_decay(canonical_decay()).expect("1/4 lies in (0,1)")
}

/// Coefficients `e_0..=e_max` of `Π_{i ≥ 1} (1 + t q^i)`.
fn euler_coefficients(q: &Rational, max: usize) -> Vec<Rational> {
    let mut out = Vec::with_capacity(max + 1);
    let mut denominator = Rational::one();
    for j in 0..=max {
        if j > 0 {
            denominator *= Rational::one() - num_traits::pow(q.clone(), j);
        }
        out.push(num_traits::pow(q.clone(), j * (j + 1) / 2) / &denominator);
    }
    out
}

/// `Σ_{x in orbit k} f(x)` for the weight `f`.
pub fn orbit_f_mass(f: &WeightFunction, k: usize) -> Result<ExtendedReal> {
    match f {
        WeightFunction::CoordinateDecay { q } => Ok(ExtendedReal::Finite(euler_coefficients(q, k).pop().expect("k+1 terms"))),
        WeightFunction::Constant(c) if k == 0 => Ok(ExtendedReal::Finite(c.clone())),
        WeightFunction::Constant(_) => Ok(ExtendedReal::Infinite),
        WeightFunction::Custom { name, .. } => {
            Err(Error::InvalidParameter(format!("no closed-form orbit series for weight function {name}")))
        }
    }
}

/// `ν(f) = Σ_k c_k m_k`.
pub fn integrate_f(nu: &OrbitSigmaFinite, f: &WeightFunction) -> Result<ExtendedReal> {
    let mut total = ExtendedReal::zero();
    for (&k, c) in nu.weights() {
        total = total.add(&orbit_f_mass(f, k)?.scale(c));
    }
    Ok(total)
}

fn finite_integral(nu: &OrbitSigmaFinite, f: &WeightFunction) -> Result<Rational> {
    match integrate_f(nu, f)? {
        ExtendedReal::Finite(v) if v.is_positive() => Ok(v),
        ExtendedReal::Finite(_) => Err(Error::ZeroMass("ν(f) = 0".into())),
        ExtendedReal::Infinite => Err(Error::Divergent(format!("ν(f) = ∞ for {f:?}"))),
    }
}

/// `P_f(ν) = fν / ν(f)` for an orbit-counting measure: a probability measure
/// on the countable space of finitely supported sequences.
#[derive(Debug, Clone)]
pub struct WeightedOrbitMeasure {
    base: OrbitSigmaFinite,
    q: Rational,
    normalizer: Rational,
}

/// Equality of measures: the representation `(base, ν(f))` is projective.
impl PartialEq for WeightedOrbitMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q && self.base.scaled(&self.normalizer.recip()) == other.base.scaled(&other.normalizer.recip())
    }
}

impl WeightedOrbitMeasure {
    pub fn base(&self) -> &OrbitSigmaFinite {
        &self.base
    }

    /// `ν(f)` of the base measure.
    pub fn normalizer(&self) -> &Rational {
        &self.normalizer
    }

    fn f(&self) -> WeightFunction {
        WeightFunction::CoordinateDecay { q: self.q.clone() }
    }

    /// Mass of a finitely supported point (trailing zeros implied).
    pub fn atom_mass(&self, x: &BinaryConfig) -> Rational {
        let f = self.f().eval(x).expect("decay weights are positive");
        self.base.atom_mass(x) * f / &self.normalizer
    }

    /// Total mass carried by orbit `k`.
    pub fn orbit_mass(&self, k: usize) -> Rational {
        let m = orbit_f_mass(&self.f(), k).expect("decay weight").finite().cloned().expect("finite");
        self.base.weight(k) * m / &self.normalizer
    }

    /// Exact cylinder mass: the free ones range over the unpinned positions,
    /// whose generating function is `Π_{i ≥ 1}(1 + t q^i)` divided by the
    /// factors of the pinned positions.
    pub fn mass(&self, a: &Cylinder) -> Rational {
        let pinned_ones = a.pinned_ones();
        let top = self.base.weights().keys().next_back().copied().unwrap_or(0);
        if top < pinned_ones {
            return Rational::zero();
        }
        let free_max = top - pinned_ones;
        let euler = euler_coefficients(&self.q, free_max);
        // Denominator polynomial Π_{i pinned} (1 + t q^i).
        let mut d = vec![Rational::one()];
        for &i in a.pins().keys() {
            let qi = num_traits::pow(self.q.clone(), i);
            let mut next = vec![Rational::zero(); d.len() + 1];
            for (j, c) in d.iter().enumerate() {
                next[j] += c;
                next[j + 1] += c * &qi;
            }
            d = next;
        }
        let mut series: Vec<Rational> = Vec::with_capacity(free_max + 1);
        for j in 0..=free_max {
            let mut c = euler[j].clone();
            for l in 1..=j.min(d.len() - 1) {
                c -= &d[l] * &series[j - l];
            }
            series.push(c);
        }
        let pinned_factor = a
            .pins()
            .iter()
            .filter(|(_, &v)| v)
            .fold(Rational::one(), |acc, (&i, _)| acc * num_traits::pow(self.q.clone(), i));
        let mut total = Rational::zero();
        for (&k, c) in self.base.weights() {
            if k >= pinned_ones {
                total += c * &series[k - pinned_ones];
            }
        }
        total * pinned_factor / &self.normalizer
    }

    /// `μ(T_g x) / μ(x)`; equals `ρ_f(g, x)` because `c_k` is orbit-constant.
    pub fn rn_derivative(&self, g: &Permutation, x: &BinaryConfig) -> Result<Rational> {
        let here = self.atom_mass(x);
        if here.is_zero() {
            return Err(Error::ZeroMass(x.to_string()));
        }
        Ok(self.atom_mass(&act(g, &pad(x, g.degree()))?) / here)
    }
}

fn pad(x: &BinaryConfig, len: usize) -> BinaryConfig {
    if x.len() >= len {
        return x.clone();
    }
    let mut bits = x.bits().to_vec();
    bits.resize(len, false);
    BinaryConfig::new(bits)
}

/// `P_f(ν)` for an orbit-counting measure.
pub fn p_f(nu: &OrbitSigmaFinite, f: &WeightFunction) -> Result<WeightedOrbitMeasure> {
    let normalizer = finite_integral(nu, f)?;
    match f {
        WeightFunction::CoordinateDecay { q } => Ok(WeightedOrbitMeasure { base: nu.clone(), q: q.clone(), normalizer }),
        // Only the all-zero orbit has finite constant mass, and fν/ν(f) is ν normalized.
        WeightFunction::Constant(_) => Ok(WeightedOrbitMeasure { base: nu.clone(), q: rat(1, 2), normalizer: nu.weight(0) }),
        WeightFunction::Custom { .. } => unreachable!("rejected by integrate_f"),
    }
}

/// `P_f(ν)` for a finite atomic measure.
pub fn p_f_atomic(nu: &AtomicMeasure, f: &WeightFunction) -> Result<AtomicMeasure> {
    let weighted = AtomicMeasure::from_atoms(
        nu.window(),
        nu.atoms().map(|(x, m)| Ok((x.clone(), m * f.eval(x)?))).collect::<Result<Vec<_>>>()?,
    )?;
    if weighted.is_zero() {
        return Err(Error::ZeroMass("ν(f) = 0".into()));
    }
    weighted.normalized()
}

/// How a projective representative is normalized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    TotalMass,
    /// `ν(f) = 1` for the stated weight.
    FMass(String),
}

/// A measure up to positive scaling, stored through a canonical representative.
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectiveClass {
    Orbit { representative: OrbitSigmaFinite, normalization: Normalization },
    Atomic { representative: AtomicMeasure, normalization: Normalization },
}

impl ProjectiveClass {
    /// Class of `ν`, represented with `ν(f) = 1`.
    pub fn of_orbit(nu: &OrbitSigmaFinite, f: &WeightFunction) -> Result<Self> {
        let z = finite_integral(nu, f)?;
        Ok(ProjectiveClass::Orbit { representative: nu.scaled(&z.recip()), normalization: Normalization::FMass(format!("{f:?}")) })
    }

    /// Class of `ν`, represented with `ν(f) = 1`.
    pub fn of_atomic(nu: &AtomicMeasure, f: &WeightFunction) -> Result<Self> {
        let z: Rational = nu.atoms().map(|(x, m)| f.eval(x).map(|w| w * m)).sum::<Result<Rational>>()?;
        if z.is_zero() {
            return Err(Error::ZeroMass("ν(f) = 0".into()));
        }
        Ok(ProjectiveClass::Atomic { representative: nu.scaled(&z.recip()), normalization: Normalization::FMass(format!("{f:?}")) })
    }

    /// Two measures are in one class iff they differ by a positive scalar.
    pub fn same_class_orbit(a: &OrbitSigmaFinite, b: &OrbitSigmaFinite) -> bool {
        if a.labels() != b.labels() {
            return false;
        }
        let mut ratio: Option<Rational> = None;
        a.weights().iter().all(|(k, ca)| {
            let r = ca / b.weight(*k);
            match &ratio {
                None => {
                    ratio = Some(r);
                    true
                }
                Some(prev) => *prev == r,
            }
        })
    }
}

/// Inverse of `P_f`: the class of `μ / f`.
pub fn inv_p_f(mu: &WeightedOrbitMeasure, f: &WeightFunction) -> Result<ProjectiveClass> {
    // μ/f on orbit k is (c_k / ν(f)) · counting, whose f-integral is 1.
    let representative = OrbitSigmaFinite::new(mu.base.weights().iter().map(|(&k, c)| (k, c / &mu.normalizer)))?;
    ProjectiveClass::of_orbit(&representative, f)
}

/// Inverse of `P_f` on atomic measures.
pub fn inv_p_f_atomic(mu: &AtomicMeasure, f: &WeightFunction) -> Result<ProjectiveClass> {
    let divided = AtomicMeasure::from_atoms(
        mu.window(),
        mu.atoms().map(|(x, m)| Ok((x.clone(), m / f.eval(x)?))).collect::<Result<Vec<_>>>()?,
    )?;
    ProjectiveClass::of_atomic(&divided, f)
}

/// One ergodic component `scale · counting_k` with its decomposing weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaComponent {
    pub label: usize,
    #[serde(serialize_with = "crate::numeric::serialize_rational")]
    pub scale: Rational,
    #[serde(serialize_with = "crate::numeric::serialize_rational")]
    pub weight: Rational,
}

/// `ν / ν(f) = Σ_k w_k η_k` with `η_k` the orbit-counting measures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaFiniteDecomposition {
    pub components: Vec<SigmaComponent>,
    #[serde(serialize_with = "crate::numeric::serialize_rational")]
    pub normalizer: Rational,
    /// Distinct components lie on distinct orbits, hence in distinct projective classes.
    pub admissible: bool,
}

impl SigmaFiniteDecomposition {
    /// `Σ_k w_k · scale_k · counting_k`.
    pub fn barycenter(&self) -> OrbitSigmaFinite {
        OrbitSigmaFinite::new(self.components.iter().map(|c| (c.label, &c.weight * &c.scale))).expect("positive parts")
    }

    pub fn descriptor(&self) -> MeasureClassDescriptor {
        MeasureClassDescriptor { labels: self.components.iter().filter(|c| c.weight.is_positive()).map(|c| c.label).collect() }
    }

    /// `P_f` applied to each component; the weights are the `w_k` and sum to 1.
    pub fn probability_components(&self, f: &WeightFunction) -> Result<Vec<(Rational, WeightedOrbitMeasure)>> {
        self.components
            .iter()
            .map(|c| Ok((c.weight.clone(), p_f(&OrbitSigmaFinite::new([(c.label, c.scale.clone())])?, f)?)))
            .collect()
    }

    /// Stable one-line-per-component text.
    pub fn to_text(&self) -> String {
        let mut out = format!("sigma-finite-decomposition normalizer={}\n", format_rational(&self.normalizer));
        for c in &self.components {
            out.push_str(&format!("component orbit={} scale={} weight={}\n", c.label, format_rational(&c.scale), format_rational(&c.weight)));
        }
        out
    }
}

/// Ergodic decomposition of `ν`: component `k` is counting measure on orbit
/// `k` normalized to `η_k(f) = 1`, with weight `c_k m_k / ν(f)`.
pub fn decompose_sigma_finite(nu: &OrbitSigmaFinite, f: &WeightFunction) -> Result<SigmaFiniteDecomposition> {
    let normalizer = finite_integral(nu, f)?;
    let mut components = Vec::new();
    for (&k, c) in nu.weights() {
        let m = orbit_f_mass(f, k)?.finite().cloned().expect("finite when ν(f) is");
        components.push(SigmaComponent { label: k, scale: m.recip(), weight: c * &m / &normalizer });
    }
    Ok(SigmaFiniteDecomposition { components, normalizer, admissible: true })
}

/// `η ↦ η / φ(η)` with weights `φ(η) w`; the barycenter is unchanged.
pub fn reweight_decomposition(dec: &SigmaFiniteDecomposition, phi: impl Fn(usize) -> Rational) -> Result<SigmaFiniteDecomposition> {
    let mut components = Vec::with_capacity(dec.components.len());
    for c in &dec.components {
        let factor = phi(c.label);
        if !factor.is_positive() {
            return Err(Error::InvalidParameter(format!("reweighting factor {} on orbit {} is not positive", format_rational(&factor), c.label)));
        }
        components.push(SigmaComponent { label: c.label, scale: &c.scale / &factor, weight: &c.weight * &factor });
    }
    Ok(SigmaFiniteDecomposition { components, normalizer: dec.normalizer.clone(), admissible: dec.admissible })
}

/// Support of the decomposing measure, as a set of orbit labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct MeasureClassDescriptor {
    pub labels: BTreeSet<usize>,
}

impl MeasureClassDescriptor {
    pub fn relation_to(&self, other: &MeasureClassDescriptor) -> Relation {
        support_relation(&self.labels, &other.labels)
    }
}

/// Measure class of the decomposing measure of `ν`.
pub fn pcl(nu: &OrbitSigmaFinite, f: &WeightFunction) -> Result<MeasureClassDescriptor> {
    Ok(decompose_sigma_finite(nu, f)?.descriptor())
}

/// Finite-orbit and infinite-orbit parts of `ν`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentSplit {
    /// Orbits with finitely many points: only the all-zero sequence.
    pub finite: OrbitSigmaFinite,
    pub infinite: OrbitSigmaFinite,
}

impl ComponentSplit {
    pub fn recombined(&self) -> OrbitSigmaFinite {
        OrbitSigmaFinite::new(self.finite.weights().iter().chain(self.infinite.weights()).map(|(&k, c)| (k, c.clone())))
            .expect("nonnegative")
    }
}

pub fn classify_components(nu: &OrbitSigmaFinite) -> ComponentSplit {
    let part = |keep: fn(usize) -> bool| {
        OrbitSigmaFinite::new(nu.weights().iter().filter(|(&k, _)| keep(k)).map(|(&k, c)| (k, c.clone()))).expect("nonnegative")
    };
    ComponentSplit { finite: part(|k| k == 0), infinite: part(|k| k > 0) }
}

/// `A_n χ_{x_1 = 1}` at the point with ones at `1..=k`: equal to `k / n` for `n ≥ k`.
pub fn orbit_decay(k: usize, n: usize) -> Result<Rational> {
    let x = BinaryConfig::with_ones_at(n.max(k), &(1..=k).collect::<Vec<_>>());
    monomial_average_uniform(ChainLevel::new(n)?, &Monomial::new([1]), &x)
}

/// `η_x^n`, the uniform average of point masses over `T_k x`, `k ∈ S(n)`.
pub fn orbital_measure_exact(x: &BinaryConfig, level: ChainLevel) -> Result<AtomicMeasure> {
    if level.n() > MAX_ENUMERATION_DEGREE {
        return Err(Error::Capacity { what: "orbital_measure_exact", limit: MAX_ENUMERATION_DEGREE, requested: level.n() });
    }
    // Every orbit point is hit by the same number of group elements.
    let points = orbit(level, x)?;
    let share = rat(1, points.len() as i64);
    AtomicMeasure::from_atoms(x.len(), points.into_iter().map(|(y, _)| (y, share.clone())))
}

/// Monte Carlo `η_x^n`: equally weighted orbit points from Haar draws.
#[derive(Debug, Clone)]
pub struct OrbitalSample {
    pub level: usize,
    pub points: Vec<BinaryConfig>,
}

impl OrbitalSample {
    /// Mean of `φ` and its standard error.
    pub fn mean(&self, phi: &dyn Observable) -> (f64, f64) {
        let values: Vec<f64> = self.points.iter().map(|y| phi.eval_f64(y)).collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    }
}

pub fn orbital_measure_mc<R: Rng + ?Sized>(x: &BinaryConfig, level: ChainLevel, samples: usize, rng: &mut R) -> Result<OrbitalSample> {
    let points = (0..samples)
        .map(|_| act(&crate::group::haar_sample(level, rng), x))
        .collect::<Result<Vec<_>>>()?;
    Ok(OrbitalSample { level: level.n(), points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dichotomy {
    ConvergesToProbability,
    EscapesMass,
    Inconclusive,
}

/// Escape threshold for the battery values at the top level.
pub const ESCAPE_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Serialize)]
pub struct BatteryEntry {
    pub label: String,
    pub report: LimitReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct DichotomyReport {
    pub verdict: Dichotomy,
    pub battery: Vec<BatteryEntry>,
    pub reason: String,
}

/// `η_x^n({x}) = 1 / |S(n)-orbit of x|`, exact at every level.
fn self_indicator(x: &BinaryConfig, n: usize) -> Rational {
    let k = x.count_ones_prefix(n);
    let mut size = Rational::one();
    for j in 0..k {
        size = size * int((n - j) as i64) / int((j + 1) as i64);
    }
    size.recip()
}

/// Tracks `η_x^n` along `schedule` on the monomials `{1}`, `{2}`, `{1,2}` and
/// on the point mass at `x` itself.
///
/// The point mass separates the two ways cylinder values can vanish: it stays
/// at 1 on a fixed point and tends to 0 when the orbit of `x` is infinite.
/// Escape is declared when every battery value at the top level is at most
/// [`ESCAPE_THRESHOLD`] and no value rose along the second half of the
/// schedule beyond three standard errors; convergence when every entry passes
/// the Cauchy criterion of the limit detector.
pub fn orbital_dichotomy<R: Rng + ?Sized>(
    x: &BinaryConfig,
    schedule: &Schedule,
    config: &LimitConfig,
    rng: &mut R,
) -> Result<DichotomyReport> {
    let monomials = [Monomial::new([1]), Monomial::new([2]), Monomial::new([1, 2])];
    let observables: Vec<&dyn Observable> = monomials.iter().map(|m| m as &dyn Observable).collect();
    let reports = limit_average_many(&Cocycle::constant_one(), &observables, x, schedule, config, rng)?;
    let mut battery: Vec<BatteryEntry> =
        monomials.iter().zip(reports).map(|(m, report)| BatteryEntry { label: format!("phi{}", m.label()), report }).collect();
    let point_levels: Vec<AveragingReport> = schedule
        .levels()
        .iter()
        .map(|&n| {
            let value = self_indicator(x, n);
            AveragingReport { level: n, method: crate::averaging::Method::Exact, value: to_f64(&value), exact: Some(value), stderr: 0.0, sample_count: 0 }
        })
        .collect();
    battery.push(BatteryEntry { label: "point-mass".into(), report: LimitReport::from_levels(point_levels, config.tolerance) });

    let small = battery.iter().all(|b| b.report.levels.last().expect("non-empty").value <= ESCAPE_THRESHOLD);
    let half = schedule.levels().len() / 2;
    let decreasing = battery.iter().all(|b| {
        b.report.levels[half..].windows(2).all(|w| w[1].value <= w[0].value + 3.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt())
    });
    let converged = battery.iter().all(|b| b.report.converged);
    let (verdict, reason) = if small && decreasing {
        (Dichotomy::EscapesMass, format!("all battery values at level {} are at most {ESCAPE_THRESHOLD} and non-increasing", schedule.top()))
    } else if converged {
        (Dichotomy::ConvergesToProbability, "every battery entry passes the Cauchy criterion".to_string())
    } else {
        let failing: Vec<&str> = battery.iter().filter(|b| !b.report.converged).map(|b| b.label.as_str()).collect();
        (Dichotomy::Inconclusive, format!("no limit detected for {}", failing.join(", ")))
    };
    Ok(DichotomyReport { verdict, battery, reason })
}

/// Random orbit-counting measure on labels `0..labels` with small rational weights.
pub fn random_orbit_measure<R: Rng + ?Sized>(labels: usize, rng: &mut R) -> OrbitSigmaFinite {
    loop {
        let mut weights = Vec::new();
        for k in 0..labels {
            if rng.random_bool(0.6) {
                weights.push((k, rat(rng.random_range(1..=20), rng.random_range(1..=12))));
            }
        }
        if !weights.is_empty() {
            return OrbitSigmaFinite::new(weights).expect("positive weights");
        }
    }
}
