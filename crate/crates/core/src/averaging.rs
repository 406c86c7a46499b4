//! Weighted orbit averages
//!
//! ```text
//!                Σ_{k ∈ S(n)} φ(T_k x) ρ(k, x)
//! (A_n^ρ φ)(x) = -----------------------------
//!                    Σ_{k ∈ S(n)} ρ(k, x)
//! ```
//!
//! and detection of their limit along an increasing schedule of levels.
//!
//! Three exact evaluation routes exist and are cross-checked in tests:
//!
//! * [`average_exact`] sums over every group element (`n ≤ 8`);
//! * [`average_over_orbit`] sums over the distinct points of the orbit, using
//!   that `ρ(k, x)` only depends on `T_k x` (the cocycle is trivial on the
//!   finite stabilizer);
//! * [`monomial_average_uniform`] is the hypergeometric closed form for a
//!   monomial under the constant cocycle.
//!
//! Above the exact crossover, [`average_mc`] replaces the Haar integral by a
//! self-normalized importance estimate. Within one [`limit_average_many`]
//! call the Monte Carlo draws of different levels are coupled through the
//! canonical projections `S(m) → S(n)`, so consecutive levels share most of
//! their randomness.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::sync::OnceLock;

use num_traits::{One, Zero};
use rand::Rng;
use serde::{Serialize, Serializer};

use crate::cocycles::Cocycle;
use crate::error::{Error, Result};
use crate::group::{act, enumerate, haar_sample, orbit, BinaryConfig, ChainLevel, Permutation, MAX_ENUMERATION_DEGREE};
use crate::measures::{AtomicMeasure, Cylinder};
use crate::numeric::{falling_factorial, format_rational, int, pairwise_sum, to_f64, ExtendedReal, Rational};

/// Levels up to this size are averaged exactly; larger ones by Monte Carlo.
pub const EXACT_CROSSOVER: usize = 8;
pub const DEFAULT_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_MC_SAMPLES: usize = 2048;
/// Largest orbit the orbit route will enumerate.
pub const MAX_ORBIT_SIZE: usize = 1 << 20;

/// A bounded test function `φ` on configurations.
pub trait Observable: Send + Sync {
    fn eval(&self, x: &BinaryConfig) -> Rational;

    fn eval_f64(&self, x: &BinaryConfig) -> f64 {
        to_f64(&self.eval(x))
    }

    /// Structural view used by the fast paths.
    fn as_monomial(&self) -> Option<&Monomial> {
        None
    }
}

/// `φ_S(x) = Π_{i ∈ S} x_i`; the empty product is the constant `1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Monomial {
    coords: BTreeSet<usize>,
}

impl Monomial {
    pub fn new(coords: impl IntoIterator<Item = usize>) -> Self {
        let coords: BTreeSet<usize> = coords.into_iter().collect();
        assert!(!coords.contains(&0), "coordinates are 1-based");
        Monomial { coords }
    }

    pub fn constant_one() -> Self {
        Monomial::default()
    }

    pub fn coords(&self) -> &BTreeSet<usize> {
        &self.coords
    }

    pub fn degree(&self) -> usize {
        self.coords.len()
    }

    /// `φ_S` is the indicator of this cylinder.
    pub fn cylinder(&self) -> Cylinder {
        Cylinder::ones(self.coords.iter().copied())
    }

    pub fn label(&self) -> String {
        let parts: Vec<String> = self.coords.iter().map(|i| i.to_string()).collect();
        format!("{{{}}}", parts.join(","))
    }

    fn holds(&self, bit: impl Fn(usize) -> bool) -> bool {
        self.coords.iter().all(|&i| bit(i))
    }
}

impl Observable for Monomial {
    fn eval(&self, x: &BinaryConfig) -> Rational {
        if self.holds(|i| x.bit(i)) {
            Rational::one()
        } else {
            Rational::zero()
        }
    }

    fn eval_f64(&self, x: &BinaryConfig) -> f64 {
        if self.holds(|i| x.bit(i)) {
            1.0
        } else {
            0.0
        }
    }

    fn as_monomial(&self) -> Option<&Monomial> {
        Some(self)
    }
}

impl Serialize for Monomial {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

#[derive(Debug, Clone)]
pub struct ConstantFn(pub Rational);

impl Observable for ConstantFn {
    fn eval(&self, _: &BinaryConfig) -> Rational {
        self.0.clone()
    }
}

/// Indicator `χ_A` of an explicit finite set.
#[derive(Debug, Clone)]
pub struct Indicator {
    pub set: BTreeSet<BinaryConfig>,
}

impl Observable for Indicator {
    fn eval(&self, x: &BinaryConfig) -> Rational {
        if self.set.contains(x) {
            Rational::one()
        } else {
            Rational::zero()
        }
    }
}

/// Tabulated function; points outside the table evaluate to `default`.
#[derive(Debug, Clone)]
pub struct Table {
    pub values: HashMap<BinaryConfig, Rational>,
    pub default: Rational,
}

impl Observable for Table {
    fn eval(&self, x: &BinaryConfig) -> Rational {
        self.values.get(x).cloned().unwrap_or_else(|| self.default.clone())
    }
}

/// Closure-backed observable.
pub struct FnObservable<F>(pub F);

impl<F: Fn(&BinaryConfig) -> Rational + Send + Sync> Observable for FnObservable<F> {
    fn eval(&self, x: &BinaryConfig) -> Rational {
        (self.0)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::MonteCarlo => "monte-carlo",
        }
    }
}

/// One evaluation of `A_n^ρ φ(x)`.
#[derive(Debug, Clone, Serialize)]
pub struct AveragingReport {
    pub level: usize,
    pub method: Method,
    pub value: f64,
    #[serde(serialize_with = "crate::numeric::serialize_opt_rational")]
    pub exact: Option<Rational>,
    /// Zero for exact evaluations.
    pub stderr: f64,
    pub sample_count: usize,
}

impl AveragingReport {
    fn exact(level: usize, value: Rational, sample_count: usize) -> Self {
        AveragingReport {
            level,
            method: Method::Exact,
            value: to_f64(&value),
            exact: Some(value),
            stderr: 0.0,
            sample_count,
        }
    }
}

/// Numerator over denominator, or `0` when the weight integral is infinite.
fn quotient_or_zero(numerator: Rational, denominator: ExtendedReal) -> Rational {
    match denominator {
        ExtendedReal::Finite(d) => numerator / d,
        ExtendedReal::Infinite => Rational::zero(),
    }
}

fn group_elements(n: usize) -> Result<&'static [Permutation]> {
    static CACHE: [OnceLock<Vec<Permutation>>; MAX_ENUMERATION_DEGREE + 1] = [const { OnceLock::new() }; MAX_ENUMERATION_DEGREE + 1];
    if n > MAX_ENUMERATION_DEGREE {
        return Err(Error::Capacity { what: "average_exact", limit: MAX_ENUMERATION_DEGREE, requested: n });
    }
    if let Some(v) = CACHE[n].get() {
        return Ok(v);
    }
    let elements = enumerate(ChainLevel::new(n)?)?;
    Ok(CACHE[n].get_or_init(|| elements))
}

/// Exact `A_n^ρ φ(x)` by summing over all `n!` elements of `S(n)`.
pub fn average_exact(level: ChainLevel, rho: &Cocycle, phi: &dyn Observable, x: &BinaryConfig) -> Result<AveragingReport> {
    let elements = group_elements(level.n())?;
    if level.n() > x.len() {
        return Err(Error::DegreeOverflow { degree: level.n(), window: x.len() });
    }
    let mut numerator = Rational::zero();
    let mut denominator = Rational::zero();
    for k in elements {
        let weight = rho.eval(k, x)?;
        let value = phi.eval(&act(k, x)?);
        numerator += value * &weight;
        denominator += weight;
    }
    let value = quotient_or_zero(numerator, ExtendedReal::Finite(denominator));
    Ok(AveragingReport::exact(level.n(), value, elements.len()))
}

/// Exact `A_n^ρ φ(x)` as a weighted sum over the distinct points of the orbit.
pub fn average_over_orbit(level: ChainLevel, rho: &Cocycle, phi: &dyn Observable, x: &BinaryConfig) -> Result<AveragingReport> {
    let n = level.n();
    if n > x.len() {
        return Err(Error::DegreeOverflow { degree: n, window: x.len() });
    }
    let size = orbit_size(n, x.count_ones_prefix(n));
    if size > MAX_ORBIT_SIZE as f64 {
        return Err(Error::Capacity { what: "average_over_orbit", limit: MAX_ORBIT_SIZE, requested: size as usize });
    }
    let points = orbit(level, x)?;
    let mut numerator = Rational::zero();
    let mut denominator = Rational::zero();
    for (y, k) in &points {
        let weight = rho.eval(k, x)?;
        numerator += phi.eval(y) * &weight;
        denominator += weight;
    }
    Ok(AveragingReport::exact(n, numerator / denominator, points.len()))
}

fn orbit_size(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Closed form of `A_n^1 φ_S(x)`: coordinates of `S` above `n` are fixed, and
/// the `s` coordinates inside `{1..n}` see `k(k-1)…(k-s+1) / n(n-1)…(n-s+1)`
/// where `k` counts the ones among `x_1..x_n`.
pub fn monomial_average_uniform(level: ChainLevel, monomial: &Monomial, x: &BinaryConfig) -> Result<Rational> {
    let n = level.n();
    if n > x.len() || monomial.coords().iter().any(|&i| i > x.len()) {
        return Err(Error::DegreeOverflow { degree: n.max(monomial.coords().last().copied().unwrap_or(0)), window: x.len() });
    }
    if monomial.coords().iter().any(|&i| i > n && !x.bit(i)) {
        return Ok(Rational::zero());
    }
    let inside = monomial.coords().iter().filter(|&&i| i <= n).count();
    let k = x.count_ones_prefix(n);
    Ok(falling_factorial(k, inside) / falling_factorial(n, inside))
}

/// Exact average by the cheapest available route.
pub fn average_exact_fast(level: ChainLevel, rho: &Cocycle, phi: &dyn Observable, x: &BinaryConfig) -> Result<AveragingReport> {
    if rho.is_constant_one() {
        if let Some(m) = phi.as_monomial() {
            let value = monomial_average_uniform(level, m, x)?;
            let count = orbit_size(level.n(), x.count_ones_prefix(level.n())) as usize;
            return Ok(AveragingReport::exact(level.n(), value, count));
        }
    }
    average_over_orbit(level, rho, phi, x)
}

/// Self-normalized ratio estimate and its delta-method standard error.
///
/// A constant sample returns that constant exactly. Otherwise the estimate is
/// monotone in the values: pointwise smaller values never give a larger result.
fn ratio_estimate(values: &[f64], weights: &[f64]) -> (f64, f64) {
    if values.iter().all(|&z| z == values[0]) {
        return (values[0], 0.0);
    }
    let total = pairwise_sum(weights);
    let weighted: Vec<f64> = values.iter().zip(weights).map(|(z, w)| w * z).collect();
    let estimate = pairwise_sum(&weighted) / total;
    let squares: Vec<f64> = values
        .iter()
        .zip(weights)
        .map(|(z, w)| (w * (z - estimate)).powi(2))
        .collect();
    (estimate, pairwise_sum(&squares).sqrt() / total)
}

/// Moves an injection drawn at a higher level down to level `n`: images that
/// still lie in `{0..n-1}` are kept, the others are redrawn uniformly among
/// the free slots. Uniform injections map to uniform injections, and an
/// all-`usize::MAX` buffer becomes a fresh uniform draw of the images `k⁻¹(i)`
/// (0-based) for Haar `k ∈ S(n)`. Coordinates above `n` map to themselves.
fn restrict_injection<R: Rng + ?Sized>(coords: &[usize], images: &mut [usize], n: usize, rng: &mut R) {
    for s in 0..coords.len() {
        if coords[s] > n {
            images[s] = coords[s] - 1;
        } else if images[s] >= n {
            // Slots not yet visited hold images >= n, so they never collide.
            images[s] = loop {
                let candidate = rng.random_range(0..n);
                if !images.contains(&candidate) {
                    break candidate;
                }
            };
        }
    }
}

/// `(c / N, se)` for `c` ones among `N` unit-weight 0-1 values; agrees with
/// [`ratio_estimate`] on such samples.
fn count_estimate(ones: usize, total: usize) -> (f64, f64) {
    let n = total as f64;
    let r = ones as f64 / n;
    if ones == 0 || ones == total {
        return (r, 0.0);
    }
    let squares = ones as f64 * (1.0 - r).powi(2) + (n - ones as f64) * r * r;
    (r, squares.sqrt() / n)
}

/// Monte Carlo `A_n^ρ φ(x)` from `samples` independent Haar draws.
pub fn average_mc<R: Rng + ?Sized>(
    level: ChainLevel,
    rho: &Cocycle,
    phi: &dyn Observable,
    x: &BinaryConfig,
    samples: usize,
    rng: &mut R,
) -> Result<AveragingReport> {
    let reports = mc_levels(&[level.n()], rho, &[phi], x, samples, rng)?;
    Ok(reports.into_iter().next().expect("one level").into_iter().next().expect("one observable"))
}

/// Coupled Monte Carlo estimates for several levels and observables.
/// Returns `reports[level_index][observable_index]`.
fn mc_levels<R: Rng + ?Sized>(
    levels: &[usize],
    rho: &Cocycle,
    phis: &[&dyn Observable],
    x: &BinaryConfig,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<Vec<AveragingReport>>> {
    if samples < 2 {
        return Err(Error::InvalidParameter("Monte Carlo needs at least two samples".into()));
    }
    let top = *levels.iter().max().expect("non-empty level list");
    if top > x.len() {
        return Err(Error::DegreeOverflow { degree: top, window: x.len() });
    }
    // Descending order for the coupling; results are returned in input order.
    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&a, &b| levels[b].cmp(&levels[a]));

    let monomials: Option<Vec<&Monomial>> = phis.iter().map(|p| p.as_monomial()).collect();
    if let Some(monomials) = monomials.filter(|_| rho.is_constant_one()) {
        let union: Vec<usize> = monomials
            .iter()
            .flat_map(|m| m.coords().iter().copied())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if union.iter().any(|&c| c > x.len()) {
            return Err(Error::DegreeOverflow { degree: *union.last().unwrap(), window: x.len() });
        }
        let slots: Vec<Vec<usize>> = monomials
            .iter()
            .map(|m| m.coords().iter().map(|c| union.binary_search(c).expect("coordinate in union")).collect())
            .collect();
        let bits = x.bits();
        let mut ones = vec![vec![0usize; phis.len()]; levels.len()];
        let mut images = vec![usize::MAX; union.len()];
        for _ in 0..samples {
            images.fill(usize::MAX);
            for &li in &order {
                restrict_injection(&union, &mut images, levels[li], rng);
                for (pi, slot) in slots.iter().enumerate() {
                    ones[li][pi] += usize::from(slot.iter().all(|&s| bits[images[s]]));
                }
            }
        }
        return Ok(levels
            .iter()
            .zip(&ones)
            .map(|(&n, counts)| {
                counts
                    .iter()
                    .map(|&c| {
                        let (value, stderr) = count_estimate(c, samples);
                        AveragingReport { level: n, method: Method::MonteCarlo, value, exact: None, stderr, sample_count: samples }
                    })
                    .collect()
            })
            .collect());
    }

    let mut values = vec![vec![Vec::with_capacity(samples); phis.len()]; levels.len()];
    let mut weights = vec![Vec::with_capacity(samples); levels.len()];
    for _ in 0..samples {
        let mut g = haar_sample(ChainLevel::new(top)?, rng);
        for &li in &order {
            g = g.project_to(levels[li]);
            let y = act(&g, x)?;
            weights[li].push(rho.eval_f64(&g, x)?);
            for (pi, phi) in phis.iter().enumerate() {
                values[li][pi].push(phi.eval_f64(&y));
            }
        }
    }

    Ok(levels
        .iter()
        .enumerate()
        .map(|(li, &n)| {
            values[li]
                .iter()
                .map(|vals| {
                    let (value, stderr) = ratio_estimate(vals, &weights[li]);
                    AveragingReport { level: n, method: Method::MonteCarlo, value, exact: None, stderr, sample_count: samples }
                })
                .collect()
        })
        .collect())
}

/// Increasing list of chain levels visited by the limit detector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Schedule {
    levels: Vec<usize>,
}

impl Schedule {
    pub fn new(levels: Vec<usize>) -> Result<Self> {
        if levels.is_empty() || levels[0] == 0 || levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!("schedule {levels:?} must be strictly increasing and start at >= 1")));
        }
        Ok(Schedule { levels })
    }

    /// `1, 2, 4, …` up to `top`, with `top` itself appended when it is not a power of two.
    pub fn geometric(top: usize) -> Result<Self> {
        if top == 0 {
            return Err(Error::InvalidParameter("empty schedule".into()));
        }
        let mut levels: Vec<usize> = std::iter::successors(Some(1usize), |&n| n.checked_mul(2))
            .take_while(|&n| n <= top)
            .collect();
        if *levels.last().unwrap() != top {
            levels.push(top);
        }
        Ok(Schedule { levels })
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn top(&self) -> usize {
        *self.levels.last().unwrap()
    }
}

/// Knobs of the limit detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitConfig {
    pub tolerance: f64,
    pub mc_samples: usize,
    pub exact_crossover: usize,
}

impl Default for LimitConfig {
    fn default() -> Self {
        LimitConfig { tolerance: DEFAULT_TOLERANCE, mc_samples: DEFAULT_MC_SAMPLES, exact_crossover: EXACT_CROSSOVER }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitDiagnostics {
    /// `|v_last − v_prev|`, absent for one-level schedules.
    pub last_gap: Option<f64>,
    /// `tolerance + 3 · sqrt(se_prev² + se_last²)`.
    pub threshold: Option<f64>,
    /// First level from which every consecutive pair passes the criterion.
    pub stable_from: Option<usize>,
    pub reason: String,
}

/// Per-level averages and the detected limit, if any.
#[derive(Debug, Clone, Serialize)]
pub struct LimitReport {
    pub levels: Vec<AveragingReport>,
    pub limit: Option<f64>,
    pub converged: bool,
    pub diagnostics: LimitDiagnostics,
}

impl LimitReport {
    pub(crate) fn from_levels(levels: Vec<AveragingReport>, tolerance: f64) -> Self {
        let passes = |a: &AveragingReport, b: &AveragingReport| {
            let threshold = tolerance + 3.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
            ((b.value - a.value).abs(), threshold)
        };
        if levels.len() < 2 {
            return LimitReport {
                levels,
                limit: None,
                converged: false,
                diagnostics: LimitDiagnostics {
                    last_gap: None,
                    threshold: None,
                    stable_from: None,
                    reason: "schedule has a single level".into(),
                },
            };
        }
        let checks: Vec<(f64, f64)> = levels.windows(2).map(|w| passes(&w[0], &w[1])).collect();
        let (gap, threshold) = *checks.last().unwrap();
        let converged = gap < threshold;
        let stable_from = if converged {
            let failing_tail = checks.iter().rposition(|(g, t)| g >= t);
            Some(levels[failing_tail.map_or(0, |i| i + 1)].level)
        } else {
            None
        };
        let reason = if converged {
            format!("last two levels agree: gap {gap:e} < {threshold:e}")
        } else {
            format!("last two levels differ: gap {gap:e} >= {threshold:e}")
        };
        LimitReport {
            limit: converged.then(|| levels.last().unwrap().value),
            levels,
            converged,
            diagnostics: LimitDiagnostics { last_gap: Some(gap), threshold: Some(threshold), stable_from, reason },
        }
    }

    /// `level,method,value,stderr,samples` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,method,value,stderr,samples\n");
        for r in &self.levels {
            let _ = writeln!(out, "{},{},{},{},{}", r.level, r.method.tag(), r.value, r.stderr, r.sample_count);
        }
        out
    }
}

/// Detects `lim_n A_n^ρ φ(x)` along `schedule`.
pub fn limit_average<R: Rng + ?Sized>(
    rho: &Cocycle,
    phi: &dyn Observable,
    x: &BinaryConfig,
    schedule: &Schedule,
    config: &LimitConfig,
    rng: &mut R,
) -> Result<LimitReport> {
    Ok(limit_average_many(rho, &[phi], x, schedule, config, rng)?.pop().expect("one report"))
}

/// [`limit_average`] for several observables sharing the same Haar draws.
pub fn limit_average_many<R: Rng + ?Sized>(
    rho: &Cocycle,
    phis: &[&dyn Observable],
    x: &BinaryConfig,
    schedule: &Schedule,
    config: &LimitConfig,
    rng: &mut R,
) -> Result<Vec<LimitReport>> {
    if config.tolerance.is_nan() || config.tolerance <= 0.0 {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    if schedule.top() > x.len() {
        return Err(Error::DegreeOverflow { degree: schedule.top(), window: x.len() });
    }
    let crossover = config.exact_crossover.min(MAX_ENUMERATION_DEGREE.max(config.exact_crossover));
    let mut per_phi: Vec<Vec<AveragingReport>> = vec![Vec::with_capacity(schedule.levels().len()); phis.len()];
    let (exact_levels, mc): (Vec<usize>, Vec<usize>) = schedule.levels().iter().partition(|&&n| n <= crossover);
    for &n in &exact_levels {
        let level = ChainLevel::new(n)?;
        for (pi, phi) in phis.iter().enumerate() {
            per_phi[pi].push(average_exact_fast(level, rho, *phi, x)?);
        }
    }
    if !mc.is_empty() {
        for level_reports in mc_levels(&mc, rho, phis, x, config.mc_samples, rng)? {
            for (pi, report) in level_reports.into_iter().enumerate() {
                per_phi[pi].push(report);
            }
        }
    }
    Ok(per_phi.into_iter().map(|levels| LimitReport::from_levels(levels, config.tolerance)).collect())
}

/// Outcome of one exact identity check, with the first failing witness.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub checked: usize,
    pub mismatches: usize,
    pub witness: Option<String>,
}

impl CheckReport {
    fn new() -> Self {
        CheckReport { checked: 0, mismatches: 0, witness: None }
    }

    fn record(&mut self, ok: bool, witness: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.mismatches += 1;
            if self.witness.is_none() {
                self.witness = Some(witness());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.mismatches == 0 && self.checked > 0
    }
}

/// Verifies `A_m^ρ(A_n^ρ φ) = A_m^ρ φ` on every atom of `ν`.
pub fn tower_check(m: usize, n: usize, rho: &Cocycle, phi: &dyn Observable, nu: &AtomicMeasure) -> Result<CheckReport> {
    tower_check_with_cache_hook(m, n, rho, phi, nu, |_, _| {})
}

/// [`tower_check`] with a hook applied to every cached inner average, for
/// fault injection.
pub fn tower_check_with_cache_hook(
    m: usize,
    n: usize,
    rho: &Cocycle,
    phi: &dyn Observable,
    nu: &AtomicMeasure,
    hook: impl Fn(&BinaryConfig, &mut Rational),
) -> Result<CheckReport> {
    if n > m || m > 5 {
        return Err(Error::InvalidParameter(format!("tower check needs 1 <= n <= m <= 5, got n={n}, m={m}")));
    }
    let outer = ChainLevel::new(m)?;
    let inner = ChainLevel::new(n)?;
    let mut cache = Table { values: HashMap::new(), default: Rational::zero() };
    for (x, _) in nu.atoms() {
        for (y, _) in orbit(outer, x)? {
            if let Entry::Vacant(slot) = cache.values.entry(y) {
                let mut value = average_exact(inner, rho, phi, slot.key())?.exact.expect("exact");
                hook(slot.key(), &mut value);
                slot.insert(value);
            }
        }
    }
    let mut report = CheckReport::new();
    for (x, _) in nu.atoms() {
        let lhs = average_exact(outer, rho, &cache, x)?.exact.expect("exact");
        let rhs = average_exact(outer, rho, phi, x)?.exact.expect("exact");
        report.record(lhs == rhs, || format!("{x}: A_m(A_n φ) = {} but A_m φ = {}", format_rational(&lhs), format_rational(&rhs)));
    }
    Ok(report)
}

/// Result of the conditional-expectation sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionalExpectationReport {
    pub orbit_classes: usize,
    pub sets: CheckReport,
    /// `ν(T_k x) = ρ(k, x) ν(x)` for the generators of `S(n)` on the support.
    pub measure_has_cocycle: bool,
}

impl ConditionalExpectationReport {
    pub fn passed(&self) -> bool {
        self.sets.passed() && self.measure_has_cocycle
    }
}

/// Sweeps every union `A` of `S(n)`-orbit classes of the window and checks
/// `∫_A φ dν = ∫_A A_n^ρ φ dν` exactly.
pub fn conditional_expectation_check(
    n: usize,
    rho: &Cocycle,
    phi: &dyn Observable,
    nu: &AtomicMeasure,
) -> Result<ConditionalExpectationReport> {
    const MAX_CLASSES: usize = 20;
    let level = ChainLevel::new(n)?;
    if n > 5 {
        return Err(Error::Capacity { what: "conditional_expectation_check", limit: 5, requested: n });
    }
    if nu.window() > 16 {
        return Err(Error::Capacity { what: "conditional_expectation_check window", limit: 16, requested: nu.window() });
    }
    // Class key: ones among the first n coordinates plus the untouched tail.
    let mut classes: BTreeMap<(usize, Vec<bool>), (Rational, Rational)> = BTreeMap::new();
    for x in BinaryConfig::all(nu.window()) {
        let key = (x.count_ones_prefix(n), x.bits()[n.min(x.len())..].to_vec());
        let entry = classes.entry(key).or_insert_with(|| (Rational::zero(), Rational::zero()));
        let mass = nu.mass_at(&x);
        if !mass.is_zero() {
            entry.0 += phi.eval(&x) * &mass;
            entry.1 += average_exact(level, rho, phi, &x)?.exact.expect("exact") * &mass;
        }
    }
    if classes.len() > MAX_CLASSES {
        return Err(Error::Capacity { what: "orbit-class sweep", limit: MAX_CLASSES, requested: classes.len() });
    }
    let parts: Vec<_> = classes.values().collect();
    let mut sets = CheckReport::new();
    for mask in 0u64..(1u64 << parts.len()) {
        let (mut lhs, mut rhs) = (Rational::zero(), Rational::zero());
        for (j, (a, b)) in parts.iter().enumerate() {
            if mask >> j & 1 == 1 {
                lhs += a;
                rhs += b;
            }
        }
        sets.record(lhs == rhs, || format!("class mask {mask:#b}: {} != {}", format_rational(&lhs), format_rational(&rhs)));
    }

    let mut measure_has_cocycle = true;
    'outer: for (x, mass) in nu.atoms() {
        for i in 1..n {
            let k = Permutation::swap(i, i + 1);
            if nu.mass_at(&act(&k, x)?) != rho.eval(&k, x)? * mass {
                measure_has_cocycle = false;
                break 'outer;
            }
        }
    }
    Ok(ConditionalExpectationReport { orbit_classes: parts.len(), sets, measure_has_cocycle })
}

/// Fubini identity for `dν̃ = ρ(k, x) dμ_{S(n)} dν`.
#[derive(Debug, Clone, Serialize)]
pub struct FubiniReport {
    #[serde(serialize_with = "crate::numeric::serialize_rational")]
    pub lhs: Rational,
    #[serde(serialize_with = "crate::numeric::serialize_rational")]
    pub rhs: Rational,
    /// `∫ ρ(k₀, x) dν(x) = ν(X)` for every `k₀`, i.e. `ν̃` has the mass of `ν`.
    pub kernel_normalized: bool,
}

impl FubiniReport {
    pub fn passed(&self) -> bool {
        self.lhs == self.rhs && self.kernel_normalized
    }
}

/// `Σ_x Σ_k φ(T_k x) ρ(k, x) ν(x) / n! = Σ_x φ(x) ν(x)`, exactly.
pub fn fubini_check(n: usize, rho: &Cocycle, phi: &dyn Observable, nu: &AtomicMeasure) -> Result<FubiniReport> {
    let elements = group_elements(n)?;
    let order = int(elements.len() as i64);
    let mut lhs = Rational::zero();
    let mut rhs = Rational::zero();
    let mut kernel_mass = vec![Rational::zero(); elements.len()];
    for (x, mass) in nu.atoms() {
        rhs += phi.eval(x) * mass;
        for (j, k) in elements.iter().enumerate() {
            let weighted = rho.eval(k, x)? * mass;
            lhs += phi.eval(&act(k, x)?) * &weighted;
            kernel_mass[j] += weighted;
        }
    }
    let total = nu.total();
    Ok(FubiniReport {
        lhs: lhs / order,
        rhs,
        kernel_normalized: kernel_mass.iter().all(|m| *m == total),
    })
}

/// `A_n^ρ φ(T_k x) = A_n^ρ φ(x)` for every `k ∈ S(n)`.
pub fn check_orbit_invariance(level: ChainLevel, rho: &Cocycle, phi: &dyn Observable, x: &BinaryConfig) -> Result<CheckReport> {
    let base = average_exact(level, rho, phi, x)?.exact.expect("exact");
    let mut report = CheckReport::new();
    for k in group_elements(level.n())? {
        let moved = act(k, x)?;
        let value = average_exact(level, rho, phi, &moved)?.exact.expect("exact");
        report.record(value == base, || format!("k={k}: {} != {}", format_rational(&value), format_rational(&base)));
    }
    Ok(report)
}
