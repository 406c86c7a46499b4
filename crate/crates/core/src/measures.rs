//! Measures on configuration windows: atomic (exact rational), product
//! Bernoulli, convex mixtures, Beta-mixed (Pólya) exchangeable measures and
//! σ-finite orbit-counting measures.
//!
//! Sets are described by [`Cylinder`]s, which pin finitely many coordinates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{act, BinaryConfig, Permutation};
use crate::numeric::{format_rational, parse_rational, to_f64, ExtendedReal, Rational};

/// A cylinder set: finitely many coordinates pinned to fixed bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Cylinder {
    pins: BTreeMap<usize, bool>,
}

impl Cylinder {
    /// The whole space.
    pub fn everything() -> Self {
        Cylinder::default()
    }

    pub fn pin(mut self, coordinate: usize, value: bool) -> Self {
        assert!(coordinate >= 1, "coordinates are 1-based");
        self.pins.insert(coordinate, value);
        self
    }

    /// `{x : x_i = 1 for all i in coords}`.
    pub fn ones(coords: impl IntoIterator<Item = usize>) -> Self {
        coords.into_iter().fold(Cylinder::everything(), |c, i| c.pin(i, true))
    }

    pub fn pins(&self) -> &BTreeMap<usize, bool> {
        &self.pins
    }

    pub fn max_coordinate(&self) -> usize {
        self.pins.keys().next_back().copied().unwrap_or(0)
    }

    pub fn pinned_ones(&self) -> usize {
        self.pins.values().filter(|&&v| v).count()
    }

    pub fn pinned_zeros(&self) -> usize {
        self.pins.values().filter(|&&v| !v).count()
    }

    pub fn contains(&self, x: &BinaryConfig) -> bool {
        self.pins.iter().all(|(&i, &v)| i <= x.len() && x.bit(i) == v)
    }

    /// Every cylinder pinning some subset of `{1..depth}` (there are `3^depth`).
    pub fn all_up_to_depth(depth: usize) -> Vec<Cylinder> {
        let mut out = vec![Cylinder::everything()];
        for i in 1..=depth {
            let mut next = Vec::with_capacity(out.len() * 3);
            for c in out {
                next.push(c.clone().pin(i, false));
                next.push(c.clone().pin(i, true));
                next.push(c);
            }
            out = next;
        }
        out
    }
}

impl std::fmt::Display for Cylinder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.pins.is_empty() {
            return f.write_str("{}");
        }
        let parts: Vec<String> = self
            .pins
            .iter()
            .map(|(i, v)| format!("x{}={}", i, u8::from(*v)))
            .collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Finitely supported measure with exact rational masses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomicMeasure {
    window: usize,
    atoms: BTreeMap<BinaryConfig, Rational>,
}

impl AtomicMeasure {
    /// The zero measure on `{0,1}^window`.
    pub fn zero(window: usize) -> Self {
        AtomicMeasure { window, atoms: BTreeMap::new() }
    }

    pub fn from_atoms(window: usize, atoms: impl IntoIterator<Item = (BinaryConfig, Rational)>) -> Result<Self> {
        let mut m = Self::zero(window);
        for (x, mass) in atoms {
            m.add_mass(x, mass)?;
        }
        Ok(m)
    }

    pub fn dirac(x: BinaryConfig) -> Self {
        let window = x.len();
        let mut atoms = BTreeMap::new();
        atoms.insert(x, Rational::one());
        AtomicMeasure { window, atoms }
    }

    /// Uniform probability on the given distinct points.
    pub fn uniform(window: usize, points: impl IntoIterator<Item = BinaryConfig>) -> Result<Self> {
        let points: BTreeSet<BinaryConfig> = points.into_iter().collect();
        if points.is_empty() {
            return Err(Error::InvalidParameter("uniform measure on an empty set".into()));
        }
        let mass = Rational::new(1.into(), points.len().into());
        Self::from_atoms(window, points.into_iter().map(|x| (x, mass.clone())))
    }

    pub fn add_mass(&mut self, x: BinaryConfig, mass: Rational) -> Result<()> {
        if x.len() != self.window {
            return Err(Error::WindowMismatch { expected: self.window, actual: x.len() });
        }
        if mass.is_negative() {
            return Err(Error::InvalidParameter(format!("negative mass at {x}")));
        }
        if mass.is_zero() {
            return Ok(());
        }
        *self.atoms.entry(x).or_insert_with(Rational::zero) += mass;
        Ok(())
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn mass_at(&self, x: &BinaryConfig) -> Rational {
        self.atoms.get(x).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&BinaryConfig, &Rational)> {
        self.atoms.iter()
    }

    pub fn support(&self) -> BTreeSet<BinaryConfig> {
        self.atoms.keys().cloned().collect()
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total(&self) -> Rational {
        self.atoms.values().fold(Rational::zero(), |acc, m| acc + m)
    }

    pub fn is_normalized(&self) -> bool {
        self.total().is_one()
    }

    pub fn normalized(&self) -> Result<Self> {
        let total = self.total();
        if total.is_zero() {
            return Err(Error::ZeroMass("total mass of the zero measure".into()));
        }
        Ok(self.scaled(&total.recip()))
    }

    pub fn scaled(&self, c: &Rational) -> Self {
        assert!(!c.is_negative());
        if c.is_zero() {
            return Self::zero(self.window);
        }
        AtomicMeasure {
            window: self.window,
            atoms: self.atoms.iter().map(|(x, m)| (x.clone(), m * c)).collect(),
        }
    }

    pub fn plus(&self, other: &AtomicMeasure) -> Result<Self> {
        let mut out = self.clone();
        for (x, m) in &other.atoms {
            out.add_mass(x.clone(), m.clone())?;
        }
        Ok(out)
    }

    /// Restriction to the atoms satisfying `keep`.
    pub fn restricted(&self, keep: impl Fn(&BinaryConfig) -> bool) -> Self {
        AtomicMeasure {
            window: self.window,
            atoms: self.atoms.iter().filter(|(x, _)| keep(x)).map(|(x, m)| (x.clone(), m.clone())).collect(),
        }
    }

    pub fn mass(&self, a: &Cylinder) -> Rational {
        self.atoms
            .iter()
            .filter(|(x, _)| a.contains(x))
            .fold(Rational::zero(), |acc, (_, m)| acc + m)
    }

    pub fn mass_of_set(&self, set: &BTreeSet<BinaryConfig>) -> Rational {
        set.iter().fold(Rational::zero(), |acc, x| acc + self.mass_at(x))
    }

    /// Canonical text: a header line then one `bits mass` line per atom, sorted.
    pub fn to_canonical_text(&self) -> String {
        let mut out = format!("atomic window={}\n", self.window);
        for (x, m) in &self.atoms {
            let _ = writeln!(out, "{x} {}", format_rational(m));
        }
        out
    }

    pub fn from_canonical_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty measure text".into()))?;
        let window = header
            .trim()
            .strip_prefix("atomic window=")
            .and_then(|w| w.parse::<usize>().ok())
            .ok_or_else(|| Error::Parse(format!("bad header {header:?}")))?;
        let mut m = Self::zero(window);
        for line in lines {
            let (bits, mass) = line
                .trim()
                .split_once(' ')
                .ok_or_else(|| Error::Parse(format!("bad atom line {line:?}")))?;
            m.add_mass(bits.parse()?, parse_rational(mass)?)?;
        }
        Ok(m)
    }
}

/// Product of independent Bernoulli coordinates, `P(x_i = 1) = p_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductBernoulli {
    params: Vec<Rational>,
    params_f64: Vec<f64>,
    exchangeable: bool,
}

impl ProductBernoulli {
    pub fn new(params: Vec<Rational>) -> Result<Self> {
        if let Some(p) = params.iter().find(|p| !p.is_positive() || **p >= Rational::one()) {
            return Err(Error::InvalidParameter(format!(
                "Bernoulli parameter {} outside (0,1)",
                format_rational(p)
            )));
        }
        let params_f64 = params.iter().map(to_f64).collect();
        let exchangeable = params.windows(2).all(|w| w[0] == w[1]);
        Ok(ProductBernoulli { params, params_f64, exchangeable })
    }

    /// The exchangeable product `B(p)^{⊗window}`.
    pub fn constant(p: Rational, window: usize) -> Result<Self> {
        Self::new(vec![p; window])
    }

    pub fn window(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[Rational] {
        &self.params
    }

    pub fn param_f64(&self, i: usize) -> f64 {
        self.params_f64[i - 1]
    }

    pub fn is_exchangeable(&self) -> bool {
        self.exchangeable
    }

    fn coordinate_mass(&self, i: usize, bit: bool) -> Rational {
        let p = &self.params[i - 1];
        if bit {
            p.clone()
        } else {
            Rational::one() - p
        }
    }

    pub fn mass(&self, a: &Cylinder) -> Rational {
        a.pins().iter().fold(Rational::one(), |acc, (&i, &v)| {
            if i > self.window() {
                Rational::zero()
            } else {
                acc * self.coordinate_mass(i, v)
            }
        })
    }

    pub fn atom_mass(&self, x: &BinaryConfig) -> Rational {
        (1..=self.window()).fold(Rational::one(), |acc, i| acc * self.coordinate_mass(i, x.bit(i)))
    }

    fn log_atom_mass(&self, x: &BinaryConfig) -> f64 {
        x.bits()
            .iter()
            .zip(&self.params_f64)
            .map(|(&b, &p)| if b { p.ln() } else { (1.0 - p).ln() })
            .sum()
    }

    /// `ν(T_g x) / ν(x)`, a product over the coordinates whose bit changes.
    pub fn rn_derivative(&self, g: &Permutation, x: &BinaryConfig) -> Result<Rational> {
        let y = act(g, x)?;
        let mut ratio = Rational::one();
        for i in 1..=g.degree() {
            if x.bit(i) != y.bit(i) {
                ratio *= self.coordinate_mass(i, y.bit(i));
                ratio /= self.coordinate_mass(i, x.bit(i));
            }
        }
        Ok(ratio)
    }

    pub fn rn_derivative_f64(&self, g: &Permutation, x: &BinaryConfig) -> Result<f64> {
        let y = act(g, x)?;
        let mut log_ratio = 0.0;
        for i in 1..=g.degree() {
            if x.bit(i) != y.bit(i) {
                let p = self.params_f64[i - 1];
                let odds = (p / (1.0 - p)).ln();
                log_ratio += if y.bit(i) { odds } else { -odds };
            }
        }
        Ok(log_ratio.exp())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BinaryConfig {
        BinaryConfig::new(self.params_f64.iter().map(|&p| rng.random::<f64>() < p).collect())
    }
}

/// Beta(α, β)-mixed exchangeable measure: draw `p ~ Beta(α, β)`, then i.i.d. `B(p)` bits.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyaMeasure {
    alpha: Rational,
    beta: Rational,
    window: usize,
}

fn rising(a: &Rational, k: usize) -> Rational {
    (0..k).fold(Rational::one(), |acc, j| acc * (a + Rational::from_integer(j.into())))
}

impl PolyaMeasure {
    pub fn new(alpha: Rational, beta: Rational, window: usize) -> Result<Self> {
        if !alpha.is_positive() || !beta.is_positive() {
            return Err(Error::InvalidParameter("Beta parameters must be positive".into()));
        }
        Ok(PolyaMeasure { alpha, beta, window })
    }

    pub fn alpha(&self) -> &Rational {
        &self.alpha
    }

    pub fn beta(&self) -> &Rational {
        &self.beta
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// `E[p^s (1-p)^t]` for `s` pinned ones and `t` pinned zeros.
    fn moment(&self, s: usize, t: usize) -> Rational {
        rising(&self.alpha, s) * rising(&self.beta, t) / rising(&(&self.alpha + &self.beta), s + t)
    }

    pub fn mass(&self, a: &Cylinder) -> Rational {
        if a.max_coordinate() > self.window {
            return Rational::zero();
        }
        self.moment(a.pinned_ones(), a.pinned_zeros())
    }

    pub fn atom_mass(&self, x: &BinaryConfig) -> Rational {
        let k = x.count_ones();
        self.moment(k, x.len() - k)
    }

    /// Draws `(x, p)` with `p` the latent mixing parameter.
    pub fn sample_with_parameter<R: Rng + ?Sized>(&self, rng: &mut R) -> (BinaryConfig, f64) {
        let beta = rand_distr::Beta::new(to_f64(&self.alpha), to_f64(&self.beta)).expect("positive parameters");
        let p: f64 = beta.sample(rng);
        let x = BinaryConfig::new((0..self.window).map(|_| rng.random::<f64>() < p).collect());
        (x, p)
    }
}

/// Convex combination `Σ_j α_j ν_j` with exact weights summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    weights: Vec<Rational>,
    components: Vec<Measure>,
}

impl Mixture {
    pub fn new(weights: Vec<Rational>, components: Vec<Measure>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::InvalidParameter("mixture needs one weight per component".into()));
        }
        if weights.iter().any(|w| !w.is_positive()) {
            return Err(Error::InvalidParameter("mixture weights must be positive".into()));
        }
        let total = weights.iter().fold(Rational::zero(), |acc, w| acc + w);
        if !total.is_one() {
            return Err(Error::InvalidParameter(format!(
                "mixture weights sum to {}, not 1",
                format_rational(&total)
            )));
        }
        let window = components[0].window();
        if let Some(c) = components.iter().find(|c| c.window() != window) {
            return Err(Error::WindowMismatch { expected: window, actual: c.window() });
        }
        Ok(Mixture { weights, components })
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn components(&self) -> &[Measure] {
        &self.components
    }
}

/// Latent information produced alongside a sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Latent {
    /// Index of the mixture component the draw came from.
    pub component: Option<usize>,
    /// Mixing parameter of a Pólya draw.
    pub parameter: Option<f64>,
}

/// The finite measures the library samples from and integrates against.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Atomic(AtomicMeasure),
    Product(ProductBernoulli),
    Mixture(Mixture),
    Polya(PolyaMeasure),
}

impl Measure {
    pub fn window(&self) -> usize {
        match self {
            Measure::Atomic(m) => m.window(),
            Measure::Product(m) => m.window(),
            Measure::Mixture(m) => m.components[0].window(),
            Measure::Polya(m) => m.window(),
        }
    }

    pub fn total_mass(&self) -> Rational {
        match self {
            Measure::Atomic(m) => m.total(),
            _ => Rational::one(),
        }
    }

    pub fn mass(&self, a: &Cylinder) -> Rational {
        match self {
            Measure::Atomic(m) => m.mass(a),
            Measure::Product(m) => m.mass(a),
            Measure::Polya(m) => m.mass(a),
            Measure::Mixture(m) => m
                .weights
                .iter()
                .zip(&m.components)
                .fold(Rational::zero(), |acc, (w, c)| acc + w * c.mass(a)),
        }
    }

    pub fn atom_mass(&self, x: &BinaryConfig) -> Rational {
        match self {
            Measure::Atomic(m) => m.mass_at(x),
            Measure::Product(m) => m.atom_mass(x),
            Measure::Polya(m) => m.atom_mass(x),
            Measure::Mixture(m) => m
                .weights
                .iter()
                .zip(&m.components)
                .fold(Rational::zero(), |acc, (w, c)| acc + w * c.atom_mass(x)),
        }
    }

    fn log_atom_mass(&self, x: &BinaryConfig) -> f64 {
        match self {
            Measure::Product(m) => m.log_atom_mass(x),
            Measure::Mixture(m) => {
                let logs: Vec<f64> = m
                    .weights
                    .iter()
                    .zip(&m.components)
                    .map(|(w, c)| to_f64(w).ln() + c.log_atom_mass(x))
                    .collect();
                let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if top == f64::NEG_INFINITY {
                    return top;
                }
                top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln()
            }
            _ => to_f64(&self.atom_mass(x)).ln(),
        }
    }

    /// Invariance under every finite permutation of coordinates.
    pub fn is_exchangeable(&self) -> bool {
        match self {
            Measure::Atomic(m) => m.atoms().all(|(x, mass)| {
                // Equal mass on each full rearrangement class.
                (1..x.len()).all(|i| {
                    let y = act(&Permutation::swap(i, i + 1), x).expect("inside window");
                    m.mass_at(&y) == *mass
                })
            }),
            Measure::Product(m) => m.is_exchangeable(),
            Measure::Polya(_) => true,
            Measure::Mixture(m) => m.components.iter().all(Measure::is_exchangeable),
        }
    }

    /// Radon–Nikodym cocycle `ν(T_g x) / ν(x)`.
    pub fn rn_derivative(&self, g: &Permutation, x: &BinaryConfig) -> Result<Rational> {
        if x.len() != self.window() {
            return Err(Error::WindowMismatch { expected: self.window(), actual: x.len() });
        }
        if g.is_identity() {
            return Ok(Rational::one());
        }
        match self {
            Measure::Product(m) => m.rn_derivative(g, x),
            _ if self.is_exchangeable_fast() => {
                act(g, x)?;
                Ok(Rational::one())
            }
            _ => {
                let y = act(g, x)?;
                let here = self.atom_mass(x);
                if here.is_zero() {
                    return Err(Error::ZeroMass(x.to_string()));
                }
                let there = self.atom_mass(&y);
                if there.is_zero() {
                    return Err(Error::ZeroMass(format!("{y} (image of {x} under {g})")));
                }
                Ok(there / here)
            }
        }
    }

    pub fn rn_derivative_f64(&self, g: &Permutation, x: &BinaryConfig) -> Result<f64> {
        match self {
            Measure::Product(m) => m.rn_derivative_f64(g, x),
            Measure::Mixture(_) if !self.is_exchangeable_fast() => {
                let y = act(g, x)?;
                Ok((self.log_atom_mass(&y) - self.log_atom_mass(x)).exp())
            }
            _ => self.rn_derivative(g, x).map(|r| to_f64(&r)),
        }
    }

    // Exchangeability that is decidable without touching atoms.
    fn is_exchangeable_fast(&self) -> bool {
        match self {
            Measure::Atomic(_) => false,
            Measure::Product(m) => m.is_exchangeable(),
            Measure::Polya(_) => true,
            Measure::Mixture(m) => m.components.iter().all(Measure::is_exchangeable_fast),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BinaryConfig {
        self.sample_latent(rng).0
    }

    /// A draw together with the latent component / mixing parameter.
    ///
    /// Atomic measures need not be normalized; they are sampled proportionally.
    pub fn sample_latent<R: Rng + ?Sized>(&self, rng: &mut R) -> (BinaryConfig, Latent) {
        match self {
            Measure::Atomic(m) => {
                let atoms: Vec<_> = m.atoms().collect();
                let dist = WeightedIndex::new(atoms.iter().map(|(_, w)| to_f64(w))).expect("nonzero atomic measure");
                (atoms[dist.sample(rng)].0.clone(), Latent::default())
            }
            Measure::Product(m) => (m.sample(rng), Latent::default()),
            Measure::Polya(m) => {
                let (x, p) = m.sample_with_parameter(rng);
                (x, Latent { component: None, parameter: Some(p) })
            }
            Measure::Mixture(m) => {
                let dist = WeightedIndex::new(m.weights.iter().map(to_f64)).expect("positive weights");
                let j = dist.sample(rng);
                let (x, inner) = m.components[j].sample_latent(rng);
                (x, Latent { component: Some(j), parameter: inner.parameter })
            }
        }
    }

    pub fn to_canonical_text(&self) -> String {
        match self {
            Measure::Atomic(m) => m.to_canonical_text(),
            Measure::Product(m) => {
                let params: Vec<String> = m.params.iter().map(format_rational).collect();
                format!("product window={} params={}\n", m.window(), params.join(","))
            }
            Measure::Polya(m) => format!(
                "polya window={} alpha={} beta={}\n",
                m.window,
                format_rational(&m.alpha),
                format_rational(&m.beta)
            ),
            Measure::Mixture(m) => {
                let mut out = format!("mixture components={}\n", m.components.len());
                for (w, c) in m.weights.iter().zip(&m.components) {
                    let _ = writeln!(out, "weight {}", format_rational(w));
                    for line in c.to_canonical_text().lines() {
                        let _ = writeln!(out, "  {line}");
                    }
                }
                out
            }
        }
    }
}

/// Whether an orbit has finitely or infinitely many points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Cardinality {
    Finite(usize),
    Infinite,
}

/// σ-finite invariant measure on finitely supported 0-1 sequences: orbit `k`
/// (sequences with exactly `k` ones) carries `c_k` times counting measure.
///
/// Orbit `0` is the single all-zero sequence; every orbit with `k ≥ 1` is
/// countably infinite and is never materialized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitSigmaFinite {
    weights: BTreeMap<usize, Rational>,
}

impl OrbitSigmaFinite {
    pub fn new(weights: impl IntoIterator<Item = (usize, Rational)>) -> Result<Self> {
        let mut out = BTreeMap::new();
        for (k, c) in weights {
            if c.is_negative() {
                return Err(Error::InvalidParameter(format!("negative orbit weight on orbit {k}")));
            }
            if !c.is_zero() {
                *out.entry(k).or_insert_with(Rational::zero) += c;
            }
        }
        Ok(OrbitSigmaFinite { weights: out })
    }

    /// Counting measure on the single orbit `k`.
    pub fn single_orbit(k: usize) -> Self {
        OrbitSigmaFinite { weights: BTreeMap::from([(k, Rational::one())]) }
    }

    pub fn weight(&self, k: usize) -> Rational {
        self.weights.get(&k).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn weights(&self) -> &BTreeMap<usize, Rational> {
        &self.weights
    }

    /// Orbit labels with positive weight.
    pub fn labels(&self) -> BTreeSet<usize> {
        self.weights.keys().copied().collect()
    }

    pub fn orbit_cardinality(k: usize) -> Cardinality {
        if k == 0 {
            Cardinality::Finite(1)
        } else {
            Cardinality::Infinite
        }
    }

    /// Mass of a single finitely supported point (trailing zeros implied).
    pub fn atom_mass(&self, x: &BinaryConfig) -> Rational {
        self.weight(x.count_ones())
    }

    pub fn scaled(&self, c: &Rational) -> Self {
        Self::new(self.weights.iter().map(|(&k, w)| (k, w * c))).expect("nonnegative scale")
    }

    /// Counting mass of `{x in orbit k : x ∈ A}` is `1` when the cylinder pins
    /// all `k` ones, `∞` when some ones remain free, `0` when it pins too many.
    pub fn mass(&self, a: &Cylinder) -> ExtendedReal {
        let pinned = a.pinned_ones();
        self.weights.iter().fold(ExtendedReal::zero(), |acc, (&k, c)| {
            let count = if pinned > k {
                ExtendedReal::zero()
            } else if pinned == k {
                ExtendedReal::Finite(Rational::one())
            } else {
                ExtendedReal::Infinite
            };
            acc.add(&count.scale(c))
        })
    }

    pub fn total_mass(&self) -> ExtendedReal {
        self.mass(&Cylinder::everything())
    }
}

/// Outcome of comparing two measures by their supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    AbsolutelyContinuous,
    MutuallySingular,
    Neither,
}

/// Classification of `first` against `second` from the supports alone.
///
/// The zero measure is absolutely continuous with respect to anything.
pub fn support_relation<K: Ord>(first: &BTreeSet<K>, second: &BTreeSet<K>) -> Relation {
    if first.is_subset(second) {
        Relation::AbsolutelyContinuous
    } else if first.is_disjoint(second) {
        Relation::MutuallySingular
    } else {
        Relation::Neither
    }
}

/// Measures whose support is an explicit finite set of labels.
pub trait DiscreteSupport {
    type Point: Ord;
    fn support_set(&self) -> BTreeSet<Self::Point>;
}

impl DiscreteSupport for AtomicMeasure {
    type Point = BinaryConfig;
    fn support_set(&self) -> BTreeSet<BinaryConfig> {
        self.support()
    }
}

impl DiscreteSupport for OrbitSigmaFinite {
    type Point = usize;
    fn support_set(&self) -> BTreeSet<usize> {
        self.labels()
    }
}

pub fn ac_check<M: DiscreteSupport>(first: &M, second: &M) -> Relation {
    support_relation(&first.support_set(), &second.support_set())
}

/// Splits `first = ac_part + singular_part` with `ac_part ≪ second` and
/// `singular_part ⊥ second`, atom by atom.
pub fn jordan_decompose(first: &AtomicMeasure, second: &AtomicMeasure) -> Result<(AtomicMeasure, AtomicMeasure)> {
    if first.window() != second.window() {
        return Err(Error::WindowMismatch { expected: first.window(), actual: second.window() });
    }
    let support = second.support();
    Ok((
        first.restricted(|x| support.contains(x)),
        first.restricted(|x| !support.contains(x)),
    ))
}
