//! Symbolic demonstrators.
//!
//! Under the group of *all* bijections of the coordinates, the 0-1 sequences
//! fall into countably many orbits: sequences with exactly `k` ones, sequences
//! with exactly `k` zeros, and the single orbit of sequences with infinitely
//! many of both. Every invariant set is a union of these, so a non-atomic
//! product measure gives it mass 0 or 1 according to whether it contains the
//! last orbit. The mixture `(B(1/5) + B(4/5)) / 2` is therefore ergodic for
//! the full group while being visibly decomposable, whereas for the finite
//! permutations the frequency event separates its two halves.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use crate::cocycles::Cocycle;
use crate::error::{Error, Result};
use crate::group::{act, enumerate, BinaryConfig, ChainLevel, Permutation};
use crate::measures::{jordan_decompose, AtomicMeasure, Cylinder, Measure, Mixture, ProductBernoulli};
use crate::numeric::{format_rational, rat, Rational};
use crate::rng::substream;

/// Orbit of a 0-1 sequence under all bijections of the coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FullGroupOrbitLabel {
    /// Exactly `k` ones, all other coordinates zero.
    FiniteOnes(usize),
    /// Exactly `k` zeros, all other coordinates one.
    FiniteZeros(usize),
    BothInfinite,
}

impl fmt::Display for FullGroupOrbitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FullGroupOrbitLabel::FiniteOnes(k) => write!(f, "({k} ones, cofinitely zeros)"),
            FullGroupOrbitLabel::FiniteZeros(k) => write!(f, "(cofinitely ones, {k} zeros)"),
            FullGroupOrbitLabel::BothInfinite => f.write_str("(∞,∞)"),
        }
    }
}

/// What is known about the sequence after its explicit prefix.
#[derive(Debug, Clone, PartialEq)]
pub enum Tail {
    Zeros,
    Ones,
    /// The pattern repeated forever.
    Periodic(BinaryConfig),
    /// Typical for i.i.d. draws with this density of ones.
    Typical { density: f64 },
    /// Nothing beyond the prefix.
    Unknown,
}

/// Finite symbolic description of an infinite 0-1 sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicSequence {
    pub prefix: BinaryConfig,
    pub tail: Tail,
}

impl SymbolicSequence {
    pub fn new(prefix: BinaryConfig, tail: Tail) -> Self {
        SymbolicSequence { prefix, tail }
    }
}

/// Text form `<tail>[:<prefix>]` with tail `zeros`, `ones`, `periodic=<bits>`,
/// `typical=<density>` or `unknown`, e.g. `zeros:10110` or `typical=0.3`.
impl FromStr for SymbolicSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (tail, prefix) = match s.split_once(':') {
            Some((t, p)) => (t, p.parse::<BinaryConfig>()?),
            None => (s, BinaryConfig::zeros(0)),
        };
        let tail = match tail.split_once('=') {
            None if tail == "zeros" => Tail::Zeros,
            None if tail == "ones" => Tail::Ones,
            None if tail == "unknown" => Tail::Unknown,
            Some(("periodic", bits)) => Tail::Periodic(bits.parse()?),
            Some(("typical", d)) => Tail::Typical {
                density: d.parse().map_err(|_| Error::Parse(format!("bad density {d:?}")))?,
            },
            _ => return Err(Error::Parse(format!("unknown tail description {tail:?}"))),
        };
        Ok(SymbolicSequence { prefix, tail })
    }
}

/// Full-group orbit of a described sequence; descriptions that do not pin
/// down the orbit are rejected.
pub fn orbit_class(desc: &SymbolicSequence) -> Result<FullGroupOrbitLabel> {
    let ones = desc.prefix.count_ones();
    let zeros = desc.prefix.len() - ones;
    let ambiguous = |why: &str| Err(Error::InvalidParameter(format!("ambiguous sequence description: {why}")));
    match &desc.tail {
        Tail::Zeros => Ok(FullGroupOrbitLabel::FiniteOnes(ones)),
        Tail::Ones => Ok(FullGroupOrbitLabel::FiniteZeros(zeros)),
        Tail::Periodic(p) if p.is_empty() => ambiguous("empty period"),
        Tail::Periodic(p) if p.count_ones() == 0 => Ok(FullGroupOrbitLabel::FiniteOnes(ones)),
        Tail::Periodic(p) if p.count_ones() == p.len() => Ok(FullGroupOrbitLabel::FiniteZeros(zeros)),
        Tail::Periodic(_) => Ok(FullGroupOrbitLabel::BothInfinite),
        Tail::Typical { density } if *density > 0.0 && *density < 1.0 => Ok(FullGroupOrbitLabel::BothInfinite),
        Tail::Typical { density } => ambiguous(&format!("density {density} does not decide whether ones or zeros are finite")),
        Tail::Unknown => ambiguous("a finite prefix alone is compatible with every orbit"),
    }
}

/// Subset of `ℕ`: a finite set, or the complement of one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct LabelFamily {
    pub listed: BTreeSet<usize>,
    pub cofinite: bool,
}

impl LabelFamily {
    pub fn empty() -> Self {
        LabelFamily { listed: BTreeSet::new(), cofinite: false }
    }

    pub fn all() -> Self {
        LabelFamily { listed: BTreeSet::new(), cofinite: true }
    }

    pub fn finite(items: impl IntoIterator<Item = usize>) -> Self {
        LabelFamily { listed: items.into_iter().collect(), cofinite: false }
    }

    /// `{k : k > bound}`.
    pub fn above(bound: usize) -> Self {
        LabelFamily { listed: (0..=bound).collect(), cofinite: true }
    }

    pub fn contains(&self, k: usize) -> bool {
        self.listed.contains(&k) != self.cofinite
    }

    pub fn is_empty(&self) -> bool {
        !self.cofinite && self.listed.is_empty()
    }

    pub fn complement(&self) -> Self {
        LabelFamily { listed: self.listed.clone(), cofinite: !self.cofinite }
    }

    pub fn union(&self, other: &Self) -> Self {
        match (self.cofinite, other.cofinite) {
            (false, false) => LabelFamily::finite(self.listed.union(&other.listed).copied()),
            (true, true) => LabelFamily { listed: self.listed.intersection(&other.listed).copied().collect(), cofinite: true },
            (true, false) => LabelFamily { listed: self.listed.difference(&other.listed).copied().collect(), cofinite: true },
            (false, true) => other.union(self),
        }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.complement().union(&other.complement()).complement()
    }

    /// Inclusion, decided on the finitely many labels where either changes.
    pub fn is_subset(&self, other: &Self) -> bool {
        self.intersection(&other.complement()).is_empty()
    }
}

/// A union of full-group orbits, i.e. an invariant set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct InvariantSetFullGroup {
    pub finite_ones: LabelFamily,
    pub finite_zeros: LabelFamily,
    pub both_infinite: bool,
}

impl InvariantSetFullGroup {
    pub fn empty() -> Self {
        InvariantSetFullGroup { finite_ones: LabelFamily::empty(), finite_zeros: LabelFamily::empty(), both_infinite: false }
    }

    pub fn everything() -> Self {
        InvariantSetFullGroup { finite_ones: LabelFamily::all(), finite_zeros: LabelFamily::all(), both_infinite: true }
    }

    pub fn of_label(label: FullGroupOrbitLabel) -> Self {
        let mut out = Self::empty();
        match label {
            FullGroupOrbitLabel::FiniteOnes(k) => out.finite_ones = LabelFamily::finite([k]),
            FullGroupOrbitLabel::FiniteZeros(k) => out.finite_zeros = LabelFamily::finite([k]),
            FullGroupOrbitLabel::BothInfinite => out.both_infinite = true,
        }
        out
    }

    pub fn contains(&self, label: FullGroupOrbitLabel) -> bool {
        match label {
            FullGroupOrbitLabel::FiniteOnes(k) => self.finite_ones.contains(k),
            FullGroupOrbitLabel::FiniteZeros(k) => self.finite_zeros.contains(k),
            FullGroupOrbitLabel::BothInfinite => self.both_infinite,
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        InvariantSetFullGroup {
            finite_ones: self.finite_ones.union(&other.finite_ones),
            finite_zeros: self.finite_zeros.union(&other.finite_zeros),
            both_infinite: self.both_infinite || other.both_infinite,
        }
    }

    pub fn complement(&self) -> Self {
        InvariantSetFullGroup {
            finite_ones: self.finite_ones.complement(),
            finite_zeros: self.finite_zeros.complement(),
            both_infinite: !self.both_infinite,
        }
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.finite_ones.is_subset(&other.finite_ones)
            && self.finite_zeros.is_subset(&other.finite_zeros)
            && (!self.both_infinite || other.both_infinite)
    }
}

/// Atoms of the algebra generated by the orbits with at most `bound` ones or
/// zeros: those `2(bound + 1)` single orbits, the two remainders `{k > bound}`
/// and the orbit `(∞,∞)`.
pub fn algebra_atoms(bound: usize) -> Vec<InvariantSetFullGroup> {
    let mut atoms: Vec<InvariantSetFullGroup> = (0..=bound)
        .flat_map(|k| {
            [
                InvariantSetFullGroup::of_label(FullGroupOrbitLabel::FiniteOnes(k)),
                InvariantSetFullGroup::of_label(FullGroupOrbitLabel::FiniteZeros(k)),
            ]
        })
        .collect();
    atoms.push(InvariantSetFullGroup { finite_ones: LabelFamily::above(bound), ..InvariantSetFullGroup::empty() });
    atoms.push(InvariantSetFullGroup { finite_zeros: LabelFamily::above(bound), ..InvariantSetFullGroup::empty() });
    atoms.push(InvariantSetFullGroup::of_label(FullGroupOrbitLabel::BothInfinite));
    atoms
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantSetMass {
    /// 0 or 1.
    pub value: u8,
    pub trace: String,
}

fn bernoulli_parameters(nu: &Measure) -> Result<Vec<Rational>> {
    let constant = |m: &ProductBernoulli| -> Result<Rational> {
        if !m.is_exchangeable() {
            return Err(Error::InvalidParameter("only i.i.d. Bernoulli components extend to the infinite product".into()));
        }
        Ok(m.params()[0].clone())
    };
    match nu {
        Measure::Product(m) => Ok(vec![constant(m)?]),
        Measure::Mixture(mix) => mix
            .components()
            .iter()
            .map(|c| match c {
                Measure::Product(m) => constant(m),
                _ => Err(Error::InvalidParameter("mixture components must be Bernoulli products".into())),
            })
            .collect(),
        _ => Err(Error::InvalidParameter("expected a Bernoulli product or a mixture of them".into())),
    }
}

/// Mass of a full-group-invariant set under a (mixture of) non-atomic
/// Bernoulli measure(s).
pub fn measure_of_invariant_set(nu: &Measure, a: &InvariantSetFullGroup) -> Result<InvariantSetMass> {
    let params = bernoulli_parameters(nu)?;
    let list: Vec<String> = params.iter().map(format_rational).collect();
    let value = u8::from(a.both_infinite);
    let trace = if a.both_infinite {
        format!(
            "contains (∞,∞); its complement is a countable union of countable orbits, null for B(p), p ∈ {{{}}} ⊂ (0,1)",
            list.join(", ")
        )
    } else {
        format!("misses (∞,∞); a countable union of countable orbits is null for B(p), p ∈ {{{}}} ⊂ (0,1)", list.join(", "))
    };
    Ok(InvariantSetMass { value, trace })
}

/// Monte Carlo contrast for the finite permutations.
#[derive(Debug, Clone, Serialize)]
pub struct FrequencyEvent {
    pub window: usize,
    pub samples: usize,
    pub threshold: f64,
    pub empirical_mass: f64,
    pub stderr: f64,
    /// `ln` of the Hoeffding bound `exp(−2N(1/2 − 1/5)²)` on each component's misclassification.
    pub ln_hoeffding_bound: f64,
    pub tolerance: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct KolmogorovReport {
    pub verdict: String,
    pub sets_checked: usize,
    pub zero_one_valued: bool,
    pub monotone: bool,
    pub complement_additive: bool,
    pub ergodic_for_full_group: bool,
    pub split_weights: Vec<String>,
    pub split_components: Vec<String>,
    pub split_reconstructs: bool,
    pub decomposable: bool,
    pub g0_event: FrequencyEvent,
    #[serde(skip)]
    pub narrative: String,
}

impl KolmogorovReport {
    pub fn passed(&self) -> bool {
        self.ergodic_for_full_group && self.decomposable && self.split_reconstructs && self.g0_event.within_tolerance
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct KolmogorovConfig {
    pub atom_bound: usize,
    pub window: usize,
    pub samples: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for KolmogorovConfig {
    fn default() -> Self {
        KolmogorovConfig { atom_bound: 4, window: 4096, samples: 10_000, tolerance: 0.02, seed: 0 }
    }
}

/// Runs the three parts of the demonstration for `(B(1/5) + B(4/5)) / 2`.
pub fn demonstrate_kolmogorov(config: &KolmogorovConfig) -> Result<KolmogorovReport> {
    let low = Measure::Product(ProductBernoulli::constant(rat(1, 5), config.window)?);
    let high = Measure::Product(ProductBernoulli::constant(rat(4, 5), config.window)?);
    let mixture = Measure::Mixture(Mixture::new(vec![rat(1, 2), rat(1, 2)], vec![low.clone(), high.clone()])?);

    // (a) every set of the finitely generated symbolic algebra.
    let atoms = algebra_atoms(config.atom_bound);
    let sets: Vec<InvariantSetFullGroup> = (0u64..(1 << atoms.len()))
        .map(|mask| {
            atoms
                .iter()
                .enumerate()
                .filter(|(j, _)| mask >> j & 1 == 1)
                .fold(InvariantSetFullGroup::empty(), |acc, (_, a)| acc.union(a))
        })
        .collect();
    let masses: Vec<u8> = sets.iter().map(|s| measure_of_invariant_set(&mixture, s).map(|m| m.value)).collect::<Result<_>>()?;
    let zero_one_valued = masses.iter().all(|&m| m <= 1);
    let monotone = sets.iter().zip(&masses).all(|(s, &m)| {
        atoms.iter().all(|a| {
            let bigger = s.union(a);
            s.is_subset(&bigger) && measure_of_invariant_set(&mixture, &bigger).map(|b| b.value >= m).unwrap_or(false)
        })
    });
    let complement_additive = sets.iter().zip(&masses).all(|(s, &m)| {
        measure_of_invariant_set(&mixture, &s.complement()).map(|c| c.value + m == 1).unwrap_or(false)
    });
    let ergodic_for_full_group = zero_one_valued && monotone && complement_additive;

    // (b) the convex split.
    let split_reconstructs = Cylinder::all_up_to_depth(3).iter().all(|a| {
        mixture.mass(a) == (low.mass(a) + high.mass(a)) * rat(1, 2)
    });
    let decomposable = low != high && split_reconstructs;

    // (c) the G₀-invariant frequency event {frequency ≤ 1/2}.
    let threshold = 0.5;
    let below: usize = (0..config.samples)
        .into_par_iter()
        .map(|i| {
            let x = mixture.sample(&mut substream(config.seed, i as u64));
            usize::from((x.count_ones() as f64) / (config.window as f64) <= threshold)
        })
        .sum();
    let empirical_mass = below as f64 / config.samples as f64;
    let stderr = (empirical_mass * (1.0 - empirical_mass) / config.samples as f64).sqrt();
    let g0_event = FrequencyEvent {
        window: config.window,
        samples: config.samples,
        threshold,
        empirical_mass,
        stderr,
        ln_hoeffding_bound: -2.0 * config.window as f64 * (threshold - 0.2f64).powi(2),
        tolerance: config.tolerance,
        within_tolerance: (empirical_mass - 0.5).abs() <= config.tolerance,
    };

    let ergodic_word = if ergodic_for_full_group { "ergodic" } else { "not ergodic" };
    let split_word = if decomposable { "decomposable" } else { "not decomposable" };
    let verdict = format!("{ergodic_word} for full group, {split_word}");
    let narrative = format!(
        "Measure (B(1/5) + B(4/5)) / 2 under the group of all bijections.\n\
         (a) {} invariant sets generated by {} orbit atoms: every mass is 0 or 1 ({}), monotone ({}), complements add to 1 ({}).\n\
         (b) Split into B(1/5) and B(4/5) with weights 1/2, 1/2 reproduces all cylinder masses up to depth 3 ({}).\n\
         (c) For finite permutations the event {{frequency ≤ 1/2}} at window {} has mass {:.4} ± {:.4} over {} samples; \
         each component lands on the wrong side with probability at most exp({:.1}).\n\
         Verdict: {}.\n",
        sets.len(),
        atoms.len(),
        zero_one_valued,
        monotone,
        complement_additive,
        split_reconstructs,
        config.window,
        empirical_mass,
        stderr,
        config.samples,
        g0_event.ln_hoeffding_bound,
        verdict
    );
    Ok(KolmogorovReport {
        verdict,
        sets_checked: sets.len(),
        zero_one_valued,
        monotone,
        complement_additive,
        ergodic_for_full_group,
        split_weights: vec!["1/2".into(), "1/2".into()],
        split_components: vec!["B(1/5)".into(), "B(4/5)".into()],
        split_reconstructs,
        decomposable,
        g0_event,
        narrative,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquivalenceOutcome {
    Equal,
    MutuallySingular,
    /// Neither equal nor singular: a counterexample.
    Neither,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub outcome: EquivalenceOutcome,
    /// Mass of the part of `ν1` absolutely continuous w.r.t. `ν2`, and of the singular rest.
    #[serde(serialize_with = "crate::numeric::serialize_rational")]
    pub jordan_ac_mass: Rational,
    #[serde(serialize_with = "crate::numeric::serialize_rational")]
    pub jordan_singular_mass: Rational,
    pub witness: Option<String>,
}

fn check_in_class(nu: &AtomicMeasure, rho: &Cocycle, elements: &[Permutation], name: &str) -> Result<()> {
    for (x, m) in nu.atoms() {
        for g in elements {
            let y = act(g, x)?;
            let ok = rho.eval(g, x).map(|r| nu.mass_at(&y) == r * m).unwrap_or(false);
            if !ok {
                return Err(Error::InvalidParameter(format!("{name} does not carry the cocycle at x={x}, g={g}")));
            }
        }
    }
    Ok(())
}

/// The invariant sets of `S(N)` on `{0,1}^N` are unions of the classes
/// `{x : |x| = k}`; weak indecomposability means all but one class is null.
fn check_weakly_indecomposable(nu: &AtomicMeasure, name: &str) -> Result<()> {
    let classes: BTreeSet<usize> = nu.atoms().map(|(x, _)| x.count_ones()).collect();
    if classes.len() != 1 {
        return Err(Error::InvalidParameter(format!("{name} charges the invariant classes {classes:?} and is decomposable")));
    }
    Ok(())
}

/// For two weakly indecomposable measures with the same cocycle, confirms
/// that they are equal or mutually singular (after normalization).
pub fn weak_strong_equivalence_check(nu1: &AtomicMeasure, nu2: &AtomicMeasure, rho: &Cocycle) -> Result<EquivalenceReport> {
    if nu1.window() != nu2.window() {
        return Err(Error::WindowMismatch { expected: nu1.window(), actual: nu2.window() });
    }
    let n = nu1.window();
    if n > 6 {
        return Err(Error::Capacity { what: "weak_strong_equivalence_check", limit: 6, requested: n });
    }
    let elements = enumerate(ChainLevel::new(n)?)?;
    for (m, name) in [(nu1, "ν1"), (nu2, "ν2")] {
        if m.is_zero() {
            return Err(Error::ZeroMass(name.into()));
        }
        check_in_class(m, rho, &elements, name)?;
        check_weakly_indecomposable(m, name)?;
    }
    let (a, b) = (nu1.normalized()?, nu2.normalized()?);
    let (ac, singular) = jordan_decompose(&a, &b)?;
    let (jordan_ac_mass, jordan_singular_mass) = (ac.total(), singular.total());
    let (outcome, witness) = if a == b {
        (EquivalenceOutcome::Equal, None)
    } else if jordan_ac_mass.is_zero() {
        (EquivalenceOutcome::MutuallySingular, None)
    } else {
        // dν1/dν2 on the common support; it is invariant, so non-constancy is a contradiction.
        let ratios: BTreeSet<String> = a
            .atoms()
            .filter(|(x, _)| !b.mass_at(x).is_zero())
            .map(|(x, m)| format_rational(&(m / b.mass_at(x))))
            .collect();
        (EquivalenceOutcome::Neither, Some(format!("density dν1/dν2 takes values {ratios:?} on the common support")))
    };
    Ok(EquivalenceReport { outcome, jordan_ac_mass, jordan_singular_mass, witness })
}

/// Normalized restriction of `product` to the orbit `{x : |x| = k}` of `{0,1}^N`.
pub fn orbit_restriction(product: &ProductBernoulli, k: usize) -> Result<AtomicMeasure> {
    AtomicMeasure::from_atoms(
        product.window(),
        BinaryConfig::all(product.window()).filter(|x| x.count_ones() == k).map(|x| {
            let m = product.atom_mass(&x);
            (x, m)
        }),
    )?
    .normalized()
}
