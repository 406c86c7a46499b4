//! Positive multiplicative cocycles `ρ(g, x)` over the coordinate action.
//!
//! A cocycle satisfies `ρ(gh, x) = ρ(g, T_h x) · ρ(h, x)`. The constructions
//! here are the constant cocycle, the Radon–Nikodym cocycle of a measure and
//! the cocycle `ρ_f(g, x) = f(T_g x) / f(x)` of a positive weight function.
//! Values are exact rationals; a floating evaluation exists for Monte Carlo.

use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{act, haar_sample, BinaryConfig, ChainLevel, Permutation};
use crate::measures::Measure;
use crate::numeric::{format_rational, to_f64, Rational};

type WeightFn = dyn Fn(&BinaryConfig) -> Rational + Send + Sync;
type CocycleFn = dyn Fn(&Permutation, &BinaryConfig) -> Result<Rational> + Send + Sync;

/// Strictly positive function on configurations.
#[derive(Clone)]
pub enum WeightFunction {
    Constant(Rational),
    /// `f(x) = Π_{i : x_i = 1} q^i` for a fixed `q ∈ (0, 1)`.
    CoordinateDecay { q: Rational },
    Custom { name: String, f: Arc<WeightFn> },
}

impl WeightFunction {
    pub fn custom(name: impl Into<String>, f: impl Fn(&BinaryConfig) -> Rational + Send + Sync + 'static) -> Self {
        WeightFunction::Custom { name: name.into(), f: Arc::new(f) }
    }

    pub fn coordinate_decay(q: Rational) -> Result<Self> {
        if !q.is_positive() || q >= Rational::one() {
            return Err(Error::InvalidParameter(format!("decay ratio {} outside (0,1)", format_rational(&q))));
        }
        Ok(WeightFunction::CoordinateDecay { q })
    }

    pub fn eval(&self, x: &BinaryConfig) -> Result<Rational> {
        let value = match self {
            WeightFunction::Constant(c) => c.clone(),
            WeightFunction::CoordinateDecay { q } => x
                .ones_positions()
                .into_iter()
                .fold(Rational::one(), |acc, i| acc * num_traits::pow(q.clone(), i)),
            WeightFunction::Custom { f, .. } => f(x),
        };
        if !value.is_positive() {
            return Err(Error::InvalidParameter(format!("weight function is not positive at {x}")));
        }
        Ok(value)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, WeightFunction::Constant(_))
    }
}

impl fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFunction::Constant(c) => write!(f, "Constant({})", format_rational(c)),
            WeightFunction::CoordinateDecay { q } => write!(f, "CoordinateDecay(q={})", format_rational(q)),
            WeightFunction::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// Where a cocycle came from.
#[derive(Clone)]
pub enum CocycleKind {
    ConstantOne,
    RadonNikodym(Arc<Measure>),
    FromWeight(WeightFunction),
    Custom { name: String, eval: Arc<CocycleFn> },
}

#[derive(Clone)]
pub struct Cocycle {
    kind: CocycleKind,
    // Vacuous for finite S(n); carried so the continuity hypothesis stays explicit.
    fibrewise_continuous: bool,
    // Decided once: exchangeability of a long product is costly to recheck.
    constant_one: bool,
}

impl Cocycle {
    pub fn constant_one() -> Self {
        Cocycle::with_kind(CocycleKind::ConstantOne)
    }

    /// Radon–Nikodym cocycle `ν(T_g x) / ν(x)` of `ν`.
    pub fn radon_nikodym(measure: Measure) -> Self {
        Cocycle::with_kind(CocycleKind::RadonNikodym(Arc::new(measure)))
    }

    /// `ρ_f(g, x) = f(T_g x) / f(x)`.
    pub fn from_weight(f: WeightFunction) -> Self {
        Cocycle::with_kind(CocycleKind::FromWeight(f))
    }

    /// Arbitrary evaluation rule; nothing about it is assumed.
    pub fn custom(
        name: impl Into<String>,
        eval: impl Fn(&Permutation, &BinaryConfig) -> Result<Rational> + Send + Sync + 'static,
    ) -> Self {
        Cocycle::with_kind(CocycleKind::Custom { name: name.into(), eval: Arc::new(eval) })
    }

    fn with_kind(kind: CocycleKind) -> Self {
        let constant_one = match &kind {
            CocycleKind::ConstantOne => true,
            CocycleKind::FromWeight(f) => f.is_constant(),
            CocycleKind::RadonNikodym(m) => match m.as_ref() {
                Measure::Atomic(_) => false,
                other => other.is_exchangeable(),
            },
            CocycleKind::Custom { .. } => false,
        };
        Cocycle { kind, fibrewise_continuous: true, constant_one }
    }

    pub fn kind(&self) -> &CocycleKind {
        &self.kind
    }

    pub fn is_fibrewise_continuous(&self) -> bool {
        self.fibrewise_continuous
    }

    /// True when the cocycle is identically one by construction.
    pub fn is_constant_one(&self) -> bool {
        self.constant_one
    }

    pub fn provenance(&self) -> String {
        match &self.kind {
            CocycleKind::ConstantOne => "constant-one".into(),
            CocycleKind::RadonNikodym(_) => "radon-nikodym".into(),
            CocycleKind::FromWeight(f) => format!("from-weight({f:?})"),
            CocycleKind::Custom { name, .. } => format!("custom({name})"),
        }
    }

    pub fn eval(&self, g: &Permutation, x: &BinaryConfig) -> Result<Rational> {
        let value = match &self.kind {
            CocycleKind::ConstantOne => {
                act(g, x)?;
                Rational::one()
            }
            CocycleKind::RadonNikodym(m) => m.rn_derivative(g, x)?,
            CocycleKind::FromWeight(f) => f.eval(&act(g, x)?)? / f.eval(x)?,
            CocycleKind::Custom { eval, .. } => eval(g, x)?,
        };
        if !value.is_positive() {
            return Err(Error::InvalidParameter(format!(
                "cocycle value {} at ({g}, {x}) is not positive",
                format_rational(&value)
            )));
        }
        Ok(value)
    }

    pub fn eval_f64(&self, g: &Permutation, x: &BinaryConfig) -> Result<f64> {
        match &self.kind {
            CocycleKind::ConstantOne => Ok(1.0),
            CocycleKind::RadonNikodym(m) => m.rn_derivative_f64(g, x),
            _ => self.eval(g, x).map(|v| to_f64(&v)),
        }
    }
}

impl fmt::Debug for Cocycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cocycle({})", self.provenance())
    }
}

pub fn make_rho_f(f: WeightFunction) -> Cocycle {
    Cocycle::from_weight(f)
}

pub fn make_rn(measure: Measure) -> Cocycle {
    Cocycle::radon_nikodym(measure)
}

/// A triple on which the multiplicative identity fails.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub g: String,
    pub h: String,
    pub x: String,
    #[serde(serialize_with = "crate::numeric::serialize_rational")]
    pub lhs: Rational,
    #[serde(serialize_with = "crate::numeric::serialize_rational")]
    pub rhs: Rational,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub trials: usize,
    pub violations: usize,
    pub first_violation: Option<Violation>,
    /// `ρ(id, x) = 1` on every sampled point.
    pub identity_at_identity: bool,
    /// Largest relative gap between the two sides in floating evaluation.
    pub max_relative_error: f64,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.identity_at_identity
    }
}

/// Checks `ρ(gh, x) = ρ(g, T_h x) ρ(h, x)` on `trials` Haar-random `g, h ∈ S(n)`
/// and uniformly random `x ∈ {0,1}^window`.
pub fn verify_identity<R: Rng + ?Sized>(
    rho: &Cocycle,
    trials: usize,
    level: ChainLevel,
    window: usize,
    rng: &mut R,
) -> Result<IdentityReport> {
    verify_identity_with(rho, trials, level, rng, |r| {
        BinaryConfig::new((0..window).map(|_| r.random::<bool>()).collect())
    })
}

/// As [`verify_identity`], with the base points drawn by `point`.
pub fn verify_identity_with<R: Rng + ?Sized>(
    rho: &Cocycle,
    trials: usize,
    level: ChainLevel,
    rng: &mut R,
    mut point: impl FnMut(&mut R) -> BinaryConfig,
) -> Result<IdentityReport> {
    let mut report = IdentityReport {
        trials,
        violations: 0,
        first_violation: None,
        identity_at_identity: true,
        max_relative_error: 0.0,
    };
    for _ in 0..trials {
        let g = haar_sample(level, rng);
        let h = haar_sample(level, rng);
        let x = point(rng);
        if !rho.eval(&Permutation::identity(), &x)?.is_one() {
            report.identity_at_identity = false;
        }
        let hx = act(&h, &x)?;
        let lhs = rho.eval(&g.compose(&h), &x)?;
        let rhs = rho.eval(&g, &hx)? * rho.eval(&h, &x)?;

        let lhs_f = rho.eval_f64(&g.compose(&h), &x)?;
        let rhs_f = rho.eval_f64(&g, &hx)? * rho.eval_f64(&h, &x)?;
        let rel = (lhs_f - rhs_f).abs() / lhs_f.abs().max(rhs_f.abs()).max(f64::MIN_POSITIVE);
        report.max_relative_error = report.max_relative_error.max(rel);

        if lhs != rhs {
            report.violations += 1;
            if report.first_violation.is_none() {
                report.first_violation = Some(Violation {
                    g: g.to_string(),
                    h: h.to_string(),
                    x: x.to_string(),
                    lhs,
                    rhs,
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::enumerate;
    use crate::measures::{AtomicMeasure, ProductBernoulli};
    use crate::numeric::{int, rat};
    use crate::rng;

    fn cfg(s: &str) -> BinaryConfig {
        s.parse().unwrap()
    }

    fn two_to_first_bit() -> WeightFunction {
        WeightFunction::custom("2^x1", |x| if x.bit(1) { int(2) } else { int(1) })
    }

    #[test]
    fn rho_f_examples() {
        let one = make_rho_f(WeightFunction::Constant(int(1)));
        assert!(one.is_constant_one());
        assert_eq!(one.eval(&Permutation::swap(1, 3), &cfg("100")).unwrap(), int(1));

        let rho = make_rho_f(two_to_first_bit());
        // f(01) / f(10) = 2^0 / 2^1
        assert_eq!(rho.eval(&Permutation::swap(1, 2), &cfg("10")).unwrap(), rat(1, 2));
        for x in BinaryConfig::all(3) {
            assert_eq!(rho.eval(&Permutation::identity(), &x).unwrap(), int(1));
        }
    }

    #[test]
    fn rn_examples() {
        let exch = make_rn(Measure::Product(ProductBernoulli::constant(rat(1, 3), 4).unwrap()));
        assert!(exch.is_constant_one());
        for g in enumerate(ChainLevel::new(4).unwrap()).unwrap() {
            for x in BinaryConfig::all(4) {
                assert_eq!(exch.eval(&g, &x).unwrap(), int(1));
            }
        }
        let rho = make_rn(Measure::Product(ProductBernoulli::new(vec![rat(1, 2), rat(1, 4)]).unwrap()));
        assert_eq!(rho.eval(&Permutation::swap(1, 2), &cfg("10")).unwrap(), rat(1, 3));
        assert_eq!(rho.eval(&Permutation::identity(), &cfg("10")).unwrap(), int(1));
        assert!(rho.is_fibrewise_continuous());
        assert_eq!(rho.provenance(), "radon-nikodym");
    }

    #[test]
    fn zero_mass_propagates() {
        let rho = make_rn(Measure::Atomic(AtomicMeasure::dirac(cfg("10"))));
        assert!(matches!(rho.eval(&Permutation::swap(1, 2), &cfg("01")), Err(Error::ZeroMass(_))));
    }

    #[test]
    fn constant_cocycle_has_no_violations() {
        let report = verify_identity(&Cocycle::constant_one(), 200, ChainLevel::new(5).unwrap(), 8, &mut rng::from_seed(1)).unwrap();
        assert!(report.passed());
        assert_eq!(report.max_relative_error, 0.0);
    }

    #[test]
    fn inhomogeneous_rn_has_no_violations() {
        let params = [(1, 3), (1, 5), (2, 7), (3, 4), (1, 2), (5, 9)].iter().map(|&(a, b)| rat(a, b)).collect();
        let rho = make_rn(Measure::Product(ProductBernoulli::new(params).unwrap()));
        let report = verify_identity(&rho, 1000, ChainLevel::new(6).unwrap(), 6, &mut rng::from_seed(2)).unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(report.max_relative_error < 1e-12);
    }

    #[test]
    fn rho_f_with_decay_satisfies_identity() {
        let rho = make_rho_f(WeightFunction::coordinate_decay(rat(1, 4)).unwrap());
        let report = verify_identity(&rho, 300, ChainLevel::new(5).unwrap(), 7, &mut rng::from_seed(3)).unwrap();
        assert!(report.passed());
    }

    #[test]
    fn corrupted_cocycle_is_caught_with_witness() {
        let honest = make_rn(Measure::Product(ProductBernoulli::new(vec![rat(1, 2), rat(1, 4), rat(2, 3)]).unwrap()));
        let target = Permutation::swap(1, 2);
        let corrupted = Cocycle::custom("corrupted", move |g, x| {
            let v = honest.eval(g, x)?;
            Ok(if *g == target { v + int(1) } else { v })
        });
        let report = verify_identity(&corrupted, 500, ChainLevel::new(3).unwrap(), 3, &mut rng::from_seed(4)).unwrap();
        assert!(report.violations > 0);
        let w = report.first_violation.unwrap();
        assert_ne!(w.lhs, w.rhs);
        assert!(!report.identity_at_identity || report.violations > 0);
    }

    #[test]
    fn rho_f_agrees_with_rn_of_tilted_reference() {
        // ν ∝ f · (uniform reference) on {0,1}^N, enumerated in full.
        let f = WeightFunction::custom("3^x1 * 2^x4 * (1 + x2)", |x| {
            let mut v = int(1);
            if x.bit(1) {
                v *= int(3);
            }
            if x.bit(4) {
                v *= int(2);
            }
            if x.bit(2) {
                v *= int(2);
            }
            v
        });
        for n in [4usize, 6] {
            let atoms = BinaryConfig::all(n).map(|x| {
                let m = f.eval(&x).unwrap();
                (x, m)
            });
            let nu = AtomicMeasure::from_atoms(n, atoms).unwrap().normalized().unwrap();
            let rn = make_rn(Measure::Atomic(nu));
            let rho_f = make_rho_f(f.clone());
            for g in enumerate(ChainLevel::new(4).unwrap()).unwrap() {
                for x in BinaryConfig::all(n) {
                    assert_eq!(rn.eval(&g, &x).unwrap(), rho_f.eval(&g, &x).unwrap());
                }
            }
        }
    }

    #[test]
    fn weight_function_positivity() {
        let bad = WeightFunction::custom("zero", |_| int(0));
        assert!(bad.eval(&cfg("1")).is_err());
        assert!(WeightFunction::coordinate_decay(int(1)).is_err());
        let f = WeightFunction::coordinate_decay(rat(1, 4)).unwrap();
        assert_eq!(f.eval(&cfg("0000")).unwrap(), int(1));
        assert_eq!(f.eval(&cfg("0101")).unwrap(), rat(1, 16 * 256));
    }
}
