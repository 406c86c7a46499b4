//! Weakly indecomposable measures with a common cocycle are equal or singular,
//! swept over every orbit pair of several models on windows up to 6.

use ergodec_core::cocycles::{make_rn, Cocycle};
use ergodec_core::counterexamples::{orbit_restriction, weak_strong_equivalence_check, EquivalenceOutcome};
use ergodec_core::group::BinaryConfig;
use ergodec_core::measures::{AtomicMeasure, Measure, ProductBernoulli};
use ergodec_core::numeric::rat;

fn models(n: usize) -> Vec<ProductBernoulli> {
    vec![
        ProductBernoulli::constant(rat(1, 2), n).unwrap(),
        ProductBernoulli::new((0..n).map(|i| rat(1 + i as i64, n as i64 + 2)).collect()).unwrap(),
        ProductBernoulli::new((0..n).map(|i| rat(1 + (i as i64 % 3), 5)).collect()).unwrap(),
    ]
}

#[test]
fn never_neither_on_windows_up_to_six() {
    let mut checked = 0;
    for n in 1..=6 {
        for product in models(n) {
            let rho = make_rn(Measure::Product(product.clone()));
            let restricted: Vec<AtomicMeasure> = (0..=n).map(|k| orbit_restriction(&product, k).unwrap()).collect();
            for (i, a) in restricted.iter().enumerate() {
                for (j, b) in restricted.iter().enumerate() {
                    let report = weak_strong_equivalence_check(a, b, &rho).unwrap();
                    let expected = if i == j { EquivalenceOutcome::Equal } else { EquivalenceOutcome::MutuallySingular };
                    assert_eq!(report.outcome, expected, "n={n} orbits {i},{j}: {:?}", report.witness);
                    checked += 1;
                }
            }
        }
    }
    assert_eq!(checked, (1..=6).map(|n| 3 * (n + 1) * (n + 1)).sum::<usize>());
}

#[test]
fn one_orbit_forces_equality_for_every_scaling() {
    // Any measure on one orbit carrying ρ is a multiple of the restriction.
    let product = models(5).remove(1);
    let rho = make_rn(Measure::Product(product.clone()));
    let base = orbit_restriction(&product, 2).unwrap();
    for c in [rat(1, 7), rat(3, 2), rat(11, 1)] {
        let report = weak_strong_equivalence_check(&base.scaled(&c), &base, &rho).unwrap();
        assert_eq!(report.outcome, EquivalenceOutcome::Equal);
        assert_eq!(report.jordan_singular_mass, rat(0, 1));
    }
}

#[test]
fn a_second_measure_on_the_orbit_breaks_the_cocycle() {
    // Uniform on the orbit is in the class of ρ ≡ 1, not of the inhomogeneous ρ.
    let product = models(4).remove(1);
    let rho = make_rn(Measure::Product(product.clone()));
    let uniform = AtomicMeasure::uniform(4, BinaryConfig::all(4).filter(|x| x.count_ones() == 2)).unwrap();
    assert!(weak_strong_equivalence_check(&uniform, &orbit_restriction(&product, 2).unwrap(), &rho).is_err());
    let report = weak_strong_equivalence_check(&uniform, &uniform, &Cocycle::constant_one()).unwrap();
    assert_eq!(report.outcome, EquivalenceOutcome::Equal);
}
