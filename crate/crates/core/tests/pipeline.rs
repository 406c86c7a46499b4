//! End-to-end decompositions on small windows.

use ergodec_core::cocycles::make_rn;
use ergodec_core::decomposition::{barycenter_residual, decompose, mes_ed_roundtrip, DecomposeConfig, Representative, Verdict};
use ergodec_core::group::BinaryConfig;
use ergodec_core::measures::{AtomicMeasure, Measure, Mixture, ProductBernoulli};
use ergodec_core::numeric::rat;

fn bernoulli_mixture(weights: [(i64, i64); 2], params: [(i64, i64); 2], window: usize) -> Measure {
    Measure::Mixture(
        Mixture::new(
            weights.iter().map(|&(a, b)| rat(a, b)).collect(),
            params.iter().map(|&(a, b)| Measure::Product(ProductBernoulli::constant(rat(a, b), window).unwrap())).collect(),
        )
        .unwrap(),
    )
}

#[test]
fn two_well_separated_components_are_recovered() {
    let nu = bernoulli_mixture([(1, 4), (3, 4)], [(1, 5), (1, 2)], 4096);
    let config = DecomposeConfig::new(800, 4096, 11).unwrap();
    let dm = decompose(&nu, &make_rn(nu.clone()), &config).unwrap();
    assert_eq!(dm.components.len(), 2, "{}", dm.to_text());
    let (low, high) = (&dm.components[0], &dm.components[1]);
    assert!((low.center - 0.2).abs() < 0.02 && (high.center - 0.5).abs() < 0.02);
    // Binomial standard error of a weight at 800 samples is about 0.015.
    assert!((low.weight - 0.25).abs() < 0.05);
    assert!(matches!(low.representative, Representative::Bernoulli { .. }));
    assert!(dm.components.iter().all(|c| c.ergodicity.as_ref().is_some_and(|e| e.verdict == Verdict::Ergodic)));
    assert!(barycenter_residual(&nu, &dm, 3).unwrap() < 0.03);
}

#[test]
fn roundtrip_is_stable_by_sampling() {
    let nu = bernoulli_mixture([(1, 2), (1, 2)], [(1, 5), (4, 5)], 4096);
    let config = DecomposeConfig::new(600, 4096, 5).unwrap();
    let report = mes_ed_roundtrip(&nu, &make_rn(nu.clone()), &config, 2000).unwrap();
    assert!(report.passed(0.06), "{report:?}");
    assert!(report.separations.iter().all(|s| s.singular && s.misclassified_low == 0 && s.misclassified_high == 0));
}

#[test]
fn exact_route_is_a_fixed_point() {
    let product = ProductBernoulli::new(vec![rat(1, 3), rat(1, 2), rat(2, 3), rat(1, 4), rat(3, 5)]).unwrap();
    let nu = Measure::Atomic(
        AtomicMeasure::from_atoms(5, BinaryConfig::all(5).map(|x| {
            let m = product.atom_mass(&x);
            (x, m)
        }))
        .unwrap(),
    );
    let rho = make_rn(Measure::Product(product));
    let config = DecomposeConfig::new(1, 5, 0).unwrap();
    let dm = decompose(&nu, &rho, &config).unwrap();
    assert_eq!(dm.components.len(), 6);
    let total: ergodec_core::numeric::Rational = dm.components.iter().map(|c| c.weight_exact.clone()).sum();
    assert_eq!(total, rat(1, 1));
    assert!(barycenter_residual(&nu, &dm, 3).unwrap() < 1e-12);
    let report = mes_ed_roundtrip(&nu, &rho, &config, 0).unwrap();
    assert_eq!(report.fixed_point_exact, Some(true));
    assert_eq!(report.cells_singular, Some(true));
}
