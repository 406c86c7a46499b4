//! One runner per subcommand. Each is a pure function of its config and seed.

use ergodec_core::averaging::{
    check_orbit_invariance, conditional_expectation_check, fubini_check, tower_check, LimitConfig, Monomial, Observable,
    Schedule, EXACT_CROSSOVER,
};
use ergodec_core::cocycles::{make_rn, verify_identity};
use ergodec_core::counterexamples::{demonstrate_kolmogorov, KolmogorovConfig};
use ergodec_core::decomposition::{barycenter_residual, beta_cdf, decompose, ks_distance, DecomposeConfig, MixingMode, Verdict};
use ergodec_core::group::{BinaryConfig, ChainLevel};
use ergodec_core::infinite_measures::{
    decompose_sigma_finite, inv_p_f, make_fibrewise_f, orbital_dichotomy, orbital_measure_exact, orbital_measure_mc, p_f, pcl,
    random_orbit_measure, reweight_decomposition, Dichotomy, DichotomyReport, ProjectiveClass,
};
use ergodec_core::measures::{ac_check, AtomicMeasure, Cylinder, Measure, Mixture, OrbitSigmaFinite, PolyaMeasure, ProductBernoulli};
use ergodec_core::numeric::{format_rational, parse_rational, rat, to_f64, Rational};
use ergodec_core::rng::{from_seed, substream};
use rand::Rng;

use crate::config::{DefinettiConfig, KolmogorovToml, OrbitalConfig, SigmaFiniteConfig, ValidateConfig};
use crate::record::{NumericEntry, ResultRecord};
use crate::CliError;

fn rational_key(key: &str, text: &str) -> Result<Rational, CliError> {
    parse_rational(text).map_err(|e| CliError::Schema(format!("{key}: {e}")))
}

fn limit_config(tolerance: f64, mc_samples: usize) -> LimitConfig {
    LimitConfig { tolerance, mc_samples, ..LimitConfig::default() }
}

pub fn definetti(cfg: &DefinettiConfig, seed: u64) -> Result<ResultRecord, CliError> {
    let mut record = ResultRecord::new("definetti", seed, cfg);
    let (nu, mode) = match cfg.model.as_str() {
        "mixture" => {
            if cfg.weights.is_empty() || cfg.weights.len() != cfg.params.len() {
                return Err(CliError::Schema("weights and params must be non-empty and of equal length".into()));
            }
            let weights = cfg.weights.iter().map(|w| rational_key("weights", w)).collect::<Result<Vec<_>, _>>()?;
            let components = cfg
                .params
                .iter()
                .map(|p| Ok(Measure::Product(ProductBernoulli::constant(rational_key("params", p)?, cfg.window)?)))
                .collect::<Result<Vec<_>, CliError>>()?;
            (Measure::Mixture(Mixture::new(weights, components)?), MixingMode::Clusters)
        }
        "polya" => {
            let (a, b) = (rational_key("alpha", &cfg.alpha)?, rational_key("beta", &cfg.beta)?);
            (Measure::Polya(PolyaMeasure::new(a, b, cfg.window)?), MixingMode::Continuous)
        }
        other => return Err(CliError::Schema(format!("model must be \"mixture\" or \"polya\", got {other:?}"))),
    };
    let rho = make_rn(nu.clone());
    let mut dc = DecomposeConfig::new(cfg.samples, cfg.window, seed)?;
    dc.probe.limit = limit_config(cfg.tolerance, cfg.mc_samples);
    dc.min_gap = cfg.min_gap;
    dc.representative_probes = cfg.representative_probes;
    dc.mode = mode;
    let dm = decompose(&nu, &rho, &dc)?;

    let n = dm.sample_count as f64;
    for c in &dm.components {
        record.push("components", NumericEntry::monte_carlo(format!("weight_{}", c.label), c.weight, (c.weight * (1.0 - c.weight) / n).sqrt()));
        record.push("components", NumericEntry::monte_carlo(format!("center_{}", c.label), c.center, c.spread / (c.count as f64).sqrt()));
    }
    record.push("components", NumericEntry::count("nonconverged", dm.nonconverged));

    let residual = barycenter_residual(&nu, &dm, cfg.residual_depth)?;
    record.push("residuals", NumericEntry::monte_carlo("barycenter_residual", residual, 0.0));
    record.verdict(
        "barycenter",
        residual <= cfg.residual_tolerance,
        format!("max cylinder residual {residual} (depth {}, tolerance {})", cfg.residual_depth, cfg.residual_tolerance),
    );

    match mode {
        MixingMode::Clusters => {
            let mut expected: Vec<(f64, f64)> = cfg
                .params
                .iter()
                .zip(&cfg.weights)
                .map(|(p, w)| Ok((to_f64(&rational_key("params", p)?), to_f64(&rational_key("weights", w)?))))
                .collect::<Result<_, CliError>>()?;
            expected.sort_by(|a, b| a.0.total_cmp(&b.0));
            let count_ok = expected.len() == dm.components.len();
            let worst = if count_ok {
                dm.components
                    .iter()
                    .zip(&expected)
                    .map(|(c, (p, w))| (c.center - p).abs().max((c.weight - w).abs()))
                    .fold(0.0, f64::max)
            } else {
                f64::INFINITY
            };
            record.verdict(
                "recovery",
                count_ok && worst <= cfg.recovery_tolerance,
                format!("{} components for {} expected, worst weight/center error {worst}", dm.components.len(), expected.len()),
            );
            let ergodic = dm
                .components
                .iter()
                .filter(|c| c.ergodicity.as_ref().is_some_and(|e| e.verdict == Verdict::Ergodic))
                .count();
            record.verdict(
                "components-ergodic",
                ergodic == dm.components.len(),
                format!("{ergodic} of {} representatives pass the ergodicity test", dm.components.len()),
            );
        }
        MixingMode::Continuous => {
            let cdf = beta_cdf(to_f64(&rational_key("alpha", &cfg.alpha)?), to_f64(&rational_key("beta", &cfg.beta)?))?;
            let ks = ks_distance(&dm.mixing_sample, cdf);
            record.push("residuals", NumericEntry::monte_carlo("ks_distance", ks, 0.0));
            record.verdict(
                "mixing-law",
                ks <= cfg.ks_tolerance,
                format!("Kolmogorov–Smirnov distance {ks} to Beta({}, {})", cfg.alpha, cfg.beta),
            );
        }
    }
    record.series.push(("statistics.csv".into(), dm.statistics_csv()));
    record.narrative = dm.to_text();
    record.detail("decomposition", &dm);
    Ok(record)
}

pub fn kolmogorov(cfg: &KolmogorovToml, seed: u64) -> Result<ResultRecord, CliError> {
    let mut record = ResultRecord::new("kolmogorov", seed, cfg);
    let report = demonstrate_kolmogorov(&KolmogorovConfig {
        atom_bound: cfg.atom_bound,
        window: cfg.window,
        samples: cfg.samples,
        tolerance: cfg.tolerance,
        seed,
    })?;
    record.push("symbolic", NumericEntry::count("sets_checked", report.sets_checked));
    let g0 = &report.g0_event;
    record.push("g0_event", NumericEntry::monte_carlo("frequency_event_mass", g0.empirical_mass, g0.stderr));
    record.push("g0_event", NumericEntry::exact("expected_mass", &rat(1, 2)));
    record.verdict("full-group-ergodic", report.ergodic_for_full_group, format!("{} invariant sets, all of mass 0 or 1", report.sets_checked));
    record.verdict("decomposable", report.decomposable, format!("split into {} with weights {}", report.split_components.join(", "), report.split_weights.join(", ")));
    record.verdict(
        "g0-frequency-event",
        g0.within_tolerance,
        format!("mass {} ± {} (tolerance {}, ln Hoeffding bound {})", g0.empirical_mass, g0.stderr, g0.tolerance, g0.ln_hoeffding_bound),
    );
    record.narrative = report.narrative.clone();
    record.detail("verdict", &report.verdict);
    record.detail("report", &report);
    Ok(record)
}

/// Orbit-counting measure truncated to the window, atom by atom.
fn atomwise(nu: &OrbitSigmaFinite, window: usize) -> Result<AtomicMeasure, CliError> {
    let atoms = BinaryConfig::all(window).map(|x| {
        let m = nu.atom_mass(&x);
        (x, m)
    });
    Ok(AtomicMeasure::from_atoms(window, atoms.filter(|(_, m)| *m != Rational::from_integer(0.into())))?)
}

pub fn sigma_finite(cfg: &SigmaFiniteConfig, seed: u64) -> Result<ResultRecord, CliError> {
    let mut record = ResultRecord::new("sigma-finite", seed, cfg);
    if cfg.orbits == 0 || cfg.random_labels == 0 {
        return Err(CliError::Schema("orbits and random_labels must be positive".into()));
    }
    let f = make_fibrewise_f();
    let mut rng = from_seed(seed);
    let nu = OrbitSigmaFinite::new((0..cfg.orbits).map(|k| (k, rat(rng.random_range(1..=20), rng.random_range(1..=12)))))?;
    let dec = decompose_sigma_finite(&nu, &f)?;
    for c in &dec.components {
        record.push("components", NumericEntry::exact(format!("weight_{}", c.label), &c.weight));
        record.push("components", NumericEntry::exact(format!("scale_{}", c.label), &c.scale));
    }
    record.push("components", NumericEntry::exact("normalizer", &dec.normalizer));
    let reconstructs = dec.barycenter() == nu.scaled(&dec.normalizer.recip());
    record.verdict("barycenter", reconstructs, "Σ w_k η_k equals ν / ν(f) exactly");

    let base = pcl(&nu, &f)?;
    let mut constant = true;
    for _ in 0..cfg.reweightings {
        let factors: Vec<Rational> = (0..cfg.orbits).map(|_| rat(rng.random_range(1..=30), rng.random_range(1..=30))).collect();
        let re = reweight_decomposition(&dec, |k| factors[k].clone())?;
        constant &= re.descriptor() == base && re.barycenter() == dec.barycenter();
    }
    record.verdict("pcl-invariance", constant, format!("PCL constant: {constant} over {} reweightings", cfg.reweightings));

    let window = cfg.random_labels;
    let mut agree = 0;
    for _ in 0..cfg.pairs {
        let (a, b) = (random_orbit_measure(cfg.random_labels, &mut rng), random_orbit_measure(cfg.random_labels, &mut rng));
        let by_descriptor = pcl(&a, &f)?.relation_to(&pcl(&b, &f)?);
        let by_atoms = ac_check(&atomwise(&a, window)?, &atomwise(&b, window)?);
        agree += usize::from(by_descriptor == by_atoms);
    }
    record.push("pcl", NumericEntry::count("relation_agreements", agree));
    record.verdict("pcl-relations", agree == cfg.pairs, format!("{agree} of {} pair relations match the atomwise oracle", cfg.pairs));

    let mut roundtrips = 0;
    for _ in 0..cfg.roundtrip_models {
        let model = random_orbit_measure(cfg.random_labels, &mut rng);
        let back = inv_p_f(&p_f(&model, &f)?, &f)?;
        roundtrips += usize::from(back == ProjectiveClass::of_orbit(&model, &f)?);
    }
    record.push("pcl", NumericEntry::count("roundtrips_exact", roundtrips));
    record.verdict("p_f-roundtrip", roundtrips == cfg.roundtrip_models, format!("{roundtrips} of {} models", cfg.roundtrip_models));
    record.narrative = dec.to_text();
    record.detail("decomposition", &dec);
    record.detail("descriptor", &base);
    Ok(record)
}

fn battery_entries(record: &mut ResultRecord, table: &str, report: &DichotomyReport) {
    for b in &report.battery {
        for l in &b.report.levels {
            let name = format!("{}@{}", b.label, l.level);
            let entry = match &l.exact {
                Some(e) => NumericEntry::exact(name, e),
                None => NumericEntry::monte_carlo(name, l.value, l.stderr),
            };
            record.push(table, entry);
        }
    }
}

pub fn orbital(cfg: &OrbitalConfig, seed: u64) -> Result<ResultRecord, CliError> {
    let mut record = ResultRecord::new("orbital", seed, cfg);
    let last_one = cfg.ones.iter().copied().max().unwrap_or(0);
    if cfg.ones.contains(&0) || last_one > cfg.escape_top {
        return Err(CliError::Schema("ones must be 1-based positions not beyond escape_top".into()));
    }
    let limit = limit_config(cfg.tolerance, cfg.mc_samples);
    let x = BinaryConfig::with_ones_at(cfg.escape_top, &cfg.ones);
    let first = Cylinder::ones([1]);

    let mut exact_ok = true;
    for n in 1..=EXACT_CROSSOVER.min(cfg.escape_top) {
        let eta = orbital_measure_exact(&x, ChainLevel::new(n)?)?;
        let value = eta.mass(&first);
        exact_ok &= value == rat(x.count_ones_prefix(n) as i64, n as i64);
        record.push("escape_exact", NumericEntry::exact(format!("eta{{x_1=1}}@{n}"), &value));
    }
    record.verdict("escape-exact", exact_ok, format!("η_x^n{{x_1=1}} equals the prefix frequency for n ≤ {EXACT_CROSSOVER}"));

    let sample = orbital_measure_mc(&x, ChainLevel::new(cfg.escape_top)?, cfg.mc_samples, &mut substream(seed, 0))?;
    let (mean, se) = sample.mean(&Monomial::new([1]));
    record.push("escape_exact", NumericEntry::monte_carlo(format!("eta{{x_1=1}}@{}", cfg.escape_top), mean, se));
    record.verdict("escape-top", mean <= 0.01, format!("η_x^{}{{x_1=1}} = {mean} ± {se}", cfg.escape_top));

    let escape = orbital_dichotomy(&x, &Schedule::geometric(cfg.escape_top)?, &limit, &mut substream(seed, 1))?;
    battery_entries(&mut record, "escape_battery", &escape);
    record.verdict("escape-verdict", escape.verdict == Dichotomy::EscapesMass, escape.reason.clone());

    let density = rational_key("density", &cfg.density)?;
    let typical = ProductBernoulli::constant(density.clone(), cfg.typical_window)?.sample(&mut substream(seed, 2));
    let conv = orbital_dichotomy(&typical, &Schedule::geometric(cfg.typical_window)?, &limit, &mut substream(seed, 3))?;
    battery_entries(&mut record, "typical_battery", &conv);
    let limit_value = conv.battery[0].report.limit;
    let close = limit_value.is_some_and(|v| (v - to_f64(&density)).abs() <= cfg.limit_tolerance);
    record.verdict(
        "typical-converges",
        conv.verdict == Dichotomy::ConvergesToProbability && close,
        format!("{}; limit of φ{{1}} {limit_value:?} vs density {}", conv.reason, format_rational(&density)),
    );
    record.detail("escape", &escape);
    record.detail("typical", &conv);
    Ok(record)
}

/// Inhomogeneous rational product used by the exact suite.
pub fn suite_product(window: usize) -> Result<ProductBernoulli, CliError> {
    Ok(ProductBernoulli::new((0..window).map(|i| rat(1 + (i as i64 % 4), 6 + (i as i64 % 3))).collect())?)
}

fn atomic_product(window: usize) -> Result<AtomicMeasure, CliError> {
    let product = suite_product(window)?;
    Ok(AtomicMeasure::from_atoms(window, BinaryConfig::all(window).map(|x| {
        let m = product.atom_mass(&x);
        (x, m)
    }))?)
}

fn depth_monomials(window: usize, depth: usize) -> Result<Vec<Monomial>, CliError> {
    Ok(ergodec_core::decomposition::TestDictionary::new(window, depth)?.entries().to_vec())
}

pub fn validate(cfg: &ValidateConfig, seed: u64) -> Result<ResultRecord, CliError> {
    let mut record = ResultRecord::new("validate", seed, cfg);

    let rho = make_rn(Measure::Product(suite_product(cfg.cocycle_window)?));
    let identity = verify_identity(&rho, cfg.cocycle_trials, ChainLevel::new(cfg.cocycle_level)?, cfg.cocycle_window, &mut from_seed(seed))?;
    record.push("checks", NumericEntry::count("cocycle_violations", identity.violations));
    record.verdict("cocycle-identity", identity.passed(), format!("{} violations in {} trials", identity.violations, identity.trials));

    let (w, n) = (cfg.conditional_window, cfg.conditional_level);
    let nu = atomic_product(w)?;
    let rho = make_rn(Measure::Product(suite_product(w)?));
    let mut sets = 0;
    let mut ok = true;
    let monomials = depth_monomials(w, cfg.dictionary_depth)?;
    for m in &monomials {
        let r = conditional_expectation_check(n, &rho, m, &nu)?;
        sets += r.sets.checked;
        ok &= r.passed();
    }
    record.push("checks", NumericEntry::count("conditional_expectation_sets", sets));
    record.verdict("conditional-expectation", ok, format!("{sets} (set, function) pairs over {} functions", monomials.len()));

    let w = cfg.tower_window;
    let nu = atomic_product(w)?;
    let rho = make_rn(Measure::Product(suite_product(w)?));
    let observables = [Monomial::new([1]), Monomial::new([2, 5]), Monomial::new([1, 3, 6])];
    let (mut checked, mut mismatches) = (0, 0);
    for phi in &observables {
        for m in 1..=cfg.tower_max_level {
            for k in 1..=m {
                let r = tower_check(m, k, &rho, phi, &nu)?;
                checked += r.checked;
                mismatches += r.mismatches;
            }
        }
    }
    record.push("checks", NumericEntry::count("tower_atoms", checked));
    record.verdict("tower", mismatches == 0 && checked > 0, format!("{mismatches} mismatches over {checked} atom checks"));

    let mut fubini = (0, 0);
    for w in 1..=cfg.fubini_max_window {
        let nu = atomic_product(w)?;
        let rho = make_rn(Measure::Product(suite_product(w)?));
        for n in 1..=cfg.fubini_max_level.min(w) {
            for phi in depth_monomials(w, 2)? {
                fubini.0 += 1;
                fubini.1 += usize::from(fubini_check(n, &rho, &phi, &nu)?.passed());
            }
        }
    }
    record.push("checks", NumericEntry::count("fubini_cases", fubini.0));
    record.verdict("fubini", fubini.0 == fubini.1, format!("{} of {} cases exact", fubini.1, fubini.0));

    let w = cfg.invariance_window;
    let rho = make_rn(Measure::Product(suite_product(w)?));
    let phi: &dyn Observable = &Monomial::new([1, 2]);
    let mut inv = (0, 0);
    for n in 1..=cfg.invariance_max_level.min(w) {
        for x in BinaryConfig::all(w) {
            let r = check_orbit_invariance(ChainLevel::new(n)?, &rho, phi, &x)?;
            inv.0 += r.checked;
            inv.1 += r.mismatches;
        }
    }
    record.push("checks", NumericEntry::count("invariance_checks", inv.0));
    record.verdict("orbit-invariance", inv.1 == 0, format!("{} mismatches over {} checks", inv.1, inv.0));
    Ok(record)
}
