//! Ergodic decomposition on the binary models.
//!
//! A point `x` is classified by its limit statistic `Π(x) = (r_S)_S`, the
//! vector of limiting orbit averages of the dictionary monomials. Sampling
//! points from `ν` and grouping them by `Π` gives an empirical decomposing
//! measure `ν̄`; on atomic models the same classification is carried out
//! exactly and yields the conditional measures on the level sets.

use std::collections::{btree_map, BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_traits::{One, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::averaging::{
    average_exact_fast, average_over_orbit, limit_average_many, Indicator, LimitConfig, Method, Monomial, Observable,
    Schedule,
};
use crate::cocycles::Cocycle;
use crate::error::{Error, Result};
use crate::group::{act, enumerate, haar_sample, BinaryConfig, ChainLevel, Permutation};
use crate::measures::{ac_check, AtomicMeasure, Cylinder, Measure, Mixture, ProductBernoulli, Relation};
use crate::numeric::{format_rational, rat, to_f64, Rational};
use crate::rng::substream;

/// Largest window handled by the exact atomic routines.
pub const MAX_EXACT_WINDOW: usize = 12;
pub const DEFAULT_MIN_GAP: f64 = 0.05;
pub const DEFAULT_MAX_NONCONVERGENCE: f64 = 0.01;

/// Monomials `φ_S` for every `S ⊆ {1..span}` with `|S| ≤ depth`, ordered by
/// degree and then lexicographically; entry 0 is the constant `1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TestDictionary {
    span: usize,
    depth: usize,
    #[serde(skip)]
    entries: Vec<Monomial>,
}

impl TestDictionary {
    pub fn new(span: usize, depth: usize) -> Result<Self> {
        if span == 0 || depth == 0 {
            return Err(Error::InvalidParameter("dictionary span and depth must be positive".into()));
        }
        let depth = depth.min(span);
        let mut entries = Vec::new();
        for d in 0..=depth {
            for subset in itertools::Itertools::combinations(1..=span, d) {
                entries.push(Monomial::new(subset));
            }
        }
        Ok(TestDictionary { span, depth, entries })
    }

    pub fn span(&self) -> usize {
        self.span
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn entries(&self) -> &[Monomial] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, m: &Monomial) -> Option<usize> {
        self.entries.iter().position(|e| e == m)
    }
}

impl Default for TestDictionary {
    fn default() -> Self {
        TestDictionary::new(2, 2).expect("valid")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StatisticEntry {
    pub label: String,
    /// The detected limit, or the top-level value when not converged.
    pub value: f64,
    pub stderr: f64,
    pub method: Method,
    pub converged: bool,
}

/// `Π(x)` together with the schedule it was computed on.
#[derive(Debug, Clone, Serialize)]
pub struct LimitStatistic {
    pub entries: Vec<StatisticEntry>,
    pub schedule: Vec<usize>,
}

impl LimitStatistic {
    pub fn all_converged(&self) -> bool {
        self.entries.iter().all(|e| e.converged)
    }

    pub fn value(&self, dict: &TestDictionary, m: &Monomial) -> Option<f64> {
        dict.index_of(m).map(|i| self.entries[i].value)
    }

    /// `r_{1}`, the limiting frequency of ones at the first coordinate.
    pub fn r1(&self, dict: &TestDictionary) -> f64 {
        self.value(dict, &Monomial::new([1])).expect("dictionary contains {1}")
    }

    /// `r_S ≥ r_{S ∪ {j}}` for every pair present in the dictionary.
    pub fn is_monotone(&self, dict: &TestDictionary) -> bool {
        dict.entries().iter().enumerate().all(|(i, s)| {
            dict.entries().iter().enumerate().all(|(j, t)| {
                !(s.coords().is_subset(t.coords())) || self.entries[i].value >= self.entries[j].value
            })
        })
    }
}

/// Limit statistic of `x` for every dictionary entry, from shared draws.
pub fn pi_phi<R: Rng + ?Sized>(
    x: &BinaryConfig,
    rho: &Cocycle,
    dict: &TestDictionary,
    schedule: &Schedule,
    config: &LimitConfig,
    rng: &mut R,
) -> Result<LimitStatistic> {
    let observables: Vec<&dyn Observable> = dict.entries().iter().map(|m| m as &dyn Observable).collect();
    let reports = limit_average_many(rho, &observables, x, schedule, config, rng)?;
    let entries = dict
        .entries()
        .iter()
        .zip(reports)
        .map(|(m, r)| {
            let last = r.levels.last().expect("non-empty schedule");
            StatisticEntry {
                label: m.label(),
                value: r.limit.unwrap_or(last.value),
                stderr: last.stderr,
                method: last.method,
                converged: r.converged,
            }
        })
        .collect();
    Ok(LimitStatistic { entries, schedule: schedule.levels().to_vec() })
}

/// Schedule, limit detector settings and seed shared by the sampling routines.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeConfig {
    pub schedule: Schedule,
    pub limit: LimitConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixingMode {
    /// Finite mixture: points are grouped by gaps in `r_{1}`.
    Clusters,
    /// Continuous mixing: `ν̄` is the empirical law of `r_{1}`.
    Continuous,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecomposeConfig {
    pub samples: usize,
    pub probe: ProbeConfig,
    pub dictionary: TestDictionary,
    pub mode: MixingMode,
    pub min_gap: f64,
    pub max_nonconvergence: f64,
    /// Probe points per component for the representative ergodicity check; 0 skips it.
    pub representative_probes: usize,
}

impl DecomposeConfig {
    pub fn new(samples: usize, window: usize, seed: u64) -> Result<Self> {
        Ok(DecomposeConfig {
            samples,
            probe: ProbeConfig { schedule: Schedule::geometric(window)?, limit: LimitConfig::default(), seed },
            dictionary: TestDictionary::default(),
            mode: MixingMode::Clusters,
            min_gap: DEFAULT_MIN_GAP,
            max_nonconvergence: DEFAULT_MAX_NONCONVERGENCE,
            representative_probes: 8,
        })
    }
}

/// Estimated ergodic measure of one component.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Representative {
    /// Exchangeable case: an i.i.d. Bernoulli measure.
    Bernoulli { p: f64 },
    /// Cluster means of the limit statistic, one per dictionary monomial.
    Empirical { moments: BTreeMap<Monomial, f64> },
    /// Conditional measure on one level set of an atomic model.
    Exact {
        #[serde(serialize_with = "serialize_atomic")]
        measure: AtomicMeasure,
    },
}

fn serialize_atomic<S: Serializer>(m: &AtomicMeasure, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&m.to_canonical_text())
}

impl Representative {
    /// `η(A)` for a cylinder `A`.
    pub fn cylinder_mass(&self, a: &Cylinder) -> Result<f64> {
        match self {
            Representative::Bernoulli { p } => Ok(p.powi(a.pinned_ones() as i32) * (1.0 - p).powi(a.pinned_zeros() as i32)),
            Representative::Exact { measure } => Ok(to_f64(&measure.mass(a))),
            Representative::Empirical { moments } => {
                // Inclusion–exclusion over the pinned zeros.
                let ones: Vec<usize> = a.pins().iter().filter(|(_, &v)| v).map(|(&i, _)| i).collect();
                let zeros: Vec<usize> = a.pins().iter().filter(|(_, &v)| !v).map(|(&i, _)| i).collect();
                let mut total = 0.0;
                for mask in 0u32..(1 << zeros.len()) {
                    let extra = zeros.iter().enumerate().filter(|(j, _)| mask >> j & 1 == 1).map(|(_, &i)| i);
                    let m = Monomial::new(ones.iter().copied().chain(extra));
                    let value = moments.get(&m).ok_or_else(|| {
                        Error::InvalidParameter(format!("dictionary lacks {} needed for cylinder {a}", m.label()))
                    })?;
                    total += if mask.count_ones() % 2 == 0 { *value } else { -*value };
                }
                Ok(total)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Ergodic,
    NonErgodic,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErgodicityReport {
    pub verdict: Verdict,
    pub method: Method,
    pub tests: usize,
    pub failures: usize,
    /// At most five failing `(point, monomial)` descriptions.
    pub witnesses: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Component {
    pub label: String,
    pub weight: f64,
    #[serde(serialize_with = "crate::numeric::serialize_rational")]
    pub weight_exact: Rational,
    /// Mean of `r_{1}` over the component.
    pub center: f64,
    pub spread: f64,
    pub count: usize,
    pub representative: Representative,
    pub ergodicity: Option<ErgodicityReport>,
}

/// Per-sample record streamed to the `Π` series.
#[derive(Debug, Clone, Serialize)]
pub struct SampleStatistic {
    pub index: usize,
    pub latent_component: Option<usize>,
    pub latent_parameter: Option<f64>,
    pub values: Vec<f64>,
    pub converged: bool,
    pub cluster: Option<usize>,
}

/// Empirical or exact `ν̄`.
#[derive(Debug, Clone, Serialize)]
pub struct DecomposingMeasure {
    pub mode: MixingMode,
    pub method: Method,
    pub components: Vec<Component>,
    /// Sorted `r_{1}` values of all samples; the mixing law in continuous mode.
    #[serde(skip)]
    pub mixing_sample: Vec<f64>,
    #[serde(skip)]
    pub samples: Vec<SampleStatistic>,
    pub dictionary_labels: Vec<String>,
    pub schedule: Vec<usize>,
    pub sample_count: usize,
    pub nonconverged: usize,
    /// Components are separated in `Π`, so the projection to them is injective.
    pub admissible: bool,
}

impl DecomposingMeasure {
    /// `index,latent_component,latent_parameter,cluster,converged,r_S...` rows.
    pub fn statistics_csv(&self) -> String {
        let mut out = String::from("index,latent_component,latent_parameter,cluster,converged");
        for label in &self.dictionary_labels {
            let _ = write!(out, ",r{}", label.replace(',', "_").replace(['{', '}'], ""));
        }
        out.push('\n');
        for s in &self.samples {
            let opt = |v: Option<String>| v.unwrap_or_default();
            let _ = write!(
                out,
                "{},{},{},{},{}",
                s.index,
                opt(s.latent_component.map(|c| c.to_string())),
                opt(s.latent_parameter.map(|p| p.to_string())),
                opt(s.cluster.map(|c| c.to_string())),
                s.converged
            );
            for v in &s.values {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Stable line-oriented summary: one line per component.
    pub fn to_text(&self) -> String {
        let mut out = format!("decomposition mode={:?} method={} samples={}\n", self.mode, self.method.tag(), self.sample_count);
        for c in &self.components {
            let _ = writeln!(out, "component {} weight={} center={} count={}", c.label, format_rational(&c.weight_exact), c.center, c.count);
        }
        out
    }

    /// Total mass `Σ_j w_j η_j(A)` of the assembled measure on a cylinder.
    pub fn assembled_mass(&self, a: &Cylinder) -> Result<f64> {
        match self.mode {
            MixingMode::Clusters => self
                .components
                .iter()
                .map(|c| c.representative.cylinder_mass(a).map(|m| c.weight * m))
                .sum(),
            MixingMode::Continuous => {
                let n = self.mixing_sample.len() as f64;
                Ok(self
                    .mixing_sample
                    .iter()
                    .map(|p| Representative::Bernoulli { p: *p }.cylinder_mass(a).expect("closed form"))
                    .sum::<f64>()
                    / n)
            }
        }
    }
}

fn check_measure_carries_cocycle<R: Rng + ?Sized>(nu: &Measure, rho: &Cocycle, rng: &mut R) -> Result<()> {
    let level = ChainLevel::new(nu.window().min(8))?;
    for _ in 0..8 {
        let x = nu.sample(rng);
        for _ in 0..4 {
            let g = haar_sample(level, rng);
            let expected = nu.rn_derivative_f64(&g, &x)?;
            let actual = rho.eval_f64(&g, &x)?;
            if (expected - actual).abs() > 1e-9 * expected.abs().max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "measure does not carry the cocycle {}: at x={x}, g={g} the Radon–Nikodym derivative is {expected} but the cocycle gives {actual}",
                    rho.provenance()
                )));
            }
        }
    }
    Ok(())
}

/// Splits sorted values into runs separated by gaps of at least `min_gap`.
/// Returns `(start, end)` index ranges into the sorted order.
pub fn gap_clusters(sorted: &[f64], min_gap: f64) -> Vec<(usize, usize)> {
    let mut clusters = Vec::new();
    let mut start = 0;
    for i in 1..=sorted.len() {
        if i == sorted.len() || sorted[i] - sorted[i - 1] >= min_gap {
            if i > start {
                clusters.push((start, i));
            }
            start = i;
        }
    }
    clusters
}

fn mean_and_spread(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Rational approximation with denominator `10^6`, kept inside `(0, 1)`.
fn rational_parameter(p: f64) -> Option<Rational> {
    let scaled = (p * 1e6).round() as i64;
    (scaled > 0 && scaled < 1_000_000).then(|| rat(scaled, 1_000_000))
}

/// Estimates `ν̄` for `ν ∈ 𝔐(ρ)`.
///
/// Atomic measures are decomposed exactly through
/// [`conditional_measures_exact`]; all others by sampling.
pub fn decompose(nu: &Measure, rho: &Cocycle, config: &DecomposeConfig) -> Result<DecomposingMeasure> {
    if let Measure::Atomic(atomic) = nu {
        return decompose_exact(atomic, rho, config);
    }
    let dict = &config.dictionary;
    let r1_index = dict
        .index_of(&Monomial::new([1]))
        .ok_or_else(|| Error::InvalidParameter("dictionary must contain {1}".into()))?;
    if config.samples == 0 {
        return Err(Error::InvalidParameter("decompose needs at least one sample".into()));
    }
    check_measure_carries_cocycle(nu, rho, &mut substream(config.probe.seed, u64::MAX))?;

    let results: Vec<(crate::measures::Latent, LimitStatistic)> = (0..config.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(config.probe.seed, i as u64);
            let (x, latent) = nu.sample_latent(&mut rng);
            let stat = pi_phi(&x, rho, dict, &config.probe.schedule, &config.probe.limit, &mut rng)?;
            Ok((latent, stat))
        })
        .collect::<Result<_>>()?;

    let nonconverged = results.iter().filter(|(_, s)| !s.all_converged()).count();
    if nonconverged as f64 > config.max_nonconvergence * config.samples as f64 {
        return Err(Error::NonConvergence { failed: nonconverged, total: config.samples, threshold: config.max_nonconvergence });
    }

    let mut samples: Vec<SampleStatistic> = results
        .iter()
        .enumerate()
        .map(|(index, (latent, stat))| SampleStatistic {
            index,
            latent_component: latent.component,
            latent_parameter: latent.parameter,
            values: stat.entries.iter().map(|e| e.value).collect(),
            converged: stat.all_converged(),
            cluster: None,
        })
        .collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| samples[a].values[r1_index].total_cmp(&samples[b].values[r1_index]).then(a.cmp(&b)));
    let mixing_sample: Vec<f64> = order.iter().map(|&i| samples[i].values[r1_index]).collect();

    let exchangeable = nu.is_exchangeable() && rho.is_constant_one();
    let mut components = Vec::new();
    if config.mode == MixingMode::Clusters {
        for (c, (start, end)) in gap_clusters(&mixing_sample, config.min_gap).into_iter().enumerate() {
            let members = &order[start..end];
            for &i in members {
                samples[i].cluster = Some(c);
            }
            let (center, spread) = mean_and_spread(mixing_sample[start..end].iter().copied());
            let representative = if exchangeable {
                Representative::Bernoulli { p: center }
            } else {
                let moments = dict
                    .entries()
                    .iter()
                    .enumerate()
                    .map(|(j, m)| (m.clone(), members.iter().map(|&i| samples[i].values[j]).sum::<f64>() / members.len() as f64))
                    .collect();
                Representative::Empirical { moments }
            };
            components.push(Component {
                label: format!("c{c}"),
                weight: members.len() as f64 / config.samples as f64,
                weight_exact: rat(members.len() as i64, config.samples as i64),
                center,
                spread,
                count: members.len(),
                representative,
                ergodicity: None,
            });
        }
        if config.representative_probes > 0 {
            for (c, comp) in components.iter_mut().enumerate() {
                if let Representative::Bernoulli { p } = comp.representative {
                    comp.ergodicity = Some(match rational_parameter(p) {
                        Some(q) => {
                            let eta = Measure::Product(ProductBernoulli::constant(q, nu.window())?);
                            let probe = ProbeConfig { seed: config.probe.seed ^ (0x9e37_79b9 + c as u64), ..config.probe.clone() };
                            ergodicity_test(&eta, rho, dict, config.representative_probes, &probe)?
                        }
                        // Point masses at all-zeros / all-ones are fixed points.
                        None => ErgodicityReport { verdict: Verdict::Ergodic, method: Method::Exact, tests: 0, failures: 0, witnesses: vec![] },
                    });
                }
            }
        }
    }

    Ok(DecomposingMeasure {
        mode: config.mode,
        method: Method::MonteCarlo,
        admissible: true,
        components,
        mixing_sample,
        samples,
        dictionary_labels: dict.entries().iter().map(Monomial::label).collect(),
        schedule: config.probe.schedule.levels().to_vec(),
        sample_count: config.samples,
        nonconverged,
    })
}

fn decompose_exact(nu: &AtomicMeasure, rho: &Cocycle, config: &DecomposeConfig) -> Result<DecomposingMeasure> {
    let assignment = conditional_measures_exact(nu, rho)?;
    if !assignment.cocycle_verified {
        return Err(Error::InvalidParameter(format!(
            "measure does not carry the cocycle {}: {}",
            rho.provenance(),
            assignment.witness.unwrap_or_default()
        )));
    }
    let total = nu.total();
    let level = ChainLevel::new(nu.window())?;
    let first = Monomial::new([1]);
    let mut components = Vec::new();
    for (c, cell) in assignment.cells.iter().enumerate() {
        let rep = cell.measure.atoms().next().expect("non-empty cell").0.clone();
        let center = to_f64(&average_over_orbit(level, rho, &first, &rep)?.exact.expect("exact"));
        let weight_exact = &cell.mass / &total;
        components.push(Component {
            label: format!("c{c}"),
            weight: to_f64(&weight_exact),
            weight_exact,
            center,
            spread: 0.0,
            count: cell.measure.atoms().count(),
            representative: Representative::Exact { measure: cell.measure.clone() },
            ergodicity: Some(ergodicity_test_exact(&cell.measure, rho, &config.dictionary)?),
        });
    }
    Ok(DecomposingMeasure {
        mode: MixingMode::Clusters,
        method: Method::Exact,
        admissible: true,
        components,
        mixing_sample: Vec::new(),
        samples: Vec::new(),
        dictionary_labels: config.dictionary.entries().iter().map(Monomial::label).collect(),
        schedule: vec![nu.window()],
        sample_count: 0,
        nonconverged: 0,
    })
}

/// `max_A |ν(A) − Σ_j w_j η_j(A)|` over cylinders pinning coordinates in `{1..depth}`.
pub fn barycenter_residual(nu: &Measure, dm: &DecomposingMeasure, depth: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for a in Cylinder::all_up_to_depth(depth.min(nu.window())) {
        let lhs = to_f64(&(nu.mass(&a) / nu.total_mass()));
        worst = worst.max((lhs - dm.assembled_mass(&a)?).abs());
    }
    Ok(worst)
}

fn verdict_from(failures: usize, tests: usize) -> Verdict {
    let fraction = failures as f64 / tests.max(1) as f64;
    if fraction <= 0.05 {
        Verdict::Ergodic
    } else if fraction >= 0.25 {
        Verdict::NonErgodic
    } else {
        Verdict::Inconclusive
    }
}

fn ergodicity_test_exact(eta: &AtomicMeasure, rho: &Cocycle, dict: &TestDictionary) -> Result<ErgodicityReport> {
    let level = ChainLevel::new(eta.window())?;
    let total = eta.total();
    let (mut tests, mut failures, mut witnesses) = (0, 0, Vec::new());
    for (x, _) in eta.atoms() {
        for m in dict.entries().iter().filter(|m| m.coords().iter().all(|&i| i <= eta.window())) {
            let expected = eta.mass(&m.cylinder()) / &total;
            let actual = average_exact_fast(level, rho, m, x)?.exact.expect("exact");
            tests += 1;
            if actual != expected {
                failures += 1;
                if witnesses.len() < 5 {
                    witnesses.push(format!("x={x} φ{}: average {} vs mean {}", m.label(), format_rational(&actual), format_rational(&expected)));
                }
            }
        }
    }
    let verdict = if failures == 0 { Verdict::Ergodic } else { Verdict::NonErgodic };
    Ok(ErgodicityReport { verdict, method: Method::Exact, tests, failures, witnesses })
}

/// Compares limit averages at `η`-typical points with the `η`-means of the
/// dictionary monomials.
///
/// Atomic measures on windows up to [`MAX_EXACT_WINDOW`] are checked exactly
/// on every atom at the top level. Otherwise `probes` points are sampled and
/// each comparison allows `tol + 3·sqrt(se² + |S|²·m(1−m)/n)`, where `m` is
/// the mean of `φ_S` and the second term is the sampling spread of the
/// level-`n` frequency itself.
pub fn ergodicity_test(eta: &Measure, rho: &Cocycle, dict: &TestDictionary, probes: usize, probe: &ProbeConfig) -> Result<ErgodicityReport> {
    if let Measure::Atomic(a) = eta {
        if a.window() <= MAX_EXACT_WINDOW {
            return ergodicity_test_exact(a, rho, dict);
        }
    }
    let top = probe.schedule.top() as f64;
    let means: Vec<f64> = dict.entries().iter().map(|m| to_f64(&(eta.mass(&m.cylinder()) / eta.total_mass()))).collect();
    let per_probe: Vec<(usize, Vec<String>)> = (0..probes)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(probe.seed, i as u64);
            let x = eta.sample(&mut rng);
            let stat = pi_phi(&x, rho, dict, &probe.schedule, &probe.limit, &mut rng)?;
            let mut fails = Vec::new();
            for ((m, entry), mean) in dict.entries().iter().zip(&stat.entries).zip(&means).skip(1) {
                let s = m.degree() as f64;
                let allowance = probe.limit.tolerance
                    + 3.0 * (entry.stderr.powi(2) + s * s * mean * (1.0 - mean) / top).sqrt();
                if !entry.converged || (entry.value - mean).abs() > allowance {
                    fails.push(format!(
                        "probe {i} φ{}: limit {} vs mean {mean} (allowance {allowance}, converged {})",
                        m.label(),
                        entry.value,
                        entry.converged
                    ));
                }
            }
            Ok((dict.len() - 1, fails))
        })
        .collect::<Result<_>>()?;
    let tests = per_probe.iter().map(|(t, _)| t).sum();
    let failures = per_probe.iter().map(|(_, f)| f.len()).sum();
    let witnesses = per_probe.into_iter().flat_map(|(_, f)| f).take(5).collect();
    Ok(ErgodicityReport { verdict: verdict_from(failures, tests), method: Method::MonteCarlo, tests, failures, witnesses })
}

/// `sup_t |F_n(t) − F(t)|` for the empirical law of `samples`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |worst: f64, (i, &x)| {
        let f = cdf(x);
        worst.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// CDF of the Beta(α, β) law.
pub fn beta_cdf(alpha: f64, beta: f64) -> Result<impl Fn(f64) -> f64> {
    let dist = Beta::new(alpha, beta).map_err(|e| Error::InvalidParameter(format!("Beta({alpha}, {beta}): {e}")))?;
    Ok(move |x: f64| dist.cdf(x))
}

/// One level set of the exact statistic with its conditional measure.
#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    /// `A_N^ρ φ_{i}`, `i = 1..N`, on the cell.
    #[serde(serialize_with = "serialize_rationals")]
    pub statistic: Vec<Rational>,
    /// Numbers of ones of the orbits making up the cell.
    pub orbits: Vec<usize>,
    #[serde(serialize_with = "crate::numeric::serialize_rational")]
    pub mass: Rational,
    #[serde(serialize_with = "serialize_atomic")]
    pub measure: AtomicMeasure,
}

fn serialize_rationals<S: Serializer>(values: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(values.iter().map(format_rational))
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionalAssignment {
    pub cells: Vec<Cell>,
    /// `ν_C(T_g x) = ρ(g, x) ν_C(x)` on every cell.
    pub cocycle_verified: bool,
    /// `Σ_C ν(C) ν_C = ν`.
    pub reconstruction_exact: bool,
    pub witness: Option<String>,
}

/// Conditional measures of `ν` on the level sets of the exact limit statistic.
///
/// At the top level `n = N` the averages of `φ_{i}` are constant on
/// `S(N)`-orbits, so each level set is a union of orbits. Cell measures are
/// checked against `ρ` over all of `S(N)` when `N ≤ 6` and over adjacent
/// transpositions otherwise.
pub fn conditional_measures_exact(nu: &AtomicMeasure, rho: &Cocycle) -> Result<ConditionalAssignment> {
    let n = nu.window();
    if n > MAX_EXACT_WINDOW {
        return Err(Error::Capacity { what: "conditional_measures_exact", limit: MAX_EXACT_WINDOW, requested: n });
    }
    if nu.is_zero() {
        return Err(Error::ZeroMass("conditional measures of the zero measure".into()));
    }
    let level = ChainLevel::new(n)?;
    let singletons: Vec<Monomial> = (1..=n).map(|i| Monomial::new([i])).collect();
    let mut by_orbit: BTreeMap<usize, Vec<Rational>> = BTreeMap::new();
    let mut cells: BTreeMap<Vec<Rational>, (BTreeSet<usize>, AtomicMeasure)> = BTreeMap::new();
    for (x, mass) in nu.atoms() {
        let k = x.count_ones();
        if let btree_map::Entry::Vacant(slot) = by_orbit.entry(k) {
            let stat = singletons
                .iter()
                .map(|m| average_over_orbit(level, rho, m, x).map(|r| r.exact.expect("exact")))
                .collect::<Result<Vec<_>>>()?;
            slot.insert(stat);
        }
        let key = by_orbit[&k].clone();
        let entry = cells.entry(key).or_insert_with(|| (BTreeSet::new(), AtomicMeasure::zero(n)));
        entry.0.insert(k);
        entry.1.add_mass(x.clone(), mass.clone())?;
    }

    let generators: Vec<Permutation> = if n <= 6 {
        enumerate(level)?
    } else {
        (1..n).map(|i| Permutation::swap(i, i + 1)).collect()
    };
    let mut cocycle_verified = true;
    let mut witness = None;
    let mut reconstruction = AtomicMeasure::zero(n);
    let mut out = Vec::new();
    for (statistic, (orbits, raw)) in cells {
        let mass = raw.total();
        let measure = raw.normalized()?;
        'cell: for (x, m) in measure.atoms() {
            for g in &generators {
                let y = act(g, x)?;
                // Both directions: mass may not leak out of, or appear from nothing in, the cell.
                let ok = match rho.eval(g, x) {
                    Ok(r) => measure.mass_at(&y) == r * m,
                    Err(_) => false,
                };
                if !ok {
                    cocycle_verified = false;
                    witness.get_or_insert_with(|| format!("cell {orbits:?}: ν_C(T_g x) ≠ ρ(g,x) ν_C(x) at x={x}, g={g}"));
                    break 'cell;
                }
            }
        }
        reconstruction = reconstruction.plus(&measure.scaled(&mass))?;
        out.push(Cell { statistic, orbits: orbits.into_iter().collect(), mass, measure });
    }
    let reconstruction_exact = reconstruction == *nu;
    Ok(ConditionalAssignment { cells: out, cocycle_verified, reconstruction_exact, witness })
}

/// Bernoulli measures `B(p_low)` and `B(p_high)` separated by the event
/// `{frequency of ones over the window ≤ threshold}`.
#[derive(Debug, Clone, Serialize)]
pub struct FrequencySeparation {
    pub p_low: f64,
    pub p_high: f64,
    pub threshold: f64,
    pub window: usize,
    /// Hoeffding bound `ln B(p_low)(freq > t) ≤ −2N(t − p_low)²`.
    pub ln_bound_low: f64,
    pub ln_bound_high: f64,
    pub samples: usize,
    pub misclassified_low: usize,
    pub misclassified_high: usize,
    /// Both tail bounds below `1e-6` and no sample on the wrong side.
    pub singular: bool,
}

pub fn frequency_separation<R: Rng + ?Sized>(p_low: f64, p_high: f64, window: usize, samples: usize, rng: &mut R) -> FrequencySeparation {
    let threshold = (p_low + p_high) / 2.0;
    let n = window as f64;
    let ln_bound_low = -2.0 * n * (threshold - p_low).powi(2);
    let ln_bound_high = -2.0 * n * (p_high - threshold).powi(2);
    let freq = |p: f64, rng: &mut R| (0..window).filter(|_| rng.random::<f64>() < p).count() as f64 / n;
    let misclassified_low = (0..samples).filter(|_| freq(p_low, rng) > threshold).count();
    let misclassified_high = (0..samples).filter(|_| freq(p_high, rng) <= threshold).count();
    let small = (1e-6f64).ln();
    FrequencySeparation {
        p_low,
        p_high,
        threshold,
        window,
        ln_bound_low,
        ln_bound_high,
        samples,
        misclassified_low,
        misclassified_high,
        singular: ln_bound_low < small && ln_bound_high < small && misclassified_low == 0 && misclassified_high == 0,
    }
}

/// Re-assembles `ν = Σ_j w_j η_j` from a decomposition.
pub fn assemble(dm: &DecomposingMeasure, window: usize) -> Result<Measure> {
    let mut exact = Vec::new();
    let mut bernoulli = Vec::new();
    for c in &dm.components {
        match &c.representative {
            Representative::Exact { measure } => exact.push(measure.scaled(&c.weight_exact)),
            Representative::Bernoulli { p } => {
                let q = rational_parameter(*p).ok_or_else(|| Error::InvalidParameter(format!("degenerate Bernoulli parameter {p}")))?;
                bernoulli.push((c.weight_exact.clone(), Measure::Product(ProductBernoulli::constant(q, window)?)));
            }
            Representative::Empirical { .. } => {
                return Err(Error::InvalidParameter("empirical representatives cannot be re-assembled".into()))
            }
        }
    }
    if !exact.is_empty() {
        let mut total = AtomicMeasure::zero(window);
        for m in exact {
            total = total.plus(&m)?;
        }
        return Ok(Measure::Atomic(total));
    }
    let (weights, components): (Vec<_>, Vec<_>) = bernoulli.into_iter().unzip();
    if components.len() == 1 {
        return Ok(components.into_iter().next().unwrap());
    }
    Ok(Measure::Mixture(Mixture::new(weights, components)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentSummary {
    pub weight: f64,
    pub center: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundtripReport {
    pub method: Method,
    pub first: Vec<ComponentSummary>,
    pub second: Vec<ComponentSummary>,
    pub same_component_count: bool,
    pub weight_drift: f64,
    pub center_drift: f64,
    /// Exact route only: the second decomposition equals the first.
    pub fixed_point_exact: Option<bool>,
    /// Exact route only: assembled cell measures are pairwise mutually singular.
    pub cells_singular: Option<bool>,
    /// Sampling route: separation of every pair of Bernoulli components.
    pub separations: Vec<FrequencySeparation>,
}

impl RoundtripReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.same_component_count
            && self.weight_drift <= tolerance
            && self.center_drift <= tolerance
            && self.fixed_point_exact.unwrap_or(true)
            && self.cells_singular.unwrap_or(true)
            && self.separations.iter().all(|s| s.singular)
    }
}

fn summaries(dm: &DecomposingMeasure) -> Vec<ComponentSummary> {
    dm.components.iter().map(|c| ComponentSummary { weight: c.weight, center: c.center }).collect()
}

/// Decompose, re-assemble, decompose again (with the next seed) and compare.
pub fn mes_ed_roundtrip(nu: &Measure, rho: &Cocycle, config: &DecomposeConfig, separation_samples: usize) -> Result<RoundtripReport> {
    let first = decompose(nu, rho, config)?;
    let assembled = assemble(&first, nu.window())?;
    let mut again = config.clone();
    again.probe.seed = config.probe.seed.wrapping_add(1);
    let second = decompose(&assembled, rho, &again)?;

    let same = first.components.len() == second.components.len();
    let (mut weight_drift, mut center_drift) = (0.0f64, 0.0f64);
    if same {
        for (a, b) in first.components.iter().zip(&second.components) {
            weight_drift = weight_drift.max((a.weight - b.weight).abs());
            center_drift = center_drift.max((a.center - b.center).abs());
        }
    } else {
        weight_drift = f64::INFINITY;
        center_drift = f64::INFINITY;
    }

    let (mut fixed_point_exact, mut cells_singular, mut separations) = (None, None, Vec::new());
    if first.method == Method::Exact {
        let cell_measures: Vec<&AtomicMeasure> = first
            .components
            .iter()
            .filter_map(|c| match &c.representative {
                Representative::Exact { measure } => Some(measure),
                _ => None,
            })
            .collect();
        let mut singular = true;
        for (i, a) in cell_measures.iter().enumerate() {
            for b in &cell_measures[i + 1..] {
                singular &= ac_check(*a, *b) == Relation::MutuallySingular;
            }
        }
        cells_singular = Some(singular);
        fixed_point_exact = Some(
            same && first.components.iter().zip(&second.components).all(|(a, b)| {
                a.weight_exact == b.weight_exact
                    && matches!((&a.representative, &b.representative),
                        (Representative::Exact { measure: x }, Representative::Exact { measure: y }) if x == y)
            }),
        );
    } else {
        let ps: Vec<f64> = first
            .components
            .iter()
            .filter_map(|c| match c.representative {
                Representative::Bernoulli { p } => Some(p),
                _ => None,
            })
            .collect();
        let mut rng = substream(config.probe.seed, u64::MAX - 1);
        for (i, &a) in ps.iter().enumerate() {
            for &b in &ps[i + 1..] {
                separations.push(frequency_separation(a.min(b), a.max(b), nu.window(), separation_samples, &mut rng));
            }
        }
    }
    Ok(RoundtripReport {
        method: first.method,
        first: summaries(&first),
        second: summaries(&second),
        same_component_count: same,
        weight_drift,
        center_drift,
        fixed_point_exact,
        cells_singular,
        separations,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct UpgradeReport {
    pub upgraded: BTreeSet<BinaryConfig>,
    pub almost_invariant: bool,
    /// `g` and `ν(A △ T_g A)` for the first failing generator.
    pub witness: Option<(String, String)>,
    /// `ν(A △ Ã) = 0`; only meaningful when `A` is almost invariant.
    pub null_difference: bool,
}

/// `Ã = {x : A_n χ_A(x) = 1 for all n ≤ N}`, the largest `S(N)`-invariant
/// subset of `A`, together with the almost-invariance check for `A`.
///
/// Any positive cocycle gives the same `Ã`, so the constant one is used.
/// Almost invariance is tested over all of `S(N)` when `N ≤ 6` and over
/// adjacent transpositions otherwise.
pub fn almost_invariant_upgrade(a: &BTreeSet<BinaryConfig>, nu: &AtomicMeasure) -> Result<UpgradeReport> {
    let n = nu.window();
    if n > MAX_EXACT_WINDOW {
        return Err(Error::Capacity { what: "almost_invariant_upgrade", limit: MAX_EXACT_WINDOW, requested: n });
    }
    if let Some(bad) = a.iter().find(|x| x.len() != n) {
        return Err(Error::WindowMismatch { expected: n, actual: bad.len() });
    }
    let level = ChainLevel::new(n)?;
    let chi = Indicator { set: a.clone() };
    let one = Cocycle::constant_one();
    let mut upgraded = BTreeSet::new();
    for x in a {
        // Only points of A can have average 1.
        if average_over_orbit(level, &one, &chi, x)?.exact.expect("exact").is_one() {
            upgraded.insert(x.clone());
        }
    }

    let generators: Vec<Permutation> = if n <= 6 {
        enumerate(level)?
    } else {
        (1..n).map(|i| Permutation::swap(i, i + 1)).collect()
    };
    let mut witness = None;
    for g in &generators {
        let moved: BTreeSet<BinaryConfig> = a.iter().map(|x| act(g, x)).collect::<Result<_>>()?;
        let diff: BTreeSet<BinaryConfig> = a.symmetric_difference(&moved).cloned().collect();
        let mass = nu.mass_of_set(&diff);
        if !mass.is_zero() {
            witness = Some((g.to_string(), format_rational(&mass)));
            break;
        }
    }
    let diff: BTreeSet<BinaryConfig> = a.symmetric_difference(&upgraded).cloned().collect();
    Ok(UpgradeReport {
        almost_invariant: witness.is_none(),
        null_difference: nu.mass_of_set(&diff).is_zero(),
        upgraded,
        witness,
    })
}

/// Approximate `Rational` for `f64` values used in reports.
pub fn approx_rational(value: f64) -> Rational {
    Rational::from_float(value).unwrap_or_else(Rational::zero)
}

/// Whether every `S(N)`-invariant set has conditional mass 0 or 1 in each cell.
pub fn cells_are_indecomposable(assignment: &ConditionalAssignment) -> bool {
    assignment.cells.iter().all(|cell| {
        let orbits: BTreeSet<usize> = cell.measure.atoms().map(|(x, _)| x.count_ones()).collect();
        let orbits: Vec<usize> = orbits.into_iter().collect();
        (0u64..(1 << orbits.len())).all(|mask| {
            let chosen: BTreeSet<usize> = orbits.iter().enumerate().filter(|(j, _)| mask >> j & 1 == 1).map(|(_, &k)| k).collect();
            let m: Rational = cell.measure.atoms().filter(|(x, _)| chosen.contains(&x.count_ones())).map(|(_, w)| w.clone()).sum();
            m.is_zero() || m.is_one()
        })
    })
}
