//! The chain `S(1) ⊂ S(2) ⊂ …` of finite symmetric groups and its action on
//! binary configurations by permuting coordinates.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Largest `n` for which `S(n)` may be enumerated element by element (8! = 40320).
pub const MAX_ENUMERATION_DEGREE: usize = 8;

/// A finitely supported bijection of the positive integers.
///
/// Stored as the image list of `1..=degree`, where `degree` is the largest
/// moved point, so two equal permutations always have equal representations.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    // images[j] = g(j + 1) - 1
    images: Vec<u32>,
}

impl Permutation {
    pub fn identity() -> Self {
        Permutation { images: Vec::new() }
    }

    /// Builds `g` from the 1-based images `g(1), …, g(n)`.
    pub fn from_images(images: &[usize]) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in images {
            if i == 0 || i > n || seen[i - 1] {
                return Err(Error::InvalidParameter(format!(
                    "{images:?} is not a permutation of 1..={n}"
                )));
            }
            seen[i - 1] = true;
        }
        Ok(Self::from_zero_based(images.iter().map(|&i| (i - 1) as u32).collect()))
    }

    pub(crate) fn from_zero_based(mut images: Vec<u32>) -> Self {
        while let Some(&last) = images.last() {
            if last as usize == images.len() - 1 {
                images.pop();
            } else {
                break;
            }
        }
        Permutation { images }
    }

    /// The transposition of points `i` and `j` (1-based).
    pub fn swap(i: usize, j: usize) -> Self {
        assert!(i >= 1 && j >= 1, "points are 1-based");
        let n = i.max(j);
        let mut images: Vec<u32> = (0..n as u32).collect();
        images.swap(i - 1, j - 1);
        Self::from_zero_based(images)
    }

    /// The cycle `c_0 → c_1 → … → c_0` (1-based, distinct points).
    pub fn cycle(points: &[usize]) -> Result<Self> {
        if points.contains(&0) || !points.iter().all_unique() {
            return Err(Error::InvalidParameter(format!("bad cycle {points:?}")));
        }
        let n = points.iter().copied().max().unwrap_or(0);
        let mut images: Vec<u32> = (0..n as u32).collect();
        for (a, b) in points.iter().zip(points.iter().cycle().skip(1)) {
            images[a - 1] = (b - 1) as u32;
        }
        Ok(Self::from_zero_based(images))
    }

    /// Smallest `n` with support contained in `{1..n}` (0 for the identity).
    pub fn degree(&self) -> usize {
        self.images.len()
    }

    pub fn is_identity(&self) -> bool {
        self.images.is_empty()
    }

    /// `g(i)` for a 1-based point `i`.
    pub fn apply(&self, i: usize) -> usize {
        debug_assert!(i >= 1);
        self.images.get(i - 1).map_or(i, |&v| v as usize + 1)
    }

    pub(crate) fn apply0(&self, i: usize) -> usize {
        self.images.get(i).map_or(i, |&v| v as usize)
    }

    /// Moved points, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.images
            .iter()
            .enumerate()
            .filter(|(j, &v)| *j != v as usize)
            .map(|(j, _)| j + 1)
            .collect()
    }

    /// The images `g(1), …, g(degree)`, 1-based.
    pub fn images(&self) -> Vec<usize> {
        self.images.iter().map(|&v| v as usize + 1).collect()
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0u32; self.images.len()];
        for (j, &v) in self.images.iter().enumerate() {
            inv[v as usize] = j as u32;
        }
        Permutation { images: inv }
    }

    /// `self ∘ other`, i.e. `i ↦ self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Self {
        let n = self.degree().max(other.degree());
        Self::from_zero_based((0..n).map(|i| self.apply0(other.apply0(i)) as u32).collect())
    }

    /// Canonical projection `S(m) → S(n)`: each point above `n` is cut out of
    /// its cycle, top down. Pushes the Haar measure of `S(m)` forward to the
    /// Haar measure of `S(n)`, which is what couples Monte Carlo draws across
    /// the levels of the chain.
    pub fn project_to(&self, n: usize) -> Self {
        if self.degree() <= n {
            return self.clone();
        }
        let mut images = self.images.clone();
        let mut inverse = self.inverse().images;
        for top in (n..images.len()).rev() {
            let image = images[top] as usize;
            if image != top {
                let pre = inverse[top] as usize;
                images[pre] = image as u32;
                inverse[image] = pre as u32;
            }
            images.pop();
            inverse.pop();
        }
        Self::from_zero_based(images)
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Cycle notation, e.g. `(1 3 2)(4 5)`; the identity prints as `()`.
impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return f.write_str("()");
        }
        let mut seen = vec![false; self.degree()];
        for start in 0..self.degree() {
            if seen[start] || self.apply0(start) == start {
                continue;
            }
            f.write_str("(")?;
            let mut j = start;
            let mut first = true;
            while !seen[j] {
                seen[j] = true;
                if !first {
                    f.write_str(" ")?;
                }
                write!(f, "{}", j + 1)?;
                first = false;
                j = self.apply0(j);
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

pub fn compose(g: &Permutation, h: &Permutation) -> Permutation {
    g.compose(h)
}

/// Index `n` of the subgroup `S(n)` in the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChainLevel(usize);

impl ChainLevel {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("chain levels start at 1".into()));
        }
        Ok(ChainLevel(n))
    }

    pub fn n(self) -> usize {
        self.0
    }

    pub fn contains(self, g: &Permutation) -> bool {
        g.degree() <= self.0
    }

    /// `|S(n)| = n!`.
    pub fn order(self) -> BigUint {
        (1..=self.0).map(BigUint::from).product()
    }
}

/// A Haar (uniform) draw from `S(n)` by Fisher–Yates shuffling.
pub fn haar_sample<R: Rng + ?Sized>(level: ChainLevel, rng: &mut R) -> Permutation {
    let mut images: Vec<u32> = (0..level.n() as u32).collect();
    images.shuffle(rng);
    Permutation::from_zero_based(images)
}

/// Every element of `S(n)`, identity first, in lexicographic image order.
pub fn enumerate(level: ChainLevel) -> Result<Vec<Permutation>> {
    let n = level.n();
    if n > MAX_ENUMERATION_DEGREE {
        return Err(Error::Capacity {
            what: "enumerate",
            limit: MAX_ENUMERATION_DEGREE,
            requested: n,
        });
    }
    Ok((0..n as u32)
        .permutations(n)
        .map(Permutation::from_zero_based)
        .collect())
}

/// A point of the window `{0,1}^N`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinaryConfig {
    bits: Vec<bool>,
}

impl BinaryConfig {
    pub fn new(bits: Vec<bool>) -> Self {
        BinaryConfig { bits }
    }

    pub fn zeros(len: usize) -> Self {
        BinaryConfig { bits: vec![false; len] }
    }

    pub fn ones(len: usize) -> Self {
        BinaryConfig { bits: vec![true; len] }
    }

    /// Window of length `len` with ones exactly at the given 1-based positions.
    pub fn with_ones_at(len: usize, positions: &[usize]) -> Self {
        let mut x = Self::zeros(len);
        for &p in positions {
            x.bits[p - 1] = true;
        }
        x
    }

    /// All `2^len` configurations in lexicographic order.
    pub fn all(len: usize) -> impl Iterator<Item = BinaryConfig> {
        assert!(len < 32, "window too long to enumerate");
        (0u32..(1u32 << len)).map(move |code| BinaryConfig {
            bits: (0..len).map(|i| code >> (len - 1 - i) & 1 == 1).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Bit `x_i` for a 1-based coordinate `i`.
    pub fn bit(&self, i: usize) -> bool {
        self.bits[i - 1]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i - 1] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Number of ones among `x_1, …, x_n`.
    pub fn count_ones_prefix(&self, n: usize) -> usize {
        self.bits[..n.min(self.bits.len())].iter().filter(|&&b| b).count()
    }

    /// 1-based positions of the ones.
    pub fn ones_positions(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i + 1)
            .collect()
    }
}

impl fmt::Debug for BinaryConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl serde::Serialize for BinaryConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl fmt::Display for BinaryConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
        f.write_str(&s)
    }
}

impl FromStr for BinaryConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Parse(format!("not a binary word: {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BinaryConfig::new)
    }
}

/// `T_g x`: the bit at position `i` of the result is `x_{g⁻¹(i)}`.
pub fn act(g: &Permutation, x: &BinaryConfig) -> Result<BinaryConfig> {
    if g.degree() > x.len() {
        return Err(Error::DegreeOverflow {
            degree: g.degree(),
            window: x.len(),
        });
    }
    let mut bits = x.bits.clone();
    for (j, &image) in g.images.iter().enumerate() {
        bits[image as usize] = x.bits[j];
    }
    Ok(BinaryConfig { bits })
}

/// The `S(n)`-orbit of `x` as distinct points `y`, each paired with one
/// group element `k` such that `T_k x = y`.
///
/// The orbit consists of all rearrangements of the first `n` bits, so its
/// size is `C(n, ones among x_1..x_n)`.
pub fn orbit(level: ChainLevel, x: &BinaryConfig) -> Result<Vec<(BinaryConfig, Permutation)>> {
    let n = level.n();
    if n > x.len() {
        return Err(Error::DegreeOverflow { degree: n, window: x.len() });
    }
    let ones: Vec<usize> = (0..n).filter(|&i| x.bits[i]).collect();
    let zeros: Vec<usize> = (0..n).filter(|&i| !x.bits[i]).collect();
    Ok((0..n)
        .combinations(ones.len())
        .map(|targets| {
            let mut images = vec![0u32; n];
            let mut is_target = vec![false; n];
            for (&src, &dst) in ones.iter().zip(&targets) {
                images[src] = dst as u32;
                is_target[dst] = true;
            }
            let free = (0..n).filter(|&i| !is_target[i]);
            for (&src, dst) in zeros.iter().zip(free) {
                images[src] = dst as u32;
            }
            let mut bits = x.bits.clone();
            for (i, bit) in bits.iter_mut().enumerate().take(n) {
                *bit = is_target[i];
            }
            (BinaryConfig { bits }, Permutation::from_zero_based(images))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    use std::collections::HashMap;

    #[test]
    fn identity_and_involution() {
        let g = Permutation::cycle(&[1, 3, 2]).unwrap();
        assert_eq!(compose(&Permutation::identity(), &g), g);
        let s = Permutation::swap(1, 2);
        assert!(compose(&s, &s).is_identity());
        assert_eq!(Permutation::swap(3, 3), Permutation::identity());
    }

    #[test]
    fn composition_applies_right_factor_first() {
        let g = Permutation::swap(1, 2);
        let h = Permutation::swap(2, 3);
        let gh = g.compose(&h);
        for i in 1..=3 {
            assert_eq!(gh.apply(i), g.apply(h.apply(i)));
        }
        assert!(gh.degree() <= 3);
    }

    #[test]
    fn associativity_on_random_triples() {
        let mut rng = rng::from_seed(11);
        let level = ChainLevel::new(5).unwrap();
        for _ in 0..100 {
            let (a, b, c) = (
                haar_sample(level, &mut rng),
                haar_sample(level, &mut rng),
                haar_sample(level, &mut rng),
            );
            let left = compose(&compose(&a, &b), &c);
            let right = compose(&a, &compose(&b, &c));
            for i in 1..=5 {
                assert_eq!(left.apply(i), a.apply(b.apply(c.apply(i))));
                assert_eq!(right.apply(i), left.apply(i));
            }
        }
    }

    #[test]
    fn degree_is_trimmed_and_support_is_moved_points() {
        let g = Permutation::from_images(&[2, 1, 3, 4]).unwrap();
        assert_eq!(g.degree(), 2);
        assert_eq!(g.support(), vec![1, 2]);
        assert!(Permutation::from_images(&[1, 1]).is_err());
        assert!(Permutation::from_images(&[0, 1]).is_err());
    }

    #[test]
    fn display_uses_cycle_notation() {
        assert_eq!(Permutation::identity().to_string(), "()");
        assert_eq!(Permutation::cycle(&[1, 3, 2]).unwrap().to_string(), "(1 3 2)");
    }

    #[test]
    fn haar_on_s1_is_identity_and_degree_is_bounded() {
        let mut rng = rng::from_seed(1);
        for _ in 0..20 {
            assert!(haar_sample(ChainLevel::new(1).unwrap(), &mut rng).is_identity());
            assert!(haar_sample(ChainLevel::new(5).unwrap(), &mut rng).degree() <= 5);
        }
    }

    fn chi_square_uniformity(n: usize, draws: usize, seed: u64, sample: impl Fn(&mut rng::RandomStream) -> Permutation) {
        let mut rng = rng::from_seed(seed);
        let mut counts: HashMap<Permutation, usize> = HashMap::new();
        for _ in 0..draws {
            *counts.entry(sample(&mut rng)).or_default() += 1;
        }
        let cells = enumerate(ChainLevel::new(n).unwrap()).unwrap();
        assert_eq!(counts.len(), cells.len());
        let expected = draws as f64 / cells.len() as f64;
        let stat: f64 = cells
            .iter()
            .map(|g| {
                let o = *counts.get(g).unwrap_or(&0) as f64;
                (o - expected).powi(2) / expected
            })
            .sum();
        let critical = ChiSquared::new((cells.len() - 1) as f64).unwrap().inverse_cdf(0.999);
        assert!(stat < critical, "n={n}: chi-square {stat} >= {critical}");
    }

    #[test]
    fn haar_sample_passes_chi_square() {
        for n in 2..=4 {
            chi_square_uniformity(n, 60_000, 100 + n as u64, |r| haar_sample(ChainLevel::new(n).unwrap(), r));
        }
    }

    #[test]
    fn haar_s3_frequencies_within_three_sigma() {
        let mut rng = rng::from_seed(3);
        let draws = 60_000;
        let mut counts: HashMap<Permutation, usize> = HashMap::new();
        for _ in 0..draws {
            *counts.entry(haar_sample(ChainLevel::new(3).unwrap(), &mut rng)).or_default() += 1;
        }
        let sigma = ((1.0 / 6.0) * (5.0 / 6.0) / draws as f64).sqrt();
        for c in counts.values() {
            let freq = *c as f64 / draws as f64;
            assert!((freq - 1.0 / 6.0).abs() < 3.0 * sigma, "{freq}");
        }
    }

    #[test]
    fn projection_preserves_haar_and_fixes_lower_levels() {
        chi_square_uniformity(3, 60_000, 77, |r| haar_sample(ChainLevel::new(6).unwrap(), r).project_to(3));
        let mut rng = rng::from_seed(5);
        for _ in 0..50 {
            let g = haar_sample(ChainLevel::new(4).unwrap(), &mut rng);
            assert_eq!(g.project_to(4), g);
            assert_eq!(g.project_to(7), g);
            assert!(g.project_to(2).degree() <= 2);
        }
        // (1 3 2) with 3 cut out becomes (1 2).
        assert_eq!(Permutation::cycle(&[1, 3, 2]).unwrap().project_to(2), Permutation::swap(1, 2));
    }

    #[test]
    fn enumerate_small_levels() {
        let s2 = enumerate(ChainLevel::new(2).unwrap()).unwrap();
        assert_eq!(s2, vec![Permutation::identity(), Permutation::swap(1, 2)]);
        assert!(matches!(
            enumerate(ChainLevel::new(9).unwrap()),
            Err(Error::Capacity { limit: 8, requested: 9, .. })
        ));
    }

    #[test]
    fn group_axioms_on_s4() {
        let s4 = enumerate(ChainLevel::new(4).unwrap()).unwrap();
        assert_eq!(s4.len(), 24);
        let set: std::collections::HashSet<_> = s4.iter().cloned().collect();
        assert_eq!(set.len(), 24);
        for g in &s4 {
            assert!(g.compose(&g.inverse()).is_identity());
            for h in &s4 {
                assert!(set.contains(&g.compose(h)));
            }
        }
    }

    #[test]
    fn action_examples() {
        let x: BinaryConfig = "10".parse().unwrap();
        assert_eq!(act(&Permutation::identity(), &x).unwrap(), x);
        assert_eq!(act(&Permutation::swap(1, 2), &x).unwrap().to_string(), "01");
        let long: BinaryConfig = "1011".parse().unwrap();
        assert_eq!(act(&Permutation::swap(1, 2), &long).unwrap().to_string(), "0111");
        assert!(matches!(
            act(&Permutation::swap(1, 5), &long),
            Err(Error::DegreeOverflow { degree: 5, window: 4 })
        ));
    }

    #[test]
    fn action_reads_inverse_images() {
        let g = Permutation::cycle(&[1, 2, 3]).unwrap();
        let x: BinaryConfig = "100".parse().unwrap();
        let y = act(&g, &x).unwrap();
        for i in 1..=3 {
            assert_eq!(y.bit(i), x.bit(g.inverse().apply(i)));
        }
    }

    #[test]
    fn action_is_compatible_with_composition() {
        let mut rng = rng::from_seed(8);
        let level = ChainLevel::new(6).unwrap();
        for _ in 0..1000 {
            let g = haar_sample(level, &mut rng);
            let h = haar_sample(level, &mut rng);
            let x = BinaryConfig::new((0..16).map(|_| rng.random::<bool>()).collect());
            let lhs = act(&compose(&g, &h), &x).unwrap();
            let rhs = act(&g, &act(&h, &x).unwrap()).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn orbit_matches_brute_force_images() {
        let x: BinaryConfig = "1101001".parse().unwrap();
        for n in 1..=5 {
            let level = ChainLevel::new(n).unwrap();
            let orbit = orbit(level, &x).unwrap();
            let brute: std::collections::BTreeSet<_> = enumerate(level)
                .unwrap()
                .iter()
                .map(|k| act(k, &x).unwrap())
                .collect();
            let listed: std::collections::BTreeSet<_> = orbit.iter().map(|(y, _)| y.clone()).collect();
            assert_eq!(listed, brute);
            assert_eq!(listed.len(), orbit.len());
            for (y, k) in &orbit {
                assert!(level.contains(k));
                assert_eq!(&act(k, &x).unwrap(), y);
            }
        }
    }

    #[test]
    fn config_parsing_and_enumeration() {
        assert!("102".parse::<BinaryConfig>().is_err());
        let all: Vec<_> = BinaryConfig::all(2).map(|c| c.to_string()).collect();
        assert_eq!(all, vec!["00", "01", "10", "11"]);
        let x = BinaryConfig::with_ones_at(5, &[2, 5]);
        assert_eq!(x.to_string(), "01001");
        assert_eq!(x.count_ones_prefix(3), 1);
        assert_eq!(x.ones_positions(), vec![2, 5]);
    }
}
