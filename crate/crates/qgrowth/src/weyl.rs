//! Weyl groups of the classical families as (signed) permutations.
//!
//! Family A_n permutes {1..n+1}; s_i is the transposition (i, i+1). Families
//! C_n and D_n act by signed permutations of {1..n}: s_i for i < n is the
//! transposition (i, i+1); in C_n the last generator negates coordinate n; in
//! D_n it maps (x_{n-1}, x_n) to (-x_n, -x_{n-1}), so D_n elements carry an
//! even number of sign flips. Lengths are inversion counts over the positive
//! roots, which makes them convention-free.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Family {
    A,
    C,
    D,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::A => write!(f, "A"),
            Family::C => write!(f, "C"),
            Family::D => write!(f, "D"),
        }
    }
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum WeylError {
    #[error("family {family} requires rank >= {min}, got {rank}")]
    InvalidRank { family: Family, rank: u32, min: u32 },
    #[error("generator index {letter} out of range 1..={rank}")]
    BadLetter { letter: u32, rank: u32 },
    #[error("images {0:?} do not form a valid group element")]
    BadImages(Vec<i32>),
    #[error("group of order {order} exceeds the enumeration cap")]
    EnumerationTooLarge { order: u128 },
    #[error("no parts decomposition matches the family templates")]
    NoDecomposition,
}

/// A classical family together with a validated rank.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct WeylFamily {
    family: Family,
    rank: u32,
}

impl fmt::Display for WeylFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.family, self.rank)
    }
}

/// Positive roots, represented sparsely in the coordinate basis.
#[derive(Clone, Copy, Debug)]
enum Root {
    /// e_i - e_j, i < j.
    Diff(usize, usize),
    /// e_i + e_j, i < j.
    Sum(usize, usize),
    /// 2 e_i.
    Twice(usize),
}

impl WeylFamily {
    pub fn new(family: Family, rank: u32) -> Result<Self, WeylError> {
        let min = match family {
            Family::A => 1,
            Family::C | Family::D => 2,
        };
        if rank < min {
            return Err(WeylError::InvalidRank { family, rank, min });
        }
        Ok(WeylFamily { family, rank })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    /// Number of coordinates the permutation representation acts on.
    pub fn coords(&self) -> usize {
        match self.family {
            Family::A => self.rank as usize + 1,
            Family::C | Family::D => self.rank as usize,
        }
    }

    /// Size of the defining corepresentation matrix.
    pub fn corep_size(&self) -> usize {
        match self.family {
            Family::A => self.rank as usize + 1,
            Family::C | Family::D => 2 * self.rank as usize,
        }
    }

    /// Deformation scale of generator i: all 1 except the last C generator.
    pub fn root_scale(&self, letter: u32) -> u32 {
        match self.family {
            Family::C if letter == self.rank => 2,
            _ => 1,
        }
    }

    /// Admissible corepresentation row window after consuming `i` parts.
    pub fn index_bounds(&self, parts_consumed: u32) -> (i64, i64) {
        let i = parts_consumed as i64;
        let n = self.rank as i64;
        match self.family {
            Family::A => (1, i + 1),
            Family::C | Family::D => (n - i + 1, self.corep_size() as i64 - n + i),
        }
    }

    /// Real dimension of the underlying compact group manifold.
    pub fn manifold_dim(&self) -> u64 {
        let n = self.rank as u64;
        match self.family {
            Family::A => n * n + 2 * n,
            Family::C => 2 * n * n + n,
            Family::D => 2 * n * n - n,
        }
    }

    pub fn group_order(&self) -> u128 {
        let n = self.rank as u128;
        let fact = |m: u128| (1..=m).product::<u128>();
        match self.family {
            Family::A => fact(n + 1),
            Family::C => (1u128 << n) * fact(n),
            Family::D => (1u128 << (n - 1)) * fact(n),
        }
    }

    fn positive_roots(&self) -> Vec<Root> {
        let c = self.coords();
        let mut roots = Vec::new();
        for i in 1..=c {
            for j in (i + 1)..=c {
                roots.push(Root::Diff(i, j));
                if matches!(self.family, Family::C | Family::D) {
                    roots.push(Root::Sum(i, j));
                }
            }
            if self.family == Family::C {
                roots.push(Root::Twice(i));
            }
        }
        roots
    }

    pub fn identity(&self) -> WeylElement {
        WeylElement { fam: *self, images: (1..=self.coords() as i32).collect() }
    }

    pub fn generator(&self, letter: u32) -> Result<WeylElement, WeylError> {
        if letter < 1 || letter > self.rank {
            return Err(WeylError::BadLetter { letter, rank: self.rank });
        }
        let mut w = self.identity();
        let n = self.rank as usize;
        match self.family {
            Family::A => w.images.swap(letter as usize - 1, letter as usize),
            Family::C | Family::D if letter < self.rank => {
                w.images.swap(letter as usize - 1, letter as usize)
            }
            Family::C => w.images[n - 1] = -(n as i32),
            Family::D => {
                w.images[n - 2] = -(n as i32);
                w.images[n - 1] = -(n as i32 - 1);
            }
        }
        Ok(w)
    }

    /// Build the product s_{i1} s_{i2} ... s_{ik} (rightmost applied first).
    pub fn from_word(&self, word: &[u32]) -> Result<WeylElement, WeylError> {
        let mut acc = self.identity();
        for &letter in word {
            acc = acc.compose(&self.generator(letter)?);
        }
        Ok(acc)
    }

    pub fn from_images(&self, images: Vec<i32>) -> Result<WeylElement, WeylError> {
        let c = self.coords();
        let bad = || WeylError::BadImages(images.clone());
        if images.len() != c {
            return Err(bad());
        }
        let mut seen = vec![false; c];
        let mut negatives = 0;
        for &v in &images {
            let a = v.unsigned_abs() as usize;
            if a < 1 || a > c || seen[a - 1] {
                return Err(bad());
            }
            seen[a - 1] = true;
            if v < 0 {
                negatives += 1;
            }
        }
        match self.family {
            Family::A if negatives > 0 => return Err(bad()),
            Family::D if negatives % 2 != 0 => return Err(bad()),
            _ => {}
        }
        Ok(WeylElement { fam: *self, images })
    }
}

/// A Weyl group element as the list of images of 1..coords (signed values).
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct WeylElement {
    fam: WeylFamily,
    images: Vec<i32>,
}

impl WeylElement {
    pub fn family(&self) -> WeylFamily {
        self.fam
    }

    pub fn images(&self) -> &[i32] {
        &self.images
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(k, &v)| v == k as i32 + 1)
    }

    /// Image of a signed coordinate value.
    pub fn apply(&self, v: i32) -> i32 {
        if v > 0 {
            self.images[v as usize - 1]
        } else {
            -self.images[(-v) as usize - 1]
        }
    }

    /// (self . other)(x) = self(other(x)).
    pub fn compose(&self, other: &WeylElement) -> WeylElement {
        assert_eq!(self.fam, other.fam, "elements from different groups");
        WeylElement {
            fam: self.fam,
            images: other.images.iter().map(|&v| self.apply(v)).collect(),
        }
    }

    pub fn inverse(&self) -> WeylElement {
        let mut images = vec![0; self.images.len()];
        for (k, &v) in self.images.iter().enumerate() {
            let a = v.unsigned_abs() as usize;
            images[a - 1] = if v > 0 { k as i32 + 1 } else { -(k as i32 + 1) };
        }
        WeylElement { fam: self.fam, images }
    }

    fn inverts(&self, root: &Root) -> bool {
        // The image of a positive root is negative iff its coefficient at the
        // smallest-index nonzero coordinate is negative.
        match *root {
            Root::Diff(i, j) => {
                let (a, sa) = split(self.images[i - 1]);
                let (b, sb) = split(self.images[j - 1]);
                if a < b {
                    sa < 0
                } else {
                    sb > 0
                }
            }
            Root::Sum(i, j) => {
                let (a, sa) = split(self.images[i - 1]);
                let (b, sb) = split(self.images[j - 1]);
                if a < b {
                    sa < 0
                } else {
                    sb < 0
                }
            }
            Root::Twice(i) => self.images[i - 1] < 0,
        }
    }

    /// Coxeter length as the number of inverted positive roots.
    pub fn length(&self) -> u64 {
        let roots = self.fam.positive_roots();
        roots.iter().filter(|r| self.inverts(r)).count() as u64
    }

    /// Generators i with l(s_i w) < l(w), ascending.
    pub fn left_descents(&self) -> Vec<u32> {
        let len = self.length();
        (1..=self.fam.rank)
            .filter(|&i| {
                let s = self.fam.generator(i).expect("in-range letter");
                s.compose(self).length() < len
            })
            .collect()
    }

    /// Canonical reduced word: repeatedly strip the smallest left descent.
    pub fn canonical_word(&self) -> ReducedWord {
        let mut letters = Vec::with_capacity(self.length() as usize);
        let mut w = self.clone();
        while !w.is_identity() {
            let i = *w
                .left_descents()
                .first()
                .expect("non-identity element has a left descent");
            letters.push(i);
            w = self.fam.generator(i).expect("in-range letter").compose(&w);
        }
        ReducedWord { letters }
    }
}

fn split(v: i32) -> (i32, i32) {
    (v.abs(), v.signum())
}

/// A reduced word in the generators, letters 1-based.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct ReducedWord {
    letters: Vec<u32>,
}

impl ReducedWord {
    pub fn letters(&self) -> &[u32] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }
}

impl fmt::Display for ReducedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "e");
        }
        let parts: Vec<String> = self.letters.iter().map(|i| format!("s{}", i)).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Full enumeration by breadth-first closure under right multiplication.
/// Capped to keep accidental large ranks from exploding.
pub fn weyl_group(fam: WeylFamily) -> Result<Vec<WeylElement>, WeylError> {
    let order = fam.group_order();
    if order > 100_000 {
        return Err(WeylError::EnumerationTooLarge { order });
    }
    let gens: Vec<WeylElement> =
        (1..=fam.rank).map(|i| fam.generator(i).expect("in-range letter")).collect();
    let mut seen = BTreeSet::new();
    let mut frontier = vec![fam.identity()];
    seen.insert(fam.identity().images);
    let mut all = vec![fam.identity()];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for w in &frontier {
            for g in &gens {
                let x = w.compose(g);
                if seen.insert(x.images.clone()) {
                    all.push(x.clone());
                    next.push(x);
                }
            }
        }
        frontier = next;
    }
    debug_assert_eq!(all.len() as u128, order);
    all.sort_by(|a, b| a.images.cmp(&b.images));
    Ok(all)
}

/// Canonical reduced word of the element a word denotes.
pub fn word_normalize(fam: WeylFamily, word: &[u32]) -> Result<ReducedWord, WeylError> {
    Ok(fam.from_word(word)?.canonical_word())
}

/// Longest element by greedy ascent; unique maximum of the weak order.
pub fn longest_element(fam: WeylFamily) -> WeylElement {
    let mut w = fam.identity();
    let mut len = 0;
    loop {
        let mut advanced = false;
        for i in 1..=fam.rank {
            let s = fam.generator(i).expect("in-range letter");
            let next = s.compose(&w);
            let next_len = next.length();
            if next_len > len {
                w = next;
                len = next_len;
                advanced = true;
                break;
            }
        }
        if !advanced {
            return w;
        }
    }
}

/// One part of the staircase decomposition.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Part {
    pub r: u32,
    pub epsilon: u8,
    pub k: u32,
    pub letters: Vec<u32>,
}

/// w = part_1 part_2 ... part_n with every part drawn from the family's
/// template list; concatenating the letters gives a reduced word for w.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PartsDecomposition {
    pub parts: Vec<Part>,
}

impl PartsDecomposition {
    pub fn word(&self) -> Vec<u32> {
        self.parts.iter().flat_map(|p| p.letters.iter().copied()).collect()
    }

    /// Letters of parts r = i+1..n concatenated.
    pub fn suffix_word(&self, consumed: u32) -> Vec<u32> {
        self.parts
            .iter()
            .filter(|p| p.r > consumed)
            .flat_map(|p| p.letters.iter().copied())
            .collect()
    }
}

/// Letters of template psi^(epsilon)_{r,k}; empty for epsilon = 0.
///
/// Each nonempty template is the minimal-length representative of one right
/// coset of <s_{n-r+2}..s_n> inside <s_{n-r+1}..s_n> (types C, D), indexed by
/// the signed coordinate the representative pulls onto position n-r+1. In
/// type D the two fork generators s_{n-1}, s_n play symmetric roles: the
/// ascending epsilon = 1 string with k = n ends ... s_{n-2} s_n (skipping
/// s_{n-1}), and epsilon = 2 with k = n-1 has an empty trailing descent. The
/// epsilon = 2 instance with k = n would repeat an epsilon = 1 string, so it
/// is excluded.
fn template(fam: WeylFamily, r: u32, epsilon: u8, k: u32) -> Option<Vec<u32>> {
    let n = fam.rank;
    debug_assert!((n - r + 1..=n).contains(&k));
    if epsilon == 0 {
        return Some(Vec::new());
    }
    let letters = match (fam.family, epsilon) {
        (Family::A, 1) => (n - k + 1..=r).rev().collect(),
        (Family::C, 1) => (n - r + 1..=k).collect(),
        (Family::D, 1) => {
            if k == n {
                let mut v: Vec<u32> = (n - r + 1..=n.saturating_sub(2)).collect();
                v.push(n);
                v
            } else {
                (n - r + 1..=k).collect()
            }
        }
        (Family::C, 2) => {
            if k > n - 1 {
                return None;
            }
            let mut v: Vec<u32> = (n - r + 1..=n).collect();
            v.extend((k..=n - 1).rev());
            v
        }
        (Family::D, 2) => {
            if k > n - 1 {
                return None;
            }
            let mut v: Vec<u32> = (n - r + 1..=n).collect();
            v.extend((k..=n - 2).rev());
            v
        }
        _ => return None,
    };
    Some(letters)
}

fn epsilon_order(fam: WeylFamily) -> &'static [u8] {
    match fam.family {
        // The A templates for epsilon 1 and 2 are the same string; nonempty
        // A parts are canonically epsilon = 1.
        Family::A => &[1, 0],
        Family::C | Family::D => &[2, 1, 0],
    }
}

/// Greedy staircase decomposition: parts r = 1..n in order, trying epsilon =
/// 2, then 1, then 0 and the largest k first, backtracking on dead ends.
pub fn parts_decompose(fam: WeylFamily, w: &WeylElement) -> Result<PartsDecomposition, WeylError> {
    assert_eq!(w.family(), fam);
    fn go(fam: WeylFamily, r: u32, rem: &WeylElement, acc: &mut Vec<Part>) -> bool {
        let n = fam.rank;
        if r > n {
            return rem.is_identity();
        }
        for &epsilon in epsilon_order(fam) {
            if epsilon == 0 {
                acc.push(Part { r, epsilon, k: n, letters: Vec::new() });
                if go(fam, r + 1, rem, acc) {
                    return true;
                }
                acc.pop();
                continue;
            }
            for k in (n - r + 1..=n).rev() {
                let Some(letters) = template(fam, r, epsilon, k) else { continue };
                let part = fam.from_word(&letters).expect("template letters in range");
                debug_assert_eq!(part.length() as usize, letters.len(), "template not reduced");
                let rem_len = rem.length();
                if (letters.len() as u64) > rem_len {
                    continue;
                }
                let next = part.inverse().compose(rem);
                if next.length() != rem_len - letters.len() as u64 {
                    continue;
                }
                acc.push(Part { r, epsilon, k, letters });
                if go(fam, r + 1, &next, acc) {
                    return true;
                }
                acc.pop();
            }
        }
        false
    }

    let mut acc = Vec::new();
    if go(fam, 1, w, &mut acc) {
        let dec = PartsDecomposition { parts: acc };
        debug_assert_eq!(&fam.from_word(&dec.word()).expect("valid letters"), w);
        Ok(dec)
    } else {
        Err(WeylError::NoDecomposition)
    }
}

fn validate_subset(fam: WeylFamily, subset: &BTreeSet<u32>) -> Result<(), WeylError> {
    for &letter in subset {
        if letter < 1 || letter > fam.rank {
            return Err(WeylError::BadLetter { letter, rank: fam.rank });
        }
    }
    Ok(())
}

/// Longest element of the parabolic subgroup generated by `subset`.
pub fn longest_parabolic(fam: WeylFamily, subset: &BTreeSet<u32>) -> Result<WeylElement, WeylError> {
    validate_subset(fam, subset)?;
    let mut w = fam.identity();
    let mut len = 0;
    loop {
        let mut advanced = false;
        for &i in subset {
            let s = fam.generator(i).expect("validated letter");
            let next = s.compose(&w);
            let next_len = next.length();
            if next_len > len {
                w = next;
                len = next_len;
                advanced = true;
                break;
            }
        }
        if !advanced {
            return Ok(w);
        }
    }
}

/// Longest element among the minimal-length coset representatives
/// {w : l(s w) > l(w) for all s in the subset}: the product w_{0,S} w_0.
pub fn longest_coset_rep(
    fam: WeylFamily,
    subset: &BTreeSet<u32>,
) -> Result<WeylElement, WeylError> {
    let w0s = longest_parabolic(fam, subset)?;
    let w0 = longest_element(fam);
    let rep = w0s.compose(&w0);
    debug_assert!(subset.iter().all(|&i| {
        let s = fam.generator(i).expect("validated letter");
        s.compose(&rep).length() > rep.length()
    }));
    Ok(rep)
}

/// All minimal-length coset representatives, by enumeration.
pub fn coset_min_reps(
    fam: WeylFamily,
    subset: &BTreeSet<u32>,
) -> Result<Vec<WeylElement>, WeylError> {
    validate_subset(fam, subset)?;
    let all = weyl_group(fam)?;
    Ok(all
        .into_iter()
        .filter(|w| {
            let len = w.length();
            subset.iter().all(|&i| {
                let s = fam.generator(i).expect("validated letter");
                s.compose(w).length() > len
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fam(family: Family, rank: u32) -> WeylFamily {
        WeylFamily::new(family, rank).unwrap()
    }

    #[track_caller]
    fn assert_order(family: Family, rank: u32, expect: usize) {
        let g = weyl_group(fam(family, rank)).unwrap();
        assert_eq!(g.len(), expect, "group order for {}{}", family, rank);
    }

    #[test]
    fn group_orders() {
        assert_order(Family::A, 1, 2);
        assert_order(Family::A, 2, 6);
        assert_order(Family::A, 3, 24);
        assert_order(Family::C, 2, 8);
        assert_order(Family::C, 3, 48);
        assert_order(Family::D, 2, 4);
        assert_order(Family::D, 3, 24);
        assert_order(Family::D, 4, 192);
    }

    #[test]
    fn rank_validation() {
        assert!(WeylFamily::new(Family::A, 0).is_err());
        assert!(WeylFamily::new(Family::C, 1).is_err());
        assert!(WeylFamily::new(Family::D, 1).is_err());
        assert!(WeylFamily::new(Family::D, 2).is_ok());
    }

    #[test]
    fn word_normalization_examples() {
        let a2 = fam(Family::A, 2);
        assert!(word_normalize(a2, &[1, 1]).unwrap().is_empty());
        assert_eq!(word_normalize(a2, &[1, 2, 1]).unwrap().len(), 3);
        let c2 = fam(Family::C, 2);
        assert_eq!(word_normalize(c2, &[2, 1, 2, 1]).unwrap().len(), 4);
        assert!(word_normalize(a2, &[3]).is_err());
    }

    #[test]
    fn normalization_is_stable_and_faithful() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for f in [fam(Family::A, 3), fam(Family::C, 3), fam(Family::D, 3)] {
            for _ in 0..200 {
                let word: Vec<u32> =
                    (0..rng.gen_range(0..10)).map(|_| rng.gen_range(1..=f.rank())).collect();
                let w = f.from_word(&word).unwrap();
                let canon = w.canonical_word();
                assert_eq!(canon.len() as u64, w.length());
                assert_eq!(f.from_word(canon.letters()).unwrap(), w);
                let renorm = word_normalize(f, canon.letters()).unwrap();
                assert_eq!(renorm, canon);
            }
        }
    }

    #[test]
    fn composition_is_a_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for f in [fam(Family::A, 3), fam(Family::C, 3), fam(Family::D, 4)] {
            for _ in 0..200 {
                let u: Vec<u32> =
                    (0..rng.gen_range(0..8)).map(|_| rng.gen_range(1..=f.rank())).collect();
                let v: Vec<u32> =
                    (0..rng.gen_range(0..8)).map(|_| rng.gen_range(1..=f.rank())).collect();
                let uv: Vec<u32> = u.iter().chain(v.iter()).copied().collect();
                let lhs = f.from_word(&u).unwrap().compose(&f.from_word(&v).unwrap());
                assert_eq!(lhs, f.from_word(&uv).unwrap());
                assert!(lhs.length() <= f.from_word(&u).unwrap().length() + f.from_word(&v).unwrap().length());
            }
        }
    }

    #[test]
    fn longest_element_lengths() {
        // l(w0): A_n n(n+1)/2, C_n n^2, D_n n^2 - n.
        for n in 1..=4u64 {
            let w0 = longest_element(fam(Family::A, n as u32));
            assert_eq!(w0.length(), n * (n + 1) / 2);
        }
        for n in 2..=4u64 {
            assert_eq!(longest_element(fam(Family::C, n as u32)).length(), n * n);
            assert_eq!(longest_element(fam(Family::D, n as u32)).length(), n * n - n);
        }
    }

    #[test]
    fn longest_element_is_involution_and_maximal() {
        for f in [fam(Family::A, 2), fam(Family::A, 3), fam(Family::C, 2), fam(Family::D, 3)] {
            let w0 = longest_element(f);
            assert!(w0.compose(&w0).is_identity());
            let max = weyl_group(f).unwrap().iter().map(|w| w.length()).max().unwrap();
            assert_eq!(w0.length(), max);
        }
    }

    #[test]
    fn index_bounds_windows() {
        let a3 = fam(Family::A, 3);
        assert_eq!(a3.index_bounds(0), (1, 1));
        assert_eq!(a3.index_bounds(2), (1, 3));
        let c2 = fam(Family::C, 2);
        assert_eq!(c2.index_bounds(0), (3, 2)); // empty window at depth 0
        assert_eq!(c2.index_bounds(1), (2, 3));
        assert_eq!(c2.index_bounds(2), (1, 4));
        let d3 = fam(Family::D, 3);
        assert_eq!(d3.index_bounds(1), (3, 4));
        assert_eq!(d3.index_bounds(3), (1, 6));
    }

    #[test]
    fn parts_of_a2_longest() {
        let f = fam(Family::A, 2);
        let dec = parts_decompose(f, &longest_element(f)).unwrap();
        let words: Vec<Vec<u32>> = dec.parts.iter().map(|p| p.letters.clone()).collect();
        assert_eq!(words, vec![vec![1], vec![2, 1]]);
    }

    #[test]
    fn parts_of_longest_are_reduced_and_multiply_back() {
        for f in [
            fam(Family::A, 2),
            fam(Family::A, 3),
            fam(Family::A, 4),
            fam(Family::C, 2),
            fam(Family::C, 3),
            fam(Family::C, 4),
            fam(Family::D, 2),
            fam(Family::D, 3),
            fam(Family::D, 4),
        ] {
            let w0 = longest_element(f);
            let dec = parts_decompose(f, &w0).unwrap();
            assert_eq!(dec.parts.len(), f.rank() as usize);
            let word = dec.word();
            assert_eq!(word.len() as u64, w0.length(), "reduced factorization for {}", f);
            assert_eq!(f.from_word(&word).unwrap(), w0);
        }
    }

    #[test]
    fn parts_round_trip_on_full_groups() {
        for f in [fam(Family::A, 3), fam(Family::C, 3), fam(Family::D, 3)] {
            for w in weyl_group(f).unwrap() {
                let dec = parts_decompose(f, &w).unwrap();
                assert_eq!(f.from_word(&dec.word()).unwrap(), w);
                assert_eq!(dec.word().len() as u64, w.length());
                for p in &dec.parts {
                    assert!((f.rank() - p.r + 1..=f.rank()).contains(&p.k));
                }
            }
        }
    }

    #[test]
    fn coset_reps_examples() {
        let a2 = fam(Family::A, 2);
        assert_eq!(longest_coset_rep(a2, &BTreeSet::new()).unwrap().length(), 3);
        assert_eq!(longest_coset_rep(a2, &BTreeSet::from([1])).unwrap().length(), 2);
        let c2 = fam(Family::C, 2);
        assert_eq!(longest_coset_rep(c2, &BTreeSet::from([2])).unwrap().length(), 3);
    }

    #[test]
    fn coset_counts_and_lengths() {
        // |W^S| * |W_S| = |W| and l(longest rep) = l(w0) - l(w0_S).
        for f in [fam(Family::A, 3), fam(Family::C, 3), fam(Family::D, 3)] {
            let full = weyl_group(f).unwrap().len();
            let subsets: Vec<BTreeSet<u32>> = {
                let mut out = Vec::new();
                let n = f.rank();
                for mask in 0u32..(1 << n) {
                    out.push((1..=n).filter(|i| mask & (1 << (i - 1)) != 0).collect());
                }
                out
            };
            for s in subsets {
                let reps = coset_min_reps(f, &s).unwrap();
                let parabolic_order = {
                    // enumerate the parabolic by closure under its generators
                    let mut seen = BTreeSet::new();
                    let mut frontier = vec![f.identity()];
                    seen.insert(f.identity().images);
                    while let Some(w) = frontier.pop() {
                        for &i in &s {
                            let x = w.compose(&f.generator(i).unwrap());
                            if seen.insert(x.images.clone()) {
                                frontier.push(x);
                            }
                        }
                    }
                    seen.len()
                };
                assert_eq!(reps.len() * parabolic_order, full, "subset {:?} of {}", s, f);
                let max_rep = reps.iter().map(|w| w.length()).max().unwrap();
                let rep = longest_coset_rep(f, &s).unwrap();
                assert_eq!(rep.length(), max_rep);
                let w0s = longest_parabolic(f, &s).unwrap();
                assert_eq!(rep.length(), longest_element(f).length() - w0s.length());
            }
        }
    }

    #[test]
    fn enumeration_cap() {
        let big = fam(Family::C, 10);
        assert!(matches!(weyl_group(big), Err(WeylError::EnumerationTooLarge { .. })));
    }
}
