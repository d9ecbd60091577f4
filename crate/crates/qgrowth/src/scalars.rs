//! Exact scalar arithmetic over the ring generated by rationals, q^{±1} and
//! the radicals r_k = sqrt(1 - q^{2k}) for positive integers k.
//!
//! Normal form: a sorted sum of terms `coeff * q^a * prod_{k in K} r_k` with
//! K a square-free atom set; a repeated atom rewrites through
//! r_k^2 = 1 - q^{2k}. Distinct square-free radical products are linearly
//! independent over the Laurent polynomials in q, so the empty sum is the
//! only normal form of zero and syntactic zero tests are exact.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::numeric::Fixed;

#[derive(Clone, PartialEq, Eq, Debug)]
struct ScalarTerm {
    coeff: BigRational,
    qexp: i64,
    atoms: BTreeSet<u32>,
}

impl ScalarTerm {
    fn key(&self) -> (Vec<u32>, i64) {
        (self.atoms.iter().copied().collect(), self.qexp)
    }
}

/// An exact scalar in normal form. Empty term list means zero.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct ScalarExpr {
    terms: Vec<ScalarTerm>,
}

impl ScalarExpr {
    pub fn zero() -> Self {
        ScalarExpr { terms: Vec::new() }
    }

    pub fn one() -> Self {
        ScalarExpr::from_rational(BigRational::one())
    }

    pub fn from_rational(r: BigRational) -> Self {
        ScalarExpr::monomial(r, 0, BTreeSet::new())
    }

    pub fn from_int(v: i64) -> Self {
        ScalarExpr::from_rational(BigRational::from_integer(BigInt::from(v)))
    }

    /// `q^e`.
    pub fn q_pow(e: i64) -> Self {
        ScalarExpr::monomial(BigRational::one(), e, BTreeSet::new())
    }

    /// The radical r_k = sqrt(1 - q^{2k}); `k` must be positive.
    pub fn atom(k: u32) -> Self {
        assert!(k > 0, "radical index must be positive");
        ScalarExpr::monomial(BigRational::one(), 0, BTreeSet::from([k]))
    }

    pub fn monomial(coeff: BigRational, qexp: i64, atoms: BTreeSet<u32>) -> Self {
        assert!(atoms.iter().all(|&k| k > 0), "radical index must be positive");
        let mut s = ScalarExpr { terms: vec![ScalarTerm { coeff, qexp, atoms }] };
        s.normalize();
        s
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Some(coeff, qexp, atoms) when the normal form is a single term.
    pub fn as_monomial(&self) -> Option<(&BigRational, i64, &BTreeSet<u32>)> {
        match self.terms.as_slice() {
            [t] => Some((&t.coeff, t.qexp, &t.atoms)),
            _ => None,
        }
    }

    /// Normal-form terms as (coefficient, q-exponent, radical indices).
    pub(crate) fn terms_raw(&self) -> impl Iterator<Item = (&BigRational, i64, &BTreeSet<u32>)> {
        self.terms.iter().map(|t| (&t.coeff, t.qexp, &t.atoms))
    }

    fn normalize(&mut self) {
        self.terms.sort_by(|a, b| a.key().cmp(&b.key()));
        let mut merged: Vec<ScalarTerm> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match merged.last_mut() {
                Some(last) if last.key() == t.key() => last.coeff += t.coeff,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| !t.coeff.is_zero());
        self.terms = merged;
    }

    pub fn add(&self, other: &ScalarExpr) -> ScalarExpr {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        let mut s = ScalarExpr { terms };
        s.normalize();
        s
    }

    pub fn neg(&self) -> ScalarExpr {
        ScalarExpr {
            terms: self
                .terms
                .iter()
                .map(|t| ScalarTerm { coeff: -&t.coeff, qexp: t.qexp, atoms: t.atoms.clone() })
                .collect(),
        }
    }

    pub fn sub(&self, other: &ScalarExpr) -> ScalarExpr {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &ScalarExpr) -> ScalarExpr {
        let mut terms = Vec::new();
        for a in &self.terms {
            for b in &other.terms {
                mul_terms_into(a, b, &mut terms);
            }
        }
        let mut s = ScalarExpr { terms };
        s.normalize();
        s
    }

    pub fn scale(&self, r: &BigRational) -> ScalarExpr {
        let mut s = ScalarExpr {
            terms: self
                .terms
                .iter()
                .map(|t| ScalarTerm { coeff: &t.coeff * r, qexp: t.qexp, atoms: t.atoms.clone() })
                .collect(),
        };
        s.normalize();
        s
    }

    /// Multiply by `q^e`.
    pub fn shift_q(&self, e: i64) -> ScalarExpr {
        ScalarExpr {
            terms: self
                .terms
                .iter()
                .map(|t| ScalarTerm { coeff: t.coeff.clone(), qexp: t.qexp + e, atoms: t.atoms.clone() })
                .collect(),
        }
    }

    /// Exact division when `den` is a single term whose atoms all occur in
    /// every term of `self`. Covers the quotients the witness layer takes.
    pub fn try_div(&self, den: &ScalarExpr) -> Option<ScalarExpr> {
        let (dc, de, datoms) = den.as_monomial()?;
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            if !datoms.is_subset(&t.atoms) {
                return None;
            }
            terms.push(ScalarTerm {
                coeff: &t.coeff / dc,
                qexp: t.qexp - de,
                atoms: t.atoms.difference(datoms).copied().collect(),
            });
        }
        let mut s = ScalarExpr { terms };
        s.normalize();
        Some(s)
    }

    /// Numeric value at the context's base point.
    pub fn eval(&self, ctx: &mut EvalCtx) -> Fixed {
        let mut acc = Fixed::zero();
        for t in &self.terms {
            let mut v = Fixed::from_rational(&t.coeff);
            v = &v * &ctx.q_pow(t.qexp);
            for &k in &t.atoms {
                v = &v * &ctx.atom(k);
            }
            acc = &acc + &v;
        }
        acc
    }
}

/// Term product; a shared atom k rewrites through r_k^2 = 1 - q^{2k}, which
/// splits the product into two terms per collision.
fn mul_terms_into(a: &ScalarTerm, b: &ScalarTerm, out: &mut Vec<ScalarTerm>) {
    let shared: Vec<u32> = a.atoms.intersection(&b.atoms).copied().collect();
    let base = ScalarTerm {
        coeff: &a.coeff * &b.coeff,
        qexp: a.qexp + b.qexp,
        atoms: a.atoms.symmetric_difference(&b.atoms).copied().collect(),
    };
    let mut pending = vec![base];
    for k in shared {
        let mut next = Vec::with_capacity(pending.len() * 2);
        for t in pending {
            let mut flipped = t.clone();
            flipped.coeff = -flipped.coeff;
            flipped.qexp += 2 * k as i64;
            next.push(t);
            next.push(flipped);
        }
        pending = next;
    }
    out.extend(pending);
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            let neg = t.coeff.is_negative();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mag = t.coeff.abs();
            let mut factors: Vec<String> = Vec::new();
            if !mag.is_one() || (t.qexp == 0 && t.atoms.is_empty()) {
                factors.push(mag.to_string());
            }
            match t.qexp {
                0 => {}
                1 => factors.push("q".to_string()),
                e => factors.push(format!("q^{}", e)),
            }
            for &k in &t.atoms {
                factors.push(format!("r{}", k));
            }
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

/// Evaluation context: a base point q0 in (0,1) with memoized powers and
/// radical values.
pub struct EvalCtx {
    q: Fixed,
    q_inv: Fixed,
    pows: HashMap<i64, Fixed>,
    atoms: HashMap<u32, Fixed>,
}

impl EvalCtx {
    pub fn new(q0: &BigRational) -> Self {
        assert!(
            q0 > &BigRational::zero() && q0 < &BigRational::one(),
            "base point must lie strictly between 0 and 1"
        );
        let q = Fixed::from_rational(q0);
        let q_inv = Fixed::one().div(&q);
        EvalCtx { q, q_inv, pows: HashMap::new(), atoms: HashMap::new() }
    }

    pub fn q_pow(&mut self, e: i64) -> Fixed {
        if e == 0 {
            return Fixed::one();
        }
        if let Some(v) = self.pows.get(&e) {
            return v.clone();
        }
        let base = if e > 0 { self.q.clone() } else { self.q_inv.clone() };
        let mut acc = Fixed::one();
        for _ in 0..e.unsigned_abs() {
            acc = &acc * &base;
        }
        self.pows.insert(e, acc.clone());
        acc
    }

    /// r_k = sqrt(1 - q^{2k}).
    pub fn atom(&mut self, k: u32) -> Fixed {
        if let Some(v) = self.atoms.get(&k) {
            return v.clone();
        }
        let inner = &Fixed::one() - &self.q_pow(2 * k as i64);
        let v = inner.sqrt();
        self.atoms.insert(k, v.clone());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn assert_rel_close(a: &Fixed, b: &Fixed, tol_exp: i32) {
        let diff = (a - b).abs();
        let mut scale = Fixed::one();
        if a.abs() > scale {
            scale = a.abs();
        }
        if b.abs() > scale {
            scale = b.abs();
        }
        let bound = &Fixed::pow10(tol_exp) * &scale;
        assert!(diff <= bound, "rel error too big: {} vs {}", a.to_f64(), b.to_f64());
    }

    #[test]
    fn radical_square_expands() {
        let r1 = ScalarExpr::atom(1);
        let expect = ScalarExpr::one().sub(&ScalarExpr::q_pow(2));
        assert_eq!(r1.mul(&r1), expect);
    }

    #[test]
    fn monomial_product() {
        // (q * r2) * q^2 = q^3 * r2
        let a = ScalarExpr::q_pow(1).mul(&ScalarExpr::atom(2));
        let b = ScalarExpr::q_pow(2);
        let expect = ScalarExpr::monomial(BigRational::one(), 3, BTreeSet::from([2]));
        assert_eq!(a.mul(&b), expect);
    }

    #[test]
    fn difference_of_squares() {
        // (r1 + q)(r1 - q) = 1 - 2q^2
        let r1 = ScalarExpr::atom(1);
        let qq = ScalarExpr::q_pow(1);
        let prod = r1.add(&qq).mul(&r1.sub(&qq));
        let expect = ScalarExpr::one().sub(&ScalarExpr::q_pow(2).scale(&q(2, 1)));
        assert_eq!(prod, expect);
    }

    #[test]
    fn eval_radical_at_half() {
        let mut ctx = EvalCtx::new(&q(1, 2));
        let v = ScalarExpr::atom(1).eval(&mut ctx);
        // sqrt(1 - 1/4) = 0.86602540378...
        let expect = Fixed::from_ratio(&BigInt::from(86602540378i64), &BigInt::from(100000000000i64));
        assert_rel_close(&v, &expect, -10);
    }

    fn random_expr(rng: &mut ChaCha8Rng) -> ScalarExpr {
        let mut acc = ScalarExpr::zero();
        for _ in 0..rng.gen_range(1..=4) {
            let coeff = q(rng.gen_range(-9..=9), rng.gen_range(1..=9));
            let qexp = rng.gen_range(-6..=6);
            let mut atoms = BTreeSet::new();
            for _ in 0..rng.gen_range(0..=3) {
                atoms.insert(rng.gen_range(1..=6u32));
            }
            acc = acc.add(&ScalarExpr::monomial(coeff, qexp, atoms));
        }
        acc
    }

    #[test]
    fn self_difference_is_syntactic_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let x = random_expr(&mut rng);
            assert!(x.sub(&x).is_zero());
        }
    }

    #[test]
    fn eval_is_ring_homomorphism() {
        let points = [q(1, 2), q(1, 3), q(9, 10)];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for q0 in &points {
            let mut ctx = EvalCtx::new(q0);
            for _ in 0..60 {
                let a = random_expr(&mut rng);
                let b = random_expr(&mut rng);
                let sum = a.add(&b).eval(&mut ctx);
                let prod = a.mul(&b).eval(&mut ctx);
                let ea = a.eval(&mut ctx);
                let eb = b.eval(&mut ctx);
                assert_rel_close(&sum, &(&ea + &eb), -12);
                assert_rel_close(&prod, &(&ea * &eb), -12);
            }
        }
    }

    #[test]
    fn nonzero_normal_form_nonzero_at_some_probe() {
        let probes = [q(1, 2), q(1, 3), q(2, 5)];
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..300 {
            let x = random_expr(&mut rng);
            if x.is_zero() {
                continue;
            }
            let nonzero_somewhere = probes.iter().any(|q0| {
                let mut ctx = EvalCtx::new(q0);
                x.eval(&mut ctx).abs() > Fixed::pow10(-25)
            });
            assert!(nonzero_somewhere, "nonzero normal form vanished at all probes: {}", x);
        }
    }

    #[test]
    fn try_div_monomials() {
        let num = ScalarExpr::monomial(q(3, 2), 5, BTreeSet::from([1, 3]));
        let den = ScalarExpr::monomial(q(1, 2), 2, BTreeSet::from([3]));
        let quot = num.try_div(&den).unwrap();
        assert_eq!(quot, ScalarExpr::monomial(q(3, 1), 3, BTreeSet::from([1])));
        let bad_den = ScalarExpr::atom(5);
        assert!(num.try_div(&bad_den).is_none());
    }

    #[test]
    fn display_normal_form() {
        let x = ScalarExpr::q_pow(3)
            .scale(&q(-1, 2))
            .add(&ScalarExpr::atom(2))
            .add(&ScalarExpr::one());
        assert_eq!(x.to_string(), "1 - 1/2*q^3 + r2");
        assert_eq!(ScalarExpr::zero().to_string(), "0");
    }
}
