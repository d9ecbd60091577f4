//! Normal-form q-shift operators on c00(Z)^(x)n (x) c00(N)^(x)l and the
//! corepresentation matrices built from them.
//!
//! Every operator is a finite sum of tensor terms. A Laurent factor is a pure
//! shift e_m -> e_{m+z}. A Fock factor is kept in the normal form
//! (S*)^a g(N) S^c, which sends e_p to g(p-c) e_{p-c+a} when p >= c and to 0
//! otherwise; g is drawn from the ring generated by q^{N}, q, and the root
//! functions sqrt(1 - q^{2dN+2c}). Terms with equal shift data are merged by
//! adding their coefficient functions, coefficients are kept square-free in
//! the root functions, and matched projections are stripped whenever the
//! coefficient vanishes at N = -1, so semantically equal sums of terms reach
//! the same normal form and zero tests are syntactic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::numeric::Fixed;
use crate::scalars::{EvalCtx, ScalarExpr};
use crate::weyl::{Family, WeylFamily};

#[derive(Error, Debug, PartialEq, Eq)]
pub enum OperError {
    #[error("signature mismatch: {0} vs {1}")]
    SignatureMismatch(Signature, Signature),
    #[error("matrix size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("basis index does not fit the signature")]
    BadIndex,
    #[error("deformation exponent must be at least 1")]
    BadDeformation,
    #[error("generator index {letter} out of range 1..={rank}")]
    BadLetter { letter: u32, rank: u32 },
    #[error("factor list must put all Laurent factors before Fock factors")]
    BadFactorOrder,
    #[error("entry list has wrong length for the matrix size")]
    BadEntryCount,
}

/// Tensor shape: `laurent` copies of c00(Z) followed by `fock` copies of c00(N).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Signature {
    pub laurent: usize,
    pub fock: usize,
}

impl Signature {
    pub fn new(laurent: usize, fock: usize) -> Self {
        Signature { laurent, fock }
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.laurent, self.fock)
    }
}

/// A standard basis vector: integer Laurent indices, nonnegative Fock indices.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct BasisIndex {
    pub laurent: Vec<i64>,
    pub fock: Vec<u32>,
}

impl BasisIndex {
    pub fn new(laurent: Vec<i64>, fock: Vec<u32>) -> Self {
        BasisIndex { laurent, fock }
    }

    fn fits(&self, sig: Signature) -> bool {
        self.laurent.len() == sig.laurent && self.fock.len() == sig.fock
    }
}

/// Finite evaluation box: Laurent indices in [-R_z, R_z], Fock indices in
/// [0, R_f]; indices at distance >= margin from the truncation boundary are
/// interior. Fock index 0 is a genuine boundary of the space, not an artifact
/// of truncation, so interiority constrains only the upper end.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Window {
    laurent_radius: u32,
    fock_cap: u32,
    margin: u32,
}

impl Window {
    pub fn new(laurent_radius: u32, fock_cap: u32, margin: u32) -> Self {
        assert!(
            laurent_radius >= margin && fock_cap >= margin,
            "window radii must be at least the margin"
        );
        Window { laurent_radius, fock_cap, margin }
    }

    pub fn laurent_radius(&self) -> u32 {
        self.laurent_radius
    }

    pub fn fock_cap(&self) -> u32 {
        self.fock_cap
    }

    pub fn margin(&self) -> u32 {
        self.margin
    }

    pub fn fock_interior_cap(&self) -> u32 {
        self.fock_cap - self.margin
    }
}

/// Odometer over [0, cap]^len in lexicographic order.
pub(crate) fn fock_grid(len: usize, cap: u32) -> impl Iterator<Item = Vec<u32>> {
    let mut cur = vec![0u32; len];
    let mut done = false;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let out = cur.clone();
        done = true;
        for slot in cur.iter_mut().rev() {
            if *slot < cap {
                *slot += 1;
                done = false;
                break;
            }
            *slot = 0;
        }
        if len == 0 {
            done = true;
        }
        Some(out)
    })
}

// ---------------------------------------------------------------------------
// Coefficient functions
// ---------------------------------------------------------------------------

/// Per-factor content of one coefficient term: q^{u N} times a square-free
/// set of root functions sqrt(1 - q^{2dN+2c}) with d >= 1.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub(crate) struct FactorCoeff {
    pub(crate) u: i64,
    pub(crate) atoms: BTreeSet<(u32, i64)>,
}

/// One term of a joint coefficient: rational * q^v * scalar radicals * one
/// FactorCoeff per Fock position.
#[derive(Clone, PartialEq, Eq, Debug)]
pub(crate) struct TcTerm {
    pub(crate) r: BigRational,
    pub(crate) v: i64,
    pub(crate) consts: BTreeSet<u32>,
    pub(crate) factors: Vec<FactorCoeff>,
}

impl TcTerm {
    fn one(fock: usize) -> Self {
        TcTerm {
            r: BigRational::one(),
            v: 0,
            consts: BTreeSet::new(),
            factors: vec![FactorCoeff::default(); fock],
        }
    }

    fn key(&self) -> (&Vec<FactorCoeff>, &BTreeSet<u32>, i64) {
        (&self.factors, &self.consts, self.v)
    }

    /// Substitute N_i -> N_i + t.
    fn shift_factor(&mut self, i: usize, t: i64) {
        let f = &mut self.factors[i];
        self.v += f.u * t;
        f.atoms = f.atoms.iter().map(|&(d, c)| (d, c + d as i64 * t)).collect();
    }
}

/// A coefficient function of the Fock number operators N_1..N_l: a finite
/// sum of TcTerms, kept sorted, merged, and square-free.
#[derive(Clone, PartialEq, Eq, Debug)]
pub(crate) struct TensorCoeff {
    fock: usize,
    terms: Vec<TcTerm>,
}

impl TensorCoeff {
    fn zero(fock: usize) -> Self {
        TensorCoeff { fock, terms: Vec::new() }
    }

    fn one(fock: usize) -> Self {
        TensorCoeff { fock, terms: vec![TcTerm::one(fock)] }
    }

    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub(crate) fn terms(&self) -> &[TcTerm] {
        &self.terms
    }

    fn from_scalar(expr: &ScalarExpr, fock: usize) -> Self {
        let terms = expr
            .terms_raw()
            .map(|(r, qexp, atoms)| TcTerm {
                r: r.clone(),
                v: qexp,
                consts: atoms.clone(),
                factors: vec![FactorCoeff::default(); fock],
            })
            .collect();
        let mut out = TensorCoeff { fock, terms };
        out.normalize();
        out
    }

    fn normalize(&mut self) {
        self.terms.sort_by(|a, b| a.key().cmp(&b.key()));
        let mut merged: Vec<TcTerm> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match merged.last_mut() {
                Some(last) if last.key() == t.key() => last.r += t.r,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| !t.r.is_zero());
        self.terms = merged;
    }

    fn add(&self, other: &TensorCoeff) -> TensorCoeff {
        assert_eq!(self.fock, other.fock);
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        let mut out = TensorCoeff { fock: self.fock, terms };
        out.normalize();
        out
    }

    fn neg(&self) -> TensorCoeff {
        let terms = self
            .terms
            .iter()
            .map(|t| TcTerm { r: -t.r.clone(), ..t.clone() })
            .collect();
        TensorCoeff { fock: self.fock, terms }
    }

    fn sub(&self, other: &TensorCoeff) -> TensorCoeff {
        self.add(&other.neg())
    }

    /// Partition into the part whose factor-i radicals all allow the shift
    /// N_i -> N_i - 1 (every atom has c >= d) and the rest.
    fn split_shiftable(&self, i: usize) -> (TensorCoeff, TensorCoeff) {
        let (s, ns): (Vec<TcTerm>, Vec<TcTerm>) = self
            .terms
            .iter()
            .cloned()
            .partition(|t| t.factors[i].atoms.iter().all(|&(d, c)| c >= d as i64));
        (
            TensorCoeff { fock: self.fock, terms: s },
            TensorCoeff { fock: self.fock, terms: ns },
        )
    }

    /// Expand the square of each radical in `collisions` as 1 - q^{2dN+2c}
    /// (factor index None marks a scalar radical 1 - q^{2k}).
    fn expand_collisions(base: TcTerm, collisions: &[(Option<usize>, u32, i64)]) -> Vec<TcTerm> {
        let mut pending = vec![base];
        for &(slot, d, c) in collisions {
            let mut next = Vec::with_capacity(pending.len() * 2);
            for t in pending {
                let mut flipped = t.clone();
                flipped.r = -flipped.r;
                flipped.v += 2 * c;
                match slot {
                    Some(i) => flipped.factors[i].u += 2 * d as i64,
                    None => {}
                }
                next.push(t);
                next.push(flipped);
            }
            pending = next;
        }
        pending
    }

    fn mul_terms(a: &TcTerm, b: &TcTerm, out: &mut Vec<TcTerm>) {
        let mut collisions: Vec<(Option<usize>, u32, i64)> = a
            .consts
            .intersection(&b.consts)
            .map(|&k| (None, 0, k as i64))
            .collect();
        let consts: BTreeSet<u32> =
            a.consts.symmetric_difference(&b.consts).copied().collect();
        let mut factors = Vec::with_capacity(a.factors.len());
        for (i, (fa, fb)) in a.factors.iter().zip(&b.factors).enumerate() {
            collisions.extend(
                fa.atoms.intersection(&fb.atoms).map(|&(d, c)| (Some(i), d, c)),
            );
            factors.push(FactorCoeff {
                u: fa.u + fb.u,
                atoms: fa.atoms.symmetric_difference(&fb.atoms).copied().collect(),
            });
        }
        let base = TcTerm {
            r: &a.r * &b.r,
            v: a.v + b.v,
            consts,
            factors,
        };
        out.extend(Self::expand_collisions(base, &collisions));
    }

    fn mul(&self, other: &TensorCoeff) -> TensorCoeff {
        assert_eq!(self.fock, other.fock);
        let mut terms = Vec::new();
        for a in &self.terms {
            for b in &other.terms {
                Self::mul_terms(a, b, &mut terms);
            }
        }
        let mut out = TensorCoeff { fock: self.fock, terms };
        out.normalize();
        out
    }

    fn tensor(&self, other: &TensorCoeff) -> TensorCoeff {
        let fock = self.fock + other.fock;
        let mut terms = Vec::new();
        for a in &self.terms {
            for b in &other.terms {
                let collisions: Vec<(Option<usize>, u32, i64)> = a
                    .consts
                    .intersection(&b.consts)
                    .map(|&k| (None, 0, k as i64))
                    .collect();
                let mut factors = a.factors.clone();
                factors.extend(b.factors.iter().cloned());
                let base = TcTerm {
                    r: &a.r * &b.r,
                    v: a.v + b.v,
                    consts: a.consts.symmetric_difference(&b.consts).copied().collect(),
                    factors,
                };
                terms.extend(Self::expand_collisions(base, &collisions));
            }
        }
        let mut out = TensorCoeff { fock, terms };
        out.normalize();
        out
    }

    /// Substitute N_i -> N_i + t for every factor with t_i != 0.
    fn shifted(&self, shifts: &[i64]) -> TensorCoeff {
        assert_eq!(shifts.len(), self.fock);
        let mut out = self.clone();
        for t in &mut out.terms {
            for (i, &s) in shifts.iter().enumerate() {
                if s != 0 {
                    t.shift_factor(i, s);
                }
            }
        }
        out.normalize();
        out
    }

    /// The normal form of the function obtained by fixing N_i = -1, or None
    /// when a root function would need a negative radicand exponent.
    fn at_minus_one(&self, i: usize) -> Option<TensorCoeff> {
        let mut terms = Vec::new();
        'term: for t in &self.terms {
            let mut nt = t.clone();
            nt.v -= nt.factors[i].u;
            nt.factors[i].u = 0;
            let atoms = std::mem::take(&mut nt.factors[i].atoms);
            let mut collisions = Vec::new();
            for (d, c) in atoms {
                let k = c - d as i64;
                if k == 0 {
                    continue 'term;
                }
                if k < 0 {
                    return None;
                }
                let k = k as u32;
                if nt.consts.contains(&k) {
                    nt.consts.remove(&k);
                    collisions.push((None, 0u32, k as i64));
                } else {
                    nt.consts.insert(k);
                }
            }
            terms.extend(Self::expand_collisions(nt, &collisions));
        }
        let mut out = TensorCoeff { fock: self.fock, terms };
        out.normalize();
        Some(out)
    }

    /// Exact value at N_i = m_i >= 0. Root functions with d m + c = 0 make
    /// the term vanish; a negative radicand exponent cannot arise on valid
    /// constructions and panics.
    fn eval(&self, m: &[u32]) -> ScalarExpr {
        assert_eq!(m.len(), self.fock);
        let mut total = ScalarExpr::zero();
        'term: for t in &self.terms {
            let mut qexp = t.v;
            let mut expr = ScalarExpr::one();
            for &k in &t.consts {
                expr = expr.mul(&ScalarExpr::atom(k));
            }
            for (i, f) in t.factors.iter().enumerate() {
                qexp += f.u * m[i] as i64;
                for &(d, c) in &f.atoms {
                    let k = d as i64 * m[i] as i64 + c;
                    assert!(k >= 0, "negative radicand exponent at evaluation");
                    if k == 0 {
                        continue 'term;
                    }
                    expr = expr.mul(&ScalarExpr::atom(k as u32));
                }
            }
            total = total.add(&expr.mul(&ScalarExpr::monomial(
                t.r.clone(),
                qexp,
                BTreeSet::new(),
            )));
        }
        total
    }
}

impl fmt::Display for TensorCoeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, t) in self.terms.iter().enumerate() {
            let mut pieces: Vec<String> = Vec::new();
            let mag = t.r.abs();
            if !mag.is_one() {
                pieces.push(mag.to_string());
            }
            if t.v != 0 {
                pieces.push(if t.v == 1 { "q".into() } else { format!("q^{}", t.v) });
            }
            for &k in &t.consts {
                pieces.push(format!("r{}", k));
            }
            for (i, fac) in t.factors.iter().enumerate() {
                let pos = i + 1;
                if fac.u != 0 {
                    pieces.push(if fac.u == 1 {
                        format!("qN{}", pos)
                    } else {
                        format!("qN{}^{}", pos, fac.u)
                    });
                }
                for &(d, c) in &fac.atoms {
                    pieces.push(format!("w{}({},{})", pos, d, c));
                }
            }
            if pieces.is_empty() {
                pieces.push("1".into());
            }
            if idx == 0 {
                if t.r.is_negative() {
                    write!(f, "-")?;
                }
            } else if t.r.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            write!(f, "{}", pieces.join("*"))?;
        }
        Ok(())
    }
}

/// Coefficient function of a single Fock factor; wraps a one-factor
/// TensorCoeff so all algebra is shared.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FockCoeff(TensorCoeff);

impl FockCoeff {
    pub fn zero() -> Self {
        FockCoeff(TensorCoeff::zero(1))
    }

    pub fn one() -> Self {
        FockCoeff(TensorCoeff::one(1))
    }

    /// rational * q^{u N + v}.
    pub fn monomial(r: BigRational, u: i64, v: i64) -> Self {
        let mut term = TcTerm::one(1);
        term.r = r;
        term.v = v;
        term.factors[0].u = u;
        let mut tc = TensorCoeff { fock: 1, terms: vec![term] };
        tc.normalize();
        FockCoeff(tc)
    }

    /// q^{u N + v}.
    pub fn q_pow(u: i64, v: i64) -> Self {
        Self::monomial(BigRational::one(), u, v)
    }

    /// sqrt(1 - q^{2dN + 2c}); requires d >= 1 and c >= 0.
    pub fn root(d: u32, c: i64) -> Self {
        assert!(d >= 1, "root function needs d >= 1");
        assert!(c >= 0, "root function needs c >= 0");
        let mut term = TcTerm::one(1);
        term.factors[0].atoms.insert((d, c));
        FockCoeff(TensorCoeff { fock: 1, terms: vec![term] })
    }

    pub fn add(&self, other: &FockCoeff) -> FockCoeff {
        FockCoeff(self.0.add(&other.0))
    }

    pub fn mul(&self, other: &FockCoeff) -> FockCoeff {
        FockCoeff(self.0.mul(&other.0))
    }

    pub fn neg(&self) -> FockCoeff {
        FockCoeff(self.0.neg())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Exact value at N = p.
    pub fn eval_at(&self, p: u32) -> ScalarExpr {
        self.0.eval(&[p])
    }
}

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

/// One tensor position of an operator term.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum FactorOp {
    /// e_m -> e_{m+shift} on c00(Z).
    Laurent { shift: i64 },
    /// (S*)^raise g(N) S^lower on c00(N).
    Fock { raise: u32, coeff: FockCoeff, lower: u32 },
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub(crate) struct OpTerm {
    pub(crate) z: Vec<i64>,
    pub(crate) a: Vec<u32>,
    pub(crate) c: Vec<u32>,
    pub(crate) coeff: TensorCoeff,
}

impl OpTerm {
    fn key(&self) -> (&Vec<i64>, &Vec<u32>, &Vec<u32>) {
        (&self.z, &self.a, &self.c)
    }
}

/// A finite sum of tensor terms in normal form.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Operator {
    sig: Signature,
    terms: Vec<OpTerm>,
}

impl Operator {
    pub fn zero(sig: Signature) -> Self {
        Operator { sig, terms: Vec::new() }
    }

    pub fn identity(sig: Signature) -> Self {
        Operator {
            sig,
            terms: vec![OpTerm {
                z: vec![0; sig.laurent],
                a: vec![0; sig.fock],
                c: vec![0; sig.fock],
                coeff: TensorCoeff::one(sig.fock),
            }],
        }
    }

    /// A single pure tensor of factors; Laurent factors must come first.
    pub fn from_factors(factors: &[FactorOp]) -> Result<Self, OperError> {
        let laurent = factors
            .iter()
            .take_while(|f| matches!(f, FactorOp::Laurent { .. }))
            .count();
        let fock = factors.len() - laurent;
        if factors[laurent..].iter().any(|f| matches!(f, FactorOp::Laurent { .. })) {
            return Err(OperError::BadFactorOrder);
        }
        let sig = Signature::new(laurent, fock);
        let mut z = Vec::with_capacity(laurent);
        let mut a = Vec::with_capacity(fock);
        let mut c = Vec::with_capacity(fock);
        let mut coeff = TensorCoeff::one(fock);
        for (slot, factor) in factors[laurent..].iter().enumerate() {
            let FactorOp::Fock { raise, coeff: fc, lower } = factor else { unreachable!() };
            a.push(*raise);
            c.push(*lower);
            let mut widened = TensorCoeff::zero(fock);
            for t in &fc.0.terms {
                let mut nt = TcTerm {
                    r: t.r.clone(),
                    v: t.v,
                    consts: t.consts.clone(),
                    factors: vec![FactorCoeff::default(); fock],
                };
                nt.factors[slot] = t.factors[0].clone();
                widened.terms.push(nt);
            }
            widened.normalize();
            coeff = coeff.mul(&widened);
        }
        for factor in &factors[..laurent] {
            let FactorOp::Laurent { shift } = factor else { unreachable!() };
            z.push(*shift);
        }
        let mut op = Operator { sig, terms: vec![OpTerm { z, a, c, coeff }] };
        op.normalize();
        Ok(op)
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub(crate) fn terms(&self) -> &[OpTerm] {
        &self.terms
    }

    /// Merge like terms, strip matched projections, drop zeros.
    ///
    /// For a term (a, g, c) with a_i, c_i >= 1, the part of g that vanishes
    /// at N_i = -1 acts identically with one matched projection removed:
    /// (a, g, c) = (a, e, c) + (a-1, (g-e)(N-1), c-1) where e = g|_{N_i=-1}
    /// read as an N_i-free function. Splitting off the pushed-down part and
    /// iterating gives each term a coefficient whose shiftable part is
    /// N_i-free at every reducible factor, so semantically equal sums reach
    /// one normal form; e.g. S* (1-q^{2N+2}) S and (1-q^{2N}) merge.
    fn normalize(&mut self) {
        let fock = self.sig.fock;
        loop {
            self.terms.sort_by(|x, y| x.key().cmp(&y.key()));
            let mut merged: Vec<OpTerm> = Vec::with_capacity(self.terms.len());
            for t in self.terms.drain(..) {
                match merged.last_mut() {
                    Some(last) if last.key() == t.key() => {
                        last.coeff = last.coeff.add(&t.coeff)
                    }
                    _ => merged.push(t),
                }
            }
            merged.retain(|t| !t.coeff.is_zero());
            self.terms = merged;
            let mut pushed: Vec<OpTerm> = Vec::new();
            for t in &mut self.terms {
                for i in 0..fock {
                    if t.a[i] == 0 || t.c[i] == 0 {
                        continue;
                    }
                    let (s, ns) = t.coeff.split_shiftable(i);
                    if s.is_zero() {
                        continue;
                    }
                    let boundary = s.at_minus_one(i).expect("shiftable at i");
                    let moving = s.sub(&boundary);
                    if moving.is_zero() {
                        continue;
                    }
                    let mut shifts = vec![0i64; fock];
                    shifts[i] = -1;
                    let mut down = t.clone();
                    down.coeff = moving.shifted(&shifts);
                    down.a[i] -= 1;
                    down.c[i] -= 1;
                    pushed.push(down);
                    t.coeff = ns.add(&boundary);
                }
            }
            if pushed.is_empty() {
                return;
            }
            self.terms.extend(pushed);
        }
    }

    pub fn add(&self, other: &Operator) -> Result<Operator, OperError> {
        if self.sig != other.sig {
            return Err(OperError::SignatureMismatch(self.sig, other.sig));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        let mut out = Operator { sig: self.sig, terms };
        out.normalize();
        Ok(out)
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator, OperError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Operator {
        Operator {
            sig: self.sig,
            terms: self
                .terms
                .iter()
                .map(|t| OpTerm { coeff: t.coeff.neg(), ..t.clone() })
                .collect(),
        }
    }

    /// Multiply by a scalar expression (no N dependence).
    pub fn scale(&self, s: &ScalarExpr) -> Operator {
        let sc = TensorCoeff::from_scalar(s, self.sig.fock);
        let mut out = Operator {
            sig: self.sig,
            terms: self
                .terms
                .iter()
                .map(|t| OpTerm { coeff: t.coeff.mul(&sc), ..t.clone() })
                .collect(),
        };
        out.normalize();
        out
    }

    /// Operator product self . other (other acts first).
    pub fn compose(&self, other: &Operator) -> Result<Operator, OperError> {
        if self.sig != other.sig {
            return Err(OperError::SignatureMismatch(self.sig, other.sig));
        }
        let fock = self.sig.fock;
        let mut terms = Vec::new();
        for x in &self.terms {
            for y in &other.terms {
                let z: Vec<i64> = x.z.iter().zip(&y.z).map(|(p, q)| p + q).collect();
                let mut a = Vec::with_capacity(fock);
                let mut c = Vec::with_capacity(fock);
                let mut shift_x = vec![0i64; fock];
                let mut shift_y = vec![0i64; fock];
                for i in 0..fock {
                    // (S*)^{a1} g1 S^{c1} . (S*)^{a2} g2 S^{c2}: the inner
                    // S^{c1} (S*)^{a2} contracts in the S S* = 1 order, so no
                    // projection appears and the leftover shift transports
                    // one coefficient.
                    let (a1, c1) = (x.a[i], x.c[i]);
                    let (a2, c2) = (y.a[i], y.c[i]);
                    if a2 >= c1 {
                        a.push(a1 + a2 - c1);
                        c.push(c2);
                        shift_x[i] = (a2 - c1) as i64;
                    } else {
                        a.push(a1);
                        c.push(c2 + c1 - a2);
                        shift_y[i] = (c1 - a2) as i64;
                    }
                }
                let coeff = x.coeff.shifted(&shift_x).mul(&y.coeff.shifted(&shift_y));
                terms.push(OpTerm { z, a, c, coeff });
            }
        }
        let mut out = Operator { sig: self.sig, terms };
        out.normalize();
        Ok(out)
    }

    /// Adjoint: Laurent shifts negate; Fock (a, g, c) becomes (c, g, a) with
    /// the same coefficient (all scalars are real).
    pub fn adjoint(&self) -> Operator {
        let mut out = Operator {
            sig: self.sig,
            terms: self
                .terms
                .iter()
                .map(|t| OpTerm {
                    z: t.z.iter().map(|&z| -z).collect(),
                    a: t.c.clone(),
                    c: t.a.clone(),
                    coeff: t.coeff.clone(),
                })
                .collect(),
        };
        out.normalize();
        out
    }

    /// Tensor product: signatures concatenate positionwise (Laurent with
    /// Laurent, Fock with Fock).
    pub fn tensor(&self, other: &Operator) -> Operator {
        let sig = Signature::new(
            self.sig.laurent + other.sig.laurent,
            self.sig.fock + other.sig.fock,
        );
        let mut terms = Vec::new();
        for x in &self.terms {
            for y in &other.terms {
                let mut z = x.z.clone();
                z.extend(&y.z);
                let mut a = x.a.clone();
                a.extend(&y.a);
                let mut c = x.c.clone();
                c.extend(&y.c);
                terms.push(OpTerm { z, a, c, coeff: x.coeff.tensor(&y.coeff) });
            }
        }
        let mut out = Operator { sig, terms };
        out.normalize();
        out
    }

    /// Exact column: the image of a basis vector as index/coefficient pairs.
    pub fn apply(&self, v: &BasisIndex) -> Result<Vec<(BasisIndex, ScalarExpr)>, OperError> {
        if !v.fits(self.sig) {
            return Err(OperError::BadIndex);
        }
        let mut out: BTreeMap<BasisIndex, ScalarExpr> = BTreeMap::new();
        'term: for t in &self.terms {
            let mut m = Vec::with_capacity(self.sig.fock);
            for i in 0..self.sig.fock {
                if v.fock[i] < t.c[i] {
                    continue 'term;
                }
                m.push(v.fock[i] - t.c[i]);
            }
            let value = t.coeff.eval(&m);
            if value.is_zero() {
                continue;
            }
            let target = BasisIndex {
                laurent: v.laurent.iter().zip(&t.z).map(|(p, q)| p + q).collect(),
                fock: m.iter().zip(&t.a).map(|(p, q)| p + q).collect(),
            };
            match out.get_mut(&target) {
                Some(acc) => *acc = acc.add(&value),
                None => {
                    out.insert(target, value);
                }
            }
        }
        Ok(out.into_iter().filter(|(_, s)| !s.is_zero()).collect())
    }

    /// Text dump, one line per term.
    pub fn dump(&self) -> String {
        if self.terms.is_empty() {
            return "zero".to_string();
        }
        self.terms
            .iter()
            .map(|t| {
                format!(
                    "term: z={:?} a={:?} c={:?} coeff={}",
                    t.z, t.a, t.c, t.coeff
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

// ---------------------------------------------------------------------------
// Corepresentation matrices
// ---------------------------------------------------------------------------

/// Square matrix of operators sharing one signature; indices are 1-based.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CorepMatrix {
    size: usize,
    sig: Signature,
    entries: Vec<Operator>,
}

impl CorepMatrix {
    pub fn from_entries(
        size: usize,
        sig: Signature,
        entries: Vec<Operator>,
    ) -> Result<Self, OperError> {
        if entries.len() != size * size {
            return Err(OperError::BadEntryCount);
        }
        if let Some(e) = entries.iter().find(|e| e.signature() != sig) {
            return Err(OperError::SignatureMismatch(sig, e.signature()));
        }
        Ok(CorepMatrix { size, sig, entries })
    }

    pub fn delta(size: usize, sig: Signature) -> Self {
        let mut entries = vec![Operator::zero(sig); size * size];
        for i in 0..size {
            entries[i * size + i] = Operator::identity(sig);
        }
        CorepMatrix { size, sig, entries }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }

    /// 1-based entry access: row i, column j.
    pub fn entry(&self, i: usize, j: usize) -> &Operator {
        assert!(
            (1..=self.size).contains(&i) && (1..=self.size).contains(&j),
            "matrix indices are 1-based"
        );
        &self.entries[(i - 1) * self.size + (j - 1)]
    }

    pub fn set_entry(&mut self, i: usize, j: usize, op: Operator) -> Result<(), OperError> {
        if op.signature() != self.sig {
            return Err(OperError::SignatureMismatch(self.sig, op.signature()));
        }
        assert!((1..=self.size).contains(&i) && (1..=self.size).contains(&j));
        self.entries[(i - 1) * self.size + (j - 1)] = op;
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = (1..=self.size)
            .map(|i| {
                (1..=self.size)
                    .map(|j| {
                        serde_json::Value::Array(
                            self.entry(i, j)
                                .dump()
                                .lines()
                                .map(|l| serde_json::Value::String(l.to_string()))
                                .collect(),
                        )
                    })
                    .collect()
            })
            .collect();
        serde_json::json!({
            "size": self.size,
            "signature": { "laurent": self.sig.laurent, "fock": self.sig.fock },
            "entries": rows,
        })
    }
}

/// Convolution product: entry(i,j) = sum_k A(i,k) (x) B(k,j).
pub fn convolve(a: &CorepMatrix, b: &CorepMatrix) -> Result<CorepMatrix, OperError> {
    if a.size != b.size {
        return Err(OperError::SizeMismatch(a.size, b.size));
    }
    let sig = Signature::new(a.sig.laurent + b.sig.laurent, a.sig.fock + b.sig.fock);
    let mut entries = Vec::with_capacity(a.size * a.size);
    for i in 1..=a.size {
        for j in 1..=a.size {
            let mut acc = Operator::zero(sig);
            for k in 1..=a.size {
                let x = a.entry(i, k);
                let y = b.entry(k, j);
                if x.is_zero() || y.is_zero() {
                    continue;
                }
                acc = acc.add(&x.tensor(y))?;
            }
            entries.push(acc);
        }
    }
    CorepMatrix::from_entries(a.size, sig, entries)
}

/// The fundamental 2x2 corepresentation block with q replaced by q^d:
/// entry (1,1) lowers, (2,2) raises, the off-diagonal entries are the
/// q^{dN}-type multipliers.
pub fn psi_corep(d: u32) -> Result<CorepMatrix, OperError> {
    if d < 1 {
        return Err(OperError::BadDeformation);
    }
    let di = d as i64;
    let fock = |raise: u32, coeff: FockCoeff, lower: u32| {
        Operator::from_factors(&[FactorOp::Fock { raise, coeff, lower }]).expect("single factor")
    };
    let lowering = fock(0, FockCoeff::root(d, di), 1);
    let raising = fock(1, FockCoeff::root(d, di), 0);
    let off_upper = fock(
        0,
        FockCoeff::monomial(-BigRational::one(), di, di),
        0,
    );
    let off_lower = fock(0, FockCoeff::q_pow(di, 0), 0);
    CorepMatrix::from_entries(
        2,
        Signature::new(0, 1),
        vec![lowering, off_upper, off_lower, raising],
    )
}

/// Doublet pairings of the simple-reflection corepresentation: each pair
/// (first, second) carries one psi block; unpaired indices are identity
/// entries.
fn doublets(fam: WeylFamily, letter: u32) -> Vec<(usize, usize)> {
    let n = fam.rank() as usize;
    let i = letter as usize;
    match fam.family() {
        Family::A => vec![(i, i + 1)],
        Family::C | Family::D if letter < fam.rank() => {
            vec![(i, i + 1), (2 * n - i, 2 * n - i + 1)]
        }
        Family::C => vec![(n, n + 1)],
        Family::D => vec![(n - 1, n + 1), (n, n + 2)],
    }
}

/// Corepresentation of one simple reflection on the defining space.
pub fn pi_simple(fam: WeylFamily, letter: u32) -> Result<CorepMatrix, OperError> {
    if letter < 1 || letter > fam.rank() {
        return Err(OperError::BadLetter { letter, rank: fam.rank() });
    }
    let size = fam.corep_size();
    let sig = Signature::new(0, 1);
    let psi = psi_corep(fam.root_scale(letter))?;
    let mut m = CorepMatrix {
        size,
        sig,
        entries: vec![Operator::zero(sig); size * size],
    };
    let pairs = doublets(fam, letter);
    let mut paired = BTreeSet::new();
    for &(x, y) in &pairs {
        paired.insert(x);
        paired.insert(y);
    }
    for s in 1..=size {
        if !paired.contains(&s) {
            m.set_entry(s, s, Operator::identity(sig))?;
        }
    }
    for &(x, y) in &pairs {
        m.set_entry(x, x, psi.entry(1, 1).clone())?;
        m.set_entry(x, y, psi.entry(1, 2).clone())?;
        m.set_entry(y, x, psi.entry(2, 1).clone())?;
        m.set_entry(y, y, psi.entry(2, 2).clone())?;
    }
    Ok(m)
}

/// Diagonal Laurent-shift corepresentation of the classical torus limit.
pub fn chi_e(fam: WeylFamily) -> CorepMatrix {
    let n = fam.rank() as usize;
    let size = fam.corep_size();
    let sig = Signature::new(n, 0);
    let mut m = CorepMatrix {
        size,
        sig,
        entries: vec![Operator::zero(sig); size * size],
    };
    for i in 1..=size {
        let mut shifts = vec![0i64; n];
        match fam.family() {
            Family::A => {
                if i == 1 {
                    shifts = vec![-1; n];
                } else {
                    shifts[n + 1 - i] = 1;
                }
            }
            Family::C | Family::D => {
                if i <= n {
                    shifts[i - 1] = -1;
                } else {
                    shifts[2 * n - i] = 1;
                }
            }
        }
        let factors: Vec<FactorOp> =
            shifts.into_iter().map(|shift| FactorOp::Laurent { shift }).collect();
        let op = Operator::from_factors(&factors).expect("laurent factors");
        m.set_entry(i, i, op).expect("matching signature");
    }
    m
}

/// Corepresentation of a word: the convolution of its letters' blocks.
/// The empty word gives the delta matrix with empty signature.
pub fn pi_word(fam: WeylFamily, word: &[u32]) -> Result<CorepMatrix, OperError> {
    let mut m = CorepMatrix::delta(fam.corep_size(), Signature::new(0, 0));
    for &letter in word {
        m = convolve(&m, &pi_simple(fam, letter)?)?;
    }
    Ok(m)
}

/// chi_e convolved with the word's corepresentation, with a reducedness flag.
pub struct ChiWord {
    pub matrix: CorepMatrix,
    pub reduced: bool,
}

pub fn chi_word(fam: WeylFamily, word: &[u32]) -> Result<ChiWord, OperError> {
    for &letter in word {
        if letter < 1 || letter > fam.rank() {
            return Err(OperError::BadLetter { letter, rank: fam.rank() });
        }
    }
    let mut matrix = chi_e(fam);
    for &letter in word {
        matrix = convolve(&matrix, &pi_simple(fam, letter)?)?;
    }
    let reduced = crate::weyl::word_normalize(fam, word)
        .map(|w| w.len() == word.len())
        .unwrap_or(false);
    Ok(ChiWord { matrix, reduced })
}

/// Maximum unitarity residual of M over the window's interior.
///
/// The residuals sum_k M(i,k) M(j,k)* - delta_ij and
/// sum_k M(k,i)* M(k,j) - delta_ij are formed exactly; when every residual
/// normalizes to the zero operator the defect is exactly zero. Otherwise the
/// defect is the largest 2-norm of a residual column over interior basis
/// vectors. Coefficients never depend on Laurent indices and shifts preserve
/// norms, so one Laurent base point is exact.
pub fn unitarity_defect(m: &CorepMatrix, window: &Window, q0: &BigRational) -> Fixed {
    let size = m.size;
    let adj: Vec<Operator> = m.entries.iter().map(|e| e.adjoint()).collect();
    let at = |i: usize, j: usize| -> &Operator { &m.entries[(i - 1) * size + (j - 1)] };
    let adj_at = |i: usize, j: usize| -> &Operator { &adj[(i - 1) * size + (j - 1)] };
    let pairs: Vec<(usize, usize)> =
        (1..=size).flat_map(|i| (1..=size).map(move |j| (i, j))).collect();
    let residuals: Vec<Operator> = pairs
        .par_iter()
        .flat_map(|&(i, j)| {
            let mut row = Operator::zero(m.sig);
            let mut col = Operator::zero(m.sig);
            for k in 1..=size {
                row = row
                    .add(&at(i, k).compose(adj_at(j, k)).expect("same signature"))
                    .expect("same signature");
                col = col
                    .add(&adj_at(k, i).compose(at(k, j)).expect("same signature"))
                    .expect("same signature");
            }
            if i == j {
                let one = Operator::identity(m.sig);
                row = row.sub(&one).expect("same signature");
                col = col.sub(&one).expect("same signature");
            }
            vec![row, col]
        })
        .collect();
    if residuals.iter().all(|r| r.is_zero()) {
        return Fixed::zero();
    }
    let nonzero: Vec<&Operator> = residuals.iter().filter(|r| !r.is_zero()).collect();
    let probes: Vec<Vec<u32>> =
        fock_grid(m.sig.fock, window.fock_interior_cap()).collect();
    probes
        .par_iter()
        .map(|fock| {
            let mut ctx = EvalCtx::new(q0);
            let v = BasisIndex::new(vec![0; m.sig.laurent], fock.clone());
            let mut worst = Fixed::zero();
            for r in &nonzero {
                let col = r.apply(&v).expect("index fits");
                let mut sq = Fixed::zero();
                for (_, s) in &col {
                    let x = s.eval(&mut ctx);
                    sq = &sq + &(&x * &x);
                }
                let norm = sq.sqrt();
                if norm > worst {
                    worst = norm;
                }
            }
            worst
        })
        .reduce(Fixed::zero, |a, b| if a > b { a } else { b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q0() -> BigRational {
        BigRational::new(BigInt::from(1), BigInt::from(2))
    }

    fn fock_op(raise: u32, coeff: FockCoeff, lower: u32) -> Operator {
        Operator::from_factors(&[FactorOp::Fock { raise, coeff, lower }]).unwrap()
    }

    fn alpha() -> Operator {
        fock_op(0, FockCoeff::root(1, 1), 1)
    }

    fn alpha_star() -> Operator {
        fock_op(1, FockCoeff::root(1, 1), 0)
    }

    fn beta() -> Operator {
        fock_op(0, FockCoeff::q_pow(1, 0), 0)
    }

    fn apply_fock(op: &Operator, p: u32) -> Vec<(u32, ScalarExpr)> {
        op.apply(&BasisIndex::new(vec![], vec![p]))
            .unwrap()
            .into_iter()
            .map(|(idx, s)| (idx.fock[0], s))
            .collect()
    }

    #[test]
    fn lowering_entry_action() {
        // alpha e_p = sqrt(1-q^{2p}) e_{p-1}, zero at p = 0.
        let a = alpha();
        assert!(apply_fock(&a, 0).is_empty());
        for p in 1..6u32 {
            let col = apply_fock(&a, p);
            assert_eq!(col.len(), 1);
            assert_eq!(col[0].0, p - 1);
            assert_eq!(col[0].1, ScalarExpr::atom(p));
        }
    }

    #[test]
    fn multiplier_and_shift_actions() {
        let b = beta();
        for p in 0..5u32 {
            let col = apply_fock(&b, p);
            assert_eq!(col, vec![(p, ScalarExpr::q_pow(p as i64))]);
        }
        let s = Operator::from_factors(&[FactorOp::Laurent { shift: -1 }]).unwrap();
        let col = s.apply(&BasisIndex::new(vec![3], vec![])).unwrap();
        assert_eq!(col[0].0.laurent, vec![2]);
        assert_eq!(col[0].1, ScalarExpr::one());
    }

    #[test]
    fn q_commutation_of_lowering_and_multiplier() {
        // q . beta alpha = alpha beta.
        let lhs = beta().compose(&alpha()).unwrap().scale(&ScalarExpr::q_pow(1));
        let rhs = alpha().compose(&beta()).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn commutator_is_multiplier_squared() {
        // alpha alpha* - alpha* alpha = (1 - q^2) beta^2.
        let lhs = alpha()
            .compose(&alpha_star())
            .unwrap()
            .sub(&alpha_star().compose(&alpha()).unwrap())
            .unwrap();
        let factor = ScalarExpr::one().sub(&ScalarExpr::q_pow(2));
        let rhs = beta().compose(&beta()).unwrap().scale(&factor);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn projection_stripping_normalizes_adjoint_products() {
        // alpha* alpha = 1 - q^{2N} exactly, including the boundary value.
        let lhs = alpha_star().compose(&alpha()).unwrap();
        let rhs = fock_op(
            0,
            FockCoeff::one().add(&FockCoeff::q_pow(2, 0).neg()),
            0,
        );
        assert_eq!(lhs, rhs);
    }

    fn random_fock_coeff(rng: &mut ChaCha8Rng) -> FockCoeff {
        let mut acc = FockCoeff::zero();
        for _ in 0..rng.gen_range(1..3) {
            let r = BigRational::from(BigInt::from(rng.gen_range(-3..=3i32)));
            let mut term = FockCoeff::monomial(r, rng.gen_range(0..3), rng.gen_range(0..3));
            if rng.gen_bool(0.5) {
                let d = rng.gen_range(1..=2u32);
                let c = d as i64 * rng.gen_range(1..=2i64);
                term = term.mul(&FockCoeff::root(d, c));
            }
            acc = acc.add(&term);
        }
        acc
    }

    fn random_operator(rng: &mut ChaCha8Rng, sig: Signature) -> Operator {
        let mut acc = Operator::zero(sig);
        for _ in 0..rng.gen_range(1..=2) {
            let mut factors = Vec::new();
            for _ in 0..sig.laurent {
                factors.push(FactorOp::Laurent { shift: rng.gen_range(-2..=2) });
            }
            for _ in 0..sig.fock {
                factors.push(FactorOp::Fock {
                    raise: rng.gen_range(0..=2),
                    coeff: random_fock_coeff(rng),
                    lower: rng.gen_range(0..=2),
                });
            }
            acc = acc.add(&Operator::from_factors(&factors).unwrap()).unwrap();
        }
        acc
    }

    #[test]
    fn composition_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let sig = Signature::new(rng.gen_range(0..=1), rng.gen_range(1..=2));
            let x = random_operator(&mut rng, sig);
            let y = random_operator(&mut rng, sig);
            let z = random_operator(&mut rng, sig);
            let left = x.compose(&y).unwrap().compose(&z).unwrap();
            let right = x.compose(&y.compose(&z).unwrap()).unwrap();
            assert_eq!(left, right);
        }
    }

    #[test]
    fn identity_is_neutral() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let sig = Signature::new(rng.gen_range(0..=2), rng.gen_range(0..=2));
            let x = random_operator(&mut rng, sig);
            let e = Operator::identity(sig);
            assert_eq!(e.compose(&x).unwrap(), x);
            assert_eq!(x.compose(&e).unwrap(), x);
        }
    }

    #[test]
    fn apply_matches_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..60 {
            let sig = Signature::new(1, 1);
            let x = random_operator(&mut rng, sig);
            let y = random_operator(&mut rng, sig);
            let xy = x.compose(&y).unwrap();
            for p in 0..5u32 {
                let v = BasisIndex::new(vec![0], vec![p]);
                let direct = xy.apply(&v).unwrap();
                let mut staged: BTreeMap<BasisIndex, ScalarExpr> = BTreeMap::new();
                for (mid, s) in y.apply(&v).unwrap() {
                    for (end, t) in x.apply(&mid).unwrap() {
                        let add = s.mul(&t);
                        staged
                            .entry(end)
                            .and_modify(|acc| *acc = acc.add(&add))
                            .or_insert(add);
                    }
                }
                staged.retain(|_, s| !s.is_zero());
                assert_eq!(direct, staged.into_iter().collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn adjoint_is_involutive_antihomomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..200 {
            let sig = Signature::new(rng.gen_range(0..=1), rng.gen_range(1..=2));
            let x = random_operator(&mut rng, sig);
            let y = random_operator(&mut rng, sig);
            assert_eq!(x.adjoint().adjoint(), x);
            assert_eq!(
                x.compose(&y).unwrap().adjoint(),
                y.adjoint().compose(&x.adjoint()).unwrap()
            );
        }
        assert_eq!(alpha().adjoint(), alpha_star());
        let s = Operator::from_factors(&[FactorOp::Laurent { shift: -1 }]).unwrap();
        let s_star = Operator::from_factors(&[FactorOp::Laurent { shift: 1 }]).unwrap();
        assert_eq!(s.adjoint(), s_star);
    }

    #[test]
    fn fundamental_block_entries() {
        let psi = psi_corep(1).unwrap();
        assert_eq!(psi.entry(1, 1), &alpha());
        assert_eq!(psi.entry(2, 2), &alpha_star());
        for p in 0..4u32 {
            let col = apply_fock(psi.entry(1, 2), p);
            let expect = ScalarExpr::q_pow(p as i64 + 1)
                .mul(&ScalarExpr::from_int(-1));
            assert_eq!(col, vec![(p, expect)]);
            let col = apply_fock(psi.entry(2, 1), p);
            assert_eq!(col, vec![(p, ScalarExpr::q_pow(p as i64))]);
        }
    }

    #[test]
    fn fundamental_block_is_exactly_unitary() {
        let window = Window::new(6, 10, 4);
        for d in 1..=3u32 {
            let psi = psi_corep(d).unwrap();
            assert!(unitarity_defect(&psi, &window, &q0()).is_zero());
        }
    }

    #[test]
    fn sign_flip_breaks_unitarity() {
        let mut psi = psi_corep(1).unwrap();
        let flipped = psi.entry(1, 2).neg();
        psi.set_entry(1, 2, flipped).unwrap();
        let window = Window::new(6, 10, 4);
        let defect = unitarity_defect(&psi, &window, &q0());
        assert!(defect.to_f64() > 0.1, "defect {}", defect.to_f64());
    }

    #[test]
    fn simple_blocks_match_fundamental() {
        let a1 = WeylFamily::new(Family::A, 1).unwrap();
        assert_eq!(pi_simple(a1, 1).unwrap(), psi_corep(1).unwrap());

        let a2 = WeylFamily::new(Family::A, 2).unwrap();
        let m = pi_simple(a2, 1).unwrap();
        assert_eq!(m.entry(3, 3), &Operator::identity(Signature::new(0, 1)));
        assert!(m.entry(1, 3).is_zero());

        // long-root block: entry (2,3) acts as -q^{2(p+1)}.
        let c2 = WeylFamily::new(Family::C, 2).unwrap();
        let m = pi_simple(c2, 2).unwrap();
        for p in 0..4u32 {
            let col = apply_fock(m.entry(2, 3), p);
            let expect =
                ScalarExpr::q_pow(2 * p as i64 + 2).mul(&ScalarExpr::from_int(-1));
            assert_eq!(col, vec![(p, expect)]);
        }
    }

    #[test]
    fn simple_blocks_are_exactly_unitary() {
        let window = Window::new(6, 10, 4);
        let cases: Vec<(Family, u32, u32)> = vec![
            (Family::A, 2, 1),
            (Family::A, 2, 2),
            (Family::C, 2, 1),
            (Family::C, 2, 2),
            (Family::D, 3, 1),
            (Family::D, 3, 3),
        ];
        for (family, rank, letter) in cases {
            let fam = WeylFamily::new(family, rank).unwrap();
            let m = pi_simple(fam, letter).unwrap();
            assert!(
                unitarity_defect(&m, &window, &q0()).is_zero(),
                "{}{} letter {}",
                family,
                rank,
                letter
            );
        }
    }

    #[test]
    fn torus_matrix_shifts() {
        let a2 = WeylFamily::new(Family::A, 2).unwrap();
        let m = chi_e(a2);
        let shift_of = |op: &Operator, at: Vec<i64>| -> Vec<i64> {
            let col = op.apply(&BasisIndex::new(at, vec![])).unwrap();
            assert_eq!(col.len(), 1);
            assert_eq!(col[0].1, ScalarExpr::one());
            col[0].0.laurent.clone()
        };
        assert_eq!(shift_of(m.entry(1, 1), vec![0, 0]), vec![-1, -1]);
        assert_eq!(shift_of(m.entry(2, 2), vec![0, 0]), vec![0, 1]);
        assert_eq!(shift_of(m.entry(3, 3), vec![0, 0]), vec![1, 0]);
        assert!(m.entry(1, 2).is_zero());

        let c2 = WeylFamily::new(Family::C, 2).unwrap();
        let m = chi_e(c2);
        assert_eq!(shift_of(m.entry(1, 1), vec![0, 0]), vec![-1, 0]);
        assert_eq!(shift_of(m.entry(2, 2), vec![0, 0]), vec![0, -1]);
        assert_eq!(shift_of(m.entry(3, 3), vec![0, 0]), vec![0, 1]);
        assert_eq!(shift_of(m.entry(4, 4), vec![0, 0]), vec![1, 0]);

        let window = Window::new(6, 8, 3);
        assert!(unitarity_defect(&m, &window, &q0()).is_zero());
    }

    #[test]
    fn convolution_with_delta_prefixes_identity() {
        let a1 = WeylFamily::new(Family::A, 1).unwrap();
        let b = pi_simple(a1, 1).unwrap();
        let d = CorepMatrix::delta(2, Signature::new(0, 0));
        assert_eq!(convolve(&d, &b).unwrap(), b);
    }

    #[test]
    fn convolution_entry_expansion() {
        // entry (1,1) of pi * pi: alpha (x) alpha + (-q^{N+1}) (x) q^N.
        let a1 = WeylFamily::new(Family::A, 1).unwrap();
        let p = pi_simple(a1, 1).unwrap();
        let m = convolve(&p, &p).unwrap();
        let lhs = m.entry(1, 1);
        let first = alpha().tensor(&alpha());
        let second = fock_op(0, FockCoeff::monomial(-BigRational::one(), 1, 1), 0)
            .tensor(&fock_op(0, FockCoeff::q_pow(1, 0), 0));
        let rhs = first.add(&second).unwrap();
        assert_eq!(lhs, &rhs);
    }

    #[test]
    fn word_matrix_entry_example() {
        // length-1 word on the smallest group: entry (2,1) = S* (x) q^N.
        let a1 = WeylFamily::new(Family::A, 1).unwrap();
        let cw = chi_word(a1, &[1]).unwrap();
        assert!(cw.reduced);
        let expect = Operator::from_factors(&[
            FactorOp::Laurent { shift: 1 },
            FactorOp::Fock { raise: 0, coeff: FockCoeff::q_pow(1, 0), lower: 0 },
        ])
        .unwrap();
        assert_eq!(cw.matrix.entry(2, 1), &expect);
    }

    #[test]
    fn empty_word_gives_torus_matrix() {
        let c2 = WeylFamily::new(Family::C, 2).unwrap();
        let cw = chi_word(c2, &[]).unwrap();
        assert!(cw.reduced);
        assert_eq!(cw.matrix, chi_e(c2));
    }

    #[test]
    fn non_reduced_word_is_flagged() {
        let a1 = WeylFamily::new(Family::A, 1).unwrap();
        let cw = chi_word(a1, &[1, 1]).unwrap();
        assert!(!cw.reduced);
        assert_eq!(cw.matrix.signature(), Signature::new(1, 2));
    }

    #[test]
    fn factorization_identity_for_word_matrices() {
        // chi_w entries factor through the torus part: left-folded
        // construction equals chi_e convolved with the whole word block.
        for (family, rank) in [(Family::A, 2), (Family::C, 2), (Family::D, 3)] {
            let fam = WeylFamily::new(family, rank).unwrap();
            let words: Vec<Vec<u32>> = vec![
                vec![1],
                vec![rank],
                vec![1, 2],
                vec![2, 1, 2],
            ];
            for word in words {
                let direct = chi_word(fam, &word).unwrap().matrix;
                let torus = chi_e(fam);
                let block = pi_word(fam, &word).unwrap();
                assert_eq!(direct, convolve(&torus, &block).unwrap());
                for i in 1..=direct.size() {
                    for j in 1..=direct.size() {
                        let factored = torus.entry(i, i).tensor(block.entry(i, j));
                        assert_eq!(direct.entry(i, j), &factored);
                    }
                }
            }
        }
    }

    #[test]
    fn word_matrices_are_exactly_unitary() {
        let window = Window::new(6, 10, 4);
        let a2 = WeylFamily::new(Family::A, 2).unwrap();
        let w0 = crate::weyl::longest_element(a2).canonical_word();
        let cw = chi_word(a2, w0.letters()).unwrap();
        assert!(unitarity_defect(&cw.matrix, &window, &q0()).is_zero());

        let c2 = WeylFamily::new(Family::C, 2).unwrap();
        let w0 = crate::weyl::longest_element(c2).canonical_word();
        let cw = chi_word(c2, w0.letters()).unwrap();
        assert!(unitarity_defect(&cw.matrix, &window, &q0()).is_zero());
    }

    #[test]
    fn dump_format_is_stable() {
        assert_eq!(alpha().dump(), "term: z=[] a=[0] c=[1] coeff=w1(1,1)");
        let m = psi_corep(1).unwrap();
        assert_eq!(m.entry(1, 2).dump(), "term: z=[] a=[0] c=[0] coeff=-q*qN1");
        let json = m.to_json();
        assert_eq!(json["size"], 2);
        assert_eq!(json["signature"]["fock"], 1);
    }
}
