//! Growth of finitely generated operator spans.
//!
//! d(m) is the dimension of span(Xi^m) for a generator set Xi containing the
//! unit. Dimensions are measured as ranks of windowed matricizations: a span
//! element becomes the vector of its matrix entries over (window input basis)
//! x (reachable output index) at a rational base point q0. Every entry is a
//! rational combination of radical products prod sqrt(1 - q0^{2k}); entries
//! are kept exact by splitting each into one column per radical square class
//! and eliminating the resulting rational matrix modulo two large primes.
//! Rank mod p never exceeds rational rank, and rank on a window never exceeds
//! the true rank, so measured values are certified lower bounds; the window
//! auto-grows until the value stops moving, and only stabilized rows enter
//! the reported series.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use rayon::prelude::*;
use thiserror::Error;

use crate::oper::{chi_word, fock_grid, BasisIndex, FactorOp, FockCoeff, Operator, Signature};
use crate::weyl::{longest_element, WeylFamily};

#[derive(Error, Debug)]
pub enum GrowthError {
    #[error("generator set is empty")]
    EmptyGenerators,
    #[error("generator set does not contain the unit")]
    MissingUnit,
    #[error("generators carry mixed signatures: {0} vs {1}")]
    MixedSignatures(Signature, Signature),
    #[error("m_max must be at least 1")]
    BadStepCount,
    #[error("window budget exhausted at m = {m} before rank stabilization (last d = {last_d})")]
    UnstableWindow { m: u32, last_d: usize },
    #[error("degree detection needs at least {need} stable rows, have {have}")]
    InsufficientRows { have: usize, need: usize },
    #[error(transparent)]
    Oper(#[from] crate::oper::OperError),
}

/// Moduli for exact rank elimination: 2^61 - 1 and the largest prime below
/// 2^64. A dependent row reduces to zero modulo every prime, so rank mod p
/// never exceeds the rational rank; an independent row survives unless p
/// divides a specific nonzero minor, and no desk-scale minor is divisible by
/// both of these.
const PRIMES: [u64; 2] = [2_305_843_009_213_693_951, 18_446_744_073_709_551_557];

/// Rank backend: a single evaluation point, or the maximum over three
/// points (a dependent family is dependent at every q, an independent one
/// collapses only on a measure-zero set, so three points make silent
/// collapse implausible). Arithmetic is exact at every point.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Backend {
    Numeric { q0: BigRational },
    MultiPoint,
}

impl Backend {
    pub fn numeric_default() -> Backend {
        Backend::Numeric { q0: BigRational::new(BigInt::from(1), BigInt::from(2)) }
    }

    fn points(&self) -> Vec<BigRational> {
        match self {
            Backend::Numeric { q0 } => vec![q0.clone()],
            Backend::MultiPoint => vec![
                BigRational::new(BigInt::from(1), BigInt::from(2)),
                BigRational::new(BigInt::from(1), BigInt::from(3)),
                BigRational::new(BigInt::from(2), BigInt::from(5)),
            ],
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Backend::Numeric { q0 } => serde_json::json!({
                "backend": "numeric",
                "q0": q0.to_string(),
                "tolerance": "exact (square-class split, modular elimination)",
            }),
            Backend::MultiPoint => serde_json::json!({
                "backend": "multipoint",
                "q0": ["1/2", "1/3", "2/5"],
                "tolerance": "exact (square-class split, modular elimination)",
            }),
        }
    }
}

/// Matricization window schedule: attempt i uses Fock box [0, fock_cap + i*step]
/// per factor (and reports Laurent radius laurent_radius + i*step). Coefficients
/// never depend on Laurent indices, so one Laurent base point is exact and the
/// Laurent radius is bookkeeping only.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct WindowPolicy {
    pub laurent_radius: u32,
    pub fock_cap: u32,
    pub step: u32,
    pub budget: u32,
}

impl WindowPolicy {
    pub fn desk() -> Self {
        WindowPolicy { laurent_radius: 6, fock_cap: 8, step: 2, budget: 30 }
    }

    pub fn with_fock_cap(fock_cap: u32) -> Self {
        WindowPolicy { fock_cap, ..Self::desk() }
    }

    fn at(&self, attempt: u32) -> (u32, u32) {
        (
            self.laurent_radius + attempt * self.step,
            self.fock_cap + attempt * self.step,
        )
    }
}

/// A finite generator family with common signature, required to contain the
/// unit so that span(Xi^m) is increasing in m.
#[derive(Clone, Debug)]
pub struct GeneratorSet {
    sig: Signature,
    ops: Vec<Operator>,
    adjoint_closed: bool,
}

impl GeneratorSet {
    pub fn new(ops: Vec<Operator>) -> Result<Self, GrowthError> {
        let Some(first) = ops.first() else {
            return Err(GrowthError::EmptyGenerators);
        };
        let sig = first.signature();
        if let Some(bad) = ops.iter().find(|o| o.signature() != sig) {
            return Err(GrowthError::MixedSignatures(sig, bad.signature()));
        }
        let unit = Operator::identity(sig);
        if !ops.iter().any(|o| *o == unit) {
            return Err(GrowthError::MissingUnit);
        }
        let keys: HashSet<String> = ops.iter().map(|o| o.dump()).collect();
        let adjoint_closed = ops.iter().all(|o| keys.contains(&o.adjoint().dump()));
        Ok(GeneratorSet { sig, ops, adjoint_closed })
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }

    pub fn ops(&self) -> &[Operator] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn is_adjoint_closed(&self) -> bool {
        self.adjoint_closed
    }

    /// {1, S, S*} on one bilateral factor.
    pub fn laurent_shift() -> Self {
        let shift = |s: i64| Operator::from_factors(&[FactorOp::Laurent { shift: s }]).unwrap();
        GeneratorSet::new(vec![shift(0), shift(-1), shift(1)]).unwrap()
    }

    /// {1, lowering, raising, q^N multiplier} on one unilateral factor.
    pub fn fock_shift() -> Self {
        let fock = |raise: u32, coeff: FockCoeff, lower: u32| {
            Operator::from_factors(&[FactorOp::Fock { raise, coeff, lower }]).unwrap()
        };
        GeneratorSet::new(vec![
            fock(0, FockCoeff::one(), 0),
            fock(0, FockCoeff::root(1, 1), 1),
            fock(1, FockCoeff::root(1, 1), 0),
            fock(0, FockCoeff::q_pow(1, 0), 0),
        ])
        .unwrap()
    }

    /// The nonzero entries of the word's corepresentation matrix, their
    /// adjoints, and the unit, deduplicated by normal form.
    pub fn corep(fam: WeylFamily, word: &[u32]) -> Result<Self, GrowthError> {
        let matrix = chi_word(fam, word)?.matrix;
        let sig = matrix.signature();
        let mut ops = vec![Operator::identity(sig)];
        let mut seen: HashSet<String> = ops.iter().map(|o| o.dump()).collect();
        let push = |op: Operator, ops: &mut Vec<Operator>, seen: &mut HashSet<String>| {
            if !op.is_zero() && seen.insert(op.dump()) {
                ops.push(op);
            }
        };
        for i in 1..=matrix.size() {
            for j in 1..=matrix.size() {
                let e = matrix.entry(i, j);
                push(e.clone(), &mut ops, &mut seen);
                push(e.adjoint(), &mut ops, &mut seen);
            }
        }
        GeneratorSet::new(ops)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct GrowthRow {
    pub m: u32,
    pub d: usize,
    pub window_rz: u32,
    pub window_rf: u32,
    pub stable: bool,
}

#[derive(Clone, Debug)]
pub struct GrowthSeries {
    pub rows: Vec<GrowthRow>,
    pub backend: Backend,
}

impl GrowthSeries {
    pub fn d_values(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.d).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,d,window_Rz,window_Rf,stable\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.m, r.d, r.window_rz, r.window_rf, r.stable
            ));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "backend": self.backend.to_json(),
            "rows": self.rows.iter().map(|r| serde_json::json!({
                "m": r.m,
                "d": r.d,
                "window_Rz": r.window_rz,
                "window_Rf": r.window_rf,
                "stable": r.stable,
            })).collect::<Vec<_>>(),
        })
    }
}

// ---------------------------------------------------------------------------
// Windowed matricization and exact rank
// ---------------------------------------------------------------------------

fn add_mod(a: u64, b: u64, p: u64) -> u64 {
    let s = a as u128 + b as u128;
    (s % p as u128) as u64
}

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, b, p);
        }
        b = mul_mod(b, b, p);
        e >>= 1;
    }
    acc
}

fn inv_mod(a: u64, p: u64) -> u64 {
    assert!(a % p != 0, "inverse of zero residue");
    pow_mod(a, p - 2, p)
}

fn bigint_mod(n: &BigInt, p: u64) -> u64 {
    n.mod_floor(&BigInt::from(p)).to_u64().expect("residue fits u64")
}

fn rational_mod(r: &BigRational, p: u64) -> u64 {
    mul_mod(bigint_mod(r.numer(), p), inv_mod(bigint_mod(r.denom(), p), p), p)
}

fn rational_pow(r: &BigRational, e: u32) -> BigRational {
    BigRational::new(r.numer().pow(e), r.denom().pow(e))
}

/// Raw matricization row at one point: entries keyed by (input Fock indices,
/// output index, radical atom set), values modulo each prime. The radical
/// part prod_{k in atoms} sqrt(1 - q0^{2k}) is carried symbolically in the
/// key; only the rational cofactor is reduced.
type RawRow = BTreeMap<(Vec<u32>, BasisIndex, Vec<u32>), [u64; 2]>;

/// Residue tables for one evaluation point, shared across a selection pass:
/// powers of q0 and radicands 1 - q0^{2k}, per prime.
struct ModTables {
    base: [u64; 2],
    base_inv: [u64; 2],
    qpow: HashMap<i64, [u64; 2]>,
    radicand: HashMap<u32, [u64; 2]>,
}

impl ModTables {
    fn new(q0: &BigRational) -> Self {
        let base = [rational_mod(q0, PRIMES[0]), rational_mod(q0, PRIMES[1])];
        let base_inv = [inv_mod(base[0], PRIMES[0]), inv_mod(base[1], PRIMES[1])];
        ModTables { base, base_inv, qpow: HashMap::new(), radicand: HashMap::new() }
    }

    fn qpow(&mut self, e: i64) -> [u64; 2] {
        if let Some(&v) = self.qpow.get(&e) {
            return v;
        }
        let v = [0, 1].map(|i| {
            let b = if e >= 0 { self.base[i] } else { self.base_inv[i] };
            pow_mod(b, e.unsigned_abs(), PRIMES[i])
        });
        self.qpow.insert(e, v);
        v
    }

    /// 1 - q0^{2k} mod p.
    fn radicand(&mut self, k: u32) -> [u64; 2] {
        if let Some(&v) = self.radicand.get(&k) {
            return v;
        }
        let q2k = self.qpow(2 * k as i64);
        let v = [0, 1].map(|i| add_mod(1, PRIMES[i] - q2k[i], PRIMES[i]));
        self.radicand.insert(k, v);
        v
    }
}

/// Build one candidate's row directly from its normal form. Laurent inputs
/// stay pinned at zero (coefficients never depend on the Laurent coordinate,
/// so shifts alone separate those columns exactly); only the Fock box is
/// enumerated, and all per-input work is u64 modular arithmetic. Matches
/// coefficient evaluation semantics: a root function with d m + c = 0 kills
/// its term, and squared radicals fold back into the rational part.
fn raw_row(op: &Operator, sig: Signature, fock_cap: u32, tables: &mut ModTables) -> RawRow {
    let mut row: RawRow = BTreeMap::new();
    // Rational cofactor residues are input-independent: reduce once per term.
    let rmods: Vec<Vec<[u64; 2]>> = op
        .terms()
        .iter()
        .map(|t| {
            t.coeff
                .terms()
                .iter()
                .map(|tc| [0, 1].map(|i| rational_mod(&tc.r, PRIMES[i])))
                .collect()
        })
        .collect();
    let mut ks: Vec<u32> = Vec::new();
    for fock in fock_grid(sig.fock, fock_cap) {
        'term: for (t, tmods) in op.terms().iter().zip(&rmods) {
            let mut m = Vec::with_capacity(sig.fock);
            for i in 0..sig.fock {
                if fock[i] < t.c[i] {
                    continue 'term;
                }
                m.push(fock[i] - t.c[i]);
            }
            let out = BasisIndex::new(
                t.z.clone(),
                m.iter().zip(&t.a).map(|(p, q)| p + q).collect(),
            );
            'tcterm: for (tc, rm) in t.coeff.terms().iter().zip(tmods) {
                let mut e = tc.v;
                ks.clear();
                ks.extend(tc.consts.iter().copied());
                for (i, f) in tc.factors.iter().enumerate() {
                    e += f.u * m[i] as i64;
                    for &(d, c) in &f.atoms {
                        let k = d as i64 * m[i] as i64 + c;
                        assert!(k >= 0, "negative radicand exponent at evaluation");
                        if k == 0 {
                            continue 'tcterm;
                        }
                        ks.push(k as u32);
                    }
                }
                ks.sort_unstable();
                let mut val = tables.qpow(e);
                for i in 0..2 {
                    val[i] = mul_mod(val[i], rm[i], PRIMES[i]);
                }
                let mut atoms: Vec<u32> = Vec::new();
                let mut idx = 0;
                while idx < ks.len() {
                    let k = ks[idx];
                    let mut cnt = 1;
                    while idx + cnt < ks.len() && ks[idx + cnt] == k {
                        cnt += 1;
                    }
                    for _ in 0..cnt / 2 {
                        let rad = tables.radicand(k);
                        for i in 0..2 {
                            val[i] = mul_mod(val[i], rad[i], PRIMES[i]);
                        }
                    }
                    if cnt % 2 == 1 {
                        atoms.push(k);
                    }
                    idx += cnt;
                }
                let slot =
                    row.entry((fock.clone(), out.clone(), atoms)).or_insert([0; 2]);
                for i in 0..2 {
                    slot[i] = add_mod(slot[i], val[i], PRIMES[i]);
                }
            }
        }
    }
    row
}

/// Square classes of radical products at a fixed rational q0.
///
/// prod_{k in A} sqrt(1 - q0^{2k}) and prod_{k in B} sqrt(1 - q0^{2k}) are
/// rational multiples of one another exactly when the ratio of the products
/// of the radicands is a square in Q, and square roots of rationals from
/// distinct square classes are linearly independent over Q. Each class keeps
/// the first set encountered as its representative; resolving a set against a
/// known class returns the exact rational ratio to fold into the entry.
struct SquareClasses {
    q0: BigRational,
    radicands: BTreeMap<u32, BigRational>,
    reps: Vec<BigRational>,
    resolved: HashMap<Vec<u32>, (u32, [u64; 2])>,
}

impl SquareClasses {
    fn new(q0: &BigRational) -> Self {
        SquareClasses {
            q0: q0.clone(),
            radicands: BTreeMap::new(),
            // Class 0 is the rational class (empty radical product).
            reps: vec![BigRational::one()],
            resolved: HashMap::new(),
        }
    }

    fn radicand_product(&mut self, atoms: &[u32]) -> BigRational {
        let mut prod = BigRational::one();
        for &k in atoms {
            let a = self.radicands.entry(k).or_insert_with(|| {
                BigRational::one() - rational_pow(&self.q0, 2 * k)
            });
            assert!(a.is_positive(), "radicand must be positive for 0 < q0 < 1");
            prod *= &*a;
        }
        prod
    }

    fn resolve(&mut self, atoms: &[u32]) -> (u32, [u64; 2]) {
        if let Some(hit) = self.resolved.get(atoms) {
            return *hit;
        }
        let prod = self.radicand_product(atoms);
        let mut found = None;
        for (id, rep) in self.reps.iter().enumerate() {
            let ratio = &prod / rep;
            let num = ratio.numer();
            let den = ratio.denom();
            let sn = num.sqrt();
            let sd = den.sqrt();
            if &sn * &sn == *num && &sd * &sd == *den {
                let mods =
                    [0, 1].map(|i| mul_mod(
                        bigint_mod(&sn, PRIMES[i]),
                        inv_mod(bigint_mod(&sd, PRIMES[i]), PRIMES[i]),
                        PRIMES[i],
                    ));
                found = Some((id as u32, mods));
                break;
            }
        }
        let entry = found.unwrap_or_else(|| {
            self.reps.push(prod);
            ((self.reps.len() - 1) as u32, [1, 1])
        });
        self.resolved.insert(atoms.to_vec(), entry);
        entry
    }
}

/// Exact sparse elimination modulo one prime. Pivot rows are stored monic at
/// their leading column; reduction walks strictly increasing leading columns,
/// so it terminates, and every keep/drop decision is exact.
struct ModEliminator {
    p: u64,
    pivots: HashMap<usize, Vec<(usize, u64)>>,
}

impl ModEliminator {
    fn new(p: u64) -> Self {
        ModEliminator { p, pivots: HashMap::new() }
    }

    fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// Returns true when the row contributes a new pivot.
    fn try_insert(&mut self, mut row: Vec<(usize, u64)>) -> bool {
        loop {
            let Some(&(lead, lv)) = row.first() else {
                return false;
            };
            match self.pivots.get(&lead) {
                Some(pivot) => row = sub_scaled(&row, pivot, lv, self.p),
                None => {
                    let inv = inv_mod(lv, self.p);
                    for e in &mut row {
                        e.1 = mul_mod(e.1, inv, self.p);
                    }
                    self.pivots.insert(lead, row);
                    return true;
                }
            }
        }
    }
}

/// row - coeff * pivot modulo p, both sorted by column id; zero entries are
/// dropped. The pivot is monic at its leading column, so that column cancels.
fn sub_scaled(
    row: &[(usize, u64)],
    pivot: &[(usize, u64)],
    coeff: u64,
    p: u64,
) -> Vec<(usize, u64)> {
    let mut out = Vec::with_capacity(row.len() + pivot.len());
    let mut i = 0;
    let mut j = 0;
    while i < row.len() || j < pivot.len() {
        if j >= pivot.len() || (i < row.len() && row[i].0 < pivot[j].0) {
            out.push(row[i]);
            i += 1;
        } else if i >= row.len() || pivot[j].0 < row[i].0 {
            let v = mul_mod(coeff, pivot[j].1, p);
            if v != 0 {
                out.push((pivot[j].0, p - v));
            }
            j += 1;
        } else {
            let sub = mul_mod(coeff, pivot[j].1, p);
            let v = ((p as u128 + row[i].1 as u128 - sub as u128) % p as u128) as u64;
            if v != 0 {
                out.push((row[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

/// Per-point elimination state: residue tables, square classes, interned
/// columns, and one eliminator pair per probed cap. A column's cap is the
/// largest Fock coordinate of its input, so the rank at any smaller box is
/// the rank of the same rows restricted to columns within that box.
struct PointState {
    tables: ModTables,
    classes: SquareClasses,
    col_ids: HashMap<(Vec<u32>, BasisIndex, u32), usize>,
    col_cap: Vec<u32>,
    elims: Vec<[ModEliminator; 2]>,
}

impl PointState {
    fn new(q0: &BigRational, variants: usize) -> Self {
        PointState {
            tables: ModTables::new(q0),
            classes: SquareClasses::new(q0),
            col_ids: HashMap::new(),
            col_cap: Vec::new(),
            elims: (0..variants)
                .map(|_| [ModEliminator::new(PRIMES[0]), ModEliminator::new(PRIMES[1])])
                .collect(),
        }
    }

    /// Folds radical atom sets into square classes, interns columns on first
    /// encounter, and feeds the row to each cap variant's eliminators (rows
    /// restricted to the variant's input box). Returns true when either prime
    /// sees a new pivot at the top cap.
    fn absorb(&mut self, raw: RawRow, caps: &[u32]) -> bool {
        let mut folded: BTreeMap<(Vec<u32>, BasisIndex, u32), [u64; 2]> = BTreeMap::new();
        for ((fock, out, atoms), vals) in raw {
            let (class, ratio) = self.classes.resolve(&atoms);
            let slot = folded.entry((fock, out, class)).or_insert([0; 2]);
            for i in 0..2 {
                slot[i] = add_mod(slot[i], mul_mod(vals[i], ratio[i], PRIMES[i]), PRIMES[i]);
            }
        }
        let mut cols: Vec<(usize, u32, [u64; 2])> = folded
            .into_iter()
            .map(|(key, vals)| {
                let need = key.0.iter().copied().max().unwrap_or(0);
                let next = self.col_ids.len();
                let id = *self.col_ids.entry(key).or_insert(next);
                if id == self.col_cap.len() {
                    self.col_cap.push(need);
                }
                (id, self.col_cap[id], vals)
            })
            .collect();
        cols.sort_by_key(|&(c, _, _)| c);
        let mut keep = false;
        let top = caps.len() - 1;
        for (vi, &cap) in caps.iter().enumerate() {
            for i in 0..2 {
                let row: Vec<(usize, u64)> = cols
                    .iter()
                    .filter(|&&(_, need, v)| need <= cap && v[i] != 0)
                    .map(|&(c, _, v)| (c, v[i]))
                    .collect();
                if self.elims[vi][i].try_insert(row) && vi == top {
                    keep = true;
                }
            }
        }
        keep
    }

    fn rank_at(&self, vi: usize) -> usize {
        self.elims[vi].iter().map(ModEliminator::rank).max().unwrap_or(0)
    }
}

/// Greedy independent-subset selection in candidate order, probing several
/// nested Fock boxes from one row build at the largest. Returns the kept
/// indices (rows contributing a pivot at the top cap for any point/prime)
/// and the measured rank per cap (maximum over points).
fn select_at_caps(
    candidates: &[Operator],
    sig: Signature,
    caps: &[u32],
    points: &[BigRational],
) -> (Vec<usize>, Vec<usize>) {
    let trace = std::env::var_os("QGROWTH_TRACE").is_some();
    let mut raw_time = std::time::Duration::ZERO;
    let mut fold_time = std::time::Duration::ZERO;
    let top = *caps.last().expect("at least one cap");
    let mut states: Vec<PointState> =
        points.iter().map(|q0| PointState::new(q0, caps.len())).collect();
    let mut kept = Vec::new();
    for (idx, op) in candidates.iter().enumerate() {
        let mut keep = false;
        for st in &mut states {
            let t0 = std::time::Instant::now();
            let raw = raw_row(op, sig, top, &mut st.tables);
            raw_time += t0.elapsed();
            let t1 = std::time::Instant::now();
            if st.absorb(raw, caps) {
                keep = true;
            }
            fold_time += t1.elapsed();
        }
        if keep {
            kept.push(idx);
        }
    }
    let ranks: Vec<usize> = (0..caps.len())
        .map(|vi| states.iter().map(|st| st.rank_at(vi)).max().unwrap_or(0))
        .collect();
    if trace {
        eprintln!(
            "    select: {} candidates, caps {:?}, ranks {:?}, rows {:.2}s, elim {:.2}s",
            candidates.len(),
            caps,
            ranks,
            raw_time.as_secs_f64(),
            fold_time.as_secs_f64()
        );
    }
    (kept, ranks)
}

/// Rank of a finite operator family on the given Fock box: the maximum over
/// the backend's evaluation points.
pub fn rank_of_operators(
    ops: &[Operator],
    fock_cap: u32,
    backend: &Backend,
) -> Result<usize, GrowthError> {
    let Some(first) = ops.first() else {
        return Ok(0);
    };
    let sig = first.signature();
    if let Some(bad) = ops.iter().find(|o| o.signature() != sig) {
        return Err(GrowthError::MixedSignatures(sig, bad.signature()));
    }
    let (_, ranks) = select_at_caps(ops, sig, &[fock_cap], &backend.points());
    Ok(ranks[0])
}

// ---------------------------------------------------------------------------
// Span growth
// ---------------------------------------------------------------------------

/// d(m) = dim span(Xi^m) for m = 1..=m_max.
///
/// The basis is maintained incrementally: candidates at step m are the kept
/// basis of step m-1 followed by its products with each generator, in order,
/// deduplicated by normal form. The previous basis is re-selected first, so
/// d(m) is nondecreasing and each step reuses the last stabilized window as
/// its starting attempt. A row enters the series once its rank is unchanged
/// under two consecutive window enlargements.
pub fn span_growth(
    gens: &GeneratorSet,
    m_max: u32,
    policy: &WindowPolicy,
    backend: &Backend,
) -> Result<GrowthSeries, GrowthError> {
    if m_max < 1 {
        return Err(GrowthError::BadStepCount);
    }
    let sig = gens.signature();
    let points = backend.points();
    let mut rows = Vec::with_capacity(m_max as usize);
    let mut basis: Vec<Operator> = Vec::new();
    let mut attempt_floor = 0u32;
    for m in 1..=m_max {
        let mut candidates: Vec<Operator> = Vec::new();
        let mut seen: HashSet<String> = HashSet::new();
        let push = |op: Operator, candidates: &mut Vec<Operator>, seen: &mut HashSet<String>| {
            if !op.is_zero() && seen.insert(op.dump()) {
                candidates.push(op);
            }
        };
        if m == 1 {
            for g in gens.ops() {
                push(g.clone(), &mut candidates, &mut seen);
            }
        } else {
            for b in &basis {
                push(b.clone(), &mut candidates, &mut seen);
            }
            let products: Vec<Operator> = basis
                .par_iter()
                .flat_map(|b| {
                    gens.ops()
                        .par_iter()
                        .map(move |g| b.compose(g).expect("common signature"))
                })
                .collect();
            for p in products {
                push(p, &mut candidates, &mut seen);
            }
        }

        let trace = std::env::var_os("QGROWTH_TRACE").is_some();
        if trace {
            eprintln!("  m={}: {} candidates", m, candidates.len());
        }
        // One row build at the top of each probe triple serves all three
        // caps; ranks at the smaller boxes come from column restriction.
        let mut outcome: Option<(u32, Vec<usize>, usize)> = None;
        let mut last_d = 0;
        let mut attempt = attempt_floor;
        while attempt + 2 <= policy.budget {
            let caps =
                [policy.at(attempt).1, policy.at(attempt + 1).1, policy.at(attempt + 2).1];
            let t0 = std::time::Instant::now();
            let (kept, ranks) = select_at_caps(&candidates, sig, &caps, &points);
            if trace {
                eprintln!(
                    "  m={} attempts {}..{} caps {:?} ranks {:?} ({:.2}s)",
                    m,
                    attempt,
                    attempt + 2,
                    caps,
                    ranks,
                    t0.elapsed().as_secs_f64()
                );
            }
            last_d = ranks[2];
            if ranks[0] == ranks[1] && ranks[1] == ranks[2] {
                outcome = Some((attempt, kept, ranks[2]));
                break;
            }
            attempt += 1;
        }
        match outcome {
            None => {
                return Err(GrowthError::UnstableWindow { m, last_d });
            }
            Some((first_of_triple, kept, d)) => {
                attempt_floor = first_of_triple;
                let (rz, rf) = policy.at(first_of_triple + 2);
                if let Some(prev) = rows.last() {
                    let prev: &GrowthRow = prev;
                    debug_assert!(d >= prev.d, "span dimension decreased");
                    debug_assert!(d <= prev.d * gens.len(), "span grew faster than |Xi|");
                }
                rows.push(GrowthRow { m, d, window_rz: rz, window_rf: rf, stable: true });
                basis = kept.into_iter().map(|i| candidates[i].clone()).collect();
            }
        }
    }
    Ok(GrowthSeries { rows, backend: backend.clone() })
}

// ---------------------------------------------------------------------------
// Degree detection
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct DegreeEstimate {
    /// Exact growth degree when some order of finite differences is constant
    /// over at least three trailing rows.
    pub degree: Option<u32>,
    /// The trailing values of the difference order that settled (or of the
    /// deepest order inspected when none did).
    pub diff_tail: Vec<i64>,
    /// Log-log slope of d against m over the last half of the series.
    pub loglog_slope: f64,
    /// Root-mean-square residual of the log-log fit.
    pub loglog_residual: f64,
}

impl DegreeEstimate {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "degree": self.degree,
            "diff_tail": self.diff_tail,
            "loglog_slope": self.loglog_slope,
            "loglog_residual": self.loglog_residual,
        })
    }
}

const MIN_ROWS_FOR_DEGREE: usize = 5;
const CONSTANT_TAIL: usize = 3;

/// Growth degree from a stabilized series: the smallest t whose t-th finite
/// differences are constant over the trailing rows (exact for eventually
/// polynomial d(m)); the log-log slope is attached as a diagnostic either way.
pub fn degree_detect(series: &GrowthSeries) -> Result<DegreeEstimate, GrowthError> {
    let stable: Vec<(u32, usize)> = series
        .rows
        .iter()
        .filter(|r| r.stable)
        .map(|r| (r.m, r.d))
        .collect();
    if stable.len() < MIN_ROWS_FOR_DEGREE {
        return Err(GrowthError::InsufficientRows {
            have: stable.len(),
            need: MIN_ROWS_FOR_DEGREE,
        });
    }
    debug_assert!(
        stable.windows(2).all(|w| w[1].0 == w[0].0 + 1),
        "degree detection expects consecutive m"
    );
    let (slope, residual) = loglog_fit(&stable);
    let mut level: Vec<i64> = stable.iter().map(|&(_, d)| d as i64).collect();
    let mut order = 0u32;
    let mut last_tail: Vec<i64> = tail(&level);
    while level.len() >= CONSTANT_TAIL {
        let t = tail(&level);
        if t.iter().all(|&v| v == t[0]) {
            return Ok(DegreeEstimate {
                degree: Some(order),
                diff_tail: t,
                loglog_slope: slope,
                loglog_residual: residual,
            });
        }
        last_tail = t;
        level = level.windows(2).map(|w| w[1] - w[0]).collect();
        order += 1;
    }
    Ok(DegreeEstimate {
        degree: None,
        diff_tail: last_tail,
        loglog_slope: slope,
        loglog_residual: residual,
    })
}

fn tail(level: &[i64]) -> Vec<i64> {
    level[level.len().saturating_sub(CONSTANT_TAIL)..].to_vec()
}

fn loglog_fit(rows: &[(u32, usize)]) -> (f64, f64) {
    let half = &rows[rows.len() / 2..];
    let pts: Vec<(f64, f64)> = half
        .iter()
        .map(|&(m, d)| ((m as f64).ln(), (d as f64).ln()))
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return (0.0, 0.0);
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let rss: f64 = pts
        .iter()
        .map(|p| {
            let r = p.1 - (slope * p.0 + intercept);
            r * r
        })
        .sum();
    (slope, (rss / n).sqrt())
}

// ---------------------------------------------------------------------------
// Dimension reports
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct GkdimReport {
    pub family: WeylFamily,
    pub longest_length: u64,
    pub growth_value: u64,
    pub manifold_dim: u64,
    pub matches: bool,
}

/// The closed-form growth value 2*l(w0) + n against the compact group's
/// manifold dimension.
pub fn gkdim_report(fam: WeylFamily) -> GkdimReport {
    let longest_length = longest_element(fam).length();
    let growth_value = 2 * longest_length + fam.rank() as u64;
    let manifold_dim = fam.manifold_dim();
    GkdimReport {
        family: fam,
        longest_length,
        growth_value,
        manifold_dim,
        matches: growth_value == manifold_dim,
    }
}

impl GkdimReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "family": self.family.family().to_string(),
            "rank": self.family.rank(),
            "longest_length": self.longest_length,
            "growth_value": self.growth_value,
            "manifold_dim": self.manifold_dim,
            "match": self.matches,
        })
    }
}

impl fmt::Display for GkdimReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}: longest length {}, growth value {}, manifold dim {}, match {}",
            self.family.family(),
            self.family.rank(),
            self.longest_length,
            self.growth_value,
            self.manifold_dim,
            self.matches
        )
    }
}
