//! Growth of quantized coordinate rings via shift-operator models.
//!
//! The library builds concrete operator realizations of the coordinate rings
//! of the compact quantum groups behind the classical families SU(n+1),
//! SP(2n) and SO(2n)/Spin(2n), and measures the growth of finitely generated
//! subspaces to read off Gelfand-Kirillov dimensions.
//!
//! Module map:
//! - [`weyl`]: signed-permutation Weyl groups, reduced words, longest
//!   elements, the staircase parts decomposition, coset representatives.
//! - [`scalars`]: exact scalar arithmetic in the ring generated by q-powers
//!   and the square roots sqrt(1 - q^{2k}).
//! - [`oper`]: shift operators on tensor products of bilateral and unilateral
//!   sequence spaces, corepresentation matrices, twisted convolution.
//! - [`growth`]: windowed matricization ranks, growth series d(m), degree
//!   detection, dimension reports.
//! - [`witness`]: path-uniqueness witnesses, similarity checks against
//!   twisted shift profiles, ladder-operator witnesses, Vandermonde
//!   certificates.
//! - [`quotient`]: torus subgroups cut out by integer annihilator lattices,
//!   Smith normal form, quotient dimension bookkeeping.

pub mod growth;
pub mod numeric;
pub mod oper;
pub mod quotient;
pub mod scalars;
pub mod weyl;
pub mod witness;
