//! Cone fixed-point analysis for `(k, n-k)` boundary value problems.
//!
//! The crate evaluates closed-form Green's kernels, builds the envelope
//! `Φ(s) k1(t) ≤ G(t,s) ≤ Φ(s) k2(t)`, computes the cone constants, checks
//! existence/multiplicity hypotheses for concrete nonlinearities and locates
//! the solutions they predict with a Nyström discretization.

pub mod certificate;
pub mod config;
pub mod corpus;
pub mod envelope;
pub mod error;
pub mod expr;
pub mod float_serde;
pub mod hypotheses;
pub mod kernels;
pub mod nonlinearity;
pub mod numeric;
pub mod quadrature;
pub mod report;
pub mod solver;
pub mod spectrum;

pub use envelope::{default_i1, envelope_closed_form, envelope_for, envelope_numeric, normalized, Envelope, NumericGrid};
pub use error::{Error, Result};
pub use hypotheses::{HypothesisId, HypothesisReport, TheoremId, Thresholds, Verdict};
pub use kernels::{kernel_for, phi, GreenKernel, ProblemId};
pub use nonlinearity::Nonlinearity;
pub use quadrature::{cone_constants, ConeConstants};
