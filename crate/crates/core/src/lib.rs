//! Hausdorff log-moment sequences `w_n = ∫_[0,1] t^{log n} dμ(t)`: membership
//! tests, measure recovery, positivity certificates for Dirichlet polynomials,
//! completely monotone functions and Helson matrices.

// Argument checks use `!(x >= 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cmono;
pub mod dirichlet;
pub mod error;
mod fit;
pub mod helson;
pub mod logmoment;
pub mod measure;
pub mod nnls;
pub mod quadrature;

pub use cmono::{CompletelyMonotoneFn, DirichletPair};
pub use dirichlet::{Certification, DirichletPolynomial, PositivityCertificate};
pub use error::{Error, Result};
pub use helson::HelsonTruncation;
pub use logmoment::{MembershipConfig, MembershipReport, MomentSequence, Verdict};
pub use measure::{Domain, FamilyKind, GridMeasure, Measure, MeasureFamily};
