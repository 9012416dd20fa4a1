// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod balancing;
pub mod bounds;
pub mod cheating;
pub mod matlin;
pub mod protocol;
pub mod sdp;

/// Exact rational arithmetic for closed-form cheating values and bounds.
pub type Rational = num_rational::Ratio<i64>;
