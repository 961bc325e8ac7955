// Negated float comparisons below deliberately treat NaN as invalid.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod distributions;
pub mod ellipse;
pub mod estimation;
pub mod harness;
pub mod tree;
