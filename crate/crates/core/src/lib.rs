// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod gesture;
pub mod planner;
pub mod referent;
pub mod registry;
pub mod scene;
pub mod seed;
pub mod sim;
