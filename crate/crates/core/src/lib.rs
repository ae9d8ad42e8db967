#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit_graph;
pub mod comp_op;
pub mod eigen;
pub mod exotic;
pub mod measures;
pub mod moments;
pub mod qspecial;
pub mod scalar;
