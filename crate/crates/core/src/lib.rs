//! Scalar conservation laws and their 2x2 system analogues in Eulerian form,
//! their Lagrangian flow maps, and the action functionals those maps extremise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eulerian;
pub mod export;
pub mod flow_map;
pub mod flux;
pub mod grid;
pub mod numerics;
pub mod reference;
pub mod systems;
pub mod temple;
pub mod variational;

pub use error::{Error, Result};
pub use grid::{Boundary, GridFunction};
