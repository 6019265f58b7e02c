//! Graded restricted Cartan-type Lie algebras over GF(p) and the structure
//! of their adjoint modules over the Witt algebra W(1).

pub mod cartan;
pub mod cli;
pub mod error;
pub mod ffla;
pub mod graded;
pub mod poly;
pub mod theorems;
pub mod witt;
pub mod witt_rep;

pub use error::{Error, Result};
