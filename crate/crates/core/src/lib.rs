#![no_std]

extern crate alloc;

pub type Matrix = nalgebra::DMatrix<f64>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod bayes;
pub mod expm;
pub mod model;
pub mod policy;
pub mod powers;
pub mod qvi;
pub mod sim;
pub mod solver;
pub mod special;
