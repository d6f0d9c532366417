//! Exact-arithmetic verification kernel for p-adic lattice filtrations,
//! Eisenstein ideals, local models, displays and orbital integrals, all at
//! finite pi-adic precision.

pub mod zp;
pub mod linalg;
pub mod poly;
pub mod algebra;
pub mod tower;
pub mod rmod;
pub mod eisenstein;
pub mod witt;
pub mod latmodel;
pub mod display;
pub mod btpair;
pub mod orbital;
pub mod cli;
