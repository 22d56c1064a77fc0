//! Runtime and verification toolkit for reactive-rule frameworks.

pub mod syntax;
pub mod temporal;
pub mod engine;
pub mod verify;
pub mod random;
pub mod cli;
pub mod model;
pub mod state;
