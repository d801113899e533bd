//! Differential testing of interactive HDL debuggers.

pub mod action;
pub mod adapter;
pub mod bundle;
pub mod campaign;
pub mod diff;
pub mod fixtures;
pub mod hdl;
pub mod reduce;
pub mod rtl;
pub mod sim;
pub mod trace;
