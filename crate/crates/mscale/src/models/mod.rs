//! The three concrete eigen-systems: a double-barrier GBM, a Vasicek short
//! rate and a jump-to-default CEV stock.

pub mod barrier;
pub mod jdcev;
pub mod vasicek;

pub use barrier::BarrierModel;
pub use jdcev::{JdcevModel, JdcevRegime};
pub use vasicek::VasicekModel;
