pub mod error;
pub mod extremal;
pub mod families;
pub mod functional;
pub mod hessian;
mod interp;
pub mod model;
pub mod profile;
pub mod quadrature;
pub mod scalar;
pub mod special;
pub mod sweep;
pub mod table;
pub mod certify;
pub mod config;

pub use error::{LabError, Result};

pub type Real = f64;
pub type SpecialValue64 = special::SpecialValue<f64>;
pub type GaussLegendre64 = quadrature::GaussLegendre<f64>;
