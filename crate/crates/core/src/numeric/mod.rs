//! Numerical building blocks: quadrature, root bracketing, special functions.

pub mod quad;
pub mod roots;
pub mod special;
