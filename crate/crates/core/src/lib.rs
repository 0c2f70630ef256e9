//! Band spectra of square-lattice quantum graphs with a general self-adjoint
//! vertex coupling.

pub mod asymptotics;
pub mod cli;
pub mod coupling;
pub mod fiber;
pub mod linalg;
pub mod roots;
pub mod spectrum;
