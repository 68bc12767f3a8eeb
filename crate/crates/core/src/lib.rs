//! Ground states of the Hartree equation `-Delta u + u = (I_2 * u^2) u` in
//! dimensions 3, 4, 5, the multipole structure of the Newton potential, the
//! sector spectra of the linearized operator, and semiclassical diagnostics.

pub mod discrete;
pub mod error;
pub mod ground_state;
pub mod newton;
pub mod ode;
pub mod quadrature;
pub mod radial;
pub mod semiclassical;
pub mod spectrum;
pub mod sphere;

pub use error::{HartreeError, Result};
