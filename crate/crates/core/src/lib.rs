//! The nu-metric between single-input single-output plants given by coprime
//! factorizations over the Hardy algebra of the right half-plane.
//!
//! Plants are pairs `(n, d)` of bounded holomorphic functions. The chordal
//! distance is estimated as a supremum over the imaginary axis, and the index
//! condition is decided from winding numbers on disc circles `|z| = r` as
//! `r -> 1`, after the Möbius transplant `s = (1+z)/(1-z)`.

pub mod boundary;
pub mod expr;
pub mod index;
pub mod numetric;
pub mod plants;
pub mod stability;
pub mod verify;

pub use boundary::{CircleConfig, GridConfig};
pub use expr::{parse, Complex, EvalFailure, EvalOutcome, Expr};
pub use index::{index_of_pair, winding_on_circle, WindingReport};
pub use numetric::{kappa_distance, nu_metric, re_positivity_check, NuConfig, NuReport};
pub use plants::{Factorization, PlantSpec};
pub use stability::{closed_loop_check, robustness_probe, LoopReport};
