//! A desk-scale numerical laboratory for level-set characterizations of
//! higher-order smoothness.
//!
//! The library evaluates weak-type functionals of the form
//!
//! ```text
//!     Φ_f(λ) = λ · ‖ [ ∫ 1_{E_{λ}}(·, h) |h|^{γ-n} dh ]^{1/q} ‖_X ,
//!     E_λ = { (x, h) : |Δ^k_h f(x)| > λ |h|^{k + γ/q} } ,
//! ```
//!
//! where `Δ^k_h` is the k-th forward difference and `X` ranges over a
//! catalog of ball Banach function spaces (Lebesgue, weighted, Lorentz,
//! variable-exponent, mixed-norm, Orlicz, Morrey-type, Herz, Orlicz-slice).
//! It verifies, at modest grid resolutions, the companion facts that make
//! such functionals useful:
//!
//! * `sup_λ Φ_f(λ)` is equivalent to `‖ |∇^k f| ‖_X`,
//! * `Φ_f(λ)` converges, in the appropriate λ-direction, to an integral of
//!   the k-th directional derivative over the unit sphere,
//! * fractional Gagliardo–Nirenberg interpolation between such functionals,
//! * sharpness of the supported parameter range (log-divergent growth of a
//!   truncated witness integral),
//! * the collapse of strong fractional seminorms at integer smoothness,
//! * sparse dyadic domination with Muckenhoupt weights.
//!
//! Modules are organized bottom-up: [`field`] (function catalog and grids),
//! [`calculus`] (differences and symbols), [`spaces`] (norms), [`weights`]
//! (Muckenhoupt machinery), [`dyadic`] (shifted grids, local approximation,
//! sparse sums), [`bsvy`] (the functionals themselves), and [`harness`]
//! (scenario configs, suites, reports).

pub mod bsvy;
pub mod calculus;
pub mod dyadic;
pub mod error;
pub mod field;
pub mod harness;
mod num;
pub mod spaces;
pub mod weights;

pub use error::{Error, Result};
