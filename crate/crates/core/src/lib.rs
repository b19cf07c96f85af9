//! A numerical laboratory for Orlicz maximal operators over rectangle bases.
//!
//! The crate is organised bottom-up:
//!
//! * [`young`] - Young functions, inverses, complementary functions and
//!   structural probes.
//! * [`bp`] - tail-integral classification of the `B_p` and strong `B_p^*`
//!   growth conditions.
//! * [`grid`] - uniform grids, grid-aligned rectangles, summed-area tables,
//!   Luxemburg norms and the text grid format.
//! * [`maximal`] - strong, cube, dyadic, Orlicz and multilinear maximal
//!   functions computed exhaustively on grids.
//! * [`weights`] - estimators for `A_p`, bump, power-bump and Sawyer constants
//!   and the condition (A) sampler.
//! * [`covering`] - scattered subfamily selection and overlap checks for
//!   rectangle families.
//! * [`verify`] - end-to-end probes tying the pieces together.
//!
//! Every operation is a pure function of immutable inputs; parallel code paths
//! reduce with `max`, so results do not depend on the number of threads.

pub mod bp;
pub mod covering;
pub mod error;
pub mod grid;
pub mod maximal;
pub mod verify;
pub mod weights;
pub mod young;

pub use error::{Error, Result};
