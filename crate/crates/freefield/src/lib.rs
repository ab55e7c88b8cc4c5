//! Free-field quantization laboratory on discretized ultrastatic spacetimes.
//!
//! The crate builds, in order: a Lorentzian exterior calculus on product
//! cubical lattices (`lattice`), retarded/advanced/causal propagators for the
//! wave, Proca, Lorenz-gauge Maxwell and Dirac operators (`dynamics`,
//! `dirac`), the Lorenz gauge quotient machinery (`gauge`), symplectic and
//! sesquilinear structures with the symbolic Weyl and CAR algebras
//! (`algebra`), quasifree ground states on truncated Fock spaces (`states`),
//! and numerical vacuum-cyclicity experiments (`rs`). `config` and `report`
//! carry the JSON surface used by the `freefield` binary.
//!
//! All operations are pure functions of immutable inputs; nothing here keeps
//! shared mutable state, so concurrent read access is safe throughout.

pub mod error;
pub mod linalg;
pub mod lattice;
pub mod dynamics;
pub mod dirac;
pub mod gauge;
pub mod algebra;

pub use error::{Error, Result};
