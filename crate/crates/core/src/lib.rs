//! Verification toolkit for a higher-order probabilistic stateful
//! λ-calculus with a graded monadic type-and-effect system: type checker,
//! proof checkers for three program logics (union bound, expectation,
//! relational), an exact finite-distribution semantics, and an independent
//! semantic oracle that validates every checked judgment.

pub mod certificate;
pub mod config;
pub mod discharge;
pub mod logics;
pub mod kernel;
pub mod oracle;
pub mod semantics;
pub mod typecheck;
pub mod rat;
pub mod syntax;

pub use config::{Def, Program, ProgramConfig};
pub use rat::{ExtRat, Rat};
