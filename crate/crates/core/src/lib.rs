//! Exact-arithmetic and numerical verification engine for (y, q)-series:
//! truncated bivariate Laurent arithmetic over exact rationals, classical and
//! twisted Eisenstein / theta / eta expansions, affine sl2 character families
//! at levels 1 and -4/3, the flat-connection systems and scalar MLDEs they
//! satisfy, and complex-numerical checks of Jacobi-group transformation laws.
//!
//! All values are immutable after construction and all operations are pure;
//! everything is `Send + Sync` and single-threaded runs are bit-identical to
//! any parallel schedule.

pub mod characters;
pub mod error;
pub mod mlde;
pub mod numeric;
pub mod qseries;
pub mod rational;
pub mod series;
pub mod special;

pub use error::{EngineError, Result};
pub use qseries::QSeries;
pub use rational::{fmt_rat, parse_rat, rat, rat_int, Rat};
pub use series::{Direction, SeriesBox, SeriesJson, WindowReport};
