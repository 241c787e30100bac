//! Simulation study of complete-case analysis versus chained-equations
//! multiple imputation when survey covariates are missing for part of a
//! register-linked sample.

pub mod data;
pub mod error;
pub mod estimators;
pub mod rng;
pub mod simgen;

pub use data::{Column, ColumnKind, Dataset, MaskMode};
pub use error::{Error, Result};
pub use rng::RngStream;

pub mod impute;
pub mod pooling;
pub mod scenario;

/// Maps `f` over `items`, on the rayon pool when the `parallel` feature is on.
/// Output order always matches input order.
pub(crate) fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
