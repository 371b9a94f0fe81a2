//! Private aggregation of time-stamped sensor readings.
//!
//! Each contributor perturbs its reading with budget-aware Laplace noise,
//! the batch is reordered by a Mallows-model shuffler (or a uniform cyclic
//! shuffle when the grouping gives no useful structure), and the fusion
//! side estimates the mean from the anonymized batch.
//!
//! ```
//! use rase::{randomizer::*, pipeline::*};
//!
//! let range = DataRange::new(3.9, 178.3).unwrap();
//! let config = RunConfig::new(
//!     3,
//!     range,
//!     PrecisionRequirement::new(0.5, 0.9).unwrap(),
//!     PrivacyBudget::new(1.0, 1.0).unwrap(),
//!     2,
//! )
//! .unwrap();
//! let readings: Vec<SensorReading> = [(2, 40.0), (1, 12.5), (3, 90.0)]
//!     .into_iter()
//!     .map(|(id, state)| SensorReading { contributor_id: id, timestamp: 7, state })
//!     .collect();
//! let round = run_rase(&readings, &config, 42).unwrap();
//! assert_eq!(round.shuffled.values.len(), 3);
//! ```

pub mod error;
pub mod estimator;
pub mod experiment;
pub mod grouping;
pub mod mallows;
pub mod permutation;
pub mod pipeline;
pub mod randomizer;
pub mod seed;
pub mod shuffler;
pub mod trace;

pub use error::{Error, Result};
pub use permutation::Permutation;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/permutations.md")]
    mod permutations {}
    #[doc = include_str!("../../../book/src/randomizer.md")]
    mod randomizer {}
    #[doc = include_str!("../../../book/src/grouping.md")]
    mod grouping {}
    #[doc = include_str!("../../../book/src/mallows.md")]
    mod mallows {}
    #[doc = include_str!("../../../book/src/shuffler.md")]
    mod shuffler {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    mod estimators {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
