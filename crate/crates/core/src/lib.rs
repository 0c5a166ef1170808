//! Significance testing of joint (pairwise) variable effects for binary
//! classification.
//!
//! Variables are partitioned into disjoint pairs by greedily taking the pair
//! with the largest two-variable Mahalanobis distance between class means.
//! Each pair is then tested by permuting class labels, and pairs are ranked
//! by p-value. The crate also estimates the FDR of the ranked list, ships the
//! marginal two-sample t ranking as a comparator, and generates the AR(1),
//! block-diagonal and independent simulation designs used to evaluate it.
//!
//! ```
//! use sigjeff::pipeline::{analyze, AnalysisConfig};
//! use sigjeff::simdata::{generate, Design, SimSpec};
//!
//! let sim = generate(&SimSpec::new(Design::Ar1, 60, 10, 7)).unwrap();
//! let config = AnalysisConfig { permutations: 20, ..Default::default() };
//! let analysis = analyze(&sim.data, &config, 1).unwrap();
//! assert_eq!(analysis.ranked.pairs.len(), 30);
//! ```

pub mod data;
pub mod error;
pub mod eval;
pub mod fdr;
pub mod io;
pub mod marginal;
pub mod partition;
pub mod permutation;
pub mod pipeline;
pub mod simdata;
pub mod stats;

pub use data::{Class, LabeledMatrix};
pub use error::{Error, Result};
pub use partition::Partition;
pub use permutation::{PValueMethod, PermutationConfig, PermutationResult, RankedList};
pub use stats::{PairStat, TwoSampleSummary};
