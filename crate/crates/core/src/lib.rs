//! Data-driven calibration of penalties for model selection by the
//! minimal-penalty heuristic.
//!
//! Given a collection of estimators with their empirical risks and penalty
//! shapes, the penalty constant is estimated from the behaviour of the
//! selected complexity as the constant grows (jump calibrators in [`jump`])
//! or from the slope of the risk against complexity ([`slope`]). The final
//! model is then picked with the optimal penalty shape ([`select`]).
//!
//! ```
//! use penmin::collection::{Collection, EstimatorRecord, ModelId};
//! use penmin::path::compute_path;
//!
//! let recs = [(3.0, 1.0), (1.0, 2.0), (0.0, 3.0)]
//!     .iter()
//!     .enumerate()
//!     .map(|(i, &(f, d))| EstimatorRecord {
//!         id: ModelId(i as u64),
//!         empirical_risk: f,
//!         pen0: d,
//!         pen1: 2.0 * d,
//!         complexity: d,
//!     })
//!     .collect();
//! let c = Collection::new(recs).unwrap();
//! assert_eq!(compute_path(&c).starts(), vec![0.0, 1.0, 2.0]);
//! ```

pub mod collection;
pub mod jump;
pub mod path;
pub mod reference;
pub mod regress;
pub mod select;
pub mod sim;
pub mod slope;
pub mod varbounds;

pub use collection::{Collection, EstimatorRecord, ModelId};
pub use path::{compute_path, evaluate_path, PenalizedPath};
