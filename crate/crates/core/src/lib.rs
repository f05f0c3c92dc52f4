//! Factorized aggregation over calibrated junction hypertrees.
//!
//! A [`JunctionHypertree`] holds base relations annotated with values from a
//! commutative semi-ring, a tree of attribute bags, and a cache of the
//! messages passed along every directed tree edge. Once calibrated for a
//! pivot query, a later query that differs in a few annotations only needs
//! the messages inside the Steiner tree spanning the changed bags; every
//! other message is read from the cache.
//!
//! ```
//! use cjt_core::{JunctionHypertree, QuerySpec, Relation, SemiringKind, Value};
//!
//! let k = SemiringKind::NatCount;
//! let r = Relation::from_rows(&[0, 1], k, [(vec![1, 1], Value::Nat(2)), (vec![1, 2], Value::Nat(3))]).unwrap();
//! let s = Relation::from_rows(&[0, 2], k, [(vec![1, 7], Value::Nat(5))]).unwrap();
//! let mut jt = JunctionHypertree::default_jt(k, vec![("R".into(), r), ("S".into(), s)]).unwrap();
//! jt.calibrate(&Default::default()).unwrap();
//! let out = jt.execute(&QuerySpec::default()).unwrap();
//! assert_eq!(out.result.total().unwrap(), Value::Nat(25));
//! assert_eq!(out.stats.messages_computed, 0);
//! ```

pub mod analytics;
pub mod annotation;
pub mod calibration;
pub mod error;
pub mod hypertree;
pub mod maintenance;
pub mod planner;
pub mod relation;
pub mod semiring;
pub mod stats;

pub use annotation::{Annotation, AnnotationPlacement, PlacementRole};
pub use calibration::{CalibrationReport, TraversalOrder};
pub use error::{Error, Result};
pub use hypertree::{Bag, BagId, JtOptions, JunctionHypertree, Message, RelId, Version, Violation};
pub use maintenance::{DeltaRelation, DeltaReport};
pub use planner::{PlacementMode, QueryOutcome, QuerySpec, SteinerPlan};
pub use relation::{AttrId, Comparator, Predicate, Relation, Schema, Tuple};
pub use semiring::{lift, lift_sparse, Covariance, SemiringKind, SemiringSpec, Value, ValueArity};
pub use stats::Stats;
