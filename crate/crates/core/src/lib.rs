//! Detection of non-additive feature interactions in black-box functions
//! and attribution to the resulting disjoint feature sets.
//!
//! The pipeline is: bind a function to a [`PerturbationSpace`] as a
//! memoized [`BlackBox`], rank feature pairs with [`detect_pairs`], merge the
//! top pairs into islands and attribute each with [`explain`].
//!
//! ```
//! use archipelago::{BlackBox, DetectorConfig, HConvention, Method, PerturbationSpace};
//!
//! let space = PerturbationSpace::new(vec![2.0, 3.0, 5.0], vec![0.0; 3], HConvention::Unit)?;
//! let bb = BlackBox::from_fn(space, |v| v[0] * v[1] + v[2]);
//! let ranking = archipelago::detect_pairs(&bb, &DetectorConfig::default())?;
//! let explanation = archipelago::explain(&bb, &ranking, 1, Method::ArchAttribute)?;
//! assert_eq!(explanation.phi, vec![6.0, 5.0]);
//! # Ok::<(), archipelago::Error>(())
//! ```

pub mod attribute;
pub mod axioms;
pub mod blackbox;
pub mod bridge;
pub mod detect;
pub mod error;
pub mod expr;
pub mod metrics;
pub mod space;
pub mod synth;

pub use attribute::{arch_attribute, attribute_sets, difference_attribute, explain, Explanation, Method};
pub use blackbox::{BlackBox, Evaluator, FnEvaluator};
pub use bridge::{bridge_open, BridgeCommand, WireMode};
pub use detect::{
    detect_full_expectation, detect_pairs, omega_pair, redundancy_curve, ContextRegime,
    ContextSequence, DetectorConfig, InteractionRanking, PairStrength, Selection,
};
pub use error::{BridgeError, Error, Result};
pub use space::{merge_overlapping, Context, FeatureSet, HConvention, PerturbationSpace};
pub use synth::{random_gam, wedge, GamInstance, SyntheticFunction, SyntheticId};
