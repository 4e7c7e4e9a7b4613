//! Feature generation from a knowledge base of typed relations.
//!
//! Two generators are provided. [`expand_features`] adds one feature per
//! applicable relation (and, for non-functional relations, per observed
//! object). [`generate_features`] instead treats the values of each feature as
//! objects of a new learning problem, solves it with a classifier over
//! knowledge-base relations, and uses that classifier as a new feature; it can
//! recurse on the new problem's own features. [`deep_generate`] runs that
//! generator at every node of a split tree over the training data.
//!
//! ```
//! use kbfeat::{Column, Dataset, Example, Feature, FeatureValue, KnowledgeBase, Label};
//! use kbfeat::{expand_features, AggregatorFamily};
//!
//! let kb = KnowledgeBase::load(
//!     "countryOf\tsurname\tcountry\tfn\n",
//!     "countryOf\tcohen\tisrael\ncountryOf\tsmith\tuk\n",
//! )
//! .unwrap();
//! let ds = Dataset::new(
//!     vec![Column::new("surname")],
//!     vec![
//!         Example::new("p1", Label::Positive).with("surname", FeatureValue::atom("cohen")),
//!         Example::new("p2", Label::Negative).with("surname", FeatureValue::atom("smith")),
//!     ],
//! )
//! .unwrap();
//! let new = expand_features(&ds, &[Feature::base("surname")], &kb, AggregatorFamily::Majority, 1.0);
//! assert_eq!(new[0].name(), "countryOf(surname)");
//! ```

pub mod dataset;
pub mod deep;
pub mod eval;
pub mod expand;
pub mod feature;
pub mod kb;
pub mod learners;
pub mod recursive;
pub mod synth;

pub use dataset::{Column, Dataset, DatasetError, Example, FeatureValue, Label, LabelCounts};
pub use deep::{
    deep_generate, select_feature, DeepConfig, DeepOutcome, DepthStats, GenerationReport,
};
pub use expand::{expand_features, AggregatorFamily, AggregatorInstance};
pub use feature::{
    materialize, ClassifierFeature, Feature, FeatureKind, FeatureMatrix, FeatureSet, SELF_COLUMN,
};
pub use kb::{KbError, KnowledgeBase, Relation, Value};
pub use learners::{train, Classifier, LearnerKind, TrainConfig};
pub use recursive::{
    apply_generated, create_new_problem, generate_features, Candidate, CandidateOutcome,
    FilterReason, Generation, GenerationConfig, RecursiveProblem,
};

#[cfg(doctest)]
pub mod guide {
    #[doc = include_str!("../../../book/src/knowledge-base.md")]
    pub mod knowledge_base {}
    #[doc = include_str!("../../../book/src/expansion.md")]
    pub mod expansion {}
    #[doc = include_str!("../../../book/src/recursive.md")]
    pub mod recursive {}
    #[doc = include_str!("../../../book/src/deep.md")]
    pub mod deep {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub mod evaluation {}
}
