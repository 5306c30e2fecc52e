//! Gesture spotting on wrist accelerometry: recurrence-based onset detection,
//! statistical plus resampled features, and a one-vs-one RBF SVM over the
//! twelve-gesture dictionary.

mod detect;
mod features;
mod rqa;
mod svm;

pub use detect::{detect_onsets, detect_onsets_with, DetectorConfig};
pub use features::{extract_features, features_from_axes, GestureFeatures, FEATURE_DIM, RESAMPLED_LEN};
pub use rqa::{rqa_measures, RqaMeasures, RqaParams};
pub use svm::{svm_predict, svm_train, vote_winner, BinarySvm, SvmModel, SvmParams};
