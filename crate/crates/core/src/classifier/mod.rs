//! A small convolutional classifier trained on real data and then frozen.
//! It plays the judge in every accuracy, discriminability and
//! Inception-score measurement.

mod config;
mod model;
mod report;

pub use config::{ClassifierConfig, CLASSIFIER_KEYS};
pub use model::{train_classifier, Classifier};
pub use report::{accuracy_from_dist, argmax_rows, AccuracyReport};
