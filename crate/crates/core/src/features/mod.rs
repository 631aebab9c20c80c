//! End-to-end harness: load a dataset, map it through a sketch, fit ridge
//! regression on the features and classify.

mod batch;
mod dataset;
mod io;
mod labels;
mod ridge;

pub use batch::{batch_transform, batch_transform_serial, FeatureMap};
pub use dataset::{load_dataset, read_images, write_images, Dataset, DatasetFormat, Samples};
pub use io::{load_features, save_features, Dtype, FeatureMatrix, Provenance, SketchKind};
pub use labels::{class_ids, encode_labels};
pub use ridge::{accuracy, classify, predict, ridge_fit, RegularizerPreset, RidgeModel};
