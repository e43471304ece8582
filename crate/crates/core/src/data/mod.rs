//! Datasets, CSV ingestion, synthetic generators and the Dirichlet partitioner.

mod csv_io;
mod dataset;
mod partition;
mod synth;

pub use csv_io::{load_csv, write_csv, PROVENANCE_COLUMN};
pub use dataset::{label_histogram, stratified_split, Dataset, LabelHistogram, TrainTestSplit};
pub use partition::{dirichlet_partition, sample_dirichlet, Partition, MAX_PARTITION_ATTEMPTS};
pub use synth::{gaussian_centers, make_gaussian_mixture, make_ring_mixture, ring_centers};
