//! MATPOWER case loading, dataset and model files, report tables and the
//! `opf-activeset` pipeline built on `opf-activeset-core`.

pub mod case;
pub mod config;
pub mod dataset_io;
pub mod error;
pub mod model_io;
pub mod pipeline;
pub mod reports;
