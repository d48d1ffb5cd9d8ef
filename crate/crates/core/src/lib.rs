//! Synthesis, validation and selection toolkit for table-structure training
//! data. The pipeline: generate structurally controlled table grids, render
//! them as single-table HTML documents, fill them with topic-consistent
//! content, validate and rank the results, expand them with span-aware
//! transforms, and pick training subsets with diversity-based selection.

pub mod augment;
pub mod checker;
pub mod cli;
pub mod corr;
pub mod disturb;
pub mod generate;
pub mod html;
pub mod infill;
pub mod manifest;
pub mod model;
pub mod sampler;
pub mod teds;

pub use model::{AnnotationRecord, Cell, HeaderLayout, Labels, Language, LineStyle, StyleSpec, TableGrid, TableSchema};
