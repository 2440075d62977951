//! File formats, reports and the batch pipeline around `ventriq-core`.

pub mod atlas_io;
pub mod commands;
pub mod nifti;
pub mod pipeline;
pub mod report;
pub mod subjects;
pub mod xfm;
