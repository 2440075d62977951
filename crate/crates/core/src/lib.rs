//! Core algorithms for ventricle-based registration quality assessment:
//! a volumetric image model, overlap metrics, a demons-style diffeomorphic
//! registration engine, multi-atlas selection, lesion burden mapping and
//! synthetic phantom generation.
//!
//! The crate is `no_std`-compatible (`alloc` required); file formats and
//! the command-line front end live in the companion `ventriq` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod components;
pub mod error;
pub mod filter;
pub mod geometry;
pub mod intensity;
pub mod mar;
pub mod metrics;
pub mod phantom;
pub mod register;
pub mod resample;
pub mod segment;
pub mod stats;
pub mod volume;
pub mod wmh;

pub use error::{Error, Result};
pub use geometry::Geometry;
pub use volume::{InterpMode, Mask, Volume};
