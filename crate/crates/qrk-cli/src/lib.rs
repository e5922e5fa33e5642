//! Experiment harness around `qrk-core`: configuration loading, multi-trial
//! runners with CSV/plot emission, and the SVG renderers used by the `qrk`
//! binary.

pub mod config;
pub mod experiment;
pub mod svg;
