//! Compression-based classification of byte objects.
//!
//! - [`compressor`]: compressed-size functions and their normality audit.
//! - [`distances`]: NCD and the ideal normalized information distance.
//! - [`toyk`]: exact bounded Kolmogorov complexity on a micro-machine.
//! - [`corpus`]: manifests, decoding and normalization.
//! - [`matrix`]: pairwise NCD matrices with a persistent Γ cache.
//! - [`cluster`]: neighbor joining, UPGMA, Newick and DOT.
//! - [`ngd`]: normalized Google distance over hit-count providers.

pub mod compressor;
pub mod distances;
pub mod toyk;
pub mod corpus;
pub mod matrix;
pub mod cluster;
pub mod ngd;
