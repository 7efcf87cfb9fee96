//! Latent-bridging compression for point clouds.
//!
//! A frozen encoder `E` and a frozen generator `G` come from two independently
//! trained autoencoders. A forward mapping network squeezes `E`'s latent into a
//! short code `z_comp`; a reverse mapping network expands the code into `G`'s
//! latent space, and `G` regenerates the geometry.

pub mod analysis;
pub mod bridge;
pub mod codec;
pub mod fingerprint;
pub mod geometry;
pub mod nn;
pub mod payload;
