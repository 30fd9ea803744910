//! Forward convolutive prediction (FCP) for reverberation-preserving
//! multi-speaker separation.
//!
//! The crate covers the non-neural half of a two-stage "sandwich" separator:
//!
//! - [`spectral`]: square-root Hann STFT/iSTFT with exact reconstruction.
//! - [`scene`]: seeded synthetic reverberant scenes (direct path, image, noise, mixture).
//! - [`fcp`]: per-frequency weighted least-squares filter estimation, image
//!   formation and the energy-sorted source update variant.
//! - [`pipeline`]: separator stand-ins, the FCP stage, feature assembly and
//!   iterative refinement with a file-based boundary for external models.
//! - [`objectives`]: PIT, mixture-constraint and enhancement losses.
//! - [`metrics`]: SI-SDR, low-energy SI-SDR and quantile sweeps.
//! - [`experiment`]: batch experiments behind the `cxfilter` binary.
//!
//! ```
//! use cxfilter::spectral::{istft, stft, StftConfig};
//!
//! let cfg = StftConfig::dnn_default();
//! let x: Vec<f64> = (0..4000).map(|n| (n as f64 * 0.01).sin()).collect();
//! let spec = stft(&x, &cfg).unwrap();
//! let y = istft(&spec, &cfg, x.len()).unwrap();
//! assert!(x.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-9));
//! ```

pub mod error;
pub mod experiment;
pub mod fcp;
pub mod metrics;
pub mod objectives;
pub mod pipeline;
pub mod scene;
pub mod spectral;
pub mod wav;

mod serde_ext;

pub use error::{Error, Result};
pub use num_complex::Complex64;
