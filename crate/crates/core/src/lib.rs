//! Grant-free device activity detection for cell-free massive MIMO.
//!
//! The crate covers the whole simulation chain:
//!
//! * [`scenario`]: torus geometry, three-slope path loss, shadowing, power control;
//! * [`airlink`]: signatures, random activity, per-AP received blocks;
//! * [`detector`]: the dominant-AP coordinate-descent ML detector and thresholding;
//! * [`oracle`]: dense brute-force cost evaluation and grid search for validation;
//! * [`harness`]: Monte Carlo trials, ROC sweeps, SNR surveys, architecture comparison;
//! * [`experiment`]: configuration files and the experiment runner behind the `cfmimo` binary.
//!
//! [`cgmat`] holds the complex Hermitian kernels (Sherman-Morrison updates,
//! Cholesky) everything else is built on.

pub mod airlink;
pub mod cgmat;
pub mod detector;
pub mod experiment;
pub mod harness;
pub mod oracle;
pub mod scenario;
pub mod seeds;

pub use airlink::{draw_signatures, sample_activity, synthesize_frames, ActivityPattern, FrameSet, SignatureBook};
pub use cgmat::{HermitianMatrix, LinalgError};
pub use detector::{
    run_coordinate_descent, threshold_decide, DetectionResult, DetectorConfig, DetectorError, DetectorState,
};
pub use scenario::{build_scenario, GeometryConfig, PowerPolicy, Scenario, ValidationError};
pub use seeds::{Stream, TrialSeeds};
