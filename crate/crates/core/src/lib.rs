//! Geodesic, horocycle and perturbed Hamiltonian flows on a compact
//! hyperbolic surface, with the estimators used to study equidistribution
//! of perturbed geodesic pieces.

pub mod cartan;
pub mod checks;
pub mod equidist;
pub mod error;
pub mod fit;
pub mod hyperbolic;
pub mod observable;
pub mod perturbed;
pub mod potential;
pub mod quadrature;
pub mod quotient;
pub mod stability;
pub mod sweeps;

pub use cartan::{DiskSystem, ExceptionalCover, GoodSplit};
pub use equidist::{EquidistReport, ExperimentConfig, ExperimentParams, LiouvilleReference};
pub use error::{Error, Result};
pub use hyperbolic::{ChartPhasePoint, FrameVector, GroupElement};
pub use observable::{Observable, ObservableKind};
pub use perturbed::{IntegratorConfig, TrajectoryResult};
pub use potential::{Bump, CriticalScanReport, PotentialField, StencilConfig};
pub use quotient::FuchsianGroup;
pub use stability::{FlowPolynomial, QuadratureConfig, StabilityComparison};
