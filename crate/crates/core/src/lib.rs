//! Spectral-submanifold reduction of periodically forced mechanical systems.

pub mod beam;
pub mod error;
pub mod frc;
pub mod isola;
pub mod linalg;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod poly;
pub mod presets;
pub mod reduced;
pub mod series;
pub mod ssm_auto;
pub mod ssm_forced;

pub use error::{ResonanceTriple, Result, SsmError};
pub use frc::{solve_at_omega, trace_frc, Branch, FrcCurve, FrcModel, FrcOptions, FrcPoint};
pub use isola::{classify_roots, isola_report, roots_of_a, IsolaReport, RootClass, RootTrack};
pub use model::{EigenNormalization, FirstOrderSystem, MechanicalSystem, ModalModel, NonlinearTerm};
pub use poly::{MultiIndex, MultiPoly};
pub use reduced::{assemble_polar, fixed_point_stability, zero_problem, FixedPointU, ReducedDynamics, Stability};
pub use series::Series2;
pub use ssm_auto::{compute_autonomous_ssm, AutonomousSsm};
pub use ssm_forced::{compute_nonautonomous_ssm, leading_forcing_coefficient, ForcedCache, ForcedReduction};
