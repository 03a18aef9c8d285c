//! Numerical laboratory for the geometry and dynamics of nonpositively curved
//! symmetric spaces: Riemannian barycenters with certified derivative bounds,
//! Iwasawa-type decompositions and Weyl-chamber-face bundles for matrix groups,
//! boundary-action dynamics (expansion certificates, semi-conjugacy probes,
//! Denjoy blow-ups, chamber deformations), a desk-scale equivariant suspension
//! map over a genus-2 hyperbolic surface, and quasi-flat shadowing diagnostics
//! in H^2 x H^2.

pub mod barycenter;
pub mod boundary;
pub mod chamber;
pub mod equivariant;
pub mod lie;
pub mod manifold;
pub mod quasiflat;
pub mod suites;

/// Default absolute tolerance for geometric identities.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;
