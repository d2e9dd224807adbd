//! Weighted Minkowski problems for rotationally invariant measures on R^n, n in {2, 3}.
//!
//! The crate is organized around five layers:
//!
//! * [`weights`]: radial density profiles, their radial mass primitives, and the
//!   scalar analysis of isotropic (ball) solutions.
//! * [`sphere`]: direction sets on the circle/sphere, support vectors, and the
//!   polytopes obtained by intersecting halfspaces (Wulff shapes).
//! * [`measures`]: weighted volume, weighted surface area measures, their L^p
//!   deformations, and mixed measures.
//! * [`solvers`]: variational solvers that recover a convex body from a target
//!   surface measure, plus the 2-d curvature equation solver on a periodic grid.
//! * [`ineq`]: isoperimetric profiles, concentration checks, and the inequality
//!   probes used both as solver preconditions and as self-tests.
//!
//! [`io`] defines the JSON problem/report formats used by the CLI.

pub mod ineq;
pub mod io;
pub mod measures;
pub mod num;
pub mod solvers;
pub mod sphere;
pub mod weights;

/// Numerical tolerances used across the crate.
///
/// These are pinned once here; solvers and tests read them instead of
/// restating magic numbers.
pub mod tol {
    /// Relative tolerance for scalar root bracketing/bisection.
    pub const ROOT_REL: f64 = 1e-10;
    /// Absolute tolerance for radial mass quadrature (scaled by max(1, total mass)).
    pub const MASS_QUAD: f64 = 1e-10;
    /// Absolute tolerance for facet quadratures and evaluator cross-checks.
    pub const QUAD: f64 = 1e-8;
    /// Relative KKT residual accepted as converged (scaled by total datum mass).
    pub const KKT_REL: f64 = 1e-6;
    /// Absolute tolerance on the mass constraint |mu(K) - a|.
    pub const MASS_CONSTRAINT: f64 = 1e-8;
    /// Sup-norm residual target for the periodic grid solver.
    pub const PDE: f64 = 1e-10;
    /// Central difference step factor: h = FD_STEP * max(1, |t|).
    pub const FD_STEP: f64 = 1e-6;
    /// Outer iteration cap shared by the iterative solvers.
    pub const MAX_OUTER: usize = 10_000;

    /// Direction vectors must be unit length within this.
    pub const UNIT: f64 = 1e-12;
    /// Two directions closer than this (euclidean) are duplicates.
    pub const DUP: f64 = 1e-9;
    /// Perturbation scale used to break exact degeneracies in hull builds.
    pub const DEGENERACY: f64 = 1e-12;
    /// Facets whose normals differ by less than this are merged.
    pub const FACET_MERGE: f64 = 1e-9;
    /// Relative closedness defect allowed in sum(area_i * u_i) = 0.
    pub const CLOSEDNESS_REL: f64 = 1e-9;
}
