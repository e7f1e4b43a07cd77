//! Salt-and-pepper denoising of images living on triangle-mesh vertices.
//!
//! The restoration model is the nonconvex L_pTV energy
//! `λ Σ_j |u_j − f_j|^p + Σ_i |τ_i| ‖D_i u‖` with `0 < p < 1`, where `D_i` is
//! the piecewise-linear gradient on triangle `τ_i`. It is minimized by a
//! proximal linearization loop with support shrinking ([`lptv::plm_solve`]),
//! each step solved by ADMM ([`admm`]), warm-started from the convex L₁TV
//! solution.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the double-precision types used by the command-line tool.

pub mod admm;
pub mod diffops;
pub mod error;
pub mod experiment;
pub mod imaging;
pub mod io;
pub mod linsolve;
pub mod lptv;
pub mod mesh;
pub mod scalar;
pub mod synthetic;

pub use admm::{admm_solve, shrink_1d, shrink_vec, solve_l1tv, solve_normal_equation, AdmmOutcome, AdmmSolver};
pub use diffops::{GradientOperator, GramMatrix};
pub use error::{Error, Result};
pub use imaging::{add_salt_pepper, clamp_to_unit, psnr, MeshImage, NoiseSpec};
pub use io::{load_image, load_mesh, MeshFormat};
pub use linsolve::{LinearSolver, NormalEquationSystem};
pub use lptv::{
    objective, plm_solve, residual_gap_report, support_eps, theta_bound, weights, PlmResult, SolverConfig,
    SolverTrace, SupportSet, TraceRecord,
};
pub use mesh::{ControlCellAreas, TriangleMesh};
pub use scalar::Real;

pub type Mesh = TriangleMesh<f64>;
pub type Image = MeshImage<f64>;
pub type Operator = GradientOperator<f64>;
pub type Config = SolverConfig<f64>;
pub type Trace = SolverTrace<f64>;

pub type MeshF32 = TriangleMesh<f32>;
pub type ImageF32 = MeshImage<f32>;
pub type OperatorF32 = GradientOperator<f32>;
pub type ConfigF32 = SolverConfig<f32>;
