//! The L_pTV model
//!
//! ```text
//! F(u) = λ Σ_j |u_j − f_j|^p + Σ_i |τ_i| ‖D_i u‖,   0 < p ≤ 1
//! ```
//!
//! and its proximal linearization solver with support shrinking. At outer
//! step k the values within ε of the data are pinned to it, |·|^p is replaced
//! by its tangent majorant with weights w_j = p |u_j^k − f_j|^{p−1} on the
//! remaining support, and the resulting convex problem (plus a proximal term)
//! is handed to the ADMM inner solver.

use std::fmt::Write as _;

use crate::admm::{solve_l1tv_detailed, AdmmSolver};
use crate::diffops::GradientOperator;
use crate::error::{check_len, Error, Result};
use crate::imaging::MeshImage;
use crate::linsolve::LinearSolver;
use crate::scalar::{distance, norm, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig<T> {
    /// Fidelity weight λ.
    pub lambda: T,
    /// Exponent p ∈ (0, 1]; p = 1 runs plain L₁TV.
    pub p: T,
    /// Proximal weight ρ of the linearized subproblem.
    pub prox_weight: T,
    /// Support threshold ε on the [0, 1] intensity scale.
    pub eps_support: T,
    pub outer_tol: T,
    pub outer_max_iter: usize,
    pub beta1: T,
    pub beta2: T,
    pub inner_tol: T,
    pub inner_max_iter: usize,
    pub cg_tol: T,
    pub cg_max_iter: usize,
    pub linear_solver: LinearSolver,
}

impl<T: Real> SolverConfig<T> {
    /// Defaults with β₁ = β₂ = 10λ.
    pub fn new(lambda: f64, p: f64) -> Self {
        Self {
            lambda: T::lit(lambda),
            p: T::lit(p),
            prox_weight: T::one(),
            eps_support: T::lit(1e-3),
            outer_tol: T::lit(1e-6),
            outer_max_iter: 500,
            beta1: T::lit(10.0 * lambda),
            beta2: T::lit(10.0 * lambda),
            inner_tol: T::lit(1e-6),
            inner_max_iter: 2000,
            cg_tol: T::lit(1e-10),
            cg_max_iter: 10_000,
            linear_solver: LinearSolver::Auto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("prox_weight", self.prox_weight),
            ("eps_support", self.eps_support),
            ("outer_tol", self.outer_tol),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("inner_tol", self.inner_tol),
            ("cg_tol", self.cg_tol),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.p > T::zero() && self.p <= T::one()) {
            return Err(Error::InvalidConfig(format!("p must lie in (0, 1], got {}", self.p)));
        }
        if self.outer_max_iter == 0 || self.inner_max_iter == 0 || self.cg_max_iter == 0 {
            return Err(Error::InvalidConfig("iteration caps must be positive".into()));
        }
        Ok(())
    }
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self::new(1.0, 0.5)
    }
}

/// Γ: sorted flat value indices (`vertex * channels + channel`) whose
/// residual exceeds ε.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportSet {
    indices: Vec<usize>,
    channels: usize,
}

impl SupportSet {
    pub fn from_indices(mut indices: Vec<usize>, channels: usize) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self { indices, channels }
    }

    pub fn empty(channels: usize) -> Self {
        Self {
            indices: Vec::new(),
            channels,
        }
    }

    pub fn full(len: usize, channels: usize) -> Self {
        Self {
            indices: (0..len).collect(),
            channels,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.indices.binary_search(&idx).is_ok()
    }

    pub fn is_subset_of(&self, other: &SupportSet) -> bool {
        self.indices.iter().all(|&i| other.contains(i))
    }

    /// Vertices with at least one channel in the support.
    pub fn vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.indices.iter().map(|&i| i / self.channels).collect();
        v.dedup();
        v
    }
}

/// F(u). For color images the fidelity sums over channels and the TV term
/// uses the Frobenius norm of the stacked channel gradients.
pub fn objective<T: Real>(
    u: &MeshImage<T>,
    f: &MeshImage<T>,
    op: &GradientOperator<T>,
    config: &SolverConfig<T>,
) -> Result<T> {
    u.check_same_shape(f, "objective")?;
    check_len("objective vertex count", op.vertex_count(), u.vertex_count())?;
    let p = config.p;
    let fidelity: T = u
        .values()
        .iter()
        .zip(f.values())
        .map(|(&a, &b)| {
            let r = (a - b).abs();
            if r == T::zero() {
                T::zero()
            } else {
                r.powf(p)
            }
        })
        .sum();
    Ok(config.lambda * fidelity + total_variation(u, op))
}

/// Σ_i |τ_i| ‖(D_i u_1, …, D_i u_C)‖.
pub fn total_variation<T: Real>(u: &MeshImage<T>, op: &GradientOperator<T>) -> T {
    let planes = u.planes();
    let grads: Vec<Vec<[T; 3]>> = planes
        .iter()
        .map(|pl| {
            let mut g = vec![[T::zero(); 3]; op.triangle_count()];
            op.apply_into(pl, &mut g);
            g
        })
        .collect();
    op.triangle_areas()
        .iter()
        .enumerate()
        .map(|(i, &area)| {
            let sq: T = grads
                .iter()
                .map(|g| g[i][0] * g[i][0] + g[i][1] * g[i][1] + g[i][2] * g[i][2])
                .sum();
            area * sq.sqrt()
        })
        .sum()
}

/// {j : |u_j − f_j| > ε}, per value (vertex and channel).
pub fn support_eps<T: Real>(u: &MeshImage<T>, f: &MeshImage<T>, eps: T) -> Result<SupportSet> {
    u.check_same_shape(f, "support")?;
    let indices = u
        .values()
        .iter()
        .zip(f.values())
        .enumerate()
        .filter(|(_, (&a, &b))| (a - b).abs() > eps)
        .map(|(j, _)| j)
        .collect();
    Ok(SupportSet {
        indices,
        channels: u.channels(),
    })
}

/// w_j = p |u_j − f_j|^{p−1} for each j in the support, in support order.
pub fn weights<T: Real>(u: &MeshImage<T>, f: &MeshImage<T>, support: &SupportSet, p: T) -> Result<Vec<T>> {
    u.check_same_shape(f, "weights")?;
    support
        .indices()
        .iter()
        .map(|&j| {
            let r = (u.values()[j] - f.values()[j]).abs();
            if r == T::zero() {
                Err(Error::ZeroResidualInSupport(j))
            } else {
                Ok(p * r.powf(p - T::one()))
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord<T> {
    /// Outer iteration k (1-based); the record describes the step u^{k−1} → u^k.
    pub iter: usize,
    /// F(u^k).
    pub objective: T,
    /// #Γ^{k−1}, the support used for this step.
    pub support_size: usize,
    /// ‖u^k − u^{k−1}‖.
    pub iterate_gap: T,
    /// F(u^{k−1}) − F(u^k) − (ρ/2)‖u^k − u^{k−1}‖².
    pub decrease_slack: T,
    pub inner_iterations: usize,
    pub inner_converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    RelativeChange,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverTrace<T> {
    /// F(u⁰).
    pub initial_objective: T,
    pub records: Vec<TraceRecord<T>>,
    pub stop: StopReason,
}

impl<T: Real> SolverTrace<T> {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn converged(&self) -> bool {
        self.stop == StopReason::RelativeChange
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,objective,support_size,iterate_gap,decrease_slack,inner_iterations\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{:e},{},{:e},{:e},{}",
                r.iter,
                r.objective.to_f64_lossy(),
                r.support_size,
                r.iterate_gap.to_f64_lossy(),
                r.decrease_slack.to_f64_lossy(),
                r.inner_iterations
            );
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct PlmResult<T> {
    pub image: MeshImage<T>,
    pub trace: SolverTrace<T>,
}

/// Proximal linearization with support shrinking, started from `u0`
/// (normally the L₁TV solution).
///
/// Stops when ‖u^{k+1} − u^k‖ / ‖u^{k+1}‖ < `outer_tol` or after
/// `outer_max_iter` steps. Inner solves that hit their iteration cap are
/// logged and flagged in the trace, not treated as errors.
pub fn plm_solve<T: Real>(
    f: &MeshImage<T>,
    op: &GradientOperator<T>,
    config: &SolverConfig<T>,
    u0: &MeshImage<T>,
) -> Result<PlmResult<T>> {
    config.validate()?;
    f.check_same_shape(u0, "initial iterate")?;
    check_len("image vertex count", op.vertex_count(), f.vertex_count())?;

    let initial_objective = objective(u0, f, op, config)?;
    if config.p == T::one() {
        return l1tv_path(f, op, config, initial_objective);
    }

    let solver = AdmmSolver::new(op, config, config.prox_weight)?;
    let half_rho = config.prox_weight / T::lit(2.0);
    let mut u = u0.clone();
    let mut f_u = initial_objective;
    let mut support = support_eps(&u, f, config.eps_support)?;
    let mut records = Vec::new();
    let mut stop = StopReason::IterationLimit;

    for k in 1..=config.outer_max_iter {
        let w = weights(&u, f, &support, config.p)?;
        let inner = solver.solve(f, &u, &support, &w)?;
        if !inner.converged {
            log::warn!(
                "outer step {k}: ADMM stopped after {} iterations at residual {:e}",
                inner.iterations,
                inner.residual.to_f64_lossy()
            );
        }
        let next = inner.image;
        let f_next = objective(&next, f, op, config)?;
        if !f_next.is_finite() {
            return Err(Error::NonFiniteIterate("plm"));
        }
        let gap = distance(next.values(), u.values());
        records.push(TraceRecord {
            iter: k,
            objective: f_next,
            support_size: support.len(),
            iterate_gap: gap,
            decrease_slack: f_u - f_next - half_rho * gap * gap,
            inner_iterations: inner.iterations,
            inner_converged: inner.converged,
        });

        let next_support = support_eps(&next, f, config.eps_support)?;
        debug_assert!(next_support.is_subset_of(&support));
        let rel = gap / norm(next.values());
        u = next;
        f_u = f_next;
        support = next_support;
        if gap == T::zero() || rel < config.outer_tol {
            stop = StopReason::RelativeChange;
            break;
        }
    }

    Ok(PlmResult {
        image: u,
        trace: SolverTrace {
            initial_objective,
            records,
            stop,
        },
    })
}

fn l1tv_path<T: Real>(
    f: &MeshImage<T>,
    op: &GradientOperator<T>,
    config: &SolverConfig<T>,
    initial_objective: T,
) -> Result<PlmResult<T>> {
    let out = solve_l1tv_detailed(f, op, config)?;
    let obj = objective(&out.image, f, op, config)?;
    let record = TraceRecord {
        iter: 1,
        objective: obj,
        support_size: f.len(),
        iterate_gap: T::zero(),
        decrease_slack: initial_objective - obj,
        inner_iterations: out.iterations,
        inner_converged: out.converged,
    };
    Ok(PlmResult {
        image: out.image,
        trace: SolverTrace {
            initial_objective,
            records: vec![record],
            stop: StopReason::RelativeChange,
        },
    })
}

/// θ = (μ Σ|τ_i|‖D_i‖ / (λ p))^{1/(p−1)} for a caller-supplied estimate of μ.
pub fn theta_bound<T: Real>(op: &GradientOperator<T>, config: &SolverConfig<T>, mu_estimate: T) -> Result<T> {
    theta_from_parts(op.weighted_norm_sum(), config.lambda, config.p, mu_estimate)
}

pub fn theta_from_parts<T: Real>(weighted_norm_sum: T, lambda: T, p: T, mu_estimate: T) -> Result<T> {
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::InvalidP(p.to_f64_lossy()));
    }
    if !(mu_estimate > T::zero()) || !(lambda > T::zero()) {
        return Err(Error::InvalidParams("mu_estimate and lambda must be positive".into()));
    }
    let base = mu_estimate * weighted_norm_sum / (lambda * p);
    Ok(base.powf(T::one() / (p - T::one())))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualGap<T> {
    /// Smallest strictly positive |u_j − f_j|, `+∞` when all are zero.
    pub min_nonzero_residual: T,
    pub zero_count: usize,
}

pub fn residual_gap_report<T: Real>(u: &MeshImage<T>, f: &MeshImage<T>) -> Result<ResidualGap<T>> {
    u.check_same_shape(f, "residual gap")?;
    let mut min = T::infinity();
    let mut zeros = 0;
    for (&a, &b) in u.values().iter().zip(f.values()) {
        let r = (a - b).abs();
        if r == T::zero() {
            zeros += 1;
        } else if r < min {
            min = r;
        }
    }
    Ok(ResidualGap {
        min_nonzero_residual: min,
        zero_count: zeros,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TriangleMesh;
    use crate::synthetic::{icosphere, paint, Pattern};
    use proptest::prelude::*;

    fn gray(v: Vec<f64>) -> MeshImage<f64> {
        MeshImage::from_raw(v, 1).unwrap()
    }

    fn right_triangle_op() -> GradientOperator<f64> {
        let m = TriangleMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        GradientOperator::new(&m)
    }

    #[test]
    fn objective_hand_computed() {
        let op = right_triangle_op();
        let cfg = SolverConfig::new(1.0, 0.5);
        let f = gray(vec![0.0; 3]);
        let u = gray(vec![1.0, 0.0, 0.0]);
        let val = objective(&u, &f, &op, &cfg).unwrap();
        assert!((val - (1.0 + 0.5 * 2f64.sqrt())).abs() < 1e-12);
        assert!((val - 1.70710678).abs() < 1e-8);

        let cfg2 = SolverConfig { lambda: 2.0, ..cfg.clone() };
        let val2 = objective(&u, &f, &op, &cfg2).unwrap();
        assert!((val2 - (2.0 + 0.5 * 2f64.sqrt())).abs() < 1e-12);

        let flat = gray(vec![0.3; 3]);
        assert_eq!(objective(&flat, &flat, &op, &cfg).unwrap(), 0.0);
        assert!(objective(&gray(vec![0.0; 4]), &gray(vec![0.0; 4]), &op, &cfg).is_err());
    }

    #[test]
    fn support_examples() {
        let f = gray(vec![0.0, 0.98, 0.5]);
        let u = gray(vec![0.0, 0.96, 0.5]);
        assert_eq!(support_eps(&u, &f, 0.004).unwrap().indices(), &[1]);
        assert!(support_eps(&f, &f, 0.004).unwrap().is_empty());
        // exactly ε is excluded
        let f = gray(vec![0.0, 0.0]);
        let u = gray(vec![0.25, 0.5]);
        assert_eq!(support_eps(&u, &f, 0.25).unwrap().indices(), &[1]);
    }

    #[test]
    fn color_support_collapses_to_vertices() {
        let f = MeshImage::from_raw(vec![0.0; 6], 3).unwrap();
        let u = MeshImage::from_raw(vec![0.0, 0.0, 0.5, 0.0, 0.0, 0.0], 3).unwrap();
        let s = support_eps(&u, &f, 0.1).unwrap();
        assert_eq!(s.indices(), &[2]);
        assert_eq!(s.vertices(), vec![0]);
    }

    #[test]
    fn weight_examples() {
        let f = gray(vec![0.0, 0.0, 0.0]);
        let u = gray(vec![4.0, 1.0, 0.0]);
        let s = SupportSet::from_indices(vec![0, 1], 1);
        let w = weights(&u, &f, &s, 0.5).unwrap();
        assert!((w[0] - 0.25).abs() < 1e-15);
        let w = weights(&u, &f, &s, 0.9).unwrap();
        assert!((w[1] - 0.9).abs() < 1e-15);
        let w = weights(&u, &f, &s, 1.0).unwrap();
        assert_eq!(w, vec![1.0, 1.0]);
        let bad = SupportSet::from_indices(vec![2], 1);
        assert!(matches!(weights(&u, &f, &bad, 0.5), Err(Error::ZeroResidualInSupport(2))));
    }

    proptest! {
        #[test]
        fn tangent_majorizes_power(t in -3.0f64..3.0, r_abs in 1e-3f64..3.0, p in 0.05f64..1.0) {
            let w = p * r_abs.powf(p - 1.0);
            let lhs = t.abs().powf(p);
            let rhs = w * t.abs() + (r_abs.powf(p) - w * r_abs);
            prop_assert!(lhs <= rhs + 1e-12);
        }
    }

    #[test]
    fn theta_examples() {
        assert!((theta_from_parts(1.0f64, 2.0, 0.5, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((theta_from_parts(2.0f64, 1.0, 0.5, 1.0).unwrap() - 0.0625).abs() < 1e-12);
        let lo = theta_from_parts(1.0, 1.0, 0.5, 1.0).unwrap();
        let hi = theta_from_parts(1.0, 4.0, 0.5, 1.0).unwrap();
        assert!(hi > lo);
        assert!(matches!(theta_from_parts(1.0, 1.0, 1.0, 1.0), Err(Error::InvalidP(_))));
        let op = right_triangle_op();
        let cfg = SolverConfig::new(1.0, 0.5);
        // μ Σ|τ|‖D‖ = 1 · 0.5 · √3
        let expected: f64 = (0.5 * 3f64.sqrt() / 0.5).powf(-2.0);
        assert!((theta_bound(&op, &cfg, 1.0).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn residual_gap_examples() {
        let f = gray(vec![0.0, 0.0, 0.0]);
        let r = residual_gap_report(&f, &f).unwrap();
        assert_eq!(r.min_nonzero_residual, f64::INFINITY);
        assert_eq!(r.zero_count, 3);
        let u = gray(vec![0.0, 0.3, 0.7]);
        let r = residual_gap_report(&u, &f).unwrap();
        assert_eq!(r.min_nonzero_residual, 0.3);
        assert_eq!(r.zero_count, 1);
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::<f64>::new(1.0, 0.5);
        assert!(c.validate().is_ok());
        c.p = 0.0;
        assert!(c.validate().is_err());
        c.p = 1.2;
        assert!(c.validate().is_err());
        let c = SolverConfig::<f64> { beta1: -1.0, ..SolverConfig::new(1.0, 0.5) };
        assert!(c.validate().is_err());
    }

    #[test]
    fn plm_from_f_returns_f_in_one_step() {
        let mesh = icosphere::<f64>(2).unwrap();
        let op = GradientOperator::new(&mesh);
        let f = paint(&mesh, Pattern::Checker, 1).unwrap();
        let cfg = SolverConfig::new(0.1, 0.5);
        let out = plm_solve(&f, &op, &cfg, &f).unwrap();
        assert_eq!(out.image.values(), f.values());
        assert_eq!(out.trace.iterations(), 1);
        assert_eq!(out.trace.records[0].support_size, 0);
    }

    #[test]
    fn plm_p_one_is_l1tv() {
        let mesh = icosphere::<f64>(2).unwrap();
        let op = GradientOperator::new(&mesh);
        let clean = paint(&mesh, Pattern::TwoPatch, 1).unwrap();
        let f = crate::imaging::add_salt_pepper(&clean, &crate::imaging::NoiseSpec::new(0.1, 3).unwrap());
        let cfg = SolverConfig::new(0.2, 1.0);
        let out = plm_solve(&f, &op, &cfg, &f).unwrap();
        let l1 = crate::admm::solve_l1tv(&f, &op, &cfg).unwrap();
        assert_eq!(out.image.values(), l1.values());
        assert_eq!(out.trace.iterations(), 1);
    }

    #[test]
    fn trace_csv_header() {
        let trace = SolverTrace {
            initial_objective: 1.0,
            records: vec![TraceRecord {
                iter: 1,
                objective: 0.5,
                support_size: 3,
                iterate_gap: 0.1,
                decrease_slack: 0.49,
                inner_iterations: 10,
                inner_converged: true,
            }],
            stop: StopReason::RelativeChange,
        };
        let csv = trace.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("iter,objective,support_size,iterate_gap,decrease_slack,inner_iterations")
        );
        assert!(lines.next().unwrap().starts_with("1,5e-1,3,"));
    }
}
