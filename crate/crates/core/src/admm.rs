//! ADMM for the convex reweighted subproblem
//!
//! ```text
//! min_v  λ Σ_{j∈Γ} w_j |v_j − f_j| + Σ_i |τ_i| ‖D_i v‖ + (ρ/2) ‖v − u^k‖²
//! s.t.   v_j = f_j  for j ∉ Γ
//! ```
//!
//! split as y_j = v_j − f_j (j ∈ Γ) and z_i = D_i v. Each sweep does the joint
//! (y, z) shrinkage, the v normal-equation solve, then both multiplier
//! updates. For color images the three channel gradients of a triangle form
//! one 9-vector group in the z-shrinkage.

use crate::diffops::GradientOperator;
use crate::error::{Error, Result};
use crate::imaging::MeshImage;
use crate::linsolve::NormalEquationSystem;
use crate::lptv::{SolverConfig, SupportSet};
use crate::scalar::Real;

/// Soft thresholding, the minimizer of `threshold·|t| + ½(t − x)²`.
#[inline]
pub fn shrink_1d<T: Real>(x: T, threshold: T) -> T {
    let m = x.abs() - threshold;
    if m > T::zero() {
        m * x.signum()
    } else {
        T::zero()
    }
}

/// Group soft thresholding, the minimizer of `threshold·‖t‖ + ½‖t − x‖²`.
/// Returns zero whenever ‖x‖ ≤ threshold, including x = 0.
pub fn shrink_vec<T: Real>(x: &[T], threshold: T) -> Vec<T> {
    let mut out = x.to_vec();
    shrink_vec_in_place(&mut out, threshold);
    out
}

#[inline]
pub fn shrink_vec_in_place<T: Real>(x: &mut [T], threshold: T) {
    let n = x.iter().map(|&v| v * v).sum::<T>().sqrt();
    if n <= threshold {
        x.iter_mut().for_each(|v| *v = T::zero());
    } else {
        let s = (n - threshold) / n;
        x.iter_mut().for_each(|v| *v *= s);
    }
}

/// Solves the v-update system. Thin wrapper over
/// [`NormalEquationSystem::solve`] taking tolerances from the config.
pub fn solve_normal_equation<T: Real>(
    system: &NormalEquationSystem<T>,
    rhs: &[T],
    config: &SolverConfig<T>,
) -> Result<Vec<T>> {
    system.solve(rhs, None, config.cg_tol, config.cg_max_iter)
}

#[derive(Clone, Debug)]
pub struct AdmmOutcome<T> {
    pub image: MeshImage<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Final max(‖v − f − ȳ‖, ‖Dv − z‖) / √n.
    pub residual: T,
}

/// Mutable ADMM iterate, one plane per channel.
#[derive(Clone, Debug)]
pub struct AdmmState<T> {
    pub v: Vec<Vec<T>>,
    /// ȳ: shrunk residual on Γ, zero on the pinned set.
    pub y: Vec<Vec<T>>,
    /// `z[c * N_τ + i]` is channel c of z_i.
    pub z: Vec<[T; 3]>,
    pub eta: Vec<Vec<T>>,
    pub mu: Vec<[T; 3]>,
    pub iteration: usize,
}

/// Inner solver bound to one operator and one (β₁, β₂, ρ) triple; the
/// normal-equation factorization is built once and reused for every call.
pub struct AdmmSolver<'a, T> {
    op: &'a GradientOperator<T>,
    system: NormalEquationSystem<T>,
    config: SolverConfig<T>,
    prox_weight: T,
}

impl<'a, T: Real> AdmmSolver<'a, T> {
    pub fn new(op: &'a GradientOperator<T>, config: &SolverConfig<T>, prox_weight: T) -> Result<Self> {
        if prox_weight < T::zero() {
            return Err(Error::InvalidConfig("proximal weight must be nonnegative".into()));
        }
        let system = NormalEquationSystem::new(
            op.gram(),
            config.beta2,
            prox_weight + config.beta1,
            config.linear_solver,
        )?;
        Ok(Self {
            op,
            system,
            config: config.clone(),
            prox_weight,
        })
    }

    pub fn system(&self) -> &NormalEquationSystem<T> {
        &self.system
    }

    /// Runs ADMM from v⁰ = `anchor`, η⁰ = 0, μ⁰ = 0.
    ///
    /// `support` holds flat value indices; `weights[k]` belongs to
    /// `support.indices()[k]`. Entries outside the support are overwritten
    /// with `f` before returning.
    pub fn solve(
        &self,
        f: &MeshImage<T>,
        anchor: &MeshImage<T>,
        support: &SupportSet,
        weights: &[T],
    ) -> Result<AdmmOutcome<T>> {
        f.check_same_shape(anchor, "admm anchor")?;
        crate::error::check_len("admm image vertices", self.op.vertex_count(), f.vertex_count())?;
        crate::error::check_len("admm weights", support.len(), weights.len())?;
        if let Some(&last) = support.indices().last() {
            if last >= f.len() {
                return Err(Error::DimensionMismatch {
                    context: "support index",
                    expected: f.len(),
                    found: last + 1,
                });
            }
        }

        let channels = f.channels();
        let nv = f.vertex_count();
        let nt = self.op.triangle_count();
        let cfg = &self.config;
        let (beta1, beta2) = (cfg.beta1, cfg.beta2);
        let rho = self.prox_weight;

        let fp = f.planes();
        let ukp = anchor.planes();

        // per-plane y thresholds λ w_j / β₁; None marks pinned entries
        let mut thresholds: Vec<Vec<Option<T>>> = vec![vec![None; nv]; channels];
        for (&idx, &w) in support.indices().iter().zip(weights) {
            thresholds[idx % channels][idx / channels] = Some(cfg.lambda * w / beta1);
        }

        let mut state = AdmmState {
            v: ukp.clone(),
            y: vec![vec![T::zero(); nv]; channels],
            z: vec![[T::zero(); 3]; channels * nt],
            eta: vec![vec![T::zero(); nv]; channels],
            mu: vec![[T::zero(); 3]; channels * nt],
            iteration: 0,
        };
        let mut dv = vec![[T::zero(); 3]; channels * nt];
        for c in 0..channels {
            self.op.apply_into(&state.v[c], &mut dv[c * nt..(c + 1) * nt]);
        }

        let z_threshold = T::one() / beta2;
        let scale = T::one() / T::from_usize_lossy(nv * channels).sqrt();
        let mut work = vec![[T::zero(); 3]; nt];
        let mut rhs = vec![T::zero(); nv];
        let mut group = [T::zero(); 9];
        let mut residual = T::infinity();
        let mut converged = false;

        while state.iteration < cfg.inner_max_iter {
            state.iteration += 1;

            // (y, z)-step
            for c in 0..channels {
                for j in 0..nv {
                    state.y[c][j] = match thresholds[c][j] {
                        Some(t) => shrink_1d(state.v[c][j] - fp[c][j] + state.eta[c][j] / beta1, t),
                        None => T::zero(),
                    };
                }
            }
            for i in 0..nt {
                let g = &mut group[..3 * channels];
                for c in 0..channels {
                    let k = c * nt + i;
                    for d in 0..3 {
                        g[3 * c + d] = dv[k][d] + state.mu[k][d] / beta2;
                    }
                }
                shrink_vec_in_place(g, z_threshold);
                for c in 0..channels {
                    state.z[c * nt + i].copy_from_slice(&g[3 * c..3 * c + 3]);
                }
            }

            // v-step
            for c in 0..channels {
                for i in 0..nt {
                    let k = c * nt + i;
                    for d in 0..3 {
                        work[i][d] = beta2 * state.z[k][d] - state.mu[k][d];
                    }
                }
                self.op.adjoint_into(&work, self.op.triangle_areas(), &mut rhs);
                for j in 0..nv {
                    rhs[j] += beta1 * (state.y[c][j] + fp[c][j]) - state.eta[c][j] + rho * ukp[c][j];
                }
                state.v[c] = self
                    .system
                    .solve(&rhs, Some(&state.v[c]), cfg.cg_tol, cfg.cg_max_iter)?;
                self.op.apply_into(&state.v[c], &mut dv[c * nt..(c + 1) * nt]);
            }

            // multipliers and primal residuals
            let mut r_y = T::zero();
            for c in 0..channels {
                for j in 0..nv {
                    let r = state.v[c][j] - fp[c][j] - state.y[c][j];
                    state.eta[c][j] += beta1 * r;
                    r_y += r * r;
                }
            }
            let mut r_z = T::zero();
            for (k, (mu, z)) in state.mu.iter_mut().zip(&state.z).enumerate() {
                for d in 0..3 {
                    let r = dv[k][d] - z[d];
                    mu[d] += beta2 * r;
                    r_z += r * r;
                }
            }
            residual = r_y.sqrt().max(r_z.sqrt()) * scale;
            if !residual.is_finite() {
                return Err(Error::NonFiniteIterate("admm"));
            }
            if residual < cfg.inner_tol {
                converged = true;
                break;
            }
        }

        // pin Γ_c exactly
        let mut values = Vec::with_capacity(nv * channels);
        for j in 0..nv {
            for c in 0..channels {
                values.push(if thresholds[c][j].is_some() { state.v[c][j] } else { fp[c][j] });
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteIterate("admm"));
        }
        Ok(AdmmOutcome {
            image: MeshImage::from_raw(values, channels)?,
            iterations: state.iteration,
            converged,
            residual,
        })
    }
}

/// One solve of the reweighted subproblem with the config's proximal weight.
pub fn admm_solve<T: Real>(
    f: &MeshImage<T>,
    u_k: &MeshImage<T>,
    support: &SupportSet,
    weights: &[T],
    op: &GradientOperator<T>,
    config: &SolverConfig<T>,
) -> Result<AdmmOutcome<T>> {
    config.validate()?;
    AdmmSolver::new(op, config, config.prox_weight)?.solve(f, u_k, support, weights)
}

/// L₁TV: `λ Σ |u_j − f_j| + Σ |τ_i| ‖D_i u‖`, i.e. the subproblem with every
/// value free, unit weights and no proximal term.
pub fn solve_l1tv_detailed<T: Real>(
    f: &MeshImage<T>,
    op: &GradientOperator<T>,
    config: &SolverConfig<T>,
) -> Result<AdmmOutcome<T>> {
    config.validate()?;
    let support = SupportSet::full(f.len(), f.channels());
    let weights = vec![T::one(); f.len()];
    AdmmSolver::new(op, config, T::zero())?.solve(f, f, &support, &weights)
}

pub fn solve_l1tv<T: Real>(
    f: &MeshImage<T>,
    op: &GradientOperator<T>,
    config: &SolverConfig<T>,
) -> Result<MeshImage<T>> {
    let out = solve_l1tv_detailed(f, op, config)?;
    if !out.converged {
        log::warn!(
            "L1TV ADMM stopped after {} iterations at residual {:e}",
            out.iterations,
            out.residual.to_f64_lossy()
        );
    }
    Ok(out.image)
}
