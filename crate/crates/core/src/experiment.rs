//! Denoising experiment harness: corrupt a clean image at several noise
//! levels, restore it with L₁TV and with L_pTV for several exponents, and
//! tabulate PSNR, timings and iteration counts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::admm::solve_l1tv_detailed;
use crate::diffops::GradientOperator;
use crate::error::{Error, Result};
use crate::imaging::{add_salt_pepper, clamp_to_unit, psnr, MeshImage, NoiseSpec};
use crate::io::{load_image, load_mesh, write_image_ply, write_text_file, MeshFormat};
use crate::lptv::{plm_solve, SolverConfig, SolverTrace};
use crate::mesh::TriangleMesh;
use crate::synthetic::SyntheticSpec;

pub const DEFAULT_NOISE_LEVELS: [f64; 4] = [0.05, 0.10, 0.20, 0.30];
pub const DEFAULT_P_VALUES: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
pub const DEFAULT_TRIALS: usize = 10;

pub const RESULTS_HEADER: &str = "image,noise_level,method,psnr_db,wall_time_s,outer_iters";

#[derive(Clone, Debug, PartialEq)]
pub enum ImageSource {
    Files { mesh: PathBuf, image: PathBuf },
    Synthetic(SyntheticSpec),
}

impl ImageSource {
    pub fn name(&self) -> String {
        match self {
            Self::Files { image, .. } => image
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("image")
                .to_string(),
            Self::Synthetic(s) => s.name(),
        }
    }

    pub fn load(&self) -> Result<(TriangleMesh<f64>, MeshImage<f64>)> {
        match self {
            Self::Files { mesh, image } => {
                let format = MeshFormat::from_path(mesh).ok_or_else(|| {
                    Error::InvalidParams(format!("cannot infer mesh format of {}", mesh.display()))
                })?;
                let m = load_mesh(mesh, format)?;
                let im = load_image(image)?;
                crate::error::check_len("image vertex count", m.vertex_count(), im.vertex_count())?;
                Ok((m, im))
            }
            Self::Synthetic(s) => s.generate(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub source: ImageSource,
    /// Where restored images, traces and `results.csv` go; `None` writes
    /// nothing.
    pub output_dir: Option<PathBuf>,
    pub noise_levels: Vec<f64>,
    pub p_values: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub solver: SolverConfig<f64>,
    /// When false, wall times are reported as 0 so that repeated runs give
    /// byte-identical tables.
    pub record_timing: bool,
}

impl ExperimentSpec {
    pub fn new(source: ImageSource, solver: SolverConfig<f64>) -> Self {
        Self {
            source,
            output_dir: None,
            noise_levels: DEFAULT_NOISE_LEVELS.to_vec(),
            p_values: DEFAULT_P_VALUES.to_vec(),
            trials: DEFAULT_TRIALS,
            base_seed: 0,
            solver,
            record_timing: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParams("trials must be positive".into()));
        }
        if let Some(l) = self.noise_levels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::InvalidParams(format!("noise level {l} outside [0, 1]")));
        }
        if let Some(p) = self.p_values.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(Error::InvalidParams(format!("p = {p} outside (0, 1]")));
        }
        self.solver.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    L1tv,
    Lptv(f64),
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Self::L1tv => "L1TV".to_string(),
            Self::Lptv(p) => format!("LpTV_p{p}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub image_name: String,
    pub noise_level: f64,
    pub method: Method,
    pub psnr_db: f64,
    pub wall_time_s: f64,
    pub outer_iters: usize,
}

/// One restoration of one noisy realization.
#[derive(Clone, Debug)]
pub struct MethodRun {
    pub method: Method,
    /// Solver output before clamping.
    pub raw: MeshImage<f64>,
    pub restored: MeshImage<f64>,
    pub psnr_db: f64,
    pub wall_time_s: f64,
    pub outer_iters: usize,
    pub trace: Option<SolverTrace<f64>>,
}

#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub noise_level: f64,
    pub seed: u64,
    pub noisy: MeshImage<f64>,
    pub noisy_psnr_db: f64,
    /// L₁TV first, then one run per p in the order given.
    pub runs: Vec<MethodRun>,
}

/// Noise synthesis, L₁TV warm start and one PLM run per exponent, for a
/// single (noise level, seed) cell.
pub fn run_trial(
    clean: &MeshImage<f64>,
    op: &GradientOperator<f64>,
    solver: &SolverConfig<f64>,
    noise_level: f64,
    seed: u64,
    p_values: &[f64],
) -> Result<TrialOutcome> {
    let noisy = add_salt_pepper(clean, &NoiseSpec::new(noise_level, seed)?);
    let noisy_psnr_db = psnr(&noisy, clean)?;
    let mut runs = Vec::with_capacity(1 + p_values.len());

    let start = Instant::now();
    let l1cfg = SolverConfig { p: 1.0, ..solver.clone() };
    let l1 = solve_l1tv_detailed(&noisy, op, &l1cfg).map_err(|e| e.in_stage("L1TV", format!("noise {noise_level}, seed {seed}")))?;
    let l1_time = start.elapsed().as_secs_f64();
    if !l1.converged {
        log::warn!("L1TV did not reach the inner tolerance (noise {noise_level}, seed {seed})");
    }
    let restored = clamp_to_unit(&l1.image)?;
    runs.push(MethodRun {
        method: Method::L1tv,
        psnr_db: psnr(&restored, clean)?,
        raw: l1.image.clone(),
        restored,
        wall_time_s: l1_time,
        outer_iters: 1,
        trace: None,
    });

    for &p in p_values {
        let cfg = SolverConfig { p, ..solver.clone() };
        let start = Instant::now();
        let out = plm_solve(&noisy, op, &cfg, &l1.image)
            .map_err(|e| e.in_stage("LpTV", format!("noise {noise_level}, seed {seed}, p {p}")))?;
        // the warm start is part of the method's cost
        let elapsed = start.elapsed().as_secs_f64() + l1_time;
        let restored = clamp_to_unit(&out.image)?;
        runs.push(MethodRun {
            method: Method::Lptv(p),
            psnr_db: psnr(&restored, clean)?,
            raw: out.image,
            restored,
            wall_time_s: elapsed,
            outer_iters: out.trace.iterations(),
            trace: Some(out.trace),
        });
    }

    Ok(TrialOutcome {
        noise_level,
        seed,
        noisy,
        noisy_psnr_db,
        runs,
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Runs the full grid and returns one averaged row per (noise level, method).
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let (mesh, clean) = spec.source.load()?;
    let op = GradientOperator::new(&mesh);
    op.gram();
    let name = spec.source.name();

    let mut rows = Vec::new();
    for &level in &spec.noise_levels {
        let trials: Vec<TrialOutcome> = (0..spec.trials)
            .into_par_iter()
            .map(|t| run_trial(&clean, &op, &spec.solver, level, spec.base_seed + t as u64, &spec.p_values))
            .collect::<Result<_>>()?;

        let methods = trials[0].runs.iter().map(|r| r.method).collect::<Vec<_>>();
        for (m, &method) in methods.iter().enumerate() {
            let runs = trials.iter().map(|t| &t.runs[m]);
            let iters = mean(runs.clone().map(|r| r.outer_iters as f64)).round() as usize;
            rows.push(ResultRow {
                image_name: name.clone(),
                noise_level: level,
                method,
                psnr_db: mean(runs.clone().map(|r| r.psnr_db)),
                wall_time_s: if spec.record_timing {
                    mean(runs.clone().map(|r| r.wall_time_s))
                } else {
                    0.0
                },
                outer_iters: iters,
            });
        }

        if let Some(dir) = &spec.output_dir {
            write_cell_outputs(dir, &name, &mesh, &trials[0])?;
        }
    }

    if let Some(dir) = &spec.output_dir {
        write_text_file(&dir.join("results.csv"), &results_csv(&rows))?;
    }
    Ok(rows)
}

fn noise_dir(level: f64) -> String {
    format!("{level:.2}")
}

/// Writes `{image}/{noise}/noisy.ply` and, per method,
/// `{image}/{noise}/{method}/restored.ply` plus `trace.csv` for the first
/// trial of the cell.
fn write_cell_outputs(dir: &Path, name: &str, mesh: &TriangleMesh<f64>, trial: &TrialOutcome) -> Result<()> {
    let cell = dir.join(name).join(noise_dir(trial.noise_level));
    write_image_ply(cell.join("noisy.ply"), mesh, &clamp_to_unit(&trial.noisy)?)?;
    for run in &trial.runs {
        let mdir = cell.join(run.method.label());
        write_image_ply(mdir.join("restored.ply"), mesh, &run.restored)?;
        if let Some(trace) = &run.trace {
            write_text_file(&mdir.join("trace.csv"), &trace.to_csv())?;
        }
    }
    Ok(())
}

fn fmt_db(x: f64) -> String {
    if x.is_infinite() {
        "inf".to_string()
    } else {
        format!("{x:.4}")
    }
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut s = String::from(RESULTS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.3},{}",
            r.image_name,
            r.noise_level,
            r.method.label(),
            fmt_db(r.psnr_db),
            r.wall_time_s,
            r.outer_iters
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::Pattern;

    fn small_spec() -> ExperimentSpec {
        let source = ImageSource::Synthetic(SyntheticSpec {
            level: 2,
            pattern: Pattern::TwoPatch,
            channels: 1,
        });
        let mut solver = SolverConfig::new(0.3, 0.5);
        solver.outer_max_iter = 20;
        solver.inner_max_iter = 300;
        let mut spec = ExperimentSpec::new(source, solver);
        spec.noise_levels = vec![0.0, 0.1];
        spec.p_values = vec![0.5];
        spec.trials = 2;
        spec.record_timing = false;
        spec
    }

    #[test]
    fn row_count_and_header() {
        let spec = small_spec();
        let rows = run_experiment(&spec).unwrap();
        assert_eq!(rows.len(), spec.noise_levels.len() * (1 + spec.p_values.len()));
        let csv = results_csv(&rows);
        assert!(csv.starts_with(RESULTS_HEADER));
        assert_eq!(csv.lines().count(), rows.len() + 1);
    }

    #[test]
    fn rejects_bad_grid() {
        let mut spec = small_spec();
        spec.p_values = vec![1.5];
        assert!(run_experiment(&spec).is_err());
        let mut spec = small_spec();
        spec.noise_levels = vec![-0.1];
        assert!(run_experiment(&spec).is_err());
        let mut spec = small_spec();
        spec.trials = 0;
        assert!(run_experiment(&spec).is_err());
    }

    #[test]
    fn method_labels() {
        assert_eq!(Method::L1tv.label(), "L1TV");
        assert_eq!(Method::Lptv(0.1).label(), "LpTV_p0.1");
    }
}
