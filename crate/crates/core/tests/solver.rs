use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lptv_mesh::experiment::{run_experiment, ExperimentSpec, ImageSource, Method};
use lptv_mesh::synthetic::{icosphere, paint, Pattern, SyntheticSpec};
use lptv_mesh::{
    add_salt_pepper, objective, plm_solve, solve_l1tv, solve_normal_equation, support_eps, Config, Image,
    LinearSolver, Mesh, NoiseSpec, NormalEquationSystem, Operator,
};

/// Gaussian elimination with partial pivoting.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

#[test]
fn normal_equation_matches_dense_lu() {
    let mesh = Mesh::new(
        vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.3]],
        vec![[0, 1, 2], [1, 3, 2]],
    )
    .unwrap();
    let op = Operator::new(&mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut cfg = Config::new(1.0, 0.5);
    cfg.cg_tol = 1e-14;
    for _ in 0..20 {
        let (w, s) = (rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0));
        let mut dense = op.gram().to_dense();
        for (i, row) in dense.iter_mut().enumerate() {
            row.iter_mut().for_each(|x| *x *= w);
            row[i] += s;
        }
        let rhs: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let expected = dense_solve(dense, rhs.clone());
        for kind in [LinearSolver::Direct, LinearSolver::Cg] {
            let sys = NormalEquationSystem::new(op.gram(), w, s, kind).unwrap();
            let x = solve_normal_equation(&sys, &rhs, &cfg).unwrap();
            for (a, b) in x.iter().zip(&expected) {
                assert!((a - b).abs() <= 1e-8, "{kind:?}: {a} vs {b}");
            }
        }
    }
}

fn noisy_sphere(channels: usize, level: f64, seed: u64) -> (Mesh, Image, Image) {
    let mesh: Mesh = icosphere(3).unwrap();
    let clean = paint(&mesh, Pattern::TwoPatch, channels).unwrap();
    let noisy = add_salt_pepper(&clean, &NoiseSpec::new(level, seed).unwrap());
    (mesh, clean, noisy)
}

#[test]
fn plm_pins_values_outside_the_support_and_decreases_the_objective() {
    let (mesh, _, f) = noisy_sphere(1, 0.1, 4);
    let op = Operator::new(&mesh);
    let cfg = Config::new(0.05, 0.5);
    let u0 = solve_l1tv(&f, &op, &cfg).unwrap();
    let out = plm_solve(&f, &op, &cfg, &u0).unwrap();

    let first_support = support_eps(&u0, &f, cfg.eps_support).unwrap();
    for j in 0..f.len() {
        if !first_support.contains(j) {
            assert_eq!(out.image.values()[j], f.values()[j]);
        }
    }
    let f0 = objective(&u0, &f, &op, &cfg).unwrap();
    let f_end = objective(&out.image, &f, &op, &cfg).unwrap();
    assert!(f_end <= f0);
    assert!(out.trace.converged());
}

#[test]
fn color_images_denoise_channel_jointly() {
    let (mesh, clean, f) = noisy_sphere(3, 0.1, 7);
    let op = Operator::new(&mesh);
    let cfg = Config::new(0.05, 0.5);
    let u0 = solve_l1tv(&f, &op, &cfg).unwrap();
    let out = plm_solve(&f, &op, &cfg, &u0).unwrap();
    let restored = lptv_mesh::clamp_to_unit(&out.image).unwrap();
    let before = lptv_mesh::psnr(&f, &clean).unwrap();
    let after = lptv_mesh::psnr(&restored, &clean).unwrap();
    assert_eq!(restored.channels(), 3);
    assert!(after > before + 10.0, "{before} -> {after}");
}

#[test]
fn f32_pipeline_runs() {
    let mesh = icosphere::<f32>(2).unwrap();
    let clean = paint(&mesh, Pattern::TwoPatch, 1).unwrap();
    let f = add_salt_pepper(&clean, &NoiseSpec::new(0.1, 1).unwrap());
    let op = lptv_mesh::OperatorF32::new(&mesh);
    // coarser mesh than the other rigs, so a larger fidelity weight
    let mut cfg = lptv_mesh::ConfigF32::new(0.2, 0.5);
    cfg.inner_tol = 1e-4;
    cfg.outer_tol = 1e-4;
    let u0 = solve_l1tv(&f, &op, &cfg).unwrap();
    let out = plm_solve(&f, &op, &cfg, &u0).unwrap();
    assert!(out.image.values().iter().all(|v| v.is_finite()));
    let q = lptv_mesh::psnr(&lptv_mesh::clamp_to_unit(&out.image).unwrap(), &clean).unwrap();
    let noisy = lptv_mesh::psnr(&f, &clean).unwrap();
    assert!(q > noisy + 10.0, "{noisy} -> {q}");
}

#[test]
fn noise_free_run_returns_the_clean_image() {
    let source = ImageSource::Synthetic(SyntheticSpec {
        level: 2,
        pattern: Pattern::Checker,
        channels: 1,
    });
    let (_, clean) = source.load().unwrap();
    let mut spec = ExperimentSpec::new(source, Config::new(1.0, 0.5));
    spec.noise_levels = vec![0.0];
    spec.p_values = vec![0.5];
    spec.trials = 1;
    let dir = tempfile::tempdir().unwrap();
    spec.output_dir = Some(dir.path().to_path_buf());
    let rows = run_experiment(&spec).unwrap();
    assert_eq!(rows.len(), 2);

    let restored: Image = lptv_mesh::load_image(
        dir.path()
            .join("icosphere2_checker/0.00")
            .join(Method::Lptv(0.5).label())
            .join("restored.ply"),
    )
    .unwrap();
    for (a, b) in restored.values().iter().zip(clean.values()) {
        assert!((a - b).abs() <= 1e-6);
    }
    assert!(dir.path().join("results.csv").exists());
}
