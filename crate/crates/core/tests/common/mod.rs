#![allow(dead_code)]

use magnon_cavity_lab::fit::{FullModelProblem, LeastSquaresProblem, LorentzianProblem};
use magnon_cavity_lab::synth::{SceneConfig, SceneFile};
use magnon_cavity_lab::units::{ghz_to_rad, mhz_to_rad, mt_to_t};
use magnon_cavity_lab::CODATA_2018;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Scene file for the reference hybrid: 5.90 GHz resonator with κ/2π = 3 MHz,
/// g_s = 2.17, B_a = 24 mT, γ/2π = 50 MHz, g_eff/2π = 450 MHz, on a
/// 201 × 801 grid (0–600 mT, 5.3–6.5 GHz).
pub fn reference_scene_file(sigma: f64, seed: u64) -> SceneFile {
    serde_json::from_str(&format!(
        r#"{{
          "resonator": {{"f_GHz": 5.90, "kappa_c_MHz": 0.3, "kappa_i_MHz": 2.7}},
          "ensemble": {{"g_s": 2.17, "B_a_mT": 24.0, "gamma_MHz": 50.0}},
          "g_eff_MHz": 450.0,
          "field_grid_mT": {{"start": 0.0, "stop": 600.0, "step": 3.0}},
          "freq_grid_GHz": {{"start": 5.3, "stop": 6.5, "step": 0.0015}},
          "noise": {{"seed": {seed}, "amplitude_sigma": {sigma}}}
        }}"#
    ))
    .unwrap()
}

pub fn reference_scene(sigma: f64, seed: u64) -> SceneConfig {
    reference_scene_file(sigma, seed).into_scene(&CODATA_2018).unwrap()
}

/// Central differences with one Richardson step, per-parameter steps `h`.
pub fn central_jacobian<P: LeastSquaresProblem>(problem: &P, p: &[f64], h: &[f64]) -> DMatrix<f64> {
    let m = problem.num_residuals();
    let n = problem.num_params();
    let mut jac = DMatrix::zeros(m, n);
    let mut plus = vec![0.0; m];
    let mut minus = vec![0.0; m];
    let diff = |step: f64, j: usize, plus: &mut Vec<f64>, minus: &mut Vec<f64>| -> Vec<f64> {
        let mut q = p.to_vec();
        q[j] = p[j] + step;
        problem.residuals(&q, plus);
        q[j] = p[j] - step;
        problem.residuals(&q, minus);
        plus.iter().zip(minus.iter()).map(|(a, b)| (a - b) / (2.0 * step)).collect()
    };
    for j in 0..n {
        let d1 = diff(h[j], j, &mut plus, &mut minus);
        let d2 = diff(0.5 * h[j], j, &mut plus, &mut minus);
        for i in 0..m {
            jac[(i, j)] = (4.0 * d2[i] - d1[i]) / 3.0;
        }
    }
    jac
}

/// Largest elementwise relative disagreement. Entries below `floor` times the
/// column's largest magnitude are compared against that floor instead.
pub fn max_relative_disagreement(a: &DMatrix<f64>, b: &DMatrix<f64>, floor: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..a.ncols() {
        let col_max = b.column(j).amax();
        for i in 0..a.nrows() {
            let scale = a[(i, j)].abs().max(b[(i, j)].abs()).max(floor * col_max);
            if scale > 0.0 {
                worst = worst.max((a[(i, j)] - b[(i, j)]).abs() / scale);
            }
        }
    }
    worst
}

/// Eigenvalues of a dense symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let total: f64 = a.iter().flatten().map(|x| x * x).sum();
        if off <= 1e-30 * total {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Dense copy of a symmetric tridiagonal matrix.
pub fn dense_tridiagonal(diag: &[f64], offdiag: &[f64]) -> Vec<Vec<f64>> {
    let n = diag.len();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        a[i][i] = diag[i];
        if i + 1 < n {
            a[i][i + 1] = offdiag[i];
            a[i + 1][i] = offdiag[i];
        }
    }
    a
}

/// Worst analytic-vs-central-difference disagreement of the Lorentzian
/// slice model over `points` random parameter vectors.
pub fn lorentzian_jacobian_check(seed: u64, points: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..61).map(|i| -3.0 + 0.1 * i as f64).collect();
    let problem = LorentzianProblem {
        y: vec![0.0; x.len()],
        x,
    };
    let mut analytic = DMatrix::zeros(61, 4);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let p = [
            rng.random_range(-1.0..1.0),
            sign * rng.random_range(0.3..3.0),
            rng.random_range(0.1..5.0),
            rng.random_range(-1.0..1.0),
        ];
        assert!(problem.jacobian(&p, &mut analytic));
        let numeric = central_jacobian(&problem, &p, &[1e-3; 4]);
        worst = worst.max(max_relative_disagreement(&analytic, &numeric, 1e-6));
    }
    worst
}

/// Same for the dB transmission model on a 21 × 41 grid around the
/// reference anticrossing.
pub fn transmission_jacobian_check(seed: u64, points: usize) -> f64 {
    let c = &CODATA_2018;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields: Vec<f64> = (0..21).map(|i| mt_to_t(120.0 + 5.0 * i as f64)).collect();
    let omegas: Vec<f64> = (0..41).map(|j| ghz_to_rad(5.4 + 0.025 * j as f64)).collect();
    let data = vec![0.0; fields.len() * omegas.len()];
    let problem = FullModelProblem {
        fields: &fields,
        omegas: &omegas,
        data_db: &data,
        constants: c,
    };
    let mut analytic = DMatrix::zeros(data.len(), 7);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let kappa = mhz_to_rad(rng.random_range(2.0..20.0));
        let gamma = mhz_to_rad(rng.random_range(20.0..100.0));
        let g_s: f64 = rng.random_range(2.0..2.3);
        let p = [
            ghz_to_rad(rng.random_range(5.85..5.95)),
            kappa,
            mhz_to_rad(rng.random_range(100.0..600.0)),
            gamma,
            g_s,
            mt_to_t(rng.random_range(160.0..180.0)),
            rng.random_range(80.0..130.0),
        ];
        assert!(problem.jacobian(&p, &mut analytic));
        // steps move each Lorentzian feature by ~1e-2 of the narrowest width;
        // smaller steps drown in the rounding of a ~200 dB log
        let w = kappa.min(0.5 * gamma);
        let gamma_e = c.gyromagnetic_ratio(g_s);
        let h = [
            1e-2 * w,
            1e-2 * kappa,
            1e-2 * w,
            1e-2 * gamma,
            1e-2 * w / (gamma_e / g_s * mt_to_t(100.0)),
            1e-2 * w / gamma_e,
            1e-2,
        ];
        let numeric = central_jacobian(&problem, &p, &h);
        // entries below 1e-5 of their column sit at the oracle's rounding level
        worst = worst.max(max_relative_disagreement(&analytic, &numeric, 1e-5));
    }
    worst
}

/// `A·p − b` with a random well-conditioned `A`.
pub struct LinearProblem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl LinearProblem {
    pub fn random(seed: u64, m: usize, n: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(m, n, |i, j| rng.random_range(-1.0..1.0) + if i == j { 3.0 } else { 0.0 });
        let b = DVector::from_fn(m, |_, _| rng.random_range(-10.0..10.0));
        Self { a, b }
    }

    /// Normal-equation solution.
    pub fn exact(&self) -> DVector<f64> {
        let at = self.a.transpose();
        (&at * &self.a).cholesky().unwrap().solve(&(&at * &self.b))
    }
}

impl LeastSquaresProblem for LinearProblem {
    fn num_params(&self) -> usize {
        self.a.ncols()
    }
    fn num_residuals(&self) -> usize {
        self.a.nrows()
    }
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        let r = &self.a * DVector::from_column_slice(p) - &self.b;
        out.copy_from_slice(r.as_slice());
    }
    fn jacobian(&self, _p: &[f64], jac: &mut DMatrix<f64>) -> bool {
        jac.copy_from(&self.a);
        true
    }
}
