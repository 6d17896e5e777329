mod common;

use common::reference_scene;
use magnon_cavity_lab::synth::*;
use magnon_cavity_lab::units::*;
use magnon_cavity_lab::CODATA_2018 as C;

fn local_maxima(row: &[f64]) -> Vec<usize> {
    (1..row.len() - 1)
        .filter(|&j| row[j] > row[j - 1] && row[j] >= row[j + 1])
        .collect()
}

#[test]
fn map_is_symmetric_under_joint_reflection() {
    let mut s = reference_scene(0.0, 0);
    let b0 = s.hybrid.b_fmr;
    s.field_grid = Grid {
        start: b0 - 0.06,
        stop: b0 + 0.06,
        step: 0.003,
    };
    let sp = synthesize(&s, &C).unwrap();
    let (nb, nf) = (sp.n_field(), sp.n_freq());
    assert!((sp.freq_axis[nf / 2] - 5.9e9).abs() < 1.0);
    for i in 0..nb {
        for j in 0..nf {
            let a = sp.at(i, j);
            let b = sp.at(nb - 1 - i, nf - 1 - j);
            assert!((a - b).abs() < 1e-6, "({i},{j}): {a} vs {b}");
        }
    }
}

#[test]
fn splitting_at_resonance_is_two_g() {
    let mut s = reference_scene(0.0, 0);
    let b0 = s.hybrid.b_fmr;
    s.field_grid = Grid {
        start: b0 - 0.03,
        stop: b0 + 0.03,
        step: 0.003,
    };
    s.freq_grid = Grid {
        start: 4.5e9,
        stop: 7.3e9,
        step: 1e5,
    };
    let sp = synthesize(&s, &C).unwrap();
    let separations: Vec<f64> = (0..sp.n_field())
        .map(|i| {
            let row = sp.row(i);
            let mut peaks = local_maxima(row);
            peaks.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
            (sp.freq_axis[peaks[0]] - sp.freq_axis[peaks[1]]).abs()
        })
        .collect();
    let mid = sp.n_field() / 2;
    let (imin, min) = separations
        .iter()
        .cloned()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    assert_eq!(imin, mid);
    // damping pulls the two transmission maxima in by far less than one step here
    assert!((min - 900e6).abs() < 1e6, "{min}");
}

#[test]
fn file_round_trip_is_lossless_and_fast() {
    let mut s = reference_scene(0.05, 11);
    s.freq_grid.step = 1.2e6;
    let sp = synthesize(&s, &C).unwrap();
    assert_eq!((sp.n_field(), sp.n_freq()), (201, 1001));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("map.csv");
    let t0 = std::time::Instant::now();
    sp.write_file(&path).unwrap();
    let back = Spectrum2D::read_file(&path).unwrap();
    let elapsed = t0.elapsed();
    assert_eq!(back, sp);
    assert!(elapsed.as_secs_f64() < 1.0, "{elapsed:?}");
}

#[test]
fn output_independent_of_thread_count() {
    let s = reference_scene(0.05, 3);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| synthesize(&s, &C).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn degenerate_two_point_grid() {
    let mut s = reference_scene(0.0, 0);
    s.field_grid = Grid {
        start: 0.1,
        stop: 0.103,
        step: 0.003,
    };
    s.freq_grid = Grid {
        start: 5.8e9,
        stop: 6.0e9,
        step: 0.2e9,
    };
    let sp = synthesize(&s, &C).unwrap();
    assert_eq!(sp.power_db.len(), 4);
    let mut buf = Vec::new();
    sp.write_to(&mut buf).unwrap();
    assert_eq!(Spectrum2D::read_from(&buf[..]).unwrap(), sp);
}

#[test]
fn decoupled_peak_height_and_width() {
    let mut s = reference_scene(0.0, 0);
    s.hybrid.g_eff = 0.0;
    s.freq_grid = Grid {
        start: 5.88e9,
        stop: 5.92e9,
        step: 1e5,
    };
    let sp = synthesize(&s, &C).unwrap();
    let row = sp.row(0);
    let j = sp.n_freq() / 2;
    // (κ_c/κ)² on resonance
    assert!((row[j] - power_to_db(0.01)).abs() < 1e-9);
    // half power at ±κ
    let k = j + 30;
    assert!((row[k] - (power_to_db(0.01) - 10.0 * 2f64.log10())).abs() < 1e-9);
}

#[test]
fn noise_has_requested_spread() {
    let mut clean = reference_scene(0.0, 0);
    clean.hybrid.g_eff = 0.0;
    let mut noisy = clean.clone();
    noisy.noise.amplitude_sigma = 0.05;
    noisy.noise.seed = 5;
    let a = synthesize(&clean, &C).unwrap();
    let b = synthesize(&noisy, &C).unwrap();
    let rel: Vec<f64> = a
        .power_db
        .iter()
        .zip(&b.power_db)
        .map(|(x, y)| 10f64.powf((y - x) / 20.0) - 1.0)
        .collect();
    let n = rel.len() as f64;
    let mean = rel.iter().sum::<f64>() / n;
    let sd = (rel.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() < 1e-3);
    assert!((sd / 0.05 - 1.0).abs() < 0.02, "{sd}");
}
