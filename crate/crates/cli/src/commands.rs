use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use magnon_cavity_lab::analysis::{analyze, AnalysisOptions, AnalysisReport, Stage, NO_ANTICROSSING};
use magnon_cavity_lab::fit::{amplitude_sigma_to_db, write_branch_csv, write_trace_csv, FitReport};
use magnon_cavity_lab::macrospin::{build_hamiltonian, eigenvalues, splitting_vs_excitation};
use magnon_cavity_lab::physics::branches_at_detuning;
use magnon_cavity_lab::synth::{synthesize, SceneFile, SpectrumError, Spectrum2D, SynthError};
use magnon_cavity_lab::units::{ghz_to_rad, hz_to_rad, mhz_to_rad, rad_to_ghz};
use magnon_cavity_lab::CODATA_2018;
use serde_json::json;

use crate::error::CliError;
use crate::estimate::EstimateConfig;
use crate::manifest::RunManifest;
use crate::{plot, AnalyzeArgs, Cli, Command, EstimateArgs, LadderArgs, SimulateArgs};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    std::fs::create_dir_all(&cli.output_dir).map_err(|e| CliError::io(&cli.output_dir, e))?;
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a),
        Command::Analyze(a) => analyze_cmd(cli, a),
        Command::Estimate(a) => estimate(cli, a),
        Command::Ladder(a) => ladder(cli, a),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(f);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::start("simulate", cli.seed, cli.threads);
    let text = read_text(&args.config)?;
    manifest.input(&args.config)?;
    let mut file: SceneFile = serde_json::from_str(&text).map_err(|e| CliError::config(&args.config, e))?;
    if let Some(seed) = cli.seed {
        file.noise.seed = seed;
    }
    manifest.seed = Some(file.noise.seed);
    manifest.config = serde_json::to_value(&file).expect("scene serializes");
    let scene = file
        .into_scene(&CODATA_2018)
        .map_err(|e| CliError::config(&args.config, e))?;
    for w in scene.warnings() {
        eprintln!("warning: {w}");
    }
    let spectrum = synthesize(&scene, &CODATA_2018).map_err(|e| match e {
        SynthError::Io(e) => CliError::Io(e.to_string()),
        e => CliError::config(&args.config, e),
    })?;

    let out = cli.output_dir.join(&args.out);
    spectrum.write_file(&out).map_err(|e| CliError::io(&out, e))?;
    manifest.output(&out)?;
    if args.plot {
        let svg = cli.output_dir.join("spectrum.svg");
        std::fs::write(&svg, plot::heatmap(&spectrum)).map_err(|e| CliError::io(&svg, e))?;
        manifest.output(&svg)?;
    }
    println!(
        "wrote {} ({} fields × {} frequencies)",
        out.display(),
        spectrum.n_field(),
        spectrum.n_freq()
    );
    manifest.finish(&cli.output_dir)?;
    Ok(())
}

fn read_spectrum(path: &Path) -> Result<Spectrum2D, CliError> {
    Spectrum2D::read_file(path).map_err(|e| match e {
        SpectrumError::Io(e) => CliError::io(path, e),
        e => CliError::io(path, format!("unreadable spectrum: {e}")),
    })
}

fn analyze_cmd(cli: &Cli, args: &AnalyzeArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::start("analyze", cli.seed, cli.threads);
    let spectrum = read_spectrum(&args.spectrum)?;
    manifest.input(&args.spectrum)?;

    let all = !(args.slices || args.anticrossing || args.full);
    let mut options = AnalysisOptions {
        slices: args.slices || all,
        anticrossing: args.anticrossing || args.full || all,
        full: args.full || all,
        ..Default::default()
    };
    if let Some(sigma) = args.noise_sigma {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(CliError::Config(format!("--noise-sigma: {sigma} must be > 0")));
        }
        options.full_settings.noise_sigma_db = Some(amplitude_sigma_to_db(sigma));
    }
    if let Some(n) = args.max_iterations {
        if n == 0 {
            return Err(CliError::Config("--max-iterations must be at least 1".into()));
        }
        options.anticrossing_settings.optimizer.max_iterations = n;
        options.full_settings.optimizer.max_iterations = n;
    }
    manifest.config = json!({
        "max_iterations": args.max_iterations,
        "slices": options.slices,
        "anticrossing": options.anticrossing,
        "full": options.full,
        "noise_sigma": args.noise_sigma,
    });

    let report = analyze(&spectrum, &options, &CODATA_2018);
    let dir = &cli.output_dir;

    let trace_path = dir.join("linewidth_trace.csv");
    write_file(&trace_path, |w| write_trace_csv(w, &report.trace))?;
    manifest.output(&trace_path)?;
    if options.anticrossing && !report.branch_points.is_empty() {
        let path = dir.join("branch_points.csv");
        write_file(&path, |w| write_branch_csv(w, &report.branch_points))?;
        manifest.output(&path)?;
    }
    let fit_report = FitReport::from_analysis(&report, spectrum.meta.clone());
    let report_path = dir.join("fit_report.json");
    std::fs::write(&report_path, fit_report.to_json() + "\n").map_err(|e| CliError::io(&report_path, e))?;
    manifest.output(&report_path)?;
    if args.plot {
        let svg = dir.join("linewidth_trace.svg");
        std::fs::write(&svg, plot::trace(&report.trace)).map_err(|e| CliError::io(&svg, e))?;
        manifest.output(&svg)?;
    }

    print!("{}", summary_table(&report, &fit_report));
    manifest.finish(dir)?;
    convergence(&report, &options)
}

fn summary_table(report: &AnalysisReport, fit: &FitReport) -> String {
    let mut out = String::new();
    if !report.anticrossing_detected() {
        let _ = writeln!(out, "{NO_ANTICROSSING}");
    }
    let error_of = |name: &str| {
        fit.full
            .parameters
            .iter()
            .chain(&fit.anticrossing.parameters)
            .find(|p| p.name == name)
            .and_then(|p| p.error)
    };
    let s = &fit.summary;
    let rows = [
        ("g_eff/2π", "MHz", s.g_eff_mhz, error_of("g_eff")),
        ("γ/2π", "MHz", s.gamma_mhz, error_of("gamma")),
        ("κ/2π", "MHz", s.kappa_mhz, error_of("kappa")),
        ("g_s", "", s.g_s, error_of("g_s")),
        ("B_FMR", "mT", s.b_fmr_mt, error_of("b_fmr")),
        ("C", "", s.cooperativity, fit.cooperativity.as_ref().and_then(|c| c.error)),
    ];
    let _ = writeln!(out, "{:<10}{:>16}{:>14}  unit", "parameter", "value", "1σ");
    for (name, unit, value, err) in rows {
        let value = value.map_or("-".to_string(), |v| format!("{v:.6}"));
        let err = err.map_or("-".to_string(), |e| format!("{e:.3e}"));
        let _ = writeln!(out, "{name:<10}{value:>16}{err:>14}  {unit}");
    }
    out
}

/// Exit code 3 when a requested fit failed or stopped before converging.
fn convergence(report: &AnalysisReport, options: &AnalysisOptions) -> Result<(), CliError> {
    if options.anticrossing {
        match &report.anticrossing {
            Stage::Failed(m) => return Err(CliError::NotConverged(format!("anticrossing fit: {m}"))),
            Stage::Done(f) if !f.converged => {
                return Err(CliError::NotConverged("anticrossing fit hit its iteration limit".into()))
            }
            _ => {}
        }
    }
    if options.full {
        match &report.full {
            Stage::Failed(m) => return Err(CliError::NotConverged(format!("full fit: {m}"))),
            Stage::Done(f) if !f.converged => {
                return Err(CliError::NotConverged(format!("full fit: {}", f.termination)))
            }
            _ => {}
        }
    }
    Ok(())
}

fn estimate(cli: &Cli, args: &EstimateArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::start("estimate", cli.seed, cli.threads);
    let text = read_text(&args.config)?;
    manifest.input(&args.config)?;
    let cfg: EstimateConfig = serde_json::from_str(&text).map_err(|e| CliError::config(&args.config, e))?;
    manifest.config = serde_json::to_value(&cfg).expect("config serializes");
    let est = cfg
        .evaluate(&CODATA_2018)
        .map_err(|e| CliError::config(&args.config, e))?;
    print!("{}", est.table());
    let path = cli.output_dir.join("estimate.json");
    let body = serde_json::to_string_pretty(&est).expect("estimate serializes");
    std::fs::write(&path, body + "\n").map_err(|e| CliError::io(&path, e))?;
    manifest.output(&path)?;
    manifest.finish(&cli.output_dir)?;
    Ok(())
}

/// `start:stop:step`, inclusive of `stop` up to rounding.
fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Config(format!("--detuning-mhz: expected start:stop:step, got `{s}`"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0 && stop >= start && start.is_finite() && stop.is_finite()) {
        return Err(bad());
    }
    let n = ((stop - start) / step * (1.0 + 1e-12)).floor() as usize + 1;
    if n > 1_000_000 {
        return Err(CliError::Config(format!("--detuning-mhz: {n} points is too many")));
    }
    Ok((0..n).map(|k| start + step * k as f64).collect())
}

fn ladder(cli: &Cli, args: &LadderArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::start("ladder", cli.seed, cli.threads);
    manifest.config = json!({
        "spins": args.spins,
        "e_max": args.e_max,
        "g_Hz": args.g_hz,
        "f_GHz": args.f_ghz,
        "detuning_MHz": args.detuning_mhz,
    });
    let grid = parse_grid(&args.detuning_mhz)?;
    if !(args.f_ghz > 0.0 && args.f_ghz.is_finite()) {
        return Err(CliError::Config(format!("--f-ghz: {} must be > 0", args.f_ghz)));
    }
    let omega_r = ghz_to_rad(args.f_ghz);
    let g = hz_to_rad(args.g_hz);
    let g_eff = g * args.spins.sqrt();
    let ladder_err = |e| CliError::Config(format!("ladder: {e}"));

    let mut branches = String::from("detuning_MHz,lower_GHz,upper_GHz,classical_lower_GHz,classical_upper_GHz\n");
    for &d in &grid {
        let delta = mhz_to_rad(d);
        let h = build_hamiltonian(args.spins, 1, omega_r, omega_r + delta, g).map_err(ladder_err)?;
        let ev = eigenvalues(&h).map_err(ladder_err)?;
        let b = branches_at_detuning(omega_r, delta, g_eff);
        let _ = writeln!(
            branches,
            "{d},{:.16e},{:.16e},{:.16e},{:.16e}",
            rad_to_ghz(ev[0]),
            rad_to_ghz(ev[1]),
            rad_to_ghz(b.lower),
            rad_to_ghz(b.upper)
        );
    }
    let mut splitting = String::from("excitations,normalized_splitting\n");
    if g > 0.0 {
        for (e, ratio) in splitting_vs_excitation(args.spins, g, args.e_max).map_err(ladder_err)? {
            let _ = writeln!(splitting, "{e},{ratio:.16e}");
        }
    } else {
        // nothing to normalize by
        for e in 1..=args.e_max {
            let _ = writeln!(splitting, "{e},");
        }
    }

    let mut outputs: Vec<PathBuf> = Vec::new();
    for (name, body) in [("ladder_branches.csv", branches), ("ladder_splitting.csv", splitting)] {
        let path = cli.output_dir.join(name);
        std::fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        manifest.output(&path)?;
        outputs.push(path);
    }
    for p in &outputs {
        println!("wrote {}", p.display());
    }
    manifest.finish(&cli.output_dir)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("-2000:2000:40").unwrap();
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], -2000.0);
        assert_eq!(g[100], 2000.0);
        assert_eq!(parse_grid("0:0:1").unwrap(), vec![0.0]);
        assert!(parse_grid("1:0:1").is_err());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }
}
