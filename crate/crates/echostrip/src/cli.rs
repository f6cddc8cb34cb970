//! Batch front end.  Each subcommand reads a key = value config (plus
//! inline overrides), runs the corresponding library routine, and writes
//! CSV/JSON artifacts together with a manifest of the fully resolved
//! configuration into the output directory.
//!
//! Exit codes: 0 success, 1 a residual exceeded its configured tolerance,
//! 2 configuration error, 3 solver failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_distr::Distribution;
use serde::Serialize;

use crate::config::Settings;
use crate::forward::goursat::solve_radial_damping;
use crate::forward::lippmann::{solve_potential, VolterraConfig};
use crate::forward::types::ReceiverWaveform;
use crate::geometry::{
    cartesian_to_prolate, prolate_to_cartesian, volume_integral, volume_integral_over_chords,
    EllipsoidSlice, ProlatePoint,
};
use crate::identity::{data_identity_row, radial_breakdown, shell_volume_bound_row, solve_pair};
use crate::inversion::{
    reconstruct_ellipsoidal_potential, reconstruct_radial_damping, InversionConfig,
};
use crate::profile::{CoefficientProfile, Symmetry};
use crate::report::{write_json_report, write_table, RunManifest};
use crate::{Error, Result, RECEIVER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_TOLERANCE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "echostrip",
    about = "Wave-coefficient recovery from single-receiver data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a forward problem and write the receiver waveform.
    Forward(RunArgs),
    /// Check the receiver-data integral identities numerically.
    Verify(RunArgs),
    /// Reconstruct a coefficient profile from a waveform.
    Invert(RunArgs),
    /// Exercise the prolate-spheroidal geometry against closed forms.
    GeomCheck(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Plain-text configuration file (key = value lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Inline override, key=value; repeatable, wins over the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.  Defaults to $ECHOSTRIP_OUTPUT_ROOT/<command>,
    /// falling back to ./runs/<command>.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> i32 {
    let (name, args) = match &cli.command {
        Command::Forward(a) => ("forward", a),
        Command::Verify(a) => ("verify", a),
        Command::Invert(a) => ("invert", a),
        Command::GeomCheck(a) => ("geom-check", a),
    };
    match execute(name, args) {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            eprintln!("{name}: tolerance exceeded, see report");
            EXIT_TOLERANCE
        }
        Err(e) => {
            eprintln!("{name}: {e}");
            match e {
                Error::Config(_) | Error::Profile(_) | Error::Io(_) | Error::Invalid(_) => {
                    EXIT_CONFIG
                }
                _ => EXIT_SOLVER,
            }
        }
    }
}

fn execute(name: &str, args: &RunArgs) -> Result<bool> {
    let mut settings = match &args.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::empty(),
    };
    for kv in &args.set {
        settings.apply_override(kv)?;
    }
    let dir = match &args.out {
        Some(d) => d.clone(),
        None => match std::env::var_os("ECHOSTRIP_OUTPUT_ROOT") {
            Some(root) => PathBuf::from(root).join(name),
            None => PathBuf::from("runs").join(name),
        },
    };
    std::fs::create_dir_all(&dir)?;
    match name {
        "forward" => cmd_forward(&mut settings, &dir),
        "verify" => cmd_verify(&mut settings, &dir),
        "invert" => cmd_invert(&mut settings, &dir),
        "geom-check" => cmd_geom_check(&mut settings, &dir),
        _ => unreachable!(),
    }
}

fn load_profile(path: &Path) -> Result<CoefficientProfile> {
    if !path.is_file() {
        return Err(Error::Config(format!(
            "profile file not found: {}",
            path.display()
        )));
    }
    CoefficientProfile::read_csv(path)
}

fn volterra_from(settings: &mut Settings, t_max: f64) -> Result<VolterraConfig> {
    Ok(VolterraConfig {
        dt: settings.f64_or("dt", 0.04)?,
        t_max,
        n_w: settings.usize_or("n_w", 36)?,
        n_u: settings.usize_or("n_u", 20)?,
        n_theta: settings.usize_or("n_theta", 1)?,
        w_max: settings.f64_opt("w_max")?,
        born_dirs: (
            settings.usize_or("born_dirs_mu", 12)?,
            settings.usize_or("born_dirs_theta", 8)?,
        ),
        kernel_dirs: (
            settings.usize_or("kernel_dirs_mu", 12)?,
            settings.usize_or("kernel_dirs_theta", 8)?,
        ),
        sweeps: settings.usize_or("sweeps", 2)?,
        support_override: None,
        causal_cap: None,
    })
}

fn cmd_forward(settings: &mut Settings, dir: &Path) -> Result<bool> {
    let problem = settings.string_or("problem", "potential");
    let profile = load_profile(&settings.require_path("profile")?)?;
    let t_max = settings.f64_or("t_max", 2.0)?;
    let wave = match problem.as_str() {
        "potential" => {
            let cfg = volterra_from(settings, t_max)?;
            settings.finish()?;
            let field = solve_potential(&profile, [0.0; 3], &cfg)?;
            field.receiver_waveform(RECEIVER)?
        }
        "damping" => {
            if profile.symmetry() != Symmetry::Radial {
                return Err(Error::Config(
                    "the damping solver needs a radial profile".into(),
                ));
            }
            let h = settings.f64_or("h", 1.0 / 128.0)?;
            settings.finish()?;
            solve_radial_damping(&profile, t_max, h).receiver_waveform()
        }
        other => {
            return Err(Error::Config(format!(
                "unknown problem {other:?} (potential | damping)"
            )))
        }
    };
    let mut manifest = RunManifest::new("forward", settings.resolved());
    let wave_path = dir.join("waveform.csv");
    wave.write_csv(&wave_path)?;
    manifest.stamp(&wave_path)?;
    manifest.write(dir)?;
    println!(
        "forward: {} samples at dt = {}, front at t = {}",
        wave.values.len(),
        wave.dt,
        wave.singular.arrival
    );
    Ok(true)
}

#[derive(Serialize)]
struct VerifySummary<T: Serialize> {
    mode: String,
    tolerance: f64,
    passed: bool,
    rows: Vec<T>,
}

fn cmd_verify(settings: &mut Settings, dir: &Path) -> Result<bool> {
    let mode = settings.string_or("mode", "identity");
    let tolerance = settings.f64_or("tolerance", 0.05)?;
    match mode.as_str() {
        "identity" | "bound" => {
            let q1 = load_profile(&settings.require_path("q1")?)?;
            let q2 = load_profile(&settings.require_path("q2")?)?;
            let taus = settings.list_or("taus", &[1.15, 1.4, 1.65, 1.9])?;
            let vol = (
                settings.usize_or("vol_w", 24)?,
                settings.usize_or("vol_u", 16)?,
                settings.usize_or("vol_theta", 1)?,
            );
            let n_time = settings.usize_or("vol_time", 12)?;
            let t_need = taus.iter().fold(1.0f64, |m, t| m.max(2.0 * t)) + 0.1;
            let mut cfg = volterra_from(settings, t_need)?;
            // The volume terms sample the fields out to focal sum 2 tau, so
            // the lattice must reach at least that far.
            if cfg.w_max.is_none() {
                cfg.w_max = Some(t_need);
            }
            settings.finish()?;
            let manifest_cfg = settings.resolved();
            let pair = solve_pair(&q1, &q2, &cfg)?;

            if mode == "identity" {
                let mut rows = Vec::new();
                for &tau in &taus {
                    rows.push(data_identity_row(&pair, &q1, &q2, tau, vol, n_time)?);
                }
                let passed = rows
                    .iter()
                    .all(|r| r.residual <= tolerance * r.scale.max(1e-12));
                let mut manifest = RunManifest::new("verify", manifest_cfg);
                let table: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.tau,
                            r.data_difference,
                            r.shell_term,
                            r.outgoing_term,
                            r.returning_term,
                            r.overlap_term,
                            r.rhs,
                            r.residual,
                        ]
                    })
                    .collect();
                write_table(
                    &dir.join("identity.csv"),
                    &manifest.config_hash,
                    &[
                        "tau",
                        "data_difference",
                        "shell_term",
                        "outgoing_term",
                        "returning_term",
                        "overlap_term",
                        "rhs",
                        "residual",
                    ],
                    &table,
                )?;
                manifest.record(&dir.join("identity.csv"))?;
                let summary = VerifySummary {
                    mode,
                    tolerance,
                    passed,
                    rows,
                };
                write_json_report(&dir.join("identity.json"), &manifest.config_hash, &summary)?;
                manifest.record(&dir.join("identity.json"))?;
                manifest.write(dir)?;
                println!(
                    "verify identity: {} shells, worst residual {:.3e}",
                    summary.rows.len(),
                    summary
                        .rows
                        .iter()
                        .map(|r| r.residual)
                        .fold(0.0f64, f64::max)
                );
                Ok(passed)
            } else {
                let mut rows = Vec::new();
                let mut k_floor = 0.0;
                let mut sorted = taus.clone();
                sorted.sort_by(f64::total_cmp);
                for &tau in &sorted {
                    let row = shell_volume_bound_row(&pair, &q1, &q2, tau, vol, n_time, k_floor)?;
                    k_floor = row.k_sup;
                    rows.push(row);
                }
                let passed = rows.iter().all(|r| r.holds);
                let mut manifest = RunManifest::new("verify", manifest_cfg);
                let table: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.tau,
                            r.correction_magnitude,
                            r.k_sup,
                            r.chord_integral,
                            r.bound,
                        ]
                    })
                    .collect();
                write_table(
                    &dir.join("bound.csv"),
                    &manifest.config_hash,
                    &["tau", "correction_magnitude", "k_sup", "chord_integral", "bound"],
                    &table,
                )?;
                manifest.record(&dir.join("bound.csv"))?;
                let summary = VerifySummary {
                    mode,
                    tolerance,
                    passed,
                    rows,
                };
                write_json_report(&dir.join("bound.json"), &manifest.config_hash, &summary)?;
                manifest.record(&dir.join("bound.json"))?;
                manifest.write(dir)?;
                Ok(passed)
            }
        }
        "radial" => {
            let a1 = load_profile(&settings.require_path("a1")?)?;
            let a2 = load_profile(&settings.require_path("a2")?)?;
            if a1.symmetry() != Symmetry::Radial || a2.symmetry() != Symmetry::Radial {
                return Err(Error::Config("radial mode needs radial profiles".into()));
            }
            let sigmas = settings.list_or("sigmas", &[0.3, 0.45, 0.6])?;
            let h = settings.f64_or("h", 1.0 / 192.0)?;
            settings.finish()?;
            let t_need = sigmas.iter().fold(0.0f64, |m, s| m.max(2.0 * s)) + 5.0 * h;
            let f1 = solve_radial_damping(&a1, t_need, h);
            let f2 = solve_radial_damping(&a2, t_need, h);
            let mut rows = Vec::new();
            for &sigma in &sigmas {
                let snapped = (2.0 * sigma / h).round() * 0.5 * h;
                rows.push(radial_breakdown(&a1, &a2, &f1, &f2, snapped)?);
            }
            let passed = rows.iter().all(|r| {
                let scale = r
                    .data_term
                    .abs()
                    .max(r.surface_derivative.abs())
                    .max(r.overlap.abs())
                    .max(1e-12);
                r.residual <= tolerance * scale
            });
            let mut manifest = RunManifest::new("verify", settings.resolved());
            let table: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.sigma,
                        r.surface_mean,
                        r.surface_derivative,
                        r.first_front,
                        r.second_front,
                        r.first_cross,
                        r.second_cross,
                        r.overlap,
                        r.sum,
                        r.data_term,
                        r.residual,
                    ]
                })
                .collect();
            write_table(
                &dir.join("radial_identity.csv"),
                &manifest.config_hash,
                &[
                    "sigma",
                    "surface_mean",
                    "surface_derivative",
                    "first_front",
                    "second_front",
                    "first_cross",
                    "second_cross",
                    "overlap",
                    "sum",
                    "data_term",
                    "residual",
                ],
                &table,
            )?;
            manifest.record(&dir.join("radial_identity.csv"))?;
            let summary = VerifySummary {
                mode,
                tolerance,
                passed,
                rows,
            };
            write_json_report(
                &dir.join("radial_identity.json"),
                &manifest.config_hash,
                &summary,
            )?;
            manifest.record(&dir.join("radial_identity.json"))?;
            manifest.write(dir)?;
            Ok(passed)
        }
        other => Err(Error::Config(format!(
            "unknown mode {other:?} (identity | bound | radial)"
        ))),
    }
}

#[derive(Serialize)]
struct InvertSummary {
    problem: String,
    converged: bool,
    causal_limit: f64,
    layers: Vec<crate::inversion::LayerRecord>,
    reference_error: Option<f64>,
    reference_scale: Option<f64>,
}

fn cmd_invert(settings: &mut Settings, dir: &Path) -> Result<bool> {
    let problem = settings.string_or("problem", "potential");
    let data_path = settings.require_path("data")?;
    if !data_path.is_file() {
        return Err(Error::Config(format!(
            "data file not found: {}",
            data_path.display()
        )));
    }
    let mut wave = ReceiverWaveform::read_csv(&data_path)?;
    if let Some(snr) = settings.f64_opt("noise_snr")? {
        let seed = settings.u64_or("seed", 7)?;
        if !(snr > 0.0) {
            return Err(Error::Config("noise_snr must be positive".into()));
        }
        let scale = wave.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let sigma = scale / snr;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let normal = rand_distr::Normal::new(0.0, sigma)
            .map_err(|e| Error::Config(format!("noise model: {e}")))?;
        for (k, v) in wave.values.iter_mut().enumerate() {
            if wave.start + wave.dt * k as f64 >= wave.singular.arrival {
                *v += normal.sample(&mut rng);
            }
        }
    }
    let data_end = wave.start + wave.dt * (wave.values.len().saturating_sub(1)) as f64;
    let t_horizon = settings.f64_or("t_horizon", data_end)?;
    let reference = settings.path_opt("reference");
    let reference_tolerance = settings.f64_or("reference_tolerance", 0.05)?;

    let result = match problem.as_str() {
        "potential" => {
            let cfg = InversionConfig {
                delta: settings.f64_or("delta", 0.025)?,
                fixed_point_tol: settings.f64_or("tolerance", 1e-8)?,
                max_inner: settings.usize_or("max_inner", 30)?,
                relaxation: settings.f64_or("relaxation", 1.0)?,
                floor: settings.f64_or("floor", 1e-6)?,
                dt: settings.f64_or("dt", 0.02)?,
                n_w: settings.usize_or("n_w", 26)?,
                n_u: settings.usize_or("n_u", 12)?,
                dirs: (
                    settings.usize_or("dirs_mu", 10)?,
                    settings.usize_or("dirs_theta", 6)?,
                ),
            };
            settings.finish()?;
            reconstruct_ellipsoidal_potential(&wave, t_horizon, &cfg)?
        }
        "damping" => {
            let a0 = settings.f64_or("a0", 0.0)?;
            let cfg = InversionConfig {
                delta: settings.f64_or("delta", 1.0 / 64.0)?,
                fixed_point_tol: settings.f64_or("tolerance", 1e-8)?,
                max_inner: settings.usize_or("max_inner", 30)?,
                ..InversionConfig::default()
            };
            settings.finish()?;
            reconstruct_radial_damping(&wave, a0, t_horizon, &cfg)?
        }
        other => {
            return Err(Error::Config(format!(
                "unknown problem {other:?} (potential | damping)"
            )))
        }
    };

    let (reference_error, reference_scale) = match reference {
        Some(path) => {
            let truth = load_profile(&path)?;
            let mut err = 0.0f64;
            let mut scale = 0.0f64;
            for layer in &result.layers {
                err = err.max((layer.value - truth.eval_symmetric(layer.coord)).abs());
                scale = scale.max(truth.eval_symmetric(layer.coord).abs());
            }
            (Some(err), Some(scale))
        }
        None => (None, None),
    };
    let passed = result.converged
        && match (reference_error, reference_scale) {
            (Some(e), Some(s)) => e <= reference_tolerance * s.max(1e-12),
            _ => true,
        };

    let mut manifest = RunManifest::new("invert", settings.resolved());
    let profile_path = dir.join("profile.csv");
    result.profile.write_csv(&profile_path)?;
    manifest.stamp(&profile_path)?;
    let table: Vec<Vec<f64>> = result
        .layers
        .iter()
        .map(|l| {
            vec![
                l.coord,
                l.value,
                l.iterations as f64,
                l.residual,
                if l.converged { 1.0 } else { 0.0 },
            ]
        })
        .collect();
    write_table(
        &dir.join("layers.csv"),
        &manifest.config_hash,
        &["coord", "value", "iterations", "residual", "converged"],
        &table,
    )?;
    manifest.record(&dir.join("layers.csv"))?;
    let summary = InvertSummary {
        problem,
        converged: result.converged,
        causal_limit: result.causal_limit,
        layers: result.layers,
        reference_error,
        reference_scale,
    };
    write_json_report(&dir.join("inversion.json"), &manifest.config_hash, &summary)?;
    manifest.record(&dir.join("inversion.json"))?;
    manifest.write(dir)?;
    println!(
        "invert: {} layers to coordinate {:.4}{}",
        summary.layers.len(),
        summary.causal_limit,
        match reference_error {
            Some(e) => format!(", reference error {e:.3e}"),
            None => String::new(),
        }
    );
    Ok(passed)
}

#[derive(Serialize)]
struct GeomCheckRow {
    check: String,
    value: f64,
    reference: f64,
    error: f64,
    tolerance: f64,
    passed: bool,
}

fn cmd_geom_check(settings: &mut Settings, dir: &Path) -> Result<bool> {
    use rand::Rng;
    let tau = settings.f64_or("tau", 1.0)?;
    let n_u = settings.usize_or("n_u", 48)?;
    let n_theta = settings.usize_or("n_theta", 24)?;
    let n_w = settings.usize_or("n_w", 32)?;
    let samples = settings.usize_or("samples", 10_000)?;
    let seed = settings.u64_or("seed", 7)?;
    settings.finish()?;

    let mut rows = Vec::new();
    let mut push = |check: &str, value: f64, reference: f64, tolerance: f64| {
        let scale = reference.abs().max(1.0);
        let error = (value - reference).abs() / scale;
        rows.push(GeomCheckRow {
            check: check.to_string(),
            value,
            reference,
            error,
            tolerance,
            passed: error <= tolerance,
        });
    };

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let p = ProlatePoint {
            rho: rng.gen_range(1e-3..2.0f64),
            phi: rng.gen_range(1e-3..std::f64::consts::PI - 1e-3),
            theta: rng.gen_range(0.0..std::f64::consts::TAU),
        };
        let x = prolate_to_cartesian(p);
        let (q, _) = cartesian_to_prolate(x);
        let back = prolate_to_cartesian(q);
        worst = worst.max(crate::dist(x, back));
    }
    push("coordinate_round_trip", worst, 0.0, 1e-12);

    let slice = EllipsoidSlice::new(tau, n_u, n_theta)?;
    push(
        "shell_area",
        slice.area(),
        crate::oracles::spheroid_area(tau),
        1e-6,
    );
    push(
        "enclosed_volume",
        volume_integral(tau, n_w, n_u, 1, |_| 1.0)?,
        crate::oracles::spheroid_volume(tau),
        1e-9,
    );
    push(
        "chord_weighted_volume",
        volume_integral_over_chords(tau, n_w, n_u, 1, |_| 1.0)?,
        std::f64::consts::TAU * (tau - 0.5) * 2.0,
        1e-9,
    );

    let passed = rows.iter().all(|r| r.passed);
    let mut manifest = RunManifest::new("geom-check", settings.resolved());
    write_json_report(&dir.join("geometry.json"), &manifest.config_hash, &rows)?;
    manifest.record(&dir.join("geometry.json"))?;
    manifest.write(dir)?;
    for r in &rows {
        println!(
            "geom-check {}: {} (tol {:.1e})",
            r.check,
            if r.passed { "ok" } else { "FAIL" },
            r.tolerance
        );
    }
    Ok(passed)
}
