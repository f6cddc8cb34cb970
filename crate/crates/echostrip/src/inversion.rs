//! Layer-stripping reconstruction from a single receiver record.
//!
//! Both reconstructors walk outward along the data time axis.  At each
//! layer the newest coefficient value is the only unknown: everything the
//! wave met earlier is already fixed, and everything later cannot reach
//! the receiver yet.  The ellipsoidally layered potential comes out of an
//! explicit update (the data sample minus the multiple-scattering
//! correction of the current estimate), iterated to a fixed point; the
//! radial damping profile comes out of a secant solve against the
//! characteristic march, whose near-axis column provides the model data.

use serde::Serialize;

use crate::forward::goursat::solve_radial_damping_with;
use crate::forward::lippmann::{solve_potential, VolterraConfig, WaveField};
use crate::forward::types::ReceiverWaveform;
use crate::geometry::volume_nodes;
use crate::greens::goursat_trace_damping;
use crate::profile::CoefficientProfile;
use crate::quad::pairwise_sum;
use crate::{Error, Result};

const PI: f64 = std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct InversionConfig {
    /// Layer step along the data coordinate (focal sum for the potential,
    /// lattice step for the damping march).
    pub delta: f64,
    /// Inner fixed-point / root-find tolerance, relative to the data scale.
    pub fixed_point_tol: f64,
    pub max_inner: usize,
    /// Under-relaxation of the inner update; 1 is the plain iteration.
    pub relaxation: f64,
    /// Smallest scale the convergence tests normalize by.
    pub floor: f64,
    /// Forward solver resolution for the potential reconstructor.
    pub dt: f64,
    pub n_w: usize,
    pub n_u: usize,
    pub dirs: (usize, usize),
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            delta: 0.025,
            fixed_point_tol: 1e-8,
            max_inner: 30,
            relaxation: 1.0,
            floor: 1e-6,
            dt: 0.02,
            n_w: 26,
            n_u: 12,
            dirs: (10, 6),
        }
    }
}

impl InversionConfig {
    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::Config("layer step must be positive".into()));
        }
        if !(self.fixed_point_tol > 0.0) || self.max_inner == 0 {
            return Err(Error::Config("inner iteration budget is empty".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::Config("relaxation must lie in (0, 1]".into()));
        }
        Ok(())
    }

    fn solver_for(&self, t_max: f64) -> VolterraConfig {
        VolterraConfig {
            dt: self.dt,
            t_max,
            n_w: self.n_w,
            n_u: self.n_u,
            n_theta: 1,
            w_max: None,
            born_dirs: self.dirs,
            kernel_dirs: self.dirs,
            sweeps: 1,
            support_override: None,
            causal_cap: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LayerRecord {
    /// Focal sum (potential) or radius (damping) of the layer.
    pub coord: f64,
    pub value: f64,
    pub iterations: usize,
    /// Data-space residual the layer was left with.
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub profile: CoefficientProfile,
    pub layers: Vec<LayerRecord>,
    pub converged: bool,
    /// Outer edge of the region the data window determines.
    pub causal_limit: f64,
}

/// Multiple-scattering correction of the current estimate at focal sum s:
/// the ball integral of q against its own wave, weighted so that
/// d(s) = a(s) / (8 pi) + C(s).
fn layer_correction(
    field: &WaveField,
    profile: &CoefficientProfile,
    s: f64,
    n_w: usize,
    n_u: usize,
) -> Result<f64> {
    let nodes = volume_nodes(0.5 * s, n_w, n_u, 1)?;
    let mut terms = Vec::new();
    for node in &nodes {
        let qv = profile.eval(node.x);
        if qv == 0.0 {
            continue;
        }
        let t_query = s - 0.5 * (node.w - node.u);
        terms.push(node.base * (node.w + node.u) / (16.0 * PI) * qv * field.value(node.x, t_query));
    }
    Ok(pairwise_sum(&terms))
}

/// Recover an ellipsoidally layered potential from the receiver record,
/// marching in the focal-sum coordinate up to `t_horizon`.
pub fn reconstruct_ellipsoidal_potential(
    d: &ReceiverWaveform,
    t_horizon: f64,
    cfg: &InversionConfig,
) -> Result<ReconstructionResult> {
    cfg.validate()?;
    if cfg.delta < cfg.dt {
        return Err(Error::Config(
            "layer step below the solver time step cannot be resolved".into(),
        ));
    }
    let n_layers = ((t_horizon - 1.0) / cfg.delta + 1e-9).floor() as usize;
    if n_layers == 0 {
        return Err(Error::Config(
            "data horizon leaves no room beyond the first arrival".into(),
        ));
    }
    let knot_s: Vec<f64> = (0..=n_layers).map(|k| 1.0 + k as f64 * cfg.delta).collect();
    let mut values = vec![0.0; n_layers + 1];
    let mut layers = Vec::with_capacity(n_layers);
    let d_scale = d.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(cfg.floor);

    for k in 1..=n_layers {
        let s_k = knot_s[k];
        let target_data = d.sample(s_k);
        let mut guess = values[k - 1];
        let mut iterations = 0;
        let mut residual = f64::INFINITY;
        let mut converged = false;
        while iterations < cfg.max_inner {
            iterations += 1;
            values[k] = guess;
            values[0] = values[1];
            let profile = CoefficientProfile::ellipsoidal(knot_s.clone(), values.clone())?;
            let field = solve_potential(&profile, [0.0; 3], &cfg.solver_for(s_k + cfg.dt))?;
            let c_k = layer_correction(&field, &profile, s_k, cfg.n_w, cfg.n_u)?;
            let update = 8.0 * PI * (target_data - c_k);
            let new = guess + cfg.relaxation * (update - guess);
            residual = ((new - guess) / (8.0 * PI)).abs();
            guess = new;
            if !guess.is_finite() {
                return Err(Error::LayerFailure {
                    layer: k,
                    coord: s_k,
                    reason: "fixed point diverged to a non-finite value".into(),
                });
            }
            if residual <= cfg.fixed_point_tol * d_scale {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::LayerFailure {
                layer: k,
                coord: s_k,
                reason: format!(
                    "fixed point still moving by {residual:.3e} after {iterations} iterations"
                ),
            });
        }
        values[k] = guess;
        values[0] = values[1];
        layers.push(LayerRecord {
            coord: s_k,
            value: guess,
            iterations,
            residual,
            converged,
        });
    }

    let profile = CoefficientProfile::ellipsoidal(knot_s, values)?;
    let converged = layers.iter().all(|l| l.converged);
    Ok(ReconstructionResult {
        profile,
        layers,
        converged,
        causal_limit: t_horizon,
    })
}

/// Recover a radial damping profile from the backscattering record.  The
/// value at the origin is not determined by the data and must be supplied.
/// `cfg.delta` is the characteristic lattice step; the profile is valid on
/// radii up to `t_horizon / 2`.
pub fn reconstruct_radial_damping(
    d: &ReceiverWaveform,
    a_origin: f64,
    t_horizon: f64,
    cfg: &InversionConfig,
) -> Result<ReconstructionResult> {
    cfg.validate()?;
    let h = cfg.delta;
    let n_layers = (t_horizon / h + 1e-9).floor() as usize;
    if n_layers < 2 {
        return Err(Error::Config("data horizon shorter than two lattice steps".into()));
    }
    let radii: Vec<f64> = (0..=n_layers).map(|k| 0.5 * h * k as f64).collect();
    let mut values = vec![a_origin; n_layers + 1];
    let d_scale = d.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(cfg.floor);
    let tol = cfg.fixed_point_tol * d_scale;

    let mut layers = Vec::with_capacity(n_layers + 1);
    layers.push(LayerRecord {
        coord: 0.0,
        value: a_origin,
        iterations: 0,
        residual: 0.0,
        converged: true,
    });

    for k in 1..=n_layers {
        let target = d.sample(k as f64 * h - 0.5 * h);
        let misfit = |a_k: f64, values: &mut [f64]| -> Result<f64> {
            values[k] = a_k;
            let profile =
                CoefficientProfile::radial(radii[..=k].to_vec(), values[..=k].to_vec())?;
            let a_fn = |r: f64| profile.eval_symmetric(r);
            let cone = |r: f64| goursat_trace_damping(&profile, r);
            let field =
                solve_radial_damping_with(&a_fn, k as f64 * h + 1e-9, h, &cone, None);
            Ok(field.v_node(k - 1, k) - target)
        };

        // Newton step with the front-sensitivity estimate -1 / (8 pi h),
        // then secant.
        let mut x0 = values[k - 1];
        let mut f0 = misfit(x0, &mut values)?;
        let mut iterations = 1;
        let (value, residual, converged) = if f0.abs() <= tol {
            (x0, f0.abs(), true)
        } else {
            let mut x1 = x0 + 8.0 * PI * h * f0;
            let mut f1 = misfit(x1, &mut values)?;
            iterations += 1;
            let mut done = f1.abs() <= tol;
            while !done && iterations < cfg.max_inner {
                let df = f1 - f0;
                if df.abs() < 1e-300 || !x1.is_finite() {
                    break;
                }
                let x2 = x1 - f1 * (x1 - x0) / df;
                x0 = x1;
                f0 = f1;
                x1 = x2;
                f1 = misfit(x1, &mut values)?;
                iterations += 1;
                done = f1.abs() <= tol;
            }
            (x1, f1.abs(), done)
        };
        if !converged || !value.is_finite() {
            return Err(Error::LayerFailure {
                layer: k,
                coord: radii[k],
                reason: format!(
                    "secant residual {residual:.3e} after {iterations} evaluations (tol {tol:.3e})"
                ),
            });
        }
        values[k] = value;
        layers.push(LayerRecord {
            coord: radii[k],
            value,
            iterations,
            residual,
            converged,
        });
    }

    let profile = CoefficientProfile::radial(radii, values)?;
    Ok(ReconstructionResult {
        profile,
        layers,
        converged: true,
        causal_limit: 0.5 * t_horizon,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    /// Sup of the receiver data difference over the shared window.
    pub sup_difference: f64,
    /// Largest discretization artifact the comparison could hide.
    pub noise_floor: f64,
    pub distinguishable: bool,
    /// Shell integrals of the coefficient difference at each focal sum,
    /// already scaled into data units.
    pub shell_terms: Vec<(f64, f64)>,
    /// Running integral of the shell terms, the quantity the comparison
    /// chain accumulates.
    pub shell_cumulative: f64,
}

/// Compare the receiver records of an ordered coefficient pair.  Rejects
/// pairs that are not ordered q1 >= q2 on a sample grid.  `standard` and
/// `refined` must share the data window; the noise floor combines the final
/// sweep residuals with the standard-vs-refined data delta on the coarse
/// data grid.
pub fn monotone_distinguishability_probe(
    q1: &CoefficientProfile,
    q2: &CoefficientProfile,
    standard: &VolterraConfig,
    refined: &VolterraConfig,
) -> Result<ProbeReport> {
    if (standard.t_max - refined.t_max).abs() > 1e-12 {
        return Err(Error::Config("probe runs must share the data window".into()));
    }
    let t = standard.t_max;
    verify_ordering(q1, q2)?;

    let run = |cfg: &VolterraConfig| -> Result<(ReceiverWaveform, f64)> {
        let f1 = solve_potential(q1, [0.0; 3], cfg)?;
        let f2 = solve_potential(q2, [0.0; 3], cfg)?;
        let d1 = f1.receiver_waveform(crate::RECEIVER)?;
        let d2 = f2.receiver_waveform(crate::RECEIVER)?;
        let resid = f1
            .residuals()
            .last()
            .copied()
            .unwrap_or(0.0)
            .max(f2.residuals().last().copied().unwrap_or(0.0));
        let diff = ReceiverWaveform {
            values: d1.values.iter().zip(&d2.values).map(|(x, y)| x - y).collect(),
            ..d1
        };
        Ok((diff, resid))
    };

    let (diff_std, resid_std) = run(standard)?;
    let (diff_ref, resid_ref) = run(refined)?;
    let sup_difference = diff_std.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = diff_std
        .values
        .iter()
        .chain(&diff_ref.values)
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-12);

    // Compare on the coarse data grid, where sup_difference itself lives.
    // Off-grid sampling would interpolate the coarse series across its own
    // arrival cell and read the front smear as disagreement.
    let mut refine_delta = 0.0f64;
    let mut s = 0.0;
    let step = standard.dt.max(refined.dt);
    while s <= t + 1e-12 {
        refine_delta = refine_delta.max((diff_std.sample(s) - diff_ref.sample(s)).abs());
        s += step;
    }
    let noise_floor = resid_std.max(resid_ref).max(refine_delta).max(1e-9 * scale);

    let qd = |x: [f64; 3]| q1.eval(x) - q2.eval(x);
    let mut shell_terms = Vec::new();
    let mut cumulative = 0.0;
    let n_shells = 40;
    let d_tau = (0.5 * t - 0.5) / n_shells as f64;
    for i in 1..=n_shells {
        let tau = 0.5 + i as f64 * d_tau;
        let q_term = crate::identity::shell_data_term(&qd, tau, 32, 16)? / (16.0 * PI * PI);
        cumulative += d_tau * q_term;
        shell_terms.push((tau, q_term));
    }

    Ok(ProbeReport {
        sup_difference,
        noise_floor,
        distinguishable: sup_difference > noise_floor,
        shell_terms,
        shell_cumulative: cumulative,
    })
}

fn verify_ordering(q1: &CoefficientProfile, q2: &CoefficientProfile) -> Result<()> {
    let (c1, r1) = q1.support_ball();
    let (c2, r2) = q2.support_ball();
    let reach = (crate::norm(c1) + r1).max(crate::norm(c2) + r2);
    let n = 17;
    let step = 2.0 * reach / (n - 1) as f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let x = [
                    -reach + i as f64 * step,
                    -reach + j as f64 * step,
                    -reach + k as f64 * step,
                ];
                let (a, b) = (q1.eval(x), q2.eval(x));
                if a < b - 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::Invalid(format!(
                        "pair is not ordered: q1 - q2 = {:.3e} at ({:.2}, {:.2}, {:.2})",
                        a - b,
                        x[0],
                        x[1],
                        x[2]
                    )));
                }
            }
        }
    }
    Ok(())
}
