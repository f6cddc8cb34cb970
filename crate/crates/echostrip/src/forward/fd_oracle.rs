//! Reference solvers built on nothing but finite differences and a
//! mollified source.  They share no calculus with the characteristic or
//! retarded-potential solvers, which is the point: agreement between the
//! two families is the main end-to-end check on the front formulas.
//!
//! The mollified point source eta_eps(t) delta(x) has the exact free field
//! u_f = eta_eps(t - r) / (4 pi r), so only the remainder w = u - u_f is
//! simulated.  For the potential problem w picks up the source
//! q u_f; for damping it picks up -a d_t u_f.  In both cases w coincides
//! with the tail v once the smeared front has passed (t > r + eps).

use crate::forward::types::{ReceiverWaveform, SingularPart};
use crate::oracles::Mollifier;
use crate::quad::pairwise_sum;
use crate::{dist, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Potential,
    Damping,
}

#[derive(Debug, Clone)]
pub struct RadialFdRun {
    pub kind: ProblemKind,
    pub h: f64,
    pub dt: f64,
    pub eps: f64,
    /// Simulation times; the run starts at -eps when the source switches on.
    pub times: Vec<f64>,
    /// v(0, t) per time step.
    pub origin: Vec<f64>,
    /// (probe radius snapped to the grid, v(r, t) per time step).
    pub probes: Vec<(f64, Vec<f64>)>,
}

/// Leapfrog solve of the radial 1+1D reduction phi = r u on [0, t_max + 1].
/// The damping term is handled implicitly (trapezoid in time), so the only
/// stability constraint is the wave CFL dt < h.
pub fn solve_radial_fd(
    kind: ProblemKind,
    coeff: &dyn Fn(f64) -> f64,
    t_max: f64,
    eps: f64,
    h: f64,
    probe_radii: &[f64],
) -> Result<RadialFdRun> {
    let dt = 0.9 * h;
    if dt >= h {
        return Err(Error::CflViolation { dt, limit: h });
    }
    if eps < 4.0 * h {
        return Err(Error::StepTooLarge(format!(
            "mollifier width {eps} needs at least four cells, h = {h}"
        )));
    }
    let r_max = t_max + 1.0;
    let m = (r_max / h).ceil() as usize;
    let steps = ((t_max + eps) / dt).ceil() as usize;
    let kind_sign = match kind {
        ProblemKind::Potential => 1.0,
        ProblemKind::Damping => 0.0,
    };

    let a: Vec<f64> = (0..=m).map(|i| coeff(h * i as f64)).collect();
    let probe_idx: Vec<usize> = probe_radii
        .iter()
        .map(|&r| (r / h).round() as usize)
        .collect();
    for &i in &probe_idx {
        if i == 0 || i >= m {
            return Err(Error::Invalid("probe radius outside the grid".into()));
        }
    }

    let bump = Mollifier::CosineBump;
    let source = |r: f64, t: f64, q: f64| -> f64 {
        match kind {
            ProblemKind::Potential => q * bump.eval(eps, t - r) / (4.0 * std::f64::consts::PI),
            ProblemKind::Damping => {
                -q * bump.eval_deriv(eps, t - r) / (4.0 * std::f64::consts::PI)
            }
        }
    };

    let mut prev = vec![0.0f64; m + 1];
    let mut cur = vec![0.0f64; m + 1];
    let mut next = vec![0.0f64; m + 1];
    let mut times = Vec::with_capacity(steps + 1);
    let mut origin = Vec::with_capacity(steps + 1);
    let mut probes: Vec<(f64, Vec<f64>)> = probe_idx
        .iter()
        .map(|&i| (h * i as f64, Vec::with_capacity(steps + 1)))
        .collect();

    let record = |t: f64, cur: &[f64], origin: &mut Vec<f64>, probes: &mut Vec<(f64, Vec<f64>)>, times: &mut Vec<f64>| {
        times.push(t);
        origin.push((8.0 * cur[1] - cur[2]) / (6.0 * h));
        for (slot, &i) in probes.iter_mut().zip(&probe_idx) {
            slot.1.push(cur[i] / (h * i as f64));
        }
    };

    let t0 = -eps;
    record(t0, &cur, &mut origin, &mut probes, &mut times);
    // Kreiss-Oliger strength; leapfrog leaves zero-group-velocity sawtooth
    // modes ringing at the origin forever without it.
    let sigma = 0.02;
    for n in 0..steps {
        let t = t0 + dt * n as f64;
        for i in 1..m {
            let lap = (cur[i + 1] - 2.0 * cur[i] + cur[i - 1]) / (h * h);
            let r = h * i as f64;
            let rhs = lap + kind_sign * a[i] * cur[i] + source(r, t, a[i]);
            // phi = r v is odd in r, so the stencil reflects through zero.
            let left2 = if i >= 2 { cur[i - 2] } else { -cur[2 - i] };
            let right2 = if i + 2 <= m { cur[i + 2] } else { 0.0 };
            let dissipation = sigma
                * (left2 - 4.0 * cur[i - 1] + 6.0 * cur[i] - 4.0 * cur[i + 1] + right2);
            next[i] = match kind {
                ProblemKind::Potential => {
                    2.0 * cur[i] - prev[i] + dt * dt * rhs - dissipation
                }
                ProblemKind::Damping => {
                    let ad = 0.5 * a[i] * dt;
                    (2.0 * cur[i] - (1.0 - ad) * prev[i] + dt * dt * rhs - dissipation)
                        / (1.0 + ad)
                }
            };
        }
        next[0] = 0.0;
        next[m] = 0.0;
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        record(t0 + dt * (n + 1) as f64, &cur, &mut origin, &mut probes, &mut times);
    }

    Ok(RadialFdRun {
        kind,
        h,
        dt,
        eps,
        times,
        origin,
        probes,
    })
}

impl RadialFdRun {
    pub fn probe_series(&self, idx: usize) -> (&f64, &[f64]) {
        let (r, v) = &self.probes[idx];
        (r, v)
    }

    /// Extrapolate the tail back onto the front at a probe: least-squares
    /// line through v(t) over t in [r + window.0, r + window.1], evaluated
    /// at t = r.  The window must sit behind the smeared front.
    pub fn trace_at_probe(&self, idx: usize, window: (f64, f64)) -> Result<f64> {
        let (r, v) = (&self.probes[idx].0, &self.probes[idx].1);
        if window.0 < self.eps {
            return Err(Error::Invalid(format!(
                "extrapolation window starts at {} inside the smeared front ({})",
                window.0, self.eps
            )));
        }
        extrapolate_to_front(&self.times, v, *r, window)
    }

    pub fn origin_waveform(&self) -> ReceiverWaveform {
        ReceiverWaveform {
            source: [0.0; 3],
            receiver: [0.0; 3],
            start: self.times[0],
            dt: self.dt,
            values: self.origin.clone(),
            singular: SingularPart {
                arrival: 0.0,
                amplitude: None,
            },
            solver: "fd".into(),
        }
    }
}

/// Least-squares linear fit of (t, v) over t in [r0 + window.0,
/// r0 + window.1], returning the fitted value at t = r0.
pub fn extrapolate_to_front(
    times: &[f64],
    series: &[f64],
    r0: f64,
    window: (f64, f64),
) -> Result<f64> {
    let (lo, hi) = (r0 + window.0, r0 + window.1);
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(series)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(t, v)| (*t - r0, *v))
        .collect();
    if pts.len() < 4 {
        return Err(Error::Invalid(format!(
            "only {} samples in extrapolation window [{lo}, {hi}]",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let sx = pairwise_sum(&pts.iter().map(|p| p.0).collect::<Vec<_>>());
    let sy = pairwise_sum(&pts.iter().map(|p| p.1).collect::<Vec<_>>());
    let sxx = pairwise_sum(&pts.iter().map(|p| p.0 * p.0).collect::<Vec<_>>());
    let sxy = pairwise_sum(&pts.iter().map(|p| p.0 * p.1).collect::<Vec<_>>());
    let det = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / det;
    Ok((sy - slope * sx) / n)
}

#[derive(Debug, Clone)]
pub struct Fd3dConfig {
    pub h: f64,
    pub eps: f64,
    pub t_max: f64,
    pub box_lo: [f64; 3],
    pub box_hi: [f64; 3],
}

/// 3D leapfrog for the potential problem with a general coefficient.  The
/// coefficient must vanish near the source (the split field's source term
/// carries a 1/|x - src| that is never evaluated where q = 0).  First-order
/// outflow conditions damp the box-boundary reflections; keep the box big
/// enough that what little reflects cannot reach the receiver in time.
pub fn solve_potential_fd_3d(
    q: &dyn Fn([f64; 3]) -> f64,
    src: [f64; 3],
    receiver: [f64; 3],
    cfg: &Fd3dConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = cfg.h;
    let dt = 0.55 * h;
    let limit = h / 3.0f64.sqrt();
    if dt >= limit {
        return Err(Error::CflViolation { dt, limit });
    }
    if cfg.eps < 3.0 * h {
        return Err(Error::StepTooLarge(format!(
            "mollifier width {} needs at least three cells, h = {h}",
            cfg.eps
        )));
    }
    let n: [usize; 3] = std::array::from_fn(|d| {
        ((cfg.box_hi[d] - cfg.box_lo[d]) / h).round() as usize + 1
    });
    let idx = |i: usize, j: usize, k: usize| (i * n[1] + j) * n[2] + k;
    let pos = |i: usize, j: usize, k: usize| -> [f64; 3] {
        [
            cfg.box_lo[0] + h * i as f64,
            cfg.box_lo[1] + h * j as f64,
            cfg.box_lo[2] + h * k as f64,
        ]
    };
    let total = n[0] * n[1] * n[2];

    // Source bookkeeping only on nodes where q != 0.
    let mut active: Vec<(usize, f64, f64)> = Vec::new();
    for i in 0..n[0] {
        for j in 0..n[1] {
            for k in 0..n[2] {
                let x = pos(i, j, k);
                let qv = q(x);
                if qv != 0.0 {
                    let d = dist(x, src);
                    if d < 2.0 * h {
                        return Err(Error::Invalid(
                            "coefficient support touches the source point".into(),
                        ));
                    }
                    active.push((idx(i, j, k), qv, d));
                }
            }
        }
    }

    let bump = Mollifier::CosineBump;
    let mut prev = vec![0.0f64; total];
    let mut cur = vec![0.0f64; total];
    let mut next = vec![0.0f64; total];
    let steps = ((cfg.t_max + cfg.eps) / dt).ceil() as usize;
    let t0 = -cfg.eps;

    // Receiver interpolation stencil.
    let rc: [f64; 3] = std::array::from_fn(|d| (receiver[d] - cfg.box_lo[d]) / h);
    let rf: [usize; 3] = std::array::from_fn(|d| (rc[d].floor() as usize).min(n[d] - 2));
    let rw: [f64; 3] = std::array::from_fn(|d| rc[d] - rf[d] as f64);
    let sample_receiver = |f: &[f64]| -> f64 {
        let mut acc = 0.0;
        for di in 0..2 {
            for dj in 0..2 {
                for dk in 0..2 {
                    let w = (if di == 0 { 1.0 - rw[0] } else { rw[0] })
                        * (if dj == 0 { 1.0 - rw[1] } else { rw[1] })
                        * (if dk == 0 { 1.0 - rw[2] } else { rw[2] });
                    acc += w * f[idx(rf[0] + di, rf[1] + dj, rf[2] + dk)];
                }
            }
        }
        acc
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut series = Vec::with_capacity(steps + 1);
    times.push(t0);
    series.push(0.0);

    let inv_h2 = 1.0 / (h * h);
    for step in 0..steps {
        let t = t0 + dt * step as f64;
        for i in 1..n[0] - 1 {
            for j in 1..n[1] - 1 {
                let row = (i * n[1] + j) * n[2];
                for k in 1..n[2] - 1 {
                    let c = row + k;
                    let lap = (cur[c + 1] + cur[c - 1] + cur[c + n[2]] + cur[c - n[2]]
                        + cur[c + n[1] * n[2]]
                        + cur[c - n[1] * n[2]]
                        - 6.0 * cur[c])
                        * inv_h2;
                    next[c] = 2.0 * cur[c] - prev[c] + dt * dt * lap;
                }
            }
        }
        // Scattering and source terms, support nodes only.
        for &(c, qv, d) in &active {
            next[c] += dt * dt * (qv * cur[c] + qv * bump.eval(eps_of(cfg), t - d) / (4.0 * std::f64::consts::PI * d));
        }
        // First-order outflow on the six faces.
        let courant = dt / h;
        for j in 0..n[1] {
            for k in 0..n[2] {
                let a = idx(0, j, k);
                let b = idx(1, j, k);
                next[a] = cur[a] - courant * (cur[a] - cur[b]);
                let a2 = idx(n[0] - 1, j, k);
                let b2 = idx(n[0] - 2, j, k);
                next[a2] = cur[a2] - courant * (cur[a2] - cur[b2]);
            }
        }
        for i in 0..n[0] {
            for k in 0..n[2] {
                let a = idx(i, 0, k);
                let b = idx(i, 1, k);
                next[a] = cur[a] - courant * (cur[a] - cur[b]);
                let a2 = idx(i, n[1] - 1, k);
                let b2 = idx(i, n[1] - 2, k);
                next[a2] = cur[a2] - courant * (cur[a2] - cur[b2]);
            }
        }
        for i in 0..n[0] {
            for j in 0..n[1] {
                let a = idx(i, j, 0);
                let b = idx(i, j, 1);
                next[a] = cur[a] - courant * (cur[a] - cur[b]);
                let a2 = idx(i, j, n[2] - 1);
                let b2 = idx(i, j, n[2] - 2);
                next[a2] = cur[a2] - courant * (cur[a2] - cur[b2]);
            }
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        times.push(t0 + dt * (step + 1) as f64);
        series.push(sample_receiver(&cur));
    }
    Ok((times, series))
}

fn eps_of(cfg: &Fd3dConfig) -> f64 {
    cfg.eps
}
