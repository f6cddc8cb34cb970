//! Integral identities tying receiver data to volume integrals of the
//! coefficient difference.
//!
//! Potential case: with u_i the fields of media q_i from a source at the
//! origin and U the first medium's field from a source at the receiver,
//! the difference of receiver tails at time 2 tau equals
//!
//!   S(2tau)/(16 pi^2) + T_out + T_back + T_tail,
//!
//! where S is the shell integral of q = q1 - q2 over {|x| + |x-e| = 2tau}
//! (weighted by the inverse front-speed factor), T_out pairs q with the
//! receiver-sourced smooth field against the outgoing front, T_back pairs
//! it with the origin-sourced tail against the returning front, and T_tail
//! is the smooth-smooth space-time overlap.  Each term is assembled here
//! by quadrature against independently solved fields, so the identity is a
//! genuine end-to-end check rather than a tautology.
//!
//! Radial damping case: for radial profiles A1, A2 the same front algebra
//! collapses onto the coincident source-receiver ray.  With
//! Atil(s) = (A2 - A1)(s) R1(s) R2(s) (front attenuations R_i) the balance
//!
//!   Atil'(sigma)/(16 pi) + F1 + F2 + C1 + C2 + W
//!     = v1(0, 2 sigma) - v2(0, 2 sigma)
//!
//! holds, where F1, F2 are front-trace surface terms
//! (sigma/2) A(sigma) R_j(sigma) v_i(sigma, sigma) picked up by the delta
//! parts of the cross pairings, C1, C2 are the ball integrals of the
//! coefficient difference against the time derivative of the opposite tail
//! on the anti-diagonal t + r = 2 sigma, and W is the interior overlap.
//! The derivative term splits further into a surface mean piece and a
//! shifted attenuation derivative (checked against finite differences).

use serde::Serialize;

use crate::forward::goursat::GoursatField;
use crate::forward::lippmann::{solve_potential, VolterraConfig, WaveField};
use crate::forward::types::ReceiverWaveform;
use crate::geometry::{volume_integral_over_chords, volume_nodes, EllipsoidSlice};
use crate::greens::{front_attenuation, ray_average, RadialCoefficient};
use crate::profile::CoefficientProfile;
use crate::quad::{gauss_legendre_on, pairwise_sum};
use crate::{dist, norm, Error, Result, RECEIVER};

const PI: f64 = std::f64::consts::PI;

/// Integral of q over the two-focus shell {|x| + |x-e| = 2 tau} against
/// dS/|2 tau x - |x| e|.  In shell coordinates the weight collapses to
/// du dtheta / 2, so an ellipsoidally layered coefficient a gives exactly
/// 2 pi a(2 tau).
pub fn shell_data_term(
    q: &dyn Fn([f64; 3]) -> f64,
    tau: f64,
    n_u: usize,
    n_theta: usize,
) -> Result<f64> {
    let slice = EllipsoidSlice::new(tau, n_u, n_theta)?;
    let mut terms = Vec::with_capacity(slice.nodes().len());
    for node in slice.nodes() {
        terms.push(0.5 * node.base * q(node.x));
    }
    Ok(pairwise_sum(&terms))
}

/// The three fields the potential identity consumes, plus both receiver
/// waveforms.
pub struct PotentialPair {
    pub d1: ReceiverWaveform,
    pub d2: ReceiverWaveform,
    pub v1: WaveField,
    pub v2: WaveField,
    /// First medium, source at the receiver.
    pub outward: WaveField,
}

pub fn solve_pair(
    q1: &CoefficientProfile,
    q2: &CoefficientProfile,
    cfg: &VolterraConfig,
) -> Result<PotentialPair> {
    let v1 = solve_potential(q1, [0.0; 3], cfg)?;
    let v2 = solve_potential(q2, [0.0; 3], cfg)?;
    let outward = solve_potential(q1, RECEIVER, cfg)?;
    let d1 = v1.receiver_waveform(RECEIVER)?;
    let d2 = v2.receiver_waveform(RECEIVER)?;
    Ok(PotentialPair {
        d1,
        d2,
        v1,
        v2,
        outward,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityRow {
    pub tau: f64,
    pub data_difference: f64,
    pub shell_term: f64,
    pub outgoing_term: f64,
    pub returning_term: f64,
    pub overlap_term: f64,
    pub rhs: f64,
    pub residual: f64,
    pub scale: f64,
}

/// The volume terms sample the fields out to focal sum 2 tau, which the
/// stored lattice must cover.
fn require_coverage(pair: &PotentialPair, tau: f64) -> Result<()> {
    let have = pair.outward.w_max().min(pair.v2.w_max());
    if have + 1e-9 < 2.0 * tau {
        return Err(Error::Config(format!(
            "shell at tau = {tau} samples the fields out to focal sum {}, but \
             the solved lattice stops at {have:.3}; solve with w_max >= {}",
            2.0 * tau,
            2.0 * tau,
        )));
    }
    Ok(())
}

/// Evaluate both sides of the data-difference identity at one tau.
/// `vol` is the (w, u, theta) node count for the volume quadrature and
/// `n_time` the Gauss order of the inner time integral.
pub fn data_identity_row(
    pair: &PotentialPair,
    q1: &CoefficientProfile,
    q2: &CoefficientProfile,
    tau: f64,
    vol: (usize, usize, usize),
    n_time: usize,
) -> Result<IdentityRow> {
    require_coverage(pair, tau)?;
    let qd = |x: [f64; 3]| q1.eval(x) - q2.eval(x);
    let lhs = pair.d1.sample(2.0 * tau) - pair.d2.sample(2.0 * tau);
    let shell = shell_data_term(&qd, tau, 48, 16)? / (16.0 * PI * PI);

    let nodes = volume_nodes(tau, vol.0, vol.1, vol.2)?;
    let mut out_terms = Vec::new();
    let mut back_terms = Vec::new();
    let mut tail_terms = Vec::new();
    for node in &nodes {
        let qv = qd(node.x);
        if qv == 0.0 {
            continue;
        }
        let r0 = norm(node.x);
        let re = dist(node.x, RECEIVER);
        let (w, u) = (node.w, node.u);
        out_terms.push(
            node.base * (w - u) / (16.0 * PI)
                * qv
                * pair.outward.value(node.x, 2.0 * tau - r0),
        );
        back_terms.push(
            node.base * (w + u) / (16.0 * PI) * qv * pair.v2.value(node.x, 2.0 * tau - re),
        );
        let lo = re;
        let hi = 2.0 * tau - r0;
        if hi > lo + 1e-12 {
            let mut inner = 0.0;
            for &(t, wt) in &gauss_legendre_on(n_time, lo, hi) {
                inner += wt
                    * pair.outward.value(node.x, t)
                    * pair.v2.value(node.x, 2.0 * tau - t);
            }
            tail_terms.push(node.base * 0.125 * (w * w - u * u) * qv * inner);
        }
    }
    let outgoing = pairwise_sum(&out_terms);
    let returning = pairwise_sum(&back_terms);
    let overlap = pairwise_sum(&tail_terms);
    let rhs = shell + outgoing + returning + overlap;
    let scale = lhs
        .abs()
        .max(shell.abs())
        .max(outgoing.abs())
        .max(returning.abs())
        .max(overlap.abs());
    Ok(IdentityRow {
        tau,
        data_difference: lhs,
        shell_term: shell,
        outgoing_term: outgoing,
        returning_term: returning,
        overlap_term: overlap,
        rhs,
        residual: (lhs - rhs).abs(),
        scale,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ShellBoundRow {
    pub tau: f64,
    pub correction_magnitude: f64,
    pub k_sup: f64,
    pub chord_integral: f64,
    pub bound: f64,
    pub holds: bool,
}

/// The correction part of the identity (everything except the shell term)
/// equals a volume integral of q F / (|x| |x-e|) with F bounded; verify
/// |correction| <= sup|F| * chord integral of |q|.  `k_floor` lets callers
/// chain calls with increasing tau so the sup estimate is monotone.
pub fn shell_volume_bound_row(
    pair: &PotentialPair,
    q1: &CoefficientProfile,
    q2: &CoefficientProfile,
    tau: f64,
    vol: (usize, usize, usize),
    n_time: usize,
    k_floor: f64,
) -> Result<ShellBoundRow> {
    let row = data_identity_row(pair, q1, q2, tau, vol, n_time)?;
    let correction = row.outgoing_term + row.returning_term + row.overlap_term;

    let qd = |x: [f64; 3]| q1.eval(x) - q2.eval(x);
    let nodes = volume_nodes(tau, vol.0, vol.1, vol.2)?;
    let mut k_sup = k_floor;
    for node in &nodes {
        if qd(node.x) == 0.0 {
            continue;
        }
        let r0 = norm(node.x);
        let re = dist(node.x, RECEIVER);
        let mut f = re * pair.outward.value(node.x, 2.0 * tau - r0)
            + r0 * pair.v2.value(node.x, 2.0 * tau - re);
        let (lo, hi) = (re, 2.0 * tau - r0);
        if hi > lo + 1e-12 {
            let mut inner = 0.0;
            for &(t, wt) in &gauss_legendre_on(n_time, lo, hi) {
                inner += wt
                    * pair.outward.value(node.x, t)
                    * pair.v2.value(node.x, 2.0 * tau - t);
            }
            f += 4.0 * PI * r0 * re * inner;
        }
        k_sup = k_sup.max((f / (4.0 * PI)).abs());
    }
    let chord = volume_integral_over_chords(tau, vol.0.max(24), vol.1.max(24), vol.2, |x| {
        qd(x).abs()
    })?;
    let bound = k_sup * chord;
    Ok(ShellBoundRow {
        tau,
        correction_magnitude: correction.abs(),
        k_sup,
        chord_integral: chord,
        bound,
        holds: correction.abs() <= bound * (1.0 + 1e-9) + 1e-14,
    })
}

/// Distributional pairing of delta'(r - |x|) with a C^1 field: the surface
/// form -(1/r^2) int_{|x|=r} d/ds (s^2 phi(s omega))|_{s=r} dS.  A stretched
/// argument delta'(c(r - |x|)) pairs with 1/c^2 times this.
pub fn delta_prime_surface(
    phi: &dyn Fn([f64; 3]) -> f64,
    r: f64,
    step: f64,
    n_u: usize,
    n_theta: usize,
) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::Invalid("delta' surface pairing needs r > 0".into()));
    }
    let dth = 2.0 * PI / n_theta as f64;
    let mut terms = Vec::with_capacity(n_u * n_theta);
    for &(mu, wu) in crate::quad::gauss_legendre_cached(n_u) {
        let sq = (1.0 - mu * mu).sqrt();
        for it in 0..n_theta {
            let th = (it as f64 + 0.5) * dth;
            let om = [mu, sq * th.sin(), sq * th.cos()];
            let g = |s: f64| s * s * phi([s * om[0], s * om[1], s * om[2]]);
            terms.push(-wu * dth * (g(r + step) - g(r - step)) / (2.0 * step));
        }
    }
    Ok(pairwise_sum(&terms))
}

/// Front-attenuated coefficient difference (A2 - A1)(s) R1(s) R2(s).
pub fn attenuated_difference<C1, C2>(a1: &C1, a2: &C2, s: f64) -> f64
where
    C1: RadialCoefficient + ?Sized,
    C2: RadialCoefficient + ?Sized,
{
    (a2.eval(s) - a1.eval(s)) * front_attenuation(a1, s) * front_attenuation(a2, s)
}

/// Exact derivative of the above: R1 R2 [A' - A (A1 + A2)/2], A = A2 - A1.
pub fn attenuated_difference_derivative<C1, C2>(a1: &C1, a2: &C2, s: f64) -> f64
where
    C1: RadialCoefficient + ?Sized,
    C2: RadialCoefficient + ?Sized,
{
    let a = a2.eval(s) - a1.eval(s);
    let da = a2.deriv(s) - a1.deriv(s);
    front_attenuation(a1, s) * front_attenuation(a2, s)
        * (da - 0.5 * a * (a1.eval(s) + a2.eval(s)))
}

/// d/dr [ A(r) R1(r) exp(-(2 sigma - r) g2(r) / 2) ] at r = sigma, where
/// g2 is the ray mean of A2.  Closed form; the finite-difference twin below
/// checks the algebra.
pub fn shifted_attenuation_derivative<C1, C2>(a1: &C1, a2: &C2, sigma: f64) -> f64
where
    C1: RadialCoefficient + ?Sized,
    C2: RadialCoefficient + ?Sized,
{
    let a = a2.eval(sigma) - a1.eval(sigma);
    let da = a2.deriv(sigma) - a1.deriv(sigma);
    let g2 = ray_average(a2, sigma);
    front_attenuation(a1, sigma) * front_attenuation(a2, sigma)
        * (da - 0.5 * a * (a1.eval(sigma) + a2.eval(sigma)) + a * g2)
}

pub fn shifted_attenuation_derivative_fd<C1, C2>(
    a1: &C1,
    a2: &C2,
    sigma: f64,
    step: f64,
) -> f64
where
    C1: RadialCoefficient + ?Sized,
    C2: RadialCoefficient + ?Sized,
{
    let f = |r: f64| {
        let g2 = ray_average(a2, r);
        (a2.eval(r) - a1.eval(r))
            * front_attenuation(a1, r)
            * (-(2.0 * sigma - r) * 0.5 * g2).exp()
    };
    crate::oracles::fd_derivative(&f, sigma, step)
}

/// exp(2 int_0^sigma (ray mean of a)(s) ds); constant c gives exp(2 c sigma).
pub fn integrating_factor<C: RadialCoefficient + ?Sized>(a: &C, sigma: f64) -> f64 {
    let inner: f64 = crate::quad::integrate_gl(48, 0.0, sigma, |s| ray_average(a, s));
    (2.0 * inner).exp()
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaBreakdown {
    pub sigma: f64,
    /// Shell mean piece of the derivative term.
    pub surface_mean: f64,
    /// Shifted attenuation derivative piece.
    pub surface_derivative: f64,
    /// Front-trace surface term (sigma/2) A R2 v1(sigma, sigma).
    pub first_front: f64,
    /// Front-trace surface term (sigma/2) A R1 v2(sigma, sigma).
    pub second_front: f64,
    /// Ball integral of A R2 against d_t v1 on the anti-diagonal.
    pub first_cross: f64,
    /// Ball integral of A R1 against d_t v2 on the anti-diagonal.
    pub second_cross: f64,
    /// Interior smooth-smooth overlap.
    pub overlap: f64,
    pub sum: f64,
    /// v1(0, 2 sigma) - v2(0, 2 sigma) from the characteristic solves.
    pub data_term: f64,
    pub residual: f64,
}

/// Evaluate the radial damping balance at sigma (which must sit on the
/// characteristic lattice of both fields).
pub fn radial_breakdown<C1, C2>(
    a1: &C1,
    a2: &C2,
    f1: &GoursatField,
    f2: &GoursatField,
    sigma: f64,
) -> Result<SigmaBreakdown>
where
    C1: RadialCoefficient + ?Sized,
    C2: RadialCoefficient + ?Sized,
{
    let h = f1.h();
    if (f2.h() - h).abs() > 1e-14 {
        return Err(Error::Invalid("fields use different lattice steps".into()));
    }
    let jf = 2.0 * sigma / h;
    let j_top = jf.round() as usize;
    if (jf - j_top as f64).abs() > 1e-9 {
        return Err(Error::Invalid(format!(
            "sigma {sigma} is off the lattice (2 sigma / h = {jf})"
        )));
    }
    if j_top + 2 > f1.eta_steps() || j_top + 2 > f2.eta_steps() {
        return Err(Error::Invalid("fields too short for this sigma".into()));
    }

    let norm16 = 1.0 / (16.0 * PI);
    let surface_mean = -norm16 * attenuated_difference(a1, a2, sigma) * ray_average(a2, sigma);
    let surface_derivative = norm16 * shifted_attenuation_derivative(a1, a2, sigma);

    // Front traces v(sigma, sigma), read off the cone row of each lattice.
    // They enter through the delta parts of the cross pairings and vanish
    // whenever the coefficients agree on the front sphere.
    let a_front = a2.eval(sigma) - a1.eval(sigma);
    let first_front = 0.5 * a_front * front_attenuation(a2, sigma) * f1.phi_node(0, j_top);
    let second_front = 0.5 * a_front * front_attenuation(a1, sigma) * f2.phi_node(0, j_top);

    // Anti-diagonal t + r = 2 sigma: nodes (i, j_top), radius (j_top - i) h / 2.
    // The axis endpoint carries weight r = 0 and is skipped.
    let mut c1 = Vec::with_capacity(j_top);
    let mut c2 = Vec::with_capacity(j_top);
    for i in 0..j_top {
        let r = (j_top - i) as f64 * 0.5 * h;
        let a = a2.eval(r) - a1.eval(r);
        let w1 = if i == 0 { 0.5 } else { 1.0 };
        c1.push(w1 * a * front_attenuation(a2, r) * f1.dt_v_node(i, j_top) * r);
        c2.push(w1 * a * front_attenuation(a1, r) * f2.dt_v_node(i, j_top) * r);
    }
    let first_cross = pairwise_sum(&c1) * 0.5 * h;
    let second_cross = pairwise_sum(&c2) * 0.5 * h;

    // Interior overlap: for each lattice radius r = m h / 2, the inner time
    // integral runs over t = r + k h, with the partner field read at
    // 2 sigma - t on the same radius line.
    let mut outer = Vec::with_capacity(j_top + 1);
    for m in 1..j_top {
        let r = m as f64 * 0.5 * h;
        let a = a2.eval(r) - a1.eval(r);
        if a == 0.0 {
            continue;
        }
        let k_top = j_top - m;
        let mut inner = Vec::with_capacity(k_top + 1);
        for k in 0..=k_top {
            let wt = if k == 0 || k == k_top { 0.5 } else { 1.0 };
            let dv2 = f2.dt_v_node(k, k + m);
            let v1b = f1.v_node(j_top - m - k, j_top - k);
            inner.push(wt * dv2 * v1b);
        }
        // The r = 0 and r = sigma endpoints contribute nothing (r^2 weight,
        // empty inner window), so the outer trapezoid keeps unit weights.
        outer.push(r * r * a * pairwise_sum(&inner) * h);
    }
    let overlap = 4.0 * PI * pairwise_sum(&outer) * 0.5 * h;

    let sum = surface_mean
        + surface_derivative
        + first_front
        + second_front
        + first_cross
        + second_cross
        + overlap;
    let data_term = f1.v_origin(j_top) - f2.v_origin(j_top);
    Ok(SigmaBreakdown {
        sigma,
        surface_mean,
        surface_derivative,
        first_front,
        second_front,
        first_cross,
        second_cross,
        overlap,
        sum,
        data_term,
        residual: (sum - data_term).abs(),
    })
}
