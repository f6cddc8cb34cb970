//! Front calculus for point-source waves.
//!
//! Both problems share one structure: the field of a source fired at the
//! origin at time zero is a sharp spherical front followed by a smooth tail,
//!   u(x, t) = front(x) delta(t - |x|) + v(x, t),  v = 0 for t < |x|,
//! and the tail's value just behind the front, v(x, |x|+), is an explicit
//! line functional of the coefficient along the ray from the source.  Those
//! traces are what the layer stripping inverts, so they get exact formulas
//! here and an independent finite-difference check in the oracle module.
//!
//! Potential scattering, (d_tt - Laplacian - q) u = delta:
//!   front = 1 / (4 pi |x|),
//!   v(x, |x|+) = (1/(8 pi)) integral_0^1 q(s x) ds.
//!
//! Damping, (d_tt - Laplacian + a d_t) u = delta, with a radial:
//!   front = R(x, |x|) / (4 pi |x|),  R(x, t) = exp(-(t/2) mean of a on [0, x]),
//!   v(x, |x|+) = -(R(x, |x|) / (8 pi)) integral_0^1 h(s) ds,
//! where h collects what the damped wave operator leaves behind when it
//! falls on R along the cone.  The second-derivative part of h is
//! integrated by parts so only the ray mean g and its first derivative
//! appear; see `goursat_trace_damping`.

use crate::profile::{CoefficientProfile, Symmetry};
use crate::quad::integrate_gl;
use crate::RECEIVER;

const LINE_RULE: usize = 48;

/// Radial coefficient with enough calculus exposed for the front formulas.
pub trait RadialCoefficient {
    fn eval(&self, r: f64) -> f64;
    fn deriv(&self, r: f64) -> f64;
    /// Integral over [0, r].
    fn integral(&self, r: f64) -> f64;
}

/// Closed-form radial coefficient given by a value and derivative closure;
/// the prefix integral is done by fixed high-order quadrature.
pub struct AnalyticRadial<F, D> {
    pub f: F,
    pub df: D,
}

impl<F: Fn(f64) -> f64, D: Fn(f64) -> f64> RadialCoefficient for AnalyticRadial<F, D> {
    fn eval(&self, r: f64) -> f64 {
        (self.f)(r)
    }
    fn deriv(&self, r: f64) -> f64 {
        (self.df)(r)
    }
    fn integral(&self, r: f64) -> f64 {
        integrate_gl(LINE_RULE, 0.0, r, &self.f)
    }
}

impl RadialCoefficient for CoefficientProfile {
    fn eval(&self, r: f64) -> f64 {
        self.eval_symmetric(r)
    }
    fn deriv(&self, r: f64) -> f64 {
        self.deriv_symmetric(r)
    }
    fn integral(&self, r: f64) -> f64 {
        assert_eq!(self.symmetry(), Symmetry::Radial);
        self.integral_radial(r)
    }
}

/// Ray mean g(r) = (1/r) integral_0^r a, with its removable limit a(0).
pub fn ray_average<C: RadialCoefficient + ?Sized>(a: &C, r: f64) -> f64 {
    if r < 1e-12 {
        a.eval(0.0)
    } else {
        a.integral(r) / r
    }
}

/// g'(r) = (a(r) - g(r)) / r, with the removable limit a'(0) / 2.
pub fn ray_average_deriv<C: RadialCoefficient + ?Sized>(a: &C, r: f64) -> f64 {
    if r < 1e-9 {
        0.5 * a.deriv(0.0)
    } else {
        (a.eval(r) - ray_average(a, r)) / r
    }
}

/// Attenuation of the front at radius r: exp(-(1/2) integral_0^r a).
pub fn front_attenuation<C: RadialCoefficient + ?Sized>(a: &C, r: f64) -> f64 {
    (-0.5 * a.integral(r)).exp()
}

/// Attenuation factor off the cone: exp(-(t/2) g(r)).
pub fn attenuation_radial<C: RadialCoefficient + ?Sized>(a: &C, r: f64, t: f64) -> f64 {
    (-0.5 * t * ray_average(a, r)).exp()
}

/// Attenuation for a general damping coefficient and arbitrary source:
/// exp(-(t/2) mean of q1 along the segment from src to x).
pub fn attenuation_between<Q: Fn([f64; 3]) -> f64>(
    q1: &Q,
    src: [f64; 3],
    x: [f64; 3],
    t: f64,
) -> f64 {
    let mean = integrate_gl(LINE_RULE, 0.0, 1.0, |s| {
        q1([
            src[0] + s * (x[0] - src[0]),
            src[1] + s * (x[1] - src[1]),
            src[2] + s * (x[2] - src[2]),
        ])
    });
    (-0.5 * t * mean).exp()
}

/// Tail trace just behind the front for the potential problem, source at
/// the origin.
pub fn goursat_trace_potential<Q: Fn([f64; 3]) -> f64>(q: &Q, x: [f64; 3]) -> f64 {
    goursat_trace_between(q, [0.0; 3], x)
}

/// Same trace for a source at src; the line mean runs over the segment
/// from the source to x.
pub fn goursat_trace_between<Q: Fn([f64; 3]) -> f64>(q: &Q, src: [f64; 3], x: [f64; 3]) -> f64 {
    integrate_gl(LINE_RULE, 0.0, 1.0, |s| {
        q([
            src[0] + s * (x[0] - src[0]),
            src[1] + s * (x[1] - src[1]),
            src[2] + s * (x[2] - src[2]),
        ])
    }) / (8.0 * std::f64::consts::PI)
}

/// Trace behind the front from the receiver's source, radial argument form
/// used by the interior identities: the segment runs from the receiver to
/// a point at distance d from it, through the origin-facing direction is
/// irrelevant for radial q only when d is measured along a ray, so this
/// helper takes the actual endpoint.
pub fn goursat_trace_from_receiver<Q: Fn([f64; 3]) -> f64>(q: &Q, x: [f64; 3]) -> f64 {
    goursat_trace_between(q, RECEIVER, x)
}

/// Tail trace just behind the damped front at radius r.
///
/// Along the cone the damped operator applied to R(x, t) leaves, per unit
/// attenuation,
///   h = g^2/4 + (t/2) g'' + (t/r) g' - (t^2/4) g'^2 - a g / 2
/// and the trace is -(R/(8 pi)) times the ray average of h.  The g'' term
/// integrates by parts exactly:
///   integral_0^1 (s r / 2) g''(s r) ds = g'(r)/2 - (g(r) - a(0)) / (2 r),
///   integral_0^1 g'(s r) ds = (g(r) - a(0)) / r,
/// which leaves first-order data only.
pub fn goursat_trace_damping<C: RadialCoefficient + ?Sized>(a: &C, r: f64) -> f64 {
    let interior = integrate_gl(LINE_RULE, 0.0, 1.0, |s| {
        let rs = s * r;
        let g = ray_average(a, rs);
        let gp = ray_average_deriv(a, rs);
        0.25 * g * g - 0.25 * rs * rs * gp * gp - 0.5 * a.eval(rs) * g
    });
    let boundary = if r < 1e-12 {
        // Limit of g'(r)/2 + (g(r) - a(0)) / (2 r) as r -> 0 is a'(0)/2.
        0.5 * a.deriv(0.0)
    } else {
        0.5 * ray_average_deriv(a, r) + 0.5 * (ray_average(a, r) - a.eval(0.0)) / r
    };
    -front_attenuation(a, r) / (8.0 * std::f64::consts::PI) * (interior + boundary)
}
