//! Prolate spheroidal geometry for a source at the origin and a receiver at
//! unit distance, which are the two foci.  The level sets of the focal sum
//! |x| + |x - e| are the confocal ellipsoids that carry all the arrival-time
//! information a single receiver ever sees, so every integral in the crate
//! is ultimately set up in these coordinates.
//!
//! Conventions, with w = cosh(rho), u = cos(phi):
//!   |x|     = (w + u) / 2
//!   |x - e| = (w - u) / 2
//!   dx      = (1/8) (w^2 - u^2) dw du dtheta
//! so the two chord factors cancel the Jacobian exactly:
//!   dx / (|x| |x - e|)  = (1/2) dw du dtheta
//!   dx / (4 pi |x|)     = (w - u) / (16 pi) dw du dtheta
//!   dx / (4 pi |x - e|) = (w + u) / (16 pi) dw du dtheta.

use crate::quad::{gauss_legendre_cached, pairwise_sum};
use crate::{dist, norm, Error, Result, RECEIVER};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProlatePoint {
    pub rho: f64,
    pub phi: f64,
    pub theta: f64,
}

pub fn focal_sum(x: [f64; 3]) -> f64 {
    norm(x) + dist(x, RECEIVER)
}

pub fn prolate_to_cartesian(p: ProlatePoint) -> [f64; 3] {
    let w = p.rho.cosh();
    let u = p.phi.cos();
    let transverse = 0.5 * p.rho.sinh() * p.phi.sin();
    [
        0.5 + 0.5 * w * u,
        transverse * p.theta.sin(),
        transverse * p.theta.cos(),
    ]
}

/// Inverse map.  The returned flag marks points on the focal axis, where
/// theta is undefined and is reported as 0.
pub fn cartesian_to_prolate(x: [f64; 3]) -> (ProlatePoint, bool) {
    let r1 = norm(x);
    let r2 = dist(x, RECEIVER);
    let w = r1 + r2;
    let u = (r1 - r2).clamp(-1.0, 1.0);
    let transverse = (x[1] * x[1] + x[2] * x[2]).sqrt();
    let a = (w * w - 1.0).max(0.0);
    let b = 1.0 - u * u;
    // Whichever of w^2 - 1 and 1 - u^2 is smaller is pure cancellation (on
    // the focal segment and the outer axis respectively); recover it from
    // the transverse distance via 4 t^2 = (w^2 - 1)(1 - u^2) instead.
    let sinh_rho = if a >= b {
        a.sqrt()
    } else {
        2.0 * transverse / b.sqrt()
    };
    let sin_phi = if b >= a {
        b.sqrt()
    } else {
        2.0 * transverse / a.sqrt()
    };
    let rho = sinh_rho.asinh();
    let phi = sin_phi.atan2(u);
    let degenerate = transverse <= 1e-14 * (1.0 + w);
    let theta = if degenerate { 0.0 } else { x[1].atan2(x[2]) };
    (ProlatePoint { rho, phi, theta }, degenerate)
}

/// Volume density: dx = volume_density(rho, phi) drho dphi dtheta.
pub fn volume_density(rho: f64, phi: f64) -> f64 {
    let (w, u) = (rho.cosh(), phi.cos());
    0.125 * rho.sinh() * phi.sin() * (w * w - u * u)
}

/// Area density on the ellipsoid rho = const:
/// dS = surface_density(rho, phi) dphi dtheta.
pub fn surface_density(rho: f64, phi: f64) -> f64 {
    let (w, u) = (rho.cosh(), phi.cos());
    0.25 * rho.sinh() * phi.sin() * (w * w - u * u).sqrt()
}

/// |2 tau x - |x| e| on the shell of focal sum 2 tau, as a function of
/// u = cos(phi).  This is the natural normalizer for shell averages: the
/// ratio dS / |2 tau x - |x| e| collapses to (1/2) du dtheta.
pub fn ellipsoid_weight(tau: f64, u: f64) -> Result<f64> {
    let w = 2.0 * tau;
    if w <= 1.0 {
        return Err(Error::DegenerateGeometry(format!(
            "shell 2 tau = {w} does not enclose both foci (need tau > 1/2)"
        )));
    }
    Ok(0.5 * ((w * w - u * u) * (w * w - 1.0)).sqrt())
}

/// Same quantity straight from the cartesian definition.
pub fn ellipsoid_weight_cartesian(tau: f64, x: [f64; 3]) -> f64 {
    let r = norm(x);
    norm([
        2.0 * tau * x[0] - r * RECEIVER[0],
        2.0 * tau * x[1] - r * RECEIVER[1],
        2.0 * tau * x[2] - r * RECEIVER[2],
    ])
}

#[derive(Debug, Clone, Copy)]
pub struct SurfaceNode {
    pub x: [f64; 3],
    pub u: f64,
    pub theta: f64,
    /// Bare quadrature weight in (u, theta), no metric factor.
    pub base: f64,
    /// Area weight: ds = surface density at the node times base.
    pub ds: f64,
}

/// Quadrature rule on the shell of focal sum 2 tau: Gauss-Legendre in
/// u = cos(phi), uniform midpoints in theta.
#[derive(Debug, Clone)]
pub struct EllipsoidSlice {
    tau: f64,
    nodes: Vec<SurfaceNode>,
}

impl EllipsoidSlice {
    pub fn new(tau: f64, n_u: usize, n_theta: usize) -> Result<Self> {
        let w = 2.0 * tau;
        if w <= 1.0 {
            return Err(Error::DegenerateGeometry(format!(
                "shell 2 tau = {w} does not enclose both foci (need tau > 1/2)"
            )));
        }
        assert!(n_u >= 1 && n_theta >= 1);
        let sinh_rho = (w * w - 1.0).sqrt();
        let dtheta = std::f64::consts::TAU / n_theta as f64;
        let mut nodes = Vec::with_capacity(n_u * n_theta);
        for &(u, wu) in gauss_legendre_cached(n_u) {
            let transverse = 0.5 * sinh_rho * (1.0 - u * u).sqrt();
            let density = 0.25 * sinh_rho * (w * w - u * u).sqrt();
            for k in 0..n_theta {
                let theta = dtheta * (k as f64 + 0.5);
                let base = wu * dtheta;
                nodes.push(SurfaceNode {
                    x: [
                        0.5 + 0.5 * w * u,
                        transverse * theta.sin(),
                        transverse * theta.cos(),
                    ],
                    u,
                    theta,
                    base,
                    ds: density * base,
                });
            }
        }
        Ok(EllipsoidSlice { tau, nodes })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn nodes(&self) -> &[SurfaceNode] {
        &self.nodes
    }

    pub fn area(&self) -> f64 {
        let terms: Vec<f64> = self.nodes.iter().map(|n| n.ds).collect();
        pairwise_sum(&terms)
    }

    pub fn surface_integral<F: FnMut([f64; 3]) -> f64>(&self, mut f: F) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let v = f(n.x);
            if !v.is_finite() {
                return Err(Error::NonFiniteSample {
                    context: format!("surface integrand at u = {}, theta = {}", n.u, n.theta),
                    x: n.x,
                    value: v,
                });
            }
            terms.push(n.ds * v);
        }
        Ok(pairwise_sum(&terms))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VolumeNode {
    pub x: [f64; 3],
    pub w: f64,
    pub u: f64,
    pub theta: f64,
    /// Bare quadrature weight in (w, u, theta); multiply by the factor the
    /// integral at hand needs, e.g. (w^2 - u^2)/8 for a plain volume element.
    pub base: f64,
}

/// Product rule over the solid ellipsoid of focal sum 2 tau:
/// Gauss-Legendre in w on [1, 2 tau], Gauss-Legendre in u, midpoints in
/// theta.  Nodes carry bare weights so that chord denominators |x| and
/// |x - e| can be cancelled analytically instead of sampled.
pub fn volume_nodes(tau: f64, n_w: usize, n_u: usize, n_theta: usize) -> Result<Vec<VolumeNode>> {
    let w_max = 2.0 * tau;
    if w_max <= 1.0 {
        return Err(Error::DegenerateGeometry(format!(
            "solid shell 2 tau = {w_max} does not enclose both foci"
        )));
    }
    let dtheta = std::f64::consts::TAU / n_theta as f64;
    let half = 0.5 * (w_max - 1.0);
    let mid = 0.5 * (w_max + 1.0);
    let mut nodes = Vec::with_capacity(n_w * n_u * n_theta);
    for &(xw, ww) in gauss_legendre_cached(n_w) {
        let w = mid + half * xw;
        let sinh_rho = (w * w - 1.0).sqrt();
        for &(u, wu) in gauss_legendre_cached(n_u) {
            let transverse = 0.5 * sinh_rho * (1.0 - u * u).sqrt();
            for k in 0..n_theta {
                let theta = dtheta * (k as f64 + 0.5);
                nodes.push(VolumeNode {
                    x: [
                        0.5 + 0.5 * w * u,
                        transverse * theta.sin(),
                        transverse * theta.cos(),
                    ],
                    w,
                    u,
                    theta,
                    base: half * ww * wu * dtheta,
                });
            }
        }
    }
    Ok(nodes)
}

/// Plain volume integral of f over the solid ellipsoid of focal sum 2 tau.
pub fn volume_integral<F: FnMut([f64; 3]) -> f64>(
    tau: f64,
    n_w: usize,
    n_u: usize,
    n_theta: usize,
    mut f: F,
) -> Result<f64> {
    let nodes = volume_nodes(tau, n_w, n_u, n_theta)?;
    let mut terms = Vec::with_capacity(nodes.len());
    for n in &nodes {
        let v = f(n.x);
        if !v.is_finite() {
            return Err(Error::NonFiniteSample {
                context: format!("volume integrand at w = {}, u = {}", n.w, n.u),
                x: n.x,
                value: v,
            });
        }
        terms.push(n.base * 0.125 * (n.w * n.w - n.u * n.u) * v);
    }
    Ok(pairwise_sum(&terms))
}

/// Integral of f(x) / (|x| |x - e|) over the same region; the chord product
/// cancels the Jacobian exactly, so the integrand is never sampled near the
/// foci singularities.
pub fn volume_integral_over_chords<F: FnMut([f64; 3]) -> f64>(
    tau: f64,
    n_w: usize,
    n_u: usize,
    n_theta: usize,
    mut f: F,
) -> Result<f64> {
    let nodes = volume_nodes(tau, n_w, n_u, n_theta)?;
    let mut terms = Vec::with_capacity(nodes.len());
    for n in &nodes {
        let v = f(n.x);
        if !v.is_finite() {
            return Err(Error::NonFiniteSample {
                context: format!("chord integrand at w = {}, u = {}", n.w, n.u),
                x: n.x,
                value: v,
            });
        }
        terms.push(n.base * 0.5 * v);
    }
    Ok(pairwise_sum(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    const ROUND_TRIP_TOL: f64 = 1e-12;

    fn vec_rel(a: [f64; 3], b: [f64; 3]) -> f64 {
        let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
        norm(d) / (1.0 + norm(a))
    }

    #[test]
    fn focal_radii_match_coordinate_formulas() {
        let p = ProlatePoint {
            rho: 0.83,
            phi: 1.21,
            theta: 2.5,
        };
        let x = prolate_to_cartesian(p);
        let (w, u) = (p.rho.cosh(), p.phi.cos());
        assert_relative_eq!(norm(x), 0.5 * (w + u), epsilon = 1e-14);
        assert_relative_eq!(dist(x, RECEIVER), 0.5 * (w - u), epsilon = 1e-14);
    }

    #[test]
    fn round_trips_are_exact_to_tolerance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let p = ProlatePoint {
                rho: rng.gen_range(1e-3..3.0),
                phi: rng.gen_range(1e-3..std::f64::consts::PI - 1e-3),
                theta: rng.gen_range(0.0..std::f64::consts::TAU),
            };
            let x = prolate_to_cartesian(p);
            let (q, degenerate) = cartesian_to_prolate(x);
            assert!(!degenerate);
            assert!(vec_rel(x, prolate_to_cartesian(q)) < ROUND_TRIP_TOL);

            let y = [
                rng.gen_range(-1.5..2.5),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
            ];
            let (py, _) = cartesian_to_prolate(y);
            assert!(
                vec_rel(y, prolate_to_cartesian(py)) < ROUND_TRIP_TOL,
                "failed at {y:?}"
            );
        }
    }

    #[test]
    fn axis_points_are_flagged_and_still_recovered() {
        for x in [[0.3, 0.0, 0.0], [-0.4, 0.0, 0.0], [1.7, 0.0, 0.0]] {
            let (p, degenerate) = cartesian_to_prolate(x);
            assert!(degenerate);
            assert_eq!(p.theta, 0.0);
            assert!(vec_rel(x, prolate_to_cartesian(p)) < ROUND_TRIP_TOL);
        }
    }

    #[test]
    fn shell_weight_matches_cartesian_definition() {
        let tau = 0.9;
        let slice = EllipsoidSlice::new(tau, 24, 16).unwrap();
        for n in slice.nodes() {
            let direct = ellipsoid_weight_cartesian(tau, n.x);
            let closed = ellipsoid_weight(tau, n.u).unwrap();
            assert_relative_eq!(direct, closed, epsilon = 1e-12);
            // Area density over the weight is exactly 1/2 per du dtheta.
            assert_relative_eq!(n.ds / n.base / closed, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_shells_are_rejected() {
        assert!(EllipsoidSlice::new(0.5, 8, 8).is_err());
        assert!(ellipsoid_weight(0.45, 0.3).is_err());
        assert!(volume_nodes(0.5, 4, 4, 1).is_err());
    }

    #[test]
    fn unit_tau_volume_and_chord_integrals() {
        // Semi-axes 1 and sqrt(3)/2, so the volume is pi.
        let vol = volume_integral(1.0, 24, 24, 12, |_| 1.0).unwrap();
        assert_relative_eq!(vol, std::f64::consts::PI, epsilon = 1e-12);

        // The chord-cancelled element integrates the constant 1 to
        // (1/2) * (2 tau - 1) * 2 * 2 pi = 2 pi at tau = 1.
        let chord = volume_integral_over_chords(1.0, 24, 24, 12, |_| 1.0).unwrap();
        assert_relative_eq!(chord, std::f64::consts::TAU, epsilon = 1e-12);
    }

    #[test]
    fn volume_integral_sees_ball_volumes() {
        // Indicator of a small off-axis ball strictly inside the shell.
        let c = [0.45, 0.18, 0.0];
        let r = 0.2;
        let v = volume_integral(1.1, 80, 80, 96, |x| {
            if dist(x, c) <= r {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let exact = 4.0 / 3.0 * std::f64::consts::PI * r * r * r;
        assert_relative_eq!(v, exact, max_relative = 2e-2);
    }

    #[test]
    fn non_finite_samples_are_reported() {
        let err = volume_integral(1.0, 4, 4, 1, |x| 1.0 / (x[1] * 0.0)).unwrap_err();
        match err {
            Error::NonFiniteSample { .. } => {}
            other => panic!("expected NonFiniteSample, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn prolate_round_trip_property(
            rho in 1e-6f64..4.0,
            phi in 1e-6f64..(std::f64::consts::PI - 1e-6),
            theta in 0.0f64..std::f64::consts::TAU,
        ) {
            let x = prolate_to_cartesian(ProlatePoint { rho, phi, theta });
            let (p, _) = cartesian_to_prolate(x);
            prop_assert!(vec_rel(x, prolate_to_cartesian(p)) < ROUND_TRIP_TOL);
        }

        #[test]
        fn focal_sum_level_sets_are_respected(
            rho in 1e-3f64..3.0,
            phi in 0.0f64..std::f64::consts::PI,
            theta in 0.0f64..std::f64::consts::TAU,
        ) {
            let x = prolate_to_cartesian(ProlatePoint { rho, phi, theta });
            prop_assert!((focal_sum(x) - rho.cosh()).abs() < 1e-12 * (1.0 + rho.cosh()));
        }
    }
}
