//! Independent cross-checks used by the test suites: closed-form spheroid
//! measures, a triangulated shell, Monte Carlo volumes, mollifier limits for
//! the distributional surface pairings, and nested finite differences that
//! push the damped wave operator through the ray attenuation factor without
//! using any of the calculus the main modules rely on.

use crate::quad::{gauss_legendre_cached, integrate_gl, pairwise_sum};
use crate::{norm, Result};
use std::collections::HashMap;

/// Surface area of the shell of focal sum 2 tau (prolate spheroid with
/// semi-axes tau and sqrt(tau^2 - 1/4)).
pub fn spheroid_area(tau: f64) -> f64 {
    let b2 = tau * tau - 0.25;
    let ecc = 1.0 / (2.0 * tau);
    2.0 * std::f64::consts::PI * b2
        + 4.0 * std::f64::consts::PI * tau * tau * b2.sqrt() * ecc.asin()
}

/// Volume enclosed by the same shell.
pub fn spheroid_volume(tau: f64) -> f64 {
    4.0 * std::f64::consts::PI / 3.0 * tau * (tau * tau - 0.25)
}

/// Triangulation of the shell of focal sum 2 tau, built by subdividing an
/// icosahedron on the unit sphere and mapping it onto the spheroid.  The
/// map (X, Y, Z) -> (1/2 + tau X, b Y, b Z) puts vertices exactly on the
/// shell: the focal radii work out to tau +- X/2.
#[derive(Debug, Clone)]
pub struct ShellMesh {
    pub verts: Vec<[f64; 3]>,
    pub faces: Vec<[u32; 3]>,
    tau: f64,
}

fn icosphere(subdiv: u32) -> (Vec<[f64; 3]>, Vec<[u32; 3]>) {
    let p = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut verts: Vec<[f64; 3]> = vec![
        [-1.0, p, 0.0],
        [1.0, p, 0.0],
        [-1.0, -p, 0.0],
        [1.0, -p, 0.0],
        [0.0, -1.0, p],
        [0.0, 1.0, p],
        [0.0, -1.0, -p],
        [0.0, 1.0, -p],
        [p, 0.0, -1.0],
        [p, 0.0, 1.0],
        [-p, 0.0, -1.0],
        [-p, 0.0, 1.0],
    ];
    for v in &mut verts {
        let n = norm(*v);
        *v = [v[0] / n, v[1] / n, v[2] / n];
    }
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdiv {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<[f64; 3]>| -> u32 {
            let key = (a.min(b), a.max(b));
            if let Some(&i) = cache.get(&key) {
                return i;
            }
            let (va, vb) = (verts[a as usize], verts[b as usize]);
            let mut m = [
                0.5 * (va[0] + vb[0]),
                0.5 * (va[1] + vb[1]),
                0.5 * (va[2] + vb[2]),
            ];
            let n = norm(m);
            m = [m[0] / n, m[1] / n, m[2] / n];
            verts.push(m);
            let i = (verts.len() - 1) as u32;
            cache.insert(key, i);
            i
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    (verts, faces)
}

impl ShellMesh {
    pub fn new(tau: f64, subdiv: u32) -> ShellMesh {
        let (sphere, faces) = icosphere(subdiv);
        let b = (tau * tau - 0.25).sqrt();
        let verts = sphere
            .iter()
            .map(|d| [0.5 + tau * d[0], b * d[1], b * d[2]])
            .collect();
        ShellMesh { verts, faces, tau }
    }

    pub fn area(&self) -> f64 {
        let terms: Vec<f64> = self
            .faces
            .iter()
            .map(|&[a, b, c]| {
                triangle_area(
                    self.verts[a as usize],
                    self.verts[b as usize],
                    self.verts[c as usize],
                )
            })
            .collect();
        pairwise_sum(&terms)
    }

    /// Flat-facet surface integral with one on-shell sample per facet.
    pub fn integral<F: FnMut([f64; 3]) -> f64>(&self, mut f: F) -> f64 {
        let b = (self.tau * self.tau - 0.25).sqrt();
        let terms: Vec<f64> = self
            .faces
            .iter()
            .map(|&[ia, ib, ic]| {
                let (a, bb, c) = (
                    self.verts[ia as usize],
                    self.verts[ib as usize],
                    self.verts[ic as usize],
                );
                let area = triangle_area(a, bb, c);
                // Centroid pulled back to the sphere, renormalized, pushed
                // forward again, so the sample sits exactly on the shell.
                let d = [
                    ((a[0] + bb[0] + c[0]) / 3.0 - 0.5) / self.tau,
                    ((a[1] + bb[1] + c[1]) / 3.0) / b,
                    ((a[2] + bb[2] + c[2]) / 3.0) / b,
                ];
                let n = norm(d);
                let p = [
                    0.5 + self.tau * d[0] / n,
                    b * d[1] / n,
                    b * d[2] / n,
                ];
                area * f(p)
            })
            .collect();
        pairwise_sum(&terms)
    }
}

fn triangle_area(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let cx = u[1] * v[2] - u[2] * v[1];
    let cy = u[2] * v[0] - u[0] * v[2];
    let cz = u[0] * v[1] - u[1] * v[0];
    0.5 * (cx * cx + cy * cy + cz * cz).sqrt()
}

/// Richardson-extrapolated mesh integral: facet sums at two subdivision
/// levels, combined assuming the O(h^2) leading error of flat facets.
pub fn mesh_integral_extrapolated<F: FnMut([f64; 3]) -> f64 + Copy>(
    tau: f64,
    subdiv: u32,
    f: F,
) -> f64 {
    let coarse = ShellMesh::new(tau, subdiv - 1).integral(f);
    let fine = ShellMesh::new(tau, subdiv).integral(f);
    (4.0 * fine - coarse) / 3.0
}

/// Monte Carlo volume of the focal-sum ball by box rejection.
pub fn monte_carlo_volume(tau: f64, samples: u64, seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let b = (tau * tau - 0.25).sqrt();
    let mut hits = 0u64;
    for _ in 0..samples {
        let x = [
            rng.gen_range(0.5 - tau..0.5 + tau),
            rng.gen_range(-b..b),
            rng.gen_range(-b..b),
        ];
        if crate::geometry::focal_sum(x) <= 2.0 * tau {
            hits += 1;
        }
    }
    (hits as f64 / samples as f64) * (2.0 * tau) * (2.0 * b) * (2.0 * b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mollifier {
    CosineBump,
    Gaussian,
}

impl Mollifier {
    fn half_width(self, eps: f64) -> f64 {
        match self {
            Mollifier::CosineBump => eps,
            Mollifier::Gaussian => 8.0 * eps,
        }
    }

    pub fn eval(self, eps: f64, s: f64) -> f64 {
        match self {
            Mollifier::CosineBump => {
                let z = s / eps;
                if z.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 + (std::f64::consts::PI * z).cos()) / (2.0 * eps)
                }
            }
            Mollifier::Gaussian => {
                let z = s / eps;
                (-0.5 * z * z).exp() / (eps * (std::f64::consts::TAU).sqrt())
            }
        }
    }

    pub fn eval_deriv(self, eps: f64, s: f64) -> f64 {
        match self {
            Mollifier::CosineBump => {
                let z = s / eps;
                if z.abs() >= 1.0 {
                    0.0
                } else {
                    -std::f64::consts::PI * (std::f64::consts::PI * z).sin()
                        / (2.0 * eps * eps)
                }
            }
            Mollifier::Gaussian => -s / (eps * eps) * self.eval(eps, s),
        }
    }
}

/// Mollified form of the derivative-of-shell pairing: integrates
/// eta_eps'(|x| - r) phi(x) over space.  As eps -> 0 this converges to
/// -(d/ds)[s^2 mean of phi on |x| = s] at s = r, scaled by 4 pi.
pub fn mollified_delta_prime_surface<F: Fn([f64; 3]) -> f64>(
    phi: F,
    r: f64,
    eps: f64,
    kind: Mollifier,
    n_s: usize,
    n_u: usize,
    n_theta: usize,
) -> f64 {
    let hw = kind.half_width(eps);
    let dtheta = std::f64::consts::TAU / n_theta as f64;
    let sphere_mean_scaled = |s: f64| -> f64 {
        // s^2 * integral of phi over directions.
        let mut terms = Vec::with_capacity(n_u * n_theta);
        for &(u, wu) in gauss_legendre_cached(n_u) {
            let t = (1.0 - u * u).sqrt();
            for k in 0..n_theta {
                let theta = dtheta * (k as f64 + 0.5);
                let x = [s * u, s * t * theta.sin(), s * t * theta.cos()];
                terms.push(wu * dtheta * phi(x));
            }
        }
        s * s * pairwise_sum(&terms)
    };
    integrate_gl(n_s, (r - hw).max(0.0), r + hw, |s| {
        kind.eval_deriv(eps, s - r) * sphere_mean_scaled(s)
    })
}

/// Mean of a along the ray from the origin to radius r.
pub fn ray_mean<F: Fn(f64) -> f64>(a: &F, r: f64) -> f64 {
    integrate_gl(48, 0.0, 1.0, |s| a(s * r))
}

/// Ray attenuation for a radial damping coefficient:
/// exp(-(t/2) * mean of a over [0, |x|]).
pub fn attenuation<F: Fn(f64) -> f64>(a: &F, x: [f64; 3], t: f64) -> f64 {
    (-0.5 * t * ray_mean(a, norm(x))).exp()
}

/// The damped wave operator (d_tt - Laplacian + a d_t) applied to the
/// attenuation factor by nested central differences; nothing here knows the
/// analytic transport identities.
pub fn damping_operator_on_attenuation<F: Fn(f64) -> f64>(
    a: &F,
    x: [f64; 3],
    t: f64,
    step: f64,
) -> f64 {
    let r = |y: [f64; 3], s: f64| attenuation(a, y, s);
    let center = r(x, t);
    let dtt = (r(x, t + step) - 2.0 * center + r(x, t - step)) / (step * step);
    let dt = (r(x, t + step) - r(x, t - step)) / (2.0 * step);
    let mut lap = 0.0;
    for i in 0..3 {
        let mut xp = x;
        let mut xm = x;
        xp[i] += step;
        xm[i] -= step;
        lap += (r(xp, t) - 2.0 * center + r(xm, t)) / (step * step);
    }
    dtt - lap + a(norm(x)) * dt
}

/// Wavefront trace of the first smooth correction behind the damped front,
/// assembled purely from the finite-difference operator along the cone.
pub fn fd_trace_damping<F: Fn(f64) -> f64>(a: &F, x: [f64; 3], step: f64, n_s: usize) -> f64 {
    let r = norm(x);
    let cone_ratio = |s: f64| {
        let y = [s * x[0], s * x[1], s * x[2]];
        damping_operator_on_attenuation(a, y, s * r, step) / attenuation(a, y, s * r)
    };
    let integral = integrate_gl(n_s, 0.0, 1.0, cone_ratio);
    -attenuation(a, x, r) / (8.0 * std::f64::consts::PI) * integral
}

/// Five-point central derivative, O(h^4).
pub fn fd_derivative<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

/// Mollified double-front pairing: integral over (r, t) of
/// eta_eps'(t - r) eta_eps(2 sigma - t - r) F(r, t).  The sharp limit is
/// (1/4) (dF/dr - dF/dt) at (sigma, sigma); every echo-overlap constant in
/// the interior identities traces back to this quarter.
pub fn mollified_front_pairing<F: Fn(f64, f64) -> f64>(
    f: &F,
    sigma: f64,
    eps: f64,
    kind: Mollifier,
    n: usize,
) -> f64 {
    let hw = kind.half_width(eps);
    integrate_gl(n, sigma - hw, sigma + hw, |r| {
        let lo = (r - hw).max(2.0 * sigma - r - hw);
        let hi = (r + hw).min(2.0 * sigma - r + hw);
        if hi <= lo {
            return 0.0;
        }
        integrate_gl(n, lo, hi, |t| {
            kind.eval_deriv(eps, t - r) * kind.eval(eps, 2.0 * sigma - t - r) * f(r, t)
        })
    })
}

/// Same geometry with a plain (underived) mollifier in both slots; the
/// sharp limit is F(sigma, sigma) / 2.
pub fn mollified_front_overlap<F: Fn(f64, f64) -> f64>(
    f: &F,
    sigma: f64,
    eps: f64,
    kind: Mollifier,
    n: usize,
) -> f64 {
    let hw = kind.half_width(eps);
    integrate_gl(n, sigma - hw, sigma + hw, |r| {
        let lo = (r - hw).max(2.0 * sigma - r - hw);
        let hi = (r + hw).min(2.0 * sigma - r + hw);
        if hi <= lo {
            return 0.0;
        }
        integrate_gl(n, lo, hi, |t| {
            kind.eval(eps, t - r) * kind.eval(eps, 2.0 * sigma - t - r) * f(r, t)
        })
    })
}

pub fn richardson_pair(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

/// Modified Bessel I1 by its everywhere-convergent power series.
pub fn bessel_i1(z: f64) -> f64 {
    let half = 0.5 * z;
    let mut term = half;
    let mut sum = term;
    for k in 1..80 {
        term *= half * half / (k as f64 * (k + 1) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Exact tail behind the front for a constant potential c:
/// (d_tt - Laplacian - c) u = delta has
/// u = delta(t - r)/(4 pi r) + sqrt(c) I1(sqrt(c) s)/(4 pi s), s^2 = t^2 - r^2.
pub fn constant_potential_tail(c: f64, r: f64, t: f64) -> f64 {
    if t <= r {
        return 0.0;
    }
    let s = (t * t - r * r).sqrt();
    let rc = c.sqrt();
    if rc * s < 1e-12 {
        return c / (8.0 * std::f64::consts::PI);
    }
    rc * bessel_i1(rc * s) / (4.0 * std::f64::consts::PI * s)
}

/// Exact tail for constant damping c:
/// (d_tt - Laplacian + c d_t) u = delta has
/// u = exp(-c t / 2) [delta(t - r)/(4 pi r) + (c/2) I1((c/2) s)/(4 pi s)].
pub fn constant_damping_tail(c: f64, r: f64, t: f64) -> f64 {
    if t <= r {
        return 0.0;
    }
    let kappa = 0.5 * c;
    let s = (t * t - r * r).sqrt();
    let smooth = if kappa * s < 1e-12 {
        0.5 * kappa / (4.0 * std::f64::consts::PI)
    } else {
        kappa * bessel_i1(kappa * s) / (4.0 * std::f64::consts::PI * s)
    };
    (-0.5 * c * t).exp() * smooth
}

/// Convenience wrapper so tests can state "two widths, extrapolated".
pub fn mollifier_limit<G: FnMut(f64) -> f64>(mut g: G, eps: f64) -> f64 {
    richardson_pair(g(eps), g(0.5 * eps))
}

#[allow(dead_code)]
fn unused_result_alias() -> Result<()> {
    Ok(())
}
