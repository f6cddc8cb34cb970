//! Characteristic-lattice solver for the radial damping problem.
//!
//! Behind the front the tail v of the damped point-source field solves, in
//! terms of phi = r v,
//!   phi_tt - phi_rr + a(r) phi_t = 0,    0 < r < t,
//! with phi = 0 on the axis r = 0 and phi given on the cone t = r by the
//! front-trace formula.  In characteristic coordinates xi = t - r,
//! eta = t + r this is a Goursat problem, and integrating the equation
//! over one lattice cell gives the implicit one-cell update in
//! `cell_update`.  Lattice node (i, j) sits at xi = i h, eta = j h, i.e.
//! r = (j - i) h / 2, t = (j + i) h / 2.

use crate::forward::types::{ReceiverWaveform, SingularPart};
use crate::greens::{goursat_trace_damping, RadialCoefficient};

/// One cell of the characteristic march.  `ah` is a(r_center) * h, `left`
/// is phi at (i-1, j), `below` at (i, j-1), `diag` at (i-1, j-1), and
/// `cell_source` is the integral of the source over the cell divided by 4
/// (h^2 s_center / 4 for a pointwise source).
#[inline]
pub fn cell_update(ah: f64, left: f64, below: f64, diag: f64, cell_source: f64) -> f64 {
    (left + below - (1.0 - 0.25 * ah) * diag + cell_source) / (1.0 + 0.25 * ah)
}

/// Tail field of the radial damping problem on the characteristic lattice.
#[derive(Debug, Clone)]
pub struct GoursatField {
    h: f64,
    n: usize,
    /// phi[i][j - i] for i <= j <= n.
    phi: Vec<Vec<f64>>,
    cone_v0: f64,
}

/// Solve with the physical cone data coming from the front-trace formula.
pub fn solve_radial_damping<C: RadialCoefficient + ?Sized>(
    a: &C,
    t_max: f64,
    h: f64,
) -> GoursatField {
    let cone = |r: f64| goursat_trace_damping(a, r);
    solve_radial_damping_with(&|r| a.eval(r), t_max, h, &cone, None)
}

/// General form: explicit cone data and an optional manufactured source
/// s(r, t) on the right-hand side, used for order verification.
pub fn solve_radial_damping_with(
    a: &dyn Fn(f64) -> f64,
    t_max: f64,
    h: f64,
    cone: &dyn Fn(f64) -> f64,
    source: Option<&dyn Fn(f64, f64) -> f64>,
) -> GoursatField {
    assert!(h > 0.0 && t_max > h);
    let n = (t_max / h).round() as usize + 2;
    let mut phi: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    // Row i = 0 is the cone.
    phi.push(
        (0..=n)
            .map(|j| {
                let r = 0.5 * h * j as f64;
                r * cone(r)
            })
            .collect(),
    );
    for i in 1..=n {
        let mut row = Vec::with_capacity(n - i + 1);
        row.push(0.0); // axis node j = i
        for j in i + 1..=n {
            let r_c = 0.5 * h * (j - i) as f64;
            let cell_source = match source {
                Some(s) => {
                    let t_c = 0.5 * h * (i + j - 1) as f64;
                    0.25 * h * h * s(r_c, t_c)
                }
                None => 0.0,
            };
            let left = phi[i - 1][j - (i - 1)];
            let diag = phi[i - 1][j - 1 - (i - 1)];
            let below = row[j - 1 - i];
            row.push(cell_update(a(r_c) * h, left, below, diag, cell_source));
        }
        phi.push(row);
    }
    GoursatField {
        h,
        n,
        phi,
        cone_v0: cone(0.0),
    }
}

impl GoursatField {
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Largest eta index; nodes exist for 0 <= i <= j <= n.
    pub fn eta_steps(&self) -> usize {
        self.n
    }

    pub fn phi_node(&self, i: usize, j: usize) -> f64 {
        assert!(i <= j && j <= self.n, "node ({i}, {j}) outside lattice");
        self.phi[i][j - i]
    }

    /// Lattice indices of the point (r, t), if it is a node.
    pub fn node_of(&self, r: f64, t: f64) -> Option<(usize, usize)> {
        let fi = (t - r) / self.h;
        let fj = (t + r) / self.h;
        let (i, j) = (fi.round(), fj.round());
        if (fi - i).abs() > 1e-9 || (fj - j).abs() > 1e-9 {
            return None;
        }
        if i < 0.0 || j < i || j > self.n as f64 {
            return None;
        }
        Some((i as usize, j as usize))
    }

    /// Tail value at an off-axis node.
    pub fn v_node(&self, i: usize, j: usize) -> f64 {
        assert!(i < j, "use v_origin on the axis");
        self.phi_node(i, j) / (0.5 * self.h * (j - i) as f64)
    }

    /// Time derivative of the tail at a node, second order.  Interior nodes
    /// use the centered difference along constant r; the cone and the last
    /// diagonal fall back to one-sided three-point stencils.
    pub fn dt_v_node(&self, i: usize, j: usize) -> f64 {
        assert!(i < j);
        let r = 0.5 * self.h * (j - i) as f64;
        let dphi = if i >= 1 && j + 1 <= self.n {
            (self.phi_node(i + 1, j + 1) - self.phi_node(i - 1, j - 1)) / (2.0 * self.h)
        } else if i == 0 {
            assert!(j + 2 <= self.n, "cone derivative needs two extra diagonals");
            (-3.0 * self.phi_node(0, j) + 4.0 * self.phi_node(1, j + 1)
                - self.phi_node(2, j + 2))
                / (2.0 * self.h)
        } else {
            (3.0 * self.phi_node(i, j) - 4.0 * self.phi_node(i - 1, j - 1)
                + self.phi_node(i - 2, j - 2))
                / (2.0 * self.h)
        };
        dphi / r
    }

    /// Tail at the origin at time t = j h, by Richardson across the two
    /// nearest off-axis nodes (phi is odd in r, so the h^2 terms cancel).
    pub fn v_origin(&self, j: usize) -> f64 {
        match j {
            0 => self.cone_v0,
            1 => self.phi_node(0, 2) / self.h,
            _ => {
                assert!(j + 2 <= self.n, "origin value needs two extra diagonals");
                (8.0 * self.phi_node(j - 1, j + 1) - self.phi_node(j - 2, j + 2))
                    / (6.0 * self.h)
            }
        }
    }

    /// v(0, t) for t = 0, h, 2h, ... as far as the lattice allows.
    pub fn origin_series(&self) -> Vec<f64> {
        (0..=self.n - 2).map(|j| self.v_origin(j)).collect()
    }

    /// Backscattering record at the (coincident) source point.
    pub fn receiver_waveform(&self) -> ReceiverWaveform {
        ReceiverWaveform {
            source: [0.0; 3],
            receiver: [0.0; 3],
            start: 0.0,
            dt: self.h,
            values: self.origin_series(),
            singular: SingularPart {
                arrival: 0.0,
                amplitude: None,
            },
            solver: "characteristic".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::AnalyticRadial;
    use crate::oracles::constant_damping_tail;
    use approx::assert_relative_eq;

    #[test]
    fn constant_damping_matches_closed_form() {
        let c = 0.5;
        let a = AnalyticRadial {
            f: move |_: f64| c,
            df: |_: f64| 0.0,
        };
        let h = 1.0 / 400.0;
        let field = solve_radial_damping(&a, 2.0, h);
        for (r, t) in [(0.25, 0.75), (0.5, 1.5), (0.125, 1.875), (0.75, 1.25)] {
            let (i, j) = field.node_of(r, t).unwrap();
            let got = field.v_node(i, j);
            let want = constant_damping_tail(c, r, t);
            assert_relative_eq!(got, want, max_relative = 2e-4);
        }
    }

    #[test]
    fn origin_series_matches_closed_form() {
        let c = 0.4;
        let a = AnalyticRadial {
            f: move |_: f64| c,
            df: |_: f64| 0.0,
        };
        let h = 1.0 / 400.0;
        let field = solve_radial_damping(&a, 2.0, h);
        for j in [40usize, 200, 400, 700] {
            let t = h * j as f64;
            let want = constant_damping_tail(c, 0.0, t);
            assert_relative_eq!(field.v_origin(j), want, max_relative = 2e-4);
        }
    }

    #[test]
    fn time_derivative_matches_closed_form() {
        let c = 0.5;
        let a = AnalyticRadial {
            f: move |_: f64| c,
            df: |_: f64| 0.0,
        };
        let h = 1.0 / 400.0;
        let field = solve_radial_damping(&a, 2.0, h);
        let delta = 1e-6;
        for (r, t) in [(0.25, 1.25), (0.5, 1.0)] {
            let (i, j) = field.node_of(r, t).unwrap();
            let want = (constant_damping_tail(c, r, t + delta)
                - constant_damping_tail(c, r, t - delta))
                / (2.0 * delta);
            assert_relative_eq!(field.dt_v_node(i, j), want, max_relative = 1e-3);
        }
    }

    #[test]
    fn manufactured_solution_converges_at_second_order() {
        // phi_m = sin(2 r) exp(-t / 2) with a(r) = 0.3 (1 + r^2) forces the
        // source below; the lattice should reproduce phi_m at O(h^2).
        let a = |r: f64| 0.3 * (1.0 + r * r);
        let phi_m = |r: f64, t: f64| (2.0 * r).sin() * (-0.5 * t).exp();
        let src = move |r: f64, t: f64| {
            // phi_tt - phi_rr + a phi_t
            (0.25 + 4.0 - 0.5 * a(r)) * phi_m(r, t)
        };
        let cone = |r: f64| {
            if r < 1e-12 {
                2.0
            } else {
                phi_m(r, r) / r
            }
        };
        let sup_err = |h: f64| {
            let field = solve_radial_damping_with(&a, 1.5, h, &cone, Some(&src));
            let n = field.eta_steps();
            let mut worst = 0.0f64;
            for i in 0..=n {
                for j in i..=n {
                    let r = 0.5 * h * (j - i) as f64;
                    let t = 0.5 * h * (j + i) as f64;
                    worst = worst.max((field.phi_node(i, j) - phi_m(r, t)).abs());
                }
            }
            worst
        };
        let e1 = sup_err(1.0 / 100.0);
        let e2 = sup_err(1.0 / 200.0);
        let order = (e1 / e2).log2();
        println!("manufactured-solution errors {e1:.3e} -> {e2:.3e}, order {order:.2}");
        assert!(order > 1.8, "observed order {order}");
    }

    #[test]
    fn lattice_indexing_round_trips() {
        let a = AnalyticRadial {
            f: |_: f64| 0.2,
            df: |_: f64| 0.0,
        };
        let field = solve_radial_damping(&a, 1.0, 0.05);
        assert_eq!(field.node_of(0.25, 0.75), Some((10, 20)));
        assert_eq!(field.node_of(0.26, 0.75), None);
        let w = field.receiver_waveform();
        assert_eq!(w.dt, 0.05);
        assert!(w.singular.amplitude.is_none());
    }
}
