//! Coefficient profiles: the scalar fields (potential or damping) that the
//! solvers evaluate and the reconstructors produce.
//!
//! Tabulated profiles are stored as monotone cubic (Fritsch-Carlson)
//! interpolants so that C^1 test coefficients survive a round trip through
//! a table without spurious oscillation, and so that every profile written
//! by the reconstructor has exact, cheap prefix integrals.

use crate::{dist, norm, Error, Result, RECEIVER};
use std::fmt;
use std::io::{BufRead, Write as _};
use std::path::Path;
use std::sync::Arc;

/// Monotone cubic Hermite interpolant with exact piecewise integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
    /// prefix[i] = integral of the interpolant from xs[0] to xs[i].
    prefix: Vec<f64>,
}

impl Pchip {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::Profile(format!(
                "need >= 2 matched samples, got {} x {}",
                xs.len(),
                ys.len()
            )));
        }
        for w in xs.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Profile(format!(
                    "coordinates must increase strictly: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Profile("non-finite table entry".into()));
        }
        let ds = fritsch_carlson_slopes(&xs, &ys);
        let mut prefix = vec![0.0; xs.len()];
        for i in 1..xs.len() {
            let h = xs[i] - xs[i - 1];
            let piece = h * (ys[i - 1] + ys[i]) / 2.0 + h * h * (ds[i - 1] - ds[i]) / 12.0;
            prefix[i] = prefix[i - 1] + piece;
        }
        Ok(Pchip { xs, ys, ds, prefix })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        self.xs[1..n - 1].partition_point(|&k| k <= x)
    }

    /// Clamped evaluation: constant extension beyond the table.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= *self.xs.last().unwrap() {
            return *self.ys.last().unwrap();
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (y0, y1, d0, d1) = (self.ys[i], self.ys[i + 1], self.ds[i], self.ds[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
            + h * d0 * (t3 - 2.0 * t2 + t)
            + y1 * (-2.0 * t3 + 3.0 * t2)
            + h * d1 * (t3 - t2)
    }

    /// Derivative of the clamped interpolant (zero outside the table).
    pub fn deriv(&self, x: f64) -> f64 {
        if x < self.xs[0] || x > *self.xs.last().unwrap() {
            return 0.0;
        }
        let i = self.segment(x.min(self.xs[self.xs.len() - 1] - 0.0)).min(self.xs.len() - 2);
        let h = self.xs[i + 1] - self.xs[i];
        let t = ((x - self.xs[i]) / h).clamp(0.0, 1.0);
        let (y0, y1, d0, d1) = (self.ys[i], self.ys[i + 1], self.ds[i], self.ds[i + 1]);
        let t2 = t * t;
        (y0 * (6.0 * t2 - 6.0 * t)
            + h * d0 * (3.0 * t2 - 4.0 * t + 1.0)
            + y1 * (-6.0 * t2 + 6.0 * t)
            + h * d1 * (3.0 * t2 - 2.0 * t))
            / h
    }

    /// Signed integral of the clamped interpolant from the first knot to x.
    pub fn integral_from_start(&self, x: f64) -> f64 {
        let (a, b) = self.domain();
        if x <= a {
            return -self.ys[0] * (a - x);
        }
        if x >= b {
            return *self.prefix.last().unwrap() + self.ys.last().unwrap() * (x - b);
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (y0, y1, d0, d1) = (self.ys[i], self.ys[i + 1], self.ds[i], self.ds[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let partial = h
            * (y0 * (t4 / 2.0 - t3 + t)
                + h * d0 * (t4 / 4.0 - 2.0 * t3 / 3.0 + t2 / 2.0)
                + y1 * (-t4 / 2.0 + t3)
                + h * d1 * (t4 / 4.0 - t3 / 3.0));
        self.prefix[i] + partial
    }
}

fn fritsch_carlson_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
    if n == 2 {
        return vec![delta[0], delta[0]];
    }
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (dl, dr) = (delta[i - 1], delta[i]);
        if dl * dr <= 0.0 {
            d[i] = 0.0;
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / dl + w2 / dr);
        }
    }
    d[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn edge_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d * d0 <= 0.0 {
        0.0
    } else if d0 * d1 < 0.0 && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// How a coefficient depends on position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    /// Arbitrary function of position.
    General,
    /// Function of |x| only.
    Radial,
    /// Function of |x| + |x - e| only, e the receiver.
    Ellipsoidal,
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Symmetry::General => "general",
            Symmetry::Radial => "radial",
            Symmetry::Ellipsoidal => "ellipsoidal",
        };
        f.write_str(s)
    }
}

type FieldFn = Arc<dyn Fn([f64; 3]) -> f64 + Send + Sync>;

/// A coefficient of the wave operator: either a symmetric table or an
/// arbitrary evaluator, together with a ball that contains its support.
#[derive(Clone)]
pub struct CoefficientProfile {
    symmetry: Symmetry,
    table: Option<Pchip>,
    field: Option<FieldFn>,
    support_radius: f64,
    axisymmetric: bool,
}

impl fmt::Debug for CoefficientProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientProfile")
            .field("symmetry", &self.symmetry)
            .field("support_radius", &self.support_radius)
            .field("axisymmetric", &self.axisymmetric)
            .field("knots", &self.table.as_ref().map(|t| t.knots().0.len()))
            .finish()
    }
}

impl CoefficientProfile {
    /// Radial table: coordinates are |x|, starting at 0.
    pub fn radial(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.first().copied() != Some(0.0) {
            return Err(Error::Profile("radial table must start at r = 0".into()));
        }
        let support_radius = *radii.last().unwrap_or(&0.0);
        Ok(CoefficientProfile {
            symmetry: Symmetry::Radial,
            table: Some(Pchip::new(radii, values)?),
            field: None,
            support_radius,
            axisymmetric: true,
        })
    }

    /// Ellipsoidal table: coordinates are focal sums |x| + |x - e|, >= 1.
    pub fn ellipsoidal(sums: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if sums.first().map_or(true, |&s| s < 1.0) {
            return Err(Error::Profile(
                "focal-sum coordinates must be >= 1 (receiver at distance 1)".into(),
            ));
        }
        let outer = *sums.last().unwrap_or(&1.0);
        // The level set s = outer has semi-major axis outer/2 about e/2.
        let support_radius = 0.5 + 0.5 * outer;
        Ok(CoefficientProfile {
            symmetry: Symmetry::Ellipsoidal,
            table: Some(Pchip::new(sums, values)?),
            field: None,
            support_radius,
            axisymmetric: true,
        })
    }

    /// Arbitrary coefficient with a known bounding ball about the origin.
    pub fn general<F>(f: F, support_radius: f64) -> Self
    where
        F: Fn([f64; 3]) -> f64 + Send + Sync + 'static,
    {
        CoefficientProfile {
            symmetry: Symmetry::General,
            table: None,
            field: Some(Arc::new(f)),
            support_radius,
            axisymmetric: false,
        }
    }

    /// Arbitrary coefficient that is invariant under rotation about the
    /// receiver axis; lets the forward solvers drop the angular dimension.
    pub fn general_axisymmetric<F>(f: F, support_radius: f64) -> Self
    where
        F: Fn([f64; 3]) -> f64 + Send + Sync + 'static,
    {
        CoefficientProfile {
            axisymmetric: true,
            ..CoefficientProfile::general(f, support_radius)
        }
    }

    /// Sample a radial function onto a uniform table.
    pub fn radial_from_fn<F: Fn(f64) -> f64>(f: F, n: usize, r_max: f64) -> Result<Self> {
        let radii: Vec<f64> = (0..=n).map(|i| r_max * i as f64 / n as f64).collect();
        let values: Vec<f64> = radii.iter().map(|&r| f(r)).collect();
        CoefficientProfile::radial(radii, values)
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn axisymmetric(&self) -> bool {
        self.axisymmetric
    }

    /// Radius of a ball about the origin containing the support.
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// Center and radius of a tight bounding ball for the support; shell
    /// sweeps in the scattering kernel are clipped against this.
    pub fn support_ball(&self) -> ([f64; 3], f64) {
        match self.symmetry {
            Symmetry::Ellipsoidal => {
                let outer = self.table.as_ref().unwrap().domain().1;
                ([0.5, 0.0, 0.0], 0.5 * outer)
            }
            _ => ([0.0; 3], self.support_radius),
        }
    }

    pub fn table(&self) -> Option<&Pchip> {
        self.table.as_ref()
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        match self.symmetry {
            Symmetry::General => (self.field.as_ref().unwrap())(x),
            Symmetry::Radial => self.eval_symmetric(norm(x)),
            Symmetry::Ellipsoidal => self.eval_symmetric(norm(x) + dist(x, RECEIVER)),
        }
    }

    /// Evaluate a symmetric profile by its scalar coordinate (radius or
    /// focal sum).  Panics for general profiles.
    pub fn eval_symmetric(&self, c: f64) -> f64 {
        let t = self
            .table
            .as_ref()
            .expect("symmetric evaluation needs a tabulated profile");
        let (lo, hi) = t.domain();
        if c < lo || c > hi {
            return 0.0;
        }
        t.eval(c)
    }

    pub fn deriv_symmetric(&self, c: f64) -> f64 {
        self.table
            .as_ref()
            .expect("symmetric evaluation needs a tabulated profile")
            .deriv(c)
    }

    /// Integral of a radial profile over [0, r], treating coordinates
    /// outside the table as zero.
    pub fn integral_radial(&self, r: f64) -> f64 {
        assert_eq!(self.symmetry, Symmetry::Radial, "radial integral of non-radial profile");
        let t = self.table.as_ref().unwrap();
        let (_, hi) = t.domain();
        t.integral_from_start(r.min(hi))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let t = self.table.as_ref().ok_or_else(|| {
            Error::Profile("general profiles have no tabular form to serialize".into())
        })?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "# echostrip profile")?;
        writeln!(f, "# symmetry = {}", self.symmetry)?;
        writeln!(f, "# support_radius = {:.17e}", self.support_radius)?;
        writeln!(f, "coordinate,value")?;
        let (xs, ys) = t.knots();
        for (x, y) in xs.iter().zip(ys) {
            writeln!(f, "{:.17e},{:.17e}", x, y)?;
        }
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut symmetry = None;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for line in f.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line == "coordinate,value" {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    if k.trim() == "symmetry" {
                        symmetry = Some(match v.trim() {
                            "radial" => Symmetry::Radial,
                            "ellipsoidal" => Symmetry::Ellipsoidal,
                            other => {
                                return Err(Error::Profile(format!(
                                    "unknown symmetry tag {other:?}"
                                )))
                            }
                        });
                    }
                }
                continue;
            }
            let (a, b) = line.split_once(',').ok_or_else(|| {
                Error::Profile(format!("bad profile row {line:?}"))
            })?;
            xs.push(a.trim().parse::<f64>().map_err(|e| {
                Error::Profile(format!("bad coordinate {a:?}: {e}"))
            })?);
            ys.push(b.trim().parse::<f64>().map_err(|e| {
                Error::Profile(format!("bad value {b:?}: {e}"))
            })?);
        }
        match symmetry {
            Some(Symmetry::Radial) => CoefficientProfile::radial(xs, ys),
            Some(Symmetry::Ellipsoidal) => CoefficientProfile::ellipsoidal(xs, ys),
            _ => Err(Error::Profile("profile file missing symmetry header".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bump(r: f64) -> f64 {
        let s = 1.0 - (r / 0.9) * (r / 0.9);
        if s > 0.0 {
            0.5 * s * s
        } else {
            0.0
        }
    }

    #[test]
    fn pchip_reproduces_knots_and_stays_monotone() {
        let xs: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| (3.0 * x).tanh()).collect();
        let p = Pchip::new(xs.clone(), ys.clone()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert_relative_eq!(p.eval(*x), *y, epsilon = 1e-14);
        }
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=1000 {
            let v = p.eval(i as f64 / 1000.0);
            assert!(v >= prev - 1e-12, "interpolant dipped at {i}");
            prev = v;
        }
    }

    #[test]
    fn pchip_integral_matches_quadrature() {
        let xs: Vec<f64> = (0..=24).map(|i| i as f64 / 24.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| bump(x)).collect();
        let p = Pchip::new(xs, ys).unwrap();
        for r in [0.13, 0.5, 0.77, 1.0] {
            let quad =
                crate::quad::integrate_adaptive(|x| p.eval(x), 0.0, r, 1e-12).unwrap();
            assert_relative_eq!(p.integral_from_start(r), quad, epsilon = 1e-11);
        }
    }

    #[test]
    fn pchip_is_exact_on_linear_data() {
        let p = Pchip::new(vec![0.0, 0.4, 1.0], vec![1.0, 1.8, 3.0]).unwrap();
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            assert_relative_eq!(p.eval(x), 1.0 + 2.0 * x, epsilon = 1e-14);
            assert_relative_eq!(p.deriv(x), 2.0, epsilon = 1e-13);
        }
        assert_relative_eq!(p.integral_from_start(1.0), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn radial_profile_evaluates_by_distance() {
        let prof = CoefficientProfile::radial_from_fn(bump, 64, 0.9).unwrap();
        let x = [0.3, -0.2, 0.1];
        let r = crate::norm(x);
        assert_relative_eq!(prof.eval(x), bump(r), epsilon = 2e-6);
        assert_eq!(prof.eval([2.0, 0.0, 0.0]), 0.0);
        assert_relative_eq!(prof.support_radius(), 0.9);
    }

    #[test]
    fn ellipsoidal_profile_evaluates_by_focal_sum() {
        let sums: Vec<f64> = (0..=30).map(|i| 1.2 + 0.6 * i as f64 / 30.0).collect();
        let vals: Vec<f64> = sums
            .iter()
            .map(|&s| {
                let z = (s - 1.5) / 0.3;
                if z.abs() < 1.0 {
                    0.2 * (1.0 - z * z) * (1.0 - z * z)
                } else {
                    0.0
                }
            })
            .collect();
        let prof = CoefficientProfile::ellipsoidal(sums, vals).unwrap();
        let x = [0.9, 0.4, 0.0];
        let s = crate::norm(x) + crate::dist(x, RECEIVER);
        assert_relative_eq!(prof.eval(x), prof.eval_symmetric(s));
        // Inside the inner ellipsoid the coefficient vanishes.
        assert_eq!(prof.eval([0.5, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let prof = CoefficientProfile::radial_from_fn(bump, 40, 0.9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.csv");
        prof.write_csv(&path).unwrap();
        let back = CoefficientProfile::read_csv(&path).unwrap();
        assert_eq!(back.symmetry(), Symmetry::Radial);
        let (xs, ys) = prof.table().unwrap().knots();
        let (bx, by) = back.table().unwrap().knots();
        assert_eq!(xs, bx);
        assert_eq!(ys, by);
    }

    #[test]
    fn rejects_malformed_tables() {
        assert!(CoefficientProfile::radial(vec![0.0, 0.5, 0.5], vec![1.0, 2.0, 3.0]).is_err());
        assert!(CoefficientProfile::radial(vec![0.1, 0.5], vec![1.0, 2.0]).is_err());
        assert!(CoefficientProfile::ellipsoidal(vec![0.5, 1.5], vec![0.0, 0.0]).is_err());
    }
}
