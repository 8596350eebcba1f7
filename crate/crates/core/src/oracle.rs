//! Closed-form reference constructions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radius `d/a` of the only ball with `P = a |B|` in dimension `d`.
pub fn compatible_ball_radius(d: usize, a: f64) -> f64 {
    d as f64 / a
}

/// Regular polygon with corners rounded by arcs of radius `1/a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundedPolygon {
    pub sides: usize,
    pub a: f64,
    /// Side length of the circumscribing sharp polygon.
    pub side: f64,
    pub perimeter: f64,
    pub area: f64,
}

impl RoundedPolygon {
    pub fn new(sides: usize, side: f64, a: f64) -> Result<Self> {
        if sides < 3 {
            return Err(Error::param("sides", "need at least 3"));
        }
        if !(a > 0.0 && side > 0.0) {
            return Err(Error::param("a", "a and side must be positive"));
        }
        let rho = 1.0 / a;
        let n = sides as f64;
        let t = (PI / n).tan();
        if !(rho < side / 2.0) || side - 2.0 * rho * t < 0.0 {
            return Err(Error::param(
                "a",
                format!("corner radius {rho} does not fit a side of {side}"),
            ));
        }
        let inradius = side / (2.0 * t);
        let perimeter = n * side - 2.0 * n * rho * t + 2.0 * PI * rho;
        let area = n * inradius * inradius * t - n * rho * rho * (t - PI / n);
        Ok(RoundedPolygon {
            sides,
            a,
            side,
            perimeter,
            area,
        })
    }

    pub fn corner_radius(&self) -> f64 {
        1.0 / self.a
    }

    /// Length of the straight part of each side.
    pub fn flat_portion(&self) -> f64 {
        self.side - 2.0 * self.corner_radius() * (PI / self.sides as f64).tan()
    }

    /// `P - a |Z|`.
    pub fn compatibility_residual(&self) -> f64 {
        self.perimeter - self.a * self.area
    }
}

/// Rounded square of side `(2 + sqrt(pi))/a` satisfying `P = a |Z|`.
pub fn compatible_rounded_square(a: f64) -> RoundedPolygon {
    let side = (2.0 + PI.sqrt()) / a;
    let sq = RoundedPolygon::new(4, side, a).expect("corner radius 1/a always fits");
    debug_assert!(sq.compatibility_residual().abs() <= 1e-12 * sq.perimeter.max(1.0));
    sq
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MickeyAngle {
    pub angle: f64,
    pub residual: f64,
}

impl MickeyAngle {
    /// Chord `2 sin(angle/2) / a` cut by an ear.
    pub fn chord(&self, a: f64) -> f64 {
        2.0 * (self.angle / 2.0).sin() / a
    }
}

fn mickey_equation(alpha: f64) -> f64 {
    2.0 * PI - alpha - 4.0 * (alpha / 2.0).sin() - alpha.sin()
}

/// Root of `2 pi - alpha - 4 sin(alpha/2) - sin(alpha) = 0` by bisection on
/// `[1.5, 2.5]`.
pub fn mickey_angle() -> MickeyAngle {
    let (mut lo, mut hi) = (1.5_f64, 2.5_f64);
    let (flo, fhi) = (mickey_equation(lo), mickey_equation(hi));
    assert!(flo * fhi < 0.0, "bracket does not straddle a sign change");
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if (mickey_equation(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let angle = 0.5 * (lo + hi);
    MickeyAngle {
        angle,
        residual: mickey_equation(angle),
    }
}

/// Energy change when the needle configuration splits into two pieces:
/// `-2 sqrt((2 gamma)^2 + (2 - 2 gamma)^2) + 2 gamma + 4 a gamma`.
/// Negative values certify that the disconnected competitor wins.
pub fn needle_margin(gamma: f64, a: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::param("gamma", "must lie in (0, 1)"));
    }
    let g2 = 2.0 * gamma;
    Ok(-2.0 * (g2 * g2 + (2.0 - g2).powi(2)).sqrt() + g2 + 4.0 * a * gamma)
}

/// Adaptive Simpson quadrature.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(lo), f(hi));
    let (m, fm, whole) = simpson(f, lo, fa, hi, fb);
    recurse(f, lo, fa, hi, fb, m, fm, whole, tol, 50)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcMargin {
    /// `F(y) - F(l)`; negative when the rounded arc is better than the corner.
    pub value: f64,
    /// `int_0^xhat a^2 x^2 / sqrt(1 - a^2 x^2) dx` by quadrature.
    pub integral: f64,
    /// The same integral in closed form.
    pub integral_exact: f64,
    /// `beta^3 / (3 a (1 + beta^2))`, an upper bound for the integral.
    pub integral_bound: f64,
    /// `beta^3 / (3 a (1 + beta^2)^(3/2))`, the sharper bound that is sometimes
    /// quoted; it does not hold in general and is reported for comparison.
    pub quoted_bound: f64,
}

/// Energy advantage of rounding the vertex of a cone of slope `beta` with an
/// arc of radius `1/a`.
pub fn arc_vs_corner_margin(beta: f64, a: f64) -> Result<ArcMargin> {
    if !(beta > 0.0 && a > 0.0) {
        return Err(Error::param("beta", "beta and a must be positive"));
    }
    let b2 = 1.0 + beta * beta;
    let xhat = beta / (a * b2.sqrt());
    let integrand = |x: f64| a * a * x * x / (1.0 - a * a * x * x).sqrt();
    let integral = adaptive_simpson(&integrand, 0.0, xhat, 1e-12);
    let theta = (a * xhat).asin();
    let integral_exact = (theta / 2.0 - (2.0 * theta).sin() / 4.0) / a;
    Ok(ArcMargin {
        value: integral - beta.powi(3) / (2.0 * a * b2),
        integral,
        integral_exact,
        integral_bound: beta.powi(3) / (3.0 * a * b2),
        quoted_bound: beta.powi(3) / (3.0 * a * b2.powf(1.5)),
    })
}

/// Constants exported for tests and documentation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConstants {
    pub a: f64,
    pub compatible_ball_radius: f64,
    pub rounded_square: RoundedPolygon,
    pub rounded_square_flat_portion: f64,
    pub mickey: MickeyAngle,
    pub mickey_chord: f64,
    pub needle_margin_gamma_0_05: f64,
    pub needle_margin_gamma_1e_4: f64,
    pub arc_margin_beta_1: ArcMargin,
    pub arc_tangency_beta_1: f64,
    pub arc_vertex_height_beta_1: f64,
}

pub fn constants(a: f64) -> Result<OracleConstants> {
    let sq = compatible_rounded_square(a);
    let mickey = mickey_angle();
    let arc = crate::profile::ArcParams::new(1.0, a)?;
    Ok(OracleConstants {
        a,
        compatible_ball_radius: compatible_ball_radius(2, a),
        rounded_square: sq,
        rounded_square_flat_portion: sq.flat_portion(),
        mickey,
        mickey_chord: mickey.chord(a),
        needle_margin_gamma_0_05: needle_margin(0.05, a)?,
        needle_margin_gamma_1e_4: needle_margin(1e-4, a)?,
        arc_margin_beta_1: arc_vs_corner_margin(1.0, a)?,
        arc_tangency_beta_1: arc.tangency(),
        arc_vertex_height_beta_1: arc.vertex_height(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{perimeter_estimate, rasterize, volume, GridSpec, PerimeterScheme, Shape};

    #[test]
    fn ball_radius() {
        assert_eq!(compatible_ball_radius(2, 5.0), 0.4);
        assert_eq!(compatible_ball_radius(3, 3.0), 1.0);
        assert_eq!(compatible_ball_radius(2, 1.0), 2.0);
    }

    #[test]
    fn rounded_square_is_compatible() {
        let one = compatible_rounded_square(1.0);
        assert!((one.side - 3.7725).abs() < 1e-4);
        assert!((one.flat_portion() - PI.sqrt()).abs() < 1e-12);
        let five = compatible_rounded_square(5.0);
        assert!((five.flat_portion() - 0.3545).abs() < 1e-4);
        assert!(five.compatibility_residual().abs() <= 1e-12);
        assert!(RoundedPolygon::new(4, 0.3, 5.0).is_err());
    }

    #[test]
    fn rounded_polygon_matches_rasterization() {
        // Error roughly halves with the cell size; checked at the two
        // coarsest levels.
        let poly = RoundedPolygon::new(6, 1.0, 5.0).unwrap();
        let shape = Shape::RoundedPolygon {
            center: [0.0, 0.0],
            sides: 6,
            side: 1.0,
            corner_radius: 0.2,
            rotation: 0.0,
        };
        let errs: Vec<f64> = [128, 256, 512]
            .iter()
            .map(|&c| {
                let mask = rasterize(&shape, &GridSpec::default_domain(c).unwrap());
                (volume(&mask) - poly.area).abs() / poly.area
            })
            .collect();
        assert!(errs[2] < 0.005, "{errs:?}");
        let mask = rasterize(&shape, &GridSpec::default_domain(512).unwrap());
        let p = perimeter_estimate(&mask, PerimeterScheme::Crofton);
        assert!((p - poly.perimeter).abs() / poly.perimeter < 0.05);
    }

    #[test]
    fn mickey_constants() {
        let m = mickey_angle();
        assert!((m.angle - 2.005).abs() <= 1e-3, "{}", m.angle);
        assert!(m.residual.abs() <= 1e-9);
        assert!((m.chord(1.0) - 1.687).abs() <= 2e-3);
        // The ear chord is shorter than the flat part, so an ear fits.
        assert!(m.chord(5.0) < compatible_rounded_square(5.0).flat_portion());
    }

    #[test]
    fn needle_limits() {
        // The margin is about -4 + gamma (6 + 4a) for small gamma.
        assert!((needle_margin(1e-4, 1.0).unwrap() + 4.0).abs() < 1e-3);
        assert!((needle_margin(1e-7, 5.0).unwrap() + 4.0).abs() < 1e-5);
        assert!((needle_margin(0.05, 5.0).unwrap() + 2.705_26).abs() < 1e-5);
        assert!(needle_margin(0.5, 5.0).unwrap() > 0.0);
        assert!(needle_margin(0.0, 5.0).is_err());
    }

    #[test]
    fn arc_margin_is_negative() {
        for &(beta, a) in &[(0.1, 5.0), (1.0, 1.0), (1.0, 5.0), (3.0, 2.0), (10.0, 7.0)] {
            let m = arc_vs_corner_margin(beta, a).unwrap();
            assert!(m.value < 0.0, "beta {beta} a {a}");
            assert!((m.integral - m.integral_exact).abs() < 1e-10);
            assert!(m.integral <= m.integral_bound);
        }
        let small = arc_vs_corner_margin(1e-3, 5.0).unwrap();
        assert!(small.value < 0.0 && small.value > -1e-9);
        // The sharper quoted bound fails at beta = a = 1.
        let m = arc_vs_corner_margin(1.0, 1.0).unwrap();
        assert!(m.integral > m.quoted_bound);
    }
}
