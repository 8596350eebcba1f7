//! Symmetric graph profiles `Z = { 0 <= x <= 1, |y| <= u(x) }` below an
//! obstacle `v`, and the circular-arc solution near a cone vertex.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Obstacle heights `v(x)` on `[0, 1]` used by the figure presets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Obstacle {
    /// `(x - 1/2)^2 + 1/2`
    FigF1,
    /// `3/4 - beta (x - 1/2)^2`
    FigF2 { beta: f64 },
    /// `3/4 - 2 (x - 1/2)^2`
    FigF21,
    /// `3/4 - (x - 1/2)^2 / 5`
    FigF22,
    /// `3/4 - |x - 1/2|`
    FigF31,
    /// `1/4 + |x - 1/2|`
    FigF32,
    /// `max(1 - 5|x - 1/2|, 1/2)`
    FigF41,
    /// `floor(5x)/5 + 1/5`
    FigF42,
    /// `peak - slope |x - 1/2|`
    Cone { peak: f64, slope: f64 },
}

impl Obstacle {
    pub fn eval(&self, x: f64) -> f64 {
        let c = (x - 0.5).abs();
        match self {
            Obstacle::FigF1 => c * c + 0.5,
            Obstacle::FigF2 { beta } => 0.75 - beta * c * c,
            Obstacle::FigF21 => 0.75 - 2.0 * c * c,
            Obstacle::FigF22 => 0.75 - 0.2 * c * c,
            Obstacle::FigF31 => 0.75 - c,
            Obstacle::FigF32 => 0.25 + c,
            Obstacle::FigF41 => (1.0 - 5.0 * c).max(0.5),
            Obstacle::FigF42 => (5.0 * x).floor() / 5.0 + 0.2,
            Obstacle::Cone { peak, slope } => peak - slope * c,
        }
    }

    /// Samples `v(i/N)`, clamped at 0.
    pub fn samples(&self, n: usize) -> Vec<f64> {
        (0..=n)
            .map(|i| self.eval(i as f64 / n as f64).max(0.0))
            .collect()
    }
}

/// Piecewise-affine profile on `x_i = i/N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl Profile {
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != v.len() || u.len() < 2 {
            return Err(Error::param("profile", "u and v need the same length N + 1 >= 2"));
        }
        let p = Profile { u, v };
        p.check()?;
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.u.len() - 1
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.n() as f64
    }

    pub fn check(&self) -> Result<()> {
        for (i, (&u, &v)) in self.u.iter().zip(&self.v).enumerate() {
            if !(u >= 0.0 && u <= v) {
                return Err(Error::ProfileConstraint { index: i, u, v });
            }
        }
        Ok(())
    }

    /// Indices where `v_i - u_i <= tol`.
    pub fn contact(&self, tol: f64) -> Vec<usize> {
        (0..=self.n())
            .filter(|&i| self.v[i] - self.u[i] <= tol)
            .collect()
    }

    /// Total length of the contact set, counting `1/N` per contact sample.
    pub fn contact_length(&self, tol: f64) -> f64 {
        self.contact(tol).len() as f64 / self.n() as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "u", "v"])?;
        for i in 0..=self.n() {
            w.serialize((self.x(i), self.u[i], self.v[i]))?;
        }
        w.flush().map_err(|e| Error::io("<profile csv>", e))?;
        Ok(())
    }
}

fn objective_unchecked(u: &[f64], v: &[f64], a: f64) -> f64 {
    let n = u.len() - 1;
    let inv = 1.0 / n as f64;
    let mut arc = 0.0;
    let mut gap = 0.0;
    for i in 1..=n {
        let d = u[i] - u[i - 1];
        arc += (d * d + inv * inv).sqrt();
        gap += v[i] - u[i];
    }
    2.0 * (u[0] + u[n] + arc + a * inv * gap)
}

/// Perimeter of `Z` plus `a` times the area of `F^c \ Z`, for the symmetric
/// profile.
pub fn profile_objective(p: &Profile, a: f64) -> Result<f64> {
    p.check()?;
    Ok(objective_unchecked(&p.u, &p.v, a))
}

fn gradient(u: &[f64], a: f64, out: &mut [f64]) {
    let n = u.len() - 1;
    let inv = 1.0 / n as f64;
    out.iter_mut().for_each(|g| *g = 0.0);
    out[0] += 2.0;
    out[n] += 2.0;
    for i in 1..=n {
        let d = u[i] - u[i - 1];
        let s = 2.0 * d / (d * d + inv * inv).sqrt();
        out[i] += s;
        out[i - 1] -= s;
        out[i] -= 2.0 * a * inv;
    }
}

/// Projected-gradient stationarity `|| P(u - grad f) - u ||`.
fn stationarity(u: &[f64], v: &[f64], g: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .zip(g)
        .map(|((&ui, &vi), &gi)| {
            let step = (ui - gi).clamp(0.0, vi) - ui;
            step * step
        })
        .sum::<f64>()
        .sqrt()
}

/// Solver output with its certificate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileSolution {
    pub profile: Profile,
    pub objective: f64,
    pub stationarity: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ProfileParams {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ProfileParams {
    fn default() -> Self {
        ProfileParams {
            tol: 1e-9,
            max_iter: 2000,
        }
    }
}

/// Minimizes the profile objective over `0 <= u <= v`.
///
/// Projected Newton iteration: bounds that are active with an outward
/// gradient are frozen, the remaining coordinates take a Newton step on the
/// tridiagonal Hessian, and the step is projected back onto the box with
/// Armijo backtracking along the projection arc.
pub fn solve_profile(v: &[f64], a: f64, params: ProfileParams) -> Result<ProfileSolution> {
    if v.len() < 2 {
        return Err(Error::param("N", "need at least one segment"));
    }
    if !(a > 0.0) {
        return Err(Error::param("a", "must be positive"));
    }
    if !(params.tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    if let Some((i, &vi)) = v.iter().enumerate().find(|(_, &vi)| !(vi >= 0.0)) {
        return Err(Error::ProfileConstraint { index: i, u: 0.0, v: vi });
    }
    let n = v.len() - 1;
    let inv = 1.0 / n as f64;
    let mut u = v.to_vec();
    let mut g = vec![0.0; n + 1];
    let mut trial = vec![0.0; n + 1];
    let mut dir = vec![0.0; n + 1];
    let mut f = objective_unchecked(&u, v, a);
    let mut iterations = 0;
    gradient(&u, a, &mut g);
    let mut stat = stationarity(&u, v, &g);

    while stat > params.tol && iterations < params.max_iter {
        iterations += 1;
        let eps = stat.min(1e-3);
        let active: Vec<bool> = (0..=n)
            .map(|i| (u[i] <= eps && g[i] > 0.0) || (u[i] >= v[i] - eps && g[i] < 0.0) || v[i] == 0.0)
            .collect();

        // Tridiagonal Hessian of 2 * sum sqrt(d^2 + N^-2).
        let mut diag = vec![0.0; n + 1];
        let mut off = vec![0.0; n + 1]; // off[i] couples i-1 and i
        for i in 1..=n {
            let d = u[i] - u[i - 1];
            let w = 2.0 * inv * inv / (d * d + inv * inv).powf(1.5);
            diag[i] += w;
            diag[i - 1] += w;
            off[i] = -w;
        }
        let scale = diag.iter().cloned().fold(0.0, f64::max).max(1.0);
        let mut rhs = vec![0.0; n + 1];
        for i in 0..=n {
            if active[i] {
                diag[i] = 1.0;
                rhs[i] = 0.0;
            } else {
                diag[i] += 1e-10 * scale;
                rhs[i] = -g[i];
            }
        }
        for i in 1..=n {
            if active[i] || active[i - 1] {
                off[i] = 0.0;
            }
        }
        solve_tridiagonal(&diag, &off, &mut rhs);
        for i in 0..=n {
            dir[i] = if active[i] { -g[i] / scale } else { rhs[i] };
        }

        // Near the optimum the decrease drops below the rounding error of f.
        let roundoff = 8.0 * f64::EPSILON * f.abs();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..=n {
                trial[i] = (u[i] + alpha * dir[i]).clamp(0.0, v[i]);
            }
            let ft = objective_unchecked(&trial, v, a);
            let decrease: f64 = (0..=n).map(|i| g[i] * (trial[i] - u[i])).sum();
            if ft <= f + 1e-4 * decrease + roundoff {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // Fall back to a plain projected gradient step.
            let mut step = 1.0 / scale;
            loop {
                for i in 0..=n {
                    trial[i] = (u[i] - step * g[i]).clamp(0.0, v[i]);
                }
                let ft = objective_unchecked(&trial, v, a);
                let decrease: f64 = (0..=n).map(|i| g[i] * (trial[i] - u[i])).sum();
                if ft <= f + 1e-4 * decrease + roundoff || step < 1e-20 {
                    break;
                }
                step *= 0.5;
            }
        }
        std::mem::swap(&mut u, &mut trial);
        f = objective_unchecked(&u, v, a);
        gradient(&u, a, &mut g);
        stat = stationarity(&u, v, &g);
    }

    if stat > params.tol {
        return Err(Error::NonConvergence {
            iterations,
            gap: stat,
            tolerance: params.tol,
        });
    }
    Ok(ProfileSolution {
        profile: Profile { u, v: v.to_vec() },
        objective: f,
        stationarity: stat,
        iterations,
    })
}

/// Thomas algorithm; `off[i]` is the coupling between rows `i - 1` and `i`.
fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut b = diag[0];
    c[0] = if n > 1 { off[1] / b } else { 0.0 };
    rhs[0] /= b;
    for i in 1..n {
        b = diag[i] - off[i] * c[i - 1];
        c[i] = if i + 1 < n { off[i + 1] / b } else { 0.0 };
        rhs[i] = (rhs[i] - off[i] * rhs[i - 1]) / b;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

/// Cone slope and dissipation coefficient for the arc construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcParams {
    pub beta: f64,
    pub a: f64,
}

impl ArcParams {
    pub fn new(beta: f64, a: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::param("beta", "must be positive"));
        }
        if !(a > 0.0) {
            return Err(Error::param("a", "must be positive"));
        }
        Ok(ArcParams { beta, a })
    }

    /// Abscissa where the arc meets the cone tangentially.
    pub fn tangency(&self) -> f64 {
        self.beta / (self.a * (1.0 + self.beta * self.beta).sqrt())
    }

    /// Height of the arc at the vertex, `(sqrt(1 + beta^2) - 1) / a`.
    pub fn vertex_height(&self) -> f64 {
        ((1.0 + self.beta * self.beta).sqrt() - 1.0) / self.a
    }
}

/// The arc of radius `1/a` that rounds the vertex of the cone
/// `{ y >= beta |x| }`.
pub fn analytic_arc(params: ArcParams, x: f64) -> Result<f64> {
    let a = params.a;
    if !(0.0..=1.0 / a).contains(&x) {
        return Err(Error::param("x", format!("{x} outside [0, 1/a]")));
    }
    let b = params.beta;
    Ok(-(1.0 - a * a * x * x).max(0.0).sqrt() / a + (1.0 + b * b).sqrt() / a)
}

/// Slope of [`analytic_arc`].
pub fn analytic_arc_slope(params: ArcParams, x: f64) -> f64 {
    let a = params.a;
    a * x / (1.0 - a * a * x * x).sqrt()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FreeRun {
    pub start: usize,
    pub end: usize,
    /// `max |kappa / a - 1|` over the interior samples.
    pub max_deviation: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub runs: Vec<FreeRun>,
    /// Runs with fewer than five samples, `(start, end)` inclusive.
    pub skipped: Vec<(usize, usize)>,
}

impl CurvatureReport {
    pub fn max_deviation(&self) -> Option<f64> {
        self.runs.iter().map(|r| r.max_deviation).reduce(f64::max)
    }

    /// True when at least one run was measured and all lie within `tol`.
    pub fn within(&self, tol: f64) -> bool {
        self.max_deviation().is_some_and(|d| d <= tol)
    }
}

/// Curvature of the circle through three points.
pub fn circumcurvature(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2]) -> f64 {
    let d = |p: [f64; 2], q: [f64; 2]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
    let cross = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]);
    let denom = d(p0, p1) * d(p1, p2) * d(p0, p2);
    if denom == 0.0 {
        0.0
    } else {
        2.0 * cross.abs() / denom
    }
}

/// Compares the curvature of each free run with `a`. Two samples next to each
/// end of a run are excluded.
pub fn curvature_scan(p: &Profile, a: f64, contact_tol: f64) -> CurvatureReport {
    let n = p.n();
    let free: Vec<bool> = (0..=n).map(|i| p.v[i] - p.u[i] > contact_tol).collect();
    let mut report = CurvatureReport::default();
    let mut i = 0;
    while i <= n {
        if !free[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i <= n && free[i] {
            i += 1;
        }
        let end = i - 1;
        if end - start + 1 < 5 {
            report.skipped.push((start, end));
            continue;
        }
        let mut worst: f64 = 0.0;
        for k in start + 2..=end - 2 {
            let pt = |m: usize| [p.x(m), p.u[m]];
            let kappa = circumcurvature(pt(k - 1), pt(k), pt(k + 1));
            worst = worst.max((kappa / a - 1.0).abs());
        }
        report.runs.push(FreeRun {
            start,
            end,
            max_deviation: worst,
        });
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn flat_and_zero_profiles() {
        let n = 10;
        let p = Profile::new(vec![0.3; n + 1], vec![0.3; n + 1]).unwrap();
        assert!((profile_objective(&p, 5.0).unwrap() - 2.0 * (0.6 + 1.0)).abs() < 1e-12);
        let z = Profile::new(vec![0.0; n + 1], vec![0.0; n + 1]).unwrap();
        assert!((profile_objective(&z, 5.0).unwrap() - 2.0).abs() < 1e-12);
        assert!(Profile::new(vec![0.5; 3], vec![0.4; 3]).is_err());
    }

    #[test]
    fn zero_obstacle_gives_zero_profile() {
        let s = solve_profile(&[0.0; 11], 5.0, ProfileParams::default()).unwrap();
        assert!(s.profile.u.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn arc_closed_forms() {
        let p = ArcParams::new(1.0, 5.0).unwrap();
        let xh = p.tangency();
        assert!((xh - 0.141421).abs() < 1e-6);
        assert!((analytic_arc(p, 0.0).unwrap() - 0.082843).abs() < 1e-6);
        assert!((analytic_arc(p, 0.0).unwrap() - p.vertex_height()).abs() < 1e-15);
        assert!((analytic_arc(p, xh).unwrap() - p.beta * xh).abs() < 1e-12);
        assert!((analytic_arc_slope(p, xh) - p.beta).abs() < 1e-12);
        assert!(analytic_arc(p, 0.3).is_err());
    }

    #[test]
    fn arc_beats_cone_profile() {
        let n = 100;
        let (beta, a, c) = (1.0, 5.0, 1.0);
        let obstacle = Obstacle::Cone { peak: c, slope: beta };
        let v = obstacle.samples(n);
        let params = ArcParams::new(beta, a).unwrap();
        let xh = params.tangency();
        let u: Vec<f64> = (0..=n)
            .map(|i| {
                let s = (i as f64 / n as f64 - 0.5).abs();
                if s < xh {
                    (c - analytic_arc(params, s).unwrap()).min(v[i])
                } else {
                    v[i]
                }
            })
            .collect();
        let arc = profile_objective(&Profile::new(u, v.clone()).unwrap(), a).unwrap();
        let cone = profile_objective(&Profile::new(v.clone(), v).unwrap(), a).unwrap();
        assert!(arc < cone - 1e-4, "{arc} vs {cone}");
    }

    #[test]
    fn exact_arc_has_curvature_a() {
        let n = 100;
        let a = 5.0;
        // Upper half circle of radius 1/a centred at (1/2, 0), padded with contact.
        let v = vec![1.0; n + 1];
        let u: Vec<f64> = (0..=n)
            .map(|i| {
                let s = i as f64 / n as f64 - 0.5;
                ((1.0 / (a * a)) - s * s).max(0.0).sqrt()
            })
            .collect();
        let p = Profile { u, v };
        let mut report = CurvatureReport::default();
        // Only the samples strictly inside the circle are measured.
        for k in 33..=67 {
            let pt = |m: usize| [p.x(m), p.u[m]];
            let kappa = circumcurvature(pt(k - 1), pt(k), pt(k + 1));
            report.runs.push(FreeRun {
                start: k,
                end: k,
                max_deviation: (kappa / a - 1.0).abs(),
            });
        }
        assert!(report.within(0.02), "{:?}", report.max_deviation());
    }

    #[test]
    fn straight_run_is_flagged() {
        let n = 20;
        let v = vec![1.0; n + 1];
        let u = (0..=n).map(|i| 0.2 + 0.01 * i as f64).collect();
        let r = curvature_scan(&Profile { u, v }, 5.0, 1e-4);
        assert_eq!(r.runs.len(), 1);
        assert!(!r.within(0.1));
        assert!((r.max_deviation().unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn short_runs_are_skipped() {
        let v = vec![1.0; 11];
        let mut u = v.clone();
        u[3] = 0.9;
        u[4] = 0.9;
        let r = curvature_scan(&Profile { u, v }, 5.0, 1e-4);
        assert!(r.runs.is_empty());
        assert_eq!(r.skipped, vec![(3, 4)]);
    }

    #[test]
    fn a_below_two_collapses_the_ends() {
        let v = Obstacle::FigF1.samples(100);
        let s = solve_profile(&v, 1.5, ProfileParams::default()).unwrap();
        assert!(s.profile.u[0] <= 1e-6 && s.profile.u[100] <= 1e-6);
    }

    #[test]
    fn contact_grows_with_a() {
        let v = Obstacle::FigF1.samples(100);
        let len: Vec<f64> = [3.0, 5.0, 7.0]
            .iter()
            .map(|&a| {
                solve_profile(&v, a, ProfileParams::default())
                    .unwrap()
                    .profile
                    .contact_length(1e-4)
            })
            .collect();
        assert!(len[0] <= len[1] && len[1] <= len[2], "{len:?}");
        assert!(len[2] > len[0]);
    }

    #[test]
    fn staircase_touches_at_the_steps() {
        let v = Obstacle::FigF42.samples(100);
        let s = solve_profile(&v, 5.0, ProfileParams::default()).unwrap();
        let contact = s.profile.contact(1e-4);
        assert!(!contact.is_empty());
        for &i in &contact {
            let x = i as f64 / 100.0;
            let near = [0.2, 0.4, 0.6, 0.8]
                .iter()
                .any(|&c| (x - c).abs() <= 0.0101 || (x - c + 0.01).abs() <= 0.0101);
            assert!(near, "unexpected contact at x = {x}");
        }
    }

    #[test]
    fn parabola_is_convex_with_top_contact() {
        let v = Obstacle::FigF2 { beta: 2.0 }.samples(100);
        let s = solve_profile(&v, 7.0, ProfileParams::default()).unwrap();
        let u = &s.profile.u;
        for i in 1..100 {
            // Concave graph = convex set.
            assert!(u[i - 1] + u[i + 1] - 2.0 * u[i] <= 1e-9, "at {i}");
        }
        assert!(s.profile.contact(1e-4).contains(&50));
    }

    #[test]
    fn lattice_search_does_not_beat_the_solver() {
        let n = 6;
        let v = vec![0.5, 0.6, 0.7, 0.75, 0.7, 0.6, 0.5];
        let a = 5.0;
        let s = solve_profile(&v, a, ProfileParams::default()).unwrap();
        // Coordinate sweeps over a 40-level lattice per coordinate.
        let levels = 40;
        let mut best = v.clone();
        let mut fbest = objective_unchecked(&best, &v, a);
        for _ in 0..20 {
            for i in 0..=n {
                for l in 0..=levels {
                    let mut cand = best.clone();
                    cand[i] = v[i] * l as f64 / levels as f64;
                    let fc = objective_unchecked(&cand, &v, a);
                    if fc < fbest {
                        fbest = fc;
                        best = cand;
                    }
                }
            }
        }
        assert!(fbest >= s.objective - 1e-9, "{fbest} < {}", s.objective);
    }

    proptest! {
        #[test]
        fn objective_is_convex(
            v in proptest::collection::vec(0.1f64..1.0, 9),
            s1 in proptest::collection::vec(0.0f64..1.0, 9),
            s2 in proptest::collection::vec(0.0f64..1.0, 9),
            lambda in 0.01f64..0.99,
        ) {
            let p1: Vec<f64> = v.iter().zip(&s1).map(|(v, s)| v * s).collect();
            let p2: Vec<f64> = v.iter().zip(&s2).map(|(v, s)| v * s).collect();
            let mix: Vec<f64> = p1.iter().zip(&p2).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
            let f = |u: &[f64]| objective_unchecked(u, &v, 5.0);
            prop_assert!(f(&mix) <= lambda * f(&p1) + (1.0 - lambda) * f(&p2) + 1e-12);
        }

        #[test]
        fn solution_is_feasible_and_stationary(
            v in proptest::collection::vec(0.05f64..1.0, 5..30),
            a in 2.5f64..9.0,
        ) {
            let s = solve_profile(&v, a, ProfileParams::default()).unwrap();
            s.profile.check().unwrap();
            prop_assert!(s.stationarity <= 1e-9);
            prop_assert!(s.objective <= objective_unchecked(&v, &v, a) + 1e-12);
        }
    }
}
