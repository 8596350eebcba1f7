//! One incremental step on the grid: minimize
//! `P(z) + h^2 sum g z + offset` over binary `z <= m`.
//!
//! The relaxation over `0 <= u <= m` is solved with a first-order primal-dual
//! iteration and rounded by thresholding. An exhaustive search serves as the
//! reference on tiny problems.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{perimeter_raw, tv_raw, BinaryField, GridSpec, PerimeterScheme, RelaxedField};

#[derive(Clone, Debug, PartialEq)]
pub struct StepProblem {
    /// Upper mask `m`.
    pub admissible: BinaryField,
    /// Linear weight per cell, multiplied by `h^2` in the objective.
    pub g: Vec<f64>,
    pub scheme: PerimeterScheme,
    pub offset: f64,
}

impl StepProblem {
    pub fn new(admissible: BinaryField, g: Vec<f64>, scheme: PerimeterScheme, offset: f64) -> Result<Self> {
        if g.len() != admissible.grid().len() {
            return Err(Error::GridMismatch);
        }
        if g.iter().any(|x| !x.is_finite()) || !offset.is_finite() {
            return Err(Error::param("g", "weights and offset must be finite"));
        }
        Ok(StepProblem {
            admissible,
            g,
            scheme,
            offset,
        })
    }

    /// Adhesive step from `prev`: `g = k f - a`, `m = prev`.
    pub fn adhesive(prev: &BinaryField, density: &[f64], k: f64, a: f64, scheme: PerimeterScheme) -> Result<Self> {
        if density.len() != prev.grid().len() {
            return Err(Error::GridMismatch);
        }
        let g = density.iter().map(|f| k * f - a).collect();
        Self::new(prev.clone(), g, scheme, a * crate::geometry::volume(prev))
    }

    /// Brittle step from `prev`: `g = -a`, `m = prev \ F`.
    pub fn brittle(prev: &BinaryField, forced: &BinaryField, a: f64, scheme: PerimeterScheme) -> Result<Self> {
        let m = prev.difference(forced)?;
        let g = vec![-a; prev.grid().len()];
        Self::new(m, g, scheme, a * crate::geometry::volume(prev))
    }

    pub fn grid(&self) -> &GridSpec {
        self.admissible.grid()
    }

    /// Objective of a binary field; `+inf` outside the admissible mask.
    pub fn objective(&self, z: &BinaryField) -> Result<f64> {
        if !z.is_subset_of(&self.admissible)? {
            return Ok(f64::INFINITY);
        }
        let lin: f64 = z.ones().map(|c| self.g[c]).sum();
        Ok(crate::geometry::perimeter_estimate(z, self.scheme) + self.grid().cell_area() * lin + self.offset)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveParams {
    pub max_iter: usize,
    /// Dual step; defaults to `h / sqrt(L)`.
    pub sigma: Option<f64>,
    /// Primal step; defaults to `h / sqrt(L)`.
    pub tau: Option<f64>,
    /// Absolute duality-gap tolerance; defaults to `1e-6` times the domain
    /// area.
    pub tol: Option<f64>,
    pub threshold: f64,
    /// Also try other levels of the relaxed solution and keep the best.
    pub level_scan: bool,
    pub telemetry: bool,
    /// Iterations between gap evaluations.
    pub check_every: usize,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            max_iter: 20000,
            sigma: None,
            tau: None,
            tol: None,
            threshold: 0.5,
            level_scan: true,
            telemetry: false,
            check_every: 10,
        }
    }
}

struct Resolved {
    sigma: f64,
    tau: f64,
    tol: f64,
}

impl SolveParams {
    fn resolve(&self, grid: &GridSpec, scheme: PerimeterScheme) -> Result<Resolved> {
        let h = grid.h();
        let l2 = scheme.operator_norm_sq_unscaled() / (h * h);
        let default_step = 1.0 / l2.sqrt();
        let sigma = self.sigma.unwrap_or(default_step);
        let tau = self.tau.unwrap_or(default_step);
        if !(sigma > 0.0 && tau > 0.0) {
            return Err(Error::param("sigma", "step sizes must be positive"));
        }
        if sigma * tau * l2 > 1.0 + 1e-12 {
            return Err(Error::param(
                "sigma",
                format!("sigma * tau * L^2 = {} exceeds 1", sigma * tau * l2),
            ));
        }
        let tol = self.tol.unwrap_or(1e-6 * grid.area());
        if !(tol > 0.0) {
            return Err(Error::param("tol", "must be positive"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::param("threshold", "must lie in (0, 1)"));
        }
        if self.check_every == 0 {
            return Err(Error::param("check_every", "must be at least 1"));
        }
        Ok(Resolved { sigma, tau, tol })
    }
}

/// Primal-dual certificate. Energies include the offset; `gap` is the
/// difference between the best primal and best dual values seen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub iterations: usize,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub tolerance: f64,
    pub converged: bool,
    /// Threshold level that produced the returned mask; `None` when the
    /// empty set won the level comparison.
    pub level: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRow {
    pub iteration: usize,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct RelaxedSolution {
    pub field: RelaxedField,
    pub certificate: Certificate,
    pub telemetry: Vec<TelemetryRow>,
}

/// Bounding box of the mask grown by one cell, clipped to the grid.
#[derive(Clone, Copy, Debug)]
struct Window {
    i0: usize,
    j0: usize,
    nx: usize,
    ny: usize,
}

impl Window {
    fn of(m: &BinaryField) -> Option<Window> {
        let grid = m.grid();
        let (mut imin, mut imax, mut jmin, mut jmax) = (usize::MAX, 0, usize::MAX, 0);
        for c in m.ones() {
            let (i, j) = grid.coords(c);
            imin = imin.min(i);
            imax = imax.max(i);
            jmin = jmin.min(j);
            jmax = jmax.max(j);
        }
        if imin == usize::MAX {
            return None;
        }
        let i0 = imin.saturating_sub(1);
        let j0 = jmin.saturating_sub(1);
        let i1 = (imax + 2).min(grid.nx());
        let j1 = (jmax + 2).min(grid.ny());
        Some(Window {
            i0,
            j0,
            nx: i1 - i0,
            ny: j1 - j0,
        })
    }

    fn len(&self) -> usize {
        self.nx * self.ny
    }

    fn extract<T: Copy>(&self, grid: &GridSpec, full: &[T]) -> Vec<T> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.ny {
            let start = grid.index(self.i0, self.j0 + j);
            out.extend_from_slice(&full[start..start + self.nx]);
        }
        out
    }

    fn insert<T: Copy>(&self, grid: &GridSpec, local: &[T], full: &mut [T]) {
        for j in 0..self.ny {
            let start = grid.index(self.i0, self.j0 + j);
            full[start..start + self.nx].copy_from_slice(&local[j * self.nx..(j + 1) * self.nx]);
        }
    }
}

/// Forward-difference direction restricted to a window.
struct Stencil {
    offset: isize,
    coef: f64,
    i_lo: usize,
    i_hi: usize,
    j_lo: usize,
    j_hi: usize,
}

fn stencils(nx: usize, ny: usize, h: f64, scheme: PerimeterScheme) -> Vec<Stencil> {
    scheme
        .directions()
        .iter()
        .map(|d| Stencil {
            offset: d.dj * nx as isize + d.di,
            coef: d.weight / h,
            i_lo: (-d.di).max(0) as usize,
            i_hi: (nx as isize - d.di.max(0)).max(0) as usize,
            j_lo: (-d.dj).max(0) as usize,
            j_hi: (ny as isize - d.dj.max(0)).max(0) as usize,
        })
        .collect()
}

/// Unscaled energies on the window: `sum N(Ku) + g.u`.
fn primal_value(u: &[f64], g: &[f64], nx: usize, ny: usize, h: f64, scheme: PerimeterScheme) -> f64 {
    let lin: f64 = u.iter().zip(g).map(|(a, b)| a * b).sum();
    tv_raw(nx, ny, h, u, scheme) / (h * h) + lin
}

struct Core {
    best_u: Vec<f64>,
    iterations: usize,
    best_primal: f64,
    best_dual: f64,
    telemetry: Vec<TelemetryRow>,
}

fn primal_dual(
    m: &[f64],
    g: &[f64],
    nx: usize,
    ny: usize,
    h: f64,
    scheme: PerimeterScheme,
    params: &SolveParams,
    r: &Resolved,
    offset: f64,
) -> Core {
    let n = nx * ny;
    let st = stencils(nx, ny, h, scheme);
    let l2 = scheme.is_l2();
    let scale = h * h;
    let mut u = vec![0.0; n];
    let mut ubar = vec![0.0; n];
    let mut p: Vec<Vec<f64>> = st.iter().map(|_| vec![0.0; n]).collect();
    let mut kt = vec![0.0; n];
    let mut best_u = u.clone();
    let mut best_primal = primal_value(&u, g, nx, ny, h, scheme);
    let mut best_dual = f64::NEG_INFINITY;
    let mut telemetry = Vec::new();
    let mut iterations = 0;

    while iterations < params.max_iter {
        iterations += 1;
        // Dual ascent on p with projection onto the unit ball of N*.
        for (s, pd) in st.iter().zip(p.iter_mut()) {
            let sc = r.sigma * s.coef;
            for j in s.j_lo..s.j_hi {
                let row = j * nx;
                for i in s.i_lo..s.i_hi {
                    let c = row + i;
                    let nb = (c as isize + s.offset) as usize;
                    pd[c] += sc * (ubar[nb] - ubar[c]);
                }
            }
        }
        if l2 {
            let (px, rest) = p.split_at_mut(1);
            let (px, py) = (&mut px[0], &mut rest[0]);
            for c in 0..n {
                let norm = (px[c] * px[c] + py[c] * py[c]).sqrt();
                if norm > 1.0 {
                    px[c] /= norm;
                    py[c] /= norm;
                }
            }
        } else {
            for pd in p.iter_mut() {
                for x in pd.iter_mut() {
                    *x = x.clamp(-1.0, 1.0);
                }
            }
        }
        // K^T p.
        kt.iter_mut().for_each(|x| *x = 0.0);
        for (s, pd) in st.iter().zip(&p) {
            for j in s.j_lo..s.j_hi {
                let row = j * nx;
                for i in s.i_lo..s.i_hi {
                    let c = row + i;
                    let nb = (c as isize + s.offset) as usize;
                    let v = s.coef * pd[c];
                    kt[c] -= v;
                    kt[nb] += v;
                }
            }
        }
        // Primal descent with projection onto [0, m], then extrapolation.
        for c in 0..n {
            let old = u[c];
            let new = (old - r.tau * (kt[c] + g[c])).clamp(0.0, m[c]);
            u[c] = new;
            ubar[c] = 2.0 * new - old;
        }

        if iterations % params.check_every == 0 || iterations == params.max_iter {
            let dual: f64 = (0..n).map(|c| m[c] * (kt[c] + g[c]).min(0.0)).sum();
            if dual > best_dual {
                best_dual = dual;
            }
            let primal = primal_value(&u, g, nx, ny, h, scheme);
            if primal < best_primal {
                best_primal = primal;
                best_u.copy_from_slice(&u);
            }
            let gap = scale * (best_primal - best_dual);
            if params.telemetry {
                telemetry.push(TelemetryRow {
                    iteration: iterations,
                    primal: scale * best_primal + offset,
                    dual: scale * best_dual + offset,
                    gap,
                });
            }
            if gap <= r.tol {
                break;
            }
        }
    }
    Core {
        best_u,
        iterations,
        best_primal,
        best_dual,
        telemetry,
    }
}

/// Relaxed solve that reports non-convergence in the certificate instead of
/// failing.
pub fn relaxed_solve_diagnostic(problem: &StepProblem, params: &SolveParams) -> Result<RelaxedSolution> {
    let grid = problem.grid();
    let r = params.resolve(grid, problem.scheme)?;
    let Some(win) = Window::of(&problem.admissible) else {
        return Ok(RelaxedSolution {
            field: RelaxedField::zeros(grid),
            certificate: Certificate {
                iterations: 0,
                primal: problem.offset,
                dual: problem.offset,
                gap: 0.0,
                tolerance: r.tol,
                converged: true,
                level: Some(params.threshold),
            },
            telemetry: Vec::new(),
        });
    };
    let h = grid.h();
    let m: Vec<f64> = win
        .extract(grid, problem.admissible.values())
        .into_iter()
        .map(f64::from)
        .collect();
    let g = win.extract(grid, &problem.g);
    let core = primal_dual(&m, &g, win.nx, win.ny, h, problem.scheme, params, &r, problem.offset);
    let mut values = vec![0.0; grid.len()];
    win.insert(grid, &core.best_u, &mut values);
    let scale = h * h;
    let gap = scale * (core.best_primal - core.best_dual);
    Ok(RelaxedSolution {
        field: RelaxedField::from_values(grid, values)?,
        certificate: Certificate {
            iterations: core.iterations,
            primal: scale * core.best_primal + problem.offset,
            dual: scale * core.best_dual + problem.offset,
            gap,
            tolerance: r.tol,
            converged: gap <= r.tol,
            level: Some(params.threshold),
        },
        telemetry: core.telemetry,
    })
}

/// Minimizes `TV(u) + h^2 sum g u` over `0 <= u <= m`. Fails when the gap is
/// still above tolerance after `max_iter` iterations.
pub fn relaxed_solve(problem: &StepProblem, params: &SolveParams) -> Result<RelaxedSolution> {
    let sol = relaxed_solve_diagnostic(problem, params)?;
    if !sol.certificate.converged {
        return Err(Error::NonConvergence {
            iterations: sol.certificate.iterations,
            gap: sol.certificate.gap,
            tolerance: sol.certificate.tolerance,
        });
    }
    Ok(sol)
}

/// `{ u >= s }`.
pub fn threshold(u: &RelaxedField, s: f64) -> BinaryField {
    assert!(s > 0.0 && s < 1.0, "threshold level must lie in (0, 1)");
    u.level_set(s)
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub mask: BinaryField,
    /// Objective of the mask, offset included.
    pub value: f64,
    pub perimeter: f64,
    pub certificate: Certificate,
    pub telemetry: Vec<TelemetryRow>,
}

fn window_objective(z: &[u8], g: &[f64], win: &Window, h: f64, scheme: PerimeterScheme, offset: f64) -> f64 {
    let lin: f64 = z.iter().zip(g).filter(|(&b, _)| b == 1).map(|(_, &w)| w).sum();
    perimeter_raw(win.nx, win.ny, h, z, scheme) + h * h * lin + offset
}

fn candidate_levels(u: &[f64], m: &[f64], s: f64) -> Vec<f64> {
    let mut distinct: Vec<f64> = u
        .iter()
        .zip(m)
        .filter(|(&x, &mm)| mm > 0.0 && x > 0.0)
        .map(|(&x, _)| x)
        .collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    let mut levels = vec![s];
    if distinct.len() <= 256 {
        levels.extend(distinct.into_iter().filter(|&l| l != s));
    } else {
        levels.extend(
            (-9..=9)
                .map(|k| s + 0.05 * k as f64)
                .filter(|&l| l > 0.0 && l < 1.0 && l != s),
        );
    }
    levels
}

/// Relaxed solve followed by thresholding. With `level_scan`, other level
/// sets of the relaxed solution are compared and the lowest objective wins;
/// ties keep the configured level, then the larger set.
pub fn single_step(problem: &StepProblem, params: &SolveParams) -> Result<StepOutcome> {
    let grid = problem.grid();
    if problem.admissible.is_empty_set() {
        let sol = relaxed_solve_diagnostic(problem, params)?;
        return Ok(StepOutcome {
            mask: BinaryField::empty(grid),
            value: problem.offset,
            perimeter: 0.0,
            certificate: sol.certificate,
            telemetry: sol.telemetry,
        });
    }
    let sol = relaxed_solve(problem, params)?;
    let win = Window::of(&problem.admissible).expect("nonempty mask has a window");
    let h = grid.h();
    let u = win.extract(grid, sol.field.values());
    let m: Vec<f64> = win
        .extract(grid, problem.admissible.values())
        .into_iter()
        .map(f64::from)
        .collect();
    let g = win.extract(grid, &problem.g);
    let s = params.threshold;
    let levels = if params.level_scan {
        candidate_levels(&u, &m, s)
    } else {
        vec![s]
    };

    // The empty set is always a candidate, so no step is worse than dropping
    // everything.
    let candidates = levels.into_iter().map(Some).chain(std::iter::once(None));
    let mut best: Option<(f64, Option<f64>, Vec<u8>, usize)> = None;
    for level in candidates {
        let z: Vec<u8> = match level {
            Some(l) => u
                .iter()
                .zip(&m)
                .map(|(&x, &mm)| (mm > 0.0 && x >= l) as u8)
                .collect(),
            None => vec![0; u.len()],
        };
        let count = z.iter().filter(|&&b| b == 1).count();
        let val = window_objective(&z, &g, &win, h, problem.scheme, problem.offset);
        let replace = match &best {
            None => true,
            Some((bv, bl, _, bc)) => {
                let tie = 1e-12 * bv.abs().max(1.0);
                val < bv - tie || ((val - bv).abs() <= tie && *bl != Some(s) && count > *bc)
            }
        };
        if replace {
            best = Some((val, level, z, count));
        }
    }
    let (value, level, z, _) = best.expect("at least one level");
    let mut full = vec![0u8; grid.len()];
    win.insert(grid, &z, &mut full);
    let mask = BinaryField::from_values(grid, full)?;
    let perimeter = perimeter_raw(win.nx, win.ny, h, &z, problem.scheme);
    let mut certificate = sol.certificate;
    certificate.level = level;
    Ok(StepOutcome {
        mask,
        value,
        perimeter,
        certificate,
        telemetry: sol.telemetry,
    })
}

pub const BRUTE_FORCE_LIMIT: usize = 20;

/// Exhaustive minimum over all sub-masks of the admissible set. Ties go to
/// the lexicographically smallest mask in scan order.
pub fn brute_force_step(problem: &StepProblem) -> Result<(BinaryField, f64)> {
    let grid = problem.grid();
    let count = problem.admissible.count_ones();
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::TooManyCells {
            count,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let Some(win) = Window::of(&problem.admissible) else {
        return Ok((BinaryField::empty(grid), problem.offset));
    };
    let h = grid.h();
    let m = win.extract(grid, problem.admissible.values());
    let g = win.extract(grid, &problem.g);
    let cells: Vec<usize> = (0..m.len()).filter(|&c| m[c] == 1).collect();
    let n = cells.len();
    let mut z = vec![0u8; m.len()];
    let mut best_val = f64::INFINITY;
    let mut best_bits = 0u32;
    // The first admissible cell is the most significant bit, so counting
    // upwards visits masks in lexicographic order.
    for bits in 0u32..(1u32 << n) {
        for (k, &c) in cells.iter().enumerate() {
            z[c] = ((bits >> (n - 1 - k)) & 1) as u8;
        }
        let val = window_objective(&z, &g, &win, h, problem.scheme, problem.offset);
        if bits == 0 || val < best_val - 1e-12 * best_val.abs().max(1.0) {
            best_val = val;
            best_bits = bits;
        }
    }
    for (k, &c) in cells.iter().enumerate() {
        z[c] = ((best_bits >> (n - 1 - k)) & 1) as u8;
    }
    let mut full = vec![0u8; grid.len()];
    win.insert(grid, &z, &mut full);
    Ok((BinaryField::from_values(grid, full)?, best_val))
}

pub fn write_telemetry_csv<W: Write>(rows: &[TelemetryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "primal", "dual", "gap"])?;
    for r in rows {
        w.serialize((r.iteration, r.primal, r.dual, r.gap))?;
    }
    w.flush().map_err(|e| Error::io("<telemetry csv>", e))?;
    Ok(())
}
