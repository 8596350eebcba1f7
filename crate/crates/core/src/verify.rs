//! Falsification-style auditors. A pass means no violation was found among
//! the tested candidates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{
    adhesive_energy_from_density, brittle_energy_from_set, dissipation, EnergyBreakdown, Forcing, Mode,
};
use crate::error::Result;
use crate::evolution::{Scenario, Trajectory};
use crate::geometry::{
    ball_intersection_volume, connected_components, perimeter_estimate, support_boundary, volume,
    BinaryField, GridSpec, PerimeterScheme, Point,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditStatus {
    Pass,
    Fail,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    /// A competitor mask, stored as the indices of its cells.
    Mask {
        label: String,
        grid: GridSpec,
        ones: Vec<usize>,
    },
    Point {
        center: Point,
        radius: f64,
    },
    Step {
        index: usize,
        time: f64,
    },
}

impl Witness {
    pub fn mask(label: impl Into<String>, z: &BinaryField) -> Self {
        Witness::Mask {
            label: label.into(),
            grid: z.grid().clone(),
            ones: z.ones().collect(),
        }
    }

    pub fn to_mask(&self) -> Option<BinaryField> {
        match self {
            Witness::Mask { grid, ones, .. } => {
                let mut z = BinaryField::empty(grid);
                for &c in ones {
                    z.set_index(c, true);
                }
                Some(z)
            }
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditReport {
    pub check: String,
    pub status: AuditStatus,
    /// Largest violation found; 0 or negative when passing.
    pub worst: f64,
    pub witness: Option<Witness>,
    pub details: serde_json::Value,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.status == AuditStatus::Pass
    }

    pub fn failed(&self) -> bool {
        self.status == AuditStatus::Fail
    }
}

/// Constants of the lower density estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityParams {
    pub frak_a: f64,
    pub radius: f64,
    /// Probe radii; defaults to `4h 2^k` up to `radius`.
    #[serde(default)]
    pub probes: Option<Vec<f64>>,
}

impl DensityParams {
    pub fn new(frak_a: f64, radius: f64) -> Self {
        DensityParams {
            frak_a,
            radius,
            probes: None,
        }
    }

    /// `frak_a = 1/2`, `R = 1/a`.
    pub fn for_a(a: f64) -> Self {
        Self::new(0.5, 1.0 / a)
    }

    pub fn probe_radii(&self, h: f64) -> Vec<f64> {
        if let Some(p) = &self.probes {
            return p.clone();
        }
        let mut out = Vec::new();
        let mut r = 4.0 * h;
        while r <= self.radius * (1.0 + 1e-12) {
            out.push(r);
            r *= 2.0;
        }
        if out.is_empty() {
            out.push(self.radius);
        }
        out
    }
}

fn disc_offsets(r_cells: f64) -> Vec<(isize, isize)> {
    let n = r_cells.floor() as isize;
    let mut out = Vec::new();
    for dj in -n..=n {
        for di in -n..=n {
            if ((di * di + dj * dj) as f64) <= r_cells * r_cells + 1e-9 {
                out.push((di, dj));
            }
        }
    }
    out
}

/// Erosion by a disc of radius `r`; cells outside the domain count as set so
/// that the domain boundary does not erode.
pub fn erode(z: &BinaryField, r: f64) -> BinaryField {
    let grid = z.grid();
    let offs = disc_offsets(r / grid.h());
    let (nx, ny) = (grid.nx() as isize, grid.ny() as isize);
    BinaryField::from_fn(grid, |i, j| {
        z.get(i, j)
            && offs.iter().all(|&(di, dj)| {
                let (a, b) = (i as isize + di, j as isize + dj);
                a < 0 || b < 0 || a >= nx || b >= ny || z.get(a as usize, b as usize)
            })
    })
}

pub fn dilate(z: &BinaryField, r: f64) -> BinaryField {
    let grid = z.grid();
    let offs = disc_offsets(r / grid.h());
    let (nx, ny) = (grid.nx() as isize, grid.ny() as isize);
    BinaryField::from_fn(grid, |i, j| {
        offs.iter().any(|&(di, dj)| {
            let (a, b) = (i as isize + di, j as isize + dj);
            a >= 0 && b >= 0 && a < nx && b < ny && z.get(a as usize, b as usize)
        })
    })
}

/// Morphological opening, which removes features thinner than `2r`.
pub fn open(z: &BinaryField, r: f64) -> BinaryField {
    dilate(&erode(z, r), r)
        .intersection(z)
        .expect("same grid")
}

/// Labelled sub-masks used as stability competitors: the empty set,
/// erosions and openings at `h, 2h, 4h`, deletion of each component, and
/// `random` seeded removals of discs or half-planes.
pub fn stability_competitors(z: &BinaryField, seed: u64, random: usize) -> Vec<(String, BinaryField)> {
    let grid = z.grid();
    let h = grid.h();
    let mut out = vec![("empty".to_string(), BinaryField::empty(grid))];
    for m in [1.0, 2.0, 4.0] {
        out.push((format!("erosion-{m}h"), erode(z, m * h)));
        out.push((format!("opening-{m}h"), open(z, m * h)));
    }
    let comps = connected_components(z);
    if comps.count > 1 {
        for label in 1..=comps.count as u32 {
            let c = comps.component(grid, label);
            out.push((format!("delete-component-{label}"), z.difference(&c).expect("same grid")));
        }
    }
    let cells: Vec<usize> = z.ones().collect();
    if !cells.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let max_exp = ((grid.nx().min(grid.ny()) as f64) / 4.0).log2().max(1.0);
        for k in 0..random {
            let anchor = grid.center_of(cells[rng.gen_range(0..cells.len())]);
            let cand = if rng.gen_bool(0.5) {
                let r = h * 2f64.powf(rng.gen_range(0.0..max_exp));
                let c = [
                    anchor[0] + rng.gen_range(-0.5..0.5) * h,
                    anchor[1] + rng.gen_range(-0.5..0.5) * h,
                ];
                BinaryField::from_fn(grid, |i, j| {
                    let p = grid.center(i, j);
                    z.get(i, j) && (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) >= r * r
                })
            } else {
                let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                let n = [theta.cos(), theta.sin()];
                BinaryField::from_fn(grid, |i, j| {
                    let p = grid.center(i, j);
                    z.get(i, j) && (p[0] - anchor[0]) * n[0] + (p[1] - anchor[1]) * n[1] <= 0.0
                })
            };
            out.push((format!("random-{k}"), cand));
        }
    }
    out
}

/// Energy evaluator at a fixed time.
struct EnergyAt {
    mode: Mode,
    t: f64,
    density: Vec<f64>,
    forced: BinaryField,
    scheme: PerimeterScheme,
}

impl EnergyAt {
    fn new(mode: Mode, t: f64, forcing: &Forcing, grid: &GridSpec, scheme: PerimeterScheme) -> Self {
        EnergyAt {
            mode,
            t,
            density: forcing.sample(t, grid),
            forced: forcing.open_set(t, grid),
            scheme,
        }
    }

    fn eval(&self, z: &BinaryField) -> EnergyBreakdown {
        match self.mode {
            Mode::Adhesive { k } => adhesive_energy_from_density(self.t, z, k, &self.density, self.scheme),
            Mode::Brittle => brittle_energy_from_set(self.t, z, &self.forced, self.scheme),
        }
    }
}

#[derive(Clone, Debug)]
pub struct StabilityOptions {
    pub seed: u64,
    pub random: usize,
    /// Allowed excess, `1e-8` plus any certified solver slack.
    pub tolerance: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            seed: 0,
            random: 64,
            tolerance: 1e-8,
        }
    }
}

/// Tests `E(t, z) <= E(t, w) + D(z, w)` over the competitor family.
pub fn check_stability(
    t: f64,
    z: &BinaryField,
    mode: Mode,
    a: f64,
    forcing: &Forcing,
    scheme: PerimeterScheme,
    opts: &StabilityOptions,
) -> Result<AuditReport> {
    let eval = EnergyAt::new(mode, t, forcing, z.grid(), scheme);
    let ez = eval.eval(z).total;
    let competitors = stability_competitors(z, opts.seed, opts.random);
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    for (label, w) in &competitors {
        let rhs = eval.eval(w).total + dissipation(z, w, a)?;
        let excess = ez - rhs;
        if excess > worst {
            worst = excess;
            if excess > opts.tolerance {
                witness = Some(Witness::mask(label.clone(), w));
            }
        }
    }
    let status = if witness.is_some() {
        AuditStatus::Fail
    } else {
        AuditStatus::Pass
    };
    Ok(AuditReport {
        check: "stability".into(),
        status,
        worst,
        witness,
        details: serde_json::json!({
            "t": t,
            "energy": ez,
            "competitors": competitors.len(),
            "seed": opts.seed,
            "tolerance": opts.tolerance,
        }),
    })
}

/// Lower density estimate at every support-boundary cell and probe radius:
/// `|Z ∩ B_rho(y)| >= frak_a min(rho, R)^2 (1 - 4h/rho)`.
pub fn check_density(z: &BinaryField, p: &DensityParams) -> AuditReport {
    let grid = z.grid();
    let h = grid.h();
    let probes = p.probe_radii(h);
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    let boundary = support_boundary(z);
    for &c in &boundary {
        let y = grid.center_of(c);
        for &rho in &probes {
            let need = p.frak_a * rho.min(p.radius).powi(2) * (1.0 - 4.0 * h / rho).max(0.0);
            let have = ball_intersection_volume(z, y, rho);
            let shortfall = need - have;
            if shortfall > worst {
                worst = shortfall;
                if shortfall > 0.0 {
                    witness = Some(Witness::Point { center: y, radius: rho });
                }
            }
        }
    }
    if boundary.is_empty() {
        worst = 0.0;
    }
    AuditReport {
        check: "density".into(),
        status: if witness.is_some() {
            AuditStatus::Fail
        } else {
            AuditStatus::Pass
        },
        worst,
        witness,
        details: serde_json::json!({
            "frak_a": p.frak_a,
            "radius": p.radius,
            "probes": probes,
            "points": boundary.len(),
            "slack": "4h/rho",
        }),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub perimeter: f64,
    pub a_volume: f64,
    /// `P - a |Z|`.
    pub residual: f64,
    /// `|residual| / P`, 0 for the empty set.
    pub relative: f64,
    pub budget: f64,
    pub pass: bool,
}

pub fn check_compatibility(z: &BinaryField, a: f64, scheme: PerimeterScheme, budget: f64) -> CompatibilityReport {
    let perimeter = perimeter_estimate(z, scheme);
    let a_volume = a * volume(z);
    let residual = perimeter - a_volume;
    let relative = if perimeter > 0.0 {
        residual.abs() / perimeter
    } else {
        residual.abs()
    };
    CompatibilityReport {
        perimeter,
        a_volume,
        residual,
        relative,
        budget,
        pass: relative <= budget,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeProperty {
    Convexity,
    /// Mirror symmetry across the vertical center line of the grid.
    MirrorX,
    /// Mirror symmetry across the horizontal center line.
    MirrorY,
    /// Invariance under the half-turn about the grid center.
    PointSymmetry,
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull of points, counter-clockwise, by the monotone chain.
pub fn convex_hull(mut pts: Vec<Point>) -> Vec<Point> {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Largest distance, in cells, from a cell center inside the hull of the
/// set's centers but outside the set, to the hull boundary.
pub fn convexity_defect(z: &BinaryField) -> f64 {
    let grid = z.grid();
    let hull = convex_hull(z.ones().map(|c| grid.center_of(c)).collect());
    if hull.len() < 3 {
        // Points and segments: a gap along a segment is a defect.
        if hull.len() == 2 {
            let len = ((hull[1][0] - hull[0][0]).powi(2) + (hull[1][1] - hull[0][1]).powi(2)).sqrt();
            let expected = (len / grid.h()).round() as usize + 1;
            if z.count_ones() < expected && connected_components(z).count > 1 {
                return f64::INFINITY;
            }
        }
        return 0.0;
    }
    let h = grid.h();
    let inside = |p: Point| {
        (0..hull.len()).all(|k| cross(hull[k], hull[(k + 1) % hull.len()], p) >= -1e-12)
    };
    let mut worst: f64 = 0.0;
    for c in 0..grid.len() {
        if z.is_set(c) {
            continue;
        }
        let p = grid.center_of(c);
        if !inside(p) {
            continue;
        }
        let d = (0..hull.len())
            .map(|k| crate::geometry::segment_distance_sq(p, hull[k], hull[(k + 1) % hull.len()]))
            .fold(f64::INFINITY, f64::min)
            .sqrt();
        worst = worst.max(d / h);
    }
    worst
}

fn property_defect(z: &BinaryField, property: ShapeProperty) -> f64 {
    match property {
        ShapeProperty::Convexity => convexity_defect(z),
        ShapeProperty::MirrorX => z.symmetric_difference_count(&z.mirror_x()).expect("same grid") as f64,
        ShapeProperty::MirrorY => z.symmetric_difference_count(&z.mirror_y()).expect("same grid") as f64,
        ShapeProperty::PointSymmetry => {
            z.symmetric_difference_count(&z.rotate_half_turn()).expect("same grid") as f64
        }
    }
}

fn property_allowance(property: ShapeProperty) -> f64 {
    match property {
        ShapeProperty::Convexity => 1.0,
        _ => 0.0,
    }
}

/// Convexity (up to a one-cell band) or exact symmetry at every step. The
/// result is indeterminate when the admissible region or the initial set
/// lacks the property.
pub fn check_shape_preservation(traj: &Trajectory, s: &Scenario, property: ShapeProperty) -> AuditReport {
    let allowance = property_allowance(property);
    let mut hypothesis = property_defect(&traj.steps[0].mask, property) <= allowance;
    for &t in &s.times {
        if let Some(shape) = s.forcing.admissible_shape(t) {
            let region = crate::geometry::rasterize(&shape, &s.grid);
            if property_defect(&region, property) > allowance {
                hypothesis = false;
            }
        }
    }
    let mut worst: f64 = 0.0;
    let mut witness = None;
    for (i, st) in traj.steps.iter().enumerate() {
        let d = property_defect(&st.mask, property);
        if d > worst {
            worst = d;
        }
        if d > allowance && witness.is_none() {
            witness = Some(Witness::Step { index: i, time: st.t });
        }
    }
    let status = if !hypothesis {
        AuditStatus::Indeterminate
    } else if witness.is_some() {
        AuditStatus::Fail
    } else {
        AuditStatus::Pass
    };
    AuditReport {
        check: format!("shape-{}", serde_json::to_value(property).unwrap().as_str().unwrap()),
        status,
        worst,
        witness: if status == AuditStatus::Fail { witness } else { None },
        details: serde_json::json!({
            "hypothesis": hypothesis,
            "allowance": allowance,
            "steps": traj.steps.len(),
        }),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyResiduals {
    pub times: Vec<f64>,
    /// Upper estimate residual per prefix (asserted `>= -tol` in adhesive
    /// mode, only logged in brittle mode).
    pub upper: Vec<f64>,
    /// Lower estimate residual per prefix, asserted `>= -tol`.
    pub lower: Vec<f64>,
    pub tolerance: Vec<f64>,
}

/// Energy-dissipation estimates along every prefix of the trajectory.
pub fn audit_energy(traj: &Trajectory, s: &Scenario) -> Result<AuditReport> {
    let z0 = &traj.steps[0].mask;
    let e0 = traj.steps[0].energy.total;
    let mut res = EnergyResiduals {
        times: Vec::new(),
        upper: Vec::new(),
        lower: Vec::new(),
        tolerance: Vec::new(),
    };
    let (mut p_prev, mut p_next, mut slack) = (0.0, 0.0, traj.steps[0].slack);
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    let brittle = s.mode.is_brittle();
    for (i, st) in traj.steps.iter().enumerate().skip(1) {
        p_prev += st.power_prev;
        p_next += st.power_next;
        slack += st.slack;
        let lhs = st.energy.total + dissipation(z0, &st.mask, s.a)?;
        let upper = e0 + p_prev - lhs;
        let lower = lhs - (e0 + p_next);
        let tol = slack + 1e-8;
        res.times.push(st.t);
        res.upper.push(upper);
        res.lower.push(lower);
        res.tolerance.push(tol);
        let mut violation = -lower - tol;
        if !brittle {
            violation = violation.max(-upper - tol);
        }
        if violation > worst {
            worst = violation;
        }
        if violation > 0.0 && witness.is_none() {
            witness = Some(Witness::Step { index: i, time: st.t });
        }
    }
    if traj.steps.len() == 1 {
        worst = 0.0;
    }
    Ok(AuditReport {
        check: "energy".into(),
        status: if witness.is_some() {
            AuditStatus::Fail
        } else {
            AuditStatus::Pass
        },
        worst,
        witness,
        details: serde_json::json!({
            "mode": if brittle { "brittle" } else { "adhesive" },
            "upper_asserted": !brittle,
            "residuals": res,
        }),
    })
}

/// What [`audit_trajectory`] runs besides the energy and monotonicity audits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditOptions {
    pub stability: bool,
    pub stability_random: usize,
    pub seed: u64,
    /// Density constants; `None` means `frak_a = 1/2, R = 1/a`.
    pub density: Option<DensityParams>,
    pub shape: Vec<ShapeProperty>,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            stability: true,
            stability_random: 64,
            seed: 0,
            density: None,
            shape: Vec::new(),
        }
    }
}

impl AuditOptions {
    pub fn density_params(&self, a: f64) -> DensityParams {
        self.density.clone().unwrap_or_else(|| DensityParams::for_a(a))
    }
}

fn summarize(check: &str, parts: &[(usize, AuditReport)], skipped: &[usize]) -> AuditReport {
    let worst_part = parts
        .iter()
        .max_by(|a, b| a.1.worst.partial_cmp(&b.1.worst).unwrap_or(std::cmp::Ordering::Equal));
    let failing = parts.iter().find(|(_, r)| r.failed());
    let status = if failing.is_some() {
        AuditStatus::Fail
    } else {
        AuditStatus::Pass
    };
    AuditReport {
        check: check.into(),
        status,
        worst: worst_part.map_or(0.0, |p| p.1.worst),
        witness: failing.and_then(|(_, r)| r.witness.clone()),
        details: serde_json::json!({
            "failing_step": failing.map(|p| p.0),
            "steps": parts.iter().map(|(i, r)| serde_json::json!({
                "index": i,
                "status": r.status,
                "worst": r.worst,
            })).collect::<Vec<_>>(),
            "skipped": skipped,
            "constants": parts.first().map(|p| p.1.details.clone()),
        }),
    }
}

/// Monotonicity, energy estimates, and per-state stability, density (brittle
/// mode), extinction (brittle mode) and the requested shape properties.
/// Per-state checks cover the solver-produced states only; an unstabilized
/// initial set is listed as skipped.
pub fn audit_trajectory(traj: &Trajectory, s: &Scenario, opts: &AuditOptions) -> Result<Vec<AuditReport>> {
    let mut out = Vec::new();
    let monotone = traj.check_monotone();
    out.push(AuditReport {
        check: "monotone".into(),
        status: if monotone.is_ok() {
            AuditStatus::Pass
        } else {
            AuditStatus::Fail
        },
        worst: 0.0,
        witness: match monotone {
            Err(crate::error::Error::NonMonotoneTrajectory { step }) => Some(Witness::Step {
                index: step,
                time: traj.steps[step].t,
            }),
            _ => None,
        },
        details: serde_json::json!({
            "dissipation_total": crate::energy::total_dissipation(&traj.masks(), s.a).ok(),
        }),
    });
    out.push(audit_energy(traj, s)?);

    let produced: Vec<usize> = (0..traj.steps.len())
        .filter(|&i| traj.steps[i].certificate.is_some())
        .collect();
    let skipped: Vec<usize> = (0..traj.steps.len()).filter(|i| !produced.contains(i)).collect();
    if opts.stability {
        let mut parts = Vec::new();
        for &i in &produced {
            let st = &traj.steps[i];
            let so = StabilityOptions {
                seed: opts.seed.wrapping_add(i as u64),
                random: opts.stability_random,
                tolerance: 1e-8 + st.slack,
            };
            parts.push((i, check_stability(st.t, &st.mask, s.mode, s.a, &s.forcing, s.scheme, &so)?));
        }
        out.push(summarize("stability", &parts, &skipped));
    }
    if s.mode.is_brittle() {
        let dp = opts.density_params(s.a);
        let parts: Vec<(usize, AuditReport)> = produced
            .iter()
            .map(|&i| (i, check_density(&traj.steps[i].mask, &dp)))
            .collect();
        out.push(summarize("density", &parts, &skipped));
        let ext = crate::evolution::detect_extinction(traj, s, &dp);
        out.push(AuditReport {
            check: "extinction".into(),
            status: if ext.consistent {
                AuditStatus::Pass
            } else {
                AuditStatus::Fail
            },
            worst: 0.0,
            witness: match (ext.consistent, ext.density_bound_time) {
                (false, Some(t)) => Some(Witness::Step {
                    index: traj.steps.iter().position(|st| st.t == t).unwrap_or(0),
                    time: t,
                }),
                _ => None,
            },
            details: serde_json::to_value(&ext)?,
        });
    }
    for &p in &opts.shape {
        out.push(check_shape_preservation(traj, s, p));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::ForcingKind;
    use crate::evolution::{run, uniform_partition};
    use crate::geometry::{rasterize, Shape};
    use crate::grid_solver::{single_step, SolveParams, StepProblem};
    use crate::oracle;

    fn grid(n: usize) -> GridSpec {
        GridSpec::default_domain(n).unwrap()
    }

    fn with_spike(z: &BinaryField, from: Point, len: f64) -> BinaryField {
        let g = z.grid();
        let mut out = z.clone();
        let h = g.h();
        let steps = (len / h).ceil() as usize;
        for k in 0..=steps {
            let p = [from[0] + k as f64 * h, from[1]];
            let i = ((p[0] - g.origin[0]) / h).floor() as usize;
            let j = ((p[1] - g.origin[1]) / h).floor() as usize;
            out.set(i, j, true);
        }
        out
    }

    #[test]
    fn empty_set_is_stable() {
        let g = grid(32);
        let r = check_stability(0.0, &BinaryField::empty(&g), Mode::Brittle, 5.0, &Forcing::none(5.0), PerimeterScheme::Crofton, &StabilityOptions::default()).unwrap();
        assert!(r.passed());
    }

    #[test]
    fn compatible_disc_vs_empty_and_spike() {
        let a = 5.0;
        let g = grid(128);
        // A rasterized disc is not a grid minimizer; take the step solution.
        let prev = rasterize(&Shape::ball([0.0, 0.0], 0.6), &g);
        let f = Forcing::none(a);
        let p = StepProblem::brittle(&prev, &BinaryField::empty(&g), a, PerimeterScheme::Crofton).unwrap();
        let z = single_step(&p, &SolveParams::default()).unwrap().mask;
        assert!(z.count_ones() > 0);
        let r = check_stability(0.0, &z, Mode::Brittle, a, &f, PerimeterScheme::Crofton, &StabilityOptions::default()).unwrap();
        assert!(r.passed(), "{r:?}");
        let spiked = with_spike(&z, [0.55, 0.01], 1.0);
        let r = check_stability(0.0, &spiked, Mode::Brittle, a, &f, PerimeterScheme::Crofton, &StabilityOptions::default()).unwrap();
        assert!(r.failed());
        let w = r.witness.unwrap().to_mask().unwrap();
        assert!(w.is_subset_of(&spiked).unwrap());
    }

    #[test]
    fn large_disc_is_unstable_against_erosion_when_compressed() {
        // A ball of radius 3/a with a penalty everywhere: removing cells pays.
        let a = 5.0;
        let g = grid(64);
        let z = rasterize(&Shape::ball([0.0, 0.0], 3.0 / a), &g);
        let forced_everywhere = Forcing::new(
            ForcingKind::StaticShape {
                admissible: Shape::ball([9.0, 9.0], 0.1),
            },
            a,
        )
        .unwrap();
        let r = check_stability(0.0, &z, Mode::Adhesive { k: 20.0 }, a, &forced_everywhere, PerimeterScheme::Crofton, &StabilityOptions::default()).unwrap();
        assert!(r.failed());
    }

    #[test]
    fn density_of_full_disc_and_cusp() {
        let a = 5.0;
        let g = grid(256);
        let p = DensityParams::for_a(a);
        assert!(check_density(&BinaryField::full(&g), &p).passed());
        let disc = rasterize(&Shape::ball([0.0, 0.0], 1.0 / a), &g);
        let r = check_density(&disc, &p);
        assert!(r.passed(), "{r:?}");
        let cusp = with_spike(&disc, [0.19, 0.0], 1.0);
        let r = check_density(&cusp, &p);
        assert!(r.failed());
        match r.witness.unwrap() {
            Witness::Point { center, .. } => assert!(center[0] > 0.5, "witness {center:?}"),
            other => panic!("unexpected witness {other:?}"),
        }
    }

    #[test]
    fn density_monotone_under_enlargement() {
        let a = 5.0;
        let g = grid(128);
        let p = DensityParams::for_a(a);
        let small = rasterize(&Shape::ball([0.0, 0.0], 0.5), &g);
        let big = rasterize(&Shape::ball([0.0, 0.0], 0.8), &g);
        assert!(check_density(&big, &p).worst <= check_density(&small, &p).worst + 1e-12);
    }

    #[test]
    fn compatibility_residuals() {
        let a = 5.0;
        let g = grid(512);
        let e = check_compatibility(&BinaryField::empty(&g), a, PerimeterScheme::Isotropic, 0.05);
        assert_eq!(e.residual, 0.0);
        let disc = rasterize(&Shape::ball([0.0, 0.0], 2.0 / a), &g);
        assert!(check_compatibility(&disc, a, PerimeterScheme::Crofton, 0.05).pass);
        let sq = oracle::compatible_rounded_square(a);
        let square = rasterize(
            &Shape::RoundedPolygon {
                center: [0.0, 0.0],
                sides: 4,
                side: sq.side,
                corner_radius: 1.0 / a,
                rotation: 0.0,
            },
            &g,
        );
        assert!(check_compatibility(&square, a, PerimeterScheme::Crofton, 0.05).pass);
    }

    #[test]
    fn hull_and_convexity() {
        let hull = convex_hull(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]]);
        assert_eq!(hull.len(), 4);
        let g = grid(64);
        let disc = rasterize(&Shape::ball([0.0, 0.0], 1.0), &g);
        assert!(convexity_defect(&disc) <= 1.0);
        let two = rasterize(
            &Shape::union(vec![Shape::ball([-1.0, 0.0], 0.5), Shape::ball([1.0, 0.0], 0.5)]),
            &g,
        );
        assert!(convexity_defect(&two) > 1.0);
    }

    #[test]
    fn constant_trajectory_audits() {
        let a = 5.0;
        let g = grid(64);
        let z0 = rasterize(&Shape::ball([0.0, 0.0], 1.0), &g);
        let s = Scenario {
            grid: g.clone(),
            times: uniform_partition(1.0, 2).unwrap(),
            mode: Mode::Brittle,
            a,
            initial: z0,
            forcing: Forcing::none(a),
            scheme: PerimeterScheme::Crofton,
            solver: SolveParams::default(),
            stabilize_initial: true,
        };
        let tr = run(&s).unwrap();
        assert_eq!(tr.steps[0].mask, tr.last().mask);
        let r = audit_energy(&tr, &s).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.worst <= 0.0);
        for p in [ShapeProperty::Convexity, ShapeProperty::MirrorX, ShapeProperty::MirrorY, ShapeProperty::PointSymmetry] {
            assert!(check_shape_preservation(&tr, &s, p).passed());
        }
    }

    #[test]
    fn needle_is_point_symmetric_but_not_convex() {
        let a = 5.0;
        let g = grid(96);
        let forcing = Forcing::new(ForcingKind::Needle { gamma: 0.1 }, a).unwrap().with_onset(0.5);
        let s = Scenario {
            grid: g.clone(),
            times: uniform_partition(1.0, 2).unwrap(),
            mode: Mode::Brittle,
            a,
            initial: BinaryField::full(&g),
            forcing,
            scheme: PerimeterScheme::Crofton,
            solver: SolveParams::default(),
            stabilize_initial: false,
        };
        let tr = run(&s).unwrap();
        assert_eq!(check_shape_preservation(&tr, &s, ShapeProperty::Convexity).status, AuditStatus::Indeterminate);
        assert!(check_shape_preservation(&tr, &s, ShapeProperty::PointSymmetry).passed());
        assert_eq!(check_shape_preservation(&tr, &s, ShapeProperty::MirrorX).status, AuditStatus::Indeterminate);
    }

    #[test]
    fn witness_round_trips_through_json() {
        let g = grid(8);
        let z = BinaryField::from_fn(&g, |i, j| i == j);
        let w = Witness::mask("diag", &z);
        let back: Witness = serde_json::from_str(&serde_json::to_string(&w).unwrap()).unwrap();
        assert_eq!(back.to_mask().unwrap(), z);
    }
}
