//! Time-dependent forcing sets `F(t)` and their densities.
//!
//! Every builder describes the admissible region `F^c(t)` as a [`Shape`];
//! `F(t)` is its complement in the grid. Before `onset` the forcing is empty.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rasterize, BinaryField, GridSpec, Point, Shape};
use crate::oracle;
use crate::profile::Obstacle;

/// How the density `f(t, .)` is sampled from `F(t)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityMode {
    /// `f = 1` on `F(t)`, 0 elsewhere.
    #[default]
    Characteristic,
    /// `f = min(1, dist(., F^c(t)) / (2h))` on `F(t)`.
    Smoothed,
}

/// Forcing families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ForcingKind {
    /// `F = {}` at all times.
    None,
    /// `F^c` is a fixed shape.
    StaticShape { admissible: Shape },
    /// `F^c = { 0 <= x <= 1, |y| <= v(x) }`.
    ProfileObstacle { obstacle: Obstacle },
    /// Two needles entering `[-1, 1]^2`, everything outside the square forced.
    Needle { gamma: f64 },
    /// `F^c(t)` is a union of balls whose common radius follows a
    /// nonincreasing piecewise-linear schedule of `[t, r]` knots.
    ShrinkingBalls {
        centers: Vec<Point>,
        schedule: Vec<[f64; 2]>,
    },
    /// `F(t)` is a union of balls whose radius follows a nondecreasing
    /// schedule.
    GrowingBalls {
        centers: Vec<Point>,
        schedule: Vec<[f64; 2]>,
    },
    /// `F^c` is a regular polygon.
    PolygonComplement {
        sides: usize,
        side: f64,
        #[serde(default)]
        center: Point,
        #[serde(default)]
        rotation: f64,
    },
    /// `F^c(t)` is the union of the first `count - floor(t)` balls on a
    /// horizontal row with unit spacing centred on `center`.
    DiscRow {
        count: usize,
        #[serde(default)]
        radius: Option<f64>,
        #[serde(default = "one")]
        spacing: f64,
        #[serde(default)]
        center: Point,
    },
    /// Compatible rounded square with `ears` discs attached to its sides; one
    /// ear is released per unit time.
    MickeySequence {
        #[serde(default = "two")]
        ears: usize,
        #[serde(default)]
        center: Point,
    },
}

fn one() -> f64 {
    1.0
}

fn two() -> usize {
    2
}

/// A validated forcing, immutable after construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forcing {
    pub kind: ForcingKind,
    #[serde(default)]
    pub onset: f64,
    #[serde(default)]
    pub density: DensityMode,
    /// Dissipation coefficient used by the families that scale with it.
    pub a: f64,
}

fn schedule_radius(schedule: &[[f64; 2]], t: f64) -> f64 {
    match schedule {
        [] => 0.0,
        [only] => only[1],
        _ => {
            if t <= schedule[0][0] {
                return schedule[0][1];
            }
            for w in schedule.windows(2) {
                let ([t0, r0], [t1, r1]) = (w[0], w[1]);
                if t <= t1 {
                    if t1 == t0 {
                        return r1;
                    }
                    return r0 + (r1 - r0) * (t - t0) / (t1 - t0);
                }
            }
            schedule[schedule.len() - 1][1]
        }
    }
}

fn check_schedule(schedule: &[[f64; 2]], growing: bool) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::param("schedule", "needs at least one [t, r] knot"));
    }
    for w in schedule.windows(2) {
        if !(w[1][0] >= w[0][0]) {
            return Err(Error::param("schedule", "knot times must be nondecreasing"));
        }
        let monotone = if growing {
            w[1][1] >= w[0][1]
        } else {
            w[1][1] <= w[0][1]
        };
        if !monotone {
            return Err(Error::param(
                "schedule",
                format!(
                    "radius {} -> {} between t = {} and t = {} makes the forcing non-monotone",
                    w[0][1], w[1][1], w[0][0], w[1][0]
                ),
            ));
        }
    }
    if schedule.iter().any(|k| !(k[1] >= 0.0) || !k[0].is_finite()) {
        return Err(Error::param("schedule", "radii must be nonnegative"));
    }
    Ok(())
}

impl Forcing {
    /// Validates parameters and resolves defaults that depend on `a`.
    pub fn new(kind: ForcingKind, a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::param("a", "must be positive"));
        }
        let kind = match kind {
            ForcingKind::Needle { gamma } => {
                if !(gamma > 0.0 && gamma < 1.0) {
                    return Err(Error::param("gamma", "must lie in (0, 1)"));
                }
                ForcingKind::Needle { gamma }
            }
            ForcingKind::ShrinkingBalls { centers, schedule } => {
                check_schedule(&schedule, false)?;
                ForcingKind::ShrinkingBalls { centers, schedule }
            }
            ForcingKind::GrowingBalls { centers, schedule } => {
                check_schedule(&schedule, true)?;
                ForcingKind::GrowingBalls { centers, schedule }
            }
            ForcingKind::PolygonComplement {
                sides,
                side,
                center,
                rotation,
            } => {
                if sides < 3 || !(side > 0.0) {
                    return Err(Error::param("sides", "need at least 3 sides of positive length"));
                }
                ForcingKind::PolygonComplement {
                    sides,
                    side,
                    center,
                    rotation,
                }
            }
            ForcingKind::DiscRow {
                count,
                radius,
                spacing,
                center,
            } => {
                let radius = radius.unwrap_or(oracle::compatible_ball_radius(2, a));
                if !(radius > 0.0) || !(spacing > 0.0) {
                    return Err(Error::param("radius", "radius and spacing must be positive"));
                }
                ForcingKind::DiscRow {
                    count,
                    radius: Some(radius),
                    spacing,
                    center,
                }
            }
            ForcingKind::MickeySequence { ears, center } => {
                if ears > 4 {
                    return Err(Error::param("ears", "at most one ear per side"));
                }
                ForcingKind::MickeySequence { ears, center }
            }
            other => other,
        };
        Ok(Forcing {
            kind,
            onset: 0.0,
            density: DensityMode::Characteristic,
            a,
        })
    }

    pub fn none(a: f64) -> Self {
        Forcing {
            kind: ForcingKind::None,
            onset: 0.0,
            density: DensityMode::Characteristic,
            a,
        }
    }

    pub fn with_onset(mut self, onset: f64) -> Self {
        self.onset = onset;
        self
    }

    pub fn with_density(mut self, density: DensityMode) -> Self {
        self.density = density;
        self
    }

    /// The admissible region `F^c(t)`; `None` means the whole domain.
    pub fn admissible_shape(&self, t: f64) -> Option<Shape> {
        if t < self.onset {
            return None;
        }
        match &self.kind {
            ForcingKind::None => None,
            ForcingKind::StaticShape { admissible } => Some(admissible.clone()),
            ForcingKind::ProfileObstacle { obstacle } => Some(Shape::ProfileRegion {
                obstacle: obstacle.clone(),
            }),
            ForcingKind::Needle { gamma } => Some(Shape::NeedleComplement { gamma: *gamma }),
            ForcingKind::ShrinkingBalls { centers, schedule } => {
                let r = schedule_radius(schedule, t);
                Some(Shape::union(
                    centers.iter().map(|&c| Shape::ball(c, r)).collect(),
                ))
            }
            ForcingKind::GrowingBalls { centers, schedule } => {
                let r = schedule_radius(schedule, t);
                Some(Shape::complement(Shape::union(
                    centers.iter().map(|&c| Shape::ball(c, r)).collect(),
                )))
            }
            ForcingKind::PolygonComplement {
                sides,
                side,
                center,
                rotation,
            } => Some(Shape::RoundedPolygon {
                center: *center,
                sides: *sides,
                side: *side,
                corner_radius: 0.0,
                rotation: *rotation,
            }),
            ForcingKind::DiscRow {
                count,
                radius,
                spacing,
                center,
            } => {
                let r = radius.unwrap_or(2.0 / self.a);
                let remaining = disc_row_remaining(*count, t);
                Some(Shape::union(
                    (1..=remaining)
                        .map(|i| Shape::ball(disc_row_center(*count, i, *spacing, *center), r))
                        .collect(),
                ))
            }
            ForcingKind::MickeySequence { ears, center } => {
                let remaining = ears.saturating_sub(t.floor().max(0.0) as usize);
                Some(mickey_shape(self.a, *center, remaining))
            }
        }
    }

    /// The forcing set `F(t)` on the grid.
    pub fn open_set(&self, t: f64, grid: &GridSpec) -> BinaryField {
        match self.admissible_shape(t) {
            None => BinaryField::empty(grid),
            Some(shape) => rasterize(&shape, grid).complement(),
        }
    }

    /// Density `f(t, .)` per cell.
    pub fn sample(&self, t: f64, grid: &GridSpec) -> Vec<f64> {
        density_of(&self.open_set(t, grid), self.density)
    }

    /// Checks `F(t_{i-1}) ⊂ F(t_i)` on consecutive partition times.
    pub fn validate_monotone(&self, times: &[f64], grid: &GridSpec) -> Result<()> {
        let mut prev: Option<(f64, BinaryField)> = None;
        for &t in times {
            let cur = self.open_set(t, grid);
            if let Some((tp, fp)) = &prev {
                if !fp.is_subset_of(&cur)? {
                    return Err(Error::NonMonotoneForcing {
                        earlier: *tp,
                        later: t,
                    });
                }
            }
            prev = Some((t, cur));
        }
        Ok(())
    }
}

/// Number of discs left on the row at time `t`.
pub fn disc_row_remaining(count: usize, t: f64) -> usize {
    count.saturating_sub(t.floor().max(0.0) as usize)
}

pub fn disc_row_center(count: usize, i: usize, spacing: f64, center: Point) -> Point {
    let offset = (i as f64 - (count as f64 + 1.0) / 2.0) * spacing;
    [center[0] + offset, center[1]]
}

/// The compatible rounded square with `ears` discs of radius `1/a` placed on
/// its sides (top, right, bottom, left), each cutting a chord of central angle
/// `mickey_angle()` through the middle of the flat part.
pub fn mickey_shape(a: f64, center: Point, ears: usize) -> Shape {
    let square = oracle::compatible_rounded_square(a);
    let rho = 1.0 / a;
    let half = square.side / 2.0;
    let alpha = oracle::mickey_angle().angle;
    // Disc center sits outside the side at distance rho cos(alpha/2).
    let offset = half + rho * (alpha / 2.0).cos();
    let dirs: [Point; 4] = [[0.0, 1.0], [1.0, 0.0], [0.0, -1.0], [-1.0, 0.0]];
    let mut parts = vec![Shape::RoundedPolygon {
        center,
        sides: 4,
        side: square.side,
        corner_radius: rho,
        rotation: 0.0,
    }];
    for d in dirs.iter().take(ears) {
        parts.push(Shape::ball(
            [center[0] + offset * d[0], center[1] + offset * d[1]],
            rho,
        ));
    }
    Shape::union(parts)
}

/// Density field from a forcing mask.
pub fn density_of(forced: &BinaryField, mode: DensityMode) -> Vec<f64> {
    match mode {
        DensityMode::Characteristic => forced.values().iter().map(|&v| v as f64).collect(),
        DensityMode::Smoothed => {
            let grid = forced.grid();
            let (nx, ny) = (grid.nx() as isize, grid.ny() as isize);
            let h = grid.h();
            let delta = 2.0 * h;
            let mut out = vec![0.0; grid.len()];
            for c in forced.ones() {
                let (i, j) = grid.coords(c);
                let mut best = f64::INFINITY;
                for dj in -2isize..=2 {
                    for di in -2isize..=2 {
                        let (ni, nj) = (i as isize + di, j as isize + dj);
                        if ni < 0 || nj < 0 || ni >= nx || nj >= ny {
                            continue;
                        }
                        if !forced.get(ni as usize, nj as usize) {
                            let d = h * ((di * di + dj * dj) as f64).sqrt();
                            best = best.min(d);
                        }
                    }
                }
                out[c] = (best / delta).min(1.0);
            }
            out
        }
    }
}

/// Area of a compatible configuration with `ears` discs, for reference.
pub fn mickey_area(a: f64, ears: usize) -> f64 {
    let sq = oracle::compatible_rounded_square(a);
    let rho = 1.0 / a;
    let alpha = oracle::mickey_angle().angle;
    let cap = 0.5 * rho * rho * (alpha - alpha.sin());
    sq.area + ears as f64 * (PI * rho * rho - cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{connected_components, perimeter_estimate, volume, PerimeterScheme};

    #[test]
    fn shrinking_schedule_must_be_monotone() {
        let bad = ForcingKind::ShrinkingBalls {
            centers: vec![[0.0, 0.0]],
            schedule: vec![[0.0, 1.0], [1.0, 1.2]],
        };
        assert!(Forcing::new(bad, 5.0).is_err());
        let bad = ForcingKind::GrowingBalls {
            centers: vec![[0.0, 0.0]],
            schedule: vec![[0.0, 1.0], [1.0, 0.5]],
        };
        assert!(Forcing::new(bad, 5.0).is_err());
    }

    #[test]
    fn schedule_interpolates_linearly() {
        let s = [[0.0, 1.0], [2.0, 0.0]];
        assert_eq!(schedule_radius(&s, -1.0), 1.0);
        assert!((schedule_radius(&s, 0.5) - 0.75).abs() < 1e-15);
        assert_eq!(schedule_radius(&s, 5.0), 0.0);
    }

    #[test]
    fn disc_row_counts_follow_floor() {
        let grid = GridSpec::default_domain(256).unwrap();
        let forcing = Forcing::new(
            ForcingKind::DiscRow {
                count: 5,
                radius: None,
                spacing: 1.0,
                center: [0.0, 0.0],
            },
            5.0,
        )
        .unwrap();
        for (t, m) in [(0.0, 5), (0.99, 5), (1.0, 4), (2.5, 3), (4.0, 1), (6.0, 0)] {
            let admissible = forcing.open_set(t, &grid).complement();
            assert_eq!(connected_components(&admissible).count, m, "t = {t}");
        }
        forcing
            .validate_monotone(&[0.0, 1.0, 2.0, 3.0], &grid)
            .unwrap();
    }

    #[test]
    fn onset_delays_the_forcing() {
        let grid = GridSpec::default_domain(32).unwrap();
        let f = Forcing::new(ForcingKind::Needle { gamma: 0.1 }, 5.0)
            .unwrap()
            .with_onset(0.5);
        assert!(f.open_set(0.0, &grid).is_empty_set());
        assert!(!f.open_set(0.5, &grid).is_empty_set());
        f.validate_monotone(&[0.0, 0.5, 1.0], &grid).unwrap();
    }

    #[test]
    fn non_monotone_static_switch_is_detected() {
        // Growing admissible region = shrinking forcing.
        let grid = GridSpec::default_domain(32).unwrap();
        let f = Forcing::new(
            ForcingKind::ShrinkingBalls {
                centers: vec![[0.0, 0.0]],
                schedule: vec![[0.0, 1.0]],
            },
            5.0,
        )
        .unwrap();
        // Forcing absent before onset 0.5, present after: monotone.
        let f = f.with_onset(0.5);
        f.validate_monotone(&[0.0, 1.0], &grid).unwrap();
        let bad = Forcing {
            kind: ForcingKind::StaticShape {
                admissible: Shape::ball([0.0, 0.0], 1.0),
            },
            onset: 0.0,
            density: DensityMode::Characteristic,
            a: 5.0,
        };
        // Reverse time order to fake a shrinking F.
        let err = Forcing {
            onset: 1.0,
            ..bad
        }
        .validate_monotone(&[1.0, 0.5], &grid)
        .unwrap_err();
        assert!(matches!(err, Error::NonMonotoneForcing { .. }));
    }

    #[test]
    fn smoothed_density_ramps_over_two_cells() {
        let grid = GridSpec::square([0.0, 0.0], 10.0, 10).unwrap();
        let forced = BinaryField::from_fn(&grid, |i, _| i >= 5);
        let f = density_of(&forced, DensityMode::Smoothed);
        assert_eq!(f[grid.index(4, 3)], 0.0);
        assert!((f[grid.index(5, 3)] - 0.5).abs() < 1e-12);
        assert!((f[grid.index(6, 3)] - 1.0).abs() < 1e-12);
        assert_eq!(f[grid.index(9, 3)], 1.0);
    }

    #[test]
    fn mickey_configuration_is_nearly_compatible() {
        let a = 5.0;
        let grid = GridSpec::default_domain(512).unwrap();
        for ears in 0..=2 {
            let mask = rasterize(&mickey_shape(a, [0.0, 0.0], ears), &grid);
            assert_eq!(connected_components(&mask).count, 1);
            let area = volume(&mask);
            let exact = mickey_area(a, ears);
            assert!((area - exact).abs() / exact < 0.01, "{area} vs {exact}");
            // Compatibility P = a * area, measured with the near-isotropic stencil.
            let p = perimeter_estimate(&mask, PerimeterScheme::Crofton);
            assert!((p - a * exact).abs() / p < 0.05, "ears {ears}: P {p} vs aV {}", a * exact);
        }
    }
}
