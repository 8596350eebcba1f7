use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{BinaryField, GridSpec, Point};
use crate::profile::Obstacle;

/// Analytic planar shapes that can be rasterized onto a grid.
///
/// Membership is decided per cell center. The needle strips have zero area in
/// the continuum and are thickened to the grid: a strip covers the cell
/// column whose center lies within `h/2` of the needle line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Shape {
    /// Open ball.
    Ball { center: Point, radius: f64 },
    /// Closed axis-aligned box.
    Box { min: Point, max: Point },
    /// Regular `sides`-gon with the given side length whose corners are
    /// replaced by arcs of radius `corner_radius`. With `rotation = 0` one
    /// side is horizontal at the bottom.
    RoundedPolygon {
        center: Point,
        sides: usize,
        side: f64,
        #[serde(default)]
        corner_radius: f64,
        #[serde(default)]
        rotation: f64,
    },
    /// `{ y >= apex_y + slope * |x - apex_x| }`.
    ConeEpigraph { apex: Point, slope: f64 },
    /// `[-1, 1]^2` minus the two needles `{gamma} x [-1+gamma, 1]` and
    /// `{-gamma} x [-1, 1-gamma]`.
    NeedleComplement { gamma: f64 },
    /// `{ 0 <= x <= 1, |y| <= v(x) }` for a profile obstacle `v`.
    ProfileRegion { obstacle: Obstacle },
    Union { parts: Vec<Shape> },
    Intersection { parts: Vec<Shape> },
    Complement { inner: Box<Shape> },
}

impl Shape {
    pub fn ball(center: Point, radius: f64) -> Shape {
        Shape::Ball { center, radius }
    }

    pub fn union(parts: Vec<Shape>) -> Shape {
        Shape::Union { parts }
    }

    pub fn intersection(parts: Vec<Shape>) -> Shape {
        Shape::Intersection { parts }
    }

    pub fn complement(inner: Shape) -> Shape {
        Shape::Complement {
            inner: Box::new(inner),
        }
    }

    pub fn regular_polygon(center: Point, sides: usize, side: f64) -> Shape {
        Shape::RoundedPolygon {
            center,
            sides,
            side,
            corner_radius: 0.0,
            rotation: 0.0,
        }
    }

    /// Membership of `p`; `h` is the cell size used to thicken needles.
    pub fn contains(&self, p: Point, h: f64) -> bool {
        match self {
            Shape::Ball { center, radius } => {
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                dx * dx + dy * dy < radius * radius
            }
            Shape::Box { min, max } => {
                p[0] >= min[0] && p[0] <= max[0] && p[1] >= min[1] && p[1] <= max[1]
            }
            Shape::RoundedPolygon {
                center,
                sides,
                side,
                corner_radius,
                rotation,
            } => rounded_polygon_contains(p, *center, *sides, *side, *corner_radius, *rotation),
            Shape::ConeEpigraph { apex, slope } => p[1] >= apex[1] + slope * (p[0] - apex[0]).abs(),
            Shape::NeedleComplement { gamma } => {
                let g = *gamma;
                let in_square = p[0].abs() <= 1.0 && p[1].abs() <= 1.0;
                let right = (p[0] - g).abs() < 0.5 * h && p[1] >= -1.0 + g;
                let left = (p[0] + g).abs() < 0.5 * h && p[1] <= 1.0 - g;
                in_square && !right && !left
            }
            Shape::ProfileRegion { obstacle } => {
                (0.0..=1.0).contains(&p[0]) && p[1].abs() <= obstacle.eval(p[0])
            }
            Shape::Union { parts } => parts.iter().any(|s| s.contains(p, h)),
            Shape::Intersection { parts } => parts.iter().all(|s| s.contains(p, h)),
            Shape::Complement { inner } => !inner.contains(p, h),
        }
    }
}

/// Inward-offset polygon vertices and outward normals.
fn polygon_frame(center: Point, sides: usize, inradius: f64, rotation: f64) -> (Vec<Point>, Vec<Point>) {
    let n = sides as f64;
    let normals: Vec<Point> = (0..sides)
        .map(|k| {
            let phi = -PI / 2.0 + 2.0 * PI * k as f64 / n + rotation;
            [phi.cos(), phi.sin()]
        })
        .collect();
    let circum = inradius / (PI / n).cos();
    let vertices = (0..sides)
        .map(|k| {
            let phi = -PI / 2.0 + 2.0 * PI * (k as f64 + 0.5) / n + rotation;
            [center[0] + circum * phi.cos(), center[1] + circum * phi.sin()]
        })
        .collect();
    (vertices, normals)
}

fn rounded_polygon_contains(
    p: Point,
    center: Point,
    sides: usize,
    side: f64,
    corner_radius: f64,
    rotation: f64,
) -> bool {
    if sides < 3 || !(side > 0.0) {
        return false;
    }
    let inradius = side / (2.0 * (PI / sides as f64).tan());
    let inner = inradius - corner_radius;
    if inner < 0.0 {
        return false;
    }
    let (vertices, normals) = polygon_frame(center, sides, inner, rotation);
    let rel = [p[0] - center[0], p[1] - center[1]];
    let outside = normals
        .iter()
        .any(|nv| rel[0] * nv[0] + rel[1] * nv[1] > inner);
    if !outside {
        return true;
    }
    if corner_radius <= 0.0 {
        return false;
    }
    // Distance to the inner polygon boundary.
    let r2 = corner_radius * corner_radius;
    (0..sides).any(|k| {
        let a = vertices[(k + sides - 1) % sides];
        let b = vertices[k];
        segment_distance_sq(p, a, b) <= r2
    })
}

pub(crate) fn segment_distance_sq(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let d = [ap[0] - t * ab[0], ap[1] - t * ab[1]];
    d[0] * d[0] + d[1] * d[1]
}

/// Cell-center rasterization.
pub fn rasterize(shape: &Shape, grid: &GridSpec) -> BinaryField {
    let h = grid.h();
    BinaryField::from_fn(grid, |i, j| shape.contains(grid.center(i, j), h))
}
