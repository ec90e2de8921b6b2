//! Static tank environment and the geometric queries every sensor is built on.
//!
//! Coordinates: tank corner at the origin, +x along the tank length, +y across
//! its width, +z up with the water surface at z = 0. Obstacles are prisms that
//! span the follower's operating depth; they sit below the surface, so the
//! surface vehicle passes over them and only the tank walls constrain it.

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};

use crate::angle::heading_vector;
use crate::error::ConfigError;

const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tank {
    pub length_x_m: f64,
    pub width_y_m: f64,
    pub depth_z_m: f64,
}

impl Tank {
    pub fn new(length_x_m: f64, width_y_m: f64, depth_z_m: f64) -> Self {
        Self {
            length_x_m,
            width_y_m,
            depth_z_m,
        }
    }

    pub fn contains(&self, p: &Point2<f64>) -> bool {
        p.x >= 0.0 && p.x <= self.length_x_m && p.y >= 0.0 && p.y <= self.width_y_m
    }

    /// Distance from `p` to the closest wall; negative outside the footprint.
    pub fn wall_clearance(&self, p: &Point2<f64>) -> f64 {
        p.x.min(self.length_x_m - p.x)
            .min(p.y)
            .min(self.width_y_m - p.y)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("length_x_m", self.length_x_m),
            ("width_y_m", self.width_y_m),
            ("depth_z_m", self.depth_z_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::invalid(format!(
                    "tank.{name} must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Circle {
        center_m: Point2<f64>,
        radius_m: f64,
    },
    /// Axis-aligned box.
    Box {
        min_m: Point2<f64>,
        max_m: Point2<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub label: String,
    pub shape: Shape,
}

impl Obstacle {
    pub fn circle(label: &str, center: Point2<f64>, radius: f64) -> Self {
        Self {
            label: label.to_owned(),
            shape: Shape::Circle {
                center_m: center,
                radius_m: radius,
            },
        }
    }

    pub fn rect(label: &str, min: Point2<f64>, max: Point2<f64>) -> Self {
        Self {
            label: label.to_owned(),
            shape: Shape::Box {
                min_m: min,
                max_m: max,
            },
        }
    }

    /// Signed distance from `p` to the obstacle region (negative inside).
    pub fn signed_distance(&self, p: &Point2<f64>) -> f64 {
        match &self.shape {
            Shape::Circle { center_m, radius_m } => (p - center_m).norm() - radius_m,
            Shape::Box { min_m, max_m } => {
                let center = nalgebra::center(min_m, max_m);
                let half = (max_m - min_m) * 0.5;
                let q = (p - center).abs() - half;
                let outside = Vector2::new(q.x.max(0.0), q.y.max(0.0)).norm();
                outside + q.x.max(q.y).min(0.0)
            }
        }
    }

    /// Along-x extent of the obstacle footprint.
    pub fn x_extent(&self) -> (f64, f64) {
        match &self.shape {
            Shape::Circle { center_m, radius_m } => (center_m.x - radius_m, center_m.x + radius_m),
            Shape::Box { min_m, max_m } => (min_m.x, max_m.x),
        }
    }

    fn validate(&self, tank: &Tank) -> Result<(), ConfigError> {
        let inside = |p: Point2<f64>| tank.contains(&p);
        let ok = match &self.shape {
            Shape::Circle { center_m, radius_m } => {
                let r = *radius_m;
                r.is_finite()
                    && r > 0.0
                    && inside(Point2::new(center_m.x - r, center_m.y - r))
                    && inside(Point2::new(center_m.x + r, center_m.y + r))
            }
            Shape::Box { min_m, max_m } => {
                min_m.x < max_m.x && min_m.y < max_m.y && inside(*min_m) && inside(*max_m)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(ConfigError::invalid(format!(
                "obstacle '{}' is degenerate or not fully inside the tank",
                self.label
            )))
        }
    }

    /// Smallest distance from `apex` to a boundary point of this obstacle that
    /// lies inside the wedge `{q : angle(q - apex, axis) <= half_angle}`.
    fn distance_in_cone(
        &self,
        apex: &Point2<f64>,
        axis: &Vector2<f64>,
        half_angle: f64,
    ) -> Option<f64> {
        let cone = Cone::new(*apex, *axis, half_angle);
        match &self.shape {
            Shape::Circle { center_m, radius_m } => {
                let to_p = apex - center_m;
                let dist = to_p.norm();
                let dir = if dist > 0.0 { to_p / dist } else { *axis };
                let nearest = center_m + dir * *radius_m;
                let mut best: Option<f64> = None;
                let mut consider = |q: Point2<f64>| {
                    if cone.contains(&q) {
                        let d = (q - apex).norm();
                        best = Some(best.map_or(d, |b: f64| b.min(d)));
                    }
                };
                consider(nearest);
                // The distance along the circle is unimodal, so the minimum over
                // any in-cone arc sits at its nearest point or on a cone edge.
                for edge in cone.edges() {
                    for t in ray_circle_hits(apex, &edge, center_m, *radius_m) {
                        consider(apex + edge * t);
                    }
                }
                best
            }
            Shape::Box { min_m, max_m } => {
                let corners = [
                    *min_m,
                    Point2::new(max_m.x, min_m.y),
                    *max_m,
                    Point2::new(min_m.x, max_m.y),
                ];
                (0..4)
                    .filter_map(|i| {
                        let (a, b) = cone.clip_segment(corners[i], corners[(i + 1) % 4])?;
                        Some(point_segment_distance(apex, &a, &b))
                    })
                    .min_by(f64::total_cmp)
            }
        }
    }
}

struct Cone {
    apex: Point2<f64>,
    axis: Vector2<f64>,
    half_angle: f64,
    // Inward normals of the two bounding half-planes.
    normals: [Vector2<f64>; 2],
}

impl Cone {
    fn new(apex: Point2<f64>, axis: Vector2<f64>, half_angle: f64) -> Self {
        let left_edge = rotate(&axis, half_angle);
        let right_edge = rotate(&axis, -half_angle);
        // Interior lies to the right of the left edge and left of the right edge.
        let normals = [
            Vector2::new(left_edge.y, -left_edge.x),
            Vector2::new(-right_edge.y, right_edge.x),
        ];
        Self {
            apex,
            axis,
            half_angle,
            normals,
        }
    }

    fn edges(&self) -> [Vector2<f64>; 2] {
        [
            rotate(&self.axis, self.half_angle),
            rotate(&self.axis, -self.half_angle),
        ]
    }

    fn contains(&self, q: &Point2<f64>) -> bool {
        let v = q - self.apex;
        let tol = 1e-12 * (1.0 + v.norm());
        self.normals.iter().all(|n| n.dot(&v) >= -tol) && v.dot(&self.axis) >= -tol
    }

    /// Clips segment `a..b` to the wedge; `None` when nothing remains.
    fn clip_segment(&self, a: Point2<f64>, b: Point2<f64>) -> Option<(Point2<f64>, Point2<f64>)> {
        let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
        let d = b - a;
        let planes = [self.normals[0], self.normals[1], self.axis];
        for n in planes {
            let fa = n.dot(&(a - self.apex));
            let fd = n.dot(&d);
            if fd.abs() < 1e-15 {
                if fa < 0.0 {
                    return None;
                }
                continue;
            }
            let t = -fa / fd;
            if fd > 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
            if t0 > t1 {
                return None;
            }
        }
        Some((a + d * t0, a + d * t1))
    }
}

fn rotate(v: &Vector2<f64>, angle: f64) -> Vector2<f64> {
    let (s, c) = angle.sin_cos();
    Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

fn ray_circle_hits(
    origin: &Point2<f64>,
    dir: &Vector2<f64>,
    center: &Point2<f64>,
    r: f64,
) -> Vec<f64> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.norm_squared() - r * r;
    let disc = b * b - c;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    [-b - sq, -b + sq]
        .into_iter()
        .filter(|t| *t >= 0.0)
        .collect()
}

fn point_segment_distance(p: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * t)).norm()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldModel {
    pub tank: Tank,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub asv_start_m: Point2<f64>,
    pub asv_target_m: Point2<f64>,
    pub auv_start_m: Point2<f64>,
    pub auv_hold_depth_m: f64,
}

impl WorldModel {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.tank.validate()?;
        for (name, p) in [
            ("asv_start_m", self.asv_start_m),
            ("asv_target_m", self.asv_target_m),
            ("auv_start_m", self.auv_start_m),
        ] {
            if !(p.x.is_finite() && p.y.is_finite() && self.tank.contains(&p)) {
                return Err(ConfigError::invalid(format!(
                    "world.{name} lies outside the tank"
                )));
            }
        }
        let depth = self.auv_hold_depth_m;
        if !(depth < 0.0 && depth > -self.tank.depth_z_m) {
            return Err(ConfigError::invalid(format!(
                "world.auv_hold_depth_m must be inside (-{}, 0), got {depth}",
                self.tank.depth_z_m
            )));
        }
        for o in &self.obstacles {
            o.validate(&self.tank)?;
        }
        Ok(())
    }

    /// Smallest signed distance from `p` to any obstacle, `+inf` when there are none.
    pub fn obstacle_clearance(&self, p: &Point2<f64>) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.signed_distance(p))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Range to the nearest obstacle boundary point inside the forward cone,
/// or `None` when nothing lies within `max_range`.
pub fn distance_to_nearest_obstacle(
    p: &Point2<f64>,
    heading: f64,
    cone_half_angle: f64,
    max_range: f64,
    world: &WorldModel,
) -> Option<f64> {
    let axis = heading_vector(heading);
    world
        .obstacles
        .iter()
        .filter_map(|o| o.distance_in_cone(p, &axis, cone_half_angle))
        .filter(|d| *d <= max_range)
        .min_by(f64::total_cmp)
}

/// Signed perpendicular distance to the nearest side wall: negative when the
/// nearest wall is on the vehicle's left, positive on its right. Ties go right.
pub fn signed_wall_distance(p: &Point2<f64>, heading: f64, world: &WorldModel) -> f64 {
    let h = heading_vector(heading);
    let tank = &world.tank;
    // (distance, outward unit normal from p towards the wall)
    let walls = [
        (p.x, Vector2::new(-1.0, 0.0)),
        (tank.length_x_m - p.x, Vector2::new(1.0, 0.0)),
        (p.y, Vector2::new(0.0, -1.0)),
        (tank.width_y_m - p.y, Vector2::new(0.0, 1.0)),
    ];
    let mut left = f64::INFINITY;
    let mut right = f64::INFINITY;
    for (d, n) in walls {
        let side = h.x * n.y - h.y * n.x;
        if side > TIE_EPS {
            left = left.min(d);
        } else if side < -TIE_EPS {
            right = right.min(d);
        }
    }
    if left < right && (right - left).abs() >= TIE_EPS {
        -left
    } else {
        right
    }
}

/// True when a disc of `footprint_radius` at `p` overlaps an obstacle or
/// pokes out of the tank. Touching exactly is contact-free.
pub fn collides(p: &Point2<f64>, footprint_radius: f64, world: &WorldModel) -> bool {
    collides_with_walls(p, footprint_radius, &world.tank)
        || world.obstacle_clearance(p) < footprint_radius
}

pub fn collides_with_walls(p: &Point2<f64>, footprint_radius: f64, tank: &Tank) -> bool {
    tank.wall_clearance(p) < footprint_radius
}
