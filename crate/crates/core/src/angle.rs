use std::f64::consts::{PI, TAU};

use nalgebra::Vector2;

/// Wraps an angle into (-pi, pi].
pub fn wrap(angle: f64) -> f64 {
    let mut a = angle % TAU;
    if a <= -PI {
        a += TAU;
    } else if a > PI {
        a -= TAU;
    }
    a
}

pub fn heading_vector(heading: f64) -> Vector2<f64> {
    let (s, c) = heading.sin_cos();
    Vector2::new(c, s)
}

/// Rotates a world-frame planar vector into a body frame with yaw `heading`.
pub fn world_to_body(v: &Vector2<f64>, heading: f64) -> Vector2<f64> {
    let (s, c) = heading.sin_cos();
    Vector2::new(c * v.x + s * v.y, -s * v.x + c * v.y)
}

pub fn body_to_world(v: &Vector2<f64>, heading: f64) -> Vector2<f64> {
    let (s, c) = heading.sin_cos();
    Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_edges() {
        assert_eq!(wrap(PI), PI);
        assert_eq!(wrap(-PI), PI);
        assert!((wrap(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap(0.0), 0.0);
    }

    proptest! {
        #[test]
        fn wrap_in_range(a in -100.0f64..100.0) {
            let w = wrap(a);
            prop_assert!(w > -PI && w <= PI);
            prop_assert!(((a - w) / TAU - ((a - w) / TAU).round()).abs() < 1e-9);
        }

        #[test]
        fn frame_round_trip(x in -5.0f64..5.0, y in -5.0f64..5.0, h in -4.0f64..4.0) {
            let v = Vector2::new(x, y);
            let back = body_to_world(&world_to_body(&v, h), h);
            prop_assert!((back - v).norm() < 1e-12);
        }
    }
}
