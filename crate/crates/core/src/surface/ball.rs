//! Minimum enclosing balls and closest-point primitives.

use nalgebra::{Matrix3, Vector3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type V3 = Vector3<f64>;

#[derive(Debug, Clone, Copy)]
pub struct Ball {
    pub center: V3,
    pub radius: f64,
}

impl Ball {
    fn contains(&self, p: &V3) -> bool {
        (p - self.center).norm() <= self.radius * (1.0 + 1e-12) + 1e-300
    }
}

/// Smallest ball with every support point on its boundary.
fn circumball(support: &[V3]) -> Ball {
    match support.len() {
        0 => Ball {
            center: V3::zeros(),
            radius: -1.0,
        },
        1 => Ball {
            center: support[0],
            radius: 0.0,
        },
        2 => {
            let c = (support[0] + support[1]) * 0.5;
            Ball {
                center: c,
                radius: (support[0] - c).norm(),
            }
        }
        3 => {
            let a = support[0];
            let u = support[1] - a;
            let v = support[2] - a;
            let w = u.cross(&v);
            let den = 2.0 * w.norm_squared();
            if den < 1e-300 {
                return widest_pair(support);
            }
            let c = a + (v.norm_squared() * w.cross(&u) + u.norm_squared() * v.cross(&w)) / den;
            Ball {
                center: c,
                radius: (a - c).norm(),
            }
        }
        _ => {
            let a = support[0];
            let rows = [support[1] - a, support[2] - a, support[3] - a];
            let m = Matrix3::from_rows(&[rows[0].transpose(), rows[1].transpose(), rows[2].transpose()]);
            let rhs = V3::new(rows[0].norm_squared(), rows[1].norm_squared(), rows[2].norm_squared()) * 0.5;
            match m.lu().solve(&rhs) {
                Some(x) if x.iter().all(|v| v.is_finite()) => Ball {
                    center: a + x,
                    radius: x.norm(),
                },
                _ => circumball(&support[..3]),
            }
        }
    }
}

fn widest_pair(points: &[V3]) -> Ball {
    let mut best = circumball(&points[..1]);
    for i in 0..points.len() {
        for j in 0..i {
            let b = circumball(&[points[i], points[j]]);
            if b.radius > best.radius {
                best = b;
            }
        }
    }
    best
}

fn move_to_front(points: &mut [V3], end: usize, support: &mut Vec<V3>) -> Ball {
    let mut ball = circumball(support);
    if support.len() == 4 {
        return ball;
    }
    for i in 0..end {
        if !ball.contains(&points[i]) {
            support.push(points[i]);
            ball = move_to_front(points, i, support);
            support.pop();
            points[..=i].rotate_right(1);
        }
    }
    ball
}

/// Minimum enclosing ball of a point set (Welzl, move-to-front variant).
pub fn min_enclosing_ball(points: &[V3]) -> Ball {
    let mut pts = points.to_vec();
    pts.shuffle(&mut ChaCha8Rng::seed_from_u64(0xba11));
    let end = pts.len();
    move_to_front(&mut pts, end, &mut Vec::with_capacity(4))
}

/// Squared distance from `p` to the triangle `(a, b, c)`.
pub fn point_triangle_dist_sq(p: &V3, a: &V3, b: &V3, c: &V3) -> f64 {
    // Ericson, Real-Time Collision Detection, 5.1.5
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm_squared();
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm_squared();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (p - (a + ab * v)).norm_squared();
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm_squared();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (p - (a + ac * w)).norm_squared();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + (c - b) * w)).norm_squared();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (p - (a + ab * v + ac * w)).norm_squared()
}

/// Closest point on triangle `(a, b, c)` to `p` as barycentric weights.
pub fn closest_barycentric(p: &V3, a: &V3, b: &V3, c: &V3) -> [f64; 3] {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return [1.0, 0.0, 0.0];
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return [0.0, 1.0, 0.0];
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return [1.0 - v, v, 0.0];
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return [0.0, 0.0, 1.0];
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return [1.0 - w, 0.0, w];
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return [0.0, 1.0 - w, w];
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    [1.0 - v - w, v, w]
}

/// Closest point on segment `[a, b]` in the plane, as `(squared distance, parameter)`.
pub fn point_segment_2d(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> (f64, f64) {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * d[0] - p[0], a[1] + t * d[1] - p[1]];
    (q[0] * q[0] + q[1] * q[1], t)
}

/// Maximizes `objective` by pattern search along every direction in `{-1, 0, 1}^d`.
/// Points where `objective` returns `None` are rejected.
pub fn compass_maximize(
    start: &[f64],
    initial_step: f64,
    min_step: f64,
    objective: &dyn Fn(&[f64]) -> Option<f64>,
) -> (Vec<f64>, f64) {
    let d = start.len();
    let mut dirs = Vec::new();
    for code in 0..3usize.pow(d as u32) {
        let mut c = code;
        let v: Vec<f64> = (0..d)
            .map(|_| {
                let s = (c % 3) as f64 - 1.0;
                c /= 3;
                s
            })
            .collect();
        let len = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if len > 0.0 {
            dirs.push(v.iter().map(|a| a / len).collect::<Vec<f64>>());
        }
    }
    let mut x = start.to_vec();
    let mut fx = objective(&x).unwrap_or(f64::NEG_INFINITY);
    let mut step = initial_step;
    while step > min_step {
        let mut best: Option<(Vec<f64>, f64)> = None;
        for dir in &dirs {
            let y: Vec<f64> = x.iter().zip(dir).map(|(a, b)| a + step * b).collect();
            if let Some(fy) = objective(&y) {
                if fy > best.as_ref().map_or(fx, |b| b.1) {
                    best = Some((y, fy));
                }
            }
        }
        match best {
            Some((y, fy)) => {
                x = y;
                fx = fy;
            }
            None => step *= 0.5,
        }
    }
    (x, fx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn welzl_matches_brute_force_on_small_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let pts: Vec<V3> = (0..12)
                .map(|_| {
                    V3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    )
                })
                .collect();
            let ball = min_enclosing_ball(&pts);
            for p in &pts {
                assert!((p - ball.center).norm() <= ball.radius + 1e-9);
            }
            // brute force over all supports of size 2..4 that enclose everything
            let mut best = f64::INFINITY;
            let n = pts.len();
            let mut consider = |s: &[V3]| {
                let b = circumball(s);
                if pts.iter().all(|p| (p - b.center).norm() <= b.radius + 1e-9) {
                    best = best.min(b.radius);
                }
            };
            for i in 0..n {
                for j in 0..i {
                    consider(&[pts[i], pts[j]]);
                    for k in 0..j {
                        consider(&[pts[i], pts[j], pts[k]]);
                        for l in 0..k {
                            consider(&[pts[i], pts[j], pts[k], pts[l]]);
                        }
                    }
                }
            }
            assert!((ball.radius - best).abs() < 1e-9, "{} vs {best}", ball.radius);
        }
    }

    #[test]
    fn triangle_distance_cases() {
        let a = V3::new(0.0, 0.0, 0.0);
        let b = V3::new(1.0, 0.0, 0.0);
        let c = V3::new(0.0, 1.0, 0.0);
        assert!((point_triangle_dist_sq(&V3::new(0.2, 0.2, 1.0), &a, &b, &c) - 1.0).abs() < 1e-15);
        assert!((point_triangle_dist_sq(&V3::new(-1.0, 0.0, 0.0), &a, &b, &c) - 1.0).abs() < 1e-15);
        assert!((point_triangle_dist_sq(&V3::new(1.0, 1.0, 0.0), &a, &b, &c) - 0.5).abs() < 1e-15);
        let w = closest_barycentric(&V3::new(0.2, 0.3, 5.0), &a, &b, &c);
        assert!((w[1] - 0.2).abs() < 1e-15 && (w[2] - 0.3).abs() < 1e-15);
    }
}
