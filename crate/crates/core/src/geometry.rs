//! Planar geometry of medial faces against Euclidean disks.
//!
//! A medial face is the closed diamond `|u − cx| + |v − cy| ≤ ½` around a
//! primal or dual vertex, in lattice units. These diamonds tile the plane.

/// Slack used when deciding whether a closed face touches a closed disk.
pub const TOUCH_TOL: f64 = 1e-12;

pub type Point = (f64, f64);

/// Corners of the diamond around `c`, counter-clockwise.
pub fn diamond(c: Point) -> [Point; 4] {
    [
        (c.0 + 0.5, c.1),
        (c.0, c.1 + 0.5),
        (c.0 - 0.5, c.1),
        (c.0, c.1 - 0.5),
    ]
}

fn cross(a: Point, b: Point) -> f64 {
    a.0 * b.1 - a.1 * b.0
}

fn dot(a: Point, b: Point) -> f64 {
    a.0 * b.0 + a.1 * b.1
}

/// Signed area of `triangle(0, a, b) ∩ disk(0, r)`.
fn triangle_disk_area(a: Point, b: Point, r: f64) -> f64 {
    let d = (b.0 - a.0, b.1 - a.1);
    // |a + t d|² = r²
    let qa = dot(d, d);
    if qa == 0.0 {
        return 0.0;
    }
    let qb = 2.0 * dot(a, d);
    let qc = dot(a, a) - r * r;
    let mut cuts = vec![0.0];
    let disc = qb * qb - 4.0 * qa * qc;
    if disc > 0.0 {
        let s = disc.sqrt();
        for t in [(-qb - s) / (2.0 * qa), (-qb + s) / (2.0 * qa)] {
            if t > 0.0 && t < 1.0 {
                cuts.push(t);
            }
        }
    }
    cuts.push(1.0);
    let at = |t: f64| (a.0 + t * d.0, a.1 + t * d.1);
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (p, q) = (at(w[0]), at(w[1]));
        let m = at(0.5 * (w[0] + w[1]));
        if dot(m, m) <= r * r {
            area += 0.5 * cross(p, q);
        } else {
            area += 0.5 * r * r * cross(p, q).atan2(dot(p, q));
        }
    }
    area
}

/// Area of a simple polygon (counter-clockwise) intersected with a disk.
pub fn polygon_disk_area(poly: &[Point], c: Point, r: f64) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = (poly[i].0 - c.0, poly[i].1 - c.1);
        let b = (poly[(i + 1) % n].0 - c.0, poly[(i + 1) % n].1 - c.1);
        s += triangle_disk_area(a, b, r);
    }
    s.abs()
}

/// Euclidean distance from `p` to the closed diamond around `c`.
pub fn diamond_distance(c: Point, p: Point) -> f64 {
    let (u, v) = ((p.0 - c.0).abs(), (p.1 - c.1).abs());
    if u + v <= 0.5 {
        return 0.0;
    }
    // reduce to the first quadrant edge from (½, 0) to (0, ½)
    let t = ((u - v + 0.5) / 1.0).clamp(0.0, 1.0);
    let (qx, qy) = (0.5 * t, 0.5 * (1.0 - t));
    ((u - qx).powi(2) + (v - qy).powi(2)).sqrt()
}

/// Largest distance from `p` to a point of the diamond around `c`.
pub fn diamond_far_distance(c: Point, p: Point) -> f64 {
    diamond(c)
        .iter()
        .map(|q| ((q.0 - p.0).powi(2) + (q.1 - p.1).powi(2)).sqrt())
        .fold(0.0, f64::max)
}

/// Area of the diamond around `c` inside `disk(p, r)`.
pub fn diamond_disk_area(c: Point, p: Point, r: f64) -> f64 {
    let dist = diamond_distance(c, p);
    if dist >= r {
        return 0.0;
    }
    if diamond_far_distance(c, p) <= r {
        return 0.5;
    }
    polygon_disk_area(&diamond(c), p, r)
}

/// Doubled centres of all faces whose closed diamond meets the closed disk.
pub fn faces_meeting_disk(p: Point, r: f64) -> Vec<(i32, i32)> {
    let lo_x = (2.0 * (p.0 - r) - 2.0).floor() as i32;
    let hi_x = (2.0 * (p.0 + r) + 2.0).ceil() as i32;
    let lo_y = (2.0 * (p.1 - r) - 2.0).floor() as i32;
    let hi_y = (2.0 * (p.1 + r) + 2.0).ceil() as i32;
    let mut out = Vec::new();
    for b in lo_y..=hi_y {
        for a in lo_x..=hi_x {
            if (a - b).rem_euclid(2) != 0 {
                continue;
            }
            let c = (a as f64 / 2.0, b as f64 / 2.0);
            if diamond_distance(c, p) <= r + TOUCH_TOL {
                out.push((a, b));
            }
        }
    }
    out
}

/// Convex hull (monotone chain), counter-clockwise, without repeated points.
pub fn convex_hull(points: &[(i32, i32)]) -> Vec<(i32, i32)> {
    let mut p = points.to_vec();
    p.sort_unstable();
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let turn = |o: (i32, i32), a: (i32, i32), b: (i32, i32)| {
        (a.0 - o.0) as i64 * (b.1 - o.1) as i64 - (a.1 - o.1) as i64 * (b.0 - o.0) as i64
    };
    let mut hull: Vec<(i32, i32)> = Vec::with_capacity(2 * p.len());
    for &q in &p {
        while hull.len() >= 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0 {
            hull.pop();
        }
        hull.push(q);
    }
    let lower = hull.len() + 1;
    for &q in p.iter().rev().skip(1) {
        while hull.len() >= lower && turn(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0 {
            hull.pop();
        }
        hull.push(q);
    }
    hull.pop();
    hull
}

/// Squared Euclidean diameter of an integer point set.
pub fn diameter_sq(points: &[(i32, i32)]) -> i64 {
    let h = convex_hull(points);
    let mut best = 0i64;
    for i in 0..h.len() {
        for j in i + 1..h.len() {
            let dx = (h[i].0 - h[j].0) as i64;
            let dy = (h[i].1 - h[j].1) as i64;
            best = best.max(dx * dx + dy * dy);
        }
    }
    best
}

/// Winding number of a closed polygon around `p` (non-zero rule).
pub fn winding_number(poly: &[Point], p: Point) -> i32 {
    let n = poly.len();
    let mut w = 0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let side = (b.0 - a.0) * (p.1 - a.1) - (p.0 - a.0) * (b.1 - a.1);
        if a.1 <= p.1 {
            if b.1 > p.1 && side > 0.0 {
                w += 1;
            }
        } else if b.1 <= p.1 && side < 0.0 {
            w -= 1;
        }
    }
    w
}

/// Even–odd ray casting.
pub fn ray_cast_inside(poly: &[Point], p: Point) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.1 > p.1) != (b.1 > p.1) {
            let x = a.0 + (p.1 - a.1) * (b.0 - a.0) / (b.1 - a.1);
            if p.0 < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}
