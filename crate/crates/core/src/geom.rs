//! Small 2D geometry kit: points, segments, discs, axis-aligned
//! rectangles, ray/shape intersection intervals and specular reflection
//! against a union-of-shapes region boundary.

use std::f64::consts::TAU;

/// Cartesian point / vector in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn add(self, other: Point) -> Point {
        Point::new(self.x + other.x, self.y + other.y)
    }

    pub fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    pub fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        self.sub(other).norm()
    }

    /// Unit vector for a heading angle in radians.
    pub fn from_heading(theta: f64) -> Point {
        Point::new(theta.cos(), theta.sin())
    }

    /// Heading angle of this vector, normalized to `[0, 2π)`.
    pub fn heading(self) -> f64 {
        let a = self.y.atan2(self.x);
        if a < 0.0 {
            a + TAU
        } else {
            a
        }
    }
}

/// Line segment between two points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub const fn new(a: Point, b: Point) -> Self {
        Segment { a, b }
    }
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Strict (proper) segment intersection: the open interiors of both
/// segments must cross. Endpoint touching and collinear overlap count as
/// no crossing.
pub fn segments_properly_intersect(s: Segment, t: Segment) -> bool {
    let d1 = orient(s.a, s.b, t.a);
    let d2 = orient(s.a, s.b, t.b);
    let d3 = orient(t.a, t.b, s.a);
    let d4 = orient(t.a, t.b, s.b);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Circular disc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disc {
    pub center: Point,
    pub radius: f64,
}

impl Disc {
    pub const fn new(center: Point, radius: f64) -> Self {
        Disc { center, radius }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.distance(self.center) <= self.radius
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }

    /// Parameter interval `[t0, t1]` where the ray `origin + t*dir`
    /// (with `dir` a unit vector) lies inside the disc. `None` if the
    /// supporting line misses the disc entirely.
    pub fn ray_interval(&self, origin: Point, dir: Point) -> Option<(f64, f64)> {
        let oc = origin.sub(self.center);
        let b = dir.dot(oc);
        let c = oc.dot(oc) - self.radius * self.radius;
        let disc = b * b - c;
        if disc < 0.0 {
            return None;
        }
        let s = disc.sqrt();
        Some((-b - s, -b + s))
    }

    /// Outward unit normal at a boundary point.
    pub fn outward_normal(&self, p: Point) -> Point {
        let v = p.sub(self.center);
        let n = v.norm();
        if n == 0.0 {
            Point::new(1.0, 0.0)
        } else {
            v.scale(1.0 / n)
        }
    }
}

/// Axis-aligned rectangle given by its lower-left and upper-right corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub const fn new(min: Point, max: Point) -> Self {
        Rect { min, max }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn area(&self) -> f64 {
        (self.max.x - self.min.x) * (self.max.y - self.min.y)
    }

    /// Slab-method ray interval, analogous to [`Disc::ray_interval`].
    pub fn ray_interval(&self, origin: Point, dir: Point) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for (o, d, lo, hi) in [
            (origin.x, dir.x, self.min.x, self.max.x),
            (origin.y, dir.y, self.min.y, self.max.y),
        ] {
            if d.abs() < 1e-15 {
                if o < lo || o > hi {
                    return None;
                }
            } else {
                let (a, b) = ((lo - o) / d, (hi - o) / d);
                let (a, b) = if a <= b { (a, b) } else { (b, a) };
                t0 = t0.max(a);
                t1 = t1.min(b);
            }
        }
        if t0 <= t1 {
            Some((t0, t1))
        } else {
            None
        }
    }

    /// Outward unit normal of the face closest to a boundary point. When
    /// the point sits in a corner both faces coincide within `eps` and the
    /// caller should reverse the direction instead; this is signalled by
    /// returning `None`.
    pub fn outward_normal(&self, p: Point, eps: f64) -> Option<Point> {
        let dx_min = (p.x - self.min.x).abs();
        let dx_max = (p.x - self.max.x).abs();
        let dy_min = (p.y - self.min.y).abs();
        let dy_max = (p.y - self.max.y).abs();
        let dx = dx_min.min(dx_max);
        let dy = dy_min.min(dy_max);
        if dx < eps && dy < eps {
            return None; // corner
        }
        if dx <= dy {
            Some(if dx_min <= dx_max {
                Point::new(-1.0, 0.0)
            } else {
                Point::new(1.0, 0.0)
            })
        } else {
            Some(if dy_min <= dy_max {
                Point::new(0.0, -1.0)
            } else {
                Point::new(0.0, 1.0)
            })
        }
    }
}

/// Reflect direction `d` specularly about the (outward) unit normal `n`.
pub fn reflect(d: Point, n: Point) -> Point {
    d.sub(n.scale(2.0 * d.dot(n)))
}

/// Simulation region: a union of discs or a union of axis-aligned
/// rectangles. Members may overlap; the boundary is the union boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Discs(Vec<Disc>),
    Rects(Vec<Rect>),
}

const EXIT_EPS: f64 = 1e-9;

impl Region {
    pub fn contains(&self, p: Point) -> bool {
        match self {
            Region::Discs(ds) => ds.iter().any(|d| d.contains(p)),
            Region::Rects(rs) => rs.iter().any(|r| r.contains(p)),
        }
    }

    pub fn total_area(&self) -> f64 {
        // Overlap, if any, is intentionally not subtracted: used only for
        // sampling weights where rejection corrects for it.
        match self {
            Region::Discs(ds) => ds.iter().map(Disc::area).sum(),
            Region::Rects(rs) => rs.iter().map(Rect::area).sum(),
        }
    }

    fn member_interval(&self, idx: usize, origin: Point, dir: Point) -> Option<(f64, f64)> {
        match self {
            Region::Discs(ds) => ds[idx].ray_interval(origin, dir),
            Region::Rects(rs) => rs[idx].ray_interval(origin, dir),
        }
    }

    fn member_count(&self) -> usize {
        match self {
            Region::Discs(ds) => ds.len(),
            Region::Rects(rs) => rs.len(),
        }
    }

    /// Distance along the unit ray `origin + t*dir` until the union is
    /// left, together with the index of the member whose boundary is
    /// crossed there. Assumes `origin` is inside the region.
    pub fn exit_along(&self, origin: Point, dir: Point) -> (f64, usize) {
        let n = self.member_count();
        let mut t = 0.0;
        let mut who = 0usize;
        // Chain across overlapping members: extend t while some member
        // still covers it.
        for _ in 0..=n {
            let mut best = f64::NEG_INFINITY;
            let mut best_i = None;
            for i in 0..n {
                if let Some((t0, t1)) = self.member_interval(i, origin, dir) {
                    if t0 <= t + EXIT_EPS && t1 > t + EXIT_EPS && t1 > best {
                        best = t1;
                        best_i = Some(i);
                    }
                }
            }
            match best_i {
                Some(i) => {
                    t = best;
                    who = i;
                }
                None => break,
            }
        }
        (t.max(0.0), who)
    }

    /// Outward unit normal of member `idx` at point `p`. `None` means a
    /// rectangle corner where the caller should reverse direction.
    pub fn outward_normal(&self, idx: usize, p: Point) -> Option<Point> {
        match self {
            Region::Discs(ds) => Some(ds[idx].outward_normal(p)),
            Region::Rects(rs) => rs[idx].outward_normal(p, 1e-6),
        }
    }

    /// Pull a point that drifted marginally outside back to the interior.
    pub fn clamp_inside(&self, p: Point) -> Point {
        if self.contains(p) {
            return p;
        }
        match self {
            Region::Discs(ds) => {
                let d = ds
                    .iter()
                    .min_by(|a, b| {
                        let da = p.distance(a.center) - a.radius;
                        let db = p.distance(b.center) - b.radius;
                        da.partial_cmp(&db).unwrap()
                    })
                    .expect("region has at least one member");
                let v = p.sub(d.center);
                let n = v.norm();
                if n == 0.0 {
                    d.center
                } else {
                    d.center.add(v.scale((d.radius * (1.0 - 1e-12)) / n))
                }
            }
            Region::Rects(rs) => {
                let r = rs
                    .iter()
                    .min_by(|a, b| {
                        let da = rect_distance(a, p);
                        let db = rect_distance(b, p);
                        da.partial_cmp(&db).unwrap()
                    })
                    .expect("region has at least one member");
                Point::new(
                    p.x.clamp(r.min.x, r.max.x),
                    p.y.clamp(r.min.y, r.max.y),
                )
            }
        }
    }
}

fn rect_distance(r: &Rect, p: Point) -> f64 {
    let dx = (r.min.x - p.x).max(0.0).max(p.x - r.max.x);
    let dy = (r.min.y - p.y).max(0.0).max(p.y - r.max.y);
    dx.hypot(dy)
}
