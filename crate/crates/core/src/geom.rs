//! Observation windows, point patterns and the translation geometry used by
//! random-shift tests.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point<F> {
    pub x: F,
    pub y: F,
}

impl<F: Scalar> Point<F> {
    pub fn new(x: F, y: F) -> Self {
        Self { x, y }
    }

    pub fn translate(self, v: ShiftVector<F>) -> Self {
        Self::new(self.x + v.dx, self.y + v.dy)
    }

    pub fn dist2(self, other: Self) -> F {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftVector<F> {
    pub dx: F,
    pub dy: F,
}

impl<F: Scalar> ShiftVector<F> {
    pub fn new(dx: F, dy: F) -> Result<Self> {
        if !dx.is_finite() || !dy.is_finite() {
            return Err(Error::InvalidParameter("shift vector must be finite".into()));
        }
        Ok(Self { dx, dy })
    }

    pub fn zero() -> Self {
        Self { dx: F::zero(), dy: F::zero() }
    }

    pub fn neg(self) -> Self {
        Self { dx: -self.dx, dy: -self.dy }
    }

    pub fn norm(self) -> F {
        self.dx.hypot(self.dy)
    }
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect<F> {
    pub x0: F,
    pub y0: F,
    pub x1: F,
    pub y1: F,
}

impl<F: Scalar> Rect<F> {
    pub fn new(x0: F, y0: F, x1: F, y1: F) -> Result<Self> {
        let finite = [x0, y0, x1, y1].iter().all(|v| v.is_finite());
        if !finite || !(x0 < x1) || !(y0 < y1) {
            return Err(Error::InvalidWindow(format!(
                "rectangle needs x0 < x1 and y0 < y1, got [{x0}, {x1}] x [{y0}, {y1}]"
            )));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn unit() -> Self {
        Self { x0: F::zero(), y0: F::zero(), x1: F::one(), y1: F::one() }
    }

    pub fn width(&self) -> F {
        self.x1 - self.x0
    }

    pub fn height(&self) -> F {
        self.y1 - self.y0
    }

    pub fn area(&self) -> F {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Point<F>) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    fn intersect(&self, other: &Rect<F>) -> Option<Rect<F>> {
        let x0 = self.x0.max(other.x0);
        let y0 = self.y0.max(other.y0);
        let x1 = self.x1.min(other.x1);
        let y1 = self.y1.min(other.y1);
        (x0 < x1 && y0 < y1).then_some(Rect { x0, y0, x1, y1 })
    }

    fn translate(&self, v: ShiftVector<F>) -> Rect<F> {
        Rect { x0: self.x0 + v.dx, y0: self.y0 + v.dy, x1: self.x1 + v.dx, y1: self.y1 + v.dy }
    }
}

/// Simple polygon, stored counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon<F> {
    vertices: Vec<Point<F>>,
    area: F,
    bbox: Rect<F>,
}

fn cross(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    ax * by - ay * bx
}

fn segments_cross(p: [f64; 4], q: [f64; 4]) -> bool {
    let o = |ax: f64, ay: f64, bx: f64, by: f64, cx: f64, cy: f64| {
        cross(bx - ax, by - ay, cx - ax, cy - ay)
    };
    let d1 = o(q[0], q[1], q[2], q[3], p[0], p[1]);
    let d2 = o(q[0], q[1], q[2], q[3], p[2], p[3]);
    let d3 = o(p[0], p[1], p[2], p[3], q[0], q[1]);
    let d4 = o(p[0], p[1], p[2], p[3], q[2], q[3]);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |ax: f64, ay: f64, bx: f64, by: f64, cx: f64, cy: f64, d: f64| {
        d == 0.0 && cx >= ax.min(bx) && cx <= ax.max(bx) && cy >= ay.min(by) && cy <= ay.max(by)
    };
    on(q[0], q[1], q[2], q[3], p[0], p[1], d1)
        || on(q[0], q[1], q[2], q[3], p[2], p[3], d2)
        || on(p[0], p[1], p[2], p[3], q[0], q[1], d3)
        || on(p[0], p[1], p[2], p[3], q[2], q[3], d4)
}

impl<F: Scalar> Polygon<F> {
    pub fn new(mut vertices: Vec<Point<F>>) -> Result<Self> {
        if vertices.len() > 3 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::InvalidWindow("polygon needs at least 3 vertices".into()));
        }
        if vertices.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidWindow("polygon vertices must be finite".into()));
        }
        let pts: Vec<[f64; 2]> = vertices.iter().map(|p| [p.x.as_f64(), p.y.as_f64()]).collect();
        let n = pts.len();
        let edge = |i: usize| {
            let a = pts[i];
            let b = pts[(i + 1) % n];
            [a[0], a[1], b[0], b[1]]
        };
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segments_cross(edge(i), edge(j)) {
                    return Err(Error::InvalidWindow("polygon is self-intersecting".into()));
                }
            }
        }
        let signed: f64 = (0..n)
            .map(|i| {
                let e = edge(i);
                cross(e[0], e[1], e[2], e[3])
            })
            .sum::<f64>()
            * 0.5;
        if signed == 0.0 {
            return Err(Error::InvalidWindow("polygon has zero area".into()));
        }
        if signed < 0.0 {
            vertices.reverse();
        }
        let xs = vertices.iter().map(|p| p.x);
        let ys = vertices.iter().map(|p| p.y);
        let bbox = Rect {
            x0: xs.clone().fold(F::infinity(), F::min),
            x1: xs.fold(F::neg_infinity(), F::max),
            y0: ys.clone().fold(F::infinity(), F::min),
            y1: ys.fold(F::neg_infinity(), F::max),
        };
        Ok(Self { vertices, area: F::lit(signed.abs()), bbox })
    }

    pub fn vertices(&self) -> &[Point<F>] {
        &self.vertices
    }

    pub fn area(&self) -> F {
        self.area
    }

    fn as_f64(&self) -> Vec<[f64; 2]> {
        self.vertices.iter().map(|p| [p.x.as_f64(), p.y.as_f64()]).collect()
    }

    pub fn contains(&self, p: Point<F>) -> bool {
        if !self.bbox.contains(p) {
            return false;
        }
        classify(&self.as_f64(), [p.x.as_f64(), p.y.as_f64()], 0.0) != Location::Outside
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Location {
    Inside,
    Boundary,
    Outside,
}

fn classify(poly: &[[f64; 2]], p: [f64; 2], eps: f64) -> Location {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
        let len2 = ex * ex + ey * ey;
        let t = (((p[0] - a[0]) * ex + (p[1] - a[1]) * ey) / len2).clamp(0.0, 1.0);
        let (cx, cy) = (a[0] + t * ex - p[0], a[1] + t * ey - p[1]);
        if cx * cx + cy * cy <= eps * eps {
            return Location::Boundary;
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    if inside {
        Location::Inside
    } else {
        Location::Outside
    }
}

/// Area of the intersection of two counter-clockwise simple polygons,
/// integrated along the boundary of the intersection (Green's theorem).
fn polygon_intersection_area(p: &[[f64; 2]], q: &[[f64; 2]]) -> f64 {
    let scale = p
        .iter()
        .chain(q.iter())
        .fold(0.0f64, |m, v| m.max(v[0].abs()).max(v[1].abs()))
        .max(1.0);
    let eps = 1e-10 * scale;
    let mut twice = 0.0;
    twice += boundary_inside(p, q, eps, true);
    twice += boundary_inside(q, p, eps, false);
    (0.5 * twice).max(0.0)
}

/// Contribution of the edges of `a` that lie inside `b`. Edges running along
/// the boundary of `b` are counted only from `a` and only when both polygons
/// traverse them in the same direction.
fn boundary_inside(a: &[[f64; 2]], b: &[[f64; 2]], eps: f64, keep_shared: bool) -> f64 {
    let na = a.len();
    let nb = b.len();
    let mut acc = 0.0;
    for i in 0..na {
        let s = a[i];
        let e = a[(i + 1) % na];
        let r = [e[0] - s[0], e[1] - s[1]];
        let rr = r[0] * r[0] + r[1] * r[1];
        let mut ts = vec![0.0, 1.0];
        for j in 0..nb {
            let q0 = b[j];
            let q1 = b[(j + 1) % nb];
            let sv = [q1[0] - q0[0], q1[1] - q0[1]];
            let denom = cross(r[0], r[1], sv[0], sv[1]);
            let qp = [q0[0] - s[0], q0[1] - s[1]];
            if denom.abs() > 1e-14 * rr.sqrt() * (sv[0].hypot(sv[1])) {
                let t = cross(qp[0], qp[1], sv[0], sv[1]) / denom;
                let u = cross(qp[0], qp[1], r[0], r[1]) / denom;
                if (-1e-12..=1.0 + 1e-12).contains(&t) && (-1e-12..=1.0 + 1e-12).contains(&u) {
                    ts.push(t.clamp(0.0, 1.0));
                }
            } else if cross(qp[0], qp[1], r[0], r[1]).abs() <= eps * rr.sqrt() {
                for pt in [q0, q1] {
                    let t = ((pt[0] - s[0]) * r[0] + (pt[1] - s[1]) * r[1]) / rr;
                    if (0.0..=1.0).contains(&t) {
                        ts.push(t);
                    }
                }
            }
        }
        ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        ts.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
        for w in ts.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            if t1 - t0 <= 1e-14 {
                continue;
            }
            let m = (t0 + t1) * 0.5;
            let mid = [s[0] + m * r[0], s[1] + m * r[1]];
            let include = match classify(b, mid, eps) {
                Location::Inside => true,
                Location::Outside => false,
                Location::Boundary => keep_shared && same_direction_edge(b, mid, r, eps),
            };
            if include {
                let p0 = [s[0] + t0 * r[0], s[1] + t0 * r[1]];
                let p1 = [s[0] + t1 * r[0], s[1] + t1 * r[1]];
                acc += cross(p0[0], p0[1], p1[0], p1[1]);
            }
        }
    }
    acc
}

fn same_direction_edge(poly: &[[f64; 2]], mid: [f64; 2], dir: [f64; 2], eps: f64) -> bool {
    let n = poly.len();
    (0..n).any(|j| {
        let a = poly[j];
        let b = poly[(j + 1) % n];
        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
        let len2 = ex * ex + ey * ey;
        let t = (((mid[0] - a[0]) * ex + (mid[1] - a[1]) * ey) / len2).clamp(0.0, 1.0);
        let (cx, cy) = (a[0] + t * ex - mid[0], a[1] + t * ey - mid[1]);
        cx * cx + cy * cy <= eps * eps && ex * dir[0] + ey * dir[1] > 0.0
    })
}

/// Observation window.
///
/// `Overlap` represents `base ∩ (base + shift)` for polygonal bases, which is
/// generally not a single simple polygon.
#[derive(Debug, Clone, PartialEq)]
pub enum Window<F> {
    Rect(Rect<F>),
    Polygon(Polygon<F>),
    Overlap { base: Box<Window<F>>, shift: ShiftVector<F>, area: F },
}

impl<F: Scalar> Window<F> {
    pub fn rect(x0: F, y0: F, x1: F, y1: F) -> Result<Self> {
        Rect::new(x0, y0, x1, y1).map(Window::Rect)
    }

    pub fn unit_square() -> Self {
        Window::Rect(Rect::unit())
    }

    pub fn polygon(vertices: Vec<Point<F>>) -> Result<Self> {
        Polygon::new(vertices).map(Window::Polygon)
    }

    pub fn area(&self) -> F {
        match self {
            Window::Rect(r) => r.area(),
            Window::Polygon(p) => p.area(),
            Window::Overlap { area, .. } => *area,
        }
    }

    pub fn contains(&self, p: Point<F>) -> bool {
        match self {
            Window::Rect(r) => r.contains(p),
            Window::Polygon(poly) => poly.contains(p),
            Window::Overlap { base, shift, .. } => {
                base.contains(p) && base.contains(p.translate(shift.neg()))
            }
        }
    }

    pub fn bbox(&self) -> Rect<F> {
        match self {
            Window::Rect(r) => *r,
            Window::Polygon(p) => p.bbox,
            Window::Overlap { base, shift, .. } => {
                let b = base.bbox();
                b.intersect(&b.translate(*shift)).unwrap_or(b)
            }
        }
    }

    pub fn as_rect(&self) -> Option<&Rect<F>> {
        match self {
            Window::Rect(r) => Some(r),
            _ => None,
        }
    }

    pub fn is_rect(&self) -> bool {
        matches!(self, Window::Rect(_))
    }

    /// Uniform random location inside the window.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point<F> {
        let b = self.bbox();
        loop {
            let x = b.x0 + b.width() * F::lit(rng.random::<f64>());
            let y = b.y0 + b.height() * F::lit(rng.random::<f64>());
            let p = Point::new(x, y);
            if self.contains(p) {
                return p;
            }
        }
    }
}

/// Finite planar point pattern observed in a window.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern<F> {
    points: Vec<Point<F>>,
    window: Window<F>,
}

impl<F: Scalar> PointPattern<F> {
    pub fn new(points: Vec<Point<F>>, window: Window<F>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !window.contains(**p)) {
            return Err(Error::OutOfDomain { x: p.x.as_f64(), y: p.y.as_f64() });
        }
        Ok(Self { points, window })
    }

    pub fn empty(window: Window<F>) -> Self {
        Self { points: Vec::new(), window }
    }

    pub(crate) fn from_trusted(points: Vec<Point<F>>, window: Window<F>) -> Self {
        Self { points, window }
    }

    pub fn points(&self) -> &[Point<F>] {
        &self.points
    }

    pub fn window(&self) -> &Window<F> {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// n(X ∩ B).
    pub fn count_in(&self, b: &Window<F>) -> usize {
        self.points.iter().filter(|p| b.contains(**p)).count()
    }
}

/// Wraps `value` into `[lo, lo + len)`.
fn wrap<F: Scalar>(value: F, lo: F, len: F) -> F {
    let mut r = (value - lo) % len;
    if r < F::zero() {
        r = r + len;
    }
    if r >= len {
        r = r - len;
    }
    lo + r
}

/// Translates `p` by `v` on the torus obtained by gluing opposite edges of `r`.
pub fn torus_wrap<F: Scalar>(p: Point<F>, v: ShiftVector<F>, r: &Rect<F>) -> Point<F> {
    Point::new(wrap(p.x + v.dx, r.x0, r.width()), wrap(p.y + v.dy, r.y0, r.height()))
}

pub fn torus_shift<F: Scalar>(
    points: &[Point<F>],
    v: ShiftVector<F>,
    window: &Window<F>,
) -> Result<Vec<Point<F>>> {
    let r = window
        .as_rect()
        .ok_or_else(|| Error::UnsupportedGeometry("torus shifts need a rectangular window".into()))?;
    Ok(points.iter().map(|&p| torus_wrap(p, v, r)).collect())
}

/// `W ∩ (W + v)`.
pub fn euclid_shift_intersection<F: Scalar>(window: &Window<F>, v: ShiftVector<F>) -> Result<Window<F>> {
    match window {
        Window::Rect(r) => r.intersect(&r.translate(v)).map(Window::Rect).ok_or(Error::EmptyWindow),
        Window::Polygon(poly) => {
            let a = poly.as_f64();
            let (dx, dy) = (v.dx.as_f64(), v.dy.as_f64());
            let b: Vec<[f64; 2]> = a.iter().map(|p| [p[0] + dx, p[1] + dy]).collect();
            let area = polygon_intersection_area(&a, &b);
            if area <= 0.0 {
                return Err(Error::EmptyWindow);
            }
            Ok(Window::Overlap { base: Box::new(window.clone()), shift: v, area: F::lit(area) })
        }
        Window::Overlap { .. } => {
            Err(Error::UnsupportedGeometry("cannot intersect an already shifted window".into()))
        }
    }
}

/// `n` vectors uniform on the disc of radius `radius` centred at the origin.
pub fn draw_shift_vectors<F: Scalar, R: Rng + ?Sized>(
    n: usize,
    radius: F,
    rng: &mut R,
) -> Result<Vec<ShiftVector<F>>> {
    if !(radius > F::zero()) || !radius.is_finite() {
        return Err(Error::InvalidParameter("shift radius must be positive".into()));
    }
    Ok((0..n).map(|_| draw_disc(radius, rng)).collect())
}

pub(crate) fn draw_disc<F: Scalar, R: Rng + ?Sized>(radius: F, rng: &mut R) -> ShiftVector<F> {
    let r = radius.as_f64() * rng.random::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.random::<f64>();
    ShiftVector { dx: F::lit(r * theta.cos()), dy: F::lit(r * theta.sin()) }
}

/// Largest radius `R` such that every shift with `|v| <= R` keeps at least a
/// quarter of the rectangle's area in `W ∩ (W + v)`.
pub fn default_shift_radius<F: Scalar>(window: &Window<F>) -> Result<F> {
    let r = window.as_rect().ok_or_else(|| {
        Error::UnsupportedGeometry("default shift radius needs a rectangle; supply one explicitly".into())
    })?;
    let (a, b) = (r.width().as_f64(), r.height().as_f64());
    let mut lo = 0.0;
    let mut hi = a.min(b);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if min_overlap_ratio(a, b, mid) >= 0.25 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(F::lit(lo))
}

/// Minimum over directions of `|W ∩ (W+v)| / |W|` for `|v| = radius`.
fn min_overlap_ratio(a: f64, b: f64, radius: f64) -> f64 {
    let p = radius / a;
    let q = radius / b;
    let f = |t: f64| (1.0 - p * t.cos()).max(0.0) * (1.0 - q * t.sin()).max(0.0);
    let df = |t: f64| {
        let (s, c) = t.sin_cos();
        p * s * (1.0 - q * s) - q * c * (1.0 - p * c)
    };
    let mut lo = 0.0f64;
    let mut hi = std::f64::consts::FRAC_PI_2;
    if df(lo) >= 0.0 || df(hi) <= 0.0 {
        return f(lo).min(f(hi));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if df(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    f(0.5 * (lo + hi)).min(f(0.0)).min(f(std::f64::consts::FRAC_PI_2))
}
