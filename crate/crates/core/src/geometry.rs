//! Planar geometry helpers (coordinates in km).

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Distance from `p` to the closed segment `a`–`b`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(Point::new(a.x + t * dx, a.y + t * dy))
}

/// A simple polygon given by its vertices (implicitly closed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        let poly = Polygon { vertices };
        if poly.vertices.len() < 3 || poly.area().abs() < 1e-12 {
            return Err(Error::invalid("polygon is degenerate (needs >= 3 vertices and nonzero area)"));
        }
        Ok(poly)
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Polygon::new(vec![Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)])
    }

    /// Parses `"x1,y1;x2,y2;..."`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        for pair in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let mut it = pair.split(',').map(str::trim);
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| Error::parse("polygon", format!("bad vertex '{pair}'")))?
                    .parse::<f64>()
                    .map_err(|e| Error::parse("polygon", e))
            };
            let x = parse(it.next())?;
            let y = parse(it.next())?;
            if it.next().is_some() {
                return Err(Error::parse("polygon", format!("bad vertex '{pair}'")));
            }
            vertices.push(Point::new(x, y));
        }
        Polygon::new(vertices)
    }

    /// Signed area (positive for counter-clockwise vertex order).
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
                a.x * b.y - b.x * a.y
            })
            .sum::<f64>()
            / 2.0
    }

    /// Even-odd ray casting test.
    pub fn contains(&self, p: Point) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[j]);
            if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
                inside = !inside;
            }
            j = i;
        }
        inside
    }

    /// `(min, max)` corners of the bounding box.
    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    /// A rough continental outline, about 3200 km × 2600 km, with a long
    /// narrow southern peninsula and a broad south-western one.
    pub fn europe_like() -> Self {
        let pts = [
            (0.0, 900.0),
            (350.0, 650.0),
            (250.0, 300.0),
            (600.0, 150.0),
            (1000.0, 250.0),
            (1100.0, 750.0),
            (1300.0, 800.0),
            (1500.0, 450.0),
            (1650.0, 150.0),
            (1800.0, 250.0),
            (1650.0, 650.0),
            (1500.0, 1000.0),
            (1900.0, 900.0),
            (2150.0, 500.0),
            (2500.0, 450.0),
            (2700.0, 800.0),
            (3100.0, 1000.0),
            (3200.0, 1700.0),
            (2900.0, 2300.0),
            (2300.0, 2600.0),
            (1600.0, 2500.0),
            (1100.0, 2200.0),
            (700.0, 1800.0),
            (300.0, 1500.0),
            (0.0, 1300.0),
        ];
        Polygon { vertices: pts.iter().map(|&(x, y)| Point::new(x, y)).collect() }
    }
}
