use crate::error::{Error, Result};
use crate::mesh::Rect;

/// Piecewise-linear path through waypoints, parameterized on `[0, 1]` by
/// chord length.
#[derive(Debug, Clone, PartialEq)]
pub struct PathCurve {
    points: Vec<[f64; 2]>,
}

impl PathCurve {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument("a path needs at least two waypoints".into()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("path waypoints must be finite".into()));
        }
        Ok(Self { points })
    }

    /// Closed polygon `base → p₁ → … → base`.
    pub fn closed_loop(base: [f64; 2], through: &[[f64; 2]]) -> Result<Self> {
        let mut pts = Vec::with_capacity(through.len() + 2);
        pts.push(base);
        pts.extend_from_slice(through);
        pts.push(base);
        Self::new(pts)
    }

    /// Waypoints from `x,y` lines; blank lines, `#` comments and a
    /// non-numeric header are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut pts = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
            match parsed {
                Some(v) if v.len() == 2 => pts.push([v[0], v[1]]),
                None if i == 0 => continue,
                _ => return Err(Error::Parse(format!("line {}: expected `x,y`", i + 1))),
            }
        }
        Self::new(pts)
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn start(&self) -> [f64; 2] {
        self.points[0]
    }

    pub fn end(&self) -> [f64; 2] {
        *self.points.last().expect("at least two points")
    }

    pub fn n_segments(&self) -> usize {
        self.points.len() - 1
    }

    pub fn segment_lengths(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| dist(w[0], w[1])).collect()
    }

    pub fn length(&self) -> f64 {
        self.segment_lengths().iter().sum()
    }

    pub fn is_closed(&self) -> bool {
        dist(self.start(), self.end()) <= 1e-12 * (1.0 + self.length())
    }

    /// True when every waypoint lies in the open rectangle. Segments of a
    /// convex domain then stay inside as well.
    pub fn inside(&self, domain: &Rect) -> bool {
        self.points.iter().all(|p| p[0] > domain.x0 && p[0] < domain.x1 && p[1] > domain.y0 && p[1] < domain.y1)
    }

    /// `γ(t)` under chord-length parameterization.
    pub fn eval(&self, t: f64) -> [f64; 2] {
        let lens = self.segment_lengths();
        let total: f64 = lens.iter().sum();
        if total == 0.0 {
            return self.start();
        }
        let mut s = t.clamp(0.0, 1.0) * total;
        for (w, &l) in self.points.windows(2).zip(&lens) {
            if s <= l && l > 0.0 {
                let r = s / l;
                return [w[0][0] + r * (w[1][0] - w[0][0]), w[0][1] + r * (w[1][1] - w[0][1])];
            }
            s -= l;
        }
        self.end()
    }

    /// `γ̄(t) = γ(1 − t)`.
    pub fn reversed(&self) -> Self {
        let mut pts = self.points.clone();
        pts.reverse();
        Self { points: pts }
    }

    /// `[γ δ]`, defined when `δ` starts where `γ` ends.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        let scale = 1.0 + self.length() + other.length();
        if dist(self.end(), other.start()) > 1e-12 * scale {
            return Err(Error::InvalidArgument("second path does not start where the first ends".into()));
        }
        let mut pts = self.points.clone();
        pts.extend_from_slice(&other.points[1..]);
        Ok(Self { points: pts })
    }

    /// Same curve with every segment split into `k` equal pieces.
    pub fn subdivided(&self, k: usize) -> Self {
        let k = k.max(1);
        let mut pts = vec![self.start()];
        for w in self.points.windows(2) {
            for s in 1..=k {
                let r = s as f64 / k as f64;
                pts.push([w[0][0] + r * (w[1][0] - w[0][0]), w[0][1] + r * (w[1][1] - w[0][1])]);
            }
        }
        Self { points: pts }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// `count` triangular loops based at `x`, each spanning a quarter turn at
/// radius `r` and rotated by `2π/count` from the previous one. The radius
/// shrinks so every loop stays inside `domain`.
pub fn probe_loops(x: [f64; 2], radius: f64, count: usize, domain: &Rect) -> Result<Vec<PathCurve>> {
    let margin = (x[0] - domain.x0).min(domain.x1 - x[0]).min(x[1] - domain.y0).min(domain.y1 - x[1]);
    if margin <= 0.0 {
        return Err(Error::InvalidArgument("base point is not inside the domain".into()));
    }
    let r = radius.min(0.9 * margin);
    (0..count)
        .map(|l| {
            let th = std::f64::consts::TAU * l as f64 / count as f64;
            let p = |a: f64| [x[0] + r * a.cos(), x[1] + r * a.sin()];
            // Alternate between a triangle and a quadrilateral so the loops
            // enclose regions of different shape.
            if l % 2 == 0 {
                PathCurve::closed_loop(x, &[p(th), p(th + std::f64::consts::FRAC_PI_2)])
            } else {
                let h = 0.6 * r;
                let q = [x[0] + h * (th + 1.0).cos(), x[1] + h * (th + 1.0).sin()];
                PathCurve::closed_loop(x, &[p(th), q, p(th + 2.0)])
            }
        })
        .collect()
}
