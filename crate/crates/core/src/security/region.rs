//! Feasible sets of expansion-coefficient pairs.
//!
//! Each mismatched-basis constraint `(a X - b Y)^2 <= t <= (a X + b Y)^2` on a pair of
//! non-negative coefficients is an intersection of three half-planes, so the
//! feasible set of a pair is a convex polygon (possibly degenerate to a segment
//! or a point). Interval-valued coefficients keep this structure under the widest
//! reading of the constraint.

/// `a X - b Y` style bound on one coefficient pair, with interval-valued data.
///
/// `a`, `b` are square roots of the two basis-0 probabilities and `target` is the
/// mismatched-basis probability. Point constraints have `lo == hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PairConstraint {
    pub a: (f64, f64),
    pub b: (f64, f64),
    pub target: (f64, f64),
}

impl PairConstraint {
    pub fn point(a: f64, b: f64, target: f64) -> Self {
        Self {
            a: (a, a),
            b: (b, b),
            target: (target, target),
        }
    }

    /// Half-planes `n . (X, Y) <= c` equivalent to the constraint on `X, Y >= 0`.
    fn half_planes(&self) -> [HalfPlane; 3] {
        let s_lo = self.target.0.max(0.0).sqrt();
        let s_hi = self.target.1.max(0.0).sqrt();
        [
            // a_hi X + b_hi Y >= sqrt(t_lo)
            HalfPlane {
                n: [-self.a.1, -self.b.1],
                c: -s_lo,
            },
            // a_lo X - b_hi Y <= sqrt(t_hi)
            HalfPlane {
                n: [self.a.0, -self.b.1],
                c: s_hi,
            },
            // b_lo Y - a_hi X <= sqrt(t_hi)
            HalfPlane {
                n: [-self.a.1, self.b.0],
                c: s_hi,
            },
        ]
    }

    /// `(lower slack, upper slack)` in the quadratic form; both are >= 0 iff satisfied.
    pub fn residuals(&self, x: f64, y: f64) -> (f64, f64) {
        let (a_lo, a_hi) = self.a;
        let (b_lo, b_hi) = self.b;
        // Smallest attainable |aX - bY| over the coefficient box.
        let gap = (a_lo * x - b_hi * y).max(b_lo * y - a_hi * x).max(0.0);
        let reach = a_hi * x + b_hi * y;
        (self.target.1 - gap * gap, reach * reach - self.target.0)
    }
}

#[derive(Debug, Clone, Copy)]
struct HalfPlane {
    n: [f64; 2],
    c: f64,
}

impl HalfPlane {
    fn eval(&self, p: [f64; 2]) -> f64 {
        self.n[0] * p[0] + self.n[1] * p[1] - self.c
    }
}

/// Convex polygon in the `(X, Y)` plane, vertices in order.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ConvexRegion {
    vertices: Vec<[f64; 2]>,
    x_range: (f64, f64),
}

impl ConvexRegion {
    /// Clips the box `[0, c_max]^2` by both constraints of a pair.
    ///
    /// `slack` loosens every half-plane by an absolute amount so that exactly
    /// tangent constraints (degenerate polygons) survive rounding.
    pub fn from_constraints(constraints: &[PairConstraint], c_max: f64, slack: f64) -> Option<Self> {
        let mut poly = vec![[0.0, 0.0], [c_max, 0.0], [c_max, c_max], [0.0, c_max]];
        for pc in constraints {
            for hp in pc.half_planes() {
                let scale = (hp.n[0].abs() + hp.n[1].abs()).max(hp.c.abs()).max(1e-300);
                poly = clip(&poly, &hp, slack * scale);
                if poly.is_empty() {
                    return None;
                }
            }
        }
        let poly: Vec<[f64; 2]> = poly
            .into_iter()
            .map(|[x, y]| [x.clamp(0.0, c_max), y.clamp(0.0, c_max)])
            .collect();
        let x_lo = poly.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let x_hi = poly.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        Some(Self {
            vertices: poly,
            x_range: (x_lo, x_hi),
        })
    }

    #[cfg(test)]
    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Vertical extent of the polygon at abscissa `x`.
    fn slice(&self, x: f64) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let n = self.vertices.len();
        let width = (self.x_range.1 - self.x_range.0).abs();
        let eps = 1e-14 * (1.0 + width);
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let (x0, x1) = (p[0].min(q[0]), p[0].max(q[0]));
            if x < x0 - eps || x > x1 + eps {
                continue;
            }
            if x1 - x0 <= eps {
                lo = lo.min(p[1].min(q[1]));
                hi = hi.max(p[1].max(q[1]));
            } else {
                let t = ((x - p[0]) / (q[0] - p[0])).clamp(0.0, 1.0);
                let y = p[1] + t * (q[1] - p[1]);
                lo = lo.min(y);
                hi = hi.max(y);
            }
        }
        if lo > hi {
            // Numerically missed every edge; fall back to the nearest vertex.
            let v = self
                .vertices
                .iter()
                .min_by(|a, b| (a[0] - x).abs().total_cmp(&(b[0] - x).abs()))
                .expect("non-empty polygon");
            return (v[1], v[1]);
        }
        (lo, hi)
    }

    /// Continuous surjection from the unit square onto the polygon.
    pub fn map(&self, u: f64, v: f64) -> [f64; 2] {
        let x = self.x_range.0 + u * (self.x_range.1 - self.x_range.0);
        let (lo, hi) = self.slice(x);
        [x, lo + v * (hi - lo)]
    }
}

/// Sutherland-Hodgman step keeping `hp.eval(p) <= tol`.
fn clip(poly: &[[f64; 2]], hp: &HalfPlane, tol: f64) -> Vec<[f64; 2]> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let cur = poly[i];
        let nxt = poly[(i + 1) % n];
        let dc = hp.eval(cur) - tol;
        let dn = hp.eval(nxt) - tol;
        let cur_in = dc <= 0.0;
        let nxt_in = dn <= 0.0;
        if cur_in {
            out.push(cur);
        }
        if cur_in != nxt_in {
            let t = dc / (dc - dn);
            out.push([cur[0] + t * (nxt[0] - cur[0]), cur[1] + t * (nxt[1] - cur[1])]);
        }
    }
    out
}
