//! Deterministic global maximizer over a product of two convex polygons.
//!
//! Search variables live in the unit 4-cube and are mapped onto the feasible
//! polygons of `(C30, C31)` and `(C'20, C'21)`. Stages: coarse grid scan,
//! shrinking grids around the incumbent, then compass pattern search from the
//! best coarse rows. Parallel stages reduce in a fixed order so the result does
//! not depend on the thread count.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::region::{ConvexRegion, PairConstraint};
use super::OptimizerConfig;

/// Incumbent after one stage of the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncumbentRecord {
    pub stage: String,
    pub value: f64,
    pub argmax: [f64; 4],
}

#[derive(Debug, Clone)]
pub(crate) struct SearchOutcome {
    pub value: f64,
    pub argmax: [f64; 4],
    pub history: Vec<IncumbentRecord>,
    pub feasible_points: u64,
    pub evaluations: u64,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    value: f64,
    coords: [f64; 4],
    u: [f64; 4],
}

impl Candidate {
    const NONE: Candidate = Candidate {
        value: f64::NEG_INFINITY,
        coords: [f64::INFINITY; 4],
        u: [0.0; 4],
    };

    /// Larger value first, then lexicographically smallest coordinates.
    fn rank(&self, other: &Candidate) -> Ordering {
        match other.value.total_cmp(&self.value) {
            Ordering::Equal => {
                for i in 0..4 {
                    match self.coords[i].total_cmp(&other.coords[i]) {
                        Ordering::Equal => continue,
                        o => return o,
                    }
                }
                Ordering::Equal
            }
            o => o,
        }
    }

    fn better_than(&self, other: &Candidate) -> bool {
        self.rank(other) == Ordering::Less
    }
}

pub(crate) struct Problem<'a, F>
where
    F: Fn([f64; 4]) -> f64 + Sync,
{
    pub region_a: &'a ConvexRegion,
    pub region_b: &'a ConvexRegion,
    pub constraints_a: &'a [PairConstraint],
    pub constraints_b: &'a [PairConstraint],
    pub tol: f64,
    pub objective: F,
}

impl<F> Problem<'_, F>
where
    F: Fn([f64; 4]) -> f64 + Sync,
{
    fn pair_ok(constraints: &[PairConstraint], p: [f64; 2], tol: f64) -> bool {
        constraints.iter().all(|c| {
            let (lo, hi) = c.residuals(p[0], p[1]);
            lo >= -tol && hi >= -tol
        })
    }

    fn feasible(&self, c: [f64; 4]) -> bool {
        Self::pair_ok(self.constraints_a, [c[0], c[1]], self.tol)
            && Self::pair_ok(self.constraints_b, [c[2], c[3]], self.tol)
    }

    fn coords(&self, u: [f64; 4]) -> [f64; 4] {
        let [x, y] = self.region_a.map(u[0], u[1]);
        let [xp, yp] = self.region_b.map(u[2], u[3]);
        [x, y, xp, yp]
    }

    fn eval(&self, u: [f64; 4]) -> Candidate {
        let coords = self.coords(u);
        let value = if self.feasible(coords) {
            sanitize((self.objective)(coords))
        } else {
            f64::NEG_INFINITY
        };
        Candidate { value, coords, u }
    }

    pub fn maximize(&self, cfg: &OptimizerConfig) -> Option<SearchOutcome> {
        let g = cfg.coarse_grid.max(3);
        let axis: Vec<f64> = (0..g).map(|i| i as f64 / (g - 1) as f64).collect();
        let mut history = Vec::new();
        let mut evaluations = 0u64;

        // Each pair's feasibility depends on that pair alone, so filter the two
        // coarse lattices separately and scan their product.
        let lattice = |region: &ConvexRegion| -> Vec<([f64; 2], [f64; 2])> {
            let mut pts = Vec::with_capacity(g * g);
            for &u0 in &axis {
                for &u1 in &axis {
                    pts.push(([u0, u1], region.map(u0, u1)));
                }
            }
            pts
        };
        let pts_a = lattice(self.region_a);
        let pts_b = lattice(self.region_b);
        let pts_a: Vec<_> = pts_a
            .into_iter()
            .filter(|(_, c)| Self::pair_ok(self.constraints_a, *c, self.tol))
            .collect();
        let pts_b: Vec<_> = pts_b
            .into_iter()
            .filter(|(_, c)| Self::pair_ok(self.constraints_b, *c, self.tol))
            .collect();
        let feasible_points = (pts_a.len() as u64) * (pts_b.len() as u64);
        if feasible_points == 0 {
            return None;
        }

        let row_best: Vec<Candidate> = pts_a
            .par_iter()
            .map(|(ua, ca)| {
                let mut best = Candidate::NONE;
                for (ub, cb) in &pts_b {
                    let coords = [ca[0], ca[1], cb[0], cb[1]];
                    let cand = Candidate {
                        value: sanitize((self.objective)(coords)),
                        coords,
                        u: [ua[0], ua[1], ub[0], ub[1]],
                    };
                    if cand.better_than(&best) {
                        best = cand;
                    }
                }
                best
            })
            .collect();
        evaluations += feasible_points;

        let mut best = row_best
            .iter()
            .copied()
            .fold(Candidate::NONE, |acc, c| if c.better_than(&acc) { c } else { acc });
        history.push(record("coarse", &best));

        // Shrinking grids around the incumbent.
        let gr = g.min(11);
        let mut half = 1.0 / (g - 1) as f64;
        for round in 0..cfg.refine_rounds {
            let center = best.u;
            let axes: Vec<Vec<f64>> = (0..4)
                .map(|k| {
                    let lo = (center[k] - half).max(0.0);
                    let hi = (center[k] + half).min(1.0);
                    (0..gr)
                        .map(|i| lo + (hi - lo) * i as f64 / (gr - 1) as f64)
                        .collect()
                })
                .collect();
            let local = axes[0]
                .par_iter()
                .map(|&u0| {
                    let mut b = Candidate::NONE;
                    for &u1 in &axes[1] {
                        for &u2 in &axes[2] {
                            for &u3 in &axes[3] {
                                let c = self.eval([u0, u1, u2, u3]);
                                if c.better_than(&b) {
                                    b = c;
                                }
                            }
                        }
                    }
                    b
                })
                .collect::<Vec<_>>()
                .into_iter()
                .fold(Candidate::NONE, |acc, c| if c.better_than(&acc) { c } else { acc });
            evaluations += (gr as u64).pow(4);
            if local.better_than(&best) {
                best = local;
            }
            history.push(record(&format!("refine-{}", round + 1), &best));
            half *= cfg.refine_shrink;
        }

        // Compass search from the incumbent and the best coarse rows.
        let mut starts: Vec<Candidate> = row_best
            .into_iter()
            .filter(|c| c.value > f64::NEG_INFINITY)
            .collect();
        starts.sort_by(|a, b| a.rank(b));
        starts.truncate(cfg.multistarts);
        starts.insert(0, best);
        let step0 = 1.0 / (g - 1) as f64;
        let polished: Vec<(Candidate, u64)> = starts
            .par_iter()
            .map(|s| self.compass(*s, step0))
            .collect();
        for (c, n) in polished {
            evaluations += n;
            if c.better_than(&best) {
                best = c;
            }
        }
        history.push(record("polish", &best));

        Some(SearchOutcome {
            value: best.value,
            argmax: best.coords,
            history,
            feasible_points,
            evaluations,
        })
    }

    fn compass(&self, start: Candidate, step0: f64) -> (Candidate, u64) {
        let mut cur = start;
        let mut step = step0;
        let mut evals = 0u64;
        let mut iters = 0;
        while step > 1e-10 && iters < 20_000 {
            iters += 1;
            let mut best_nb = cur;
            for k in 0..4 {
                for dir in [-1.0, 1.0] {
                    let mut u = cur.u;
                    u[k] = (u[k] + dir * step).clamp(0.0, 1.0);
                    if u[k] == cur.u[k] {
                        continue;
                    }
                    let c = self.eval(u);
                    evals += 1;
                    if c.value > best_nb.value {
                        best_nb = c;
                    }
                }
            }
            if best_nb.value > cur.value {
                cur = best_nb;
            } else {
                step *= 0.5;
            }
        }
        (cur, evals)
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

fn record(stage: &str, c: &Candidate) -> IncumbentRecord {
    IncumbentRecord {
        stage: stage.to_string(),
        value: c.value,
        argmax: c.coords,
    }
}
