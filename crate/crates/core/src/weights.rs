//! Muckenhoupt weight machinery.
//!
//! The A_p constant of a weight υ is the supremum over all axis-parallel
//! cubes Q of
//!
//! ```text
//! (υ(Q)/|Q|) · ( (1/|Q|) ∫_Q υ^{-1/(p-1)} )^{p-1}      (p > 1)
//! (υ(Q)/|Q|) · ‖υ^{-1}‖_{L^∞(Q)}                        (p = 1)
//! ```
//!
//! Any finite cube family yields a *lower bound*; the estimate is monotone
//! in family inclusion, and for the power catalog the supremum lives at the
//! singular point, so the default family accumulates cubes there.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// An axis-parallel cube (common to weight masses and doubling checks).
#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    pub lo: Vec<f64>,
    pub side: f64,
}

impl Cube {
    pub fn new(lo: Vec<f64>, side: f64) -> Result<Self> {
        if lo.is_empty() || lo.len() > 3 {
            return Err(Error::InvalidParameter(format!(
                "cube dimension must be 1..=3, got {}",
                lo.len()
            )));
        }
        if !(side > 0.0) || !side.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cube side must be positive and finite, got {side}"
            )));
        }
        Ok(Self { lo, side })
    }

    pub fn centered(center: &[f64], side: f64) -> Result<Self> {
        Self::new(center.iter().map(|c| c - side / 2.0).collect(), side)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim() as i32)
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.lo[axis] + self.side
    }

    pub fn contains(&self, other: &Cube) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|ax| {
                other.lo[ax] >= self.lo[ax] - 1e-12 && other.hi(ax) <= self.hi(ax) + 1e-12
            })
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|ax| x[ax] >= self.lo[ax] && x[ax] < self.hi(ax))
    }
}

/// Weight catalog. Every entry has a positive pointwise evaluator plus
/// closed-form cube masses in dimension one (quadrature otherwise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    Constant { c: f64 },
    /// υ(x) = |x|^a, singular (or vanishing) at the origin.
    Power { a: f64 },
    /// υ(x) = |x - x0|^a.
    ShiftedPower { a: f64, x0: Vec<f64> },
}

impl WeightSpec {
    /// Parameter validation for the given dimension. Integrability near the
    /// singular point needs a > -n.
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            WeightSpec::Constant { c } => {
                if !(c > &0.0) || !c.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "constant weight must be positive and finite, got {c}"
                    )));
                }
            }
            WeightSpec::Power { a } => {
                if !a.is_finite() || *a <= -(dim as f64) {
                    return Err(Error::InvalidParameter(format!(
                        "power weight needs a > -n = {}, got {a}",
                        -(dim as f64)
                    )));
                }
            }
            WeightSpec::ShiftedPower { a, x0 } => {
                if x0.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: x0.len(),
                    });
                }
                if !a.is_finite() || *a <= -(dim as f64) {
                    return Err(Error::InvalidParameter(format!(
                        "power weight needs a > -n = {}, got {a}",
                        -(dim as f64)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Location of the weight's singular point, if it has one.
    pub fn singular_point(&self, dim: usize) -> Option<Vec<f64>> {
        match self {
            WeightSpec::Constant { .. } => None,
            WeightSpec::Power { a } => (*a != 0.0).then(|| vec![0.0; dim]),
            WeightSpec::ShiftedPower { a, x0 } => (*a != 0.0).then(|| x0.clone()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            WeightSpec::Constant { c } => *c,
            WeightSpec::Power { a } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                r.powf(*a)
            }
            WeightSpec::ShiftedPower { a, x0 } => {
                let r = x
                    .iter()
                    .zip(x0.iter())
                    .map(|(v, c)| (v - c) * (v - c))
                    .sum::<f64>()
                    .sqrt();
                r.powf(*a)
            }
        }
    }

    /// υ(Q) = ∫_Q υ.
    pub fn cube_mass(&self, q: &Cube) -> f64 {
        self.cube_mass_power(q, 1.0)
    }

    /// ∫_Q υ^s (s = 1 for masses, s = -1/(p-1) for the dual factor).
    ///
    /// Returns +∞ when the integral genuinely diverges (power exponent
    /// a·s ≤ -n with the singular point inside the closed cube).
    pub fn cube_mass_power(&self, q: &Cube, s: f64) -> f64 {
        match self {
            WeightSpec::Constant { c } => c.powf(s) * q.volume(),
            WeightSpec::Power { a } => power_mass(q, &vec![0.0; q.dim()], a * s),
            WeightSpec::ShiftedPower { a, x0 } => power_mass(q, x0, a * s),
        }
    }

    /// Essential infimum of υ on the cube, by closed form (never sampled:
    /// the infimum of a singular weight is not sample-stable).
    pub fn ess_inf(&self, q: &Cube) -> f64 {
        match self {
            WeightSpec::Constant { c } => *c,
            WeightSpec::Power { a } => power_extremum(q, &vec![0.0; q.dim()], *a, false),
            WeightSpec::ShiftedPower { a, x0 } => power_extremum(q, x0, *a, false),
        }
    }

    /// Essential supremum of υ on the cube (+∞ for a negative-power weight
    /// whose singular point lies in the closed cube).
    pub fn ess_sup(&self, q: &Cube) -> f64 {
        match self {
            WeightSpec::Constant { c } => *c,
            WeightSpec::Power { a } => power_extremum(q, &vec![0.0; q.dim()], *a, true),
            WeightSpec::ShiftedPower { a, x0 } => power_extremum(q, x0, *a, true),
        }
    }

    pub fn id(&self) -> String {
        match self {
            WeightSpec::Constant { c } => format!("constant({c})"),
            WeightSpec::Power { a } => format!("|x|^{a}"),
            WeightSpec::ShiftedPower { a, x0 } => format!("|x - {x0:?}|^{a}"),
        }
    }
}

/// Distance from `center` to the nearest / farthest point of the cube.
fn cube_distance_range(q: &Cube, center: &[f64]) -> (f64, f64) {
    let mut near2 = 0.0;
    let mut far2 = 0.0;
    for ax in 0..q.dim() {
        let lo = q.lo[ax] - center[ax];
        let hi = q.hi(ax) - center[ax];
        let near = if lo > 0.0 {
            lo
        } else if hi < 0.0 {
            -hi
        } else {
            0.0
        };
        let far = lo.abs().max(hi.abs());
        near2 += near * near;
        far2 += far * far;
    }
    (near2.sqrt(), far2.sqrt())
}

/// min/max of |x - center|^a over the cube, exact.
fn power_extremum(q: &Cube, center: &[f64], a: f64, want_max: bool) -> f64 {
    let (near, far) = cube_distance_range(q, center);
    let at_near = if near == 0.0 {
        if a > 0.0 {
            0.0
        } else if a == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        near.powf(a)
    };
    let at_far = far.powf(a);
    if want_max {
        at_near.max(at_far)
    } else {
        at_near.min(at_far)
    }
}

/// ∫_Q |x - center|^b dx. Closed form in dimension one; recursive midpoint
/// quadrature refined toward the singular point otherwise.
fn power_mass(q: &Cube, center: &[f64], b: f64) -> f64 {
    if b == 0.0 {
        return q.volume();
    }
    let dim = q.dim();
    if dim == 1 {
        return power_mass_1d(q.lo[0] - center[0], q.hi(0) - center[0], b);
    }
    // Divergence is decided exactly; only finite integrals are quadratured.
    let (near, _) = cube_distance_range(q, center);
    if near == 0.0 && b <= -(dim as f64) {
        return f64::INFINITY;
    }
    adaptive_power_quad(q, center, b, 0)
}

/// ∫_lo^hi |t|^b dt with exact divergence handling.
fn power_mass_1d(lo: f64, hi: f64, b: f64) -> f64 {
    debug_assert!(lo <= hi);
    // Antiderivative of t^b on t > 0.
    let prim = |t: f64| -> f64 {
        if t == 0.0 {
            if b > -1.0 {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        } else if (b + 1.0).abs() < 1e-14 {
            t.ln()
        } else {
            t.powf(b + 1.0) / (b + 1.0)
        }
    };
    let one_sided = |a: f64, c: f64| -> f64 {
        // 0 ≤ a ≤ c
        if a == 0.0 && b <= -1.0 {
            f64::INFINITY
        } else {
            prim(c) - prim(a)
        }
    };
    if lo >= 0.0 {
        one_sided(lo, hi)
    } else if hi <= 0.0 {
        one_sided(-hi, -lo)
    } else {
        one_sided(0.0, -lo) + one_sided(0.0, hi)
    }
}

/// Midpoint quadrature with recursive subdivision of the child cube
/// containing the singular point (the integrand is smooth elsewhere).
fn adaptive_power_quad(q: &Cube, center: &[f64], b: f64, depth: u32) -> f64 {
    let dim = q.dim();
    let contains_sing = (0..dim).all(|ax| {
        center[ax] >= q.lo[ax] - 1e-14 && center[ax] <= q.hi(ax) + 1e-14
    });
    if contains_sing && depth < 24 {
        // Split into 2^n children; recurse on all (only the one holding the
        // singular point keeps splitting).
        let half = q.side / 2.0;
        let mut acc = 0.0;
        for mask in 0..(1usize << dim) {
            let lo: Vec<f64> = (0..dim)
                .map(|ax| q.lo[ax] + if mask >> ax & 1 == 1 { half } else { 0.0 })
                .collect();
            let child = Cube { lo, side: half };
            acc += adaptive_power_quad(&child, center, b, depth + 1);
        }
        return acc;
    }
    // Plain midpoint rule.
    let n: usize = match dim {
        2 => 24,
        _ => 10,
    };
    let h = q.side / n as f64;
    let mut acc = 0.0;
    let mut idx = vec![0usize; dim];
    let total = n.pow(dim as u32);
    for flat in 0..total {
        let mut rem = flat;
        for ax in (0..dim).rev() {
            idx[ax] = rem % n;
            rem /= n;
        }
        let mut r2 = 0.0;
        for ax in 0..dim {
            let x = q.lo[ax] + (idx[ax] as f64 + 0.5) * h - center[ax];
            r2 += x * x;
        }
        acc += r2.sqrt().powf(b);
    }
    acc * h.powi(dim as i32)
}

// ---------------------------------------------------------------------------
// Cube families.
// ---------------------------------------------------------------------------

/// A finite cube family over which A_p quotients are maximized: all dyadic
/// cubes of a level range intersecting a centered box, plus a geometric
/// sequence of cubes accumulating at a designated point (the weight's
/// singular point, where the supremum is attained for the power catalog).
#[derive(Debug, Clone)]
pub struct CubeFamily {
    dim: usize,
    box_half: f64,
    level_min: i32,
    level_max: i32,
    accum_point: Option<Vec<f64>>,
    accum_count: usize,
}

impl CubeFamily {
    pub fn new(dim: usize, box_half: f64, accum_point: Option<Vec<f64>>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!(
                "cube family dimension must be 1..=3, got {dim}"
            )));
        }
        if let Some(p) = &accum_point {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: p.len(),
                });
            }
        }
        // Deeper dyadic levels in dimension one only; the cube count is
        // otherwise prohibitive and the accumulating sequence carries the
        // singular behaviour anyway.
        let level_min = if dim == 1 { -10 } else { -4 };
        Ok(Self {
            dim,
            box_half,
            level_min,
            level_max: 4,
            accum_point,
            accum_count: 40,
        })
    }

    /// Default family for a weight: accumulates at its singular point.
    pub fn for_weight(dim: usize, box_half: f64, w: &WeightSpec) -> Result<Self> {
        Self::new(dim, box_half, w.singular_point(dim))
    }

    /// A strictly larger family: two deeper dyadic levels and more
    /// accumulating cubes.
    pub fn refined(&self) -> Self {
        Self {
            level_min: self.level_min - if self.dim == 1 { 2 } else { 1 },
            accum_count: self.accum_count + 12,
            ..self.clone()
        }
    }

    pub fn cubes(&self) -> Vec<Cube> {
        let mut out = Vec::new();
        for j in self.level_min..=self.level_max {
            let side = 2f64.powi(j);
            let m_lo = (-self.box_half / side).floor() as i64;
            let m_hi = (self.box_half / side).ceil() as i64;
            let per_axis = (m_lo..m_hi).collect::<Vec<_>>();
            let mut idx = vec![0usize; self.dim];
            let total = per_axis.len().pow(self.dim as u32);
            for flat in 0..total {
                let mut rem = flat;
                let mut lo = Vec::with_capacity(self.dim);
                for ax in (0..self.dim).rev() {
                    idx[ax] = rem % per_axis.len();
                    rem /= per_axis.len();
                }
                for ax in 0..self.dim {
                    lo.push(per_axis[idx[ax]] as f64 * side);
                }
                out.push(Cube { lo, side });
            }
        }
        if let Some(p) = &self.accum_point {
            // Cubes centered at the accumulation point with geometrically
            // shrinking sides (scale-invariant weights give a constant
            // quotient along this sequence — exactly what stabilization
            // detection needs).
            let mut side = 4.0;
            for _ in 0..self.accum_count {
                out.push(Cube {
                    lo: p.iter().map(|c| c - side / 2.0).collect(),
                    side,
                });
                side *= 0.7;
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.cubes().len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

// ---------------------------------------------------------------------------
// A_p estimation.
// ---------------------------------------------------------------------------

/// A_p quotient of a single cube.
fn ap_quotient(w: &WeightSpec, p: f64, q: &Cube) -> Result<f64> {
    let vol = q.volume();
    let mass = w.cube_mass(q);
    if mass.is_nan() || mass == 0.0 {
        return Err(Error::Precondition(format!(
            "weight mass degenerate on cube {q:?}: {mass}"
        )));
    }
    if mass.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let avg = mass / vol;
    if p == 1.0 {
        let inf = w.ess_inf(q);
        if inf == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(avg / inf)
    } else {
        let dual = w.cube_mass_power(q, -1.0 / (p - 1.0));
        if dual.is_infinite() {
            return Ok(f64::INFINITY);
        }
        Ok(avg * (dual / vol).powf(p - 1.0))
    }
}

/// Largest A_p quotient over the family — a lower bound for the true
/// constant, non-decreasing in family inclusion. Returns +∞ when some cube's
/// quotient diverges (the weight is not in A_p).
pub fn ap_constant(w: &WeightSpec, p: f64, family: &CubeFamily) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "ap constant needs p ≥ 1, got {p}"
        )));
    }
    w.validate(family.dim)?;
    let mut best = 0.0f64;
    for q in family.cubes() {
        let v = ap_quotient(w, p, &q)?;
        if v.is_infinite() {
            return Ok(f64::INFINITY);
        }
        best = best.max(v);
    }
    Ok(best)
}

/// Verify the doubling inequality υ(S) ≤ est·(|S|/|Q|)^p·υ(Q) for Q ⊆ S,
/// with `est` a converged A_p estimate.
pub fn doubling_check(w: &WeightSpec, p: f64, q: &Cube, s: &Cube, ap_est: f64) -> Result<bool> {
    if !s.contains(q) {
        return Err(Error::Precondition(format!(
            "doubling check needs Q ⊆ S, got Q = {q:?}, S = {s:?}"
        )));
    }
    let vq = w.cube_mass(q);
    let vs = w.cube_mass(s);
    let ratio = (s.volume() / q.volume()).powf(p);
    Ok(vs <= ap_est * ratio * vq * (1.0 + 1e-9))
}

/// Smallest r in the grid whose A_r estimate stabilizes under two family
/// refinements (both successive changes < 5%); +∞ if none does.
pub fn critical_index(w: &WeightSpec, r_grid: &[f64], family: &CubeFamily) -> Result<f64> {
    if r_grid.is_empty() || r_grid[0] < 1.0 || r_grid[r_grid.len() - 1] < 4.0 {
        return Err(Error::InvalidParameter(
            "critical index grid must be inside [1, ∞) and span at least [1, 4]".into(),
        ));
    }
    if r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "critical index grid must be strictly increasing".into(),
        ));
    }
    let f1 = family.refined();
    let f2 = f1.refined();
    for &r in r_grid {
        let e0 = ap_constant(w, r, family)?;
        if !e0.is_finite() {
            continue;
        }
        let e1 = ap_constant(w, r, &f1)?;
        let e2 = ap_constant(w, r, &f2)?;
        if !e1.is_finite() || !e2.is_finite() {
            continue;
        }
        let rel1 = (e1 - e0).abs() / e0.max(1e-300);
        let rel2 = (e2 - e1).abs() / e1.max(1e-300);
        if rel1 < 0.05 && rel2 < 0.05 {
            return Ok(r);
        }
    }
    Ok(f64::INFINITY)
}
