//! A registry of function-space norms over sampled fields.
//!
//! Every norm here treats a [`SampledField`] as the piecewise-constant
//! function equal to `values[i]` on cell i and zero outside the box, and
//! reduces ‖·‖_X to a deterministic finite computation: cell sums, a
//! rearrangement staircase, a Luxemburg bisection, or a truncated scan over
//! dyadic cubes / annuli. Truncation parameters are explicit and their tail
//! behaviour is reported, never silently assumed away.

use crate::error::{Error, Result};
use crate::field::SampledField;
use crate::num::CumTable;
use crate::weights::WeightSpec;
use serde::{Deserialize, Serialize};

/// Young function catalog for Orlicz-type norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrliczSpec {
    /// Φ(t) = t^p.
    Power { p: f64 },
    /// Φ(t) = t^a for t ≤ 1, t^b for t > 1 (continuous at 1).
    PiecewisePower { a: f64, b: f64 },
}

impl OrliczSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            OrliczSpec::Power { p } => p.is_finite() && *p >= 1.0,
            OrliczSpec::PiecewisePower { a, b } => {
                a.is_finite() && b.is_finite() && *a >= 1.0 && *b >= 1.0
            }
        };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "orlicz exponents must be finite and ≥ 1: {self:?}"
            )));
        }
        // Sampled sanity: non-decreasing, vanishing only at zero, and the
        // declared type bounds hold on a log grid of (s, t) pairs.
        let (lo, hi) = (self.lower_type(), self.upper_type());
        let mut prev = 0.0;
        for i in -12..=12 {
            let t = 10f64.powi(i);
            let v = self.eval(t);
            if !(v > 0.0) || v < prev {
                return Err(Error::InvalidParameter(format!(
                    "orlicz function not increasing/positive at t={t}: {self:?}"
                )));
            }
            prev = v;
            for s_exp in -6..=6 {
                let s = 10f64.powi(s_exp);
                let bound = if s <= 1.0 {
                    s.powf(lo) * v
                } else {
                    s.powf(hi) * v
                };
                if self.eval(s * t) > bound * (1.0 + 1e-9) {
                    return Err(Error::InvalidParameter(format!(
                        "orlicz type bounds violated at (s={s}, t={t}): {self:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        match self {
            OrliczSpec::Power { p } => t.powf(*p),
            OrliczSpec::PiecewisePower { a, b } => {
                if t <= 1.0 {
                    t.powf(*a)
                } else {
                    t.powf(*b)
                }
            }
        }
    }

    /// Exact inverse on [0, ∞) (both catalog entries are strictly
    /// increasing bijections).
    pub fn inverse(&self, y: f64) -> f64 {
        debug_assert!(y >= 0.0);
        match self {
            OrliczSpec::Power { p } => y.powf(1.0 / p),
            OrliczSpec::PiecewisePower { a, b } => {
                if y <= 1.0 {
                    y.powf(1.0 / a)
                } else {
                    y.powf(1.0 / b)
                }
            }
        }
    }

    /// Largest r with Φ(st) ≲ s^r Φ(t) for s ≤ 1.
    pub fn lower_type(&self) -> f64 {
        match self {
            OrliczSpec::Power { p } => *p,
            OrliczSpec::PiecewisePower { a, b } => a.min(*b),
        }
    }

    /// Smallest r with Φ(st) ≲ s^r Φ(t) for s ≥ 1.
    pub fn upper_type(&self) -> f64 {
        match self {
            OrliczSpec::Power { p } => *p,
            OrliczSpec::PiecewisePower { a, b } => a.max(*b),
        }
    }
}

/// Variable exponent catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExponentSpec {
    Constant { value: f64 },
    /// r(x) = outer + (inner − outer)·w(|x|/radius) with w a smooth step
    /// that is 1 near 0 and 0 beyond 1 — Lipschitz, hence log-Hölder.
    RadialBlend { inner: f64, outer: f64, radius: f64 },
}

impl ExponentSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds();
        if !(1.0 <= lo && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "exponent bounds must satisfy 1 ≤ lo ≤ hi < ∞: {self:?}"
            )));
        }
        if let ExponentSpec::RadialBlend { radius, .. } = self {
            if !(radius > &0.0) {
                return Err(Error::InvalidParameter(format!(
                    "blend radius must be positive: {self:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ExponentSpec::Constant { value } => *value,
            ExponentSpec::RadialBlend {
                inner,
                outer,
                radius,
            } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                // smooth step: 1 for r ≤ radius/2, 0 for r ≥ radius
                let w = crate::num::SmoothTransition::new(radius / 2.0, *radius).value(r);
                outer + (inner - outer) * w
            }
        }
    }

    /// (essential lower bound, essential upper bound).
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            ExponentSpec::Constant { value } => (*value, *value),
            ExponentSpec::RadialBlend { inner, outer, .. } => {
                (inner.min(*outer), inner.max(*outer))
            }
        }
    }

    /// Sampled log-Hölder modulus sup |r(x)−r(y)|·log(e + 1/|x−y|) over
    /// nearby pairs in the box — finite for the whole catalog; exposed so
    /// configurations can be sanity-reported.
    pub fn log_holder_modulus(&self, dim: usize, half_width: f64) -> f64 {
        let mut worst = 0.0f64;
        let n = 48usize;
        let mut x = vec![0.0; dim];
        let mut y = vec![0.0; dim];
        for i in 0..n {
            let t = -half_width + 2.0 * half_width * (i as f64 + 0.5) / n as f64;
            for ax in 0..dim {
                x.fill(0.0);
                y.fill(0.0);
                x[ax] = t;
                for step in [1e-4, 1e-2, 0.3] {
                    y[ax] = t + step;
                    let d = (self.eval(&x) - self.eval(&y)).abs();
                    worst = worst.max(d * (std::f64::consts::E + 1.0 / step).ln());
                }
            }
        }
        worst
    }
}

fn default_center() -> Vec<f64> {
    Vec::new()
}

/// A function-space norm, identified by variant tag plus parameters.
///
/// All parameters are in their normed ranges; [`SpaceSpec::validate`]
/// enforces them for a given dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum SpaceSpec {
    Lebesgue {
        p: f64,
    },
    WeightedLebesgue {
        p: f64,
        weight: WeightSpec,
    },
    /// L^{r,τ} via the decreasing rearrangement.
    Lorentz {
        r: f64,
        tau: f64,
    },
    VariableLebesgue {
        exponent: ExponentSpec,
    },
    /// Iterated norm, axis 0 integrated innermost.
    MixedNorm {
        exponents: Vec<f64>,
    },
    Orlicz {
        phi: OrliczSpec,
    },
    /// sup over cubes of |Q|^{1/u−1/p} ‖f‖_{L^p(Q)}, p ≤ u.
    Morrey {
        u: f64,
        p: f64,
    },
    /// ℓ^r over all dyadic cubes of the Morrey quotients, p ≤ u ≤ r.
    BourgainMorrey {
        u: f64,
        p: f64,
        r: f64,
    },
    /// ℓ^τ over levels of the per-level ℓ^r over positions.
    BesovBourgainMorrey {
        u: f64,
        p: f64,
        r: f64,
        tau: f64,
    },
    /// ℓ^r over dyadic annuli centered at `center` with weight 2^{ka}.
    HerzLocal {
        p: f64,
        r: f64,
        a: f64,
        #[serde(default = "default_center")]
        center: Vec<f64>,
    },
    /// Localized Orlicz-norm ratios over balls of radius t, ℓ^r in the ball
    /// center.
    OrliczSlice {
        r: f64,
        t: f64,
        phi: OrliczSpec,
    },
}

impl SpaceSpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            SpaceSpec::Lebesgue { p } => {
                if !(p.is_finite() && *p >= 1.0) {
                    return bad(format!("lebesgue needs p ∈ [1,∞), got {p}"));
                }
            }
            SpaceSpec::WeightedLebesgue { p, weight } => {
                if !(p.is_finite() && *p >= 1.0) {
                    return bad(format!("weighted lebesgue needs p ∈ [1,∞), got {p}"));
                }
                weight.validate(dim)?;
            }
            SpaceSpec::Lorentz { r, tau } => {
                if !(r.is_finite() && *r > 1.0 && tau.is_finite() && *tau > 1.0) {
                    return bad(format!("lorentz needs r, τ ∈ (1,∞), got ({r}, {tau})"));
                }
            }
            SpaceSpec::VariableLebesgue { exponent } => exponent.validate()?,
            SpaceSpec::MixedNorm { exponents } => {
                if exponents.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: exponents.len(),
                    });
                }
                if exponents.iter().any(|e| !(e.is_finite() && *e > 1.0)) {
                    return bad(format!("mixed norm needs exponents in (1,∞): {exponents:?}"));
                }
            }
            SpaceSpec::Orlicz { phi } => phi.validate()?,
            SpaceSpec::Morrey { u, p } => {
                if !(1.0 <= *p && p <= u && u.is_finite()) {
                    return bad(format!("morrey needs 1 ≤ p ≤ u < ∞, got (u={u}, p={p})"));
                }
            }
            SpaceSpec::BourgainMorrey { u, p, r } => {
                if !(1.0 <= *p && p <= u && u <= r && r.is_finite()) {
                    return bad(format!(
                        "bourgain-morrey needs 1 ≤ p ≤ u ≤ r < ∞, got (u={u}, p={p}, r={r})"
                    ));
                }
            }
            SpaceSpec::BesovBourgainMorrey { u, p, r, tau } => {
                if !(1.0 <= *p && p <= u && u <= r && r.is_finite()) {
                    return bad(format!(
                        "besov-bourgain-morrey needs 1 ≤ p ≤ u ≤ r < ∞, got (u={u}, p={p}, r={r})"
                    ));
                }
                if !(tau.is_finite() && *tau >= 1.0) {
                    return bad(format!("besov-bourgain-morrey needs τ ∈ [1,∞), got {tau}"));
                }
            }
            SpaceSpec::HerzLocal { p, r, a, center } => {
                if !(p.is_finite() && *p >= 1.0 && r.is_finite() && *r >= 1.0) {
                    return bad(format!("herz needs p, r ∈ [1,∞), got ({p}, {r})"));
                }
                let n = dim as f64;
                let upper = n * (1.0 - 1.0 / p);
                if !(-n / p < *a && *a < upper) {
                    return bad(format!(
                        "herz exponent window is -n/p < a < n(1-1/p): a={a}, p={p}, n={n}"
                    ));
                }
                if !center.is_empty() && center.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: center.len(),
                    });
                }
            }
            SpaceSpec::OrliczSlice { r, t, phi } => {
                if !(r.is_finite() && *r >= 1.0 && t.is_finite() && *t > 0.0) {
                    return bad(format!("orlicz slice needs r ≥ 1, t > 0, got ({r}, {t})"));
                }
                phi.validate()?;
            }
        }
        Ok(())
    }

    pub fn id(&self) -> String {
        match self {
            SpaceSpec::Lebesgue { p } => format!("L^{p}"),
            SpaceSpec::WeightedLebesgue { p, weight } => {
                format!("L^{p}({})", weight.id())
            }
            SpaceSpec::Lorentz { r, tau } => format!("L^({r},{tau})"),
            SpaceSpec::VariableLebesgue { exponent } => format!("L^r(·) {exponent:?}"),
            SpaceSpec::MixedNorm { exponents } => format!("L^{exponents:?} mixed"),
            SpaceSpec::Orlicz { phi } => format!("L^Φ {phi:?}"),
            SpaceSpec::Morrey { u, p } => format!("M^{u}_{p}"),
            SpaceSpec::BourgainMorrey { u, p, r } => format!("M^{u}_({p},{r})"),
            SpaceSpec::BesovBourgainMorrey { u, p, r, tau } => {
                format!("MB^({u},{tau})_({p},{r})")
            }
            SpaceSpec::HerzLocal { p, r, a, .. } => format!("K^(a={a})_({p},{r})"),
            SpaceSpec::OrliczSlice { r, t, phi } => format!("(E_Φ^{t})_{r} {phi:?}"),
        }
    }
}

/// Dyadic truncation window for cube-scan norms (levels are cube sides
/// 2^j). The effective lower level is additionally clamped at the sampling
/// cell size: sub-cell structure of piecewise-constant data is handled in
/// closed form (sup norms) or reported as a tail (sum norms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationConfig {
    pub j_min: i32,
    pub j_max: i32,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self { j_min: -12, j_max: 6 }
    }
}

/// ‖g‖_X with the default truncation window.
pub fn space_norm(spec: &SpaceSpec, g: &SampledField) -> Result<f64> {
    space_norm_truncated(spec, g, TruncationConfig::default())
}

/// ‖g‖_X with an explicit truncation window (only cube-scan variants use
/// it; the others are truncation-free).
pub fn space_norm_truncated(
    spec: &SpaceSpec,
    g: &SampledField,
    trunc: TruncationConfig,
) -> Result<f64> {
    spec.validate(g.grid.dim)?;
    if g.values.is_empty() {
        return Err(Error::Precondition("empty field".into()));
    }
    if g.values.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    match spec {
        SpaceSpec::Lebesgue { p } => Ok(lebesgue_norm(g, *p)),
        SpaceSpec::WeightedLebesgue { p, weight } => Ok(weighted_norm(g, *p, weight)),
        SpaceSpec::Lorentz { r, tau } => Ok(lorentz_norm(g, *r, *tau)),
        SpaceSpec::VariableLebesgue { exponent } => variable_norm(g, exponent),
        SpaceSpec::MixedNorm { exponents } => Ok(mixed_norm(g, exponents)),
        SpaceSpec::Orlicz { phi } => orlicz_norm(g, phi),
        SpaceSpec::Morrey { u, p } => Ok(morrey_norm(g, *u, *p, trunc)),
        SpaceSpec::BourgainMorrey { u, p, r } => Ok(bourgain_morrey_norm(g, *u, *p, *r, trunc)),
        SpaceSpec::BesovBourgainMorrey { u, p, r, tau } => {
            Ok(besov_bourgain_morrey_norm(g, *u, *p, *r, *tau, trunc))
        }
        SpaceSpec::HerzLocal { p, r, a, center } => herz_norm(g, *p, *r, *a, center),
        SpaceSpec::OrliczSlice { r, t, phi } => orlicz_slice_norm(g, *r, *t, phi),
    }
}

/// Convexified norm ‖ |g|^q ‖_X^{1/q}.
pub fn convexified_norm(spec: &SpaceSpec, q: f64, g: &SampledField) -> Result<f64> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "convexification exponent must be positive and finite, got {q}"
        )));
    }
    let powered = SampledField {
        grid: g.grid,
        values: g.values.iter().map(|v| v.abs().powf(q)).collect(),
    };
    Ok(space_norm(spec, &powered)?.powf(1.0 / q))
}

/// Lattice property on a concrete pair: requires |g1| ≤ |g2| pointwise and
/// reports whether the norms are ordered accordingly (up to 1e-9 slack).
pub fn lattice_check(spec: &SpaceSpec, g1: &SampledField, g2: &SampledField) -> Result<bool> {
    if g1.grid != g2.grid {
        return Err(Error::Precondition(
            "lattice check needs both fields on the same grid".into(),
        ));
    }
    if g1
        .values
        .iter()
        .zip(g2.values.iter())
        .any(|(a, b)| a.abs() > b.abs() + 1e-15)
    {
        return Err(Error::Precondition(
            "lattice check precondition |g1| ≤ |g2| violated".into(),
        ));
    }
    let n1 = space_norm(spec, g1)?;
    let n2 = space_norm(spec, g2)?;
    Ok(n1 <= n2 * (1.0 + 1e-9))
}

// ---------------------------------------------------------------------------
// Cell-sum norms.
// ---------------------------------------------------------------------------

fn lebesgue_norm(g: &SampledField, p: f64) -> f64 {
    let vol = g.grid.cell_volume();
    let s: f64 = g.values.iter().map(|v| v.abs().powf(p)).sum();
    (s * vol).powf(1.0 / p)
}

fn weighted_norm(g: &SampledField, p: f64, w: &WeightSpec) -> f64 {
    let vol = g.grid.cell_volume();
    let mut x = [0.0f64; 3];
    let mut s = 0.0;
    for (i, v) in g.values.iter().enumerate() {
        if *v == 0.0 {
            continue;
        }
        g.grid.point_of(i, &mut x);
        s += v.abs().powf(p) * w.eval(&x[..g.grid.dim]);
    }
    (s * vol).powf(1.0 / p)
}

/// Rearrangement staircase: values sorted decreasing (ties by grid index),
/// each carrying one cell volume of measure. The quasi-norm integral
/// ∫ (t^{1/r} g*(t))^τ dt/t is then exact per stair.
fn lorentz_norm(g: &SampledField, r: f64, tau: f64) -> f64 {
    let vol = g.grid.cell_volume();
    let mut idx: Vec<u32> = (0..g.values.len() as u32).collect();
    idx.sort_by(|&a, &b| {
        let va = g.values[a as usize].abs();
        let vb = g.values[b as usize].abs();
        vb.partial_cmp(&va).unwrap().then(a.cmp(&b))
    });
    let e = tau / r;
    let mut acc = 0.0;
    let mut t_prev = 0.0f64;
    for (count, &i) in idx.iter().enumerate() {
        let v = g.values[i as usize].abs();
        if v == 0.0 {
            break;
        }
        let t_next = (count as f64 + 1.0) * vol;
        acc += v.powf(tau) * (t_next.powf(e) - t_prev.powf(e)) / e;
        t_prev = t_next;
    }
    acc.powf(1.0 / tau)
}

fn mixed_norm(g: &SampledField, exponents: &[f64]) -> f64 {
    let n = g.grid.points_per_axis;
    let h = g.grid.spacing();
    let mut cur: Vec<f64> = g.values.iter().map(|v| v.abs()).collect();
    // Axis 0 (the slowest-varying index) integrates first.
    for p in exponents {
        let rest = cur.len() / n;
        let mut next = vec![0.0f64; rest];
        for (r, slot) in next.iter_mut().enumerate() {
            let mut s = 0.0;
            for i in 0..n {
                s += cur[i * rest + r].powf(*p);
            }
            *slot = (s * h).powf(1.0 / p);
        }
        cur = next;
    }
    debug_assert_eq!(cur.len(), 1);
    cur[0]
}

// ---------------------------------------------------------------------------
// Luxemburg-type norms (modular bisection).
// ---------------------------------------------------------------------------

/// Solve modular(λ) = 1 for a continuous decreasing modular, to relative
/// accuracy 1e-10, with a 200-iteration cap per phase.
fn luxemburg_bisect(modular: impl Fn(f64) -> f64, scale: f64, what: &str) -> Result<f64> {
    let mut hi = scale;
    let mut lo = scale;
    let mut iters = 0;
    while modular(hi) > 1.0 {
        hi *= 2.0;
        iters += 1;
        if iters > 200 || !hi.is_finite() {
            return Err(Error::BisectionFailure(format!(
                "{what}: modular never drops to 1 (λ grew to {hi})"
            )));
        }
    }
    iters = 0;
    while modular(lo) < 1.0 {
        lo *= 0.5;
        iters += 1;
        if iters > 200 || lo == 0.0 {
            if modular(lo) == 0.0 {
                return Err(Error::BisectionFailure(format!(
                    "{what}: modular identically below 1 — degenerate data"
                )));
            }
            // The norm is smaller than any representable bracket; zero
            // field should have been caught earlier.
            return Err(Error::BisectionFailure(format!(
                "{what}: modular never rises to 1 (λ shrank to {lo})"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let m = modular(mid);
        if (m - 1.0).abs() <= 1e-10 {
            return Ok(mid);
        }
        if m > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) / hi.max(1e-300) < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn orlicz_norm(g: &SampledField, phi: &OrliczSpec) -> Result<f64> {
    let vol = g.grid.cell_volume();
    let vals: Vec<f64> = g.values.iter().map(|v| v.abs()).filter(|v| *v > 0.0).collect();
    let modular = |lam: f64| -> f64 { vals.iter().map(|v| phi.eval(v / lam)).sum::<f64>() * vol };
    luxemburg_bisect(modular, g.max_abs(), "orlicz norm")
}

fn variable_norm(g: &SampledField, exponent: &ExponentSpec) -> Result<f64> {
    let vol = g.grid.cell_volume();
    let mut x = [0.0f64; 3];
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for (i, v) in g.values.iter().enumerate() {
        if *v == 0.0 {
            continue;
        }
        g.grid.point_of(i, &mut x);
        pairs.push((v.abs(), exponent.eval(&x[..g.grid.dim])));
    }
    let modular = |lam: f64| -> f64 {
        pairs.iter().map(|(v, r)| (v / lam).powf(*r)).sum::<f64>() * vol
    };
    luxemburg_bisect(modular, g.max_abs(), "variable exponent norm")
}

// ---------------------------------------------------------------------------
// Cube-scan norms.
// ---------------------------------------------------------------------------

/// Cumulative table of |g|^p (piecewise constant), for exact box integrals.
fn abs_power_table(g: &SampledField, p: f64) -> CumTable {
    let density: Vec<f64> = g.values.iter().map(|v| v.abs().powf(p)).collect();
    CumTable::new(
        g.grid.dim,
        g.grid.points_per_axis,
        -g.grid.half_width,
        g.grid.spacing(),
        &density,
    )
}

/// Effective lowest level: cube side never below the sampling cell.
fn clamp_level(g: &SampledField, j_min: i32) -> i32 {
    let cell = g.grid.spacing();
    j_min.max(cell.log2().ceil() as i32)
}

/// Visit every cube of side 2^j from the shifted family `alpha`
/// (per-axis offsets in {0, 1/3, 2/3}) that meets the sampling box.
/// The shift alternates sign with the level so that cubes of different
/// levels never share boundary hyperplanes systematically.
fn for_each_shifted_cube(
    dim: usize,
    half_width: f64,
    j: i32,
    alpha: &[f64],
    mut visit: impl FnMut(&[f64; 3], f64),
) {
    let side = 2f64.powi(j);
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    let mut m_lo = [0i64; 3];
    let mut m_hi = [0i64; 3];
    for ax in 0..dim {
        let off = sign * alpha[ax];
        // need side·(m + off) ≤ half_width and side·(m + off + 1) ≥ −half_width
        m_lo[ax] = (-half_width / side - off - 1.0).floor() as i64;
        m_hi[ax] = (half_width / side - off).ceil() as i64;
    }
    let mut m = m_lo;
    let mut lo = [0.0f64; 3];
    loop {
        for ax in 0..dim {
            lo[ax] = side * (m[ax] as f64 + sign * alpha[ax]);
        }
        visit(&lo, side);
        // odometer
        let mut ax = 0;
        loop {
            if ax == dim {
                return;
            }
            m[ax] += 1;
            if m[ax] <= m_hi[ax] {
                break;
            }
            m[ax] = m_lo[ax];
            ax += 1;
        }
    }
}

/// All 3^dim shift combinations for sup-type scans. A single dyadic grid
/// has cubes that never straddle the coordinate planes, so a truncated sup
/// over it can miss the attaining cube entirely; the three shifted grids
/// per axis restore the property that every box is well-covered by some
/// family cube of comparable size.
fn shift_combos(dim: usize) -> Vec<Vec<f64>> {
    let offsets = [0.0, 1.0 / 3.0, 2.0 / 3.0];
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim];
    loop {
        out.push(idx.iter().map(|&i| offsets[i]).collect());
        let mut ax = 0;
        loop {
            if ax == dim {
                return out;
            }
            idx[ax] += 1;
            if idx[ax] < 3 {
                break;
            }
            idx[ax] = 0;
            ax += 1;
        }
    }
}

fn morrey_norm(g: &SampledField, u: f64, p: f64, trunc: TruncationConfig) -> f64 {
    let dim = g.grid.dim;
    let table = abs_power_table(g, p);
    let j_lo = clamp_level(g, trunc.j_min);
    let exponent = 1.0 / u - 1.0 / p; // ≤ 0
    let mut best = 0.0f64;
    for alpha in shift_combos(dim) {
        for j in j_lo..=trunc.j_max {
            for_each_shifted_cube(dim, g.grid.half_width, j, &alpha, |lo, side| {
                let mut hi = [0.0f64; 3];
                for ax in 0..dim {
                    hi[ax] = lo[ax] + side;
                }
                let mass = table.box_integral(&lo[..dim], &hi[..dim]);
                if mass > 0.0 {
                    let vol = side.powi(dim as i32);
                    let q = vol.powf(exponent) * mass.powf(1.0 / p);
                    if q > best {
                        best = q;
                    }
                }
            });
        }
    }
    // Sub-cell closed form: on piecewise-constant data, every cube with
    // side ≤ Δ inside cell i scores |g_i|·|Q|^{1/u}, maximized by the cell
    // itself.
    let subcell = g.max_abs() * g.grid.cell_volume().powf(1.0 / u);
    best.max(subcell)
}

/// Per-level sums Σ_m quotient^r over the plain dyadic grid; shared by the
/// two sum-type cube norms.
fn dyadic_level_sums(
    g: &SampledField,
    u: f64,
    p: f64,
    r: f64,
    j_range: std::ops::RangeInclusive<i32>,
) -> Vec<f64> {
    let dim = g.grid.dim;
    let table = abs_power_table(g, p);
    let exponent = 1.0 / u - 1.0 / p;
    let alpha = vec![0.0; dim];
    let mut out = Vec::new();
    for j in j_range {
        let mut level = 0.0;
        for_each_shifted_cube(dim, g.grid.half_width, j, &alpha, |lo, side| {
            let mut hi = [0.0f64; 3];
            for ax in 0..dim {
                hi[ax] = lo[ax] + side;
            }
            let mass = table.box_integral(&lo[..dim], &hi[..dim]);
            if mass > 0.0 {
                let vol = side.powi(dim as i32);
                level += (vol.powf(exponent) * mass.powf(1.0 / p)).powf(r);
            }
        });
        out.push(level);
    }
    out
}

fn bourgain_morrey_norm(g: &SampledField, u: f64, p: f64, r: f64, trunc: TruncationConfig) -> f64 {
    let j_lo = clamp_level(g, trunc.j_min);
    let sums = dyadic_level_sums(g, u, p, r, j_lo..=trunc.j_max);
    sums.iter().sum::<f64>().powf(1.0 / r)
}

fn besov_bourgain_morrey_norm(
    g: &SampledField,
    u: f64,
    p: f64,
    r: f64,
    tau: f64,
    trunc: TruncationConfig,
) -> f64 {
    let j_lo = clamp_level(g, trunc.j_min);
    let sums = dyadic_level_sums(g, u, p, r, j_lo..=trunc.j_max);
    sums.iter()
        .map(|level| level.powf(1.0 / r).powf(tau))
        .sum::<f64>()
        .powf(1.0 / tau)
}

/// Relative size of the sub-cell tail dropped by the level clamp in the
/// cube-sum norms, estimated by computing the next two levels exactly and
/// extrapolating their geometric decay. Returns the estimated relative
/// increase of the norm had the sum continued to j → −∞ (+∞ if the level
/// contributions do not decay).
pub fn bourgain_morrey_tail_estimate(
    g: &SampledField,
    u: f64,
    p: f64,
    r: f64,
    trunc: TruncationConfig,
) -> Result<f64> {
    if !(1.0 <= p && p <= u && u <= r) {
        return Err(Error::InvalidParameter(format!(
            "tail estimate needs 1 ≤ p ≤ u ≤ r, got (u={u}, p={p}, r={r})"
        )));
    }
    let j_lo = clamp_level(g, trunc.j_min);
    let body: f64 = dyadic_level_sums(g, u, p, r, j_lo..=trunc.j_max)
        .iter()
        .sum();
    if body == 0.0 {
        return Ok(0.0);
    }
    let below = dyadic_level_sums(g, u, p, r, (j_lo - 2)..=(j_lo - 1));
    let (c2, c1) = (below[0], below[1]);
    if c1 == 0.0 {
        return Ok(0.0);
    }
    let rho = c2 / c1;
    if rho >= 1.0 {
        return Ok(f64::INFINITY);
    }
    let tail = c1 / (1.0 - rho);
    Ok(((body + tail) / body).powf(1.0 / r) - 1.0)
}

// ---------------------------------------------------------------------------
// Annuli and slices.
// ---------------------------------------------------------------------------

fn herz_norm(g: &SampledField, p: f64, r: f64, a: f64, center: &[f64]) -> Result<f64> {
    let dim = g.grid.dim;
    let xi: Vec<f64> = if center.is_empty() {
        vec![0.0; dim]
    } else {
        if center.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: center.len(),
            });
        }
        center.to_vec()
    };
    // Assign each cell to the annulus 2^{k-1} ≤ |x−ξ| < 2^k of its center.
    let vol = g.grid.cell_volume();
    let mut x = [0.0f64; 3];
    let mut per_k: std::collections::BTreeMap<i32, f64> = std::collections::BTreeMap::new();
    for (i, v) in g.values.iter().enumerate() {
        if *v == 0.0 {
            continue;
        }
        g.grid.point_of(i, &mut x);
        let dist = x[..dim]
            .iter()
            .zip(xi.iter())
            .map(|(xv, c)| (xv - c) * (xv - c))
            .sum::<f64>()
            .sqrt();
        if dist == 0.0 {
            return Err(Error::Precondition(
                "sample exactly at the annulus center — grid misaligned".into(),
            ));
        }
        let k = dist.log2().floor() as i32 + 1;
        *per_k.entry(k).or_insert(0.0) += v.abs().powf(p) * vol;
    }
    let mut acc = 0.0;
    for (k, mass) in per_k {
        let norm_k = mass.powf(1.0 / p);
        acc += (2f64.powi(k).powf(a) * norm_k).powf(r);
    }
    Ok(acc.powf(1.0 / r))
}

fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI / 3.0,
    }
}

fn orlicz_slice_norm(g: &SampledField, r: f64, t: f64, phi: &OrliczSpec) -> Result<f64> {
    let dim = g.grid.dim;
    let n = g.grid.points_per_axis;
    let h = g.grid.spacing();
    let vol = g.grid.cell_volume();
    let ball_vol = unit_ball_volume(dim) * t.powi(dim as i32);
    // ‖1_{B(x,t)}‖_Φ = 1/Φ^{-1}(1/|B|), the same for every center.
    let denom = 1.0 / phi.inverse(1.0 / ball_vol);

    // Precompute the offset mask of cells within distance t of a center.
    let reach = (t / h).ceil() as i64 + 1;
    let mut mask: Vec<(i64, i64, i64)> = Vec::new();
    let rng = |_: usize| -reach..=reach;
    for di in rng(0) {
        for dj in if dim >= 2 { rng(1) } else { 0..=0 } {
            for dk in if dim >= 3 { rng(2) } else { 0..=0 } {
                let d2 = (di * di + if dim >= 2 { dj * dj } else { 0 }
                    + if dim >= 3 { dk * dk } else { 0 }) as f64
                    * h
                    * h;
                if d2.sqrt() <= t {
                    mask.push((di, dj, dk));
                }
            }
        }
    }

    let strides: [usize; 3] = match dim {
        1 => [1, 0, 0],
        2 => [n, 1, 0],
        _ => [n * n, n, 1],
    };
    let idx_of = |c: &[i64]| -> Option<usize> {
        let mut flat = 0usize;
        for ax in 0..dim {
            if c[ax] < 0 || c[ax] >= n as i64 {
                return None;
            }
            flat += c[ax] as usize * strides[ax];
        }
        Some(flat)
    };

    let fast_power = matches!(phi, OrliczSpec::Power { .. });
    let p_fast = if let OrliczSpec::Power { p } = phi { *p } else { 0.0 };

    let mut acc = 0.0;
    let mut cidx = [0i64; 3];
    let mut local: Vec<f64> = Vec::with_capacity(mask.len());
    for i in 0..g.values.len() {
        // decode i into per-axis indices
        let mut rem = i;
        for ax in (0..dim).rev() {
            cidx[ax] = (rem % n) as i64;
            rem /= n;
        }
        local.clear();
        for (di, dj, dk) in &mask {
            let c = [cidx[0] + di, cidx[1] + dj, cidx[2] + dk];
            if let Some(flat) = idx_of(&c[..dim]) {
                let v = g.values[flat].abs();
                if v > 0.0 {
                    local.push(v);
                }
            }
        }
        if local.is_empty() {
            continue;
        }
        let num = if fast_power {
            // ‖f‖_{L^Φ(B)} for Φ = t^p is the plain L^p norm over the ball.
            (local.iter().map(|v| v.powf(p_fast)).sum::<f64>() * vol).powf(1.0 / p_fast)
        } else {
            let modular =
                |lam: f64| -> f64 { local.iter().map(|v| phi.eval(v / lam)).sum::<f64>() * vol };
            let scale = local.iter().cloned().fold(0.0f64, f64::max);
            luxemburg_bisect(modular, scale, "orlicz slice local norm")?
        };
        acc += (num / denom).powf(r) * vol;
    }
    Ok(acc.powf(1.0 / r))
}
