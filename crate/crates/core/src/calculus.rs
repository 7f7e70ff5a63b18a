//! Finite differences, gradient magnitudes, and the directional symbol.
//!
//! Everything downstream is built on the k-th order forward difference
//!
//! ```text
//! Δ^k_h f(x) = Σ_{j=0}^{k} (-1)^{k-j} C(k,j) f(x + j h),
//! ```
//!
//! its small-step expansion Δ^k_{rξ} f(x) = r^k D_k f(x; ξ) + O(r^{k+1})
//! with the directional symbol D_k f(x; ξ) = Σ_{|α|=k} (k!/α!) ∂^α f(x) ξ^α,
//! and the pointwise gradient magnitude |∇^k f| = (Σ_{|α|=k} |∂^α f|²)^{1/2}.
//!
//! The weighting of the symbol (multinomial k!/α! versus none) is a design
//! question this crate settles empirically: [`limit_symbol_oracle`] fits the
//! small-step residual of Δ^k against both candidates and reports which one
//! the difference quotients actually converge to.

use crate::error::{Error, Result};
use crate::field::AnalyticField;
use crate::num::{
    binomial_u64, gauss_legendre_on, linear_fit, log_midpoint_nodes, multi_indices_of_order,
    multinomial_weight, sphere_directions, MAX_EXACT_BINOMIAL,
};
use serde::{Deserialize, Serialize};

/// k-th forward difference Δ^k_h f(x) with exact integer binomials.
///
/// `k = 0` returns `f(x)`. Orders above 62 would overflow the exact
/// binomial table and are rejected.
pub fn forward_difference(
    f: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    h: &[f64],
    k: u32,
) -> Result<f64> {
    if k > MAX_EXACT_BINOMIAL {
        return Err(Error::OrderTooLarge(k));
    }
    if x.len() != h.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: h.len(),
        });
    }
    let mut acc = 0.0;
    let mut y = [0.0f64; 3];
    for j in 0..=k {
        for (yi, (xi, hi)) in y.iter_mut().zip(x.iter().zip(h.iter())) {
            *yi = xi + j as f64 * hi;
        }
        let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binomial_u64(k, j) as f64 * f(&y[..x.len()]);
    }
    Ok(acc)
}

/// Two-point difference Δ^k_{x,y} f = Δ^k_{(y-x)/k} f(x), the form used when
/// the two endpoints rather than the step are the natural data.
pub fn symmetric_difference(
    f: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    y: &[f64],
    k: u32,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "two-point difference needs order k ≥ 1".into(),
        ));
    }
    let mut h = [0.0f64; 3];
    for (hi, (xi, yi)) in h.iter_mut().zip(x.iter().zip(y.iter())) {
        *hi = (yi - xi) / k as f64;
    }
    forward_difference(f, x, &h[..x.len()], k)
}

/// Pointwise k-th gradient magnitude |∇^k f|(x) = (Σ_{|α|=k} |∂^α f|²)^{1/2}.
///
/// Order 0 is |f(x)| itself.
pub fn gradient_magnitude(f: &AnalyticField, k: u32, x: &[f64]) -> Result<f64> {
    if k == 0 {
        return Ok(f.eval(x).abs());
    }
    let mut sq = 0.0;
    for alpha in multi_indices_of_order(f.dim(), k) {
        let d = f.partial(&alpha, x)?;
        sq += d * d;
    }
    Ok(sq.sqrt())
}

/// Which polynomial weighting the directional symbol carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolWeighting {
    /// Σ_{|α|=k} ∂^α f ξ^α
    Plain,
    /// Σ_{|α|=k} (k!/α!) ∂^α f ξ^α — the weighting difference quotients
    /// actually produce.
    Multinomial,
}

/// Directional symbol Σ_{|α|=k} w_α ∂^α f(x) ξ^α with the chosen weighting.
pub fn directional_symbol(
    f: &AnalyticField,
    k: u32,
    x: &[f64],
    xi: &[f64],
    weighting: SymbolWeighting,
) -> Result<f64> {
    let mut acc = 0.0;
    for alpha in multi_indices_of_order(f.dim(), k) {
        let mut mono = 1.0;
        for (xv, &a) in xi.iter().zip(alpha.iter()) {
            if a > 0 {
                mono *= xv.powi(a as i32);
            }
        }
        if mono == 0.0 {
            continue;
        }
        let w = match weighting {
            SymbolWeighting::Plain => 1.0,
            SymbolWeighting::Multinomial => multinomial_weight(&alpha),
        };
        acc += w * f.partial(&alpha, x)? * mono;
    }
    Ok(acc)
}

/// Outcome of the small-step symbol experiment at one point/direction.
#[derive(Debug, Clone, Serialize)]
pub struct SymbolOracleReport {
    /// Extrapolated limit of Δ^k_{rξ} f(x) / r^k as r → 0.
    pub extrapolated_limit: f64,
    /// Closed-form symbol with multinomial weights.
    pub multinomial_prediction: f64,
    /// Closed-form symbol without weights.
    pub plain_prediction: f64,
    /// log–log slope of |quotient − multinomial_prediction| against r
    /// (≈ 1 when the residual vanishes linearly, ≈ 0 when it stalls).
    pub multinomial_residual_slope: f64,
    /// Same slope against the plain-weighted candidate.
    pub plain_residual_slope: f64,
    /// The weighting the data converged to.
    pub winner: SymbolWeighting,
}

/// Decide empirically which weighting the difference-quotient symbol has.
///
/// Evaluates q(r) = Δ^k_{rξ} f(x) / r^k on a geometric radius ladder,
/// Richardson-extrapolates the r → 0 limit, and fits the residual decay
/// against both closed-form candidates. The candidate with the residual
/// that keeps shrinking (slope bounded away from zero, final residual
/// smaller) wins.
pub fn limit_symbol_oracle(
    f: &AnalyticField,
    k: u32,
    x: &[f64],
    xi: &[f64],
) -> Result<SymbolOracleReport> {
    let multinomial = directional_symbol(f, k, x, xi, SymbolWeighting::Multinomial)?;
    let plain = directional_symbol(f, k, x, xi, SymbolWeighting::Plain)?;
    // Geometric ladder r = r0 / 2^i. Kept deliberately shallow: the k-th
    // difference cancels ~k·log10(1/r) digits, so descending much below
    // 1e-3 buries the quotient in roundoff before the fit can see it.
    let r0 = 0.2;
    let rho = 0.5f64;
    let steps = 8usize;
    let mut h = [0.0f64; 3];
    let mut rs = Vec::with_capacity(steps);
    let mut quotients = Vec::with_capacity(steps);
    for i in 0..steps {
        let r = r0 * rho.powi(i as i32);
        for (hi, v) in h.iter_mut().zip(xi.iter()) {
            *hi = r * v;
        }
        let d = forward_difference(&|y| f.eval(y), x, &h[..x.len()], k)?;
        rs.push(r);
        quotients.push(d / r.powi(k as i32));
    }
    // Two-level Richardson for q(r) = L + a r + b r² + O(r³) on a
    // halving ladder: first level kills the linear term, second the
    // quadratic one. Average the two finest second-level values.
    let l1: Vec<f64> = (0..steps - 1)
        .map(|i| 2.0 * quotients[i + 1] - quotients[i])
        .collect();
    let l2: Vec<f64> = (0..l1.len() - 1)
        .map(|i| (4.0 * l1[i + 1] - l1[i]) / 3.0)
        .collect();
    let extrapolated = (l2[l2.len() - 1] + l2[l2.len() - 2]) / 2.0;

    let scale = quotients
        .iter()
        .fold(1e-30f64, |m, q| m.max(q.abs()))
        .max(multinomial.abs())
        .max(plain.abs());
    let slope_against = |target: f64| -> f64 {
        let mut lx = Vec::new();
        let mut ly = Vec::new();
        for (r, q) in rs.iter().zip(quotients.iter()) {
            let res = (q - target).abs();
            // Ignore points at the roundoff floor; they carry no decay
            // information and would corrupt the slope.
            if res > 1e-10 * scale {
                lx.push(r.ln());
                ly.push(res.ln());
            }
        }
        if lx.len() < 3 {
            // Residual at roundoff everywhere: converged exactly.
            return f64::INFINITY;
        }
        linear_fit(&lx, &ly).0
    };
    let ms = slope_against(multinomial);
    let ps = slope_against(plain);
    let final_res_m = (quotients[steps - 1] - multinomial).abs();
    let final_res_p = (quotients[steps - 1] - plain).abs();
    let winner = if ms > ps.max(0.5) || (ms.is_infinite() && final_res_m <= final_res_p) {
        SymbolWeighting::Multinomial
    } else if ps > ms.max(0.5) || (ps.is_infinite() && final_res_p < final_res_m) {
        SymbolWeighting::Plain
    } else if final_res_m <= final_res_p {
        SymbolWeighting::Multinomial
    } else {
        SymbolWeighting::Plain
    };
    Ok(SymbolOracleReport {
        extrapolated_limit: extrapolated,
        multinomial_prediction: multinomial,
        plain_prediction: plain,
        multinomial_residual_slope: ms,
        plain_residual_slope: ps,
        winner,
    })
}

/// Truncated strong seminorm
///
/// ```text
/// S(x) = [ ∫_{ε ≤ |h| ≤ R} |Δ^k_h f(x)|^q / |h|^{n + s q} dh ]^{1/q}
/// ```
///
/// by polar quadrature: a log-midpoint radial grid times a fixed direction
/// set. Returns the pointwise value at `x`.
pub fn strong_seminorm_at(
    f: &AnalyticField,
    k: u32,
    s: f64,
    q: f64,
    x: &[f64],
    eps: f64,
    big_r: f64,
    directions: usize,
    radial_per_decade: usize,
) -> Result<f64> {
    if !(q > 0.0) || !s.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "strong seminorm needs q > 0 (got {q}) and finite s (got {s})"
        )));
    }
    if !(0.0 < eps && eps < big_r) {
        return Err(Error::InvalidParameter(format!(
            "radial window needs 0 < eps < R, got ({eps}, {big_r})"
        )));
    }
    let dim = f.dim();
    let dirs = sphere_directions(dim, directions);
    let (radii, dln) = log_midpoint_nodes(eps, big_r, radial_per_decade);
    // Differences below the cancellation noise of the k-th difference are
    // numerically zero; dividing them by r^{n+sq} would otherwise inject
    // spurious mass at small radii.
    let reach = x.iter().fold(0.0f64, |m, c| m.max(c.abs())) + k as f64 * big_r;
    let diff_bound = 2f64.powi(k as i32) * f.sup_abs_bound(reach) * 1.2;
    let noise_floor = if diff_bound.is_finite() {
        diff_bound * 1e-13
    } else {
        0.0
    };
    let mut acc = 0.0;
    let mut h = [0.0f64; 3];
    for (d, w) in &dirs {
        for &r in &radii {
            for (hi, di) in h.iter_mut().zip(d.iter()) {
                *hi = r * di;
            }
            let diff = forward_difference(&|y| f.eval(y), x, &h[..dim], k)?;
            if diff.abs() <= noise_floor {
                continue;
            }
            // dh = r^{n-1} dr dσ, dr = r dln  ⇒ weight r^n dln dσ;
            // combined with |h|^{-n-sq} this is r^{-sq} dln dσ.
            acc += diff.abs().powf(q) * r.powf(-s * q) * dln * w;
        }
    }
    Ok(acc.powf(1.0 / q))
}

/// Normalized B-spline kernel M_k (Curry–Schoenberg form): the density of a
/// sum of k independent uniform [0,1] variables,
/// M_k(t) = (1/(k-1)!) Σ_j (-1)^j C(k,j) (t-j)_+^{k-1}, supported on [0,k].
#[derive(Debug, Clone)]
pub struct SplineKernel {
    k: u32,
}

impl SplineKernel {
    pub fn new(k: u32) -> Result<Self> {
        if k == 0 || k > 20 {
            return Err(Error::InvalidParameter(format!(
                "spline kernel order must be 1..=20, got {k}"
            )));
        }
        Ok(Self { k })
    }

    pub fn order(&self) -> u32 {
        self.k
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = self.k;
        if t <= 0.0 || t >= k as f64 {
            return 0.0;
        }
        if k == 1 {
            return 1.0;
        }
        let mut acc = 0.0;
        for j in 0..=k {
            let u = t - j as f64;
            if u <= 0.0 {
                break;
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binomial_u64(k, j) as f64 * u.powi(k as i32 - 1);
        }
        acc / crate::num::factorial_f64(k - 1)
    }

    /// ∫_0^k M_k = 1, by Gauss–Legendre per unit interval (the kernel is a
    /// polynomial on each).
    pub fn mass(&self) -> f64 {
        let (nodes, weights) = gauss_legendre_on(16, 0.0, 1.0);
        let mut acc = 0.0;
        for j in 0..self.k {
            for (t, w) in nodes.iter().zip(weights.iter()) {
                acc += self.eval(j as f64 + t) * w;
            }
        }
        acc
    }
}

/// Residual of the kernel representation of the k-th difference:
///
/// ```text
/// Δ^k_{rξ} f(x) = r^k ∫_0^k M_k(t) D_k f(x + t r ξ; ξ) dt
/// ```
///
/// with D_k the multinomial-weighted directional symbol (whose k!/α!
/// weights absorb the usual factorial normalization). Returns the
/// relative residual |lhs − rhs| / max(|lhs|, |rhs|, floor).
pub fn spline_identity_residual(
    f: &AnalyticField,
    k: u32,
    x: &[f64],
    xi: &[f64],
    r: f64,
) -> Result<f64> {
    let kernel = SplineKernel::new(k)?;
    let dim = f.dim();
    let mut h = [0.0f64; 3];
    for (hi, v) in h.iter_mut().zip(xi.iter()) {
        *hi = r * v;
    }
    let lhs = forward_difference(&|y| f.eval(y), x, &h[..dim], k)?;
    // Composite Gauss–Legendre over each unit interval of [0, k]: the
    // integrand is smooth there (M_k is piecewise polynomial with knots at
    // the integers).
    let (nodes, weights) = gauss_legendre_on(24, 0.0, 1.0);
    let mut integral = 0.0;
    let mut y = [0.0f64; 3];
    for j in 0..k {
        for (t0, w) in nodes.iter().zip(weights.iter()) {
            let t = j as f64 + t0;
            for (yi, (xv, v)) in y.iter_mut().zip(x.iter().zip(xi.iter())) {
                *yi = xv + t * r * v;
            }
            let sym = directional_symbol(f, k, &y[..dim], xi, SymbolWeighting::Multinomial)?;
            integral += kernel.eval(t) * sym * w;
        }
    }
    let rhs = r.powi(k as i32) * integral;
    let scale = lhs.abs().max(rhs.abs()).max(1e-12);
    Ok((lhs - rhs).abs() / scale)
}
