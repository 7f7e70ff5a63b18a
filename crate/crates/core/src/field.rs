//! Function catalog and sampling grids.
//!
//! The laboratory works with two representations of a scalar function on ℝⁿ
//! (n ≤ 3):
//!
//! * [`AnalyticField`] — a catalog entry with pointwise evaluation and
//!   closed-form partial derivatives (exact except where explicitly flagged);
//! * [`SampledField`] — values on a uniform cell-center grid over a centered
//!   box, the common currency of every norm computation.
//!
//! Catalog entries are pure and deterministic; differences and level-set
//! scans may evaluate them far outside the sampling box.

use crate::error::{Error, Result};
use crate::num::{
    multi_indices_up_to, MultiPoly, SmoothTransition, MAX_TRANSITION_DERIV,
};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Highest derivative order precomputed for Gaussian-type entries.
const MAX_GAUSSIAN_ORDER: u32 = 8;

/// Uniform cell-center grid on the box `[-half_width, half_width]^dim`.
///
/// Values are stored row-major with axis 0 slowest. Cell centers sit at
/// `-L + (i + 1/2)·Δ`, so no sample ever lies on a coordinate plane (the
/// even-count requirement below keeps it that way), which matters when
/// weights with a singularity at the origin multiply sampled data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub points_per_axis: usize,
    pub half_width: f64,
}

impl GridSpec {
    pub fn new(dim: usize, points_per_axis: usize, half_width: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!(
                "grid dimension must be 1..=3, got {dim}"
            )));
        }
        if points_per_axis < 4 || points_per_axis % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "points per axis must be even and ≥ 4, got {points_per_axis}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "half width must be positive and finite, got {half_width}"
            )));
        }
        Ok(Self {
            dim,
            points_per_axis,
            half_width,
        })
    }

    /// Grid spacing Δ = 2L / N.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points_per_axis as f64
    }

    /// Volume of one cell, Δ^dim.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Total number of grid points, N^dim.
    pub fn total_points(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    /// Cell-center coordinate along one axis.
    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.spacing()
    }

    /// Write the coordinates of the flat `index` into `out[..dim]`.
    pub fn point_of(&self, index: usize, out: &mut [f64]) {
        let n = self.points_per_axis;
        let mut rem = index;
        for ax in (0..self.dim).rev() {
            out[ax] = self.axis_coord(rem % n);
            rem /= n;
        }
    }

    /// Grid with every resolution doubled (same box).
    pub fn doubled(&self) -> Self {
        Self {
            points_per_axis: self.points_per_axis * 2,
            ..*self
        }
    }
}

/// A function sampled at the cell centers of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl SampledField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.total_points() {
            return Err(Error::DimensionMismatch {
                expected: grid.total_points(),
                actual: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    /// Largest |value| on the grid.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Sample a pointwise expression at every cell center (visited in
/// deterministic row-major order, so stateful closures are well-defined).
pub fn sample_fn(grid: GridSpec, mut f: impl FnMut(&[f64]) -> f64) -> SampledField {
    let mut values = Vec::with_capacity(grid.total_points());
    let mut x = [0.0f64; 3];
    for i in 0..grid.total_points() {
        grid.point_of(i, &mut x);
        values.push(f(&x[..grid.dim]));
    }
    SampledField { grid, values }
}

/// Sample a catalog function at every cell center.
pub fn sample(f: &AnalyticField, grid: GridSpec) -> Result<SampledField> {
    if f.dim() != grid.dim {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            actual: grid.dim,
        });
    }
    Ok(sample_fn(grid, |x| f.eval(x)))
}

// ---------------------------------------------------------------------------
// Catalog construction.
// ---------------------------------------------------------------------------

/// One monomial term of a polynomial catalog entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolyTerm {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

/// Declarative description of a catalog function (the `[function]` section
/// of a scenario config).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    /// One of `polynomial`, `gaussian_bump`, `windowed_sinusoid`,
    /// `mollified_indicator`.
    pub id: String,
    pub dim: usize,
    /// Gaussian width (default 1).
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Monomial prefactor exponents for the Gaussian bump (default all zero).
    #[serde(default)]
    pub monomial: Option<Vec<u32>>,
    /// Sinusoid frequency vector (default all ones).
    #[serde(default)]
    pub omega: Option<Vec<f64>>,
    /// Sinusoid phase (default 0).
    #[serde(default)]
    pub phase: Option<f64>,
    /// Window is ≡ 1 for |x_i| ≤ window_inner (default 3).
    #[serde(default)]
    pub window_inner: Option<f64>,
    /// Window is ≡ 0 for |x_i| ≥ window_outer (default 4.5).
    #[serde(default)]
    pub window_outer: Option<f64>,
    /// Terms of a polynomial entry.
    #[serde(default)]
    pub terms: Option<Vec<PolyTerm>>,
    /// Replace f by f(a·).
    #[serde(default = "default_dilation")]
    pub dilation: f64,
}

fn default_dilation() -> f64 {
    1.0
}

/// Build a catalog function from its declarative spec.
pub fn make_catalog_function(spec: &FunctionSpec) -> Result<AnalyticField> {
    if !(1..=3).contains(&spec.dim) {
        return Err(Error::InvalidParameter(format!(
            "function dimension must be 1..=3, got {}",
            spec.dim
        )));
    }
    let base = match spec.id.as_str() {
        "polynomial" => {
            let terms = spec.terms.clone().ok_or_else(|| {
                Error::InvalidParameter("polynomial entry needs `terms`".into())
            })?;
            let mut t = Vec::with_capacity(terms.len());
            for pt in terms {
                if pt.exponents.len() != spec.dim {
                    return Err(Error::DimensionMismatch {
                        expected: spec.dim,
                        actual: pt.exponents.len(),
                    });
                }
                t.push((pt.exponents, pt.coeff));
            }
            AnalyticField::polynomial(spec.dim, t)
        }
        "gaussian_bump" => {
            let sigma = spec.sigma.unwrap_or(1.0);
            let monomial = spec.monomial.clone().unwrap_or_else(|| vec![0; spec.dim]);
            AnalyticField::gaussian_bump(spec.dim, sigma, monomial)?
        }
        "windowed_sinusoid" => {
            let omega = spec.omega.clone().unwrap_or_else(|| vec![1.0; spec.dim]);
            let phase = spec.phase.unwrap_or(0.0);
            let inner = spec.window_inner.unwrap_or(3.0);
            let outer = spec.window_outer.unwrap_or(4.5);
            AnalyticField::windowed_sinusoid(spec.dim, omega, phase, inner, outer)?
        }
        "mollified_indicator" => AnalyticField::mollified_indicator(spec.dim),
        other => return Err(Error::UnknownCatalog(other.into())),
    };
    if !(spec.dilation > 0.0) || !spec.dilation.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "dilation must be positive and finite, got {}",
            spec.dilation
        )));
    }
    if spec.dilation == 1.0 {
        Ok(base)
    } else {
        base.dilate(spec.dilation)
    }
}

// ---------------------------------------------------------------------------
// AnalyticField.
// ---------------------------------------------------------------------------

/// A catalog function with pointwise evaluation and partial derivatives.
///
/// Cloning is cheap (shared immutable payload), and all evaluators are pure,
/// so fields can be used freely from parallel sweeps.
#[derive(Debug, Clone)]
pub struct AnalyticField {
    kind: Arc<FieldKind>,
}

#[derive(Debug)]
enum FieldKind {
    Polynomial {
        poly: MultiPoly,
    },
    /// x^μ · exp(-|x|²/σ²); partial derivatives stay in the form
    /// P(x)·exp(-|x|²/σ²), precomputed by the recursion
    /// P_{α+e_i} = ∂_i P_α - (2 x_i / σ²) P_α.
    GaussianBump {
        sigma: f64,
        monomial: Vec<u32>,
        /// Partial-derivative polynomials indexed alongside `deriv_index`.
        derivs: Vec<MultiPoly>,
        deriv_index: Vec<Vec<u32>>,
    },
    /// sin(ω·x + φ) · Π_i v(x_i) with v a C^∞ cutoff, ≡1 for |t| ≤ inner,
    /// ≡0 for |t| ≥ outer. Derivatives by the per-axis Leibniz rule.
    WindowedSinusoid {
        omega: Vec<f64>,
        phase: f64,
        inner: f64,
        outer: f64,
        window: SmoothTransition,
    },
    /// The smoothed indicator η₂ * 1_{B(0,1)} with η₂ = 2ⁿ η(2·),
    /// η(x) = c·exp(-1/(1-|x|²)) normalized to unit mass. Radial, ≡1 on
    /// |x| ≤ 1/2 and ≡0 on |x| ≥ 3/2 exactly; evaluated from a fixed-
    /// resolution convolution table, derivatives flagged approximate.
    MollifiedIndicator {
        dim: usize,
        profile: RadialProfile,
    },
    /// f(a·) for a catalog base.
    Dilated {
        base: AnalyticField,
        a: f64,
    },
}

impl AnalyticField {
    /// Polynomial Σ c_α x^α. Derivatives are exact for every order.
    pub fn polynomial(dim: usize, terms: Vec<(Vec<u32>, f64)>) -> Self {
        Self {
            kind: Arc::new(FieldKind::Polynomial {
                poly: MultiPoly::new(dim, terms),
            }),
        }
    }

    /// x^μ exp(-|x|²/σ²) with exact derivatives up to order 8.
    pub fn gaussian_bump(dim: usize, sigma: f64, monomial: Vec<u32>) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gaussian width must be positive, got {sigma}"
            )));
        }
        if monomial.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: monomial.len(),
            });
        }
        let deriv_index = multi_indices_up_to(dim, MAX_GAUSSIAN_ORDER);
        let mut derivs: Vec<MultiPoly> = Vec::with_capacity(deriv_index.len());
        let inv_s2 = 1.0 / (sigma * sigma);
        for alpha in &deriv_index {
            let order: u32 = alpha.iter().sum();
            if order == 0 {
                derivs.push(MultiPoly::new(
                    dim,
                    vec![(monomial.clone(), 1.0)],
                ));
                continue;
            }
            // Reduce along the first active axis; mixed partials commute.
            let axis = alpha.iter().position(|&a| a > 0).unwrap();
            let mut prev = alpha.clone();
            prev[axis] -= 1;
            let pos = deriv_index.iter().position(|e| e == &prev).unwrap();
            let p = &derivs[pos];
            let next = p.partial(axis).add_monomial_multiple(p, axis, -2.0 * inv_s2);
            derivs.push(next);
        }
        Ok(Self {
            kind: Arc::new(FieldKind::GaussianBump {
                sigma,
                monomial,
                derivs,
                deriv_index,
            }),
        })
    }

    /// sin(ω·x + φ) multiplied by a per-axis C^∞ window.
    pub fn windowed_sinusoid(
        dim: usize,
        omega: Vec<f64>,
        phase: f64,
        inner: f64,
        outer: f64,
    ) -> Result<Self> {
        if omega.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: omega.len(),
            });
        }
        if !(0.0 < inner && inner < outer) || !outer.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "window needs 0 < inner < outer, got ({inner}, {outer})"
            )));
        }
        Ok(Self {
            kind: Arc::new(FieldKind::WindowedSinusoid {
                omega,
                phase,
                inner,
                outer,
                window: SmoothTransition::new(inner, outer),
            }),
        })
    }

    /// The smoothed ball indicator (see [`FieldKind::MollifiedIndicator`]).
    pub fn mollified_indicator(dim: usize) -> Self {
        Self {
            kind: Arc::new(FieldKind::MollifiedIndicator {
                dim,
                profile: RadialProfile::build(dim),
            }),
        }
    }

    /// The dilation f(a·).
    pub fn dilate(&self, a: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dilation must be positive and finite, got {a}"
            )));
        }
        Ok(Self {
            kind: Arc::new(FieldKind::Dilated {
                base: self.clone(),
                a,
            }),
        })
    }

    pub fn dim(&self) -> usize {
        match &*self.kind {
            FieldKind::Polynomial { poly } => poly.dim,
            FieldKind::GaussianBump { monomial, .. } => monomial.len(),
            FieldKind::WindowedSinusoid { omega, .. } => omega.len(),
            FieldKind::MollifiedIndicator { dim, .. } => *dim,
            FieldKind::Dilated { base, .. } => base.dim(),
        }
    }

    /// A short identifier for reports.
    pub fn id(&self) -> String {
        match &*self.kind {
            FieldKind::Polynomial { poly } => format!("polynomial(deg {})", poly.degree()),
            FieldKind::GaussianBump { sigma, monomial, .. } => {
                if monomial.iter().all(|&m| m == 0) {
                    format!("gaussian_bump(sigma {sigma})")
                } else {
                    format!("gaussian_bump(sigma {sigma}, monomial {monomial:?})")
                }
            }
            FieldKind::WindowedSinusoid { omega, .. } => {
                format!("windowed_sinusoid(omega {omega:?})")
            }
            FieldKind::MollifiedIndicator { .. } => "mollified_indicator".into(),
            FieldKind::Dilated { base, a } => format!("{} @ dilation {a}", base.id()),
        }
    }

    /// Highest derivative order available through [`Self::partial`].
    pub fn max_derivative_order(&self) -> usize {
        match &*self.kind {
            FieldKind::Polynomial { .. } => usize::MAX,
            FieldKind::GaussianBump { .. } => MAX_GAUSSIAN_ORDER as usize,
            FieldKind::WindowedSinusoid { .. } => MAX_TRANSITION_DERIV,
            FieldKind::MollifiedIndicator { .. } => 2,
            FieldKind::Dilated { base, .. } => base.max_derivative_order(),
        }
    }

    /// Whether [`Self::partial`] is a closed form (false only for the
    /// mollified indicator, whose derivatives are finite differences of a
    /// tabulated profile).
    pub fn derivatives_exact(&self) -> bool {
        match &*self.kind {
            FieldKind::MollifiedIndicator { .. } => false,
            FieldKind::Dilated { base, .. } => base.derivatives_exact(),
            _ => true,
        }
    }

    /// Euclidean radius outside of which the function vanishes exactly
    /// (+∞ for entries with unbounded support).
    pub fn support_radius(&self) -> f64 {
        match &*self.kind {
            FieldKind::Polynomial { .. } | FieldKind::GaussianBump { .. } => f64::INFINITY,
            FieldKind::WindowedSinusoid { omega, outer, .. } => {
                outer * (omega.len() as f64).sqrt()
            }
            FieldKind::MollifiedIndicator { .. } => 1.5,
            FieldKind::Dilated { base, a } => base.support_radius() / a,
        }
    }

    /// Pointwise evaluation.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match &*self.kind {
            FieldKind::Polynomial { poly } => poly.eval(x),
            FieldKind::GaussianBump { sigma, monomial, .. } => {
                let mut r2 = 0.0;
                let mut mono = 1.0;
                for (xi, &mi) in x.iter().zip(monomial.iter()) {
                    r2 += xi * xi;
                    if mi > 0 {
                        mono *= xi.powi(mi as i32);
                    }
                }
                mono * (-r2 / (sigma * sigma)).exp()
            }
            FieldKind::WindowedSinusoid {
                omega,
                phase,
                window,
                ..
            } => {
                let mut arg = *phase;
                let mut win = 1.0;
                for (xi, wi) in x.iter().zip(omega.iter()) {
                    arg += xi * wi;
                    win *= window.value(xi.abs());
                    if win == 0.0 {
                        return 0.0;
                    }
                }
                arg.sin() * win
            }
            FieldKind::MollifiedIndicator { profile, .. } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                profile.value(r)
            }
            FieldKind::Dilated { base, a } => {
                let mut y = [0.0f64; 3];
                for (yi, xi) in y.iter_mut().zip(x.iter()) {
                    *yi = a * xi;
                }
                base.eval(&y[..x.len()])
            }
        }
    }

    /// Partial derivative ∂^α f at x.
    ///
    /// Errors with [`Error::DerivativeUnavailable`] above the entry's
    /// supported order.
    pub fn partial(&self, alpha: &[u32], x: &[f64]) -> Result<f64> {
        if alpha.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: alpha.len(),
            });
        }
        let order: u32 = alpha.iter().sum();
        if order == 0 {
            return Ok(self.eval(x));
        }
        if order as usize > self.max_derivative_order() {
            return Err(Error::DerivativeUnavailable {
                id: self.id(),
                requested: order as usize,
                available: self.max_derivative_order(),
            });
        }
        match &*self.kind {
            FieldKind::Polynomial { poly } => {
                let mut p = poly.clone();
                for (axis, &ai) in alpha.iter().enumerate() {
                    for _ in 0..ai {
                        p = p.partial(axis);
                    }
                }
                Ok(p.eval(x))
            }
            FieldKind::GaussianBump {
                sigma,
                derivs,
                deriv_index,
                ..
            } => {
                let pos = deriv_index
                    .iter()
                    .position(|e| e.as_slice() == alpha)
                    .expect("order already range-checked");
                let r2: f64 = x.iter().map(|v| v * v).sum();
                Ok(derivs[pos].eval(x) * (-r2 / (sigma * sigma)).exp())
            }
            FieldKind::WindowedSinusoid {
                omega,
                phase,
                window,
                ..
            } => Ok(sinusoid_partial(omega, *phase, window, alpha, x)),
            FieldKind::MollifiedIndicator { .. } => Ok(self.fd_partial(alpha, x)),
            FieldKind::Dilated { base, a } => {
                let mut y = [0.0f64; 3];
                for (yi, xi) in y.iter_mut().zip(x.iter()) {
                    *yi = a * xi;
                }
                Ok(a.powi(order as i32) * base.partial(alpha, &y[..x.len()])?)
            }
        }
    }

    /// Centered finite differences, used only by entries whose derivatives
    /// are flagged approximate.
    fn fd_partial(&self, alpha: &[u32], x: &[f64]) -> f64 {
        let axis = match alpha.iter().position(|&a| a > 0) {
            Some(ax) => ax,
            None => return self.eval(x),
        };
        let h = 5e-4;
        let mut lower = alpha.to_vec();
        lower[axis] -= 1;
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[axis] += h;
        xm[axis] -= h;
        let fp = if lower.iter().all(|&a| a == 0) {
            self.eval(&xp)
        } else {
            self.fd_partial(&lower, &xp)
        };
        let fm = if lower.iter().all(|&a| a == 0) {
            self.eval(&xm)
        } else {
            self.fd_partial(&lower, &xm)
        };
        (fp - fm) / (2.0 * h)
    }

    /// Upper envelope for ‖f‖_∞ over the given box, used to derive radial
    /// cutoffs in level-set scans. Exact for bounded catalog entries, a
    /// sampled over-estimate (×1.25) otherwise.
    pub fn sup_abs_bound(&self, half_width: f64) -> f64 {
        match &*self.kind {
            FieldKind::WindowedSinusoid { .. } => 1.0,
            FieldKind::MollifiedIndicator { .. } => 1.0,
            FieldKind::GaussianBump { monomial, .. } if monomial.iter().all(|&m| m == 0) => 1.0,
            FieldKind::Dilated { base, a } => base.sup_abs_bound(half_width * a),
            _ => {
                let n = if self.dim() <= 2 { 64 } else { 24 };
                let grid = GridSpec {
                    dim: self.dim(),
                    points_per_axis: n,
                    half_width,
                };
                let mut x = [0.0f64; 3];
                let mut m: f64 = 0.0;
                for i in 0..grid.total_points() {
                    grid.point_of(i, &mut x);
                    m = m.max(self.eval(&x[..self.dim()]).abs());
                }
                m * 1.25
            }
        }
    }
}

/// ∂^α of sin(ω·x+φ)·Π v(x_i) by the per-axis Leibniz rule:
/// the sinusoid contributes (Π ω^β) sin(ω·x + φ + |β|π/2), the window
/// factors differentiate independently per axis.
fn sinusoid_partial(
    omega: &[f64],
    phase: f64,
    window: &SmoothTransition,
    alpha: &[u32],
    x: &[f64],
) -> f64 {
    let dim = omega.len();
    // Per-axis window derivative tables v^{(m)}(x_i), m ≤ α_i.
    let mut wtab: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for ax in 0..dim {
        let t = x[ax];
        let mut col = Vec::with_capacity(alpha[ax] as usize + 1);
        for m in 0..=alpha[ax] as usize {
            // Even extension of the radial profile in |t|.
            let d = window.derivative(m, t.abs());
            let sign = if t < 0.0 && m % 2 == 1 { -1.0 } else { 1.0 };
            col.push(sign * d);
        }
        wtab.push(col);
    }
    let arg: f64 = phase + omega.iter().zip(x.iter()).map(|(w, xi)| w * xi).sum::<f64>();
    // Odometer over β ≤ α.
    let mut beta = vec![0u32; dim];
    let mut acc = 0.0;
    loop {
        let border: u32 = beta.iter().sum();
        let mut coef = 1.0;
        for ax in 0..dim {
            coef *= crate::num::binomial_u64(alpha[ax], beta[ax]) as f64;
            coef *= omega[ax].powi(beta[ax] as i32);
            coef *= wtab[ax][(alpha[ax] - beta[ax]) as usize];
        }
        if coef != 0.0 {
            let s = (arg + border as f64 * std::f64::consts::FRAC_PI_2).sin();
            acc += coef * s;
        }
        // Increment odometer.
        let mut ax = 0;
        loop {
            if ax == dim {
                return acc;
            }
            if beta[ax] < alpha[ax] {
                beta[ax] += 1;
                break;
            }
            beta[ax] = 0;
            ax += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Mollified indicator: radial convolution profile.
// ---------------------------------------------------------------------------

/// Number of quadrature nodes per unit axis in the convolution integral
/// (fixed resolution by design; changing it changes the catalog entry).
const CONV_NODES: usize = 512;
/// Knot count of the tabulated radial profile on [0.4, 1.6].
const PROFILE_KNOTS: usize = 1025;

/// Tabulated radial profile with piecewise cubic Hermite evaluation.
///
/// The profile is exactly 1 below r = 1/2 and exactly 0 above r = 3/2; the
/// table covers the transition with values and radial derivatives computed
/// by fixed-resolution quadrature of the convolution integral.
#[derive(Debug)]
struct RadialProfile {
    r_lo: f64,
    r_hi: f64,
    step: f64,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

impl RadialProfile {
    fn build(dim: usize) -> Self {
        let r_lo = 0.4;
        let r_hi = 1.6;
        let step = (r_hi - r_lo) / (PROFILE_KNOTS - 1) as f64;

        // Normalization c: ∫_{B(0,1)} e^{-1/(1-|z|²)} dz, radial quadrature.
        let bump = |z2: f64| -> f64 {
            if z2 >= 1.0 {
                0.0
            } else {
                (-1.0 / (1.0 - z2)).exp()
            }
        };
        let m = CONV_NODES;
        let dr = 1.0 / m as f64;
        let mut mass = 0.0;
        for i in 0..m {
            let rho = (i as f64 + 0.5) * dr;
            let surf = match dim {
                1 => 2.0,
                2 => std::f64::consts::TAU * rho,
                _ => 4.0 * std::f64::consts::PI * rho * rho,
            };
            mass += bump(rho * rho) * surf * dr;
        }
        let c = 1.0 / mass;
        // η₂(ρ) = 2ⁿ c e^{-1/(1-(2ρ)²)}, supported in ρ < 1/2.
        let eta2 = |rho: f64| -> f64 { 2f64.powi(dim as i32) * c * bump(4.0 * rho * rho) };

        // f(r) = ∫_0^{1/2} η₂(ρ) ρ^{n-1} A_n(ρ, r) dρ where A_n is the
        // angular measure of {ξ ∈ S^{n-1} : |r e - ρ ξ| ≤ 1}; closed forms
        // below. f'(r) follows by differentiating A_n under the integral
        // (dimension 1 uses the exact boundary term).
        let drho = 0.5 / m as f64;
        let mut values = Vec::with_capacity(PROFILE_KNOTS);
        let mut derivs = Vec::with_capacity(PROFILE_KNOTS);
        for k in 0..PROFILE_KNOTS {
            let r = r_lo + k as f64 * step;
            if r <= 0.5 {
                values.push(1.0);
                derivs.push(0.0);
                continue;
            }
            if r >= 1.5 {
                values.push(0.0);
                derivs.push(0.0);
                continue;
            }
            match dim {
                1 => {
                    // f(r) = ∫_{r-1}^{1/2} η₂(y) dy  (for 1/2 < r < 3/2)
                    let lo = r - 1.0;
                    let n_nodes = CONV_NODES;
                    let h = (0.5 - lo) / n_nodes as f64;
                    let mut acc = 0.0;
                    for i in 0..n_nodes {
                        let y = lo + (i as f64 + 0.5) * h;
                        acc += eta2(y) * h;
                    }
                    values.push(acc);
                    derivs.push(-eta2(lo));
                }
                2 => {
                    let mut v = 0.0;
                    let mut d = 0.0;
                    for i in 0..m {
                        let rho = (i as f64 + 0.5) * drho;
                        let w = eta2(rho) * rho * drho;
                        if w == 0.0 {
                            continue;
                        }
                        let u = (rho * rho + r * r - 1.0) / (2.0 * rho * r);
                        if u >= 1.0 {
                            continue;
                        }
                        if u <= -1.0 {
                            v += w * std::f64::consts::TAU;
                            continue;
                        }
                        v += w * 2.0 * u.acos();
                        let du_dr = (r * r - rho * rho + 1.0) / (2.0 * rho * r * r);
                        d += w * (-2.0 / (1.0 - u * u).sqrt()) * du_dr;
                    }
                    values.push(v);
                    derivs.push(d);
                }
                _ => {
                    let mut v = 0.0;
                    let mut d = 0.0;
                    for i in 0..m {
                        let rho = (i as f64 + 0.5) * drho;
                        let w = eta2(rho) * rho * rho * drho;
                        if w == 0.0 {
                            continue;
                        }
                        let u = (rho * rho + r * r - 1.0) / (2.0 * rho * r);
                        if u >= 1.0 {
                            continue;
                        }
                        let uc = u.max(-1.0);
                        v += w * std::f64::consts::TAU * (1.0 - uc);
                        if u > -1.0 {
                            let du_dr = (r * r - rho * rho + 1.0) / (2.0 * rho * r * r);
                            d += w * (-std::f64::consts::TAU) * du_dr;
                        }
                    }
                    values.push(v);
                    derivs.push(d);
                }
            }
        }
        Self {
            r_lo,
            r_hi,
            step,
            values,
            derivs,
        }
    }

    fn value(&self, r: f64) -> f64 {
        if r <= 0.5 {
            return 1.0;
        }
        if r >= 1.5 {
            return 0.0;
        }
        let t = (r - self.r_lo) / self.step;
        let i = (t.floor() as usize).min(self.values.len() - 2);
        let s = t - i as f64;
        // Cubic Hermite on [i, i+1].
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.derivs[i] * self.step, self.derivs[i + 1] * self.step);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * v0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * v1
            + (s3 - s2) * d1
    }

    #[cfg(test)]
    fn range(&self) -> (f64, f64) {
        (self.r_lo, self.r_hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn grid1(n: usize, l: f64) -> GridSpec {
        GridSpec::new(1, n, l).unwrap()
    }

    #[test]
    fn grid_validation_rejects_bad_params() {
        assert!(GridSpec::new(0, 16, 1.0).is_err());
        assert!(GridSpec::new(4, 16, 1.0).is_err());
        assert!(GridSpec::new(1, 15, 1.0).is_err());
        assert!(GridSpec::new(1, 2, 1.0).is_err());
        assert!(GridSpec::new(1, 16, 0.0).is_err());
        assert!(GridSpec::new(1, 16, f64::NAN).is_err());
    }

    #[test]
    fn cell_centers_and_volumes() {
        let g = grid1(4, 1.0);
        let xs: Vec<f64> = (0..4).map(|i| g.axis_coord(i)).collect();
        assert_eq!(xs, vec![-0.75, -0.25, 0.25, 0.75]);
        assert_relative_eq!(g.cell_volume() * g.total_points() as f64, 2.0);
        let g2 = GridSpec::new(2, 8, 3.0).unwrap();
        assert_relative_eq!(
            g2.cell_volume() * g2.total_points() as f64,
            36.0,
            epsilon = 1e-12
        );
        // No cell center on a coordinate plane.
        for i in 0..8 {
            assert!(g2.axis_coord(i).abs() > 1e-12);
        }
    }

    #[test]
    fn sampling_is_row_major_by_axis() {
        let g = GridSpec::new(2, 4, 1.0).unwrap();
        let s = sample_fn(g, |x| 10.0 * x[0] + x[1]);
        // axis 0 slowest: first block has x0 = -0.75.
        assert_relative_eq!(s.values[0], 10.0 * -0.75 + -0.75);
        assert_relative_eq!(s.values[1], 10.0 * -0.75 + -0.25);
        assert_relative_eq!(s.values[4], 10.0 * -0.25 + -0.75);
    }

    #[test]
    fn polynomial_eval_and_partials() {
        // f = x² on dim 1
        let f = AnalyticField::polynomial(1, vec![(vec![2], 1.0)]);
        assert_relative_eq!(f.eval(&[0.5]), 0.25);
        assert_relative_eq!(f.partial(&[2], &[1.7]).unwrap(), 2.0);
        assert_relative_eq!(f.partial(&[3], &[1.7]).unwrap(), 0.0);
        // mixed partial of x²y in dim 2
        let g = AnalyticField::polynomial(2, vec![(vec![2, 1], 1.0)]);
        assert_relative_eq!(g.partial(&[1, 1], &[3.0, 7.0]).unwrap(), 6.0);
    }

    #[test]
    fn gaussian_derivatives_match_closed_forms() {
        let f = AnalyticField::gaussian_bump(1, 1.0, vec![0]).unwrap();
        // f' = -2x e^{-x²}
        for x in [-1.3, 0.2, 0.9] {
            assert_relative_eq!(
                f.partial(&[1], &[x]).unwrap(),
                -2.0 * x * (-x * x).exp(),
                max_relative = 1e-13
            );
            // f'' = (4x² - 2) e^{-x²}
            assert_relative_eq!(
                f.partial(&[2], &[x]).unwrap(),
                (4.0 * x * x - 2.0) * (-x * x).exp(),
                max_relative = 1e-13
            );
        }
        // With a monomial factor: d/dx [x e^{-x²}] = (1 - 2x²) e^{-x²}
        let g = AnalyticField::gaussian_bump(1, 1.0, vec![1]).unwrap();
        assert_relative_eq!(
            g.partial(&[1], &[0.7]).unwrap(),
            (1.0 - 2.0 * 0.49) * (-0.49f64).exp(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn catalog_derivatives_agree_with_central_differences() {
        // Second-order convergence of centered differences against the
        // closed-form partials, across the smooth catalog.
        let fields: Vec<AnalyticField> = vec![
            AnalyticField::polynomial(2, vec![(vec![2, 1], 1.0), (vec![0, 3], -0.5)]),
            AnalyticField::gaussian_bump(2, 1.3, vec![1, 0]).unwrap(),
            AnalyticField::windowed_sinusoid(2, vec![1.0, 0.7], 0.3, 1.5, 2.5).unwrap(),
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for f in &fields {
            for _ in 0..40 {
                let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                for alpha in [[1u32, 0u32], [0, 1], [1, 1], [2, 0]] {
                    let exact = f.partial(&alpha, &x).unwrap();
                    // one centered difference along the first active axis
                    let axis = alpha.iter().position(|&a| a > 0).unwrap();
                    let mut lower = alpha;
                    lower[axis] -= 1;
                    let fd = |h: f64| {
                        let mut xp = x;
                        let mut xm = x;
                        xp[axis] += h;
                        xm[axis] -= h;
                        (f.partial(&lower, &xp).unwrap() - f.partial(&lower, &xm).unwrap())
                            / (2.0 * h)
                    };
                    let e1 = (fd(1e-3) - exact).abs();
                    let e2 = (fd(5e-4) - exact).abs();
                    // second order: quartering the error when halving h,
                    // allow slack for roundoff noise near zero
                    assert!(
                        e2 <= 0.4 * e1 + 1e-9,
                        "{}@{:?}: e1={e1:.3e} e2={e2:.3e}",
                        f.id(),
                        alpha
                    );
                }
            }
        }
    }

    #[test]
    fn windowed_sinusoid_support_and_window() {
        let f = AnalyticField::windowed_sinusoid(1, vec![2.0], 0.4, 1.0, 2.0).unwrap();
        // inside the flat window: exactly the sinusoid
        assert_relative_eq!(f.eval(&[0.5]), (2.0 * 0.5 + 0.4f64).sin());
        // outside: exactly zero
        assert_eq!(f.eval(&[2.1]), 0.0);
        assert_eq!(f.eval(&[-3.0]), 0.0);
        assert!(f.support_radius() >= 2.0);
        // derivative inside flat window is ω cos
        assert_relative_eq!(
            f.partial(&[1], &[0.5]).unwrap(),
            2.0 * (2.0 * 0.5 + 0.4f64).cos(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn mollified_indicator_has_exact_plateau_and_support() {
        for dim in 1..=3usize {
            let f = AnalyticField::mollified_indicator(dim);
            let mut x = vec![0.0; dim];
            assert_eq!(f.eval(&x), 1.0);
            x[0] = 0.49;
            assert_eq!(f.eval(&x), 1.0);
            x[0] = 1.51;
            assert_eq!(f.eval(&x), 0.0);
            assert_relative_eq!(f.support_radius(), 1.5);
            assert!(!f.derivatives_exact());
        }
    }

    #[test]
    fn mollified_indicator_profile_is_radially_decreasing() {
        for dim in 1..=2usize {
            let f = AnalyticField::mollifed_check_helper(dim);
            let mut prev = 1.0 + 1e-12;
            for i in 0..=300 {
                let r = 0.4 + 1.2 * i as f64 / 300.0;
                let mut x = vec![0.0; dim];
                x[0] = r;
                let v = f.eval(&x);
                assert!(v >= -1e-12 && v <= 1.0 + 1e-12, "value {v} out of range");
                assert!(
                    v <= prev + 1e-9,
                    "profile not decreasing at r={r}: {v} > {prev}"
                );
                prev = v;
            }
        }
    }

    #[test]
    fn mollified_indicator_midpoint_value_is_stable() {
        // Radial symmetry: same value in any direction at equal radius.
        let f = AnalyticField::mollified_indicator(2);
        let v1 = f.eval(&[1.0, 0.0]);
        let v2 = f.eval(&[1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()]);
        assert_relative_eq!(v1, v2, epsilon = 1e-12);
        assert!(v1 > 0.0 && v1 < 1.0);
    }

    #[test]
    fn dilation_changes_support_and_derivatives_consistently() {
        let f = AnalyticField::mollified_indicator(1);
        let g = f.dilate(2.0).unwrap();
        assert_relative_eq!(g.support_radius(), 0.75);
        assert_eq!(g.eval(&[0.2]), 1.0);
        assert_eq!(g.eval(&[0.8]), 0.0);
        let p = AnalyticField::polynomial(1, vec![(vec![2], 1.0)]);
        let pd = p.dilate(3.0).unwrap();
        // (x ↦ (3x)²)'' = 18
        assert_relative_eq!(pd.partial(&[2], &[0.4]).unwrap(), 18.0, max_relative = 1e-13);
    }

    #[test]
    fn catalog_registry_and_validation() {
        let spec = FunctionSpec {
            id: "gaussian_bump".into(),
            dim: 2,
            sigma: Some(1.5),
            monomial: None,
            omega: None,
            phase: None,
            window_inner: None,
            window_outer: None,
            terms: None,
            dilation: 1.0,
        };
        let f = make_catalog_function(&spec).unwrap();
        assert_eq!(f.dim(), 2);
        let bad = FunctionSpec {
            id: "does_not_exist".into(),
            ..spec.clone()
        };
        assert!(matches!(
            make_catalog_function(&bad),
            Err(crate::Error::UnknownCatalog(_))
        ));
        let bad_sigma = FunctionSpec {
            sigma: Some(-1.0),
            ..spec.clone()
        };
        assert!(make_catalog_function(&bad_sigma).is_err());
        let bad_dil = FunctionSpec {
            dilation: 0.0,
            ..spec
        };
        assert!(make_catalog_function(&bad_dil).is_err());
    }

    #[test]
    fn sampled_gaussian_mass_matches_closed_form() {
        // ∫ e^{-x²} dx = √π
        let f = AnalyticField::gaussian_bump(1, 1.0, vec![0]).unwrap();
        let g = sample(&f, grid1(1024, 8.0)).unwrap();
        let mass: f64 = g.values.iter().sum::<f64>() * g.grid.cell_volume();
        assert_relative_eq!(mass, std::f64::consts::PI.sqrt(), max_relative = 1e-3);
    }

    #[test]
    fn compact_support_is_exact_on_random_points() {
        let f = AnalyticField::windowed_sinusoid(2, vec![1.0, 2.0], 0.0, 1.0, 1.5).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let r = f.support_radius() + rng.gen_range(0.01..10.0);
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            let x = [r * th.cos(), r * th.sin()];
            assert_eq!(f.eval(&x), 0.0);
        }
    }

    impl AnalyticField {
        /// test-only accessor so the profile test can read the table range
        fn mollifed_check_helper(dim: usize) -> AnalyticField {
            let f = AnalyticField::mollified_indicator(dim);
            if let FieldKind::MollifiedIndicator { profile, .. } = &*f.kind {
                let (lo, hi) = profile.range();
                assert!(lo < 0.5 && hi > 1.5);
            }
            f
        }
    }
}
