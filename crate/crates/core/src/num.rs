//! Internal numerics toolbox: exact combinatorics, quadrature rules, small
//! dense solves, log-spaced grids, sphere quadrature, a C^∞ cutoff profile
//! with closed-form derivatives, and cumulative tables for box integrals.
//!
//! Everything here is deterministic: fixed node orders, sequential
//! reductions, no hashing.

/// Largest difference order for which binomial coefficients are exact in u64.
pub(crate) const MAX_EXACT_BINOMIAL: u32 = 62;

/// Exact binomial coefficient for `n ≤ 62` (fits in u64 without overflow).
///
/// Callers must check the bound; this asserts it.
pub(crate) fn binomial_u64(n: u32, k: u32) -> u64 {
    assert!(n <= MAX_EXACT_BINOMIAL, "binomial order {n} exceeds exact range");
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // Multiply first, divide after: the running product of i+1 consecutive
        // binomials is always divisible by (i+1).
        acc = acc * u128::from(n - k + i + 1) / u128::from(i + 1);
    }
    acc as u64
}

/// `n!` as f64 (exact for n ≤ 22).
pub(crate) fn factorial_f64(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Multinomial weight `k! / α!` for a multi-index α with |α| = k.
pub(crate) fn multinomial_weight(alpha: &[u32]) -> f64 {
    let k: u32 = alpha.iter().sum();
    let mut w = factorial_f64(k);
    for &a in alpha {
        w /= factorial_f64(a);
    }
    w
}

/// All multi-indices α ∈ ℕ^dim with |α| = order, in a fixed lexicographic
/// order (first axis weight decreasing).
pub(crate) fn multi_indices_of_order(dim: usize, order: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; dim];
    fn rec(axis: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if axis + 1 == cur.len() {
            cur[axis] = left;
            out.push(cur.clone());
            return;
        }
        for a in (0..=left).rev() {
            cur[axis] = a;
            rec(axis + 1, left - a, cur, out);
        }
    }
    if dim == 0 {
        return out;
    }
    rec(0, order, &mut cur, &mut out);
    out
}

/// All multi-indices with |α| ≤ order, ordered by total order then lex.
pub(crate) fn multi_indices_up_to(dim: usize, order: u32) -> Vec<Vec<u32>> {
    (0..=order)
        .flat_map(|k| multi_indices_of_order(dim, k))
        .collect()
}

/// Gauss–Legendre nodes and weights on [-1, 1].
///
/// Newton iteration on the Legendre recurrence; standard and accurate to
/// machine precision for the modest orders used here (≤ 64).
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) by upward recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = (n as f64) * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule mapped to [a, b].
pub(crate) fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        xs.iter().map(|x| mid + half * x).collect(),
        ws.iter().map(|w| w * half).collect(),
    )
}

/// Solve a small dense linear system in place (LU, partial pivoting).
pub(crate) fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Result<(), String> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    for col in 0..n {
        // Pivot.
        let mut piv = col;
        let mut max = a[col * n + col].abs();
        for row in col + 1..n {
            let v = a[row * n + col].abs();
            if v > max {
                max = v;
                piv = row;
            }
        }
        if max == 0.0 || !max.is_finite() {
            return Err(format!("pivot {max:.3e} in column {col}"));
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[row * n + j] -= f * a[col * n + j];
            }
            b[row] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for j in col + 1..n {
            s -= a[col * n + j] * b[j];
        }
        b[col] = s / a[col * n + col];
    }
    Ok(())
}

/// Geometric (log-uniform) quadrature nodes covering [min, max]:
/// midpoints in log space with the uniform log step returned alongside.
///
/// The induced rule `Σ g(r_i) · r_i · Δln` approximates `∫ g(r) dr` with the
/// substitution `dr = r dln r`.
pub(crate) fn log_midpoint_nodes(min: f64, max: f64, per_decade: usize) -> (Vec<f64>, f64) {
    assert!(min > 0.0 && max > min && per_decade > 0);
    let decades = (max / min).log10();
    let count = ((decades * per_decade as f64).ceil() as usize).max(1);
    let dln = (max / min).ln() / count as f64;
    let lmin = min.ln();
    let nodes = (0..count)
        .map(|i| (lmin + (i as f64 + 0.5) * dln).exp())
        .collect();
    (nodes, dln)
}

/// Log-uniform grid including both endpoints (used for λ-grids).
pub(crate) fn log_grid_inclusive(min: f64, max: f64, per_decade: usize) -> Vec<f64> {
    assert!(min > 0.0 && max >= min && per_decade > 0);
    if max == min {
        return vec![min];
    }
    let decades = (max / min).log10();
    let count = ((decades * per_decade as f64).round() as usize).max(1);
    let step = (max / min).ln() / count as f64;
    let lmin = min.ln();
    let mut g: Vec<f64> = (0..=count).map(|i| (lmin + i as f64 * step).exp()).collect();
    // Pin the endpoints exactly despite rounding.
    g[0] = min;
    g[count] = max;
    g
}

/// Quadrature directions on the unit sphere S^{dim-1} with weights for the
/// surface measure H^{dim-1}:
///
/// * dim 1 — the two points ±1, each of unit (counting) weight;
/// * dim 2 — `n` uniform midpoint angles, weight 2π/n (spectrally accurate
///   for smooth periodic integrands);
/// * dim 3 — a 26-node octahedral rule (exact through degree 7), scaled by 4π.
pub(crate) fn sphere_directions(dim: usize, n: usize) -> Vec<(Vec<f64>, f64)> {
    match dim {
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => {
            let n = n.max(4);
            let w = std::f64::consts::TAU / n as f64;
            (0..n)
                .map(|i| {
                    let th = (i as f64 + 0.5) * w;
                    (vec![th.cos(), th.sin()], w)
                })
                .collect()
        }
        3 => {
            let mut dirs = Vec::with_capacity(26);
            let w1 = 1.0 / 21.0;
            let w2 = 4.0 / 105.0;
            let w3 = 9.0 / 280.0;
            for axis in 0..3 {
                for s in [1.0, -1.0] {
                    let mut v = vec![0.0; 3];
                    v[axis] = s;
                    dirs.push((v, w1));
                }
            }
            let r = std::f64::consts::FRAC_1_SQRT_2;
            for (a, b) in [(0usize, 1usize), (0, 2), (1, 2)] {
                for sa in [1.0, -1.0] {
                    for sb in [1.0, -1.0] {
                        let mut v = vec![0.0; 3];
                        v[a] = sa * r;
                        v[b] = sb * r;
                        dirs.push((v, w2));
                    }
                }
            }
            let t = 1.0 / 3f64.sqrt();
            for sx in [1.0, -1.0] {
                for sy in [1.0, -1.0] {
                    for sz in [1.0, -1.0] {
                        dirs.push((vec![sx * t, sy * t, sz * t], w3));
                    }
                }
            }
            let s = 4.0 * std::f64::consts::PI;
            dirs.into_iter().map(|(v, w)| (v, w * s)).collect()
        }
        _ => panic!("sphere_directions: unsupported dimension {dim}"),
    }
}

// ---------------------------------------------------------------------------
// C^∞ transition profile.
// ---------------------------------------------------------------------------

/// Highest derivative order the transition profile provides.
pub(crate) const MAX_TRANSITION_DERIV: usize = 8;

/// The C^∞ step that is ≡ 1 for `t ≤ a` and ≡ 0 for `t ≥ b`:
///
/// ```text
///     W(u) = m(1-u) / (m(1-u) + m(u)),   u = (t-a)/(b-a),   m(u) = e^{-1/u}.
/// ```
///
/// Derivatives are evaluated by exact recursions: `m^{(j)}(u) = e^{-1/u} P_j(1/u)`
/// with `P_{j+1}(v) = v² (P_j(v) - P_j'(v))`, and the quotient by Leibniz.
#[derive(Debug, Clone)]
pub(crate) struct SmoothTransition {
    a: f64,
    b: f64,
    /// Coefficients of P_j in powers of v = 1/u, j = 0..=MAX_TRANSITION_DERIV.
    poly: Vec<Vec<f64>>,
}

impl SmoothTransition {
    pub fn new(a: f64, b: f64) -> Self {
        assert!(b > a, "transition needs a < b");
        let mut poly: Vec<Vec<f64>> = Vec::with_capacity(MAX_TRANSITION_DERIV + 1);
        poly.push(vec![1.0]);
        for _ in 0..MAX_TRANSITION_DERIV {
            let p = poly.last().unwrap();
            // q(v) = v² (p(v) - p'(v))
            let mut q = vec![0.0; p.len() + 2];
            for (i, &c) in p.iter().enumerate() {
                q[i + 2] += c;
                if i >= 1 {
                    q[i + 1] -= c * i as f64;
                }
            }
            poly.push(q);
        }
        Self { a, b, poly }
    }

    /// j-th derivative of m(u) = e^{-1/u} (zero for u ≤ 0).
    fn m_deriv(&self, j: usize, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let e = (-1.0 / u).exp();
        if e == 0.0 {
            return 0.0;
        }
        let v = 1.0 / u;
        let mut acc = 0.0;
        for &c in self.poly[j].iter().rev() {
            acc = acc * v + c;
        }
        e * acc
    }

    /// Derivatives 0..=order of W at unit-interval coordinate u.
    fn w_derivs_unit(&self, order: usize, u: f64) -> Vec<f64> {
        assert!(order <= MAX_TRANSITION_DERIV);
        if u <= 0.0 {
            let mut d = vec![0.0; order + 1];
            d[0] = 1.0;
            return d;
        }
        if u >= 1.0 {
            return vec![0.0; order + 1];
        }
        // numerator N = m(1-u), denominator D = N + m(u)
        let nd: Vec<f64> = (0..=order)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * self.m_deriv(j, 1.0 - u)
            })
            .collect();
        let dd: Vec<f64> = (0..=order).map(|j| nd[j] + self.m_deriv(j, u)).collect();
        let mut w = vec![0.0; order + 1];
        for m in 0..=order {
            let mut s = nd[m];
            for i in 0..m {
                s -= binomial_u64(m as u32, i as u32) as f64 * w[i] * dd[m - i];
            }
            w[m] = s / dd[0];
        }
        w
    }

    /// m-th derivative of the transition at t (m ≤ MAX_TRANSITION_DERIV).
    pub fn derivative(&self, m: usize, t: f64) -> f64 {
        let scale = 1.0 / (self.b - self.a);
        let u = (t - self.a) * scale;
        let d = self.w_derivs_unit(m, u);
        d[m] * scale.powi(m as i32)
    }

    /// Value of the transition at t.
    pub fn value(&self, t: f64) -> f64 {
        let u = (t - self.a) / (self.b - self.a);
        self.w_derivs_unit(0, u)[0]
    }
}

// ---------------------------------------------------------------------------
// Multivariate polynomials (internal representation).
// ---------------------------------------------------------------------------

/// Sparse multivariate polynomial Σ c_α x^α with a fixed ambient dimension.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct MultiPoly {
    pub dim: usize,
    /// (exponent vector, coefficient), sorted by exponent vector.
    pub terms: Vec<(Vec<u32>, f64)>,
}

impl MultiPoly {
    pub fn new(dim: usize, terms: Vec<(Vec<u32>, f64)>) -> Self {
        let mut map = std::collections::BTreeMap::<Vec<u32>, f64>::new();
        for (e, c) in terms {
            assert_eq!(e.len(), dim);
            *map.entry(e).or_insert(0.0) += c;
        }
        let terms = map.into_iter().filter(|(_, c)| *c != 0.0).collect();
        Self { dim, terms }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(dim, vec![(vec![0; dim], c)])
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut t = *c;
            for (xi, &ei) in x.iter().zip(e.iter()) {
                t *= xi.powi(ei as i32);
            }
            acc += t;
        }
        acc
    }

    /// ∂/∂x_axis as a new polynomial.
    pub fn partial(&self, axis: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(e, _)| e[axis] > 0)
            .map(|(e, c)| {
                let mut e2 = e.clone();
                let p = e2[axis];
                e2[axis] = p - 1;
                (e2, c * p as f64)
            })
            .collect();
        Self::new(self.dim, terms)
    }

    /// this + coeff · x_axis · other
    pub fn add_monomial_multiple(&self, other: &Self, axis: usize, coeff: f64) -> Self {
        let mut terms = self.terms.clone();
        for (e, c) in &other.terms {
            let mut e2 = e.clone();
            e2[axis] += 1;
            terms.push((e2, c * coeff));
        }
        Self::new(self.dim, terms)
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|(e, _)| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// Coefficient of the monomial with the given exponent vector.
    pub fn coefficient(&self, exponents: &[u32]) -> f64 {
        self.terms
            .iter()
            .find(|(e, _)| e == exponents)
            .map(|(_, c)| *c)
            .unwrap_or(0.0)
    }
}

// ---------------------------------------------------------------------------
// Cumulative tables: exact box integrals of piecewise-constant cell data.
// ---------------------------------------------------------------------------

/// Cumulative integral table over a uniform cell grid.
///
/// For cell data interpreted as a piecewise-constant density, the cumulative
/// integral is multilinear inside every cell, so multilinear interpolation of
/// the corner table evaluates `∫_{[lo, y]} density` exactly; axis-parallel box
/// integrals follow by inclusion–exclusion.
#[derive(Debug, Clone)]
pub(crate) struct CumTable {
    dim: usize,
    n: usize,
    lo: f64,
    h: f64,
    /// Corner sums, (n+1)^dim entries, row-major (axis 0 slowest).
    data: Vec<f64>,
}

impl CumTable {
    /// Build from row-major cell values on a grid of `n` cells per axis over
    /// `[lo, lo + n·h]^dim`; `density[i]` is the (constant) density on cell i.
    pub fn new(dim: usize, n: usize, lo: f64, h: f64, density: &[f64]) -> Self {
        assert!(dim >= 1 && dim <= 3);
        assert_eq!(density.len(), n.pow(dim as u32));
        let m = n + 1;
        let mut data = vec![0.0; m.pow(dim as u32)];
        let cell_vol = h.powi(dim as i32);
        // Seed: mass of cell (i0..) goes to corner (i0+1, i1+1, ...).
        let mut idx = vec![0usize; dim];
        for (ci, &v) in density.iter().enumerate() {
            let mut rem = ci;
            for ax in (0..dim).rev() {
                idx[ax] = rem % n;
                rem /= n;
            }
            let mut corner = 0usize;
            for ax in 0..dim {
                corner = corner * m + (idx[ax] + 1);
            }
            data[corner] = v * cell_vol;
        }
        // Prefix-sum along each axis.
        for ax in 0..dim {
            let stride = m.pow((dim - 1 - ax) as u32);
            let outer = m.pow(dim as u32) / (m * stride);
            for o in 0..outer {
                for s in 0..stride {
                    let base = (o * m) * stride + s;
                    for i in 1..m {
                        data[base + i * stride] += data[base + (i - 1) * stride];
                    }
                }
            }
        }
        Self { dim, n, lo, h, data }
    }

    /// Cumulative integral over [lo, y] (componentwise), clamped to the grid.
    fn cumulative(&self, y: &[f64]) -> f64 {
        let m = self.n + 1;
        let mut i0 = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for ax in 0..self.dim {
            let t = ((y[ax] - self.lo) / self.h).clamp(0.0, self.n as f64);
            let fl = t.floor().min((self.n - 1) as f64);
            i0[ax] = fl as usize;
            frac[ax] = t - fl;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << self.dim) {
            let mut w = 1.0;
            let mut idx = 0usize;
            for ax in 0..self.dim {
                let hi = (corner >> ax) & 1 == 1;
                w *= if hi { frac[ax] } else { 1.0 - frac[ax] };
                idx = idx * m + i0[ax] + usize::from(hi);
            }
            if w != 0.0 {
                acc += w * self.data[idx];
            }
        }
        acc
    }

    /// Exact integral of the piecewise-constant density over an axis box.
    pub fn box_integral(&self, lo: &[f64], hi: &[f64]) -> f64 {
        debug_assert_eq!(lo.len(), self.dim);
        let mut acc = 0.0;
        let mut y = [0.0f64; 3];
        for corner in 0..(1usize << self.dim) {
            let mut sign = 1.0;
            for ax in 0..self.dim {
                if (corner >> ax) & 1 == 1 {
                    y[ax] = hi[ax];
                } else {
                    y[ax] = lo[ax];
                    sign = -sign;
                }
            }
            acc += sign * self.cumulative(&y[..self.dim]);
        }
        acc.max(0.0)
    }
}

// ---------------------------------------------------------------------------
// Fits.
// ---------------------------------------------------------------------------

/// Ordinary least-squares line fit: returns (slope, intercept, R²).
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, intercept, r2)
}
