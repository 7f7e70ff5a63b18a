//! Shifted dyadic grids, minimizing polynomials, and level-set cube
//! machinery.
//!
//! A shifted dyadic grid with per-axis offsets α ∈ {0, 1/3, 2/3} consists of
//! the cubes 2^j(m + [0,1)^n + (−1)^j α); the alternating sign makes cubes
//! of consecutive levels interleave, so every ball is well-contained in a
//! cube of comparable size from one of the 3^n shifted families.
//!
//! On top of the grids sit the degree-s minimizing polynomial of a function
//! on a cube/ball/annulus (moment conditions ∫(f−P)x^β = 0, |β| ≤ s), the
//! local approximation numbers E_k(f,Q) = ‖f − P^{(k-1)}‖_{L¹(Q)}, the
//! level families {Q : E_k(f,Q) > λ|Q|^{β+ℓ/n}}, and the sparse sums those
//! families feed.

use crate::error::{Error, Result};
use crate::field::AnalyticField;
use crate::num::{
    gauss_legendre_on, multi_indices_of_order, multi_indices_up_to, solve_dense,
    sphere_directions, MultiPoly,
};
use crate::spaces::{space_norm, SpaceSpec};
use crate::weights::{Cube, WeightSpec};
use serde::{Deserialize, Serialize};

/// Allowed per-axis shifts of a dyadic grid.
pub const SHIFTS: [f64; 3] = [0.0, 1.0 / 3.0, 2.0 / 3.0];

/// One cube of a shifted dyadic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicCube {
    /// Per-axis shift, each in {0, 1/3, 2/3}.
    pub alpha: Vec<f64>,
    pub j: i32,
    pub m: Vec<i64>,
}

impl DyadicCube {
    pub fn new(alpha: Vec<f64>, j: i32, m: Vec<i64>) -> Result<Self> {
        if alpha.len() != m.len() || alpha.is_empty() || alpha.len() > 3 {
            return Err(Error::DimensionMismatch {
                expected: alpha.len(),
                actual: m.len(),
            });
        }
        if alpha
            .iter()
            .any(|a| SHIFTS.iter().all(|s| (a - s).abs() > 1e-12))
        {
            return Err(Error::InvalidParameter(format!(
                "dyadic shift entries must be in {{0, 1/3, 2/3}}, got {alpha:?}"
            )));
        }
        Ok(Self { alpha, j, m })
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn edge(&self) -> f64 {
        2f64.powi(self.j)
    }

    /// Lower corner 2^j(m + (−1)^j α).
    pub fn corner(&self) -> Vec<f64> {
        let side = self.edge();
        let sign = if self.j % 2 == 0 { 1.0 } else { -1.0 };
        self.m
            .iter()
            .zip(self.alpha.iter())
            .map(|(&mi, &ai)| side * (mi as f64 + sign * ai))
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.edge().powi(self.dim() as i32)
    }

    pub fn to_cube(&self) -> Cube {
        Cube {
            lo: self.corner(),
            side: self.edge(),
        }
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        let lo = self.corner();
        let side = self.edge();
        x.iter()
            .zip(lo.iter())
            .all(|(xi, li)| *xi >= *li && *xi < li + side)
    }

    /// The unique cube of the same grid at level `j` containing `x`.
    pub fn containing(alpha: &[f64], j: i32, x: &[f64]) -> Self {
        let side = 2f64.powi(j);
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let m = x
            .iter()
            .zip(alpha.iter())
            .map(|(xi, ai)| (xi / side - sign * ai).floor() as i64)
            .collect();
        Self {
            alpha: alpha.to_vec(),
            j,
            m,
        }
    }
}

/// Smallest cube from any of the 3^n shifted grids that contains the ball,
/// searched over levels starting at the ball's diameter. Returns the cube
/// and the achieved edge/diameter ratio (≤ 8 in dimensions 1–2 for this
/// procedure).
pub fn containing_cube(center: &[f64], radius: f64, max_extra_levels: i32) -> Result<(DyadicCube, f64)> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ball radius must be positive, got {radius}"
        )));
    }
    let dim = center.len();
    let diam = 2.0 * radius;
    let j0 = diam.log2().floor() as i32;
    let combos = shift_combinations(dim);
    for j in j0..=j0 + max_extra_levels {
        let mut best: Option<DyadicCube> = None;
        for alpha in &combos {
            let q = DyadicCube::containing(alpha, j, center);
            let lo = q.corner();
            let side = q.edge();
            let fits = (0..dim).all(|ax| {
                center[ax] - radius >= lo[ax] && center[ax] + radius <= lo[ax] + side
            });
            if fits {
                best = Some(q);
                break;
            }
        }
        if let Some(q) = best {
            let ratio = q.edge() / diam;
            return Ok((q, ratio));
        }
    }
    Err(Error::Precondition(format!(
        "no containing cube within {max_extra_levels} levels above the ball diameter"
    )))
}

/// All 3^dim shift vectors.
pub fn shift_combinations(dim: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim];
    loop {
        out.push(idx.iter().map(|&i| SHIFTS[i]).collect());
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

// ---------------------------------------------------------------------------
// Domains and quadrature.
// ---------------------------------------------------------------------------

/// Integration domain for local approximations.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Cube(Cube),
    Ball { center: Vec<f64>, radius: f64 },
    Annulus { center: Vec<f64>, r_in: f64, r_out: f64 },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Cube(q) => q.dim(),
            Domain::Ball { center, .. } | Domain::Annulus { center, .. } => center.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Cube(_) => Ok(()),
            Domain::Ball { radius, .. } => {
                if *radius > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "ball radius must be positive, got {radius}"
                    )))
                }
            }
            Domain::Annulus { center, r_in, r_out } => {
                if center.len() < 2 {
                    return Err(Error::InvalidParameter(
                        "annulus domains need dimension ≥ 2".into(),
                    ));
                }
                if !(0.0 < *r_in && r_in < r_out) {
                    return Err(Error::InvalidParameter(format!(
                        "annulus needs 0 < r_in < r_out, got ({r_in}, {r_out})"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Frame center for the scaled monomial basis.
    fn frame_center(&self) -> Vec<f64> {
        match self {
            Domain::Cube(q) => (0..q.dim()).map(|ax| q.lo[ax] + q.side / 2.0).collect(),
            Domain::Ball { center, .. } | Domain::Annulus { center, .. } => center.clone(),
        }
    }

    /// Frame scale (basis coordinates are (x − c)/scale, of order one on
    /// the domain).
    fn frame_scale(&self) -> f64 {
        match self {
            Domain::Cube(q) => q.side / 2.0,
            Domain::Ball { radius, .. } => *radius,
            Domain::Annulus { r_out, .. } => *r_out,
        }
    }

    /// Scale parameter R in inequalities of the form C·R^{k−j}: the edge
    /// for cubes, the (outer) radius for balls and annuli.
    pub fn scale_r(&self) -> f64 {
        match self {
            Domain::Cube(q) => q.side,
            Domain::Ball { radius, .. } => *radius,
            Domain::Annulus { r_out, .. } => *r_out,
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Domain::Cube(q) => q.volume(),
            Domain::Ball { center, radius } => {
                unit_ball_volume(center.len()) * radius.powi(center.len() as i32)
            }
            Domain::Annulus { center, r_in, r_out } => {
                let n = center.len() as i32;
                unit_ball_volume(center.len()) * (r_out.powi(n) - r_in.powi(n))
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Cube(q) => q.contains_point(x),
            Domain::Ball { center, radius } => dist(x, center) <= *radius,
            Domain::Annulus { center, r_in, r_out } => {
                let d = dist(x, center);
                *r_in <= d && d <= *r_out
            }
        }
    }

    /// Quadrature nodes/weights, exact for smooth integrands to high
    /// degree. `panels` subdivides each axis (or the radial direction) for
    /// kinked integrands like |f − P|.
    fn quad_nodes(&self, panels: usize, order: usize) -> Vec<(Vec<f64>, f64)> {
        match self {
            Domain::Cube(q) => {
                let dim = q.dim();
                // composite Gauss–Legendre tensor grid
                let mut axis_nodes: Vec<(f64, f64)> = Vec::new();
                let step = q.side / panels as f64;
                for pa in 0..panels {
                    let a = step * pa as f64;
                    let (ns, ws) = gauss_legendre_on(order, a, a + step);
                    axis_nodes.extend(ns.into_iter().zip(ws));
                }
                let k = axis_nodes.len();
                let mut out = Vec::with_capacity(k.pow(dim as u32));
                let mut idx = vec![0usize; dim];
                loop {
                    let mut x = Vec::with_capacity(dim);
                    let mut w = 1.0;
                    for ax in 0..dim {
                        let (t, tw) = axis_nodes[idx[ax]];
                        x.push(q.lo[ax] + t);
                        w *= tw;
                    }
                    out.push((x, w));
                    let mut ax = 0;
                    loop {
                        if ax == dim {
                            return out;
                        }
                        idx[ax] += 1;
                        if idx[ax] < k {
                            break;
                        }
                        idx[ax] = 0;
                        ax += 1;
                    }
                }
            }
            Domain::Ball { center, radius } => {
                polar_nodes(center, 0.0, *radius, panels, order)
            }
            Domain::Annulus { center, r_in, r_out } => {
                polar_nodes(center, *r_in, *r_out, panels, order)
            }
        }
    }
}

fn dist(x: &[f64], c: &[f64]) -> f64 {
    x.iter()
        .zip(c.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI / 3.0,
    }
}

/// Radial panels × direction set; weights include the r^{n−1} Jacobian.
fn polar_nodes(
    center: &[f64],
    r_in: f64,
    r_out: f64,
    panels: usize,
    order: usize,
) -> Vec<(Vec<f64>, f64)> {
    let dim = center.len();
    let dirs = sphere_directions(dim, 64);
    let step = (r_out - r_in) / panels as f64;
    let mut out = Vec::new();
    for pa in 0..panels {
        let a = r_in + step * pa as f64;
        let (rs, ws) = gauss_legendre_on(order, a, a + step);
        for (r, w) in rs.iter().zip(ws.iter()) {
            let jac = r.powi(dim as i32 - 1) * w;
            for (d, dw) in &dirs {
                let x: Vec<f64> = (0..dim).map(|ax| center[ax] + r * d[ax]).collect();
                out.push((x, jac * dw));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Minimizing polynomials and local approximation.
// ---------------------------------------------------------------------------

/// Polynomial in a scaled local frame t = (x − c)/s (the frame keeps the
/// moment system well-conditioned at deep cube levels).
#[derive(Debug, Clone)]
pub struct Polynomial {
    pub frame_center: Vec<f64>,
    pub frame_scale: f64,
    poly: MultiPoly,
}

impl Polynomial {
    pub fn degree(&self) -> u32 {
        self.poly.degree()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let t: Vec<f64> = x
            .iter()
            .zip(self.frame_center.iter())
            .map(|(xi, ci)| (xi - ci) / self.frame_scale)
            .collect();
        self.poly.eval(&t)
    }

    /// ∂^γ of the polynomial (chain rule through the frame scaling).
    pub fn partial(&self, gamma: &[u32], x: &[f64]) -> f64 {
        let mut p = self.poly.clone();
        let mut order = 0u32;
        for (ax, &g) in gamma.iter().enumerate() {
            for _ in 0..g {
                p = p.partial(ax);
            }
            order += g;
        }
        let t: Vec<f64> = x
            .iter()
            .zip(self.frame_center.iter())
            .map(|(xi, ci)| (xi - ci) / self.frame_scale)
            .collect();
        p.eval(&t) / self.frame_scale.powi(order as i32)
    }
}

/// Quadrature resolution knobs (per-cube). The defaults follow the
/// documented minimum of 32 nodes per axis for the moment system; the L¹
/// integrals use composite panels because |f − P| has kinks.
const MOMENT_PANELS: usize = 4;
const MOMENT_ORDER: usize = 8; // 4 × 8 = 32 nodes per axis
fn l1_panels(dim: usize) -> (usize, usize) {
    match dim {
        1 => (32, 8),
        2 => (8, 8),
        _ => (4, 6),
    }
}

/// The unique degree-≤ s polynomial with ∫_Ω (f − P) x^β dx = 0 for all
/// |β| ≤ s — equivalently the L²(Ω) projection of f onto polynomials.
pub fn minimizing_polynomial(f: &AnalyticField, domain: &Domain, s: u32) -> Result<Polynomial> {
    domain.validate()?;
    if f.dim() != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            actual: domain.dim(),
        });
    }
    let dim = domain.dim();
    let basis = multi_indices_up_to(dim, s);
    let nb = basis.len();
    let center = domain.frame_center();
    let scale = domain.frame_scale();
    let nodes = domain.quad_nodes(MOMENT_PANELS, MOMENT_ORDER);

    // Gram and moment vector in the scaled frame.
    let mut gram = vec![0.0f64; nb * nb];
    let mut rhs = vec![0.0f64; nb];
    let mut tpow = vec![0.0f64; nb];
    for (x, w) in &nodes {
        let t: Vec<f64> = (0..dim).map(|ax| (x[ax] - center[ax]) / scale).collect();
        for (bi, beta) in basis.iter().enumerate() {
            let mut mono = 1.0;
            for (ax, &b) in beta.iter().enumerate() {
                if b > 0 {
                    mono *= t[ax].powi(b as i32);
                }
            }
            tpow[bi] = mono;
        }
        let fv = f.eval(x);
        for a in 0..nb {
            rhs[a] += fv * tpow[a] * w;
            for b in a..nb {
                gram[a * nb + b] += tpow[a] * tpow[b] * w;
            }
        }
    }
    for a in 0..nb {
        for b in 0..a {
            gram[a * nb + b] = gram[b * nb + a];
        }
    }
    let mut sol = rhs.clone();
    solve_dense(&mut gram, &mut sol, nb).map_err(Error::SingularSystem)?;

    let terms: Vec<(Vec<u32>, f64)> = basis
        .iter()
        .cloned()
        .zip(sol.iter().cloned())
        .filter(|(_, c)| *c != 0.0)
        .collect();
    Ok(Polynomial {
        frame_center: center,
        frame_scale: scale,
        poly: MultiPoly::new(dim, terms),
    })
}

/// Residual moments ∫_Ω (f − P) x^β, |β| ≤ s, in the scaled frame —
/// diagnostic for the projection quality.
pub fn moment_residuals(
    f: &AnalyticField,
    domain: &Domain,
    p: &Polynomial,
    s: u32,
) -> Vec<f64> {
    let dim = domain.dim();
    let basis = multi_indices_up_to(dim, s);
    let nodes = domain.quad_nodes(MOMENT_PANELS, MOMENT_ORDER);
    let mut out = vec![0.0; basis.len()];
    for (x, w) in &nodes {
        let t: Vec<f64> = (0..dim)
            .map(|ax| (x[ax] - p.frame_center[ax]) / p.frame_scale)
            .collect();
        let d = f.eval(x) - p.eval(x);
        for (bi, beta) in basis.iter().enumerate() {
            let mut mono = 1.0;
            for (ax, &b) in beta.iter().enumerate() {
                if b > 0 {
                    mono *= t[ax].powi(b as i32);
                }
            }
            out[bi] += d * mono * w;
        }
    }
    out
}

/// Local approximation number E_k(f, Ω) = ‖f − P^{(k-1)}‖_{L¹(Ω)}.
pub fn local_approximation(f: &AnalyticField, domain: &Domain, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "local approximation needs k ≥ 1".into(),
        ));
    }
    let p = minimizing_polynomial(f, domain, k - 1)?;
    if domain.dim() == 1 {
        // One dimension admits a root-adaptive scheme: between sign changes
        // of f − P the integrand is smooth with constant sign, so panelwise
        // Gauss–Legendre of the signed function is near-exact.
        let (a, b) = match domain {
            Domain::Cube(q) => (q.lo[0], q.lo[0] + q.side),
            Domain::Ball { center, radius } => (center[0] - radius, center[0] + radius),
            Domain::Annulus { .. } => unreachable!("annuli are rejected in dimension 1"),
        };
        let g = |x: f64| f.eval(&[x]) - p.eval(&[x]);
        return Ok(abs_integral_1d(&g, a, b));
    }
    let (panels, order) = l1_panels(domain.dim());
    let nodes = domain.quad_nodes(panels, order);
    let mut acc = 0.0;
    for (x, w) in &nodes {
        acc += (f.eval(x) - p.eval(x)).abs() * w;
    }
    Ok(acc)
}

/// ∫_a^b |g| for smooth g: bracket the sign changes on a fine probe grid,
/// bisect them to full precision, and integrate the signed function with
/// composite Gauss–Legendre on each sign-constant segment.
fn abs_integral_1d(g: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const PROBES: usize = 512;
    let step = (b - a) / PROBES as f64;
    let mut cuts = vec![a];
    let mut prev_x = a;
    let mut prev_v = g(a);
    for i in 1..=PROBES {
        let x = a + step * i as f64;
        let v = g(x);
        if prev_v == 0.0 || prev_v.signum() * v.signum() < 0.0 {
            // bisect the bracket [prev_x, x]
            let (mut lo, mut hi) = (prev_x, x);
            let mut flo = prev_v;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let fm = g(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if flo.signum() * fm.signum() < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            cuts.push(0.5 * (lo + hi));
        }
        prev_x = x;
        prev_v = v;
    }
    cuts.push(b);
    cuts.dedup_by(|u, v| (*u - *v).abs() < 1e-15 * (b - a).abs());
    let mut acc = 0.0;
    for seg in cuts.windows(2) {
        let mut signed = 0.0;
        let panels = 4;
        let w = (seg[1] - seg[0]) / panels as f64;
        for pa in 0..panels {
            let (xs, ws) = gauss_legendre_on(12, seg[0] + w * pa as f64, seg[0] + w * (pa + 1) as f64);
            for (x, wt) in xs.iter().zip(ws.iter()) {
                signed += g(*x) * wt;
            }
        }
        acc += signed.abs();
    }
    acc
}

/// Estimate inf_{P ∈ P_s} ‖f − P‖_{L¹(Ω)} by derivative-free coordinate
/// descent on the coefficients, started from the moment-minimizing
/// polynomial. Used to measure how near-best the projection is.
pub fn near_best_ratio(f: &AnalyticField, domain: &Domain, s: u32) -> Result<f64> {
    let p0 = minimizing_polynomial(f, domain, s)?;
    let (panels, order) = l1_panels(domain.dim());
    let nodes = domain.quad_nodes(panels, order);
    let basis = multi_indices_up_to(domain.dim(), s);
    let center = p0.frame_center.clone();
    let scale = p0.frame_scale;
    // Precompute basis values at nodes.
    let mut btab = vec![0.0f64; nodes.len() * basis.len()];
    let mut fvals = vec![0.0f64; nodes.len()];
    for (ni, (x, _)) in nodes.iter().enumerate() {
        fvals[ni] = f.eval(x);
        for (bi, beta) in basis.iter().enumerate() {
            let mut mono = 1.0;
            for (ax, &b) in beta.iter().enumerate() {
                if b > 0 {
                    mono *= ((x[ax] - center[ax]) / scale).powi(b as i32);
                }
            }
            btab[ni * basis.len() + bi] = mono;
        }
    }
    let l1 = |coef: &[f64]| -> f64 {
        let mut acc = 0.0;
        for (ni, (_, w)) in nodes.iter().enumerate() {
            let mut pv = 0.0;
            for bi in 0..basis.len() {
                pv += coef[bi] * btab[ni * basis.len() + bi];
            }
            acc += (fvals[ni] - pv).abs() * w;
        }
        acc
    };
    // Starting point: projection coefficients in the same basis.
    let mut coef = vec![0.0f64; basis.len()];
    for (bi, beta) in basis.iter().enumerate() {
        // read off from p0: its MultiPoly is over the same frame/basis
        coef[bi] = p0.poly.coefficient(beta);
    }
    let e_proj = l1(&coef);
    if e_proj == 0.0 {
        return Ok(1.0);
    }
    let mut best = e_proj;
    let mut step = 0.5 * e_proj / domain.volume().max(1e-12);
    for _ in 0..60 {
        let mut improved = false;
        for bi in 0..coef.len() {
            for dir in [1.0, -1.0] {
                let old = coef[bi];
                coef[bi] = old + dir * step;
                let v = l1(&coef);
                if v < best * (1.0 - 1e-12) {
                    best = v;
                    improved = true;
                } else {
                    coef[bi] = old;
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-14 * e_proj {
                break;
            }
        }
    }
    Ok(e_proj / best.max(1e-300))
}

// ---------------------------------------------------------------------------
// Level families and sparse sums.
// ---------------------------------------------------------------------------

/// Parameters of a level-family scan over one shifted dyadic grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyParams {
    pub beta: f64,
    pub k: u32,
    pub ell: u32,
    /// Per-axis shift (entries in {0, 1/3, 2/3}).
    pub alpha: Vec<f64>,
    pub j_min: i32,
    pub j_max: i32,
    /// Cubes are enumerated inside [-box_half, box_half]^n.
    pub box_half: f64,
}

impl FamilyParams {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.alpha.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: self.alpha.len(),
            });
        }
        if self.k == 0 || self.ell > self.k {
            return Err(Error::InvalidParameter(format!(
                "family needs 1 ≤ ℓ ≤ k, got k={}, ℓ={}",
                self.k, self.ell
            )));
        }
        if self.j_min > self.j_max {
            return Err(Error::InvalidParameter(format!(
                "level window inverted: [{}, {}]",
                self.j_min, self.j_max
            )));
        }
        DyadicCube::new(self.alpha.clone(), 0, vec![0; dim])?;
        Ok(())
    }
}

/// A cube with its λ-independent score E_k(f,Q)/|Q|^{β+ℓ/n}; a level family
/// at height λ is exactly the set of cubes with score > λ.
#[derive(Debug, Clone)]
pub struct CubeScore {
    pub cube: DyadicCube,
    pub e_k: f64,
    pub score: f64,
}

/// Score every cube of the window that can intersect the support of f.
/// Cubes disjoint from supp f are skipped without quadrature — E_k vanishes
/// there exactly (the zero polynomial matches f identically).
pub fn score_cubes(f: &AnalyticField, params: &FamilyParams) -> Result<Vec<CubeScore>> {
    params.validate(f.dim())?;
    let dim = f.dim();
    let supp = f.support_radius();
    let n = dim as f64;
    let exponent = params.beta + params.ell as f64 / n;
    let mut out = Vec::new();
    for j in params.j_min..=params.j_max {
        let side = 2f64.powi(j);
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let mut m_lo = vec![0i64; dim];
        let mut m_hi = vec![0i64; dim];
        for ax in 0..dim {
            let off = sign * params.alpha[ax];
            m_lo[ax] = (-params.box_half / side - off - 1.0).floor() as i64;
            m_hi[ax] = (params.box_half / side - off).ceil() as i64;
        }
        let mut m = m_lo.clone();
        loop {
            let q = DyadicCube {
                alpha: params.alpha.clone(),
                j,
                m: m.clone(),
            };
            // Skip rule: nearest point of Q to the support center further
            // than the support radius ⇒ Q ∩ supp f = ∅ ⇒ E_k = 0.
            let cube = q.to_cube();
            let near = {
                let mut acc = 0.0;
                for ax in 0..dim {
                    let lo = cube.lo[ax];
                    let hi = cube.hi(ax);
                    let d = if lo > 0.0 {
                        lo
                    } else if hi < 0.0 {
                        -hi
                    } else {
                        0.0
                    };
                    acc += d * d;
                }
                acc.sqrt()
            };
            if near <= supp {
                let e_k = local_approximation(f, &Domain::Cube(cube), params.k)?;
                if e_k > 0.0 {
                    let score = e_k / q.volume().powf(exponent);
                    out.push(CubeScore { cube: q, e_k, score });
                }
            }
            let mut ax = 0;
            loop {
                if ax == dim {
                    break;
                }
                m[ax] += 1;
                if m[ax] <= m_hi[ax] {
                    break;
                }
                m[ax] = m_lo[ax];
                ax += 1;
            }
            if m == m_lo {
                break;
            }
        }
    }
    Ok(out)
}

/// The level family {Q : E_k(f,Q) > λ|Q|^{β+ℓ/n}} within the window.
#[derive(Debug, Clone)]
pub struct LevelFamily {
    pub lambda: f64,
    pub params: FamilyParams,
    pub members: Vec<CubeScore>,
}

pub fn level_family_from_scores(
    scores: &[CubeScore],
    lambda: f64,
    params: &FamilyParams,
) -> LevelFamily {
    LevelFamily {
        lambda,
        params: params.clone(),
        members: scores.iter().filter(|c| c.score > lambda).cloned().collect(),
    }
}

pub fn level_family(f: &AnalyticField, lambda: f64, params: &FamilyParams) -> Result<LevelFamily> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "level height must be positive, got {lambda}"
        )));
    }
    let scores = score_cubes(f, params)?;
    Ok(level_family_from_scores(&scores, lambda, params))
}

/// Σ_{Q ∈ family} |Q|^{p(β−1)} υ(Q). (The λ^p prefactor of the full
/// level-set functional is the caller's.)
pub fn sparse_sum(family: &LevelFamily, p: f64, w: &WeightSpec) -> Result<f64> {
    let mut acc = 0.0;
    for member in &family.members {
        let mass = w.cube_mass(&member.cube.to_cube());
        if !mass.is_finite() {
            return Err(Error::Precondition(format!(
                "weight mass not finite on {:?}",
                member.cube
            )));
        }
        acc += member.cube.volume().powf(p * (family.params.beta - 1.0)) * mass;
    }
    Ok(acc)
}

/// ∫ |∇^ℓ f|^p υ dx by cell quadrature over the box — the comparison side
/// for sparse sums.
pub fn weighted_gradient_energy(
    f: &AnalyticField,
    ell: u32,
    p: f64,
    w: &WeightSpec,
    grid: crate::field::GridSpec,
) -> Result<f64> {
    let mut x = [0.0f64; 3];
    let mut acc = 0.0;
    for i in 0..grid.total_points() {
        grid.point_of(i, &mut x);
        let g = crate::calculus::gradient_magnitude(f, ell, &x[..grid.dim])?;
        if g > 0.0 {
            acc += g.powf(p) * w.eval(&x[..grid.dim]);
        }
    }
    Ok(acc * grid.cell_volume())
}

/// The distinguished member containing x — minimal for β < 1, maximal for
/// β > 1 — together with the chain ratio
/// Σ_{Q ∋ x} |Q|^{p(β−1)} / |Q_x|^{p(β−1)}, which the nesting geometry
/// bounds by Σ_{j≥0} 2^{−j·n·p|β−1|}.
pub fn qx_check(
    family: &LevelFamily,
    p: f64,
    x: &[f64],
) -> Result<(DyadicCube, f64)> {
    let beta = family.params.beta;
    if (beta - 1.0).abs() < 1e-12 {
        return Err(Error::InvalidParameter(
            "chain ratio needs β ≠ 1".into(),
        ));
    }
    let containing: Vec<&CubeScore> = family
        .members
        .iter()
        .filter(|c| c.cube.contains_point(x))
        .collect();
    if containing.is_empty() {
        return Err(Error::Precondition(
            "point not covered by the level family".into(),
        ));
    }
    let qx = if beta < 1.0 {
        containing
            .iter()
            .min_by_key(|c| c.cube.j)
            .unwrap()
    } else {
        containing
            .iter()
            .max_by_key(|c| c.cube.j)
            .unwrap()
    };
    let e = p * (beta - 1.0);
    let denom = qx.cube.volume().powf(e);
    let num: f64 = containing.iter().map(|c| c.cube.volume().powf(e)).sum();
    Ok((qx.cube.clone(), num / denom))
}

// ---------------------------------------------------------------------------
// Oscillation functionals.
// ---------------------------------------------------------------------------

/// Renormalized averaged modulus |Q|^{−1−1/n} ∬_{Q×Q} |f(x) − f(y)| dx dy,
/// by matched midpoint quadrature on both copies of the cube.
pub fn averaged_modulus(f: &AnalyticField, q: &Cube) -> Result<f64> {
    if f.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            actual: q.dim(),
        });
    }
    let dim = q.dim();
    let m: usize = match dim {
        1 => 96,
        2 => 20,
        _ => 8,
    };
    let h = q.side / m as f64;
    let total = m.pow(dim as u32);
    // sample once, pair over the samples
    let mut vals = Vec::with_capacity(total);
    let mut idx = vec![0usize; dim];
    for flat in 0..total {
        let mut rem = flat;
        for ax in (0..dim).rev() {
            idx[ax] = rem % m;
            rem /= m;
        }
        let x: Vec<f64> = (0..dim)
            .map(|ax| q.lo[ax] + (idx[ax] as f64 + 0.5) * h)
            .collect();
        vals.push(f.eval(&x));
    }
    let cellw = h.powi(dim as i32);
    let mut acc = 0.0;
    for a in 0..total {
        for b in (a + 1)..total {
            acc += (vals[a] - vals[b]).abs();
        }
    }
    // off-diagonal pairs counted twice, diagonal contributes zero
    let double_integral = 2.0 * acc * cellw * cellw;
    let n = dim as f64;
    Ok(q.volume().powf(-1.0 - 1.0 / n) * double_integral)
}

/// Outcome of a Whitney comparison on one cube.
#[derive(Debug, Clone, Serialize)]
pub struct WhitneyReport {
    /// E_k(f,Q).
    pub numerator: f64,
    /// sup over sampled steps h of ‖Δ^k_h f‖_{L¹(Q(k,h))}.
    pub denominator: f64,
    /// numerator/denominator; `None` when both vanish (f ∈ P_{k−1}).
    pub ratio: Option<f64>,
}

/// Compare E_k(f,Q) against the sampled difference supremum
/// sup_{|h| ≤ ℓ(Q)/k} ‖Δ^k_h f‖_{L¹(Q(k,h))} with Q(k,h) the inner
/// sub-box where all k+1 difference nodes stay in Q. The discrete sup
/// (direction × radius grid) under-estimates the true one, so the ratio is
/// an over-estimate tracked for stability rather than compared to a sharp
/// constant.
pub fn whitney_ratio(f: &AnalyticField, q: &Cube, k: u32) -> Result<WhitneyReport> {
    if k == 0 {
        return Err(Error::InvalidParameter("whitney ratio needs k ≥ 1".into()));
    }
    let dim = q.dim();
    let numerator = local_approximation(f, &Domain::Cube(q.clone()), k)?;
    let dirs = sphere_directions(dim, 64);
    let radii = 16usize;
    let h_max = q.side / k as f64;
    let mut sup = 0.0f64;
    let mut h = vec![0.0f64; dim];
    for (d, _) in &dirs {
        for ri in 1..=radii {
            let r = h_max * ri as f64 / radii as f64;
            for ax in 0..dim {
                h[ax] = r * d[ax];
            }
            // Q(k,h): per-axis shrink so x and x + k h stay inside.
            let mut lo = vec![0.0f64; dim];
            let mut hi = vec![0.0f64; dim];
            let mut empty = false;
            for ax in 0..dim {
                let shift = k as f64 * h[ax];
                lo[ax] = q.lo[ax] + (-shift).max(0.0);
                hi[ax] = q.hi(ax) - shift.max(0.0);
                if hi[ax] <= lo[ax] {
                    empty = true;
                }
            }
            if empty {
                continue;
            }
            // midpoint L¹ over the (axis-parallel) box Q(k,h)
            let m: usize = match dim {
                1 => 64,
                2 => 16,
                _ => 8,
            };
            let mut acc = 0.0;
            let mut idx = vec![0usize; dim];
            let steps: Vec<f64> = (0..dim).map(|ax| (hi[ax] - lo[ax]) / m as f64).collect();
            let cellw: f64 = steps.iter().product();
            for flat in 0..m.pow(dim as u32) {
                let mut rem = flat;
                for ax in (0..dim).rev() {
                    idx[ax] = rem % m;
                    rem /= m;
                }
                let x: Vec<f64> = (0..dim)
                    .map(|ax| lo[ax] + (idx[ax] as f64 + 0.5) * steps[ax])
                    .collect();
                let d = crate::calculus::forward_difference(&|y| f.eval(y), &x, &h, k)?;
                acc += d.abs() * cellw;
            }
            sup = sup.max(acc);
        }
    }
    let tol = 1e-12;
    if sup <= tol {
        if numerator <= 10.0 * tol {
            return Ok(WhitneyReport {
                numerator,
                denominator: sup,
                ratio: None,
            });
        }
        return Err(Error::QuadratureInconsistency(format!(
            "difference sup vanished but E_k = {numerator}"
        )));
    }
    Ok(WhitneyReport {
        numerator,
        denominator: sup,
        ratio: Some(numerator / sup),
    })
}

/// Outcome of one local polynomial-approximation inequality check.
#[derive(Debug, Clone, Serialize)]
pub struct PoincareReport {
    pub numerator: f64,
    pub denominator: f64,
    /// numerator / (R^{k−j} · denominator); `None` when f is a polynomial
    /// of degree < k on the domain (0/0).
    pub ratio: Option<f64>,
}

/// ‖∇^j(f − P)·1_Ω‖_X / (R^{k−j}·‖∇^k f·1_Ω‖_X) with P the degree-(k−1)
/// minimizing polynomial of Ω and R the domain scale. Norms are evaluated
/// on the given sampling grid with the domain indicator applied at cell
/// centers.
pub fn poincare_ratio(
    f: &AnalyticField,
    domain: &Domain,
    k: u32,
    j: u32,
    spec: &SpaceSpec,
    grid: crate::field::GridSpec,
) -> Result<PoincareReport> {
    if !(j < k) {
        return Err(Error::InvalidParameter(format!(
            "needs 0 ≤ j < k, got j={j}, k={k}"
        )));
    }
    let p = minimizing_polynomial(f, domain, k - 1)?;
    let dim = grid.dim;
    let jays = multi_indices_of_order(dim, j);
    let kays = multi_indices_of_order(dim, k);
    let mut num_vals = Vec::with_capacity(grid.total_points());
    let mut den_vals = Vec::with_capacity(grid.total_points());
    let mut x = [0.0f64; 3];
    for i in 0..grid.total_points() {
        grid.point_of(i, &mut x);
        let xs = &x[..dim];
        if !domain.contains(xs) {
            num_vals.push(0.0);
            den_vals.push(0.0);
            continue;
        }
        let mut nsq = 0.0;
        if j == 0 {
            let d = f.eval(xs) - p.eval(xs);
            nsq = d * d;
        } else {
            for gamma in &jays {
                let d = f.partial(gamma, xs)? - p.partial(gamma, xs);
                nsq += d * d;
            }
        }
        num_vals.push(nsq.sqrt());
        let mut dsq = 0.0;
        for gamma in &kays {
            let d = f.partial(gamma, xs)?;
            dsq += d * d;
        }
        den_vals.push(dsq.sqrt());
    }
    let num_field = crate::field::SampledField {
        grid,
        values: num_vals,
    };
    let den_field = crate::field::SampledField {
        grid,
        values: den_vals,
    };
    let numerator = space_norm(spec, &num_field)?;
    let denominator = space_norm(spec, &den_field)?;
    let r_pow = domain.scale_r().powi((k - j) as i32);
    let tol = 1e-12;
    if denominator <= tol {
        if numerator <= 10.0 * tol {
            return Ok(PoincareReport {
                numerator,
                denominator,
                ratio: None,
            });
        }
        return Err(Error::Precondition(format!(
            "∇^k f vanishes on the domain but the residual is {numerator}"
        )));
    }
    Ok(PoincareReport {
        numerator,
        denominator,
        ratio: Some(numerator / (r_pow * denominator)),
    })
}

/// Telescoping pointwise bound: compares |f(x) − P_{B1}f(x)| against the
/// truncated series Σ_{j=0}^{J} ⨍_{2^{−j}B} |f − P_{2^{−j}B}f| of mean
/// oscillations on balls shrinking toward x (B and B1 both centered at x,
/// with B1 ⊆ B ⊆ 3B1).
pub fn variant_poincare_check(
    f: &AnalyticField,
    x: &[f64],
    radius_b: f64,
    radius_b1: f64,
    k: u32,
    depth: u32,
) -> Result<(f64, f64, Option<f64>)> {
    if !(radius_b1 <= radius_b && radius_b <= 3.0 * radius_b1) {
        return Err(Error::Precondition(format!(
            "needs B1 ⊆ B ⊆ 3B1: radii {radius_b1}, {radius_b}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("needs k ≥ 1".into()));
    }
    let b1 = Domain::Ball {
        center: x.to_vec(),
        radius: radius_b1,
    };
    let p1 = minimizing_polynomial(f, &b1, k - 1)?;
    let lhs = (f.eval(x) - p1.eval(x)).abs();
    let mut rhs = 0.0;
    for jj in 0..=depth {
        let bj = Domain::Ball {
            center: x.to_vec(),
            radius: radius_b * 2f64.powi(-(jj as i32)),
        };
        let e = local_approximation(f, &bj, k)?;
        rhs += e / bj.volume();
    }
    let tol = 1e-12;
    if rhs <= tol {
        if lhs <= 10.0 * tol {
            return Ok((lhs, rhs, None));
        }
        return Err(Error::Precondition(format!(
            "oscillation series vanished but pointwise gap is {lhs}"
        )));
    }
    Ok((lhs, rhs, Some(lhs / rhs)))
}
