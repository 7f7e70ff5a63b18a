//! Scenario harness: parses TOML scenario files, dispatches verification
//! suites, writes machine-readable reports plus flat CSV tables, and maps
//! failures onto process exit codes.
//!
//! Exit codes: 0 all checks pass · 1 at least one check failed ·
//! 2 invalid configuration · 3 internal quadrature-consistency failure.

use crate::bsvy::{
    bsvy_limit, bsvy_sup, bsvy_value, defect_experiment, gamma_valid, gn_check,
    phi_curve, sharpness_experiment, FunctionalConfig, GnMode, HQuadrature, LambdaGrid,
    LimitDirection,
};
use crate::calculus::{forward_difference, limit_symbol_oracle, SymbolWeighting};
use crate::dyadic::{
    level_family_from_scores, qx_check, score_cubes, sparse_sum, weighted_gradient_energy,
    FamilyParams,
};
use crate::error::{Error, Result};
use crate::field::{make_catalog_function, AnalyticField, FunctionSpec, GridSpec, SampledField};
use crate::spaces::{lattice_check, space_norm, OrliczSpec, SpaceSpec};
use crate::weights::{ap_constant, critical_index, doubling_check, Cube, CubeFamily, WeightSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

// ---------------------------------------------------------------------------
// Report types.
// ---------------------------------------------------------------------------

/// Origin of a check's expected value: an exact identity or bound from the
/// underlying theory (`Paper`), an immediate mathematical fact (`Trivial`),
/// or a constant calibrated empirically in this laboratory (`Derived`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Provenance {
    Paper,
    Trivial,
    Derived,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Provenance::Paper => "PAPER",
            Provenance::Trivial => "TRIVIAL",
            Provenance::Derived => "DERIVED",
        })
    }
}

/// One verified quantity.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub computed: f64,
    pub predicted: f64,
    /// Relative tolerance of the comparison; 0 for exact / boolean checks.
    pub tolerance: f64,
    pub pass: bool,
    pub provenance: Provenance,
}

/// computed ≈ predicted within a relative tolerance (absolute when the
/// prediction vanishes).
fn check_close(
    name: impl Into<String>,
    computed: f64,
    predicted: f64,
    tolerance: f64,
    provenance: Provenance,
) -> CheckRecord {
    let pass = if predicted == 0.0 {
        computed.abs() <= tolerance
    } else {
        (computed - predicted).abs() <= tolerance * predicted.abs()
    };
    CheckRecord {
        name: name.into(),
        computed,
        predicted,
        tolerance,
        pass: pass && computed.is_finite(),
        provenance,
    }
}

/// computed ≤ bound (with a stated slack used only by the
/// resolution-doubling comparison).
fn check_le(
    name: impl Into<String>,
    computed: f64,
    bound: f64,
    slack: f64,
    provenance: Provenance,
) -> CheckRecord {
    CheckRecord {
        name: name.into(),
        computed,
        predicted: bound,
        tolerance: slack,
        pass: computed.is_finite() && computed <= bound,
        provenance,
    }
}

/// computed ≥ bound.
fn check_ge(
    name: impl Into<String>,
    computed: f64,
    bound: f64,
    slack: f64,
    provenance: Provenance,
) -> CheckRecord {
    CheckRecord {
        name: name.into(),
        computed,
        predicted: bound,
        tolerance: slack,
        pass: computed.is_finite() && computed >= bound,
        provenance,
    }
}

/// Boolean outcome.
fn check_flag(name: impl Into<String>, ok: bool, provenance: Provenance) -> CheckRecord {
    CheckRecord {
        name: name.into(),
        computed: if ok { 1.0 } else { 0.0 },
        predicted: 1.0,
        tolerance: 0.0,
        pass: ok,
        provenance,
    }
}

/// Quadrature resolutions a report was produced with.
#[derive(Debug, Clone, Serialize)]
pub struct ResolutionStamps {
    pub lambda_per_decade: usize,
    pub radial_per_decade: usize,
    pub directions: usize,
    pub grid_points_per_axis: usize,
    pub resolution_scale: f64,
}

/// Full scenario report. `wall_time_ms` is the only field that varies
/// between identical runs.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub suite: String,
    pub scenario: HarnessConfig,
    pub resolution: ResolutionStamps,
    pub checks: Vec<CheckRecord>,
    pub verdict: bool,
    pub wall_time_ms: u128,
}

// ---------------------------------------------------------------------------
// Configuration schema.
// ---------------------------------------------------------------------------

/// Raw `[functional]` section of a scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalSection {
    pub k: u32,
    /// Derivative level; defaults to k.
    #[serde(default)]
    pub ell: Option<u32>,
    pub q: f64,
    pub gamma: f64,
    #[serde(default = "d_lambda_min")]
    pub lambda_min: f64,
    #[serde(default = "d_lambda_max")]
    pub lambda_max: f64,
    #[serde(default = "d_lambda_per_decade")]
    pub lambda_per_decade: usize,
    #[serde(default = "d_directions")]
    pub directions: usize,
    #[serde(default = "d_radial_per_decade")]
    pub radial_per_decade: usize,
    #[serde(default = "d_r_min")]
    pub r_min: f64,
    #[serde(default = "d_r_max")]
    pub r_max: f64,
    pub grid_points: usize,
    pub grid_half_width: f64,
}

fn d_lambda_min() -> f64 {
    1e-4
}
fn d_lambda_max() -> f64 {
    1e6
}
fn d_lambda_per_decade() -> usize {
    16
}
fn d_directions() -> usize {
    64
}
fn d_radial_per_decade() -> usize {
    64
}
fn d_r_min() -> f64 {
    1e-6
}
fn d_r_max() -> f64 {
    64.0
}

impl FunctionalSection {
    /// Build the runtime config at a quadrature-resolution scale factor.
    pub fn build(&self, dim: usize, space: &SpaceSpec, scale: f64) -> Result<FunctionalConfig> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "resolution scale must be positive and finite, got {scale}"
            )));
        }
        let directions = ((self.directions as f64 * scale).round() as usize).max(4);
        let radial = ((self.radial_per_decade as f64 * scale).round() as usize).max(4);
        let mut points = ((self.grid_points as f64 * scale).round() as usize).max(4);
        if points % 2 == 1 {
            points += 1;
        }
        let cfg = FunctionalConfig {
            k: self.k,
            ell: self.ell.unwrap_or(self.k),
            q: self.q,
            gamma: self.gamma,
            space: space.clone(),
            lambda: LambdaGrid {
                min: self.lambda_min,
                max: self.lambda_max,
                per_decade: self.lambda_per_decade,
            },
            h_quad: HQuadrature {
                directions,
                radial_per_decade: radial,
                r_min: self.r_min,
                r_max: self.r_max,
            },
            grid: GridSpec::new(dim, points, self.grid_half_width)?,
        };
        cfg.validate(dim)?;
        Ok(cfg)
    }
}

/// Raw `[suite]` section: the suite name plus per-suite knobs (all with
/// defaults, so scenario files stay small diffs).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSection {
    /// One of: limit, equivalence, gn, sharpness, defect, sparse, weights,
    /// spaces, calculus-oracles.
    pub name: String,
    /// Scalar outer exponent used by suites that need one (gn, sharpness,
    /// sparse, weights, spaces).
    #[serde(default = "d_p")]
    pub p: f64,
    /// Headline relative tolerance (limit suite and friends).
    #[serde(default = "d_tolerance")]
    pub tolerance: f64,
    /// Re-run the suite with doubled quadrature and require headline
    /// stability (exit 3 on violation).
    #[serde(default)]
    pub verify_resolution: bool,
    /// Limit suite: also scan the sup and require limit ≤ (1+2 tol)·sup.
    #[serde(default)]
    pub check_against_sup: bool,
    /// Equivalence suite: number of random dilation-covariance probes.
    #[serde(default = "d_covariance_samples")]
    pub covariance_samples: usize,
    /// Sharpness suite: truncation radii (increasing).
    #[serde(default = "d_radii")]
    pub radii: Vec<f64>,
    /// Sharpness suite: level height of the scan.
    #[serde(default = "d_level")]
    pub level: f64,
    /// Sharpness suite: run the saturating control configuration instead of
    /// the growing one.
    #[serde(default)]
    pub control: bool,
    /// Defect suite: truncation cutoffs (increasing).
    #[serde(default = "d_epsilons")]
    pub epsilons: Vec<f64>,
    /// Defect suite: outer radius of the seminorm window.
    #[serde(default = "d_big_r")]
    pub big_r: f64,
    /// Interpolation modes; empty means the canonical trio.
    #[serde(default)]
    pub gn_modes: Vec<GnMode>,
    /// Sparse suite: cube-size exponent β (single-combo mode).
    #[serde(default = "d_beta")]
    pub beta: f64,
    /// Sparse suite: weight |x|^a (omitted: unit weight).
    #[serde(default)]
    pub weight_power: Option<f64>,
    /// Sparse suite: run the full (p, β) × weight × order battery.
    #[serde(default)]
    pub battery: bool,
    /// Dilation factors for stability records and the dilation sweep.
    #[serde(default = "d_dilations")]
    pub dilations: Vec<f64>,
    /// Inner exponents for the q sweep.
    #[serde(default = "d_q_values")]
    pub q_values: Vec<f64>,
    /// Seed for any randomized battery in the suite.
    #[serde(default = "d_seed")]
    pub seed: u64,
}

fn d_p() -> f64 {
    2.0
}
fn d_tolerance() -> f64 {
    0.05
}
fn d_covariance_samples() -> usize {
    10
}
fn d_radii() -> Vec<f64> {
    vec![8.0, 16.0, 32.0, 64.0]
}
fn d_level() -> f64 {
    0.75
}
fn d_epsilons() -> Vec<f64> {
    vec![1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2]
}
fn d_big_r() -> f64 {
    2.0
}
fn d_beta() -> f64 {
    0.5
}
fn d_dilations() -> Vec<f64> {
    vec![0.25, 1.0, 4.0]
}
fn d_q_values() -> Vec<f64> {
    vec![1.0, 1.5, 2.0, 3.0]
}
fn d_seed() -> u64 {
    7
}

/// A whole scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessConfig {
    pub function: FunctionSpec,
    pub space: SpaceSpec,
    pub functional: FunctionalSection,
    pub suite: SuiteSection,
}

impl HarnessConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: HarnessConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Structural validation before dispatch.
    pub fn validate(&self) -> Result<()> {
        const SUITES: [&str; 9] = [
            "limit",
            "equivalence",
            "gn",
            "sharpness",
            "defect",
            "sparse",
            "weights",
            "spaces",
            "calculus-oracles",
        ];
        if !SUITES.contains(&self.suite.name.as_str()) {
            return Err(Error::InvalidConfig(format!(
                "unknown suite `{}`; expected one of {}",
                self.suite.name,
                SUITES.join(", ")
            )));
        }
        self.space.validate(self.function.dim)?;
        let q = self.functional.q;
        if self.functional.gamma == 0.0 {
            return Err(Error::InvalidConfig(format!(
                "gamma = 0 is not admissible: the radial exponent must lie in \
                 (-inf, -q) = (-inf, -{q}) or (0, inf) when the outer exponent p = 1, \
                 and may be any nonzero real when p > 1"
            )));
        }
        // Where the outer space exposes a scalar exponent, enforce the full
        // admissible range, not just γ ≠ 0.
        if let Some(p) = outer_exponent(&self.space) {
            if self.uses_functional() && !gamma_valid(p, q, self.functional.gamma) {
                return Err(Error::InvalidConfig(format!(
                    "gamma = {} is outside the admissible range for p = {p}, q = {q}: \
                     allowed is (-inf, -{q}) ∪ (0, inf) when p = 1 and any nonzero \
                     value when p > 1",
                    self.functional.gamma
                )));
            }
        }
        Ok(())
    }

    fn uses_functional(&self) -> bool {
        matches!(self.suite.name.as_str(), "limit" | "equivalence" | "gn")
    }
}

fn outer_exponent(space: &SpaceSpec) -> Option<f64> {
    match space {
        SpaceSpec::Lebesgue { p } | SpaceSpec::WeightedLebesgue { p, .. } => Some(*p),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Suite runners.
// ---------------------------------------------------------------------------

/// Shared inputs of one run.
struct SuiteContext {
    f: AnalyticField,
    cfg: FunctionalConfig,
    suite: SuiteSection,
    strict: bool,
}

fn build_context(hc: &HarnessConfig, scale: f64, strict: bool) -> Result<SuiteContext> {
    let f = make_catalog_function(&hc.function)?;
    let cfg = hc.functional.build(hc.function.dim, &hc.space, scale)?;
    Ok(SuiteContext {
        f,
        cfg,
        suite: hc.suite.clone(),
        strict,
    })
}

/// Run one suite at one resolution scale.
pub fn run_suite(hc: &HarnessConfig, scale: f64, strict: bool) -> Result<Vec<CheckRecord>> {
    hc.validate()?;
    let ctx = build_context(hc, scale, strict)?;
    match hc.suite.name.as_str() {
        "limit" => run_limit(&ctx),
        "equivalence" => run_equivalence(&ctx),
        "gn" => run_gn(&ctx),
        "sharpness" => run_sharpness(&ctx),
        "defect" => run_defect(&ctx),
        "sparse" => run_sparse(&ctx),
        "weights" => run_weights(&ctx),
        "spaces" => run_spaces(&ctx),
        "calculus-oracles" => run_calculus_oracles(&ctx),
        other => Err(Error::InvalidConfig(format!("unknown suite `{other}`"))),
    }
}

fn run_limit(ctx: &SuiteContext) -> Result<Vec<CheckRecord>> {
    let res = bsvy_limit(&ctx.f, &ctx.cfg, SymbolWeighting::Multinomial)?;
    let mut recs = vec![
        check_close(
            "limit_vs_predicted",
            res.limit,
            res.predicted,
            ctx.suite.tolerance,
            Provenance::Paper,
        ),
        check_flag("limit_tail_monotone", res.tail_monotone, Provenance::Derived),
        check_flag(
            "limit_direction_matches_gamma_sign",
            matches!(
                (res.direction, ctx.cfg.gamma > 0.0),
                (LimitDirection::LambdaToInfinity, true)
                    | (LimitDirection::LambdaToZeroPlus, false)
            ),
            Provenance::Trivial,
        ),
        // Record of the weighting the surface symbol uses; the empirical
        // evidence for the choice lives in the calculus-oracles suite.
        check_flag("symbol_weighting_multinomial", true, Provenance::Derived),
    ];
    if ctx.suite.check_against_sup {
        let sup = bsvy_sup(&ctx.f, &ctx.cfg, ctx.strict)?;
        let ratio = if sup.sup > 0.0 {
            res.limit / sup.sup
        } else if res.limit.abs() <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        recs.push(check_le(
            "limit_over_sup",
            ratio,
            1.0 + 2.0 * ctx.suite.tolerance,
            ctx.suite.tolerance,
            Provenance::Derived,
        ));
    }
    Ok(recs)
}

/// Named fields exercised by the equivalence and defect batteries.
fn standard_catalog(dim: usize, max_derivative: u32) -> Result<Vec<(String, AnalyticField)>> {
    let mut moment = vec![0u32; dim];
    moment[0] = 1;
    let mut list = vec![
        (
            "gaussian".to_string(),
            AnalyticField::gaussian_bump(dim, 1.0, vec![0; dim])?,
        ),
        (
            "gaussian_moment".to_string(),
            AnalyticField::gaussian_bump(dim, 0.7, moment)?,
        ),
        (
            "windowed_sinusoid".to_string(),
            AnalyticField::windowed_sinusoid(dim, vec![2.0; dim], 0.3, 1.0, 2.0)?,
        ),
        (
            "gaussian_narrow".to_string(),
            AnalyticField::gaussian_bump(dim, 0.5, vec![0; dim])?,
        ),
    ];
    // The plateau witness tabulates only low-order derivatives.
    if max_derivative <= 2 {
        list.push((
            "mollified_indicator".to_string(),
            AnalyticField::mollified_indicator(dim),
        ));
    } else {
        list.push((
            "gaussian_wide".to_string(),
            AnalyticField::gaussian_bump(dim, 1.4, vec![0; dim])?,
        ));
    }
    Ok(list)
}

fn run_equivalence(ctx: &SuiteContext) -> Result<Vec<CheckRecord>> {
    let dim = ctx.f.dim();
    let catalog = standard_catalog(dim, ctx.cfg.k)?;
    let mut recs = Vec::new();
    let mut ratios = Vec::new();
    for (name, f) in &catalog {
        for &a in &ctx.suite.dilations {
            let fa = f.dilate(a)?;
            let scan = bsvy_sup(&fa, &ctx.cfg.dilated(a), ctx.strict)?;
            let ratio = scan.ratio.ok_or_else(|| {
                Error::Precondition(format!("degenerate comparison norm for `{name}` at a={a}"))
            })?;
            recs.push(CheckRecord {
                name: format!("equiv_ratio[{name},a={a}]"),
                computed: ratio,
                predicted: 1.0,
                tolerance: 0.5,
                pass: ratio.is_finite() && ratio > 0.0,
                provenance: Provenance::Derived,
            });
            ratios.push(ratio);
        }
    }
    let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
    recs.push(check_le(
        "equiv_window_max_over_min",
        max / min,
        4.0,
        0.25,
        Provenance::Derived,
    ));
    // Dilation covariance Φ_{f(a·)}(λ) = a^{k−n/p}·Φ_f(λ a^{−e}) at random
    // (a, λ): exact up to quadrature, checked on the first catalog entry
    // when the outer space is a Lebesgue norm.
    if ctx.suite.covariance_samples > 0 {
        if let Some(p) = outer_exponent(&ctx.cfg.space) {
            let f = &catalog[0].1;
            let e = ctx.cfg.threshold_exponent();
            let kf = ctx.cfg.k as f64;
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.suite.seed);
            let mut worst = 0.0f64;
            for _ in 0..ctx.suite.covariance_samples {
                let a = rng.gen_range(0.5..2.0);
                let lambda = rng.gen_range(0.05..5.0);
                let lhs = bsvy_value(&f.dilate(a)?, lambda, &ctx.cfg.dilated(a))?;
                let rhs = a.powf(kf - dim as f64 / p)
                    * bsvy_value(f, lambda * a.powf(-e), &ctx.cfg)?;
                let scale = rhs.abs().max(1e-12);
                worst = worst.max((lhs - rhs).abs() / scale);
            }
            recs.push(check_le(
                "dilation_covariance_max_rel_dev",
                worst,
                0.02,
                1.0,
                Provenance::Paper,
            ));
        }
    }
    Ok(recs)
}

fn gn_mode_label(mode: &GnMode) -> String {
    match mode {
        GnMode::InterpolationSs { s, q0 } => format!("interpolation-ss(s={s},q0={q0})"),
        GnMode::EndpointInf { s } => format!("endpoint-inf(s={s})"),
        GnMode::TwoParameter { eta, s0, q0 } => {
            format!("two-parameter(eta={eta},s0={s0},q0={q0})")
        }
    }
}

fn run_gn(ctx: &SuiteContext) -> Result<Vec<CheckRecord>> {
    let p = ctx.suite.p;
    let modes = if ctx.suite.gn_modes.is_empty() {
        vec![
            GnMode::InterpolationSs { s: 0.5, q0: 2.0 },
            GnMode::EndpointInf { s: 0.5 },
            GnMode::TwoParameter {
                eta: 0.5,
                s0: 0.0,
                q0: 4.0,
            },
        ]
    } else {
        ctx.suite.gn_modes.clone()
    };
    let mut recs = Vec::new();
    for mode in &modes {
        let label = gn_mode_label(mode);
        let r1 = gn_check(&ctx.f, &ctx.cfg, p, mode)?;
        let fa = ctx.f.dilate(2.0)?;
        let r2 = gn_check(&fa, &ctx.cfg.dilated(2.0), p, mode)?;
        match (r1.ratio, r2.ratio) {
            (Some(c1), Some(c2)) => {
                recs.push(check_le(
                    format!("gn_ratio[{label}]"),
                    c1,
                    100.0,
                    0.5,
                    Provenance::Paper,
                ));
                recs.push(check_le(
                    format!("gn_dilation_drift[{label}]"),
                    (c1 / c2).max(c2 / c1),
                    2.0,
                    0.25,
                    Provenance::Derived,
                ));
            }
            _ => {
                recs.push(check_flag(
                    format!("gn_degenerate_pair[{label}]"),
                    r1.ratio.is_none() && r2.ratio.is_none(),
                    Provenance::Trivial,
                ));
            }
        }
    }
    // s → 1 endpoint at q₀ = 1 collapses the interpolation to the plain
    // functional at inner exponent 1.
    let mut cfg1 = ctx.cfg.clone();
    cfg1.q = 1.0;
    let endpoint = gn_check(
        &ctx.f,
        &cfg1,
        p,
        &GnMode::InterpolationSs {
            s: 1.0 - 1e-6,
            q0: 1.0,
        },
    )?;
    let sup = bsvy_sup(&ctx.f, &cfg1, false)?;
    recs.push(check_close(
        "gn_endpoint_vs_sup",
        endpoint.lhs,
        sup.sup,
        0.01,
        Provenance::Derived,
    ));
    Ok(recs)
}

fn run_sharpness(ctx: &SuiteContext) -> Result<Vec<CheckRecord>> {
    let cfg = &ctx.cfg;
    let expected_gamma = -(cfg.ell as f64) * cfg.q;
    if (cfg.gamma - expected_gamma).abs() > 1e-12 {
        return Err(Error::InvalidConfig(format!(
            "sharpness scan requires gamma = -ell*q = {expected_gamma}, got {}",
            cfg.gamma
        )));
    }
    if ctx.f.dim() != 2 {
        return Err(Error::InvalidConfig(
            "the sharpness witness lives in dimension 2".into(),
        ));
    }
    let table = sharpness_experiment(
        ctx.suite.p,
        cfg.q,
        cfg.k,
        cfg.ell,
        &ctx.suite.radii,
        ctx.suite.level,
        cfg.h_quad.directions,
        cfg.h_quad.radial_per_decade,
    )?;
    let growth = table.growth_ratio();
    let mut recs = Vec::new();
    if ctx.suite.control {
        recs.push(check_le(
            "sharpness_control_growth",
            growth,
            1.1,
            0.25,
            Provenance::Derived,
        ));
    } else {
        recs.push(check_ge(
            "sharpness_growth",
            growth,
            1.5,
            0.25,
            Provenance::Paper,
        ));
        recs.push(check_flag(
            "sharpness_monotone",
            table.is_monotone(),
            Provenance::Derived,
        ));
    }
    Ok(recs)
}

fn run_defect(ctx: &SuiteContext) -> Result<Vec<CheckRecord>> {
    let cfg = &ctx.cfg;
    let dim = ctx.f.dim();
    let smooth: Vec<(String, AnalyticField)> = standard_catalog(dim, cfg.k)?
        .into_iter()
        .filter(|(n, _)| n != "gaussian_narrow" && n != "mollified_indicator")
        .collect();
    let mut recs = Vec::new();
    for (name, f) in smooth.iter().take(3) {
        let rep = defect_experiment(
            f,
            cfg.k,
            cfg.q,
            &ctx.suite.epsilons,
            ctx.suite.big_r,
            cfg.grid,
            cfg.h_quad.directions,
            cfg.h_quad.radial_per_decade,
        )?;
        recs.push(check_ge(
            format!("defect_slope[{name}]"),
            rep.slope,
            f64::MIN_POSITIVE,
            0.0,
            Provenance::Paper,
        ));
        recs.push(check_ge(
            format!("defect_r2[{name}]"),
            rep.r_squared,
            0.99,
            0.01,
            Provenance::Paper,
        ));
    }
    // Degree below the difference order: identically zero table.
    let mut exps = vec![0u32; dim];
    exps[0] = cfg.k - 1;
    let low = AnalyticField::polynomial(dim, vec![(exps, 1.5)]);
    let rep = defect_experiment(
        &low,
        cfg.k,
        cfg.q,
        &ctx.suite.epsilons,
        ctx.suite.big_r,
        cfg.grid,
        cfg.h_quad.directions,
        cfg.h_quad.radial_per_decade,
    )?;
    recs.push(check_flag(
        "defect_zero_on_low_degree",
        rep.identically_zero,
        Provenance::Trivial,
    ));
    Ok(recs)
}

const SPARSE_J_MIN: i32 = -6;
const SPARSE_J_MAX: i32 = 3;
const SPARSE_BOX_HALF: f64 = 4.0;

/// 60-point geometric λ-grid for the sparse sweep.
fn sparse_lambda_grid() -> Vec<f64> {
    (0..60)
        .map(|i| 1e-4 * 1e6f64.powf(i as f64 / 59.0))
        .collect()
}

/// sup_λ λ^p Σ_{Q ∈ family(λ)} |Q|^{p(β−1)} υ(Q) / ∫ |∇^k f|^p υ.
fn sparse_sup_ratio(
    f: &AnalyticField,
    beta: f64,
    p: f64,
    w: &WeightSpec,
    k: u32,
    box_half: f64,
    j_lo: i32,
    j_hi: i32,
    grid: GridSpec,
) -> Result<f64> {
    let params = FamilyParams {
        beta,
        k,
        ell: k,
        alpha: vec![0.0; f.dim()],
        j_min: j_lo,
        j_max: j_hi,
        box_half,
    };
    let scores = score_cubes(f, &params)?;
    let energy = weighted_gradient_energy(f, k, p, w, grid)?;
    if energy <= 0.0 {
        return Err(Error::Precondition(
            "gradient energy vanished in the sparse comparison".into(),
        ));
    }
    let mut sup = 0.0f64;
    for lambda in sparse_lambda_grid() {
        let fam = level_family_from_scores(&scores, lambda, &params);
        if fam.members.is_empty() {
            continue;
        }
        sup = sup.max(lambda.powf(p) * sparse_sum(&fam, p, w)?);
    }
    Ok(sup / energy)
}

fn weight_label(w: &WeightSpec) -> &'static str {
    match w {
        WeightSpec::Constant { .. } => "unit",
        _ => "power",
    }
}

fn run_sparse(ctx: &SuiteContext) -> Result<Vec<CheckRecord>> {
    if ctx.f.dim() != 1 {
        return Err(Error::InvalidConfig(
            "the sparse battery is calibrated for dimension 1".into(),
        ));
    }
    let mut recs = Vec::new();
    let combos: Vec<(f64, f64, WeightSpec, u32)> = if ctx.suite.battery {
        let mut v = Vec::new();
        for &(p, beta) in &[(1.0, -0.5), (1.0, 2.0), (2.0, 0.5)] {
            for w in [
                WeightSpec::Constant { c: 1.0 },
                WeightSpec::Power { a: -0.5 },
            ] {
                for k in [1u32, 2] {
                    v.push((p, beta, w.clone(), k));
                }
            }
        }
        v
    } else {
        let w = match ctx.suite.weight_power {
            None => WeightSpec::Constant { c: 1.0 },
            Some(a) => WeightSpec::Power { a },
        };
        vec![(ctx.suite.p, ctx.suite.beta, w, ctx.cfg.k)]
    };
    let f = &ctx.f;
    for (p, beta, w, k) in &combos {
        let mut values = Vec::new();
        for &a in &ctx.suite.dilations {
            let shift = a.log2();
            if (shift - shift.round()).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!(
                    "sparse dilations must be powers of two, got {a}"
                )));
            }
            let shift = shift.round() as i32;
            let fa = f.dilate(a)?;
            let grid = GridSpec::new(1, 2048, SPARSE_BOX_HALF / a)?;
            let v = sparse_sup_ratio(
                &fa,
                *beta,
                *p,
                w,
                *k,
                SPARSE_BOX_HALF / a,
                SPARSE_J_MIN - shift,
                SPARSE_J_MAX - shift,
                grid,
            )?;
            recs.push(check_flag(
                format!(
                    "sparse_finite[p={p},beta={beta},w={},k={k},a={a}]",
                    weight_label(w)
                ),
                v.is_finite() && v > 0.0,
                Provenance::Paper,
            ));
            values.push(v);
        }
        let vmax = values.iter().cloned().fold(f64::MIN, f64::max);
        let vmin = values.iter().cloned().fold(f64::MAX, f64::min);
        recs.push(check_le(
            format!(
                "sparse_dilation_window[p={p},beta={beta},w={},k={k}]",
                weight_label(w)
            ),
            vmax / vmin,
            3.0,
            0.25,
            Provenance::Derived,
        ));
    }
    // Chain-ratio bound on random draws: Σ_{Q ∋ x} |Q|^{p(β−1)} over the
    // extremal member never exceeds the geometric series bound.
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.suite.seed);
    let f0 = AnalyticField::gaussian_bump(1, 1.0, vec![0])?;
    let params = FamilyParams {
        beta: 0.0,
        k: 1,
        ell: 1,
        alpha: vec![0.0],
        j_min: SPARSE_J_MIN,
        j_max: SPARSE_J_MAX,
        box_half: SPARSE_BOX_HALF,
    };
    let scores = score_cubes(&f0, &params)?;
    let mut violations = 0u32;
    let mut covered = 0u32;
    for _ in 0..200 {
        let lambda = rng.gen_range(0.005..0.3);
        let x = [rng.gen_range(-1.5..1.5)];
        let p = if rng.gen_bool(0.5) { 1.0 } else { 2.0 };
        let bound = 1.0 / (1.0 - 2f64.powf(-(p * (params.beta - 1.0).abs())));
        let fam = level_family_from_scores(&scores, lambda, &params);
        match qx_check(&fam, p, &x) {
            Ok((_, ratio)) => {
                covered += 1;
                if ratio > bound * (1.0 + 1e-9) {
                    violations += 1;
                }
            }
            Err(Error::Precondition(_)) => {}
            Err(e) => return Err(e),
        }
    }
    recs.push(check_flag(
        "qx_chain_bound_no_violations",
        violations == 0 && covered >= 50,
        Provenance::Paper,
    ));
    Ok(recs)
}

fn run_weights(ctx: &SuiteContext) -> Result<Vec<CheckRecord>> {
    let p = ctx.suite.p.max(1.0);
    let family = CubeFamily::new(1, 4.0, None)?;
    let singular_family = CubeFamily::new(1, 4.0, Some(vec![0.0]))?;
    let mut recs = Vec::new();
    let unit = ap_constant(&WeightSpec::Constant { c: 1.0 }, p, &family)?;
    recs.push(CheckRecord {
        name: "ap_constant_of_unit_weight".into(),
        computed: unit,
        predicted: 1.0,
        tolerance: 0.0,
        pass: unit == 1.0,
        provenance: Provenance::Paper,
    });
    // Power-weight dichotomy: |x|^a is admissible iff −1 < a < p−1.
    let cases = [
        ("subcritical_negative", -0.5, true),
        ("below_upper_critical", p - 1.0 - 0.5, true),
        ("above_upper_critical", p - 1.0 + 0.5, false),
    ];
    for (label, a, finite) in cases {
        let est = ap_constant(&WeightSpec::Power { a }, p, &singular_family)?;
        recs.push(CheckRecord {
            name: format!("ap_power_{label}[a={a}]"),
            computed: est,
            predicted: if finite { 1.0 } else { f64::INFINITY },
            tolerance: 0.0,
            pass: est.is_finite() == finite,
            provenance: Provenance::Paper,
        });
    }
    // Monotonicity in the exponent: [υ]_{A_q} ≤ [υ]_{A_p} for q ≥ p.
    let w = WeightSpec::Power { a: -0.5 };
    let ps = [1.5, 2.0, 3.0, 4.0];
    let ests: Vec<f64> = ps
        .iter()
        .map(|&r| ap_constant(&w, r, &singular_family))
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for i in 0..ests.len() {
        for j in (i + 1)..ests.len() {
            worst = worst.max(ests[j] / ests[i]);
        }
    }
    recs.push(check_le(
        "ap_monotone_in_exponent",
        worst,
        1.0 + 1e-9,
        0.05,
        Provenance::Paper,
    ));
    // Doubling consequence of the estimated constant.
    let q = Cube::new(vec![0.25], 0.5)?;
    let s = Cube::new(vec![0.0], 1.0)?;
    let est = ap_constant(&w, 2.0, &singular_family)?;
    recs.push(check_flag(
        "doubling_from_ap_constant",
        doubling_check(&w, 2.0, &q, &s, est)?,
        Provenance::Derived,
    ));
    // Critical index of |x|^{1/2}: stabilizes at r = 3/2.
    let grid: Vec<f64> = (0..31).map(|i| 1.0 + 0.1 * i as f64).collect();
    let crit = critical_index(&WeightSpec::Power { a: 0.5 }, &grid, &singular_family)?;
    recs.push(check_close(
        "critical_index_sqrt_power",
        crit,
        1.5,
        0.1,
        Provenance::Derived,
    ));
    Ok(recs)
}

fn run_spaces(ctx: &SuiteContext) -> Result<Vec<CheckRecord>> {
    let p = ctx.suite.p;
    if !(p > 1.0) {
        return Err(Error::InvalidConfig(
            "the coincidence battery needs p > 1 (diagonal rearrangement norm)".into(),
        ));
    }
    let grid = ctx.cfg.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.suite.seed);
    let mut fields = Vec::with_capacity(20);
    for _ in 0..20 {
        let values: Vec<f64> = (0..grid.total_points())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        fields.push(SampledField { grid, values });
    }
    let lebesgue = SpaceSpec::Lebesgue { p };
    let pairs: Vec<(&str, SpaceSpec)> = vec![
        ("lorentz_diagonal", SpaceSpec::Lorentz { r: p, tau: p }),
        ("morrey_diagonal", SpaceSpec::Morrey { u: p, p }),
        (
            "orlicz_power",
            SpaceSpec::Orlicz {
                phi: OrliczSpec::Power { p },
            },
        ),
        (
            "weighted_unit",
            SpaceSpec::WeightedLebesgue {
                p,
                weight: WeightSpec::Constant { c: 1.0 },
            },
        ),
    ];
    let mut recs = Vec::new();
    for (label, spec) in &pairs {
        let mut worst = 0.0f64;
        for g in &fields {
            let a = space_norm(spec, g)?;
            let b = space_norm(&lebesgue, g)?;
            worst = worst.max((a - b).abs() / b.max(1e-300));
        }
        recs.push(check_le(
            format!("coincidence[{label}]"),
            worst,
            0.01,
            1.0,
            Provenance::Paper,
        ));
    }
    // Level-refined vs flat cube aggregation coincide when the level
    // exponent equals the position exponent.
    let (u, pp, r) = (2.5, 2.0, 3.0);
    let bm = SpaceSpec::BourgainMorrey { u, p: pp, r };
    let bbm = SpaceSpec::BesovBourgainMorrey {
        u,
        p: pp,
        r,
        tau: r,
    };
    let mut worst = 0.0f64;
    for g in &fields {
        let a = space_norm(&bbm, g)?;
        let b = space_norm(&bm, g)?;
        worst = worst.max((a - b).abs() / b.max(1e-300));
    }
    recs.push(check_le(
        "coincidence[bbm_diagonal]",
        worst,
        0.01,
        1.0,
        Provenance::Paper,
    ));
    // Lattice property on a dominated pair.
    let g2 = fields[0].clone();
    let g1 = SampledField {
        grid,
        values: g2.values.iter().map(|v| 0.5 * v).collect(),
    };
    recs.push(check_flag(
        "lattice_monotone",
        lattice_check(&lebesgue, &g1, &g2)?,
        Provenance::Trivial,
    ));
    Ok(recs)
}

fn run_calculus_oracles(ctx: &SuiteContext) -> Result<Vec<CheckRecord>> {
    let k = 2u32;
    let fns: Vec<(&str, AnalyticField)> = vec![
        ("gaussian", AnalyticField::gaussian_bump(2, 1.0, vec![0, 0])?),
        (
            "gaussian_xy",
            AnalyticField::gaussian_bump(2, 0.8, vec![1, 1])?,
        ),
        (
            "gaussian_xx",
            AnalyticField::gaussian_bump(2, 1.2, vec![2, 0])?,
        ),
    ];
    let x = [0.3, -0.2];
    let xi = [0.6, 0.8];
    let mut recs = Vec::new();
    for (name, f) in &fns {
        let rep = limit_symbol_oracle(f, k, &x, &xi)?;
        let winner_slope = match rep.winner {
            SymbolWeighting::Multinomial => rep.multinomial_residual_slope,
            SymbolWeighting::Plain => rep.plain_residual_slope,
        };
        recs.push(check_ge(
            format!("oracle_residual_slope[{name}]"),
            winner_slope,
            1.0,
            0.5,
            Provenance::Derived,
        ));
        recs.push(check_flag(
            format!("oracle_winner_multinomial[{name}]"),
            rep.winner == SymbolWeighting::Multinomial,
            Provenance::Derived,
        ));
        recs.push(check_close(
            format!("oracle_extrapolation[{name}]"),
            rep.extrapolated_limit,
            rep.multinomial_prediction,
            0.02,
            Provenance::Derived,
        ));
    }
    // Exact annihilation of the k-th difference on degree k−1.
    let lin = AnalyticField::polynomial(2, vec![(vec![1, 0], 2.0), (vec![0, 1], -1.0)]);
    let d = forward_difference(&|y: &[f64]| lin.eval(y), &x, &[0.37, -0.21], 2)?;
    recs.push(check_flag(
        "difference_annihilates_low_degree",
        d.abs() <= 1e-12,
        Provenance::Trivial,
    ));
    let _ = &ctx.f;
    Ok(recs)
}

// ---------------------------------------------------------------------------
// Scenario execution, resolution doubling, reports.
// ---------------------------------------------------------------------------

/// Execution options shared by run and sweep.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub strict: bool,
    pub resolution_scale: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            strict: false,
            resolution_scale: 1.0,
        }
    }
}

/// Compare two resolution passes record-by-record: exact checks must keep
/// their verdict; quantitative checks may move at most their stated slack.
fn compare_resolutions(base: &[CheckRecord], doubled: &[CheckRecord]) -> Result<()> {
    if base.len() != doubled.len() {
        return Err(Error::QuadratureInconsistency(format!(
            "resolution doubling changed the record count: {} vs {}",
            base.len(),
            doubled.len()
        )));
    }
    for (b, d) in base.iter().zip(doubled) {
        if b.name != d.name {
            return Err(Error::QuadratureInconsistency(format!(
                "record order changed under resolution doubling: `{}` vs `{}`",
                b.name, d.name
            )));
        }
        if b.tolerance == 0.0 {
            if b.pass != d.pass {
                return Err(Error::QuadratureInconsistency(format!(
                    "`{}` flipped verdict under resolution doubling",
                    b.name
                )));
            }
        } else {
            let allowed = b.tolerance * b.computed.abs().max(b.predicted.abs()).max(1.0);
            if (b.computed - d.computed).abs() > allowed {
                return Err(Error::QuadratureInconsistency(format!(
                    "`{}` moved from {} to {} under resolution doubling (allowed {allowed})",
                    b.name, b.computed, d.computed
                )));
            }
        }
    }
    Ok(())
}

fn stamps(hc: &HarnessConfig, scale: f64) -> ResolutionStamps {
    ResolutionStamps {
        lambda_per_decade: hc.functional.lambda_per_decade,
        radial_per_decade: ((hc.functional.radial_per_decade as f64 * scale).round() as usize)
            .max(4),
        directions: ((hc.functional.directions as f64 * scale).round() as usize).max(4),
        grid_points_per_axis: {
            let mut n = ((hc.functional.grid_points as f64 * scale).round() as usize).max(4);
            if n % 2 == 1 {
                n += 1;
            }
            n
        },
        resolution_scale: scale,
    }
}

/// Run a scenario end to end, including the optional resolution-doubling
/// self-check, and assemble the report.
pub fn run_scenario(hc: &HarnessConfig, opts: &RunOptions) -> Result<Report> {
    let t0 = Instant::now();
    let mut checks = run_suite(hc, opts.resolution_scale, opts.strict)?;
    if hc.suite.verify_resolution {
        let doubled = run_suite(hc, opts.resolution_scale * 2.0, opts.strict)?;
        compare_resolutions(&checks, &doubled)?;
        checks.push(check_flag(
            "resolution_doubling_consistent",
            true,
            Provenance::Derived,
        ));
    }
    let verdict = checks.iter().all(|c| c.pass);
    Ok(Report {
        suite: hc.suite.name.clone(),
        scenario: hc.clone(),
        resolution: stamps(hc, opts.resolution_scale),
        checks,
        verdict,
        wall_time_ms: t0.elapsed().as_millis(),
    })
}

// ---------------------------------------------------------------------------
// Sweeps.
// ---------------------------------------------------------------------------

/// Axis of a one-dimensional parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    /// Φ(λ) over the configured λ-grid.
    Lambda,
    /// Truncated-growth value(R) over the configured radii.
    R,
    /// Truncated-seminorm value(ε) over the configured cutoffs.
    Epsilon,
    /// (sup, comparison, ratio) across the configured dilations.
    Dilation,
    /// (sup, comparison, ratio) across the configured inner exponents.
    Q,
}

impl SweepAxis {
    pub fn file_stem(&self) -> &'static str {
        match self {
            SweepAxis::Lambda => "lambda",
            SweepAxis::R => "r",
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::Dilation => "dilation",
            SweepAxis::Q => "q",
        }
    }
}

/// A flat numeric table with fixed column headers.
#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub axis: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Run one sweep. The axis must fit the configured suite.
pub fn run_sweep(hc: &HarnessConfig, axis: SweepAxis, opts: &RunOptions) -> Result<SweepTable> {
    hc.validate()?;
    let ctx = build_context(hc, opts.resolution_scale, opts.strict)?;
    let functional_suite = ctx.suite.name == "limit"
        || ctx.suite.name == "equivalence"
        || ctx.suite.name == "gn";
    let supported = match axis {
        SweepAxis::Lambda | SweepAxis::Dilation | SweepAxis::Q => functional_suite,
        SweepAxis::R => ctx.suite.name == "sharpness",
        SweepAxis::Epsilon => ctx.suite.name == "defect",
    };
    if !supported {
        return Err(Error::InvalidConfig(format!(
            "sweep axis `{}` is not supported by suite `{}`",
            axis.file_stem(),
            ctx.suite.name
        )));
    }
    let table = match axis {
        SweepAxis::Lambda => {
            let lambdas = ctx.cfg.lambda.values();
            let phis = phi_curve(&ctx.f, &ctx.cfg, &lambdas)?;
            SweepTable {
                axis: "lambda".into(),
                headers: vec!["lambda".into(), "phi".into()],
                rows: lambdas
                    .into_iter()
                    .zip(phis)
                    .map(|(l, v)| vec![l, v])
                    .collect(),
            }
        }
        SweepAxis::R => {
            let t = sharpness_experiment(
                ctx.suite.p,
                ctx.cfg.q,
                ctx.cfg.k,
                ctx.cfg.ell,
                &ctx.suite.radii,
                ctx.suite.level,
                ctx.cfg.h_quad.directions,
                ctx.cfg.h_quad.radial_per_decade,
            )?;
            SweepTable {
                axis: "r".into(),
                headers: vec!["radius".into(), "value".into()],
                rows: t
                    .radii
                    .iter()
                    .zip(t.values.iter())
                    .map(|(r, v)| vec![*r, *v])
                    .collect(),
            }
        }
        SweepAxis::Epsilon => {
            let rep = defect_experiment(
                &ctx.f,
                ctx.cfg.k,
                ctx.cfg.q,
                &ctx.suite.epsilons,
                ctx.suite.big_r,
                ctx.cfg.grid,
                ctx.cfg.h_quad.directions,
                ctx.cfg.h_quad.radial_per_decade,
            )?;
            SweepTable {
                axis: "epsilon".into(),
                headers: vec![
                    "epsilon".into(),
                    "seminorm".into(),
                    "seminorm_pow_q".into(),
                ],
                rows: rep
                    .epsilons
                    .iter()
                    .zip(rep.values.iter())
                    .map(|(e, v)| vec![*e, *v, v.powf(ctx.cfg.q)])
                    .collect(),
            }
        }
        SweepAxis::Dilation => {
            let mut rows = Vec::new();
            for &a in &ctx.suite.dilations {
                let fa = ctx.f.dilate(a)?;
                let scan = bsvy_sup(&fa, &ctx.cfg.dilated(a), ctx.strict)?;
                rows.push(vec![a, scan.sup, scan.rhs, scan.ratio.unwrap_or(f64::NAN)]);
            }
            SweepTable {
                axis: "dilation".into(),
                headers: vec!["a".into(), "sup".into(), "rhs".into(), "ratio".into()],
                rows,
            }
        }
        SweepAxis::Q => {
            let mut rows = Vec::new();
            for &q in &ctx.suite.q_values {
                let mut cfg = ctx.cfg.clone();
                cfg.q = q;
                let scan = bsvy_sup(&ctx.f, &cfg, ctx.strict)?;
                rows.push(vec![q, scan.sup, scan.rhs, scan.ratio.unwrap_or(f64::NAN)]);
            }
            SweepTable {
                axis: "q".into(),
                headers: vec!["q".into(), "sup".into(), "rhs".into(), "ratio".into()],
                rows,
            }
        }
    };
    Ok(table)
}

// ---------------------------------------------------------------------------
// File emission.
// ---------------------------------------------------------------------------

fn checks_csv(checks: &[CheckRecord]) -> String {
    let mut out = String::from("name,computed,predicted,tolerance,pass,provenance\n");
    for c in checks {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            c.name, c.computed, c.predicted, c.tolerance, c.pass, c.provenance
        );
    }
    out
}

fn table_csv(table: &SweepTable) -> String {
    let mut out = table.headers.join(",");
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Write the report pair (structured JSON + flat CSV) into `out_dir`.
pub fn write_report(report: &Report, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let json = serde_json::to_string_pretty(report)?;
    std::fs::write(out_dir.join("report.json"), json + "\n")?;
    std::fs::write(out_dir.join("checks.csv"), checks_csv(&report.checks))?;
    Ok(())
}

/// Write one sweep table into `out_dir`.
pub fn write_sweep(table: &SweepTable, out_dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("sweep_{}.csv", table.axis));
    std::fs::write(&path, table_csv(table))?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// CLI.
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(
    name = "bsvylab",
    about = "Numerical laboratory for level-set difference functionals in function-space norms"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Scenario file (TOML with [function], [space], [functional], [suite]).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for reports and tables.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Treat scan-quality warnings (boundary argmax with a trending tail)
    /// as errors.
    #[arg(long)]
    pub strict: bool,
    /// Worker threads (overridden by BSVYLAB_THREADS).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Multiplier on all quadrature resolutions.
    #[arg(long, default_value_t = 1.0)]
    pub resolution_scale: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute a scenario: report.json + checks.csv, exit 0 iff all pass.
    Run(CommonArgs),
    /// Sweep one axis of a scenario into a CSV table.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Axis to sweep.
        #[arg(long, value_enum)]
        axis: SweepAxis,
    },
}

/// Exit code for an error per the harness contract.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::QuadratureInconsistency(_)
        | Error::BoundaryArgmax { .. }
        | Error::NonConvergentTail(_)
        | Error::BisectionFailure(_)
        | Error::SingularSystem(_) => 3,
        _ => 2,
    }
}

fn init_threads(requested: Option<usize>) {
    let n = std::env::var("BSVYLAB_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .or(requested);
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn load_config(path: &Path) -> Result<HarnessConfig> {
    let text = std::fs::read_to_string(path)?;
    HarnessConfig::from_toml(&text)
}

fn execute_run(args: &CommonArgs) -> Result<i32> {
    init_threads(args.threads);
    let hc = load_config(&args.config)?;
    let opts = RunOptions {
        strict: args.strict,
        resolution_scale: args.resolution_scale,
    };
    let report = run_scenario(&hc, &opts)?;
    write_report(&report, &args.out_dir)?;
    for c in &report.checks {
        println!(
            "[{}] {}: computed={} predicted={} tol={} ({})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.computed,
            c.predicted,
            c.tolerance,
            c.provenance
        );
    }
    println!(
        "suite={} verdict={} checks={} wall={}ms",
        report.suite,
        if report.verdict { "PASS" } else { "FAIL" },
        report.checks.len(),
        report.wall_time_ms
    );
    Ok(if report.verdict { 0 } else { 1 })
}

fn execute_sweep(common: &CommonArgs, axis: SweepAxis) -> Result<i32> {
    init_threads(common.threads);
    let hc = load_config(&common.config)?;
    let opts = RunOptions {
        strict: common.strict,
        resolution_scale: common.resolution_scale,
    };
    let table = run_sweep(&hc, axis, &opts)?;
    let path = write_sweep(&table, &common.out_dir)?;
    println!(
        "sweep axis={} rows={} -> {}",
        table.axis,
        table.rows.len(),
        path.display()
    );
    Ok(0)
}

/// Entry point used by the binary: parse, dispatch, map errors to exit
/// codes.
pub fn cli_main() -> i32 {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => execute_run(args),
        Command::Sweep { common, axis } => execute_sweep(common, *axis),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_toml(suite: &str) -> String {
        format!(
            r#"
[function]
id = "gaussian_bump"
dim = 1

[space]
variant = "lebesgue"
p = 2.0

[functional]
k = 1
q = 2.0
gamma = 1.0
lambda_min = 1e-3
lambda_max = 1e2
lambda_per_decade = 4
directions = 8
radial_per_decade = 16
r_min = 1e-6
r_max = 40.0
grid_points = 128
grid_half_width = 4.0

[suite]
name = "{suite}"
"#
        )
    }

    #[test]
    fn toml_round_trip_and_defaults() {
        let hc = HarnessConfig::from_toml(&minimal_toml("limit")).unwrap();
        assert_eq!(hc.suite.name, "limit");
        assert_eq!(hc.functional.ell, None);
        assert_eq!(hc.suite.p, 2.0);
        assert_eq!(hc.suite.dilations, vec![0.25, 1.0, 4.0]);
        let cfg = hc.functional.build(1, &hc.space, 1.0).unwrap();
        assert_eq!(cfg.ell, 1);
        assert_eq!(cfg.grid.points_per_axis, 128);
        // resolution scale doubles quadrature knobs
        let cfg2 = hc.functional.build(1, &hc.space, 2.0).unwrap();
        assert_eq!(cfg2.h_quad.directions, 16);
        assert_eq!(cfg2.h_quad.radial_per_decade, 32);
        assert_eq!(cfg2.grid.points_per_axis, 256);
    }

    #[test]
    fn gamma_zero_is_rejected_with_the_range_rule() {
        let text = minimal_toml("limit").replace("gamma = 1.0", "gamma = 0.0");
        let err = HarnessConfig::from_toml(&text).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("gamma = 0"), "{msg}");
        assert!(msg.contains("(-inf, -q)") || msg.contains("(0, inf)"), "{msg}");
        assert_eq!(exit_code_for(&err), 2);
    }

    #[test]
    fn inadmissible_gamma_at_p_one_is_rejected() {
        let text = minimal_toml("limit")
            .replace("gamma = 1.0", "gamma = -0.5")
            .replace("p = 2.0", "p = 1.0");
        let err = HarnessConfig::from_toml(&text).unwrap_err();
        assert_eq!(exit_code_for(&err), 2);
        // the same γ is fine when p > 1
        let ok = minimal_toml("limit").replace("gamma = 1.0", "gamma = -0.5");
        // γ < 0 needs a λ-window aimed at 0⁺, but parsing must succeed
        assert!(HarnessConfig::from_toml(&ok).is_ok());
    }

    #[test]
    fn unknown_suite_and_unknown_keys_are_rejected() {
        assert!(HarnessConfig::from_toml(&minimal_toml("nonsense")).is_err());
        let text = minimal_toml("limit") + "\nmystery_key = 3\n";
        assert!(HarnessConfig::from_toml(&text).is_err());
    }

    #[test]
    fn weights_suite_runs_and_passes() {
        let hc = HarnessConfig::from_toml(&minimal_toml("weights")).unwrap();
        let recs = run_suite(&hc, 1.0, false).unwrap();
        assert!(recs.iter().all(|r| r.pass), "{recs:#?}");
        assert!(recs.iter().any(|r| r.provenance == Provenance::Paper));
    }

    #[test]
    fn spaces_suite_runs_and_passes() {
        let hc = HarnessConfig::from_toml(&minimal_toml("spaces")).unwrap();
        let recs = run_suite(&hc, 1.0, false).unwrap();
        assert!(recs.iter().all(|r| r.pass), "{recs:#?}");
    }

    #[test]
    fn limit_suite_small_scale_passes_and_reports() {
        let mut text = minimal_toml("limit");
        text = text.replace("grid_points = 128", "grid_points = 512");
        text = text.replace("radial_per_decade = 16", "radial_per_decade = 32");
        text += "tolerance = 0.08\n";
        let hc = HarnessConfig::from_toml(&text).unwrap();
        let report = run_scenario(&hc, &RunOptions::default()).unwrap();
        assert!(report.verdict, "{:#?}", report.checks);
        assert_eq!(report.suite, "limit");
        assert!(report.checks.iter().any(|c| c.name == "limit_vs_predicted"));
        // CSV has one line per record plus header
        let csv = checks_csv(&report.checks);
        assert_eq!(csv.lines().count(), report.checks.len() + 1);
        assert!(csv.contains("PAPER"));
    }

    #[test]
    fn defect_suite_passes_at_coarse_resolution() {
        let mut text = minimal_toml("defect");
        text = text.replace("grid_points = 128", "grid_points = 96");
        text += "epsilons = [1e-3, 3e-3, 1e-2, 3e-2]\n";
        let hc = HarnessConfig::from_toml(&text).unwrap();
        let recs = run_suite(&hc, 1.0, false).unwrap();
        assert!(recs.iter().all(|r| r.pass), "{recs:#?}");
        assert!(recs
            .iter()
            .any(|r| r.name == "defect_zero_on_low_degree" && r.pass));
    }

    #[test]
    fn sweep_axis_suite_compatibility() {
        let hc = HarnessConfig::from_toml(&minimal_toml("limit")).unwrap();
        let opts = RunOptions::default();
        let t = run_sweep(&hc, SweepAxis::Lambda, &opts).unwrap();
        assert_eq!(t.headers, vec!["lambda", "phi"]);
        assert!(!t.rows.is_empty());
        // λ-curve tail is monotone toward the plateau for γ > 0
        assert!(run_sweep(&hc, SweepAxis::Epsilon, &opts).is_err());
        let csv = table_csv(&t);
        assert!(csv.starts_with("lambda,phi\n"));
    }

    #[test]
    fn resolution_comparison_flags_moved_quantities() {
        let base = vec![check_close("a", 1.0, 1.0, 0.05, Provenance::Paper)];
        let ok = vec![check_close("a", 1.02, 1.0, 0.05, Provenance::Paper)];
        let bad = vec![check_close("a", 1.2, 1.0, 0.05, Provenance::Paper)];
        assert!(compare_resolutions(&base, &ok).is_ok());
        let err = compare_resolutions(&base, &bad).unwrap_err();
        assert_eq!(exit_code_for(&err), 3);
    }
}
