//! Property-based invariants that must hold for arbitrary admissible
//! inputs, not just the tuned scenarios: norm axioms on random fields,
//! difference-calculus identities on random polynomials, combinatorial
//! identities for the symbol weights, and grid/λ-ladder geometry.

use bsvylab::bsvy::{gamma_valid, LambdaGrid};
use bsvylab::calculus::forward_difference;
use bsvylab::field::{AnalyticField, GridSpec, SampledField};
use bsvylab::spaces::{lattice_check, space_norm, OrliczSpec, SpaceSpec};
use bsvylab::weights::WeightSpec;
use proptest::prelude::*;

fn spaces_under_test() -> Vec<SpaceSpec> {
    vec![
        SpaceSpec::Lebesgue { p: 1.0 },
        SpaceSpec::Lebesgue { p: 2.5 },
        SpaceSpec::WeightedLebesgue {
            p: 2.0,
            weight: WeightSpec::Power { a: -0.5 },
        },
        SpaceSpec::Lorentz { r: 2.0, tau: 3.0 },
        SpaceSpec::Morrey { u: 3.0, p: 2.0 },
        SpaceSpec::Orlicz {
            phi: OrliczSpec::Power { p: 2.0 },
        },
        SpaceSpec::BourgainMorrey {
            u: 2.5,
            p: 2.0,
            r: 3.0,
        },
    ]
}

fn sampled(values: Vec<f64>) -> SampledField {
    let grid = GridSpec::new(1, values.len(), 2.0).unwrap();
    SampledField { grid, values }
}

proptest! {
    /// Every registered norm is positively 1-homogeneous.
    #[test]
    fn norms_are_homogeneous(
        values in proptest::collection::vec(-3.0f64..3.0, 32),
        c in 0.01f64..50.0,
    ) {
        let g = sampled(values.clone());
        let scaled = sampled(values.iter().map(|v| c * v).collect());
        for spec in spaces_under_test() {
            let a = space_norm(&spec, &g).unwrap();
            let b = space_norm(&spec, &scaled).unwrap();
            prop_assert!(
                (b - c * a).abs() <= 1e-9 * (1.0 + b.abs()),
                "{spec:?}: ‖c·g‖ = {b} but c·‖g‖ = {}",
                c * a
            );
        }
    }

    /// Pointwise domination implies norm domination (lattice property).
    #[test]
    fn norms_are_lattice_monotone(
        values in proptest::collection::vec(-3.0f64..3.0, 32),
        shrink in proptest::collection::vec(0.0f64..=1.0, 32),
    ) {
        let g2 = sampled(values.clone());
        let g1 = sampled(
            values
                .iter()
                .zip(shrink.iter())
                .map(|(v, s)| v * s)
                .collect(),
        );
        for spec in spaces_under_test() {
            prop_assert!(
                lattice_check(&spec, &g1, &g2).unwrap(),
                "{spec:?} violated the lattice property"
            );
        }
    }

    /// The k-th forward difference annihilates polynomials of degree < k.
    #[test]
    fn differences_annihilate_low_degree(
        coeffs in proptest::collection::vec(-5.0f64..5.0, 3),
        x in -2.0f64..2.0,
        h in prop_oneof![-0.75f64..-1e-3, 1e-3f64..0.75],
    ) {
        let deg = coeffs.len() as u32 - 1;
        let terms: Vec<(Vec<u32>, f64)> = coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| (vec![i as u32], *c))
            .collect();
        let f = AnalyticField::polynomial(1, terms);
        let k = deg + 1;
        let d = forward_difference(&|y: &[f64]| f.eval(y), &[x], &[h], k).unwrap();
        let scale = coeffs.iter().map(|c| c.abs()).fold(1.0, f64::max);
        prop_assert!(d.abs() <= 1e-10 * scale, "Δ^{k} = {d}");
    }

    /// The admissibility region for the radial exponent: for p = 1 it is
    /// (-∞, -q) ∪ (0, ∞); for p > 1 only γ = 0 is excluded.
    #[test]
    fn radial_exponent_region(p in 1.0f64..4.0, q in 1.0f64..4.0, gamma in -8.0f64..8.0) {
        let ok = gamma_valid(p, q, gamma);
        let expected = if gamma == 0.0 {
            false
        } else if p > 1.0 {
            true
        } else {
            gamma > 0.0 || gamma < -q
        };
        prop_assert_eq!(ok, expected, "p={}, q={}, gamma={}", p, q, gamma);
    }

    /// λ-grids are strictly increasing, bracket their window, and grow
    /// geometrically.
    #[test]
    fn lambda_grids_are_geometric(
        min_exp in -6.0f64..2.0,
        span in 0.5f64..6.0,
        per_decade in 2usize..20,
    ) {
        let grid = LambdaGrid {
            min: 10f64.powf(min_exp),
            max: 10f64.powf(min_exp + span),
            per_decade,
        };
        let values = grid.values();
        prop_assert!(values.len() >= 2);
        prop_assert!(values[0] >= grid.min * (1.0 - 1e-12));
        prop_assert!(*values.last().unwrap() <= grid.max * (1.0 + 1e-12));
        let ratio = values[1] / values[0];
        for w in values.windows(2) {
            prop_assert!(w[1] > w[0]);
            prop_assert!((w[1] / w[0] - ratio).abs() <= 1e-9 * ratio);
        }
    }

    /// Grid points enumerate the cell centers of [-hw, hw]^n.
    #[test]
    fn grid_points_stay_inside(points_pow in 1u32..6, hw in 0.5f64..10.0) {
        let points = 2usize.pow(points_pow).max(4);
        let grid = GridSpec::new(2, points, hw).unwrap();
        let mut x = [0.0f64; 2];
        let total = grid.total_points();
        prop_assert_eq!(total, points * points);
        for idx in [0, total / 3, total / 2, total - 1] {
            grid.point_of(idx, &mut x);
            for c in x {
                prop_assert!(c.abs() < hw, "point {c} outside half-width {hw}");
            }
        }
        let cell = grid.cell_volume();
        let expected = (2.0 * hw / points as f64).powi(2);
        prop_assert!((cell - expected).abs() <= 1e-12 * expected);
    }
}
