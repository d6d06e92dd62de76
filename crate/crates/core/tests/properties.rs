use core::f64::consts::PI;

use hgf_core::diagnostics::{pinching_ratio, ricci_sup_norm, PlaneSampling};
use hgf_core::flow::{step, FlowState, FlowVariant};
use hgf_core::presets::{default_grid, instantiate, MetricPreset};
use hgf_core::tensor::CurvatureBundle;
use hgf_core::verify::{convergence_order, ResidualEntry, ResidualSeries};
use hgf_core::{ChartGrid, Field, Rank};
use proptest::prelude::*;

fn trig(grid: ChartGrid, a: [f64; 4]) -> Field {
    Field::from_fn(grid, Rank::SCALAR, move |x, b| {
        b[0] = a[0] * (x[0] + a[1]).sin() * (2.0 * x[1]).cos() + a[2] * (x[1] - a[3]).cos();
    })
}

fn shifted(f: &Field, axis: usize) -> Field {
    let grid = *f.grid();
    let nc = f.ncomp();
    let shape = grid.shape();
    let mut data = vec![0.0; f.data().len()];
    for p in 0..grid.num_points() {
        let mut idx = grid.multi_index(p);
        idx[axis] = (idx[axis] + 1) % shape[axis];
        let q = grid.linear_index(idx);
        data[q * nc..(q + 1) * nc].copy_from_slice(f.at(p));
    }
    Field::from_data(grid, f.rank(), data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn derivatives_are_linear(
        a in prop::array::uniform4(-2.0f64..2.0),
        b in prop::array::uniform4(-2.0f64..2.0),
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
        axis in 0usize..2,
        order in 1usize..3,
    ) {
        let grid = ChartGrid::periodic_cube(2, 16, 2.0 * PI).unwrap();
        let (f, g) = (trig(grid, a), trig(grid, b));
        let lhs = f.lincomb(alpha, &g, beta).unwrap().partial(axis, order).unwrap();
        let rhs = f.partial(axis, order).unwrap().lincomb(alpha, &g.partial(axis, order).unwrap(), beta).unwrap();
        let scale = 1.0 + lhs.max_abs();
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-12 * scale);
    }

    #[test]
    fn periodic_shift_commutes_with_differentiation(
        a in prop::array::uniform4(-2.0f64..2.0),
        axis in 0usize..2,
        shift_axis in 0usize..2,
        order in 1usize..3,
    ) {
        let grid = ChartGrid::periodic_cube(2, 12, 2.0 * PI).unwrap();
        let f = trig(grid, a);
        let d_then_shift = shifted(&f.partial(axis, order).unwrap(), shift_axis);
        let shift_then_d = shifted(&f, shift_axis).partial(axis, order).unwrap();
        prop_assert_eq!(d_then_shift.data(), shift_then_d.data());
    }

    #[test]
    fn curvature_symmetries_hold_to_roundoff(seed in 0u64..1000, eps in -0.3f64..0.3, dim in 2usize..4) {
        let preset = MetricPreset::RandomSmooth { epsilon: eps / dim as f64, seed };
        let grid = default_grid(&preset, dim, 8).unwrap();
        let (g, _) = instantiate(&preset, &grid, 0.0).unwrap();
        let bd = CurvatureBundle::compute(&g).unwrap();
        let r = &bd.riemann;
        let n = dim;
        let i4 = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
        let tol = 1e-10 * (r.max_abs() + 1.0);
        for p in 0..grid.num_points() {
            let v = r.at(p);
            for i in 0..n { for j in 0..n { for k in 0..n { for l in 0..n {
                let x = v[i4(i, j, k, l)];
                prop_assert!((x + v[i4(j, i, k, l)]).abs() <= tol);
                prop_assert!((x + v[i4(i, j, l, k)]).abs() <= tol);
                prop_assert!((x - v[i4(k, l, i, j)]).abs() <= tol);
                prop_assert!((x + v[i4(j, k, i, l)] + v[i4(k, i, j, l)]).abs() <= tol);
            }}}}
            let ric = bd.ricci.at(p);
            for i in 0..n { for k in 0..n {
                prop_assert_eq!(ric[i * n + k], ric[k * n + i]);
            }}
        }
    }

    #[test]
    fn more_planes_widen_the_sectional_range(seed in 0u64..1000, m in 0usize..6, extra in 1usize..6) {
        let preset = MetricPreset::RandomSmooth { epsilon: 0.05, seed };
        let grid = default_grid(&preset, 3, 8).unwrap();
        let (g, _) = instantiate(&preset, &grid, 0.0).unwrap();
        let bd = CurvatureBundle::compute(&g).unwrap();
        let few = pinching_ratio(&bd, g.field(), &PlaneSampling { random_planes: m, seed: 9 }).unwrap();
        let many = pinching_ratio(&bd, g.field(), &PlaneSampling { random_planes: m + extra, seed: 9 }).unwrap();
        prop_assert!(many.k_min <= few.k_min);
        prop_assert!(many.k_max >= few.k_max);
        prop_assert!(many.k_min <= many.k_max);
    }

    #[test]
    fn ricci_sup_is_invariant_under_periodic_relabelling(seed in 0u64..1000, axis in 0usize..2) {
        let preset = MetricPreset::RandomSmooth { epsilon: 0.1, seed };
        let grid = default_grid(&preset, 2, 12).unwrap();
        let (g, _) = instantiate(&preset, &grid, 0.0).unwrap();
        let gs = hgf_core::tensor::MetricField::with_default_floor(shifted(g.field(), axis)).unwrap();
        let a = ricci_sup_norm(&CurvatureBundle::compute(&g).unwrap()).unwrap();
        let b = ricci_sup_norm(&CurvatureBundle::compute(&gs).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn steps_are_deterministic_and_symmetric(seed in 0u64..1000, dt in 0.001f64..0.05) {
        let preset = MetricPreset::RandomSmooth { epsilon: 0.05, seed };
        let grid = default_grid(&preset, 2, 12).unwrap();
        let (g, h) = instantiate(&preset, &grid, 0.0).unwrap();
        let (g2, h2) = instantiate(&preset, &grid, 0.0).unwrap();
        prop_assert_eq!(g.field().data(), g2.field().data());
        prop_assert_eq!(h.field().data(), h2.field().data());
        let a = step(&FlowState::new(g, h).unwrap(), FlowVariant::Hgf, dt).unwrap();
        let b = step(&FlowState::new(g2, h2).unwrap(), FlowVariant::Hgf, dt).unwrap();
        prop_assert_eq!(a.g.field().data(), b.g.field().data());
        prop_assert_eq!(a.h.field().data(), b.h.field().data());
        for f in [a.g.field(), a.h.field()] {
            for p in 0..grid.num_points() {
                let v = f.at(p);
                prop_assert_eq!(v[1], v[2]);
            }
        }
    }

    #[test]
    fn series_stay_sorted_and_orders_are_recovered(
        p in 0.5f64..6.0,
        c in 1e-6f64..1.0,
        perm in Just([2usize, 0, 3, 1]).prop_shuffle(),
    ) {
        let hs: [f64; 4] = [0.4, 0.2, 0.1, 0.05];
        let mut s = ResidualSeries::new("synthetic");
        for &i in &perm {
            let r = c * hs[i].powf(p);
            s.push(ResidualEntry { spacing: hs[i], dt: None, max: r, rms: r }).unwrap();
        }
        for w in s.entries.windows(2) {
            prop_assert!(w[0].spacing > w[1].spacing);
        }
        if s.entries.iter().filter(|e| e.max >= 1e-13).count() >= 2 {
            prop_assert!((convergence_order(&s).unwrap() - p).abs() < 1e-9);
        }
    }
}
