mod common;

use holdnet::fixed_point::{descend_to_root, solve_model};
use holdnet::scenarios::{
    bernoulli_distribution, support_range, sweep_support, BernoulliShockSpec, DistributionSource,
    SweepConfig,
};
use holdnet::{
    direction_feasibility, least_joint_root, AnalyticModel, BoundaryMatrix, CapitalGrid,
    DirectionSign, HoldingType, RegionTable, SolveError, SolverOptions, SupportLevel,
};
use rand::Rng;

use common::*;

/// Feasibility by scanning `v = (s, 1 − s)` at resolution 1e-4.
fn simplex_scan(m: &BoundaryMatrix<f64>, sign: DirectionSign) -> bool {
    (1..10_000).any(|k| {
        let s = k as f64 * 1e-4;
        let d = m.directional([s, 1.0 - s]);
        match sign {
            DirectionSign::Negative => d[0] < 0.0 && d[1] < 0.0,
            DirectionSign::Positive => d[0] > 0.0 && d[1] > 0.0,
        }
    })
}

#[test]
fn feasibility_matches_simplex_scan() {
    let mut g = rng(11);
    for i in 0..1000 {
        let mut e = [[0.0; 2]; 2];
        for row in &mut e {
            for v in row.iter_mut() {
                *v = g.random_range(0.0..2.5);
            }
        }
        if i % 5 == 0 {
            e[0][1] = 0.0;
        }
        if i % 7 == 0 {
            e[1][0] = 0.0;
        }
        let m = BoundaryMatrix(e);
        for sign in [DirectionSign::Negative, DirectionSign::Positive] {
            let got = direction_feasibility(&m, sign);
            assert_eq!(got.is_some(), simplex_scan(&m, sign), "{e:?} {sign:?}");
            if let Some(v) = got {
                let d = m.directional(v);
                let strict = match sign {
                    DirectionSign::Negative => d[0] < 0.0 && d[1] < 0.0,
                    DirectionSign::Positive => d[0] > 0.0 && d[1] > 0.0,
                };
                assert!(strict && v[0] > 0.0 && v[1] > 0.0);
            }
        }
        // Negative feasibility is the Perron condition.
        let neg = direction_feasibility(&m, DirectionSign::Negative).is_some();
        let rho = m.spectral_radius();
        if (rho - 1.0).abs() > 1e-9 {
            assert_eq!(neg, rho < 1.0, "{e:?} ρ={rho}");
        }
    }
}

#[test]
fn full_floor_mass_defaults_layer_one() {
    let mut g = rng(12);
    for _ in 0..20 {
        let r = g.random_range(1..=6);
        let x = g.random_range(-(r + 1)..=0);
        let grid = CapitalGrid::new(x, r).unwrap();
        let pts: Vec<_> = (0..3).map(|_| (x, g.random_range(x..=r), g.random_range(0.1..1.0))).collect();
        let d = dist_from(grid, &pts);
        let t = RegionTable::on_grid(holding(g.random()), grid);
        let res = least_joint_root(&d, &t, params(g.random_range(0.0..5.0), g.random_range(0.0..5.0)), &SolverOptions::default()).unwrap();
        assert!(res.z_hat[0] >= 1.0 - 1e-12, "{res:?}");
    }
}

#[test]
fn type_b_totals_fall_with_support() {
    for p2 in [14.0, 4.0] {
        let cfg = SweepConfig::new(
            HoldingType::B,
            params(14.0, p2),
            9,
            DistributionSource::Bernoulli(BernoulliShockSpec::independent(5, 9, 0.15, 0.15)),
        );
        let rep = sweep_support(&cfg, &support_range(9));
        for w in rep.rows.windows(2) {
            assert!(w[1].total.unwrap() <= w[0].total.unwrap() + 1e-12, "{:?}", rep.rows);
        }
    }
    let mut g = rng(13);
    for _ in 0..20 {
        let spec = BernoulliShockSpec::independent(g.random_range(1..=5), g.random_range(1..=5), g.random_range(0.01..0.3), g.random_range(0.01..0.3));
        let cfg = SweepConfig::new(
            HoldingType::B,
            params(g.random_range(0.5..8.0), g.random_range(0.5..8.0)),
            5,
            DistributionSource::Bernoulli(spec),
        );
        let mut xs = support_range(5);
        xs.push(SupportLevel::Unbounded);
        let rep = sweep_support(&cfg, &xs);
        for w in rep.rows.windows(2) {
            assert!(w[1].total.unwrap() <= w[0].total.unwrap() + 1e-12);
        }
    }
}

#[test]
fn deepest_support_defaults_together() {
    for p2 in [14.0, 4.0, 1.0] {
        let grid = CapitalGrid::new(-9, 9).unwrap();
        let d = bernoulli_distribution(&BernoulliShockSpec::independent(5, 9, 0.15, 0.15), grid).unwrap();
        let t = RegionTable::on_grid(HoldingType::A, grid);
        let z = least_joint_root(&d, &t, params(14.0, p2), &SolverOptions::default()).unwrap().z_hat;
        assert!((z[0] - z[1]).abs() < 1e-11, "p2={p2} {z:?}");
    }
}

#[test]
fn descent_agrees_with_ascent() {
    for (h, x, p2) in [
        (HoldingType::A, -3, 14.0),
        (HoldingType::A, -5, 14.0),
        (HoldingType::A, -8, 4.0),
        (HoldingType::B, -4, 14.0),
        (HoldingType::B, 0, 14.0),
    ] {
        let grid = CapitalGrid::new(x, 9).unwrap();
        let d = bernoulli_distribution(&BernoulliShockSpec::independent(5, 9, 0.15, 0.15), grid).unwrap();
        let t = RegionTable::on_grid(h, grid);
        let m = AnalyticModel::new(&d, &t, params(14.0, p2)).unwrap();
        let opts = SolverOptions::default();
        let up = solve_model(&m, &opts).unwrap().z_hat;
        let start = [(up[0] + 0.002).min(1.0), (up[1] + 0.002).min(1.0)];
        let f = m.f_value(start).unwrap();
        if f[0] <= 0.0 && f[1] <= 0.0 {
            let down = descend_to_root(&m, start, &opts).unwrap();
            assert!((down[0] - up[0]).abs() < 1e-9 && (down[1] - up[1]).abs() < 1e-9, "{h:?} x={x}: {up:?} {down:?}");
        }
    }
}

#[test]
fn acceleration_agrees_on_case_studies() {
    for x in [0, -3, -4, -5, -9] {
        let grid = CapitalGrid::new(x, 9).unwrap();
        let d = bernoulli_distribution(&BernoulliShockSpec::independent(5, 9, 0.15, 0.15), grid).unwrap();
        let t = RegionTable::on_grid(HoldingType::A, grid);
        let plain = least_joint_root(&d, &t, params(14.0, 14.0), &SolverOptions::default()).unwrap();
        let opts = SolverOptions {
            accelerate: true,
            ..SolverOptions::default()
        };
        let fast = least_joint_root(&d, &t, params(14.0, 14.0), &opts).unwrap();
        for l in 0..2 {
            assert!((plain.z_hat[l] - fast.z_hat[l]).abs() < 1e-9, "x={x}: {plain:?} {fast:?}");
        }
    }
}

#[test]
fn solver_errors() {
    let grid = CapitalGrid::new(-2, 3).unwrap();
    let d = dist_from(grid, &[(3, 3, 1.0)]);
    let t = RegionTable::on_grid(HoldingType::A, grid);
    assert_eq!(
        least_joint_root(&d, &t, params(1.0, 1.0), &SolverOptions::default()),
        Err(SolveError::NoInitialDefaults)
    );
    let other = RegionTable::on_grid(HoldingType::A, CapitalGrid::new(-1, 3).unwrap());
    assert!(matches!(
        least_joint_root(&d, &other, params(1.0, 1.0), &SolverOptions::default()),
        Err(SolveError::Analytic(_))
    ));
}

#[test]
fn single_precision_root() {
    let grid = CapitalGrid::new(0, 1).unwrap();
    let d = holdnet::Distribution32::new(
        grid,
        [
            (holdnet::CapitalPoint::new(1, 1), 0.99f32),
            (holdnet::CapitalPoint::new(0, 0), 0.01),
        ],
    )
    .unwrap();
    let t = RegionTable::on_grid(HoldingType::A, grid);
    let r = least_joint_root(
        &d,
        &t,
        holdnet::LayerParams::new(1.5f32, 1.5).unwrap(),
        &SolverOptions::with_tol(1e-6),
    )
    .unwrap();
    assert!((r.z_hat[0] - 0.5936).abs() < 1e-3);
}
