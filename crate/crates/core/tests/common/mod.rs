#![allow(dead_code)]

use holdnet::fixed_point::{descend_to_root, picard_trace, solve_model};
use holdnet::network::MonteCarloConfig;
use holdnet::capital::in_default_region;
use holdnet::{
    monte_carlo_estimate, run_cascade_rounds, run_sequential_exploration,
    AnalyticModel, CapitalGrid, CapitalPoint, Distribution64, HoldingType, Layer, LayerParams64,
    NetworkInstance, RegionTable, SolverOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn holding(h: bool) -> HoldingType {
    if h {
        HoldingType::A
    } else {
        HoldingType::B
    }
}

pub fn dist_from(grid: CapitalGrid, points: &[(i32, i32, f64)]) -> Distribution64 {
    let total: f64 = points.iter().map(|p| p.2).sum();
    Distribution64::with_tolerance(
        grid,
        points
            .iter()
            .map(|&(a, b, m)| (CapitalPoint::new(a, b), m / total)),
        1e-9,
    )
    .expect("valid random distribution")
}

/// Up to `k` random support points with random positive masses.
pub fn random_dist(rng: &mut ChaCha8Rng, grid: CapitalGrid, k: usize) -> Distribution64 {
    let (x, r) = (grid.x_floor(), grid.r_max());
    let pts: Vec<(i32, i32, f64)> = (0..k)
        .map(|_| {
            (
                rng.random_range(x..=r),
                rng.random_range(x..=r),
                rng.random_range(0.05..1.0),
            )
        })
        .collect();
    dist_from(grid, &pts)
}

pub fn random_grid(rng: &mut ChaCha8Rng, max_r: i32) -> CapitalGrid {
    let r = rng.random_range(1..=max_r);
    let x = rng.random_range(-(r + 1)..=0);
    CapitalGrid::new(x, r).unwrap()
}

pub fn params(p1: f64, p2: f64) -> LayerParams64 {
    LayerParams64::new(p1, p2).unwrap()
}

/// Downward closure of `D_{J,l}` and the decomposition of `∂D_{J,l}` into
/// the one-hit transition sets, checked point by point.
pub fn check_region_algebra(h: HoldingType, x: i32, r: i32) -> Result<(), String> {
    let grid = CapitalGrid::new(x, r).unwrap();
    let table = RegionTable::on_grid(h, grid);
    let direct = |p: CapitalPoint, l: Layer| {
        let (own, other) = (p.get(l), p.get(l.other()));
        let cap = if h == HoldingType::A { -x } else { 0 };
        own <= x || (own + other <= 0 && own <= cap)
    };
    for p in grid.points() {
        let class = table.class(p).unwrap();
        for l in Layer::BOTH {
            let inside = class.in_default(l);
            if inside != direct(p, l) || inside != in_default_region(h, x, p, l) {
                return Err(format!("{h:?} x={x} R={r}: membership of {p} in D_{l:?}"));
            }
            let mut any = false;
            for m in Layer::BOTH {
                let down = p.get(m) - 1;
                if inside && down >= x && !direct(p.with(m, down), l) {
                    return Err(format!("{h:?} x={x}: D_{l:?} not closed below {p}"));
                }
                let want = !inside && down >= x && direct(p.with(m, down), l);
                if class.in_transition(l, m) != want {
                    return Err(format!("{h:?} x={x}: transition ({l:?},{m:?}) at {p}"));
                }
                any |= want;
            }
            if class.in_boundary(l) != any {
                return Err(format!("{h:?} x={x}: boundary union at {p}"));
            }
            if class.in_boundary(l) && inside {
                return Err(format!("{h:?} x={x}: boundary meets region at {p}"));
            }
        }
        // Dominated points of a defaulted point default.
        for l in Layer::BOTH {
            if direct(p, l) {
                for q in grid.points().filter(|q| q.dominated_by(p)) {
                    if !direct(q, l) {
                        return Err(format!("{h:?} x={x}: {q} ≤ {p} escapes D_{l:?}"));
                    }
                }
            }
        }
    }
    Ok(())
}

/// `f_l` is non-decreasing in `z_m` for `m ≠ l`.
pub fn check_cross_coupling(
    model: &AnalyticModel<'_, f64>,
    z: [f64; 2],
    step: [f64; 2],
) -> Result<(), String> {
    let f = model.f_value(z).map_err(|e| e.to_string())?;
    let z1 = [(z[0] + step[0]).min(1.0), z[1]];
    let z2 = [z[0], (z[1] + step[1]).min(1.0)];
    let f_up1 = model.f_value(z1).map_err(|e| e.to_string())?;
    let f_up2 = model.f_value(z2).map_err(|e| e.to_string())?;
    if f_up1[1] < f[1] - 1e-13 {
        return Err(format!("f_2 decreased in z_1 at {z:?}"));
    }
    if f_up2[0] < f[0] - 1e-13 {
        return Err(format!("f_1 decreased in z_2 at {z:?}"));
    }
    Ok(())
}

/// At `x = 0` each `f_l` ignores the other layer and both holding types agree.
pub fn check_decoupling(
    dist: &Distribution64,
    p: LayerParams64,
    z: [f64; 2],
    other: [f64; 2],
) -> Result<(), String> {
    let grid = *dist.grid();
    assert_eq!(grid.x_floor(), 0);
    let ta = RegionTable::on_grid(HoldingType::A, grid);
    let tb = RegionTable::on_grid(HoldingType::B, grid);
    let ma = AnalyticModel::new(dist, &ta, p).unwrap();
    let mb = AnalyticModel::new(dist, &tb, p).unwrap();
    let f = ma.f_value(z).unwrap();
    let g = ma.f_value([z[0], other[1]]).unwrap();
    let h = ma.f_value([other[0], z[1]]).unwrap();
    let fb = mb.f_value(z).unwrap();
    if (f[0] - g[0]).abs() > 1e-14 || (f[1] - h[1]).abs() > 1e-14 {
        return Err(format!("layers coupled at x = 0: {f:?} {g:?} {h:?}"));
    }
    if (f[0] - fb[0]).abs() > 1e-14 || (f[1] - fb[1]).abs() > 1e-14 {
        return Err(format!("holding types differ at x = 0: {f:?} {fb:?}"));
    }
    let m = ma.boundary_matrix(z).unwrap();
    if m.0[0][1] != 0.0 || m.0[1][0] != 0.0 {
        return Err(format!("off-diagonal boundary mass at x = 0: {:?}", m.0));
    }
    Ok(())
}

/// Largest deviation between `M − I` and central differences of `f`.
pub fn finite_difference_error(model: &AnalyticModel<'_, f64>, z: [f64; 2], h: f64) -> f64 {
    let jac = model.boundary_matrix(z).unwrap().jacobian();
    let mut worst = 0.0f64;
    for m in 0..2 {
        let mut up = z;
        let mut dn = z;
        up[m] += h;
        dn[m] -= h;
        let fu = model.f_value(up).unwrap();
        let fd = model.f_value(dn).unwrap();
        for l in 0..2 {
            let num = (fu[l] - fd[l]) / (2.0 * h);
            worst = worst.max((num - jac[l][m]).abs());
        }
    }
    worst
}

/// Picard iterates never decrease and the least root lies below every
/// point where both `f_l ≤ 0`.
pub fn check_least_root(model: &AnalyticModel<'_, f64>, rng: &mut ChaCha8Rng, probes: usize) -> Result<(), String> {
    let trace = picard_trace(model, 200).map_err(|e| e.to_string())?;
    for w in trace.windows(2) {
        if w[1][0] < w[0][0] - 1e-15 || w[1][1] < w[0][1] - 1e-15 {
            return Err(format!("Picard step decreased: {:?} -> {:?}", w[0], w[1]));
        }
    }
    let root = solve_model(model, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let mut candidates = vec![[1.0, 1.0]];
    for _ in 0..probes {
        candidates.push([rng.random::<f64>(), rng.random::<f64>()]);
    }
    for c in candidates {
        let f = model.f_value(c).unwrap();
        if f[0] <= 0.0 && f[1] <= 0.0 {
            if root.z_hat[0] > c[0] + 1e-9 || root.z_hat[1] > c[1] + 1e-9 {
                return Err(format!("root {:?} not below super-solution {c:?}", root.z_hat));
            }
            let down = descend_to_root(model, c, &SolverOptions::default())
                .map_err(|e| e.to_string())?;
            if down[0] < root.z_hat[0] - 1e-9 || down[1] < root.z_hat[1] - 1e-9 {
                return Err(format!("descent from {c:?} went below the root: {down:?}"));
            }
        }
    }
    Ok(())
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> (NetworkInstance, RegionTable) {
    let grid = random_grid(rng, 4);
    let k = rng.random_range(1..=5);
    let dist = random_dist(rng, grid, k);
    let h = holding(rng.random());
    let n = rng.random_range(2..=200);
    let p = params(rng.random_range(0.0..6.0f64).min(n as f64), rng.random_range(0.0..6.0f64).min(n as f64));
    let net = holdnet::sample_network(n, &p, &dist, rng.random()).unwrap();
    (net, RegionTable::on_grid(h, grid))
}

/// Rounds and sequential exploration reach the same final sets.
pub fn check_process_equivalence(net: &NetworkInstance, table: &RegionTable, seeds: &[u64]) -> Result<(), String> {
    let rounds = run_cascade_rounds(net, table).map_err(|e| e.to_string())?;
    if rounds.rounds_used > 2 * net.n() {
        return Err(format!("{} rounds for n = {}", rounds.rounds_used, net.n()));
    }
    for w in rounds.per_round_sizes.windows(2) {
        if w[1].0 < w[0].0 || w[1].1 < w[0].1 {
            return Err("round sizes decreased".into());
        }
    }
    for &s in seeds {
        let seq = run_sequential_exploration(net, table, s).map_err(|e| e.to_string())?;
        if seq.defaulted != rounds.defaulted {
            return Err(format!("final sets differ for exploration seed {s}"));
        }
    }
    Ok(())
}

/// Moves every support point upward by a random amount.
pub fn dominating(rng: &mut ChaCha8Rng, dist: &Distribution64) -> Distribution64 {
    let r = dist.grid().r_max();
    dist.push_forward(|p| {
        CapitalPoint::new(
            rng.random_range(p.c1..=r),
            rng.random_range(p.c2..=r),
        )
    })
    .unwrap()
}

/// Larger capitals in the first-order stochastic order give smaller `f`.
pub fn check_dominance(
    low: &Distribution64,
    high: &Distribution64,
    table: &RegionTable,
    p: LayerParams64,
    z: [f64; 2],
) -> Result<(), String> {
    let fl = AnalyticModel::new(low, table, p).unwrap().f_value(z).unwrap();
    let fh = AnalyticModel::new(high, table, p).unwrap().f_value(z).unwrap();
    if fh[0] > fl[0] + 1e-13 || fh[1] > fl[1] + 1e-13 {
        return Err(format!("dominating law has larger f at {z:?}: {fh:?} > {fl:?}"));
    }
    Ok(())
}

/// Same seed gives byte-identical Monte Carlo reports, regardless of the
/// worker count.
pub fn check_seed_determinism(config: &MonteCarloConfig, trials: usize, seed: u64) -> Result<(), String> {
    let a = serde_json::to_string(&monte_carlo_estimate(config, trials, seed).unwrap()).unwrap();
    let b = serde_json::to_string(&monte_carlo_estimate(config, trials, seed).unwrap()).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let c = pool.install(|| serde_json::to_string(&monte_carlo_estimate(config, trials, seed).unwrap()).unwrap());
    if a != b || a != c {
        return Err("reports differ between identical runs".into());
    }
    Ok(())
}
