//! Finite two-layer networks and their default cascades.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Geometric;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analytic::LayerParams;
use crate::capital::{CapitalError, CapitalPoint, JointCapitalDistribution, Layer, RegionTable};
use crate::fixed_point::{least_joint_root, SolverOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("network size {0} must be at least 2")]
    TooSmall(usize),
    #[error("layer {layer} mean degree {p} exceeds network size {n}")]
    DegreeTooLarge { layer: usize, p: f64, n: usize },
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error("expected {expected} capitals, got {got}")]
    CapitalCount { expected: usize, got: usize },
    #[error("invalid edge {src} -> {dst} in layer {layer}")]
    InvalidEdge { layer: usize, src: usize, dst: usize },
    #[error(transparent)]
    Capital(#[from] CapitalError),
}

/// Directed edges of one layer in compressed sparse row form.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Csr {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Csr {
    fn from_sorted(n: usize, edges: &[(u32, u32)]) -> Self {
        let mut offsets = vec![0usize; n + 1];
        for &(s, _) in edges {
            offsets[s as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Self {
            offsets,
            targets: edges.iter().map(|&(_, t)| t).collect(),
        }
    }

    fn neighbors(&self, i: usize) -> &[u32] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }
}

/// A realised network: one directed Erdős–Rényi graph per layer on the
/// same `n` holdings, and the holdings' initial capitals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkInstance {
    n: usize,
    layers: [Csr; 2],
    capitals: Vec<CapitalPoint>,
    seed: u64,
    stream: u64,
}

impl NetworkInstance {
    /// Builds an instance from explicit edge lists `(src, dst)`, 0-based.
    pub fn from_edges(
        capitals: Vec<CapitalPoint>,
        edges: [&[(usize, usize)]; 2],
    ) -> Result<Self, SimError> {
        let n = capitals.len();
        let mut layers = Vec::with_capacity(2);
        for (l, list) in edges.iter().enumerate() {
            let mut sorted: Vec<(u32, u32)> = Vec::with_capacity(list.len());
            for &(s, d) in list.iter() {
                if s >= n || d >= n || s == d {
                    return Err(SimError::InvalidEdge {
                        layer: l + 1,
                        src: s,
                        dst: d,
                    });
                }
                sorted.push((s as u32, d as u32));
            }
            sorted.sort_unstable();
            if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
                return Err(SimError::InvalidEdge {
                    layer: l + 1,
                    src: w[0].0 as usize,
                    dst: w[0].1 as usize,
                });
            }
            layers.push(Csr::from_sorted(n, &sorted));
        }
        let l2 = layers.pop().expect("two layers");
        let l1 = layers.pop().expect("two layers");
        Ok(Self {
            n,
            layers: [l1, l2],
            capitals,
            seed: 0,
            stream: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn capitals(&self) -> &[CapitalPoint] {
        &self.capitals
    }

    pub fn out_neighbors(&self, layer: Layer, i: usize) -> &[u32] {
        self.layers[layer.index()].neighbors(i)
    }

    pub fn edge_count(&self, layer: Layer) -> usize {
        self.layers[layer.index()].targets.len()
    }

    pub fn out_degrees(&self, layer: Layer) -> Vec<usize> {
        let o = &self.layers[layer.index()].offsets;
        o.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn in_degrees(&self, layer: Layer) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for &t in &self.layers[layer.index()].targets {
            deg[t as usize] += 1;
        }
        deg
    }

    /// All edges of a layer as `(src, dst)` in source order.
    pub fn edges(&self, layer: Layer) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.out_neighbors(layer, i)
                .iter()
                .map(move |&t| (i, t as usize))
        })
    }
}

fn validate_size(n: usize, params: &LayerParams<f64>) -> Result<(), SimError> {
    if n < 2 {
        return Err(SimError::TooSmall(n));
    }
    for l in Layer::BOTH {
        let p = params.get(l);
        if p > n as f64 {
            return Err(SimError::DegreeTooLarge {
                layer: l.index() + 1,
                p,
                n,
            });
        }
    }
    Ok(())
}

/// Ordered pairs `(i, j)`, `i ≠ j`, each present with probability `q`,
/// visited by geometric skipping in pair-index order.
fn sample_layer(n: usize, q: f64, rng: &mut ChaCha8Rng) -> Csr {
    let pairs = n as u64 * (n as u64 - 1);
    let mut edges = Vec::new();
    if q > 0.0 {
        let skip = Geometric::new(q.min(1.0)).expect("probability in (0, 1]");
        let mut m = skip.sample(rng);
        let row = n as u64 - 1;
        while m < pairs {
            let src = m / row;
            let t = m % row;
            let dst = if t >= src { t + 1 } else { t };
            edges.push((src as u32, dst as u32));
            m = m.saturating_add(1).saturating_add(skip.sample(rng));
        }
    }
    Csr::from_sorted(n, &edges)
}

fn sample_with_stream(
    n: usize,
    params: &LayerParams<f64>,
    dist: &JointCapitalDistribution<f64>,
    seed: u64,
    stream: u64,
) -> Result<NetworkInstance, SimError> {
    validate_size(n, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let support: Vec<(CapitalPoint, f64)> = dist.support().collect();
    let capitals = if support.len() == 1 {
        vec![support[0].0; n]
    } else {
        let index = WeightedIndex::new(support.iter().map(|&(_, m)| m))
            .expect("normalised distribution has positive mass");
        (0..n).map(|_| support[index.sample(&mut rng)].0).collect()
    };
    let l1 = sample_layer(n, params.p1() / n as f64, &mut rng);
    let l2 = sample_layer(n, params.p2() / n as f64, &mut rng);
    Ok(NetworkInstance {
        n,
        layers: [l1, l2],
        capitals,
        seed,
        stream,
    })
}

/// Samples capitals i.i.d. from `dist` and each ordered pair of each layer
/// with probability `p_l / n`.
pub fn sample_network(
    n: usize,
    params: &LayerParams<f64>,
    dist: &JointCapitalDistribution<f64>,
    seed: u64,
) -> Result<NetworkInstance, SimError> {
    sample_with_stream(n, params, dist, seed, 0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CascadeOutcome {
    /// Defaulted holdings per subsidiary type, ascending, 0-based.
    pub defaulted: [Vec<usize>; 2],
    pub rounds_used: usize,
    /// `(|S_{1,k}|, |S_{2,k}|)` for `k = 0..=rounds_used`.
    pub per_round_sizes: Vec<(usize, usize)>,
}

impl CascadeOutcome {
    pub fn fractions(&self, n: usize) -> [f64; 2] {
        [
            self.defaulted[0].len() as f64 / n as f64,
            self.defaulted[1].len() as f64 / n as f64,
        ]
    }
}

/// Mutable cascade state shared by both processes.
struct CascadeState<'a> {
    table: &'a RegionTable,
    capital: Vec<CapitalPoint>,
    defaulted: [Vec<bool>; 2],
    counts: [usize; 2],
}

impl<'a> CascadeState<'a> {
    fn new(net: &NetworkInstance, table: &'a RegionTable) -> Result<Self, SimError> {
        let grid = table.grid();
        let mut capital = Vec::with_capacity(net.n);
        for &c in &net.capitals {
            if c.c1 > grid.r_max() || c.c2 > grid.r_max() {
                return Err(CapitalError::AboveCap {
                    c1: c.c1,
                    c2: c.c2,
                    r_max: grid.r_max(),
                }
                .into());
            }
            capital.push(grid.clip(c));
        }
        Ok(Self {
            table,
            capital,
            defaulted: [vec![false; net.n], vec![false; net.n]],
            counts: [0, 0],
        })
    }

    /// Marks and returns the subsidiaries of holding `i` that are newly in
    /// their default region.
    fn refresh(&mut self, i: usize, out: &mut Vec<(Layer, usize)>) {
        for l in Layer::BOTH {
            if !self.defaulted[l.index()][i] && self.table.region_membership(self.capital[i], l) {
                self.defaulted[l.index()][i] = true;
                self.counts[l.index()] += 1;
                out.push((l, i));
            }
        }
    }

    /// One unit loss to subsidiary `l` of holding `j`, absorbed at the floor.
    fn hit(&mut self, l: Layer, j: usize) {
        let x = self.table.grid().x_floor();
        let c = self.capital[j];
        let v = c.get(l);
        if v > x {
            self.capital[j] = c.with(l, v - 1);
        }
    }

    fn into_sets(self) -> [Vec<usize>; 2] {
        let collect = |v: &[bool]| v.iter().enumerate().filter(|(_, &d)| d).map(|(i, _)| i).collect();
        [collect(&self.defaulted[0]), collect(&self.defaulted[1])]
    }
}

/// Synchronous rounds: each subsidiary that defaulted in round `k` deducts
/// one unit from every out-neighbour in its layer that was not in default at
/// the start of round `k + 1`.
pub fn run_cascade_rounds(
    net: &NetworkInstance,
    table: &RegionTable,
) -> Result<CascadeOutcome, SimError> {
    let mut state = CascadeState::new(net, table)?;
    let mut newly = Vec::new();
    for i in 0..net.n {
        state.refresh(i, &mut newly);
    }
    let mut sizes = vec![(state.counts[0], state.counts[1])];
    let mut rounds = 0usize;
    let mut touched = Vec::new();
    let mut seen = vec![false; net.n];
    while !newly.is_empty() {
        rounds += 1;
        let start = state.defaulted.clone();
        for &(l, i) in &newly {
            for &j in net.out_neighbors(l, i) {
                let j = j as usize;
                if !start[l.index()][j] {
                    state.hit(l, j);
                    if !seen[j] {
                        seen[j] = true;
                        touched.push(j);
                    }
                }
            }
        }
        newly.clear();
        touched.sort_unstable();
        for &j in &touched {
            seen[j] = false;
            state.refresh(j, &mut newly);
        }
        touched.clear();
        sizes.push((state.counts[0], state.counts[1]));
    }
    Ok(CascadeOutcome {
        defaulted: state.into_sets(),
        rounds_used: rounds,
        per_round_sizes: sizes,
    })
}

/// One defaulted subsidiary at a time, chosen uniformly among the
/// unexplored ones; `rounds_used` counts exploration steps.
pub fn run_sequential_exploration(
    net: &NetworkInstance,
    table: &RegionTable,
    seed: u64,
) -> Result<CascadeOutcome, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = CascadeState::new(net, table)?;
    let mut unexplored = Vec::new();
    for i in 0..net.n {
        state.refresh(i, &mut unexplored);
    }
    let mut sizes = vec![(state.counts[0], state.counts[1])];
    let mut steps = 0usize;
    while !unexplored.is_empty() {
        let pick = rng.random_range(0..unexplored.len());
        let (l, i) = unexplored.swap_remove(pick);
        for &j in net.out_neighbors(l, i) {
            let j = j as usize;
            if !state.defaulted[l.index()][j] {
                state.hit(l, j);
                state.refresh(j, &mut unexplored);
            }
        }
        steps += 1;
        sizes.push((state.counts[0], state.counts[1]));
    }
    Ok(CascadeOutcome {
        defaulted: state.into_sets(),
        rounds_used: steps,
        per_round_sizes: sizes,
    })
}

#[derive(Debug, Clone)]
pub struct MonteCarloConfig {
    pub n: usize,
    pub params: LayerParams<f64>,
    pub dist: JointCapitalDistribution<f64>,
    pub table: RegionTable,
    pub solver: SolverOptions<f64>,
}

/// The analytic prediction attached to a Monte Carlo report.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AnalyticComparison {
    Solved {
        z_hat: [f64; 2],
        total: f64,
        direction_ok: bool,
        spectral_radius: f64,
    },
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub sd: f64,
    /// 95% normal-approximation interval for the mean.
    pub ci95: [f64; 2],
}

impl SummaryStats {
    fn from_samples(xs: &[f64], upper: f64) -> Self {
        let k = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / k;
        let sd = if xs.len() > 1 {
            (xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        let half = 1.959_963_984_540_054 * sd / k.sqrt();
        Self {
            mean,
            sd,
            ci95: [(mean - half).max(0.0), (mean + half).min(upper)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    /// Final default fraction of type-1 and type-2 subsidiaries.
    pub layers: [SummaryStats; 2],
    /// Sum of the two fractions.
    pub total: SummaryStats,
    pub analytic: AnalyticComparison,
}

/// Runs `trials` independent cascades; trial `t` draws from stream `t` of
/// the generator seeded with `seed`, and statistics are reduced in trial
/// order.
pub fn monte_carlo_estimate(
    config: &MonteCarloConfig,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloReport, SimError> {
    if trials == 0 {
        return Err(SimError::NoTrials);
    }
    validate_size(config.n, &config.params)?;
    config.table.check_grid(config.dist.grid())?;
    let fractions: Vec<[f64; 2]> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let net = sample_with_stream(config.n, &config.params, &config.dist, seed, t)?;
            Ok(run_cascade_rounds(&net, &config.table)?.fractions(config.n))
        })
        .collect::<Result<_, SimError>>()?;
    let f1: Vec<f64> = fractions.iter().map(|f| f[0]).collect();
    let f2: Vec<f64> = fractions.iter().map(|f| f[1]).collect();
    let tot: Vec<f64> = fractions.iter().map(|f| f[0] + f[1]).collect();
    let analytic = match least_joint_root(&config.dist, &config.table, config.params, &config.solver) {
        Ok(r) => AnalyticComparison::Solved {
            z_hat: r.z_hat,
            total: r.z_hat[0] + r.z_hat[1],
            direction_ok: r.direction_ok,
            spectral_radius: r.spectral_radius,
        },
        Err(e) => AnalyticComparison::Failed {
            error: e.to_string(),
        },
    };
    Ok(MonteCarloReport {
        n: config.n,
        trials,
        seed,
        layers: [
            SummaryStats::from_samples(&f1, 1.0),
            SummaryStats::from_samples(&f2, 1.0),
        ],
        total: SummaryStats::from_samples(&tot, 2.0),
        analytic,
    })
}
