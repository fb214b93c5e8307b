//! Least joint root of `(f₁, f₂)` and the resilience classification.
//!
//! `Φ(z) = (f₁(z) + z₁, f₂(z) + z₂)` is a monotone self-map of `[0,1]²`, so
//! Picard iteration from the origin increases to its least fixed point, which
//! is the least joint root `ẑ` of `f`.

use thiserror::Error;

use crate::analytic::{AnalyticError, AnalyticModel, BoundaryMatrix, LayerParams};
use crate::capital::{JointCapitalDistribution, RegionTable};
use crate::scalar::Scalar;

/// Half-width of the critical band around `ρ(M) = 1`.
pub const RESILIENCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(
        "no initial defaults: the least joint root requires P(C ∈ D_1 ∪ D_2) > 0"
    )]
    NoInitialDefaults,
    #[error(
        "initial default mass {mass} is positive: resilience is classified on an uninfected network"
    )]
    InitialDefaultsPresent { mass: f64 },
    #[error("tolerance {0} must be positive and finite")]
    InvalidTolerance(f64),
    #[error(
        "no convergence after {iterations} iterations: last iterate ({z1}, {z2}), residual {residual}"
    )]
    NonConvergence {
        z1: f64,
        z2: f64,
        iterations: usize,
        residual: f64,
    },
    #[error("descent start ({z1}, {z2}) has f > 0 in some component")]
    NotSuperSolution { z1: f64, z2: f64 },
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<S> {
    pub tol: S,
    pub max_iter: usize,
    /// Opt-in Aitken extrapolation between Picard steps.
    pub accelerate: bool,
}

impl<S: Scalar> Default for SolverOptions<S> {
    fn default() -> Self {
        Self {
            tol: S::lit(1e-12),
            max_iter: 1_000_000,
            accelerate: false,
        }
    }
}

impl<S: Scalar> SolverOptions<S> {
    pub fn with_tol(tol: S) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), SolveError> {
        if self.tol > S::zero() && self.tol.is_finite() {
            Ok(())
        } else {
            Err(SolveError::InvalidTolerance(self.tol.to_f64().unwrap_or(f64::NAN)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootResult<S> {
    pub z_hat: [S; 2],
    pub iterations: usize,
    /// `max_l |f_l(ẑ)|`.
    pub residual: S,
    /// Whether some `v > 0` has `D_v f_1(ẑ), D_v f_2(ẑ) < 0`.
    pub direction_ok: bool,
    pub direction_vector: Option<[S; 2]>,
    /// `ρ(M(ẑ))`.
    pub spectral_radius: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DirectionSign {
    /// `(M − I)v < 0`.
    Negative,
    /// `(M − I)v > 0`.
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Resilient,
    NonResilient,
    Indeterminate,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Resilient => "Resilient",
            Verdict::NonResilient => "NonResilient",
            Verdict::Indeterminate => "Indeterminate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResilienceVerdict<S> {
    pub verdict: Verdict,
    /// `ρ(M(0))`.
    pub spectral_radius: S,
    pub witness: Option<[S; 2]>,
}

fn sup_norm<S: Scalar>(v: [S; 2]) -> S {
    v[0].abs().max(v[1].abs())
}

fn clamp_unit<S: Scalar>(v: S) -> S {
    v.max(S::zero()).min(S::one())
}

fn to_f64<S: Scalar>(v: S) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Open interval of `t > 0` with `α + βt < 0`, as `(lo, hi)`.
fn negative_interval<S: Scalar>(alpha: S, beta: S) -> (S, S) {
    let zero = S::zero();
    let inf = S::infinity();
    if beta == zero {
        if alpha < zero {
            (zero, inf)
        } else {
            (zero, zero)
        }
    } else {
        let root = -alpha / beta;
        if beta > zero {
            (zero, root.max(zero))
        } else {
            (root.max(zero), inf)
        }
    }
}

/// A `v > 0` on the unit simplex with `(M − I)v < 0` (`Negative`) or
/// `(M − I)v > 0` (`Positive`), if one exists.
///
/// With `t = v₂/v₁` both rows are linear in `t`; the solution set is the
/// intersection of two open intervals of `(0, ∞)`.
pub fn direction_feasibility<S: Scalar>(m: &BoundaryMatrix<S>, sign: DirectionSign) -> Option<[S; 2]> {
    let [[a, b], [c, d]] = m.jacobian();
    let s = match sign {
        DirectionSign::Negative => S::one(),
        DirectionSign::Positive => -S::one(),
    };
    let (lo1, hi1) = negative_interval(s * a, s * b);
    let (lo2, hi2) = negative_interval(s * c, s * d);
    let lo = lo1.max(lo2);
    let hi = hi1.min(hi2);
    if lo >= hi {
        return None;
    }
    let t = if hi.is_infinite() {
        if lo == S::zero() {
            S::one()
        } else {
            lo * S::lit(2.0)
        }
    } else {
        (lo + hi) / S::lit(2.0)
    };
    let v = [S::one() / (S::one() + t), t / (S::one() + t)];
    let d = m.directional(v);
    let strict = match sign {
        DirectionSign::Negative => d[0] < S::zero() && d[1] < S::zero(),
        DirectionSign::Positive => d[0] > S::zero() && d[1] > S::zero(),
    };
    (strict && v[0] > S::zero() && v[1] > S::zero()).then_some(v)
}

/// Picard iteration of `Φ` from the origin; `ẑ` is its limit.
pub fn least_joint_root<S: Scalar>(
    dist: &JointCapitalDistribution<S>,
    table: &RegionTable,
    params: LayerParams<S>,
    opts: &SolverOptions<S>,
) -> Result<RootResult<S>, SolveError> {
    let model = AnalyticModel::new(dist, table, params)?;
    solve_model(&model, opts)
}

/// [`least_joint_root`] on an already assembled model.
pub fn solve_model<S: Scalar>(
    model: &AnalyticModel<'_, S>,
    opts: &SolverOptions<S>,
) -> Result<RootResult<S>, SolveError> {
    opts.validate()?;
    if model.initial_default_mass() <= S::zero() {
        return Err(SolveError::NoInitialDefaults);
    }
    let mut z = [S::zero(); 2];
    let mut history: Vec<[S; 2]> = Vec::with_capacity(4);
    let mut iterations = 0usize;
    loop {
        let f = model.f_value(z)?;
        let residual = sup_norm(f);
        if residual <= opts.tol {
            let point = model.evaluate(z)?;
            let v = direction_feasibility(&point.boundary, DirectionSign::Negative);
            return Ok(RootResult {
                z_hat: z,
                iterations,
                residual,
                direction_ok: v.is_some(),
                direction_vector: v,
                spectral_radius: point.boundary.spectral_radius(),
            });
        }
        if iterations >= opts.max_iter {
            return Err(SolveError::NonConvergence {
                z1: to_f64(z[0]),
                z2: to_f64(z[1]),
                iterations,
                residual: to_f64(residual),
            });
        }
        iterations += 1;
        let next = [clamp_unit(z[0] + f[0]), clamp_unit(z[1] + f[1])];
        z = if opts.accelerate {
            if history.is_empty() {
                history.push(z);
            }
            history.push(next);
            if history.len() > 4 {
                history.drain(..history.len() - 4);
            }
            match aitken(model, &history, opts.tol)? {
                Some(jump) => {
                    history.clear();
                    jump
                }
                None => next,
            }
        } else {
            next
        };
    }
}

/// Componentwise Aitken extrapolation from four Picard iterates.
///
/// A component jumps only once its step ratio `q` has settled (two
/// consecutive ratios within 1%) with `0 < q < 1`, and the jump is kept
/// only when `f ≥ 0` there, so the iterates keep increasing. This is a
/// heuristic: a jump taken just before a near-tangency of `Φ` can land
/// beyond the least root.
fn aitken<S: Scalar>(
    model: &AnalyticModel<'_, S>,
    history: &[[S; 2]],
    tol: S,
) -> Result<Option<[S; 2]>, SolveError> {
    if history.len() < 4 {
        return Ok(None);
    }
    let last = history[3];
    let mut jump = last;
    let mut moved = false;
    for i in 0..2 {
        let d0 = history[1][i] - history[0][i];
        let d1 = history[2][i] - history[1][i];
        let d2 = last[i] - history[2][i];
        if d0 <= S::zero() || d1 <= S::zero() || d2 <= S::zero() {
            continue;
        }
        let q1 = d1 / d0;
        let q2 = d2 / d1;
        if q2 >= S::one() || (q2 - q1).abs() > S::lit(0.01) * q2 {
            continue;
        }
        let cand = last[i] + d2 * q2 / (S::one() - q2);
        if cand <= S::one() {
            jump[i] = cand;
            moved = true;
        }
    }
    if !moved {
        return Ok(None);
    }
    let f = model.f_value(jump)?;
    Ok((f[0] >= -tol && f[1] >= -tol).then_some(jump))
}

/// The first `steps` Picard iterates from the origin, starting with `(0, 0)`.
pub fn picard_trace<S: Scalar>(
    model: &AnalyticModel<'_, S>,
    steps: usize,
) -> Result<Vec<[S; 2]>, SolveError> {
    let mut z = [S::zero(); 2];
    let mut out = Vec::with_capacity(steps + 1);
    out.push(z);
    for _ in 0..steps {
        let phi = model.phi(z)?;
        z = [clamp_unit(phi[0]), clamp_unit(phi[1])];
        out.push(z);
    }
    Ok(out)
}

/// Alternating downward descent from a point `z̃` with `f(z̃) ≤ 0`.
///
/// Each half-step iterates `t ← Φ_l(t, z_other)` downward in one coordinate
/// to the largest zero of `f_l` below the current value. The limit is the
/// largest joint root dominated by `z̃`, which bounds `ẑ` from above.
pub fn descend_to_root<S: Scalar>(
    model: &AnalyticModel<'_, S>,
    start: [S; 2],
    opts: &SolverOptions<S>,
) -> Result<[S; 2], SolveError> {
    opts.validate()?;
    let f0 = model.f_value(start)?;
    if f0[0] > opts.tol || f0[1] > opts.tol {
        return Err(SolveError::NotSuperSolution {
            z1: to_f64(start[0]),
            z2: to_f64(start[1]),
        });
    }
    let mut z = start;
    let mut iterations = 0usize;
    loop {
        let before = z;
        for l in 0..2 {
            loop {
                let phi = model.phi(z)?;
                let next = clamp_unit(phi[l]).min(z[l]);
                let step = z[l] - next;
                z[l] = next;
                iterations += 1;
                if step <= opts.tol {
                    break;
                }
                if iterations >= opts.max_iter {
                    let f = model.f_value(z)?;
                    return Err(SolveError::NonConvergence {
                        z1: to_f64(z[0]),
                        z2: to_f64(z[1]),
                        iterations,
                        residual: to_f64(sup_norm(f)),
                    });
                }
            }
        }
        if sup_norm([before[0] - z[0], before[1] - z[1]]) <= opts.tol {
            return Ok(z);
        }
    }
}

/// Classifies an uninfected configuration by the Perron root of `M(0)`.
pub fn classify_resilience<S: Scalar>(
    dist: &JointCapitalDistribution<S>,
    table: &RegionTable,
    params: LayerParams<S>,
) -> Result<ResilienceVerdict<S>, SolveError> {
    let model = AnalyticModel::new(dist, table, params)?;
    let mass = model.initial_default_mass();
    if mass > S::zero() {
        return Err(SolveError::InitialDefaultsPresent { mass: to_f64(mass) });
    }
    let m = model.boundary_matrix([S::zero(); 2])?;
    let rho = m.spectral_radius();
    let tol = S::lit(RESILIENCE_TOLERANCE);
    let (verdict, witness) = if rho < S::one() - tol {
        (
            Verdict::Resilient,
            direction_feasibility(&m, DirectionSign::Negative),
        )
    } else if rho > S::one() + tol {
        (
            Verdict::NonResilient,
            direction_feasibility(&m, DirectionSign::Positive),
        )
    } else {
        (Verdict::Indeterminate, None)
    };
    Ok(ResilienceVerdict {
        verdict,
        spectral_radius: rho,
        witness,
    })
}
