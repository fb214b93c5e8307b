//! Poisson probability kernels evaluated in log space.
//!
//! `ψ_i(λ) = e^{−λ} λ^i / i!`, `Ψ_k(λ) = P(Poisson(λ) ≥ k)` and the product
//! kernel `ψ_{i,j}(λ₁, λ₂) = ψ_i(λ₁) ψ_j(λ₂)`.

use std::sync::OnceLock;

use thiserror::Error;

use crate::scalar::{CompensatedSum, Scalar};

/// Size of the precomputed `ln i!` table.
pub const LN_FACTORIAL_CAP: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("Poisson rate {0} must be finite and non-negative")]
    InvalidRate(f64),
}

/// Non-negative Poisson rate `λ`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PoissonRate<S>(S);

impl<S: Scalar> PoissonRate<S> {
    pub fn new(lambda: S) -> Result<Self, KernelError> {
        if lambda.is_finite() && lambda >= S::zero() {
            Ok(Self(lambda))
        } else {
            Err(KernelError::InvalidRate(lambda.to_f64().unwrap_or(f64::NAN)))
        }
    }

    pub fn zero() -> Self {
        Self(S::zero())
    }

    pub fn value(self) -> S {
        self.0
    }
}

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACTORIAL_CAP);
        let mut acc = 0.0f64;
        t.push(0.0);
        for i in 1..LN_FACTORIAL_CAP {
            acc += (i as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln i!`, from the table below [`LN_FACTORIAL_CAP`] and extended by
/// summation above it.
pub fn ln_factorial(i: u32) -> f64 {
    let table = ln_factorial_table();
    let i = i as usize;
    if i < table.len() {
        return table[i];
    }
    let mut acc = table[table.len() - 1];
    for k in table.len()..=i {
        acc += (k as f64).ln();
    }
    acc
}

/// `ψ_i(λ)`.
pub fn pmf<S: Scalar>(i: u32, rate: PoissonRate<S>) -> S {
    let lambda = rate.value();
    if lambda == S::zero() {
        return if i == 0 { S::one() } else { S::zero() };
    }
    let lf = S::lit(ln_factorial(i));
    (S::from_u32(i).expect("u32 representable") * lambda.ln() - lambda - lf).exp()
}

/// `Ψ_k(λ) = 1 − Σ_{j<k} ψ_j(λ)`, clamped to `[0, 1]`.
pub fn sf<S: Scalar>(k: u32, rate: PoissonRate<S>) -> S {
    if k == 0 {
        return S::one();
    }
    let mut acc = CompensatedSum::new();
    acc.add(S::one());
    for j in 0..k {
        acc.add(-pmf(j, rate));
    }
    acc.value().max(S::zero()).min(S::one())
}

/// `ψ_{i,j}(λ₁, λ₂)`.
pub fn joint_pmf<S: Scalar>(i: u32, j: u32, r1: PoissonRate<S>, r2: PoissonRate<S>) -> S {
    pmf(i, r1) * pmf(j, r2)
}

/// `ψ_0..ψ_{len−1}` and `Ψ_0..Ψ_{len−1}` for one rate; entries equal
/// [`pmf`] and [`sf`] bit for bit.
#[derive(Debug, Clone)]
pub(crate) struct KernelTable<S> {
    pub(crate) pmf: Vec<S>,
    pub(crate) sf: Vec<S>,
}

impl<S: Scalar> KernelTable<S> {
    pub(crate) fn new(rate: PoissonRate<S>, len: usize) -> Self {
        let mut pmf_v = Vec::with_capacity(len);
        let mut sf_v = Vec::with_capacity(len);
        let mut tail = CompensatedSum::new();
        tail.add(S::one());
        for i in 0..len {
            sf_v.push(if i == 0 {
                S::one()
            } else {
                tail.value().max(S::zero()).min(S::one())
            });
            let p = pmf(i as u32, rate);
            tail.add(-p);
            pmf_v.push(p);
        }
        Self {
            pmf: pmf_v,
            sf: sf_v,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rate(l: f64) -> PoissonRate<f64> {
        PoissonRate::new(l).unwrap()
    }

    #[test]
    fn degenerate_rate() {
        assert_eq!(pmf(0, rate(0.0)), 1.0);
        assert_eq!(pmf(3, rate(0.0)), 0.0);
        assert_eq!(sf(0, rate(7.3)), 1.0);
        assert_eq!(sf(2, rate(0.0)), 0.0);
        assert_eq!(joint_pmf(0, 0, rate(0.0), rate(0.0)), 1.0);
    }

    #[test]
    fn direct_formula() {
        let l: f64 = 2.1;
        let want = (-l).exp() * l * l / 2.0;
        assert!((pmf(2, rate(l)) - want).abs() < 1e-15);
        let (l1, l2) = (0.9f64, 1.7f64);
        let want = l1 * (-l1 - l2).exp();
        assert!((joint_pmf(1, 0, rate(l1), rate(l2)) - want).abs() < 1e-15);
    }

    #[test]
    fn joint_factorises() {
        // Independent evaluation: closed forms of ψ_2(1.4) and ψ_3(0.6).
        let a = (-1.4f64).exp() * 1.4f64.powi(2) / 2.0;
        let b = (-0.6f64).exp() * 0.6f64.powi(3) / 6.0;
        assert!((joint_pmf(2, 3, rate(1.4), rate(0.6)) - a * b).abs() < 1e-15);
    }

    #[test]
    fn contagion_probabilities() {
        let s5 = sf(5, rate(2.1));
        assert!((s5 - 0.0621).abs() < 5e-4, "{s5}");
        assert!(sf(9, rate(2.1)) < 4e-4);
    }

    #[test]
    fn negative_rate_rejected() {
        assert!(PoissonRate::new(-0.1f64).is_err());
        assert!(PoissonRate::new(f64::NAN).is_err());
    }

    #[test]
    fn large_arguments_do_not_overflow() {
        let p = pmf(300, rate(280.0));
        assert!(p.is_finite() && p > 0.0);
        assert!((ln_factorial(300) - (1..=300).map(|k| (k as f64).ln()).sum::<f64>()).abs() < 1e-9);
        let s = sf(400, rate(280.0));
        assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn single_precision() {
        let s5 = sf(5, PoissonRate::new(2.1f32).unwrap());
        assert!((s5 - 0.0621).abs() < 5e-4);
    }

    #[test]
    fn table_matches_pointwise() {
        for &l in &[0.0, 0.3, 2.1, 14.0, 60.0] {
            let t = KernelTable::new(rate(l), 40);
            for i in 0..40u32 {
                assert_eq!(t.pmf[i as usize], pmf(i, rate(l)), "λ={l} i={i}");
                assert_eq!(t.sf[i as usize], sf(i, rate(l)), "λ={l} i={i}");
            }
        }
    }
}
