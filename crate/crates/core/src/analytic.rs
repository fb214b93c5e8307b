//! The cascade functionals of the two-layer network.
//!
//! For `z = (z₁, z₂) ∈ [0,1]²`,
//!
//! ```text
//! a_{j,k}(z) = E[ 1{(C₁,C₂) ≥ (j,k)} · ψ_{C₁−j}(p₁z₁) · ψ_{C₂−k}(p₂z₂) ]
//! f_l(z)     = Σ_{(j,k) ∈ D_{J,l}} a_{j,k}(z) − z_l
//! ```
//!
//! At the floor (`j = x` or `k = x`) the pmf factor is replaced by the
//! survival factor `Ψ`, so that shocks overshooting the floor stay on the
//! grid and `Σ_{grid} a_{j,k} = 1`. With this convention
//! `f_l(z) + z_l = P(clip((C₁,C₂) − (X₁,X₂)) ∈ D_{J,l})` for independent
//! `X_m ~ Poisson(p_m z_m)`, and
//!
//! ```text
//! ∂f_l/∂z_m = p_m Σ_{(j,k) ∈ ∂D_{J^{lm}}} a_{j,k}(z) − δ_{lm}.
//! ```

use thiserror::Error;

use crate::capital::{CapitalError, CapitalPoint, JointCapitalDistribution, Layer, RegionTable};
use crate::kernels::{KernelError, KernelTable, PoissonRate};
use crate::scalar::{CompensatedSum, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("point ({z1}, {z2}) lies outside [0, 1]²")]
    OutOfDomain { z1: f64, z2: f64 },
    #[error("direction vector must be non-zero")]
    ZeroDirection,
    #[error("mean degree {0} must be finite and non-negative")]
    InvalidDegree(f64),
    #[error("capital point {0} is not on the grid")]
    OffGrid(CapitalPoint),
    #[error(transparent)]
    Grid(#[from] CapitalError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Mean directed degree `p_l` of each layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerParams<S> {
    p: [S; 2],
}

impl<S: Scalar> LayerParams<S> {
    pub fn new(p1: S, p2: S) -> Result<Self, AnalyticError> {
        for p in [p1, p2] {
            if !p.is_finite() || p < S::zero() {
                return Err(AnalyticError::InvalidDegree(p.to_f64().unwrap_or(f64::NAN)));
            }
        }
        Ok(Self { p: [p1, p2] })
    }

    pub fn p1(&self) -> S {
        self.p[0]
    }

    pub fn p2(&self) -> S {
        self.p[1]
    }

    pub fn get(&self, layer: Layer) -> S {
        self.p[layer.index()]
    }
}

/// `M[l][m] = p_m Σ_{∂D_{J^{lm}}} a_{j,k}(z)`; the Jacobian of `f` is `M − I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryMatrix<S>(pub [[S; 2]; 2]);

impl<S: Scalar> BoundaryMatrix<S> {
    pub fn entry(&self, l: Layer, m: Layer) -> S {
        self.0[l.index()][m.index()]
    }

    /// `∂f_l/∂z_m = M[l][m] − δ_{lm}`.
    pub fn jacobian(&self) -> [[S; 2]; 2] {
        let m = self.0;
        [[m[0][0] - S::one(), m[0][1]], [m[1][0], m[1][1] - S::one()]]
    }

    /// Perron root of the non-negative 2×2 matrix.
    pub fn spectral_radius(&self) -> S {
        let [[a, b], [c, d]] = self.0;
        let two = S::lit(2.0);
        let half_diff = (a - d) / two;
        let disc = (half_diff * half_diff + b * c).max(S::zero());
        (a + d) / two + disc.sqrt()
    }

    /// `d_l = −v_l + v₁M[l][1] + v₂M[l][2]`.
    pub fn directional(&self, v: [S; 2]) -> [S; 2] {
        let m = self.0;
        [
            -v[0] + v[0] * m[0][0] + v[1] * m[0][1],
            -v[1] + v[0] * m[1][0] + v[1] * m[1][1],
        ]
    }
}

/// `f` and the boundary-mass matrix evaluated at one `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticPoint<S> {
    pub z: [S; 2],
    pub f: [S; 2],
    pub boundary: BoundaryMatrix<S>,
}

/// The functionals `f₁, f₂` of one configuration `(C, J, x, p)`.
#[derive(Debug, Clone)]
pub struct AnalyticModel<'a, S> {
    dist: &'a JointCapitalDistribution<S>,
    table: &'a RegionTable,
    params: LayerParams<S>,
    support: Vec<(CapitalPoint, S)>,
}

impl<'a, S: Scalar> AnalyticModel<'a, S> {
    pub fn new(
        dist: &'a JointCapitalDistribution<S>,
        table: &'a RegionTable,
        params: LayerParams<S>,
    ) -> Result<Self, AnalyticError> {
        table.check_grid(dist.grid())?;
        Ok(Self {
            dist,
            table,
            params,
            support: dist.support().collect(),
        })
    }

    pub fn distribution(&self) -> &JointCapitalDistribution<S> {
        self.dist
    }

    pub fn table(&self) -> &RegionTable {
        self.table
    }

    pub fn params(&self) -> LayerParams<S> {
        self.params
    }

    /// `P(C ∈ D_{J,1} ∪ D_{J,2})`.
    pub fn initial_default_mass(&self) -> S {
        self.table
            .initial_default_mass(self.dist)
            .expect("grids checked at construction")
    }

    fn check_z(z: [S; 2]) -> Result<(), AnalyticError> {
        let ok = |v: S| v >= S::zero() && v <= S::one();
        if ok(z[0]) && ok(z[1]) {
            Ok(())
        } else {
            Err(AnalyticError::OutOfDomain {
                z1: z[0].to_f64().unwrap_or(f64::NAN),
                z2: z[1].to_f64().unwrap_or(f64::NAN),
            })
        }
    }

    fn kernels(&self, z: [S; 2]) -> Result<[KernelTable<S>; 2], AnalyticError> {
        let side = self.table.grid().side();
        let k1 = KernelTable::new(PoissonRate::new(self.params.p1() * z[0])?, side);
        let k2 = KernelTable::new(PoissonRate::new(self.params.p2() * z[1])?, side);
        Ok([k1, k2])
    }

    /// Kernel factor for a capital drop from `from` to `to` in one layer.
    fn factor(kernel: &KernelTable<S>, from: i32, to: i32, x_floor: i32) -> S {
        let drop = (from - to) as usize;
        if to == x_floor {
            kernel.sf[drop]
        } else {
            kernel.pmf[drop]
        }
    }

    /// `a_{j,k}(z)` at a single grid point.
    pub fn a_jk(&self, z: [S; 2], point: CapitalPoint) -> Result<S, AnalyticError> {
        Self::check_z(z)?;
        if !self.table.grid().contains(point) {
            return Err(AnalyticError::OffGrid(point));
        }
        let [k1, k2] = self.kernels(z)?;
        let x = self.table.grid().x_floor();
        let mut acc = CompensatedSum::new();
        for &(c, m) in &self.support {
            if point.dominated_by(c) {
                acc.add(
                    m * Self::factor(&k1, c.c1, point.c1, x) * Self::factor(&k2, c.c2, point.c2, x),
                );
            }
        }
        Ok(acc.value())
    }

    /// `a_{j,k}(z)` for every grid point, in grid index order.
    pub fn a_table(&self, z: [S; 2]) -> Result<Vec<S>, AnalyticError> {
        Self::check_z(z)?;
        let [k1, k2] = self.kernels(z)?;
        let grid = self.table.grid();
        let x = grid.x_floor();
        let side = grid.side();
        let mut a = vec![S::zero(); grid.len()];
        let mut row = vec![S::zero(); side];
        for &(c, m) in &self.support {
            let c2_off = (c.c2 - x) as usize;
            for (k_off, slot) in row.iter_mut().enumerate().take(c2_off + 1) {
                *slot = Self::factor(&k2, c.c2, x + k_off as i32, x);
            }
            for j in x..=c.c1 {
                let w = m * Self::factor(&k1, c.c1, j, x);
                if w == S::zero() {
                    continue;
                }
                let base = (j - x) as usize * side;
                for (k_off, &g) in row.iter().enumerate().take(c2_off + 1) {
                    a[base + k_off] += w * g;
                }
            }
        }
        Ok(a)
    }

    fn f_from_table(&self, a: &[S], z: [S; 2]) -> [S; 2] {
        let mut sums = [CompensatedSum::new(), CompensatedSum::new()];
        for (class, &v) in self.table.classes().iter().zip(a) {
            for l in Layer::BOTH {
                if class.in_default(l) {
                    sums[l.index()].add(v);
                }
            }
        }
        [sums[0].value() - z[0], sums[1].value() - z[1]]
    }

    fn boundary_from_table(&self, a: &[S]) -> BoundaryMatrix<S> {
        let mut sums = [[CompensatedSum::new(); 2]; 2];
        for (class, &v) in self.table.classes().iter().zip(a) {
            for l in Layer::BOTH {
                for m in Layer::BOTH {
                    if class.in_transition(l, m) {
                        sums[l.index()][m.index()].add(v);
                    }
                }
            }
        }
        let mut out = [[S::zero(); 2]; 2];
        for l in Layer::BOTH {
            for m in Layer::BOTH {
                out[l.index()][m.index()] =
                    self.params.get(m) * sums[l.index()][m.index()].value();
            }
        }
        BoundaryMatrix(out)
    }

    /// `(f₁(z), f₂(z))`.
    pub fn f_value(&self, z: [S; 2]) -> Result<[S; 2], AnalyticError> {
        let a = self.a_table(z)?;
        Ok(self.f_from_table(&a, z))
    }

    /// The monotone map `Φ(z) = f(z) + z` whose least fixed point is the
    /// least joint root of `f`.
    pub fn phi(&self, z: [S; 2]) -> Result<[S; 2], AnalyticError> {
        let f = self.f_value(z)?;
        Ok([f[0] + z[0], f[1] + z[1]])
    }

    pub fn boundary_matrix(&self, z: [S; 2]) -> Result<BoundaryMatrix<S>, AnalyticError> {
        let a = self.a_table(z)?;
        Ok(self.boundary_from_table(&a))
    }

    /// `D_v f_l(z)` for `l = 1, 2`.
    pub fn directional_derivative(&self, z: [S; 2], v: [S; 2]) -> Result<[S; 2], AnalyticError> {
        if v[0] == S::zero() && v[1] == S::zero() {
            return Err(AnalyticError::ZeroDirection);
        }
        Ok(self.boundary_matrix(z)?.directional(v))
    }

    /// `f` and `M` from a single pass over the grid.
    pub fn evaluate(&self, z: [S; 2]) -> Result<AnalyticPoint<S>, AnalyticError> {
        let a = self.a_table(z)?;
        Ok(AnalyticPoint {
            z,
            f: self.f_from_table(&a, z),
            boundary: self.boundary_from_table(&a),
        })
    }
}
