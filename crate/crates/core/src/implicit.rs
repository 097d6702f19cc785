//! Implicit stage of the IMEX scheme.
//!
//! The first IMEX stage asks for `w` with
//! `w − (Δt/2) C*(w)𝒜 = 𝒢`, `𝒢 = wⁿ + (Δt/2) ℒ(wⁿ)`. Because the
//! nonlinearity sits inside the diffusion term, the unknown is switched to
//! `c = C*(w)`:
//!
//! ```text
//! ℱ(c) = W*(c) − (Δt/2) c𝒜 − 𝒢 = 0
//! ```
//!
//! Cell `k` only couples to its neighbours through `𝒜`, so the Newton
//! Jacobian `ℱ'(c) = Ê − (Δt/2)𝒜⊗I` is block tridiagonal with full N×N
//! diagonal blocks `Ê^k = W'(c_k)` and scalar off-diagonal blocks `−θI`,
//! `θ = D_a Δt / (2Δz²)`.

use thiserror::Error;

use crate::isotherm::MIN_DENOMINATOR;
use crate::linalg::{gemm_sub, gemv_sub, lu_factor, lu_solve};
use crate::spatial::Discretization;
use crate::state::{Field, InversionError, StateField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("singular pivot block at index {index}")]
    SingularBlock { index: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("Newton did not converge in {iterations} iterations; scaled residuals {residuals:?}")]
    NewtonNotConverged {
        iterations: usize,
        residuals: Vec<f64>,
    },
    #[error("Newton iterate left the region 1 + bᵀc > 0.5 at cell {cell}")]
    InvalidIterate { cell: usize },
    #[error(transparent)]
    Inversion(#[from] InversionError),
}

/// Newton stopping rule: `‖ℱ‖∞ / (1 + ‖𝒢‖∞) ≤ tol`, at most `max_iter`
/// iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol: 1e-12,
            max_iter: 25,
        }
    }
}

/// Block tridiagonal matrix with m block rows of N×N blocks.
///
/// `lower[k]` sits at block position `(k+1, k)` and `upper[k]` at `(k, k+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiagonal {
    n: usize,
    m: usize,
    diag: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BlockTridiagonal {
    pub fn zeros(n: usize, m: usize) -> Self {
        assert!(n >= 1 && m >= 1);
        let nn = n * n;
        BlockTridiagonal {
            n,
            m,
            diag: vec![0.0; m * nn],
            lower: vec![0.0; (m - 1) * nn],
            upper: vec![0.0; (m - 1) * nn],
        }
    }

    pub fn block_size(&self) -> usize {
        self.n
    }

    pub fn block_rows(&self) -> usize {
        self.m
    }

    pub fn diag_block(&self, k: usize) -> &[f64] {
        let nn = self.n * self.n;
        &self.diag[k * nn..(k + 1) * nn]
    }

    pub fn diag_block_mut(&mut self, k: usize) -> &mut [f64] {
        let nn = self.n * self.n;
        &mut self.diag[k * nn..(k + 1) * nn]
    }

    pub fn lower_block(&self, k: usize) -> &[f64] {
        let nn = self.n * self.n;
        &self.lower[k * nn..(k + 1) * nn]
    }

    pub fn lower_block_mut(&mut self, k: usize) -> &mut [f64] {
        let nn = self.n * self.n;
        &mut self.lower[k * nn..(k + 1) * nn]
    }

    pub fn upper_block(&self, k: usize) -> &[f64] {
        let nn = self.n * self.n;
        &self.upper[k * nn..(k + 1) * nn]
    }

    pub fn upper_block_mut(&mut self, k: usize) -> &mut [f64] {
        let nn = self.n * self.n;
        &mut self.upper[k * nn..(k + 1) * nn]
    }

    /// `A x`, with `x` laid out cell-major like a [`Field`].
    pub fn mul(&self, x: &Field) -> Field {
        let (n, m) = (self.n, self.m);
        let mut y = Field::zeros(n, m);
        for k in 0..m {
            let mut acc = vec![0.0; n];
            crate::linalg::gemv_add(self.diag_block(k), n, x.cell(k), &mut acc);
            if k > 0 {
                crate::linalg::gemv_add(self.lower_block(k - 1), n, x.cell(k - 1), &mut acc);
            }
            if k + 1 < m {
                crate::linalg::gemv_add(self.upper_block(k), n, x.cell(k + 1), &mut acc);
            }
            y.cell_mut(k).copy_from_slice(&acc);
        }
        y
    }

    /// Dense row-major `(Nm)×(Nm)` copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let size = n * m;
        let mut a = vec![0.0; size * size];
        let mut put = |bi: usize, bj: usize, block: &[f64]| {
            for r in 0..n {
                for s in 0..n {
                    a[(bi * n + r) * size + bj * n + s] = block[r * n + s];
                }
            }
        };
        for k in 0..m {
            put(k, k, self.diag_block(k));
            if k + 1 < m {
                put(k + 1, k, self.lower_block(k));
                put(k, k + 1, self.upper_block(k));
            }
        }
        a
    }

    /// Block Thomas algorithm: block LU without pivoting across blocks,
    /// partial pivoting inside each pivot block.
    pub fn solve(&self, rhs: &Field) -> Result<Field, SolverError> {
        let (n, m) = (self.n, self.m);
        if rhs.n_components() != n || rhs.n_cells() != m {
            return Err(SolverError::Dimension(format!(
                "rhs is {}×{}, matrix is {n}×{m} blocks",
                rhs.n_components(),
                rhs.n_cells()
            )));
        }
        let nn = n * n;
        // factored pivot blocks and Γ_k = P_k⁻¹ U_k
        let mut pivots = self.diag.clone();
        let mut perms = vec![0usize; m * n];
        let mut gamma = vec![0.0; (m.saturating_sub(1)) * nn];
        let mut y = rhs.clone();
        let mut scratch = vec![0.0; n];
        let mut col = vec![0.0; n];

        for k in 0..m {
            if k > 0 {
                // P_k = D_k − L_{k−1} Γ_{k−1};  y_k −= L_{k−1} y_{k−1}
                gemm_sub(
                    self.lower_block(k - 1),
                    &gamma[(k - 1) * nn..k * nn],
                    n,
                    &mut pivots[k * nn..(k + 1) * nn],
                );
                let prev: Vec<f64> = y.cell(k - 1).to_vec();
                gemv_sub(self.lower_block(k - 1), n, &prev, y.cell_mut(k));
            }
            let block = &mut pivots[k * nn..(k + 1) * nn];
            let perm = &mut perms[k * n..(k + 1) * n];
            if !lu_factor(block, n, perm) {
                return Err(SolverError::SingularBlock { index: k });
            }
            lu_solve(block, n, perm, y.cell_mut(k), &mut scratch);
            if k + 1 < m {
                let upper = self.upper_block(k);
                let g = &mut gamma[k * nn..(k + 1) * nn];
                for j in 0..n {
                    for r in 0..n {
                        col[r] = upper[r * n + j];
                    }
                    lu_solve(block, n, perm, &mut col, &mut scratch);
                    for r in 0..n {
                        g[r * n + j] = col[r];
                    }
                }
            }
        }
        // back substitution: x_k = y_k − Γ_k x_{k+1}
        for k in (0..m.saturating_sub(1)).rev() {
            let next: Vec<f64> = y.cell(k + 1).to_vec();
            gemv_sub(&gamma[k * nn..(k + 1) * nn], n, &next, y.cell_mut(k));
        }
        Ok(y)
    }
}

/// `θ = D_a Δt / (2 Δz²)`.
pub fn theta(disc: &Discretization, dt: f64) -> f64 {
    let dz = disc.grid.dz();
    disc.physics.da() * dt / (2.0 * dz * dz)
}

/// `𝒢(wⁿ) = wⁿ + (Δt/2) ℒ(wⁿ)`.
pub fn build_rhs_g(w_n: &Field, dt: f64, convective: &Field) -> Field {
    let mut g = w_n.clone();
    g.axpy(0.5 * dt, convective);
    g
}

/// `ℱ(c) = W*(c) − (Δt/2) c𝒜 − 𝒢`.
pub fn stage_residual(c: &Field, g: &Field, disc: &Discretization, dt: f64) -> Field {
    let n = c.n_components();
    let m = c.n_cells();
    let th = theta(disc, dt);
    let mut f = Field::zeros(n, m);
    for k in 0..m {
        let out = f.cell_mut(k);
        disc.isotherm.conserved_into(c.cell(k), out);
        for i in 0..n {
            let ck = c.get(i, k);
            let mut lap = 0.0;
            if k > 0 {
                lap += c.get(i, k - 1) - ck;
            }
            if k + 1 < m {
                lap += c.get(i, k + 1) - ck;
            }
            out[i] -= th * lap + g.get(i, k);
        }
    }
    f
}

/// `ℱ'(c)`: diagonal blocks `W'(c_k) + θ·(number of neighbours)·I`,
/// off-diagonal blocks `−θI`.
pub fn newton_jacobian(c: &Field, disc: &Discretization, dt: f64) -> BlockTridiagonal {
    let n = c.n_components();
    let m = c.n_cells();
    let th = theta(disc, dt);
    let mut jac = BlockTridiagonal::zeros(n, m);
    for k in 0..m {
        let block = jac.diag_block_mut(k);
        disc.isotherm.jacobian_into(c.cell(k), block);
        let neighbours = (k > 0) as usize + (k + 1 < m) as usize;
        for i in 0..n {
            block[i * n + i] += th * neighbours as f64;
        }
    }
    if th != 0.0 {
        for k in 0..m.saturating_sub(1) {
            for i in 0..n {
                jac.lower_block_mut(k)[i * n + i] = -th;
                jac.upper_block_mut(k)[i * n + i] = -th;
            }
        }
    }
    jac
}

/// Converged implicit stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSolution {
    pub state: StateField,
    pub iterations: usize,
    /// Scaled residual before each iteration and after the last one.
    pub residuals: Vec<f64>,
}

fn scaled_norm(f: &Field, g_scale: f64) -> f64 {
    f.max_abs() / (1.0 + g_scale)
}

/// Newton's method on `ℱ(c) = 0` started from `warm_start` (the previous
/// time level's concentrations).
///
/// With `D_a = 0` the cells decouple and the exact solution is the
/// cell-wise inversion of `𝒢`, which is used directly as the start.
/// Iterates whose Langmuir denominator drops to 0.5 or below in some cell
/// are pulled back toward the previous iterate by halving the step.
pub fn newton_solve_stage(
    g: &Field,
    warm_start: &Field,
    disc: &Discretization,
    dt: f64,
    cfg: &NewtonConfig,
    inversion_tol: f64,
) -> Result<StageSolution, SolverError> {
    let iso = &disc.isotherm;
    let g_scale = g.max_abs();
    let mut c = if theta(disc, dt) == 0.0 {
        StateField::from_conserved(g.clone(), iso, inversion_tol)?
            .c()
            .clone()
    } else {
        warm_start.clone()
    };
    let mut f = stage_residual(&c, g, disc, dt);
    let mut residuals = vec![scaled_norm(&f, g_scale)];
    let mut iterations = 0;
    while residuals[iterations] > cfg.tol {
        if iterations == cfg.max_iter {
            return Err(SolverError::NewtonNotConverged {
                iterations,
                residuals,
            });
        }
        let jac = newton_jacobian(&c, disc, dt);
        let delta = jac.solve(&f)?;
        let mut step = 1.0;
        let next = loop {
            let mut trial = c.clone();
            trial.axpy(-step, &delta);
            match (0..trial.n_cells()).find(|&k| iso.denominator(trial.cell(k)) <= MIN_DENOMINATOR) {
                None => break trial,
                Some(cell) => {
                    step *= 0.5;
                    if step < 1e-10 {
                        return Err(SolverError::InvalidIterate { cell });
                    }
                }
            }
        };
        c = next;
        f = stage_residual(&c, g, disc, dt);
        residuals.push(scaled_norm(&f, g_scale));
        iterations += 1;
    }
    Ok(StageSolution {
        state: StateField::from_concentrations(c, iso),
        iterations,
        residuals,
    })
}
