//! Grid-function storage.

use thiserror::Error;

use crate::isotherm::{IsothermError, LangmuirParams};

/// An N×m array of per-cell component values.
///
/// Storage is cell-major: the N components of cell `k` are contiguous, which
/// is the layout the block solver and the per-cell inversions want.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    n: usize,
    m: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(n: usize, m: usize) -> Self {
        Field {
            n,
            m,
            data: vec![0.0; n * m],
        }
    }

    /// Builds a field from `f(component, cell)`.
    pub fn from_fn(n: usize, m: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * m);
        for k in 0..m {
            for i in 0..n {
                data.push(f(i, k));
            }
        }
        Field { n, m, data }
    }

    /// Wraps cell-major data. Panics on a length mismatch.
    pub fn from_cell_major(n: usize, m: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * m, "field data must hold n*m values");
        Field { n, m, data }
    }

    /// Same column `c` repeated in every cell.
    pub fn uniform(c: &[f64], m: usize) -> Self {
        Self::from_fn(c.len(), m, |i, _| c[i])
    }

    pub fn n_components(&self) -> usize {
        self.n
    }

    pub fn n_cells(&self) -> usize {
        self.m
    }

    pub fn cell(&self, k: usize) -> &[f64] {
        &self.data[k * self.n..(k + 1) * self.n]
    }

    pub fn cell_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.n..(k + 1) * self.n]
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[k * self.n + i]
    }

    pub fn set(&mut self, i: usize, k: usize, v: f64) {
        self.data[k * self.n + i] = v;
    }

    /// Profile of component `i` along the column.
    pub fn component(&self, i: usize) -> Vec<f64> {
        (0..self.m).map(|k| self.get(i, k)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn cells(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.n)
    }

    /// `self += s · other`.
    pub fn axpy(&mut self, s: f64, other: &Field) {
        assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Maximum absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("cell {cell}: {source}")]
pub struct InversionError {
    pub cell: usize,
    #[source]
    pub source: IsothermError,
}

/// Conserved variables paired with the concentrations they map to.
///
/// The per-cell `ρ₀` values from the last inversion are kept as warm starts
/// for the next one.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    w: Field,
    c: Field,
    rho: Vec<f64>,
}

impl StateField {
    pub fn zeros(n: usize, m: usize) -> Self {
        StateField {
            w: Field::zeros(n, m),
            c: Field::zeros(n, m),
            rho: vec![1.0; m],
        }
    }

    /// Pairs concentrations with `w = W(c)` cell by cell.
    pub fn from_concentrations(c: Field, iso: &LangmuirParams) -> Self {
        let mut w = Field::zeros(c.n_components(), c.n_cells());
        let mut rho = Vec::with_capacity(c.n_cells());
        for k in 0..c.n_cells() {
            iso.conserved_into(c.cell(k), w.cell_mut(k));
            rho.push(iso.denominator(c.cell(k)));
        }
        StateField { w, c, rho }
    }

    /// Inverts every cell of `w`.
    pub fn from_conserved(
        w: Field,
        iso: &LangmuirParams,
        tol: f64,
    ) -> Result<Self, InversionError> {
        let mut state = StateField::zeros(w.n_components(), w.n_cells());
        state.set_conserved(w, iso, tol)?;
        Ok(state)
    }

    /// Replaces `w` and recomputes `c`, warm-starting from the cached roots.
    pub fn set_conserved(
        &mut self,
        w: Field,
        iso: &LangmuirParams,
        tol: f64,
    ) -> Result<(), InversionError> {
        let m = w.n_cells();
        if self.c.n_cells() != m || self.c.n_components() != w.n_components() {
            self.c = Field::zeros(w.n_components(), m);
            self.rho = vec![1.0; m];
        }
        for k in 0..m {
            let guess = Some(self.rho[k]);
            self.rho[k] = iso
                .concentrations_into(w.cell(k), tol, guess, self.c.cell_mut(k))
                .map_err(|source| InversionError { cell: k, source })?;
        }
        self.w = w;
        Ok(())
    }

    /// Replaces `c` and recomputes `w` (used after implicit stages, which
    /// solve for concentrations directly).
    pub fn set_concentrations(&mut self, c: Field, iso: &LangmuirParams) {
        *self = StateField::from_concentrations(c, iso);
    }

    pub fn w(&self) -> &Field {
        &self.w
    }

    pub fn c(&self) -> &Field {
        &self.c
    }

    pub fn n_components(&self) -> usize {
        self.w.n_components()
    }

    pub fn n_cells(&self) -> usize {
        self.w.n_cells()
    }

    pub fn into_parts(self) -> (Field, Field) {
        (self.w, self.c)
    }
}
