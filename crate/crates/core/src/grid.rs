//! Box domains, cell-centered fields and finite-volume operators.
//!
//! Values are stored row-major with axis 0 slowest. The Laplacian is written
//! in flux form: every interior face contributes `±(f_{i+1} − f_i)/h²` to the
//! two adjacent cells, Neumann walls carry no flux and periodic axes wrap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary treatment of the finite-volume operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    Neumann,
    Periodic,
}

impl std::fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryMode::Neumann => f.write_str("neumann"),
            BoundaryMode::Periodic => f.write_str("periodic"),
        }
    }
}

/// An axis-aligned box `[0, L₁] × … × [0, L_d]` split into uniform cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    extents: Vec<f64>,
    cells: Vec<usize>,
    boundary: BoundaryMode,
}

impl Domain {
    pub fn new(extents: Vec<f64>, cells: Vec<usize>, boundary: BoundaryMode) -> Result<Self> {
        let dim = cells.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::Validation(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        if extents.len() != dim {
            return Err(Error::Validation(format!(
                "extents has {} entries, cells has {dim}",
                extents.len()
            )));
        }
        if let Some(n) = cells.iter().find(|&&n| n < 4) {
            return Err(Error::Validation(format!("cell counts must be >= 4, got {n}")));
        }
        if let Some(l) = extents.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::Validation(format!("extents must be > 0, got {l}")));
        }
        Ok(Self {
            extents,
            cells,
            boundary,
        })
    }

    /// Unit-length 1D domain.
    pub fn unit_1d(n: usize, boundary: BoundaryMode) -> Result<Self> {
        Self::new(vec![1.0], vec![n], boundary)
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn boundary(&self) -> BoundaryMode {
        self.boundary
    }

    pub fn with_boundary(&self, boundary: BoundaryMode) -> Self {
        Self {
            boundary,
            ..self.clone()
        }
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.extents[axis] / self.cells[axis] as f64
    }

    pub fn spacings(&self) -> Vec<f64> {
        (0..self.dim()).map(|a| self.spacing(a)).collect()
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume of one cell.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    /// `|Ω|`.
    pub fn measure(&self) -> f64 {
        self.extents.iter().product()
    }

    pub fn diameter(&self) -> f64 {
        self.extents.iter().map(|l| l * l).sum::<f64>().sqrt()
    }

    /// Flat-index stride of `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.cells[axis + 1..].iter().product()
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            out[a] = idx % self.cells[a];
            idx /= self.cells[a];
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.cells)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Cell-center coordinates of cell `idx`.
    pub fn center(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(a, &i)| (i as f64 + 0.5) * self.spacing(a))
            .collect()
    }

    /// Same lattice and extents (boundary mode may differ).
    pub fn same_lattice(&self, other: &Domain) -> bool {
        self.cells == other.cells && self.extents == other.extents
    }

    /// Writes the finite-volume Laplacian of `values` into `out`.
    pub fn apply_laplacian(&self, values: &[f64], out: &mut [f64]) {
        assert_eq!(values.len(), self.len());
        assert_eq!(out.len(), self.len());
        out.iter_mut().for_each(|o| *o = 0.0);
        for axis in 0..self.dim() {
            let inv_h2 = 1.0 / self.spacing(axis).powi(2);
            self.for_each_face(axis, |lo, hi| {
                let flux = (values[hi] - values[lo]) * inv_h2;
                out[lo] += flux;
                out[hi] -= flux;
            });
        }
    }

    /// Visits every face `(lo, hi)` between neighbouring cells along `axis`,
    /// including the wrap-around face on periodic axes.
    fn for_each_face(&self, axis: usize, mut visit: impl FnMut(usize, usize)) {
        let n = self.cells[axis];
        let stride = self.stride(axis);
        let block = n * stride;
        let outer = self.len() / block;
        for o in 0..outer {
            let base = o * block;
            for i in 0..n - 1 {
                for inner in 0..stride {
                    let lo = base + i * stride + inner;
                    visit(lo, lo + stride);
                }
            }
            if self.boundary == BoundaryMode::Periodic {
                for inner in 0..stride {
                    visit(base + (n - 1) * stride + inner, base + inner);
                }
            }
        }
    }
}

/// Norm selector for [`Field::norm`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Norm {
    L1,
    L2,
    Lp(f64),
    Linf,
    H1,
}

/// A cell-centered scalar grid function.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    domain: Domain,
    values: Vec<f64>,
}

impl Field {
    pub fn new(domain: Domain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::Validation(format!(
                "field has {} values, domain has {} cells",
                values.len(),
                domain.len()
            )));
        }
        Ok(Self { domain, values })
    }

    pub fn constant(domain: &Domain, c: f64) -> Self {
        Self {
            values: vec![c; domain.len()],
            domain: domain.clone(),
        }
    }

    pub fn zeros(domain: &Domain) -> Self {
        Self::constant(domain, 0.0)
    }

    /// Samples `f` at the cell centers.
    pub fn from_fn(domain: &Domain, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..domain.len()).map(|i| f(&domain.center(i))).collect();
        Self {
            domain: domain.clone(),
            values,
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            domain: self.domain.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.values.len(), other.values.len());
        Field {
            domain: self.domain.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `∫_Ω f` by the midpoint rule.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.domain.cell_volume()
    }

    /// `|Ω|⁻¹ ∫_Ω f`.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `⟨f, g⟩_{L²}`.
    pub fn inner(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.domain.cell_volume()
    }

    /// Discrete gradient pairing `⟨∇f, ∇g⟩` over cell faces.
    pub fn grad_inner(&self, other: &Field) -> f64 {
        let vol = self.domain.cell_volume();
        let mut acc = 0.0;
        for axis in 0..self.domain.dim() {
            let h2 = self.domain.spacing(axis).powi(2);
            let mut s = 0.0;
            self.domain.for_each_face(axis, |lo, hi| {
                s += (self.values[hi] - self.values[lo]) * (other.values[hi] - other.values[lo]);
            });
            acc += s / h2;
        }
        acc * vol
    }

    pub fn norm(&self, which: Norm) -> Result<f64> {
        let vol = self.domain.cell_volume();
        Ok(match which {
            Norm::L1 => self.values.iter().map(|v| v.abs()).sum::<f64>() * vol,
            Norm::L2 => (self.values.iter().map(|v| v * v).sum::<f64>() * vol).sqrt(),
            Norm::Lp(p) => {
                if !(p >= 1.0) {
                    return Err(Error::Validation(format!("Lp norm needs p >= 1, got {p}")));
                }
                if p.is_infinite() {
                    self.sup_abs()
                } else {
                    // scale by the sup to avoid overflow for large p
                    let m = self.sup_abs();
                    if m == 0.0 {
                        0.0
                    } else {
                        m * (self.values.iter().map(|v| (v.abs() / m).powf(p)).sum::<f64>() * vol)
                            .powf(1.0 / p)
                    }
                }
            }
            Norm::Linf => self.sup_abs(),
            Norm::H1 => (self.inner(self) + self.grad_inner(self)).sqrt(),
        })
    }

    /// Cell-centered finite-volume Laplacian.
    pub fn laplacian(&self) -> Field {
        let mut out = vec![0.0; self.values.len()];
        self.domain.apply_laplacian(&self.values, &mut out);
        Field {
            domain: self.domain.clone(),
            values: out,
        }
    }

    /// Diagonal of `−Δ` (positive), used for Jacobi preconditioning.
    pub fn neg_laplacian_diagonal(domain: &Domain) -> Vec<f64> {
        let mut out = vec![0.0; domain.len()];
        for axis in 0..domain.dim() {
            let inv_h2 = 1.0 / domain.spacing(axis).powi(2);
            domain.for_each_face(axis, |lo, hi| {
                out[lo] += inv_h2;
                out[hi] += inv_h2;
            });
        }
        out
    }

    /// Cell gradient: average of the two adjacent face differences per axis
    /// (zero flux on Neumann walls).
    pub fn gradient(&self) -> Vec<Field> {
        (0..self.domain.dim())
            .map(|axis| {
                let h = self.domain.spacing(axis);
                let mut out = vec![0.0; self.values.len()];
                self.domain.for_each_face(axis, |lo, hi| {
                    let g = 0.5 * (self.values[hi] - self.values[lo]) / h;
                    out[lo] += g;
                    out[hi] += g;
                });
                Field {
                    domain: self.domain.clone(),
                    values: out,
                }
            })
            .collect()
    }
}

/// Pointwise Euclidean magnitude of a vector field.
pub fn magnitude(components: &[Field]) -> Option<Field> {
    let first = components.first()?;
    let mut out = vec![0.0; first.values.len()];
    for c in components {
        for (o, v) in out.iter_mut().zip(&c.values) {
            *o += v * v;
        }
    }
    out.iter_mut().for_each(|v| *v = v.sqrt());
    Some(Field {
        domain: first.domain.clone(),
        values: out,
    })
}
