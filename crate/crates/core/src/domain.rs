//! Discrete calculus on a flat periodic lattice (circle or 2-torus).
//!
//! Maps live on cells. The differential is the forward difference along
//! each axis and the codifferential is its negative adjoint, the backward
//! divergence, so that
//!
//! ```text
//! ⟨du, w⟩ = ⟨u, δw⟩,   ⟨a, b⟩ = vol · Σ_cells a · b
//! ```
//!
//! holds exactly (up to rounding) on every grid.

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::sphere::VariationField;

pub const MIN_CELLS_PER_AXIS: usize = 4;

/// Uniform periodic lattice with one or two axes and a flat metric.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusGrid {
    sizes: Vec<usize>,
    spacings: Vec<f64>,
}

impl TorusGrid {
    /// Builds a grid from cell counts and physical periods per axis.
    pub fn new(sizes: &[usize], periods: &[f64]) -> Result<Self> {
        if sizes.is_empty() || sizes.len() > 2 {
            return Err(Error::invalid("n", format!("must be 1 or 2, got {}", sizes.len())));
        }
        if periods.len() != sizes.len() {
            return Err(Error::invalid(
                "period",
                format!("expected {} entries, got {}", sizes.len(), periods.len()),
            ));
        }
        for (axis, (&size, &period)) in sizes.iter().zip(periods).enumerate() {
            if size < MIN_CELLS_PER_AXIS {
                return Err(Error::invalid(
                    format!("sizes[{axis}]"),
                    format!("must be >= {MIN_CELLS_PER_AXIS}, got {size}"),
                ));
            }
            if !(period.is_finite() && period > 0.0) {
                return Err(Error::invalid(format!("period[{axis}]"), format!("must be > 0, got {period}")));
            }
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            spacings: sizes.iter().zip(periods).map(|(&n, &p)| p / n as f64).collect(),
        })
    }

    pub fn circle(cells: usize, period: f64) -> Result<Self> {
        Self::new(&[cells], &[period])
    }

    pub fn torus(cells: [usize; 2], period: [f64; 2]) -> Result<Self> {
        Self::new(&cells, &period)
    }

    /// Domain dimension n.
    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn size(&self, axis: usize) -> usize {
        self.sizes[axis]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacings[axis]
    }

    pub fn period(&self, axis: usize) -> f64 {
        self.spacings[axis] * self.sizes[axis] as f64
    }

    pub fn cell_count(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn volume_element(&self) -> f64 {
        self.spacings.iter().product()
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.period(a)).product()
    }

    /// Linear index of a multi-index; axis 0 varies fastest.
    pub fn index(&self, multi: &[usize]) -> usize {
        match self.dim() {
            1 => multi[0] % self.sizes[0],
            _ => multi[0] % self.sizes[0] + self.sizes[0] * (multi[1] % self.sizes[1]),
        }
    }

    pub fn multi_index(&self, cell: usize) -> [usize; 2] {
        match self.dim() {
            1 => [cell, 0],
            _ => [cell % self.sizes[0], cell / self.sizes[0]],
        }
    }

    /// Coordinate i·h of a cell along an axis.
    pub fn coordinate(&self, cell: usize, axis: usize) -> f64 {
        self.multi_index(cell)[axis] as f64 * self.spacings[axis]
    }

    /// Periodic neighbour one step forward along `axis`.
    #[inline]
    pub fn forward(&self, cell: usize, axis: usize) -> usize {
        let stride = if axis == 0 { 1 } else { self.sizes[0] };
        let n = self.sizes[axis];
        let i = (cell / stride) % n;
        if i + 1 == n {
            cell + stride - n * stride
        } else {
            cell + stride
        }
    }

    /// Periodic neighbour one step backward along `axis`.
    #[inline]
    pub fn backward(&self, cell: usize, axis: usize) -> usize {
        let stride = if axis == 0 { 1 } else { self.sizes[0] };
        let n = self.sizes[axis];
        let i = (cell / stride) % n;
        if i == 0 {
            cell + (n - 1) * stride
        } else {
            cell - stride
        }
    }

    /// Cyclic shift of a scalar or vector field by `offset` cells along `axis`:
    /// the result at cell c holds the input at c + offset.
    pub fn shift(&self, data: &[f64], per_cell: usize, axis: usize, offset: usize) -> Vec<f64> {
        let mut out = vec![0.0; data.len()];
        for cell in 0..self.cell_count() {
            let mut src = cell;
            for _ in 0..offset % self.sizes[axis] {
                src = self.forward(src, axis);
            }
            out[cell * per_cell..(cell + 1) * per_cell]
                .copy_from_slice(&data[src * per_cell..(src + 1) * per_cell]);
        }
        out
    }
}

/// A per-cell field of vectors in ambient Euclidean space.
pub trait AmbientField {
    fn ambient_dim(&self) -> usize;
    fn as_slice(&self) -> &[f64];

    fn cell_count(&self) -> usize {
        self.as_slice().len() / self.ambient_dim()
    }

    fn cell(&self, c: usize) -> &[f64] {
        let k = self.ambient_dim();
        &self.as_slice()[c * k..(c + 1) * k]
    }
}

/// A discrete section of T*M ⊗ ℝ^k: one ambient vector per axis and cell.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldOnGrid {
    axes: usize,
    k: usize,
    cells: usize,
    data: Vec<f64>,
}

impl VectorFieldOnGrid {
    pub fn zeros(grid: &TorusGrid, k: usize) -> Self {
        Self {
            axes: grid.dim(),
            k,
            cells: grid.cell_count(),
            data: vec![0.0; grid.dim() * grid.cell_count() * k],
        }
    }

    pub fn from_vec(grid: &TorusGrid, k: usize, data: Vec<f64>) -> Result<Self> {
        let expected = grid.dim() * grid.cell_count() * k;
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "vector field needs {expected} entries, got {}",
                data.len()
            )));
        }
        Ok(Self {
            axes: grid.dim(),
            k,
            cells: grid.cell_count(),
            data,
        })
    }

    pub fn axes(&self) -> usize {
        self.axes
    }

    pub fn ambient_dim(&self) -> usize {
        self.k
    }

    pub fn cell_count(&self) -> usize {
        self.cells
    }

    pub fn get(&self, axis: usize, cell: usize) -> &[f64] {
        let start = (axis * self.cells + cell) * self.k;
        &self.data[start..start + self.k]
    }

    pub fn get_mut(&mut self, axis: usize, cell: usize) -> &mut [f64] {
        let start = (axis * self.cells + cell) * self.k;
        &mut self.data[start..start + self.k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Multiplies every axis component at each cell by `weights[cell]`.
    pub fn scale_cells(&mut self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.cells {
            return Err(Error::ShapeMismatch(format!(
                "{} cell weights for a field over {} cells",
                weights.len(),
                self.cells
            )));
        }
        for axis in 0..self.axes {
            for (cell, w) in weights.iter().enumerate() {
                self.get_mut(axis, cell).iter_mut().for_each(|x| *x *= w);
            }
        }
        Ok(())
    }

    fn check_grid(&self, grid: &TorusGrid) -> Result<()> {
        if self.axes != grid.dim() || self.cells != grid.cell_count() {
            return Err(Error::ShapeMismatch(format!(
                "field over {} cells x {} axes, grid has {} cells x {} axes",
                self.cells,
                self.axes,
                grid.cell_count(),
                grid.dim()
            )));
        }
        Ok(())
    }
}

fn check_cells(grid: &TorusGrid, len: usize, k: usize) -> Result<()> {
    if k == 0 || len != grid.cell_count() * k {
        return Err(Error::ShapeMismatch(format!(
            "field with {len} entries (k = {k}) on a grid of {} cells",
            grid.cell_count()
        )));
    }
    Ok(())
}

/// Forward differences written into `out` (layout of [`VectorFieldOnGrid`]).
pub(crate) fn differential_raw(grid: &TorusGrid, k: usize, u: &[f64], out: &mut [f64]) {
    let cells = grid.cell_count();
    for axis in 0..grid.dim() {
        let inv_h = 1.0 / grid.spacing(axis);
        for cell in 0..cells {
            let next = grid.forward(cell, axis);
            let dst = (axis * cells + cell) * k;
            for a in 0..k {
                out[dst + a] = (u[next * k + a] - u[cell * k + a]) * inv_h;
            }
        }
    }
}

/// Backward divergence, negated, written into `out` (k values per cell).
pub(crate) fn codifferential_raw(grid: &TorusGrid, k: usize, w: &[f64], out: &mut [f64]) {
    let cells = grid.cell_count();
    out.iter_mut().for_each(|x| *x = 0.0);
    for axis in 0..grid.dim() {
        let inv_h = 1.0 / grid.spacing(axis);
        for cell in 0..cells {
            let prev = grid.backward(cell, axis);
            let here = (axis * cells + cell) * k;
            let there = (axis * cells + prev) * k;
            for a in 0..k {
                out[cell * k + a] -= (w[here + a] - w[there + a]) * inv_h;
            }
        }
    }
}

pub(crate) fn q_field_raw(grid: &TorusGrid, k: usize, du: &[f64], out: &mut [f64]) {
    let cells = grid.cell_count();
    for (cell, q) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for axis in 0..grid.dim() {
            let start = (axis * cells + cell) * k;
            acc += du[start..start + k].iter().map(|x| x * x).sum::<f64>();
        }
        *q = acc;
    }
}

/// du: forward difference (u[i+1] − u[i])/h along each axis.
pub fn differential<F: AmbientField + ?Sized>(grid: &TorusGrid, u: &F) -> Result<VectorFieldOnGrid> {
    let k = u.ambient_dim();
    check_cells(grid, u.as_slice().len(), k)?;
    let mut du = VectorFieldOnGrid::zeros(grid, k);
    differential_raw(grid, k, u.as_slice(), &mut du.data);
    Ok(du)
}

/// Q per cell: Σ_axes |du_axis|².
pub fn q_field(grid: &TorusGrid, du: &VectorFieldOnGrid) -> Result<Vec<f64>> {
    du.check_grid(grid)?;
    let mut q = vec![0.0; grid.cell_count()];
    q_field_raw(grid, du.k, &du.data, &mut q);
    Ok(q)
}

/// δw: −Σ_axes (w_axis[i] − w_axis[i−1])/h, the negative adjoint of [`differential`].
pub fn codifferential(grid: &TorusGrid, w: &VectorFieldOnGrid) -> Result<VariationField> {
    w.check_grid(grid)?;
    let mut out = vec![0.0; grid.cell_count() * w.k];
    codifferential_raw(grid, w.k, &w.data, &mut out);
    VariationField::from_vec(w.k, out)
}

/// vol · Σ_cells f, with compensated summation.
pub fn integrate(grid: &TorusGrid, f: &[f64]) -> Result<f64> {
    if f.len() != grid.cell_count() {
        return Err(Error::ShapeMismatch(format!(
            "{} samples on a grid of {} cells",
            f.len(),
            grid.cell_count()
        )));
    }
    Ok(grid.volume_element() * compensated_sum(f.iter().copied()))
}

/// L² inner product of two per-cell ambient fields.
pub fn inner<A, B>(grid: &TorusGrid, a: &A, b: &B) -> Result<f64>
where
    A: AmbientField + ?Sized,
    B: AmbientField + ?Sized,
{
    let (xa, xb) = (a.as_slice(), b.as_slice());
    check_cells(grid, xa.len(), a.ambient_dim())?;
    if xa.len() != xb.len() || a.ambient_dim() != b.ambient_dim() {
        return Err(Error::ShapeMismatch("inner product of differently shaped fields".into()));
    }
    let sum: CompensatedSum = xa.iter().zip(xb).map(|(x, y)| x * y).collect();
    Ok(grid.volume_element() * sum.value())
}

/// L² inner product of two fields of differentials.
pub fn inner_forms(grid: &TorusGrid, a: &VectorFieldOnGrid, b: &VectorFieldOnGrid) -> Result<f64> {
    a.check_grid(grid)?;
    b.check_grid(grid)?;
    if a.k != b.k {
        return Err(Error::ShapeMismatch("ambient dimensions differ".into()));
    }
    let sum: CompensatedSum = a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();
    Ok(grid.volume_element() * sum.value())
}

/// Writes a field of differentials as CSV: cell indices, axis, components.
pub fn write_forms_csv<W: std::io::Write>(grid: &TorusGrid, w: &VectorFieldOnGrid, out: W) -> Result<()> {
    w.check_grid(grid)?;
    let mut writer = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..grid.dim()).map(|a| format!("i{a}")).collect();
    header.push("axis".into());
    header.extend((0..w.k).map(|a| format!("c{a}")));
    writer.write_record(&header)?;
    for axis in 0..grid.dim() {
        for cell in 0..grid.cell_count() {
            let idx = grid.multi_index(cell);
            let mut row: Vec<String> = idx[..grid.dim()].iter().map(|i| i.to_string()).collect();
            row.push(axis.to_string());
            row.extend(w.get(axis, cell).iter().map(|x| x.to_string()));
            writer.write_record(&row)?;
        }
    }
    writer.flush()?;
    Ok(())
}
