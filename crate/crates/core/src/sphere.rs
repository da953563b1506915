//! The round unit sphere S^m ⊂ ℝ^{m+1}: nearest-point projection, tangent
//! projection, the second fundamental form, and grid-valued maps into it.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::domain::{AmbientField, TorusGrid};
use crate::error::{Error, Result};

/// Tolerance on | |u| − 1 | for a valid sphere map.
pub const UNIT_TOLERANCE: f64 = 1e-12;
/// Largest norm drift a CSV loader repairs by renormalisation.
pub const LOAD_RENORMALIZE_LIMIT: f64 = 1e-8;
const DEGENERATE_NORM: f64 = 1e-14;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_unit(u: &[f64]) -> Result<()> {
    let dev = (norm(u) - 1.0).abs();
    if dev > UNIT_TOLERANCE || dev.is_nan() {
        return Err(Error::NonUnit(dev));
    }
    Ok(())
}

/// Nearest point y/|y| on the unit sphere.
pub fn project(y: &[f64]) -> Result<Vec<f64>> {
    let mut out = y.to_vec();
    project_in_place(&mut out)?;
    Ok(out)
}

pub(crate) fn project_in_place(y: &mut [f64]) -> Result<()> {
    let r = norm(y);
    if !(r > DEGENERATE_NORM) {
        return Err(Error::DegenerateProjection(r));
    }
    y.iter_mut().for_each(|x| *x /= r);
    Ok(())
}

/// ψ − ⟨ψ,u⟩u, the component of ψ tangent to the sphere at u.
pub fn tangent_project(u: &[f64], psi: &[f64]) -> Result<Vec<f64>> {
    check_unit(u)?;
    if u.len() != psi.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} components", u.len(), psi.len())));
    }
    let s = dot(psi, u);
    Ok(psi.iter().zip(u).map(|(p, x)| p - s * x).collect())
}

/// A(du, du) = −|du|² u for the unit sphere; `du_axes` holds one ambient
/// vector per domain axis at the cell.
pub fn second_fundamental_term(u: &[f64], du_axes: &[&[f64]]) -> Result<Vec<f64>> {
    check_unit(u)?;
    let q: f64 = du_axes.iter().map(|d| dot(d, d)).sum();
    Ok(u.iter().map(|x| -q * x).collect())
}

/// A grid of unit vectors in ℝ^k, k = m + 1, representing u: M → S^m.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereMap {
    k: usize,
    data: Vec<f64>,
}

impl AmbientField for SphereMap {
    fn ambient_dim(&self) -> usize {
        self.k
    }

    fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

impl SphereMap {
    /// Wraps per-cell vectors, checking the unit-norm invariant.
    pub fn from_vec(k: usize, data: Vec<f64>) -> Result<Self> {
        if k < 2 || !data.len().is_multiple_of(k) || data.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "{} entries cannot form a map into S^{}",
                data.len(),
                k.saturating_sub(1)
            )));
        }
        for cell in data.chunks_exact(k) {
            check_unit(cell)?;
        }
        Ok(Self { k, data })
    }

    /// Projects arbitrary nonzero per-cell vectors onto the sphere.
    pub fn from_projected(k: usize, mut data: Vec<f64>) -> Result<Self> {
        if k < 2 || !data.len().is_multiple_of(k) || data.is_empty() {
            return Err(Error::ShapeMismatch(format!("{} entries with k = {k}", data.len())));
        }
        for cell in data.chunks_exact_mut(k) {
            project_in_place(cell)?;
        }
        Ok(Self { k, data })
    }

    pub(crate) fn from_raw_unchecked(k: usize, data: Vec<f64>) -> Self {
        Self { k, data }
    }

    /// The constant map to `point`, which must be a unit vector.
    pub fn constant(grid: &TorusGrid, point: &[f64]) -> Result<Self> {
        check_unit(point)?;
        Self::from_vec(point.len(), point.repeat(grid.cell_count()))
    }

    /// Geodesic wrap x ↦ (cos 2πx/L, sin 2πx/L, 0, …) along axis 0, wound
    /// once around the great circle in the first two ambient coordinates.
    pub fn wrap(grid: &TorusGrid, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid("target_m", "a wrap needs m >= 1"));
        }
        let period = grid.period(0);
        let mut data = vec![0.0; grid.cell_count() * k];
        for (cell, chunk) in data.chunks_exact_mut(k).enumerate() {
            let theta = 2.0 * std::f64::consts::PI * grid.coordinate(cell, 0) / period;
            chunk[0] = theta.cos();
            chunk[1] = theta.sin();
        }
        Ok(Self { k, data })
    }

    /// A smooth random perturbation of a random constant map:
    /// u = project(p₀ + φ), where p₀ is a seeded random point of the sphere
    /// and φ a sum of low Fourier modes (wavenumbers ≤ 2, coefficients
    /// decaying like |κ|⁻²) rescaled so that max |φ| = `amplitude` < 1.
    pub fn random_perturbation(grid: &TorusGrid, k: usize, seed: u64, amplitude: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid("target_m", "must be >= 1"));
        }
        if !(amplitude.is_finite() && (0.0..1.0).contains(&amplitude)) {
            return Err(Error::invalid("amplitude", format!("must lie in [0, 1), got {amplitude}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gaussian = |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };
        let mut base = gaussian(k);
        project_in_place(&mut base)?;

        let wavevectors: Vec<(i32, i32)> = if grid.dim() == 1 {
            vec![(1, 0), (2, 0)]
        } else {
            (0..=2)
                .flat_map(|kx| (-2..=2).map(move |ky| (kx, ky)))
                .filter(|&(kx, ky)| kx > 0 || (kx == 0 && ky > 0))
                .collect()
        };
        let modes: Vec<((i32, i32), Vec<f64>, Vec<f64>)> = wavevectors
            .into_iter()
            .map(|kv| {
                let weight = 1.0 / f64::from(kv.0 * kv.0 + kv.1 * kv.1);
                let a = gaussian(k).into_iter().map(|x| x * weight).collect();
                let b = gaussian(k).into_iter().map(|x| x * weight).collect();
                (kv, a, b)
            })
            .collect();

        let two_pi = 2.0 * std::f64::consts::PI;
        let mut phi = vec![0.0; grid.cell_count() * k];
        for (cell, out) in phi.chunks_exact_mut(k).enumerate() {
            let x = grid.coordinate(cell, 0) / grid.period(0);
            let y = if grid.dim() == 2 { grid.coordinate(cell, 1) / grid.period(1) } else { 0.0 };
            for ((kx, ky), a, b) in &modes {
                let theta = two_pi * (f64::from(*kx) * x + f64::from(*ky) * y);
                let (s, c) = theta.sin_cos();
                for i in 0..k {
                    out[i] += a[i] * c + b[i] * s;
                }
            }
        }
        let peak = phi.chunks_exact(k).map(norm).fold(0.0, f64::max);
        let scale = if peak > 0.0 { amplitude / peak } else { 0.0 };
        let data = phi
            .chunks_exact(k)
            .flat_map(|p| base.iter().zip(p).map(|(b, x)| b + scale * x).collect::<Vec<_>>())
            .collect();
        Self::from_projected(k, data)
    }

    /// Target dimension m.
    pub fn target_dim(&self) -> usize {
        self.k - 1
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// project(u + tV) cell-wise.
    pub fn perturbed(&self, v: &VariationField, t: f64) -> Result<SphereMap> {
        if v.k != self.k || v.data.len() != self.data.len() {
            return Err(Error::ShapeMismatch("variation does not match the map".into()));
        }
        let mut data: Vec<f64> = self.data.iter().zip(&v.data).map(|(u, d)| u + t * d).collect();
        for cell in data.chunks_exact_mut(self.k) {
            project_in_place(cell)?;
        }
        Ok(SphereMap { k: self.k, data })
    }

    /// Tangential part of an ambient field along this map.
    pub fn tangent_part(&self, psi: &VariationField) -> Result<VariationField> {
        if psi.k != self.k || psi.data.len() != self.data.len() {
            return Err(Error::ShapeMismatch("field does not match the map".into()));
        }
        let mut out = psi.data.clone();
        for (o, u) in out.chunks_exact_mut(self.k).zip(self.data.chunks_exact(self.k)) {
            let s = dot(o, u);
            o.iter_mut().zip(u).for_each(|(x, ui)| *x -= s * ui);
        }
        Ok(VariationField { k: self.k, data: out })
    }

    pub fn write_csv<W: Write>(&self, grid: &TorusGrid, out: W) -> Result<()> {
        write_cells_csv(grid, self.k, &self.data, "u", out)
    }

    /// Loads a map written by [`SphereMap::write_csv`]. Cells whose norm
    /// drifts from 1 by at most 1e−8 are renormalised; larger drift is an error.
    pub fn read_csv<R: Read>(grid: &TorusGrid, input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let header = reader.headers()?.clone();
        let n = grid.dim();
        if header.len() <= n + 1 {
            return Err(Error::Parse(format!("expected {n} index columns and >= 2 components")));
        }
        let k = header.len() - n;
        let mut data = vec![f64::NAN; grid.cell_count() * k];
        let mut seen = vec![false; grid.cell_count()];
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let parse = |i: usize| -> Result<&str> {
                record.get(i).ok_or_else(|| Error::Parse(format!("row {}: missing column {i}", line + 1)))
            };
            let mut idx = [0usize; 2];
            for (axis, slot) in idx.iter_mut().enumerate().take(n) {
                *slot = parse(axis)?
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("row {}: index: {e}", line + 1)))?;
                if *slot >= grid.size(axis) {
                    return Err(Error::Parse(format!("row {}: index {} out of range", line + 1, *slot)));
                }
            }
            let cell = grid.index(&idx[..n]);
            let mut v = Vec::with_capacity(k);
            for a in 0..k {
                v.push(
                    parse(n + a)?
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("row {}: component: {e}", line + 1)))?,
                );
            }
            let dev = (norm(&v) - 1.0).abs();
            if !(dev <= LOAD_RENORMALIZE_LIMIT) {
                return Err(Error::NonUnit(dev));
            }
            project_in_place(&mut v)?;
            data[cell * k..(cell + 1) * k].copy_from_slice(&v);
            seen[cell] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Parse(format!("cell {missing} missing from input")));
        }
        Ok(Self { k, data })
    }
}

/// A grid of ambient vectors along a map: variations, gradients, residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationField {
    k: usize,
    data: Vec<f64>,
}

impl AmbientField for VariationField {
    fn ambient_dim(&self) -> usize {
        self.k
    }

    fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

impl VariationField {
    pub fn zeros(cells: usize, k: usize) -> Self {
        Self {
            k,
            data: vec![0.0; cells * k],
        }
    }

    pub fn from_vec(k: usize, data: Vec<f64>) -> Result<Self> {
        if k == 0 || !data.len().is_multiple_of(k) {
            return Err(Error::ShapeMismatch(format!("{} entries with k = {k}", data.len())));
        }
        Ok(Self { k, data })
    }

    /// The same ambient vector at every cell.
    pub fn uniform(cells: usize, vector: &[f64]) -> Self {
        Self {
            k: vector.len(),
            data: vector.repeat(cells),
        }
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn cell_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.k..(c + 1) * self.k]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            k: self.k,
            data: self.data.iter().map(|x| s * x).collect(),
        }
    }

    /// self + s·other
    pub fn add_scaled(&self, other: &VariationField, s: f64) -> Result<Self> {
        if other.k != self.k || other.data.len() != self.data.len() {
            return Err(Error::ShapeMismatch("fields differ in shape".into()));
        }
        Ok(Self {
            k: self.k,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect(),
        })
    }

    /// Largest |⟨V[cell], u[cell]⟩| over cells.
    pub fn max_normal_component(&self, u: &SphereMap) -> f64 {
        self.data
            .chunks_exact(self.k)
            .zip(u.as_slice().chunks_exact(self.k))
            .map(|(v, x)| dot(v, x).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_tangent_to(&self, u: &SphereMap, tol: f64) -> bool {
        self.k == u.ambient_dim() && self.data.len() == u.as_slice().len() && self.max_normal_component(u) <= tol
    }

    pub fn write_csv<W: Write>(&self, grid: &TorusGrid, out: W) -> Result<()> {
        write_cells_csv(grid, self.k, &self.data, "v", out)
    }
}

fn write_cells_csv<W: Write>(grid: &TorusGrid, k: usize, data: &[f64], prefix: &str, out: W) -> Result<()> {
    if data.len() != grid.cell_count() * k {
        return Err(Error::ShapeMismatch("field does not match the grid".into()));
    }
    let mut writer = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..grid.dim()).map(|a| format!("i{a}")).collect();
    header.extend((0..k).map(|a| format!("{prefix}{a}")));
    writer.write_record(&header)?;
    for (cell, chunk) in data.chunks_exact(k).enumerate() {
        let idx = grid.multi_index(cell);
        let mut row: Vec<String> = idx[..grid.dim()].iter().map(|i| i.to_string()).collect();
        row.extend(chunk.iter().map(|x| x.to_string()));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}
