//! Discrete energy, Euler–Lagrange residual and projected gradient descent
//! for sphere-valued maps on a torus.
//!
//! With the forward difference d and its negative adjoint δ, the discrete
//! energy is E(u) = vol · Σ_cells e(Q_cell) and its first variation along
//! a tangential field V is
//!
//! ```text
//! d/dt E(π(u + tV))|₀ = ⟨2 P_u δ(ρ(Q) du), V⟩,   ⟨a, b⟩ = vol · Σ a·b
//! ```
//!
//! where P_u is the cell-wise tangent projection. [`energy_gradient`]
//! returns exactly this Riesz representative in the volume-weighted inner
//! product, and all norms reported here are volume-weighted L² norms.

use serde::{Deserialize, Serialize};

use crate::density::{DensityModel, FlowRegime, DEFAULT_SONIC_TOLERANCE};
use crate::domain::{codifferential_raw, differential_raw, integrate, q_field_raw, AmbientField, TorusGrid};
use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use crate::sphere::{project_in_place, SphereMap, VariationField};

/// Steps below this length end the descent as non-converged.
pub const MIN_STEP: f64 = 1e-16;

/// Controls for [`minimize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the L² norm of the tangential gradient.
    pub gradient_tolerance: f64,
    /// First (and largest) trial step.
    pub initial_step: f64,
    pub backtrack_factor: f64,
    pub armijo_constant: f64,
    /// Reject steps that produce any cell with Q ≥ q_max. `None` uses the
    /// model's cavitation bound.
    pub q_max: Option<f64>,
    /// Disables the speed guard entirely when false.
    pub speed_guard: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50_000,
            gradient_tolerance: 1e-8,
            initial_step: 0.1,
            backtrack_factor: 0.5,
            armijo_constant: 1e-4,
            q_max: None,
            speed_guard: true,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be > 0, got {x}")))
            }
        };
        positive("gradient_tolerance", self.gradient_tolerance)?;
        positive("initial_step", self.initial_step)?;
        positive("armijo_constant", self.armijo_constant)?;
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::invalid(
                "backtrack_factor",
                format!("must lie in (0, 1), got {}", self.backtrack_factor),
            ));
        }
        if self.armijo_constant >= 1.0 {
            return Err(Error::invalid("armijo_constant", "must be < 1"));
        }
        if let Some(q) = self.q_max {
            positive("q_max", q)?;
        }
        Ok(())
    }

    /// The speed bound enforced for `model`, if any.
    pub fn effective_q_max(&self, model: &DensityModel) -> Option<f64> {
        if !self.speed_guard {
            return None;
        }
        self.q_max.or_else(|| model.admissible_limit())
    }
}

/// Cell counts per flow regime.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeHistogram {
    pub tranquil: usize,
    pub sonic: usize,
    pub shooting: usize,
}

impl RegimeHistogram {
    pub fn total(&self) -> usize {
        self.tranquil + self.sonic + self.shooting
    }

    fn record(&mut self, regime: FlowRegime) {
        match regime {
            FlowRegime::Tranquil => self.tranquil += 1,
            FlowRegime::Sonic => self.sonic += 1,
            FlowRegime::Shooting => self.shooting += 1,
        }
    }
}

/// Per-cell flow type of a map.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeMap {
    pub regimes: Vec<FlowRegime>,
    pub histogram: RegimeHistogram,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    StepUnderflow,
}

/// Diagnostics of a descent run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointReport {
    pub energy: f64,
    pub gradient_norm: f64,
    /// L² norm of δ(ρ du) + ρ A(du, du).
    pub residual_norm: f64,
    pub tangential_residual_norm: f64,
    pub iterations: usize,
    pub max_q: f64,
    pub min_rho: f64,
    pub regimes: RegimeHistogram,
    pub converged: bool,
    pub termination: Termination,
}

/// One accepted descent step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub energy: f64,
    pub gradient_norm: f64,
    pub step: f64,
}

/// Reusable buffers for energy and gradient evaluation.
pub(crate) struct EnergyKernel<'a> {
    grid: &'a TorusGrid,
    model: &'a DensityModel,
    k: usize,
    limit: f64,
    du: Vec<f64>,
    q: Vec<f64>,
    div: Vec<f64>,
}

impl<'a> EnergyKernel<'a> {
    pub(crate) fn new(grid: &'a TorusGrid, model: &'a DensityModel, k: usize) -> Self {
        let cells = grid.cell_count();
        Self {
            grid,
            model,
            k,
            limit: model.admissible_limit().unwrap_or(f64::INFINITY),
            du: vec![0.0; grid.dim() * cells * k],
            q: vec![0.0; cells],
            div: vec![0.0; cells * k],
        }
    }

    fn check_shape(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.grid.cell_count() * self.k {
            return Err(Error::ShapeMismatch(format!(
                "map with {} entries on a grid of {} cells (k = {})",
                u.len(),
                self.grid.cell_count(),
                self.k
            )));
        }
        Ok(())
    }

    /// Fills du and Q; errors if a cell leaves the model's domain.
    fn load(&mut self, u: &[f64]) -> Result<()> {
        self.check_shape(u)?;
        differential_raw(self.grid, self.k, u, &mut self.du);
        q_field_raw(self.grid, self.k, &self.du, &mut self.q);
        if let Some(&q) = self.q.iter().find(|&&q| !(q < self.limit)) {
            return Err(Error::Domain { q, limit: self.limit });
        }
        Ok(())
    }

    pub(crate) fn max_q(&self) -> f64 {
        self.q.iter().copied().fold(0.0, f64::max)
    }

    pub(crate) fn q(&self) -> &[f64] {
        &self.q
    }

    pub(crate) fn energy(&mut self, u: &[f64]) -> Result<f64> {
        self.load(u)?;
        let model = self.model;
        let sum = compensated_sum(self.q.iter().map(|&q| model.e_raw(q)));
        Ok(self.grid.volume_element() * sum)
    }

    /// δ(ρ(Q) du) into `self.div`; requires a preceding `load`.
    fn weighted_codifferential(&mut self) {
        let cells = self.grid.cell_count();
        let k = self.k;
        for axis in 0..self.grid.dim() {
            for cell in 0..cells {
                let rho = self.model.rho_raw(self.q[cell]);
                let start = (axis * cells + cell) * k;
                self.du[start..start + k].iter_mut().for_each(|x| *x *= rho);
            }
        }
        codifferential_raw(self.grid, k, &self.du, &mut self.div);
    }

    /// Tangential gradient 2 P_u δ(ρ du) into `out`; returns E(u).
    pub(crate) fn energy_and_gradient(&mut self, u: &[f64], out: &mut [f64]) -> Result<f64> {
        let e = self.energy(u)?;
        self.weighted_codifferential();
        let k = self.k;
        for ((g, d), x) in out.chunks_exact_mut(k).zip(self.div.chunks_exact(k)).zip(u.chunks_exact(k)) {
            let s: f64 = d.iter().zip(x).map(|(a, b)| a * b).sum();
            for i in 0..k {
                g[i] = 2.0 * (d[i] - s * x[i]);
            }
        }
        Ok(e)
    }

    /// δ(ρ du) − ρ Q u per cell.
    pub(crate) fn residual(&mut self, u: &[f64], out: &mut [f64]) -> Result<()> {
        self.load(u)?;
        self.weighted_codifferential();
        let k = self.k;
        for (cell, r) in out.chunks_exact_mut(k).enumerate() {
            let q = self.q[cell];
            let rho = self.model.rho_raw(q);
            for i in 0..k {
                r[i] = self.div[cell * k + i] - rho * q * u[cell * k + i];
            }
        }
        Ok(())
    }
}

/// Volume-weighted L² norm of a per-cell ambient field.
pub fn l2_norm<F: AmbientField + ?Sized>(grid: &TorusGrid, f: &F) -> f64 {
    (grid.volume_element() * compensated_sum(f.as_slice().iter().map(|x| x * x))).sqrt()
}

/// E_ρ(u) = ∫ e(Q(du)) dM.
pub fn energy(grid: &TorusGrid, model: &DensityModel, u: &SphereMap) -> Result<f64> {
    EnergyKernel::new(grid, model, u.ambient_dim()).energy(u.as_slice())
}

/// Discrete Euler–Lagrange residual R = δ(ρ(Q) du) + ρ(Q) A(du, du) with
/// A(du, du) = −Q u. Its tangential part is half the energy gradient; its
/// normal part vanishes in the continuum limit at critical points.
pub fn euler_lagrange_residual(grid: &TorusGrid, model: &DensityModel, u: &SphereMap) -> Result<VariationField> {
    let k = u.ambient_dim();
    let mut out = vec![0.0; u.as_slice().len()];
    EnergyKernel::new(grid, model, k).residual(u.as_slice(), &mut out)?;
    VariationField::from_vec(k, out)
}

/// Tangential gradient 2 P_u δ(ρ(Q) du): for every tangential V,
/// d/dt E(project(u + tV))|₀ = ⟨grad, V⟩ with ⟨a, b⟩ = vol · Σ a·b.
pub fn energy_gradient(grid: &TorusGrid, model: &DensityModel, u: &SphereMap) -> Result<VariationField> {
    let k = u.ambient_dim();
    let mut out = vec![0.0; u.as_slice().len()];
    EnergyKernel::new(grid, model, k).energy_and_gradient(u.as_slice(), &mut out)?;
    VariationField::from_vec(k, out)
}

/// Flow type of every cell of `u`.
pub fn regime_map(grid: &TorusGrid, model: &DensityModel, u: &SphereMap, tol: f64) -> Result<RegimeMap> {
    let mut kernel = EnergyKernel::new(grid, model, u.ambient_dim());
    kernel.load(u.as_slice())?;
    let mut histogram = RegimeHistogram::default();
    let regimes = kernel
        .q()
        .iter()
        .map(|&q| {
            let r = model.classify(q, tol)?;
            histogram.record(r);
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegimeMap { regimes, histogram })
}

/// Projected gradient descent u ← project(u − s·grad) with Armijo
/// backtracking; see [`minimize_with_monitor`].
pub fn minimize(
    grid: &TorusGrid,
    model: &DensityModel,
    u0: &SphereMap,
    opts: &SolveOptions,
) -> Result<(SphereMap, CriticalPointReport)> {
    minimize_with_monitor(grid, model, u0, opts, |_| {})
}

/// Projected gradient descent with a callback after every accepted step.
///
/// Each iteration tries the previous accepted step divided by the
/// backtracking factor (capped at `initial_step`) and shrinks it until
/// E(project(u − s·g)) ≤ E(u) − c·s·‖g‖² holds and, when the speed guard is
/// active, every cell keeps Q < q_max. Trial maps that leave the model's
/// domain are treated as rejections.
pub fn minimize_with_monitor<F: FnMut(&IterationRecord)>(
    grid: &TorusGrid,
    model: &DensityModel,
    u0: &SphereMap,
    opts: &SolveOptions,
    mut monitor: F,
) -> Result<(SphereMap, CriticalPointReport)> {
    model.validate()?;
    opts.validate()?;
    let k = u0.ambient_dim();
    let q_max = opts.effective_q_max(model);
    let mut kernel = EnergyKernel::new(grid, model, k);

    let mut u = u0.as_slice().to_vec();
    let mut grad = vec![0.0; u.len()];
    let mut trial = vec![0.0; u.len()];
    let mut e = kernel.energy_and_gradient(&u, &mut grad)?;
    if let Some(limit) = q_max {
        let peak = kernel.max_q();
        if peak >= limit {
            return Err(Error::invalid(
                "init",
                format!("initial map has max Q = {peak}, at or above the speed guard {limit}"),
            ));
        }
    }
    let norm_sq = |g: &[f64]| grid.volume_element() * compensated_sum(g.iter().map(|x| x * x));
    let mut gnorm_sq = norm_sq(&grad);

    let mut step = opts.initial_step;
    let mut iterations = 0;
    let termination = loop {
        if gnorm_sq.sqrt() <= opts.gradient_tolerance {
            break Termination::Converged;
        }
        if iterations >= opts.max_iterations {
            break Termination::MaxIterations;
        }
        let mut s = (step / opts.backtrack_factor).min(opts.initial_step);
        let accepted = loop {
            if s < MIN_STEP {
                break None;
            }
            for ((t, x), g) in trial.iter_mut().zip(&u).zip(&grad) {
                *t = x - s * g;
            }
            let projected = trial.chunks_exact_mut(k).try_for_each(project_in_place);
            if projected.is_ok() {
                if let Ok(e_trial) = kernel.energy(&trial) {
                    let guarded = q_max.is_none_or(|limit| kernel.max_q() < limit);
                    if guarded && e_trial <= e - opts.armijo_constant * s * gnorm_sq {
                        break Some(e_trial);
                    }
                }
            }
            s *= opts.backtrack_factor;
        };
        let Some(e_new) = accepted else {
            break Termination::StepUnderflow;
        };
        debug_assert!(e_new <= e);
        std::mem::swap(&mut u, &mut trial);
        step = s;
        iterations += 1;
        e = kernel.energy_and_gradient(&u, &mut grad)?;
        gnorm_sq = norm_sq(&grad);
        monitor(&IterationRecord {
            iteration: iterations,
            energy: e,
            gradient_norm: gnorm_sq.sqrt(),
            step: s,
        });
    };

    let u = SphereMap::from_raw_unchecked(k, u);
    let report = report_for(grid, model, &u, iterations, termination)?;
    Ok((u, report))
}

/// Fills a [`CriticalPointReport`] for the map `u`.
pub fn report_for(
    grid: &TorusGrid,
    model: &DensityModel,
    u: &SphereMap,
    iterations: usize,
    termination: Termination,
) -> Result<CriticalPointReport> {
    let k = u.ambient_dim();
    let mut kernel = EnergyKernel::new(grid, model, k);
    let mut grad = vec![0.0; u.as_slice().len()];
    let energy = kernel.energy_and_gradient(u.as_slice(), &mut grad)?;
    let gradient = VariationField::from_vec(k, grad)?;
    let gradient_norm = l2_norm(grid, &gradient);
    let max_q = kernel.max_q();
    let min_rho = kernel.q().iter().map(|&q| model.rho_raw(q)).fold(f64::INFINITY, f64::min);

    let residual = euler_lagrange_residual(grid, model, u)?;
    let tangential = u.tangent_part(&residual)?;
    let regimes = regime_map(grid, model, u, DEFAULT_SONIC_TOLERANCE)?.histogram;
    let converged = termination == Termination::Converged;
    Ok(CriticalPointReport {
        energy,
        gradient_norm,
        residual_norm: l2_norm(grid, &residual),
        tangential_residual_norm: l2_norm(grid, &tangential),
        iterations,
        max_q,
        min_rho,
        regimes,
        converged,
        termination,
    })
}

/// max over cells of Q(du).
pub fn max_q(grid: &TorusGrid, u: &SphereMap) -> Result<f64> {
    let du = crate::domain::differential(grid, u)?;
    Ok(crate::domain::q_field(grid, &du)?.into_iter().fold(0.0, f64::max))
}

/// ∫ Q(du) dM, the Dirichlet-type energy of `u`.
pub fn dirichlet_energy(grid: &TorusGrid, u: &SphereMap) -> Result<f64> {
    let du = crate::domain::differential(grid, u)?;
    integrate(grid, &crate::domain::q_field(grid, &du)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::inner;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn torus(n: usize) -> TorusGrid {
        TorusGrid::torus([n, n], [2.0 * PI, 2.0 * PI]).unwrap()
    }

    fn random_tangent(rng: &mut ChaCha8Rng, u: &SphereMap) -> VariationField {
        let raw = (0..u.as_slice().len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        u.tangent_part(&VariationField::from_vec(u.ambient_dim(), raw).unwrap()).unwrap()
    }

    #[test]
    fn constant_map_has_zero_energy_gradient_and_residual() {
        let g = torus(8);
        let u = SphereMap::constant(&g, &[0.0, 0.0, 1.0]).unwrap();
        for model in [DensityModel::Incompressible, DensityModel::shallow(2.0), DensityModel::polytropic(1.4)] {
            assert_eq!(energy(&g, &model, &u).unwrap(), 0.0);
            assert!(energy_gradient(&g, &model, &u).unwrap().as_slice().iter().all(|&x| x == 0.0));
            assert!(euler_lagrange_residual(&g, &model, &u).unwrap().as_slice().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn wrap_energy_approaches_continuum_value() {
        let g = torus(256);
        let u = SphereMap::wrap(&g, 3).unwrap();
        let area = 4.0 * PI * PI;
        let h = g.spacing(0);
        let e = energy(&g, &DensityModel::Incompressible, &u).unwrap();
        assert!((e - area).abs() < area * h * h, "{e}");
        let e = energy(&g, &DensityModel::shallow(2.0), &u).unwrap();
        assert!((e - 0.75 * area).abs() < area * h * h, "{e}");
        assert!((e - 29.6088).abs() < 1e-2);
    }

    #[test]
    fn wrap_energy_error_is_second_order() {
        let err = |n: usize| {
            let g = torus(n);
            (energy(&g, &DensityModel::Incompressible, &SphereMap::wrap(&g, 3).unwrap()).unwrap() - 4.0 * PI * PI)
                .abs()
        };
        let ratio = err(64) / err(128);
        assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn wrap_is_discretely_critical() {
        for model in [DensityModel::Incompressible, DensityModel::shallow(2.0)] {
            for n in [16, 64] {
                let g = torus(n);
                let u = SphereMap::wrap(&g, 3).unwrap();
                let r = euler_lagrange_residual(&g, &model, &u).unwrap();
                let tangential = l2_norm(&g, &u.tangent_part(&r).unwrap());
                assert!(tangential < 1e-10, "{model:?} n={n}: {tangential}");
                // the discrete wrap satisfies δ(ρ du) = ρ Q u exactly
                assert!(l2_norm(&g, &r) < 1e-10);
            }
        }
    }

    #[test]
    fn gradient_matches_directional_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = torus(16);
        for model in [DensityModel::Incompressible, DensityModel::shallow(2.0), DensityModel::polytropic(1.4)] {
            for trial in 0..10 {
                let u = SphereMap::random_perturbation(&g, 3, trial, 0.6).unwrap();
                let v = random_tangent(&mut rng, &u);
                let grad = energy_gradient(&g, &model, &u).unwrap();
                let analytic = inner(&g, &grad, &v).unwrap();
                let t = 1e-5;
                let fd = (energy(&g, &model, &u.perturbed(&v, t).unwrap()).unwrap()
                    - energy(&g, &model, &u.perturbed(&v, -t).unwrap()).unwrap())
                    / (2.0 * t);
                assert!((analytic - fd).abs() / (1.0 + analytic.abs()) < 1e-6, "{model:?}: {analytic} vs {fd}");
                assert!(grad.is_tangent_to(&u, 1e-10));
            }
        }
    }

    #[test]
    fn tangential_residual_is_half_the_gradient() {
        let g = torus(12);
        let model = DensityModel::polytropic(1.4);
        let u = SphereMap::random_perturbation(&g, 3, 9, 0.5).unwrap();
        let grad = energy_gradient(&g, &model, &u).unwrap();
        let tr = u.tangent_part(&euler_lagrange_residual(&g, &model, &u).unwrap()).unwrap();
        for (a, b) in grad.as_slice().iter().zip(tr.as_slice()) {
            assert!((a - 2.0 * b).abs() < 1e-10);
        }
    }

    #[test]
    fn incompressible_energy_is_dirichlet_energy() {
        let g = torus(10);
        let u = SphereMap::random_perturbation(&g, 4, 1, 0.8).unwrap();
        let e = energy(&g, &DensityModel::Incompressible, &u).unwrap();
        assert!((e - dirichlet_energy(&g, &u).unwrap()).abs() < 1e-12 * e);
    }

    #[test]
    fn energy_rejects_cavitating_maps() {
        let g = TorusGrid::circle(8, 2.0 * PI).unwrap();
        // Q ≈ 0.95 everywhere, above the cavitation speed 2/(γ−1) = 0.5 for γ = 5
        let u = SphereMap::wrap(&g, 2).unwrap();
        assert!(matches!(energy(&g, &DensityModel::polytropic(5.0), &u), Err(Error::Domain { .. })));
    }

    #[test]
    fn minimize_returns_immediately_at_constant_map() {
        let g = torus(8);
        let u = SphereMap::constant(&g, &[1.0, 0.0, 0.0]).unwrap();
        let (out, report) = minimize(&g, &DensityModel::shallow(2.0), &u, &SolveOptions::default()).unwrap();
        assert_eq!(report.iterations, 0);
        assert!(report.converged);
        assert_eq!(out, u);
        assert_eq!(report.regimes.tranquil, 64);
    }

    #[test]
    fn minimize_stays_at_the_wrap() {
        let g = torus(32);
        let u = SphereMap::wrap(&g, 3).unwrap();
        let (out, report) = minimize(&g, &DensityModel::Incompressible, &u, &SolveOptions::default()).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 0);
        assert_eq!(out, u);
    }

    #[test]
    fn minimize_descends_monotonically_to_a_constant() {
        let g = torus(12);
        let model = DensityModel::shallow(2.0);
        let u = SphereMap::random_perturbation(&g, 3, 3, 0.5).unwrap();
        let mut last = energy(&g, &model, &u).unwrap();
        let (_, report) = minimize_with_monitor(&g, &model, &u, &SolveOptions::default(), |rec| {
            assert!(rec.energy <= last, "energy rose at {}", rec.iteration);
            last = rec.energy;
        })
        .unwrap();
        assert!(report.converged, "{report:?}");
        assert!(report.max_q < 1e-8, "{report:?}");
        assert!(report.tangential_residual_norm <= 10.0 * 1e-8);
    }

    #[test]
    fn minimize_reports_non_convergence() {
        let g = torus(12);
        let u = SphereMap::random_perturbation(&g, 3, 4, 0.5).unwrap();
        let opts = SolveOptions {
            max_iterations: 3,
            ..SolveOptions::default()
        };
        let (_, report) = minimize(&g, &DensityModel::shallow(2.0), &u, &opts).unwrap();
        assert!(!report.converged);
        assert_eq!(report.termination, Termination::MaxIterations);
        assert_eq!(report.iterations, 3);
    }

    #[test]
    fn speed_guard_rejects_inadmissible_start() {
        let g = torus(16);
        let u = SphereMap::wrap(&g, 3).unwrap();
        let opts = SolveOptions {
            q_max: Some(0.5),
            ..SolveOptions::default()
        };
        assert!(minimize(&g, &DensityModel::Incompressible, &u, &opts).is_err());
    }

    #[test]
    fn options_validation() {
        let bad = SolveOptions {
            backtrack_factor: 1.0,
            ..SolveOptions::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolveOptions {
            gradient_tolerance: 0.0,
            ..SolveOptions::default()
        };
        assert!(bad.validate().is_err());
        let o = SolveOptions::default();
        assert_eq!(o.effective_q_max(&DensityModel::shallow(2.0)), Some(2.0));
        assert_eq!(o.effective_q_max(&DensityModel::Incompressible), None);
        let off = SolveOptions {
            speed_guard: false,
            ..o
        };
        assert_eq!(off.effective_q_max(&DensityModel::shallow(2.0)), None);
    }

    #[test]
    fn regime_map_examples() {
        let g = torus(16);
        let model = DensityModel::shallow(2.0);
        let c = SphereMap::constant(&g, &[0.0, 1.0, 0.0]).unwrap();
        let rm = regime_map(&g, &model, &c, DEFAULT_SONIC_TOLERANCE).unwrap();
        assert_eq!(rm.histogram.tranquil, 256);

        let w = SphereMap::wrap(&g, 3).unwrap();
        let rm = regime_map(&g, &model, &w, DEFAULT_SONIC_TOLERANCE).unwrap();
        assert_eq!(rm.histogram.shooting, 256);
        assert!(rm.regimes.iter().all(|&r| r == FlowRegime::Shooting));

        // one winding with a slow half (Q ≈ 0.24) and a fast half (Q ≈ 1.1)
        let line = TorusGrid::circle(40, 2.0 * PI * 1.3).unwrap();
        let mut data = Vec::new();
        let mut theta: f64 = 0.0;
        for i in 0..40 {
            data.extend([theta.cos(), theta.sin()]);
            theta += if i < 20 { 0.1 } else { (2.0 * PI - 2.0) / 20.0 };
        }
        let u = SphereMap::from_vec(2, data).unwrap();
        let rm = regime_map(&line, &model, &u, DEFAULT_SONIC_TOLERANCE).unwrap();
        assert_eq!(rm.histogram.total(), 40);
        assert!(rm.histogram.tranquil > 0 && rm.histogram.shooting > 0, "{:?}", rm.histogram);
    }
}
