//! Second-variation stability analysis.
//!
//! A map is stable when I(V,V) = d²/dt² E(π(u + tV))|₀ ≥ 0 for every
//! variation field V. This module evaluates I by finite differences of the
//! discrete energy, probes it along random and deterministic tangential
//! fields, and evaluates the closed-form index
//!
//! ```text
//! ∫_M Q { Q ρ′(Q) + (2 − m) ρ(Q) } dM
//! ```
//!
//! whose integrand is negative at every moving cell for the shallow and
//! polytropic laws when m ≥ 2. The index does not depend on V; it is
//! reported next to the probe values, never compared to them pointwise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::InitSpec;
use crate::density::DensityModel;
use crate::domain::{inner, integrate, AmbientField, TorusGrid};
use crate::error::{Error, Result};
use crate::solver::{energy_gradient, l2_norm, minimize, CriticalPointReport, EnergyKernel, SolveOptions};
use crate::sphere::{SphereMap, VariationField};

pub const DEFAULT_T_STEP: f64 = 1e-4;
/// The finite-difference step is halved on cavitation down to this size.
pub const MIN_T_STEP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "Stable-up-to-probes")]
    StableUpToProbes,
    #[serde(rename = "Unstable")]
    Unstable,
    #[serde(rename = "Trivial-map")]
    TrivialMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeOptions {
    /// Number of random probes; the m+1 basis probes come on top.
    pub probes: usize,
    pub seed: u64,
    pub t_step: f64,
    /// A probe below −tolerance marks the map unstable.
    pub tolerance: f64,
    /// Maps with max Q at or below this are reported as trivial.
    pub trivial_q: f64,
    /// Gradient tolerance of the solver that produced the map; the map
    /// counts as near-critical when its gradient norm is within 100× of it.
    pub solver_tolerance: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            probes: 16,
            seed: 0,
            t_step: DEFAULT_T_STEP,
            tolerance: 1e-8,
            trivial_q: 1e-6,
            solver_tolerance: 1e-8,
        }
    }
}

impl ProbeOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("t_step", self.t_step),
            ("tolerance", self.tolerance),
            ("solver_tolerance", self.solver_tolerance),
        ] {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::invalid(name, format!("must be > 0, got {x}")));
            }
        }
        if !(self.trivial_q.is_finite() && self.trivial_q >= 0.0) {
            return Err(Error::invalid("trivial_q", "must be >= 0"));
        }
        Ok(())
    }
}

/// How a probe direction was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// Tangential part of the ambient basis vector e_a.
    Basis(usize),
    /// Smoothed random tangential field with the given stream index.
    Random(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeValue {
    pub kind: ProbeKind,
    /// I(V,V)/⟨V,V⟩.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub probes: usize,
    pub min_normalized: f64,
    pub max_normalized: f64,
    pub instability_index: f64,
    pub verdict: Verdict,
    pub seed: u64,
    pub max_q: f64,
    pub gradient_norm: f64,
    /// False when the gradient norm exceeds 100× the solver tolerance; the
    /// verdict then says nothing about critical points.
    pub near_critical: bool,
    pub values: Vec<ProbeValue>,
}

/// Central second difference of t ↦ E(π(u + tV)); `None` on cavitation.
fn second_difference(kernel: &mut EnergyKernel, u: &SphereMap, v: &VariationField, e0: f64, t: f64) -> Result<Option<f64>> {
    let mut total = 0.0;
    for sign in [1.0, -1.0] {
        match u.perturbed(v, sign * t).and_then(|m| kernel.energy(m.as_slice())) {
            Ok(e) => total += e,
            Err(Error::Domain { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    Ok(Some((total - 2.0 * e0) / (t * t)))
}

/// Mixed four-point difference over ±t(V+W), ±t(V−W), divided by 4t².
fn mixed_difference(
    kernel: &mut EnergyKernel,
    u: &SphereMap,
    sum: &VariationField,
    diff: &VariationField,
    t: f64,
) -> Result<Option<f64>> {
    let mut pair = |dir: &VariationField| -> Result<Option<f64>> {
        let mut total = 0.0;
        for sign in [1.0, -1.0] {
            match u.perturbed(dir, sign * t).and_then(|m| kernel.energy(m.as_slice())) {
                Ok(e) => total += e,
                Err(Error::Domain { .. }) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
        Ok(Some(total))
    };
    let (Some(a), Some(b)) = (pair(sum)?, pair(diff)?) else {
        return Ok(None);
    };
    Ok(Some((a - b) / (4.0 * t * t)))
}

/// Runs `eval` at t and t/2 and Richardson-extrapolates, halving t while
/// either evaluation hits cavitation.
fn richardson<F>(mut t: f64, mut eval: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<Option<f64>>,
{
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::invalid("t_step", format!("must be > 0, got {t}")));
    }
    while t >= MIN_T_STEP {
        if let (Some(coarse), Some(fine)) = (eval(t)?, eval(0.5 * t)?) {
            return Ok((4.0 * fine - coarse) / 3.0);
        }
        t *= 0.5;
    }
    Err(Error::StepUnderflow(MIN_T_STEP))
}

fn check_variation(u: &SphereMap, v: &VariationField) -> Result<()> {
    if v.ambient_dim() != u.ambient_dim() || v.as_slice().len() != u.as_slice().len() {
        return Err(Error::ShapeMismatch("variation does not match the map".into()));
    }
    Ok(())
}

/// I(V,V) by the central second difference of E(π(u + tV)) at steps t and
/// t/2, Richardson-extrapolated once.
pub fn second_variation_fd(
    grid: &TorusGrid,
    model: &DensityModel,
    u: &SphereMap,
    v: &VariationField,
    t_step: f64,
) -> Result<f64> {
    check_variation(u, v)?;
    let mut kernel = EnergyKernel::new(grid, model, u.ambient_dim());
    let e0 = kernel.energy(u.as_slice())?;
    richardson(t_step, |t| second_difference(&mut kernel, u, v, e0, t))
}

/// I(V,W) by the mixed central difference of E(π(u + sW + tV)) at s = t,
/// Richardson-extrapolated once. Symmetric in (V, W) bit for bit.
pub fn second_variation_mixed(
    grid: &TorusGrid,
    model: &DensityModel,
    u: &SphereMap,
    v: &VariationField,
    w: &VariationField,
    t_step: f64,
) -> Result<f64> {
    check_variation(u, v)?;
    check_variation(u, w)?;
    let sum = v.add_scaled(w, 1.0)?;
    let diff = v.add_scaled(w, -1.0)?;
    let mut kernel = EnergyKernel::new(grid, model, u.ambient_dim());
    kernel.energy(u.as_slice())?;
    richardson(t_step, |t| mixed_difference(&mut kernel, u, &sum, &diff, t))
}

/// Q (Q ρ′(Q) + (2 − m) ρ(Q)) at a single speed.
pub fn instability_integrand(model: &DensityModel, q: f64, m: usize) -> Result<f64> {
    let rho = model.rho(q)?;
    let rho_prime = model.rho_prime(q)?;
    Ok(q * (q * rho_prime + (2.0 - m as f64) * rho))
}

/// ∫ Q (Q ρ′(Q) + (2 − m) ρ(Q)) dM for the target dimension m of `u`.
pub fn instability_index(grid: &TorusGrid, model: &DensityModel, u: &SphereMap) -> Result<f64> {
    let m = u.target_dim();
    let mut kernel = EnergyKernel::new(grid, model, u.ambient_dim());
    kernel.energy(u.as_slice())?;
    let integrand: Vec<f64> = kernel
        .q()
        .iter()
        .map(|&q| q * (q * model.rho_prime_raw(q) + (2.0 - m as f64) * model.rho_raw(q)))
        .collect();
    integrate(grid, &integrand)
}

fn normalized(grid: &TorusGrid, v: VariationField) -> Option<VariationField> {
    let n = l2_norm(grid, &v);
    (n > 1e-10 * grid.total_volume().sqrt()).then(|| v.scaled(1.0 / n))
}

/// The probe directions used by [`stability_probe`], unit in L²: the m+1
/// basis probes (those that do not vanish) followed by the random ones.
///
/// Random probe i draws standard-normal ambient vectors from stream i of a
/// ChaCha generator seeded with `seed`, takes their tangential part,
/// averages each cell with its 2n neighbours once, and re-projects.
pub fn probe_fields(grid: &TorusGrid, u: &SphereMap, probes: usize, seed: u64) -> Result<Vec<(ProbeKind, VariationField)>> {
    let k = u.ambient_dim();
    let cells = grid.cell_count();
    if u.cell_count() != cells {
        return Err(Error::ShapeMismatch("map does not match the grid".into()));
    }
    let mut out = Vec::with_capacity(k + probes);
    for a in 0..k {
        let mut e = vec![0.0; k];
        e[a] = 1.0;
        let v = u.tangent_part(&VariationField::uniform(cells, &e))?;
        if let Some(v) = normalized(grid, v) {
            out.push((ProbeKind::Basis(a), v));
        }
    }
    for i in 0..probes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let raw: Vec<f64> = (0..cells * k).map(|_| StandardNormal.sample(&mut rng)).collect();
        let tangent = u.tangent_part(&VariationField::from_vec(k, raw)?)?;
        let smoothed = smooth_once(grid, &tangent);
        let v = u.tangent_part(&smoothed)?;
        if let Some(v) = normalized(grid, v) {
            out.push((ProbeKind::Random(i), v));
        }
    }
    Ok(out)
}

/// One nearest-neighbour averaging pass over the 2n+1 point stencil.
fn smooth_once(grid: &TorusGrid, v: &VariationField) -> VariationField {
    let k = v.ambient_dim();
    let weight = 1.0 / (1 + 2 * grid.dim()) as f64;
    let mut out = VariationField::zeros(grid.cell_count(), k);
    for cell in 0..grid.cell_count() {
        let mut acc = v.cell(cell).to_vec();
        for axis in 0..grid.dim() {
            for nb in [grid.forward(cell, axis), grid.backward(cell, axis)] {
                acc.iter_mut().zip(v.cell(nb)).for_each(|(a, b)| *a += b);
            }
        }
        out.cell_mut(cell).iter_mut().zip(acc).for_each(|(o, a)| *o = weight * a);
    }
    out
}

/// Evaluates the normalised second variation along the basis and random
/// probes and classifies the map. Probes run in parallel; results are
/// independent of scheduling.
pub fn stability_probe(
    grid: &TorusGrid,
    model: &DensityModel,
    u: &SphereMap,
    opts: &ProbeOptions,
) -> Result<StabilityReport> {
    model.validate()?;
    opts.validate()?;
    let gradient = energy_gradient(grid, model, u)?;
    let gradient_norm = l2_norm(grid, &gradient);
    let max_q = crate::solver::max_q(grid, u)?;
    let index = instability_index(grid, model, u)?;

    let fields = probe_fields(grid, u, opts.probes, opts.seed)?;
    let values = fields
        .par_iter()
        .map(|(kind, v)| {
            let raw = second_variation_fd(grid, model, u, v, opts.t_step)?;
            let norm_sq = inner(grid, v, v)?;
            Ok(ProbeValue {
                kind: *kind,
                value: raw / norm_sq,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let min = values.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
    let max = values.iter().map(|p| p.value).fold(f64::NEG_INFINITY, f64::max);
    let verdict = if min < -opts.tolerance {
        Verdict::Unstable
    } else if max_q <= opts.trivial_q {
        Verdict::TrivialMap
    } else {
        Verdict::StableUpToProbes
    };
    Ok(StabilityReport {
        probes: values.len(),
        min_normalized: min,
        max_normalized: max,
        instability_index: index,
        verdict,
        seed: opts.seed,
        max_q,
        gradient_norm,
        near_critical: gradient_norm <= 100.0 * opts.solver_tolerance,
        values,
    })
}

/// Outcome of a theorem check or of one of its runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckVerdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Fully resolved inputs of a theorem experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremSetup {
    pub grid: TorusGrid,
    pub model: DensityModel,
    pub target_m: usize,
    pub init: InitSpec,
    /// One descent run per seed; each seed replaces the init seed.
    pub seeds: Vec<u64>,
    pub options: SolveOptions,
    pub probe: ProbeOptions,
    /// Limits with max Q above this count as non-constant.
    pub constant_q_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub descent: CriticalPointReport,
    pub constant_limit: bool,
    pub stability: Option<StabilityReport>,
    pub verdict: CheckVerdict,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremOutcome {
    pub model: DensityModel,
    pub target_m: usize,
    pub verdict: CheckVerdict,
    pub runs: Vec<RunRecord>,
}

/// Descends from each seeded initial map and checks the limit: a
/// non-constant limit must be found unstable by the probes, a constant
/// limit must have no probe below −tolerance. Runs that do not converge
/// are inconclusive.
pub fn theorem_experiment(setup: &TheoremSetup) -> Result<TheoremOutcome> {
    if setup.target_m < 2 {
        return Err(Error::invalid("target_m", "theorem experiments need m >= 2"));
    }
    setup.model.validate()?;
    let probe_opts = ProbeOptions {
        solver_tolerance: setup.options.gradient_tolerance,
        ..setup.probe.clone()
    };
    let mut runs = Vec::with_capacity(setup.seeds.len());
    for &seed in &setup.seeds {
        let u0 = setup.init.with_seed(seed).build(&setup.grid, setup.target_m + 1)?;
        let (limit, descent) = minimize(&setup.grid, &setup.model, &u0, &setup.options)?;
        let constant_limit = descent.max_q <= setup.constant_q_threshold;
        if !descent.converged {
            runs.push(RunRecord {
                seed,
                descent,
                constant_limit,
                stability: None,
                verdict: CheckVerdict::Inconclusive,
                note: "descent did not reach the gradient tolerance".into(),
            });
            continue;
        }
        let report = stability_probe(&setup.grid, &setup.model, &limit, &probe_opts)?;
        let (verdict, note) = if constant_limit {
            if report.min_normalized >= -probe_opts.tolerance {
                (CheckVerdict::Pass, "constant limit, no destabilising probe")
            } else {
                (CheckVerdict::Fail, "constant limit with a negative probe")
            }
        } else if report.verdict == Verdict::Unstable {
            (CheckVerdict::Pass, "non-constant critical point, unstable")
        } else {
            (CheckVerdict::Fail, "non-constant critical point with no destabilising probe")
        };
        runs.push(RunRecord {
            seed,
            descent,
            constant_limit,
            stability: Some(report),
            verdict,
            note: note.into(),
        });
    }
    let verdict = if runs.iter().any(|r| r.verdict == CheckVerdict::Fail) {
        CheckVerdict::Fail
    } else if runs.iter().any(|r| r.verdict == CheckVerdict::Inconclusive) {
        CheckVerdict::Inconclusive
    } else {
        CheckVerdict::Pass
    };
    Ok(TheoremOutcome {
        model: setup.model.clone(),
        target_m: setup.target_m,
        verdict,
        runs,
    })
}

/// Cell-wise sign check of the index integrand over `samples` speeds in
/// (0, q_top): returns the largest integrand value found.
pub fn max_integrand_on(model: &DensityModel, m: usize, q_top: f64, samples: usize) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for i in 1..=samples {
        let q = q_top * i as f64 / (samples + 1) as f64;
        worst = worst.max(instability_integrand(model, q, m)?);
    }
    Ok(worst)
}

/// Renormalises a field to unit L² norm in place; used by callers that
/// build their own probes.
pub fn normalize(grid: &TorusGrid, v: &VariationField) -> Result<VariationField> {
    normalized(grid, v.clone()).ok_or_else(|| Error::invalid("variation", "field is numerically zero"))
}
