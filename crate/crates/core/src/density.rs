//! Mass-density laws ρ(Q) as functions of the squared flow speed Q, and the
//! quantities derived from them: variational density e(Q) = ∫₀^Q ρ(s) ds,
//! the mass-flux derivative d/dQ[Q ρ(Q)²], critical and cavitation speeds,
//! Froude numbers and flow-regime classification.
//!
//! The variational density is the energy density of the Hodge-type energy
//! and is increasing wherever ρ > 0, while the physical density of the
//! compressible laws decreases with speed. For the F-harmonic
//! correspondence, e(u) = F(|du|²/2) with F(t) = ∫₀^{2t} ρ(s) ds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{bisect, first_sign_change};

/// Default tolerance on |d/dQ[Qρ²]| for a sonic classification.
pub const DEFAULT_SONIC_TOLERANCE: f64 = 1e-9;

/// Upper end of root searches for laws without a cavitation bound.
pub const SEARCH_CEILING: f64 = 1e6;

const ROOT_TOLERANCE: f64 = 1e-12;
const SCAN_SAMPLES: usize = 20_000;

/// A mass-density law ρ(Q).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityModel {
    /// ρ(Q) = (1 − (γ−1)Q/2)^{1/(γ−1)}, γ > 1.
    Polytropic { gamma: f64 },
    /// Shallow-water law ρ(Q) = (C − Q)/2 from Bernoulli's depth relation.
    Shallow {
        #[serde(rename = "C", alias = "c")]
        c: f64,
    },
    /// The γ → 1 limit, ρ(Q) = exp(−Q/2).
    LimitingExponential,
    /// ρ ≡ 1; the energy is then the Dirichlet-type energy ∫|du|².
    Incompressible,
    /// ρ_base(Q) + μ(1+Q)^{−1/2}. The base may not itself carry surface tension.
    #[serde(rename = "surface_tension")]
    WithSurfaceTension { base: Box<DensityModel>, mu: f64 },
}

/// Type of the flow at a given speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlowRegime {
    /// Elliptic / subsonic.
    Tranquil,
    /// On the type-change boundary, within tolerance.
    Sonic,
    /// Hyperbolic / supersonic.
    Shooting,
}

impl std::fmt::Display for FlowRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FlowRegime::Tranquil => "Tranquil",
            FlowRegime::Sonic => "Sonic",
            FlowRegime::Shooting => "Shooting",
        };
        f.write_str(s)
    }
}

impl DensityModel {
    pub fn polytropic(gamma: f64) -> Self {
        DensityModel::Polytropic { gamma }
    }

    pub fn shallow(c: f64) -> Self {
        DensityModel::Shallow { c }
    }

    pub fn with_surface_tension(base: DensityModel, mu: f64) -> Self {
        DensityModel::WithSurfaceTension {
            base: Box::new(base),
            mu,
        }
    }

    /// Checks the parameter ranges of the law.
    pub fn validate(&self) -> Result<()> {
        match self {
            DensityModel::Polytropic { gamma } => {
                if !(gamma.is_finite() && *gamma > 1.0) {
                    return Err(Error::invalid("gamma", format!("must be finite and > 1, got {gamma}")));
                }
            }
            DensityModel::Shallow { c } => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(Error::invalid("C", format!("must be finite and > 0, got {c}")));
                }
            }
            DensityModel::LimitingExponential | DensityModel::Incompressible => {}
            DensityModel::WithSurfaceTension { base, mu } => {
                if !(mu.is_finite() && *mu >= 0.0) {
                    return Err(Error::invalid("mu", format!("must be finite and >= 0, got {mu}")));
                }
                if matches!(**base, DensityModel::WithSurfaceTension { .. }) {
                    return Err(Error::invalid("base", "surface tension cannot be nested"));
                }
                base.validate()?;
            }
        }
        Ok(())
    }

    /// Speed at which ρ itself vanishes, if it does.
    pub fn cavitation_speed(&self) -> Option<f64> {
        match self {
            DensityModel::Polytropic { gamma } => Some(2.0 / (gamma - 1.0)),
            DensityModel::Shallow { c } => Some(*c),
            DensityModel::LimitingExponential | DensityModel::Incompressible => None,
            DensityModel::WithSurfaceTension { base, mu } => {
                if *mu == 0.0 {
                    return base.cavitation_speed();
                }
                match **base {
                    // the linear law continues past C, where the tension term is overtaken
                    DensityModel::Shallow { c } => {
                        let f = |q: f64| self.rho_raw(q);
                        Some(bisect(f, c, SEARCH_CEILING, ROOT_TOLERANCE))
                    }
                    _ => None,
                }
            }
        }
    }

    /// Exclusive upper bound of the Q-range on which the law is defined.
    ///
    /// Equals the cavitation speed except for surface tension over a
    /// polytropic base, where ρ stays positive but the base formula ends.
    pub fn admissible_limit(&self) -> Option<f64> {
        match self {
            DensityModel::WithSurfaceTension { base, mu } if *mu > 0.0 => {
                self.cavitation_speed().or_else(|| base.admissible_limit())
            }
            _ => self.cavitation_speed(),
        }
    }

    fn check(&self, q: f64) -> Result<()> {
        let limit = self.admissible_limit().unwrap_or(f64::INFINITY);
        if !(q.is_finite() && q >= 0.0 && q < limit) {
            return Err(Error::Domain { q, limit });
        }
        Ok(())
    }

    /// Physical density ρ(Q).
    pub fn rho(&self, q: f64) -> Result<f64> {
        self.check(q)?;
        Ok(self.rho_raw(q))
    }

    /// dρ/dQ.
    pub fn rho_prime(&self, q: f64) -> Result<f64> {
        self.check(q)?;
        Ok(self.rho_prime_raw(q))
    }

    /// Variational density e(Q) = ∫₀^Q ρ(s) ds, in closed form.
    pub fn variational_density(&self, q: f64) -> Result<f64> {
        self.check(q)?;
        Ok(self.e_raw(q))
    }

    /// d/dQ [Q ρ(Q)²], the numerator of the subsonic condition.
    pub fn mass_flux_derivative(&self, q: f64) -> Result<f64> {
        self.check(q)?;
        Ok(self.flux_raw(q))
    }

    /// True iff d/dQ[Qρ²]/ρ lies in (0, ∞).
    pub fn subsonic_check(&self, q: f64) -> Result<bool> {
        let ratio = self.mass_flux_derivative(q)? / self.rho_raw(q);
        Ok(ratio > 0.0 && ratio.is_finite())
    }

    /// Smallest positive root of d/dQ[Qρ²], the squared sonic speed.
    pub fn q_crit(&self) -> Option<f64> {
        match self {
            DensityModel::Polytropic { gamma } => Some(2.0 / (gamma + 1.0)),
            DensityModel::Shallow { c } => Some(c / 3.0),
            DensityModel::Incompressible => None,
            _ => self.q_crit_by_bisection(),
        }
    }

    /// Scan-and-bisect search for the first zero of the mass-flux derivative,
    /// on [0, cavitation) or [0, 10⁶] when the law never cavitates.
    pub fn q_crit_by_bisection(&self) -> Option<f64> {
        let upper = match self.admissible_limit() {
            Some(limit) => limit * (1.0 - 1e-12),
            None => SEARCH_CEILING,
        };
        first_sign_change(|q| self.flux_raw(q), 0.0, upper, SCAN_SAMPLES, ROOT_TOLERANCE)
    }

    /// Squared propagation speed c², where the law defines one.
    pub fn sound_speed_squared(&self, q: f64) -> Result<Option<f64>> {
        self.check(q)?;
        Ok(match self {
            DensityModel::Polytropic { gamma } => Some(1.0 - 0.5 * (gamma - 1.0) * q),
            DensityModel::Shallow { .. } => Some(self.rho_raw(q)),
            _ => None,
        })
    }

    /// Froude number F = √(Q/c²). Zero for the incompressible law; `None`
    /// for laws without a sound speed.
    pub fn froude(&self, q: f64) -> Result<Option<f64>> {
        if let DensityModel::Incompressible = self {
            self.check(q)?;
            return Ok(Some(0.0));
        }
        Ok(self.sound_speed_squared(q)?.map(|c2| (q / c2).sqrt()))
    }

    /// Classifies the flow at speed Q: Sonic when |d/dQ[Qρ²]| ≤ `tol`,
    /// otherwise Tranquil or Shooting by the subsonic condition.
    pub fn classify(&self, q: f64, tol: f64) -> Result<FlowRegime> {
        let flux = self.mass_flux_derivative(q)?;
        if flux.abs() <= tol {
            return Ok(FlowRegime::Sonic);
        }
        if self.subsonic_check(q)? {
            Ok(FlowRegime::Tranquil)
        } else {
            Ok(FlowRegime::Shooting)
        }
    }

    /// Channel depth h = (C − Q)/(2g) for the shallow-water law.
    pub fn depth(&self, q: f64, g: f64) -> Result<f64> {
        let c = match self {
            DensityModel::Shallow { c } => *c,
            _ => return Err(Error::invalid("model", "depth is defined for the shallow law only")),
        };
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::invalid("g", format!("must be > 0, got {g}")));
        }
        if !(q.is_finite() && q >= 0.0 && q <= c) {
            return Err(Error::Domain { q, limit: c });
        }
        Ok((c - q) / (2.0 * g))
    }

    pub(crate) fn rho_raw(&self, q: f64) -> f64 {
        match self {
            DensityModel::Polytropic { gamma } => {
                let g1 = gamma - 1.0;
                (1.0 - 0.5 * g1 * q).powf(1.0 / g1)
            }
            DensityModel::Shallow { c } => (c - q) / 2.0,
            DensityModel::LimitingExponential => (-0.5 * q).exp(),
            DensityModel::Incompressible => 1.0,
            DensityModel::WithSurfaceTension { base, mu } => base.rho_raw(q) + mu / (1.0 + q).sqrt(),
        }
    }

    pub(crate) fn rho_prime_raw(&self, q: f64) -> f64 {
        match self {
            DensityModel::Polytropic { gamma } => {
                let g1 = gamma - 1.0;
                -0.5 * (1.0 - 0.5 * g1 * q).powf(1.0 / g1 - 1.0)
            }
            DensityModel::Shallow { .. } => -0.5,
            DensityModel::LimitingExponential => -0.5 * (-0.5 * q).exp(),
            DensityModel::Incompressible => 0.0,
            DensityModel::WithSurfaceTension { base, mu } => {
                base.rho_prime_raw(q) - 0.5 * mu * (1.0 + q).powf(-1.5)
            }
        }
    }

    pub(crate) fn e_raw(&self, q: f64) -> f64 {
        match self {
            DensityModel::Polytropic { gamma } => {
                // (2/γ)(1 − (1 − (γ−1)Q/2)^{γ/(γ−1)}), written to avoid cancellation at small Q
                let g1 = gamma - 1.0;
                let exponent = gamma / g1;
                -(exponent * (-0.5 * g1 * q).ln_1p()).exp_m1() * 2.0 / gamma
            }
            DensityModel::Shallow { c } => q * (c - 0.5 * q) / 2.0,
            DensityModel::LimitingExponential => -2.0 * (-0.5 * q).exp_m1(),
            DensityModel::Incompressible => q,
            DensityModel::WithSurfaceTension { base, mu } => {
                // 2μ(√(1+Q) − 1)
                base.e_raw(q) + 2.0 * mu * q / ((1.0 + q).sqrt() + 1.0)
            }
        }
    }

    pub(crate) fn flux_raw(&self, q: f64) -> f64 {
        match self {
            DensityModel::Polytropic { gamma } => {
                let g1 = gamma - 1.0;
                (1.0 - 0.5 * g1 * q).powf(2.0 / g1 - 1.0) * (1.0 - 0.5 * (gamma + 1.0) * q)
            }
            DensityModel::Shallow { c } => (c - q) * (c - 3.0 * q) / 4.0,
            DensityModel::LimitingExponential => (-q).exp() * (1.0 - q),
            DensityModel::Incompressible => 1.0,
            DensityModel::WithSurfaceTension { .. } => {
                let rho = self.rho_raw(q);
                rho * rho + 2.0 * q * rho * self.rho_prime_raw(q)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn all_models() -> Vec<DensityModel> {
        vec![
            DensityModel::polytropic(1.1),
            DensityModel::polytropic(1.4),
            DensityModel::polytropic(2.0),
            DensityModel::polytropic(3.0),
            DensityModel::shallow(2.0),
            DensityModel::shallow(3.0),
            DensityModel::LimitingExponential,
            DensityModel::Incompressible,
            DensityModel::with_surface_tension(DensityModel::shallow(2.0), 0.1),
            DensityModel::with_surface_tension(DensityModel::polytropic(1.4), 1.0),
            DensityModel::with_surface_tension(DensityModel::LimitingExponential, 0.1),
        ]
    }

    /// Upper end of a sampling window safely inside the domain.
    fn sample_ceiling(m: &DensityModel) -> f64 {
        m.admissible_limit().map(|l| 0.99 * l).unwrap_or(10.0)
    }

    // Adaptive Simpson, used only as an independent oracle for ∫ρ.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
            let m = 0.5 * (a + b);
            let fm = f(m);
            (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
        }
        #[allow(clippy::too_many_arguments)]
        fn recurse(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            fa: f64,
            b: f64,
            fb: f64,
            m: f64,
            fm: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let (lm, flm, left) = simpson(f, a, fa, m, fm);
            let (rm, frm, right) = simpson(f, m, fm, b, fb);
            let delta = left + right - whole;
            if depth == 0 || delta.abs() <= 15.0 * tol {
                return left + right + delta / 15.0;
            }
            recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
                + recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
        }
        let fa = f(a);
        let fb = f(b);
        let (m, fm, whole) = simpson(f, a, fa, b, fb);
        recurse(f, a, fa, b, fb, m, fm, whole, tol, 50)
    }

    #[test]
    fn rho_examples() {
        let p2 = DensityModel::polytropic(2.0);
        assert_eq!(p2.rho(0.0).unwrap(), 1.0);
        assert_relative_eq!(p2.rho(2.0 / 3.0).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        let p14 = DensityModel::polytropic(1.4);
        // 0.8^2.5 = 0.64 * sqrt(0.8)
        assert_relative_eq!(p14.rho(1.0).unwrap(), 0.64 * 0.8f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(p14.rho(1.0).unwrap(), 0.572433, epsilon = 1e-6);
    }

    #[test]
    fn rho_rejects_out_of_domain_speeds() {
        let p2 = DensityModel::polytropic(2.0);
        assert!(matches!(p2.rho(2.0), Err(Error::Domain { .. })));
        assert!(matches!(p2.rho(-0.1), Err(Error::Domain { .. })));
        assert!(matches!(p2.rho(f64::NAN), Err(Error::Domain { .. })));
        assert!(DensityModel::Incompressible.rho(1e9).is_ok());
    }

    #[test]
    fn rho_at_zero_is_positive_for_every_law() {
        for m in all_models() {
            assert!(m.rho(0.0).unwrap() > 0.0, "{m:?}");
        }
    }

    #[test]
    fn variational_density_examples() {
        for m in all_models() {
            assert_eq!(m.variational_density(0.0).unwrap(), 0.0, "{m:?}");
        }
        assert_relative_eq!(DensityModel::shallow(2.0).variational_density(1.0).unwrap(), 0.75);
        let e = DensityModel::LimitingExponential.variational_density(2.0).unwrap();
        assert_relative_eq!(e, 2.0 * (1.0 - (-1.0f64).exp()), max_relative = 1e-15);
        assert_relative_eq!(e, 1.264241, epsilon = 1e-6);
    }

    #[test]
    fn variational_density_matches_quadrature_oracle() {
        for m in all_models() {
            let top = sample_ceiling(&m);
            for i in 1..=8 {
                let q = top * i as f64 / 8.0;
                let oracle = adaptive_simpson(&|s| m.rho(s).unwrap(), 0.0, q, 1e-13);
                let closed = m.variational_density(q).unwrap();
                assert!((closed - oracle).abs() < 1e-10, "{m:?} Q={q}: {closed} vs {oracle}");
            }
        }
    }

    #[test]
    fn rho_prime_matches_central_difference() {
        for m in all_models() {
            let top = sample_ceiling(&m);
            for i in 1..=10 {
                let q = top * i as f64 / 11.0;
                let h = 1e-6;
                let fd = (m.rho(q + h).unwrap() - m.rho(q - h).unwrap()) / (2.0 * h);
                assert!((fd - m.rho_prime(q).unwrap()).abs() < 1e-7, "{m:?} at {q}");
            }
        }
    }

    #[test]
    fn mass_flux_derivative_examples() {
        for q in [0.0, 1.0, 50.0] {
            assert_eq!(DensityModel::Incompressible.mass_flux_derivative(q).unwrap(), 1.0);
        }
        let d = DensityModel::polytropic(2.0).mass_flux_derivative(2.0 / 3.0).unwrap();
        assert!(d.abs() < 1e-15, "{d}");
        let d = DensityModel::LimitingExponential.mass_flux_derivative(1.0).unwrap();
        assert!(d.abs() < 1e-15);
        // finite-difference oracle on Q e^{-Q}
        let h = 1e-5;
        let g = |q: f64| q * (-q).exp();
        assert!(((g(1.0 + h) - g(1.0 - h)) / (2.0 * h)).abs() < 1e-9);
    }

    #[test]
    fn mass_flux_derivative_matches_finite_difference_at_random_speeds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in all_models() {
            let top = sample_ceiling(&m);
            let flux = |q: f64| {
                let r = m.rho(q).unwrap();
                q * r * r
            };
            for _ in 0..100 {
                let q = rng.random_range(0.01 * top..top);
                let h = 1e-5 * q.max(1e-2);
                let fd = (flux(q + h) - flux(q - h)) / (2.0 * h);
                let exact = m.mass_flux_derivative(q).unwrap();
                let rel = (fd - exact).abs() / exact.abs().max(1e-3);
                assert!(rel < 1e-6, "{m:?} Q={q}: {exact} vs {fd}");
            }
        }
    }

    #[test]
    fn subsonic_check_examples() {
        let p2 = DensityModel::polytropic(2.0);
        assert!(p2.subsonic_check(0.5).unwrap());
        assert!(!p2.subsonic_check(0.7).unwrap());
        assert!(DensityModel::Incompressible.subsonic_check(100.0).unwrap());
    }

    #[test]
    fn q_crit_examples_and_bisection_agreement() {
        assert_eq!(DensityModel::polytropic(2.0).q_crit(), Some(2.0 / 3.0));
        assert_eq!(DensityModel::Incompressible.q_crit(), None);
        assert_eq!(DensityModel::Incompressible.q_crit_by_bisection(), None);
        let q = DensityModel::LimitingExponential.q_crit().unwrap();
        assert!((q - 1.0).abs() < 1e-12, "{q}");
        for gamma in [1.1, 1.4, 2.0, 3.0] {
            let m = DensityModel::polytropic(gamma);
            let closed = m.q_crit().unwrap();
            assert!((closed - 2.0 / (gamma + 1.0)).abs() < 1e-12);
            let bis = m.q_crit_by_bisection().unwrap();
            assert!((closed - bis).abs() < 1e-12, "gamma={gamma}: {closed} vs {bis}");
        }
        let s = DensityModel::shallow(3.0);
        assert!((s.q_crit_by_bisection().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cavitation_examples() {
        assert_eq!(DensityModel::polytropic(2.0).cavitation_speed(), Some(2.0));
        assert_eq!(DensityModel::shallow(2.0).cavitation_speed(), Some(2.0));
        assert_eq!(DensityModel::LimitingExponential.cavitation_speed(), None);
        assert_eq!(DensityModel::Incompressible.cavitation_speed(), None);

        let st = DensityModel::with_surface_tension(DensityModel::shallow(2.0), 0.1);
        let q = st.cavitation_speed().unwrap();
        assert!(q > 2.0);
        assert!(st.rho_raw(q).abs() < 1e-10);

        let st = DensityModel::with_surface_tension(DensityModel::polytropic(1.4), 0.5);
        assert_eq!(st.cavitation_speed(), None);
        assert!((st.admissible_limit().unwrap() - 5.0).abs() < 1e-14);
        let zero = DensityModel::with_surface_tension(DensityModel::shallow(2.0), 0.0);
        assert_eq!(zero.cavitation_speed(), Some(2.0));
    }

    #[test]
    fn froude_and_classification_examples() {
        let s = DensityModel::shallow(2.0);
        assert_eq!(s.froude(0.0).unwrap(), Some(0.0));
        assert_eq!(s.classify(0.0, DEFAULT_SONIC_TOLERANCE).unwrap(), FlowRegime::Tranquil);

        let f = s.froude(2.0 / 3.0).unwrap().unwrap();
        assert!((f - 1.0).abs() < 1e-15);
        assert_eq!(s.classify(2.0 / 3.0, DEFAULT_SONIC_TOLERANCE).unwrap(), FlowRegime::Sonic);

        let f = s.froude(1.0).unwrap().unwrap();
        assert!((f - 2f64.sqrt()).abs() < 1e-15);
        assert!(s.mass_flux_derivative(1.0).unwrap() < 0.0);
        assert_eq!(s.classify(1.0, DEFAULT_SONIC_TOLERANCE).unwrap(), FlowRegime::Shooting);

        assert_eq!(DensityModel::Incompressible.froude(4.0).unwrap(), Some(0.0));
        assert_eq!(DensityModel::LimitingExponential.froude(0.5).unwrap(), None);
        assert_eq!(
            DensityModel::LimitingExponential.classify(2.0, DEFAULT_SONIC_TOLERANCE).unwrap(),
            FlowRegime::Shooting
        );
        let p = DensityModel::polytropic(1.4);
        let f = p.froude(2.0 / 2.4).unwrap().unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn depth_examples() {
        let s2 = DensityModel::shallow(2.0);
        assert_eq!(s2.depth(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(s2.depth(2.0, 9.80665).unwrap(), 0.0);
        let d = DensityModel::shallow(3.0).depth(1.0, 9.80665).unwrap();
        assert_relative_eq!(d, 1.0 / 9.80665, max_relative = 1e-15);
        assert!(s2.depth(2.5, 9.80665).is_err());
        assert!(DensityModel::polytropic(2.0).depth(0.0, 1.0).is_err());
        assert!(s2.depth(0.0, 0.0).is_err());
    }

    #[test]
    fn variational_density_is_monotone_on_a_fine_grid() {
        for m in all_models() {
            let top = sample_ceiling(&m);
            let mut prev = 0.0;
            for i in 1..1000 {
                let e = m.variational_density(top * i as f64 / 1000.0).unwrap();
                assert!(e >= prev, "{m:?}");
                prev = e;
            }
        }
    }

    #[test]
    fn polytropic_two_coincides_with_shallow_two() {
        let p = DensityModel::polytropic(2.0);
        let s = DensityModel::shallow(2.0);
        for i in 0..2000 {
            let q = 2.0 * i as f64 / 2000.0;
            assert!((p.rho(q).unwrap() - s.rho(q).unwrap()).abs() < 1e-14);
            assert!((p.variational_density(q).unwrap() - s.variational_density(q).unwrap()).abs() < 1e-14);
        }
        assert_eq!(p.q_crit(), s.q_crit());
        assert_eq!(p.cavitation_speed(), s.cavitation_speed());
    }

    #[test]
    fn limiting_exponential_is_the_gamma_to_one_limit() {
        let p = DensityModel::polytropic(1.0 + 1e-6);
        for i in 0..=400 {
            let q = 4.0 * i as f64 / 400.0;
            let limit = 2.0 * (1.0 - (-0.5 * q).exp());
            assert!((p.variational_density(q).unwrap() - limit).abs() < 1e-5);
        }
    }

    #[test]
    fn polytropic_density_decreases_while_energy_density_increases() {
        for gamma in [1.1, 1.4, 2.0, 3.0] {
            let m = DensityModel::polytropic(gamma);
            // the top decile is excluded: for γ near 1 both curves flatten below rounding
            let top = 0.9 * m.cavitation_speed().unwrap();
            let (mut rho_prev, mut e_prev) = (f64::INFINITY, -1.0);
            for i in 0..1000 {
                let q = top * i as f64 / 1000.0;
                let (rho, e) = (m.rho(q).unwrap(), m.variational_density(q).unwrap());
                assert!(rho < rho_prev && e > e_prev, "gamma={gamma} Q={q}");
                rho_prev = rho;
                e_prev = e;
            }
        }
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(DensityModel::polytropic(1.0).validate().is_err());
        assert!(DensityModel::shallow(-1.0).validate().is_err());
        assert!(DensityModel::with_surface_tension(DensityModel::Incompressible, -0.1)
            .validate()
            .is_err());
        let nested = DensityModel::with_surface_tension(
            DensityModel::with_surface_tension(DensityModel::Incompressible, 0.1),
            0.1,
        );
        assert!(nested.validate().is_err());
    }

    #[test]
    fn json_tagged_records() {
        let m: DensityModel = serde_json::from_str(r#"{"type":"polytropic","gamma":2.0}"#).unwrap();
        assert_eq!(m, DensityModel::polytropic(2.0));
        let m: DensityModel = serde_json::from_str(
            r#"{"type":"surface_tension","base":{"type":"shallow","C":2},"mu":0.1}"#,
        )
        .unwrap();
        assert_eq!(m, DensityModel::with_surface_tension(DensityModel::shallow(2.0), 0.1));
        let m: DensityModel = serde_json::from_str(r#"{"type":"limiting_exponential"}"#).unwrap();
        assert_eq!(m, DensityModel::LimitingExponential);
        assert!(serde_json::from_str::<DensityModel>(r#"{"type":"polytropic","gamma":2,"x":1}"#).is_err());
    }
}
