//! One-dimensional channel models: mass conservation through cross-sections
//! and the surface response ε of a channel flow to a floor incline δ.
//!
//! Bernoulli along the surface, v₁²/2 − ṽ₁²/2 = gε, together with
//! conservation of discharge, (H + δ)v₁ = (H + ε)ṽ₁, gives the combined
//! relation
//!
//! ```text
//! (H + ε)² · 2gε = v₁² (2H + ε + δ)(ε − δ)
//! ```
//!
//! a cubic in ε. Its first-order solution is ε ≈ δ / (1 − gH/v₁²), which
//! blows up as the Froude number |v₁|/√(gH) approaches 1.

use serde::{Deserialize, Serialize};

use crate::density::FlowRegime;
use crate::error::{Error, Result};

pub const STANDARD_GRAVITY: f64 = 9.80665;
/// bore_exact refuses problems with |F − 1| below this.
pub const SONIC_BAND: f64 = 1e-3;
/// bore_linear refuses problems with |1 − gH/v₁²| at or below this.
pub const LINEAR_SINGULARITY: f64 = 1e-10;

/// v_f = v_i A_i / A_f.
pub fn conserve_mass(v_i: f64, a_i: f64, a_f: f64) -> Result<f64> {
    for (name, a) in [("A_i", a_i), ("A_f", a_f)] {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid(name, format!("area must be > 0, got {a}")));
        }
    }
    if !v_i.is_finite() {
        return Err(Error::invalid("v_i", "must be finite"));
    }
    Ok(v_i * a_i / a_f)
}

fn default_gravity() -> f64 {
    STANDARD_GRAVITY
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoreProblem {
    /// Upstream depth.
    #[serde(rename = "H")]
    pub h: f64,
    /// Floor incline; negative values lower the floor.
    pub delta: f64,
    /// Upstream speed.
    pub v1: f64,
    #[serde(default = "default_gravity")]
    pub g: f64,
}

impl BoreProblem {
    pub fn new(h: f64, delta: f64, v1: f64) -> Self {
        Self {
            h,
            delta,
            v1,
            g: STANDARD_GRAVITY,
        }
    }

    pub fn with_gravity(self, g: f64) -> Self {
        Self { g, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::invalid("H", format!("must be > 0, got {}", self.h)));
        }
        if !(self.g.is_finite() && self.g > 0.0) {
            return Err(Error::invalid("g", format!("must be > 0, got {}", self.g)));
        }
        if !(self.v1.is_finite() && self.v1 != 0.0) {
            return Err(Error::invalid("v1", format!("must be finite and nonzero, got {}", self.v1)));
        }
        if !(self.delta.is_finite() && self.delta.abs() < self.h) {
            return Err(Error::invalid("delta", format!("must satisfy |delta| < H, got {}", self.delta)));
        }
        Ok(())
    }

    /// F = |v₁| / √(gH).
    pub fn froude(&self) -> f64 {
        self.v1.abs() / (self.g * self.h).sqrt()
    }

    pub fn regime(&self) -> FlowRegime {
        if self.froude() < 1.0 {
            FlowRegime::Tranquil
        } else {
            FlowRegime::Shooting
        }
    }

    /// Coefficients (a, b, c, d) of a ε³ + b ε² + c ε + d = 0.
    pub fn cubic(&self) -> [f64; 4] {
        let (h, d, v2, g) = (self.h, self.delta, self.v1 * self.v1, self.g);
        [
            2.0 * g,
            4.0 * g * h - v2,
            2.0 * g * h * h - 2.0 * h * v2,
            v2 * (2.0 * h * d + d * d),
        ]
    }

    /// (H + ε)²·2gε − v₁²(2H + ε + δ)(ε − δ).
    pub fn combined_residual(&self, eps: f64) -> f64 {
        let (h, d, v2, g) = (self.h, self.delta, self.v1 * self.v1, self.g);
        (h + eps) * (h + eps) * 2.0 * g * eps - v2 * (2.0 * h + eps + d) * (eps - d)
    }

    /// ṽ₁ = (H + δ)v₁ / (H + ε).
    pub fn downstream_speed(&self, eps: f64) -> f64 {
        (self.h + self.delta) * self.v1 / (self.h + eps)
    }
}

/// First-order elevation ε = δ / (1 − gH/v₁²).
pub fn bore_linear(p: &BoreProblem) -> Result<f64> {
    p.validate()?;
    let denom = 1.0 - p.g * p.h / (p.v1 * p.v1);
    if denom.abs() <= LINEAR_SINGULARITY {
        return Err(Error::NearSonic { froude: p.froude() });
    }
    Ok(p.delta / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoreResiduals {
    /// |v₁²/2 − ṽ₁²/2 − gε| / (v₁²/2).
    pub bernoulli: f64,
    /// |(H+δ)v₁ − (H+ε)ṽ₁| / |H v₁|.
    pub discharge: f64,
    /// Combined-relation residual relative to v₁² H max(|δ|, |ε|).
    pub combined: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoreResult {
    pub epsilon_exact: f64,
    pub epsilon_linear: f64,
    pub downstream_speed: f64,
    pub froude: f64,
    pub regime: FlowRegime,
    pub residuals: BoreResiduals,
    pub delta_over_h: f64,
}

/// All roots of a ε³ + b ε² + c ε + d as (re, im) pairs, real roots first
/// in ascending order.
pub fn cubic_roots([a, b, c, d]: [f64; 4]) -> Vec<(f64, f64)> {
    let (b, c, d) = (b / a, c / a, d / a);
    // depressed cubic t³ + p t + q with ε = t − b/3
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let mut roots = if disc <= 0.0 && p < 0.0 {
        let r = (-p / 3.0).sqrt();
        let phi = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0).acos();
        (0..3)
            .map(|j| (2.0 * r * ((phi - 2.0 * std::f64::consts::PI * j as f64) / 3.0).cos() - shift, 0.0))
            .collect::<Vec<_>>()
    } else {
        let s = disc.max(0.0).sqrt();
        let u = (-q / 2.0 + s).cbrt();
        let v = (-q / 2.0 - s).cbrt();
        let re = -(u + v) / 2.0 - shift;
        let im = (u - v).abs() * 3f64.sqrt() / 2.0;
        vec![(u + v - shift, 0.0), (re, im), (re, -im)]
    };
    roots.sort_by(|x, y| (x.1 != 0.0).cmp(&(y.1 != 0.0)).then(x.0.total_cmp(&y.0)));
    roots
}

/// Refines a simple real root of `f` near `guess` to full precision: a
/// bracket is grown geometrically around the guess, then bisected until
/// the midpoint coincides with an endpoint.
fn polish<F: Fn(f64) -> f64>(f: F, guess: f64, scale: f64) -> Option<f64> {
    if f(guess) == 0.0 {
        return Some(guess);
    }
    let mut s = (guess.abs() * 1e-10).max(scale * 1e-15).max(f64::MIN_POSITIVE);
    let (mut lo, mut hi) = (guess - s, guess + s);
    let mut found = false;
    for _ in 0..200 {
        if f(lo).signum() != f(hi).signum() {
            found = true;
            break;
        }
        s *= 2.0;
        lo = guess - s;
        hi = guess + s;
    }
    if !found {
        return None;
    }
    let flo = f(lo);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(if f(lo).abs() <= f(hi).abs() { lo } else { hi })
}

/// Solves the combined relation for ε, selecting the real root nearest the
/// first-order value within [−H/2, H/2].
pub fn bore_exact(p: &BoreProblem) -> Result<BoreResult> {
    p.validate()?;
    let froude = p.froude();
    if (froude - 1.0).abs() < SONIC_BAND {
        return Err(Error::NearSonic { froude });
    }
    let linear = bore_linear(p)?;
    let (lo, hi) = (-0.5 * p.h, 0.5 * p.h);

    let eps = if p.delta == 0.0 {
        0.0
    } else {
        let coeffs = p.cubic();
        let roots = cubic_roots(coeffs);
        let f = |e: f64| p.combined_residual(e);
        let candidate = roots
            .iter()
            .filter(|r| r.1 == 0.0)
            .filter_map(|r| polish(f, r.0, p.h))
            .filter(|e| (lo..=hi).contains(e))
            .min_by(|x, y| (x - linear).abs().total_cmp(&(y - linear).abs()));
        match candidate {
            Some(e) => e,
            None => return Err(Error::NoAdmissibleRoot { lo, hi, roots }),
        }
    };

    let v_tilde = p.downstream_speed(eps);
    let v2 = p.v1 * p.v1;
    let scale = v2 * p.h * p.delta.abs().max(eps.abs());
    let residuals = BoreResiduals {
        bernoulli: (0.5 * v2 - 0.5 * v_tilde * v_tilde - p.g * eps).abs() / (0.5 * v2),
        discharge: ((p.h + p.delta) * p.v1 - (p.h + eps) * v_tilde).abs() / (p.h * p.v1).abs(),
        combined: if scale > 0.0 { p.combined_residual(eps).abs() / scale } else { 0.0 },
    };
    Ok(BoreResult {
        epsilon_exact: eps,
        epsilon_linear: linear,
        downstream_speed: v_tilde,
        froude,
        regime: p.regime(),
        residuals,
        delta_over_h: p.delta / p.h,
    })
}
