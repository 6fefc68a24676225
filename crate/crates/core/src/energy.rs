//! Discrete Sobolev norms and energy functionals.

use crate::error::{Error, Result};
use crate::spectral::{transform, RealField, SpectralField};
use crate::systems::{CaseTag, State};

/// Default Sobolev index of the diagnostics.
pub const DEFAULT_S: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flavor {
    /// Weight `⟨ξ⟩^{2s}`.
    Inhomogeneous,
    /// Weight `|ξ|^{2s}`, zero mode dropped.
    Homogeneous,
    /// `ε^{-1/2}(ξ₁² + εξ₂²)^s`.
    HsEps,
}

fn weight(flavor: Flavor, s: f64, eps: f64, xi1: f64, xi2: f64) -> f64 {
    match flavor {
        Flavor::Inhomogeneous => (1.0 + xi1 * xi1 + xi2 * xi2).powf(s),
        Flavor::Homogeneous => {
            let r = xi1 * xi1 + xi2 * xi2;
            if r == 0.0 {
                0.0
            } else {
                r.powf(s)
            }
        }
        Flavor::HsEps => {
            let r = xi1 * xi1 + eps * xi2 * xi2;
            let w = if r == 0.0 { if s == 0.0 { 1.0 } else { 0.0 } } else { r.powf(s) };
            w / eps.sqrt()
        }
    }
}

/// Squared norm of a spectral field with an extra multiplier weight `m(ξ)`.
pub fn weighted_sq(
    f: &SpectralField,
    s: f64,
    flavor: Flavor,
    eps: f64,
    m: impl Fn(f64, f64) -> f64,
) -> f64 {
    f.weighted_norm_sq(|x1, x2| weight(flavor, s, eps, x1, x2) * m(x1, x2))
}

pub fn sobolev_norm_spectral(f: &SpectralField, s: f64, flavor: Flavor, eps: f64) -> f64 {
    weighted_sq(f, s, flavor, eps, |_, _| 1.0).sqrt()
}

/// Sobolev norm of a grid function.
pub fn sobolev_norm(f: &RealField, s: f64, flavor: Flavor, eps: f64) -> f64 {
    sobolev_norm_spectral(&transform(f), s, flavor, eps)
}

/// Energy functionals at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub e_total: f64,
    pub e_low: f64,
    pub e_high: f64,
    /// Absent when the good unknowns were not built.
    pub e_tilde_high: Option<f64>,
    pub s: f64,
    pub eps: f64,
    pub case_tag: CaseTag,
    pub time: f64,
}

fn j_coef(case: CaseTag) -> f64 {
    match case {
        CaseTag::Case1 => 1.0 / 3.0,
        CaseTag::Case2 => 0.5,
        CaseTag::General => 0.0,
    }
}

/// Energies of a state. The general tag uses unweighted norms.
pub fn energy(case: CaseTag, st: &State, s: f64, eps: f64) -> EnergyReport {
    let jb = j_coef(case);
    let j = move |x1: f64| 1.0 + jb * eps * x1 * x1;
    let v = transform(&st.v);
    let w = transform(&st.w);
    let z = transform(&st.zeta);
    let inh = Flavor::Inhomogeneous;
    let hom = Flavor::Homogeneous;
    let n = |f: &SpectralField, fl: Flavor, ss: f64, m: &dyn Fn(f64, f64) -> f64| weighted_sq(f, ss, fl, eps, m);
    let grad = |x1: f64, x2: f64| x1 * x1 + x2 * x2;

    let (e_low, e_high, e_total) = match case {
        CaseTag::Case2 => {
            let k = move |x1: f64| (1.0 + 0.5 * eps * x1 * x1) / (1.0 + eps * x1 * x1 / 6.0);
            let low = n(&v, inh, s, &|a, _| j(a) * k(a))
                + n(&w, inh, s, &|a, _| j(a))
                + n(&z, inh, s, &|a, _| j(a));
            let high = [&v, &w, &z]
                .iter()
                .map(|f| n(f, hom, s, &|a, b| j(a) * grad(a, b)))
                .sum::<f64>();
            let total = [&v, &w, &z].iter().map(|f| n(f, inh, s + 1.0, &|a, _| j(a))).sum::<f64>();
            (low, high, total)
        }
        _ => {
            let low = n(&v, inh, s, &|a, _| j(a) * j(a))
                + n(&w, inh, s, &|a, _| j(a))
                + n(&z, inh, s, &|a, _| j(a));
            let high = n(&v, hom, s, &|a, b| j(a) * a * a + b * b)
                + n(&w, hom, s, &|a, b| a * a + b * b / j(a))
                + n(&z, hom, s, &|a, b| a * a + b * b / j(a));
            (low, high, low + high)
        }
    };
    EnergyReport { e_total, e_low, e_high, e_tilde_high: None, s, eps, case_tag: case, time: st.time }
}

/// `‖J^{1/2}p̃‖²_{Ḣ^s} + ‖J^{1/2}θ̃‖²_{Ḣ^s}` with the case's `J_ε`.
pub fn tilde_energy(case: CaseTag, p_tilde: &RealField, theta_tilde: &RealField, s: f64, eps: f64) -> Result<f64> {
    for (name, f) in [("p_tilde", p_tilde), ("theta_tilde", theta_tilde)] {
        let m = f.mean();
        if m.abs() > 1e-10 * (1.0 + f.max_abs()) {
            return Err(Error::Argument(format!("{name} must have zero mean, got {m:.3e}")));
        }
    }
    let jb = j_coef(case);
    Ok(tilde_energy_spectral(jb, &transform(p_tilde), &transform(theta_tilde), s, eps))
}

pub(crate) fn tilde_energy_spectral(jb: f64, p: &SpectralField, t: &SpectralField, s: f64, eps: f64) -> f64 {
    let m = |a: f64, _: f64| 1.0 + jb * eps * a * a;
    weighted_sq(p, s, Flavor::Homogeneous, eps, m) + weighted_sq(t, s, Flavor::Homogeneous, eps, m)
}
