//! Right-hand sides of the Boussinesq systems, parameter validation, the
//! nonlinear change of elevation variable and residual probes.

use std::fmt;

use crate::energy::{sobolev_norm_spectral, Flavor};
use crate::error::{Error, Result};
use crate::spectral::{inverse_transform, inverse_transform_pair, transform, transform_pair, Coefficients, GridSpec, RealField, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseTag {
    General,
    Case1,
    Case2,
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseTag::General => "general",
            CaseTag::Case1 => "case1",
            CaseTag::Case2 => "case2",
        })
    }
}

/// Model coefficients, ε and the case classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub coeffs: Coefficients,
    pub eps: f64,
    pub case_tag: CaseTag,
}

impl ModelParams {
    pub fn case1(eps: f64) -> Self {
        ModelParams { coeffs: Coefficients::CASE1, eps, case_tag: CaseTag::Case1 }
    }

    pub fn case2(eps: f64) -> Self {
        ModelParams { coeffs: Coefficients::CASE2, eps, case_tag: CaseTag::Case2 }
    }

    pub fn general(coeffs: Coefficients, eps: f64) -> Self {
        ModelParams { coeffs, eps, case_tag: CaseTag::General }
    }

    pub fn for_case(case: CaseTag, eps: f64) -> Self {
        match case {
            CaseTag::Case1 => Self::case1(eps),
            CaseTag::Case2 => Self::case2(eps),
            CaseTag::General => Self::general(Coefficients::CASE1, eps),
        }
    }
}

/// Outcome of [`validate_params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub constraint_sums: (f64, f64),
    pub constraint_residuals: (f64, f64),
    /// Well-posedness families (i)..(iv) of the linearization.
    pub families: [bool; 4],
    /// `b = e >= 0` and `a = f`.
    pub curl_free: bool,
    /// `b = e >= 0`, `a = f = g <= 0`, `c <= 0`, `d >= 0`.
    pub studied_family: bool,
    pub case_tag_consistent: bool,
    pub notes: Vec<String>,
}

const TOL: f64 = 1e-14;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

fn coeffs_close(x: &Coefficients, y: &Coefficients) -> bool {
    x.as_array().iter().zip(y.as_array()).all(|(a, b)| close(*a, b))
}

/// Classify a coefficient set. Constraint violation is an error.
pub fn validate_params(p: &ModelParams) -> Result<Classification> {
    let co = &p.coeffs;
    let (r1, r2) = co.constraint_residuals();
    if r1.abs() > TOL || r2.abs() > TOL {
        return Err(Error::Validation(format!(
            "constraint violated: a+b+c+d-1/3 = {r1:.6e}, d+e+f+g-2/3 = {r2:.6e}"
        )));
    }
    if !(p.eps > 0.0 && p.eps < 1.0) {
        return Err(Error::Validation(format!("eps must lie in (0, 1), got {}", p.eps)));
    }
    let base = co.b >= 0.0 && co.d >= 0.0 && co.e >= 0.0;
    let families = [
        base && co.a <= 0.0 && co.c <= 0.0 && co.f <= 0.0 && co.g <= 0.0,
        base && co.a <= 0.0 && co.c <= 0.0 && close(co.f, co.g),
        base && close(co.a, co.c) && co.f <= 0.0 && co.g <= 0.0,
        base && close(co.a, co.c) && close(co.f, co.g),
    ];
    let curl_free = close(co.b, co.e) && co.b >= 0.0 && close(co.a, co.f);
    let studied_family = curl_free && close(co.f, co.g) && co.a <= 0.0 && co.c <= 0.0 && co.d >= 0.0;
    let case_tag_consistent = match p.case_tag {
        CaseTag::General => true,
        CaseTag::Case1 => coeffs_close(co, &Coefficients::CASE1),
        CaseTag::Case2 => coeffs_close(co, &Coefficients::CASE2),
    };
    let mut notes = Vec::new();
    for (name, v) in [("a", co.a), ("c", co.c), ("f", co.f), ("g", co.g)] {
        if v == 0.0 {
            notes.push(format!("{name} = 0 sits on the sign boundary of the families"));
        }
    }
    if !families.iter().any(|&x| x) {
        notes.push("linearization is not in any well-posedness family".into());
    }
    if !case_tag_consistent {
        notes.push(format!("coefficients do not match the {} coefficient set", p.case_tag));
    }
    Ok(Classification {
        constraint_sums: (r1 + 1.0 / 3.0, r2 + 2.0 / 3.0),
        constraint_residuals: (r1, r2),
        families,
        curl_free,
        studied_family,
        case_tag_consistent,
        notes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum System {
    /// Original system with anisotropic transverse scaling.
    Wtb1,
    /// Rescaled curl-free system with general coefficients.
    Wtb2,
    Case1,
    Case2,
}

impl System {
    pub fn case(&self) -> CaseTag {
        match self {
            System::Case1 => CaseTag::Case1,
            System::Case2 => CaseTag::Case2,
            _ => CaseTag::General,
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            System::Wtb1 => "wtb1",
            System::Wtb2 => "wtb2",
            System::Case1 => "case1",
            System::Case2 => "case2",
        })
    }
}

/// Physical unknowns `(v, w, ζ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub v: RealField,
    pub w: RealField,
    pub zeta: RealField,
    pub time: f64,
}

impl State {
    pub fn zeros(grid: GridSpec) -> Self {
        State {
            v: RealField::zeros(grid),
            w: RealField::zeros(grid),
            zeta: RealField::zeros(grid),
            time: 0.0,
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.zeta.grid
    }

    pub fn check(&self) -> Result<()> {
        let g = self.zeta.grid;
        for f in [&self.v, &self.w, &self.zeta] {
            if f.grid != g || f.values.len() != g.len() {
                return Err(Error::Argument("state fields live on different grids".into()));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.w.is_finite() && self.zeta.is_finite()
    }

    /// Largest absolute sample over the three fields.
    pub fn max_abs(&self) -> f64 {
        self.v.max_abs().max(self.w.max_abs()).max(self.zeta.max_abs())
    }

    pub fn scale(&self, a: f64) -> Self {
        State { v: self.v.scale(a), w: self.w.scale(a), zeta: self.zeta.scale(a), time: self.time }
    }

    /// `self + h * k` with the time advanced by `h`.
    pub fn advance(&self, h: f64, k: &Tendency) -> Self {
        State {
            v: self.v.axpy(h, &k.dv),
            w: self.w.axpy(h, &k.dw),
            zeta: self.zeta.axpy(h, &k.dzeta),
            time: self.time + h,
        }
    }

    pub fn spectral(&self) -> SpecState {
        SpecState { v: transform(&self.v), w: transform(&self.w), zeta: transform(&self.zeta) }
    }

    /// Band-limit every field to the dealiasing band.
    pub fn projected(&self) -> Self {
        let s = self.spectral();
        let mut out = SpecState { v: s.v.project(), w: s.w.project(), zeta: s.zeta.project() }
            .to_state();
        out.time = self.time;
        out
    }
}

/// Time derivatives `(v_t, w_t, ζ_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tendency {
    pub dv: RealField,
    pub dw: RealField,
    pub dzeta: RealField,
}

impl Tendency {
    pub fn is_finite(&self) -> bool {
        self.dv.is_finite() && self.dw.is_finite() && self.dzeta.is_finite()
    }

    pub fn max_abs(&self) -> f64 {
        self.dv.max_abs().max(self.dw.max_abs()).max(self.dzeta.max_abs())
    }
}

/// Spectral representation of a state or tendency.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecState {
    pub v: SpectralField,
    pub w: SpectralField,
    pub zeta: SpectralField,
}

impl SpecState {
    /// `self + h * k`.
    pub fn axpy(&self, h: f64, k: &SpecState) -> SpecState {
        SpecState { v: self.v.axpy(h, &k.v), w: self.w.axpy(h, &k.w), zeta: self.zeta.axpy(h, &k.zeta) }
    }

    pub fn is_finite(&self) -> bool {
        [&self.v, &self.w, &self.zeta]
            .iter()
            .all(|f| f.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite()))
    }

    pub fn to_state(&self) -> State {
        State {
            v: inverse_transform(&self.v),
            w: inverse_transform(&self.w),
            zeta: inverse_transform(&self.zeta),
            time: 0.0,
        }
    }

    pub fn to_tendency(&self) -> Tendency {
        Tendency {
            dv: inverse_transform(&self.v),
            dw: inverse_transform(&self.w),
            dzeta: inverse_transform(&self.zeta),
        }
    }
}

impl Tendency {
    pub fn spectral(&self) -> SpecState {
        SpecState { v: transform(&self.dv), w: transform(&self.dw), zeta: transform(&self.dzeta) }
    }
}

/// Reject coefficient sets that do not belong to the system.
pub fn check_system_params(system: System, p: &ModelParams) -> Result<()> {
    let need = match system {
        System::Case1 => Some(Coefficients::CASE1),
        System::Case2 => Some(Coefficients::CASE2),
        _ => None,
    };
    if let Some(c) = need {
        if !coeffs_close(&p.coeffs, &c) {
            return Err(Error::Validation(format!(
                "system {system} requires its own coefficient set, got {:?}",
                p.coeffs
            )));
        }
    }
    if !(p.eps > 0.0 && p.eps < 1.0) {
        return Err(Error::Validation(format!("eps must lie in (0, 1), got {}", p.eps)));
    }
    Ok(())
}

/// Physical-space samples of a field and its two first derivatives.
struct Jet {
    f: RealField,
    fx: RealField,
    fy: RealField,
}

fn jets(v: &SpectralField, w: &SpectralField, z: &SpectralField) -> (Jet, Jet, Jet) {
    let (vf, wf) = inverse_transform_pair(v, w);
    let (vx, vy) = inverse_transform_pair(&v.dx(), &v.dy());
    let (wx, wy) = inverse_transform_pair(&w.dx(), &w.dy());
    let (zf, zx) = inverse_transform_pair(z, &z.dx());
    let zy = inverse_transform(&z.dy());
    (Jet { f: vf, fx: vx, fy: vy }, Jet { f: wf, fx: wx, fy: wy }, Jet { f: zf, fx: zx, fy: zy })
}

fn combine(grid: GridSpec, f: impl Fn(usize) -> f64) -> SpectralField {
    let values = (0..grid.len()).map(f).collect();
    transform(&RealField { grid, values }).project()
}

fn combine2(
    grid: GridSpec,
    f: impl Fn(usize) -> f64,
    h: impl Fn(usize) -> f64,
) -> (SpectralField, SpectralField) {
    let a = RealField { grid, values: (0..grid.len()).map(f).collect() };
    let b = RealField { grid, values: (0..grid.len()).map(h).collect() };
    let (x, y) = transform_pair(&a, &b);
    (x.project(), y.project())
}

/// Divide by the symbol `1 + k ε ξ₁²` of the elliptic factor `1 − kε∂x²`.
fn elliptic_inverse(f: &SpectralField, k: f64, eps: f64) -> SpectralField {
    f.map_real(|xi1, _| 1.0 / (1.0 + k * eps * xi1 * xi1))
}

/// Symbol of `1 + kε∂x²`.
fn dispersive(f: &SpectralField, k: f64, eps: f64) -> SpectralField {
    f.map_real(|xi1, _| 1.0 - k * eps * xi1 * xi1)
}

/// Spectral right-hand side. With `nonlinear = false` only the linear part
/// is evaluated.
pub fn rhs_spectral(system: System, s: &SpecState, p: &ModelParams, nonlinear: bool) -> SpecState {
    let co = &p.coeffs;
    let eps = p.eps;
    let g = s.zeta.grid;
    let sq = if system == System::Wtb1 { eps.sqrt() } else { 1.0 };

    let mut rv = dispersive(&s.zeta, co.a, eps).dx();
    let mut rw = dispersive(&s.zeta, co.f, eps).dy().scale(sq);
    let mut rz = &dispersive(&s.v, co.c, eps).dx() + &dispersive(&s.w, co.g, eps).dy().scale(sq);

    if nonlinear {
        let (v, w, z) = jets(&s.v, &s.w, &s.zeta);
        let (vv, wv, zv) = (&v.f.values, &w.f.values, &z.f.values);
        match system {
            System::Wtb1 => {
                let e32 = eps * sq;
                let (nv, nw) = combine2(
                    g,
                    |k| {
                        eps * (vv[k] * v.fx.values[k] + 0.5 * wv[k] * w.fx.values[k])
                            + 0.5 * e32 * wv[k] * v.fy.values[k]
                    },
                    |k| {
                        0.5 * eps * vv[k] * w.fx.values[k]
                            + e32 * (wv[k] * w.fy.values[k] + 0.5 * vv[k] * v.fy.values[k])
                    },
                );
                let (zvp, zwp) = combine2(g, |k| zv[k] * vv[k], |k| zv[k] * wv[k]);
                let nz = &zvp.dx().scale(eps) + &zwp.dy().scale(e32);
                rv = &rv + &nv;
                rw = &rw + &nw;
                rz = &rz + &nz;
            }
            _ => {
                let (nv, nw) = combine2(
                    g,
                    |k| vv[k] * v.fx.values[k] + wv[k] * v.fy.values[k] + 0.5 * zv[k] * z.fx.values[k],
                    |k| vv[k] * w.fx.values[k] + wv[k] * w.fy.values[k] + 0.5 * zv[k] * z.fy.values[k],
                );
                let nz = combine(g, |k| {
                    vv[k] * z.fx.values[k]
                        + wv[k] * z.fy.values[k]
                        + 0.5 * zv[k] * (v.fx.values[k] + w.fy.values[k])
                });
                rv = rv.axpy(eps, &nv);
                rw = rw.axpy(eps, &nw);
                rz = rz.axpy(eps, &nz);
            }
        }
    }
    SpecState {
        v: elliptic_inverse(&rv, co.b, eps).scale(-1.0),
        w: elliptic_inverse(&rw, co.e, eps).scale(-1.0),
        zeta: elliptic_inverse(&rz, co.d, eps).scale(-1.0),
    }
}

/// Time derivative of the state for the chosen system.
pub fn rhs(system: System, s: &State, p: &ModelParams) -> Result<Tendency> {
    rhs_impl(system, s, p, true)
}

/// Linear part of [`rhs`].
pub fn rhs_linear(system: System, s: &State, p: &ModelParams) -> Result<Tendency> {
    rhs_impl(system, s, p, false)
}

fn rhs_impl(system: System, s: &State, p: &ModelParams, nonlinear: bool) -> Result<Tendency> {
    s.check()?;
    check_system_params(system, p)?;
    if !s.is_finite() {
        return Err(Error::Numerical { time: s.time, msg: "non-finite state".into() });
    }
    let t = rhs_spectral(system, &s.spectral(), p, nonlinear).to_tendency();
    if !t.is_finite() {
        return Err(Error::Numerical { time: s.time, msg: "non-finite tendency".into() });
    }
    Ok(t)
}

/// `ζ − (ε/4)ζ²` with a dealiased square.
pub fn zeta_tilde(zeta: &RealField, eps: f64) -> RealField {
    let z = transform(zeta);
    inverse_transform(&z.axpy(-0.25 * eps, &z.mul(&z)))
}

/// Default Sobolev index of the consistency residual norm.
pub const CONSISTENCY_N: f64 = 2.0;

/// Substitute `(v, w, ζ̃)` into the three equations of the target system,
/// with time derivatives from the original system, and return the H^N_ε
/// norms of the residuals.
pub fn consistency_residual(s: &State, p: &ModelParams, n: f64) -> Result<[f64; 3]> {
    let r = consistency_residual_fields(s, p)?;
    let eps = p.eps;
    Ok([
        sobolev_norm_spectral(&r[0], n, Flavor::HsEps, eps),
        sobolev_norm_spectral(&r[1], n, Flavor::HsEps, eps),
        sobolev_norm_spectral(&r[2], n, Flavor::HsEps, eps),
    ])
}

/// Residual fields of [`consistency_residual`] in spectral form.
pub fn consistency_residual_fields(s: &State, p: &ModelParams) -> Result<[SpectralField; 3]> {
    s.check()?;
    let (r1, r2) = p.coeffs.constraint_residuals();
    if r1.abs() > TOL || r2.abs() > TOL {
        return Err(Error::Validation(format!(
            "constraint violated: residuals ({r1:.3e}, {r2:.3e})"
        )));
    }
    let co = &p.coeffs;
    let eps = p.eps;
    let sq = eps.sqrt();
    let e32 = eps * sq;
    let st = s.spectral();
    let tend = rhs_spectral(System::Wtb1, &st, p, true);

    let z = &st.zeta;
    let zt = z.axpy(-0.25 * eps, &z.mul(z));
    let zt_t = tend.zeta.axpy(-0.5 * eps, &z.mul(&tend.zeta));

    let g = z.grid;
    let (v, w, zj) = jets(&st.v, &st.w, &zt);
    let (vv, wv, zv) = (&v.f.values, &w.f.values, &zj.f.values);

    let n1 = combine(g, |k| {
        eps * (vv[k] * v.fx.values[k] + 0.5 * wv[k] * w.fx.values[k])
            + 0.5 * e32 * wv[k] * v.fy.values[k]
            + 0.5 * eps * zv[k] * zj.fx.values[k]
    });
    let n2 = combine(g, |k| {
        0.5 * eps * vv[k] * w.fx.values[k]
            + e32 * (wv[k] * w.fy.values[k] + 0.5 * vv[k] * v.fy.values[k] + 0.5 * zv[k] * zj.fy.values[k])
    });
    let n3 = combine(g, |k| {
        eps * vv[k] * zj.fx.values[k]
            + e32 * wv[k] * zj.fy.values[k]
            + 0.5 * eps * zv[k] * v.fx.values[k]
            + 0.5 * e32 * zv[k] * w.fy.values[k]
    });

    let l = |f: &SpectralField, k: f64| f.map_real(|xi1, _| 1.0 + k * eps * xi1 * xi1);
    let r1 = &(&l(&tend.v, co.b) + &dispersive(&zt, co.a, eps).dx()) + &n1;
    let r2 = &(&l(&tend.w, co.e) + &dispersive(&zt, co.f, eps).dy().scale(sq)) + &n2;
    let r3 = &(&(&l(&zt_t, co.d) + &dispersive(&st.v, co.c, eps).dx())
        + &dispersive(&st.w, co.g, eps).dy().scale(sq))
        + &n3;
    Ok([r1, r2, r3])
}

/// L² norm of `ε^{1/2} v_y − w_x` (scaled) or `v_y − w_x`.
pub fn curl_residual(s: &State, eps: f64, scaled: bool) -> f64 {
    let k = if scaled { eps.sqrt() } else { 1.0 };
    let v = transform(&s.v);
    let w = transform(&s.w);
    v.dy().scale(k).axpy(-1.0, &w.dx()).l2_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> GridSpec {
        GridSpec::square(n).unwrap()
    }

    #[test]
    fn classification_examples() {
        let c1 = validate_params(&ModelParams::case1(0.1)).unwrap();
        assert!((c1.constraint_sums.0 - 1.0 / 3.0).abs() < 1e-15);
        assert!((c1.constraint_sums.1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(c1.families, [true, true, false, false]);
        assert!(c1.curl_free && c1.studied_family && c1.case_tag_consistent);
        assert!(!c1.notes.is_empty());

        let c2 = validate_params(&ModelParams::case2(0.1)).unwrap();
        assert!(c2.families[0]);
        assert!(c2.curl_free);

        let err = validate_params(&ModelParams::general(Coefficients::ZERO, 0.1)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("-3.333333e-1") && msg.contains("-6.666667e-1"), "{msg}");
    }

    #[test]
    fn null_state_is_fixed_point() {
        let s = State::zeros(grid(16));
        for sys in [System::Wtb1, System::Wtb2] {
            let t = rhs(sys, &s, &ModelParams::general(Coefficients::CASE2, 0.2)).unwrap();
            assert_eq!(t.max_abs(), 0.0);
        }
        assert_eq!(rhs(System::Case1, &s, &ModelParams::case1(0.1)).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn case_system_rejects_wrong_coefficients() {
        let s = State::zeros(grid(16));
        assert!(rhs(System::Case1, &s, &ModelParams::case2(0.1)).is_err());
    }

    #[test]
    fn linear_symbol_per_mode() {
        let g = grid(32);
        let eps = 0.1;
        let (k, l) = (3.0, 2.0);
        let delta = 1e-9;
        let mut s = State::zeros(g);
        s.zeta = RealField::from_fn(g, |x, y| delta * (k * x + l * y).cos());
        let full = rhs(System::Case1, &s, &ModelParams::case1(eps)).unwrap();
        let t = rhs_linear(System::Case1, &s, &ModelParams::case1(eps)).unwrap();
        assert!((&full.dv - &t.dv).max_abs() < 10.0 * delta * delta);
        // v_t = -ζ_x/(1+εk²/3), w_t = -ζ_y/(1+εk²/3)
        let jk = 1.0 + eps * k * k / 3.0;
        let ev = RealField::from_fn(g, |x, y| delta * k * (k * x + l * y).sin() / jk);
        let ew = RealField::from_fn(g, |x, y| delta * l * (k * x + l * y).sin() / jk);
        assert!((&t.dv - &ev).max_abs() < 1e-12 * delta);
        assert!((&t.dw - &ew).max_abs() < 1e-12 * delta);
        assert!(t.dzeta.max_abs() < 1e-24);
    }

    #[test]
    fn single_quadratic_term() {
        let g = grid(32);
        let eps = 0.1;
        let mut s = State::zeros(g);
        s.v = RealField::from_fn(g, |x, _| x.cos());
        let t = transform(&rhs(System::Case1, &s, &ModelParams::case1(eps)).unwrap().dv);
        // -ε v v_x = 0.05 sin 2x, divided by 1 + (ε/3)·4
        let expect = 0.05 / (1.0 + eps / 3.0 * 4.0);
        let c = t.mode(2, 0);
        let amp = -2.0 * c.im / g.len() as f64;
        assert!((amp - expect).abs() < 1e-14, "{amp} vs {expect}");
    }

    #[test]
    fn zeta_tilde_examples() {
        let g = grid(16);
        assert_eq!(zeta_tilde(&RealField::zeros(g), 0.1).max_abs(), 0.0);
        let z = zeta_tilde(&RealField::constant(g, 2.0), 0.1);
        assert!(z.values.iter().all(|v| (v - 1.9).abs() < 1e-14));
    }

    #[test]
    fn zeta_tilde_fixed_point_inverse() {
        let g = grid(32);
        let eps = 0.1;
        let zeta = RealField::from_fn(g, |x, y| 0.5 * (x.cos() + (x + y).sin()));
        let zt = zeta_tilde(&zeta, eps);
        // ζ = ζ̃ + (ε/4) ζ², iterated
        let mut z = zt.clone();
        for _ in 0..200 {
            let next = zt.axpy(0.25 * eps, &crate::spectral::dealiased_product(&z, &z).unwrap());
            let d = (&next - &z).max_abs();
            z = next;
            if d < 1e-15 {
                break;
            }
        }
        assert!((&z - &zeta).max_abs() < 1e-12);
    }

    #[test]
    fn curl_residual_examples() {
        let g = grid(32);
        let mut s = State::zeros(g);
        assert_eq!(curl_residual(&s, 0.1, false), 0.0);
        s.v = RealField::from_fn(g, |x, y| (x + y).sin());
        s.w = s.v.clone();
        assert!(curl_residual(&s, 0.1, false) < 1e-12);
        s.v = RealField::from_fn(g, |_, y| y.cos());
        s.w = RealField::zeros(g);
        // ‖sin y‖ = sqrt(2π²)
        assert!((curl_residual(&s, 0.1, false) - (2.0 * PI * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn consistency_residual_vanishes_with_data() {
        let g = grid(16);
        let p = ModelParams::general(Coefficients::CASE2, 0.1);
        let r = consistency_residual(&State::zeros(g), &p, 2.0).unwrap();
        assert_eq!(r, [0.0, 0.0, 0.0]);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use crate::verify::random_curl_free_state;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn tendency_preserves_zero_curl(seed in 0u64..10_000, eps in 0.001f64..0.9, c2 in any::<bool>()) {
            let (case, system) = if c2 { (CaseTag::Case2, System::Case2) } else { (CaseTag::Case1, System::Case1) };
            let s = random_curl_free_state(case, GridSpec::square(24).unwrap(), eps, 0.3, seed).unwrap();
            let t = rhs(system, &s, &ModelParams::for_case(case, eps)).unwrap();
            let as_state = State { v: t.dv.clone(), w: t.dw.clone(), zeta: t.dzeta.clone(), time: 0.0 };
            let scale = t.dv.l2_norm() + t.dw.l2_norm();
            prop_assert!(curl_residual(&as_state, eps, false) <= 1e-12 * scale);
        }

        #[test]
        fn null_state_fixed_for_every_system(eps in 0.001f64..0.9, which in 0usize..4) {
            let system = [System::Wtb1, System::Wtb2, System::Case1, System::Case2][which];
            let p = match system {
                System::Case2 => ModelParams::case2(eps),
                System::Case1 => ModelParams::case1(eps),
                _ => ModelParams::general(Coefficients::CASE2, eps),
            };
            let t = rhs(system, &State::zeros(GridSpec::square(16).unwrap()), &p).unwrap();
            prop_assert_eq!(t.max_abs(), 0.0);
        }
    }
}
