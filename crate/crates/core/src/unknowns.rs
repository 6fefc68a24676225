//! Symmetrizing unknowns `(p, θ)`, the good unknowns `(p̃, θ̃)` and the
//! resolvent-based operators `Γ_ε`, `γ_ε`.

use crate::error::{Error, Result};
use crate::spectral::{inverse_transform, transform, RealField, SpectralField};
use crate::systems::{CaseTag, SpecState, State};

/// Neumann-series settings for `(2 + (ε/2)ζY_ε^{-1})^{-1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventConfig {
    pub max_terms: usize,
    pub tol: f64,
    /// Largest admissible measured contraction factor.
    pub norm_guard: f64,
}

impl Default for ResolventConfig {
    fn default() -> Self {
        ResolventConfig { max_terms: 64, tol: 1e-13, norm_guard: 0.5 }
    }
}

impl ResolventConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_terms < 1 || !(self.norm_guard > 0.0 && self.norm_guard < 1.0) {
            return Err(Error::Validation(format!("invalid resolvent settings {self:?}")));
        }
        Ok(())
    }
}

/// Fourier multipliers of one of the two studied cases.
///
/// `J = 1 + jb·εξ₁²`, `Y = 1 + yg·εξ₁²`, `K = J/Y`, `A = (Kξ₁² + ξ₂²)^{1/2}`
/// and `Λ = YA/J`. Case 1 has `Y = 1`, so `K = J` and `A` is its `A(D)`;
/// case 2 has `A = B(D)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseOps {
    pub case: CaseTag,
    pub eps: f64,
    jb: f64,
    yg: f64,
}

impl CaseOps {
    pub fn new(case: CaseTag, eps: f64) -> Result<Self> {
        let (jb, yg) = match case {
            CaseTag::Case1 => (1.0 / 3.0, 0.0),
            CaseTag::Case2 => (0.5, 1.0 / 6.0),
            CaseTag::General => {
                return Err(Error::Argument("symmetrization needs case1 or case2".into()))
            }
        };
        Ok(CaseOps { case, eps, jb, yg })
    }

    pub fn j_sym(&self, xi1: f64) -> f64 {
        1.0 + self.jb * self.eps * xi1 * xi1
    }

    pub fn y_sym(&self, xi1: f64) -> f64 {
        1.0 + self.yg * self.eps * xi1 * xi1
    }

    pub fn k_sym(&self, xi1: f64) -> f64 {
        self.j_sym(xi1) / self.y_sym(xi1)
    }

    pub fn a_sym(&self, xi1: f64, xi2: f64) -> f64 {
        (self.k_sym(xi1) * xi1 * xi1 + xi2 * xi2).sqrt()
    }

    pub fn lambda_sym(&self, xi1: f64, xi2: f64) -> f64 {
        self.y_sym(xi1) * self.a_sym(xi1, xi2) / self.j_sym(xi1)
    }

    pub fn j(&self, f: &SpectralField, pow: f64) -> SpectralField {
        f.map_real(|x, _| self.j_sym(x).powf(pow))
    }

    pub fn y(&self, f: &SpectralField, pow: f64) -> SpectralField {
        f.map_real(|x, _| self.y_sym(x).powf(pow))
    }

    pub fn k(&self, f: &SpectralField, pow: f64) -> SpectralField {
        f.map_real(|x, _| self.k_sym(x).powf(pow))
    }

    /// `A^pow`, with negative powers annihilating the zero mode.
    pub fn a(&self, f: &SpectralField, pow: f64) -> SpectralField {
        f.map_real(|x1, x2| {
            let a = self.a_sym(x1, x2);
            if a == 0.0 && pow < 0.0 {
                0.0
            } else {
                a.powf(pow)
            }
        })
    }

    pub fn lam(&self, f: &SpectralField) -> SpectralField {
        f.map_real(|x1, x2| self.lambda_sym(x1, x2))
    }

    /// `∂x⁴`.
    pub fn dx4(&self, f: &SpectralField) -> SpectralField {
        f.map_real(|x, _| x.powi(4))
    }

    /// `∂x²`.
    pub fn dx2(&self, f: &SpectralField) -> SpectralField {
        f.map_real(|x, _| -x * x)
    }

    /// `X = Y^{-2}A^{-2}∂x⁴ q`.
    pub fn x_op(&self, q: &SpectralField) -> SpectralField {
        self.y(&self.a(&self.dx4(q), -2.0), -2.0)
    }

    /// `(p, θ)` from a spectral state.
    pub fn ptheta(&self, s: &SpecState) -> (SpectralField, SpectralField) {
        let p = &s.v.dx() + &self.k(&s.w.dy(), -1.0);
        let theta = self.lam(&s.zeta).without_mean();
        (p, theta)
    }

    /// `(V, ζ)` from `(p, θ)`; the means of `V` and `ζ` are zero.
    pub fn from_ptheta_spec(&self, p: &SpectralField, theta: &SpectralField) -> SpecState {
        let q = self.a(&self.k(p, 1.0), -2.0).scale(-1.0);
        SpecState { v: q.dx(), w: q.dy(), zeta: self.a(&self.k(theta, 1.0), -1.0) }
    }
}

/// `(p, θ)` of a curl-free state.
pub fn to_ptheta(case: CaseTag, s: &State, eps: f64) -> Result<(RealField, RealField)> {
    s.check()?;
    let ops = CaseOps::new(case, eps)?;
    let (p, t) = ops.ptheta(&s.spectral());
    Ok((inverse_transform(&p), inverse_transform(&t)))
}

fn check_zero_mean(name: &str, f: &RealField) -> Result<()> {
    let m = f.mean();
    if m.abs() > 1e-12 * (1.0 + f.max_abs()) {
        return Err(Error::Argument(format!("{name} must have zero mean, got {m:.3e}")));
    }
    Ok(())
}

/// Curl-free state reconstructed from zero-mean `(p, θ)`.
pub fn from_ptheta(case: CaseTag, p: &RealField, theta: &RealField, eps: f64) -> Result<State> {
    if p.grid != theta.grid {
        return Err(Error::Argument("p and theta live on different grids".into()));
    }
    check_zero_mean("p", p)?;
    check_zero_mean("theta", theta)?;
    let ops = CaseOps::new(case, eps)?;
    Ok(ops.from_ptheta_spec(&transform(p), &transform(theta)).to_state())
}

/// Multiplication by a fixed collocated field followed by truncation.
#[derive(Debug, Clone)]
pub struct Multiplier {
    phys: RealField,
}

impl Multiplier {
    pub fn new(f: &SpectralField) -> Self {
        Multiplier { phys: inverse_transform(f) }
    }

    pub fn from_real(f: RealField) -> Self {
        Multiplier { phys: f }
    }

    pub fn apply(&self, g: &SpectralField) -> SpectralField {
        transform(&self.phys.pointwise_mul(&inverse_transform(g))).project()
    }

    pub fn field(&self) -> &RealField {
        &self.phys
    }
}

/// `(2 + (ε/2)ζY_ε^{-1})^{-1}` for a fixed ζ, with the case-2 `Y_ε`.
#[derive(Debug, Clone)]
pub struct Resolvent {
    zeta: Multiplier,
    ops: CaseOps,
    cfg: ResolventConfig,
}

/// Result of a Neumann-series application.
#[derive(Debug, Clone)]
pub struct NeumannOutput {
    pub value: SpectralField,
    pub terms: usize,
    /// Largest measured `‖(ε/4)ζY^{-1}u‖/‖u‖` over the applied terms.
    pub factor: f64,
}

impl Resolvent {
    pub fn new(zeta: &SpectralField, eps: f64, cfg: ResolventConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Resolvent { zeta: Multiplier::new(zeta), ops: CaseOps::new(CaseTag::Case2, eps)?, cfg })
    }

    /// Forward operator `(2 + (ε/2)ζY^{-1}) f` on band-limited fields.
    pub fn forward(&self, f: &SpectralField) -> SpectralField {
        f.scale(2.0).axpy(0.5 * self.ops.eps, &self.zeta.apply(&self.ops.y(f, -1.0)))
    }

    pub fn apply(&self, f: &SpectralField) -> Result<NeumannOutput> {
        let f = f.project();
        let fnorm = f.l2_norm();
        let mut factor: f64 = 0.0;
        if fnorm == 0.0 {
            return Ok(NeumannOutput { value: f, terms: 0, factor });
        }
        let mut term = f.scale(0.5);
        let mut sum = term.clone();
        let q = 0.25 * self.ops.eps;
        for n in 1..=self.cfg.max_terms {
            let tn = term.l2_norm();
            if tn < self.cfg.tol * fnorm {
                return Ok(NeumannOutput { value: sum, terms: n, factor });
            }
            let next = self.zeta.apply(&self.ops.y(&term, -1.0)).scale(-q);
            let ratio = next.l2_norm() / tn;
            factor = factor.max(ratio);
            if ratio >= self.cfg.norm_guard {
                return Err(Error::Guard { factor: ratio, threshold: self.cfg.norm_guard });
            }
            sum = &sum + &next;
            term = next;
        }
        let last = term.l2_norm();
        if last < self.cfg.tol * fnorm {
            Ok(NeumannOutput { value: sum, terms: self.cfg.max_terms, factor })
        } else {
            Err(Error::NonConvergence { terms: self.cfg.max_terms, last })
        }
    }

    /// `Γf = R(ζf)`.
    pub fn gamma_big(&self, f: &SpectralField) -> Result<NeumannOutput> {
        self.apply(&self.zeta.apply(f))
    }

    /// `(1 + (ε/2)ζY^{-1}) g`.
    pub fn lift(&self, g: &SpectralField) -> SpectralField {
        g.axpy(0.5 * self.ops.eps, &self.zeta.apply(&self.ops.y(g, -1.0)))
    }

    /// `(Γf, γf)`.
    pub fn gammas(&self, f: &SpectralField) -> Result<(SpectralField, SpectralField, f64)> {
        let g = self.gamma_big(f)?;
        let small = self.lift(&g.value);
        Ok((g.value, small, g.factor))
    }

    /// `[∂t, Γ]f` given `ζ_t`.
    pub fn dt_gamma_big(&self, zeta_t: &Multiplier, f: &SpectralField) -> Result<(SpectralField, f64)> {
        let a = self.apply(&zeta_t.apply(f))?;
        let gf = self.gamma_big(f)?;
        let inner = zeta_t.apply(&self.ops.y(&gf.value, -1.0)).scale(0.5 * self.ops.eps);
        let b = self.apply(&inner)?;
        Ok((&a.value - &b.value, a.factor.max(gf.factor).max(b.factor)))
    }

    /// `[∂t, γ]f` given `ζ_t`.
    pub fn dt_gamma_small(&self, zeta_t: &Multiplier, f: &SpectralField) -> Result<(SpectralField, f64)> {
        let gf = self.gamma_big(f)?;
        let (dg, fac) = self.dt_gamma_big(zeta_t, f)?;
        let first = zeta_t.apply(&self.ops.y(&gf.value, -1.0)).scale(0.5 * self.ops.eps);
        Ok((&first + &self.lift(&dg), fac.max(gf.factor)))
    }
}

/// Neumann-series resolvent `(2 + (ε/2)ζY_ε^{-1})^{-1} f`.
pub fn resolvent_apply(zeta: &RealField, f: &RealField, eps: f64, cfg: ResolventConfig) -> Result<RealField> {
    if zeta.grid != f.grid {
        return Err(Error::Argument("grid mismatch".into()));
    }
    let r = Resolvent::new(&transform(zeta), eps, cfg)?;
    Ok(inverse_transform(&r.apply(&transform(f))?.value))
}

/// `(Γ_ε f, γ_ε f)`.
pub fn gamma_apply(
    zeta: &RealField,
    f: &RealField,
    eps: f64,
    cfg: ResolventConfig,
) -> Result<(RealField, RealField)> {
    if zeta.grid != f.grid {
        return Err(Error::Argument("grid mismatch".into()));
    }
    let r = Resolvent::new(&transform(zeta), eps, cfg)?;
    let (big, small, _) = r.gammas(&transform(f))?;
    Ok((inverse_transform(&big), inverse_transform(&small)))
}

/// Collocated coefficient functions `F(ζ) = (1+εζ/2)ζ/(2+εζ/2)` and
/// `G(ζ) = ζ/(2+εζ/2)` with the derivative `F'(ζ)`.
pub fn case1_coefficients(zeta: &RealField, eps: f64) -> Result<(RealField, RealField, RealField)> {
    let h = 0.5 * eps;
    if zeta.values.iter().any(|z| (2.0 + h * z).abs() < 0.5) {
        return Err(Error::Numerical {
            time: f64::NAN,
            msg: "2 + (eps/2) zeta too close to zero".into(),
        });
    }
    let f = zeta.map(|z| (1.0 + h * z) * z / (2.0 + h * z));
    let g = zeta.map(|z| z / (2.0 + h * z));
    let df = zeta.map(|z| {
        let d = 2.0 + h * z;
        ((1.0 + 2.0 * h * z) * d - h * (1.0 + h * z) * z) / (d * d)
    });
    Ok((f, g, df))
}

/// `p`, `θ` and, after [`to_tilde`], the good unknowns.
#[derive(Debug, Clone)]
pub struct GoodUnknowns {
    pub p: RealField,
    pub theta: RealField,
    pub p_tilde: Option<RealField>,
    pub theta_tilde: Option<RealField>,
    pub case_tag: CaseTag,
    pub guard_factor: Option<f64>,
}

/// The nonlocal coefficient of the quartic correction: `F·X` in case 1,
/// `γ X` in case 2.
pub(crate) enum Corrector {
    Pointwise(Multiplier),
    Resolvent(Resolvent),
}

impl Corrector {
    pub(crate) fn new(ops: &CaseOps, zeta: &SpectralField, cfg: ResolventConfig) -> Result<Self> {
        match ops.case {
            CaseTag::Case1 => {
                let (f, _, _) = case1_coefficients(&inverse_transform(zeta), ops.eps)?;
                Ok(Corrector::Pointwise(Multiplier::new(&transform(&f).project())))
            }
            _ => Ok(Corrector::Resolvent(Resolvent::new(zeta, ops.eps, cfg)?)),
        }
    }

    pub(crate) fn apply(&self, x: &SpectralField) -> Result<(SpectralField, f64)> {
        match self {
            Corrector::Pointwise(m) => Ok((m.apply(x), 0.0)),
            Corrector::Resolvent(r) => {
                let (_, small, fac) = r.gammas(x)?;
                Ok((small, fac))
            }
        }
    }
}

/// Spectral parts shared by the tilde construction and its residual.
pub(crate) struct TildeParts {
    pub p: SpectralField,
    pub theta: SpectralField,
    pub p_tilde: SpectralField,
    pub theta_tilde: SpectralField,
    pub factor: f64,
}

pub(crate) fn tilde_spec(ops: &CaseOps, s: &SpecState, cfg: ResolventConfig) -> Result<TildeParts> {
    let eps = ops.eps;
    let (p, theta) = ops.ptheta(s);
    let v = Multiplier::new(&s.v);
    let w = Multiplier::new(&s.w);
    let z = Multiplier::new(&s.zeta);
    let vgrad = |f: &SpectralField| &v.apply(&f.dx()) + &w.apply(&f.dy());

    let kp = ops.k(&p, 1.0);
    let kth = ops.k(&theta, 1.0);
    let corr = Corrector::new(ops, &s.zeta, cfg)?;
    let (cx, factor) = corr.apply(&ops.x_op(&p))?;

    let inner_p = &vgrad(&ops.a(&kth, -1.0)) + &z.apply(&kp).scale(0.5);
    let p_tilde = p.axpy(eps, &ops.j(&inner_p, -1.0)).axpy(-eps * eps / 6.0, &cx);

    let inner_t = &vgrad(&kp) - &z.apply(&ops.a(&kth, 1.0)).scale(0.5);
    let theta_tilde = theta.axpy(-eps, &ops.j(&ops.a(&inner_t, -1.0), -1.0));
    Ok(TildeParts { p, theta, p_tilde, theta_tilde, factor })
}

/// Good unknowns `(p̃, θ̃)`.
pub fn to_tilde(case: CaseTag, s: &State, eps: f64, cfg: ResolventConfig) -> Result<GoodUnknowns> {
    s.check()?;
    let ops = CaseOps::new(case, eps)?;
    let t = tilde_spec(&ops, &s.spectral(), cfg)?;
    Ok(GoodUnknowns {
        p: inverse_transform(&t.p),
        theta: inverse_transform(&t.theta),
        p_tilde: Some(inverse_transform(&t.p_tilde)),
        theta_tilde: Some(inverse_transform(&t.theta_tilde)),
        case_tag: case,
        guard_factor: (case == CaseTag::Case2).then_some(t.factor),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{lambda1, GridSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> GridSpec {
        GridSpec::square(n).unwrap()
    }

    fn random_curl_free(case: CaseTag, g: GridSpec, eps: f64, amp: f64, seed: u64) -> State {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kmax = g.nx / 6;
        let p = crate::spectral::random_band_limited(g, kmax, kmax, &mut rng);
        let t = crate::spectral::random_band_limited(g, kmax, kmax, &mut rng);
        let ops = CaseOps::new(case, eps).unwrap();
        let s = ops.from_ptheta_spec(&p, &t);
        let scale = amp / s.to_state().max_abs();
        SpecState { v: s.v.scale(scale), w: s.w.scale(scale), zeta: s.zeta.scale(scale) }.to_state()
    }

    #[test]
    fn ptheta_examples() {
        let g = grid(32);
        let (p, t) = to_ptheta(CaseTag::Case1, &State::zeros(g), 0.1).unwrap();
        assert_eq!(p.max_abs() + t.max_abs(), 0.0);

        let mut s = State::zeros(g);
        s.v = RealField::from_fn(g, |x, _| x.cos());
        let (p, t) = to_ptheta(CaseTag::Case1, &s, 0.1).unwrap();
        let e = RealField::from_fn(g, |x, _| -x.sin());
        assert!((&p - &e).max_abs() < 1e-13);
        assert!(t.max_abs() < 1e-14);

        let mut s = State::zeros(g);
        s.zeta = RealField::from_fn(g, |x, _| (2.0 * x).cos());
        let (_, t) = to_ptheta(CaseTag::Case1, &s, 0.3).unwrap();
        let lam = 2.0 / 1.4f64.sqrt();
        assert!((lam - 1.69031).abs() < 1e-5);
        assert!((lambda1(0.3, 2.0, 0.0) - lam).abs() < 1e-14);
        let e = RealField::from_fn(g, |x, _| lam * (2.0 * x).cos());
        assert!((&t - &e).max_abs() < 1e-13);
    }

    #[test]
    fn from_ptheta_single_mode() {
        let g = grid(32);
        let p = RealField::from_fn(g, |x, _| x.cos());
        let s = from_ptheta(CaseTag::Case1, &p, &RealField::zeros(g), 0.1).unwrap();
        let e = RealField::from_fn(g, |x, _| x.sin());
        assert!((&s.v - &e).max_abs() < 1e-13);
        assert!(s.w.max_abs() < 1e-14 && s.zeta.max_abs() < 1e-14);
        assert!(from_ptheta(CaseTag::Case1, &RealField::constant(g, 1.0), &RealField::zeros(g), 0.1).is_err());
        let z = from_ptheta(CaseTag::Case2, &RealField::zeros(g), &RealField::zeros(g), 0.1).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn round_trip_both_cases() {
        let g = grid(48);
        for case in [CaseTag::Case1, CaseTag::Case2] {
            let s = random_curl_free(case, g, 0.1, 1.0, 7);
            let (p, t) = to_ptheta(case, &s, 0.1).unwrap();
            let back = from_ptheta(case, &p, &t, 0.1).unwrap();
            for (a, b) in [(&s.v, &back.v), (&s.w, &back.w), (&s.zeta, &back.zeta)] {
                assert!((a - b).max_abs() < 1e-12 * a.max_abs().max(1e-300));
            }
            assert!(crate::systems::curl_residual(&back, 0.1, false) < 1e-12);
        }
    }

    #[test]
    fn resolvent_zero_zeta_halves() {
        let g = grid(16);
        let f = RealField::from_fn(g, |x, y| (x + 2.0 * y).sin());
        let r = resolvent_apply(&RealField::zeros(g), &f, 0.1, ResolventConfig::default()).unwrap();
        assert!((&r - &f.scale(0.5)).max_abs() < 1e-15);
        let (big, small) = gamma_apply(&RealField::zeros(g), &f, 0.1, ResolventConfig::default()).unwrap();
        assert_eq!(big.max_abs() + small.max_abs(), 0.0);
    }

    #[test]
    fn resolvent_constant_zeta_closed_form() {
        let g = grid(32);
        let (c, eps) = (0.8, 0.3);
        let f = RealField::from_fn(g, |x, y| (3.0 * x + y).cos());
        let r = resolvent_apply(&RealField::constant(g, c), &f, eps, ResolventConfig::default()).unwrap();
        let y = 1.0 + eps * 9.0 / 6.0;
        let gain = 1.0 / (2.0 + 0.5 * eps * c / y);
        assert!((&r - &f.scale(gain)).max_abs() < 1e-13);
    }

    #[test]
    fn resolvent_guard_refuses_large_zeta() {
        let g = grid(16);
        let f = RealField::from_fn(g, |x, _| x.cos());
        let err = resolvent_apply(&RealField::constant(g, 40.0), &f, 0.1, ResolventConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::Guard { .. }));
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn tilde_examples() {
        let g = grid(32);
        let z = to_tilde(CaseTag::Case1, &State::zeros(g), 0.1, ResolventConfig::default()).unwrap();
        assert_eq!(z.p_tilde.unwrap().max_abs() + z.theta_tilde.unwrap().max_abs(), 0.0);

        let mut s = State::zeros(g);
        s.v = RealField::from_fn(g, |x, _| x.cos());
        let u = to_tilde(CaseTag::Case1, &s, 0.1, ResolventConfig::default()).unwrap();
        assert!((&u.p_tilde.unwrap() - &u.p).max_abs() < 1e-15);
        assert!(u.theta_tilde.unwrap().mean().abs() < 1e-15);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use crate::spectral::{random_band_limited, GridSpec};
    use crate::systems::curl_residual;
    use crate::verify::random_curl_free_state;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn case_of(i: usize) -> CaseTag {
        [CaseTag::Case1, CaseTag::Case2][i]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn ptheta_round_trip(seed in 0u64..10_000, eps in 0.001f64..0.9, ci in 0usize..2, amp in 0.01f64..2.0) {
            let case = case_of(ci);
            let s = random_curl_free_state(case, GridSpec::square(24).unwrap(), eps, amp, seed).unwrap();
            let (p, t) = to_ptheta(case, &s, eps).unwrap();
            let back = from_ptheta(case, &p, &t, eps).unwrap();
            for (a, b) in [(&s.v, &back.v), (&s.w, &back.w), (&s.zeta, &back.zeta)] {
                prop_assert!((a - b).max_abs() <= 1e-12 * amp);
            }
        }

        #[test]
        fn from_ptheta_is_curl_free(seed in 0u64..10_000, eps in 0.001f64..0.9, ci in 0usize..2) {
            let g = GridSpec::square(24).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = inverse_transform(&random_band_limited(g, 6, 6, &mut rng));
            let t = inverse_transform(&random_band_limited(g, 6, 6, &mut rng));
            let s = from_ptheta(case_of(ci), &p, &t, eps).unwrap();
            let scale = s.v.l2_norm() + s.w.l2_norm();
            prop_assert!(curl_residual(&s, eps, false) <= 1e-13 * scale.max(1.0));
        }

        #[test]
        fn gamma_is_self_adjoint(seed in 0u64..10_000, eps in 0.001f64..0.9, amp in 0.0f64..1.5) {
            let g = GridSpec::square(24).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = random_band_limited(g, 3, 3, &mut rng);
            let z = z.scale(amp / inverse_transform(&z).max_abs());
            let f = random_band_limited(g, 3, 3, &mut rng);
            let h = random_band_limited(g, 3, 3, &mut rng);
            let r = Resolvent::new(&z, eps, ResolventConfig::default()).unwrap();
            let (bf, sf, _) = r.gammas(&f).unwrap();
            let (bh, sh, _) = r.gammas(&h).unwrap();
            let n = f.l2_norm() * h.l2_norm();
            prop_assert!((sf.inner(&h) - f.inner(&sh)).abs() <= 1e-10 * n);
            prop_assert!((bf.inner(&h) - f.inner(&bh)).abs() <= 1e-10 * n);
        }
    }
}
