//! Classical RK4 time stepping, the diagnostics schedule and the long-time
//! sweep over ε.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::energy::{energy, tilde_energy_spectral, EnergyReport, DEFAULT_S};
use crate::error::{Error, Result};
use crate::spectral::{
    lambda1, lambda2, lambda_anisotropic, lambda_general, random_band_limited, transform, GridSpec,
    RealField, SpectralField,
};
use crate::systems::{
    check_system_params, consistency_residual, curl_residual, rhs, rhs_linear, rhs_spectral, validate_params, CaseTag, ModelParams, SpecState,
    State, System, Tendency, CONSISTENCY_N,
};
use crate::unknowns::{tilde_spec, CaseOps, ResolventConfig};

/// One classical RK4 step.
pub fn step<F>(s: &State, dt: f64, f: F) -> Result<State>
where
    F: Fn(&State) -> Result<Tendency>,
{
    let k1 = f(s)?;
    let k2 = f(&s.advance(0.5 * dt, &k1))?;
    let k3 = f(&s.advance(0.5 * dt, &k2))?;
    let k4 = f(&s.advance(dt, &k3))?;
    let c = dt / 6.0;
    let mut out = s.clone();
    for (o, (a, (b, (d, e)))) in [
        (&mut out.v, (&k1.dv, (&k2.dv, (&k3.dv, &k4.dv)))),
        (&mut out.w, (&k1.dw, (&k2.dw, (&k3.dw, &k4.dw)))),
        (&mut out.zeta, (&k1.dzeta, (&k2.dzeta, (&k3.dzeta, &k4.dzeta)))),
    ] {
        for (i, x) in o.values.iter_mut().enumerate() {
            *x += c * (a.values[i] + 2.0 * b.values[i] + 2.0 * d.values[i] + e.values[i]);
        }
    }
    out.time = s.time + dt;
    if !out.is_finite() {
        return Err(Error::Numerical { time: out.time, msg: "blow-up: non-finite state".into() });
    }
    Ok(out)
}

/// RK4 step on spectral coefficients.
pub fn step_spectral<F>(s: &SpecState, dt: f64, f: F) -> SpecState
where
    F: Fn(&SpecState) -> SpecState,
{
    let k1 = f(s);
    let k2 = f(&s.axpy(0.5 * dt, &k1));
    let k3 = f(&s.axpy(0.5 * dt, &k2));
    let k4 = f(&s.axpy(dt, &k3));
    let c = dt / 6.0;
    s.axpy(c, &k1).axpy(2.0 * c, &k2).axpy(2.0 * c, &k3).axpy(c, &k4)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtSpec {
    Fixed(f64),
    /// `cfl / max_ξ Λ(ξ)`.
    Auto { cfl: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TEnd {
    Fixed(f64),
    T0OverEps(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Zero,
    Gaussian,
    Trig,
    Random,
}

impl std::str::FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "zero" => Ok(Family::Zero),
            "gaussian" => Ok(Family::Gaussian),
            "trig" => Ok(Family::Trig),
            "random" => Ok(Family::Random),
            _ => Err(format!("unknown initial data family `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialData {
    pub family: Family,
    /// Largest absolute sample of `(v, w, ζ)`.
    pub amplitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: System,
    pub params: ModelParams,
    /// Reference grid; WTB1 runs stretch `ly` by `ε^{1/2}`.
    pub grid: GridSpec,
    pub dt: DtSpec,
    pub t_end: TEnd,
    pub diag_every: usize,
    pub initial: InitialData,
    pub sobolev_s: f64,
    pub resolvent: ResolventConfig,
    /// Evolve the linear part only.
    pub linear: bool,
    /// Evaluate the consistency residual at diagnostics times (WTB1 only).
    pub consistency: bool,
    /// Build the good unknowns at diagnostics times (case systems only).
    pub tilde: bool,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(system: System, params: ModelParams, grid: GridSpec) -> Self {
        RunConfig {
            system,
            params,
            grid,
            dt: DtSpec::Auto { cfl: 1.0 },
            t_end: TEnd::Fixed(1.0),
            diag_every: 10,
            initial: InitialData { family: Family::Trig, amplitude: 0.1, seed: 0 },
            sobolev_s: DEFAULT_S,
            resolvent: ResolventConfig::default(),
            linear: false,
            consistency: false,
            tilde: true,
            out_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.resolvent.validate()?;
        validate_params(&self.params)?;
        check_system_params(self.system, &self.params)?;
        if let DtSpec::Fixed(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Validation(format!("dt must be positive, got {dt}")));
            }
        }
        if let DtSpec::Auto { cfl } = self.dt {
            if !(cfl > 0.0) {
                return Err(Error::Validation(format!("cfl must be positive, got {cfl}")));
            }
        }
        let t = self.t_end_value();
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Validation(format!("t_end must be nonnegative, got {t}")));
        }
        if !(self.initial.amplitude >= 0.0) {
            return Err(Error::Validation("amplitude must be nonnegative".into()));
        }
        if self.diag_every == 0 {
            return Err(Error::Validation("diag_every must be at least 1".into()));
        }
        if self.sobolev_s < 0.0 {
            return Err(Error::Validation("sobolev_s must be nonnegative".into()));
        }
        Ok(())
    }

    /// Grid actually used by the run.
    pub fn run_grid(&self) -> Result<GridSpec> {
        match self.system {
            System::Wtb1 => self.grid.with_ly(self.grid.ly * self.params.eps.sqrt()),
            _ => Ok(self.grid),
        }
    }

    pub fn t_end_value(&self) -> f64 {
        match self.t_end {
            TEnd::Fixed(t) => t,
            TEnd::T0OverEps(t0) => t0 / self.params.eps,
        }
    }

    pub fn dt_value(&self) -> Result<f64> {
        match self.dt {
            DtSpec::Fixed(dt) => Ok(dt),
            DtSpec::Auto { cfl } => Ok(cfl / max_frequency(self.system, &self.params, &self.run_grid()?)),
        }
    }
}

/// Linear frequency of the system at a wavevector.
pub fn frequency(system: System, p: &ModelParams, xi1: f64, xi2: f64) -> f64 {
    match system {
        System::Case1 => lambda1(p.eps, xi1, xi2),
        System::Case2 => lambda2(p.eps, xi1, xi2),
        System::Wtb2 => lambda_general(&p.coeffs, p.eps, xi1, xi2),
        System::Wtb1 => lambda_anisotropic(&p.coeffs, p.eps, xi1, xi2),
    }
}

/// Spectral radius of the linear operator on the grid.
pub fn max_frequency(system: System, p: &ModelParams, grid: &GridSpec) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            m = m.max(frequency(system, p, grid.xi1(i), grid.xi2(j)));
        }
    }
    m.max(f64::MIN_POSITIVE)
}

fn trig_profile(grid: GridSpec) -> (RealField, RealField) {
    let (kx, ky) = (std::f64::consts::TAU / grid.lx, std::f64::consts::TAU / grid.ly);
    let zeta = RealField::from_fn(grid, |x, y| {
        (kx * x).cos() + 0.5 * (kx * x + 2.0 * ky * y).cos() + 0.3 * (2.0 * kx * x - ky * y).sin()
    });
    let phi = RealField::from_fn(grid, |x, y| (kx * x).sin() + 0.4 * (2.0 * kx * x + ky * y).cos());
    (zeta, phi)
}

fn gaussian(grid: GridSpec) -> RealField {
    let (cx, cy) = (0.5 * grid.lx, 0.5 * grid.ly);
    let (sx, sy) = (grid.lx / 10.0, grid.ly / 10.0);
    RealField::from_fn(grid, |x, y| {
        let r = ((x - cx) / sx).powi(2) + ((y - cy) / sy).powi(2);
        (-0.5 * r).exp()
    })
}

/// Curl-free initial state of the configured family, band-limited and
/// normalized to the requested amplitude.
pub fn initial_state(cfg: &RunConfig) -> Result<State> {
    let grid = cfg.run_grid()?;
    let eps = cfg.params.eps;
    let amp = cfg.initial.amplitude;
    if cfg.initial.family == Family::Zero || amp == 0.0 {
        return Ok(State::zeros(grid));
    }
    let wscale = if cfg.system == System::Wtb1 { eps.sqrt() } else { 1.0 };
    let from_potential = |zeta: SpectralField, phi: SpectralField| SpecState {
        v: phi.dx(),
        w: phi.dy().scale(wscale),
        zeta,
    };
    let spec = match cfg.initial.family {
        Family::Trig => {
            let (z, phi) = trig_profile(grid);
            from_potential(transform(&z), transform(&phi))
        }
        Family::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.initial.seed);
            let (kx, ky) = (grid.nx / 6, grid.ny / 6);
            let z = random_band_limited(grid, kx, ky, &mut rng);
            let phi = random_band_limited(grid, kx, ky, &mut rng);
            from_potential(z, phi)
        }
        Family::Gaussian => {
            let z = transform(&gaussian(grid)).project().without_mean();
            match cfg.system.case() {
                CaseTag::General => {
                    let phi = z.map_real(|a, b| {
                        let r = (a * a + b * b).sqrt();
                        if r == 0.0 {
                            0.0
                        } else {
                            1.0 / r
                        }
                    });
                    from_potential(z, phi)
                }
                case => {
                    let ops = CaseOps::new(case, eps)?;
                    let theta = ops.lam(&z);
                    ops.from_ptheta_spec(&theta, &theta)
                }
            }
        }
        Family::Zero => unreachable!(),
    };
    let spec = SpecState { v: spec.v.project(), w: spec.w.project(), zeta: spec.zeta.project() };
    let s = spec.to_state();
    let m = s.max_abs();
    if m == 0.0 {
        return Ok(s);
    }
    Ok(s.scale(amp / m))
}

/// Diagnostics at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub energy: EnergyReport,
    pub curl_res: f64,
    pub consistency_res: Option<f64>,
    pub guard_factor: Option<f64>,
}

/// Evaluate the diagnostics on a snapshot.
pub fn diagnostics(cfg: &RunConfig, s: &State) -> Result<DiagnosticsRecord> {
    let eps = cfg.params.eps;
    let case = cfg.system.case();
    let mut en = energy(case, s, cfg.sobolev_s, eps);
    let mut guard_factor = None;
    if cfg.tilde && case != CaseTag::General {
        let ops = CaseOps::new(case, eps)?;
        let t = tilde_spec(&ops, &s.spectral(), cfg.resolvent)?;
        let jb = if case == CaseTag::Case1 { 1.0 / 3.0 } else { 0.5 };
        en.e_tilde_high = Some(tilde_energy_spectral(jb, &t.p_tilde, &t.theta_tilde, cfg.sobolev_s, eps));
        if case == CaseTag::Case2 {
            guard_factor = Some(t.factor);
        }
    }
    let consistency_res = if cfg.consistency && cfg.system == System::Wtb1 {
        let r = consistency_residual(s, &cfg.params, CONSISTENCY_N)?;
        Some(r.iter().map(|x| x * x).sum::<f64>().sqrt())
    } else {
        None
    };
    Ok(DiagnosticsRecord {
        time: s.time,
        energy: en,
        curl_res: curl_residual(s, eps, cfg.system == System::Wtb1),
        consistency_res,
        guard_factor,
    })
}

/// Records, final state and the error that stopped the run, if any.
#[derive(Debug)]
pub struct RunOutput {
    pub records: Vec<DiagnosticsRecord>,
    pub state: State,
    pub steps: usize,
    pub dt: f64,
    pub error: Option<Error>,
}

/// Evaluator used by [`integrate`].
pub fn evaluator(cfg: &RunConfig) -> impl Fn(&State) -> Result<Tendency> + '_ {
    move |s: &State| {
        if cfg.linear {
            rhs_linear(cfg.system, s, &cfg.params)
        } else {
            rhs(cfg.system, s, &cfg.params)
        }
    }
}

/// Integrate from the configured initial data.
pub fn integrate(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let s0 = initial_state(cfg)?;
    integrate_from(cfg, s0)
}

/// Integrate from a given state to `t_end`.
pub fn integrate_from(cfg: &RunConfig, s0: State) -> Result<RunOutput> {
    cfg.validate()?;
    s0.check()?;
    let t_end = cfg.t_end_value();
    let dt_max = cfg.dt_value()?;
    let steps = if t_end == 0.0 { 0 } else { (t_end / dt_max).ceil() as usize };
    let dt = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    let start = s0.time;
    let f = |s: &SpecState| rhs_spectral(cfg.system, s, &cfg.params, !cfg.linear);
    let physical = |sp: &SpecState, t: f64| {
        let mut st = sp.to_state();
        st.time = t;
        st
    };
    let mut spec = s0.spectral();
    let mut state = s0;
    let mut records = Vec::with_capacity(steps / cfg.diag_every + 2);
    for n in 0..steps {
        let (diag, next) = if n % cfg.diag_every == 0 {
            let (d, nx) = rayon::join(|| diagnostics(cfg, &state), || step_spectral(&spec, dt, f));
            (Some(d), nx)
        } else {
            (None, step_spectral(&spec, dt, f))
        };
        if let Some(d) = diag {
            match d {
                Ok(r) => records.push(r),
                Err(e) => return Ok(RunOutput { records, state, steps: n, dt, error: Some(e) }),
            }
        }
        let t = start + (n + 1) as f64 * dt;
        if !next.is_finite() {
            let e = Error::Numerical { time: t, msg: "blow-up: non-finite state".into() };
            return Ok(RunOutput { records, state, steps: n, dt, error: Some(e) });
        }
        spec = next;
        if (n + 1) % cfg.diag_every == 0 || n + 1 == steps {
            state = physical(&spec, t);
        }
    }
    match diagnostics(cfg, &state) {
        Ok(r) => records.push(r),
        Err(e) => return Ok(RunOutput { records, state, steps, dt, error: Some(e) }),
    }
    Ok(RunOutput { records, state, steps, dt, error: None })
}

/// One row of a long-time sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub eps: f64,
    pub t_end: f64,
    pub steps: usize,
    pub dt: f64,
    /// `max_t E_s(t)/E_s(0)`.
    pub max_ratio: f64,
    pub final_ratio: f64,
    pub error: Option<String>,
}

/// Largest value of `e_total(t)/e_total(0)` over the records.
pub fn growth_ratio(records: &[DiagnosticsRecord]) -> (f64, f64) {
    let Some(first) = records.first() else { return (1.0, 1.0) };
    let e0 = first.energy.e_total;
    if e0 == 0.0 {
        return (1.0, 1.0);
    }
    let max = records.iter().map(|r| r.energy.e_total / e0).fold(f64::NEG_INFINITY, f64::max);
    let last = records.last().map(|r| r.energy.e_total / e0).unwrap_or(1.0);
    (max, last)
}

/// Worker count from `WTBOUSS_THREADS`, if set.
pub fn thread_cap() -> Option<usize> {
    std::env::var("WTBOUSS_THREADS").ok().and_then(|v| v.trim().parse().ok()).filter(|&n| n > 0)
}

/// Run the configuration once per ε in parallel. The initial profile is
/// shared across entries; only ε changes.
pub fn sweep_runs(cfg: &RunConfig, eps_list: &[f64]) -> Result<Vec<(RunConfig, RunOutput)>> {
    if eps_list.is_empty() {
        return Err(Error::Validation("empty eps list".into()));
    }
    let configs = eps_list
        .iter()
        .map(|&eps| {
            let mut c = cfg.clone();
            c.params.eps = eps;
            c.validate().map(|_| c)
        })
        .collect::<Result<Vec<_>>>()?;
    let run = || configs.into_par_iter().map(|c| integrate(&c).map(|o| (c, o))).collect();
    match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Internal(e.to_string()))?
            .install(run),
        None => run(),
    }
}

/// Summary row of one sweep entry.
pub fn sweep_row(c: &RunConfig, out: &RunOutput) -> SweepRow {
    let (max_ratio, final_ratio) = growth_ratio(&out.records);
    SweepRow {
        eps: c.params.eps,
        t_end: c.t_end_value(),
        steps: out.steps,
        dt: out.dt,
        max_ratio,
        final_ratio,
        error: out.error.as_ref().map(|e| e.to_string()),
    }
}

/// `max_t E_s(t)/E_s(0)` over `[0, t_end]` for each ε.
pub fn long_time_sweep(cfg: &RunConfig, eps_list: &[f64]) -> Result<Vec<SweepRow>> {
    Ok(sweep_runs(cfg, eps_list)?.iter().map(|(c, o)| sweep_row(c, o)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::lambda1;

    fn linear_cfg(dt: f64) -> RunConfig {
        let mut c = RunConfig::new(System::Case1, ModelParams::case1(0.1), GridSpec::square(16).unwrap());
        c.dt = DtSpec::Fixed(dt);
        c.linear = true;
        c.tilde = false;
        c
    }

    #[test]
    fn zero_state_stays_zero() {
        let c = linear_cfg(0.1);
        let s = State::zeros(c.grid);
        let out = step(&s, 0.1, evaluator(&c)).unwrap();
        assert_eq!(out.max_abs(), 0.0);
        assert!((out.time - 0.1).abs() < 1e-15);
    }

    fn period_error(dt_target: f64) -> f64 {
        let mut c = linear_cfg(dt_target);
        let g = c.grid;
        let lam = lambda1(0.1, 2.0, 1.0);
        let period = std::f64::consts::TAU / lam;
        let n = (period / dt_target).ceil();
        c.dt = DtSpec::Fixed(period / n);
        c.t_end = TEnd::Fixed(period);
        let ops = CaseOps::new(CaseTag::Case1, 0.1).unwrap();
        let p = transform(&RealField::from_fn(g, |x, y| (2.0 * x + y).cos()));
        let s0 = ops.from_ptheta_spec(&p, &SpectralField::zeros(g)).to_state();
        let out = integrate_from(&c, s0.clone()).unwrap();
        (&out.state.v - &s0.v).max_abs().max((&out.state.zeta - &s0.zeta).max_abs())
    }

    #[test]
    fn rk4_order_over_one_period() {
        let e1 = period_error(0.04);
        let e2 = period_error(0.02);
        let slope = (e1 / e2).log2();
        assert!((slope - 4.0).abs() < 0.2, "slope {slope}");
    }

    #[test]
    fn time_reversal() {
        let c = linear_cfg(0.05);
        let s0 = initial_state(&RunConfig { initial: InitialData { family: Family::Trig, amplitude: 1.0, seed: 0 }, ..c.clone() }).unwrap();
        let fwd = evaluator(&c);
        let back = |s: &State| {
            let t = fwd(s)?;
            Ok(Tendency { dv: t.dv.scale(-1.0), dw: t.dw.scale(-1.0), dzeta: t.dzeta.scale(-1.0) })
        };
        let mut errs = Vec::new();
        for dt in [0.1, 0.05] {
            let s1 = step(&s0, dt, &fwd).unwrap();
            let s2 = step(&s1, dt, back).unwrap();
            errs.push((&s2.zeta - &s0.zeta).max_abs() + (&s2.v - &s0.v).max_abs());
        }
        assert!(errs[0] < 1e-4);
        assert!(errs[0] / errs[1] > 16.0);
    }

    #[test]
    fn t_end_zero_gives_single_record() {
        let mut c = linear_cfg(0.1);
        c.t_end = TEnd::Fixed(0.0);
        let out = integrate(&c).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].time, 0.0);
    }

    #[test]
    fn initial_families_are_curl_free() {
        for sys in [System::Case1, System::Case2, System::Wtb2, System::Wtb1] {
            for fam in [Family::Trig, Family::Random, Family::Gaussian] {
                let p = match sys {
                    System::Case2 => ModelParams::case2(0.1),
                    _ => ModelParams::case1(0.1),
                };
                let mut c = RunConfig::new(sys, p, GridSpec::square(32).unwrap());
                c.initial = InitialData { family: fam, amplitude: 0.2, seed: 3 };
                let s = initial_state(&c).unwrap();
                assert!((s.max_abs() - 0.2).abs() < 1e-14);
                assert!(curl_residual(&s, 0.1, sys == System::Wtb1) < 1e-13);
            }
        }
    }

    fn cfl_run(cfl: f64) -> State {
        let mut c = RunConfig::new(System::Case2, ModelParams::case2(0.1), GridSpec::square(16).unwrap());
        c.dt = DtSpec::Auto { cfl };
        c.t_end = TEnd::Fixed(0.5);
        c.tilde = false;
        integrate(&c).unwrap().state
    }

    #[test]
    fn halving_cfl_converges_at_integrator_order() {
        let (a, b, c) = (cfl_run(1.0), cfl_run(0.5), cfl_run(0.25));
        let d = |x: &State, y: &State| (&x.zeta - &y.zeta).max_abs() + (&x.v - &y.v).max_abs() + (&x.w - &y.w).max_abs();
        let (d1, d2) = (d(&a, &b), d(&b, &c));
        assert!(d1 < 1e-4, "{d1}");
        assert!(d1 / d2 > 12.0, "{d1} {d2}");
    }

    #[test]
    fn single_entry_sweep_matches_integrate() {
        let mut c = RunConfig::new(System::Case1, ModelParams::case1(0.05), GridSpec::square(16).unwrap());
        c.t_end = TEnd::Fixed(0.3);
        let direct = integrate(&c).unwrap();
        let swept = sweep_runs(&c, &[0.05]).unwrap();
        assert_eq!(swept.len(), 1);
        let out = &swept[0].1;
        assert_eq!(out.steps, direct.steps);
        assert_eq!(out.state, direct.state);
        assert_eq!(out.records.len(), direct.records.len());
    }

    #[test]
    fn sweep_zero_amplitude_ratios_are_one() {
        let mut c = linear_cfg(0.1);
        c.initial.amplitude = 0.0;
        c.t_end = TEnd::Fixed(0.5);
        let rows = long_time_sweep(&c, &[0.1, 0.05]).unwrap();
        assert!(rows.iter().all(|r| r.max_ratio == 1.0));
    }
}
