//! Batch front end: flat config files, experiment dispatch, CSV and plot
//! script emission.
//!
//! Config keys (`key = value`, `#` starts a comment):
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `system` | required | `wtb1`, `wtb2`, `case1`, `case2` |
//! | `eps` | required | ε in (0, 1) |
//! | `nx`, `ny` | required | grid points |
//! | `lx`, `ly` | `2π` | periods |
//! | `dealias` | `2/3` | kept fraction of the half lattice |
//! | `a` .. `g` | case values | coefficients, required for `wtb1`/`wtb2` |
//! | `dt` | `auto` | step or `auto` |
//! | `cfl` | `1` | used by `dt = auto` |
//! | `t_end` | `1` | end time or `T0_over_eps` |
//! | `t0` | `1` | used by `t_end = T0_over_eps` |
//! | `diag_every` | `10` | steps between records |
//! | `family` | `trig` | `zero`, `gaussian`, `trig`, `random` |
//! | `amplitude` | `0.1` | sup norm of the initial data |
//! | `seed` | `0` | generator seed, `--seed` wins |
//! | `sobolev_s` | `4` | Sobolev index of the energies |
//! | `max_terms`, `tol`, `norm_guard` | `64`, `1e-13`, `0.5` | Neumann series |
//! | `linear` | `false` | evolve the linear part only |
//! | `consistency` | `false` | consistency residual in diagnostics |
//! | `tilde` | `true` | good-unknown energy in diagnostics |
//! | `eps_list` | `0.1, 0.05, 0.025` | sweep and consistency ε values |
//! | `modes` | ten low modes | dispersion modes `k1:k2, ...` |
//! | `dispersion_dt` | `1e-3` | dispersion step |
//! | `samples` | `100` | verification samples |
//! | `lemmas` | `all` | lemma names or `all` |
//! | `out_dir` | `out` | output directory when `--out` is not given |
//! | `threads` | all cores | worker cap, `WTBOUSS_THREADS` wins |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

use crate::error::{Error, Result};
use crate::evolve::{integrate, sweep_row, sweep_runs, DiagnosticsRecord, DtSpec, Family, RunConfig, TEnd};
use crate::spectral::{resample, Coefficients, GridSpec};
use crate::systems::{consistency_residual, CaseTag, ModelParams, SpecState, System, CONSISTENCY_N};
use crate::unknowns::ResolventConfig;
use crate::verify::{
    dispersion_modes, equivalence_check, lemma_sampler, operator_samples, ptheta_sides, random_curl_free_state,
    sample_seed, tilde_residual, LemmaId,
};

/// Version string written in the first line of every CSV.
pub const CSV_VERSION: &str = "# wtbouss-csv v1";

pub const DIAGNOSTICS_HEADER: &str =
    "time,e_total,e_low,e_high,e_tilde_high,curl_res,consistency_res,guard_factor";
pub const SUMMARY_HEADER: &str = "eps,t_end,steps,dt,max_ratio,final_ratio,error";
pub const DISPERSION_HEADER: &str = "system,eps,k1,k2,predicted,measured,rel_err";
pub const CONSISTENCY_HEADER: &str = "eps,r_v,r_w,r_zeta,total,ratio";
pub const VERIFY_HEADER: &str = "check,eps,value,threshold,pass";

const DEFAULT_MODES: [(i64, i64); 10] =
    [(1, 0), (2, 0), (0, 1), (0, 3), (1, 1), (2, 1), (1, 2), (3, 1), (1, 3), (4, 2)];

const KEYS: [&str; 36] = [
    "system", "eps", "nx", "ny", "lx", "ly", "dealias", "a", "b", "c", "d", "e", "f", "g", "dt", "cfl", "t_end",
    "t0", "diag_every", "family", "amplitude", "seed", "sobolev_s", "max_terms", "tol", "norm_guard", "linear",
    "consistency", "tilde", "eps_list", "modes", "dispersion_dt", "samples", "lemmas", "out_dir", "threads",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    Sweep,
    Dispersion,
    Consistency,
    Verify,
    Report,
}

/// One invocation.
#[derive(Debug, Clone, Parser)]
#[command(name = "wtbouss", about = "Weakly transverse Boussinesq simulator and verification toolkit")]
pub struct CommandSpec {
    #[arg(value_enum)]
    pub command: Command,
    /// Config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config key, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Seed, applied after every other setting.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Everything a config file can set.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub run: RunConfig,
    pub eps_list: Vec<f64>,
    pub modes: Vec<(i64, i64)>,
    pub dispersion_dt: f64,
    pub samples: usize,
    pub lemmas: Vec<LemmaId>,
    /// Worker cap from the `threads` key; `WTBOUSS_THREADS` takes precedence.
    pub threads: Option<usize>,
}

struct Entries {
    map: BTreeMap<String, (String, usize)>,
}

fn config_err(key: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Config { key: key.to_string(), line, msg: msg.into() }
}

fn split_entry(raw: &str, line: usize) -> Result<Option<(String, String)>> {
    let body = raw.split('#').next().unwrap_or("").trim();
    if body.is_empty() {
        return Ok(None);
    }
    let Some((k, v)) = body.split_once('=') else {
        return Err(config_err(body, line, "expected `key = value`"));
    };
    let (k, v) = (k.trim(), v.trim());
    if !KEYS.contains(&k) {
        return Err(config_err(k, line, "unknown key"));
    }
    if v.is_empty() {
        return Err(config_err(k, line, "empty value"));
    }
    Ok(Some((k.to_string(), v.to_string())))
}

impl Entries {
    fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            if let Some((k, v)) = split_entry(raw, i + 1)? {
                if let Some((_, first)) = map.get(&k) {
                    return Err(config_err(&k, i + 1, format!("duplicate key, first set on line {first}")));
                }
                map.insert(k, (v, i + 1));
            }
        }
        for o in overrides {
            match split_entry(o, 0)? {
                Some((k, v)) => {
                    map.insert(k, (v, 0));
                }
                None => return Err(config_err(o, 0, "empty override")),
            }
        }
        Ok(Entries { map })
    }

    fn get<T>(&self, key: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some((v, line)) => parse(v)
                .map(Some)
                .ok_or_else(|| config_err(key, *line, format!("expected {what}, got `{v}`"))),
        }
    }

    fn required<T>(&self, key: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Result<T> {
        self.get(key, what, parse)?.ok_or_else(|| config_err(key, 0, "missing required key"))
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key, "a number", parse_f64)
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key, "a nonnegative integer", |v| v.parse().ok())
    }

    fn bool(&self, key: &str) -> Result<Option<bool>> {
        self.get(key, "true or false", |v| match v {
            "true" | "yes" | "1" => Some(true),
            "false" | "no" | "0" => Some(false),
            _ => None,
        })
    }

    fn line(&self, key: &str) -> usize {
        self.map.get(key).map(|(_, l)| *l).unwrap_or(0)
    }
}

fn parse_f64(v: &str) -> Option<f64> {
    if let Some((a, b)) = v.split_once('/') {
        return Some(a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?);
    }
    v.parse().ok()
}

fn parse_system(v: &str) -> Option<System> {
    match v.to_ascii_lowercase().as_str() {
        "wtb1" => Some(System::Wtb1),
        "wtb2" => Some(System::Wtb2),
        "case1" => Some(System::Case1),
        "case2" => Some(System::Case2),
        _ => None,
    }
}

fn parse_list<T>(v: &str, item: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    let out: Option<Vec<T>> = v.split(',').map(|s| item(s.trim())).collect();
    out.filter(|l| !l.is_empty())
}

fn parse_mode(v: &str) -> Option<(i64, i64)> {
    let (a, b) = v.split_once(':')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

/// Parse config text with overrides applied last.
pub fn parse_settings(text: &str, overrides: &[String]) -> Result<Settings> {
    let en = Entries::parse(text, overrides)?;
    let system = en.required("system", "wtb1, wtb2, case1 or case2", parse_system)?;
    let eps = en.required("eps", "a number", parse_f64)?;
    let nx = en.required("nx", "a grid size", |v| v.parse::<usize>().ok())?;
    let ny = en.required("ny", "a grid size", |v| v.parse::<usize>().ok())?;
    let tau = std::f64::consts::TAU;
    let mut grid = GridSpec::new(nx, ny, en.f64("lx")?.unwrap_or(tau), en.f64("ly")?.unwrap_or(tau))
        .map_err(|e| config_err("nx", en.line("nx"), e.to_string()))?;
    if let Some(d) = en.f64("dealias")? {
        grid = grid.with_dealias(d).map_err(|e| config_err("dealias", en.line("dealias"), e.to_string()))?;
    }

    let base = match system {
        System::Case1 => Some(Coefficients::CASE1),
        System::Case2 => Some(Coefficients::CASE2),
        _ => None,
    };
    let mut co = [0.0; 7];
    for (i, k) in ["a", "b", "c", "d", "e", "f", "g"].iter().enumerate() {
        co[i] = match (en.f64(k)?, base) {
            (Some(x), _) => x,
            (None, Some(b)) => b.as_array()[i],
            (None, None) => return Err(config_err(k, 0, format!("missing required key for system {system}"))),
        };
    }
    let coeffs = Coefficients { a: co[0], b: co[1], c: co[2], d: co[3], e: co[4], f: co[5], g: co[6] };
    let params = ModelParams { coeffs, ..ModelParams::for_case(system.case(), eps) };
    let mut run = RunConfig::new(system, params, grid);

    let cfl = en.f64("cfl")?.unwrap_or(1.0);
    run.dt = match en.get("dt", "a number or `auto`", |v| {
        if v == "auto" {
            Some(None)
        } else {
            parse_f64(v).map(Some)
        }
    })? {
        Some(Some(dt)) => DtSpec::Fixed(dt),
        _ => DtSpec::Auto { cfl },
    };
    let t0 = en.f64("t0")?.unwrap_or(1.0);
    run.t_end = match en.get("t_end", "a number or `T0_over_eps`", |v| {
        if v.eq_ignore_ascii_case("t0_over_eps") {
            Some(None)
        } else {
            parse_f64(v).map(Some)
        }
    })? {
        Some(None) => TEnd::T0OverEps(t0),
        Some(Some(t)) => TEnd::Fixed(t),
        None => TEnd::Fixed(1.0),
    };
    if let Some(n) = en.usize("diag_every")? {
        run.diag_every = n;
    }
    if let Some(f) = en.get("family", "zero, gaussian, trig or random", |v| v.parse::<Family>().ok())? {
        run.initial.family = f;
    }
    if let Some(a) = en.f64("amplitude")? {
        run.initial.amplitude = a;
    }
    if let Some(s) = en.get("seed", "an unsigned integer", |v| v.parse::<u64>().ok())? {
        run.initial.seed = s;
    }
    if let Some(s) = en.f64("sobolev_s")? {
        run.sobolev_s = s;
    }
    let d = ResolventConfig::default();
    run.resolvent = ResolventConfig {
        max_terms: en.usize("max_terms")?.unwrap_or(d.max_terms),
        tol: en.f64("tol")?.unwrap_or(d.tol),
        norm_guard: en.f64("norm_guard")?.unwrap_or(d.norm_guard),
    };
    run.linear = en.bool("linear")?.unwrap_or(false);
    run.consistency = en.bool("consistency")?.unwrap_or(false);
    run.tilde = en.bool("tilde")?.unwrap_or(true);
    run.out_dir = en.get("out_dir", "a path", |v| Some(PathBuf::from(v)))?;
    let threads = en.usize("threads")?;

    let eps_list = en.get("eps_list", "a comma separated list of numbers", |v| parse_list(v, parse_f64))?;
    let modes = en.get("modes", "a list like `2:1, 0:3`", |v| parse_list(v, parse_mode))?;
    let lemmas = en.get("lemmas", "`all` or a list of lemma names", |v| {
        if v == "all" {
            Some(LemmaId::ALL.to_vec())
        } else {
            parse_list(v, |s| s.parse().ok())
        }
    })?;
    let settings = Settings {
        run,
        eps_list: eps_list.unwrap_or_else(|| vec![0.1, 0.05, 0.025]),
        modes: modes.unwrap_or_else(|| DEFAULT_MODES.to_vec()),
        dispersion_dt: en.f64("dispersion_dt")?.unwrap_or(1e-3),
        samples: en.usize("samples")?.unwrap_or(100),
        lemmas: lemmas.unwrap_or_else(|| LemmaId::ALL.to_vec()),
        threads,
    };
    if threads == Some(0) {
        return Err(config_err("threads", en.line("threads"), "must be at least 1"));
    }
    settings.run.validate()?;
    Ok(settings)
}

/// Read a config file and apply overrides.
pub fn parse_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    Ok(load_settings(path, overrides)?.run)
}

fn load_settings(path: &Path, overrides: &[String]) -> Result<Settings> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_err("--config", 0, format!("cannot read {}: {e}", path.display())))?;
    parse_settings(&text, overrides)
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    num(x.unwrap_or(f64::NAN))
}

/// Diagnostics CSV text.
pub fn diagnostics_csv(records: &[DiagnosticsRecord]) -> String {
    let mut s = format!("{CSV_VERSION}\n{DIAGNOSTICS_HEADER}\n");
    for r in records {
        let e = &r.energy;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            num(r.time),
            num(e.e_total),
            num(e.e_low),
            num(e.e_high),
            opt(e.e_tilde_high),
            num(r.curl_res),
            opt(r.consistency_res),
            opt(r.guard_factor)
        );
    }
    s
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn plot_script(files: &[(&str, &str)]) -> String {
    let mut s = String::from("set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\n");
    for (file, kind) in files {
        match *kind {
            "diagnostics" => {
                let _ = writeln!(s, "set xlabel 't'\nset logscale y");
                let _ = writeln!(
                    s,
                    "plot '{file}' using 1:2 with lines, '' using 1:3 with lines, '' using 1:4 with lines, '' using 1:5 with lines"
                );
                let _ = writeln!(s, "pause -1\nplot '{file}' using 1:6 with lines\npause -1\nunset logscale y");
            }
            "summary" => {
                let _ = writeln!(s, "set xlabel 'eps'\nset logscale x\nplot '{file}' using 1:5 with linespoints\npause -1\nunset logscale x");
            }
            "dispersion" => {
                let _ = writeln!(s, "set xlabel 'predicted'\nplot '{file}' using 5:6 with points\npause -1");
            }
            "consistency" => {
                let _ = writeln!(s, "set logscale xy\nset xlabel 'eps'\nplot '{file}' using 1:5 with linespoints\npause -1\nunset logscale xy");
            }
            _ => {}
        }
    }
    s
}

/// Append one JSON line describing `err` to `errors.log` in `dir`.
pub fn log_error(dir: &Path, command: Command, err: &Error) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let rec = serde_json::json!({
        "command": format!("{command:?}").to_lowercase(),
        "kind": err.kind(),
        "exit_code": err.exit_code(),
        "message": err.to_string(),
    });
    let mut f = fs::OpenOptions::new().create(true).append(true).open(dir.join("errors.log"))?;
    writeln!(f, "{rec}")
}

/// Run one command. Returns the process exit status; failures are also
/// appended to `errors.log` under the output directory.
pub fn dispatch(cmd: &CommandSpec) -> i32 {
    match run_command(cmd) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let Err(io) = log_error(&cmd.out, cmd.command, &e) {
                eprintln!("error: cannot write errors.log: {io}");
            }
            e.exit_code()
        }
    }
}

fn settings_for(cmd: &CommandSpec) -> Result<Settings> {
    let path = cmd.config.as_ref().ok_or_else(|| config_err("--config", 0, "a config file is required"))?;
    let mut s = load_settings(path, &cmd.overrides)?;
    if let Some(seed) = cmd.seed {
        s.run.initial.seed = seed;
    }
    Ok(s)
}

fn run_command(cmd: &CommandSpec) -> Result<()> {
    if cmd.command == Command::Report {
        return report(&cmd.out);
    }
    let s = settings_for(cmd)?;
    let out = s.run.out_dir.clone().filter(|_| cmd.out == Path::new("out")).unwrap_or_else(|| cmd.out.clone());
    match s.threads.filter(|_| crate::evolve::thread_cap().is_none()) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Internal(e.to_string()))?
            .install(|| execute(cmd.command, &s, &out)),
        None => execute(cmd.command, &s, &out),
    }
}

fn execute(command: Command, s: &Settings, out: &Path) -> Result<()> {
    match command {
        Command::Simulate => simulate(s, out),
        Command::Sweep => sweep(s, out),
        Command::Dispersion => dispersion(s, out),
        Command::Consistency => consistency(s, out),
        Command::Verify => verify(s, out),
        Command::Report => unreachable!(),
    }
}

fn simulate(s: &Settings, out: &Path) -> Result<()> {
    let run = integrate(&s.run)?;
    write_file(out, "diagnostics.csv", &diagnostics_csv(&run.records))?;
    write_file(out, "plots.gp", &plot_script(&[("diagnostics.csv", "diagnostics")]))?;
    match run.error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn sweep(s: &Settings, out: &Path) -> Result<()> {
    let runs = sweep_runs(&s.run, &s.eps_list)?;
    let mut summary = format!("{CSV_VERSION}\n{SUMMARY_HEADER}\n");
    let names: Vec<String> = (0..runs.len()).map(|i| format!("eps_{i}/diagnostics.csv")).collect();
    for (i, (c, o)) in runs.iter().enumerate() {
        write_file(&out.join(format!("eps_{i}")), "diagnostics.csv", &diagnostics_csv(&o.records))?;
        let r = sweep_row(c, o);
        let err = r.error.unwrap_or_default().replace(['"', ','], ";");
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},\"{}\"",
            num(r.eps),
            num(r.t_end),
            r.steps,
            num(r.dt),
            num(r.max_ratio),
            num(r.final_ratio),
            err
        );
    }
    let mut files = vec![("summary.csv", "summary")];
    files.extend(names.iter().map(|n| (n.as_str(), "diagnostics")));
    write_file(out, "summary.csv", &summary)?;
    write_file(out, "plots.gp", &plot_script(&files))?;
    match runs.into_iter().find_map(|(_, o)| o.error) {
        None => Ok(()),
        Some(e) => Err(e),
    }
}

fn dispersion(s: &Settings, out: &Path) -> Result<()> {
    let r = &s.run;
    let grid = r.run_grid()?;
    let res = dispersion_modes(r.system, &r.params, grid, &s.modes, s.dispersion_dt, r.t_end_value())?;
    let mut text = format!("{CSV_VERSION}\n{DISPERSION_HEADER}\n");
    for (&(k1, k2), d) in s.modes.iter().zip(&res) {
        let _ = writeln!(
            text,
            "{},{},{k1},{k2},{},{},{}",
            r.system,
            num(r.params.eps),
            num(d.predicted),
            num(d.measured),
            num(d.rel_err)
        );
    }
    write_file(out, "dispersion.csv", &text)?;
    write_file(out, "plots.gp", &plot_script(&[("dispersion.csv", "dispersion")]))
}

/// Consistency residual of the configured data for each ε in the list,
/// with the ratio to the previous entry.
pub fn consistency_table(s: &Settings) -> Result<Vec<(f64, [f64; 3], f64, f64)>> {
    if s.run.system != System::Wtb1 {
        return Err(Error::Argument("the consistency command needs system = wtb1".into()));
    }
    let mut rows = vec![];
    let mut prev: Option<f64> = None;
    for &eps in &s.eps_list {
        let mut c = s.run.clone();
        c.params.eps = eps;
        c.validate()?;
        let st = crate::evolve::initial_state(&c)?;
        let r = consistency_residual(&st, &c.params, CONSISTENCY_N)?;
        let total = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        let ratio = prev.map(|p| p / total).unwrap_or(f64::NAN);
        rows.push((eps, r, total, ratio));
        prev = Some(total);
    }
    Ok(rows)
}

fn consistency(s: &Settings, out: &Path) -> Result<()> {
    let mut text = format!("{CSV_VERSION}\n{CONSISTENCY_HEADER}\n");
    for (eps, r, total, ratio) in consistency_table(s)? {
        let _ = writeln!(text, "{},{},{},{},{},{}", num(eps), num(r[0]), num(r[1]), num(r[2]), num(total), num(ratio));
    }
    write_file(out, "consistency.csv", &text)?;
    write_file(out, "plots.gp", &plot_script(&[("consistency.csv", "consistency")]))
}

/// One verification row: name, ε, value and the threshold it must stay
/// under (NaN when the value is only reported).
pub type VerifyRow = (String, f64, f64, f64);

/// Identity, operator, equivalence and lemma checks for the configured case.
pub fn verify_rows(s: &Settings) -> Result<Vec<VerifyRow>> {
    let r = &s.run;
    let eps = r.params.eps;
    let seed = r.initial.seed;
    let mut rows: Vec<VerifyRow> = vec![];
    let case = r.system.case();
    if case != CaseTag::General {
        let coarse = r.grid.resized((r.grid.nx / 2).max(16), (r.grid.ny / 2).max(16))?;
        let st = random_curl_free_state(case, coarse, eps, r.initial.amplitude.max(1e-3), seed)?;
        let sp = st.spectral();
        let st = SpecState {
            v: resample(&sp.v, r.grid),
            w: resample(&sp.w, r.grid),
            zeta: resample(&sp.zeta, r.grid),
        }
        .to_state();
        for (name, side) in ["ptheta_p", "ptheta_theta"].iter().zip(ptheta_sides(case, &st, eps)?) {
            let lhs = side.lhs.l2_norm();
            let v = if lhs > 0.0 { side.defect().l2_norm() / lhs } else { 0.0 };
            rows.push((name.to_string(), eps, v, 1e-10));
        }
        for t in tilde_residual(case, &st, eps, r.resolvent)? {
            rows.push((format!("tilde_{}", t.equation), eps, t.relative, 1e-9));
        }
        let n = s.samples.clamp(1, 20);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let st = random_curl_free_state(case, r.grid, eps, 0.1, sample_seed(seed, i))?;
            if let Some(q) = equivalence_check(case, &st, r.sobolev_s, eps)?.ratio {
                lo = lo.min(q);
                hi = hi.max(q);
            }
        }
        rows.push(("equivalence_min".into(), eps, lo, f64::NAN));
        rows.push(("equivalence_max".into(), eps, hi, f64::NAN));
    }
    let op = operator_samples(r.grid, eps, 1.0, s.samples, seed, r.resolvent)?;
    rows.push(("gamma_asymmetry".into(), eps, op.gamma_asymmetry, 1e-10));
    rows.push(("big_gamma_asymmetry".into(), eps, op.big_gamma_asymmetry, 1e-10));
    rows.push(("identity_defect".into(), eps, op.identity_defect, 1e-10));
    rows.push(("forward_defect".into(), eps, op.forward_defect, 1e-10));
    rows.push(("guard_factor".into(), eps, op.max_factor, r.resolvent.norm_guard));
    for &l in &s.lemmas {
        for ls in lemma_sampler(l, s.samples, &s.eps_list, r.grid, seed)? {
            let thr = if l == LemmaId::Adjoint { 1e-10 } else { f64::NAN };
            rows.push((format!("lemma_{}", l.name()), ls.eps, ls.max_ratio, thr));
        }
    }
    Ok(rows)
}

fn verify(s: &Settings, out: &Path) -> Result<()> {
    let rows = verify_rows(s)?;
    let mut text = format!("{CSV_VERSION}\n{VERIFY_HEADER}\n");
    let mut failed = vec![];
    for (name, eps, v, thr) in &rows {
        let pass = thr.is_nan() || v <= thr;
        if !pass {
            failed.push(name.clone());
        }
        let _ = writeln!(text, "{name},{},{},{},{pass}", num(*eps), num(*v), num(*thr));
    }
    write_file(out, "verify.csv", &text)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Numerical { time: 0.0, msg: format!("verification checks failed: {}", failed.join(" ")) })
    }
}

fn report(out: &Path) -> Result<()> {
    let known = [
        ("diagnostics.csv", "diagnostics"),
        ("summary.csv", "summary"),
        ("dispersion.csv", "dispersion"),
        ("consistency.csv", "consistency"),
    ];
    let present: Vec<(&str, &str)> = known.into_iter().filter(|(f, _)| out.join(f).is_file()).collect();
    if present.is_empty() && !out.join("verify.csv").is_file() {
        return Err(Error::Argument(format!("no CSV output found in {}", out.display())));
    }
    for (f, kind) in &present {
        let text = fs::read_to_string(out.join(f))?;
        let rows: Vec<Vec<&str>> =
            text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').collect()).collect();
        let col = |i: usize| rows.iter().filter_map(|r| r.get(i)?.parse::<f64>().ok()).collect::<Vec<_>>();
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        match *kind {
            "diagnostics" => {
                let e = col(1);
                let e0 = e.first().copied().unwrap_or(0.0);
                let g = if e0 > 0.0 { max(&e) / e0 } else { 1.0 };
                println!("{f}: {} records, max e_total ratio {g:.6}, max curl {:.3e}", rows.len(), max(&col(5)));
            }
            "summary" => println!("{f}: {} entries, largest max_ratio {:.6}", rows.len(), max(&col(4))),
            "dispersion" => println!("{f}: {} modes, largest rel_err {:.3e}", rows.len(), max(&col(6))),
            _ => println!("{f}: {} rows, last ratio {:.4}", rows.len(), col(5).last().copied().unwrap_or(f64::NAN)),
        }
    }
    if out.join("verify.csv").is_file() {
        let text = fs::read_to_string(out.join("verify.csv"))?;
        let bad = text.lines().filter(|l| l.ends_with(",false")).count();
        println!("verify.csv: {bad} failing checks");
    }
    if !present.is_empty() {
        write_file(out, "plots.gp", &plot_script(&present))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "system = case1\neps = 0.1\nnx = 64\nny = 64\n";

    #[test]
    fn minimal_config_fills_defaults() {
        let s = parse_settings(MINIMAL, &[]).unwrap();
        let mut want = RunConfig::new(System::Case1, ModelParams::case1(0.1), GridSpec::square(64).unwrap());
        want.params.case_tag = CaseTag::Case1;
        assert_eq!(s.run, want);
        assert_eq!(s.eps_list, vec![0.1, 0.05, 0.025]);
        assert_eq!(s.modes.len(), 10);
        assert_eq!(s.samples, 100);
        assert_eq!(s.lemmas.len(), LemmaId::ALL.len());
    }

    #[test]
    fn override_wins_over_file() {
        let s = parse_settings(MINIMAL, &["eps=0.05".into()]).unwrap();
        assert_eq!(s.run.params.eps, 0.05);
    }

    #[test]
    fn type_mismatch_names_key_and_line() {
        let e = parse_settings("system = case1\n# comment\neps = banana\nnx = 64\nny = 64\n", &[]).unwrap_err();
        match &e {
            Error::Config { key, line, .. } => assert_eq!((key.as_str(), *line), ("eps", 3)),
            other => panic!("{other:?}"),
        }
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("line 3"));
    }

    #[test]
    fn unknown_missing_and_duplicate_keys_rejected() {
        let e = parse_settings(&format!("{MINIMAL}colour = red\n"), &[]).unwrap_err();
        assert!(matches!(e, Error::Config { ref key, line: 5, .. } if key == "colour"));
        let e = parse_settings("system = case1\nnx = 64\nny = 64\n", &[]).unwrap_err();
        assert!(matches!(e, Error::Config { ref key, .. } if key == "eps"));
        let e = parse_settings(&format!("{MINIMAL}eps = 0.2\n"), &[]).unwrap_err();
        assert!(matches!(e, Error::Config { ref key, line: 5, .. } if key == "eps"));
        let e = parse_settings("system = wtb1\neps = 0.1\nnx = 32\nny = 32\n", &[]).unwrap_err();
        assert!(matches!(e, Error::Config { ref key, .. } if key == "a"));
    }

    #[test]
    fn wrong_case_coefficients_are_validation_errors() {
        let e = parse_settings(&format!("{MINIMAL}b = 0.5\n"), &[]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn value_forms() {
        let s = parse_settings(
            &format!("{MINIMAL}dt = 1/200\nt_end = T0_over_eps\nt0 = 2\nmodes = 2:1, 0:3\nlemmas = L2.1.1, adjoint\nlinear = yes # inline\n"),
            &[],
        )
        .unwrap();
        assert_eq!(s.run.dt, DtSpec::Fixed(0.005));
        assert_eq!(s.run.t_end_value(), 20.0);
        assert_eq!(s.modes, vec![(2, 1), (0, 3)]);
        assert_eq!(s.lemmas, vec![LemmaId::L2_1_1, LemmaId::Adjoint]);
        assert!(s.run.linear);
    }

    #[test]
    fn zero_data_csv_has_zero_energies() {
        let mut s = parse_settings("system = case2\neps = 0.1\nnx = 16\nny = 16\nfamily = zero\nt_end = 0.5\n", &[]).unwrap();
        s.run.diag_every = 5;
        let run = integrate(&s.run).unwrap();
        let csv = diagnostics_csv(&run.records);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_VERSION));
        assert_eq!(lines.next(), Some(DIAGNOSTICS_HEADER));
        let rows: Vec<&str> = lines.collect();
        assert!(rows.len() >= 2);
        for r in rows {
            let c: Vec<&str> = r.split(',').collect();
            assert_eq!(c.len(), 8);
            assert_eq!(&c[1..4], &["0.0", "0.0", "0.0"]);
            assert_eq!(c[6], "NaN");
        }
    }

    #[test]
    fn full_precision_numbers() {
        assert_eq!(num(0.1 + 0.2).parse::<f64>().unwrap(), 0.1 + 0.2);
        assert_eq!(num(f64::NAN), "NaN");
    }

    #[test]
    fn error_log_is_json_lines() {
        let dir = std::env::temp_dir().join(format!("wtbouss-log-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        let e = Error::Guard { factor: 0.7, threshold: 0.5 };
        log_error(&dir, Command::Simulate, &e).unwrap();
        log_error(&dir, Command::Sweep, &Error::Validation("x".into())).unwrap();
        let text = fs::read_to_string(dir.join("errors.log")).unwrap();
        let recs: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0]["kind"], "guard");
        assert_eq!(recs[0]["exit_code"], 4);
        assert_eq!(recs[1]["command"], "sweep");
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn consistency_needs_wtb1() {
        let s = parse_settings(MINIMAL, &[]).unwrap();
        assert_eq!(consistency_table(&s).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn plot_script_references_only_given_files() {
        let p = plot_script(&[("diagnostics.csv", "diagnostics")]);
        assert!(p.contains("'diagnostics.csv'"));
        assert!(!p.contains("summary.csv"));
    }
}
