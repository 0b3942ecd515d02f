//! Subcommand implementations. Each returns the process exit code.

use std::path::{Path, PathBuf};

use boostedgs::asymptotics::*;
use boostedgs::bounds::{nonexistence_witness, regime_bounds, BoundValue, CaseId};
use boostedgs::energy::{energy, energy_gradient, pohozaev_residuals, Params};
use boostedgs::io::{read_field, write_field, FORMAT_VERSION};
use boostedgs::reference::{load_bundle, load_or_build, save_bundle, verify_gn, GnKind, ReferenceBundle};
use boostedgs::solver::constrained_minimize;
use boostedgs::spectral::{Field, Grid, Velocity};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{RunConfig, SweepSpec, VerifySpec};
use crate::CliError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

/// Sole owner of the output directory.
pub struct Writer {
    out: PathBuf,
    dump_fields: bool,
}

impl Writer {
    pub fn new(out: &Path, dump_fields: bool) -> Result<Writer, CliError> {
        std::fs::create_dir_all(out)?;
        let probe = out.join(".write-probe");
        std::fs::write(&probe, b"")?;
        std::fs::remove_file(&probe)?;
        Ok(Writer { out: out.to_path_buf(), dump_fields })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn report(&self, name: &str, command: &str, cfg: &RunConfig, status: &str, body: Value) -> Result<(), CliError> {
        let mut doc = json!({
            "format_version": FORMAT_VERSION,
            "command": command,
            "status": status,
            "config": cfg,
        });
        if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
            d.extend(b);
        }
        self.text(name, &(serde_json::to_string_pretty(&doc)? + "\n"))
    }

    pub fn text(&self, name: &str, s: &str) -> Result<(), CliError> {
        let p = self.path(name);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(p, s)?;
        Ok(())
    }

    pub fn field(&self, name: &str, f: &Field, params: &impl Serialize) -> Result<Option<PathBuf>, CliError> {
        if !self.dump_fields {
            return Ok(None);
        }
        let p = self.path(name);
        write_field(&p, f, serde_json::to_value(params)?)?;
        Ok(Some(p))
    }
}

fn status_of(code: i32) -> &'static str {
    match code {
        EXIT_OK => "ok",
        EXIT_NOT_CONVERGED => "not_converged",
        _ => "failed",
    }
}

fn bundle_for(cfg: &RunConfig, grid: &Grid) -> Result<ReferenceBundle, CliError> {
    match &cfg.bundle {
        Some(dir) => {
            let b = load_bundle(dir)?;
            let k = &b.key;
            if k.dim != grid.dim() || k.points != grid.points() || k.half_width != grid.half_width() {
                return Err(CliError::Usage(format!(
                    "bundle {} was built on a different grid",
                    dir.display()
                )));
            }
            Ok(b)
        }
        None => Ok(load_or_build(grid, &cfg.params.v, cfg.params.q, &cfg.reference)?),
    }
}

fn bundle_summary(b: &ReferenceBundle) -> Result<Value, CliError> {
    Ok(serde_json::to_value(b)?)
}

pub fn reference(cfg: &RunConfig, grid: &Grid, w: &Writer) -> Result<i32, CliError> {
    match load_or_build(grid, &cfg.params.v, cfg.params.q, &cfg.reference) {
        Ok(b) => {
            save_bundle(&w.path("bundle"), &b)?;
            w.report("reference.json", "reference", cfg, "ok", json!({ "bundle": bundle_summary(&b)? }))?;
            Ok(EXIT_OK)
        }
        Err(boostedgs::Error::NotConverged(msg)) => {
            w.report("reference.json", "reference", cfg, "not_converged", json!({ "error": msg }))?;
            Ok(EXIT_NOT_CONVERGED)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn solve(cfg: &RunConfig, grid: &Grid, w: &Writer) -> Result<i32, CliError> {
    let r = constrained_minimize(grid, &cfg.params, &cfg.solver, None)?;
    let code = if r.converged { EXIT_OK } else { EXIT_NOT_CONVERGED };
    let dump = match &r.state {
        Some(u) => w.field("fields/state.bin", u, &cfg.params)?,
        None => None,
    };
    w.report("solve.json", "solve", cfg, status_of(code), json!({ "result": r, "dump": dump }))?;
    Ok(code)
}

fn run_sweep(spec: &SweepSpec, grid: &Grid, cfg: &RunConfig, b: &ReferenceBundle) -> boostedgs::Result<SweepReport> {
    let p = &cfg.params;
    let o = &cfg.solver;
    match spec {
        SweepSpec::MassToCritical { mass_fractions } => {
            let ladder: Vec<f64> = mass_fractions.iter().map(|f| f * b.a_star_v).collect();
            sweep_mass_to_critical(grid, p, &ladder, b, o)
        }
        SweepSpec::MToZero { masses } => sweep_m_to_zero(grid, p, masses, b, o),
        SweepSpec::MuToZeroSubcritical { mus } => sweep_mu_to_zero_subcritical(grid, p, mus, b, o),
        SweepSpec::MuToZeroCritical { mus } => sweep_mu_to_zero_critical(grid, p, mus, b, o),
        SweepSpec::BetaToZero { betas } => {
            sweep_beta_to_zero(grid, p.m, p.q, betas, b.q_field(), &cfg.reference, o)
        }
    }
}

pub fn sweep(cfg: &RunConfig, grid: &Grid, w: &Writer, pool: &rayon::ThreadPool) -> Result<i32, CliError> {
    if cfg.sweeps.is_empty() {
        return Err(CliError::Usage("sweep needs a non-empty 'sweeps' list".into()));
    }
    let b = bundle_for(cfg, grid)?;
    let results: Vec<boostedgs::Result<SweepReport>> =
        pool.install(|| cfg.sweeps.par_iter().map(|s| run_sweep(s, grid, cfg, &b)).collect());
    let mut code = EXIT_OK;
    let mut index = Vec::new();
    for (i, (spec, res)) in cfg.sweeps.iter().zip(results).enumerate() {
        let stem = format!("sweeps/{i:02}_{}", spec.name());
        match res {
            Ok(rep) => {
                let all_converged = rep.table.rows.iter().all(|r| r.converged);
                if !all_converged {
                    code = code.max(EXIT_NOT_CONVERGED);
                }
                w.text(&format!("{stem}.csv"), &rep.table.to_csv())?;
                let mut dumps = Vec::new();
                for (row, state) in rep.table.rows.iter().zip(&rep.table.states) {
                    if let Some(p) = w.field(&format!("{stem}/row_{:02}.bin", row.index), state, &row.params)? {
                        dumps.push(p);
                    }
                }
                w.text(
                    &format!("{stem}.json"),
                    &(serde_json::to_string_pretty(&json!({
                        "format_version": FORMAT_VERSION,
                        "sweep": spec,
                        "passed": rep.passed(),
                        "fits": rep.fits,
                        "comparison": rep.comparison,
                        "checks": rep.checks,
                        "rows": rep.table.rows,
                        "dumps": dumps,
                    }))? + "\n"),
                )?;
                index.push(json!({
                    "sweep": spec.name(),
                    "stem": stem,
                    "all_converged": all_converged,
                    "passed": rep.passed(),
                }));
            }
            Err(e) => {
                let c = if matches!(e, boostedgs::Error::NotConverged(_)) { EXIT_NOT_CONVERGED } else { EXIT_INVALID };
                code = code.max(c);
                index.push(json!({ "sweep": spec.name(), "stem": stem, "error": e.to_string() }));
            }
        }
    }
    w.report("sweep.json", "sweep", cfg, status_of(code), json!({ "sweeps": index }))?;
    Ok(code)
}

fn default_schedule(case: CaseId) -> Vec<f64> {
    let sign = if matches!(case, CaseId::Case4i | CaseId::Case4iii) { 1.0 } else { -1.0 };
    (0..=12).map(|k| 10f64.powf(sign * k as f64 / 2.0)).collect()
}

/// Bounds must be ordered; a measured energy must fall inside them.
fn bounds_pass(rep: &boostedgs::bounds::BoundReport) -> bool {
    match rep.sandwich_holds(1e-6) {
        Some(ok) => ok,
        None => match (rep.lower, rep.upper) {
            (BoundValue::Finite(l), BoundValue::Finite(u)) => l <= u,
            (BoundValue::NegInfinity, _) => true,
            (BoundValue::Finite(_), BoundValue::NegInfinity) => false,
        },
    }
}

pub fn bounds(cfg: &RunConfig, grid: &Grid, w: &Writer) -> Result<i32, CliError> {
    let spec = cfg
        .bounds
        .as_ref()
        .ok_or_else(|| CliError::Usage("bounds needs a 'bounds' block".into()))?;
    let b = bundle_for(cfg, grid)?;
    let mut p: Params = cfg.params;
    if let Some(r) = spec.a_over_a_star_v {
        p.a = r * b.a_star_v;
    }
    let mut code = EXIT_OK;
    let mut solve = Value::Null;
    let mut computed_e = None;
    if spec.solve {
        let r = constrained_minimize(grid, &p, &cfg.solver, None)?;
        if r.converged {
            computed_e = Some(r.energy.total);
        } else {
            code = EXIT_NOT_CONVERGED;
        }
        solve = serde_json::to_value(&r)?;
    }
    let rep = regime_bounds(spec.case, &p, &b.constants(), computed_e)?;
    let witness = if matches!(
        spec.case,
        CaseId::Case4i | CaseId::Case4ii | CaseId::Case4iii | CaseId::Case4iv | CaseId::Case4v
    ) {
        let schedule = spec.schedule.clone().unwrap_or_else(|| default_schedule(spec.case));
        Some(nonexistence_witness(spec.case, &p, b.qv_field(), b.a_star_v, &schedule)?)
    } else {
        None
    };
    w.report(
        "bounds.json",
        "bounds",
        cfg,
        status_of(code),
        json!({
            "a": p.a,
            "a_star_v": b.a_star_v,
            "report": rep,
            "pass": bounds_pass(&rep),
            "witness": witness,
            "solve": solve,
        }),
    )?;
    Ok(code)
}

#[derive(Debug, Serialize)]
struct CheckLine {
    suite: &'static str,
    subject: String,
    value: f64,
    tolerance: f64,
    pass: bool,
}

fn dump_checks(path: &Path, out: &mut Vec<CheckLine>) {
    let subject = path.display().to_string();
    let (f, meta) = match read_field(path) {
        Ok(x) => x,
        Err(e) => {
            out.push(CheckLine { suite: "dump_readable", subject: format!("{subject}: {e}"), value: f64::NAN, tolerance: 0.0, pass: false });
            return;
        }
    };
    let finite = f.is_finite();
    out.push(CheckLine { suite: "dump_finite", subject: subject.clone(), value: if finite { 0.0 } else { 1.0 }, tolerance: 0.0, pass: finite });
    let parseval = (f.spectral_mass() - meta.l2_norm_sq).abs() / meta.l2_norm_sq.abs().max(f64::MIN_POSITIVE);
    out.push(CheckLine { suite: "parseval", subject: subject.clone(), value: parseval, tolerance: 1e-12, pass: parseval <= 1e-12 });
    let g = f.grid();
    let back = g.ifft(&g.fft(f.values()));
    let scale = f.values().iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let rt = back.iter().zip(f.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale;
    out.push(CheckLine { suite: "fft_round_trip", subject, value: rt, tolerance: 1e-12, pass: rt <= 1e-12 });
}

fn random_bump(g: &Grid, rng: &mut ChaCha8Rng) -> Field {
    let l = g.half_width();
    let c: Vec<f64> = (0..3).map(|_| rng.random_range(-0.2..0.2) * l).collect();
    let w = rng.random_range(0.1..0.3) * l;
    let k = rng.random_range(-1.0..1.0);
    let amp = rng.random_range(0.5..2.0);
    Field::from_fn(g, |x| {
        let r2: f64 = (0..g.dim()).map(|i| (x[i] - c[i]).powi(2)).sum();
        Complex64::from_polar(amp * (-r2 / (w * w)).exp(), k * x[0])
    })
}

fn gradient_checks(cfg: &RunConfig, grid: &Grid, pairs: usize, out: &mut Vec<CheckLine>) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.solver.seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let f = random_bump(grid, &mut rng);
        let h = random_bump(grid, &mut rng).scaled(0.5);
        let analytic = energy_gradient(&f, &cfg.params)?.inner(&h).re;
        let t = 1e-4;
        let ep = energy(&f.axpy(t, &h), &cfg.params)?.total;
        let em = energy(&f.axpy(-t, &h), &cfg.params)?.total;
        worst = worst.max(((ep - em) / (2.0 * t) - analytic).abs() / analytic.abs().max(1e-3));
    }
    out.push(CheckLine {
        suite: "gradient_vs_fd",
        subject: format!("{pairs} random pairs"),
        value: worst,
        tolerance: 1e-5,
        pass: worst <= 1e-5,
    });
    Ok(())
}

fn bundle_checks(b: &ReferenceBundle, spec: &VerifySpec, out: &mut Vec<CheckLine>) -> Result<(), CliError> {
    let rq = pohozaev_residuals(b.q_field(), &Velocity::ZERO)?.max();
    let rqv = pohozaev_residuals(b.qv_field(), &b.key.v)?.max();
    for (subject, r) in [("Q", rq), ("Q_v", rqv)] {
        out.push(CheckLine { suite: "pohozaev", subject: subject.into(), value: r, tolerance: spec.pohozaev_tol, pass: r <= spec.pohozaev_tol });
    }
    for (subject, f, kind) in [("Q_v", b.qv_field(), GnKind::Critical), ("U_v", b.uv_field(), GnKind::Subcritical)] {
        let d = (verify_gn(f, b, kind)? - 1.0).abs();
        out.push(CheckLine { suite: "gn_saturation", subject: subject.into(), value: d, tolerance: spec.gn_tol, pass: d <= spec.gn_tol });
    }
    Ok(())
}

pub fn verify(cfg: &RunConfig, grid: &Grid, w: &Writer) -> Result<i32, CliError> {
    let spec = cfg.verify.clone().unwrap_or_default();
    let mut checks = Vec::new();
    for p in &spec.fields {
        dump_checks(p, &mut checks);
    }
    if let Some(dir) = &cfg.bundle {
        for name in ["q.bin", "qv.bin", "uv.bin"] {
            dump_checks(&dir.join(name), &mut checks);
        }
        match load_bundle(dir) {
            Ok(b) => bundle_checks(&b, &spec, &mut checks)?,
            Err(e) => checks.push(CheckLine {
                suite: "bundle_readable",
                subject: format!("{}: {e}", dir.display()),
                value: f64::NAN,
                tolerance: 0.0,
                pass: false,
            }),
        }
    }
    gradient_checks(cfg, grid, spec.gradient_pairs, &mut checks)?;
    let ok = checks.iter().all(|c| c.pass);
    let code = if ok { EXIT_OK } else { EXIT_INVALID };
    w.report("verify.json", "verify", cfg, status_of(code), json!({ "pass": ok, "checks": checks }))?;
    Ok(code)
}

/// Collects the status of every report already in the output directory.
pub fn report(w: &Writer) -> Result<i32, CliError> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(&w.out)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != "summary.json"))
        .collect();
    entries.sort();
    let mut rows = Vec::new();
    for p in entries {
        let v: Value = match std::fs::read_to_string(&p).ok().and_then(|s| serde_json::from_str(&s).ok()) {
            Some(v) => v,
            None => continue,
        };
        if v.get("format_version").and_then(Value::as_str) != Some(FORMAT_VERSION) {
            continue;
        }
        rows.push(json!({
            "file": p.file_name().map(|n| n.to_string_lossy().into_owned()),
            "command": v.get("command"),
            "status": v.get("status"),
        }));
    }
    if rows.is_empty() {
        return Err(CliError::Usage(format!("no reports found in {}", w.out.display())));
    }
    let doc = json!({ "format_version": FORMAT_VERSION, "reports": rows });
    w.text("summary.json", &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    Ok(EXIT_OK)
}
