//! Driver behind the command line: resolves a configuration, runs one mode
//! and writes its artifacts plus a manifest into the output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::analysis::{
    bondesson_gamma_exponent, bondesson_mark_cdf, fit_rate, ks_statistic, moment_check, rate_study,
    truncated_jump_cdf, truncation_exponent, Abscissa, FieldSpec, LevelSpec, NoiseSpec, StudyTemplate,
};
use crate::config::{parse_config, Mode, RunConfig, SchemeChoice, SeriesChoice};
use crate::error::{Error, Result};
use crate::jump_fields::{bondesson_gamma_generator, lepage_generator, thinning_generator, JumpField, MarkDistribution, Scheme};
use crate::kernel::{CompactBox, DomainTruncation, R1Options};
use crate::levy_measure::Sign;
use crate::manifest::{parse_manifest, verify_artifacts, ArtifactRecord, ArtifactStatus, Manifest};
use crate::rng::SeedScope;
use crate::solver::{section_export, solve, GridSpec, PathRealization, Provenance, SectionMode, SolverProblem};

pub const MANIFEST_NAME: &str = "manifest.txt";

/// Minimum pooled jump count for the distribution test in `validate`.
const KS_MIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone)]
pub struct RunRequest {
    pub mode: Mode,
    pub config_text: String,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub level: Option<usize>,
    pub replicates: Option<usize>,
    /// Manifest whose checksums `validate` re-checks.
    pub check_manifest: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub summary: String,
}

struct Session {
    out_dir: PathBuf,
    manifest: Manifest,
    artifacts: Vec<ArtifactRecord>,
    timings: Vec<(String, f64)>,
}

impl Session {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, contents).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.artifacts.push(ArtifactRecord::of(name, contents.as_bytes()));
        Ok(())
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        self.timings.push((stage.to_string(), start.elapsed().as_secs_f64() * 1e3));
        out
    }

    fn finish(mut self, error: Option<&Error>) -> Result<Manifest> {
        match error {
            None => {
                self.manifest.push("status", "ok");
                self.manifest.push("exit_code", 0);
            }
            Some(e) => {
                self.manifest.push("status", "error");
                self.manifest.push("exit_code", e.exit_code());
                self.manifest.push("error.kind", error_kind(e));
                self.manifest.push("error.message", e.to_string().replace('\n', " "));
            }
        }
        for a in &self.artifacts {
            self.manifest.push_artifact(a);
        }
        for (stage, ms) in &self.timings {
            self.manifest.push(format!("timing.{stage}_ms"), format!("{ms:.3}"));
        }
        let path = self.out_dir.join(MANIFEST_NAME);
        std::fs::write(&path, self.manifest.render()).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(self.manifest)
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidMeasure { .. } => "InvalidMeasure",
        Error::CannotSample(_) => "CannotSample",
        Error::Domain(_) => "Domain",
        Error::NumericalFailure(_) => "NumericalFailure",
        Error::NumericalOverflow { .. } => "NumericalOverflow",
        Error::ResourceCap { .. } => "ResourceCap",
        Error::Config { .. } => "Config",
        Error::InvalidRatio(_) => "InvalidRatio",
        Error::InvariantViolation(_) => "InvariantViolation",
        Error::InsufficientSample { .. } => "InsufficientSample",
        Error::DegenerateFit(_) => "DegenerateFit",
        Error::Io { .. } => "Io",
    }
}

/// Runs one mode. A manifest is written whether or not the run succeeds.
pub fn run(req: &RunRequest) -> Result<RunOutcome> {
    std::fs::create_dir_all(&req.out_dir).map_err(|source| Error::Io {
        path: req.out_dir.display().to_string(),
        source,
    })?;
    let mut session = Session {
        out_dir: req.out_dir.clone(),
        manifest: Manifest::default(),
        artifacts: Vec::new(),
        timings: Vec::new(),
    };
    session.manifest.push("tool", concat!("volterra-sim ", env!("CARGO_PKG_VERSION")));
    session.manifest.push("mode", req.mode.as_str());
    let start = Instant::now();
    let result = execute(req, &mut session);
    session.timings.push(("total".into(), start.elapsed().as_secs_f64() * 1e3));
    match result {
        Ok(summary) => Ok(RunOutcome {
            manifest: session.finish(None)?,
            summary,
        }),
        Err(e) => {
            session.finish(Some(&e))?;
            Err(e)
        }
    }
}

/// Applies command-line overrides and re-validates.
pub fn resolve_config(req: &RunRequest) -> Result<RunConfig> {
    let mut cfg = parse_config(&req.config_text)?;
    if let Some(mode) = cfg.mode {
        if mode != req.mode {
            return Err(Error::config(
                "mode",
                format!("config says {} but {} was requested", mode.as_str(), req.mode.as_str()),
            ));
        }
    }
    if let Some(l) = req.level {
        cfg.level = l;
    }
    if let Some(r) = req.replicates {
        cfg.replicates = r;
        cfg.study_replicates = Some(r);
    }
    if req.seed.is_some() {
        cfg.seed = req.seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(req: &RunRequest, session: &mut Session) -> Result<String> {
    let cfg = resolve_config(req)?;
    let seed = cfg.seed.unwrap_or(0);
    session.manifest.push("seed", seed);
    for (k, v) in cfg.resolved() {
        if k != "seed" && k != "out_dir" {
            session.manifest.push(format!("config.{k}"), v);
        }
    }
    match req.mode {
        Mode::Simulate => simulate(&cfg, seed, session),
        Mode::RateStudy => study(&cfg, seed, session),
        Mode::Validate => validate(&cfg, seed, req.check_manifest.as_deref(), session),
    }
}

fn noise(cfg: &RunConfig) -> Result<NoiseSpec> {
    let measure = cfg.measure()?;
    Ok(match cfg.scheme {
        SchemeChoice::Truncation => NoiseSpec::Truncation { measure },
        SchemeChoice::Series => NoiseSpec::Series {
            generator: match cfg.series_method {
                SeriesChoice::LePage => lepage_generator(&measure),
                SeriesChoice::Bondesson => bondesson_gamma_generator(cfg.levy_gamma, cfg.levy_lambda)?,
                SeriesChoice::Thinning => thinning_generator(
                    &measure,
                    MarkDistribution::exponential(cfg.thinning_rate.unwrap_or(cfg.levy_lambda))?,
                )?,
            },
        },
    })
}

fn field_spec(cfg: &RunConfig) -> Result<FieldSpec> {
    Ok(FieldSpec {
        noise: noise(cfg)?,
        trunc: DomainTruncation::new(cfg.center.clone(), cfg.radius_per_level)?,
        horizon: cfg.horizon,
        max_events: cfg.max_events,
    })
}

/// Level of a single run at `cfg.level`.
fn run_level(cfg: &RunConfig) -> LevelSpec {
    match cfg.scheme {
        SchemeChoice::Truncation => LevelSpec::Truncation {
            epsilon: cfg.epsilon(cfg.level),
            domain_level: cfg.domain_level.unwrap_or(cfg.level),
        },
        SchemeChoice::Series => LevelSpec::Series {
            n_space: cfg.n_space(),
            n_level: cfg.n_level(),
        },
    }
}

/// Level `n` of a rate study: `n` drives `ε` or `N_level`; the spatial
/// level is fixed when configured and follows `n` otherwise.
fn study_level(cfg: &RunConfig, n: usize) -> LevelSpec {
    match cfg.scheme {
        SchemeChoice::Truncation => LevelSpec::Truncation {
            epsilon: cfg.epsilon(n),
            domain_level: cfg.domain_level.unwrap_or(n),
        },
        SchemeChoice::Series => LevelSpec::Series {
            n_space: cfg.n_space.unwrap_or(n),
            n_level: n as f64,
        },
    }
}

fn grid(cfg: &RunConfig) -> Result<GridSpec> {
    GridSpec::new(cfg.grid_t.clone(), cfg.grid_x.clone())
}

fn csv_header(prefix: &str, d: usize) -> String {
    let mut h = String::from(prefix);
    for k in 1..=d {
        let _ = write!(h, "{}x{k}", if h.is_empty() { "" } else { "," });
    }
    h
}

/// Float text with 17 significant digits.
struct Sig17(f64);

impl std::fmt::Display for Sig17 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.16e}", self.0)
    }
}

fn push_point(line: &mut String, x: &[f64]) {
    for &v in x {
        let _ = write!(line, "{},", Sig17(v));
    }
}

fn grid_csv(r: &PathRealization) -> String {
    let d = r.grid.dim();
    let mut out = csv_header("t", d) + ",value\n";
    for (it, t) in r.grid.t_points.iter().enumerate() {
        for (ix, x) in r.grid.x_points.iter().enumerate() {
            let _ = write!(out, "{},", Sig17(*t));
            push_point(&mut out, x);
            let _ = writeln!(out, "{}", Sig17(r.value(it, ix)));
        }
    }
    out
}

fn events_csv(field: &JumpField, d: usize) -> String {
    let mut out = csv_header("tau", d).replace(",x", ",xi") + ",size\n";
    for e in &field.events {
        let _ = write!(out, "{},", Sig17(e.tau));
        push_point(&mut out, &e.xi);
        let _ = writeln!(out, "{}", Sig17(e.size));
    }
    out
}

fn point_label(x: &[f64]) -> String {
    x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("_")
}

fn simulate(cfg: &RunConfig, seed: u64, session: &mut Session) -> Result<String> {
    let fields = field_spec(cfg)?;
    let kernel = cfg.kernel()?;
    let grid = grid(cfg)?;
    let level = run_level(cfg);
    let scope = SeedScope::new(seed, 0);
    let field = session.timed("generate", || fields.generate(&level, &scope))?;
    let y0 = cfg.y0.realize(&scope)?;
    let mut path = session.timed("solve", || {
        solve(&SolverProblem {
            kernel: &kernel,
            sigma: &cfg.sigma,
            y0: &y0,
            field: &field,
            grid: &grid,
            kernel_floor: cfg.kernel_floor,
        })
    })?;
    path.provenance = Some(Provenance {
        master_seed: seed,
        replicate: 0,
        level: cfg.level,
        scheme: match cfg.scheme {
            SchemeChoice::Truncation => Scheme::Truncation,
            SchemeChoice::Series => Scheme::Series,
        },
    });
    session.manifest.push("events", field.len());
    let d = grid.dim();
    session.write("grid.csv", &grid_csv(&path))?;
    session.write("events.csv", &events_csv(&field, d))?;
    for t in &cfg.t_sections {
        let rows = section_export(&path, &SectionMode::Time(*t))?;
        let mut out = csv_header("", d) + ",value\n";
        for (x, v) in rows {
            push_point(&mut out, &x);
            let _ = writeln!(out, "{}", Sig17(v));
        }
        session.write(&format!("section_t_{t}.csv"), &out)?;
    }
    for x in &cfg.x_sections {
        let rows = section_export(&path, &SectionMode::Space(x.clone()))?;
        let mut out = String::from("t,value\n");
        for (t, v) in rows {
            let _ = writeln!(out, "{},{}", Sig17(t[0]), Sig17(v));
        }
        session.write(&format!("section_x_{}.csv", point_label(x)), &out)?;
    }
    let max = path.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(format!(
        "simulated {} events, {} grid points, max |Y| = {max}",
        field.len(),
        path.values.len()
    ))
}

/// Abscissa and theoretical exponent of the rate fit for the configured
/// scheme.
pub fn rate_fit_setup(cfg: &RunConfig) -> (Abscissa, f64) {
    let e = truncation_exponent(cfg.levy_p, cfg.levy_q);
    match (cfg.scheme, cfg.series_method) {
        (SchemeChoice::Truncation, _) => (Abscissa::Epsilon, e),
        (SchemeChoice::Series, SeriesChoice::Bondesson) => (
            Abscissa::LevelLinear,
            bondesson_gamma_exponent(cfg.levy_p, cfg.levy_q, cfg.levy_gamma),
        ),
        // ε_N = ϱ(N/2) decays like e^{-N/(2γ)}.
        (SchemeChoice::Series, SeriesChoice::LePage) => (Abscissa::LevelLinear, -e / (2.0 * cfg.levy_gamma)),
        // Kept marks are those with dπ/dF ≤ N, a cutoff of order 1/N.
        (SchemeChoice::Series, SeriesChoice::Thinning) => (Abscissa::Level, -e),
    }
}

fn study(cfg: &RunConfig, seed: u64, session: &mut Session) -> Result<String> {
    let template = StudyTemplate {
        fields: field_spec(cfg)?,
        kernel: cfg.kernel()?,
        sigma: cfg.sigma.clone(),
        y0: cfg.y0.clone(),
        grid: grid(cfg)?,
        kernel_floor: cfg.kernel_floor,
    };
    let ns = cfg.study_levels();
    let levels: Vec<LevelSpec> = ns.iter().map(|n| study_level(cfg, *n)).collect();
    let reference = study_level(cfg, cfg.study_reference_level());
    let replicates = cfg.study_replicates();
    let report = session.timed("study", || {
        rate_study(&template, &levels, &reference, replicates, seed, cfg.levy_p)
    })?;
    let mut rates = String::from("level,error,se\n");
    for ((n, e), s) in ns.iter().zip(&report.errors).zip(&report.se) {
        let _ = writeln!(rates, "{n},{},{}", Sig17(*e), Sig17(*s));
    }
    session.write("rates.csv", &rates)?;
    let (abscissa, theoretical) = rate_fit_setup(cfg);
    let fit = fit_rate(&report, abscissa, theoretical)?;
    let abscissa_name = match abscissa {
        Abscissa::Epsilon => "log_epsilon",
        Abscissa::Level => "log_level",
        Abscissa::LevelLinear => "level",
    };
    let text = format!(
        "abscissa = {abscissa_name}\nslope = {}\nintercept = {}\nr_squared = {}\ntheoretical_exponent = {}\nreference_level = {}\nreplicates = {replicates}\np = {}\n",
        fit.slope,
        fit.intercept,
        fit.r_squared,
        fit.theoretical_exponent,
        cfg.study_reference_level(),
        cfg.levy_p,
    );
    session.write("ratefit.txt", &text)?;
    Ok(format!(
        "rate study over {} levels: slope {} (theoretical {}), R² {}",
        ns.len(),
        fit.slope,
        fit.theoretical_exponent,
        fit.r_squared
    ))
}

fn validate(cfg: &RunConfig, seed: u64, check: Option<&Path>, session: &mut Session) -> Result<String> {
    let measure = cfg.measure()?;
    let kernel = cfg.kernel()?;
    let fields = field_spec(cfg)?;
    let mut report = String::from("[assumptions]\n");
    let assumptions = kernel.validate_assumptions(&measure, Some(&cfg.sigma), cfg.horizon);
    report.push_str(&assumptions.render());
    let mut failures: Vec<String> = assumptions.failures().map(|f| f.id.to_string()).collect();

    report.push_str("\n[truncation bounds]\n");
    let k = CompactBox {
        center: cfg.center.clone(),
        radius: cfg.k_radius,
    };
    let r1 = session.timed("r1", || {
        kernel.r1_rate(&fields.trunc, cfg.level, cfg.horizon, &k, &R1Options::default())
    })?;
    let _ = writeln!(report, "r1(N = {}) = {r1:e}", cfg.level);
    if cfg.scheme == SchemeChoice::Truncation {
        let rates = measure.truncation_rates(cfg.levy_p, cfg.levy_q, cfg.epsilon(cfg.level).min(0.999))?;
        let _ = writeln!(report, "r2(eps = {}) = {:e}", cfg.epsilon(cfg.level), rates.r2);
    }

    report.push_str("\n[distribution]\n");
    let level = run_level(cfg);
    let box_level = match level {
        LevelSpec::Truncation { domain_level, .. } => domain_level,
        LevelSpec::Series { n_space, .. } => n_space,
    };
    let r = fields.trunc.radius(box_level);
    let lo: Vec<f64> = cfg.center.iter().map(|c| c - r).collect();
    let hi: Vec<f64> = cfg.center.iter().map(|c| c + r).collect();
    let replicates = cfg.replicates.max(2);
    let mc = session.timed("moments", || moment_check(&fields, &level, &lo, &hi, replicates, seed))?;
    let _ = writeln!(
        report,
        "moments over {replicates} replicates: mean {} (oracle {}, z {:.3}), variance {} (oracle {}, z {:.3}), mean count {}: {}",
        mc.mean,
        mc.mean_oracle,
        mc.z_mean,
        mc.variance,
        mc.variance_oracle,
        mc.z_variance,
        mc.count_mean,
        if mc.passed { "PASS" } else { "FAIL" }
    );
    if !mc.passed {
        failures.push("moments".into());
    }

    let mut sizes = Vec::new();
    let mut rep = 0u64;
    while sizes.len() < KS_MIN_SAMPLES && rep < replicates.max(KS_MIN_SAMPLES) as u64 {
        let f = fields.generate(&level, &SeedScope::new(seed, rep))?;
        sizes.extend(f.events.iter().map(|e| e.size));
        rep += 1;
    }
    let ks = match (&fields.noise, level) {
        (NoiseSpec::Truncation { .. }, LevelSpec::Truncation { epsilon, .. }) => {
            let cdf = truncated_jump_cdf(&measure, epsilon)?;
            Some(ks_statistic(&sizes, cdf))
        }
        (NoiseSpec::Series { generator }, LevelSpec::Series { n_level, .. }) => match cfg.series_method {
            SeriesChoice::Bondesson => Some(ks_statistic(&sizes, bondesson_mark_cdf(generator, n_level)?)),
            SeriesChoice::LePage => {
                let eps = measure.tail_inverse(n_level / 2.0, Sign::Plus)?;
                Some(ks_statistic(&sizes, truncated_jump_cdf(&measure, eps)?))
            }
            SeriesChoice::Thinning => None,
        },
        _ => None,
    };
    match ks {
        Some(_) if sizes.len() < KS_MIN_SAMPLES => {
            let _ = writeln!(
                report,
                "jump law: NOT CHECKABLE ({} sizes, need {KS_MIN_SAMPLES})",
                sizes.len()
            );
        }
        Some(d) => {
            let crit = 1.63 / (sizes.len() as f64).sqrt();
            let pass = d <= crit;
            let _ = writeln!(
                report,
                "jump law: KS D = {d:.5} over {} sizes, 1% critical value {crit:.5}: {}",
                sizes.len(),
                if pass { "PASS" } else { "FAIL" }
            );
            if !pass {
                failures.push("jump law".into());
            }
        }
        None => {
            let _ = writeln!(report, "jump law: NOT CHECKABLE for this generator");
        }
    }

    if let Some(path) = check {
        report.push_str("\n[manifest]\n");
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let manifest = parse_manifest(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for (a, status) in verify_artifacts(&manifest, dir)? {
            let line = match &status {
                ArtifactStatus::Ok => "ok".to_string(),
                ArtifactStatus::Missing => "MISSING".to_string(),
                ArtifactStatus::Mismatch { found } => format!("MISMATCH (found {found})"),
            };
            let _ = writeln!(report, "{}: {line}", a.name);
            if status != ArtifactStatus::Ok {
                failures.push(format!("artifact {}", a.name));
            }
        }
    }

    let verdict = if failures.is_empty() {
        "PASS".to_string()
    } else {
        format!("FAIL ({})", failures.join(", "))
    };
    let _ = writeln!(report, "\nverdict: {verdict}");
    session.write("validation.txt", &report)?;
    if failures.is_empty() {
        Ok(format!("validation passed ({} replicates)", replicates))
    } else {
        Err(Error::InvariantViolation(format!("validation failed: {}", failures.join(", "))))
    }
}
