//! Verification harness: coupled errors between truncation levels, rate
//! fits, and distributional checks of generated fields.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jump_fields::{
    generate_series_field, generate_truncation_field, Envelope, JumpEvent, JumpField, MarkDistribution,
    SeriesGenerator, SeriesMethod,
};
use crate::kernel::{DomainTruncation, KernelSpec};
use crate::levy_measure::{LevyMeasure, MeasureKind, Region};
use crate::quadrature::{integrate, integrate_pieces, QuadOptions};
use crate::rng::SeedScope;
use crate::solver::{evaluate_on_grid, solve, GridSpec, InitialField, PathRealization, Sigma, SolverProblem, Y0Fn};

/// Noise source shared by every level of a study.
#[derive(Debug, Clone)]
pub enum NoiseSpec {
    Truncation { measure: LevyMeasure },
    Series { generator: SeriesGenerator },
}

/// One truncation level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelSpec {
    /// Jumps `|J| > epsilon` on `U^{domain_level}`.
    Truncation { epsilon: f64, domain_level: usize },
    /// Cells `≤ n_space`, levels `Γ ≤ n_level`.
    Series { n_space: usize, n_level: f64 },
}

impl LevelSpec {
    /// Abscissa of rate fits: `ε` for the cutoff scheme, `N_level` for the
    /// series scheme.
    pub fn abscissa(&self) -> f64 {
        match self {
            LevelSpec::Truncation { epsilon, .. } => *epsilon,
            LevelSpec::Series { n_level, .. } => *n_level,
        }
    }

    /// Whether `self` keeps every event that `coarse` keeps.
    pub fn refines(&self, coarse: &LevelSpec) -> Result<bool> {
        match (self, coarse) {
            (
                LevelSpec::Truncation {
                    epsilon: ef,
                    domain_level: lf,
                },
                LevelSpec::Truncation {
                    epsilon: ec,
                    domain_level: lc,
                },
            ) => Ok(ef <= ec && lf >= lc),
            (
                LevelSpec::Series {
                    n_space: sf,
                    n_level: nf,
                },
                LevelSpec::Series {
                    n_space: sc,
                    n_level: nc,
                },
            ) => Ok(sf >= sc && nf >= nc),
            _ => Err(Error::config("scheme", "levels of a coupled comparison must use the same scheme")),
        }
    }

    /// Whether an event of a finer field survives at this level.
    fn keeps(&self, e: &JumpEvent, trunc: &DomainTruncation) -> bool {
        match self {
            LevelSpec::Truncation { epsilon, domain_level } => {
                e.size.abs() > *epsilon && trunc.contains(*domain_level, &e.xi)
            }
            LevelSpec::Series { n_space, n_level } => {
                matches!(e.meta, Some(m) if m.cell <= *n_space && m.gamma <= *n_level)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct FieldSpec {
    pub noise: NoiseSpec,
    pub trunc: DomainTruncation,
    pub horizon: f64,
    pub max_events: usize,
}

impl FieldSpec {
    pub fn generate(&self, level: &LevelSpec, scope: &SeedScope) -> Result<JumpField> {
        match (&self.noise, level) {
            (NoiseSpec::Truncation { measure }, LevelSpec::Truncation { epsilon, domain_level }) => {
                generate_truncation_field(
                    measure,
                    &self.trunc,
                    *domain_level,
                    *epsilon,
                    self.horizon,
                    scope,
                    self.max_events,
                )
            }
            (NoiseSpec::Series { generator }, LevelSpec::Series { n_space, n_level }) => generate_series_field(
                generator,
                &self.trunc,
                *n_space,
                *n_level,
                self.horizon,
                scope,
                self.max_events,
            ),
            _ => Err(Error::config("scheme", "level does not match the configured scheme")),
        }
    }

    /// Events of `fine` kept at `coarse`, in order.
    pub fn restrict(&self, fine: &JumpField, coarse: &LevelSpec) -> JumpField {
        let level = match coarse {
            LevelSpec::Truncation { domain_level, .. } => *domain_level,
            LevelSpec::Series { n_space, .. } => *n_space,
        };
        JumpField {
            events: fine.events.iter().filter(|e| coarse.keeps(e, &self.trunc)).cloned().collect(),
            horizon: fine.horizon,
            level,
            scheme: fine.scheme,
        }
    }

    /// `∫ z^k π_N(dz)` of the kept measure at `level`.
    pub fn kept_moment(&self, k: u32, level: &LevelSpec) -> Result<f64> {
        match (&self.noise, level) {
            (NoiseSpec::Truncation { measure }, LevelSpec::Truncation { epsilon, .. }) => {
                measure.raw_moment(k, Region::Outside(*epsilon))
            }
            (NoiseSpec::Series { generator }, LevelSpec::Series { n_level, .. }) => generator.kept_moment(k, *n_level),
            _ => Err(Error::config("scheme", "level does not match the configured scheme")),
        }
    }

    /// `Leb(B ∩ U)` for a box `B = [lo, hi]` and the generated domain `U`.
    pub fn overlap(&self, level: &LevelSpec, lo: &[f64], hi: &[f64]) -> f64 {
        let n = match level {
            LevelSpec::Truncation { domain_level, .. } => *domain_level,
            LevelSpec::Series { n_space, .. } => *n_space,
        };
        let r = self.trunc.radius(n);
        self.trunc
            .center
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(c, (a, b))| (b.min(c + r) - a.max(c - r)).max(0.0))
            .product()
    }
}

#[derive(Debug, Clone)]
pub struct StudyTemplate {
    pub fields: FieldSpec,
    pub kernel: KernelSpec,
    pub sigma: Sigma,
    pub y0: InitialField,
    pub grid: GridSpec,
    pub kernel_floor: f64,
}

impl StudyTemplate {
    fn solve_field(&self, field: &JumpField, y0: &Y0Fn) -> Result<PathRealization> {
        solve(&SolverProblem {
            kernel: &self.kernel,
            sigma: &self.sigma,
            y0,
            field,
            grid: &self.grid,
            kernel_floor: self.kernel_floor,
        })
    }

    /// Grid values of `Y^{fine} - Y^{coarse}`. For constant `σ` this is the
    /// contribution of the removed events alone, summed directly.
    fn difference(&self, fine: &JumpField, coarse: &LevelSpec, y0: &Y0Fn) -> Result<Vec<f64>> {
        if self.sigma.is_constant() {
            let removed = JumpField {
                events: fine
                    .events
                    .iter()
                    .filter(|e| !coarse.keeps(e, &self.fields.trunc))
                    .cloned()
                    .collect(),
                ..fine.clone()
            };
            let zero: Y0Fn = std::sync::Arc::new(|_, _| 0.0);
            let values = vec![0.0; removed.len()];
            let r = evaluate_on_grid(
                &SolverProblem {
                    kernel: &self.kernel,
                    sigma: &self.sigma,
                    y0: &zero,
                    field: &removed,
                    grid: &self.grid,
                    kernel_floor: self.kernel_floor,
                },
                &values,
            )?;
            Ok(r.values)
        } else {
            let a = self.solve_field(fine, y0)?;
            let b = self.solve_field(&self.fields.restrict(fine, coarse), y0)?;
            Ok(a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect())
        }
    }
}

fn sup_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Per-replicate `max_grid |Y^{fine} - Y^{coarse}|` under common randomness:
/// the coarse field is the restriction of the fine one.
pub fn coupled_error(
    template: &StudyTemplate,
    coarse: &LevelSpec,
    fine: &LevelSpec,
    replicates: usize,
    master_seed: u64,
) -> Result<Vec<f64>> {
    if !fine.refines(coarse)? {
        return Err(Error::config("study.levels", "the fine level must refine the coarse level"));
    }
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let scope = SeedScope::new(master_seed, r);
            let y0 = template.y0.realize(&scope)?;
            let field = template.fields.generate(fine, &scope)?;
            Ok(sup_abs(&template.difference(&field, coarse, &y0)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub levels: Vec<f64>,
    /// `(E[e^p])^{1/p}` with `e` the grid-sup error.
    pub errors: Vec<f64>,
    pub se: Vec<f64>,
    pub replicates: usize,
    pub p: f64,
    /// Per-replicate grid-sup errors, `[replicate][level]`.
    pub samples: Vec<Vec<f64>>,
}

/// `L^p` aggregate of samples with a delta-method standard error.
pub fn lp_aggregate(samples: &[f64], p: f64) -> (f64, f64) {
    let n = samples.len() as f64;
    let powered: Vec<f64> = samples.iter().map(|e| e.powf(p)).collect();
    let m = powered.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        powered.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let se_m = (var / n).sqrt();
    let value = m.powf(1.0 / p);
    let se = if m > 0.0 { se_m * value / (p * m) } else { 0.0 };
    (value, se)
}

/// Coupled errors of each level against a common finer reference level.
pub fn rate_study(
    template: &StudyTemplate,
    levels: &[LevelSpec],
    reference: &LevelSpec,
    replicates: usize,
    master_seed: u64,
    p: f64,
) -> Result<ErrorReport> {
    if replicates == 0 {
        return Err(Error::config("study.replicates", "need at least one replicate"));
    }
    for l in levels {
        if !reference.refines(l)? {
            return Err(Error::config(
                "study.reference_level",
                format!("reference {reference:?} does not refine {l:?}"),
            ));
        }
    }
    let samples: Vec<Vec<f64>> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let scope = SeedScope::new(master_seed, r);
            let y0 = template.y0.realize(&scope)?;
            let field = template.fields.generate(reference, &scope)?;
            levels
                .iter()
                .map(|l| Ok(sup_abs(&template.difference(&field, l, &y0)?)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut errors = Vec::with_capacity(levels.len());
    let mut se = Vec::with_capacity(levels.len());
    for j in 0..levels.len() {
        let column: Vec<f64> = samples.iter().map(|s| s[j]).collect();
        let (e, s) = lp_aggregate(&column, p);
        errors.push(e);
        se.push(s);
    }
    Ok(ErrorReport {
        levels: levels.iter().map(LevelSpec::abscissa).collect(),
        errors,
        se,
        replicates,
        p,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Abscissa {
    /// `log e` against `log ε`
    Epsilon,
    /// `log e` against `log N`
    Level,
    /// `log e` against `N` (exponential decay)
    LevelLinear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub theoretical_exponent: f64,
}

/// Least-squares fit of `log(error)` against the chosen abscissa.
pub fn fit_rate(report: &ErrorReport, abscissa: Abscissa, theoretical_exponent: f64) -> Result<RateFit> {
    let n = report.levels.len();
    if n < 4 || report.errors.len() != n {
        return Err(Error::DegenerateFit(format!("need at least 4 levels, got {n}")));
    }
    if let Some(e) = report.errors.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::DegenerateFit(format!("error {e} cannot enter a log fit")));
    }
    let xs: Vec<f64> = match abscissa {
        Abscissa::Epsilon | Abscissa::Level => {
            if report.levels.iter().any(|l| *l <= 0.0) {
                return Err(Error::DegenerateFit("non-positive abscissa in a log fit".into()));
            }
            report.levels.iter().map(|l| l.ln()).collect()
        }
        Abscissa::LevelLinear => report.levels.clone(),
    };
    let ys: Vec<f64> = report.errors.iter().map(|e| e.ln()).collect();
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        theoretical_exponent,
    })
}

/// Exponent `(p - q)/p*` of the small-jump bound `r2 = O(ε^{(p-q)/p*})`.
pub fn truncation_exponent(p: f64, q: f64) -> f64 {
    (p - q) / p.max(1.0)
}

/// Decay rate in `N` of `g(N)^{(p-q)/p*}` for `g(N) = λ⁻¹ e^{-N/γ}`.
pub fn bondesson_gamma_exponent(p: f64, q: f64, shape: f64) -> f64 {
    -truncation_exponent(p, q) / shape
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentCheck {
    pub mean: f64,
    pub variance: f64,
    pub mean_oracle: f64,
    pub variance_oracle: f64,
    pub z_mean: f64,
    pub z_variance: f64,
    pub count_mean: f64,
    pub passed: bool,
}

/// Mean and variance of `Σ_{ξ ∈ B} J` over replicates, against
/// `T · Leb(B ∩ U) · ∫ z π_N(dz)` and `T · Leb(B ∩ U) · ∫ z² π_N(dz)`.
pub fn moment_check(
    fields: &FieldSpec,
    level: &LevelSpec,
    lo: &[f64],
    hi: &[f64],
    replicates: usize,
    master_seed: u64,
) -> Result<MomentCheck> {
    if replicates < 2 {
        return Err(Error::InsufficientSample { got: replicates, need: 2 });
    }
    let inside = |x: &[f64]| x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *v >= *a && *v <= *b);
    let draws: Vec<(f64, f64)> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let f = fields.generate(level, &SeedScope::new(master_seed, r))?;
            let count = f.events.iter().filter(|e| inside(&e.xi)).count() as f64;
            Ok((f.sum_over(inside), count))
        })
        .collect::<Result<_>>()?;
    let n = replicates as f64;
    let sums: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let mean = sums.iter().sum::<f64>() / n;
    let m2 = sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    let m4 = sums.iter().map(|s| (s - mean).powi(4)).sum::<f64>() / n;
    let variance = m2 * n / (n - 1.0);
    let scale = fields.horizon * fields.overlap(level, lo, hi);
    let mean_oracle = scale * fields.kept_moment(1, level)?;
    let variance_oracle = scale * fields.kept_moment(2, level)?;
    // The oracle variance is exact; the empirical one is unstable under heavy
    // tails at small replicate counts.
    let se_mean = (variance_oracle / n).sqrt();
    let se_var = ((m4 - m2 * m2).max(0.0) / n).sqrt();
    let z = |d: f64, se: f64| if se > 0.0 { d / se } else if d == 0.0 { 0.0 } else { f64::INFINITY };
    let z_mean = z(mean - mean_oracle, se_mean);
    let z_variance = z(variance - variance_oracle, se_var);
    Ok(MomentCheck {
        mean,
        variance,
        mean_oracle,
        variance_oracle,
        z_mean,
        z_variance,
        count_mean: draws.iter().map(|d| d.1).sum::<f64>() / n,
        passed: z_mean.abs() < 4.0 && z_variance.abs() < 4.0,
    })
}

/// Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    })
}

/// KS statistic of pooled jump sizes; needs at least `10³` values.
pub fn jump_law_check<F: Fn(f64) -> f64>(sizes: &[f64], cdf: F) -> Result<f64> {
    if sizes.len() < 1000 {
        return Err(Error::InsufficientSample {
            got: sizes.len(),
            need: 1000,
        });
    }
    Ok(ks_statistic(sizes, cdf))
}

/// `|#positive - #negative| / total`.
pub fn sign_balance(sizes: &[f64]) -> f64 {
    let pos = sizes.iter().filter(|s| **s > 0.0).count() as f64;
    let neg = sizes.iter().filter(|s| **s < 0.0).count() as f64;
    if sizes.is_empty() {
        0.0
    } else {
        (pos - neg).abs() / sizes.len() as f64
    }
}

/// CDF of the normalized restriction of π to `[-ε, ε]ᶜ`.
pub fn truncated_jump_cdf(measure: &LevyMeasure, epsilon: f64) -> Result<impl Fn(f64) -> f64 + '_> {
    let mass = measure.tail_mass(epsilon)?;
    if !(mass > 0.0) {
        return Err(Error::CannotSample(format!("no mass outside [-{epsilon}, {epsilon}]")));
    }
    Ok(move |x: f64| -> f64 {
        let below = match &measure.kind {
            MeasureKind::Gamma { .. } => {
                if x <= epsilon {
                    0.0
                } else {
                    mass - measure
                        .one_sided_tail(x, crate::levy_measure::Sign::Plus)
                        .unwrap_or(f64::NAN)
                }
            }
            MeasureKind::Tabulated(t) => {
                let mut pts: Vec<f64> = vec![t.lower];
                pts.extend(t.breakpoints.iter().copied());
                pts.extend([-epsilon, epsilon, x, t.upper]);
                pts.retain(|p| *p >= t.lower && *p <= t.upper.min(x));
                pts.sort_by(f64::total_cmp);
                pts.dedup();
                integrate_pieces(
                    |z| if z.abs() > epsilon { (t.density)(z) } else { 0.0 },
                    &pts,
                    QuadOptions::default(),
                )
                .unwrap_or(f64::NAN)
            }
        };
        (below / mass).clamp(0.0, 1.0)
    })
}

/// CDF of pooled kept marks `{H(Γ, V) : Γ ≤ N}` for a Bondesson generator
/// with exponential marks: `1 - (1/N) ∫_0^N exp(-x · rate / g(r)) dr`.
pub fn bondesson_mark_cdf(generator: &SeriesGenerator, n_level: f64) -> Result<impl Fn(f64) -> f64 + '_> {
    let (envelope, rate) = match &generator.method {
        SeriesMethod::Bondesson {
            envelope,
            mark: MarkDistribution::Exponential { rate },
        } => (envelope, *rate),
        _ => {
            return Err(Error::Domain(
                "closed-form mark CDF needs a Bondesson generator with exponential marks".into(),
            ))
        }
    };
    Ok(move |x: f64| -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let tail = match envelope {
            Envelope::Gamma { .. } | Envelope::Custom(_) => integrate(
                |r| (-x * rate / envelope.eval(r)).exp(),
                0.0,
                n_level,
                QuadOptions::with_rel_tol(1e-10),
            )
            .map(|q| q.value)
            .unwrap_or(f64::NAN),
        };
        (1.0 - tail / n_level).clamp(0.0, 1.0)
    })
}

/// Fraction of replicates whose error sequence stays below `envelope` at
/// every level.
pub fn envelope_domination(samples: &[Vec<f64>], envelope: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let ok = samples
        .iter()
        .filter(|s| s.iter().zip(envelope).all(|(e, b)| e <= b))
        .count();
    ok as f64 / samples.len() as f64
}
