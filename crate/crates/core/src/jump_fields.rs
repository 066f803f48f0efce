//! Finite jump fields of the truncated noise: the small-jump cutoff scheme
//! and the series representation with LePage, Bondesson and thinning
//! generators.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::DomainTruncation;
use crate::levy_measure::{DensityFn, LevyMeasure, MeasureKind, Region, Sign};
use crate::quadrature::{integrate, integrate_pieces, QuadOptions};
use crate::rng::{Purpose, SeedScope, StreamRng};

/// Default cap on the expected number of events in one field.
pub const DEFAULT_MAX_EVENTS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesMeta {
    pub cell: usize,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpEvent {
    pub tau: f64,
    pub xi: Vec<f64>,
    pub size: f64,
    pub meta: Option<SeriesMeta>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Truncation,
    Series,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Truncation => "truncation",
            Scheme::Series => "series",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpField {
    /// Sorted by `tau`, ties by cell and then generation order.
    pub events: Vec<JumpEvent>,
    pub horizon: f64,
    pub level: usize,
    pub scheme: Scheme,
}

impl JumpField {
    pub fn empty(horizon: f64, level: usize, scheme: Scheme) -> Self {
        Self {
            events: Vec::new(),
            horizon,
            level,
            scheme,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// `Σ size` over events whose location satisfies `inside`.
    pub fn sum_over<F: Fn(&[f64]) -> bool>(&self, inside: F) -> f64 {
        self.events.iter().filter(|e| inside(&e.xi)).map(|e| e.size).sum()
    }

    /// Coarser truncation-scheme field obtained by keeping `|size| > epsilon`
    /// and `xi ∈ U^level`. Order is preserved.
    pub fn restrict(&self, epsilon: f64, trunc: &DomainTruncation, level: usize) -> JumpField {
        JumpField {
            events: self
                .events
                .iter()
                .filter(|e| e.size.abs() > epsilon && trunc.contains(level, &e.xi))
                .cloned()
                .collect(),
            horizon: self.horizon,
            level,
            scheme: self.scheme,
        }
    }

    /// Series-scheme field at a lower truncation: cells `≤ n_space` and
    /// levels `Γ ≤ n_level`.
    pub fn restrict_series(&self, n_space: usize, n_level: f64) -> JumpField {
        JumpField {
            events: self
                .events
                .iter()
                .filter(|e| matches!(e.meta, Some(m) if m.cell <= n_space && m.gamma <= n_level))
                .cloned()
                .collect(),
            horizon: self.horizon,
            level: n_space,
            scheme: self.scheme,
        }
    }

    /// Events with `tau < t`.
    pub fn truncate_before(&self, t: f64) -> JumpField {
        let cut = self.events.partition_point(|e| e.tau < t);
        JumpField {
            events: self.events[..cut].to_vec(),
            ..self.clone()
        }
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon > 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("horizon must be positive and finite, got {horizon}")))
    }
}

fn check_cap(expected: f64, cap: usize) -> Result<()> {
    if !expected.is_finite() {
        return Err(Error::config(
            "truncation.epsilon",
            format!("expected event count is not finite ({expected})"),
        ));
    }
    if expected > cap as f64 {
        return Err(Error::ResourceCap { expected, cap });
    }
    Ok(())
}

/// Small-jump cutoff field on `[0, T] × Uᴺ`: a Poisson number of events with
/// mean `T · Leb(Uᴺ) · π([-ε, ε]ᶜ)`, uniform locations, sizes from the
/// normalized tail.
pub fn generate_truncation_field(
    measure: &LevyMeasure,
    trunc: &DomainTruncation,
    level: usize,
    epsilon: f64,
    horizon: f64,
    scope: &SeedScope,
    max_events: usize,
) -> Result<JumpField> {
    check_horizon(horizon)?;
    if level == 0 {
        return Err(Error::Domain("truncation level must be at least 1".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let mass = measure.tail_mass(epsilon)?;
    let mean = horizon * trunc.measure(level) * mass;
    check_cap(mean, max_events)?;
    if mean <= 0.0 {
        return Ok(JumpField::empty(horizon, level, Scheme::Truncation));
    }
    let mut count_rng = scope.stream(0, Purpose::JumpCount);
    let count = Poisson::new(mean)
        .map_err(|e| Error::NumericalFailure(format!("Poisson({mean}): {e}")))?
        .sample(&mut count_rng) as usize;
    let sampler = measure.truncated_sampler(epsilon)?;
    let mut loc_rng = scope.stream(0, Purpose::JumpLocations);
    let mut size_rng = scope.stream(0, Purpose::JumpSizes);
    let mut events = Vec::with_capacity(count);
    for _ in 0..count {
        let tau = horizon * loc_rng.random::<f64>();
        let xi = trunc.sample_in_box(level, &mut loc_rng);
        let size = sampler.sample(&mut size_rng);
        events.push(JumpEvent {
            tau,
            xi,
            size,
            meta: None,
        });
    }
    events.retain(|e| e.size != 0.0);
    events.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    Ok(JumpField {
        events,
        horizon,
        level,
        scheme: Scheme::Truncation,
    })
}

pub type SamplerFn = Arc<dyn Fn(&mut StreamRng) -> f64 + Send + Sync>;
pub type EnvelopeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Mark law `F` of a series representation.
#[derive(Clone)]
pub enum MarkDistribution {
    /// `(δ₋₁ + δ₁)/2`
    Rademacher,
    Exponential { rate: f64 },
    Custom {
        sampler: SamplerFn,
        density: Option<DensityFn>,
        /// Support used for quadrature over marks.
        support: (f64, f64),
        symmetric: bool,
    },
}

impl fmt::Debug for MarkDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Rademacher => f.write_str("Rademacher"),
            Self::Exponential { rate } => f.debug_struct("Exponential").field("rate", rate).finish(),
            Self::Custom { support, symmetric, .. } => f
                .debug_struct("Custom")
                .field("support", support)
                .field("symmetric", symmetric)
                .finish_non_exhaustive(),
        }
    }
}

impl MarkDistribution {
    pub fn exponential(rate: f64) -> Result<Self> {
        if rate > 0.0 && rate.is_finite() {
            Ok(Self::Exponential { rate })
        } else {
            Err(Error::Domain(format!("exponential rate must be positive, got {rate}")))
        }
    }

    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        match self {
            Self::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Self::Exponential { rate } => Exp::new(*rate).expect("validated rate").sample(rng),
            Self::Custom { sampler, .. } => sampler(rng),
        }
    }

    pub fn density(&self, v: f64) -> Option<f64> {
        match self {
            Self::Rademacher => None,
            Self::Exponential { rate } => Some(if v < 0.0 { 0.0 } else { rate * (-rate * v).exp() }),
            Self::Custom { density, .. } => density.as_ref().map(|f| f(v)),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            Self::Rademacher => true,
            Self::Exponential { .. } => false,
            Self::Custom { symmetric, .. } => *symmetric,
        }
    }

    /// `E[φ(V)]`.
    pub fn expect<F: Fn(f64) -> f64>(&self, phi: F) -> Result<f64> {
        match self {
            Self::Rademacher => Ok(0.5 * (phi(-1.0) + phi(1.0))),
            Self::Exponential { rate } => {
                let r = *rate;
                Ok(integrate(|v| phi(v) * r * (-r * v).exp(), 0.0, f64::INFINITY, QuadOptions::default())?.value)
            }
            Self::Custom {
                density: Some(f),
                support,
                ..
            } => {
                let mut pts = vec![support.0];
                if support.0 < 0.0 && support.1 > 0.0 {
                    pts.push(0.0);
                }
                pts.push(support.1);
                integrate_pieces(|v| phi(v) * f(v), &pts, QuadOptions::default())
            }
            Self::Custom { density: None, .. } => Err(Error::CannotSample(
                "mark distribution without a density cannot be integrated".into(),
            )),
        }
    }
}

#[derive(Clone)]
pub enum Envelope {
    /// `g(r) = λ⁻¹ e^{-r/γ}`
    Gamma { shape: f64, rate: f64 },
    Custom(EnvelopeFn),
}

impl Envelope {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Self::Gamma { shape, rate } => (-r / shape).exp() / rate,
            Self::Custom(g) => g(r),
        }
    }
}

#[derive(Clone)]
pub enum SeriesMethod {
    /// `H(r, ±1) = ±ϱ(r/2, ±)` with Rademacher marks.
    LePage { measure: LevyMeasure },
    /// `H(r, v) = g(r) v`.
    Bondesson { envelope: Envelope, mark: MarkDistribution },
    /// `H(r, v) = v · 1{q(v) ≥ r}` with `q = dπ/dF`.
    Thinning { measure: LevyMeasure, mark: MarkDistribution },
}

impl fmt::Debug for SeriesMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LePage { measure } => f.debug_struct("LePage").field("measure", measure).finish(),
            Self::Bondesson { mark, .. } => f.debug_struct("Bondesson").field("mark", mark).finish_non_exhaustive(),
            Self::Thinning { measure, mark } => f
                .debug_struct("Thinning")
                .field("measure", measure)
                .field("mark", mark)
                .finish(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeriesGenerator {
    pub method: SeriesMethod,
}

pub fn lepage_generator(measure: &LevyMeasure) -> SeriesGenerator {
    SeriesGenerator {
        method: SeriesMethod::LePage {
            measure: measure.clone(),
        },
    }
}

pub fn bondesson_gamma_generator(shape: f64, rate: f64) -> Result<SeriesGenerator> {
    if !(shape > 0.0 && shape.is_finite() && rate > 0.0 && rate.is_finite()) {
        return Err(Error::Domain(format!(
            "gamma parameters must be positive, got shape {shape}, rate {rate}"
        )));
    }
    Ok(SeriesGenerator {
        method: SeriesMethod::Bondesson {
            envelope: Envelope::Gamma { shape, rate },
            mark: MarkDistribution::Exponential { rate: 1.0 },
        },
    })
}

/// Bondesson generator with a user envelope, checked to be non-increasing on
/// a lattice of `[0, horizon_r]`.
pub fn bondesson_generator(envelope: EnvelopeFn, mark: MarkDistribution, horizon_r: f64) -> Result<SeriesGenerator> {
    let n = 1000;
    let mut prev = envelope(0.0);
    for i in 1..=n {
        let r = horizon_r * i as f64 / n as f64;
        let g = envelope(r);
        if !(g >= 0.0) || g > prev {
            return Err(Error::InvariantViolation(format!(
                "Bondesson envelope must be non-negative and non-increasing; g({r}) = {g} after {prev}"
            )));
        }
        prev = g;
    }
    Ok(SeriesGenerator {
        method: SeriesMethod::Bondesson {
            envelope: Envelope::Custom(envelope),
            mark,
        },
    })
}

pub fn thinning_generator(measure: &LevyMeasure, mark: MarkDistribution) -> Result<SeriesGenerator> {
    let probe = |v: f64| -> Result<()> {
        let pd = measure.density(v);
        if pd > 0.0 {
            match mark.density(v) {
                Some(f) if f > 0.0 && f.is_finite() => Ok(()),
                Some(_) => Err(Error::InvalidRatio(format!(
                    "mark density vanishes at {v} where π has density {pd}"
                ))),
                None => Err(Error::InvalidRatio("thinning needs a mark distribution with a density".into())),
            }
        } else {
            Ok(())
        }
    };
    let (lo, hi) = match &measure.kind {
        MeasureKind::Gamma { rate, .. } => (0.0, 50.0 / rate),
        MeasureKind::Tabulated(t) => (t.lower, t.upper),
    };
    let n = 2000;
    for i in 0..=n {
        let v = lo + (hi - lo) * i as f64 / n as f64;
        if v != 0.0 {
            probe(v)?;
        }
    }
    if let MeasureKind::Gamma { rate, .. } = measure.kind {
        for k in -12..=0 {
            probe(10f64.powi(k) / rate)?;
        }
    }
    Ok(SeriesGenerator {
        method: SeriesMethod::Thinning {
            measure: measure.clone(),
            mark,
        },
    })
}

impl SeriesGenerator {
    pub fn mark(&self) -> &MarkDistribution {
        match &self.method {
            SeriesMethod::LePage { .. } => &MarkDistribution::Rademacher,
            SeriesMethod::Bondesson { mark, .. } | SeriesMethod::Thinning { mark, .. } => mark,
        }
    }

    /// `H(r, v)`.
    pub fn h(&self, r: f64, v: f64) -> Result<f64> {
        match &self.method {
            SeriesMethod::LePage { measure } => {
                if v > 0.0 {
                    measure.tail_inverse(0.5 * r, Sign::Plus)
                } else {
                    Ok(-measure.tail_inverse(0.5 * r, Sign::Minus)?)
                }
            }
            SeriesMethod::Bondesson { envelope, .. } => Ok(envelope.eval(r) * v),
            SeriesMethod::Thinning { measure, mark } => Ok(if thinning_ratio(measure, mark, v) >= r {
                v
            } else {
                0.0
            }),
        }
    }

    /// `q(v) = dπ/dF (v)` for the thinning method.
    pub fn ratio(&self, v: f64) -> Option<f64> {
        match &self.method {
            SeriesMethod::Thinning { measure, mark } => Some(thinning_ratio(measure, mark, v)),
            _ => None,
        }
    }

    /// `∫ z^k π_N(dz)` for the kept measure `π_N = (Leb|_{[0,N]} ⊗ F) ∘ H⁻¹`.
    pub fn kept_moment(&self, k: u32, n_level: f64) -> Result<f64> {
        let kf = k as i32;
        match &self.method {
            SeriesMethod::LePage { measure } => {
                // ∫_0^N H(r, ±1)^k dr/2 = ∫_{|z| ≥ ϱ(N/2, ±)} z^k π(dz)
                let mut total = 0.0;
                for (sign, s) in [(Sign::Plus, 1.0), (Sign::Minus, -1.0)] {
                    let x = measure.tail_inverse(0.5 * n_level, sign)?;
                    if x == 0.0 {
                        // whole half-line, which has mass below N/2
                        total += signed_half_moment(measure, k, 0.0, s)?;
                    } else {
                        total += signed_half_moment(measure, k, x, s)?;
                    }
                }
                Ok(total)
            }
            SeriesMethod::Bondesson { envelope, mark } => {
                let g_part = match envelope {
                    Envelope::Gamma { shape, rate } => {
                        let kk = k as f64;
                        if k == 0 {
                            n_level
                        } else {
                            rate.powi(-kf) * shape / kk * (-(-kk * n_level / shape).exp_m1())
                        }
                    }
                    Envelope::Custom(g) => integrate(|r| g(r).powi(kf), 0.0, n_level, QuadOptions::default())?.value,
                };
                Ok(g_part * mark.expect(|v| v.powi(kf))?)
            }
            SeriesMethod::Thinning { measure, mark } => {
                mark.expect(|v| v.powi(kf) * thinning_ratio(measure, mark, v).min(n_level))
            }
        }
    }

    /// `F({v : q(v) ≥ r})` for the thinning method.
    pub fn kept_fraction(&self, r: f64) -> Result<f64> {
        match &self.method {
            SeriesMethod::Thinning { measure, mark } => {
                mark.expect(|v| if thinning_ratio(measure, mark, v) >= r { 1.0 } else { 0.0 })
            }
            _ => Err(Error::Domain("kept fraction is defined for the thinning method only".into())),
        }
    }
}

fn thinning_ratio(measure: &LevyMeasure, mark: &MarkDistribution, v: f64) -> f64 {
    if let (MeasureKind::Gamma { shape, .. }, MarkDistribution::Exponential { rate: f_rate }) = (&measure.kind, mark) {
        if let MeasureKind::Gamma { rate, .. } = measure.kind {
            if rate == *f_rate {
                // γ v⁻¹ e^{-λv} / (λ e^{-λv}) without the exponentials
                return if v > 0.0 { shape / (rate * v) } else { 0.0 };
            }
        }
    }
    let pd = measure.density(v);
    if pd == 0.0 {
        return 0.0;
    }
    match mark.density(v) {
        Some(f) if f > 0.0 => pd / f,
        _ => f64::INFINITY,
    }
}

/// `∫_{s·[x, ∞)} z^k π(dz)`.
fn signed_half_moment(measure: &LevyMeasure, k: u32, x: f64, s: f64) -> Result<f64> {
    match &measure.kind {
        MeasureKind::Gamma { .. } => {
            if s < 0.0 {
                return Ok(0.0);
            }
            if x == 0.0 {
                measure.raw_moment(k, Region::All)
            } else {
                // both tails coincide for a one-sided measure
                measure.raw_moment(k, Region::Outside(x))
            }
        }
        MeasureKind::Tabulated(t) => {
            let (a, b) = if s > 0.0 {
                (x.max(t.lower).max(0.0), t.upper)
            } else {
                (t.lower, (-x).min(t.upper).min(0.0))
            };
            if b <= a {
                return Ok(0.0);
            }
            let mut pts = vec![a];
            pts.extend(t.breakpoints.iter().copied().filter(|z| *z > a && *z < b));
            pts.push(b);
            let kf = k as i32;
            integrate_pieces(
                |z| if z == 0.0 { 0.0 } else { z.powi(kf) * (t.density)(z) },
                &pts,
                QuadOptions::default(),
            )
        }
    }
}

/// Series-representation field: cells `Q¹ … Q^{n_space}`, per-cell Poisson
/// levels of rate `T · Leb(Qⁱ)` kept while `Γ ≤ n_level`, marks
/// `H(Γ, V)` with zero marks discarded.
pub fn generate_series_field(
    generator: &SeriesGenerator,
    trunc: &DomainTruncation,
    n_space: usize,
    n_level: f64,
    horizon: f64,
    scope: &SeedScope,
    max_events: usize,
) -> Result<JumpField> {
    check_horizon(horizon)?;
    if n_space == 0 {
        return Err(Error::Domain("series scheme needs at least one cell".into()));
    }
    if !(n_level > 0.0 && n_level.is_finite()) {
        return Err(Error::Domain(format!("level truncation must be positive, got {n_level}")));
    }
    check_cap(n_level * horizon * trunc.measure(n_space), max_events)?;
    let per_cell: Vec<Result<Vec<JumpEvent>>> = (1..=n_space)
        .into_par_iter()
        .map(|cell| series_cell(generator, trunc, cell, n_level, horizon, scope))
        .collect();
    let mut events = Vec::new();
    for cell in per_cell {
        events.extend(cell?);
    }
    events.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    Ok(JumpField {
        events,
        horizon,
        level: n_space,
        scheme: Scheme::Series,
    })
}

fn series_cell(
    generator: &SeriesGenerator,
    trunc: &DomainTruncation,
    cell: usize,
    n_level: f64,
    horizon: f64,
    scope: &SeedScope,
) -> Result<Vec<JumpEvent>> {
    let rate = horizon * trunc.cell_measure(cell);
    if !(rate > 0.0) {
        return Err(Error::Domain(format!("cell {cell} has zero Lebesgue measure")));
    }
    let increments = Exp::new(rate).map_err(|e| Error::Domain(format!("Exp({rate}): {e}")))?;
    let id = cell as u64;
    let mut level_rng = scope.stream(id, Purpose::SeriesLevels);
    let mut loc_rng = scope.stream(id, Purpose::SeriesLocations);
    let mut mark_rng = scope.stream(id, Purpose::SeriesMarks);
    let mark = generator.mark();
    let mut events = Vec::new();
    let mut gamma = 0.0;
    loop {
        gamma += increments.sample(&mut level_rng);
        if gamma > n_level {
            break;
        }
        let tau = horizon * loc_rng.random::<f64>();
        let xi = trunc.sample_in_cell(cell, &mut loc_rng);
        let v = mark.sample(&mut mark_rng);
        let size = generator.h(gamma, v)?;
        if size != 0.0 {
            events.push(JumpEvent {
                tau,
                xi,
                size,
                meta: Some(SeriesMeta { cell, gamma }),
            });
        }
    }
    Ok(events)
}
