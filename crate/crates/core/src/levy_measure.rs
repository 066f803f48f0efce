//! One-dimensional Lévy measures: moment and tail functionals, truncation
//! rates of the small-jump scheme, tail inversion, and sampling from the
//! normalized restriction to `[-ε, ε]ᶜ`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_kronrod15, integrate_pieces, QuadOptions};
use crate::special::{exp_integral_e1, gamma_fn, lower_incomplete_gamma, upper_incomplete_gamma};

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A density on `ℝ \ {0}` supported in `[lower, upper]`.
///
/// `breakpoints` lists interior points where the density is discontinuous or
/// kinked; quadrature keeps them on interval endpoints.
#[derive(Clone)]
pub struct TabulatedDensity {
    pub density: DensityFn,
    pub lower: f64,
    pub upper: f64,
    pub breakpoints: Vec<f64>,
}

impl fmt::Debug for TabulatedDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TabulatedDensity")
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("breakpoints", &self.breakpoints)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum MeasureKind {
    /// `γ z⁻¹ e^{-λz}` on `z > 0`.
    Gamma { shape: f64, rate: f64 },
    Tabulated(TabulatedDensity),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    /// `[-ε, ε]`
    Inside(f64),
    /// `[-ε, ε]ᶜ`
    Outside(f64),
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone)]
pub struct LevyMeasure {
    pub kind: MeasureKind,
    /// `π(-A) = π(A)`.
    pub symmetric: bool,
    /// `∫_{|z|≤1} |z| π(dz) < ∞` and no drift.
    pub finite_variation_no_drift: bool,
}

/// Small-jump truncation rates for one cutoff `ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationRates {
    pub r2: f64,
    pub r3: f64,
    pub p: f64,
    pub q: f64,
    pub epsilon: f64,
}

impl TruncationRates {
    /// Exponent `(p - q)/p*` of the generic bound `r2 = O(ε^{(p-q)/p*})`.
    pub fn bound_exponent(&self) -> f64 {
        (self.p - self.q) / self.p.max(1.0)
    }
}

fn quad_opts() -> QuadOptions {
    QuadOptions::default()
}

fn a4_error(detail: impl Into<String>) -> Error {
    Error::InvalidMeasure {
        assumption: "A4",
        detail: detail.into(),
    }
}

impl LevyMeasure {
    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) || !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Domain(format!(
                "gamma measure needs positive finite parameters, got shape {shape}, rate {rate}"
            )));
        }
        Ok(Self {
            kind: MeasureKind::Gamma { shape, rate },
            symmetric: false,
            finite_variation_no_drift: true,
        })
    }

    pub fn tabulated(
        density: DensityFn,
        lower: f64,
        upper: f64,
        symmetric: bool,
        finite_variation_no_drift: bool,
    ) -> Result<Self> {
        Self::tabulated_with_breakpoints(density, lower, upper, Vec::new(), symmetric, finite_variation_no_drift)
    }

    pub fn tabulated_with_breakpoints(
        density: DensityFn,
        lower: f64,
        upper: f64,
        mut breakpoints: Vec<f64>,
        symmetric: bool,
        finite_variation_no_drift: bool,
    ) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::Domain(format!(
                "tabulated support must be a finite interval, got [{lower}, {upper}]"
            )));
        }
        if !symmetric && !finite_variation_no_drift {
            return Err(Error::InvalidMeasure {
                assumption: "symmetric or finite variation",
                detail: "the measure must be symmetric or of finite variation without drift".into(),
            });
        }
        breakpoints.retain(|b| b.is_finite() && *b > lower && *b < upper && *b != 0.0);
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        let measure = Self {
            kind: MeasureKind::Tabulated(TabulatedDensity {
                density,
                lower,
                upper,
                breakpoints,
            }),
            symmetric,
            finite_variation_no_drift,
        };
        if finite_variation_no_drift {
            measure
                .p_moment(1.0, Region::Inside(1.0))
                .map_err(|_| Error::InvalidMeasure {
                    assumption: "finite variation",
                    detail: "∫_{|z|≤1} |z| π(dz) diverges".into(),
                })?;
        }
        Ok(measure)
    }

    pub fn density(&self, z: f64) -> f64 {
        match &self.kind {
            MeasureKind::Gamma { shape, rate } => {
                if z > 0.0 {
                    shape * (-rate * z).exp() / z
                } else {
                    0.0
                }
            }
            MeasureKind::Tabulated(t) => {
                if z == 0.0 || z < t.lower || z > t.upper {
                    0.0
                } else {
                    (t.density)(z)
                }
            }
        }
    }

    /// Checks A4 and the `p ≤ 1 ⇒ finite variation` requirement for `p`.
    pub fn validate_exponent(&self, p: f64) -> Result<()> {
        if !(p > 0.0 && p <= 2.0) {
            return Err(a4_error(format!("p must lie in (0, 2], got {p}")));
        }
        if p <= 1.0 && !self.finite_variation_no_drift {
            return Err(Error::InvalidMeasure {
                assumption: "finite variation",
                detail: format!("p = {p} ≤ 1 requires a finite-variation measure without drift"),
            });
        }
        self.p_moment(p, Region::All).map(|_| ())
    }

    /// Integration nodes covering `region`, split at 0, `±ε` and breakpoints.
    fn region_pieces(t: &TabulatedDensity, region: Region) -> Vec<Vec<f64>> {
        let mut pieces = Vec::new();
        let mut push = |a: f64, b: f64| {
            if b > a {
                let mut pts = vec![a];
                pts.extend(t.breakpoints.iter().copied().filter(|x| *x > a && *x < b));
                pts.push(b);
                pieces.push(pts);
            }
        };
        match region {
            Region::All => {
                push(t.lower, 0.0_f64.min(t.upper));
                push(0.0_f64.max(t.lower), t.upper);
            }
            Region::Inside(eps) => {
                push(t.lower.max(-eps), 0.0_f64.min(t.upper));
                push(0.0_f64.max(t.lower), t.upper.min(eps));
            }
            Region::Outside(eps) => {
                push(t.lower, (-eps).min(t.upper));
                push(eps.max(t.lower), t.upper);
            }
        }
        pieces
    }

    fn tabulated_integral<F: Fn(f64) -> f64>(&self, t: &TabulatedDensity, region: Region, weight: F) -> Result<f64> {
        let mut total = 0.0;
        for pts in Self::region_pieces(t, region) {
            total += integrate_pieces(
                |z| {
                    if z == 0.0 {
                        0.0
                    } else {
                        weight(z) * (t.density)(z)
                    }
                },
                &pts,
                quad_opts(),
            )?;
        }
        if total.is_finite() {
            Ok(total)
        } else {
            Err(Error::NumericalFailure("non-finite integral of the density".into()))
        }
    }

    /// `π([-ε, ε]ᶜ)`.
    pub fn tail_mass(&self, epsilon: f64) -> Result<f64> {
        if !(epsilon > 0.0) {
            return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
        }
        match &self.kind {
            MeasureKind::Gamma { shape, rate } => Ok(shape * exp_integral_e1(rate * epsilon)),
            MeasureKind::Tabulated(t) => self
                .tabulated_integral(t, Region::Outside(epsilon), |_| 1.0)
                .map_err(|e| Error::InvalidMeasure {
                    assumption: "tail mass",
                    detail: format!("π([-{epsilon}, {epsilon}]ᶜ) is not finite: {e}"),
                }),
        }
    }

    /// `∫_region |z|^p π(dz)`.
    pub fn p_moment(&self, p: f64, region: Region) -> Result<f64> {
        if !(p > 0.0 && p <= 2.0) {
            return Err(Error::Domain(format!("p must lie in (0, 2], got {p}")));
        }
        if let Region::Inside(eps) | Region::Outside(eps) = region {
            if !(eps >= 0.0) {
                return Err(Error::Domain(format!("epsilon must be nonnegative, got {eps}")));
            }
        }
        if region == Region::Inside(0.0) {
            return Ok(0.0);
        }
        match &self.kind {
            MeasureKind::Gamma { shape, rate } => {
                let scale = shape * rate.powf(-p);
                Ok(match region {
                    Region::Inside(eps) => scale * lower_incomplete_gamma(p, rate * eps),
                    Region::Outside(eps) => scale * upper_incomplete_gamma(p, rate * eps),
                    Region::All => scale * gamma_fn(p),
                })
            }
            MeasureKind::Tabulated(t) => self
                .tabulated_integral(t, region, |z| z.abs().powf(p))
                .map_err(|e| a4_error(format!("∫ |z|^{p} π(dz) over {region:?} diverges: {e}"))),
        }
    }

    /// Signed raw moment `∫_region z^k π(dz)`.
    pub fn raw_moment(&self, k: u32, region: Region) -> Result<f64> {
        if region == Region::Inside(0.0) {
            return Ok(0.0);
        }
        match &self.kind {
            MeasureKind::Gamma { .. } if (1..=2).contains(&k) => self.p_moment(k as f64, region),
            MeasureKind::Gamma { shape, rate } => {
                let scale = shape * rate.powf(-(k as f64));
                let a = k as f64;
                Ok(match region {
                    Region::Inside(eps) => scale * lower_incomplete_gamma(a, rate * eps),
                    Region::Outside(eps) => scale * upper_incomplete_gamma(a, rate * eps),
                    Region::All => scale * gamma_fn(a),
                })
            }
            MeasureKind::Tabulated(t) => self.tabulated_integral(t, region, |z| z.powi(k as i32)),
        }
    }

    /// Rates `r2 = (∫_{[-ε,ε]} |z|^p π)^{1/p*}` and
    /// `r3 = |∫_{[-ε,ε]} z π| · 1{p > 1, not symmetric}`.
    pub fn truncation_rates(&self, p: f64, q: f64, epsilon: f64) -> Result<TruncationRates> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        if !(q > 0.0 && q < p) {
            return Err(Error::Domain(format!("q must lie in (0, p), got q = {q}, p = {p}")));
        }
        let p_star = p.max(1.0);
        let r2 = self.p_moment(p, Region::Inside(epsilon))?.powf(1.0 / p_star);
        let r3 = if p > 1.0 && !self.symmetric {
            self.raw_moment(1, Region::Inside(epsilon))?.abs()
        } else {
            0.0
        };
        Ok(TruncationRates {
            r2,
            r3,
            p,
            q,
            epsilon,
        })
    }

    /// One-sided tail `π(±[x, ∞))` for `x > 0`.
    pub fn one_sided_tail(&self, x: f64, sign: Sign) -> Result<f64> {
        match &self.kind {
            MeasureKind::Gamma { shape, rate } => Ok(match sign {
                Sign::Plus => shape * exp_integral_e1(rate * x),
                Sign::Minus => 0.0,
            }),
            MeasureKind::Tabulated(t) => {
                let (a, b) = match sign {
                    Sign::Plus => (x.max(t.lower).max(0.0), t.upper),
                    Sign::Minus => (t.lower, (-x).min(t.upper).min(0.0)),
                };
                if b <= a {
                    return Ok(0.0);
                }
                let mut pts = vec![a];
                pts.extend(t.breakpoints.iter().copied().filter(|z| *z > a && *z < b));
                pts.push(b);
                integrate_pieces(|z| if z == 0.0 { 0.0 } else { (t.density)(z) }, &pts, quad_opts())
            }
        }
    }

    /// Generalized inverse `inf{x > 0 : π(±[x, ∞)) < r}`.
    ///
    /// Returns 0 when the one-sided mass never reaches `r` (infimum over the
    /// whole half-line).
    pub fn tail_inverse(&self, r: f64, sign: Sign) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("tail level must be positive, got {r}")));
        }
        match &self.kind {
            MeasureKind::Gamma { shape, rate } => match sign {
                Sign::Minus => Ok(0.0),
                Sign::Plus => Ok(gamma_tail_inverse(*shape, *rate, r)),
            },
            MeasureKind::Tabulated(t) => {
                let hi = match sign {
                    Sign::Plus => t.upper,
                    Sign::Minus => -t.lower,
                };
                if hi <= 0.0 {
                    return Ok(0.0);
                }
                let f = |x: f64| self.one_sided_tail(x, sign).map(|v| v - r);
                // Bracket by halving down from the support edge, then refine
                // with the Illinois variant of regula falsi.
                let (mut a, mut fa) = (hi, f(hi)?);
                let (mut b, mut fb) = (hi, fa);
                let mut total_checked = false;
                while fa < 0.0 {
                    (b, fb) = (a, fa);
                    a *= 0.5;
                    if !total_checked && a < 1e-12 * hi {
                        total_checked = true;
                        // Finite total mass below r: every x > 0 qualifies.
                        if matches!(self.one_sided_tail(f64::MIN_POSITIVE, sign), Ok(total) if total < r) {
                            return Ok(0.0);
                        }
                    }
                    if a < 1e-300 {
                        return Ok(b);
                    }
                    fa = f(a)?;
                }
                if fb >= 0.0 {
                    return Ok(b);
                }
                let mut side = 0i8;
                for _ in 0..200 {
                    if b - a <= 1e-14 * b {
                        break;
                    }
                    let mut c = (a * fb - b * fa) / (fb - fa);
                    if !(c > a && c < b) {
                        c = 0.5 * (a + b);
                    }
                    let fc = f(c)?;
                    if fc >= 0.0 {
                        (a, fa) = (c, fc);
                        if side == -1 {
                            fb *= 0.5;
                        }
                        side = -1;
                    } else {
                        (b, fb) = (c, fc);
                        if side == 1 {
                            fa *= 0.5;
                        }
                        side = 1;
                    }
                }
                Ok(b)
            }
        }
    }

    /// Precomputes a sampler for `π / π([-ε, ε]ᶜ)`.
    pub fn truncated_sampler(&self, epsilon: f64) -> Result<TruncatedJumpSampler> {
        let mass = self.tail_mass(epsilon)?;
        if !(mass > 0.0) {
            return Err(Error::CannotSample(format!(
                "π([-{epsilon}, {epsilon}]ᶜ) = 0; nothing to sample"
            )));
        }
        match &self.kind {
            MeasureKind::Gamma { shape, rate } => Ok(TruncatedJumpSampler::Gamma {
                shape: *shape,
                rate: *rate,
                mass,
            }),
            MeasureKind::Tabulated(t) => TabulatedSampler::build(t, epsilon).map(TruncatedJumpSampler::Tabulated),
        }
    }

    /// One draw from the normalized restriction of π to `[-ε, ε]ᶜ`.
    pub fn sample_truncated_jump<R: Rng + ?Sized>(&self, epsilon: f64, rng: &mut R) -> Result<f64> {
        Ok(self.truncated_sampler(epsilon)?.sample(rng))
    }
}

/// Solves `γ E1(λx) = r` for `x` by bisection in `ln x`.
fn gamma_tail_inverse(shape: f64, rate: f64, r: f64) -> f64 {
    let target = r / shape;
    let tail = |x: f64| exp_integral_e1(rate * x);
    // E1 is strictly decreasing from ∞ to 0, so a bracket always exists.
    let mut lo = 1.0 / rate;
    let mut hi = 1.0 / rate;
    while tail(lo) < target {
        lo *= 0.5;
        if lo < 1e-300 {
            return 0.0;
        }
    }
    while tail(hi) >= target {
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::MAX;
        }
    }
    let (mut llo, mut lhi) = (lo.ln(), hi.ln());
    for _ in 0..200 {
        let mid = 0.5 * (llo + lhi);
        if mid <= llo || mid >= lhi {
            break;
        }
        if tail(mid.exp()) < target {
            lhi = mid;
        } else {
            llo = mid;
        }
        if lhi - llo < 1e-15 {
            break;
        }
    }
    lhi.exp()
}

const TABULATED_SEGMENTS: usize = 256;

/// Piecewise CDF table over `[-ε, ε]ᶜ ∩ support`, inverted segment-wise.
#[derive(Clone)]
pub struct TabulatedSampler {
    density: DensityFn,
    nodes: Vec<f64>,
    cumulative: Vec<f64>,
}

impl fmt::Debug for TabulatedSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TabulatedSampler")
            .field("segments", &(self.nodes.len().saturating_sub(1)))
            .field("mass", &self.cumulative.last())
            .finish()
    }
}

impl TabulatedSampler {
    fn build(t: &TabulatedDensity, epsilon: f64) -> Result<Self> {
        let mut nodes: Vec<f64> = Vec::new();
        let mut cumulative = Vec::new();
        let mut running = 0.0;
        let pieces = LevyMeasure::region_pieces(t, Region::Outside(epsilon));
        for pts in pieces {
            // Refine each piece uniformly; keep the breakpoints as nodes.
            let mut piece_nodes = Vec::new();
            for w in pts.windows(2) {
                let n = TABULATED_SEGMENTS;
                for k in 0..n {
                    piece_nodes.push(w[0] + (w[1] - w[0]) * k as f64 / n as f64);
                }
            }
            piece_nodes.push(*pts.last().unwrap());
            // Zero-mass gap between the negative and positive pieces.
            if nodes.is_empty() {
                cumulative.push(0.0);
                nodes.push(piece_nodes[0]);
            } else {
                nodes.push(piece_nodes[0]);
                cumulative.push(running);
            }
            for w in piece_nodes.windows(2) {
                let seg = crate::quadrature::integrate(
                    |z| if z == 0.0 { 0.0 } else { (t.density)(z) },
                    w[0],
                    w[1],
                    quad_opts(),
                )?;
                running += seg.value;
                nodes.push(w[1]);
                cumulative.push(running);
            }
        }
        if !(running > 0.0 && running.is_finite()) {
            return Err(Error::CannotSample("tabulated tail mass is zero or non-finite".into()));
        }
        Ok(Self {
            density: t.density.clone(),
            nodes,
            cumulative,
        })
    }

    pub fn mass(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let target = rng.random::<f64>() * self.mass();
        // first node whose cumulative mass exceeds the target
        let idx = self.cumulative.partition_point(|&c| c <= target).clamp(1, self.nodes.len() - 1);
        let (a, b) = (self.nodes[idx - 1], self.nodes[idx]);
        let residual = target - self.cumulative[idx - 1];
        let f = |z: f64| if z == 0.0 { 0.0 } else { (self.density)(z) };
        let (mut lo, mut hi) = (a, b);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let (partial, _) = gauss_kronrod15(&f, a, mid);
            if partial < residual {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = 0.5 * (lo + hi);
        if x == 0.0 {
            hi
        } else {
            x
        }
    }
}

/// Sampler for the normalized restriction of a Lévy measure to `[-ε, ε]ᶜ`.
#[derive(Debug, Clone)]
pub enum TruncatedJumpSampler {
    /// Inverse-tail bisection on `γ E1(λx) = U · γ E1(λε)`.
    Gamma { shape: f64, rate: f64, mass: f64 },
    Tabulated(TabulatedSampler),
}

impl TruncatedJumpSampler {
    pub fn mass(&self) -> f64 {
        match self {
            Self::Gamma { mass, .. } => *mass,
            Self::Tabulated(t) => t.mass(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Gamma { shape, rate, mass } => {
                // U ∈ (0, 1]
                let u = 1.0 - rng.random::<f64>();
                gamma_tail_inverse(*shape, *rate, u * mass)
            }
            Self::Tabulated(t) => t.sample(rng),
        }
    }
}
