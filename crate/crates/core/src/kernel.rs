//! Volterra kernels, the spatial truncation `Uᴺ`, the spatial-truncation
//! rate `r1`, and the integrability checks A1–A7.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::levy_measure::LevyMeasure;
use crate::quadrature::{integrate, QuadOptions};
use crate::solver::Sigma;
use crate::special::normal_sf;

pub type KernelFn = Arc<dyn Fn(f64, &[f64], f64, &[f64]) -> f64 + Send + Sync>;
pub type BoundFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum KernelKind {
    /// Heat kernel `g(t-s, x-y)` in dimension `d`.
    Heat { d: usize },
    /// User kernel `G(t, x; s, y)` with an optional translation-invariant
    /// majorant `|G(t,x;s,y)| ≤ g(t-s, x-y)`.
    Custom {
        d: usize,
        evaluator: KernelFn,
        convolution_bound: Option<BoundFn>,
    },
}

impl fmt::Debug for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelKind::Heat { d } => f.debug_struct("Heat").field("d", d).finish(),
            KernelKind::Custom {
                d, convolution_bound, ..
            } => f
                .debug_struct("Custom")
                .field("d", d)
                .field("convolution_bound", &convolution_bound.is_some())
                .finish_non_exhaustive(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// Integrability exponent the kernel is validated against.
    pub p: f64,
}

/// Heat kernel `exp(-‖z‖²/(4u)) / (4πu)^{d/2}` for `u > 0`, else 0.
#[inline]
pub fn heat_kernel(u: f64, z: &[f64]) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    let r2: f64 = z.iter().map(|v| v * v).sum();
    heat_kernel_sq(u, r2, z.len())
}

#[inline]
fn heat_kernel_sq(u: f64, r2: f64, d: usize) -> f64 {
    let norm = match d {
        1 => (4.0 * PI * u).sqrt(),
        2 => 4.0 * PI * u,
        _ => (4.0 * PI * u).powf(d as f64 / 2.0),
    };
    (-r2 / (4.0 * u)).exp() / norm
}

impl KernelSpec {
    pub fn heat(d: usize, p: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("heat kernel dimension must be positive".into()));
        }
        check_p(p)?;
        Ok(Self {
            kind: KernelKind::Heat { d },
            p,
        })
    }

    pub fn custom(d: usize, p: f64, evaluator: KernelFn, convolution_bound: Option<BoundFn>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("kernel dimension must be positive".into()));
        }
        check_p(p)?;
        Ok(Self {
            kind: KernelKind::Custom {
                d,
                evaluator,
                convolution_bound,
            },
            p,
        })
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            KernelKind::Heat { d } | KernelKind::Custom { d, .. } => *d,
        }
    }

    /// `G(t, x; s, y)`; exactly 0 whenever `s ≥ t`.
    #[inline]
    pub fn evaluate(&self, t: f64, x: &[f64], s: f64, y: &[f64]) -> f64 {
        if s >= t {
            return 0.0;
        }
        match &self.kind {
            KernelKind::Heat { d } => {
                let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                heat_kernel_sq(t - s, r2, *d)
            }
            KernelKind::Custom { evaluator, .. } => evaluator(t, x, s, y),
        }
    }

    /// Raw evaluator without the causality guard (used to spot-check A3).
    fn evaluate_unguarded(&self, t: f64, x: &[f64], s: f64, y: &[f64]) -> f64 {
        match &self.kind {
            KernelKind::Heat { .. } => self.evaluate(t, x, s, y),
            KernelKind::Custom { evaluator, .. } => evaluator(t, x, s, y),
        }
    }

    /// Spatial-truncation rate `r1ᴺ(T, K)`, a supremum over a lattice on
    /// `[0, T] × K` of
    /// `∫∫_{(Uᴺ)ᶜ} |G| · 1{p>1, not symmetric} + (∫∫_{(Uᴺ)ᶜ} |G|^p)^{1/p*}`.
    pub fn r1_rate(
        &self,
        trunc: &DomainTruncation,
        level: usize,
        horizon: f64,
        k: &CompactBox,
        opts: &R1Options,
    ) -> Result<f64> {
        if level == 0 {
            return Err(Error::Domain("truncation level must be at least 1".into()));
        }
        if !(horizon > 0.0) {
            return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
        }
        let d = self.dim();
        if trunc.dim() != d || k.center.len() != d {
            return Err(Error::Domain(format!(
                "dimension mismatch: kernel {d}, truncation {}, K {}",
                trunc.dim(),
                k.center.len()
            )));
        }
        let p = self.p;
        let p_star = p.max(1.0);
        let drift = p > 1.0 && !opts.symmetric_noise;
        let radius = trunc.radius(level);
        let lo: Vec<f64> = trunc.center.iter().map(|c| c - radius).collect();
        let hi: Vec<f64> = trunc.center.iter().map(|c| c + radius).collect();
        let n = opts.lattice.max(2);
        let times: Vec<f64> = (1..n).map(|i| horizon * i as f64 / (n - 1) as f64).collect();
        let points = k.lattice(n);
        let mut sup: f64 = 0.0;
        for x in &points {
            for &t in &times {
                let (first, power) = match &self.kind {
                    KernelKind::Heat { .. } => {
                        let first = if drift {
                            heat_complement_integral(1.0, t, x, &lo, &hi)?
                        } else {
                            0.0
                        };
                        (first, heat_complement_integral(p, t, x, &lo, &hi)?)
                    }
                    KernelKind::Custom { .. } => {
                        let first = if drift {
                            self.custom_complement_integral(1.0, t, x, &lo, &hi)?
                        } else {
                            0.0
                        };
                        (first, self.custom_complement_integral(p, t, x, &lo, &hi)?)
                    }
                };
                let value = first + power.max(0.0).powf(1.0 / p_star);
                if !value.is_finite() {
                    return Err(Error::NumericalFailure(format!(
                        "r1 integrand is not finite at t = {t}, x = {x:?}"
                    )));
                }
                sup = sup.max(value);
            }
        }
        Ok(sup)
    }

    fn custom_complement_integral(&self, q: f64, t: f64, x: &[f64], lo: &[f64], hi: &[f64]) -> Result<f64> {
        let opts = QuadOptions::with_rel_tol(1e-7);
        let outer = |s: f64| {
            let f = |y: &[f64]| self.evaluate(t, x, s, y).abs().powf(q);
            integrate_box_complement(&f, lo, hi, opts).unwrap_or(f64::NAN)
        };
        let r = integrate(outer, 0.0, t, opts)?;
        if r.value.is_nan() {
            return Err(Error::NumericalFailure(
                "inner quadrature over (Uᴺ)ᶜ failed to converge".into(),
            ));
        }
        Ok(r.value)
    }

    /// Checks A1–A7 (and `p < 1 + 2/d` for the heat kernel).
    pub fn validate_assumptions(
        &self,
        measure: &LevyMeasure,
        sigma: Option<&Sigma>,
        horizon: f64,
    ) -> ValidationReport {
        let mut report = ValidationReport::default();
        let p = self.p;
        let d = self.dim();
        let drift = p > 1.0 && !measure.symmetric;

        report.push(
            "A1",
            CheckStatus::Pass,
            "Y0 is deterministic or drawn from a substream independent of the noise",
        );

        match sigma {
            Some(s) => match s.check_lipschitz() {
                Ok(()) => report.push("A2", CheckStatus::Pass, "sigma Lipschitz on the validation lattice"),
                Err(e) => report.push("A2", CheckStatus::Fail, e.to_string()),
            },
            None => report.push("A2", CheckStatus::NotCheckable, "no sigma supplied"),
        }

        match self.causality_violation(horizon) {
            None => report.push("A3", CheckStatus::Pass, "G vanishes for s ≥ t on the spot-check lattice"),
            Some((t, s)) => report.push("A3", CheckStatus::Fail, format!("G(t={t}, ·; s={s}, ·) ≠ 0 with s ≥ t")),
        }

        match measure.validate_exponent(p) {
            Ok(()) => report.push("A4", CheckStatus::Pass, format!("∫ |z|^{p} π(dz) < ∞")),
            Err(e) => report.push("A4", CheckStatus::Fail, e.to_string()),
        }

        if let KernelKind::Heat { d } = self.kind {
            let limit = 1.0 + 2.0 / d as f64;
            if p < limit {
                report.push("heat-p", CheckStatus::Pass, format!("p = {p} < 1 + 2/d = {limit}"));
            } else {
                report.push("heat-p", CheckStatus::Fail, format!("p = {p} ≥ 1 + 2/d = {limit}"));
            }
        }

        let a5 = match &self.kind {
            KernelKind::Heat { d } => heat_total_integral(p, drift, horizon, *d),
            KernelKind::Custom {
                convolution_bound: Some(g),
                ..
            } => bound_total_integral(g.as_ref(), p, drift, horizon, d),
            KernelKind::Custom { .. } => self.custom_total_integral(p, drift, horizon),
        };
        let a5_ok = match a5 {
            Ok(v) if v.is_finite() => {
                report.push("A5", CheckStatus::Pass, format!("sup ∫∫ G̃ ≈ {v:.6e}"));
                true
            }
            Ok(v) => {
                report.push("A5", CheckStatus::Fail, format!("∫∫ G̃ = {v}"));
                false
            }
            Err(e) => {
                report.push("A5", CheckStatus::Fail, format!("∫∫ G̃ not finite: {e}"));
                false
            }
        };

        let has_bound = matches!(
            self.kind,
            KernelKind::Heat { .. }
                | KernelKind::Custom {
                    convolution_bound: Some(_),
                    ..
                }
        );
        for id in ["A6", "A7"] {
            if has_bound && a5_ok {
                report.push(id, CheckStatus::Pass, "implied by a convolution majorant satisfying A5");
            } else if has_bound {
                report.push(id, CheckStatus::Fail, "majorant fails A5");
            } else {
                report.push(id, CheckStatus::NotCheckable, "no convolution majorant supplied");
            }
        }
        report
    }

    fn causality_violation(&self, horizon: f64) -> Option<(f64, f64)> {
        let d = self.dim();
        let n = 7;
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![-1.0 + 2.0 * i as f64 / (n - 1) as f64; d])
            .collect();
        for i in 0..n {
            let t = horizon * i as f64 / (n - 1) as f64;
            for j in i..n + 2 {
                let s = horizon * j as f64 / (n - 1) as f64;
                for x in &xs {
                    for y in &xs {
                        let v = self.evaluate_unguarded(t, x, s, y);
                        if v != 0.0 {
                            return Some((t, s));
                        }
                    }
                }
            }
        }
        None
    }

    fn custom_total_integral(&self, p: f64, drift: bool, horizon: f64) -> Result<f64> {
        let d = self.dim();
        let opts = QuadOptions::with_rel_tol(1e-6);
        let mut sup: f64 = 0.0;
        let grid = [-1.0, 0.0, 1.0];
        for &xv in &grid {
            let x = vec![xv; d];
            let inner = |s: f64| {
                let f = |y: &[f64]| {
                    let g = self.evaluate(horizon, &x, s, y).abs();
                    g.powf(p) + if drift { g } else { 0.0 }
                };
                integrate_full_space(&f, d, opts).unwrap_or(f64::NAN)
            };
            let v = integrate(inner, 0.0, horizon, opts)?.value;
            if v.is_nan() {
                return Err(Error::NumericalFailure("inner integral over ℝᵈ did not converge".into()));
            }
            sup = sup.max(v);
        }
        Ok(sup)
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p <= 2.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("integrability exponent p must lie in (0, 2], got {p}")))
    }
}

/// `∫_0^T ∫_{ℝᵈ} g^p + g·1{drift}` via the closed-form spatial integral
/// `∫ g(u, z)^p dz = (4πu)^{d(1-p)/2} p^{-d/2}`.
fn heat_total_integral(p: f64, drift: bool, horizon: f64, d: usize) -> Result<f64> {
    let df = d as f64;
    let profile = |u: f64| (4.0 * PI * u).powf(df * (1.0 - p) / 2.0) * p.powf(-df / 2.0);
    let power = integrate(profile, 0.0, horizon, QuadOptions::default())?.value;
    Ok(power + if drift { horizon } else { 0.0 })
}

fn bound_total_integral(
    g: &(dyn Fn(f64, &[f64]) -> f64 + Send + Sync),
    p: f64,
    drift: bool,
    horizon: f64,
    d: usize,
) -> Result<f64> {
    let opts = QuadOptions::with_rel_tol(1e-6);
    let inner = |u: f64| {
        let f = |z: &[f64]| {
            let v = g(u, z).abs();
            v.powf(p) + if drift { v } else { 0.0 }
        };
        integrate_full_space(&f, d, opts).unwrap_or(f64::NAN)
    };
    let v = integrate(inner, 0.0, horizon, opts)?.value;
    if v.is_nan() {
        Err(Error::NumericalFailure("inner integral of the majorant did not converge".into()))
    } else {
        Ok(v)
    }
}

/// `∫_0^t ∫_{box ᶜ} g(u, x - y)^q dy du` for the heat kernel, with the
/// spatial part in closed form through normal tails.
pub(crate) fn heat_complement_integral(q: f64, t: f64, x: &[f64], lo: &[f64], hi: &[f64]) -> Result<f64> {
    let d = x.len() as f64;
    let profile = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let sd = (2.0 * u / q).sqrt();
        // log of the probability that every coordinate stays inside the box
        let mut log_inside = 0.0;
        for k in 0..x.len() {
            let a = (lo[k] - x[k]) / sd;
            let b = (hi[k] - x[k]) / sd;
            let outside = normal_sf(-a) + normal_sf(b);
            log_inside += (-outside.min(1.0)).ln_1p();
        }
        let mass_outside = -log_inside.exp_m1();
        (4.0 * PI * u).powf(d * (1.0 - q) / 2.0) * q.powf(-d / 2.0) * mass_outside
    };
    Ok(integrate(profile, 0.0, t, QuadOptions::default())?.value)
}

/// `∫_{ℝᵈ} f(y) dy` by nested one-dimensional quadrature.
fn integrate_full_space(f: &dyn Fn(&[f64]) -> f64, d: usize, opts: QuadOptions) -> Result<f64> {
    let ranges = vec![(f64::NEG_INFINITY, f64::INFINITY); d];
    integrate_product(f, &ranges, opts)
}

/// `∫_{box ᶜ} f(y) dy`, split into the `2d` slabs
/// `[lo_j, hi_j]_{j<k} × (ℝ \ [lo_k, hi_k]) × ℝ^{d-k-1}`.
pub(crate) fn integrate_box_complement(
    f: &dyn Fn(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    opts: QuadOptions,
) -> Result<f64> {
    let d = lo.len();
    let mut total = 0.0;
    for k in 0..d {
        for side in [(f64::NEG_INFINITY, lo[k]), (hi[k], f64::INFINITY)] {
            let ranges: Vec<(f64, f64)> = (0..d)
                .map(|j| match j.cmp(&k) {
                    std::cmp::Ordering::Less => (lo[j], hi[j]),
                    std::cmp::Ordering::Equal => side,
                    std::cmp::Ordering::Greater => (f64::NEG_INFINITY, f64::INFINITY),
                })
                .collect();
            total += integrate_product(f, &ranges, opts)?;
        }
    }
    Ok(total)
}

fn integrate_product(f: &dyn Fn(&[f64]) -> f64, ranges: &[(f64, f64)], opts: QuadOptions) -> Result<f64> {
    fn rec(
        f: &dyn Fn(&[f64]) -> f64,
        ranges: &[(f64, f64)],
        prefix: &[f64],
        opts: QuadOptions,
    ) -> Result<f64> {
        let depth = prefix.len();
        if depth == ranges.len() {
            return Ok(f(prefix));
        }
        let (a, b) = ranges[depth];
        let cell = std::cell::RefCell::new(prefix.to_vec());
        let failed = std::cell::Cell::new(false);
        let r = integrate(
            |v| {
                let mut p = cell.borrow_mut();
                p.truncate(depth);
                p.push(v);
                let local = p.clone();
                drop(p);
                match rec(f, ranges, &local, opts) {
                    Ok(x) => x,
                    Err(_) => {
                        failed.set(true);
                        0.0
                    }
                }
            },
            a,
            b,
            opts,
        )?;
        if failed.get() {
            return Err(Error::NumericalFailure("nested quadrature failed".into()));
        }
        Ok(r.value)
    }
    rec(f, ranges, &[], opts)
}

/// Closed bound `C · exp(-p(N-R)²/(4T)) · (N-R)^{d-2}` on `(r1ᴺ)^{p*}` for
/// the heat kernel with `K = {‖x‖ ≤ R}` and `Uᴺ = {‖x‖ ≤ N}`.
pub fn heat_r1_bound(d: usize, p: f64, horizon: f64, k_radius: f64, n_radius: f64, c: f64) -> Result<f64> {
    if !(n_radius > k_radius) {
        return Err(Error::Domain(format!(
            "bound needs N > R, got N = {n_radius}, R = {k_radius}"
        )));
    }
    if !(horizon > 0.0) || !(c > 0.0) {
        return Err(Error::Domain("horizon and constant must be positive".into()));
    }
    let gap = n_radius - k_radius;
    Ok(c * (-p * gap * gap / (4.0 * horizon)).exp() * gap.powi(d as i32 - 2))
}

#[derive(Debug, Clone, Copy)]
pub struct R1Options {
    /// Noise in the symmetric class (drops the `|G|` term).
    pub symmetric_noise: bool,
    /// Points per axis of the `[0, T] × K` lattice.
    pub lattice: usize,
}

impl Default for R1Options {
    fn default() -> Self {
        Self {
            symmetric_noise: false,
            lattice: 21,
        }
    }
}

/// `{x : ‖x - center‖∞ ≤ radius}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactBox {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl CompactBox {
    pub fn centered(d: usize, radius: f64) -> Self {
        Self {
            center: vec![0.0; d],
            radius,
        }
    }

    fn lattice(&self, n: usize) -> Vec<Vec<f64>> {
        let axis: Vec<f64> = (0..n)
            .map(|i| -self.radius + 2.0 * self.radius * i as f64 / (n - 1) as f64)
            .collect();
        let mut points = vec![Vec::new()];
        for c in &self.center {
            points = points
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |a| {
                        let mut p = prefix.clone();
                        p.push(c + a);
                        p
                    })
                })
                .collect();
        }
        points
    }
}

/// Nested ∞-norm boxes `Uᴺ = {‖x - center‖∞ ≤ N · radius_per_level}` and
/// their shells `Qⁱ = Uⁱ \ Uⁱ⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainTruncation {
    pub center: Vec<f64>,
    pub radius_per_level: f64,
}

impl DomainTruncation {
    pub fn new(center: Vec<f64>, radius_per_level: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::Domain("domain center needs at least one coordinate".into()));
        }
        if !(radius_per_level > 0.0 && radius_per_level.is_finite()) {
            return Err(Error::Domain(format!(
                "radius per level must be positive, got {radius_per_level}"
            )));
        }
        Ok(Self {
            center,
            radius_per_level,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn radius(&self, level: usize) -> f64 {
        self.radius_per_level * level as f64
    }

    /// `Leb(Uᴺ)`.
    pub fn measure(&self, level: usize) -> f64 {
        (2.0 * self.radius(level)).powi(self.dim() as i32)
    }

    /// `Leb(Qⁱ)`.
    pub fn cell_measure(&self, cell: usize) -> f64 {
        if cell == 0 {
            return 0.0;
        }
        self.measure(cell) - self.measure(cell - 1)
    }

    pub fn contains(&self, level: usize, x: &[f64]) -> bool {
        let r = self.radius(level);
        x.iter().zip(&self.center).all(|(a, c)| (a - c).abs() <= r)
    }

    /// Smallest `i` with `x ∈ Qⁱ`.
    pub fn cell_of(&self, x: &[f64]) -> usize {
        let dist = x
            .iter()
            .zip(&self.center)
            .map(|(a, c)| (a - c).abs())
            .fold(0.0, f64::max);
        let i = (dist / self.radius_per_level).ceil() as usize;
        i.max(1)
    }

    /// Uniform point in `Uᴺ`.
    pub fn sample_in_box<R: Rng + ?Sized>(&self, level: usize, rng: &mut R) -> Vec<f64> {
        let r = self.radius(level);
        self.center
            .iter()
            .map(|c| c - r + 2.0 * r * rng.random::<f64>())
            .collect()
    }

    /// Uniform point in the shell `Qⁱ`, exactly: the ∞-norm radius has
    /// density ∝ ρ^{d-1} on `(r_{i-1}, r_i]`, then a uniform point on one of
    /// the `2d` faces of the cube of that radius.
    pub fn sample_in_cell<R: Rng + ?Sized>(&self, cell: usize, rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        let inner = self.radius(cell.saturating_sub(1));
        let outer = self.radius(cell);
        let df = d as f64;
        let u: f64 = rng.random();
        let rho = (inner.powf(df) + u * (outer.powf(df) - inner.powf(df))).powf(1.0 / df);
        let face = rng.random_range(0..2 * d);
        let axis = face / 2;
        let mut x = Vec::with_capacity(d);
        for k in 0..d {
            let offset = if k == axis {
                if face % 2 == 0 {
                    rho
                } else {
                    -rho
                }
            } else {
                -rho + 2.0 * rho * rng.random::<f64>()
            };
            x.push(self.center[k] + offset);
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    NotCheckable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub id: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub entries: Vec<AssumptionCheck>,
}

impl ValidationReport {
    fn push(&mut self, id: &'static str, status: CheckStatus, detail: impl Into<String>) {
        self.entries.push(AssumptionCheck {
            id,
            status,
            detail: detail.into(),
        });
    }

    pub fn status(&self, id: &str) -> Option<CheckStatus> {
        self.entries.iter().find(|e| e.id == id).map(|e| e.status)
    }

    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.status != CheckStatus::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.entries.iter().filter(|e| e.status == CheckStatus::Fail)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let status = match e.status {
                CheckStatus::Pass => "pass",
                CheckStatus::Fail => "FAIL",
                CheckStatus::NotCheckable => "n/a",
            };
            out.push_str(&format!("{:<7} {:<5} {}\n", e.id, status, e.detail));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn heat_1d_at_origin() {
        let k = KernelSpec::heat(1, 1.0).unwrap();
        let v = k.evaluate(1.0, &[0.0], 0.0, &[0.0]);
        assert!((v - (4.0 * PI).powf(-0.5)).abs() < 1e-15);
        assert!((v - 0.28209).abs() < 1e-5);
    }

    #[test]
    fn heat_is_causal() {
        for d in 1..=3 {
            let k = KernelSpec::heat(d, 1.0).unwrap();
            let x = vec![0.3; d];
            assert_eq!(k.evaluate(1.0, &x, 1.0, &x), 0.0);
            assert_eq!(k.evaluate(1.0, &x, 2.0, &x), 0.0);
        }
    }

    #[test]
    fn heat_2d_off_center() {
        let k = KernelSpec::heat(2, 1.0).unwrap();
        let v = k.evaluate(1.0, &[2.0, 0.0], 0.0, &[0.0, 0.0]);
        let want = (-1.0f64).exp() / (4.0 * PI);
        assert!((v - want).abs() < 1e-15);
        assert!((v - 0.02927).abs() < 1e-5);
    }

    #[test]
    fn heat_mass_is_one() {
        for &t in &[0.01, 0.1, 1.0] {
            let m1 = integrate(|x| heat_kernel(t, &[x]), f64::NEG_INFINITY, f64::INFINITY, QuadOptions::default())
                .unwrap()
                .value;
            assert!((m1 - 1.0).abs() < 1e-6, "d=1 t={t}: {m1}");
            let f = |y: &[f64]| heat_kernel(t, y);
            let m2 = integrate_full_space(&f, 2, QuadOptions::with_rel_tol(1e-8)).unwrap();
            assert!((m2 - 1.0).abs() < 1e-6, "d=2 t={t}: {m2}");
        }
    }

    #[test]
    fn x_section_maximum_location() {
        // argmax_t g(t, x) = ‖x‖²/(2d), found by golden-section search.
        for (d, x) in [(1usize, vec![0.7]), (2, vec![0.5, -0.4]), (3, vec![1.0, 0.2, 0.1])] {
            let f = |t: f64| heat_kernel(t, &x);
            let (mut a, mut b) = (1e-4, 2.0);
            let phi = (5f64.sqrt() - 1.0) / 2.0;
            for _ in 0..200 {
                let c = b - phi * (b - a);
                let e = a + phi * (b - a);
                if f(c) > f(e) {
                    b = e;
                } else {
                    a = c;
                }
            }
            let argmax = 0.5 * (a + b);
            let r2: f64 = x.iter().map(|v| v * v).sum();
            assert!((argmax - r2 / (2.0 * d as f64)).abs() < 1e-4, "d={d}: {argmax}");
        }
    }

    fn r1_heat_1d(level: usize) -> f64 {
        let k = KernelSpec::heat(1, 1.0).unwrap();
        let trunc = DomainTruncation::new(vec![0.0], 1.0).unwrap();
        k.r1_rate(&trunc, level, 1.0, &CompactBox::centered(1, 1.0), &R1Options::default())
            .unwrap()
    }

    #[test]
    fn r1_heat_1d_level5_below_threshold() {
        let v = r1_heat_1d(5);
        // Oracle: the sup is attained at t = T, x = ±1, where the complement
        // sits at distances 4 and 6; integrate the normal tails directly.
        let oracle = integrate(
            |u: f64| normal_sf(4.0 / (2.0 * u).sqrt()) + normal_sf(6.0 / (2.0 * u).sqrt()),
            0.0,
            1.0,
            QuadOptions::with_rel_tol(1e-12),
        )
        .unwrap()
        .value;
        assert!((v - oracle).abs() / oracle < 1e-7, "{v} vs {oracle}");
        assert!(v <= 5e-3);
    }

    #[test]
    fn r1_monotone_in_level() {
        let values: Vec<f64> = (2..=8).map(r1_heat_1d).collect();
        for w in values.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn r1_custom_route_matches_heat_route() {
        let custom = KernelSpec::custom(
            1,
            1.0,
            Arc::new(|t, x: &[f64], s, y: &[f64]| heat_kernel(t - s, &[x[0] - y[0]])),
            None,
        )
        .unwrap();
        let heat = KernelSpec::heat(1, 1.0).unwrap();
        let trunc = DomainTruncation::new(vec![0.0], 1.0).unwrap();
        let k = CompactBox::centered(1, 1.0);
        let opts = R1Options {
            symmetric_noise: true,
            lattice: 3,
        };
        let a = heat.r1_rate(&trunc, 3, 1.0, &k, &opts).unwrap();
        let b = custom.r1_rate(&trunc, 3, 1.0, &k, &opts).unwrap();
        assert!((a - b).abs() / a < 1e-5, "{a} vs {b}");
    }

    #[test]
    fn r1_drift_term_adds_first_moment_integral() {
        let heat = KernelSpec::heat(1, 1.5).unwrap();
        let trunc = DomainTruncation::new(vec![0.0], 1.0).unwrap();
        let k = CompactBox::centered(1, 1.0);
        let sym = heat
            .r1_rate(&trunc, 3, 1.0, &k, &R1Options { symmetric_noise: true, lattice: 5 })
            .unwrap();
        let asym = heat
            .r1_rate(&trunc, 3, 1.0, &k, &R1Options { symmetric_noise: false, lattice: 5 })
            .unwrap();
        assert!(asym > sym);
    }

    #[test]
    fn r1_bound_domination_1d() {
        let c = r1_heat_1d(3) / heat_r1_bound(1, 1.0, 1.0, 1.0, 3.0, 1.0).unwrap();
        for level in 4..=8 {
            let bound = heat_r1_bound(1, 1.0, 1.0, 1.0, level as f64, c).unwrap();
            assert!(r1_heat_1d(level) <= bound, "level {level}");
        }
    }

    #[test]
    fn heat_bound_values() {
        let v = heat_r1_bound(1, 1.0, 1.0, 1.0, 5.0, 1.0).unwrap();
        assert!((v - (-4.0f64).exp() / 4.0).abs() < 1e-15);
        assert!((v - 4.58e-3).abs() < 1e-5);
        assert!(heat_r1_bound(1, 1.0, 1.0, 5.0, 5.0, 1.0).is_err());
        // d = 2: the polynomial factor is 1
        let b = heat_r1_bound(2, 1.0, 1.0, 1.0, 3.0, 1.0).unwrap();
        assert!((b - (-1.0f64).exp()).abs() < 1e-15);
        let ratios: Vec<f64> = (3..20)
            .map(|n| {
                heat_r1_bound(1, 1.0, 1.0, 1.0, n as f64 + 1.0, 1.0).unwrap()
                    / heat_r1_bound(1, 1.0, 1.0, 1.0, n as f64, 1.0).unwrap()
            })
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] < w[0]));
        assert!(*ratios.last().unwrap() < 1e-3);
    }

    #[test]
    fn validation_heat_defaults_pass() {
        let k = KernelSpec::heat(1, 1.0).unwrap();
        let m = LevyMeasure::gamma(10.0, 0.1).unwrap();
        let report = k.validate_assumptions(&m, Some(&Sigma::One), 1.0);
        assert!(report.passed(), "{}", report.render());
        let a5 = report.entries.iter().find(|e| e.id == "A5").unwrap();
        assert!(a5.detail.contains("1.000000e0"), "{}", a5.detail);
    }

    #[test]
    fn validation_heat_2d_p_limit() {
        let m = LevyMeasure::gamma(10.0, 0.1).unwrap();
        let ok = KernelSpec::heat(2, 1.9).unwrap().validate_assumptions(&m, None, 1.0);
        assert_eq!(ok.status("heat-p"), Some(CheckStatus::Pass));
        assert_eq!(ok.status("A5"), Some(CheckStatus::Pass));
        let bad = KernelSpec::heat(2, 2.0).unwrap().validate_assumptions(&m, None, 1.0);
        assert_eq!(bad.status("heat-p"), Some(CheckStatus::Fail));
        assert_eq!(bad.status("A5"), Some(CheckStatus::Fail));
    }

    #[test]
    fn validation_flags_acausal_kernel() {
        let k = KernelSpec::custom(
            1,
            1.0,
            Arc::new(|t: f64, _x: &[f64], s: f64, _y: &[f64]| if (s - t - 1.0 / 6.0).abs() < 1e-9 { 1.0 } else { 0.0 }),
            None,
        )
        .unwrap();
        let m = LevyMeasure::gamma(10.0, 0.1).unwrap();
        let report = k.validate_assumptions(&m, None, 1.0);
        assert_eq!(report.status("A3"), Some(CheckStatus::Fail));
    }

    #[test]
    fn validation_custom_with_bound_passes_a6_a7() {
        let k = KernelSpec::custom(
            1,
            1.0,
            Arc::new(|t, x: &[f64], s, y: &[f64]| 0.5 * heat_kernel(t - s, &[x[0] - y[0]])),
            Some(Arc::new(|u, z: &[f64]| heat_kernel(u, z))),
        )
        .unwrap();
        let m = LevyMeasure::gamma(10.0, 0.1).unwrap();
        let report = k.validate_assumptions(&m, Some(&Sigma::Identity), 1.0);
        assert!(report.passed(), "{}", report.render());
        assert_eq!(report.status("A6"), Some(CheckStatus::Pass));
        assert_eq!(report.status("A7"), Some(CheckStatus::Pass));
    }

    #[test]
    fn cells_partition_the_box() {
        let trunc = DomainTruncation::new(vec![0.5, -0.5], 0.75).unwrap();
        let total: f64 = (1..=6).map(|i| trunc.cell_measure(i)).sum();
        assert!((total - trunc.measure(6)).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for cell in 1..=6 {
            for _ in 0..500 {
                let x = trunc.sample_in_cell(cell, &mut rng);
                assert_eq!(trunc.cell_of(&x), cell, "{x:?}");
                assert!(trunc.contains(cell, &x));
            }
        }
    }

    #[test]
    fn cell_sampling_is_uniform_in_1d_shell() {
        // Q² for radius_per_level 1 in d = 1 is [-2,-1) ∪ (1,2]; mean of |x| is 1.5
        let trunc = DomainTruncation::new(vec![0.0], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 20_000;
        let mean: f64 = (0..n).map(|_| trunc.sample_in_cell(2, &mut rng)[0].abs()).sum::<f64>() / n as f64;
        assert!((mean - 1.5).abs() < 4.0 * (1.0f64 / 12.0).sqrt() / (n as f64).sqrt());
    }
}
