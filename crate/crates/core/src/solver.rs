//! The approximate solution `Yᴺ`: causal recursion at the jump points and
//! evaluation on space–time grids.

use std::fmt;
use std::sync::Arc;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jump_fields::{JumpField, Scheme};
use crate::kernel::KernelSpec;
use crate::rng::{Purpose, SeedScope, StreamRng};
use crate::special::CompensatedSum;

pub type SigmaFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type Y0Fn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Sigma {
    /// `σ ≡ 1`
    One,
    /// `σ(y) = y`
    Identity,
    /// `σ(y) = a·y + b`
    Affine { a: f64, b: f64 },
    Custom { f: SigmaFn, lipschitz: f64 },
}

impl fmt::Debug for Sigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sigma::One => f.write_str("One"),
            Sigma::Identity => f.write_str("Identity"),
            Sigma::Affine { a, b } => f.debug_struct("Affine").field("a", a).field("b", b).finish(),
            Sigma::Custom { lipschitz, .. } => f
                .debug_struct("Custom")
                .field("lipschitz", lipschitz)
                .finish_non_exhaustive(),
        }
    }
}

impl fmt::Display for Sigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sigma::One => f.write_str("one"),
            Sigma::Identity => f.write_str("identity"),
            Sigma::Affine { a, b } => write!(f, "affine({a},{b})"),
            Sigma::Custom { lipschitz, .. } => write!(f, "custom(L={lipschitz})"),
        }
    }
}

impl Sigma {
    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            Sigma::One => 1.0,
            Sigma::Identity => y,
            Sigma::Affine { a, b } => a * y + b,
            Sigma::Custom { f, .. } => f(y),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Sigma::One => 0.0,
            Sigma::Identity => 1.0,
            Sigma::Affine { a, .. } => a.abs(),
            Sigma::Custom { lipschitz, .. } => *lipschitz,
        }
    }

    /// True when `σ` does not depend on its argument, so the values at the
    /// jump points never feed back into the field.
    pub fn is_constant(&self) -> bool {
        matches!(self, Sigma::One | Sigma::Affine { a: 0.0, .. })
    }

    /// Checks `|σ(x) - σ(y)| ≤ L |x - y|` for all pairs of a lattice on
    /// `[-10, 10]`.
    pub fn check_lipschitz(&self) -> Result<()> {
        let l = self.lipschitz();
        let pts: Vec<f64> = (0..=80).map(|i| -10.0 + 0.25 * i as f64).collect();
        let vals: Vec<f64> = pts.iter().map(|&y| self.eval(y)).collect();
        for i in 0..pts.len() {
            if !vals[i].is_finite() {
                return Err(Error::InvariantViolation(format!("σ({}) is not finite", pts[i])));
            }
            for j in i + 1..pts.len() {
                let lhs = (vals[i] - vals[j]).abs();
                let rhs = l * (pts[i] - pts[j]).abs();
                if lhs > rhs * (1.0 + 1e-9) + 1e-12 {
                    return Err(Error::InvariantViolation(format!(
                        "σ is not {l}-Lipschitz: |σ({}) - σ({})| = {lhs}",
                        pts[i], pts[j]
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone)]
pub enum InitialField {
    Zero,
    Constant(f64),
    Function(Y0Fn),
    /// Constant level drawn once per replicate from `N(mean, sd²)`.
    RandomConstant { mean: f64, sd: f64 },
}

impl fmt::Debug for InitialField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => f.write_str("Zero"),
            Self::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Self::Function(_) => f.write_str("Function(..)"),
            Self::RandomConstant { mean, sd } => f
                .debug_struct("RandomConstant")
                .field("mean", mean)
                .field("sd", sd)
                .finish(),
        }
    }
}

impl fmt::Display for InitialField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => f.write_str("zero"),
            Self::Constant(c) => write!(f, "constant({c})"),
            Self::Function(_) => f.write_str("function"),
            Self::RandomConstant { mean, sd } => write!(f, "normal({mean},{sd})"),
        }
    }
}

impl InitialField {
    /// Fixes the initial field for one replicate. Random variants read only
    /// the dedicated initial-field substream.
    pub fn realize(&self, scope: &SeedScope) -> Result<Y0Fn> {
        Ok(match self {
            Self::Zero => Arc::new(|_, _| 0.0),
            Self::Constant(c) => {
                let c = *c;
                Arc::new(move |_, _| c)
            }
            Self::Function(f) => f.clone(),
            Self::RandomConstant { mean, sd } => {
                let normal = Normal::new(*mean, *sd).map_err(|e| Error::Domain(format!("initial field: {e}")))?;
                let mut rng: StreamRng = scope.stream(0, Purpose::InitialField);
                let c = normal.sample(&mut rng);
                Arc::new(move |_, _| c)
            }
        })
    }
}

/// Full tensor grid `t_points × x_points`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub t_points: Vec<f64>,
    pub x_points: Vec<Vec<f64>>,
}

impl GridSpec {
    pub fn new(t_points: Vec<f64>, x_points: Vec<Vec<f64>>) -> Result<Self> {
        if t_points.is_empty() || x_points.is_empty() {
            return Err(Error::Domain("grid needs at least one time and one space point".into()));
        }
        if t_points.iter().any(|t| !t.is_finite()) || t_points.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Domain("grid times must be finite and sorted".into()));
        }
        let d = x_points[0].len();
        if d == 0 || x_points.iter().any(|x| x.len() != d || x.iter().any(|v| !v.is_finite())) {
            return Err(Error::Domain("grid points must share one positive dimension and be finite".into()));
        }
        Ok(Self { t_points, x_points })
    }

    /// `n_t × n_x` points on `[t0, t1] × [x0, x1]` (d = 1).
    pub fn uniform_1d(t0: f64, t1: f64, n_t: usize, x0: f64, x1: f64, n_x: usize) -> Result<Self> {
        Self::new(linspace(t0, t1, n_t), linspace(x0, x1, n_x).into_iter().map(|x| vec![x]).collect())
    }

    /// Tensor lattice on `[x0, x1]²` for d = 2.
    pub fn uniform_2d(t0: f64, t1: f64, n_t: usize, x0: f64, x1: f64, n_x: usize) -> Result<Self> {
        let axis = linspace(x0, x1, n_x);
        let pts = axis
            .iter()
            .flat_map(|&a| axis.iter().map(move |&b| vec![a, b]))
            .collect();
        Self::new(linspace(t0, t1, n_t), pts)
    }

    pub fn dim(&self) -> usize {
        self.x_points[0].len()
    }

    pub fn len(&self) -> usize {
        self.t_points.len() * self.x_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

pub struct SolverProblem<'a> {
    pub kernel: &'a KernelSpec,
    pub sigma: &'a Sigma,
    pub y0: &'a Y0Fn,
    pub field: &'a JumpField,
    pub grid: &'a GridSpec,
    /// Contributions with `|G| < kernel_floor` are dropped; 0 keeps all.
    pub kernel_floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub master_seed: u64,
    pub replicate: u64,
    pub level: usize,
    pub scheme: Scheme,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRealization {
    /// Values at the jump points, aligned with `field.events`.
    pub jump_values: Vec<f64>,
    /// Row-major over `(t, x)`: index `it * n_x + ix`.
    pub values: Vec<f64>,
    pub grid: GridSpec,
    pub provenance: Option<Provenance>,
}

impl PathRealization {
    pub fn value(&self, it: usize, ix: usize) -> f64 {
        self.values[it * self.grid.x_points.len() + ix]
    }

    pub fn max_abs_diff(&self, other: &PathRealization) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `Yᴺ(τᵢ, ξᵢ) = Y₀(τᵢ, ξᵢ) + Σ_{τⱼ < τᵢ} G(τᵢ, ξᵢ; τⱼ, ξⱼ) σ(Yᴺ(τⱼ, ξⱼ)) Jⱼ`,
/// processed in event order.
pub fn solve_at_jumps(problem: &SolverProblem) -> Result<Vec<f64>> {
    let events = &problem.field.events;
    if events.windows(2).any(|w| w[1].tau < w[0].tau) {
        return Err(Error::InvariantViolation("jump field is not sorted by tau".into()));
    }
    let mut values = Vec::with_capacity(events.len());
    let mut weights: Vec<f64> = Vec::with_capacity(events.len());
    let floor = problem.kernel_floor;
    for (i, ev) in events.iter().enumerate() {
        let mut acc = CompensatedSum::new((problem.y0)(ev.tau, &ev.xi));
        for (j, prev) in events[..i].iter().enumerate() {
            if prev.tau >= ev.tau {
                break;
            }
            let g = problem.kernel.evaluate(ev.tau, &ev.xi, prev.tau, &prev.xi);
            if floor > 0.0 && g.abs() < floor {
                continue;
            }
            acc.add(g * weights[j]);
        }
        let v = acc.value();
        if !v.is_finite() {
            return Err(Error::NumericalOverflow { index: i, value: v });
        }
        let w = problem.sigma.eval(v) * ev.size;
        if !w.is_finite() {
            return Err(Error::NumericalOverflow { index: i, value: w });
        }
        values.push(v);
        weights.push(w);
    }
    Ok(values)
}

/// `Yᴺ(t, x) = Y₀(t, x) + Σ_{τᵢ < t} G(t, x; τᵢ, ξᵢ) σ(Yᴺ(τᵢ, ξᵢ)) Jᵢ` at
/// every grid point, accumulated in event order.
pub fn evaluate_on_grid(problem: &SolverProblem, jump_values: &[f64]) -> Result<PathRealization> {
    let events = &problem.field.events;
    if jump_values.len() != events.len() {
        return Err(Error::Domain(format!(
            "{} jump values for {} events",
            jump_values.len(),
            events.len()
        )));
    }
    if problem.grid.dim() != problem.kernel.dim() {
        return Err(Error::Domain(format!(
            "grid dimension {} does not match kernel dimension {}",
            problem.grid.dim(),
            problem.kernel.dim()
        )));
    }
    let weights: Vec<f64> = events
        .iter()
        .zip(jump_values)
        .map(|(e, &v)| problem.sigma.eval(v) * e.size)
        .collect();
    let grid = problem.grid;
    let nx = grid.x_points.len();
    let floor = problem.kernel_floor;
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let t = grid.t_points[k / nx];
            let x = &grid.x_points[k % nx];
            let cut = events.partition_point(|e| e.tau < t);
            let mut acc = CompensatedSum::new((problem.y0)(t, x));
            for (e, w) in events[..cut].iter().zip(&weights) {
                let g = problem.kernel.evaluate(t, x, e.tau, &e.xi);
                if floor > 0.0 && g.abs() < floor {
                    continue;
                }
                acc.add(g * w);
            }
            acc.value()
        })
        .collect();
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NumericalOverflow {
            index: k,
            value: values[k],
        });
    }
    Ok(PathRealization {
        jump_values: jump_values.to_vec(),
        values,
        grid: grid.clone(),
        provenance: None,
    })
}

/// `solve_at_jumps` followed by `evaluate_on_grid`. For constant `σ` the
/// recursion is skipped and the jump values are reported as `Y₀` there.
pub fn solve(problem: &SolverProblem) -> Result<PathRealization> {
    let jump_values = if problem.sigma.is_constant() {
        problem
            .field
            .events
            .iter()
            .map(|e| (problem.y0)(e.tau, &e.xi))
            .collect()
    } else {
        solve_at_jumps(problem)?
    };
    evaluate_on_grid(problem, &jump_values)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SectionMode {
    /// `x ↦ Y(t, x)`
    Time(f64),
    /// `t ↦ Y(t, x)`
    Space(Vec<f64>),
}

/// Rows `(coordinate, value)`; for a time section the coordinate is the
/// space point, for a space section it is `[t]`.
pub fn section_export(realization: &PathRealization, mode: &SectionMode) -> Result<Vec<(Vec<f64>, f64)>> {
    let grid = &realization.grid;
    match mode {
        SectionMode::Time(t) => {
            let it = grid
                .t_points
                .iter()
                .position(|s| s == t)
                .ok_or_else(|| Error::Domain(format!("t = {t} is not a grid time")))?;
            Ok(grid
                .x_points
                .iter()
                .enumerate()
                .map(|(ix, x)| (x.clone(), realization.value(it, ix)))
                .collect())
        }
        SectionMode::Space(x) => {
            let ix = grid
                .x_points
                .iter()
                .position(|p| p == x)
                .ok_or_else(|| Error::Domain(format!("x = {x:?} is not a grid point")))?;
            Ok(grid
                .t_points
                .iter()
                .enumerate()
                .map(|(it, t)| (vec![*t], realization.value(it, ix)))
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jump_fields::JumpEvent;
    use crate::kernel::heat_kernel;
    use std::f64::consts::PI;

    fn field(events: &[(f64, f64, f64)]) -> JumpField {
        JumpField {
            events: events
                .iter()
                .map(|&(tau, x, size)| JumpEvent {
                    tau,
                    xi: vec![x],
                    size,
                    meta: None,
                })
                .collect(),
            horizon: 1.0,
            level: 1,
            scheme: Scheme::Truncation,
        }
    }

    fn zero() -> Y0Fn {
        Arc::new(|_, _| 0.0)
    }

    fn one() -> Y0Fn {
        Arc::new(|_, _| 1.0)
    }

    #[test]
    fn single_event_has_initial_value() {
        let k = KernelSpec::heat(1, 1.0).unwrap();
        let f = field(&[(0.3, 0.0, 5.0)]);
        let grid = GridSpec::uniform_1d(0.0, 1.0, 3, -1.0, 1.0, 3).unwrap();
        let y0 = zero();
        let p = SolverProblem {
            kernel: &k,
            sigma: &Sigma::One,
            y0: &y0,
            field: &f,
            grid: &grid,
            kernel_floor: 0.0,
        };
        assert_eq!(solve_at_jumps(&p).unwrap(), vec![0.0]);
    }

    #[test]
    fn two_jump_identity_recursion() {
        let k = KernelSpec::heat(1, 1.0).unwrap();
        let f = field(&[(0.2, 0.0, 1.0), (0.5, 0.0, 1.0)]);
        let grid = GridSpec::new(vec![1.0], vec![vec![0.0]]).unwrap();
        let y0 = one();
        let p = SolverProblem {
            kernel: &k,
            sigma: &Sigma::Identity,
            y0: &y0,
            field: &f,
            grid: &grid,
            kernel_floor: 0.0,
        };
        let v = solve_at_jumps(&p).unwrap();
        let g03 = (4.0 * PI * 0.3).powf(-0.5);
        assert_eq!(v[0], 1.0);
        assert!((v[1] - (1.0 + g03)).abs() < 1e-15);
        assert!((v[1] - 1.5150).abs() < 1e-4);
        let r = evaluate_on_grid(&p, &v).unwrap();
        let want = 1.0 + (4.0 * PI * 0.8).powf(-0.5) + (4.0 * PI * 0.5).powf(-0.5) * v[1];
        assert!((r.values[0] - want).abs() < 1e-14);
        assert!((r.values[0] - 1.9198).abs() < 1e-4);
    }

    #[test]
    fn single_jump_closed_form() {
        let k = KernelSpec::heat(1, 1.0).unwrap();
        let f = field(&[(0.25, 0.0, 2.0)]);
        let grid = GridSpec::new(vec![0.25, 1.0], vec![vec![0.0]]).unwrap();
        let y0 = zero();
        let p = SolverProblem {
            kernel: &k,
            sigma: &Sigma::One,
            y0: &y0,
            field: &f,
            grid: &grid,
            kernel_floor: 0.0,
        };
        let r = solve(&p).unwrap();
        // a grid time equal to the jump time excludes it
        assert_eq!(r.values[0], 0.0);
        assert!((r.values[1] - 0.6515).abs() < 1e-4);
    }

    #[test]
    fn empty_field_is_initial_value() {
        let k = KernelSpec::heat(2, 1.0).unwrap();
        let f = JumpField::empty(1.0, 1, Scheme::Series);
        let grid = GridSpec::uniform_2d(0.0, 1.0, 4, -1.0, 1.0, 3).unwrap();
        let y0: Y0Fn = Arc::new(|t, x| t + x[0] - x[1]);
        let p = SolverProblem {
            kernel: &k,
            sigma: &Sigma::Identity,
            y0: &y0,
            field: &f,
            grid: &grid,
            kernel_floor: 0.0,
        };
        let r = solve(&p).unwrap();
        for (it, t) in grid.t_points.iter().enumerate() {
            for (ix, x) in grid.x_points.iter().enumerate() {
                assert_eq!(r.value(it, ix), t + x[0] - x[1]);
            }
        }
    }

    #[test]
    fn causal_truncation_leaves_earlier_values() {
        let k = KernelSpec::heat(1, 1.0).unwrap();
        let f = field(&[(0.1, 0.2, 1.0), (0.3, -0.1, 2.0), (0.55, 0.0, 0.5), (0.8, 0.4, 3.0)]);
        let grid = GridSpec::uniform_1d(0.0, 1.0, 21, -1.0, 1.0, 21).unwrap();
        let y0 = one();
        let sigma = Sigma::Affine { a: 0.5, b: 1.0 };
        let full = solve(&SolverProblem {
            kernel: &k,
            sigma: &sigma,
            y0: &y0,
            field: &f,
            grid: &grid,
            kernel_floor: 0.0,
        })
        .unwrap();
        let cut = f.truncate_before(0.5);
        let part = solve(&SolverProblem {
            kernel: &k,
            sigma: &sigma,
            y0: &y0,
            field: &cut,
            grid: &grid,
            kernel_floor: 0.0,
        })
        .unwrap();
        for (it, t) in grid.t_points.iter().enumerate() {
            if *t <= 0.5 {
                for ix in 0..21 {
                    assert_eq!(full.value(it, ix), part.value(it, ix));
                }
            }
        }
    }

    #[test]
    fn finite_difference_in_one_size() {
        let k = KernelSpec::heat(1, 1.0).unwrap();
        let base = field(&[(0.1, 0.2, 1.0), (0.3, -0.1, 2.0), (0.6, 0.0, 0.5)]);
        let mut bumped = base.clone();
        let delta = 1e-8;
        bumped.events[1].size += delta;
        let grid = GridSpec::uniform_1d(0.0, 1.0, 11, -1.0, 1.0, 11).unwrap();
        let y0 = zero();
        let mk = |f: &JumpField| {
            solve(&SolverProblem {
                kernel: &k,
                sigma: &Sigma::One,
                y0: &y0,
                field: f,
                grid: &grid,
                kernel_floor: 0.0,
            })
            .unwrap()
        };
        let (a, b) = (mk(&base), mk(&bumped));
        for (it, t) in grid.t_points.iter().enumerate() {
            for (ix, x) in grid.x_points.iter().enumerate() {
                let g = k.evaluate(*t, x, 0.3, &[-0.1]);
                let diff = (b.value(it, ix) - a.value(it, ix)).abs();
                assert!((diff - g * delta).abs() <= 1e-13 * (1.0 + a.value(it, ix).abs()), "{diff} vs {}", g * delta);
            }
        }
    }

    #[test]
    fn x_section_decay_near_jump() {
        let k = KernelSpec::heat(1, 1.0).unwrap();
        let f = field(&[(0.4, 0.3, 2.5)]);
        let u = 1e-3;
        let grid = GridSpec::new(vec![0.0, 0.4 + u, 0.6], vec![vec![0.3], vec![0.9]]).unwrap();
        let y0 = zero();
        let r = solve(&SolverProblem {
            kernel: &k,
            sigma: &Sigma::One,
            y0: &y0,
            field: &f,
            grid: &grid,
            kernel_floor: 0.0,
        })
        .unwrap();
        let sec = section_export(&r, &SectionMode::Space(vec![0.3])).unwrap();
        let ratio = sec[1].1 / (2.5 * (4.0 * PI * u).powf(-0.5));
        assert!((ratio - 1.0).abs() < 1e-9, "{ratio}");
        let t0 = section_export(&r, &SectionMode::Time(0.0)).unwrap();
        assert!(t0.iter().all(|(_, v)| *v == 0.0));
        assert!(section_export(&r, &SectionMode::Time(0.5)).is_err());
        assert!(section_export(&r, &SectionMode::Space(vec![0.5])).is_err());
        let far = section_export(&r, &SectionMode::Space(vec![0.9])).unwrap();
        assert!(far.iter().all(|(_, v)| v.is_finite()));
        assert!((far[2].1 - 2.5 * heat_kernel(0.2, &[0.6])).abs() < 1e-15);
    }

    #[test]
    fn kernel_floor_drops_small_terms() {
        let k = KernelSpec::heat(1, 1.0).unwrap();
        let f = field(&[(0.1, 0.0, 1.0), (0.2, 5.0, 1.0)]);
        let grid = GridSpec::new(vec![1.0], vec![vec![0.0]]).unwrap();
        let y0 = zero();
        let mk = |floor| {
            solve(&SolverProblem {
                kernel: &k,
                sigma: &Sigma::One,
                y0: &y0,
                field: &f,
                grid: &grid,
                kernel_floor: floor,
            })
            .unwrap()
            .values[0]
        };
        assert_eq!(mk(1e-3), heat_kernel(0.9, &[0.0]));
        assert!(mk(0.0) > mk(1e-3));
    }

    #[test]
    fn overflow_reports_index() {
        let k = KernelSpec::heat(1, 1.0).unwrap();
        let f = field(&[(0.1, 0.0, 1e308), (0.1 + 1e-12, 0.0, 1e308), (0.2, 0.0, 1.0)]);
        let grid = GridSpec::new(vec![1.0], vec![vec![0.0]]).unwrap();
        let y0 = one();
        let err = solve_at_jumps(&SolverProblem {
            kernel: &k,
            sigma: &Sigma::Identity,
            y0: &y0,
            field: &f,
            grid: &grid,
            kernel_floor: 0.0,
        })
        .unwrap_err();
        assert!(matches!(err, Error::NumericalOverflow { index: 1, .. }), "{err}");
    }

    #[test]
    fn lipschitz_checks() {
        assert!(Sigma::One.check_lipschitz().is_ok());
        assert!(Sigma::Affine { a: -2.0, b: 3.0 }.check_lipschitz().is_ok());
        let bad = Sigma::Custom {
            f: Arc::new(|y| y * y),
            lipschitz: 1.0,
        };
        assert!(bad.check_lipschitz().is_err());
        let ok = Sigma::Custom {
            f: Arc::new(f64::sin),
            lipschitz: 1.0,
        };
        assert!(ok.check_lipschitz().is_ok());
    }

    #[test]
    fn random_initial_field_is_per_replicate() {
        let y = InitialField::RandomConstant { mean: 0.0, sd: 1.0 };
        let a = y.realize(&SeedScope::new(1, 0)).unwrap()(0.0, &[0.0]);
        let b = y.realize(&SeedScope::new(1, 0)).unwrap()(0.5, &[1.0]);
        let c = y.realize(&SeedScope::new(1, 1)).unwrap()(0.0, &[0.0]);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
