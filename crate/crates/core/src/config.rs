//! Run configuration: flat `key = value` lines with `#` comments.
//!
//! Values are quoted strings, bare words, numbers, booleans, comma lists,
//! points `(a;b)` and calls `name(a,b,…)` such as `linspace(0,1,21)`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::kernel::{CheckStatus, KernelSpec};
use crate::levy_measure::LevyMeasure;
use crate::solver::{linspace, InitialField, Sigma};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Number(f64),
    Bool(bool),
    List(Vec<Value>),
    Point(Vec<f64>),
    Call { name: String, args: Vec<f64> },
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => write!(f, "\"{s}\""),
            Value::Number(x) => write!(f, "{x}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::List(items) => {
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
            Value::Point(p) => write!(f, "({})", join(p, ";")),
            Value::Call { name, args } => write!(f, "{name}({})", join(args, ",")),
        }
    }
}

fn join(xs: &[f64], sep: &str) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

/// Splits at commas outside parentheses and quotes.
fn split_top_level(s: &str) -> Result<Vec<&str>> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut quoted = false;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '(' if !quoted => depth += 1,
            ')' if !quoted => {
                depth -= 1;
                if depth < 0 {
                    return Err(Error::config("", format!("unbalanced `)` in `{s}`")));
                }
            }
            ',' if !quoted && depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 || quoted {
        return Err(Error::config("", format!("unbalanced parentheses or quotes in `{s}`")));
    }
    parts.push(&s[start..]);
    Ok(parts)
}

fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    let starts_ok = s
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_digit() || c == '-' || c == '+' || c == '.');
    if !starts_ok {
        return None;
    }
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

fn parse_scalar(s: &str) -> Result<Value> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::config("", "empty value"));
    }
    if let Some(rest) = s.strip_prefix('"') {
        let inner = rest
            .strip_suffix('"')
            .ok_or_else(|| Error::config("", format!("unterminated string `{s}`")))?;
        if inner.contains('"') {
            return Err(Error::config("", format!("stray quote in `{s}`")));
        }
        return Ok(Value::Str(inner.to_string()));
    }
    if s == "true" {
        return Ok(Value::Bool(true));
    }
    if s == "false" {
        return Ok(Value::Bool(false));
    }
    if let Some(x) = parse_number(s) {
        return Ok(Value::Number(x));
    }
    if let Some(inner) = s.strip_prefix('(') {
        let inner = inner
            .strip_suffix(')')
            .ok_or_else(|| Error::config("", format!("unterminated point `{s}`")))?;
        let coords = inner
            .split(';')
            .map(|c| parse_number(c).ok_or_else(|| Error::config("", format!("bad coordinate `{c}` in `{s}`"))))
            .collect::<Result<Vec<f64>>>()?;
        return Ok(Value::Point(coords));
    }
    if let Some(open) = s.find('(') {
        let name = &s[..open];
        let body = s[open + 1..]
            .strip_suffix(')')
            .ok_or_else(|| Error::config("", format!("unterminated call `{s}`")))?;
        if !is_identifier(name) {
            return Err(Error::config("", format!("bad function name `{name}`")));
        }
        let args = if body.trim().is_empty() {
            Vec::new()
        } else {
            body.split(',')
                .map(|a| parse_number(a).ok_or_else(|| Error::config("", format!("bad argument `{a}` in `{s}`"))))
                .collect::<Result<Vec<f64>>>()?
        };
        return Ok(Value::Call {
            name: name.to_string(),
            args,
        });
    }
    if is_identifier(s) {
        return Ok(Value::Str(s.to_string()));
    }
    Err(Error::config("", format!("cannot parse value `{s}`")))
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.' || c == '/')
}

/// Parses one value.
pub fn parse_value(text: &str) -> Result<Value> {
    let parts = split_top_level(text)?;
    if parts.len() == 1 {
        parse_scalar(parts[0])
    } else {
        Ok(Value::List(parts.into_iter().map(parse_scalar).collect::<Result<_>>()?))
    }
}

const MAX_LINSPACE: usize = 1_000_000;

impl Value {
    fn type_error(&self, key: &str, want: &str) -> Error {
        Error::config(key, format!("expected {want}, got `{self}`"))
    }

    pub fn as_f64(&self, key: &str) -> Result<f64> {
        match self {
            Value::Number(x) => Ok(*x),
            _ => Err(self.type_error(key, "a number")),
        }
    }

    pub fn as_usize(&self, key: &str) -> Result<usize> {
        match self {
            Value::Number(x) if *x >= 0.0 && x.fract() == 0.0 && *x <= u32::MAX as f64 => Ok(*x as usize),
            _ => Err(self.type_error(key, "a non-negative integer")),
        }
    }

    pub fn as_u64(&self, key: &str) -> Result<u64> {
        match self {
            Value::Number(x) if *x >= 0.0 && x.fract() == 0.0 && *x < 2f64.powi(53) => Ok(*x as u64),
            _ => Err(self.type_error(key, "a non-negative integer below 2^53")),
        }
    }

    pub fn as_bool(&self, key: &str) -> Result<bool> {
        match self {
            Value::Bool(b) => Ok(*b),
            _ => Err(self.type_error(key, "true or false")),
        }
    }

    pub fn as_str(&self, key: &str) -> Result<&str> {
        match self {
            Value::Str(s) => Ok(s),
            _ => Err(self.type_error(key, "a string")),
        }
    }

    /// Numbers, comma lists of numbers, or `linspace(a, b, n)`.
    pub fn as_f64_list(&self, key: &str) -> Result<Vec<f64>> {
        match self {
            Value::Number(x) => Ok(vec![*x]),
            Value::List(items) => {
                let mut out = Vec::new();
                for it in items {
                    out.extend(it.as_f64_list(key)?);
                }
                Ok(out)
            }
            Value::Call { name, args } if name == "linspace" => {
                if args.len() != 3 {
                    return Err(Error::config(key, "linspace takes (start, stop, count)"));
                }
                let n = args[2];
                if !(n >= 1.0 && n.fract() == 0.0 && n <= MAX_LINSPACE as f64) {
                    return Err(Error::config(key, format!("linspace count must be an integer in [1, {MAX_LINSPACE}]")));
                }
                Ok(linspace(args[0], args[1], n as usize))
            }
            _ => Err(self.type_error(key, "a number list or linspace(a,b,n)")),
        }
    }

    pub fn as_usize_list(&self, key: &str) -> Result<Vec<usize>> {
        self.as_f64_list(key)?
            .into_iter()
            .map(|x| Value::Number(x).as_usize(key))
            .collect()
    }

    /// Points in `ℝᵈ`: explicit `(a;b)` tuples, or for `d ≥ 2` a number
    /// list taken as the axis of a tensor lattice.
    pub fn as_points(&self, key: &str, d: usize) -> Result<Vec<Vec<f64>>> {
        let tuples: Option<Vec<Vec<f64>>> = match self {
            Value::Point(p) => Some(vec![p.clone()]),
            Value::List(items) if items.iter().all(|v| matches!(v, Value::Point(_))) => Some(
                items
                    .iter()
                    .map(|v| match v {
                        Value::Point(p) => p.clone(),
                        _ => unreachable!(),
                    })
                    .collect(),
            ),
            _ => None,
        };
        if let Some(pts) = tuples {
            if pts.iter().any(|p| p.len() != d) {
                return Err(Error::config(key, format!("every point needs {d} coordinates")));
            }
            return Ok(pts);
        }
        let axis = self.as_f64_list(key)?;
        let mut points: Vec<Vec<f64>> = vec![Vec::new()];
        for _ in 0..d {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |a| {
                        let mut q = p.clone();
                        q.push(*a);
                        q
                    })
                })
                .collect();
        }
        Ok(points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    RateStudy,
    Validate,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "simulate" => Some(Mode::Simulate),
            "rate_study" | "rate-study" => Some(Mode::RateStudy),
            "validate" => Some(Mode::Validate),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::RateStudy => "rate_study",
            Mode::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeChoice {
    Truncation,
    Series,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesChoice {
    LePage,
    Bondesson,
    Thinning,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub out_dir: Option<String>,
    pub seed: Option<u64>,
    pub replicates: usize,
    /// Run level `N`.
    pub level: usize,
    pub scheme: SchemeChoice,
    pub levy_gamma: f64,
    pub levy_lambda: f64,
    pub levy_symmetric: bool,
    pub levy_p: f64,
    pub levy_q: f64,
    pub kernel_d: usize,
    pub horizon: f64,
    pub radius_per_level: f64,
    pub k_radius: f64,
    pub center: Vec<f64>,
    /// `ε_N = N^{-k}`
    pub epsilon_k: f64,
    pub domain_level: Option<usize>,
    pub series_method: SeriesChoice,
    pub n_space: Option<usize>,
    pub n_level: Option<f64>,
    pub thinning_rate: Option<f64>,
    pub sigma: Sigma,
    pub y0: InitialField,
    pub grid_t: Vec<f64>,
    pub grid_x: Vec<Vec<f64>>,
    pub t_sections: Vec<f64>,
    pub x_sections: Vec<Vec<f64>>,
    pub kernel_floor: f64,
    pub study_levels: Option<Vec<usize>>,
    pub study_replicates: Option<usize>,
    pub study_reference_level: Option<usize>,
    pub max_events: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: None,
            out_dir: None,
            seed: None,
            replicates: 200,
            level: 50,
            scheme: SchemeChoice::Series,
            levy_gamma: 10.0,
            levy_lambda: 0.1,
            levy_symmetric: false,
            levy_p: 1.0,
            levy_q: 0.5,
            kernel_d: 1,
            horizon: 1.0,
            radius_per_level: 0.5,
            k_radius: 1.0,
            center: vec![0.5],
            epsilon_k: 1.0,
            domain_level: None,
            series_method: SeriesChoice::Bondesson,
            n_space: None,
            n_level: None,
            thinning_rate: None,
            sigma: Sigma::One,
            y0: InitialField::Zero,
            grid_t: linspace(0.0, 1.0, 21),
            grid_x: linspace(0.0, 1.0, 21).into_iter().map(|x| vec![x]).collect(),
            t_sections: Vec::new(),
            x_sections: Vec::new(),
            kernel_floor: 0.0,
            study_levels: None,
            study_replicates: None,
            study_reference_level: None,
            max_events: crate::jump_fields::DEFAULT_MAX_EVENTS,
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "mode",
    "out_dir",
    "seed",
    "replicates",
    "level",
    "scheme",
    "levy.kind",
    "levy.gamma",
    "levy.lambda",
    "levy.symmetric",
    "levy.p",
    "levy.q",
    "kernel.kind",
    "kernel.d",
    "domain.T",
    "domain.radius_per_level",
    "domain.K_radius",
    "domain.center",
    "truncation.epsilon_schedule",
    "truncation.k",
    "truncation.domain_level",
    "series.method",
    "series.N_space",
    "series.N_level",
    "series.thinning_rate",
    "sigma",
    "y0",
    "grid.t",
    "grid.x",
    "grid.t_sections",
    "grid.x_sections",
    "solver.kernel_floor",
    "study.levels",
    "study.replicates",
    "study.reference_level",
    "resource.max_events",
];

/// Splits the text into `(line, key, raw value)` entries.
pub fn parse_entries(text: &str) -> Result<Vec<(usize, String, Value)>> {
    let mut out: Vec<(usize, String, Value)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}", i + 1), format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '.' || c == '_') {
            return Err(Error::config(format!("line {}", i + 1), format!("bad key `{key}`")));
        }
        if out.iter().any(|(_, k, _)| k == key) {
            return Err(Error::config(key, "duplicate key"));
        }
        let v = parse_value(value).map_err(|e| rekey(e, key))?;
        out.push((i + 1, key.to_string(), v));
    }
    Ok(out)
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn rekey(e: Error, key: &str) -> Error {
    match e {
        Error::Config { key: k, message } if k.is_empty() => Error::Config {
            key: key.to_string(),
            message,
        },
        other => other,
    }
}

fn parse_sigma(s: &str) -> Result<Sigma> {
    match parse_scalar(s).map_err(|e| rekey(e, "sigma"))? {
        Value::Str(w) if w == "one" => Ok(Sigma::One),
        Value::Str(w) if w == "identity" => Ok(Sigma::Identity),
        Value::Call { name, args } if name == "affine" && args.len() == 2 => Ok(Sigma::Affine { a: args[0], b: args[1] }),
        _ => Err(Error::config("sigma", format!("expected one, identity or affine(a,b), got `{s}`"))),
    }
}

fn parse_y0(s: &str) -> Result<InitialField> {
    match parse_scalar(s).map_err(|e| rekey(e, "y0"))? {
        Value::Str(w) if w == "zero" => Ok(InitialField::Zero),
        Value::Call { name, args } if name == "constant" && args.len() == 1 => Ok(InitialField::Constant(args[0])),
        Value::Call { name, args } if name == "normal" && args.len() == 2 && args[1] >= 0.0 => {
            Ok(InitialField::RandomConstant {
                mean: args[0],
                sd: args[1],
            })
        }
        _ => Err(Error::config("y0", format!("expected zero, constant(c) or normal(m,s), got `{s}`"))),
    }
}

/// Parses and validates a run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let entries = parse_entries(text)?;
    let mut cfg = RunConfig::default();
    let get = |key: &str| entries.iter().find(|(_, k, _)| k == key).map(|(_, _, v)| v);

    for (line, key, _) in &entries {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::config(key.clone(), format!("unknown key (line {line})")));
        }
    }

    let kind = match get("levy.kind") {
        Some(v) => v.as_str("levy.kind")?.to_string(),
        None => "gamma".to_string(),
    };
    if kind != "gamma" {
        return Err(Error::config("levy.kind", format!("unsupported Lévy measure `{kind}`; only gamma")));
    }
    if get("levy.kind").is_some() {
        for required in ["levy.gamma", "levy.lambda"] {
            if get(required).is_none() {
                return Err(Error::config(required, "required when levy.kind = \"gamma\""));
            }
        }
    }
    if let Some(v) = get("kernel.kind") {
        let k = v.as_str("kernel.kind")?;
        if k != "heat" {
            return Err(Error::config("kernel.kind", format!("unsupported kernel `{k}`; only heat")));
        }
    }
    if let Some(v) = get("truncation.epsilon_schedule") {
        let s = v.as_str("truncation.epsilon_schedule")?;
        if s != "power" {
            return Err(Error::config("truncation.epsilon_schedule", format!("unsupported schedule `{s}`")));
        }
    }

    if let Some(v) = get("mode") {
        let s = v.as_str("mode")?;
        cfg.mode = Some(Mode::parse(s).ok_or_else(|| Error::config("mode", format!("unknown mode `{s}`")))?);
    }
    if let Some(v) = get("out_dir") {
        cfg.out_dir = Some(v.as_str("out_dir")?.to_string());
    }
    if let Some(v) = get("seed") {
        cfg.seed = Some(v.as_u64("seed")?);
    }
    if let Some(v) = get("replicates") {
        cfg.replicates = v.as_usize("replicates")?;
    }
    if let Some(v) = get("level") {
        cfg.level = v.as_usize("level")?;
    }
    if let Some(v) = get("scheme") {
        cfg.scheme = match v.as_str("scheme")? {
            "truncation" => SchemeChoice::Truncation,
            "series" => SchemeChoice::Series,
            other => return Err(Error::config("scheme", format!("unknown scheme `{other}`"))),
        };
    }
    if let Some(v) = get("levy.gamma") {
        cfg.levy_gamma = v.as_f64("levy.gamma")?;
    }
    if let Some(v) = get("levy.lambda") {
        cfg.levy_lambda = v.as_f64("levy.lambda")?;
    }
    if let Some(v) = get("levy.symmetric") {
        cfg.levy_symmetric = v.as_bool("levy.symmetric")?;
    }
    if let Some(v) = get("levy.p") {
        cfg.levy_p = v.as_f64("levy.p")?;
    }
    if let Some(v) = get("levy.q") {
        cfg.levy_q = v.as_f64("levy.q")?;
    }
    if let Some(v) = get("kernel.d") {
        cfg.kernel_d = v.as_usize("kernel.d")?;
    }
    if let Some(v) = get("domain.T") {
        cfg.horizon = v.as_f64("domain.T")?;
    }
    if let Some(v) = get("domain.radius_per_level") {
        cfg.radius_per_level = v.as_f64("domain.radius_per_level")?;
    }
    if let Some(v) = get("domain.K_radius") {
        cfg.k_radius = v.as_f64("domain.K_radius")?;
    }
    cfg.center = match get("domain.center") {
        Some(v) => {
            let pts = v.as_points("domain.center", cfg.kernel_d.max(1))?;
            if pts.len() != 1 {
                return Err(Error::config("domain.center", "expected a single point"));
            }
            pts.into_iter().next().unwrap_or_default()
        }
        None if cfg.kernel_d == 1 => vec![0.5],
        None => vec![0.5; cfg.kernel_d],
    };
    if let Some(v) = get("truncation.k") {
        cfg.epsilon_k = v.as_f64("truncation.k")?;
    }
    if let Some(v) = get("truncation.domain_level") {
        cfg.domain_level = Some(v.as_usize("truncation.domain_level")?);
    }
    if let Some(v) = get("series.method") {
        cfg.series_method = match v.as_str("series.method")? {
            "lepage" => SeriesChoice::LePage,
            "bondesson" => SeriesChoice::Bondesson,
            "thinning" => SeriesChoice::Thinning,
            other => return Err(Error::config("series.method", format!("unknown method `{other}`"))),
        };
    }
    if let Some(v) = get("series.N_space") {
        cfg.n_space = Some(v.as_usize("series.N_space")?);
    }
    if let Some(v) = get("series.N_level") {
        cfg.n_level = Some(v.as_f64("series.N_level")?);
    }
    if let Some(v) = get("series.thinning_rate") {
        cfg.thinning_rate = Some(v.as_f64("series.thinning_rate")?);
    }
    if let Some(v) = get("sigma") {
        cfg.sigma = parse_sigma(&string_or_bare(v, "sigma")?)?;
    }
    if let Some(v) = get("y0") {
        cfg.y0 = parse_y0(&string_or_bare(v, "y0")?)?;
    }
    if let Some(v) = get("grid.t") {
        cfg.grid_t = v.as_f64_list("grid.t")?;
    }
    cfg.grid_x = match get("grid.x") {
        Some(v) => v.as_points("grid.x", cfg.kernel_d.max(1))?,
        None if cfg.kernel_d == 1 => cfg.grid_x.clone(),
        None => Value::Call {
            name: "linspace".into(),
            args: vec![0.0, 1.0, 21.0],
        }
        .as_points("grid.x", cfg.kernel_d)?,
    };
    if let Some(v) = get("grid.t_sections") {
        cfg.t_sections = v.as_f64_list("grid.t_sections")?;
    }
    if let Some(v) = get("grid.x_sections") {
        cfg.x_sections = v.as_points("grid.x_sections", cfg.kernel_d.max(1))?;
    }
    if let Some(v) = get("solver.kernel_floor") {
        cfg.kernel_floor = v.as_f64("solver.kernel_floor")?;
    }
    if let Some(v) = get("study.levels") {
        cfg.study_levels = Some(v.as_usize_list("study.levels")?);
    }
    if let Some(v) = get("study.replicates") {
        cfg.study_replicates = Some(v.as_usize("study.replicates")?);
    }
    if let Some(v) = get("study.reference_level") {
        cfg.study_reference_level = Some(v.as_usize("study.reference_level")?);
    }
    if let Some(v) = get("resource.max_events") {
        cfg.max_events = v.as_usize("resource.max_events")?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `sigma = "affine(1,2)"` and `sigma = affine(1,2)` are both accepted.
fn string_or_bare(v: &Value, key: &str) -> Result<String> {
    match v {
        Value::Str(s) => Ok(s.clone()),
        Value::Call { .. } => Ok(v.to_string()),
        _ => Err(v.type_error(key, "a string")),
    }
}

impl RunConfig {
    pub fn measure(&self) -> Result<LevyMeasure> {
        LevyMeasure::gamma(self.levy_gamma, self.levy_lambda).map_err(|e| Error::config("levy.gamma", e.to_string()))
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        KernelSpec::heat(self.kernel_d, self.levy_p).map_err(|e| Error::config("levy.p", e.to_string()))
    }

    pub fn epsilon(&self, level: usize) -> f64 {
        (level as f64).powf(-self.epsilon_k)
    }

    pub fn n_space(&self) -> usize {
        self.n_space.unwrap_or(self.level)
    }

    pub fn n_level(&self) -> f64 {
        self.n_level.unwrap_or(self.level as f64)
    }

    pub fn study_levels(&self) -> Vec<usize> {
        self.study_levels.clone().unwrap_or_else(|| match self.scheme {
            SchemeChoice::Truncation => vec![5, 10, 20, 40, 80],
            SchemeChoice::Series => vec![10, 20, 30, 40, 50],
        })
    }

    /// Defaults to four times the finest level for the cutoff scheme and
    /// twice the finest level for the series scheme.
    pub fn study_reference_level(&self) -> usize {
        self.study_reference_level.unwrap_or_else(|| {
            let finest = self.study_levels().into_iter().max().unwrap_or(1);
            match self.scheme {
                SchemeChoice::Truncation => 4 * finest,
                SchemeChoice::Series => 2 * finest,
            }
        })
    }

    pub fn study_replicates(&self) -> usize {
        self.study_replicates.unwrap_or(self.replicates)
    }

    /// Checks every precondition and the assumptions A1–A7 before any
    /// sampling.
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive and finite, got {x}")))
            }
        };
        positive("levy.gamma", self.levy_gamma)?;
        positive("levy.lambda", self.levy_lambda)?;
        positive("domain.T", self.horizon)?;
        positive("domain.radius_per_level", self.radius_per_level)?;
        positive("domain.K_radius", self.k_radius)?;
        positive("truncation.k", self.epsilon_k)?;
        if self.levy_symmetric {
            return Err(Error::config("levy.symmetric", "the gamma measure is one-sided, not symmetric"));
        }
        if self.kernel_d == 0 {
            return Err(Error::config("kernel.d", "dimension must be at least 1"));
        }
        if self.center.len() != self.kernel_d {
            return Err(Error::config("domain.center", format!("needs {} coordinates", self.kernel_d)));
        }
        let mut p_problems = Vec::new();
        if !(self.levy_p > 0.0 && self.levy_p <= 2.0) {
            p_problems.push(format!("p = {} lies outside (0, 2]", self.levy_p));
        }
        let heat_limit = 1.0 + 2.0 / self.kernel_d as f64;
        if self.levy_p >= heat_limit {
            p_problems.push(format!("p = {} ≥ 1 + 2/d = {heat_limit}", self.levy_p));
        }
        if !p_problems.is_empty() {
            return Err(Error::config("levy.p", p_problems.join("; ")));
        }
        if !(self.levy_q > 0.0 && self.levy_q < self.levy_p) {
            return Err(Error::config("levy.q", format!("q must lie in (0, p), got {}", self.levy_q)));
        }
        if self.level == 0 {
            return Err(Error::config("level", "must be at least 1"));
        }
        if self.domain_level == Some(0) {
            return Err(Error::config("truncation.domain_level", "must be at least 1"));
        }
        if self.n_space == Some(0) {
            return Err(Error::config("series.N_space", "must be at least 1"));
        }
        if let Some(n) = self.n_level {
            positive("series.N_level", n)?;
        }
        if let Some(r) = self.thinning_rate {
            positive("series.thinning_rate", r)?;
        }
        if !(self.kernel_floor >= 0.0 && self.kernel_floor.is_finite()) {
            return Err(Error::config("solver.kernel_floor", "must be a non-negative number"));
        }
        if self.grid_t.is_empty() || self.grid_x.is_empty() {
            return Err(Error::config("grid", "grid needs at least one time and one space point"));
        }
        if self.grid_t.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::config("grid.t", "times must be sorted"));
        }
        if self.grid_t.iter().any(|t| *t < 0.0 || *t > self.horizon) {
            return Err(Error::config("grid.t", format!("times must lie in [0, {}]", self.horizon)));
        }
        if self.grid_x.iter().any(|x| x.len() != self.kernel_d) {
            return Err(Error::config("grid.x", format!("points need {} coordinates", self.kernel_d)));
        }
        if let Some(t) = self.t_sections.iter().find(|t| !self.grid_t.contains(t)) {
            return Err(Error::config("grid.t_sections", format!("{t} is not a grid time")));
        }
        if let Some(x) = self.x_sections.iter().find(|x| !self.grid_x.contains(x)) {
            return Err(Error::config("grid.x_sections", format!("{x:?} is not a grid point")));
        }
        if let Some(levels) = &self.study_levels {
            if levels.len() < 4 {
                return Err(Error::config("study.levels", "a rate fit needs at least 4 levels"));
            }
            if levels.contains(&0) {
                return Err(Error::config("study.levels", "levels must be at least 1"));
            }
        }
        if self.study_reference_level() < self.study_levels().into_iter().max().unwrap_or(0) {
            return Err(Error::config("study.reference_level", "must be at least the finest study level"));
        }

        let measure = self.measure()?;
        let kernel = self.kernel()?;
        let report = kernel.validate_assumptions(&measure, Some(&self.sigma), self.horizon);
        let failures: Vec<String> = report
            .failures()
            .map(|f| format!("{}: {}", f.id, f.detail))
            .collect();
        if !failures.is_empty() {
            let key = match report.failures().next().map(|f| f.id) {
                Some("A2") => "sigma",
                _ => "levy.p",
            };
            return Err(Error::config(key, failures.join("; ")));
        }
        debug_assert!(report.entries.iter().all(|e| e.status != CheckStatus::Fail));
        Ok(())
    }

    /// Every key with its resolved value, defaults included.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        if let Some(mode) = self.mode {
            put("mode", mode.as_str().into());
        }
        if let Some(o) = &self.out_dir {
            put("out_dir", format!("\"{o}\""));
        }
        if let Some(s) = self.seed {
            put("seed", s.to_string());
        }
        put("replicates", self.replicates.to_string());
        put("level", self.level.to_string());
        put(
            "scheme",
            match self.scheme {
                SchemeChoice::Truncation => "truncation",
                SchemeChoice::Series => "series",
            }
            .into(),
        );
        put("levy.kind", "gamma".into());
        put("levy.gamma", self.levy_gamma.to_string());
        put("levy.lambda", self.levy_lambda.to_string());
        put("levy.symmetric", self.levy_symmetric.to_string());
        put("levy.p", self.levy_p.to_string());
        put("levy.q", self.levy_q.to_string());
        put("kernel.kind", "heat".into());
        put("kernel.d", self.kernel_d.to_string());
        put("domain.T", self.horizon.to_string());
        put("domain.radius_per_level", self.radius_per_level.to_string());
        put("domain.K_radius", self.k_radius.to_string());
        put("domain.center", format_point(&self.center));
        put("truncation.epsilon_schedule", "power".into());
        put("truncation.k", self.epsilon_k.to_string());
        if let Some(l) = self.domain_level {
            put("truncation.domain_level", l.to_string());
        }
        put(
            "series.method",
            match self.series_method {
                SeriesChoice::LePage => "lepage",
                SeriesChoice::Bondesson => "bondesson",
                SeriesChoice::Thinning => "thinning",
            }
            .into(),
        );
        put("series.N_space", self.n_space().to_string());
        put("series.N_level", self.n_level().to_string());
        put(
            "series.thinning_rate",
            self.thinning_rate.unwrap_or(self.levy_lambda).to_string(),
        );
        put("sigma", self.sigma.to_string());
        put("y0", self.y0.to_string());
        put("grid.t", join(&self.grid_t, ", "));
        put(
            "grid.x",
            self.grid_x.iter().map(|p| format_point(p)).collect::<Vec<_>>().join(", "),
        );
        if !self.t_sections.is_empty() {
            put("grid.t_sections", join(&self.t_sections, ", "));
        }
        if !self.x_sections.is_empty() {
            put(
                "grid.x_sections",
                self.x_sections.iter().map(|p| format_point(p)).collect::<Vec<_>>().join(", "),
            );
        }
        put("solver.kernel_floor", self.kernel_floor.to_string());
        put(
            "study.levels",
            self.study_levels()
                .iter()
                .map(|l| l.to_string())
                .collect::<Vec<_>>()
                .join(", "),
        );
        put("study.replicates", self.study_replicates().to_string());
        put("study.reference_level", self.study_reference_level().to_string());
        put("resource.max_events", self.max_events.to_string());
        m
    }
}

fn format_point(p: &[f64]) -> String {
    if p.len() == 1 {
        p[0].to_string()
    } else {
        format!("({})", join(p, ";"))
    }
}
