//! Job configuration: JSON parsing and schema validation with defaults.
//!
//! Validation walks the raw JSON value so that every violation is collected before
//! anything is reported.

use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use qfel_core::hamiltonians::check_margin;
use qfel_core::LadderWindow;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid JSON at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{} configuration violation(s):\n  {}", .0.len(), .0.join("\n  "))]
    Invalid(Vec<String>),
}

/// Evenly spaced grid `[start, end, points]`, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid(pub f64, pub f64, pub usize);

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        let Grid(a, b, n) = *self;
        if n == 1 {
            return vec![a];
        }
        (0..n).map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()
    }
}

/// Ladder window `[mu_min, mu_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Window(pub i32, pub i32);

impl Window {
    pub fn ladder(&self) -> LadderWindow {
        LadderWindow::new(self.0, self.1).expect("validated")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedKind {
    Fock,
    Coherent,
    Thermal,
}

impl SeedKind {
    pub fn name(self) -> &'static str {
        match self {
            SeedKind::Fock => "fock",
            SeedKind::Coherent => "coherent",
            SeedKind::Thermal => "thermal",
        }
    }

    /// Photon-number variance of the seed with mean `n0`.
    pub fn variance(self, n0: f64) -> f64 {
        match self {
            SeedKind::Fock => 0.0,
            SeedKind::Coherent => n0,
            SeedKind::Thermal => n0 * (n0 + 1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Seed {
    #[serde(rename = "type")]
    pub kind: SeedKind,
    pub n0: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Full,
    Dicke,
    Effective,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    Analytic,
    Averaged,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    Cf4,
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Integrator {
    pub scheme: SchemeName,
    pub step: f64,
    pub rtol: f64,
    pub max_halvings: u32,
    pub norm_drift_tol: f64,
    pub leakage_tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PropagatorChoice {
    Deep,
    Third,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DispersionJob {
    pub alpha: f64,
    pub kappa_grid: Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GainCurveJob {
    pub alphas: Vec<f64>,
    /// `None`: the band `|κ| ≤ 2` of each coupling, 401 points.
    pub p_grid: Option<Grid>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvolveJob {
    pub n_electrons: u32,
    pub alpha: f64,
    pub kappa: f64,
    pub window: Window,
    pub n_max: u32,
    /// Resolved sector; Fock seeds default to `n0`.
    pub charge_sector: Option<i64>,
    pub seed: Seed,
    pub generator: GeneratorKind,
    pub order: u8,
    pub averaging: Averaging,
    /// Grid in units of `α_N τ`.
    pub alpha_tau_grid: Grid,
    pub integrator: Integrator,
    pub dump_operator: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarianceJob {
    pub ell_grid: Grid,
    pub kappas: Vec<f64>,
    pub n0: f64,
    pub seeds: Vec<SeedKind>,
    pub propagator: PropagatorChoice,
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AveragingCheckJob {
    pub n_electrons: Vec<u32>,
    pub window: Window,
    pub n_max: u32,
    pub alpha: f64,
    pub kappa: f64,
    pub orders: Vec<u8>,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "figure", rename_all = "lowercase")]
pub enum FigureJob {
    Fig3 { kappas: Vec<f64>, ell_grid: Grid },
    Fig4 { alpha_quantum: f64, alpha_classical: f64, p_grid_quantum: Grid, p_grid_classical: Grid },
    Fig5 { n0: f64, kappa: f64, ell_grid: Grid },
    Fig6 { alphas: Vec<f64>, kappa_grid: Grid },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Job {
    Dispersion(DispersionJob),
    GainCurve(GainCurveJob),
    Evolve(EvolveJob),
    Variance(VarianceJob),
    AveragingCheck(AveragingCheckJob),
    Figure(FigureJob),
}

/// A fully defaulted, validated configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JobConfig {
    #[serde(flatten)]
    pub job: Job,
    pub out: Option<String>,
}

impl JobConfig {
    pub fn kind(&self) -> &'static str {
        match self.job {
            Job::Dispersion(_) => "dispersion",
            Job::GainCurve(_) => "gain-curve",
            Job::Evolve(_) => "evolve",
            Job::Variance(_) => "variance",
            Job::AveragingCheck(_) => "averaging-check",
            Job::Figure(_) => "figure",
        }
    }

    pub fn echo(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

pub const KINDS: [&str; 6] = ["dispersion", "gain-curve", "evolve", "variance", "averaging-check", "figure"];

pub fn load(path: &Path) -> Result<JobConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<JobConfig, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: {
            let full = e.to_string();
            let suffix = format!(" at line {} column {}", e.line(), e.column());
            full.strip_suffix(&suffix).map(str::to_string).unwrap_or(full)
        },
    })?;
    validate(&value)
}

pub fn validate(value: &Value) -> Result<JobConfig, ConfigError> {
    let mut errs = Vec::new();
    let Some(map) = value.as_object() else {
        return Err(ConfigError::Invalid(vec!["the configuration must be a JSON object".into()]));
    };
    let mut top = Fields::new(map, "", &mut errs);
    let kind = top.choice("kind", &KINDS, None);
    let out = top.string("out");
    let job = match kind {
        Some("dispersion") => Some(Job::Dispersion(dispersion(&mut top))),
        Some("gain-curve") => Some(Job::GainCurve(gain_curve(&mut top))),
        Some("evolve") => Some(Job::Evolve(evolve(&mut top))),
        Some("variance") => Some(Job::Variance(variance(&mut top))),
        Some("averaging-check") => Some(Job::AveragingCheck(averaging_check(&mut top))),
        Some("figure") => figure(&mut top).map(Job::Figure),
        _ => {
            top.ignore_rest();
            None
        }
    };
    top.finish();
    match job {
        Some(job) if errs.is_empty() => Ok(JobConfig { job, out }),
        _ => Err(ConfigError::Invalid(errs)),
    }
}

fn dispersion(f: &mut Fields) -> DispersionJob {
    DispersionJob { alpha: f.positive("alpha", None), kappa_grid: f.grid("kappa_grid", Some(Grid(-2.0, 2.0, 401))) }
}

fn gain_curve(f: &mut Fields) -> GainCurveJob {
    let alphas = f.positive_list("alphas", None);
    let p_grid = f.has("p_grid").then(|| f.grid("p_grid", None));
    GainCurveJob { alphas, p_grid }
}

fn evolve(f: &mut Fields) -> EvolveJob {
    let n_electrons = f.uint("n_electrons", None, 1) as u32;
    let alpha = f.positive("alpha", None);
    let kappa = f.number("kappa", Some(0.0));
    let window = f.window("window", Some(Window(-1, 2)));
    let n_max = f.uint("n_max", Some(16), 0) as u32;
    let seed = f.seed("seed");
    let explicit_sector = f.int("charge_sector");
    let charge_sector = match (explicit_sector, seed.kind) {
        (Some(c), SeedKind::Fock) => Some(c),
        (Some(_), _) => {
            f.error("charge_sector requires a fock seed (coherent and thermal seeds span all sectors)");
            None
        }
        (None, SeedKind::Fock) => Some(seed.n0 as i64),
        (None, _) => None,
    };
    if let (Some(c), SeedKind::Fock) = (charge_sector, seed.kind) {
        if c != seed.n0 as i64 {
            f.error(format!("charge_sector {c} does not contain the fock({}) seed, whose charge is {}", seed.n0, seed.n0));
        }
    }
    let generator = match f.choice("generator", &["full", "dicke", "effective"], Some("full")) {
        Some("dicke") => GeneratorKind::Dicke,
        Some("effective") => GeneratorKind::Effective,
        _ => GeneratorKind::Full,
    };
    let order = f.uint("order", Some(3), 1) as u8;
    if !(1..=3).contains(&order) {
        f.error(format!("order must be 1, 2 or 3, got {order}"));
    } else if generator == GeneratorKind::Effective && window.0 <= 0 && window.1 >= 1 {
        if let Err(e) = check_margin(window.ladder(), order) {
            f.error(e.to_string());
        }
    }
    let averaging = match f.choice("averaging", &["analytic", "averaged"], Some("analytic")) {
        Some("averaged") => Averaging::Averaged,
        _ => Averaging::Analytic,
    };
    let alpha_tau_grid = f.grid("alpha_tau_grid", Some(Grid(0.0, 1.2, 13)));
    if alpha_tau_grid.0 != 0.0 {
        f.error("alpha_tau_grid must start at 0");
    }
    let integrator = f.integrator("integrator");
    let dump_operator = f.boolean("dump_operator", false);
    EvolveJob {
        n_electrons,
        alpha,
        kappa,
        window,
        n_max,
        charge_sector,
        seed,
        generator,
        order,
        averaging,
        alpha_tau_grid,
        integrator,
        dump_operator,
    }
}

fn variance(f: &mut Fields) -> VarianceJob {
    let ell_grid = f.grid("ell_grid", Some(Grid(0.0, 10.0, 201)));
    if ell_grid.0 < 0.0 {
        f.error("ell_grid must not contain negative lengths");
    }
    let kappas = f.number_list("kappas", Some(vec![0.0]));
    let n0 = f.nonnegative("n0", Some(100.0));
    let seeds = f.seed_kinds("seeds");
    let propagator = match f.choice("propagator", &["deep", "third"], Some("deep")) {
        Some("third") => PropagatorChoice::Third,
        _ => PropagatorChoice::Deep,
    };
    let alpha = f.has("alpha").then(|| f.positive("alpha", None));
    if propagator == PropagatorChoice::Third && alpha.is_none() {
        f.error("propagator \"third\" needs alpha");
    }
    VarianceJob { ell_grid, kappas, n0, seeds, propagator, alpha }
}

fn averaging_check(f: &mut Fields) -> AveragingCheckJob {
    let n_electrons = f.uint_or_list("n_electrons", vec![1, 2, 3]);
    let window = f.window("window", Some(Window(-3, 4)));
    let n_max = f.uint("n_max", Some(6), 0) as u32;
    let alpha = f.positive("alpha", Some(0.3));
    let kappa = f.number("kappa", Some(0.8));
    let orders: Vec<u8> = f.uint_or_list("orders", vec![2, 3]).into_iter().map(|k| k as u8).collect();
    for &k in &orders {
        if !(1..=3).contains(&k) {
            f.error(format!("orders must be 1, 2 or 3, got {k}"));
        } else if window.0 <= 0 && window.1 >= 1 {
            if let Err(e) = check_margin(window.ladder(), k) {
                f.error(e.to_string());
            }
        }
    }
    let tolerance = f.positive("tolerance", Some(1e-12));
    AveragingCheckJob { n_electrons, window, n_max, alpha, kappa, orders, tolerance }
}

fn figure(f: &mut Fields) -> Option<FigureJob> {
    let which = f.choice("figure", &["fig3", "fig4", "fig5", "fig6"], None);
    let job = match which? {
        "fig3" => {
            let kappas = f.number_list("kappas", Some(vec![0.0, 1.0, 1.5, 1.9]));
            let ell_grid = f.grid("ell_grid", Some(Grid(0.0, 10.0, 201)));
            if ell_grid.0 < 0.0 {
                f.error("ell_grid must not contain negative lengths");
            }
            FigureJob::Fig3 { kappas, ell_grid }
        }
        "fig4" => FigureJob::Fig4 {
            alpha_quantum: f.positive("alpha_quantum", Some(0.1)),
            alpha_classical: f.positive("alpha_classical", Some(10.0)),
            p_grid_quantum: f.grid("p_grid_quantum", Some(Grid(0.35, 0.65, 301))),
            p_grid_classical: f.grid("p_grid_classical", Some(Grid(-3.0, 3.0, 601))),
        },
        "fig5" => {
            let n0 = f.nonnegative("n0", Some(100.0));
            let kappa = f.number("kappa", Some(0.0));
            let ell_grid = f.grid("ell_grid", Some(Grid(0.0, 10.0, 201)));
            if ell_grid.0 < 0.0 {
                f.error("ell_grid must not contain negative lengths");
            }
            FigureJob::Fig5 { n0, kappa, ell_grid }
        }
        _ => {
            let alphas = f.positive_list("alphas", Some(vec![0.1, 0.5]));
            let kappa_grid = f.grid("kappa_grid", Some(Grid(-1.5, 1.5, 301)));
            if kappa_grid.0.abs() >= 2.0 || kappa_grid.1.abs() >= 2.0 {
                f.error("kappa_grid must stay inside |kappa| < 2, where the third-order gain is defined");
            }
            FigureJob::Fig6 { alphas, kappa_grid }
        }
    };
    Some(job)
}

/// One JSON object being validated; records which keys were consumed.
struct Fields<'a> {
    map: &'a Map<String, Value>,
    prefix: String,
    seen: Vec<String>,
    errs: &'a mut Vec<String>,
    skip_unknown: bool,
}

impl<'a> Fields<'a> {
    fn new(map: &'a Map<String, Value>, prefix: &str, errs: &'a mut Vec<String>) -> Self {
        Self { map, prefix: prefix.to_string(), seen: Vec::new(), errs, skip_unknown: false }
    }

    fn path(&self, key: &str) -> String {
        if self.prefix.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.prefix)
        }
    }

    fn error(&mut self, msg: impl Into<String>) {
        self.errs.push(msg.into());
    }

    fn has(&self, key: &str) -> bool {
        self.map.get(key).is_some_and(|v| !v.is_null())
    }

    fn get(&mut self, key: &str) -> Option<&'a Value> {
        self.seen.push(key.to_string());
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn missing(&mut self, key: &str) {
        let p = self.path(key);
        self.error(format!("missing required key `{p}`"));
    }

    fn ignore_rest(&mut self) {
        self.skip_unknown = true;
    }

    fn finish(self) {
        if self.skip_unknown {
            return;
        }
        for k in self.map.keys() {
            if !self.seen.iter().any(|s| s == k) {
                let p = if self.prefix.is_empty() { k.clone() } else { format!("{}.{k}", self.prefix) };
                self.errs.push(format!("unknown key `{p}`"));
            }
        }
    }

    fn number(&mut self, key: &str, default: Option<f64>) -> f64 {
        match (self.get(key), default) {
            (Some(v), _) => match v.as_f64() {
                Some(x) => x,
                None => {
                    let p = self.path(key);
                    self.error(format!("`{p}` must be a number"));
                    f64::NAN
                }
            },
            (None, Some(d)) => d,
            (None, None) => {
                self.missing(key);
                f64::NAN
            }
        }
    }

    fn positive(&mut self, key: &str, default: Option<f64>) -> f64 {
        let present = self.has(key);
        let x = self.number(key, default);
        if present && !x.is_nan() && !(x > 0.0 && x.is_finite()) {
            let p = self.path(key);
            self.error(format!("{p} must be positive, got {x}"));
        }
        x
    }

    fn nonnegative(&mut self, key: &str, default: Option<f64>) -> f64 {
        let present = self.has(key);
        let x = self.number(key, default);
        if present && !x.is_nan() && !(x >= 0.0 && x.is_finite()) {
            let p = self.path(key);
            self.error(format!("{p} must be nonnegative, got {x}"));
        }
        x
    }

    fn uint(&mut self, key: &str, default: Option<u64>, min: u64) -> u64 {
        let v = self.get(key);
        let p = self.path(key);
        match (v, default) {
            (Some(v), _) => match v.as_u64().filter(|&n| n <= u32::MAX as u64) {
                Some(n) if n >= min => n,
                Some(n) => {
                    self.error(format!("{p} must be at least {min}, got {n}"));
                    min
                }
                None => {
                    self.error(format!("`{p}` must be a nonnegative integer"));
                    min
                }
            },
            (None, Some(d)) => d,
            (None, None) => {
                self.missing(key);
                min
            }
        }
    }

    fn int(&mut self, key: &str) -> Option<i64> {
        let v = self.get(key)?;
        let p = self.path(key);
        match v.as_i64() {
            Some(n) => Some(n),
            None => {
                self.error(format!("`{p}` must be an integer"));
                None
            }
        }
    }

    fn boolean(&mut self, key: &str, default: bool) -> bool {
        match self.get(key) {
            None => default,
            Some(Value::Bool(b)) => *b,
            Some(_) => {
                let p = self.path(key);
                self.error(format!("`{p}` must be true or false"));
                default
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.get(key) {
            None => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                let p = self.path(key);
                self.error(format!("`{p}` must be a string"));
                None
            }
        }
    }

    fn choice(&mut self, key: &str, options: &[&'static str], default: Option<&'static str>) -> Option<&'static str> {
        let p = self.path(key);
        match (self.get(key), default) {
            (Some(Value::String(s)), _) => match options.iter().find(|o| *o == s) {
                Some(o) => Some(o),
                None => {
                    self.error(format!("unknown {p} `{s}`; expected one of {}", options.join(", ")));
                    None
                }
            },
            (Some(_), _) => {
                self.error(format!("`{p}` must be a string"));
                None
            }
            (None, Some(d)) => Some(d),
            (None, None) => {
                self.missing(key);
                None
            }
        }
    }

    fn number_list(&mut self, key: &str, default: Option<Vec<f64>>) -> Vec<f64> {
        let p = self.path(key);
        match (self.get(key), default) {
            (Some(Value::Array(items)), _) => {
                let xs: Vec<Option<f64>> = items.iter().map(Value::as_f64).collect();
                if items.is_empty() || xs.iter().any(Option::is_none) {
                    self.error(format!("`{p}` must be a nonempty array of numbers"));
                    return Vec::new();
                }
                xs.into_iter().flatten().collect()
            }
            (Some(_), _) => {
                self.error(format!("`{p}` must be a nonempty array of numbers"));
                Vec::new()
            }
            (None, Some(d)) => d,
            (None, None) => {
                self.missing(key);
                Vec::new()
            }
        }
    }

    fn positive_list(&mut self, key: &str, default: Option<Vec<f64>>) -> Vec<f64> {
        let xs = self.number_list(key, default);
        if xs.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            let p = self.path(key);
            self.error(format!("every entry of {p} must be positive"));
        }
        xs
    }

    fn uint_or_list(&mut self, key: &str, default: Vec<u32>) -> Vec<u32> {
        let p = self.path(key);
        let parse = |v: &Value| v.as_u64().filter(|&n| n >= 1 && n <= u32::MAX as u64).map(|n| n as u32);
        match self.get(key) {
            None => default,
            Some(Value::Array(items)) if !items.is_empty() && items.iter().all(|v| parse(v).is_some()) => {
                items.iter().filter_map(parse).collect()
            }
            Some(v) if parse(v).is_some() => vec![parse(v).expect("checked")],
            Some(_) => {
                self.error(format!("`{p}` must be a positive integer or a nonempty array of them"));
                default
            }
        }
    }

    fn grid(&mut self, key: &str, default: Option<Grid>) -> Grid {
        let p = self.path(key);
        let fallback = default.unwrap_or(Grid(0.0, 1.0, 2));
        let v = match (self.get(key), default) {
            (Some(v), _) => v,
            (None, Some(d)) => return d,
            (None, None) => {
                self.missing(key);
                return fallback;
            }
        };
        let shape_err = format!("`{p}` must be [start, end, points] with start <= end and points >= 1");
        let Some([a, b, n]) = v.as_array().and_then(|xs| <&[Value; 3]>::try_from(xs.as_slice()).ok()) else {
            self.error(shape_err);
            return fallback;
        };
        match (a.as_f64(), b.as_f64(), n.as_u64()) {
            (Some(a), Some(b), Some(n)) if a.is_finite() && b.is_finite() && a <= b && n >= 1 && (n > 1 || a == b) => {
                Grid(a, b, n as usize)
            }
            _ => {
                self.error(shape_err);
                fallback
            }
        }
    }

    fn window(&mut self, key: &str, default: Option<Window>) -> Window {
        let p = self.path(key);
        let fallback = default.unwrap_or(Window(0, 1));
        let v = match (self.get(key), default) {
            (Some(v), _) => v,
            (None, Some(d)) => return d,
            (None, None) => {
                self.missing(key);
                return fallback;
            }
        };
        let pair = v.as_array().filter(|xs| xs.len() == 2).and_then(|xs| Some((xs[0].as_i64()?, xs[1].as_i64()?)));
        match pair {
            Some((lo, hi)) if lo <= 0 && hi >= 1 && lo >= -1000 && hi <= 1000 => Window(lo as i32, hi as i32),
            Some((lo, hi)) => {
                self.error(format!("{p} {{{lo}..{hi}}} must contain the resonant levels 0 and 1"));
                fallback
            }
            None => {
                self.error(format!("`{p}` must be [mu_min, mu_max] (integers)"));
                fallback
            }
        }
    }

    fn seed(&mut self, key: &str) -> Seed {
        let default = Seed { kind: SeedKind::Fock, n0: 0.0 };
        let p = self.path(key);
        match self.get(key) {
            None => default,
            Some(Value::Object(m)) => {
                let mut sub = Fields::new(m, &p, self.errs);
                let kind = match sub.choice("type", &["fock", "coherent", "thermal"], Some("fock")) {
                    Some("coherent") => SeedKind::Coherent,
                    Some("thermal") => SeedKind::Thermal,
                    _ => SeedKind::Fock,
                };
                let n0 = sub.nonnegative("n0", Some(0.0));
                if kind == SeedKind::Fock && n0.fract() != 0.0 {
                    sub.error(format!("{p}.n0 must be a whole number for a fock seed, got {n0}"));
                }
                sub.finish();
                Seed { kind, n0 }
            }
            Some(_) => {
                self.error(format!("`{p}` must be an object {{\"type\": ..., \"n0\": ...}}"));
                default
            }
        }
    }

    fn seed_kinds(&mut self, key: &str) -> Vec<SeedKind> {
        let all = vec![SeedKind::Thermal, SeedKind::Coherent, SeedKind::Fock];
        let p = self.path(key);
        match self.get(key) {
            None => all,
            Some(Value::Array(items)) if !items.is_empty() => {
                let mut out = Vec::new();
                for it in items {
                    match it.as_str() {
                        Some("fock") => out.push(SeedKind::Fock),
                        Some("coherent") => out.push(SeedKind::Coherent),
                        Some("thermal") => out.push(SeedKind::Thermal),
                        _ => self.error(format!("{p} entries must be \"fock\", \"coherent\" or \"thermal\", got {it}")),
                    }
                }
                out
            }
            Some(_) => {
                self.error(format!("`{p}` must be a nonempty array of seed names"));
                all
            }
        }
    }

    fn integrator(&mut self, key: &str) -> Integrator {
        let d = qfel_core::IntegratorConfig::default();
        let p = self.path(key);
        let defaults = Integrator {
            scheme: SchemeName::Cf4,
            step: d.step,
            rtol: d.rtol,
            max_halvings: d.max_halvings,
            norm_drift_tol: d.norm_drift_tol,
            leakage_tol: d.leakage_tol,
        };
        match self.get(key) {
            None => defaults,
            Some(Value::Object(m)) => {
                let mut sub = Fields::new(m, &p, self.errs);
                let scheme = match sub.choice("scheme", &["cf4", "rk4"], Some("cf4")) {
                    Some("rk4") => SchemeName::Rk4,
                    _ => SchemeName::Cf4,
                };
                let step = sub.positive("step", Some(d.step));
                let rtol = sub.positive("rtol", Some(d.rtol));
                if rtol > 1e-3 {
                    sub.error(format!("{p}.rtol must lie in (0, 1e-3], got {rtol}"));
                }
                let max_halvings = sub.uint("max_halvings", Some(d.max_halvings as u64), 0) as u32;
                let norm_drift_tol = sub.positive("norm_drift_tol", Some(d.norm_drift_tol));
                let leakage_tol = sub.positive("leakage_tol", Some(d.leakage_tol));
                sub.finish();
                Integrator { scheme, step, rtol, max_halvings, norm_drift_tol, leakage_tol }
            }
            Some(_) => {
                self.error(format!("`{p}` must be an object"));
                defaults
            }
        }
    }
}
