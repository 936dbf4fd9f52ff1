//! Experiment configuration: flat `key = value` text or a JSON object.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use assb_core::trajectory::InitialState;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Trajectory,
    ChannelSteady,
    ChannelGap,
    EntanglementExact,
    Collapse,
    Validate,
}

impl Kind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "trajectory" => Kind::Trajectory,
            "channel-steady" => Kind::ChannelSteady,
            "channel-gap" => Kind::ChannelGap,
            "entanglement-exact" => Kind::EntanglementExact,
            "collapse" => Kind::Collapse,
            "validate" => Kind::Validate,
            _ => return None,
        })
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Trajectory => "trajectory",
            Kind::ChannelSteady => "channel-steady",
            Kind::ChannelGap => "channel-gap",
            Kind::EntanglementExact => "entanglement-exact",
            Kind::Collapse => "collapse",
            Kind::Validate => "validate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Which channel block to use; `Auto` picks the smallest valid one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockChoice {
    Auto,
    Charge,
    Balanced,
    Full,
}

/// Direction in parameter space swept by a collapse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Perturbation {
    /// `p_z = p`, `p_s = 1 - p`.
    Z,
    /// `p_x = p_y = p`, `p_s = 1 - 2p`.
    Xy,
}

/// Steady-state quantity fed to a collapse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollapseObservable {
    Purity,
    /// `⟨S₁ˣS_Lˣ + S₁ʸS_Lʸ⟩`.
    Xy,
    /// `⟨S₁·S_L⟩`.
    SpinSpin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub sites: Vec<usize>,
    pub p_s: Option<f64>,
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
    /// Number of up spins; defaults to `⌊L/2⌋`.
    pub up: Option<usize>,
    pub block: BlockChoice,
    pub initial: InitialState,
    /// Circuit steps; defaults to `8L`.
    pub steps: Option<usize>,
    pub trajectories: usize,
    pub observables: Vec<String>,
    pub period: usize,
    pub a_size: Option<usize>,
    pub collapse_observable: CollapseObservable,
    pub perturbation: Perturbation,
    pub grid: Vec<f64>,
    /// Multiply collapse data by `(L-1)/L`.
    pub size_correction: bool,
    pub input: Option<PathBuf>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl ExperimentConfig {
    fn new(kind: Kind) -> Self {
        Self {
            kind,
            sites: Vec::new(),
            p_s: None,
            p_x: 0.0,
            p_y: 0.0,
            p_z: 0.0,
            up: None,
            block: BlockChoice::Auto,
            initial: InitialState::Alternating,
            steps: None,
            trajectories: assb_core::trajectory::DEFAULT_TRAJECTORIES,
            observables: Vec::new(),
            period: 1,
            a_size: None,
            collapse_observable: CollapseObservable::Purity,
            perturbation: Perturbation::Z,
            grid: Vec::new(),
            size_correction: false,
            input: None,
            seed: 0,
            output: None,
            format: Format::Csv,
        }
    }

    /// `p_s`, explicit or `1 - p_x - p_y - p_z`.
    pub fn p_s(&self) -> f64 {
        self.p_s.unwrap_or(1.0 - self.p_x - self.p_y - self.p_z)
    }

    /// Canonical text of every field that affects the data.
    pub fn canonical(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",");
        let sites = self.sites.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        };
        put("kind", self.kind.to_string());
        put("sites", sites);
        put("p_s", format!("{:e}", self.p_s()));
        put("p_x", format!("{:e}", self.p_x));
        put("p_y", format!("{:e}", self.p_y));
        put("p_z", format!("{:e}", self.p_z));
        put("up", format!("{:?}", self.up));
        put("block", format!("{:?}", self.block));
        put("initial", format!("{:?}", self.initial));
        put("steps", format!("{:?}", self.steps));
        put("trajectories", self.trajectories.to_string());
        put("observables", self.observables.join(";"));
        put("period", self.period.to_string());
        put("a_size", format!("{:?}", self.a_size));
        put("observable", format!("{:?}", self.collapse_observable));
        put("perturbation", format!("{:?}", self.perturbation));
        put("grid", list(&self.grid));
        put("size_correction", self.size_correction.to_string());
        put("input", format!("{:?}", self.input));
        s
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A raw value with the line it came from (`None` for JSON input).
struct Entry {
    value: String,
    line: Option<usize>,
}

fn err(line: Option<usize>, key: &str, msg: impl fmt::Display) -> CliError {
    match line {
        Some(l) => CliError::Config(format!("line {l}: {key}: {msg}")),
        None => CliError::Config(format!("{key}: {msg}")),
    }
}

fn lex_text(text: &str) -> Result<BTreeMap<String, Entry>, CliError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {line}: expected `key = value`, got {body:?}")))?;
        let key = k.trim().to_string();
        if map.contains_key(&key) {
            return Err(err(Some(line), &key, "duplicate key"));
        }
        map.insert(
            key,
            Entry {
                value: v.trim().to_string(),
                line: Some(line),
            },
        );
    }
    Ok(map)
}

fn lex_json(text: &str) -> Result<BTreeMap<String, Entry>, CliError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| CliError::Config("JSON config must be an object".into()))?;
    let scalar = |k: &str, v: &serde_json::Value| -> Result<String, CliError> {
        match v {
            serde_json::Value::String(s) => Ok(s.clone()),
            serde_json::Value::Number(n) => Ok(n.to_string()),
            serde_json::Value::Bool(b) => Ok(b.to_string()),
            _ => Err(err(None, k, "expected a string, number, boolean or list of those")),
        }
    };
    let mut map = BTreeMap::new();
    for (k, v) in obj {
        let value = match v {
            serde_json::Value::Array(items) => items
                .iter()
                .map(|x| scalar(k, x))
                .collect::<Result<Vec<_>, _>>()?
                .join(","),
            other => scalar(k, other)?,
        };
        map.insert(k.clone(), Entry { value, line: None });
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(key: &str, e: &Entry) -> Result<T, CliError> {
    e.value
        .parse()
        .map_err(|_| err(e.line, key, format!("cannot parse {:?}", e.value)))
}

/// `4`, `4,6,8` or the inclusive range `4..=9`.
fn parse_sites(key: &str, e: &Entry) -> Result<Vec<usize>, CliError> {
    let mut out = Vec::new();
    for part in e.value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = part.split_once("..=") {
            let a: usize = a
                .trim()
                .parse()
                .map_err(|_| err(e.line, key, format!("bad range {part:?}")))?;
            let b: usize = b
                .trim()
                .parse()
                .map_err(|_| err(e.line, key, format!("bad range {part:?}")))?;
            if a > b {
                return Err(err(e.line, key, format!("empty range {part:?}")));
            }
            out.extend(a..=b);
        } else {
            out.push(
                part.parse()
                    .map_err(|_| err(e.line, key, format!("cannot parse {part:?}")))?,
            );
        }
    }
    if out.is_empty() {
        return Err(err(e.line, key, "no sizes given"));
    }
    Ok(out)
}

fn parse_floats(key: &str, e: &Entry) -> Result<Vec<f64>, CliError> {
    e.value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| err(e.line, key, format!("cannot parse {s:?}"))))
        .collect()
}

fn parse_initial(key: &str, e: &Entry) -> Result<InitialState, CliError> {
    let v = e.value.as_str();
    if v == "alternating" || v == "neel" {
        return Ok(InitialState::Alternating);
    }
    if let Some(n) = v.strip_prefix("dicke:") {
        return Ok(InitialState::Dicke(
            n.parse()
                .map_err(|_| err(e.line, key, format!("bad up count in {v:?}")))?,
        ));
    }
    if let Some(b) = v.strip_prefix("product:") {
        let bits = u64::from_str_radix(b.trim_start_matches("0b"), 2)
            .map_err(|_| err(e.line, key, format!("bad bit string in {v:?}")))?;
        return Ok(InitialState::Product(bits));
    }
    Err(err(
        e.line,
        key,
        format!("unknown initial state {v:?} (alternating, dicke:N, product:BITS)"),
    ))
}

const KEYS: &[&str] = &[
    "kind",
    "sites",
    "p_s",
    "p_x",
    "p_y",
    "p_z",
    "up",
    "charge",
    "block",
    "initial",
    "steps",
    "trajectories",
    "observables",
    "period",
    "a_size",
    "observable",
    "perturbation",
    "grid",
    "size_correction",
    "input",
    "seed",
    "output",
    "format",
];

fn build(map: BTreeMap<String, Entry>) -> Result<ExperimentConfig, CliError> {
    for (k, e) in &map {
        if !KEYS.contains(&k.as_str()) {
            return Err(err(e.line, k, "unknown key"));
        }
    }
    let kind_entry = map
        .get("kind")
        .ok_or_else(|| CliError::Config("missing required key `kind`".into()))?;
    let kind = Kind::parse(&kind_entry.value).ok_or_else(|| {
        err(
            kind_entry.line,
            "kind",
            format!(
                "unknown kind {:?} (trajectory, channel-steady, channel-gap, entanglement-exact, collapse, validate)",
                kind_entry.value
            ),
        )
    })?;
    let mut c = ExperimentConfig::new(kind);
    for (k, e) in &map {
        match k.as_str() {
            "kind" => {}
            "sites" => c.sites = parse_sites(k, e)?,
            "p_s" => c.p_s = Some(parse_num(k, e)?),
            "p_x" => c.p_x = parse_num(k, e)?,
            "p_y" => c.p_y = parse_num(k, e)?,
            "p_z" => c.p_z = parse_num(k, e)?,
            "up" => c.up = Some(parse_num(k, e)?),
            "charge" => {}
            "block" => {
                c.block = match e.value.as_str() {
                    "auto" => BlockChoice::Auto,
                    "charge" => BlockChoice::Charge,
                    "balanced" => BlockChoice::Balanced,
                    "full" => BlockChoice::Full,
                    v => {
                        return Err(err(
                            e.line,
                            k,
                            format!("unknown block {v:?} (auto, charge, balanced, full)"),
                        ))
                    }
                }
            }
            "initial" => c.initial = parse_initial(k, e)?,
            "steps" => c.steps = Some(parse_num(k, e)?),
            "trajectories" => c.trajectories = parse_num(k, e)?,
            "observables" => {
                c.observables = e
                    .value
                    .split(';')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            }
            "period" => c.period = parse_num(k, e)?,
            "a_size" => c.a_size = Some(parse_num(k, e)?),
            "observable" => {
                c.collapse_observable = match e.value.as_str() {
                    "purity" => CollapseObservable::Purity,
                    "xy" | "xy1l" => CollapseObservable::Xy,
                    "s1sl" | "spin_spin" => CollapseObservable::SpinSpin,
                    v => {
                        return Err(err(
                            e.line,
                            k,
                            format!("unknown collapse observable {v:?} (purity, xy, s1sl)"),
                        ))
                    }
                }
            }
            "perturbation" => {
                c.perturbation = match e.value.as_str() {
                    "z" => Perturbation::Z,
                    "xy" => Perturbation::Xy,
                    v => return Err(err(e.line, k, format!("unknown perturbation {v:?} (z, xy)"))),
                }
            }
            "grid" => c.grid = parse_floats(k, e)?,
            "size_correction" => c.size_correction = parse_num(k, e)?,
            "input" => c.input = Some(PathBuf::from(&e.value)),
            "seed" => c.seed = parse_num(k, e)?,
            "output" => c.output = Some(PathBuf::from(&e.value)),
            "format" => {
                c.format = Format::parse(&e.value)
                    .ok_or_else(|| err(e.line, k, format!("unknown format {:?} (csv, json)", e.value)))?
            }
            _ => unreachable!("keys were checked above"),
        }
    }
    if let Some(e) = map.get("charge") {
        let q: f64 = parse_num("charge", e)?;
        if c.up.is_some() {
            return Err(err(e.line, "charge", "give either `up` or `charge`, not both"));
        }
        let &[l] = c.sites.as_slice() else {
            return Err(err(
                e.line,
                "charge",
                "needs a single system size; use `up` for size lists",
            ));
        };
        let n = q + l as f64 / 2.0;
        if n.fract() != 0.0 || n < 0.0 || n > l as f64 {
            return Err(err(e.line, "charge", format!("Q = {q} is not allowed for L = {l}")));
        }
        c.up = Some(n as usize);
    }
    validate(&c, &map)?;
    Ok(c)
}

fn validate(c: &ExperimentConfig, map: &BTreeMap<String, Entry>) -> Result<(), CliError> {
    let line = |k: &str| map.get(k).and_then(|e| e.line);
    for (k, v) in [("p_x", c.p_x), ("p_y", c.p_y), ("p_z", c.p_z), ("p_s", c.p_s())] {
        if !(0.0..=1.0).contains(&v) {
            return Err(err(line(k), k, format!("probability {v} outside [0, 1]")));
        }
    }
    let total = c.p_s() + c.p_x + c.p_y + c.p_z;
    if (total - 1.0).abs() > 1e-12 {
        return Err(err(line("p_s"), "p_s", format!("probabilities sum to {total}, not 1")));
    }
    let needs_sites = !matches!(c.kind, Kind::Validate) && !(c.kind == Kind::Collapse && c.input.is_some());
    if needs_sites && c.sites.is_empty() {
        return Err(CliError::Config(format!("kind {} requires `sites`", c.kind)));
    }
    if c.kind == Kind::Trajectory && c.observables.is_empty() {
        return Err(CliError::Config("kind trajectory requires `observables`".into()));
    }
    if c.kind == Kind::Trajectory && c.trajectories == 0 {
        return Err(err(line("trajectories"), "trajectories", "must be positive"));
    }
    if c.period == 0 {
        return Err(err(line("period"), "period", "must be positive"));
    }
    if c.kind == Kind::Collapse && c.input.is_none() && c.grid.is_empty() {
        return Err(CliError::Config("kind collapse requires `grid` or `input`".into()));
    }
    Ok(())
}

/// Parse a config file; JSON if the first non-blank character is `{`.
pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    let map = if text.trim_start().starts_with('{') {
        lex_json(text)?
    } else {
        lex_text(text)?
    };
    build(map)
}

pub const PRESETS: &[&str] = &[
    "baseline-gap",
    "baseline-entropy",
    "u1-purity-collapse",
    "u1-xy-collapse",
    "nonu1-collapse",
    "single-pauli",
];

pub fn preset(name: &str) -> Result<ExperimentConfig, CliError> {
    let text = match name {
        "baseline-gap" => "kind = channel-gap\nsites = 4..=9\np_s = 1\n",
        "baseline-entropy" => {
            "kind = trajectory\nsites = 12\np_s = 1\ninitial = alternating\nsteps = 96\n\
             trajectories = 100\nobservables = entropy; s1sl\n"
        }
        "u1-purity-collapse" => {
            "kind = collapse\nsites = 4..=8\nobservable = purity\nperturbation = z\n\
             grid = 0.01, 0.02, 0.05, 0.1, 0.2, 0.3\n"
        }
        "u1-xy-collapse" => {
            "kind = collapse\nsites = 4..=8\nobservable = xy\nperturbation = z\n\
             grid = 0.01, 0.02, 0.05, 0.1, 0.2, 0.3\nsize_correction = true\n"
        }
        "nonu1-collapse" => {
            "kind = collapse\nsites = 4..=8\nobservable = s1sl\nperturbation = xy\n\
             grid = 0.005, 0.01, 0.02, 0.05, 0.1, 0.2\n"
        }
        "single-pauli" => "kind = channel-gap\nsites = 3..=6\np_s = 0.9\np_x = 0.1\nblock = full\n",
        _ => {
            return Err(CliError::Config(format!(
                "unknown preset {name:?}; available: {}",
                PRESETS.join(", ")
            )))
        }
    };
    parse(text)
}
