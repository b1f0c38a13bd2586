//! Experiment configuration: a JSON file, command-line flags, or both merged.

use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};
use vna_entropy::rng::Rng;
use vna_entropy::{Algebra, CqState, State};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    Ginibre,
    HaarPure,
    CqRandom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EntropyOp {
    Hmin,
    Hmax,
    Pguess,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Toeplitz,
    AllLinear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    Exact,
    Sample,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct EntropyParams {
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op: Option<EntropyOp>,
    /// Smoothing radius; 0 for the plain entropy.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct PaParams {
    /// Input bits; defaults to log2 of the alphabet size.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<u32>,
    /// Key bits.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<u32>,
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyKind>,
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeKind>,
    /// Family members drawn in sample mode.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Also evaluate the smoothed bound and the key length at this ε.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct DcParams {
    /// Number of messages |C|, a power of two.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message_size: Option<u64>,
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyKind>,
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeKind>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Also compute the message length at this ε.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct QkdParams {
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps1: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps2: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyParams {
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// POVM JSON for X; computational basis when absent.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub povm_x: Option<PathBuf>,
    /// POVM JSON for Y; Hadamard basis when absent.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub povm_y: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct SelftestParams {
    /// Run a single module's checks.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub module: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Subcommand)]
#[serde(tag = "command", content = "params", rename_all = "kebab-case")]
pub enum Command {
    /// Min/max entropy or guessing probability of a state.
    Entropy(EntropyParams),
    /// Privacy amplification over a hash family.
    Pa(PaParams),
    /// Data compression with quantum side information.
    Dc(DcParams),
    /// Achievable and converse key sizes.
    Qkd(QkdParams),
    /// Entropic uncertainty relation.
    Uncertainty(UncertaintyParams),
    /// Invariant suite of every module.
    Selftest(SelftestParams),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Entropy(_) => "entropy",
            Command::Pa(_) => "pa",
            Command::Dc(_) => "dc",
            Command::Qkd(_) => "qkd",
            Command::Uncertainty(_) => "uncertainty",
            Command::Selftest(_) => "selftest",
        }
    }
}

/// Where the input state comes from: a file, inline JSON, or a seeded generator.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    /// State or cq-state JSON file.
    #[arg(long = "state", global = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inline: Option<Value>,
    #[arg(long = "generator", value_enum, global = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<GeneratorKind>,
    /// Factor dimensions; for cq-random the factors of B.
    #[arg(long, value_delimiter = ',', global = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    /// Alphabet size for cq-random.
    #[arg(long, global = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    /// Generator seed; the run seed when absent.
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl InputSpec {
    pub fn is_empty(&self) -> bool {
        *self == InputSpec::default()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub command: Command,
    #[serde(default, skip_serializing_if = "InputSpec::is_empty")]
    pub input: InputSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub quick: bool,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn cfg_err(e: impl std::fmt::Display) -> ConfigError {
    ConfigError(e.to_string())
}

/// Overlays the set fields of `top` onto `base`, recursing into objects.
fn overlay(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => overlay(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Paths in a config file are relative to the file.
fn rebase(dir: &Path, p: &mut Option<PathBuf>) {
    if let Some(rel) = p.as_mut().filter(|r| r.is_relative()) {
        *rel = dir.join(&*rel);
    }
}

/// Flags given on the command line, each overriding the config file.
pub struct Overrides {
    pub command: Option<Command>,
    pub input: InputSpec,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub quick: bool,
}

pub fn resolve(file: Option<&Path>, cli: Overrides) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| cfg_err(format!("{}: {e}", p.display())))?;
            let mut v: Value = serde_json::from_str(&text).map_err(|e| cfg_err(format!("{}: {e}", p.display())))?;
            if let Some(obj) = v.as_object_mut() {
                obj.entry("params").or_insert_with(|| Value::Object(Default::default()));
            }
            if let Some(cmd) = &cli.command {
                if v.get("command").and_then(Value::as_str).is_some_and(|c| c != cmd.name()) {
                    return Err(cfg_err(format!(
                        "config is for {}, command line asks for {}",
                        v["command"],
                        cmd.name()
                    )));
                }
                let flags = serde_json::to_value(cmd).map_err(cfg_err)?;
                overlay(&mut v, flags);
            }
            let mut cfg: ExperimentConfig =
                serde_json::from_value(v).map_err(|e| cfg_err(format!("{}: {e}", p.display())))?;
            let dir = p.parent().unwrap_or(Path::new(""));
            rebase(dir, &mut cfg.input.file);
            if let Command::Uncertainty(u) = &mut cfg.command {
                rebase(dir, &mut u.povm_x);
                rebase(dir, &mut u.povm_y);
            }
            cfg
        }
        None => ExperimentConfig {
            command: cli.command.ok_or_else(|| cfg_err("no command given and no --config file"))?,
            input: InputSpec::default(),
            seed: 0,
            quick: false,
            output: OutputSpec::default(),
        },
    };
    if !cli.input.is_empty() {
        cfg.input = cli.input;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.quick |= cli.quick;
    if cli.out.is_some() {
        cfg.output.path = cli.out;
    }
    if cli.format.is_some() {
        cfg.output.format = cli.format;
    }
    Ok(cfg)
}

fn read_json(p: &Path) -> Result<Value, ConfigError> {
    let text = std::fs::read_to_string(p).map_err(|e| cfg_err(format!("{}: {e}", p.display())))?;
    serde_json::from_str(&text).map_err(|e| cfg_err(format!("{}: {e}", p.display())))
}

pub fn read_file<T: serde::de::DeserializeOwned>(p: &Path) -> Result<T, ConfigError> {
    serde_json::from_value(read_json(p)?).map_err(|e| cfg_err(format!("{}: {e}", p.display())))
}

/// An input state, quantum or classical-quantum.
pub enum Input {
    State(State),
    Cq(CqState),
}

impl Input {
    pub fn to_state(&self) -> State {
        match self {
            Input::State(s) => s.clone(),
            Input::Cq(c) => c.to_state(),
        }
    }

    /// Cq view: as given, or with the first tensor factor read as classical.
    pub fn to_cq(&self) -> Result<CqState, ConfigError> {
        match self {
            Input::Cq(c) => Ok(c.clone()),
            Input::State(s) => CqState::from_state(s).map_err(|e| cfg_err(format!("input is not a cq-state: {e}"))),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Input::State(s) => serde_json::to_value(s),
            Input::Cq(c) => serde_json::to_value(c),
        }
        .unwrap_or(Value::Null)
    }
}

fn parse_input(v: Value) -> Result<Input, ConfigError> {
    if v.get("alphabet").is_some() {
        serde_json::from_value(v).map(Input::Cq).map_err(cfg_err)
    } else {
        serde_json::from_value(v).map(Input::State).map_err(cfg_err)
    }
}

fn full_tensor(dims: &[usize]) -> Algebra {
    match dims.split_first() {
        None => Algebra::trivial(),
        Some((&d, rest)) => rest.iter().fold(Algebra::full(d), |acc, &n| acc.tensor(&Algebra::full(n))),
    }
}

/// Loads or generates the input; `default_nx` sizes cq-random when `nx` is unset.
pub fn load_input(spec: &InputSpec, run_seed: u64, default_nx: Option<usize>) -> Result<Input, ConfigError> {
    let sources = spec.file.is_some() as u8 + spec.inline.is_some() as u8 + spec.kind.is_some() as u8;
    if sources != 1 {
        return Err(cfg_err("exactly one of a state file, inline state or generator is required"));
    }
    if let Some(p) = &spec.file {
        return parse_input(read_json(p)?).map_err(|e| cfg_err(format!("{}: {e}", p.display())));
    }
    if let Some(v) = &spec.inline {
        return parse_input(v.clone());
    }
    let dims = spec.dims.clone().unwrap_or_default();
    if dims.iter().any(|&d| d == 0 || d > 16) {
        return Err(cfg_err("dimensions must lie in 1..=16"));
    }
    let mut rng = Rng::new(spec.seed.unwrap_or(run_seed));
    match spec.kind.expect("one source") {
        GeneratorKind::Ginibre | GeneratorKind::HaarPure if dims.is_empty() => Err(cfg_err("generator needs --dims")),
        GeneratorKind::Ginibre => Ok(Input::State(rng.ginibre_full(&dims))),
        GeneratorKind::HaarPure => Ok(Input::State(rng.haar_pure(&dims))),
        GeneratorKind::CqRandom => {
            let nx = spec.nx.or(default_nx).ok_or_else(|| cfg_err("cq-random needs --nx"))?;
            if nx == 0 {
                return Err(cfg_err("alphabet must be non-empty"));
            }
            Ok(Input::Cq(rng.cq_random(nx, &full_tensor(&dims))))
        }
    }
}
