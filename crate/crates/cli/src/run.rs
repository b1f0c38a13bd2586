//! Executes one experiment and classifies failures into exit codes.

use crate::config::{
    load_input, read_file, Command, ConfigError, DcParams, EntropyOp, EntropyParams, ExperimentConfig, FamilyKind,
    Input, ModeKind, PaParams, QkdParams, SelftestParams, UncertaintyParams,
};
use serde::Serialize;
use serde_json::{json, Value};
use vna_entropy::entropy::{EntropyError, EntropyOptions};
use vna_entropy::hashing::{HashFamily, Mode};
use vna_entropy::protocols::{self, Povm, ProtocolError};
use vna_entropy::selftest;

pub enum Failure {
    /// Bad config, unreadable input or invalid parameters: exit 2.
    Config(String),
    /// A bound or invariant failed, or the solver could not certify a value: exit 1.
    Violation { message: String, state: Option<Value> },
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

pub struct Outcome {
    pub result: Value,
    /// Set when the run completed but a checked relation does not hold.
    pub violated: Option<String>,
    /// Human-readable table printed by `selftest`.
    pub table: Option<String>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn classify(e: ProtocolError, input: &Input) -> Failure {
    let numeric = |message: String| Failure::Violation { message, state: Some(input.to_json()) };
    match e {
        ProtocolError::InvalidParameter(_) | ProtocolError::NotIsometry(_) | ProtocolError::Hash(_) => {
            Failure::Config(e.to_string())
        }
        ProtocolError::State(_) | ProtocolError::Entropy(EntropyError::State(_) | EntropyError::InvalidEpsilon(_)) => {
            Failure::Config(e.to_string())
        }
        other => numeric(other.to_string()),
    }
}

fn classify_entropy(e: EntropyError, input: &Input) -> Failure {
    classify(ProtocolError::Entropy(e), input)
}

fn family(kind: Option<FamilyKind>, a: u32, b: u32, seed: u64) -> HashFamily {
    match kind.unwrap_or(FamilyKind::Toeplitz) {
        FamilyKind::Toeplitz => HashFamily::toeplitz(a, b),
        FamilyKind::AllLinear => HashFamily::all_linear(a, b),
    }
    .with_seed(seed)
}

fn mode(kind: Option<ModeKind>, samples: Option<usize>) -> Result<Mode, Failure> {
    match (kind.unwrap_or(ModeKind::Exact), samples) {
        (ModeKind::Exact, None) => Ok(Mode::Exact),
        (ModeKind::Exact, Some(_)) => Err(Failure::Config("--samples needs --mode sample".into())),
        (ModeKind::Sample, n) => Ok(Mode::Sample { n: n.unwrap_or(1000) }),
    }
}

fn bits(n: usize) -> Result<u32, Failure> {
    if n >= 2 && n.is_power_of_two() {
        Ok(n.trailing_zeros())
    } else {
        Err(Failure::Config(format!("alphabet of size {n} is not {{0,1}}^a")))
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let opts = EntropyOptions::default();
    let done = |result: Value| Ok(Outcome { result, violated: None, table: None });
    match &cfg.command {
        Command::Selftest(p) => run_selftest(cfg, p),
        Command::Entropy(p) => done(run_entropy(cfg, p, &opts)?),
        Command::Pa(p) => done(run_pa(cfg, p, &opts)?),
        Command::Dc(p) => done(run_dc(cfg, p, &opts)?),
        Command::Qkd(p) => done(run_qkd(cfg, p, &opts)?),
        Command::Uncertainty(p) => run_uncertainty(cfg, p, &opts),
    }
}

fn run_selftest(cfg: &ExperimentConfig, p: &SelftestParams) -> Result<Outcome, Failure> {
    let report = match &p.module {
        Some(m) => selftest::run_module(cfg.seed, cfg.quick, m),
        None => selftest::run(cfg.seed, cfg.quick),
    };
    if report.checks.is_empty() {
        return Err(Failure::Config(format!("no checks in module {}", p.module.as_deref().unwrap_or(""))));
    }
    let violated = (!report.passed()).then(|| {
        let failed: Vec<String> =
            report.checks.iter().filter(|c| !c.passed()).map(|c| format!("{}/{}", c.module, c.name)).collect();
        format!("failed checks: {}", failed.join(", "))
    });
    Ok(Outcome { table: Some(report.matrix()), result: to_value(&report), violated })
}

fn run_entropy(cfg: &ExperimentConfig, p: &EntropyParams, opts: &EntropyOptions) -> Result<Value, Failure> {
    let input = load_input(&cfg.input, cfg.seed, None)?;
    let eps = p.eps.unwrap_or(0.0);
    let op = p.op.unwrap_or(EntropyOp::Hmin);
    let r = match op {
        EntropyOp::Hmin => opts.hmin_smooth(&input.to_state(), eps),
        EntropyOp::Hmax => opts.hmax_smooth(&input.to_state(), eps),
        EntropyOp::Pguess => {
            if eps != 0.0 {
                return Err(Failure::Config("pguess takes no smoothing".into()));
            }
            opts.pguess(&input.to_cq()?)
        }
    }
    .map_err(|e| classify_entropy(e, &input))?;
    Ok(to_value(&r))
}

fn run_pa(cfg: &ExperimentConfig, p: &PaParams, opts: &EntropyOptions) -> Result<Value, Failure> {
    let input = load_input(&cfg.input, cfg.seed, p.a.map(|a| 1usize << a))?;
    let cq = input.to_cq()?;
    let a = bits(cq.len())?;
    if p.a.is_some_and(|x| x != a) {
        return Err(Failure::Config(format!("--a {} does not match the {a}-bit alphabet", p.a.unwrap_or(0))));
    }
    let b = p.b.ok_or_else(|| Failure::Config("pa needs --b".into()))?;
    if b > a {
        return Err(Failure::Config(format!("--b {b} exceeds the {a} input bits")));
    }
    let fam = family(p.family, a, b, cfg.seed);
    let eps = p.eps.unwrap_or(0.0);
    let report =
        protocols::pa_run_with(opts, &cq, b, &fam, mode(p.mode, p.samples)?, eps).map_err(|e| classify(e, &input))?;
    let mut v = to_value(&report);
    if eps > 0.0 {
        let k = protocols::pa_key_length_with(opts, &cq, eps).map_err(|e| classify(e, &input))?;
        v["key_length"] = to_value(&k);
    }
    Ok(v)
}

fn run_dc(cfg: &ExperimentConfig, p: &DcParams, opts: &EntropyOptions) -> Result<Value, Failure> {
    let input = load_input(&cfg.input, cfg.seed, None)?;
    let cq = input.to_cq()?;
    let c = p.message_size.ok_or_else(|| Failure::Config("dc needs --message-size".into()))?;
    if !c.is_power_of_two() {
        return Err(Failure::Config(format!("message size {c} is not a power of two")));
    }
    let a = cq.len().max(2).next_power_of_two().trailing_zeros();
    let fam = family(p.family, a, c.trailing_zeros(), cfg.seed);
    let report =
        protocols::dc_build_with(opts, &cq, c, &fam, mode(p.mode, p.samples)?).map_err(|e| classify(e, &input))?;
    let mut v = to_value(&report);
    if let Some(eps) = p.eps {
        let m = protocols::dc_message_length_with(opts, &cq, eps).map_err(|e| classify(e, &input))?;
        v["message_length"] = to_value(&m);
    }
    Ok(v)
}

fn run_qkd(cfg: &ExperimentConfig, p: &QkdParams, opts: &EntropyOptions) -> Result<Value, Failure> {
    let input = load_input(&cfg.input, cfg.seed, None)?;
    let cq = input.to_cq()?;
    let q = protocols::qkd_key_bounds(opts, &cq, p.eps1.unwrap_or(0.1), p.eps2.unwrap_or(0.1))
        .map_err(|e| classify(e, &input))?;
    Ok(to_value(&q))
}

fn run_uncertainty(cfg: &ExperimentConfig, p: &UncertaintyParams, opts: &EntropyOptions) -> Result<Outcome, Failure> {
    let input = load_input(&cfg.input, cfg.seed, None)?;
    let state = input.to_state();
    let px = match &p.povm_x {
        Some(f) => read_file::<Povm>(f)?,
        None => Povm::computational(2),
    };
    let py = match &p.povm_y {
        Some(f) => read_file::<Povm>(f)?,
        None => Povm::hadamard(),
    };
    let r =
        protocols::uncertainty_check(opts, &state, &px, &py, p.eps.unwrap_or(0.0)).map_err(|e| classify(e, &input))?;
    let violated = (!r.holds).then(|| format!("lhs {} below rhs {}", r.lhs, r.rhs));
    let mut result = to_value(&r);
    if violated.is_some() {
        result["state"] = input.to_json();
    }
    Ok(Outcome { result, violated, table: None })
}

/// Report body for a failed run.
pub fn failure_body(f: &Failure) -> Value {
    match f {
        Failure::Config(m) => json!({ "error": m }),
        Failure::Violation { message, state } => json!({ "error": message, "state": state }),
    }
}
