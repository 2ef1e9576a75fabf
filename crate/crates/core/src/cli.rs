//! The `lcbound` command-line tool.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::blockmatrix::{block_dominates, is_block_monotone, vector_dominates, BlockKernel};
use crate::bounds::{
    bound_extended, bound_main_a, bound_main_b, minimize_unimodal_over_m, BoundReport, ExtendedInputs,
};
use crate::config::{parse_n_grid, Model, Overrides, RunConfig};
use crate::drift::{verify_drift, PowerPhi};
use crate::error::{Error, Result};
use crate::gig1::{
    bound_gig1, compute_b, modified_kernel, phase_stationary, run_pipeline, Assembled, GiG1Kernel,
    PipelineConfig, PipelineReport, TabulatedGiG1, TailSource, VFamily,
};
use crate::report::{fmt_f64, to_json, Envelope};
use crate::solver::{
    level_marginal, reference_pi, residual, stationary_gth, total_variation, FiniteStochasticMatrix,
    ProbabilityVector,
};
use crate::special::{
    tail_inequality_check, bound_special, closed_form_params, plan_tolerance_special, SpecialCaseParams,
};
use crate::truncation::lc_block_augment;

#[derive(Debug, Parser)]
#[command(name = "lcbound", version, about = "Certified truncation error bounds for block-monotone Markov chains")]
pub struct Cli {
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub output: Format,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for randomized spot checks.
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form constants, tolerance plan and bound for the zeta example.
    SpecialCase(SpecialCaseArgs),
    /// Evaluate one bound variant.
    Bound(BoundArgs),
    /// Print the LC-block-augmented truncation.
    Truncate(MatrixArgs),
    /// Stationary distribution of the truncation.
    Stationary(MatrixArgs),
    /// Run every check and exit nonzero if one fails.
    Validate(RunArgs),
    /// Bound and empirical error across a grid of truncation levels.
    Sweep(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub beta0: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Truncation levels, e.g. `8,16,32`.
    #[arg(long)]
    pub n_grid: Option<String>,
    #[arg(long)]
    pub n_ref: Option<usize>,
    /// Fixed `m`; otherwise the minimizing `m*` is searched.
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub m_max: Option<f64>,
    /// Multiplies `b` in the drift checks.
    #[arg(long)]
    pub b_scale: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SpecialCaseArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Also measure TV(trunc(pi)_n, reference) at this level.
    #[arg(long)]
    pub empirical_n: Option<usize>,
    #[arg(long)]
    pub n_ref: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundVariant {
    Special,
    MainA,
    MainB,
    Extended,
    Gig1,
}

#[derive(Debug, Clone, Args)]
pub struct BoundArgs {
    #[arg(long, value_enum, default_value_t = BoundVariant::Special)]
    pub variant: BoundVariant,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub n: f64,
    /// Number of steps; searched up to `--m-max` when absent.
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long, default_value_t = 1e300)]
    pub m_max: f64,
    /// `kappa` of `phi(t) = kappa beta0 t^{1 - 1/beta0}` (main-a, main-b, extended).
    #[arg(long)]
    pub kappa: Option<f64>,
    /// `beta0` of the same `phi`.
    #[arg(long)]
    pub phi_beta0: Option<f64>,
    #[arg(long)]
    pub v1_varpi: Option<f64>,
    #[arg(long)]
    pub boundary_mass: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    /// `phi(v(n, i))` per phase, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub phi_v_n: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    pub steps: u64,
    #[arg(long, default_value_t = 0)]
    pub k: u64,
    #[arg(long)]
    pub big_b: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct MatrixArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Truncation level.
    #[arg(long)]
    pub n: usize,
    /// Truncate `P_N` (downward jumps below `-N` folded) instead of `P`.
    #[arg(long)]
    pub fold: Option<usize>,
}

/// Report text and exit code.
pub struct Outcome {
    pub text: String,
    pub code: i32,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Outcome { text, code: 0 }
    }
}

/// Parses `args`, runs the command, writes the report, and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(outcome) => match emit(&cli, &outcome.text) {
            Ok(()) => outcome.code,
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::SpecialCase(a) => cmd_special_case(cli, a),
        Command::Bound(a) => cmd_bound(cli, a),
        Command::Truncate(a) => cmd_truncate(cli, a),
        Command::Stationary(a) => cmd_stationary(cli, a),
        Command::Validate(a) => cmd_validate(cli, a),
        Command::Sweep(a) => cmd_sweep(cli, a),
    }
}

fn load(model: &ModelArgs, o: Overrides) -> Result<RunConfig> {
    let o = Overrides { beta1: model.beta1, beta2: model.beta2, beta0: model.beta0, ..o };
    match &model.config {
        Some(p) => RunConfig::from_file(p, &o),
        None => RunConfig::from_overrides(&o),
    }
}

fn run_overrides(a: &RunArgs) -> Result<Overrides> {
    Ok(Overrides {
        tolerance: a.tolerance,
        n_grid: a.n_grid.as_deref().map(parse_n_grid).transpose()?,
        n_ref: a.n_ref,
        m: a.m,
        m_max: a.m_max,
        b_scale: a.b_scale,
        ..Default::default()
    })
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv of UTF-8 fields"))
}

// ---- special-case ----

#[derive(Serialize)]
struct EmpiricalTv {
    n: usize,
    n_ref: usize,
    m_star: f64,
    bound_at_n: f64,
    bound_at_n_ref: f64,
    tv: f64,
    within_bound: bool,
}

#[derive(Serialize)]
struct SpecialCaseReport {
    beta1: f64,
    beta2: f64,
    beta0: f64,
    sigma: f64,
    sigma1: f64,
    kappa: f64,
    epsilon: f64,
    delta0: f64,
    x0: f64,
    #[serde(rename = "K0")]
    k0: usize,
    rho: f64,
    #[serde(rename = "C1")]
    c1: f64,
    #[serde(rename = "C2")]
    c2: f64,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "K_floor_inside")]
    k_floor_inside: f64,
    b: f64,
    #[serde(rename = "B")]
    big_b: f64,
    c_breve: f64,
    tolerance: f64,
    m0: f64,
    n0: f64,
    bound: f64,
    term_mixing: f64,
    term_truncation: f64,
    notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    empirical: Option<EmpiricalTv>,
}

const SPECIAL_NOTES: [&str; 2] = [
    "b uses K in the final term kappa beta0 (K + x0)^(beta0 - 1)",
    "K takes ceilings outside the powers; K_floor_inside is the alternative reading",
];

fn best_m(bound_fn: impl Fn(f64) -> Result<f64>, m_max: f64) -> Result<(f64, f64)> {
    minimize_unimodal_over_m(bound_fn, m_max)
}

fn empirical_special(p: &SpecialCaseParams, n: usize, n_ref: usize) -> Result<EmpiricalTv> {
    let chain = Assembled(p.chain());
    let reference = reference_pi(&chain, n_ref, &[n])?;
    let pi_n = stationary_gth(&lc_block_augment(&chain, n)?)?;
    let tv = total_variation(&pi_n, &reference)?;
    let (m_star, at_n) = best_m(|m| Ok(bound_special(p, m, n as f64)?.bound_value), 1e300)?;
    let at_ref = bound_special(p, m_star, n_ref as f64)?.bound_value;
    Ok(EmpiricalTv { n, n_ref, m_star, bound_at_n: at_n, bound_at_n_ref: at_ref, tv, within_bound: tv <= at_n + at_ref })
}

fn cmd_special_case(cli: &Cli, a: &SpecialCaseArgs) -> Result<Outcome> {
    let cfg = load(&a.model, Overrides { tolerance: a.tolerance, n_ref: a.n_ref, ..Default::default() })?;
    let p = cfg.model.special_params()?;
    let e = cfg.tolerance.ok_or_else(|| Error::Config("--tolerance is required".into()))?;
    let (m0, n0) = plan_tolerance_special(&p, e)?;
    let rep = bound_special(&p, m0, n0)?;
    let empirical = a.empirical_n.map(|n| empirical_special(&p, n, cfg.n_ref)).transpose()?;
    let body = SpecialCaseReport {
        beta1: p.beta1,
        beta2: p.beta2,
        beta0: p.beta0,
        sigma: p.sigma,
        sigma1: p.sigma1,
        kappa: p.kappa,
        epsilon: p.epsilon,
        delta0: p.delta0,
        x0: p.x0,
        k0: p.k0,
        rho: p.rho,
        c1: p.c1,
        c2: p.c2,
        k: p.k,
        k_floor_inside: p.k_floor_inside,
        b: p.b,
        big_b: p.big_b,
        c_breve: p.c_breve,
        tolerance: e,
        m0,
        n0,
        bound: rep.bound_value,
        term_mixing: rep.term_mixing,
        term_truncation: rep.term_truncation,
        notes: SPECIAL_NOTES.iter().map(|s| s.to_string()).collect(),
        empirical,
    };
    let text = match cli.output {
        Format::Json => to_json(&Envelope::new("special-case", &body)),
        Format::Csv => {
            let v = serde_json::to_value(&body).map_err(|e| Error::Io(e.to_string()))?;
            let mut rows = Vec::new();
            for (k, val) in v.as_object().expect("struct serializes to an object") {
                let s = match val {
                    serde_json::Value::Number(x) if x.is_f64() => fmt_f64(x.as_f64().unwrap_or(f64::NAN)),
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                rows.push(vec![k.clone(), s]);
            }
            csv_text(&["key", "value"], &rows)?
        }
    };
    Ok(Outcome::ok(text))
}

// ---- bound ----

fn need<T: Copy>(x: Option<T>, flag: &str) -> Result<T> {
    x.ok_or_else(|| Error::Config(format!("--{flag} is required for this variant")))
}

fn gig1_pipeline(kernel: &TabulatedGiG1, vf: &VFamily) -> Result<PipelineReport> {
    run_pipeline(kernel, vf, &PipelineConfig::default())
}

fn cmd_bound(cli: &Cli, a: &BoundArgs) -> Result<Outcome> {
    let n = a.n;
    let power_phi = || PowerPhi::new(need(a.kappa, "kappa")?, need(a.phi_beta0, "phi-beta0")?);
    let phi_v_n = || a.phi_v_n.clone().ok_or_else(|| Error::Config("--phi-v-n is required for this variant".into()));
    let eval: Box<dyn Fn(f64) -> Result<BoundReport>> = match a.variant {
        BoundVariant::Special => {
            let p = load(&a.model, Overrides::default())?.model.special_params()?;
            Box::new(move |m| bound_special(&p, m, n))
        }
        BoundVariant::MainA => {
            let (phi, v1, mass) = (power_phi()?, need(a.v1_varpi, "v1-varpi")?, need(a.boundary_mass, "boundary-mass")?);
            Box::new(move |m| bound_main_a(m, n, v1, &phi, mass))
        }
        BoundVariant::MainB => {
            let (phi, v1, b, pv) = (power_phi()?, need(a.v1_varpi, "v1-varpi")?, need(a.b, "b")?, phi_v_n()?);
            Box::new(move |m| bound_main_b(m, n, v1, &phi, b, &pv))
        }
        BoundVariant::Extended => {
            let phi = power_phi()?;
            let (v1, b, pv) = (need(a.v1_varpi, "v1-varpi")?, need(a.b, "b")?, phi_v_n()?);
            let (steps, k, big_b) = (a.steps, a.k, a.big_b);
            Box::new(move |m| {
                let inp = ExtendedInputs { m, n, steps, b, big_b, k, v1_varpi: v1, phi_v_n: pv.clone() };
                bound_extended(&inp, &phi)
            })
        }
        BoundVariant::Gig1 => {
            let cfg = load(&a.model, Overrides::default())?;
            let Model::Gig1Custom { kernel, v_family } = cfg.model else {
                return Err(Error::Config("variant gig1 needs model kind gig1-custom".into()));
            };
            let rep = gig1_pipeline(&kernel, &v_family)?;
            let d = kernel.phases();
            Box::new(move |m| bound_gig1(&rep, &v_family, d, m, n))
        }
    };
    let rep = match a.m {
        Some(m) => eval(m)?,
        None => {
            let (m_star, _) = best_m(|m| Ok(eval(m)?.bound_value), a.m_max)?;
            eval(m_star)?
        }
    };
    let text = match cli.output {
        Format::Json => to_json(&Envelope::new("bound", &rep)),
        Format::Csv => csv_text(
            &["variant", "m", "n", "bound", "term_mixing", "term_truncation"],
            &[vec![
                rep.variant.as_str().to_string(),
                fmt_f64(rep.m),
                fmt_f64(rep.n),
                fmt_f64(rep.bound_value),
                fmt_f64(rep.term_mixing),
                fmt_f64(rep.term_truncation),
            ]],
        )?,
    };
    Ok(Outcome::ok(text))
}

// ---- truncate / stationary ----

fn truncation_of(cfg: &RunConfig, n: usize, fold: Option<usize>) -> Result<FiniteStochasticMatrix> {
    match (&cfg.model, fold) {
        (Model::SpecialCase { .. }, None) => lc_block_augment(&Assembled(cfg.model.special_params()?.chain()), n),
        (Model::SpecialCase { .. }, Some(f)) => {
            lc_block_augment(&Assembled(modified_kernel(cfg.model.special_params()?.chain(), f)?), n)
        }
        (Model::Gig1Custom { kernel, .. }, None) => lc_block_augment(&Assembled(kernel), n),
        (Model::Gig1Custom { kernel, .. }, Some(f)) => lc_block_augment(&Assembled(modified_kernel(kernel, f)?), n),
    }
}

#[derive(Serialize)]
struct TruncateReport {
    model: &'static str,
    n: usize,
    fold: Option<usize>,
    phases: usize,
    states: usize,
    rows: Vec<Vec<f64>>,
}

fn cmd_truncate(cli: &Cli, a: &MatrixArgs) -> Result<Outcome> {
    let cfg = load(&a.model, Overrides::default())?;
    let m = truncation_of(&cfg, a.n, a.fold)?;
    let s = m.states();
    let rows: Vec<Vec<f64>> = (0..s).map(|i| (0..s).map(|j| m.get(i, j)).collect()).collect();
    let text = match cli.output {
        Format::Json => to_json(&Envelope::new(
            "truncate",
            TruncateReport { model: cfg.model.kind(), n: a.n, fold: a.fold, phases: m.phases(), states: s, rows },
        )),
        Format::Csv => {
            let d = m.phases();
            let mut out = Vec::new();
            for (i, r) in rows.iter().enumerate() {
                for (j, &x) in r.iter().enumerate() {
                    if x != 0.0 {
                        out.push(vec![
                            (i / d).to_string(),
                            (i % d).to_string(),
                            (j / d).to_string(),
                            (j % d).to_string(),
                            fmt_f64(x),
                        ]);
                    }
                }
            }
            csv_text(&["from_level", "from_phase", "to_level", "to_phase", "probability"], &out)?
        }
    };
    Ok(Outcome::ok(text))
}

#[derive(Serialize)]
struct StationaryReport {
    model: &'static str,
    n: usize,
    fold: Option<usize>,
    phases: usize,
    residual: f64,
    boundary_mass: f64,
    marginal: Vec<f64>,
    pi: Vec<Vec<f64>>,
}

fn boundary_mass(pi: &ProbabilityVector) -> f64 {
    pi.level(pi.levels() - 1).iter().sum()
}

fn cmd_stationary(cli: &Cli, a: &MatrixArgs) -> Result<Outcome> {
    let cfg = load(&a.model, Overrides::default())?;
    let m = truncation_of(&cfg, a.n, a.fold)?;
    let pi = stationary_gth(&m)?;
    let res = residual(&m, pi.as_slice());
    let text = match cli.output {
        Format::Json => to_json(&Envelope::new(
            "stationary",
            StationaryReport {
                model: cfg.model.kind(),
                n: a.n,
                fold: a.fold,
                phases: pi.phases(),
                residual: res,
                boundary_mass: boundary_mass(&pi),
                marginal: level_marginal(&pi).iter().copied().collect(),
                pi: (0..pi.levels()).map(|k| pi.level(k).to_vec()).collect(),
            },
        )),
        Format::Csv => {
            let mut rows = Vec::new();
            for k in 0..pi.levels() {
                for i in 0..pi.phases() {
                    rows.push(vec![k.to_string(), i.to_string(), fmt_f64(pi.get(k, i))]);
                }
            }
            csv_text(&["level", "phase", "probability"], &rows)?
        }
    };
    Ok(Outcome::ok(text))
}

// ---- validate ----

#[derive(Debug, Clone, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub status: &'static str,
    /// Signed margin; negative means violated.
    pub worst_slack: Option<f64>,
    pub detail: String,
}

impl CheckEntry {
    fn from_margin(name: &str, margin: f64, detail: String) -> Self {
        CheckEntry {
            name: name.into(),
            status: if margin >= 0.0 { "pass" } else { "fail" },
            worst_slack: Some(margin),
            detail,
        }
    }

    fn from_bool(name: &str, ok: bool, detail: String) -> Self {
        CheckEntry { name: name.into(), status: if ok { "pass" } else { "fail" }, worst_slack: None, detail }
    }

    fn error(name: &str, e: Error) -> Self {
        CheckEntry { name: name.into(), status: "error", worst_slack: None, detail: e.to_string() }
    }

    fn failed(&self) -> bool {
        self.status != "pass"
    }
}

fn guarded(name: &str, f: impl FnOnce() -> Result<CheckEntry>) -> CheckEntry {
    f().unwrap_or_else(|e| CheckEntry::error(name, e))
}

#[derive(Serialize)]
struct ValidateReport {
    model: &'static str,
    n_grid: Vec<usize>,
    n_ref: usize,
    b_scale: f64,
    seed: u64,
    passed: bool,
    warnings: Vec<String>,
    checks: Vec<CheckEntry>,
}

const MARGINAL_TOL: f64 = 1e-10;
const DOMINANCE_TOL: f64 = 1e-9;
const MONOTONE_HORIZON: usize = 50;

/// Checks shared by both models, given the kernels of `P` and `P_N`.
fn structural_checks<P: BlockKernel, Q: BlockKernel>(p: &P, p_n: &Q, n_fold: usize) -> Vec<CheckEntry> {
    vec![
        guarded("block-monotone P", || {
            let ok = is_block_monotone(p, MONOTONE_HORIZON, 1e-12)?;
            Ok(CheckEntry::from_bool("block-monotone P", ok, format!("horizon {MONOTONE_HORIZON}")))
        }),
        guarded("block-monotone P_N", || {
            let ok = is_block_monotone(p_n, MONOTONE_HORIZON, 1e-12)?;
            Ok(CheckEntry::from_bool("block-monotone P_N", ok, format!("N = {n_fold}, horizon {MONOTONE_HORIZON}")))
        }),
        guarded("block dominance P <= P_N", || {
            let ok = block_dominates(p, p_n, MONOTONE_HORIZON, 1e-12)?;
            Ok(CheckEntry::from_bool("block dominance P <= P_N", ok, format!("N = {n_fold}")))
        }),
    ]
}

/// Solves every truncation in `grid` and the reference.
fn solve_grid<P: BlockKernel>(p: &P, grid: &[usize], n_ref: usize) -> Result<(Vec<ProbabilityVector>, ProbabilityVector)> {
    let reference = reference_pi(p, n_ref, grid)?;
    let pis = grid
        .par_iter()
        .map(|&n| stationary_gth(&lc_block_augment(p, n)?))
        .collect::<Result<Vec<_>>>()?;
    Ok((pis, reference))
}

fn grid_checks(
    grid: &[usize],
    solved: Result<(Vec<ProbabilityVector>, ProbabilityVector)>,
    varpi: &[f64],
    bound_at: &(dyn Fn(f64, f64) -> Result<f64> + Sync),
    n_ref: usize,
) -> Vec<CheckEntry> {
    let (pis, reference) = match solved {
        Ok(x) => x,
        Err(e) => {
            return ["marginal identity", "vector dominance", "bound vs empirical TV"]
                .iter()
                .map(|n| CheckEntry::error(n, e.clone()))
                .collect()
        }
    };
    let mut out = Vec::new();
    let worst_dev = pis
        .iter()
        .chain(std::iter::once(&reference))
        .map(|pi| {
            level_marginal(pi).iter().zip(varpi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    out.push(CheckEntry::from_margin(
        "marginal identity",
        MARGINAL_TOL - worst_dev,
        format!("max deviation {worst_dev:e} from the phase stationary vector over n_grid and n_ref"),
    ));
    out.push(guarded("vector dominance", || {
        let mut bad = Vec::new();
        for (pi, &n) in pis.iter().zip(grid) {
            if !vector_dominates(pi.as_slice(), reference.as_slice(), pi.phases(), DOMINANCE_TOL)? {
                bad.push(n);
            }
        }
        Ok(CheckEntry::from_bool(
            "vector dominance",
            bad.is_empty(),
            format!("trunc(pi)_n <=_d trunc(pi)_n_ref; failing n: {bad:?}"),
        ))
    }));
    out.push(guarded("bound vs empirical TV", || {
        let mut worst = f64::INFINITY;
        for (pi, &n) in pis.iter().zip(grid) {
            let tv = total_variation(pi, &reference)?;
            let rhs = bound_at(n as f64, n_ref as f64)?;
            worst = worst.min(rhs - tv);
        }
        Ok(CheckEntry::from_margin(
            "bound vs empirical TV",
            worst,
            "TV(trunc(pi)_n, trunc(pi)_n_ref) <= bound(m*, n) + bound(m*, n_ref)".into(),
        ))
    }));
    out
}

fn special_checks(cfg: &RunConfig, seed: u64) -> Result<Vec<CheckEntry>> {
    let p = cfg.model.special_params()?;
    let chain = Assembled(p.chain());
    let p1 = Assembled(p.folded_chain());
    let mut checks = structural_checks(&chain, &p1, 1);
    let vf = p.v_family();
    let tail = p.tail_source();
    let tb = tail.one_step_bound(&vf);
    let horizon = p.k + 500;
    checks.push(guarded("drift, closed-form b", || {
        let b = p.b * cfg.b_scale;
        let r = verify_drift(&p1, &p.certificate_with_b(b)?, horizon, Some(&tb))?;
        Ok(CheckEntry::from_margin(
            "drift, closed-form b",
            r.worst_slack,
            format!("b = {b:e}, levels 0..={horizon}, worst at level {}", r.worst_level),
        ))
    }));
    checks.push(guarded("drift, exact b", || {
        let exact = compute_b(&vf, &p.folded_chain(), 1, p.kappa, p.k, &tail)?;
        let b = exact * cfg.b_scale;
        let r = verify_drift(&p1, &p.certificate_with_b(b)?, horizon, Some(&tb))?;
        Ok(CheckEntry::from_margin(
            "drift, exact b",
            r.worst_slack,
            format!("b = {b:e} (exact maximum {exact:e}), levels 0..={horizon}, worst at level {}", r.worst_level),
        ))
    }));
    checks.push(guarded("K-defining tail inequality", || {
        let rep = tail_inequality_check(&p, p.k + 1, p.k + 200)?;
        let margin = rep
            .rows
            .iter()
            .flat_map(|r| (0..2).map(move |i| (r.intermediate[i] - r.quantity[i]).min(p.kappa + 1e-12 - r.intermediate[i])))
            .fold(f64::INFINITY, f64::min);
        Ok(CheckEntry::from_margin(
            "K-defining tail inequality",
            margin,
            format!("k in ({}, {}]", p.k, p.k + 200),
        ))
    }));
    checks.push(guarded("bound variants agree", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let m = rng.gen_range(1..1_000_000u64) as f64;
            let n = rng.gen_range(1..100_000u64) as f64;
            let a = bound_special(&p, m, n)?.bound_value;
            let b = bound_extended(&p.extended_inputs(m, n), &p.phi())?.bound_value;
            worst = worst.max(((a - b) / a).abs());
        }
        Ok(CheckEntry::from_margin(
            "bound variants agree",
            1e-12 - worst,
            format!("special vs extended at 10 seeded (m, n), worst relative gap {worst:e}"),
        ))
    }));
    if !cfg.n_grid.is_empty() {
        let m_fixed = cfg.m;
        let m_max = cfg.m_max;
        let bound_at = move |n: f64, n_ref: f64| -> Result<f64> {
            let m = match m_fixed {
                Some(m) => m,
                None => best_m(|m| Ok(bound_special(&p, m, n)?.bound_value), m_max)?.0,
            };
            Ok(bound_special(&p, m, n)?.bound_value + bound_special(&p, m, n_ref)?.bound_value)
        };
        let solved = solve_grid(&chain, &cfg.n_grid, cfg.n_ref);
        checks.extend(grid_checks(&cfg.n_grid, solved, &[0.5, 0.5], &bound_at, cfg.n_ref));
    }
    Ok(checks)
}

fn gig1_checks(cfg: &RunConfig, kernel: &TabulatedGiG1, vf: &VFamily) -> Result<Vec<CheckEntry>> {
    let rep = match gig1_pipeline(kernel, vf) {
        Ok(r) => r,
        Err(e) => return Ok(vec![CheckEntry::error("drift certificate pipeline", e)]),
    };
    let p = Assembled(kernel);
    let g_n = modified_kernel(kernel, rep.n)?;
    let p_n = Assembled(&g_n);
    let mut checks = structural_checks(&p, &p_n, rep.n);
    checks.push(guarded("drift certificate", || {
        let b = rep.b * cfg.b_scale;
        let mut cert = rep.certificate.clone();
        cert.b = b;
        let tail = TailSource::from_kernel(&g_n, rep.m, 1e-14)?;
        let bound = tail.one_step_bound(vf);
        let tb: Option<&crate::drift::TailBound<'_>> = if rep.m == 1 { Some(&bound) } else { None };
        let horizon = rep.k.k + 500;
        let r = verify_drift(&p_n, &cert, horizon, tb)?;
        Ok(CheckEntry::from_margin(
            "drift certificate",
            r.worst_slack,
            format!("N = {}, M = {}, K = {}, b = {b:e}, levels 0..={horizon}", rep.n, rep.m, rep.k.k),
        ))
    }));
    if !cfg.n_grid.is_empty() {
        let varpi: Vec<f64> = phase_stationary(kernel)?.iter().copied().collect();
        let d = kernel.phases();
        let (m_fixed, m_max) = (cfg.m, cfg.m_max);
        let bound_at = |n: f64, n_ref: f64| -> Result<f64> {
            let m = match m_fixed {
                Some(m) => m,
                None => best_m(|m| Ok(bound_gig1(&rep, vf, d, m, n)?.bound_value), m_max)?.0,
            };
            Ok(bound_gig1(&rep, vf, d, m, n)?.bound_value + bound_gig1(&rep, vf, d, m, n_ref)?.bound_value)
        };
        let solved = solve_grid(&p, &cfg.n_grid, cfg.n_ref);
        checks.extend(grid_checks(&cfg.n_grid, solved, &varpi, &bound_at, cfg.n_ref));
    }
    Ok(checks)
}

fn cmd_validate(cli: &Cli, a: &RunArgs) -> Result<Outcome> {
    let cfg = load(&a.model, run_overrides(a)?)?;
    cfg.check_reference_margin()?;
    let mut warnings = Vec::new();
    if cfg.n_grid.is_empty() {
        warnings.push("n_grid is empty; only structural checks ran".to_string());
    }
    let checks = match &cfg.model {
        Model::SpecialCase { .. } => special_checks(&cfg, cli.seed)?,
        Model::Gig1Custom { kernel, v_family } => gig1_checks(&cfg, kernel, v_family)?,
    };
    let passed = !checks.iter().any(CheckEntry::failed);
    let body = ValidateReport {
        model: cfg.model.kind(),
        n_grid: cfg.n_grid.clone(),
        n_ref: cfg.n_ref,
        b_scale: cfg.b_scale,
        seed: cli.seed,
        passed,
        warnings,
        checks,
    };
    let text = match cli.output {
        Format::Json => to_json(&Envelope::new("validate", &body)),
        Format::Csv => csv_text(
            &["name", "status", "worst_slack"],
            &body
                .checks
                .iter()
                .map(|c| vec![c.name.clone(), c.status.to_string(), c.worst_slack.map(fmt_f64).unwrap_or_default()])
                .collect::<Vec<_>>(),
        )?,
    };
    Ok(Outcome { text, code: if passed { 0 } else { 1 } })
}

// ---- sweep ----

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub m_star: f64,
    pub bound: f64,
    pub empirical_tv: f64,
    pub boundary_mass: f64,
    pub runtime_ms: f64,
}

#[derive(Serialize)]
struct SweepReport {
    model: &'static str,
    n_ref: usize,
    rows: Vec<SweepRow>,
}

fn sweep_rows<P: BlockKernel>(
    p: &P,
    cfg: &RunConfig,
    bound_fn: &(dyn Fn(f64, f64) -> Result<f64> + Sync),
) -> Result<Vec<SweepRow>> {
    let reference = reference_pi(p, cfg.n_ref, &cfg.n_grid)?;
    cfg.n_grid
        .par_iter()
        .map(|&n| {
            let t = Instant::now();
            let pi = stationary_gth(&lc_block_augment(p, n)?)?;
            let tv = total_variation(&pi, &reference)?;
            let nf = n as f64;
            let (m_star, bound) = match cfg.m {
                Some(m) => (m, bound_fn(m, nf)?),
                None => best_m(|m| bound_fn(m, nf), cfg.m_max)?,
            };
            Ok(SweepRow {
                n,
                m_star,
                bound,
                empirical_tv: tv,
                boundary_mass: boundary_mass(&pi),
                runtime_ms: t.elapsed().as_secs_f64() * 1e3,
            })
        })
        .collect()
}

fn cmd_sweep(cli: &Cli, a: &RunArgs) -> Result<Outcome> {
    let cfg = load(&a.model, run_overrides(a)?)?;
    if cfg.n_grid.is_empty() {
        return Err(Error::Config("sweep needs a nonempty n_grid".into()));
    }
    cfg.check_reference_margin()?;
    let rows = match &cfg.model {
        Model::SpecialCase { beta1, beta2, beta0 } => {
            let p = closed_form_params(*beta1, *beta2, *beta0)?;
            let f = |m: f64, n: f64| Ok(bound_special(&p, m, n)?.bound_value);
            sweep_rows(&Assembled(p.chain()), &cfg, &f)?
        }
        Model::Gig1Custom { kernel, v_family } => {
            let rep = gig1_pipeline(kernel, v_family)?;
            let d = kernel.phases();
            let f = |m: f64, n: f64| Ok(bound_gig1(&rep, v_family, d, m, n)?.bound_value);
            sweep_rows(&Assembled(kernel), &cfg, &f)?
        }
    };
    let text = match cli.output {
        Format::Json => to_json(&Envelope::new("sweep", SweepReport { model: cfg.model.kind(), n_ref: cfg.n_ref, rows })),
        Format::Csv => csv_text(
            &["n", "m_star", "bound", "empirical_tv", "boundary_mass", "runtime_ms"],
            &rows
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        fmt_f64(r.m_star),
                        fmt_f64(r.bound),
                        fmt_f64(r.empirical_tv),
                        fmt_f64(r.boundary_mass),
                        format!("{:.3}", r.runtime_ms),
                    ]
                })
                .collect::<Vec<_>>(),
        )?,
    };
    Ok(Outcome::ok(text))
}
