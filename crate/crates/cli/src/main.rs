use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use onecircuit::circuit_graph::{Eta, VertexId};
use onecircuit::comp_op::{
    build_subnormal, hyponormality, verify_cc, CCFamily, CompOpError, DerivativeTable,
    HyponormalVerdict, SubnormalSpec, WeightedGraphModel,
};
use onecircuit::exotic::{
    canonical_partitions, exotic_pipeline, lambda_functional, ExoticError, PairSource, Partition, PipelineOptions,
};
use onecircuit::measures::{AtomicMeasure, Homothety};
use onecircuit::moments::{
    carleman_diagnostic, carleman_diagnostic_log, hankel_report, shift_dominance, transform_t, Direction, HankelReport, HankelVerdict,
    MomentSequence, ShiftDominance,
};
use onecircuit::qspecial::{
    asc_beta_measure, asc_gamma_measure, euler_threshold, quartic_pair, DEFAULT_ASC_ATOMS, DEFAULT_QUARTIC_ATOMS,
};
use onecircuit::scalar::Precision;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "onecircuit", version, about = "Composition operators on one-circuit graphs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Al-Salam–Carlitz orthogonality measure.
    AscMeasure {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = DEFAULT_ASC_ATOMS)]
        atoms: usize,
        #[arg(long, value_enum, default_value_t = AscWhich::Beta)]
        which: AscWhich,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quartic birth-and-death measures.
    Quartic {
        #[arg(long, default_value_t = DEFAULT_QUARTIC_ATOMS)]
        atoms: usize,
        #[arg(long, value_enum, default_value_t = QuarticWhich::Zeta)]
        which: QuarticWhich,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Weighted model and (CC) family from seed measures.
    BuildSubnormal {
        config: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the (CC) family.
        #[arg(long)]
        family: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Non-hyponormal model from an N-extremal pair.
    BuildExotic {
        #[arg(long, default_value = "2")]
        eta: Eta,
        #[arg(long, default_value_t = 0)]
        kappa: u32,
        #[arg(long, default_value = "quartic")]
        source: PairSource,
        #[arg(long, default_value_t = DEFAULT_QUARTIC_ATOMS)]
        atoms: usize,
        #[arg(long, default_value_t = 12)]
        branch_depth: u32,
        #[arg(long, default_value_t = 10)]
        max_n: u32,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Checks a (CC) family against a model.
    VerifyCc {
        model: PathBuf,
        family: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Hyponormality slack at every vertex.
    CheckHyponormal {
        model: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// h_n(x) for every vertex.
    HTable {
        model: PathBuf,
        #[arg(long, default_value_t = 10)]
        max_n: u32,
        /// CSV instead of JSON.
        #[arg(long)]
        csv: bool,
        /// Append a row with the hyponormality slack of each vertex (CSV only).
        #[arg(long)]
        slack: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hankel positivity of a moment sequence or of a measure's moments.
    Hankel {
        input: PathBuf,
        #[command(flatten)]
        num: Numeric,
        /// Also test shift dominance.
        #[arg(long)]
        shift: bool,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Carleman partial sums.
    Carleman {
        input: PathBuf,
        /// Input values are ln γ_n.
        #[arg(long)]
        log: bool,
        #[arg(long)]
        max_n: Option<usize>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Moments of the pushforward by t ↦ θt + a.
    Transform {
        input: PathBuf,
        #[arg(long)]
        theta: f64,
        #[arg(long, allow_hyphen_values = true)]
        shift: f64,
        #[arg(long)]
        inverse: bool,
        #[arg(long, value_enum, default_value_t = PrecisionArg::High)]
        precision: PrecisionArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Partition functional Λ.
    Lambda {
        #[arg(long)]
        tau: PathBuf,
        /// Explicit {"blocks", "tail_block"} or canonical {"eta", "k"}.
        #[arg(long)]
        partition: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Largest q with (q/a;q)_∞ + (aq;q)_∞ > 1 on a grid.
    EulerThreshold {
        #[arg(long)]
        a: f64,
        #[arg(long, default_value_t = 0.005)]
        step: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Numeric {
    #[arg(long, value_enum, default_value_t = PrecisionArg::High)]
    precision: PrecisionArg,
    /// Defaults to 1e-9 (double) or 1e-30 (high).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_n: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecisionArg {
    Double,
    High,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::Double => Precision::Double,
            PrecisionArg::High => Precision::High,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AscWhich {
    Beta,
    Gamma,
}

#[derive(Clone, Copy, ValueEnum)]
enum QuarticWhich {
    Zeta,
    Rho,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PartitionInput {
    Explicit(Partition),
    Canonical { eta: Eta, k: usize },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SequenceInput {
    Sequence(MomentSequence),
    Plain(Vec<f64>),
    Measure(AtomicMeasure),
}

#[derive(Serialize)]
struct HankelWithShift {
    hankel: HankelReport,
    shift_dominance: ShiftDominance,
}

enum Outcome {
    Ok,
    Failed(String),
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_measure(path: &Path) -> Result<AtomicMeasure> {
    let m: AtomicMeasure = read_json(path)?;
    m.validate().with_context(|| format!("invalid measure in {}", path.display()))?;
    Ok(m)
}

fn read_model(path: &Path) -> Result<WeightedGraphModel> {
    let m: WeightedGraphModel = read_json(path)?;
    m.validate().with_context(|| format!("invalid model in {}", path.display()))?;
    Ok(m)
}

fn read_sequence(path: &Path, max_n: Option<usize>) -> Result<MomentSequence> {
    let g = match read_json::<SequenceInput>(path)? {
        SequenceInput::Sequence(s) => s,
        SequenceInput::Plain(v) => MomentSequence::new(v, None)?,
        SequenceInput::Measure(m) => {
            m.validate()?;
            MomentSequence::from_measure(&m, max_n.unwrap_or(20))?
        }
    };
    Ok(match max_n {
        Some(n) if n < g.max_n() => MomentSequence::new(
            g.values[..=n].to_vec(),
            g.error_bounds.as_ref().map(|e| e[..=n].to_vec()),
        )?,
        _ => g,
    })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

/// Artifact to `out` (stdout if absent); report to `report`, or stdout when the
/// artifact went to a file, or stderr otherwise.
fn emit<A: Serialize, R: Serialize>(out: Option<&Path>, artifact: &A, report: Option<&Path>, rep: &R) -> Result<()> {
    write_json(out, artifact)?;
    match (report, out) {
        (Some(p), _) => write_json(Some(p), rep),
        (None, Some(_)) => write_json(None, rep),
        (None, None) => {
            eprintln!("{}", serde_json::to_string_pretty(rep)?);
            Ok(())
        }
    }
}

fn run(cmd: Cmd) -> Result<Outcome> {
    match cmd {
        Cmd::AscMeasure { a, q, atoms, which, out } => {
            let m = match which {
                AscWhich::Beta => asc_beta_measure(a, q, atoms)?,
                AscWhich::Gamma => asc_gamma_measure(a, q, atoms)?,
            };
            write_json(out.as_deref(), &m)?;
        }
        Cmd::Quartic { atoms, which, out } => {
            let (z, r) = quartic_pair(atoms)?;
            write_json(out.as_deref(), &[z, r][which as usize])?;
        }
        Cmd::BuildSubnormal { config, tol, out, family, report } => {
            let spec: SubnormalSpec = read_json(&config)?;
            let (model, fam, rep) = build_subnormal(&spec)?;
            if let Some(p) = &family {
                write_json(Some(p), &fam)?;
            }
            emit(out.as_deref(), &model, report.as_deref(), &rep)?;
            if rep.cc_residual > tol {
                return Ok(Outcome::Failed(format!("(CC) residual {:e} above {tol:e}", rep.cc_residual)));
            }
        }
        Cmd::BuildExotic { eta, kappa, source, atoms, branch_depth, max_n, out, report } => {
            let opts = PipelineOptions { atoms, kappa, branch_depth, max_n, ..PipelineOptions::default() };
            let (model, rep) = exotic_pipeline(eta, source, &opts)?;
            emit(out.as_deref(), &model, report.as_deref(), &rep)?;
            let worst = rep.xi.identity_residuals.iter().map(|r| r.1).fold(0.0, f64::max);
            if worst > 1e-8 {
                return Ok(Outcome::Failed(format!("ξ identity residual {worst:e}")));
            }
        }
        Cmd::VerifyCc { model, family, tol, report } => {
            let m = read_model(&model)?;
            let f: CCFamily = read_json(&family)?;
            let c = verify_cc(&m, &f)?;
            write_json(report.as_deref(), &c)?;
            if c.max_residual > tol {
                return Ok(Outcome::Failed(format!("(CC) residual {:e} above {tol:e}", c.max_residual)));
            }
        }
        Cmd::CheckHyponormal { model, tol, report } => {
            let m = read_model(&model)?;
            let r = hyponormality(&m, tol);
            write_json(report.as_deref(), &r)?;
            if r.verdict == HyponormalVerdict::NotHyponormal {
                return Ok(Outcome::Failed(format!("not hyponormal: slack {:e}", r.min_slack)));
            }
        }
        Cmd::HTable { model, max_n, csv, slack, out } => {
            let m = read_model(&model)?;
            let t = DerivativeTable::compute(&m, max_n);
            if csv {
                let mut s = t.to_csv();
                if slack {
                    s.push_str(&slack_row(&m, &t.vertices));
                }
                write_text(out.as_deref(), &s)?;
            } else {
                write_json(out.as_deref(), &t)?;
            }
        }
        Cmd::Hankel { input, num, shift, report } => {
            let g = read_sequence(&input, num.max_n)?;
            let precision = Precision::from(num.precision);
            let tol = num.tol.unwrap_or(precision.default_tol());
            let h = hankel_report(&g, tol, precision);
            let ok = h.verdict == HankelVerdict::StieltjesConsistent;
            if shift {
                let sd = shift_dominance(&g, tol, precision);
                let passes = sd.passes;
                write_json(report.as_deref(), &HankelWithShift { hankel: h, shift_dominance: sd })?;
                if !(ok && passes) {
                    return Ok(Outcome::Failed("Hankel or shift-dominance test failed".into()));
                }
            } else {
                let msg = format!("Hankel verdict {:?} at order {:?}", h.verdict, h.failing_order);
                write_json(report.as_deref(), &h)?;
                if !ok {
                    return Ok(Outcome::Failed(msg));
                }
            }
        }
        Cmd::Carleman { input, log, max_n, report } => {
            let r = if log {
                let mut v: Vec<f64> = read_json(&input)?;
                if let Some(n) = max_n {
                    v.truncate(n + 1);
                }
                carleman_diagnostic_log(&v)
            } else {
                carleman_diagnostic(&read_sequence(&input, max_n)?)?
            };
            write_json(report.as_deref(), &r)?;
        }
        Cmd::Transform { input, theta, shift, inverse, precision, out } => {
            let g = read_sequence(&input, None)?;
            let h = Homothety::new(theta, shift)?;
            let dir = if inverse { Direction::Inverse } else { Direction::Forward };
            let t = match Precision::from(precision) {
                Precision::Double => transform_t(&g, &h, dir),
                Precision::High => transform_t(&g.to_hp(), &h, dir).to_f64(),
            };
            write_json(out.as_deref(), &t)?;
        }
        Cmd::Lambda { tau, partition, report } => {
            let tau = read_measure(&tau)?;
            let p = match read_json::<PartitionInput>(&partition)? {
                PartitionInput::Explicit(p) => p,
                PartitionInput::Canonical { eta, k } => canonical_partitions(&tau, eta, k)?,
            };
            write_json(report.as_deref(), &lambda_functional(&tau, &p)?)?;
        }
        Cmd::EulerThreshold { a, step, report } => {
            let r = euler_threshold(a, step)?;
            let bad = !r.pentagonal_violations.is_empty();
            write_json(report.as_deref(), &r)?;
            if bad {
                return Ok(Outcome::Failed("pentagonal bound violated".into()));
            }
        }
    }
    Ok(Outcome::Ok)
}

fn slack_row(m: &WeightedGraphModel, vertices: &[VertexId]) -> String {
    let r = hyponormality(m, 1e-10);
    let mut s = String::from("slack");
    for v in vertices {
        match r.per_vertex.iter().find(|x| x.vertex == *v) {
            Some(x) => s.push_str(&format!(",{:e},{:e}", x.slack, x.error_bound)),
            None => s.push_str(",NA,NA"),
        }
    }
    s.push('\n');
    s
}

/// Core errors that report a failed quantitative condition rather than bad input.
fn is_verification(e: &anyhow::Error) -> bool {
    let comp = |c: &CompOpError| {
        matches!(
            c,
            CompOpError::ThetaOutOfRange(_)
                | CompOpError::ConditionIB { .. }
                | CompOpError::ConditionIC { .. }
                | CompOpError::ConditionID { .. }
                | CompOpError::SeedMismatch { .. }
        )
    };
    if let Some(c) = e.downcast_ref::<CompOpError>() {
        return comp(c);
    }
    match e.downcast_ref::<ExoticError>() {
        Some(ExoticError::GsViolated(_) | ExoticError::EulerPredicateFailed { .. } | ExoticError::NotFound) => true,
        Some(ExoticError::CompOp(c)) => comp(c),
        _ => false,
    }
}

fn diagnostic(kind: &str, e: &anyhow::Error) {
    let msg = format!("{e:#}");
    eprintln!("{}", serde_json::json!({ "error": kind, "message": msg }));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            diagnostic("usage", &anyhow!(e.to_string().trim().to_string()));
            return ExitCode::from(1);
        }
    };
    match run(cli.cmd) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed(msg)) => {
            diagnostic("verification", &anyhow!(msg));
            ExitCode::from(2)
        }
        Err(e) if is_verification(&e) => {
            diagnostic("verification", &e);
            ExitCode::from(2)
        }
        Err(e) => {
            diagnostic("usage", &e);
            ExitCode::from(1)
        }
    }
}
