//! Subcommands of the `ceq` binary and their exit codes.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use ceq_core::ce_core::{preprocess, verify_witness, CEInstance, PreprocessOutcome, ProblemTag};
use ceq_core::oracle::{decide_with_stats, generate, Decision, GenError, GenSpec, Planted, SearchBudget, SearchMode};
use ceq_core::reduction::{
    canonical_no_instance, canonical_yes_instance, reduce_pce, Reduction, ReductionError, ReductionOutcome,
};
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::format::{parse_field, CertKind, CertSection, Document, FormatError, Note};

/// Success, or a YES answer.
pub const EXIT_OK: i32 = 0;
/// A NO answer, or a witness that failed verification.
pub const EXIT_NO: i32 = 1;
/// Bad flags, unreadable or malformed input.
pub const EXIT_USAGE: i32 = 2;
/// A search or generation budget ran out.
pub const EXIT_BUDGET: i32 = 3;
/// A reduced-pair witness lacks the structure every genuine witness has.
pub const EXIT_STRUCTURE: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {err}")]
    Format { path: PathBuf, err: FormatError },
    #[error("{path}: {err}")]
    Io { path: PathBuf, err: std::io::Error },
    #[error("verification failed: {0}")]
    Verify(String),
    #[error("{0}")]
    Budget(String),
    #[error("{0}")]
    Structure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Format { .. } | CliError::Io { .. } => EXIT_USAGE,
            CliError::Verify(_) => EXIT_NO,
            CliError::Budget(_) => EXIT_BUDGET,
            CliError::Structure(_) => EXIT_STRUCTURE,
        }
    }
}

impl From<ReductionError> for CliError {
    fn from(e: ReductionError) -> CliError {
        match e {
            ReductionError::Structure(v) => CliError::Structure(format!("structure violation: {v}")),
            ReductionError::WitnessInvalid(m) => CliError::Verify(m),
            ReductionError::Ce(ceq_core::ce_core::CeError::WitnessShape(m)) => CliError::Verify(m),
            ReductionError::Ce(ceq_core::ce_core::CeError::WitnessInvalid(m)) => CliError::Verify(m),
            other => CliError::Usage(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ceq", version, about = "Code equivalence instances, reductions and brute-force solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded random instance.
    Gen(GenArgs),
    /// Reduce a PCE instance to LCE or SPCE.
    Reduce(ReduceArgs),
    /// Decide an instance by brute force.
    Solve(SolveArgs),
    /// Check a witness against an instance.
    Verify(VerifyArgs),
    /// Map a witness of the original instance to the reduced instance.
    Lift(LiftArgs),
    /// Map a witness of the reduced instance back to the original instance.
    Extract(ExtractArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub n: usize,
    /// Field order: a prime `p` or `p^e`.
    #[arg(long)]
    pub field: String,
    /// Modulus coefficients `c0,...,ce` for extension fields.
    #[arg(long)]
    pub modulus: Option<String>,
    #[arg(long, default_value = "PCE")]
    pub tag: String,
    /// yes, no or unlabeled.
    #[arg(long)]
    pub planted: String,
    #[arg(long)]
    pub seed: u64,
    /// Column multiplicities, e.g. `2,1,1`.
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Where the planted witness goes; defaults to `<out>.witness`.
    #[arg(long)]
    pub witness_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// lce or spce.
    #[arg(long)]
    pub target: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub cert: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// exhaustive or backtracking.
    #[arg(long, default_value = "exhaustive")]
    pub mode: String,
    #[arg(long)]
    pub max_nodes: Option<u64>,
    #[arg(long)]
    pub time_limit_ms: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub witness_out: Option<PathBuf>,
    /// Append a CSV summary line to this file.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub witness: PathBuf,
}

#[derive(Debug, Args)]
pub struct LiftArgs {
    #[arg(long)]
    pub cert: PathBuf,
    #[arg(long)]
    pub witness: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub cert: PathBuf,
    #[arg(long)]
    pub witness: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Optional copy of the original instance; must match the one in the cert.
    #[arg(long)]
    pub original: Option<PathBuf>,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::Gen(a) => cmd_gen(&a),
        Command::Reduce(a) => cmd_reduce(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Lift(a) => cmd_lift(&a),
        Command::Extract(a) => cmd_extract(&a),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn read_doc(path: &Path) -> Result<Document, CliError> {
    let text = fs::read_to_string(path).map_err(|err| CliError::Io { path: path.into(), err })?;
    text.parse().map_err(|err| CliError::Format { path: path.into(), err })
}

fn write_doc(path: &Path, doc: &Document) -> Result<(), CliError> {
    fs::write(path, doc.to_text()).map_err(|err| CliError::Io { path: path.into(), err })
}

fn read_instance(path: &Path) -> Result<CEInstance, CliError> {
    read_doc(path)?.instance().ok_or_else(|| usage(format!("{}: no instance (tag, G, H) in file", path.display())))
}

fn read_witness(path: &Path, field: &ceq_core::ff::Field) -> Result<ceq_core::ce_core::Witness, CliError> {
    let doc = read_doc(path)?;
    if &doc.field != field {
        return Err(usage(format!("{}: witness is over a different field", path.display())));
    }
    doc.witness.ok_or_else(|| usage(format!("{}: no witness section", path.display())))
}

fn cmd_gen(a: &GenArgs) -> Result<i32, CliError> {
    let field = parse_field(&a.field, a.modulus.as_deref()).map_err(usage)?;
    let tag: ProblemTag = a.tag.parse().map_err(usage)?;
    let planted: Planted = a.planted.parse().map_err(usage)?;
    let mut spec = GenSpec::new(&field, a.k, a.n, tag, planted, a.seed);
    if let Some(p) = &a.profile {
        let counts = p
            .split(',')
            .map(|c| c.trim().parse::<usize>().map_err(|_| usage(format!("bad profile entry `{c}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        spec = spec.with_profile(counts);
    }
    let generated = generate(&spec).map_err(|e| match e {
        GenError::InvalidSpec(m) => usage(m),
        GenError::BudgetExceeded(m) => CliError::Budget(m),
    })?;
    write_doc(&a.out, &Document::from_instance(&generated.instance))?;
    print!("generated {} instance k={} n={} over {}", planted.as_str(), a.k, a.n, generated.instance.field());
    if let Some(w) = &generated.witness {
        let path = a.witness_out.clone().unwrap_or_else(|| {
            let mut p = a.out.clone().into_os_string();
            p.push(".witness");
            PathBuf::from(p)
        });
        write_doc(&path, &Document::from_witness(&field, w))?;
        print!(", witness in {}", path.display());
    }
    println!();
    Ok(EXIT_OK)
}

fn cmd_reduce(a: &ReduceArgs) -> Result<i32, CliError> {
    let inst = read_instance(&a.input)?;
    let target: ProblemTag = a.target.parse().map_err(usage)?;
    if target == ProblemTag::Pce {
        return Err(usage("reduction target must be lce or spce"));
    }
    if inst.tag() != ProblemTag::Pce {
        return Err(usage(format!("input instance is {}, expected PCE", inst.tag())));
    }
    let r = reduce_pce(&inst, target)?;
    let mut out = Document::from_instance(&r.instance);
    let kind = match &r.outcome {
        ReductionOutcome::Gadget { cert, journal, .. } => {
            cert.check_blowup(&r.instance)?;
            out.note = Some(Note::Reduction {
                k: cert.k,
                n: cert.n,
                m: cert.m,
                kprime: cert.k_prime(),
                nprime: cert.n_prime(),
            });
            println!("reduced to {target}: k'={} n'={} (m={})", cert.k_prime(), cert.n_prime(), cert.m);
            CertKind::Gadget { cert: *cert, journal: journal.clone() }
        }
        ReductionOutcome::Rejected(reason) => {
            out.note = Some(Note::RejectReason(*reason));
            println!("rejected by preprocessing ({reason}); wrote the canonical NO pair");
            CertKind::Rejected(*reason)
        }
        ReductionOutcome::EmptyCode { journal } => {
            out.note = Some(Note::EmptyCode);
            println!("both codes are empty; wrote the canonical YES pair");
            CertKind::Empty { journal: journal.clone() }
        }
    };
    write_doc(&a.out, &out)?;
    let mut cert_doc = Document::from_instance(&inst);
    cert_doc.cert = Some(CertSection { target, kind });
    write_doc(&a.cert, &cert_doc)?;
    Ok(EXIT_OK)
}

fn cmd_solve(a: &SolveArgs) -> Result<i32, CliError> {
    let inst = read_instance(&a.input)?;
    let mode: SearchMode = a.mode.parse().map_err(usage)?;
    let mut budget = SearchBudget::new(mode).with_workers(a.workers);
    if let Some(n) = a.max_nodes {
        if n == 0 {
            return Err(usage("--max-nodes must be at least 1"));
        }
        budget = budget.with_max_nodes(n);
    }
    if let Some(ms) = a.time_limit_ms {
        budget = budget.with_time_limit(Duration::from_millis(ms));
    }
    let (decision, stats) = decide_with_stats(&inst, &budget);
    let answer = match &decision {
        Decision::Yes(_) => "YES",
        Decision::No => "NO",
        Decision::Unknown(_) => "UNKNOWN",
    };
    if let Some(path) = &a.stats {
        let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let mut file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|err| CliError::Io { path: path.clone(), err })?;
        let mut line = String::new();
        if fresh {
            line.push_str("mode,tag,q,k,n,answer,nodes,elapsed_ms\n");
        }
        line.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            mode,
            inst.tag(),
            inst.field().q(),
            inst.k(),
            inst.n(),
            answer,
            stats.nodes,
            stats.elapsed.as_millis()
        ));
        file.write_all(line.as_bytes()).map_err(|err| CliError::Io { path: path.clone(), err })?;
    }
    match decision {
        Decision::Yes(w) => {
            println!("YES");
            if let Some(path) = &a.witness_out {
                write_doc(path, &Document::from_witness(inst.field(), &w))?;
            }
            Ok(EXIT_OK)
        }
        Decision::No => {
            println!("NO");
            Ok(EXIT_NO)
        }
        Decision::Unknown(s) => {
            let limit = s.exhausted.map_or("budget".to_string(), |l| l.to_string());
            println!("UNKNOWN ({limit} exhausted after {} nodes)", s.nodes);
            Ok(EXIT_BUDGET)
        }
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<i32, CliError> {
    let inst = read_instance(&a.input)?;
    let w = read_witness(&a.witness, inst.field())?;
    match verify_witness(&inst, &w) {
        Ok(true) => {
            println!("OK");
            Ok(EXIT_OK)
        }
        Ok(false) => Err(CliError::Verify("S*G*M != H, S singular, or M outside the tag's group".into())),
        Err(e) => Err(CliError::Verify(e.to_string())),
    }
}

/// Rebuilds the reduction recorded in a certificate file.
fn load_reduction(path: &Path) -> Result<(CEInstance, Reduction), CliError> {
    let doc = read_doc(path)?;
    let original = doc.instance().ok_or_else(|| usage(format!("{}: certificate lacks the original pair", path.display())))?;
    let cert = doc.cert.ok_or_else(|| usage(format!("{}: no cert section", path.display())))?;
    if original.tag() != ProblemTag::Pce {
        return Err(usage(format!("{}: original instance must be PCE", path.display())));
    }
    let mismatch = || usage(format!("{}: certificate does not match its instance", path.display()));
    let field = original.field().clone();
    let reduction = match (cert.kind, preprocess(&original)) {
        (CertKind::Gadget { cert: c, journal }, PreprocessOutcome::Normalized { instance, journal: actual }) => {
            if journal != actual || instance.n() == 0 {
                return Err(mismatch());
            }
            // The multiplier is taken from the file as recorded.
            Reduction::with_cert(instance, journal, c, cert.target).map_err(|_| mismatch())?
        }
        (CertKind::Rejected(reason), PreprocessOutcome::Reject(actual)) if reason == actual => Reduction {
            target: cert.target,
            instance: canonical_no_instance(&field, cert.target),
            outcome: ReductionOutcome::Rejected(reason),
        },
        (CertKind::Empty { journal }, PreprocessOutcome::Normalized { instance, journal: actual })
            if journal == actual && instance.n() == 0 =>
        {
            Reduction {
                target: cert.target,
                instance: canonical_yes_instance(&field, cert.target),
                outcome: ReductionOutcome::EmptyCode { journal },
            }
        }
        _ => return Err(mismatch()),
    };
    Ok((original, reduction))
}

fn cmd_lift(a: &LiftArgs) -> Result<i32, CliError> {
    let (original, r) = load_reduction(&a.cert)?;
    let w = read_witness(&a.witness, original.field())?;
    let lifted = r.lift(&original, &w)?;
    write_doc(&a.out, &Document::from_witness(original.field(), &lifted))?;
    println!("lifted witness verifies on the reduced {} pair", r.target);
    Ok(EXIT_OK)
}

fn cmd_extract(a: &ExtractArgs) -> Result<i32, CliError> {
    let (original, r) = load_reduction(&a.cert)?;
    if let Some(path) = &a.original {
        if read_instance(path)? != original {
            return Err(usage(format!("{} differs from the instance recorded in the certificate", path.display())));
        }
    }
    let w = read_witness(&a.witness, original.field())?;
    let extracted = r.extract(&original, &w)?;
    write_doc(&a.out, &Document::from_witness(original.field(), &extracted))?;
    println!("extracted permutation witness verifies on the original pair");
    Ok(EXIT_OK)
}
