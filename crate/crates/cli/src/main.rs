use clap::{Args, Parser, Subcommand, ValueEnum};
use fano_core::asymptotics::{
    equivocation_trace, symbolwise_trace, trace_csv, ErrorSchedule, Schedule, SourceFamily,
};
use fano_core::errprob::{feasible_range, list_map_error, marginal_list_error, SystemSpec, YCard};
use fano_core::extremal::{endpoint_achievers, extremal_joint_type1, extremal_joint_type2, verify_extremal};
use fano_core::fano::bound_measure;
use fano_core::measures::{JointDist, Measure};
use fano_core::oracle::{brute_force_inf, brute_force_sup, OracleConfig};
use fano_core::pmf::Pmf;
use fano_core::{json, Error};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Fano-type bounds on conditional information measures under a
/// list-decoding error budget.
#[derive(Parser, Debug)]
#[command(name = "fano", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sharp upper (or lower) bound on a conditional measure.
    Bound(SystemArgs),
    /// A joint distribution that attains the bound.
    Extremal {
        #[command(flatten)]
        sys: SystemArgs,
        /// Emit the two joints attaining the ends of the feasible error range instead.
        #[arg(long)]
        endpoints: bool,
    },
    /// Check a joint distribution against a system and its bound.
    Verify {
        /// Joint distribution JSON: {"py": [...], "conditionals": [[...], ...]}.
        #[arg(long)]
        joint: PathBuf,
        #[command(flatten)]
        sys: SystemArgs,
    },
    /// Brute-force search for the extremal value on a small instance.
    Oracle {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value_t = 64)]
        restarts: usize,
        /// Defaults to $FANO_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
    },
    /// List-decoding error of a joint, or the feasible error range of a marginal.
    Errprob {
        #[arg(long, conflicts_with = "q", required_unless_present = "q")]
        joint: Option<PathBuf>,
        #[arg(long)]
        q: Option<PathBuf>,
        #[arg(short = 'L', long = "list-size", default_value_t = 1)]
        list_size: usize,
        #[arg(long, default_value = "inf")]
        y: YCard,
    },
    /// Asymptotic traces along source sequences.
    Asym {
        #[command(subcommand)]
        kind: AsymCommand,
    },
    /// Evaluate a conditional measure on a joint distribution.
    Measure {
        #[arg(long)]
        joint: PathBuf,
        #[arg(long, default_value = "shannon")]
        measure: Measure,
    },
}

#[derive(Args, Debug)]
struct SystemArgs {
    /// Marginal of X: a JSON array of masses or a distribution object.
    #[arg(long)]
    q: PathBuf,
    #[arg(short = 'L', long = "list-size")]
    list_size: usize,
    #[arg(long)]
    eps: f64,
    /// Size of the observation alphabet: `inf` or a positive integer.
    #[arg(long, default_value = "inf")]
    y: YCard,
    #[arg(long, default_value = "shannon")]
    measure: Measure,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum AsymCommand {
    /// Poisson source with a growing mean.
    Poisson {
        /// Mean schedule λ_n (`const:C`, `geom:SCALE:RATIO`, `harmonic:SCALE`).
        #[arg(long, default_value = "geom:1:10")]
        lambda: Schedule,
        #[command(flatten)]
        trace: TraceArgs,
    },
    /// Source whose entropy stays away from ln L although its error vanishes.
    Counterexample {
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Mass schedule δ_n of the geometric part.
        #[arg(long, default_value = "harmonic:1")]
        delta: Schedule,
        #[command(flatten)]
        trace: TraceArgs,
    },
    /// Symbol-wise report for a block of per-position joints.
    Symbolwise {
        /// JSON array of joint distributions, one per position.
        #[arg(long)]
        joints: PathBuf,
        #[arg(short = 'L', long = "list-size")]
        list_size: usize,
    },
}

#[derive(Args, Debug)]
struct TraceArgs {
    /// Comma-separated indices n.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6")]
    n: Vec<u64>,
    /// List size L (constant).
    #[arg(short = 'L', long = "list-size", default_value_t = 1)]
    list_size: usize,
    /// Error schedule ε_n; defaults to the error without observations.
    #[arg(long)]
    eps: Option<Schedule>,
    #[arg(long, default_value = "shannon")]
    measure: Measure,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

/// Failure of a command: a usage problem (exit 2) or a domain error
/// (exit 1, reported as JSON).
enum Failure {
    Usage(String),
    Domain(Error, Option<Value>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e, None)
    }
}

type Outcome = std::result::Result<String, Failure>;

fn read_json(path: &Path) -> std::result::Result<Value, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Domain(Error::Parse(format!("{}: {e}", path.display())), None))
}

fn parse_value<T: serde::de::DeserializeOwned>(v: Value, what: &str) -> std::result::Result<T, Failure> {
    serde_json::from_value(v).map_err(|e| {
        // validation errors from the library surface through serde's message
        Failure::Domain(Error::Parse(format!("{what}: {e}")), None)
    })
}

fn read_pmf(path: &Path) -> std::result::Result<Pmf, Failure> {
    match read_json(path)? {
        Value::Array(items) => {
            let masses: Vec<f64> = parse_value(Value::Array(items), "masses")?;
            Ok(Pmf::new(masses)?)
        }
        v => parse_value(v, "distribution"),
    }
}

fn read_joint(path: &Path) -> std::result::Result<JointDist, Failure> {
    parse_value(read_json(path)?, "joint distribution")
}

fn system(args: &SystemArgs) -> std::result::Result<SystemSpec, Failure> {
    let q = read_pmf(&args.q)?;
    SystemSpec::new(q, args.list_size, args.eps, args.y).map_err(Failure::from)
}

/// Same as [`system`], but `PhiInfinite` carries the diverging tail.
fn with_witness<T>(q_path: &Path, r: fano_core::Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|e| match e {
        Error::PhiInfinite => {
            let witness = read_pmf(q_path).ok().and_then(|q| q.tail().map(|t| t.kind().to_string()));
            Failure::Domain(e, Some(json!({ "witness": { "tail": witness } })))
        }
        e => Failure::Domain(e, None),
    })
}

fn oracle_config(restarts: usize, seed: Option<u64>, max_iters: usize) -> std::result::Result<OracleConfig, Failure> {
    let seed = match seed {
        Some(s) => s,
        None => match std::env::var("FANO_SEED") {
            Ok(s) => s.parse().map_err(|_| Failure::Usage(format!("FANO_SEED={s:?} is not an integer")))?,
            Err(_) => 0,
        },
    };
    Ok(OracleConfig { restarts, seed, max_iters, ..OracleConfig::default() })
}

fn run_trace(src: &SourceFamily, t: &TraceArgs) -> Outcome {
    let errors = match &t.eps {
        Some(eps) => ErrorSchedule::Given { eps: eps.clone() },
        None => ErrorSchedule::Independence,
    };
    let list = Schedule::Constant { value: t.list_size as f64 };
    let rows = equivocation_trace(src, &list, &errors, &t.measure, &t.n)?;
    Ok(match t.format {
        Format::Csv => trace_csv(&rows),
        Format::Json => json::to_string_pretty(&rows) + "\n",
    })
}

fn run(cmd: Command) -> Outcome {
    let out = match cmd {
        Command::Bound(args) => {
            let sys = system(&args)?;
            let report = with_witness(&args.q, bound_measure(&sys, &args.measure))?;
            json::to_string_pretty(&report)
        }
        Command::Extremal { sys: args, endpoints } => {
            let q = read_pmf(&args.q)?;
            if endpoints {
                let (upper, lower) = endpoint_achievers(&q, args.list_size, args.y)?;
                json::to_string_pretty(&json!({
                    "upper": serde_json::to_value(&upper).expect("joint serializes"),
                    "lower": serde_json::to_value(&lower).expect("joint serializes"),
                }))
            } else {
                let joint = match args.y {
                    YCard::CountablyInfinite => extremal_joint_type1(&q, args.list_size, args.eps)?,
                    YCard::Finite(n) => extremal_joint_type2(&q, args.list_size, args.eps, n)?,
                };
                json::to_string_pretty(&joint)
            }
        }
        Command::Verify { joint, sys: args } => {
            let j = read_joint(&joint)?;
            let sys = system(&args)?;
            let phi = args.measure.phi(sys.q().len().max(2))?;
            let cert = with_witness(&args.q, verify_extremal(&j, &sys, &phi))?;
            json::to_string_pretty(&cert)
        }
        Command::Oracle { sys: args, restarts, seed, max_iters } => {
            let n = match args.y {
                YCard::Finite(n) => n,
                YCard::CountablyInfinite => {
                    return Err(Failure::Usage("the oracle needs a finite --y".into()));
                }
            };
            let sys = system(&args)?;
            let cfg = oracle_config(restarts, seed, max_iters)?;
            let phi = args.measure.phi(sys.q().len().max(2))?;
            let found = if phi.concave {
                brute_force_sup(sys.q(), args.list_size, args.eps, n, &phi, &cfg)?
            } else {
                brute_force_inf(sys.q(), args.list_size, args.eps, n, &phi, &cfg)?
            };
            let report = with_witness(&args.q, bound_measure(&sys, &args.measure))?;
            let oracle_value = args.measure.from_phi_value(fano_core::numeric::Extended::Finite(found.value)).to_f64();
            let bound_value = report.value.to_f64();
            json::to_string_pretty(&json!({
                "oracle_value": oracle_value,
                "bound_value": bound_value,
                "gap": bound_value - oracle_value,
                "direction": report.direction,
                "argmax_joint": serde_json::to_value(&found.joint).expect("joint serializes"),
            }))
        }
        Command::Errprob { joint, q, list_size, y } => {
            if let Some(path) = joint {
                let j = read_joint(&path)?;
                json::to_string_pretty(&json!({ "list_size": list_size, "error": list_map_error(&j, list_size) }))
            } else {
                let q = read_pmf(q.as_deref().expect("clap requires --q without --joint"))?;
                let (lo, hi) = feasible_range(&q, list_size, y);
                json::to_string_pretty(&json!({
                    "list_size": list_size,
                    "marginal_error": marginal_list_error(&q, list_size),
                    "feasible_range": [lo, hi],
                }))
            }
        }
        Command::Asym { kind } => {
            return match kind {
                AsymCommand::Poisson { lambda, trace } => run_trace(&SourceFamily::Poisson { mean: lambda }, &trace),
                AsymCommand::Counterexample { gamma, delta, trace } => {
                    let src = SourceFamily::NonAep { gamma, list_size: trace.list_size, delta };
                    run_trace(&src, &trace)
                }
                AsymCommand::Symbolwise { joints, list_size } => {
                    let js: Vec<JointDist> = parse_value(read_json(&joints)?, "joints")?;
                    let report = symbolwise_trace(&js, list_size, None)?;
                    Ok(json::to_string_pretty(&report) + "\n")
                }
            };
        }
        Command::Measure { joint, measure } => {
            let j = read_joint(&joint)?;
            let value = measure.evaluate(&j)?;
            json::to_string_pretty(&json!({ "measure": measure.to_string(), "value": value }))
        }
    };
    Ok(out + "\n")
}

fn error_json(e: &Error, extra: Option<Value>) -> String {
    let mut obj = json!({ "error": e.kind(), "message": e.to_string() });
    match e {
        Error::Infeasible { lo, hi, .. } => obj["range"] = json!([lo, hi]),
        Error::EpsOutOfRange { hi, .. } => obj["range"] = json!([0.0, hi]),
        Error::DeltaOutOfRange { max, .. } => obj["range"] = json!([0.0, max]),
        Error::YTooSmall { required, .. } => obj["required"] = json!(required),
        _ => {}
    }
    if let Some(Value::Object(map)) = extra {
        for (k, v) in map {
            obj[k] = v;
        }
    }
    json::to_string(&obj)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(Failure::Domain(e, extra)) => {
            println!("{}", error_json(&e, extra));
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
