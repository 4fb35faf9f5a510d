use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use signum_core::achieve::{explore, probe_density};
use signum_core::balancer::{block_sign_converge, GreedyBalancer, Strategy};
use signum_core::config::load_spec;
use signum_core::dimension::{
    build_lambda_measure, mdp_certify, theta_uniform_measure, uniform_measure, CylinderMeasure,
};
use signum_core::greedy1d::{greedy_signs, lambda_count, LambdaParams};
use signum_core::levy::{
    approximate_target, directional_mass, levy_decompose, ls_estimate, probe_set, PrefixPolicy,
    DEFAULT_GROWTH_THRESHOLD, DEFAULT_PROBES,
};
use signum_core::target::{hit_target, partition_for_dimension, realize_partition, TriplePartition};
use signum_core::{Error, ErrorClass, Norm, PartialSumTrace, Real, SequenceSpec, SignWord, Summability};

#[derive(Parser)]
#[command(name = "signum", version, about = "Sign selection for signed null series")]
struct Cli {
    /// Seed for probe sets and any other randomness.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Outputs {
    /// Comma-separated artifact paths: `*.json` receives the report,
    /// `*.csv` the partial-sum trace. The report goes to stdout when no
    /// JSON path is given.
    #[arg(long, value_delimiter = ',')]
    out: Vec<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Block-wise balancing so that the series converges.
    Balance {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        depth: u64,
        #[arg(long, default_value = "greedy")]
        strategy: Strategy,
        #[arg(long, default_value = "euclidean")]
        norm: Norm,
        #[command(flatten)]
        out: Outputs,
    },
    /// Greedy signs toward a real target.
    Greedy {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        target: f64,
        #[arg(long)]
        depth: u64,
        #[command(flatten)]
        out: Outputs,
    },
    /// Exhaustive survival counts of the block set around a target.
    LambdaCount {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        target: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        levels: usize,
        #[command(flatten)]
        out: Outputs,
    },
    /// Directional masses, the (LS) estimate and optional decompositions.
    Levy {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        horizon: u64,
        #[arg(long, default_value_t = DEFAULT_PROBES)]
        probes: usize,
        /// Cone radii for the mass report.
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.25,0.125")]
        radii: Vec<f64>,
        /// Unit direction to decompose along.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        decompose: Option<Vec<f64>>,
        /// Target for a finite-horizon approximation.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        approximate: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value = "all-plus")]
        policy: PrefixPolicy,
        #[command(flatten)]
        out: Outputs,
    },
    /// Staged construction hitting a target in R^d.
    Hit {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        target: Vec<f64>,
        #[arg(long)]
        stages: u32,
        #[arg(long, default_value_t = 1_000_000)]
        horizon: u64,
        #[command(flatten)]
        out: Outputs,
    },
    /// Mass-distribution certificate for a cylinder measure.
    Certify {
        /// Measure JSON to certify.
        #[arg(long, conflicts_with = "build")]
        measure: Option<PathBuf>,
        /// Build a measure instead: `uniform`, `lambda` or `theta`.
        #[arg(long)]
        build: Option<String>,
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true, default_value = "0")]
        target: String,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        depth: usize,
        /// Also write the measure used.
        #[arg(long)]
        save_measure: Option<PathBuf>,
        #[command(flatten)]
        out: Outputs,
    },
    /// Achievement-set cover, or density witnesses for divergent series.
    Achieve {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        targets: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
        #[arg(long, default_value_t = 1_000_000)]
        horizon: u64,
        #[command(flatten)]
        out: Outputs,
    },
    /// Free/filler/carrier partition with class counts.
    Partition {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        levels: usize,
        /// Realize a longer partition toward this target.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        target: Option<Vec<f64>>,
        #[arg(long, default_value_t = 4)]
        stages: u32,
        /// Blocks used when realizing; the free signs are greedily balanced.
        #[arg(long, default_value_t = 20_000)]
        blocks: usize,
        #[command(flatten)]
        out: Outputs,
    },
}

enum Failure {
    Input(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Run<T> = std::result::Result<T, Failure>;

/// Report plus optional trace, and whether a horizon ran out.
struct Outcome {
    report: Value,
    trace: Option<PartialSumTrace>,
    exhausted: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = std::env::var("SIGNUM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli) {
        Ok(exhausted) => ExitCode::from(if exhausted { 3 } else { 0 }),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Input => 1,
                ErrorClass::Precondition => 2,
                ErrorClass::Exhausted => 3,
            })
        }
    }
}

fn run(cli: Cli) -> Run<bool> {
    let seed = cli.seed;
    let (outcome, out) = match cli.command {
        Command::Balance { spec, depth, strategy, norm, out } => {
            let spec = load(&spec)?;
            let (signs, plan, trace) = block_sign_converge(&spec, depth, strategy, norm)?;
            let report = json!({
                "command": "balance",
                "depth": depth,
                "signs": signs_text(&signs),
                "sup_norm": trace.sup_norm(),
                "plan": plan,
            });
            (Outcome { report, trace: Some(trace), exhausted: false }, out)
        }
        Command::Greedy { spec, target, depth, out } => {
            let spec = load(&spec)?;
            let (signs, trace) = greedy_signs(&spec, target, depth)?;
            let report = json!({
                "command": "greedy",
                "target": target,
                "depth": depth,
                "signs": signs_text(&signs),
                "final_sum": trace.last_sum(),
                "final_error": trace.dist_to_target(trace.len()),
                "first_crossing": signum_core::greedy1d::first_crossing(&trace, target),
            });
            (Outcome { report, trace: Some(trace), exhausted: false }, out)
        }
        Command::LambdaCount { spec, target, k, levels, out } => {
            let spec = load(&spec)?;
            let target: Real = target.parse().map_err(|e| Failure::Input(format!("target: {e}")))?;
            let params = LambdaParams::for_spec(&spec, target, k)?;
            let count = lambda_count(&params, &spec, levels)?;
            let holds = count.branching_holds();
            let report = json!({ "command": "lambda-count", "branching_holds": holds, "count": count });
            (Outcome { report, trace: None, exhausted: false }, out)
        }
        Command::Levy { spec, horizon, probes, radii, decompose, approximate, delta, policy, out } => {
            let spec = load(&spec)?;
            let probe_dirs = probe_set(spec.dim(), probes, seed);
            let mass = directional_mass(&spec, horizon, &probe_dirs, &radii, DEFAULT_GROWTH_THRESHOLD)?;
            let ls = if spec.dim() >= 2 { Some(ls_estimate(&spec, horizon, probes, seed)?) } else { None };
            let decomposition = decompose.map(|u| levy_decompose(&spec, &u, horizon)).transpose()?;
            let mut trace = None;
            let approx = match approximate {
                Some(x) => {
                    let (_, t, rep) = approximate_target(&spec, &x, delta, horizon, policy)?;
                    trace = Some(t);
                    Some(rep)
                }
                None => None,
            };
            let report = json!({
                "command": "levy",
                "seed": seed,
                "mass": mass,
                "ls": ls,
                "decomposition": decomposition,
                "approximation": approx,
            });
            (Outcome { report, trace, exhausted: false }, out)
        }
        Command::Hit { spec, target, stages, horizon, out } => {
            let spec = load(&spec)?;
            let (signs, plan, trace) = hit_target(&spec, &target, stages, horizon)?;
            let exhausted = plan.exhausted.is_some();
            let report = json!({
                "command": "hit",
                "signs": signs_text(&signs),
                "final_error": trace.dist_to_target(trace.len()),
                "final_bound": plan.final_bound(),
                "plan": plan,
            });
            (Outcome { report, trace: Some(trace), exhausted }, out)
        }
        Command::Certify { measure, build, spec, target, k, s, c, depth, save_measure, out } => {
            let m = match (measure, build.as_deref()) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
                    serde_json::from_str::<CylinderMeasure>(&text)
                        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?
                }
                (None, Some("uniform")) => uniform_measure(depth)?,
                (None, Some("theta")) => theta_uniform_measure(need(k, "k")?, depth)?,
                (None, Some("lambda")) => {
                    let spec = load(&need(spec, "spec")?)?;
                    let target: Real = target.parse().map_err(|e| Failure::Input(format!("target: {e}")))?;
                    let params = LambdaParams::for_spec(&spec, target, need(k, "k")?)?;
                    build_lambda_measure(&params, &spec, depth)?
                }
                (None, Some(other)) => return Err(Failure::Input(format!("unknown measure `{other}`"))),
                (None, None) => return Err(Failure::Input("give --measure FILE or --build KIND".into())),
            };
            if let Some(path) = save_measure {
                write_json(&path, &serde_json::to_value(&m).expect("measure serializes"))?;
            }
            let cert = mdp_certify(&m, s, c, depth)?;
            let report = json!({ "command": "certify", "certificate": cert });
            (Outcome { report, trace: None, exhausted: false }, out)
        }
        Command::Achieve { spec, depth, targets, delta, horizon, out } => {
            let spec = load(&spec)?;
            match (spec.summability(), targets) {
                (Summability::Divergent, Some(targets)) => {
                    let witnesses = probe_density(&spec, &targets, delta, horizon)?;
                    let exhausted = witnesses.iter().any(|w| !w.witnessed);
                    let report = json!({
                        "command": "achieve",
                        "delta": delta,
                        "horizon": horizon,
                        "witnesses": witnesses,
                    });
                    (Outcome { report, trace: None, exhausted }, out)
                }
                _ => {
                    let depth = depth.ok_or_else(|| Failure::Input("--depth is required for a cover".into()))?;
                    let cover = explore(&spec, depth)?;
                    let report = json!({ "command": "achieve", "cover": cover });
                    (Outcome { report, trace: None, exhausted: false }, out)
                }
            }
        }
        Command::Partition { spec, k, levels, target, stages, blocks, out } => {
            let spec = load(&spec)?;
            let (part, count) = partition_for_dimension(&spec, k, levels)?;
            let mut report = json!({
                "command": "partition",
                "certifies": count.certifies(),
                "count": count,
                "free": part.free(),
                "filler": part.filler(),
                "carrier": part.carrier(),
            });
            let mut trace = None;
            let mut exhausted = false;
            if let Some(x) = target {
                let long = TriplePartition::build(&spec, k, blocks)?;
                let mut balancer = GreedyBalancer::new(spec.dim(), Norm::Euclidean);
                let mut free = SignWord::new();
                for n in long.free() {
                    free.push(balancer.step(&spec.term(n)?));
                }
                let (_, realized, t) = realize_partition(&spec, &long, &free, &x, stages)?;
                exhausted = realized.carrier_plan.exhausted.is_some();
                report["realized"] = serde_json::to_value(&realized).expect("report serializes");
                trace = Some(t);
            }
            (Outcome { report, trace, exhausted }, out)
        }
    };
    emit(outcome, &out.out)
}

fn need<T>(v: Option<T>, name: &str) -> Run<T> {
    v.ok_or_else(|| Failure::Input(format!("--{name} is required here")))
}

fn load(path: &Path) -> Run<SequenceSpec> {
    if !path.exists() {
        return Err(Failure::Input(format!("spec file {} not found", path.display())));
    }
    Ok(load_spec(path)?)
}

fn signs_text(w: &SignWord) -> String {
    w.to_string()
}

fn emit(outcome: Outcome, paths: &[PathBuf]) -> Run<bool> {
    let mut report = outcome.report;
    if let Value::Object(map) = &mut report {
        map.insert("schema_version".into(), Value::from("1"));
    }
    let mut json_written = false;
    for path in paths {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => {
                write_json(path, &report)?;
                json_written = true;
            }
            Some("csv") => match &outcome.trace {
                Some(t) => write_trace(path, t)?,
                None => return Err(Failure::Input("this subcommand produces no trace".into())),
            },
            _ => return Err(Failure::Input(format!("cannot infer artifact type of {}", path.display()))),
        }
    }
    if !json_written {
        let stdout = io::stdout();
        let mut lock = stdout.lock();
        write_pretty(&mut lock, &report)?;
    }
    Ok(outcome.exhausted)
}

fn write_pretty<W: Write, T: Serialize>(w: &mut W, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)
}

fn write_json(path: &Path, value: &Value) -> Run<()> {
    let mut f = BufWriter::new(File::create(path)?);
    write_pretty(&mut f, value)?;
    f.flush()?;
    Ok(())
}

fn write_trace(path: &Path, trace: &PartialSumTrace) -> Run<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Failure::Input(e.to_string()))?;
    let mut header = vec!["N".to_string()];
    header.extend((1..=trace.dim()).map(|i| format!("S_{i}")));
    header.push("dist_to_target".into());
    w.write_record(&header).map_err(|e| Failure::Input(e.to_string()))?;
    let mut row = Vec::with_capacity(trace.dim() + 2);
    for (n, sum, dist) in trace.entries() {
        row.clear();
        row.push(n.to_string());
        row.extend(sum.iter().map(f64::to_string));
        row.push(dist.map(|d| d.to_string()).unwrap_or_default());
        w.write_record(&row).map_err(|e| Failure::Input(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
