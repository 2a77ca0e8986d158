use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use radopf_core::conditions::certify_with;
use radopf_core::experiment::{emit_report, generate_instances, modify_network, run_gap_study, DgMode};
use radopf_core::formulation::{residuals, LinearObjective};
use radopf_core::{
    build_dual, build_opf_cr, certify_strong_duality, check_conditions, duality_gap, parse_network, solve, Condition,
    InstanceSpec, Network, NetworkError, NetworkSource, ObjectiveSpec, PhysicalPoint, ReportFormat, SolverOptions,
    Status,
};

/// Radial-network OPF: strong-duality conditions, Slater certificates and duality-gap studies.
#[derive(Parser)]
#[command(name = "radopf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// A network file: JSON, or a nodes CSV together with `--branches` and `--v0`.
#[derive(clap::Args)]
struct NetArgs {
    net: PathBuf,
    /// Branch table when NET is a nodes CSV.
    #[arg(long)]
    branches: Option<PathBuf>,
    /// Root squared voltage for the CSV pair.
    #[arg(long)]
    v0: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CondArg {
    C1,
    C2,
    C3,
}

impl From<CondArg> for Condition {
    fn from(c: CondArg) -> Self {
        match c {
            CondArg::C1 => Condition::C1,
            CondArg::C2 => Condition::C2,
            CondArg::C3 => Condition::C3,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Dispatchable,
    FixedInjection,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a network.
    Validate(NetArgs),
    /// Report which of C1, C2, C3 hold.
    Check(NetArgs),
    /// Build a Slater certificate for the voltage-floor restriction.
    Certify {
        #[command(flatten)]
        net: NetArgs,
        /// Only try this condition.
        #[arg(long, value_enum)]
        condition: Option<CondArg>,
    },
    /// Solve the conic relaxation.
    Solve {
        #[command(flatten)]
        net: NetArgs,
        /// `loss`, or `linear:<file>` with JSON weights.
        #[arg(long, default_value = "loss")]
        objective: String,
        /// Also solve the explicit dual and report the gap.
        #[arg(long)]
        dual: bool,
    },
    /// Adjust bounds (and reactances for c2/c3) until a condition holds.
    Modify {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long, value_enum)]
        condition: CondArg,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Duality gaps over random DG instances.
    GapStudy {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        threshold: f64,
        /// Modify the base network first.
        #[arg(long, value_enum)]
        modify: Option<CondArg>,
        #[arg(long, value_enum, default_value = "table")]
        format: FormatArg,
        #[arg(long, value_enum, default_value = "dispatchable")]
        mode: ModeArg,
        /// Worker threads; 0 uses every core.
        #[arg(long, env = "RADOPF_JOBS", default_value_t = 0)]
        jobs: usize,
    },
}

enum Failure {
    Validation(String),
    Solve(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Solve(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Solve(m) | Failure::Io(m) => m,
        }
    }
}

impl From<NetworkError> for Failure {
    fn from(e: NetworkError) -> Self {
        Failure::Validation(e.to_string())
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn load(args: &NetArgs) -> Result<Network, Failure> {
    let bytes = read(&args.net)?;
    let net = match &args.branches {
        None => parse_network(NetworkSource::Json(&bytes))?,
        Some(b) => {
            let v0 = args
                .v0
                .ok_or_else(|| Failure::Validation("a CSV pair needs --v0 (the tables carry no root voltage)".into()))?;
            parse_network(NetworkSource::CsvPair { nodes: &bytes, branches: &read(b)?, v0 })?
        }
    };
    Ok(net)
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn objective(net: &Network, spec: &str) -> Result<ObjectiveSpec, Failure> {
    match spec.split_once(':') {
        None if spec == "loss" => Ok(ObjectiveSpec::TotalLoss),
        Some(("linear", file)) => {
            let text = String::from_utf8_lossy(&read(Path::new(file))?).into_owned();
            Ok(ObjectiveSpec::Linear(LinearObjective::from_json(net, &text)?))
        }
        _ => Err(Failure::Validation(format!("unknown objective `{spec}`; use loss or linear:<file>"))),
    }
}

#[derive(Serialize)]
struct DualReport {
    status: Status,
    objective: Option<f64>,
    abs_gap: Option<f64>,
    rel_gap: Option<f64>,
}

#[derive(Serialize)]
struct SolveReport {
    objective_kind: &'static str,
    status: Status,
    objective: Option<f64>,
    iterations: usize,
    max_flow_gap: Option<f64>,
    nodes: Vec<String>,
    point: Option<PhysicalPoint>,
    dual: Option<DualReport>,
}

fn cmd_solve(net: &Network, obj: &ObjectiveSpec, with_dual: bool) -> Result<String, Failure> {
    let opts = SolverOptions::default();
    let cr = build_opf_cr(net, obj);
    let sol = solve(&cr.program, &opts).map_err(|e| Failure::Solve(e.to_string()))?;
    let optimal = sol.status == Status::Optimal;
    let point = optimal.then(|| cr.physical_point(net, &sol.x));
    let mut report = SolveReport {
        objective_kind: obj.describe(),
        status: sol.status,
        objective: optimal.then_some(sol.primal_objective),
        iterations: sol.iterations,
        max_flow_gap: point.as_ref().and_then(|p| residuals(net, p).max_flow_gap()),
        nodes: net.names().to_vec(),
        point,
        dual: None,
    };
    let mut ok = optimal;
    if with_dual {
        let d = build_dual(&cr.program);
        let ds = solve(&d.program, &opts).map_err(|e| Failure::Solve(e.to_string()))?;
        let dual_obj = (ds.status == Status::Optimal).then(|| d.dual_value(ds.primal_objective));
        let gap = report.objective.zip(dual_obj).map(|(p, d)| duality_gap(p, d));
        ok &= dual_obj.is_some();
        report.dual = Some(DualReport {
            status: ds.status,
            objective: dual_obj,
            abs_gap: gap.map(|g| g.absolute),
            rel_gap: gap.map(|g| g.relative),
        });
    }
    let out = json(&report);
    if ok {
        Ok(out)
    } else {
        println!("{out}");
        Err(Failure::Solve(format!("solver finished with status {}", report.status)))
    }
}

fn run(cli: Cli) -> Result<String, Failure> {
    match cli.command {
        Command::Validate(args) => {
            let net = load(&args)?;
            let depth = (0..=net.num_nodes()).map(|i| net.depth(i)).max().unwrap_or(0);
            Ok(format!("ok: {} nodes plus root, {} branches, depth {depth}", net.num_nodes(), net.num_branches()))
        }
        Command::Check(args) => Ok(json(&check_conditions(&load(&args)?))),
        Command::Certify { net, condition } => {
            let net = load(&net)?;
            let cert = match condition {
                Some(c) => certify_with(&net, c.into()),
                None => certify_strong_duality(&net),
            };
            Ok(json(&cert))
        }
        Command::Solve { net, objective: spec, dual } => {
            let net = load(&net)?;
            let obj = objective(&net, &spec)?;
            cmd_solve(&net, &obj, dual)
        }
        Command::Modify { net, condition, output } => {
            let net = load(&net)?;
            let m = modify_network(&net, condition.into());
            write(&output, &m.network.to_json())?;
            Ok(json(&m.log))
        }
        Command::GapStudy { net, instances, seed, threshold, modify, format, mode, jobs } => {
            let mut base = load(&net)?;
            let mut label = net.net.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            if let Some(c) = modify {
                let c = Condition::from(c);
                base = modify_network(&base, c).network;
                label = format!("{label} modified by {c}");
            }
            let spec = InstanceSpec {
                count: instances,
                seed,
                mode: match mode {
                    ModeArg::Dispatchable => DgMode::Dispatchable,
                    ModeArg::FixedInjection => DgMode::FixedInjection,
                },
                ..Default::default()
            };
            let nets = generate_instances(&base, &spec).map_err(|e| Failure::Validation(e.to_string()))?;
            let mut result = run_gap_study(&nets, &ObjectiveSpec::TotalLoss, threshold, jobs);
            result.label = label;
            log::info!("{} of {} instances solved", result.summary.solved, result.summary.total);
            let format = match format {
                FormatArg::Csv => ReportFormat::Csv,
                FormatArg::Json => ReportFormat::Json,
                FormatArg::Table => ReportFormat::Table,
            };
            Ok(emit_report(&result, format))
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.as_bytes());
            if !out.ends_with('\n') {
                let _ = stdout.write_all(b"\n");
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
