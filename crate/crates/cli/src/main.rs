//! `detsdv`: validate descriptors, plan a deployment, simulate it and report.
//!
//! Exit codes: 0 success, 2 input error, 3 admission rejection, 4 verdict failure.

use clap::{Args, Parser, Subcommand};
use detsdv::descriptors::{parse_service_bytes, parse_topology_bytes, DescriptorError, ServiceDescriptor, TopologyDescriptor};
use detsdv::netsim::{MetricsReport, SimConfig, Trace};
use detsdv::pipeline::{self, DEFAULT_SYNC_ERROR_NS};
use detsdv::report::{self, parse_scenario, ReportFormat, ScenarioReport, Verdict};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_OK: u8 = 0;
const EXIT_INPUT: u8 = 2;
const EXIT_REJECTED: u8 = 3;
const EXIT_VERDICT: u8 = 4;

#[derive(Parser)]
#[command(name = "detsdv", version, about = "Deterministic deployment planning and TSN simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate descriptors. Positional files are classified by content.
    Validate {
        paths: Vec<PathBuf>,
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Place services, synthesize TSN configuration and admit flows.
    Plan(RunArgs),
    /// Plan, then simulate the admitted flows and check scenario verdicts.
    Simulate(RunArgs),
    /// Render the results of a previous `simulate` run found in `--out`.
    Report {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "text")]
        format: String,
    },
}

#[derive(Args, Default)]
struct Inputs {
    #[arg(long = "service", num_args = 1..)]
    services: Vec<PathBuf>,
    #[arg(long)]
    topology: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    sim: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

/// Input error reported as one JSON line on stderr.
struct InputError(serde_json::Value);

impl InputError {
    fn io(path: &Path, e: &std::io::Error) -> Self {
        InputError(json!({"code": "IO", "path": path.display().to_string(), "message": e.to_string()}))
    }

    fn descriptor(path: &Path, e: &DescriptorError) -> Self {
        InputError(json!({
            "code": e.code.as_str(),
            "path": path.display().to_string(),
            "key_path": e.key_path,
            "message": e.message,
        }))
    }

    fn other(code: &str, path: &Path, message: impl ToString) -> Self {
        InputError(json!({"code": code, "path": path.display().to_string(), "message": message.to_string()}))
    }
}

fn read(path: &Path) -> Result<Vec<u8>, InputError> {
    std::fs::read(path).map_err(|e| InputError::io(path, &e))
}

fn read_text(path: &Path) -> Result<String, InputError> {
    std::fs::read_to_string(path).map_err(|e| InputError::io(path, &e))
}

fn load_service(path: &Path) -> Result<ServiceDescriptor, InputError> {
    parse_service_bytes(&read(path)?).map_err(|e| InputError::descriptor(path, &e))
}

fn load_topology(path: &Path) -> Result<TopologyDescriptor, InputError> {
    parse_topology_bytes(&read(path)?).map_err(|e| InputError::descriptor(path, &e))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), InputError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| InputError::io(&path, &e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// A service document has a top-level `title`; anything else is a topology.
fn looks_like_service(bytes: &[u8]) -> bool {
    std::str::from_utf8(bytes)
        .ok()
        .and_then(|t| t.parse::<toml::Table>().ok())
        .is_some_and(|t| t.contains_key("title") || t.contains_key("Flows"))
}

fn cmd_validate(paths: &[PathBuf], inputs: &Inputs) -> u8 {
    let mut checks: Vec<(PathBuf, Option<bool>)> = paths.iter().map(|p| (p.clone(), None)).collect();
    checks.extend(inputs.services.iter().map(|p| (p.clone(), Some(true))));
    checks.extend(inputs.topology.iter().map(|p| (p.clone(), Some(false))));
    let mut ok = true;
    for (path, service) in checks {
        let result = read(&path).and_then(|bytes| {
            let service = service.unwrap_or_else(|| looks_like_service(&bytes));
            if service {
                parse_service_bytes(&bytes).map(|_| ())
            } else {
                parse_topology_bytes(&bytes).map(|_| ())
            }
            .map_err(|e| InputError::descriptor(&path, &e))
        });
        if let Err(InputError(line)) = result {
            println!("{line}");
            ok = false;
        }
    }
    if ok {
        EXIT_OK
    } else {
        EXIT_INPUT
    }
}

/// Resolved inputs of a plan or simulate run.
struct RunManifest {
    services: Vec<ServiceDescriptor>,
    topology: TopologyDescriptor,
    sim: Option<SimConfig>,
    scenario: Option<report::ScenarioSpec>,
    out: PathBuf,
}

impl RunManifest {
    /// Explicit flags win; a sim config's `[scenario]` table may name the
    /// topology and services relative to its own directory.
    fn load(args: &RunArgs) -> Result<RunManifest, InputError> {
        let mut sim = None;
        let mut scenario = None;
        let mut base = PathBuf::new();
        if let Some(p) = &args.sim {
            let text = read_text(p)?;
            let mut c = SimConfig::parse_toml(&text).map_err(|e| InputError::other(e.code(), p, &e))?;
            if let Some(seed) = args.seed {
                c.seed = seed;
            }
            sim = Some(c);
            scenario = parse_scenario(&text).map_err(|e| InputError::other(e.code(), p, &e))?;
            base = p.parent().map(Path::to_path_buf).unwrap_or_default();
        }
        let mut service_paths = args.inputs.services.clone();
        if service_paths.is_empty() {
            if let Some(s) = &scenario {
                service_paths = s.services.iter().map(|n| base.join(n)).collect();
            }
        }
        let topology_path = match (&args.inputs.topology, scenario.as_ref().and_then(|s| s.topology.as_ref())) {
            (Some(t), _) => t.clone(),
            (None, Some(t)) => base.join(t),
            (None, None) => return Err(InputError(json!({"code": "USAGE", "message": "--topology is required"}))),
        };
        if service_paths.is_empty() {
            return Err(InputError(json!({"code": "USAGE", "message": "at least one --service is required"})));
        }
        for p in service_paths.iter().chain(std::iter::once(&topology_path)) {
            if !p.exists() {
                return Err(InputError::io(p, &std::io::Error::from(std::io::ErrorKind::NotFound)));
            }
        }
        let services = service_paths.iter().map(|p| load_service(p)).collect::<Result<Vec<_>, _>>()?;
        let topology = load_topology(&topology_path)?;
        std::fs::create_dir_all(&args.out).map_err(|e| InputError::io(&args.out, &e))?;
        Ok(RunManifest {
            services,
            topology,
            sim,
            scenario,
            out: args.out.clone(),
        })
    }

    fn sync_error_ns(&self) -> u64 {
        self.sim.as_ref().map_or(DEFAULT_SYNC_ERROR_NS, SimConfig::sync_error_ns)
    }
}

fn write_plan(m: &RunManifest) -> Result<pipeline::DeploymentPlan, InputError> {
    let plan = pipeline::plan(&m.services, &m.topology, m.sync_error_ns());
    for (name, contents) in plan.artifacts() {
        write(&m.out, name, &contents)?;
    }
    for v in plan.admission.iter().filter(|v| !v.admitted) {
        eprintln!("{}", json!({"code": "REJECTED", "flow": v.flow, "constraint": v.binding_constraint, "detail": v.detail}));
    }
    Ok(plan)
}

fn cmd_plan(args: &RunArgs) -> Result<u8, InputError> {
    let m = RunManifest::load(args)?;
    let plan = write_plan(&m)?;
    Ok(if plan.all_admitted() { EXIT_OK } else { EXIT_REJECTED })
}

#[derive(Serialize, Deserialize)]
struct VerdictsDoc {
    schema: String,
    pass: bool,
    verdicts: Vec<Verdict>,
}

fn cmd_simulate(args: &RunArgs) -> Result<u8, InputError> {
    let m = RunManifest::load(args)?;
    let Some(sim) = &m.sim else {
        return Err(InputError(json!({"code": "USAGE", "message": "--sim is required"})));
    };
    let plan = write_plan(&m)?;
    let out = pipeline::simulate(&m.topology, &plan, sim)
        .map_err(|e| InputError::other(e.code(), args.sim.as_deref().unwrap_or(Path::new("")), &e))?;
    write(&m.out, "trace.ndjson", &out.trace.to_ndjson())?;
    write(&m.out, "metrics.json", &(out.metrics.to_json() + "\n"))?;

    let verdict = match &m.scenario {
        Some(s) => {
            let first = &m.services[0];
            let exp: Vec<_> = first.flows.iter().map(|f| (detsdv::descriptors::flow_key(first, f), s.expected)).collect();
            report::evaluate_flows(&s.name, &exp, &out.metrics)
        }
        None => report::evaluate_flows("descriptors", &report::descriptor_expectations(&m.services), &out.metrics),
    };
    let doc = VerdictsDoc {
        schema: report::REPORT_SCHEMA.into(),
        pass: verdict.pass,
        verdicts: vec![verdict],
    };
    write(&m.out, "verdicts.json", &(serde_json::to_string_pretty(&doc).expect("serializable") + "\n"))?;
    Ok(if doc.pass { EXIT_OK } else { EXIT_VERDICT })
}

fn cmd_report(out: &Path, format: &str) -> Result<u8, InputError> {
    let format: ReportFormat = format.parse().map_err(|e: report::ReportError| InputError(json!({"code": e.code(), "message": e.to_string()})))?;
    let metrics_path = out.join("metrics.json");
    let metrics: MetricsReport =
        serde_json::from_str(&read_text(&metrics_path)?).map_err(|e| InputError::other("INVALID_REPORT", &metrics_path, e))?;
    let trace_path = out.join("trace.ndjson");
    let trace = Trace::parse_ndjson(&read_text(&trace_path)?).map_err(|e| InputError::other("INVALID_TRACE", &trace_path, e))?;
    let verdicts_path = out.join("verdicts.json");
    let doc: VerdictsDoc =
        serde_json::from_str(&read_text(&verdicts_path)?).map_err(|e| InputError::other("INVALID_REPORT", &verdicts_path, e))?;
    let reports: Vec<ScenarioReport> = doc
        .verdicts
        .into_iter()
        .map(|v| ScenarioReport::new(v, metrics.clone(), &trace))
        .collect();
    print!("{}", report::render(&reports, format));
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DETSDV_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { paths, inputs } => Ok(cmd_validate(paths, inputs)),
        Command::Plan(args) => cmd_plan(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Report { out, format } => cmd_report(out, format),
    };
    ExitCode::from(result.unwrap_or_else(|InputError(line)| {
        eprintln!("{line}");
        EXIT_INPUT
    }))
}
