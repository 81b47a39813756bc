use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value as Json};

use recourse::api::{self, ApiError, ClassifyRequest, ExplainRequest, InterpolantRequest};
use recourse::bench::{self, BenchError, BenchReport};
use recourse::cfe::{self, Control, ControlSpec};
use recourse::dual::{dualize_predicate, dualize_program, DualError};
use recourse::rulelang::{parse_program, print_rules, PredKey, RuleError};
use recourse::workspace::{Workspace, WorkspaceError};

use recourse_cli::{server, text};

#[derive(Parser)]
#[command(name = "recourse", version, about = "Counterfactual explanations for rule-based classifiers")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Source {
    /// Fixture directory holding schema.json, rules.lp and instance.json
    #[arg(long)]
    fixture: Option<String>,
    /// Where `--fixture` names are looked up
    #[arg(long, env = "RECOURSE_FIXTURE_DIR", default_value = "fixtures")]
    fixture_dir: PathBuf,
    #[arg(short = 's', long)]
    schema: Option<PathBuf>,
    #[arg(short = 'r', long)]
    rules: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct InstanceArg {
    /// Instance JSON file (`-` for stdin); defaults to the fixture's instance.json
    #[arg(short = 'i', long)]
    instance: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct ControlArgs {
    #[arg(long, value_delimiter = ',')]
    immutable: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    must_change: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    must_increase: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    must_decrease: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Label an instance and show why
    Classify {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        instance: InstanceArg,
        #[arg(long)]
        json: bool,
    },
    /// Counterfactuals for an instance, cheapest first
    Explain {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        instance: InstanceArg,
        #[command(flatten)]
        controls: ControlArgs,
        /// Highest intervention cost to search
        #[arg(long)]
        cost: Option<usize>,
        /// Result cap; 0 for no cap
        #[arg(long, default_value_t = api::DEFAULT_LIMIT)]
        limit: usize,
        #[arg(long)]
        json: bool,
    },
    /// Minimal intervention cost and every counterfactual at it
    Interpolant {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        instance: InstanceArg,
        #[command(flatten)]
        controls: ControlArgs,
        #[arg(long)]
        json: bool,
    },
    /// Undesired to desired transitions over all worlds
    Enumerate {
        #[command(flatten)]
        source: Source,
        /// Result cap; 0 for no cap
        #[arg(long, default_value_t = api::DEFAULT_LIMIT)]
        limit: usize,
        #[arg(long)]
        json: bool,
    },
    /// Print the dual rules of a program
    Dualize {
        #[command(flatten)]
        source: Source,
        /// Only this predicate, as name/arity
        #[arg(long)]
        pred: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Time the minimal-cost search
    #[command(subcommand)]
    Bench(BenchCmd),
    /// Serve the JSON API
    Serve {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Evaluations allowed at once; defaults to the CPU count
        #[arg(long)]
        max_concurrent: Option<usize>,
    },
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Search time against the domain size of one categorical feature
    Scaling {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        instance: InstanceArg,
        #[command(flatten)]
        controls: ControlArgs,
        #[arg(long)]
        feature: String,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        /// JSON lines, one per row
        #[arg(long)]
        json: bool,
    },
    /// Search time with and without causal rules
    Causal {
        /// Fixture name or directory with decision rules only
        #[arg(long)]
        non_causal: String,
        /// Fixture name or directory with decision and causal rules
        #[arg(long)]
        causal: String,
        #[arg(long, env = "RECOURSE_FIXTURE_DIR", default_value = "fixtures")]
        fixture_dir: PathBuf,
        #[command(flatten)]
        instance: InstanceArg,
        #[command(flatten)]
        controls: ControlArgs,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long)]
        json: bool,
    },
}

enum CliError {
    Usage(String),
    Api(ApiError),
    Workspace(WorkspaceError),
    Rules(RuleError),
    Dual(DualError),
    Bench(BenchError),
    Serve(String),
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Api(e) => e.code(),
            CliError::Workspace(_) => "invalid-workspace",
            CliError::Rules(_) => "invalid-rules",
            CliError::Dual(_) => "dual-error",
            CliError::Bench(_) => "bench-error",
            CliError::Serve(_) => "serve-error",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) | CliError::Serve(m) => m.clone(),
            CliError::Api(e) => e.to_string(),
            CliError::Workspace(e) => e.to_string(),
            CliError::Rules(e) => e.to_string(),
            CliError::Dual(e) => e.to_string(),
            CliError::Bench(e) => e.to_string(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    fn to_json(&self) -> Json {
        match self {
            CliError::Api(e) => e.to_json(),
            other => json!({ "error": { "code": other.code(), "message": other.message() } }),
        }
    }
}

impl From<ApiError> for CliError {
    fn from(e: ApiError) -> Self {
        CliError::Api(e)
    }
}

impl From<cfe::CfeError> for CliError {
    fn from(e: cfe::CfeError) -> Self {
        CliError::Api(e.into())
    }
}

impl From<WorkspaceError> for CliError {
    fn from(e: WorkspaceError) -> Self {
        match e {
            // Unreadable files named on the command line are usage errors.
            WorkspaceError::Io { .. } => CliError::Usage(e.to_string()),
            e => CliError::Workspace(e),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        CliError::Bench(e)
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    if path == Path::new("-") {
        return std::io::read_to_string(std::io::stdin()).map_err(|e| CliError::Usage(format!("stdin: {e}")));
    }
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// A fixture name, or a path to a fixture directory.
fn fixture_path(dir: &Path, name: &str) -> PathBuf {
    let direct = PathBuf::from(name);
    if direct.is_dir() && name.contains(std::path::MAIN_SEPARATOR) {
        direct
    } else {
        dir.join(name)
    }
}

impl Source {
    fn dir(&self) -> Option<PathBuf> {
        self.fixture.as_ref().map(|f| fixture_path(&self.fixture_dir, f))
    }

    fn file(&self, explicit: &Option<PathBuf>, name: &str, flag: &str) -> Result<PathBuf, CliError> {
        explicit
            .clone()
            .or_else(|| self.dir().map(|d| d.join(name)))
            .ok_or_else(|| CliError::Usage(format!("give {flag} or --fixture")))
    }

    fn rules_text(&self) -> Result<String, CliError> {
        read(&self.file(&self.rules, "rules.lp", "-r/--rules")?)
    }

    fn workspace(&self) -> Result<Workspace, CliError> {
        let schema_text = read(&self.file(&self.schema, "schema.json", "-s/--schema")?)?;
        let schema = recourse::schema::FeatureSchema::from_json(&schema_text)
            .map_err(|e| CliError::Workspace(WorkspaceError::Schema(e)))?;
        let name = self.fixture.clone().unwrap_or_else(|| "workspace".into());
        Ok(Workspace::load(&name, schema, &self.rules_text()?)?)
    }

    fn instance_json(&self, arg: &InstanceArg) -> Result<Json, CliError> {
        let path = self.file(&arg.instance, "instance.json", "-i/--instance")?;
        serde_json::from_str(&read(&path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

impl ControlArgs {
    fn spec(&self) -> Result<ControlSpec, CliError> {
        let mut spec = ControlSpec::new();
        let mut seen = std::collections::BTreeSet::new();
        for (names, c) in [
            (&self.immutable, Control::Immutable),
            (&self.must_change, Control::MustChange),
            (&self.must_increase, Control::MustIncrease),
            (&self.must_decrease, Control::MustDecrease),
        ] {
            for f in names.iter().map(|f| f.trim()).filter(|f| !f.is_empty()) {
                if !seen.insert(f.to_string()) {
                    return Err(CliError::Usage(format!("`{f}` is given more than one control")));
                }
                spec = spec.set(f, c);
            }
        }
        Ok(spec)
    }
}

fn emit(json: bool, payload: &Json, human: impl FnOnce() -> String) {
    if json {
        println!("{}", api::render(payload));
    } else {
        print!("{}", human());
    }
}

fn bench_out(json: bool, report: &BenchReport) {
    if json {
        print!("{}", report.to_json_lines());
    } else {
        print!("{}", report.to_table());
    }
}

fn run(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Classify { source, instance, json } => {
            let ws = source.workspace()?;
            let req = ClassifyRequest { instance: source.instance_json(&instance)? };
            let payload = api::classify(&ws, &req)?;
            emit(json, &payload, || {
                let inst = api::instance(&ws, &req.instance).expect("validated above");
                let c = cfe::classify(&ws, &inst).expect("classified above");
                text::classification(&c)
            });
        }
        Cmd::Explain { source, instance, controls, cost, limit, json } => {
            let ws = source.workspace()?;
            let req = ExplainRequest {
                instance: source.instance_json(&instance)?,
                controls: controls.spec()?,
                cost,
                limit: Some(limit),
            };
            if json {
                emit(true, &api::explain(&ws, &req, true)?, String::new);
            } else {
                let inst = api::instance(&ws, &req.instance)?;
                let spec = api::controls(&ws, &req.controls)?;
                let cap = api::resolve_limit(req.limit, true)?.unwrap_or(usize::MAX);
                let rs = cfe::counterfactuals(&ws, &inst, &spec, cost)?.take(cap).collect::<Result<Vec<_>, _>>()?;
                print!("{}", text::results(ws.schema(), &rs, false));
            }
        }
        Cmd::Interpolant { source, instance, controls, json } => {
            let ws = source.workspace()?;
            let req = InterpolantRequest { instance: source.instance_json(&instance)?, controls: controls.spec()? };
            if json {
                emit(true, &api::interpolant(&ws, &req)?, String::new);
            } else {
                let inst = api::instance(&ws, &req.instance)?;
                let spec = api::controls(&ws, &req.controls)?;
                print!("{}", text::interpolant(ws.schema(), &cfe::craig_interpolant(&ws, &inst, &spec)?));
            }
        }
        Cmd::Enumerate { source, limit, json } => {
            let ws = source.workspace()?;
            if json {
                emit(true, &api::enumerate(&ws, Some(limit), true)?, String::new);
            } else {
                let cap = api::resolve_limit(Some(limit), true)?.unwrap_or(usize::MAX);
                print!("{}", text::results(ws.schema(), &cfe::enumerate_transitions(&ws, cap)?, true));
            }
        }
        Cmd::Dualize { source, pred, json } => {
            let program = parse_program(&source.rules_text()?).map_err(CliError::Rules)?;
            let rules = match pred {
                Some(p) => {
                    let (name, arity) = p
                        .rsplit_once('/')
                        .and_then(|(n, a)| Some((n, a.parse::<usize>().ok()?)))
                        .ok_or_else(|| CliError::Usage(format!("--pred wants name/arity, got `{p}`")))?;
                    let key = PredKey::new(name, arity);
                    if !program.defines(&key) {
                        return Err(CliError::Usage(format!("no clauses for {key}")));
                    }
                    dualize_predicate(&program, &key).map_err(CliError::Dual)?
                }
                None => dualize_program(&program).map_err(CliError::Dual)?.duals().to_vec(),
            };
            let payload = json!({ "rules": rules.iter().map(|r| r.to_string()).collect::<Vec<_>>() });
            emit(json, &payload, || print_rules(&rules));
        }
        Cmd::Bench(BenchCmd::Scaling { source, instance, controls, feature, sizes, reps, json }) => {
            let ws = source.workspace()?;
            let inst = api::instance(&ws, &source.instance_json(&instance)?)?;
            let spec = api::controls(&ws, &controls.spec()?)?;
            bench_out(json, &bench::run_domain_scaling(&ws, &feature, &sizes, &inst, &spec, reps)?);
        }
        Cmd::Bench(BenchCmd::Causal { non_causal, causal, fixture_dir, instance, controls, reps, json }) => {
            let load = |name: &str| Workspace::load_dir(&fixture_path(&fixture_dir, name));
            let (nc, c) = (load(&non_causal)?, load(&causal)?);
            let src =
                Source { fixture: Some(causal.clone()), fixture_dir: fixture_dir.clone(), schema: None, rules: None };
            let factual = src.instance_json(&instance)?;
            bench_out(json, &bench::run_causal_comparison(&nc, &c, &factual, &controls.spec()?, reps)?);
        }
        Cmd::Serve { source, host, port, max_concurrent } => {
            let ws = Arc::new(source.workspace()?);
            let limit = max_concurrent.unwrap_or_else(server::default_concurrency);
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Serve(e.to_string()))?;
            rt.block_on(server::serve(ws, SocketAddr::new(host, port), limit))
                .map_err(|e| CliError::Serve(format!("{host}:{port}: {e}")))?;
        }
    }
    Ok(())
}

fn wants_json(cmd: &Cmd) -> bool {
    match cmd {
        Cmd::Classify { json, .. }
        | Cmd::Explain { json, .. }
        | Cmd::Interpolant { json, .. }
        | Cmd::Enumerate { json, .. }
        | Cmd::Dualize { json, .. } => *json,
        Cmd::Bench(BenchCmd::Scaling { json, .. }) | Cmd::Bench(BenchCmd::Causal { json, .. }) => *json,
        Cmd::Serve { .. } => false,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = wants_json(&cli.cmd);
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if json {
                println!("{}", api::render(&e.to_json()));
            } else {
                eprintln!("error: {}", e.message());
            }
            ExitCode::from(e.exit_code())
        }
    }
}
