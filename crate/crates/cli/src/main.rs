use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use macregions_cli::manifest::RunManifest;
use macregions_cli::verify;
use macregions_core::fme::{self, Assumptions};
use macregions_core::gaussian::{gaussian_capacity, GaussianModel, GaussianParams};
use macregions_core::sim::{self, SimConfig};
use macregions_core::{BoundKind, ChannelSpec, Error, FactoredLaw, RatePoint, RegionMode, SearchConfig, SymbolicSystem};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "macregions", version, about = "Rate regions of state-dependent MACs with degraded message sets")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Trace a bound's rate region; CSV of support samples plus a JSON sidecar.
    Region(RegionArgs),
    /// Sum capacity with joint inputs (Blahut-Arimoto).
    SumCapacity(SumArgs),
    /// Closed-form Gaussian capacities.
    Gaussian(GaussianArgs),
    /// Fourier-Motzkin projection of a rate system.
    Fme(FmeArgs),
    /// Monte Carlo error rates of the coding schemes.
    Simulate(SimArgs),
    /// Run the verification battery and print a pass/fail table.
    VerifyExamples(VerifyArgs),
    /// Channel file utilities.
    Channel {
        #[command(subcommand)]
        cmd: ChannelCmd,
    },
}

#[derive(Subcommand)]
enum ChannelCmd {
    /// Check that a channel file parses and is stochastic.
    Validate { path: PathBuf },
    /// Print a built-in channel as a channel file.
    Export {
        #[command(flatten)]
        channel: ChannelArg,
    },
}

#[derive(Args)]
struct ChannelArg {
    /// Channel JSON file.
    #[arg(long, value_name = "PATH", required_unless_present = "builtin", conflicts_with = "builtin")]
    channel: Option<PathBuf>,
    /// A built-in channel instead of a file.
    #[arg(long, value_name = "NAME")]
    builtin: Option<String>,
    /// Built-in channel parameter, e.g. `p=0.1`.
    #[arg(long = "param", value_name = "KEY=VALUE", requires = "builtin")]
    params: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    PentagonUnion,
    Decoupled,
}

#[derive(Args)]
struct RegionArgs {
    #[command(flatten)]
    channel: ChannelArg,
    #[arg(long, value_name = "BOUND")]
    bound: String,
    #[arg(long, value_enum, default_value = "pentagon-union")]
    mode: ModeArg,
    #[arg(long)]
    relax_constraint: bool,
    #[arg(long, value_name = "N")]
    lambda_points: Option<usize>,
    #[arg(long, value_name = "N")]
    restarts: Option<usize>,
    #[arg(long, value_name = "N")]
    card_v: Option<usize>,
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,
    /// CSV output; the JSON sidecar goes next to it with a `.json` extension.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SumArgs {
    #[command(flatten)]
    channel: ChannelArg,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GaussianArgs {
    #[arg(long, value_name = "MODEL")]
    model: String,
    #[arg(long = "P1")]
    p1: f64,
    #[arg(long = "P2")]
    p2: f64,
    #[arg(long = "N", default_value_t = 1.0)]
    n: f64,
    #[arg(long = "Q")]
    q: f64,
}

#[derive(Args)]
struct FmeArgs {
    /// A built-in system (appendixE, appendixJ).
    #[arg(long, value_name = "NAME", required_unless_present = "input", conflicts_with = "input")]
    system: Option<String>,
    /// A system in JSON form.
    #[arg(long, value_name = "PATH", requires = "eliminate")]
    input: Option<PathBuf>,
    #[arg(long, value_name = "PATH", requires = "input")]
    assumptions: Option<PathBuf>,
    /// Comma-separated elimination order.
    #[arg(long, value_name = "VARS", value_delimiter = ',')]
    eliminate: Vec<String>,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Scheme {
    BlockMarkov,
    ShannonStrategy,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    channel: ChannelArg,
    #[arg(long, value_enum, default_value = "block-markov")]
    scheme: Scheme,
    /// Law JSON for codebook generation; block-markov defaults to the
    /// helper law with `--helper-d`.
    #[arg(long, value_name = "PATH")]
    law: Option<PathBuf>,
    #[arg(long, default_value_t = 0.03)]
    helper_d: f64,
    #[arg(long, default_value_t = 0.0)]
    rc: f64,
    #[arg(long)]
    r1: f64,
    /// Block lengths; several values produce a sweep.
    #[arg(long = "n", value_delimiter = ',', required = true)]
    ns: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    blocks: usize,
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    #[arg(long, default_value_t = 500)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    t_hat: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    /// CSV sweep output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run only these checks.
    #[arg(long, value_delimiter = ',')]
    only: Vec<u32>,
    /// Print informational notes under each line.
    #[arg(long)]
    verbose: bool,
}

enum Failure {
    Usage(String),
    Run(Error),
    Acceptance,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.into())
    }
}

type Out = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Region(a) => region(a),
        Cmd::SumCapacity(a) => sum_capacity(a),
        Cmd::Gaussian(a) => gaussian(a),
        Cmd::Fme(a) => fme_cmd(a),
        Cmd::Simulate(a) => simulate(a),
        Cmd::VerifyExamples(a) => verify_examples(a),
        Cmd::Channel {
            cmd: ChannelCmd::Validate { path },
        } => validate_channel(&path),
        Cmd::Channel {
            cmd: ChannelCmd::Export { channel },
        } => export_channel(&channel),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Acceptance) => ExitCode::from(3),
    }
}

fn load_channel(arg: &ChannelArg, m: &mut RunManifest) -> Result<ChannelSpec, Failure> {
    if let Some(path) = &arg.channel {
        return Ok(ChannelSpec::from_json_str(&m.read_input(path)?)?);
    }
    let name = arg.builtin.as_deref().unwrap_or_default();
    let mut params = BTreeMap::new();
    for kv in &arg.params {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("parameter {kv} is not KEY=VALUE")))?;
        let v: f64 = v
            .parse()
            .map_err(|_| Failure::Usage(format!("parameter {k} has a non-numeric value {v}")))?;
        params.insert(k.to_string(), v);
    }
    Ok(macregions_core::builtin_channel(name, &params)?)
}

fn channel_echo(arg: &ChannelArg) -> Value {
    json!({"channel": arg.channel, "builtin": arg.builtin, "params": arg.params})
}

fn write_or_print(out: Option<&Path>, text: &str) -> Out {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

fn region(a: RegionArgs) -> Out {
    let t = Instant::now();
    let bound = BoundKind::parse(&a.bound).map_err(|e| Failure::Usage(e.to_string()))?;
    let defaults = SearchConfig::default();
    let cfg = SearchConfig {
        lambda_points: a.lambda_points.unwrap_or(defaults.lambda_points),
        restarts: a.restarts.unwrap_or(defaults.restarts),
        card_v: a.card_v,
        seed: a.seed,
        mode: match a.mode {
            ModeArg::PentagonUnion => RegionMode::PentagonUnion,
            ModeArg::Decoupled => RegionMode::Decoupled,
        },
        relax: a.relax_constraint,
        ..defaults
    };
    let mut config = channel_echo(&a.channel);
    config["bound"] = json!(bound.as_str());
    config["search"] = serde_json::to_value(&cfg).expect("config serializes");
    let mut m = RunManifest::new("region", config, Some(a.seed));
    let ch = load_channel(&a.channel, &mut m)?;
    let r = macregions_core::compute_region(&ch, bound, &cfg)?;
    m.wall_clock_s = t.elapsed().as_secs_f64();
    let csv = m.csv(&r.to_csv());
    match &a.out {
        Some(p) => {
            std::fs::write(p, csv)?;
            let side = json!({"manifest": m.to_json(), "region": r});
            std::fs::write(p.with_extension("json"), pretty(&side))?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn sum_capacity(a: SumArgs) -> Out {
    let t = Instant::now();
    let mut m = RunManifest::new("sum-capacity", channel_echo(&a.channel), None);
    let ch = load_channel(&a.channel, &mut m)?;
    let r = macregions_core::sum_capacity(&ch, &SearchConfig::default())?;
    m.wall_clock_s = t.elapsed().as_secs_f64();
    let v = json!({"value": r.value, "input": r.input, "manifest": m.to_json()});
    write_or_print(a.out.as_deref(), &pretty(&v))
}

fn gaussian(a: GaussianArgs) -> Out {
    let model = GaussianModel::parse(&a.model).map_err(|e| Failure::Usage(e.to_string()))?;
    let params = GaussianParams::new(a.p1, a.p2, a.q, a.n)?;
    let g = gaussian_capacity(model, &params)?;
    let v = json!({
        "model": model.as_str(),
        "params": params,
        "value": g.value,
        "rho_star": g.argmax_rho,
    });
    print!("{}", pretty(&v));
    Ok(())
}

fn fme_cmd(a: FmeArgs) -> Out {
    let stages = match &a.system {
        Some(name) => {
            if !fme::BUILTIN_SYSTEMS.contains(&name.as_str()) {
                return Err(Failure::Usage(format!(
                    "unknown system {name}; choose one of {}",
                    fme::BUILTIN_SYSTEMS.join(", ")
                )));
            }
            fme::run_builtin(name)?
        }
        None => {
            let path = a.input.as_ref().expect("clap requires --system or --input");
            let sys = SymbolicSystem::from_json(&read_json(path)?)?;
            let asm = match &a.assumptions {
                Some(p) => Assumptions::from_json(&read_json(p)?)?,
                None => Assumptions::default(),
            };
            let out = fme::run_elimination(&sys, &a.eliminate, &asm)?;
            vec![fme::FmeStage {
                name: "projected".into(),
                inequalities: out.render(),
                matches_golden: None,
            }]
        }
    };
    if a.json {
        print!("{}", pretty(&json!({ "stages": stages })));
        return Ok(());
    }
    for s in &stages {
        match s.matches_golden {
            Some(ok) => println!("# {} ({})", s.name, if ok { "matches golden" } else { "differs from golden" }),
            None => println!("# {}", s.name),
        }
        for l in &s.inequalities {
            println!("{l}");
        }
    }
    Ok(())
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Failure::Run(e.into()))
}

fn simulate(a: SimArgs) -> Out {
    let t = Instant::now();
    let mut config = channel_echo(&a.channel);
    config["scheme"] = json!(match a.scheme {
        Scheme::BlockMarkov => "block-markov",
        Scheme::ShannonStrategy => "shannon-strategy",
    });
    let mut m = RunManifest::new("simulate", config, Some(a.seed));
    let ch = load_channel(&a.channel, &mut m)?;
    let law: FactoredLaw = match &a.law {
        Some(p) => serde_json::from_str(&m.read_input(p)?).map_err(|e| Failure::Run(e.into()))?,
        None if a.scheme == Scheme::BlockMarkov => sim::helper_law(a.helper_d)?,
        None => return Err(Failure::Usage("--law is required for shannon-strategy".into())),
    };
    let cfg = SimConfig {
        n: a.ns[0],
        blocks: a.blocks,
        epsilon: a.epsilon,
        trials: a.trials,
        seed: a.seed,
        law,
        t: a.t,
        t_hat: a.t_hat,
        delta: a.delta,
        eta: a.eta,
    };
    m.config["sim"] = serde_json::to_value(&cfg).expect("config serializes");
    m.config["n"] = json!(a.ns);
    let rates = RatePoint::new(a.rc, a.r1);
    let rows = sim::sweep(&ch, rates, &cfg, &a.ns, a.scheme == Scheme::ShannonStrategy)?;
    m.wall_clock_s = t.elapsed().as_secs_f64();
    if let Some(p) = &a.out {
        std::fs::write(p, m.csv(&sim::sweep_csv(&rows)))?;
    }
    print!("{}", pretty(&json!({"manifest": m.to_json(), "results": rows})));
    Ok(())
}

fn verify_examples(a: VerifyArgs) -> Out {
    let ids: Vec<u32> = if a.only.is_empty() { verify::ALL.to_vec() } else { a.only.clone() };
    let mut failed = false;
    for id in ids {
        let c = verify::run(id).ok_or_else(|| Failure::Usage(format!("no check numbered {id}")))?;
        println!("{}", c.line());
        if a.verbose {
            for n in &c.notes {
                println!("    {n}");
            }
        }
        failed |= !c.pass;
    }
    if failed {
        Err(Failure::Acceptance)
    } else {
        Ok(())
    }
}

fn validate_channel(path: &Path) -> Out {
    let text = std::fs::read_to_string(path)?;
    let ch = ChannelSpec::from_json_str(&text)?;
    let z = ch.sizes;
    println!(
        "ok: {} |S|={} |X1|={} |X2|={} |Y|={} stateless={} state-deterministic={}",
        ch.name.as_deref().unwrap_or("(unnamed)"),
        z.s,
        z.x1,
        z.x2,
        z.y,
        ch.is_stateless(1e-12),
        ch.is_state_deterministic()
    );
    Ok(())
}

fn export_channel(arg: &ChannelArg) -> Out {
    let mut m = RunManifest::new("channel export", Value::Null, None);
    let ch = load_channel(arg, &mut m)?;
    println!("{}", ch.to_json_string());
    Ok(())
}
