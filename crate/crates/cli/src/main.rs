use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use riscon::experiments::{
    beam_pattern, default_rate_fixture, design_beam, rate_experiment, sweep, write_pattern_csv, write_rates_csv,
    write_sweep_csv, RateFixture, SweepBase, SweepParam, SweepSpec,
};
use riscon::graph::{algebraic_connectivity, build_laplacian, node_reliability, NetworkGraph};
use riscon::radio::{ArrayGeometry, Scenario};
use riscon::solve::{build_d2d_graph, generate_scenario, solve, ScenarioSpec, Scheme, SolveConfig, DEFAULT_AREA};

#[derive(Parser)]
#[command(name = "riscon", version, about = "Multi-RIS link selection and placement for D2D connectivity")]
struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scenario utilities.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    /// Select RIS-aided links and place the RISs.
    Solve(SolveArgs),
    /// Average λ2 over seeds while varying one parameter.
    Sweep(SweepArgs),
    /// Design a multi-beam profile and dump its PDAF pattern.
    Beamplot(BeamplotArgs),
    /// Exact versus approximate sum rates on a two-RIS fixture.
    Rates(RatesArgs),
    /// Graph utilities.
    #[command(subcommand)]
    Graph(GraphCommand),
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Drop UEs and RISs uniformly at random.
    Gen(GenArgs),
    /// Write the built-in rate fixture.
    Fixture {
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    ues: usize,
    #[arg(long)]
    riss: usize,
    /// Side of the square deployment area in metres.
    #[arg(long, default_value_t = DEFAULT_AREA)]
    area: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    elements: usize,
    #[arg(long, default_value_t = 0.5)]
    spacing_frac: f64,
    /// Config file whose `radio` table overrides the radio constants.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scheme: Option<Scheme>,
    /// Overrides the optimizer seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the augmented graph here.
    #[arg(long)]
    graph_out: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    param: SweepParam,
    /// Comma-separated values of the swept parameter.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<usize>,
    /// Number of seeds, 0..K.
    #[arg(long)]
    seeds: u64,
    #[arg(long, value_delimiter = ',', default_value = "proposed,single-beam,ris-free,distributed-small")]
    schemes: Vec<Scheme>,
    #[arg(long, default_value_t = 10)]
    ues: usize,
    #[arg(long, default_value_t = 3)]
    riss: usize,
    #[arg(long, default_value_t = 10)]
    elements: usize,
    #[arg(long, default_value_t = DEFAULT_AREA)]
    area: f64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BeamplotArgs {
    #[arg(long)]
    elements: usize,
    #[arg(long, default_value_t = 0.5)]
    spacing_frac: f64,
    #[arg(long, allow_hyphen_values = true)]
    aoa_deg: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    targets_deg: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write the designed phase profile as JSON.
    #[arg(long)]
    profile_out: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RatesArgs {
    /// Fixture JSON; the built-in fixture when omitted or `builtin`.
    #[arg(long)]
    fixture: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
    n_values: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    um: usize,
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Print λ2, the Fiedler vector and node reliabilities of a graph file.
    Inspect {
        graph: PathBuf,
    },
    /// Write the D2D graph of a scenario.
    D2d {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match cli.command {
        Command::Scenario(ScenarioCommand::Gen(args)) => scenario_gen(args),
        Command::Scenario(ScenarioCommand::Fixture { output }) => write_json(output.as_deref(), &default_rate_fixture()),
        Command::Solve(args) => run_solve(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Beamplot(args) => run_beamplot(args),
        Command::Rates(args) => run_rates(args),
        Command::Graph(GraphCommand::Inspect { graph }) => inspect_graph(&graph),
        Command::Graph(GraphCommand::D2d { scenario, output }) => {
            let scn: Scenario = read_json(&scenario)?;
            write_json(output.as_deref(), &build_d2d_graph(&scn)?)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<SolveConfig> {
    let Some(path) = path else {
        return Ok(SolveConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config: SolveConfig = match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
        Some("json") => serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
        _ => bail!("config {} must end in .toml or .json", path.display()),
    };
    config.validate()?;
    Ok(config)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(io::BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut out = open_output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn scenario_gen(args: GenArgs) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let mut spec = ScenarioSpec::new(args.ues, args.riss, args.area, args.seed).with_elements(args.elements);
    spec.spacing_fraction = args.spacing_frac;
    spec.constants = config.radio.unwrap_or_default();
    let scn = generate_scenario(&spec)?;
    info!("generated {} UEs and {} RISs in a {} m square", scn.ue_count(), scn.ris_count(), args.area);
    write_json(args.output.as_deref(), &scn)
}

fn run_solve(args: SolveArgs) -> Result<()> {
    let scn: Scenario = read_json(&args.scenario)?;
    let mut config = load_config(args.config.as_deref())?;
    if let Some(scheme) = args.scheme {
        config.scheme = scheme;
    }
    if let Some(seed) = args.seed {
        config.optimizer_seed = seed;
    }
    let result = solve(&scn, &config)?;
    info!(
        "{}: λ2 {} -> {} with {} RIS-aided links in {:.2?}",
        result.scheme,
        result.lambda2_initial,
        result.lambda2_final,
        result.links_added(),
        result.wall_time
    );
    if let Some(path) = args.graph_out.as_deref() {
        write_json(Some(path), &result.graph)?;
    }
    write_json(args.output.as_deref(), &result)
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let spec = SweepSpec {
        param: args.param,
        values: args.values,
        seeds: args.seeds,
        schemes: args.schemes,
        base: SweepBase {
            ues: args.ues,
            riss: args.riss,
            elements: args.elements,
            area: args.area,
            solve: load_config(args.config.as_deref())?,
        },
    };
    let rows = sweep(&spec)?;
    write_sweep_csv(&rows, open_output(args.output.as_deref())?)?;
    Ok(())
}

fn run_beamplot(args: BeamplotArgs) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let carrier = config.radio.unwrap_or_default().carrier;
    let geometry = ArrayGeometry::for_carrier(args.elements, args.spacing_frac, carrier)?;
    let outcome = design_beam(geometry, args.aoa_deg, &args.targets_deg, &config.ga.with_seed(args.seed))?;
    info!("worst on-target PDAF {} of {}", outcome.best_fitness, (args.elements * args.elements) as f64);
    if let Some(path) = args.profile_out.as_deref() {
        write_json(Some(path), &outcome.best_profile)?;
    }
    let pattern = beam_pattern(&geometry, &outcome.best_profile, args.aoa_deg.to_radians())?;
    write_pattern_csv(&pattern, open_output(args.output.as_deref())?)?;
    Ok(())
}

fn run_rates(args: RatesArgs) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let fixture: RateFixture = match args.fixture.as_deref() {
        None => default_rate_fixture(),
        Some(p) if p.as_os_str() == "builtin" => default_rate_fixture(),
        Some(p) => read_json(p)?,
    };
    if !(1..=2).contains(&args.um) {
        bail!("--um must be 1 or 2");
    }
    let rows = rate_experiment(&fixture, &args.n_values, args.um, args.seeds, &config.ga)?;
    write_rates_csv(&rows, open_output(args.output.as_deref())?)?;
    Ok(())
}

fn inspect_graph(path: &Path) -> Result<()> {
    let g: NetworkGraph = read_json(path)?;
    let fiedler = algebraic_connectivity(&build_laplacian(&g)?)?;
    let reliability = if g.vertex_count() >= 3 { Some(node_reliability(&g)?.0) } else { None };
    let report = serde_json::json!({
        "vertices": g.vertex_count(),
        "edges": g.edges().len(),
        "connected": g.is_connected(),
        "lambda2": fiedler.lambda2,
        "fiedler_vector": fiedler.vector,
        "simple": fiedler.simple,
        "reliability": reliability,
    });
    write_json(None, &report)
}
