mod manifest;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use contraflow::network::{apply_reversal, check_constraints, NetworkError, ReversalMask};
use contraflow::optimizer::{run, write_history_csv, EvalCache, GaConfig, Problem};
use contraflow::scenario::{generate_base_flow, generate_grid, generate_wave, FlowSpec, GridSpec, WaveSpec};
use contraflow::seed;
use contraflow::simulation::{average_speed, build_trips, simulate, SimConfig, TrafficDemand, Window};

use manifest::{resolve, RunManifest};

#[derive(Parser)]
#[command(name = "contraflow", version, about = "Lane-reversal optimization on simulated road networks")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a grid network, base flow and traffic wave plus a manifest.
    Generate(GenerateArgs),
    /// Simulate one reversal mask and write per-vehicle results.
    Simulate(SimulateArgs),
    /// Run the multi-objective optimizer and write the Pareto archive.
    Optimize(OptimizeArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    #[arg(long)]
    vehicles: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 200.0)]
    block_length: f64,
    #[arg(long, default_value_t = 2)]
    lanes: usize,
    #[arg(long, default_value_t = 13.9)]
    vmax: f64,
    #[arg(long, default_value_t = 1.0)]
    reversible_fraction: f64,
    /// Number of distinct OD pairs; omit to draw a fresh pair per vehicle.
    #[arg(long)]
    od_pairs: Option<usize>,
    /// Base departures are spread over [0, flow-window).
    #[arg(long, default_value_t = 3600.0)]
    flow_window: f64,
    /// Number of OD pairs hit by the wave; 0 disables the wave.
    #[arg(long, default_value_t = 1)]
    hot_pairs: usize,
    #[arg(long, default_value_t = 3.0)]
    wave_multiplier: f64,
    #[arg(long, default_value_t = 0.0)]
    wave_start: f64,
    #[arg(long, default_value_t = 900.0)]
    wave_end: f64,
    #[arg(long, default_value_t = 3600.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    network: Option<PathBuf>,
    #[arg(long)]
    demand: Option<PathBuf>,
    /// Output directory; defaults to the manifest's, else the current one.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Command seed; overrides the seeds stored in the manifest.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Reversal mask as a 0/1 string; defaults to all zeros.
    #[arg(long)]
    mask: Option<String>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    pop: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    /// Crossover rate (presets 0.10, 0.25, 0.50).
    #[arg(long)]
    pc: Option<f64>,
    /// Mutation rate (presets 0.05, 0.10, 0.15).
    #[arg(long)]
    pm: Option<f64>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    z2_cap: Option<usize>,
    /// Share of the initial population seeded near the wave routes.
    #[arg(long)]
    seed_near_wave: Option<f64>,
    /// Comma-separated generations at which to snapshot the archive.
    #[arg(long, value_delimiter = ',')]
    snapshot_gens: Option<Vec<usize>>,
    /// Worker threads for evaluation; defaults to available cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Preload evaluations from an earlier cache.csv.
    #[arg(long)]
    cache: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Optimize(a) => optimize(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("writing {}", path.display()))?))
}

fn generate(a: GenerateArgs) -> Result<()> {
    let grid = GridSpec {
        rows: a.rows,
        cols: a.cols,
        block_length: a.block_length,
        lanes_per_direction: a.lanes,
        vmax: a.vmax,
        reversible_fraction: a.reversible_fraction,
        seed: seed::derive(a.seed, "grid"),
    };
    grid.validate()?;
    let sim = SimConfig { horizon: a.horizon, sigma: a.sigma, seed: seed::derive(a.seed, "sim"), ..Default::default() };
    sim.validate()?;

    let network = generate_grid(&grid)?;
    let od = generate_base_flow(
        &network,
        &FlowSpec {
            vehicles_total: a.vehicles,
            od_pairs: a.od_pairs,
            horizon: a.flow_window,
            seed: seed::derive(a.seed, "flow"),
        },
    )?;
    let hot_pairs = a.hot_pairs.min(od.entries.len());
    let wave = if hot_pairs == 0 {
        Default::default()
    } else {
        generate_wave(
            &od,
            &WaveSpec {
                num_hot_od_pairs: hot_pairs,
                demand_multiplier: a.wave_multiplier,
                window: Window(a.wave_start, a.wave_end),
                seed: seed::derive(a.seed, "wave"),
            },
        )?
        .0
    };
    let demand = TrafficDemand { od, wave };

    create_dir(&a.out)?;
    fs::write(a.out.join("network.json"), network.to_json() + "\n")?;
    fs::write(a.out.join("demand.json"), demand.to_json() + "\n")?;
    let manifest = RunManifest {
        network: "network.json".into(),
        demand: "demand.json".into(),
        sim,
        ga: GaConfig { seed: seed::derive(a.seed, "ga"), ..Default::default() },
        out: ".".into(),
        seed: a.seed,
    };
    manifest.write(&a.out.join(manifest::FILE_NAME))?;

    println!(
        "nodes={} roads={} lanes={} reversible={} od_entries={} vehicles={}",
        grid.node_count(),
        grid.road_count(),
        grid.lane_count(),
        network.reversible_count(),
        demand.od.entries.len(),
        a.vehicles,
    );
    Ok(())
}

/// Loads inputs and applies the shared overrides.
fn load(i: &Inputs) -> Result<(manifest::Inputs, PathBuf)> {
    let mut inputs = resolve(i.manifest.as_deref(), i.network.as_deref(), i.demand.as_deref())?;
    if let Some(s) = i.seed {
        inputs.sim.seed = seed::derive(s, "sim");
        inputs.ga.seed = seed::derive(s, "ga");
    }
    if let Some(h) = i.horizon {
        inputs.sim.horizon = h;
    }
    if let Some(s) = i.sigma {
        inputs.sim.sigma = s;
    }
    inputs.sim.validate()?;
    let out = i.out.clone().or_else(|| inputs.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    Ok((inputs, out))
}

fn simulate_cmd(a: SimulateArgs) -> Result<()> {
    let (inputs, out) = load(&a.inputs)?;
    let n = inputs.network.reversible_count();
    let mask: ReversalMask = match &a.mask {
        Some(s) => s.parse()?,
        None => ReversalMask::zeros(n),
    };
    if mask.len() != n {
        return Err(NetworkError::MaskLength { expected: n, got: mask.len() }.into());
    }
    let violations = check_constraints(&mask, &inputs.network.constraints)?;
    if !violations.is_empty() {
        return Err(NetworkError::Infeasible(violations).into());
    }

    let problem = Problem::new(inputs.network, inputs.demand, inputs.sim);
    let net = apply_reversal(&problem.network, &mask)?;
    let plan = build_trips(&problem.demand, &net, problem.trip_seed(0))?;
    let cfg = SimConfig { seed: problem.noise_seed(&mask, 0), ..problem.sim.clone() };
    let result = simulate(&net, &plan, &cfg)?;
    let z1 = average_speed(&result)?;

    create_dir(&out)?;
    result.write_csv(create(&out.join("vehicles.csv"))?)?;
    println!("Z1={z1:.6} Z2={}", mask.count_ones());
    Ok(())
}

fn optimize(a: OptimizeArgs) -> Result<()> {
    let (inputs, out) = load(&a.inputs)?;
    let mut ga = inputs.ga;
    if let Some(v) = a.pop {
        ga.pop_size = v;
    }
    if let Some(v) = a.generations {
        ga.generations = v;
    }
    if let Some(v) = a.pc {
        ga.crossover_rate = v;
    }
    if let Some(v) = a.pm {
        ga.mutation_rate = v;
    }
    if let Some(v) = a.replications {
        ga.replications = v;
    }
    if a.z2_cap.is_some() {
        ga.z2_cap = a.z2_cap;
    }
    if let Some(v) = a.seed_near_wave {
        ga.wave_seed_fraction = v;
    }
    if let Some(v) = a.snapshot_gens {
        ga.snapshot_generations = v;
    }
    ga.validate()?;

    let cache = match &a.cache {
        Some(path) => {
            EvalCache::read_csv(File::open(path).with_context(|| format!("reading {}", path.display()))?)?
        }
        None => EvalCache::new(),
    };
    let problem = Problem::new(inputs.network, inputs.demand, inputs.sim);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs.unwrap_or(0)).build()?;
    let result = pool.install(|| run(&problem, &ga, &cache))?;

    create_dir(&out)?;
    result.archive.write_csv(create(&out.join("pareto.csv"))?)?;
    write_history_csv(&result.history, create(&out.join("history.csv"))?)?;
    for (g, snapshot) in &result.snapshots {
        snapshot.write_csv(create(&out.join(format!("pareto_gen{g}.csv")))?)?;
    }
    cache.write_csv(create(&out.join("cache.csv"))?)?;

    println!(
        "archive={} generations={} cache_hits={} cache_misses={} simulations={}",
        result.archive.len(),
        ga.generations,
        cache.hits(),
        cache.misses(),
        cache.simulations(),
    );
    Ok(())
}
