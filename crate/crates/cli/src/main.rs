mod table;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use randcstar_core::graphs::{double_to_digraph, kirchberg_predicates, sample_regular_multigraph, Multigraph};
use randcstar_core::harness::{
    emit_report, run_experiment, trial_rng, ExperimentSpec, ReportFormat, RunOptions,
    write_report,
};
use randcstar_core::ktheory::{k_groups, sylow_component};
use randcstar_core::markov::{
    absorption_probability, classify_chain, max_not_exceeding_probability, AbsorptionMode, Boundary,
    InitialDistribution, Probability, TransitionSpec, WalkOptions, Walker,
};
use randcstar_core::ratio::{format_ratio, parse_ratio, to_f64};
use randcstar_core::simplex::{extremal_traces_at_most_prob, sample_tower, Measure};
use randcstar_core::uhf::{prob_bounded_prime, prob_finite_dimensional, sample_uhf};
use randcstar_core::villadsen::{
    ccdf_r, expected_r, tame_in_window, zstable_probability, BetaWalkSpec, QFamily, RocSampler, StartDistribution,
};

use table::Table;

#[derive(Parser)]
#[command(name = "randcstar", version, about = "Random inductive-limit constructions: sampling, exact probabilities and experiments")]
struct Cli {
    /// Master seed; trial t draws from stream t of this seed.
    #[arg(long, global = true, env = "RANDCSTAR_SEED")]
    seed: Option<u64>,
    /// Number of samples or trials.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Worker threads for experiments (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Birth-death chains on the non-negative integers.
    #[command(subcommand)]
    Markov(MarkovCmd),
    /// Random UHF algebras driven by a chain.
    #[command(subcommand)]
    Uhf(UhfCmd),
    /// Random inductive limits of simplices.
    #[command(subcommand)]
    Simplex(SimplexCmd),
    /// Villadsen-type random walks and their radius of comparison.
    #[command(subcommand)]
    Villadsen(VilladsenCmd),
    /// Random regular multigraphs and their graph algebras.
    #[command(subcommand)]
    Graph(GraphCmd),
    /// Declarative experiments comparing simulation with exact values.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
}

#[derive(Args)]
struct ChainArgs {
    /// Constant up-probability.
    #[arg(long, default_value = "1/2", conflicts_with = "chain")]
    p: String,
    /// Probability of stepping from 0 to -1; omit for a reflecting chain.
    #[arg(long, conflicts_with = "chain")]
    q0: Option<String>,
    /// JSON file holding a full chain description.
    #[arg(long)]
    chain: Option<PathBuf>,
}

impl ChainArgs {
    fn build(&self) -> Result<TransitionSpec> {
        if let Some(path) = &self.chain {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            return serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()));
        }
        let p = parse_ratio(&self.p)?;
        Ok(match &self.q0 {
            Some(q0) => TransitionSpec::absorbing(p, parse_ratio(q0)?)?,
            None => TransitionSpec::reflecting(p)?,
        })
    }
}

#[derive(Args)]
struct InitialArgs {
    /// Starting state.
    #[arg(long, default_value_t = 0, conflicts_with = "initial")]
    start: u64,
    /// Initial distribution as JSON, e.g. '{"0":"1/2","1":"1/2"}'.
    #[arg(long)]
    initial: Option<String>,
}

impl InitialArgs {
    fn build(&self) -> Result<InitialDistribution> {
        match &self.initial {
            Some(text) => serde_json::from_str(text).context("parsing --initial"),
            None => Ok(InitialDistribution::delta(self.start)),
        }
    }
}

#[derive(Args)]
struct WalkArgs {
    #[arg(long, default_value_t = 100_000)]
    max_steps: u64,
    /// Stop once absorption from the current state has probability below this.
    #[arg(long)]
    escape: Option<f64>,
}

#[derive(Subcommand)]
enum MarkovCmd {
    /// Recurrence classification of a reflecting chain.
    Classify {
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Probability of absorption (or of never returning to 0 when reflecting).
    Absorb {
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        states: Vec<u64>,
    },
    /// Probability that the walk never exceeds k before absorption.
    Hitmax {
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        states: Vec<u64>,
    },
}

#[derive(Subcommand)]
enum UhfCmd {
    /// Sample supernatural numbers.
    Sample {
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        initial: InitialArgs,
        #[command(flatten)]
        walk: WalkArgs,
    },
    /// Exact probabilities of finite dimension and of bounded prime support.
    Prob {
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        initial: InitialArgs,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
        k: Vec<u64>,
    },
}

#[derive(Subcommand)]
enum SimplexCmd {
    /// Sample a tower of simplices with its connecting maps.
    Sample {
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        initial: InitialArgs,
        #[arg(long, value_enum, default_value_t = MeasureArg::Cantor)]
        measure: MeasureArg,
        #[arg(long, default_value_t = 1000)]
        max_steps: u64,
    },
    /// Probability that the limit has at most k extreme traces.
    Traces {
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        initial: InitialArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MeasureArg {
    Bauer,
    Cantor,
    Poulsen,
}

impl From<MeasureArg> for Measure {
    fn from(m: MeasureArg) -> Self {
        match m {
            MeasureArg::Bauer => Measure::Bauer,
            MeasureArg::Cantor => Measure::Cantor,
            MeasureArg::Poulsen => Measure::Poulsen,
        }
    }
}

#[derive(Args)]
struct BetaArgs {
    #[arg(long, allow_hyphen_values = true)]
    beta: f64,
    /// W0 is 2^power.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true, conflicts_with = "start")]
    power: i32,
    /// Distribution of W0 as JSON, e.g. '{"0":0.25,"2^1":0.75}'.
    #[arg(long)]
    start: Option<String>,
}

impl BetaArgs {
    fn build(&self) -> Result<BetaWalkSpec> {
        let start = match &self.start {
            Some(text) => serde_json::from_str(text).context("parsing --start")?,
            None => StartDistribution::power(self.power)?,
        };
        let spec = BetaWalkSpec::new(self.beta, start);
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args)]
struct FamilyArgs {
    /// Constant exotic-choice probability.
    #[arg(long, conflicts_with = "inverse_square")]
    q: Option<String>,
    /// q_1 = 1/2 and q_i = 1 - 1/i^2 afterwards.
    #[arg(long)]
    inverse_square: bool,
}

impl FamilyArgs {
    fn build(&self) -> Result<QFamily> {
        let family = match (&self.q, self.inverse_square) {
            (_, true) => QFamily::OneMinusInverseSquare,
            (Some(q), false) => QFamily::ConstantQ(parse_ratio(q)?),
            (None, false) => bail!("give --q or --inverse-square"),
        };
        family.validate()?;
        Ok(family)
    }
}

#[derive(Subcommand)]
enum VilladsenCmd {
    /// Sample (w0, r) pairs.
    Sample {
        #[command(flatten)]
        walk: BetaArgs,
    },
    /// P(R > r) at the given points.
    Ccdf {
        #[command(flatten)]
        walk: BetaArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        r: Vec<f64>,
    },
    /// Expected radius of comparison.
    Mean {
        #[command(flatten)]
        walk: BetaArgs,
    },
    /// Probability of Z-stability; with --trials, also the tame-choice frequency in a window.
    Zstable {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [500, 1000])]
        window: Vec<u64>,
    },
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long, default_value_t = 100)]
    vertices: usize,
    #[arg(long, default_value_t = 3)]
    degree: usize,
}

#[derive(Subcommand)]
enum GraphCmd {
    /// Sample regular multigraphs as edge lists.
    Sample {
        #[command(flatten)]
        graph: GraphArgs,
    },
    /// K-theory and structural predicates of the doubled graph algebra.
    Ktheory {
        #[command(flatten)]
        graph: GraphArgs,
        /// Read one multigraph edge list instead of sampling.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Primes whose Sylow subgroup of K0 is reported.
        #[arg(long, value_delimiter = ',', default_value = "3")]
        primes: Vec<u64>,
    },
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Run an experiment config; exits with status 1 if a comparison fails.
    Run {
        config: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Record wall-clock runtime in the report.
        #[arg(long)]
        runtime: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn probability_fields(p: &Probability) -> [Value; 4] {
    [
        json!(p.value()),
        json!(p.lo()),
        json!(p.hi()),
        p.exact().map_or(Value::Null, |r| json!(format_ratio(r))),
    ]
}

fn dispatch(cli: &Cli) -> Result<bool> {
    let seed = cli.seed.unwrap_or(0);
    let mut stdout = io::stdout().lock();
    let table = match &cli.command {
        Command::Markov(cmd) => markov(cmd)?,
        Command::Uhf(cmd) => uhf(cmd, seed, cli.trials.unwrap_or(10))?,
        Command::Simplex(cmd) => simplex(cmd, seed, cli.trials.unwrap_or(1))?,
        Command::Villadsen(cmd) => villadsen(cmd, seed, cli.trials)?,
        Command::Graph(cmd) => graph(cmd, seed, cli.trials.unwrap_or(1))?,
        Command::Experiment(ExperimentCmd::Run { config, output, runtime }) => {
            let mut spec = ExperimentSpec::load(config)?;
            if let Some(s) = cli.seed {
                spec.master_seed = s;
            }
            if let Some(t) = cli.trials {
                spec.trials = t;
            }
            let options = RunOptions {
                threads: cli.threads,
                record_runtime: *runtime,
            };
            let report = run_experiment(&spec, &options)?;
            let format = match cli.format {
                Format::Json => ReportFormat::Json,
                Format::Csv => ReportFormat::Csv,
            };
            match output {
                Some(path) => write_report(&report, format, path)?,
                None => emit_report(&report, format, &mut stdout)?,
            }
            if !report.all_passed {
                eprintln!("some comparisons fell outside their acceptance bands");
            }
            return Ok(report.all_passed);
        }
    };
    table.write(cli.format, &mut stdout)?;
    stdout.flush()?;
    Ok(true)
}

fn markov(cmd: &MarkovCmd) -> Result<Table> {
    Ok(match cmd {
        MarkovCmd::Classify { chain } => {
            let spec = chain.build()?;
            let c = classify_chain(&spec)?;
            let mut t = Table::new(["kind", "diagnostics"]);
            t.push(vec![serde_json::to_value(c.kind)?, serde_json::to_value(&c.diagnostics)?]);
            t
        }
        MarkovCmd::Absorb { chain, states } => {
            let spec = chain.build()?;
            let mode = match spec.boundary() {
                Boundary::Reflecting => AbsorptionMode::NeverReachZero,
                Boundary::Absorbing(_) => AbsorptionMode::AbsorbAtMinusOne,
            };
            let mut t = Table::new(["state", "mode", "probability", "lo", "hi", "exact"]);
            for &i in states {
                let p = absorption_probability(&spec, i, mode)?;
                let mut row = vec![json!(i), serde_json::to_value(mode)?];
                row.extend(probability_fields(&p));
                t.push(row);
            }
            t
        }
        MarkovCmd::Hitmax { chain, k, states } => {
            let spec = chain.build()?;
            let mut t = Table::new(["k", "state", "probability", "exact"]);
            for &bound in k {
                for &i in states.iter().filter(|&&i| i <= bound) {
                    let p = max_not_exceeding_probability(&spec, bound, i)?;
                    t.push(vec![json!(bound), json!(i), json!(to_f64(&p)), json!(format_ratio(&p))]);
                }
            }
            t
        }
    })
}

fn uhf(cmd: &UhfCmd, seed: u64, trials: u64) -> Result<Table> {
    Ok(match cmd {
        UhfCmd::Sample { chain, initial, walk } => {
            let spec = chain.build()?;
            let initial = initial.build()?;
            let mut options = WalkOptions::new(walk.max_steps);
            if let Some(eps) = walk.escape {
                options = options.with_escape(eps);
            }
            let walker = Walker::new(&spec, options)?;
            let mut t = Table::new(["trial", "start", "stop", "steps", "largest_prime", "supernatural", "matrix_size"]);
            for trial in 0..trials {
                let s = sample_uhf(&walker, &initial, &mut trial_rng(seed, trial));
                t.push(vec![
                    json!(trial),
                    json!(s.path.states[0]),
                    serde_json::to_value(s.path.stop)?,
                    json!(s.path.truncated_at),
                    json!(s.number.largest_prime()),
                    json!(s.number.to_string()),
                    s.number.matrix_size().map_or(Value::Null, |n| json!(n.to_string())),
                ]);
            }
            t
        }
        UhfCmd::Prob { chain, initial, k } => {
            let spec = chain.build()?;
            let initial = initial.build()?;
            let mut t = Table::new(["quantity", "k", "probability", "lo", "hi", "exact"]);
            let mut row = vec![json!("finite_dimensional"), Value::Null];
            row.extend(probability_fields(&prob_finite_dimensional(&spec, &initial)?));
            t.push(row);
            for &bound in k {
                let p = prob_bounded_prime(&spec, &initial, bound)?;
                let v = to_f64(&p);
                t.push(vec![json!("bounded_prime"), json!(bound), json!(v), json!(v), json!(v), json!(format_ratio(&p))]);
            }
            t
        }
    })
}

fn simplex(cmd: &SimplexCmd, seed: u64, trials: u64) -> Result<Table> {
    Ok(match cmd {
        SimplexCmd::Sample { chain, initial, measure, max_steps } => {
            let spec = chain.build()?;
            let initial = initial.build()?;
            let mut t = Table::new(["trial", "level", "dim", "step", "row"]);
            for trial in 0..trials {
                let tower = sample_tower(&spec, &initial, (*measure).into(), *max_steps, &mut trial_rng(seed, trial))?;
                for (level, r) in tower.records().into_iter().enumerate() {
                    let row = r.row.map_or(Value::Null, |v| {
                        json!(v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "))
                    });
                    t.push(vec![json!(trial), json!(level), json!(r.dim), json!(r.step), row]);
                }
            }
            t
        }
        SimplexCmd::Traces { chain, initial, k } => {
            let spec = chain.build()?;
            let initial = initial.build()?;
            let mut t = Table::new(["k", "probability", "exact"]);
            for &bound in k {
                let p = extremal_traces_at_most_prob(&spec, &initial, bound)?;
                t.push(vec![json!(bound), json!(to_f64(&p)), json!(format_ratio(&p))]);
            }
            t
        }
    })
}

fn villadsen(cmd: &VilladsenCmd, seed: u64, trials: Option<u64>) -> Result<Table> {
    Ok(match cmd {
        VilladsenCmd::Sample { walk } => {
            let sampler = RocSampler::new(&walk.build()?)?;
            let mut t = Table::new(["w0", "r"]);
            for trial in 0..trials.unwrap_or(1000) {
                let s = sampler.sample(&mut trial_rng(seed, trial));
                t.push(vec![json!(s.w0), json!(s.r)]);
            }
            t
        }
        VilladsenCmd::Ccdf { walk, r } => {
            let spec = walk.build()?;
            let mut t = Table::new(["r", "ccdf"]);
            for &x in r {
                t.push(vec![json!(x), json!(ccdf_r(&spec, x)?)]);
            }
            t
        }
        VilladsenCmd::Mean { walk } => {
            let spec = walk.build()?;
            let mut t = Table::new(["beta", "mean"]);
            t.push(vec![json!(spec.beta), json!(expected_r(&spec)?)]);
            t
        }
        VilladsenCmd::Zstable { family, window } => {
            let family = family.build()?;
            let (lo, hi) = (window[0], window[1]);
            if lo >= hi {
                bail!("window must satisfy lo < hi");
            }
            let p = zstable_probability(&family)?;
            let mut t = Table::new(["probability", "exact", "window_lo", "window_hi", "trials", "tame_frequency"]);
            let (n, freq) = match trials {
                Some(n) if n > 0 => {
                    let hits = (0..n).filter(|&trial| tame_in_window(&family, lo, hi, &mut trial_rng(seed, trial))).count();
                    (json!(n), json!(hits as f64 / n as f64))
                }
                _ => (Value::Null, Value::Null),
            };
            t.push(vec![json!(to_f64(&p)), json!(format_ratio(&p)), json!(lo), json!(hi), n, freq]);
            t
        }
    })
}

fn graph(cmd: &GraphCmd, seed: u64, trials: u64) -> Result<Table> {
    Ok(match cmd {
        GraphCmd::Sample { graph } => {
            let mut t = Table::new(["sample", "u", "v"]);
            for trial in 0..trials {
                let g = sample_regular_multigraph(graph.vertices, graph.degree, &mut trial_rng(seed, trial))?;
                for &(u, v) in &g.edges {
                    t.push(vec![json!(trial), json!(u), json!(v)]);
                }
            }
            t
        }
        GraphCmd::Ktheory { graph, input, primes } => {
            let graphs: Vec<Multigraph> = match input {
                Some(path) => {
                    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    vec![Multigraph::from_edge_list(&text).with_context(|| format!("parsing {}", path.display()))?]
                }
                None => (0..trials)
                    .map(|trial| sample_regular_multigraph(graph.vertices, graph.degree, &mut trial_rng(seed, trial)))
                    .collect::<randcstar_core::Result<_>>()?,
            };
            let mut columns: Vec<String> = ["sample", "k0", "k1_rank", "simple", "purely_infinite", "has_sink"]
                .map(String::from)
                .to_vec();
            columns.extend(primes.iter().map(|p| format!("sylow_{p}")));
            let mut t = Table::new(columns);
            for (i, g) in graphs.iter().enumerate() {
                let d = double_to_digraph(g);
                let preds = kirchberg_predicates(&d);
                let k = k_groups(&d)?;
                let mut row = vec![
                    json!(i),
                    json!(k.k0.to_string()),
                    json!(k.k1_rank),
                    json!(preds.simple),
                    json!(preds.purely_infinite),
                    json!(preds.has_sink),
                ];
                for &p in primes {
                    row.push(json!(sylow_component(&k.k0, p)?.to_string()));
                }
                t.push(row);
            }
            t
        }
    })
}
