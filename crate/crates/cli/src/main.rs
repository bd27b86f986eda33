use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_rational::Ratio;

use rasim::analysis::{de_threshold, density_evolution, load_at_target_plr, sweep};
use rasim::model::{
    approx_normalized_energy_efficiency, mean_arrival_rate, processing_gain, FrameGeometry,
    PhyProfile, Scheme,
};
use rasim::scenario::Scenario;
use rasim::slotted::{tally_cardinalities, DegreeDistribution};
use rasim::traffic::{collision_cardinality_pmf, slot_selection_probability, TrafficModel};
use rasim::Error;

#[derive(Parser)]
#[command(
    name = "rasim",
    version,
    about = "Random access with SIC: simulation and analysis"
)]
struct Cli {
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the load sweep described by a scenario file and write CSV.
    Sweep {
        scenario: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Density-evolution threshold and asymptotic loss for a degree distribution
    /// such as "0.5x2+0.28x3+0.22x8".
    Devol {
        pmf: String,
        /// Loads at which to tabulate the asymptotic loss ratio, as start:stop:step.
        #[arg(long, default_value = "0.1:1.0:0.05")]
        grid: String,
    },
    /// Processing gain and normalized energy efficiency of scheme profiles.
    Table {
        /// name,M,r,SF,N_slots,N_rep[,T] with r as a fraction, e.g. CRDSA,4,1/3,1,128,2
        #[arg(long = "row")]
        rows: Vec<String>,
    },
    /// Empirical against analytic distribution of the number of transmissions per slot.
    Slotdist {
        scenario: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        frames: u64,
        /// Load to use instead of the first point of the scenario grid.
        #[arg(long)]
        load: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_configuration() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

const DEFAULT_TABLE: [&str; 4] = [
    "CRDSA,4,1/3,1,128,2",
    "IRSA-2,4,1/3,1,128,3.5",
    "CSA,4,1/2,1,128,2",
    "E-SSA,2,1/3,64,1,1",
];

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(3);
        }
    }
    let result = match cli.command {
        Command::Sweep {
            scenario,
            output,
            seed,
        } => cmd_sweep(&scenario, output.as_deref(), seed),
        Command::Devol { pmf, grid } => cmd_devol(&pmf, &grid),
        Command::Table { rows } => cmd_table(&rows),
        Command::Slotdist {
            scenario,
            frames,
            load,
            seed,
        } => cmd_slotdist(&scenario, frames, load, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn cmd_sweep(path: &Path, output: Option<&Path>, seed: Option<u64>) -> Result<(), Failure> {
    let scenario = Scenario::from_path(path)?;
    let seed = seed.unwrap_or(scenario.seed);
    let result = sweep(
        &scenario.config,
        &scenario.grid,
        scenario.frames,
        scenario.stop,
        seed,
    )?;
    match output {
        Some(out) => {
            let file = File::create(out)
                .map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
            let mut w = BufWriter::new(file);
            result.write_csv(&mut w)?;
            w.flush()?;
        }
        None => result.write_csv(io::stdout().lock())?,
    }
    match load_at_target_plr(&result, 1e-3) {
        Ok(g) => log::info!("load at PLR 1e-3: {g}"),
        Err(e) => log::info!("{e}"),
    }
    Ok(())
}

fn parse_range(text: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Config(format!("grid \"{text}\" is not start:stop:step"));
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    Ok(rasim::scenario::load_grid(start, stop, step)?)
}

fn cmd_devol(pmf: &str, grid: &str) -> Result<(), Failure> {
    let dist: DegreeDistribution = pmf.parse()?;
    let grid = parse_range(grid)?;
    let mut out = io::stdout().lock();
    writeln!(out, "distribution: {dist}")?;
    writeln!(out, "mean degree: {}", dist.mean())?;
    writeln!(out, "threshold: {:.6}", de_threshold(&dist, 1e-6))?;
    writeln!(out, "g,q_inf,plr_inf")?;
    for g in grid {
        let r = density_evolution(&dist, g, 1_000_000, 1e-13);
        writeln!(out, "{g},{},{}", r.q_inf, r.plr_inf)?;
    }
    Ok(())
}

struct TableRow {
    name: String,
    profile: PhyProfile,
    n_slots: u32,
    n_rep: f64,
    throughput: Option<f64>,
}

fn parse_row(text: &str) -> Result<TableRow, Failure> {
    let bad = |what: &str| Failure::Config(format!("table row \"{text}\": {what}"));
    let fields: Vec<&str> = text.split(',').map(str::trim).collect();
    if !(6..=7).contains(&fields.len()) {
        return Err(bad("expected name,M,r,SF,N_slots,N_rep[,T]"));
    }
    let m: u32 = fields[1].parse().map_err(|_| bad("M is not an integer"))?;
    let r: Ratio<u64> = fields[2].parse().map_err(|_| bad("r is not a fraction"))?;
    let sf: u32 = fields[3].parse().map_err(|_| bad("SF is not an integer"))?;
    let n_slots: u32 = fields[4]
        .parse()
        .map_err(|_| bad("N_slots is not an integer"))?;
    let n_rep: f64 = fields[5]
        .parse()
        .map_err(|_| bad("N_rep is not a number"))?;
    let throughput = match fields.get(6) {
        Some(t) => Some(t.parse().map_err(|_| bad("T is not a number"))?),
        None => None,
    };
    if n_slots == 0 || !(n_rep > 0.0) {
        return Err(bad("N_slots and N_rep must be positive"));
    }
    Ok(TableRow {
        name: fields[0].to_string(),
        profile: PhyProfile::new(m, r, sf)?,
        n_slots,
        n_rep,
        throughput,
    })
}

fn cmd_table(rows: &[String]) -> Result<(), Failure> {
    let rows: Vec<TableRow> = if rows.is_empty() {
        DEFAULT_TABLE
            .iter()
            .map(|r| parse_row(r))
            .collect::<Result<_, _>>()?
    } else {
        rows.iter()
            .map(|r| parse_row(r))
            .collect::<Result<_, _>>()?
    };
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{:<12} {:>8} {:>8} {:>6} {:>12} {:>6}",
        "scheme", "G_p", "N_slots", "N_rep", "psi_e^n", "T"
    )?;
    for row in rows {
        let psi = approx_normalized_energy_efficiency(
            &row.profile,
            &FrameGeometry::slotted(row.n_slots),
            row.n_rep,
        );
        let t = row.throughput.map_or("-".to_string(), |t| t.to_string());
        writeln!(
            out,
            "{:<12} {:>8} {:>8} {:>6} {:>12.3e} {:>6}",
            row.name,
            processing_gain(&row.profile).to_string(),
            row.n_slots,
            row.n_rep,
            psi,
            t
        )?;
    }
    Ok(())
}

fn cmd_slotdist(
    path: &Path,
    frames: u64,
    load: Option<f64>,
    seed: Option<u64>,
) -> Result<(), Failure> {
    let scenario = Scenario::from_path(path)?;
    let config = &scenario.config;
    if matches!(config.scheme.scheme, Scheme::Essa { .. }) {
        return Err(Failure::Config(
            "slot cardinalities are only defined for slotted schemes".into(),
        ));
    }
    let g = match load.or_else(|| scenario.grid.first().copied()) {
        Some(g) if g >= 0.0 && g.is_finite() => g,
        _ => return Err(Failure::Config("a non-negative load is required".into())),
    };
    let lambda = mean_arrival_rate(g, &config.geometry, &config.profile);
    let traffic = TrafficModel::with_mean(config.traffic, lambda)?;
    let hist = tally_cardinalities(config, &traffic, frames, seed.unwrap_or(scenario.seed))?;
    let positions = match config.scheme.scheme {
        Scheme::Csa { .. } => config.geometry.total_slices(),
        _ => config.geometry.n_slots,
    };
    let p = slot_selection_probability(config.scheme.scheme.mean_positions(), positions)?;
    let i_max = hist.len().saturating_sub(1).max(1);
    let analytic = collision_cardinality_pmf(&traffic, p, i_max);
    let total: u64 = hist.iter().sum();
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "load {g}, {lambda} users per frame on average, {frames} frames"
    )?;
    writeln!(out, "cardinality,empirical,analytic")?;
    let mut tv = analytic.tail;
    for (i, a) in analytic.pmf.iter().enumerate() {
        let e = hist.get(i).copied().unwrap_or(0) as f64 / total.max(1) as f64;
        tv += (e - a).abs();
        writeln!(out, "{i},{e},{a}")?;
    }
    writeln!(out, "total variation distance: {}", 0.5 * tv)?;
    Ok(())
}
