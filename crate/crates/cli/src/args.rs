use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Environment variable naming the default cable library file.
pub const LIBRARY_ENV: &str = "PLNET_CABLE_LIBRARY";

#[derive(Debug, Parser)]
#[command(
    name = "plnet",
    version,
    about = "Power line network propagation, reflectometry and anomaly analysis"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Frequency grid as f_start,f_step,n (Hz, Hz, count).
    #[arg(long, global = true, value_parser = parse_grid, default_value = "100000,100000,800")]
    pub grid: (f64, f64, usize),

    /// Window applied before the inverse FFT.
    #[arg(long, global = true, value_enum, default_value_t = WindowArg::Hann)]
    pub window: WindowArg,

    /// Peak threshold as a fraction of the largest magnitude.
    #[arg(long, global = true, default_value_t = 0.05)]
    pub threshold: f64,

    /// Minimum separation between peaks, in samples.
    #[arg(long, global = true, default_value_t = 3)]
    pub min_separation: usize,

    /// Seed of every random draw.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Omit the generated-at header line from output files.
    #[arg(long, global = true)]
    pub no_timestamp: bool,

    /// Cable library referenced by `"model": "library"` cables.
    #[arg(long, global = true, env = LIBRARY_ENV)]
    pub cable_library: Option<PathBuf>,
}

fn parse_grid(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected f_start,f_step,n, got '{s}'"));
    }
    let f = |x: &str| x.parse::<f64>().map_err(|_| format!("'{x}' is not a number"));
    let n = parts[2]
        .parse::<usize>()
        .map_err(|_| format!("'{}' is not a point count", parts[2]))?;
    Ok((f(parts[0])?, f(parts[1])?, n))
}

pub fn parse_pair<T: std::str::FromStr>(s: &str) -> Result<(T, T), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected lo,hi, got '{s}'"))?;
    let p = |x: &str| x.trim().parse::<T>().map_err(|_| format!("'{x}' is not a valid value"));
    Ok((p(a)?, p(b)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WindowArg {
    Hann,
    Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PortQuantity {
    Admittance,
    Reflection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QuantityArg {
    Admittance,
    Reflection,
    Ctf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Chain,
    Superposition,
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    Distance,
    Normalized,
}

#[derive(Debug, Clone, Args)]
pub struct PortArgs {
    /// Sensing port; may be omitted when the network has a single port.
    #[arg(long)]
    pub port: Option<String>,

    /// Propagation velocity for time-to-distance conversion (m/s); defaults to
    /// the fastest mode of the cable at the port.
    #[arg(long)]
    pub velocity: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a topology file and print a report.
    Validate { topology: PathBuf },

    /// Input admittance, input reflection and optionally the transfer function.
    Simulate {
        topology: PathBuf,
        #[command(flatten)]
        port: PortArgs,
        /// Receiver node for the end-to-end transfer function from the port.
        #[arg(long)]
        rx: Option<String>,
    },

    /// Reflectometric time trace with peaks and distances.
    Tdr {
        topology: PathBuf,
        #[command(flatten)]
        port: PortArgs,
        #[arg(long, value_enum, default_value_t = PortQuantity::Admittance)]
        quantity: PortQuantity,
    },

    /// End-to-end transfer function and its time trace.
    Ctf {
        topology: PathBuf,
        /// Transmitting port.
        #[arg(long)]
        tx: String,
        /// Receiving node.
        #[arg(long)]
        rx: String,
        /// Also compute the reverse direction and compare peak spacings.
        #[arg(long)]
        both: bool,
        #[arg(long)]
        velocity: Option<f64>,
    },

    /// Write the topology with anomalies applied.
    Inject {
        topology: PathBuf,
        /// Anomaly descriptor, repeatable (see `plnet help inject`).
        #[arg(long = "anomaly", required = true)]
        anomalies: Vec<String>,
        /// Output file; defaults to perturbed.json in the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },

    /// Anomaly delta in frequency and time.
    Delta {
        topology: PathBuf,
        #[arg(long = "anomaly", required = true)]
        anomalies: Vec<String>,
        #[arg(long, value_enum, default_value_t = ModelArg::Superposition)]
        model: ModelArg,
        #[arg(long, value_enum, default_value_t = QuantityArg::Admittance)]
        quantity: QuantityArg,
        /// Sensing port, or transmitting port for the transfer function.
        #[arg(long)]
        port: Option<String>,
        /// Receiving node for the transfer function.
        #[arg(long)]
        rx: Option<String>,
    },

    /// Estimate the distance of an anomaly from the sensing port.
    Locate {
        topology: PathBuf,
        #[command(flatten)]
        port: PortArgs,
        #[arg(long = "anomaly", conflicts_with = "perturbed")]
        anomalies: Vec<String>,
        /// Topology file of the perturbed network, instead of descriptors.
        #[arg(long)]
        perturbed: Option<PathBuf>,
    },

    /// Random fault sweep over an ensemble of random networks.
    Sweep {
        #[arg(long, default_value_t = 200)]
        networks: usize,
        /// Node count range lo,hi.
        #[arg(long, value_parser = parse_pair::<usize>, default_value = "4,12")]
        nodes: (usize, usize),
        /// Branch length range lo,hi (m).
        #[arg(long, value_parser = parse_pair::<f64>, default_value = "10,150")]
        lengths: (f64, f64),
        /// Fault conductance range lo,hi (S), drawn log-uniformly.
        #[arg(long, value_parser = parse_pair::<f64>, default_value = "0.001,0.02")]
        severity: (f64, f64),
        #[arg(long, default_value_t = 2)]
        conductors: usize,
        #[arg(long, default_value_t = 7)]
        bins: usize,
        #[arg(long, value_enum, default_value_t = AxisArg::Distance)]
        axis: AxisArg,
        /// Also fault one backbone and one lateral branch on this many networks.
        #[arg(long)]
        backbone_lateral: Option<usize>,
    },

    /// Signature classification of anomaly scenarios.
    Scenarios {
        /// Base network; the bundled single-line network when omitted.
        #[arg(long)]
        topology: Option<PathBuf>,
        #[arg(long)]
        port: Option<String>,
        /// Scenario as name=descriptor, repeatable; the bundled set when omitted.
        #[arg(long = "scenario")]
        scenarios: Vec<String>,
    },
}
