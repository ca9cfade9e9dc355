use std::fs;
use std::path::Path;

use plnet_core::experiments::{
    self, run_backbone_lateral, run_distance_sweep, run_scenario_suite, BinAxis, EnsembleConfig, Scenario,
    ScenarioOptions, SweepOptions, QUANTITIES,
};
use plnet_core::network::{NetworkSolver, NetworkTopology};
use plnet_core::time_domain::{
    check_peak_spacing_symmetry, detect_peaks_with, distance_at, locate_anomaly_reflectometric, to_time_domain,
    DistanceMode, PeakOptions, SymmetryVerdict, TimeTrace, Window,
};
use plnet_core::{delta_chain, delta_superposition, FrequencyGrid, MatrixSpectrum};

use crate::args::{AxisArg, Command, Common, ModelArg, PortArgs, PortQuantity, QuantityArg, WindowArg};
use crate::descriptor::{apply_all, Descriptor};
use crate::error::CliError;
use crate::format::{read_topology, write_topology, CableLibrary};
use crate::output::{num, OutputDir, PeakRow};

type Res<T> = Result<T, CliError>;

pub struct Context {
    pub grid: FrequencyGrid<f64>,
    pub window: Window,
    pub peaks: PeakOptions<f64>,
    pub seed: u64,
    pub out_dir: std::path::PathBuf,
    pub timestamp: bool,
    pub library: CableLibrary,
}

impl Context {
    pub fn new(c: &Common) -> Res<Self> {
        let (f0, df, n) = c.grid;
        let grid = FrequencyGrid::new(f0, df, n).map_err(|e| CliError::Usage(e.to_string()))?;
        if !(c.threshold > 0.0 && c.threshold < 1.0) {
            return Err(CliError::Usage(format!("--threshold must lie in (0, 1), got {}", c.threshold)));
        }
        let library = match &c.cable_library {
            Some(p) => CableLibrary::parse(&read_file(p)?, &p.display().to_string())?,
            None => CableLibrary::bundled(),
        };
        Ok(Context {
            grid,
            window: match c.window {
                WindowArg::Hann => Window::Hann,
                WindowArg::Rect => Window::Rect,
            },
            peaks: PeakOptions {
                rel_threshold: c.threshold,
                min_separation: c.min_separation,
                abs_floor: None,
            },
            seed: c.seed,
            out_dir: c.out.clone(),
            timestamp: !c.no_timestamp,
            library,
        })
    }

    fn out(&self) -> Res<OutputDir> {
        Ok(OutputDir::new(&self.out_dir, self.timestamp)?)
    }

    fn load(&self, path: &Path) -> Res<NetworkTopology<f64>> {
        let net = read_topology(&read_file(path)?, &path.display().to_string(), &self.library)?;
        let report = net.validate();
        if !report.is_valid() {
            return Err(CliError::Validation(format!("{}: {report}", path.display())));
        }
        Ok(net)
    }
}

fn read_file(p: &Path) -> Res<String> {
    fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
}

fn descriptors(list: &[String]) -> Res<Vec<Descriptor>> {
    list.iter().map(|s| s.parse::<Descriptor>().map_err(CliError::from)).collect()
}

fn pick_port(net: &NetworkTopology<f64>, port: Option<&str>) -> Res<String> {
    match port {
        Some(p) => {
            net.port(p)?;
            Ok(p.to_string())
        }
        None if net.ports.len() == 1 => Ok(net.ports.keys().next().cloned().unwrap_or_default()),
        None if net.ports.is_empty() => Err(CliError::Usage("the network has no ports".into())),
        None => Err(CliError::Usage(format!(
            "the network has several ports ({}), pick one with --port",
            net.ports.keys().cloned().collect::<Vec<_>>().join(", ")
        ))),
    }
}

/// Fastest modal velocity of the first cable leaving `node`.
fn node_velocity(net: &NetworkTopology<f64>, node: &str, grid: &FrequencyGrid<f64>) -> Res<f64> {
    let b = net
        .branches
        .iter()
        .find(|b| b.node_a == node || b.node_b == node)
        .ok_or_else(|| CliError::Validation(format!("node '{node}' has no branch")))?;
    Ok(net.cable_of(b)?.max_velocity(grid.f_start()))
}

fn velocity(given: Option<f64>, net: &NetworkTopology<f64>, node: &str, grid: &FrequencyGrid<f64>) -> Res<f64> {
    match given {
        Some(v) if v > 0.0 && v.is_finite() => Ok(v),
        Some(v) => Err(CliError::Usage(format!("--velocity must be positive, got {v}"))),
        None => node_velocity(net, node, grid),
    }
}

fn peak_rows(trace: &TimeTrace<f64>, opts: &PeakOptions<f64>, v: f64, mode: DistanceMode) -> Vec<PeakRow> {
    detect_peaks_with(trace, opts)
        .flattened()
        .iter()
        .map(|(e, p)| PeakRow::new(p, distance_at(p.time, v, mode), *e))
        .collect()
}

pub fn run(cmd: &Command, ctx: &Context) -> Res<()> {
    match cmd {
        Command::Validate { topology } => validate(ctx, topology),
        Command::Simulate { topology, port, rx } => simulate(ctx, topology, port, rx.as_deref()),
        Command::Tdr {
            topology,
            port,
            quantity,
        } => tdr(ctx, topology, port, *quantity),
        Command::Ctf {
            topology,
            tx,
            rx,
            both,
            velocity,
        } => ctf(ctx, topology, tx, rx, *both, *velocity),
        Command::Inject {
            topology,
            anomalies,
            output,
        } => inject(ctx, topology, anomalies, output.as_deref()),
        Command::Delta {
            topology,
            anomalies,
            model,
            quantity,
            port,
            rx,
        } => delta(ctx, topology, anomalies, *model, *quantity, port.as_deref(), rx.as_deref()),
        Command::Locate {
            topology,
            port,
            anomalies,
            perturbed,
        } => locate(ctx, topology, port, anomalies, perturbed.as_deref()),
        Command::Sweep {
            networks,
            nodes,
            lengths,
            severity,
            conductors,
            bins,
            axis,
            backbone_lateral,
        } => {
            let cfg = EnsembleConfig {
                n_networks: *networks,
                n_nodes: *nodes,
                branch_length: *lengths,
                fault_severity: *severity,
                cables: vec![experiments::default_cable(*conductors)],
                grid: ctx.grid,
                seed: ctx.seed,
                ..EnsembleConfig::default()
            };
            if *conductors == 0 {
                return Err(CliError::Usage("--conductors must be at least 1".into()));
            }
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let axis = match axis {
                AxisArg::Distance => BinAxis::Distance,
                AxisArg::Normalized => BinAxis::Normalized,
            };
            sweep(ctx, &cfg, *bins, axis, *backbone_lateral)
        }
        Command::Scenarios {
            topology,
            port,
            scenarios,
        } => run_scenarios(ctx, topology.as_deref(), port.as_deref(), scenarios),
    }
}

fn validate(ctx: &Context, path: &Path) -> Res<()> {
    let net = read_topology(&read_file(path)?, &path.display().to_string(), &ctx.library)?;
    let report = net.validate();
    println!("{report}");
    if report.is_valid() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{} is not a valid topology", path.display())))
    }
}

fn simulate(ctx: &Context, path: &Path, port: &PortArgs, rx: Option<&str>) -> Res<()> {
    let net = ctx.load(path)?;
    let p = pick_port(&net, port.port.as_deref())?;
    let solver = NetworkSolver::new(&net, &ctx.grid)?;
    let y = solver.input_admittance(&p)?;
    let rho = solver.reflection_from(&p, &y)?;
    let h = rx.map(|rx| solver.end_to_end_ctf(&p, rx)).transpose()?;
    let out = ctx.out()?;
    out.write_spectrum("y_in.csv", &y)?;
    out.write_spectrum("rho_in.csv", &rho)?;
    if let Some(h) = &h {
        out.write_spectrum("h_tot.csv", h)?;
    }
    println!("simulated {} points at port '{p}'", ctx.grid.n_points());
    Ok(())
}

fn tdr(ctx: &Context, path: &Path, port: &PortArgs, quantity: PortQuantity) -> Res<()> {
    let net = ctx.load(path)?;
    let p = pick_port(&net, port.port.as_deref())?;
    let v = velocity(port.velocity, &net, &net.port(&p)?.node, &ctx.grid)?;
    let solver = NetworkSolver::new(&net, &ctx.grid)?;
    let spec = match quantity {
        PortQuantity::Admittance => solver.input_admittance(&p)?,
        PortQuantity::Reflection => solver.input_reflection(&p)?,
    };
    let trace = to_time_domain(&spec, ctx.window)?;
    let rows = peak_rows(&trace, &ctx.peaks, v, DistanceMode::Reflectometric);
    let out = ctx.out()?;
    out.write_trace("tdr_trace.csv", &trace)?;
    out.write_peaks("tdr_peaks.csv", &rows)?;
    match rows.first() {
        Some(r) => println!("{} peaks, first at {} m", rows.len(), r.distance),
        None => println!("no peaks above the threshold"),
    }
    Ok(())
}

fn ctf(ctx: &Context, path: &Path, tx: &str, rx: &str, both: bool, v: Option<f64>) -> Res<()> {
    let net = ctx.load(path)?;
    let v = velocity(v, &net, &net.port(tx)?.node, &ctx.grid)?;
    let solver = NetworkSolver::new(&net, &ctx.grid)?;
    let h = solver.end_to_end_ctf(tx, rx)?;
    let trace = to_time_domain(&h, ctx.window)?;
    let out = ctx.out()?;
    out.write_spectrum("ctf.csv", &h)?;
    out.write_trace("ctf_trace.csv", &trace)?;
    out.write_peaks("ctf_peaks.csv", &peak_rows(&trace, &ctx.peaks, v, DistanceMode::EndToEnd))?;
    if !both {
        return Ok(());
    }
    let back_tx = net
        .ports
        .iter()
        .find(|(_, p)| p.node == rx)
        .map(|(k, _)| k.clone())
        .ok_or_else(|| CliError::Usage(format!("--both needs a port at receiver node '{rx}'")))?;
    let back_rx = net.port(tx)?.node.clone();
    let h_ba = solver.end_to_end_ctf(&back_tx, &back_rx)?;
    let trace_ba = to_time_domain(&h_ba, ctx.window)?;
    out.write_spectrum("ctf_reverse.csv", &h_ba)?;
    out.write_trace("ctf_reverse_trace.csv", &trace_ba)?;
    out.write_peaks(
        "ctf_reverse_peaks.csv",
        &peak_rows(&trace_ba, &ctx.peaks, v, DistanceMode::EndToEnd),
    )?;
    let rep = check_peak_spacing_symmetry(&trace, &trace_ba, 1, &ctx.peaks)?;
    let amp = |t: &TimeTrace<f64>| t.samples().iter().flat_map(|m| m.iter()).fold(0.0f64, |a, x| a.max(x.abs()));
    let verdict = match rep.verdict {
        SymmetryVerdict::Symmetric => "symmetric",
        SymmetryVerdict::Asymmetric => "asymmetric",
        SymmetryVerdict::Inconclusive => "inconclusive",
    };
    let text = format!(
        "verdict,{verdict}\noffsets_forward,{}\noffsets_reverse,{}\npeak_forward,{}\npeak_reverse,{}\ndetail,\"{}\"\n",
        join(&rep.offsets_ab),
        join(&rep.offsets_ba),
        num(amp(&trace)),
        num(amp(&trace_ba)),
        rep.detail.replace('"', "'")
    );
    out.write_text("symmetry.csv", &text)?;
    println!("peak spacing {verdict}: {}", rep.detail);
    Ok(())
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

fn inject(ctx: &Context, path: &Path, anomalies: &[String], output: Option<&Path>) -> Res<()> {
    let net = ctx.load(path)?;
    let perturbed = apply_all(&net, &descriptors(anomalies)?)?;
    let target = match output {
        Some(p) => p.to_path_buf(),
        None => ctx.out()?.path("perturbed.json"),
    };
    fs::write(&target, write_topology(&perturbed)).map_err(|e| CliError::Io(format!("{}: {e}", target.display())))?;
    println!("wrote {}", target.display());
    Ok(())
}

fn quantity_spectrum(
    net: &NetworkTopology<f64>,
    grid: &FrequencyGrid<f64>,
    q: QuantityArg,
    port: &str,
    rx: Option<&str>,
) -> Res<MatrixSpectrum<f64>> {
    let s = NetworkSolver::new(net, grid)?;
    Ok(match q {
        QuantityArg::Admittance => s.input_admittance(port)?,
        QuantityArg::Reflection => s.input_reflection(port)?,
        QuantityArg::Ctf => {
            let rx = rx.ok_or_else(|| CliError::Usage("--quantity ctf needs --rx".into()))?;
            s.end_to_end_ctf(port, rx)?
        }
    })
}

fn delta(
    ctx: &Context,
    path: &Path,
    anomalies: &[String],
    model: ModelArg,
    q: QuantityArg,
    port: Option<&str>,
    rx: Option<&str>,
) -> Res<()> {
    let net = ctx.load(path)?;
    let p = pick_port(&net, port)?;
    let perturbed = apply_all(&net, &descriptors(anomalies)?)?;
    let base = quantity_spectrum(&net, &ctx.grid, q, &p, rx)?;
    let pert = quantity_spectrum(&perturbed, &ctx.grid, q, &p, rx)?;
    let d = match model {
        ModelArg::Chain => delta_chain(&pert, &base)?,
        ModelArg::Superposition => delta_superposition(&pert, &base, false)?,
        ModelArg::Normalized => delta_superposition(&pert, &base, true)?,
    };
    if let Some(w) = &d.warning {
        eprintln!("warning: {w}");
    }
    let trace = to_time_domain(&d.values, ctx.window)?;
    let out = ctx.out()?;
    out.write_spectrum("delta.csv", &d.values)?;
    out.write_trace("delta_trace.csv", &trace)?;
    println!(
        "{} delta of {}: max magnitude {}",
        d.model.name(),
        d.quantity.name(),
        num(d.values.max_abs())
    );
    Ok(())
}

fn locate(
    ctx: &Context,
    path: &Path,
    port: &PortArgs,
    anomalies: &[String],
    perturbed: Option<&Path>,
) -> Res<()> {
    let net = ctx.load(path)?;
    let p = pick_port(&net, port.port.as_deref())?;
    let v = velocity(port.velocity, &net, &net.port(&p)?.node, &ctx.grid)?;
    let pert = match perturbed {
        Some(f) => ctx.load(f)?,
        None if !anomalies.is_empty() => apply_all(&net, &descriptors(anomalies)?)?,
        None => return Err(CliError::Usage("locate needs --anomaly or --perturbed".into())),
    };
    let base = NetworkSolver::new(&net, &ctx.grid)?.input_admittance(&p)?;
    let after = NetworkSolver::new(&pert, &ctx.grid)?.input_admittance(&p)?;
    let d = delta_superposition(&after, &base, false)?;
    let trace = to_time_domain(&d.values, ctx.window)?;
    let base_trace = to_time_domain(&base, ctx.window)?;
    let scale = base_trace
        .samples()
        .iter()
        .flat_map(|m| m.iter())
        .fold(0.0f64, |a, x| a.max(x.abs()));
    // differences at rounding level are not echoes
    let opts = PeakOptions {
        abs_floor: Some(1e-9 * scale),
        ..ctx.peaks
    };
    let found = locate_anomaly_reflectometric(&trace, v, &opts);
    let rows: Vec<Vec<String>> = found
        .iter()
        .map(|l| {
            vec![
                num(l.distance),
                num(l.time),
                num(l.confidence),
                format!("{}:{}", l.entry.0, l.entry.1),
            ]
        })
        .collect();
    let out = ctx.out()?;
    out.write_table("locate.csv", &["distance_m", "time_s", "confidence", "entry"], &rows)?;
    out.write_trace("locate_trace.csv", &trace)?;
    match found {
        Some(l) => println!("anomaly at {} m from port '{p}' (confidence {})", l.distance, l.confidence),
        None => println!("no anomaly echo above the threshold"),
    }
    Ok(())
}

fn sweep(ctx: &Context, cfg: &EnsembleConfig, bins: usize, axis: BinAxis, bl: Option<usize>) -> Res<()> {
    let rep = run_distance_sweep(cfg, &SweepOptions { n_bins: bins, axis })?;
    let out = ctx.out()?;
    let rows: Vec<Vec<String>> = rep
        .records
        .iter()
        .map(|r| {
            vec![
                r.network.to_string(),
                r.anomaly(),
                num(r.d),
                num(r.span),
                r.on_backbone.to_string(),
                num(r.delta_y),
                num(r.delta_rho),
                num(r.delta_h),
            ]
        })
        .collect();
    out.write_table(
        "sweep_records.csv",
        &["network", "anomaly", "d_m", "span_m", "backbone", "delta_y", "delta_rho", "delta_h"],
        &rows,
    )?;
    let rows: Vec<Vec<String>> = rep
        .bins
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let mut r = vec![i.to_string(), num(b.lo), num(b.hi), num(b.center), b.count.to_string()];
            r.extend(b.median.iter().map(|x| num(*x)));
            r.extend(b.mean.iter().map(|x| num(*x)));
            r.extend(b.spread.iter().map(|x| num(*x)));
            r
        })
        .collect();
    out.write_table(
        "sweep_bins.csv",
        &[
            "bin", "lo", "hi", "center", "count", "median_y", "median_rho", "median_h", "mean_y", "mean_rho", "mean_h",
            "spread_y", "spread_rho", "spread_h",
        ],
        &rows,
    )?;
    let mut summary = vec![
        vec!["networks".into(), cfg.n_networks.to_string()],
        vec!["skipped".into(), rep.skipped.to_string()],
        vec![
            "axis".into(),
            match axis {
                BinAxis::Distance => "distance",
                BinAxis::Normalized => "normalized",
            }
            .into(),
        ],
    ];
    for (i, q) in QUANTITIES.iter().enumerate() {
        summary.push(vec![format!("spearman_{q}"), num(rep.spearman[i])]);
        summary.push(vec![format!("mean_spread_{q}"), num(rep.mean_spread[i])]);
    }
    summary.push(vec!["u_shape_h".into(), rep.u_shape().to_string()]);
    if let Some(n) = bl {
        let r = run_backbone_lateral(cfg, n)?;
        let rows: Vec<Vec<String>> = (0..r.networks.len())
            .map(|i| vec![r.networks[i].to_string(), num(r.backbone_db[i]), num(r.lateral_db[i])])
            .collect();
        out.write_table("backbone_lateral.csv", &["network", "backbone_db", "lateral_db"], &rows)?;
        summary.push(vec!["mean_backbone_db".into(), num(r.mean_backbone_db())]);
        summary.push(vec!["mean_lateral_db".into(), num(r.mean_lateral_db())]);
    }
    out.write_table("sweep_summary.csv", &["metric", "value"], &summary)?;
    println!(
        "{} records ({} skipped), spearman Y {:.3}, u-shape {}",
        rep.records.len(),
        rep.skipped,
        rep.spearman[0],
        rep.u_shape()
    );
    Ok(())
}

fn run_scenarios(ctx: &Context, topology: Option<&Path>, port: Option<&str>, specs: &[String]) -> Res<()> {
    let (net, port, grid) = match topology {
        Some(p) => {
            let net = ctx.load(p)?;
            let port = pick_port(&net, port)?;
            (net, port, ctx.grid)
        }
        None => (
            experiments::single_line_network(),
            port.unwrap_or(experiments::SINGLE_LINE_PORT).to_string(),
            ctx.grid,
        ),
    };
    let scenarios = if specs.is_empty() {
        if topology.is_some() {
            return Err(CliError::Usage("a custom topology needs --scenario name=descriptor".into()));
        }
        experiments::single_line_scenarios()
    } else {
        specs
            .iter()
            .map(|s| {
                let (name, d) = s
                    .split_once('=')
                    .ok_or_else(|| CliError::Usage(format!("scenario '{s}' is not name=descriptor")))?;
                let a = d.parse::<Descriptor>()?.to_anomaly(&net)?;
                Ok(Scenario::new(name, a))
            })
            .collect::<Res<Vec<_>>>()?
    };
    let opts = ScenarioOptions {
        window: ctx.window,
        peaks: ctx.peaks,
        ..ScenarioOptions::default()
    };
    let rep = run_scenario_suite(&net, &port, &grid, &scenarios, &opts)?;
    let names = |s: &std::collections::BTreeSet<experiments::Signature>| {
        s.iter().map(|x| x.name()).collect::<Vec<_>>().join(" ")
    };
    let times = |v: &[f64]| v.iter().map(|t| num(*t)).collect::<Vec<_>>().join(" ");
    let rows: Vec<Vec<String>> = rep
        .outcomes
        .iter()
        .map(|o| {
            vec![
                o.name.clone(),
                o.kind.to_string(),
                names(&o.expected),
                names(&o.observed),
                o.passed().to_string(),
                times(&o.diff.new),
                o.diff
                    .shifted
                    .iter()
                    .map(|(a, b)| format!("{}>{}", num(*a), num(*b)))
                    .collect::<Vec<_>>()
                    .join(" "),
                o.ambiguities.join("; "),
            ]
        })
        .collect();
    let out = ctx.out()?;
    out.write_table(
        "scenarios.csv",
        &["scenario", "kind", "expected", "observed", "passed", "new_peaks_s", "shifted_peaks_s", "ambiguities"],
        &rows,
    )?;
    for o in &rep.outcomes {
        out.write_trace(&format!("scenario_{}_baseline_trace.csv", o.name), &o.baseline_trace)?;
        out.write_trace(&format!("scenario_{}_trace.csv", o.name), &o.perturbed_trace)?;
        println!(
            "{}: {} (expected {}){}",
            o.name,
            names(&o.observed),
            names(&o.expected),
            if o.passed() { "" } else { "  FAILED" }
        );
    }
    if rep.all_passed() {
        Ok(())
    } else {
        Err(CliError::Validation("signature rules not met".into()))
    }
}
