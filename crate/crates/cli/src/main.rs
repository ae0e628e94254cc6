//! `lqskin`: generate networks, sweep and simulate the skin, localize
//! presses and read out two-cell logic gates.

use std::fs;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lqskin_core::circuit::{dc_iv, log_frequencies, sweep, AdmittanceSystem, MaterialParams};
use lqskin_core::geometry::{CellId, ElectrodePair, Network};
use lqskin_core::io::{
    default_network, from_versioned_json, network_from_json, network_to_json, read_series_csv, svg_line_plot,
    svg_network, svg_score_map, to_versioned_json, write_iv_csv, write_series_csv, write_sweep_csv,
};
use lqskin_core::localization::{
    detect_events, localize, Event, LocalizationResult, SignatureTable, DEFAULT_MIN_SEPARATION_S,
    DEFAULT_THRESHOLD_OHM, REFERENCE_MASS_G,
};
use lqskin_core::logic::{
    calibrate, reference_levels_asset, run_multitouch, CalibrationOptions, CoeffParam, GateOutputs, GateReport,
    LogicAsset, Protocol,
};
use lqskin_core::stimulus::{family_map, subtract_drift, PerturbCoeffs, Scenario, SkinModel};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "lqskin", version, about = "Liquid-conductor sensing skin simulator")]
struct Cli {
    /// JSON file with defaults for network, coeffs, electrode pair and port.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Seeded random network file.
    GenNetwork(GenNetwork),
    /// SVG map of the response family of every cell.
    ShowFamilies(ShowFamilies),
    /// Frequency sweep of the two-terminal impedance.
    Sweep(SweepCmd),
    /// Time series of a scenario file.
    Simulate(Simulate),
    /// Detect, classify and localize presses in a series CSV.
    Localize(Localize),
    /// Run the two-cell protocol and read out threshold gates.
    Logic(Logic),
    /// Fit coefficients to target gate levels.
    Calibrate(Calibrate),
    /// HTTP session service.
    Serve(Serve),
}

#[derive(Args)]
struct ModelArgs {
    /// Network file; the bundled default network if omitted.
    #[arg(long, value_name = "FILE")]
    network: Option<PathBuf>,
    /// Perturbation coefficients file.
    #[arg(long, value_name = "FILE")]
    coeffs: Option<PathBuf>,
    #[arg(long)]
    pair: Option<ElectrodePair>,
}

#[derive(Args)]
struct GenNetwork {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 17)]
    count: usize,
    #[arg(long, default_value_t = 15.0)]
    min_separation_mm: f64,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct ShowFamilies {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Also write the family of every cell as JSON.
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SweepCmd {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 20.0)]
    f_min: f64,
    #[arg(long, default_value_t = 2e6)]
    f_max: f64,
    #[arg(long, default_value_t = 50)]
    points: usize,
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    svg: Option<PathBuf>,
    /// DC current-voltage table from -0.1 V to 0.1 V.
    #[arg(long, value_name = "FILE")]
    iv_csv: Option<PathBuf>,
}

#[derive(Args)]
struct Simulate {
    #[arg(long, value_name = "FILE")]
    scenario: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct Localize {
    #[arg(long, value_name = "FILE")]
    series: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_OHM)]
    threshold: f64,
    #[arg(long, default_value_t = DEFAULT_MIN_SEPARATION_S)]
    min_separation: f64,
    /// Quiescent windows for drift removal, e.g. "0:3,10:14". Defaults to
    /// the first and last two seconds.
    #[arg(long)]
    baseline: Option<String>,
    /// Candidates listed per event.
    #[arg(long, default_value_t = 5)]
    top: usize,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Score heat-map of the strongest event.
    #[arg(long, value_name = "FILE")]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct Logic {
    /// Logic asset (cells, protocol, coeffs); the bundled calibrated asset
    /// when neither this nor --cell-a/--cell-b is given.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["cell_a", "cell_b"])]
    asset: Option<PathBuf>,
    #[arg(long, requires = "cell_b")]
    cell_a: Option<CellId>,
    #[arg(long, requires = "cell_a")]
    cell_b: Option<CellId>,
    #[command(flatten)]
    model: ModelArgs,
    /// Readout threshold in ohm; repeatable. Defaults to the midpoints
    /// between adjacent levels.
    #[arg(long = "threshold", allow_negative_numbers = true)]
    thresholds: Vec<f64>,
    /// Seed for noisy runs; the protocol is noiseless unless given.
    #[arg(long)]
    noise_seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Calibrate {
    #[arg(long)]
    cell_a: CellId,
    #[arg(long)]
    cell_b: CellId,
    #[command(flatten)]
    model: ModelArgs,
    /// Target levels "O00,O01,O10,O11" in ohm.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "target_file")]
    target: Option<String>,
    /// Target levels as a JSON object with O00, O01, O10, O11.
    #[arg(long, value_name = "FILE")]
    target_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    tolerance: f64,
    /// Comma-separated coefficient names to fit; all when omitted.
    #[arg(long)]
    params: Option<String>,
    #[arg(long, default_value_t = lqskin_core::logic::DEFAULT_BUDGET)]
    budget: usize,
    /// Output logic asset (cells, protocol, target and fitted coeffs).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct Serve {
    /// Port; falls back to the config file, then LQSKIN_PORT, then 8787.
    #[arg(long)]
    port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    bind: IpAddr,
    #[arg(long, value_name = "FILE")]
    network: Option<PathBuf>,
}

/// Optional defaults shared by every subcommand.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct CliConfig {
    network: Option<PathBuf>,
    coeffs: Option<PathBuf>,
    electrode_pair: Option<ElectrodePair>,
    port: Option<u16>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn load_network(path: &Path) -> Result<Network> {
    network_from_json(&read(path)?).with_context(|| format!("in network file {}", path.display()))
}

fn load_doc<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    from_versioned_json(&read(path)?).with_context(|| format!("in {what} file {}", path.display()))
}

struct Ctx {
    config: CliConfig,
}

impl Ctx {
    fn network(&self, flag: &Option<PathBuf>) -> Result<Network> {
        match flag.as_ref().or(self.config.network.as_ref()) {
            Some(p) => load_network(p),
            None => Ok(default_network()),
        }
    }

    fn coeffs(&self, flag: &Option<PathBuf>) -> Result<Option<PerturbCoeffs>> {
        flag.as_ref()
            .or(self.config.coeffs.as_ref())
            .map(|p| load_doc(p, "coeffs"))
            .transpose()
    }

    fn pair(&self, flag: Option<ElectrodePair>) -> ElectrodePair {
        flag.or(self.config.electrode_pair).unwrap_or(ElectrodePair::BL_C)
    }

    fn model(&self, args: &ModelArgs) -> Result<SkinModel> {
        let coeffs = self.coeffs(&args.coeffs)?.unwrap_or_default();
        Ok(SkinModel::new(self.network(&args.network)?, MaterialParams::default(), coeffs)?)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => load_doc(p, "config")?,
        None => CliConfig::default(),
    };
    let ctx = Ctx { config };
    match cli.command {
        Command::GenNetwork(a) => gen_network(a),
        Command::ShowFamilies(a) => show_families(&ctx, a),
        Command::Sweep(a) => sweep_cmd(&ctx, a),
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Localize(a) => localize_cmd(&ctx, a),
        Command::Logic(a) => logic(&ctx, a),
        Command::Calibrate(a) => calibrate_cmd(&ctx, a),
        Command::Serve(a) => serve(&ctx, a),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn gen_network(a: GenNetwork) -> Result<()> {
    let net = Network::random(a.seed, a.count, a.min_separation_mm)?;
    emit(&a.out, &network_to_json(&net)?)?;
    if let Some(svg) = &a.svg {
        write(svg, svg_network(&net, None))?;
    }
    Ok(())
}

fn show_families(ctx: &Ctx, a: ShowFamilies) -> Result<()> {
    let net = ctx.network(&a.model.network)?;
    let pair = ctx.pair(a.model.pair);
    let map = family_map(&net, pair);
    write(&a.out, svg_network(&net, Some(&map)))?;
    if let Some(path) = &a.json {
        #[derive(Serialize)]
        struct Doc {
            pair: ElectrodePair,
            cells: Vec<serde_json::Value>,
        }
        let cells = map.iter().map(|(c, f)| serde_json::json!({ "cell": c, "family": f })).collect();
        write(path, to_versioned_json(&Doc { pair, cells })?)?;
    }
    Ok(())
}

fn sweep_cmd(ctx: &Ctx, a: SweepCmd) -> Result<()> {
    if !(a.f_min > 0.0 && a.f_max > a.f_min && a.points >= 2) {
        bail!("need 0 < --f-min < --f-max and --points >= 2");
    }
    let net = ctx.network(&a.model.network)?;
    let pair = ctx.pair(a.model.pair);
    let sys = AdmittanceSystem::from_network(&net, &MaterialParams::default())?;
    let rows = sweep(&sys, pair, &log_frequencies(a.f_min, a.f_max, a.points))?;
    match &a.csv {
        Some(p) => write_sweep_csv(fs::File::create(p).with_context(|| format!("writing {}", p.display()))?, &rows)?,
        None => write_sweep_csv(std::io::stdout(), &rows)?,
    }
    if let Some(p) = &a.svg {
        let r: Vec<(f64, f64)> = rows.iter().map(|(f, z)| (*f, z.resistance)).collect();
        let x: Vec<(f64, f64)> = rows.iter().map(|(f, z)| (*f, z.reactance)).collect();
        write(p, svg_line_plot(&format!("Impedance {pair}"), "frequency (Hz)", "ohm", true, &[("R", r), ("X", x)]))?;
    }
    if let Some(p) = &a.iv_csv {
        let volts: Vec<f64> = (-10..=10).map(|k| k as f64 * 0.01).collect();
        let iv = dc_iv(&sys, pair, &volts)?;
        write_iv_csv(fs::File::create(p).with_context(|| format!("writing {}", p.display()))?, &iv)?;
    }
    Ok(())
}

fn simulate(ctx: &Ctx, a: Simulate) -> Result<()> {
    let mut scenario: Scenario = load_doc(&a.scenario, "scenario")?;
    if let Some(p) = a.model.pair {
        scenario.electrode_pair = p;
    }
    let model = ctx.model(&a.model)?;
    let series = model.simulate(&scenario).with_context(|| format!("in scenario file {}", a.scenario.display()))?;
    match &a.csv {
        Some(p) => write_series_csv(fs::File::create(p).with_context(|| format!("writing {}", p.display()))?, &series)?,
        None => write_series_csv(std::io::stdout(), &series)?,
    }
    if let Some(p) = &a.svg {
        let t = series.times();
        let rest = model.rest_impedance(scenario.electrode_pair, scenario.probe_frequency_hz)?;
        let dr = t.iter().zip(&series.samples).map(|(t, z)| (*t, z.resistance - rest.resistance)).collect();
        let dx = t.iter().zip(&series.samples).map(|(t, z)| (*t, z.reactance - rest.reactance)).collect();
        let title = format!("{} at {} Hz", scenario.electrode_pair, scenario.probe_frequency_hz);
        write(p, svg_line_plot(&title, "time (s)", "change from rest (ohm)", false, &[("dR", dr), ("dX", dx)]))?;
    }
    Ok(())
}

fn parse_windows(text: &str) -> Result<Vec<(f64, f64)>> {
    text.split(',')
        .map(|w| {
            let (a, b) = w.split_once(':').ok_or_else(|| anyhow!("baseline window '{w}' is not start:end"))?;
            let a: f64 = a.trim().parse().with_context(|| format!("baseline start '{a}'"))?;
            let b: f64 = b.trim().parse().with_context(|| format!("baseline end '{b}'"))?;
            Ok((a, b))
        })
        .collect()
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct EventReport {
    event: Event,
    #[serde(skip_serializing_if = "Option::is_none")]
    localization: Option<LocalizationResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct LocalizationReport {
    electrode_pair: ElectrodePair,
    probe_frequency_hz: f64,
    threshold_ohm: f64,
    baseline: Vec<(f64, f64)>,
    events: Vec<EventReport>,
}

fn localize_cmd(ctx: &Ctx, a: Localize) -> Result<()> {
    let text = read(&a.series)?;
    let series = read_series_csv(text.as_bytes()).with_context(|| format!("in series file {}", a.series.display()))?;
    let end = series.time(series.len() - 1);
    let baseline = match &a.baseline {
        Some(b) => parse_windows(b)?,
        None => vec![(series.t0_s, series.t0_s + 2.0), (end - 2.0, end)],
    };
    let clean = subtract_drift(&series, &baseline)?;
    let events = detect_events(&clean, a.threshold, a.min_separation)?;
    let pair = ctx.pair(a.model.pair);
    let model = ctx.model(&a.model)?;
    let table = SignatureTable::build(&model, pair, series.probe_frequency_hz, REFERENCE_MASS_G)?;
    let mut reports: Vec<EventReport> = events
        .into_iter()
        .map(|event| match localize(&event, &table) {
            Ok(mut r) => {
                r.candidates.truncate(a.top);
                EventReport {
                    event,
                    localization: Some(r),
                    error: None,
                }
            }
            Err(e) => EventReport {
                event,
                localization: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    for r in &reports {
        match &r.localization {
            Some(l) => {
                let top: Vec<String> = l.candidates.iter().take(3).map(|c| c.cell.to_string()).collect();
                eprintln!("event at {:.1} s: {} {}", r.event.t_peak, l.family, top.join(" "));
            }
            None => eprintln!("event at {:.1} s: {}", r.event.t_peak, r.error.as_deref().unwrap_or("")),
        }
    }
    if let Some(p) = &a.svg {
        let strongest = reports
            .iter()
            .filter(|r| r.localization.is_some())
            .max_by(|x, y| x.event.delta().modulus().total_cmp(&y.event.delta().modulus()));
        let svg = match strongest {
            Some(r) => {
                let event = &r.event;
                let full = localize(event, &table)?;
                let scores: Vec<(CellId, f64)> = full.candidates.iter().map(|c| (c.cell, c.score)).collect();
                let title = format!("{} event at {:.1} s", full.family, event.t_peak);
                svg_score_map(&title, full.family, &scores, full.top(1).first().map(|c| c.cell))
            }
            None => svg_network(&model.network, None),
        };
        write(p, svg)?;
    }
    reports.sort_by(|x, y| x.event.t_start.total_cmp(&y.event.t_start));
    let report = LocalizationReport {
        electrode_pair: pair,
        probe_frequency_hz: series.probe_frequency_hz,
        threshold_ohm: a.threshold,
        baseline,
        events: reports,
    };
    emit(&a.out, &to_versioned_json(&report)?)
}

fn midpoints(o: &GateOutputs) -> Vec<f64> {
    let mut l = o.levels().to_vec();
    l.sort_by(f64::total_cmp);
    l.dedup();
    l.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

fn logic(ctx: &Ctx, a: Logic) -> Result<()> {
    let (pair, cell_a, cell_b, coeffs, mut protocol) = match (a.cell_a, a.cell_b) {
        (Some(x), Some(y)) => (
            ctx.pair(a.model.pair),
            x,
            y,
            ctx.coeffs(&a.model.coeffs)?.unwrap_or_default(),
            Protocol::default(),
        ),
        _ => {
            let asset: LogicAsset = match &a.asset {
                Some(p) => load_doc(p, "logic asset")?,
                None => reference_levels_asset(),
            };
            let coeffs = ctx.coeffs(&a.model.coeffs)?.unwrap_or(asset.coeffs);
            (a.model.pair.unwrap_or(asset.electrode_pair), asset.cell_a, asset.cell_b, coeffs, asset.protocol)
        }
    };
    if let Some(seed) = a.noise_seed {
        protocol.noise = lqskin_core::stimulus::NoiseSettings::white();
        protocol.seed = seed;
    }
    let model = SkinModel::new(ctx.network(&a.model.network)?, MaterialParams::default(), coeffs)?;
    let run = run_multitouch(&model, pair, cell_a, cell_b, &protocol)?;
    let thresholds = if a.thresholds.is_empty() { midpoints(&run.outputs) } else { a.thresholds };
    let report = GateReport::new(&run, pair, cell_a, cell_b, &thresholds);

    let o = &run.outputs;
    let u = o.uncertainties;
    println!("{pair}  x = {cell_a}, y = {cell_b}");
    println!("O00 {:+.3} ± {:.3}  (pre-rest X {:.3} ohm)", o.o00, u[0], run.pre_rest_reactance);
    println!("O01 {:+.3} ± {:.3}", o.o01, u[1]);
    println!("O10 {:+.3} ± {:.3}", o.o10, u[2]);
    println!("O11 {:+.3} ± {:.3}", o.o11, u[3]);
    for t in &report.thresholds {
        println!("\nT = {:.3} ohm: f = {}", t.threshold, t.gate);
        print!("{}", t.truth_table.grid());
    }
    println!("\nrealizable: {}", report.realizable.join(", "));
    let json = to_versioned_json(&report)?;
    match &a.out {
        Some(p) => write(p, json),
        None => {
            println!();
            print!("{json}");
            Ok(())
        }
    }
}

fn parse_target(text: &str) -> Result<GateOutputs> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("target level '{s}'")))
        .collect::<Result<_>>()?;
    match v[..] {
        [a, b, c, d] => Ok(GateOutputs::new(a, b, c, d)),
        _ => bail!("--target needs four comma-separated levels O00,O01,O10,O11"),
    }
}

fn calibrate_cmd(ctx: &Ctx, a: Calibrate) -> Result<()> {
    let target = match (&a.target, &a.target_file) {
        (Some(t), _) => parse_target(t)?,
        (None, Some(p)) => serde_json::from_str(&read(p)?).with_context(|| format!("in target file {}", p.display()))?,
        (None, None) => GateOutputs::reference_levels(),
    };
    let params = match &a.params {
        None => CoeffParam::ALL.to_vec(),
        Some(list) => list
            .split(',')
            .map(|name| {
                serde_json::from_value(serde_json::Value::String(name.trim().to_string()))
                    .map_err(|_| anyhow!("unknown coefficient '{name}' in --params"))
            })
            .collect::<Result<_>>()?,
    };
    let options = CalibrationOptions {
        max_evaluations: a.budget,
        params,
        ..CalibrationOptions::default()
    };
    let pair = ctx.pair(a.model.pair);
    let model = ctx.model(&a.model)?;
    let report = calibrate(&model, pair, a.cell_a, a.cell_b, &target, a.tolerance, &options)?;
    eprintln!(
        "max residual {:.2e} ohm after {} evaluations",
        report.max_residual, report.evaluations
    );
    let asset = LogicAsset {
        electrode_pair: pair,
        cell_a: a.cell_a,
        cell_b: a.cell_b,
        protocol: options.protocol,
        target,
        tolerance: a.tolerance,
        coeffs: report.coeffs,
    };
    write(&a.out, to_versioned_json(&asset)?)
}

fn serve(ctx: &Ctx, a: Serve) -> Result<()> {
    let port = match a.port.or(ctx.config.port) {
        Some(p) => p,
        None => lqskin_server::port_from_env().map_err(|e| anyhow!(e))?,
    };
    let network = ctx.network(&a.network)?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(lqskin_server::serve(SocketAddr::new(a.bind, port), network))?;
    Ok(())
}
