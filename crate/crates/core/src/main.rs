//! Command-line surface: every computation as a reproducible, seeded run
//! emitting CSV/JSON plus a manifest, with exit codes 0 (success),
//! 2 (usage/configuration) and 3 (numerical failure).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use ringq::circuit::{
    circuit_spectrum, parameter_sweep, phase_profile, potential_landscape, summarize_point,
    truncation_convergence, ChargeResolution, CircuitAxis, CircuitSpec,
};
use ringq::coherence::{
    dephasing_time, dielectric_loss_rates, dielectric_loss_trace, frequency_response,
    qp_tunneling_rates, GapAsymmetricThermal, LossChannel, NoiseKind, NoiseParameter,
    QuasiparticleEnv,
};
use ringq::config::{apply_override, RunConfig};
use ringq::disorder::{mc_histogram, DisorderModel, FidelityMode, Metric};
use ringq::dynamics::{
    dispersive_at, purcell_initialization, renormalize_shared_inductance, stirap_transfer,
    ResonatorSpec,
};
use ringq::report::{file_digest, CsvCell, OutputWriter, RunManifest};
use ringq::spin::{disorder_scan_spin, phase_scan, GridAxis, ScanAxis, SpinChainSpec};
use ringq::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "ringq", version, about = "Protected ring-qubit simulator")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dotted-path configuration overrides, e.g. --set circuit.n_max=5.
    #[arg(long = "set", global = true)]
    overrides: Vec<String>,
    /// Master seed for every random stream of the run.
    #[arg(long, global = true, default_value_t = 2024)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Protection diagnostics R and D along a lambda/t scan.
    SpinScan {
        #[arg(long = "M", default_value_t = 4)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// start:end:step
        #[arg(long, default_value = "0:1.5:0.01")]
        lambda_over_t: String,
    },
    /// Spin-level bond-disorder Monte Carlo.
    SpinDisorder {
        #[arg(long = "M", default_value_t = 4)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 0.5)]
        lambda_over_t: f64,
        /// Comma-separated disorder levels.
        #[arg(long, default_value = "0.05,0.10,0.15,0.20")]
        sigma: String,
        #[arg(long, default_value_t = 200)]
        n_samples: usize,
    },
    /// Lowest circuit eigenstates and the protection summary.
    CircuitSpectrum {
        #[arg(short = 'k', long, default_value_t = 4)]
        levels: usize,
        /// Also report the relative f01 shift when n_max grows by 2.
        #[arg(long, default_value_t = false)]
        convergence: bool,
    },
    /// Frequency and protection over one or two circuit axes.
    CircuitSweep {
        /// axis:start:end:steps with axis in {azimuthal-ratio,
        /// diametric-ratio, outer-flux, all-flux, gate}.
        #[arg(long)]
        axis1: String,
        #[arg(long)]
        axis2: Option<String>,
        #[arg(short = 'k', long, default_value_t = 2)]
        levels: usize,
    },
    /// Classical potential landscape and qubit phase profiles.
    Potential {
        #[arg(long, default_value_t = 201)]
        resolution: usize,
    },
    /// Dielectric relaxation rates.
    Coherence {},
    /// Quasiparticle parity-switching rates vs gap asymmetry.
    QpRates {
        /// Comma-separated gap asymmetries in GHz (defaults to the
        /// configured single point).
        #[arg(long)]
        delta_gaps_ghz: Option<String>,
    },
    /// Pure-dephasing estimate for one 1/f noise family.
    Dephasing {
        /// charge | flux | critical-current
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 200)]
        realizations: usize,
        /// Reduced-fidelity synthesis (shorter series).
        #[arg(long, default_value_t = false)]
        reduced: bool,
    },
    /// Fabrication-disorder Monte Carlo histogram.
    DisorderMc {
        /// f01 | dielectric | qp
        #[arg(long, default_value = "f01")]
        metric: String,
        /// all | junction | loop | gate | none
        #[arg(long, default_value = "all")]
        channels: String,
        #[arg(long, default_value_t = 200)]
        n_samples: usize,
        #[arg(long, default_value_t = false)]
        reduced: bool,
    },
    /// Initialization, STIRAP, dispersive readout and inductance
    /// renormalization.
    Dynamics {
        /// init | stirap | dispersive | inductance | all
        #[arg(long, default_value = "all")]
        task: String,
    },
    /// Re-run a golden bundle and compare against stored outputs.
    Verify {
        #[arg(long)]
        bundle: PathBuf,
    },
}

#[derive(Debug, Serialize)]
struct ErrorReport {
    error: String,
    kind: &'static str,
}

fn error_exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidParameter { .. } | Error::Io(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = error_exit_code(&err);
            let report = ErrorReport {
                error: err.to_string(),
                kind: if code == 2 { "configuration" } else { "numerical" },
            };
            println!(
                "{}",
                serde_json::to_string_pretty(&report).unwrap_or_else(|_| report.error.clone())
            );
            ExitCode::from(code)
        }
    }
}

/// Load the configuration file (or an empty tree) and apply overrides.
fn resolve_config(cli: &Cli) -> Result<(RunConfig, toml::Value)> {
    let mut tree = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            text.parse::<toml::Value>()
                .map_err(|e| Error::Config(format!("{}: parse error: {e}", path.display())))?
        }
        None => toml::Value::Table(toml::map::Map::new()),
    };
    for assignment in &cli.overrides {
        apply_override(&mut tree, assignment)?;
    }
    let config = RunConfig::from_tree(&tree)?;
    Ok((config, tree))
}

fn circuit_spec_or_default(config: &RunConfig) -> Result<CircuitSpec> {
    match &config.circuit {
        Some(c) => c.to_spec(),
        None => Ok(CircuitSpec::optimal_point()),
    }
}

fn parse_range(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "range '{text}' must look like start:end:step"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| Error::Config(format!("range '{text}': bad number '{p}'")))
        })
        .collect::<Result<_>>()?;
    let (start, end, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || end < start {
        return Err(Error::Config(format!(
            "range '{text}' must have positive step and end >= start"
        )));
    }
    let n = ((end - start) / step).round() as usize + 1;
    Ok((0..n).map(|k| start + step * k as f64).collect())
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number '{p}' in list")))
        })
        .collect()
}

/// axis:start:end:steps
fn parse_sweep_axis(text: &str) -> Result<(CircuitAxis, Vec<f64>)> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 4 {
        return Err(Error::Config(format!(
            "sweep axis '{text}' must look like name:start:end:steps"
        )));
    }
    let axis = match parts[0] {
        "azimuthal-ratio" => CircuitAxis::AzimuthalRatio,
        "diametric-ratio" => CircuitAxis::DiametricRatio,
        "outer-flux" => CircuitAxis::OuterFluxOffset,
        "all-flux" => CircuitAxis::AllFluxOffset,
        "gate" => CircuitAxis::GateOffset,
        other => {
            return Err(Error::Config(format!("unknown sweep axis '{other}'")));
        }
    };
    let start: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Config(format!("bad start '{}'", parts[1])))?;
    let end: f64 = parts[2]
        .parse()
        .map_err(|_| Error::Config(format!("bad end '{}'", parts[2])))?;
    let steps: usize = parts[3]
        .parse()
        .map_err(|_| Error::Config(format!("bad step count '{}'", parts[3])))?;
    if steps < 2 {
        return Err(Error::Config("need at least 2 sweep steps".into()));
    }
    let values = (0..steps)
        .map(|k| start + (end - start) * k as f64 / (steps - 1) as f64)
        .collect();
    Ok((axis, values))
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::SpinScan { .. } => "spin-scan",
        Command::SpinDisorder { .. } => "spin-disorder",
        Command::CircuitSpectrum { .. } => "circuit-spectrum",
        Command::CircuitSweep { .. } => "circuit-sweep",
        Command::Potential { .. } => "potential",
        Command::Coherence {} => "coherence",
        Command::QpRates { .. } => "qp-rates",
        Command::Dephasing { .. } => "dephasing",
        Command::DisorderMc { .. } => "disorder-mc",
        Command::Dynamics { .. } => "dynamics",
        Command::Verify { .. } => "verify",
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Command::Verify { bundle } = &cli.command {
        return run_verify(bundle);
    }
    let started = Instant::now();
    let (config, tree) = resolve_config(cli)?;
    let mut writer = OutputWriter::new(&cli.out)?;
    let name = command_name(&cli.command);
    execute(&cli.command, &config, cli.seed, &mut writer)?;
    let manifest = RunManifest::new(name, tree, cli.seed);
    writer.finish(manifest, started.elapsed().as_secs_f64())?;
    Ok(())
}

fn execute(
    command: &Command,
    config: &RunConfig,
    seed: u64,
    writer: &mut OutputWriter,
) -> Result<()> {
    match command {
        Command::SpinScan { m, t, lambda_over_t } => {
            let values = parse_range(lambda_over_t)?;
            let base = match &config.spin {
                Some(s) => s.to_spec()?,
                None => SpinChainSpec::new(*m, *t, 0.0),
            };
            let axis = GridAxis {
                axis: ScanAxis::Lambda,
                values: values.iter().map(|v| v * base.t).collect(),
            };
            let rows = phase_scan(&base, &axis, None);
            let csv: Vec<Vec<CsvCell>> = rows
                .iter()
                .map(|row| {
                    let mut cells = vec![CsvCell::from(row.coordinates[0] / base.t)];
                    match &row.outcome {
                        Ok(p) => {
                            cells.push(p.diagnostics.r_aggregate.into());
                            cells.push(p.diagnostics.d_aggregate.into());
                            cells.push(p.diagnostics.combined.into());
                            cells.push(p.diagnostics.gap01.into());
                            cells.push(p.entropy_site1.into());
                            cells.push("".into());
                        }
                        Err(e) => {
                            cells.extend((0..5).map(|_| CsvCell::Text(String::new())));
                            cells.push(e.as_str().into());
                        }
                    }
                    cells
                })
                .collect();
            writer.write_csv(
                "spin_scan.csv",
                &[
                    "lambda_over_t",
                    "R_aggregate",
                    "D_aggregate",
                    "combined",
                    "gap01_GHz",
                    "entropy_site1_bits",
                    "error",
                ],
                &csv,
            )
        }
        Command::SpinDisorder {
            m,
            t,
            lambda_over_t,
            sigma,
            n_samples,
        } => {
            let base = match &config.spin {
                Some(s) => s.to_spec()?,
                None => SpinChainSpec::new(*m, *t, lambda_over_t * t),
            };
            let sigmas = parse_list(sigma)?;
            let rows = disorder_scan_spin(&base, &sigmas, *n_samples, seed)?;
            let csv: Vec<Vec<CsvCell>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.sigma.into(),
                        r.mean_combined.into(),
                        r.mean_entropy_site1.into(),
                        r.mean_gap01.into(),
                        (r.n_samples as i64).into(),
                        (r.n_failed as i64).into(),
                    ]
                })
                .collect();
            writer.write_csv(
                "spin_disorder.csv",
                &[
                    "sigma",
                    "mean_combined",
                    "mean_entropy_site1_bits",
                    "mean_gap01_GHz",
                    "n_samples",
                    "n_failed",
                ],
                &csv,
            )
        }
        Command::CircuitSpectrum { levels, convergence } => {
            let spec = circuit_spec_or_default(config)?;
            let states = circuit_spectrum(&spec, *levels)?;
            let summary = summarize_point(&spec, *levels)?;
            #[derive(Serialize)]
            struct SpectrumReport {
                f01_ghz: f64,
                f0j_ghz: Vec<f64>,
                eigenvalues_ghz: Vec<f64>,
                max_charge_element: f64,
                max_current_element: f64,
                protected: bool,
                #[serde(skip_serializing_if = "Option::is_none")]
                truncation_rel_shift: Option<f64>,
            }
            let truncation_rel_shift = if *convergence {
                Some(truncation_convergence(&spec)?)
            } else {
                None
            };
            writer.write_json(
                "spectrum.json",
                &SpectrumReport {
                    f01_ghz: states.f01(),
                    f0j_ghz: summary.f0j_ghz.clone(),
                    eigenvalues_ghz: states.spectrum.eigenvalues.clone(),
                    max_charge_element: summary.max_charge_element,
                    max_current_element: summary.max_current_element,
                    protected: summary.protected,
                    truncation_rel_shift,
                },
            )
        }
        Command::CircuitSweep { axis1, axis2, levels } => {
            let spec = circuit_spec_or_default(config)?;
            let mut axes = vec![parse_sweep_axis(axis1)?];
            if let Some(a2) = axis2 {
                axes.push(parse_sweep_axis(a2)?);
            }
            let rows = parameter_sweep(&spec, &axes, *levels)?;
            let csv: Vec<Vec<CsvCell>> = rows
                .iter()
                .map(|row| {
                    let mut cells: Vec<CsvCell> =
                        row.coordinates.iter().map(|&c| CsvCell::from(c)).collect();
                    if row.coordinates.len() == 1 {
                        cells.push(CsvCell::Text(String::new()));
                    }
                    match &row.outcome {
                        Ok(s) => {
                            cells.push(s.f0j_ghz[0].into());
                            cells.push(s.max_charge_element.into());
                            cells.push(s.max_current_element.into());
                            cells.push(CsvCell::Int(s.protected as i64));
                            cells.push("".into());
                        }
                        Err(e) => {
                            cells.extend((0..4).map(|_| CsvCell::Text(String::new())));
                            cells.push(e.as_str().into());
                        }
                    }
                    cells
                })
                .collect();
            writer.write_csv(
                "circuit_sweep.csv",
                &[
                    "axis1",
                    "axis2",
                    "f01_GHz",
                    "max_charge_element",
                    "max_current_element",
                    "protected",
                    "error",
                ],
                &csv,
            )
        }
        Command::Potential { resolution } => {
            let spec = circuit_spec_or_default(config)?;
            let n = (*resolution).max(3);
            let grid: Vec<f64> = (0..n)
                .map(|k| -std::f64::consts::PI
                    + 2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64)
                .collect();
            let landscape = potential_landscape(&spec, &grid, &[0.0])?;
            let csv: Vec<Vec<CsvCell>> = grid
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    vec![
                        (x / std::f64::consts::PI).into(),
                        landscape.values[0][i].into(),
                    ]
                })
                .collect();
            writer.write_csv("potential.csv", &["x_over_pi", "V_GHz"], &csv)?;
            #[derive(Serialize)]
            struct MinimaReport {
                minima_x_over_pi: Vec<f64>,
                minima_v_ghz: Vec<f64>,
            }
            writer.write_json(
                "minima.json",
                &MinimaReport {
                    minima_x_over_pi: landscape
                        .minima
                        .iter()
                        .map(|m| m.0 / std::f64::consts::PI)
                        .collect(),
                    minima_v_ghz: landscape.minima.iter().map(|m| m.2).collect(),
                },
            )?;
            let states = circuit_spectrum(&spec, 2)?;
            let profile0 = phase_profile(&states, 0, &grid)?;
            let profile1 = phase_profile(&states, 1, &grid)?;
            let csv: Vec<Vec<CsvCell>> = grid
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    vec![
                        (x / std::f64::consts::PI).into(),
                        profile0[i].into(),
                        profile1[i].into(),
                    ]
                })
                .collect();
            writer.write_csv(
                "phase_profiles.csv",
                &["x_over_pi", "state0", "state1"],
                &csv,
            )
        }
        Command::Coherence {} => {
            let spec = circuit_spec_or_default(config)?;
            let states = circuit_spectrum(&spec, 2)?;
            let channels = [
                LossChannel::junction_intrinsic_default(),
                LossChannel::geometric_default(),
            ];
            let rates = dielectric_loss_rates(&spec, &states, &channels)?;
            let trace =
                dielectric_loss_trace(&spec, &states, channels[0].tan_delta)?;
            #[derive(Serialize)]
            struct CoherenceReport {
                f01_ghz: f64,
                channels: Vec<(String, f64)>,
                uniform_trace_rate_hz: f64,
            }
            writer.write_json(
                "dielectric.json",
                &CoherenceReport {
                    f01_ghz: states.f01(),
                    channels: rates
                        .iter()
                        .map(|r| (format!("{:?}", r.kind), r.rate_hz))
                        .collect(),
                    uniform_trace_rate_hz: trace,
                },
            )
        }
        Command::QpRates { delta_gaps_ghz } => {
            let mut spec = circuit_spec_or_default(config)?;
            spec.charge_resolution = ChargeResolution::Electron;
            let qp = config.quasiparticle.clone().unwrap_or_default();
            let model = GapAsymmetricThermal::default();
            let gaps = match delta_gaps_ghz {
                Some(list) => parse_list(list)?,
                None => vec![qp.delta_gap_ghz],
            };
            let mut rows = Vec::new();
            for &delta in &gaps {
                let env = QuasiparticleEnv {
                    x_qp: qp.x_qp,
                    temperature_k: qp.temperature_k,
                    mean_gap_ghz: qp.mean_gap_ghz,
                    delta_gap_ghz: delta,
                    model: &model,
                };
                let report = qp_tunneling_rates(&spec, &env)?;
                rows.push(report);
            }
            let csv: Vec<Vec<CsvCell>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.delta_gap_ghz.into(),
                        r.gamma_00_hz.into(),
                        r.gamma_01_hz.into(),
                        r.gamma_10_hz.into(),
                        r.gamma_11_hz.into(),
                        r.gamma_total_hz.into(),
                    ]
                })
                .collect();
            writer.write_csv(
                "qp_rates.csv",
                &[
                    "delta_gap_GHz",
                    "gamma_00_Hz",
                    "gamma_01_Hz",
                    "gamma_10_Hz",
                    "gamma_11_Hz",
                    "gamma_total_Hz",
                ],
                &csv,
            )?;
            writer.write_json("qp_rates.json", &rows)
        }
        Command::Dephasing {
            kind,
            realizations,
            reduced,
        } => {
            let spec = circuit_spec_or_default(config)?;
            let noise_kind = match kind.as_str() {
                "charge" => NoiseKind::Charge,
                "flux" => NoiseKind::Flux,
                "critical-current" => NoiseKind::CriticalCurrent,
                other => {
                    return Err(Error::Config(format!("unknown noise kind '{other}'")));
                }
            };
            let mut channel = config.noise_channel(noise_kind)?;
            if *reduced {
                let fallback = ringq::coherence::NoiseChannelSpec::reduced(noise_kind);
                channel.delta_f_hz = fallback.delta_f_hz;
                channel.n_samples = fallback.n_samples;
            }
            let params = NoiseParameter::family(noise_kind);
            let response = frequency_response(&spec, &params)?;
            let result = dephasing_time(&response, &channel, *realizations, seed)?;
            #[derive(Serialize)]
            struct DephasingReport {
                kind: String,
                t_phi_s: Option<f64>,
                lower_bound_s: f64,
                n_realizations: usize,
                reduced: bool,
                f01_hz: f64,
                gradient_hz: Vec<f64>,
            }
            writer.write_json(
                "dephasing.json",
                &DephasingReport {
                    kind: kind.clone(),
                    t_phi_s: result.t_phi_s,
                    lower_bound_s: result.lower_bound_s,
                    n_realizations: result.n_realizations,
                    reduced: *reduced,
                    f01_hz: response.f01_hz,
                    gradient_hz: response.gradient_hz.clone(),
                },
            )?;
            let csv: Vec<Vec<CsvCell>> = result
                .decay
                .iter()
                .map(|(t, f)| vec![(*t).into(), f.re.into(), f.im.into()])
                .collect();
            writer.write_csv("decay.csv", &["t_s", "re_f", "im_f"], &csv)
        }
        Command::DisorderMc {
            metric,
            channels,
            n_samples,
            reduced,
        } => {
            let spec = circuit_spec_or_default(config)?;
            let mut model = config.disorder.clone().unwrap_or_default();
            match channels.as_str() {
                "all" => {}
                "junction" => model = DisorderModel { junctions_enabled: true, loops_enabled: false, gates_enabled: false, ..model },
                "loop" => model = DisorderModel { junctions_enabled: false, loops_enabled: true, gates_enabled: false, ..model },
                "gate" => model = DisorderModel { junctions_enabled: false, loops_enabled: false, gates_enabled: true, ..model },
                "none" => model = DisorderModel { junctions_enabled: false, loops_enabled: false, gates_enabled: false, ..model },
                other => {
                    return Err(Error::Config(format!("unknown channel mask '{other}'")));
                }
            }
            let metric = match metric.as_str() {
                "f01" => Metric::F01Ghz,
                "dielectric" => Metric::DielectricLossHz {
                    tan_delta: LossChannel::junction_intrinsic_default().tan_delta,
                },
                "qp" => Metric::QuasiparticleHz {
                    delta_gap_ghz: config
                        .quasiparticle
                        .clone()
                        .unwrap_or_default()
                        .delta_gap_ghz,
                },
                other => {
                    return Err(Error::Config(format!("unknown metric '{other}'")));
                }
            };
            let fidelity = if *reduced {
                FidelityMode::Reduced
            } else {
                FidelityMode::Full
            };
            let report = mc_histogram(&spec, &model, metric, *n_samples, seed, fidelity)?;
            let csv: Vec<Vec<CsvCell>> = report
                .values
                .iter()
                .map(|&v| vec![CsvCell::from(v)])
                .collect();
            writer.write_csv("samples.csv", &["value"], &csv)?;
            writer.write_json("histogram.json", &report)
        }
        Command::Dynamics { task } => {
            let spec = circuit_spec_or_default(config)?;
            let resonator = match &config.resonator {
                Some(r) => r.to_spec()?,
                None => ResonatorSpec::default(),
            };
            let want = |t: &str| task == t || task == "all";
            if want("inductance") {
                let renorm =
                    renormalize_shared_inductance(resonator.shared_inductance_h, spec.ej_azimuthal_ghz)?;
                writer.write_json("inductance.json", &renorm)?;
            }
            if want("dispersive") {
                let report = dispersive_at(&spec, &resonator, 5, 0.0)?;
                writer.write_json("dispersive.json", &report)?;
            }
            if want("stirap") {
                let schedule = config.stirap.unwrap_or_default();
                let result = stirap_transfer(&schedule, 20.0, 20.0)?;
                #[derive(Serialize)]
                struct StirapReport {
                    efficiency: f64,
                    non_adiabatic: bool,
                }
                writer.write_json(
                    "stirap.json",
                    &StirapReport {
                        efficiency: result.efficiency,
                        non_adiabatic: result.non_adiabatic,
                    },
                )?;
                let csv: Vec<Vec<CsvCell>> = result
                    .trajectory
                    .iter()
                    .map(|(t_ns, pops)| {
                        let mut row = vec![CsvCell::from(t_ns * 1e-9)];
                        row.extend(pops.iter().map(|&p| CsvCell::from(p)));
                        row
                    })
                    .collect();
                writer.write_csv(
                    "stirap_trajectory.csv",
                    &["t_s", "p0", "p1", "p2", "p3", "p4"],
                    &csv,
                )?;
            }
            if want("init") {
                let schedule = config.initialization.unwrap_or_default();
                let result = purcell_initialization(
                    &spec,
                    &resonator,
                    &schedule,
                    ringq::coherence::DEFAULT_DEVICE_TEMPERATURE_K,
                )?;
                #[derive(Serialize)]
                struct InitReport {
                    thermal_p0: f64,
                    final_fidelity: f64,
                }
                writer.write_json(
                    "initialization.json",
                    &InitReport {
                        thermal_p0: result.thermal_p0,
                        final_fidelity: result.final_fidelity,
                    },
                )?;
                let csv: Vec<Vec<CsvCell>> = result
                    .trajectory
                    .iter()
                    .map(|(t_us, f)| vec![CsvCell::from(t_us * 1e-6), CsvCell::from(*f)])
                    .collect();
                writer.write_csv("initialization_trajectory.csv", &["t_s", "fidelity"], &csv)?;
            }
            if !["init", "stirap", "dispersive", "inductance", "all"].contains(&task.as_str()) {
                return Err(Error::Config(format!("unknown dynamics task '{task}'")));
            }
            Ok(())
        }
        Command::Verify { .. } => unreachable!("verify handled in run()"),
    }
}

// ---------------------------------------------------------------------------
// Golden-bundle verification
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct BundleEntry {
    name: String,
    /// CLI arguments, e.g. ["circuit-spectrum", "--set", "circuit.n_max=3"].
    argv: Vec<String>,
    seed: u64,
    /// Maximum absolute numeric difference; 0 demands exact equality.
    tolerance: f64,
}

#[derive(Debug, Serialize)]
struct VerifyCase {
    name: String,
    passed: bool,
    detail: String,
}

fn run_verify(bundle: &Path) -> Result<()> {
    let index_path = bundle.join("bundle.json");
    let text = std::fs::read_to_string(&index_path).map_err(|e| {
        Error::Config(format!("missing bundle index {}: {e}", index_path.display()))
    })?;
    let entries: Vec<BundleEntry> = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("bundle index parse error: {e}")))?;
    let mut cases = Vec::new();
    for entry in &entries {
        let detail = verify_entry(bundle, entry);
        let passed = detail.is_ok();
        cases.push(VerifyCase {
            name: entry.name.clone(),
            passed,
            detail: match detail {
                Ok(()) => "ok".to_string(),
                Err(e) => e,
            },
        });
    }
    for case in &cases {
        println!(
            "{}: {} ({})",
            case.name,
            if case.passed { "pass" } else { "FAIL" },
            case.detail
        );
    }
    if cases.iter().all(|c| c.passed) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{} of {} bundle entries failed",
            cases.iter().filter(|c| !c.passed).count(),
            cases.len()
        )))
    }
}

fn verify_entry(bundle: &Path, entry: &BundleEntry) -> std::result::Result<(), String> {
    let reference_dir = bundle.join(&entry.name);
    if !reference_dir.is_dir() {
        return Err(format!("missing reference directory {}", reference_dir.display()));
    }
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut argv: Vec<String> = vec!["ringq".into()];
    argv.extend(entry.argv.iter().cloned());
    argv.push("--seed".into());
    argv.push(entry.seed.to_string());
    argv.push("--out".into());
    argv.push(work.path().display().to_string());
    let cli = Cli::try_parse_from(&argv).map_err(|e| format!("bad bundle argv: {e}"))?;
    run(&cli).map_err(|e| format!("rerun failed: {e}"))?;
    // Compare every reference data file (the manifest carries timing).
    let mut compared = 0;
    for dirent in std::fs::read_dir(&reference_dir).map_err(|e| e.to_string())? {
        let dirent = dirent.map_err(|e| e.to_string())?;
        let file_name = dirent.file_name().to_string_lossy().to_string();
        if file_name == "manifest.json" {
            continue;
        }
        let new_path = work.path().join(&file_name);
        if !new_path.is_file() {
            return Err(format!("output {file_name} was not produced"));
        }
        compare_files(&dirent.path(), &new_path, entry.tolerance)
            .map_err(|e| format!("{file_name}: {e}"))?;
        compared += 1;
    }
    if compared == 0 {
        return Err("reference directory holds no data files".into());
    }
    Ok(())
}

/// Exact comparison at tolerance 0 (byte digests); numeric comparison of
/// whitespace/comma-separated tokens otherwise.
fn compare_files(reference: &Path, produced: &Path, tolerance: f64) -> std::result::Result<(), String> {
    if tolerance == 0.0 {
        let a = file_digest(reference).map_err(|e| e.to_string())?;
        let b = file_digest(produced).map_err(|e| e.to_string())?;
        if a == b {
            return Ok(());
        }
        // Fall through to the token walk so that the failure names the
        // first differing value rather than just the digests.
    }
    let a = std::fs::read_to_string(reference).map_err(|e| e.to_string())?;
    let b = std::fs::read_to_string(produced).map_err(|e| e.to_string())?;
    let tokens = |s: &str| -> Vec<String> {
        s.split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect()
    };
    let (ta, tb) = (tokens(&a), tokens(&b));
    if ta.len() != tb.len() {
        return Err(format!("token count differs: {} vs {}", ta.len(), tb.len()));
    }
    for (x, y) in ta.iter().zip(&tb) {
        match (x.parse::<f64>(), y.parse::<f64>()) {
            (Ok(fx), Ok(fy)) => {
                if (fx - fy).abs() > tolerance {
                    return Err(format!("numeric diff |{fx} - {fy}| > {tolerance}"));
                }
            }
            _ => {
                if x != y {
                    return Err(format!("token mismatch '{x}' vs '{y}'"));
                }
            }
        }
    }
    if tolerance == 0.0 && a != b {
        return Err("byte content differs (formatting-level change)".into());
    }
    Ok(())
}
