//! Command implementations: wiring configs into the library and serializing
//! results. Every output embeds the tool version, the config hash, and the
//! seed, and contains nothing run-dependent beyond them, so identical
//! configs reproduce identical bytes.

use crate::config::{self, LoadedConfig};
use anyhow::{bail, Context, Result};
use hnoma_core::adaptive::{su_bs_run, su_u_run, AdaptiveRun};
use hnoma_core::analysis::{
    sweep, throughput_hnoma, throughput_hnoma_opt, throughput_oma, throughput_report, EssCache,
    SweepAxis,
};
use hnoma_core::ess::{solve_fixed_cost, solve_snr_cost, EssSolution};
use hnoma_core::game::{CostModel, GameParams, State};
use hnoma_core::math::{thresholds_from_state, Thresholds};
use hnoma_core::replicator::{
    run_replicator, DEFAULT_DRIFT_TOL, DEFAULT_MAX_ITERS, DEFAULT_STEP_SIZE,
};
use hnoma_core::sim::{run_sim, run_sim_traced, SimStats};
use serde::Serialize;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID_SOLUTION: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Serialize, Clone)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
    pub seed: Option<u64>,
}

impl Meta {
    fn new(loaded: &LoadedConfig, seed: Option<u64>) -> Self {
        Self {
            tool: "hnoma",
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: loaded.sha256.clone(),
            seed,
        }
    }

    fn csv_header(&self) -> String {
        let seed = self.seed.map_or("none".to_string(), |s| s.to_string());
        format!(
            "# {} {}\n# config_sha256: {}\n# seed: {}\n",
            self.tool, self.version, self.config_sha256, seed
        )
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

// Output files are created before any computation so an unwritable path
// fails fast.
fn create_output(dir: &Path, name: &str) -> Result<(PathBuf, File)> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path)
        .with_context(|| format!("cannot create output file {}", path.display()))?;
    Ok((path, file))
}

fn union<'a>(a: &[&'a str], b: &[&'a str]) -> Vec<&'a str> {
    let mut v = a.to_vec();
    v.extend_from_slice(b);
    v
}

fn params_from(loaded: &LoadedConfig) -> Result<GameParams> {
    let sub = config::subset_value(&loaded.value, &config::PARAM_KEYS);
    config::parse_params(&sub)?.build()
}

#[derive(Serialize)]
struct EssReport {
    meta: Meta,
    params: GameParams,
    solution: EssSolution,
    /// Inversion thresholds realizing the solved state at the configured
    /// average SNR; tau_pn serializes as null when infinite.
    thresholds: Option<Thresholds>,
}

pub fn cmd_ess(loaded: &LoadedConfig) -> Result<i32> {
    config::check_keys(&loaded.value, &config::PARAM_KEYS)?;
    let params = params_from(loaded)?;
    let solution = match params.cost {
        CostModel::Fixed { c1, c2, .. } => solve_fixed_cost(params.reward, c1, c2)?,
        CostModel::SnrScaled { .. } => solve_snr_cost(&params)?,
    };
    let thresholds = thresholds_from_state(&solution.state, params.avg_snr).ok();
    let valid = solution.valid;
    print_json(&EssReport { meta: Meta::new(loaded, None), params, solution, thresholds })?;
    Ok(if valid { EXIT_OK } else { EXIT_INVALID_SOLUTION })
}

#[derive(Serialize)]
struct RunSummary {
    meta: Meta,
    final_state: [f64; 3],
    converged: bool,
    iterations: usize,
    outputs: Vec<String>,
}

pub fn cmd_replicator(loaded: &LoadedConfig, out: &Path, format: OutputFormat) -> Result<i32> {
    let keys = union(&config::PARAM_KEYS, &config::REPLICATOR_KEYS);
    config::check_keys(&loaded.value, &keys)?;
    let params = params_from(loaded)?;
    let rc: config::ReplicatorConfig =
        serde_json::from_value(config::subset_value(&loaded.value, &config::REPLICATOR_KEYS))?;
    let x0 = State::new(rc.x0[0], rc.x0[1], rc.x0[2])?;

    let name = match format {
        OutputFormat::Csv => "trajectory.csv",
        OutputFormat::Json => "trajectory.json",
    };
    let (path, file) = create_output(out, name)?;
    let traj = run_replicator(
        &x0,
        &params,
        rc.mu.unwrap_or(DEFAULT_STEP_SIZE),
        rc.max_iters.unwrap_or(DEFAULT_MAX_ITERS),
        rc.drift_tol.unwrap_or(DEFAULT_DRIFT_TOL),
    )?;

    let meta = Meta::new(loaded, None);
    let mut w = BufWriter::new(file);
    match format {
        OutputFormat::Csv => {
            w.write_all(meta.csv_header().as_bytes())?;
            traj.write_csv(&mut w)?;
        }
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct TrajectoryDoc<'a> {
                meta: &'a Meta,
                trajectory: &'a hnoma_core::replicator::Trajectory,
            }
            serde_json::to_writer_pretty(&mut w, &TrajectoryDoc { meta: &meta, trajectory: &traj })?;
        }
    }
    w.flush()?;

    print_json(&RunSummary {
        meta,
        final_state: traj.final_state().as_array(),
        converged: traj.converged,
        iterations: traj.iterations,
        outputs: vec![path.display().to_string()],
    })?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SimSummary {
    meta: Meta,
    throughput_per_user: f64,
    action_freq: [f64; 3],
    outputs: Vec<String>,
}

pub fn cmd_simulate(loaded: &LoadedConfig, out: &Path, seed: Option<u64>) -> Result<i32> {
    let keys = union(&config::PARAM_KEYS, &config::SIMULATE_KEYS);
    config::check_keys(&loaded.value, &keys)?;
    let params = params_from(loaded)?;
    let sc: config::SimulateConfig =
        serde_json::from_value(config::subset_value(&loaded.value, &config::SIMULATE_KEYS))?;
    let cfg = sc.build(&params, seed)?;
    cfg.validate()?;
    let policy = sc.policy.build()?;
    let meta = Meta::new(loaded, Some(cfg.seed));

    let (stats_path, stats_file) = create_output(out, "stats.json")?;
    let mut outputs = vec![stats_path.display().to_string()];

    let stats: SimStats = if sc.trace.unwrap_or(false) {
        let (trace_path, trace_file) = create_output(out, "trace.csv")?;
        outputs.push(trace_path.display().to_string());
        let mut tw = BufWriter::new(trace_file);
        tw.write_all(meta.csv_header().as_bytes())?;
        writeln!(tw, "slot,block,user,action,snr,power,success")?;
        let mut io_err = None;
        let stats = run_sim_traced(&cfg, &policy, &params, |o| {
            for (j, u) in o.users.iter().enumerate() {
                if let Err(e) = writeln!(
                    tw,
                    "{},{},{},{},{},{},{}",
                    o.slot,
                    o.block,
                    2 * o.block + j,
                    u.action.label(),
                    u.snr,
                    u.power,
                    u.success
                ) {
                    io_err.get_or_insert(e);
                }
            }
        })?;
        if let Some(e) = io_err {
            return Err(e.into());
        }
        tw.flush()?;
        stats
    } else {
        run_sim(&cfg, &policy, &params)?
    };

    #[derive(Serialize)]
    struct StatsDoc<'a> {
        meta: &'a Meta,
        stats: &'a SimStats,
    }
    let mut w = BufWriter::new(stats_file);
    serde_json::to_writer_pretty(&mut w, &StatsDoc { meta: &meta, stats: &stats })?;
    w.flush()?;

    print_json(&SimSummary {
        meta,
        throughput_per_user: stats.throughput_per_user,
        action_freq: stats.action_freq,
        outputs,
    })?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    SuBs,
    SuU,
}

#[derive(Serialize)]
struct AdaptiveSummary {
    meta: Meta,
    protocol: &'static str,
    final_state: [f64; 3],
    tail_mean_20: [f64; 3],
    flags: Vec<String>,
    outputs: Vec<String>,
}

pub fn cmd_adaptive(
    loaded: &LoadedConfig,
    protocol: Protocol,
    out: &Path,
    seed: Option<u64>,
    format: OutputFormat,
) -> Result<i32> {
    let keys = union(&config::PARAM_KEYS, &config::ADAPTIVE_KEYS);
    config::check_keys(&loaded.value, &keys)?;
    let params = params_from(loaded)?;
    let ac: config::AdaptiveConfig =
        serde_json::from_value(config::subset_value(&loaded.value, &config::ADAPTIVE_KEYS))?;
    let (cfg, sched, x0, opts) = ac.build(&params, seed)?;
    let meta = Meta::new(loaded, Some(cfg.seed));

    let name = match format {
        OutputFormat::Csv => "trajectory.csv",
        OutputFormat::Json => "trajectory.json",
    };
    let (path, file) = create_output(out, name)?;
    let mut outputs = vec![path.display().to_string()];
    let users_out = if opts.record_user_states && protocol == Protocol::SuU {
        let (p, f) = create_output(out, "users.json")?;
        outputs.push(p.display().to_string());
        Some(f)
    } else {
        None
    };

    let run: AdaptiveRun = match protocol {
        Protocol::SuBs => su_bs_run(&cfg, &sched, &params, ac.mu, &x0, &opts)?,
        Protocol::SuU => su_u_run(&cfg, &sched, &params, ac.mu, &x0, &opts)?,
    };

    let mut w = BufWriter::new(file);
    match format {
        OutputFormat::Csv => {
            w.write_all(meta.csv_header().as_bytes())?;
            run.write_csv(&mut w)?;
        }
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct RunDoc<'a> {
                meta: &'a Meta,
                records: &'a [hnoma_core::adaptive::BlockRecord],
                flags: &'a [String],
            }
            serde_json::to_writer_pretty(
                &mut w,
                &RunDoc { meta: &meta, records: &run.records, flags: &run.flags },
            )?;
        }
    }
    w.flush()?;

    if let Some(f) = users_out {
        #[derive(Serialize)]
        struct UsersDoc<'a> {
            meta: &'a Meta,
            dispersion: &'a Option<Vec<[f64; 3]>>,
            user_states: &'a Option<Vec<Vec<State>>>,
        }
        let mut w = BufWriter::new(f);
        serde_json::to_writer_pretty(
            &mut w,
            &UsersDoc { meta: &meta, dispersion: &run.dispersion, user_states: &run.user_states },
        )?;
        w.flush()?;
    }

    print_json(&AdaptiveSummary {
        meta,
        protocol: match protocol {
            Protocol::SuBs => "su-bs",
            Protocol::SuU => "su-u",
        },
        final_state: run.final_state().as_array(),
        tail_mean_20: run.tail_mean(20),
        flags: run.flags.clone(),
        outputs,
    })?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SweepSummary {
    meta: Meta,
    axis: SweepAxis,
    points: usize,
    invalid_points: usize,
    crossover: Option<hnoma_core::analysis::Crossover>,
    outputs: Vec<String>,
}

pub fn cmd_sweep(loaded: &LoadedConfig, out: &Path, format: OutputFormat) -> Result<i32> {
    let keys = union(&config::PARAM_KEYS, &config::SWEEP_KEYS);
    config::check_keys(&loaded.value, &keys)?;
    let params = params_from(loaded)?;
    if matches!(params.cost, CostModel::Fixed { .. }) {
        bail!("sweeps cover the scaled-cost model; give c rather than C1/C2");
    }
    let sc: config::SweepConfig =
        serde_json::from_value(config::subset_value(&loaded.value, &config::SWEEP_KEYS))?;
    let values = sc.values()?;
    let axis = match sc.axis {
        config::AxisConfig::C => SweepAxis::CostScale,
        config::AxisConfig::Gbar => SweepAxis::AvgSnr,
    };

    let table_name = match format {
        OutputFormat::Csv => "sweep.csv",
        OutputFormat::Json => "sweep.json",
    };
    let (table_path, table_file) = create_output(out, table_name)?;
    let (summary_path, summary_file) = create_output(out, "summary.json")?;

    let mut cache = EssCache::new();
    let table = sweep(&params, axis, &values, &mut cache)?;
    let meta = Meta::new(loaded, None);

    let mut w = BufWriter::new(table_file);
    match format {
        OutputFormat::Csv => {
            w.write_all(meta.csv_header().as_bytes())?;
            table.write_csv(&mut w)?;
        }
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct TableDoc<'a> {
                meta: &'a Meta,
                table: &'a hnoma_core::analysis::SweepTable,
            }
            serde_json::to_writer_pretty(&mut w, &TableDoc { meta: &meta, table: &table })?;
        }
    }
    w.flush()?;

    let summary = SweepSummary {
        meta,
        axis,
        points: table.rows.len(),
        invalid_points: table.rows.iter().filter(|r| !r.solution.valid).count(),
        crossover: table.crossover,
        outputs: vec![table_path.display().to_string(), summary_path.display().to_string()],
    };
    let mut w = BufWriter::new(summary_file);
    serde_json::to_writer_pretty(&mut w, &summary)?;
    w.flush()?;

    print_json(&summary)?;
    Ok(EXIT_OK)
}

pub fn cmd_throughput(loaded: &LoadedConfig) -> Result<i32> {
    config::check_keys(&loaded.value, &config::THROUGHPUT_KEYS)?;
    let tc: config::ThroughputConfig = serde_json::from_value(loaded.value.clone())?;
    let meta = Meta::new(loaded, None);
    match (tc.state, tc.delta) {
        (Some(x), None) => {
            let state = State::new(x[0], x[1], x[2])?;
            #[derive(Serialize)]
            struct AtState {
                meta: Meta,
                state: State,
                report: hnoma_core::analysis::ThroughputReport,
            }
            print_json(&AtState { meta, state, report: throughput_report(&state)? })?;
        }
        (None, Some(delta)) => {
            let (opt, argmax) = throughput_hnoma_opt(delta)?;
            #[derive(Serialize)]
            struct AtDelta {
                meta: Meta,
                delta: f64,
                eta_oma: f64,
                eta_hnoma_opt: f64,
                opt_state: State,
                eta_hnoma_at_opt: f64,
                ratio_opt_vs_oma: f64,
            }
            let oma = throughput_oma(delta)?;
            print_json(&AtDelta {
                meta,
                delta,
                eta_oma: oma,
                eta_hnoma_opt: opt,
                opt_state: argmax,
                eta_hnoma_at_opt: throughput_hnoma(&argmax),
                ratio_opt_vs_oma: if oma > 0.0 { opt / oma } else { f64::INFINITY },
            })?;
        }
        _ => bail!("throughput needs exactly one of \"state\" and \"delta\""),
    }
    Ok(EXIT_OK)
}
