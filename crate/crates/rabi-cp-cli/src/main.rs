//! Command-line front end: every pipeline and the individual computations,
//! with config-file and flag overrides and a reproduction manifest next to
//! each output.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on numerical
//! failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rabi_cp::casimir::{detuning, PotentialKind};
use rabi_cp::estimation::{
    aggregate_sensitivity, fit_ml, per_time_sensitivities, result_to_csv, simulate_record,
    MeasurementRecord, MeasurementSchedule,
};
use rabi_cp::experiments::{run_crossover, run_fig1, run_fig2a, run_fig2b, run_scaling};
use rabi_cp::spin_states::squeezing_parameter;

mod config;
mod output;

use config::{CliError, Overrides, Resolved};
use output::OutputSink;

#[derive(Parser)]
#[command(
    name = "rabi-cp",
    version,
    about = "Double-well Rabi interferometer: Casimir-Polder detuning and estimation pipelines"
)]
struct Cli {
    /// TOML config file; omitted keys fall back to the built-in defaults,
    /// command-line flags override file values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output directory for CSV tables and manifests
    /// (default `.`, or the RABI_CP_OUT_DIR environment variable).
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Cap the worker pool for grid sweeps and Monte-Carlo trials.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detuning delta/hbar at one plate distance, all temperature laws
    Detuning(Overrides),
    /// Per-time and aggregated sensitivity of the configured schedule
    Sensitivity(Overrides),
    /// Draw a seeded measurement record
    Simulate(Overrides),
    /// Maximum-likelihood fit of a record CSV
    Fit(FitArgs),
    /// Detuning vs distance with full-noise error bars
    Fig1(Overrides),
    /// Sensitivity vs evolution phase for squeezed inputs
    Fig2a(Overrides),
    /// Optimal-point vs uniform-grid estimation strategies
    Fig2b(Overrides),
    /// Particle-number scaling exponents
    Scaling(Overrides),
    /// Time-scaling crossover t*
    Crossover(Overrides),
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    overrides: Overrides,

    /// Record CSV (`t_s,n_mean`) to fit.
    #[arg(long, value_name = "FILE")]
    record: PathBuf,

    /// Lower edge of the detuning search interval, 1/s
    /// (default 0.2 x the configured delta_rate).
    #[arg(long)]
    search_lo: Option<f64>,

    /// Upper edge of the detuning search interval, 1/s
    /// (default 3 x the configured delta_rate).
    #[arg(long)]
    search_hi: Option<f64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // ignored if a pool already exists (tests drive main() once)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let out = OutputSink::resolve(cli.out_dir.as_deref())?;
    match cli.command {
        Command::Detuning(ov) => {
            let r = Resolved::load(cli.config.as_deref(), &ov, "detuning")?;
            let surface = r.config.surface().map_err(CliError::config)?;
            let zero = detuning(&surface, PotentialKind::ZeroTemperature)?;
            println!("delta_0K/hbar = {} 1/s", zero.delta_rate);
            for &t in &r.config.temperatures_k {
                let th = detuning(&surface.with_temperature(t), PotentialKind::Thermal)?;
                println!("delta_{t}K/hbar = {} 1/s", th.delta_rate);
            }
            let table = rabi_cp::casimir::detuning_curve(
                &[r.config.d_m],
                &surface,
                &r.config.temperatures_k,
            )?;
            out.write_run(&r, "detuning.csv", &table.to_csv())?;
        }
        Command::Sensitivity(ov) => {
            let r = Resolved::load(cli.config.as_deref(), &ov, "sensitivity")?;
            let cfg = &r.config;
            let p = cfg.params()?;
            let state = cfg.state_for_xi2(r.input_xi2)?;
            let m = state.moments();
            let noise = cfg.noise()?;
            let schedule = MeasurementSchedule::uniform_first_period(&p, cfg.k, cfg.m)?;
            let per = per_time_sensitivities(&m, &p, &schedule, &noise);
            let err = aggregate_sensitivity(&per)?;
            let mut csv = String::from("t_s,delta2_persec2\n");
            for (t, s2) in schedule.times().iter().zip(&per) {
                csv.push_str(&format!("{t},{s2}\n"));
            }
            println!("Delta delta_ML = {err} 1/s");
            println!("Delta delta_ML / delta = {}", err / p.delta_rate());
            out.write_run(&r, "sensitivity.csv", &csv)?;
        }
        Command::Simulate(ov) => {
            let r = Resolved::load(cli.config.as_deref(), &ov, "simulate")?;
            let cfg = &r.config;
            let p = cfg.params()?;
            let state = cfg.state_for_xi2(r.input_xi2)?;
            let m = state.moments();
            let noise = cfg.noise()?;
            let schedule = MeasurementSchedule::uniform_first_period(&p, cfg.k, cfg.m)?;
            let record = simulate_record(&m, &p, &schedule, &noise, cfg.seed)?;
            println!(
                "simulated {} probe times x {} repetitions at delta = {} 1/s (seed {})",
                cfg.k, cfg.m, cfg.delta_rate, cfg.seed
            );
            out.write_run(&r, "record.csv", &record.to_csv())?;
        }
        Command::Fit(args) => {
            let mut r = Resolved::load(cli.config.as_deref(), &args.overrides, "fit")?;
            let cfg = r.config.clone();
            let text = std::fs::read_to_string(&args.record)
                .map_err(|e| CliError::config(format!("{}: {e}", args.record.display())))?;
            let record = MeasurementRecord::from_csv(&text).map_err(CliError::config)?;
            let state = cfg.state_for_xi2(r.input_xi2)?;
            let m = state.moments();
            let noise = cfg.noise()?;
            let lo = args.search_lo.unwrap_or(0.2 * cfg.delta_rate);
            let hi = args.search_hi.unwrap_or(3.0 * cfg.delta_rate);
            let fitres = fit_ml(&record, &m, cfg.ej_rate, cfg.m, &noise, (lo, hi))?;
            println!(
                "delta_est = {} +- {} 1/s  ({} objective evaluations)",
                fitres.delta_est, fitres.delta_err, fitres.iterations
            );
            let xi2 = squeezing_parameter(&m).unwrap_or(f64::NAN);
            let csv = result_to_csv(&fitres, record.times().len(), cfg.m, xi2, &noise, cfg.seed);
            r.note("record", args.record.display().to_string());
            r.note("search_lo", lo.to_string());
            r.note("search_hi", hi.to_string());
            out.write_run(&r, "fit.csv", &csv)?;
        }
        Command::Fig1(ov) => {
            let mut r = Resolved::load(cli.config.as_deref(), &ov, "fig1")?;
            let table = run_fig1(&r.config)?;
            r.calibration = Some(table.calibration);
            println!(
                "calibrated localization mix {} (raw {} -> {} 1/s at d = {} m)",
                table.calibration.localization_mix,
                table.calibration.raw_delta_rate,
                table.calibration.target_delta_rate,
                r.config.d_m
            );
            for row in &table.rows {
                println!(
                    "d = {:>9.3e} m: delta_0K = {:.4} 1/s, err = {:.4}, bias = {:.4}, significance = {:.1}",
                    row.d_m, row.delta_zero_t, row.delta_err_stat, row.delta_bias_int, row.significance
                );
            }
            out.write_run(&r, "fig1.csv", &table.to_csv())?;
        }
        Command::Fig2a(ov) => {
            let r = Resolved::load(cli.config.as_deref(), &ov, "fig2a")?;
            let table = run_fig2a(&r.config)?;
            for c in &table.curves {
                println!(
                    "xi2 = {} (exact {:.4}): minimum Delta delta/delta = {:.4e} at omega t = {:.4}",
                    c.xi2_target, c.xi2_exact, c.min_rel, c.min_omega
                );
            }
            out.write_run(&r, "fig2a.csv", &table.to_csv())?;
        }
        Command::Fig2b(ov) => {
            let r = Resolved::load(cli.config.as_deref(), &ov, "fig2b")?;
            let table = run_fig2b(&r.config)?;
            println!(
                "optimal-point improvement at xi2 = 0.58: {:.3}",
                table.improvement_at_xi2_058
            );
            for row in &table.rows {
                println!(
                    "xi2 = {:>5}: optimal {:.4e} (exact {:.4e}), uniform {:.4e}, ratio {:.2}",
                    row.xi2_target,
                    row.rel_optimal_formula,
                    row.rel_optimal_exact,
                    row.rel_uniform,
                    row.ratio
                );
            }
            out.write_run(&r, "fig2b.csv", &table.to_csv())?;
        }
        Command::Scaling(ov) => {
            let r = Resolved::load(cli.config.as_deref(), &ov, "scaling")?;
            let s = run_scaling(&r.config)?;
            println!("beta_css = {:.4}", s.beta_css);
            println!("beta_gaussian_sigma_half = {:.4}", s.beta_gaussian);
            println!("sigma_star = {:.4}", s.sigma_star);
            out.write_run(&r, "scaling.csv", &s.to_csv())?;
        }
        Command::Crossover(ov) => {
            let r = Resolved::load(cli.config.as_deref(), &ov, "crossover")?;
            let c = run_crossover(&r.config)?;
            println!("t_star = {:.2} s", c.t_star_s);
            out.write_run(&r, "crossover.csv", &c.to_csv())?;
        }
    }
    Ok(())
}
