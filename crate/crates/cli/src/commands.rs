//! Subcommand bodies. Each returns the bytes to emit.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufReader, Write};

use serde_json::{json, Value};

use etrap_core::cooling::{
    bose_einstein, cavity_cooling_equilibrium, run_cooling_protocol, sympathetic_steady_state, write_trajectory_csv,
    CoolingProtocolParams, PopulationState, SympatheticParams,
};
use etrap_core::coulomb::{published_rows, table2_report, write_table_csv, TableSettings};
use etrap_core::dispersive::{frequency_grid, noise_temperature_for_dbm, readout_budget, write_sweep_csv, zeta_sweep};
use etrap_core::report::{fmt_sig, round_sig};
use etrap_core::spectra::{find_modes, fit_lorentzian, read_trace_csv};
use etrap_core::trapfields::{
    characterize_layout, characterize_map, ingest_field_map, quadrupole_map, write_field_map_csv, AnalysisGrid,
    DriveRole, ElectrodeLayout, FieldMap, Species, Strip, TrapOutcome,
};
use etrap_core::{CircuitParams, ThermalEnv};

use crate::config::Config;
use crate::{Cli, CliError, Command};

fn sections(cmd: &Command) -> &'static [&'static str] {
    match cmd {
        Command::DispersiveSweep | Command::ReadoutBudget => &["dispersive"],
        Command::Cooling(_) => &["cooling"],
        Command::CoulombTable => &["coulomb"],
        Command::Trap(_) => &["trapfields"],
        Command::FitSpectrum(_) => &["spectra"],
    }
}

pub fn execute(cli: &Cli, stderr: &mut dyn Write) -> Result<Vec<u8>, CliError> {
    let cfg = Config::load(cli.preset.as_deref(), cli.config.as_deref())?;
    if cli.echo_config {
        stderr.write_all(cfg.echo(sections(&cli.command))?.as_bytes())?;
    }
    let mut out = Vec::new();
    match &cli.command {
        Command::DispersiveSweep => dispersive_sweep(&cfg, &mut out)?,
        Command::Cooling(a) if a.mode.protocol => cooling_protocol(&cfg, &mut out)?,
        Command::Cooling(a) if a.mode.sympathetic => cooling_sympathetic(&cfg, &mut out)?,
        Command::Cooling(_) => cooling_cavity(&cfg, &mut out)?,
        Command::CoulombTable => coulomb_table(&cfg, &mut out)?,
        Command::Trap(a) => {
            let outcome = if a.source.layout {
                trap_layout(&cfg)?
            } else if let Some(path) = &a.source.fieldmap {
                let map = ingest_field_map(path, cfg.get("trapfields", "drive_freq")?)?;
                characterize_map(&map, &species(&cfg)?)?
            } else {
                let map = synthetic_map(&cfg)?;
                if let Some(path) = &a.export_map {
                    let mut f = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                    write_field_map_csv(&mut f, &map)?;
                }
                characterize_map(&map, &species(&cfg)?)?
            };
            write_json(&mut out, &trap_json(outcome)?)?;
        }
        Command::FitSpectrum(a) => {
            let file = File::open(&a.trace).map_err(|e| CliError::Io(format!("{}: {e}", a.trace.display())))?;
            let trace = read_trace_csv(BufReader::new(file))?;
            let fit = fit_lorentzian(&trace, None)?;
            let mut v = serde_json::to_value(fit.record()).map_err(json_err)?;
            if a.modes {
                let base = cfg.opt("spectra", "base_freq")?.map(|w| w / TAU);
                let modes = find_modes(&trace, cfg.get("spectra", "threshold")?, base);
                v = json!({ "fit": v, "modes": modes });
            }
            write_json(&mut out, &v)?;
        }
        Command::ReadoutBudget => readout(&cfg, &mut out)?,
    }
    Ok(out)
}

fn json_err(e: serde_json::Error) -> CliError {
    CliError::Numerical(format!("json encoding: {e}"))
}

/// Rounds every float to 12 significant digits so output is reproducible.
fn rounded(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap_or(f64::NAN));
            serde_json::Number::from_f64(if x == 0.0 { 0.0 } else { x }).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(rounded).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, rounded(v))).collect()),
        other => other,
    }
}

fn write_json(out: &mut Vec<u8>, v: &Value) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, &rounded(v.clone())).map_err(json_err)?;
    out.push(b'\n');
    Ok(())
}

fn circuit(cfg: &Config, omega_e: f64) -> Result<CircuitParams, CliError> {
    Ok(CircuitParams::new(
        omega_e,
        cfg.get("dispersive", "omega_mw")?,
        cfg.get("dispersive", "omega_q")?,
        cfg.get("dispersive", "g_ec")?,
        cfg.get("dispersive", "g_sc")?,
    )?)
}

fn dispersive_sweep(cfg: &Config, out: &mut Vec<u8>) -> Result<(), CliError> {
    let (lo, hi) = (cfg.get("dispersive", "sweep_start")?, cfg.get("dispersive", "sweep_stop")?);
    let points = cfg.get_usize("dispersive", "points")?;
    if points < 2 || !(hi > lo) {
        return Err(cfg.error_at("dispersive", "points", "sweep needs points >= 2 and sweep_stop > sweep_start".into()));
    }
    let n_fock = cfg.get_usize("dispersive", "n_fock")?;
    let p = circuit(cfg, lo)?;
    let grid = frequency_grid(lo / TAU, hi / TAU, points);
    let pts = zeta_sweep(&p, &grid, n_fock)?;
    write_sweep_csv(out, &p, n_fock, &pts)?;
    Ok(())
}

fn refill_env(cfg: &Config) -> Result<ThermalEnv, CliError> {
    let omega = cfg.get("cooling", "mode_freq")?;
    let gamma_th = match cfg.opt("cooling", "gamma_th")? {
        Some(g) => g,
        None => omega / cfg.get("cooling", "q_mode")?,
    };
    Ok(ThermalEnv::new(cfg.get("cooling", "temperature")?, gamma_th, cfg.get("cooling", "heating")?)?)
}

fn cooling_protocol(cfg: &Config, out: &mut Vec<u8>) -> Result<(), CliError> {
    let params = CoolingProtocolParams {
        rabi_gf: cfg.get("cooling", "rabi_gf")?,
        rabi_ef: cfg.get("cooling", "rabi_ef")?,
        rabi_ge: cfg.get("cooling", "rabi_ge")?,
        pulse_error: cfg.get("cooling", "pulse_error")?,
        t_meas: cfg.get("cooling", "t_meas")?,
        readout_error: cfg.get("cooling", "readout_error")?,
        n_cavity_max: cfg.get_usize("cooling", "n_cavity_max")?,
        cavity_omega: cfg.get("cooling", "mode_freq")?,
        refill: refill_env(cfg)?,
        ladder: true,
    };
    let n0 = match cfg.opt("cooling", "initial_n")? {
        Some(n) => n,
        None => bose_einstein(params.cavity_omega, cfg.get("cooling", "temperature")?),
    };
    let init = PopulationState::thermal(n0, params.n_cavity_max);
    let traj = run_cooling_protocol(&params, &init, cfg.get_usize("cooling", "cycles")?)?;
    write_trajectory_csv(out, &params, &traj)?;
    Ok(())
}

fn cooling_sympathetic(cfg: &Config, out: &mut Vec<u8>) -> Result<(), CliError> {
    let n_th = match cfg.opt("cooling", "n_th")? {
        Some(n) => n,
        None => bose_einstein(cfg.get("cooling", "mode_freq")?, cfg.get("cooling", "temperature")?),
    };
    let p = SympatheticParams {
        g: cfg.get("cooling", "g")?,
        gamma_i: cfg.get("cooling", "gamma_i")?,
        gamma_th_e: cfg.get("cooling", "gamma_th_e")?,
        n_th,
    };
    let r = sympathetic_steady_state(&p)?;
    let published = cfg.opt("cooling", "ne_paper")?.map_or("nan".to_string(), fmt_sig);
    writeln!(out, "g_hz,gamma_i_per_s,gamma_th_e_per_s,n_th,cooling_rate_per_s,ne_calc,ne_paper,weak_coupling_valid")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{},{}",
        fmt_sig(p.g / TAU),
        fmt_sig(p.gamma_i),
        fmt_sig(p.gamma_th_e),
        fmt_sig(p.n_th),
        fmt_sig(r.cooling_rate),
        fmt_sig(r.n_e),
        published,
        r.weak_coupling_valid
    )?;
    Ok(())
}

fn cooling_cavity(cfg: &Config, out: &mut Vec<u8>) -> Result<(), CliError> {
    let omega = cfg.get("cooling", "mode_freq")?;
    let env = refill_env(cfg)?;
    let gamma_c = cfg.get("cooling", "gamma_c")?;
    let n_eq = cavity_cooling_equilibrium(gamma_c, &env, omega)?;
    writeln!(out, "mode_freq_hz,temperature_k,gamma_c_per_s,heating_per_s,n_bath,n_eq")?;
    writeln!(
        out,
        "{},{},{},{},{},{}",
        fmt_sig(omega / TAU),
        fmt_sig(env.temperature),
        fmt_sig(gamma_c),
        fmt_sig(env.heating),
        fmt_sig(bose_einstein(omega, env.temperature)),
        fmt_sig(n_eq)
    )?;
    Ok(())
}

fn coulomb_table(cfg: &Config, out: &mut Vec<u8>) -> Result<(), CliError> {
    let settings = TableSettings {
        omega_i: cfg.get("coulomb", "ion_freq")?,
        gamma_i: cfg.get("coulomb", "gamma_i")?,
        gamma_th_e: cfg.get("coulomb", "gamma_th_e")?,
        temperature: cfg.get("coulomb", "temperature")?,
        beta: cfg.get("coulomb", "beta")?,
        alpha_k: cfg.get("coulomb", "alpha_k")?,
    };
    let all = published_rows();
    let rows = match cfg.get_usize("coulomb", "row")? {
        0 => all.to_vec(),
        r if r <= all.len() => vec![all[r - 1]],
        r => return Err(cfg.error_at("coulomb", "row", format!("row {r} outside 0..=4"))),
    };
    let lines = table2_report(&rows, &settings)?;
    write_table_csv(out, &settings, &lines)?;
    Ok(())
}

fn species(cfg: &Config) -> Result<Species, CliError> {
    match cfg.get_text("trapfields", "species")?.as_str() {
        "electron" => Ok(Species::electron()),
        "ion" | "be9" | "beryllium" => Ok(Species::beryllium_ion()),
        other => Err(cfg.error_at("trapfields", "species", format!("unknown species {other:?} (electron, ion)"))),
    }
}

/// Symmetric rails: RF on ±[rf_inner, rf_outer], MW on ±[mw_inner, mw_outer],
/// grounded strips filling the gaps.
fn layout(cfg: &Config) -> Result<ElectrodeLayout, CliError> {
    let g = |k| cfg.get("trapfields", k);
    let (rf_in, rf_out, mw_in, mw_out) = (g("rf_inner")?, g("rf_outer")?, g("mw_inner")?, g("mw_outer")?);
    if !(0.0 < mw_in && mw_in < mw_out && mw_out <= rf_in && rf_in < rf_out) {
        return Err(CliError::Config {
            line: None,
            msg: "trapfields: need 0 < mw_inner < mw_outer <= rf_inner < rf_outer".into(),
        });
    }
    let (v_rf, v_mw) = (g("rf_voltage")?, g("mw_voltage")?);
    let strip = |a: f64, b: f64, voltage: f64, role| Strip { x_min: a, x_max: b, voltage, role };
    let mut strips = vec![strip(-rf_out, -rf_in, v_rf, DriveRole::Rf)];
    if mw_out < rf_in {
        strips.push(strip(-rf_in, -mw_out, 0.0, DriveRole::Gnd));
    }
    strips.extend([
        strip(-mw_out, -mw_in, v_mw, DriveRole::Mw),
        strip(-mw_in, mw_in, 0.0, DriveRole::Gnd),
        strip(mw_in, mw_out, v_mw, DriveRole::Mw),
    ]);
    if mw_out < rf_in {
        strips.push(strip(mw_out, rf_in, 0.0, DriveRole::Gnd));
    }
    strips.push(strip(rf_in, rf_out, v_rf, DriveRole::Rf));
    let l = ElectrodeLayout { strips, omega_rf: g("rf_freq")?, omega_mw: g("mw_freq")?, ceiling: None };
    l.validate()?;
    Ok(l)
}

fn trap_layout(cfg: &Config) -> Result<TrapOutcome, CliError> {
    let grid = AnalysisGrid {
        nx: cfg.get_usize("trapfields", "grid_nx")?,
        nz: cfg.get_usize("trapfields", "grid_nz")?,
        lateral_factor: cfg.get("trapfields", "lateral_factor")?,
        z_min: cfg.get("trapfields", "z_min")?,
        z_max: cfg.get("trapfields", "z_max")?,
    };
    Ok(characterize_layout(&layout(cfg)?, &species(cfg)?, &grid)?)
}

/// 2D quadrupole whose pseudopotential has the configured secular frequency.
fn synthetic_map(cfg: &Config) -> Result<FieldMap, CliError> {
    let sp = species(cfg)?;
    let omega = cfg.get("trapfields", "drive_freq")?;
    let w_sec = cfg.get("trapfields", "secular_freq")?;
    let half = cfg.get("trapfields", "map_half_width")?;
    let n = cfg.get_usize("trapfields", "map_points")?;
    if n < 5 || !(half > 0.0) {
        return Err(cfg.error_at("trapfields", "map_points", "synthetic map needs >= 5 points and positive width".into()));
    }
    let axis: Vec<f64> = (0..n).map(|k| -half + 2.0 * half * k as f64 / (n - 1) as f64).collect();
    let gradient = std::f64::consts::SQRT_2 * sp.mass * omega * w_sec / sp.charge.abs();
    Ok(quadrupole_map([axis.clone(), vec![0.0], axis], [0.0; 3], gradient, omega)?)
}

fn trap_json(outcome: TrapOutcome) -> Result<Value, CliError> {
    Ok(match outcome {
        TrapOutcome::Trapped(t) => {
            let mut v = serde_json::to_value(&t).map_err(json_err)?;
            v["trapped"] = Value::Bool(true);
            v
        }
        TrapOutcome::NoTrap(reason) => json!({ "trapped": false, "reason": reason }),
    })
}

fn readout(cfg: &Config, out: &mut Vec<u8>) -> Result<(), CliError> {
    let omega = cfg.get("dispersive", "readout_freq")?;
    let eta = cfg.get("dispersive", "efficiency")?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(cfg.error_at("dispersive", "efficiency", format!("{eta} outside [0, 1]")));
    }
    let kappa = omega / cfg.get("dispersive", "q_loaded")?;
    let t_n = noise_temperature_for_dbm(cfg.get("dispersive", "noise_dbm_per_hz")?);
    let b = readout_budget(omega, cfg.get("dispersive", "g_ec")?, (1.0 - eta) * kappa, eta * kappa, t_n)?;
    let mut v = serde_json::to_value(b).map_err(json_err)?;
    v["readout_freq_hz"] = json!(omega / TAU);
    write_json(out, &v)
}
