use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use canard_core::canard::{maximal_canards, selected_canard};
use canard_core::export::{fmt_f64, write_csv};
use canard_core::geometry::classify as classify_params;
use canard_core::hybrid::{fan, integrate_smooth_reference, integrate_with, Control, IntegrateOptions, Trajectory};
use canard_core::mmo::{demo_system, find_periodic_mmo, mmo_sample_step, one_period, MmoOptions};
use canard_core::model::build_minimal_3d;
use canard_core::planar::{cycle_orbit, drifting_equilibrium, explosion_scan, find_cycle, transient_mmo as run_transient};
use canard_core::singular::{singular_portrait, Coefficients, Window};
use canard_core::State;
use serde::Serialize;
use serde_json::{json, Value};

use crate::scenario::{FamilyKind, Knobs};
use crate::CliError;

fn emit(out: &mut dyn Write, v: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string(v).map_err(|e| CliError::Numerical(e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json(dir: &Path, name: &str, v: &impl Serialize) -> Result<(), CliError> {
    let mut f = create(dir, name)?;
    emit(&mut f, v)?;
    f.flush()?;
    Ok(())
}

fn write_traj(dir: &Path, name: &str, traj: &Trajectory) -> Result<(), CliError> {
    let mut f = create(dir, name)?;
    write_csv(traj, &mut f)?;
    f.flush()?;
    Ok(())
}

/// Integral values print without a fractional part (`"mu":10`).
fn number(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        json!(v as i64)
    } else {
        json!(v)
    }
}

fn options(k: &Knobs, default_step: Option<f64>) -> Result<IntegrateOptions, CliError> {
    let sample_step = match k.sample_step {
        Some(h) => Some(k.positive("sample-step", h)?),
        None => default_step,
    };
    Ok(IntegrateOptions { sample_step, ..IntegrateOptions::default() })
}

fn horizon(k: &Knobs, default: f64) -> Result<f64, CliError> {
    let h = k.horizon.unwrap_or(default);
    if h.is_finite() && h >= 0.0 {
        Ok(h)
    } else {
        Err(CliError::Config(format!("horizon must be finite and >= 0, got {h}")))
    }
}

fn summary(traj: &Trajectory) -> Value {
    let end = traj.final_state();
    json!({
        "termination": traj.termination,
        "t_end": traj.final_time(),
        "end": [end[0], end[1], end[2]],
        "switches": traj.switches,
        "samples": traj.samples.len(),
    })
}

pub fn classify(k: &Knobs, out: &mut dyn Write) -> Result<(), CliError> {
    let c = classify_params(k.p1.unwrap_or(1.0), k.p2.unwrap_or(-1.0), k.p3.unwrap_or(0.2))?;
    let mut record = serde_json::Map::new();
    record.insert("class".into(), json!(c.class.name()));
    record.insert("mu".into(), c.mu.map_or(Value::Null, number));
    if let Some(s) = c.sign_class {
        record.insert("sign_class".into(), json!(s.name()));
    }
    emit(out, &record)
}

const DEFAULT_START: [f64; 3] = [-0.5, 0.3, -0.1];

pub fn simulate(k: &Knobs, dir: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let s0 = k.state(State::from(DEFAULT_START));
    let h = horizon(k, 1000.0)?;
    let traj = if k.family() == FamilyKind::Smooth {
        integrate_smooth_reference(&k.params(0.01)?, &s0, h)?
    } else {
        let spec = k.spec()?;
        integrate_with(&spec, &s0, h, &options(k, None)?, |_| Control::Continue)?
    };
    match dir {
        Some(d) => {
            write_traj(d, "trajectory.csv", &traj)?;
            emit(out, &summary(&traj))
        }
        None => Ok(write_csv(&traj, out)?),
    }
}

pub fn canards(k: &Knobs, dir: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let p = k.params(0.01)?;
    let found = maximal_canards(&p)?;
    if let Some(d) = dir {
        let spec = build_minimal_3d(p)?;
        let opts = options(k, Some(mmo_sample_step(&p)))?;
        for c in &found {
            let traj = integrate_with(&spec, &c.entry_state(), c.transit_time, &opts, |_| Control::Continue)?;
            write_traj(d, &format!("canard_{}.csv", c.k), &traj)?;
        }
        write_json(d, "canards.json", &found)?;
    }
    emit(out, &found)
}

pub fn selected(k: &Knobs, dir: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let idx = k.k.unwrap_or(0);
    let sc = selected_canard(&k.params(0.01)?, idx)?;
    if let Some(d) = dir {
        let spec = build_minimal_3d(sc.params)?;
        let opts = options(k, Some(mmo_sample_step(&sc.params)))?;
        let traj = integrate_with(&spec, &sc.entry_state(), sc.flight_time, &opts, |_| Control::Continue)?;
        write_traj(d, &format!("selected_{idx}.csv"), &traj)?;
        write_json(d, "selected.json", &sc)?;
    }
    emit(out, &sc)
}

pub fn singular(k: &Knobs, dir: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let c = Coefficients::new(k.p1.unwrap_or(1.0), k.p2.unwrap_or(-1.0), k.p3.unwrap_or(0.2));
    let window = Window {
        z: (k.z_min.unwrap_or(-1.0), k.z_max.unwrap_or(1.0)),
        x: (k.x_min.unwrap_or(-1.0), k.x_max.unwrap_or(1.0)),
    };
    let mut portrait = singular_portrait(&c, window, k.opened.unwrap_or(false), k.half_width, k.grid.unwrap_or(21))?;
    let field = std::mem::take(&mut portrait.field);
    if let Some(d) = dir {
        let mut f = create(d, "field.csv")?;
        writeln!(f, "z,x,dz,dx,zone")?;
        for s in &field {
            let zone = serde_json::to_value(s.zone).map_err(|e| CliError::Numerical(e.to_string()))?;
            let zone = zone.as_str().unwrap_or_default().to_owned();
            writeln!(f, "{},{},{},{},{zone}", fmt_f64(s.z), fmt_f64(s.x), fmt_f64(s.dz), fmt_f64(s.dx))?;
        }
        f.flush()?;
        write_json(d, "portrait.json", &portrait)?;
    }
    emit(out, &portrait)
}

pub fn planar_cycle(k: &Knobs, dir: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let system = k.planar()?;
    let found = find_cycle(&system)?;
    if let (Some(d), Some(c)) = (dir, &found.cycle) {
        write_traj(d, "cycle.csv", &cycle_orbit(&system, c)?)?;
        write_json(d, "cycle.json", &found)?;
    }
    emit(out, &found)
}

pub fn planar_scan(k: &Knobs, dir: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let system = k.planar()?;
    let (lo, hi, n) = match k.shape() {
        canard_core::model::PlanarShape::QuasiCanard { .. } => (0.9, 1.02, 25),
        canard_core::model::PlanarShape::Arima { .. } => (-0.05, 0.05, 11),
    };
    let scan = explosion_scan(&system, (k.a_min.unwrap_or(lo), k.a_max.unwrap_or(hi)), k.n.unwrap_or(n))?;
    if let Some(d) = dir {
        let mut f = create(d, "scan.csv")?;
        writeln!(f, "a,amplitude,period")?;
        for p in &scan.points {
            let period = p.period.map(fmt_f64).unwrap_or_default();
            writeln!(f, "{},{},{period}", fmt_f64(p.a), fmt_f64(p.amplitude))?;
        }
        f.flush()?;
        write_json(d, "scan.json", &scan)?;
    }
    emit(out, &scan)
}

pub fn transient_mmo(k: &Knobs, dir: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let mut k = k.clone();
    if k.a.is_none() && k.shape.is_none() {
        k.a = Some(1.02);
    }
    k.drift = Some(k.drift.unwrap_or(-0.001));
    let system = k.planar()?;
    let s0 = match (k.x, k.y) {
        (Some(x), Some(y)) => State::new(x, y, k.z.unwrap_or(system.a)),
        (None, None) => drifting_equilibrium(&system)?,
        _ => return Err(CliError::Config("give both x and y, or neither".into())),
    };
    let run = run_transient(&system, s0, horizon(&k, 600.0)?, k.threshold)?;
    let record = json!({
        "pattern": run.pattern(),
        "threshold": run.threshold,
        "oscillations": run.oscillations,
        "end": summary(&run.trajectory),
    });
    if let Some(d) = dir {
        write_traj(d, "trajectory.csv", &run.trajectory)?;
        write_json(d, "transient_mmo.json", &record)?;
    }
    emit(out, &record)
}

pub fn mmo(k: &Knobs, dir: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let (demo_p, demo_ret, demo_seed) = demo_system();
    let mut p = k.params(demo_p.eps)?;
    if k.p1.is_none() && k.p2.is_none() && k.p3.is_none() && k.eps.is_none() && k.delta.is_none() {
        p = demo_p;
    }
    let ret = k.ret(demo_ret);
    let spec = canard_core::model::build_global_return(p, ret)?;
    let seed = k.state(demo_seed);
    let defaults = MmoOptions::default();
    let opts = MmoOptions {
        section: None,
        burn_in: k.burn_in.unwrap_or(defaults.burn_in),
        tol: k.tol.map(|t| k.positive("tol", t)).transpose()?.unwrap_or(defaults.tol),
        max_iter: k.max_iter.unwrap_or(defaults.max_iter),
        horizon: k.horizon.map(|h| k.positive("horizon", h)).transpose()?,
    };
    let search = find_periodic_mmo(&spec, &seed, &opts)?;
    let Some(orbit) = search.orbit else {
        emit(out, &json!({ "diagnostic": search.diagnostic, "last_iterate": search.last_iterate }))?;
        return Err(CliError::Numerical(format!(
            "no periodic orbit: {}",
            search.diagnostic.unwrap_or_else(|| "unknown".into())
        )));
    };
    let record = json!({
        "period": orbit.period,
        "signature": orbit.signature.notation(),
        "pairs": orbit.signature.pairs,
        "multipliers": orbit.multipliers,
        "anchor": orbit.anchor,
        "residual": orbit.residual,
        "iterations": orbit.iterations,
        "params": p,
        "ret": ret,
    });
    if let Some(d) = dir {
        write_traj(d, "orbit.csv", &one_period(&spec, &State::from(orbit.anchor), orbit.period)?)?;
        write_json(d, "mmo.json", &record)?;
    }
    emit(out, &record)
}

pub fn sweep(k: &Knobs, dir: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let n = k.n.unwrap_or(20);
    if n == 0 {
        return Err(CliError::Config("n must be at least 1".into()));
    }
    let (z_lo, z_hi) = (k.z_min.unwrap_or(-0.3), k.z_max.unwrap_or(0.3));
    let base = k.state(State::new(-0.5, 0.25, 0.0));
    let starts: Vec<State> = (0..n)
        .map(|i| {
            let s = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            State::new(base[0], base[1], z_lo + s * (z_hi - z_lo))
        })
        .collect();
    let h = horizon(k, 400.0)?;
    let trajs = if k.family() == FamilyKind::Smooth {
        let p = k.params(0.01)?;
        fan(&starts, |s| integrate_smooth_reference(&p, s, h))?
    } else {
        let spec = k.spec()?;
        let opts = options(k, None)?;
        fan(&starts, |s| integrate_with(&spec, s, h, &opts, |_| Control::Continue))?
    };
    let records: Vec<Value> = starts
        .iter()
        .zip(&trajs)
        .enumerate()
        .map(|(i, (s, t))| {
            let mut r = summary(t);
            r["index"] = json!(i);
            r["z0"] = json!(s[2]);
            r
        })
        .collect();
    if let Some(d) = dir {
        for (i, t) in trajs.iter().enumerate() {
            write_traj(d, &format!("sweep_{i:03}.csv"), t)?;
        }
        write_json(d, "sweep.json", &records)?;
    }
    emit(out, &records)
}
