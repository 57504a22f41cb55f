use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context};
use gpamr_core::solver::{alpha_demo as run_alpha_demo, convergence_study, run_advection, AdvectConfig, Profile};
use gpamr_core::weights::cached_weights;
use gpamr_core::DataMode;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::report::{num, RunReport};
use crate::{AdvectArgs, AlphaDemoArgs, ConvergenceArgs, Problem, WeightsArgs};

/// Regression floor on convergence slopes.
const MIN_SLOPE: f64 = 2.5;

/// Overrides flag values with the keys of a JSON object file.
pub fn apply_config<T: Serialize + DeserializeOwned>(args: T, path: Option<&Path>) -> anyhow::Result<T> {
    let Some(path) = path else { return Ok(args) };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let over: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut base = serde_json::to_value(&args)?;
    let (Value::Object(b), Value::Object(o)) = (&mut base, over) else {
        bail!("config must be a JSON object");
    };
    for (k, v) in o {
        let key = k.replace('_', "-");
        if !b.contains_key(&key) {
            bail!("unknown config key {k:?}");
        }
        b.insert(key, v);
    }
    serde_json::from_value(base).context("config values do not fit the flags")
}

fn csv_writer(path: &Path) -> anyhow::Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

pub fn weights(a: WeightsArgs) -> anyhow::Result<()> {
    let ratio = match a.ratio.len() {
        1 => vec![a.ratio[0]; a.dim],
        n if n == a.dim => a.ratio.clone(),
        n => bail!("--ratio has {n} entries for --dim {}", a.dim),
    };
    let cfg = a.gp.config(a.dim, ratio, a.mode.into());
    let t = Instant::now();
    let w = cached_weights(&cfg)?;
    let mut rep = RunReport::new("weights", &a)?;
    rep.timings.insert("build".into(), t.elapsed().as_secs_f64());
    if let Some(out) = &a.out {
        std::fs::write(out, serde_json::to_string(&*w)?).with_context(|| format!("writing {}", out.display()))?;
        rep.artifacts.push(out.clone());
    }
    let sums: Vec<f64> = w.w_total.iter().map(|v| v.iter().sum()).collect();
    rep.metric("fine_points", w.num_fine())?;
    rep.metric("stencil_size", w.geometry.total_len())?;
    rep.metric("weight_sums", &sums)?;
    rep.metric("gamma_residuals", &w.gamma_residual)?;
    rep.metric("eigen_min", w.eigenvalues.first())?;
    rep.metric("eigen_max", w.eigenvalues.last())?;
    for (i, (s, r)) in sums.iter().zip(&w.gamma_residual).enumerate() {
        eprintln!("fine point {i}: sum w = {s:.15}, gamma residual = {r:.3e}");
    }
    rep.gp_config = Some(cfg);
    rep.emit(None)
}

pub fn convergence(a: ConvergenceArgs) -> anyhow::Result<()> {
    let mode: DataMode = a.mode.into();
    let cfg = a.gp.config(2, vec![2, 2], mode);
    let t = Instant::now();
    let study = convergence_study(&a.grids, mode, &cfg)?;
    let mut rep = RunReport::new("convergence", &a)?;
    rep.timings.insert("study".into(), t.elapsed().as_secs_f64());
    if let Some(out) = &a.out {
        let mut w = csv_writer(out)?;
        w.write_record(["n", "error_linear", "error_switch", "slope_linear", "slope_switch"])?;
        for r in &study.rows {
            let s = |v: Option<f64>| v.map(num).unwrap_or_default();
            w.write_record([
                r.n.to_string(),
                num(r.error_linear),
                num(r.error_switch),
                s(r.slope_linear),
                s(r.slope_switch),
            ])?;
        }
        w.flush()?;
        rep.artifacts.push(out.clone());
    }
    let min_slope = study.min_slope();
    rep.metric("rows", &study.rows)?;
    rep.metric("min_slope", min_slope)?;
    rep.gp_config = Some(cfg);
    rep.emit(None)?;
    match min_slope {
        Some(s) if s < MIN_SLOPE => bail!("convergence slope {s:.3} is below {MIN_SLOPE}"),
        _ => Ok(()),
    }
}

pub fn advect(a: AdvectArgs) -> anyhow::Result<()> {
    let problem = match a.problem {
        Problem::Vortex => Profile::VortexGaussian,
        Problem::Slotted => Profile::SlottedCylinder,
    };
    let mut cfg = AdvectConfig::new(problem, a.prolong);
    cfg.base_n = a.base;
    cfg.levels = a.levels;
    cfg.t_final = a.tfinal;
    cfg.cfl = a.cfl;
    cfg.threshold = a.threshold;
    cfg.regrid_every = a.regrid_every;
    cfg.series_every = a.series_every;
    cfg.gp = a.gp.config(2, vec![cfg.ratio; 2], DataMode::CellAveraged);
    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        if a.plot_every.is_some() {
            cfg.plot_every = a.plot_every;
            cfg.plot_dir = Some(dir.join("plotfiles"));
        }
    } else if a.plot_every.is_some() {
        bail!("--plot-every needs --out-dir");
    }
    let t = Instant::now();
    let r = run_advection(&cfg)?;
    let mut rep = RunReport::new("advect", &a)?;
    rep.timings.insert("run".into(), t.elapsed().as_secs_f64());
    if let Some(dir) = &a.out_dir {
        let path = dir.join("timeseries.csv");
        let mut w = csv_writer(&path)?;
        let levels = r.records.iter().map(|s| s.cells_per_level.len()).max().unwrap_or(1);
        let mut head: Vec<String> = ["step", "t", "dt", "l1"].map(String::from).to_vec();
        head.extend((0..levels).map(|l| format!("cells_l{l}")));
        head.extend(["prolong_calls", "weno_fraction"].map(String::from));
        w.write_record(&head)?;
        for s in &r.records {
            let mut row = vec![s.step.to_string(), num(s.t), num(s.dt), num(s.l1)];
            row.extend((0..levels).map(|l| s.cells_per_level.get(l).copied().unwrap_or(0).to_string()));
            row.push(s.prolong_calls.to_string());
            row.push(num(s.weno_fraction()));
            w.write_record(&row)?;
        }
        w.flush()?;
        rep.artifacts.push(path);
    }
    rep.artifacts.extend(r.plotfiles.iter().cloned());
    rep.metric("final_l1", r.final_l1)?;
    rep.metric("steps", r.steps)?;
    rep.metric("dt", r.dt)?;
    rep.metric("initial_mass", r.initial_mass)?;
    rep.metric("final_mass", r.final_mass)?;
    rep.metric("mass_drift", r.mass_drift())?;
    rep.metric("prolong_calls", r.stats.prolong_calls)?;
    rep.metric("weno_calls", r.stats.weno_calls)?;
    rep.metric("copied_cells", r.stats.copied)?;
    if r.stats.prolong_calls > 0 {
        rep.metric("min_prolonged", r.stats.min_prolonged)?;
        rep.metric("max_prolonged", r.stats.max_prolonged)?;
    }
    rep.metric("final_cells_per_level", &r.final_cells_per_level)?;
    rep.gp_config = Some(cfg.gp);
    rep.emit(a.out_dir.as_deref())
}

pub fn alpha_demo(a: AlphaDemoArgs) -> anyhow::Result<()> {
    let cfg = a.gp.config(2, vec![2, 2], DataMode::CellAveraged);
    let t = Instant::now();
    let (cells, w) = run_alpha_demo(a.n, &cfg)?;
    let mut rep = RunReport::new("alpha-demo", &a)?;
    rep.timings.insert("alpha".into(), t.elapsed().as_secs_f64());
    if let Some(out) = &a.out {
        let mut wr = csv_writer(out)?;
        wr.write_record(["x", "y", "f", "alpha"])?;
        for c in &cells {
            wr.write_record([num(c.x), num(c.y), num(c.f), num(c.alpha)])?;
        }
        wr.flush()?;
        rep.artifacts.push(out.clone());
    }
    let mut alphas: Vec<f64> = cells.iter().map(|c| c.alpha).collect();
    alphas.sort_by(f64::total_cmp);
    rep.metric("cells", alphas.len())?;
    rep.metric("alpha_min", alphas.first())?;
    rep.metric("alpha_median", alphas.get(alphas.len() / 2))?;
    rep.metric("alpha_max", alphas.last())?;
    rep.metric("above_alpha_c", alphas.iter().filter(|&&x| x > cfg.alpha_c).count())?;
    rep.metric("eigen_min", w.eigenvalues.first())?;
    rep.gp_config = Some(cfg);
    rep.emit(None)
}
