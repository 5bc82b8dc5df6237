//! The subcommands. Each returns the process exit code.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use cocontact::dynamics::{
    cross_check_equivalence, integrate, integrate_hamiltonian, integrate_lagrangian, prepare, residual_report,
    DynamicsError, Method, ResidualReport, Trajectory,
};
use cocontact::mechanics::legendre_map;
use cocontact::skinner_rusk::{run_constraint_algorithm, AlgorithmOptions, LadderStatus, PontryaginPoint};
use cocontact::systems::{SystemPreset, PRESET_NAMES};
use cocontact::verify::{verify_preset, VerifyOptions, VerifyReport};
use serde::Serialize;

use crate::config::{resolve, Overrides, RunConfig};

pub const EXIT_OK: i32 = 0;
/// Configuration, usage or I/O error; also a failed `verify`.
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INCOMPATIBLE: i32 = 2;
pub const EXIT_MAX_ITERATIONS: i32 = 3;
/// The integrator gave up (step failure, lost constraints, singular
/// Legendre map, ladder not closed).
pub const EXIT_DYNAMICS: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Space {
    Unified,
    Lagrangian,
    Hamiltonian,
    All,
}

impl Space {
    fn label(self) -> &'static str {
        match self {
            Space::Unified => "unified",
            Space::Lagrangian => "lagrangian",
            Space::Hamiltonian => "hamiltonian",
            Space::All => "all",
        }
    }
}

/// Where results go.
#[derive(Debug, Clone, Default)]
pub struct OutputDir(pub Option<PathBuf>);

impl OutputDir {
    /// `requested` placed in the output directory when one is set, else as
    /// given; `fallback` (a file name) when nothing was requested.
    fn place(&self, requested: Option<&Path>, fallback: &str) -> PathBuf {
        match (&self.0, requested) {
            (Some(dir), Some(p)) => dir.join(p.file_name().unwrap_or(p.as_os_str())),
            (Some(dir), None) => dir.join(fallback),
            (None, Some(p)) => p.to_path_buf(),
            (None, None) => PathBuf::from(fallback),
        }
    }

    fn ensure(&self) -> Result<()> {
        if let Some(dir) = &self.0 {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(())
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

/// `constraints`: the ladder at the initial point.
pub fn constraints(cfg: &RunConfig, over: Overrides, out: &OutputDir, max_generations: usize) -> Result<i32> {
    if max_generations == 0 {
        bail!("--max-generations must be at least 1");
    }
    let preset = resolve(cfg, over)?;
    let w0 = PontryaginPoint::from_lagrangian(&preset.system, &preset.initial)?;
    let opts = AlgorithmOptions {
        max_generations,
        ..AlgorithmOptions::default()
    };
    let (ladder, _) = run_constraint_algorithm(&preset.system, &w0, &opts)?;
    let report = ladder.report(&w0)?;
    print_json(&report)?;
    if cfg.outputs.json.is_some() || out.0.is_some() {
        out.ensure()?;
        let path = out.place(cfg.outputs.json.as_deref(), &format!("{}_constraints.json", file_stem(&preset)));
        write_file(&path, serde_json::to_string_pretty(&report)?.as_bytes())?;
    }
    Ok(match report.status {
        LadderStatus::Closed | LadderStatus::Open => EXIT_OK,
        LadderStatus::Incompatible => EXIT_INCOMPATIBLE,
        LadderStatus::MaxIterations => EXIT_MAX_ITERATIONS,
    })
}

#[derive(Debug, Serialize)]
struct RunSummary {
    system: String,
    space: &'static str,
    samples: usize,
    final_point: Vec<f64>,
    residuals: ResidualReport,
    csv: Option<PathBuf>,
    json: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct SimulateSummary {
    runs: Vec<RunSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    equivalence: Option<Equivalence>,
}

#[derive(Debug, Serialize)]
struct Equivalence {
    rho1_vs_x: f64,
    rho2_vs_y: f64,
    legendre_x_vs_y: f64,
}

fn file_stem(preset: &SystemPreset) -> String {
    preset
        .name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{suffix}"),
    };
    path.with_file_name(name)
}

fn run_space(preset: &SystemPreset, space: Space) -> Result<Trajectory, DynamicsError> {
    let cfg = &preset.integrator;
    match space {
        Space::Unified => {
            let (ladder, w0) = prepare(&preset.system, &preset.initial, &AlgorithmOptions::default())?;
            integrate(&ladder, &w0, cfg)
        }
        Space::Lagrangian => integrate_lagrangian(&preset.system, &preset.initial, cfg),
        Space::Hamiltonian => {
            let y0 = legendre_map(&preset.system, &preset.initial)?;
            integrate_hamiltonian(&preset.system, &y0, cfg)
        }
        Space::All => unreachable!("expanded by the caller"),
    }
}

/// `simulate`: integrate and export.
pub fn simulate(cfg: &RunConfig, over: Overrides, out: &OutputDir, space: Space) -> Result<i32> {
    let preset = resolve(cfg, over)?;
    let channels = cfg.channels()?;
    let mut runs: Vec<(Space, Trajectory)> = Vec::new();
    let mut equivalence = None;
    let result: Result<(), DynamicsError> = (|| {
        match space {
            Space::All if preset.integrator.method == Method::Rk4 => {
                let r = cross_check_equivalence(&preset.system, &preset.initial, &preset.integrator)?;
                equivalence = Some(Equivalence {
                    rho1_vs_x: r.rho1_vs_x,
                    rho2_vs_y: r.rho2_vs_y,
                    legendre_x_vs_y: r.legendre_x_vs_y,
                });
                runs.push((Space::Unified, r.unified));
                runs.push((Space::Lagrangian, r.lagrangian));
                runs.push((Space::Hamiltonian, r.hamiltonian));
            }
            Space::All => {
                for s in [Space::Unified, Space::Lagrangian, Space::Hamiltonian] {
                    runs.push((s, run_space(&preset, s)?));
                }
            }
            s => runs.push((s, run_space(&preset, s)?)),
        }
        Ok(())
    })();
    if let Err(e) = result {
        eprintln!("error: {e}");
        return Ok(EXIT_DYNAMICS);
    }
    out.ensure()?;
    let stem = file_stem(&preset);
    let mut summaries = Vec::new();
    for (s, traj) in &runs {
        let suffix = |p: PathBuf| if space == Space::All { with_suffix(&p, s.label()) } else { p };
        let fallback = match space {
            Space::All => format!("{stem}.csv"),
            _ => format!("{stem}_{}.csv", s.label()),
        };
        let csv = suffix(out.place(cfg.outputs.csv.as_deref(), &fallback));
        let mut buf = Vec::new();
        traj.write_csv_channels(&mut buf, &channels)?;
        write_file(&csv, &buf)?;
        let json = match &cfg.outputs.json {
            Some(p) => {
                let path = suffix(out.place(Some(p), ""));
                write_file(&path, traj.to_json().as_bytes())?;
                Some(path)
            }
            None => None,
        };
        summaries.push(RunSummary {
            system: preset.name.clone(),
            space: s.label(),
            samples: traj.len(),
            final_point: traj.last().point.to_vec(),
            residuals: residual_report(traj),
            csv: Some(csv),
            json,
        });
    }
    print_json(&SimulateSummary {
        runs: summaries,
        equivalence,
    })?;
    Ok(EXIT_OK)
}

/// `verify`: every check on the configured system, or on every preset.
pub fn verify(cfg: Option<&RunConfig>, over: Overrides, opts: &VerifyOptions, json: bool) -> Result<i32> {
    let presets: Vec<SystemPreset> = match cfg {
        Some(c) => vec![resolve(c, over)?],
        None => PRESET_NAMES
            .iter()
            .map(|n| resolve(&RunConfig::for_preset(n), over))
            .collect::<Result<_>>()?,
    };
    let opts = VerifyOptions {
        step: opts.step.or(over.step),
        t_end: opts.t_end.or(over.t_end),
        ..opts.clone()
    };
    let reports: Vec<VerifyReport> = presets.iter().map(|p| verify_preset(p, &opts)).collect();
    if json {
        print_json(&reports)?;
    } else {
        let mut stdout = std::io::stdout().lock();
        for r in &reports {
            write!(stdout, "{r}")?;
        }
    }
    let failed: Vec<String> = reports
        .iter()
        .flat_map(|r| r.failures().into_iter().map(move |c| format!("{}: {}", r.system, c.name)))
        .collect();
    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("failed checks: {}", failed.join(", "));
        Ok(EXIT_ERROR)
    }
}

#[derive(Debug, Serialize)]
struct SweepEntry {
    index: usize,
    parameter: String,
    value: f64,
    samples: Option<usize>,
    final_point: Option<Vec<f64>>,
    residual_max: Option<f64>,
    csv: Option<PathBuf>,
    error: Option<String>,
}

/// Sets `name` to `value` in a copy of `cfg`. Names `t0`, `s`, `q<i>` and
/// `v<i>` address the initial point; anything else is a parameter.
fn with_value(cfg: &RunConfig, base: &SystemPreset, name: &str, value: f64) -> Result<RunConfig> {
    let mut cfg = cfg.clone();
    let initial_slot = |prefix: char| -> Option<usize> {
        let rest = name.strip_prefix(prefix)?;
        let i: usize = rest.parse().ok()?;
        (1..=base.system.n()).contains(&i).then_some(i - 1)
    };
    let is_initial = matches!(name, "t0" | "s") || initial_slot('q').is_some() || initial_slot('v').is_some();
    if is_initial {
        let init = cfg.initial.get_or_insert_with(|| crate::config::InitialSpec {
            t0: base.initial.t,
            q: base.initial.q.clone(),
            v: base.initial.v.clone(),
            s: base.initial.s,
        });
        match name {
            "t0" => init.t0 = value,
            "s" => init.s = value,
            _ => {
                if let Some(i) = initial_slot('q') {
                    init.q[i] = value;
                } else if let Some(i) = initial_slot('v') {
                    init.v[i] = value;
                }
            }
        }
    } else {
        let params = cfg.system.params.get_or_insert_with(Default::default);
        params.set(name, value)?;
    }
    Ok(cfg)
}

/// `sweep`: one unified run per value, spread over worker threads.
pub fn sweep(
    cfg: &RunConfig,
    over: Overrides,
    out: &OutputDir,
    param: &str,
    values: &[f64],
    workers: usize,
) -> Result<i32> {
    if values.is_empty() {
        bail!("--values needs at least one value");
    }
    let base = resolve(cfg, over)?;
    let configs: Vec<RunConfig> = values
        .iter()
        .map(|&v| with_value(cfg, &base, param, v))
        .collect::<Result<_>>()?;
    for c in &configs {
        resolve(c, over)?;
    }
    let write = out.0.is_some() || cfg.outputs.csv.is_some();
    if write {
        out.ensure()?;
    }
    let stem = file_stem(&base);
    let template = out.place(cfg.outputs.csv.as_deref(), &format!("{stem}_sweep.csv"));
    let results: Mutex<Vec<SweepEntry>> = Mutex::new(Vec::new());
    let workers = workers.clamp(1, configs.len());
    let next = Mutex::new(0usize);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = {
                    let mut k = next.lock().unwrap();
                    let i = *k;
                    *k += 1;
                    i
                };
                if index >= configs.len() {
                    break;
                }
                let entry = run_sweep_entry(&configs[index], over, index, param, values[index], write, &template);
                results.lock().unwrap().push(entry);
            });
        }
    });
    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|e| e.index);
    print_json(&results)?;
    Ok(if results.iter().any(|e| e.error.is_some()) {
        EXIT_DYNAMICS
    } else {
        EXIT_OK
    })
}

fn run_sweep_entry(
    cfg: &RunConfig,
    over: Overrides,
    index: usize,
    param: &str,
    value: f64,
    write: bool,
    template: &Path,
) -> SweepEntry {
    let mut entry = SweepEntry {
        index,
        parameter: param.to_string(),
        value,
        samples: None,
        final_point: None,
        residual_max: None,
        csv: None,
        error: None,
    };
    let run = || -> Result<Trajectory> {
        let preset = resolve(cfg, over)?;
        Ok(run_space(&preset, Space::Unified)?)
    };
    match run() {
        Ok(traj) => {
            entry.samples = Some(traj.len());
            entry.final_point = Some(traj.last().point.to_vec());
            entry.residual_max = Some(residual_report(&traj).worst());
            if write {
                let path = with_suffix(template, &index.to_string());
                match cfg
                    .channels()
                    .and_then(|ch| {
                        let mut buf = Vec::new();
                        traj.write_csv_channels(&mut buf, &ch)?;
                        Ok(buf)
                    })
                    .and_then(|buf| write_file(&path, &buf))
                {
                    Ok(()) => entry.csv = Some(path),
                    Err(e) => entry.error = Some(format!("{e:#}")),
                }
            }
        }
        Err(e) => entry.error = Some(format!("{e:#}")),
    }
    entry
}
