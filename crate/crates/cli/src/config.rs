//! The JSON run configuration and its resolution into a system, initial
//! data and integrator settings.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use cocontact::dsl::ParamTable;
use cocontact::dynamics::{IntegratorConfig, Residuals};
use cocontact::mechanics::LagrangianPoint;
use cocontact::systems::{preset, SystemPreset};
use serde::Deserialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    /// Any subset of the integrator fields; the rest come from the preset.
    #[serde(default)]
    pub integrator: Option<Map<String, Value>>,
    #[serde(default)]
    pub outputs: OutputSpec,
}

/// Exactly one of `preset` and `inline`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub inline: Option<InlineSystem>,
    /// Parameter overrides; a preset then runs from its DSL rendition.
    #[serde(default)]
    pub params: Option<ParamTable>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineSystem {
    pub n: usize,
    pub lagrangian: String,
    #[serde(default)]
    pub params: ParamTable,
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default)]
    pub t0: f64,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    #[serde(default)]
    pub s: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub json: Option<PathBuf>,
    /// Residual channels written to the CSV (all by default).
    #[serde(default)]
    pub channels: Option<Vec<String>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn for_preset(name: &str) -> Self {
        RunConfig {
            system: SystemSpec {
                preset: Some(name.to_string()),
                ..SystemSpec::default()
            },
            ..RunConfig::default()
        }
    }

    pub fn channels(&self) -> Result<Vec<&'static str>> {
        match &self.outputs.channels {
            None => Ok(Residuals::CHANNELS.to_vec()),
            Some(names) => names
                .iter()
                .map(|c| {
                    Residuals::CHANNELS
                        .iter()
                        .find(|k| **k == c.as_str())
                        .copied()
                        .ok_or_else(|| anyhow!("unknown residual channel `{c}` (known: {:?})", Residuals::CHANNELS))
                })
                .collect(),
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub step: Option<f64>,
    pub t_end: Option<f64>,
}

/// Builds the system, initial point and integrator described by `cfg`.
pub fn resolve(cfg: &RunConfig, over: Overrides) -> Result<SystemPreset> {
    let spec = &cfg.system;
    let mut base = match (&spec.preset, &spec.inline) {
        (Some(_), Some(_)) => bail!("`system` must name a preset or give an inline system, not both"),
        (None, None) => bail!("`system` needs either `preset` or `inline`"),
        (Some(name), None) => {
            let mut p = preset(name)?;
            if let Some(params) = &spec.params {
                let mut table = p.params.clone();
                for (k, v) in params.iter() {
                    if table.get(k).is_none() {
                        bail!("preset `{}` has no parameter `{k}`", p.name);
                    }
                    table.set(k, v)?;
                }
                let order_steps = p.order_steps;
                p = SystemPreset::inline(&p.name, p.system.n(), &p.dsl, table, p.initial, p.integrator)?;
                p.order_steps = order_steps;
            }
            p
        }
        (None, Some(inline)) => {
            if inline.n == 0 {
                bail!("inline system needs n >= 1");
            }
            let mut params = inline.params.clone();
            if let Some(extra) = &spec.params {
                for (k, v) in extra.iter() {
                    params.set(k, v)?;
                }
            }
            if cfg.initial.is_none() {
                bail!("an inline system needs `initial`");
            }
            // Replaced by `initial` below.
            let initial = LagrangianPoint::new(0.0, vec![0.0; inline.n], vec![0.0; inline.n], 0.0);
            let name = inline.name.clone().unwrap_or_else(|| "inline".into());
            SystemPreset::inline(&name, inline.n, &inline.lagrangian, params, initial, IntegratorConfig::default())?
        }
    };
    if let Some(init) = &cfg.initial {
        let n = base.system.n();
        if init.q.len() != n || init.v.len() != n {
            bail!(
                "initial point has {} positions and {} velocities, the system has n = {n}",
                init.q.len(),
                init.v.len()
            );
        }
        base.initial = LagrangianPoint::new(init.t0, init.q.clone(), init.v.clone(), init.s);
        if !base.initial.is_finite() {
            bail!("initial point must be finite");
        }
    }
    let mut integrator = match &cfg.integrator {
        Some(fields) => {
            let mut merged = match serde_json::to_value(&base.integrator)? {
                Value::Object(m) => m,
                _ => unreachable!("integrator settings serialize to an object"),
            };
            merged.extend(fields.clone());
            serde_json::from_value::<IntegratorConfig>(Value::Object(merged)).context("in `integrator`")?
        }
        None => base.integrator.clone(),
    };
    if let Some(h) = over.step {
        integrator.step = h;
    }
    if let Some(t) = over.t_end {
        integrator.t_end = t;
    }
    integrator.validate().map_err(|e| anyhow!("{e}"))?;
    if !(integrator.t_end > base.initial.t) {
        bail!(
            "t_end = {} must lie after the initial time {}",
            integrator.t_end,
            base.initial.t
        );
    }
    if spec.inline.is_some() {
        base.order_steps = [20.0 * integrator.step, 10.0 * integrator.step];
    }
    base.integrator = integrator;
    Ok(base)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_with_partial_integrator() {
        let cfg = RunConfig::parse(r#"{"system": {"preset": "duffing"}, "integrator": {"step": 0.01}}"#).unwrap();
        let p = resolve(&cfg, Overrides::default()).unwrap();
        assert_eq!(p.integrator.step, 0.01);
        assert_eq!(p.integrator.t_end, 10.0);
    }

    #[test]
    fn rejects_both_or_neither() {
        let both = RunConfig::parse(
            r#"{"system": {"preset": "duffing", "inline": {"n": 1, "lagrangian": "v1^2"}}}"#,
        )
        .unwrap();
        assert!(resolve(&both, Overrides::default()).is_err());
        let neither = RunConfig::parse(r#"{"system": {}}"#).unwrap();
        assert!(resolve(&neither, Overrides::default()).is_err());
    }

    #[test]
    fn rejects_unknown_fields() {
        assert!(RunConfig::parse(r#"{"system": {"preset": "duffing"}, "integrater": {}}"#).is_err());
        let cfg = RunConfig::parse(r#"{"system": {"preset": "duffing"}, "integrator": {"stepp": 1}}"#).unwrap();
        assert!(resolve(&cfg, Overrides::default()).is_err());
    }

    #[test]
    fn inline_dimensions_are_checked() {
        let cfg = RunConfig::parse(
            r#"{"system": {"inline": {"n": 2, "lagrangian": "v1^2 + v2^2"}}, "initial": {"q": [0], "v": [1]}}"#,
        )
        .unwrap();
        assert!(resolve(&cfg, Overrides::default()).is_err());
    }

    #[test]
    fn preset_param_override() {
        let cfg = RunConfig::parse(r#"{"system": {"preset": "duffing", "params": {"delta": 0.5}}}"#).unwrap();
        let p = resolve(&cfg, Overrides::default()).unwrap();
        assert_eq!(p.params.get("delta"), Some(0.5));
        assert!(p.expected.is_none());
        let bad = RunConfig::parse(r#"{"system": {"preset": "duffing", "params": {"nope": 1}}}"#).unwrap();
        assert!(resolve(&bad, Overrides::default()).is_err());
    }

    #[test]
    fn overrides_win() {
        let cfg = RunConfig::for_preset("harmonic");
        let p = resolve(
            &cfg,
            Overrides {
                step: Some(0.005),
                t_end: Some(2.0),
            },
        )
        .unwrap();
        assert_eq!((p.integrator.step, p.integrator.t_end), (0.005, 2.0));
    }
}
