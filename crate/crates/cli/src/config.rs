//! TOML configuration: schema, unit-aware scalars, defaults and validation.
//!
//! Every numeric value may be a bare number (in the configured energy unit)
//! or a string with a unit tag such as `"115 K"` or `"0.1 eV"`. Validation
//! runs before any computation and names the offending key.

use std::fmt;
use std::path::Path;

use entroflow::drive::{DriveOptions, DriveProtocol};
use entroflow::probes::ProbeOptions;
use entroflow::quadrature::QuadTol;
use entroflow::units::{EnergyUnit, Quantity, UnitSystem};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Drive,
    Ring,
    Probes,
    Verify,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Experiment::Drive => "drive",
            Experiment::Ring => "ring",
            Experiment::Probes => "probes",
            Experiment::Verify => "verify",
        };
        f.write_str(s)
    }
}

/// A number, or a `"<number> <unit>"` string.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Text(String),
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Scalar;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a string like \"115 K\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Scalar, E> {
                Ok(Scalar::Number(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Scalar, E> {
                Ok(Scalar::Number(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Scalar, E> {
                Ok(Scalar::Number(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Scalar, E> {
                Ok(Scalar::Text(v.to_owned()))
            }
        }
        d.deserialize_any(V)
    }
}

impl Scalar {
    fn resolve(&self, units: &UnitSystem, key: &str) -> Result<f64> {
        let v = match self {
            Scalar::Number(x) => *x,
            Scalar::Text(s) => {
                let q: Quantity = s.parse().map_err(|e| CliError::Config(format!("{key}: {e}")))?;
                units.to_natural(q).map_err(|e| CliError::Config(format!("{key}: {e}")))?
            }
        };
        if !v.is_finite() {
            return Err(CliError::Config(format!("{key}: value must be finite")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub min: Scalar,
    pub max: Scalar,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<Scalar>),
    Range(GridRange),
}

impl Grid {
    fn resolve(&self, units: &UnitSystem, key: &str) -> Result<Vec<f64>> {
        match self {
            Grid::List(xs) => {
                if xs.is_empty() {
                    return Err(CliError::Config(format!("{key}: list is empty")));
                }
                xs.iter().enumerate().map(|(k, x)| x.resolve(units, &format!("{key}[{k}]"))).collect()
            }
            Grid::Range(r) => {
                let lo = r.min.resolve(units, &format!("{key}.min"))?;
                let hi = r.max.resolve(units, &format!("{key}.max"))?;
                if r.points < 2 {
                    return Err(CliError::Config(format!("{key}.points: need at least 2 points")));
                }
                if !(hi > lo) {
                    return Err(CliError::Config(format!("{key}: max must exceed min")));
                }
                if r.spacing == Spacing::Log && !(lo > 0.0) {
                    return Err(CliError::Config(format!("{key}.min: logarithmic grid needs a positive minimum")));
                }
                Ok(match r.spacing {
                    Spacing::Log => log_grid(lo, hi, r.points),
                    Spacing::Linear => (0..r.points).map(|k| lo + (hi - lo) * k as f64 / (r.points - 1) as f64).collect(),
                })
            }
        }
    }
}

/// `points` values from `lo` to `hi` (both exact), evenly spaced in log.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let r = (hi / lo).ln();
    (0..points)
        .map(|k| match k {
            0 => lo,
            k if k + 1 == points => hi,
            k => lo * (r * k as f64 / (points - 1) as f64).exp(),
        })
        .collect()
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct UnitsSection {
    pub energy: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct QuadSection {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_panels: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProbesSection {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub homotopy_stages: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSection {
    Rlm {
        #[serde(rename = "V")]
        v: Option<Scalar>,
        t0: Option<Scalar>,
        mu: Option<Scalar>,
    },
    Ring {
        n: Option<usize>,
        t_hop: Option<Scalar>,
        flux: Option<Scalar>,
        surface_gamma: Option<Scalar>,
        mu: Option<Scalar>,
        #[serde(rename = "T")]
        temperature: Option<Scalar>,
    },
    ProbedChain {
        /// Chain length of the probe profile.
        #[serde(rename = "N")]
        n: Option<usize>,
        t0: Option<Scalar>,
        #[serde(rename = "T0")]
        t_env: Option<Scalar>,
        mu_a: Option<Scalar>,
        mu_b: Option<Scalar>,
        delta_mu: Option<Scalar>,
    },
}

impl ModelSection {
    fn kind(&self) -> &'static str {
        match self {
            ModelSection::Rlm { .. } => "rlm",
            ModelSection::Ring { .. } => "ring",
            ModelSection::ProbedChain { .. } => "probed_chain",
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(rename = "T")]
    pub temperature: Option<Grid>,
    #[serde(rename = "N")]
    pub n: Option<Vec<usize>>,
    pub gamma_p: Option<Grid>,
    pub mu: Option<Grid>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub eps_start: Option<Scalar>,
    pub eps_end: Option<Scalar>,
    pub steps: Option<usize>,
    pub reservoir_sites: Option<usize>,
    pub max_reservoir_sites: Option<usize>,
    pub convergence: Option<f64>,
    /// Temperature grid of the heat-discrepancy table.
    #[serde(rename = "heat_T")]
    pub heat_temperature: Option<Grid>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub oracle_sites: Option<usize>,
    pub oracle_ramp_time: Option<f64>,
    pub oracle_dt: Option<f64>,
    #[serde(rename = "crossover_N")]
    pub crossover_sites: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<String>,
    #[serde(default)]
    pub units: UnitsSection,
    #[serde(default)]
    pub quad: QuadSection,
    #[serde(default)]
    pub probes: ProbesSection,
    pub model: Option<ModelSection>,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub drive: DriveSection,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl QuadSettings {
    pub fn tol(&self) -> QuadTol {
        QuadTol { rel_tol: self.rel_tol, abs_tol: self.abs_tol, max_panels: self.max_panels }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub homotopy_stages: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriveSetup {
    pub energy_unit: String,
    pub eps_start: f64,
    pub eps_end: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub t0: f64,
    pub mu: f64,
    pub steps: usize,
    pub temperatures: Vec<f64>,
    pub heat_temperatures: Vec<f64>,
    pub heat_mus: Vec<f64>,
    pub reservoir_sites: usize,
    pub max_reservoir_sites: usize,
    pub convergence: f64,
    pub quad: QuadSettings,
}

impl DriveSetup {
    pub fn protocol(&self, temperature: f64) -> DriveProtocol {
        DriveProtocol {
            eps_start: self.eps_start,
            eps_end: self.eps_end,
            v: self.v,
            t0: self.t0,
            mu: self.mu,
            temperature,
            steps: self.steps,
        }
    }

    pub fn options(&self) -> DriveOptions {
        DriveOptions {
            initial_sites: self.reservoir_sites,
            max_sites: self.max_reservoir_sites,
            convergence: self.convergence,
            quad: self.quad.tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RingSetup {
    pub energy_unit: String,
    pub n: usize,
    pub t_hop: f64,
    pub flux: f64,
    pub surface_gamma: f64,
    pub mu: f64,
    /// Temperature of the bond-resolved table.
    pub temperature: f64,
    pub temperatures: Vec<f64>,
    pub quad: QuadSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeSetup {
    pub energy_unit: String,
    pub t0: f64,
    pub t_env: f64,
    pub mu_a: f64,
    pub mu_b: f64,
    pub profile_sites: usize,
    pub sites: Vec<usize>,
    pub gamma_p: Vec<f64>,
    pub quad: QuadSettings,
    pub solver: ProbeSettings,
}

impl ProbeSetup {
    pub fn options(&self) -> ProbeOptions {
        ProbeOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            homotopy_stages: self.solver.homotopy_stages,
            quad: self.quad.tol(),
            ..ProbeOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifySetup {
    pub drive: DriveSetup,
    pub ring: RingSetup,
    pub probes: ProbeSetup,
    pub oracle_sites: usize,
    pub oracle_ramp_time: f64,
    pub oracle_dt: f64,
    pub crossover_sites: Vec<usize>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(v: f64, key: &str) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(config_err(format!("{key}: must be positive, got {v}")))
    }
}

fn opt(s: &Option<Scalar>, units: &UnitSystem, key: &str, default: f64) -> Result<f64> {
    s.as_ref().map_or(Ok(default), |x| x.resolve(units, key))
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err(e.to_string().trim_end().to_owned()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn check_experiment(&self, e: Experiment) -> Result<()> {
        match self.experiment.as_deref() {
            Some(x) if x != e.to_string() => Err(config_err(format!("experiment: file is for `{x}`, command is `{e}`"))),
            _ => Ok(()),
        }
    }

    fn units(&self, default: EnergyUnit) -> Result<UnitSystem> {
        let unit = match &self.units.energy {
            Some(s) => s.parse().map_err(|e| config_err(format!("units.energy: {e}")))?,
            None => default,
        };
        Ok(UnitSystem::new(unit))
    }

    fn quad(&self) -> Result<QuadSettings> {
        let d = QuadTol::default();
        let q = QuadSettings {
            rel_tol: self.quad.rel_tol.unwrap_or(d.rel_tol),
            abs_tol: self.quad.abs_tol.unwrap_or(d.abs_tol),
            max_panels: self.quad.max_panels.unwrap_or(d.max_panels),
        };
        positive(q.rel_tol, "quad.rel_tol")?;
        positive(q.abs_tol, "quad.abs_tol")?;
        if q.max_panels < 4 {
            return Err(config_err("quad.max_panels: must be at least 4"));
        }
        Ok(q)
    }

    fn solver(&self) -> Result<ProbeSettings> {
        let d = ProbeOptions::default();
        let s = ProbeSettings {
            tol: self.probes.tol.unwrap_or(d.tol),
            max_iter: self.probes.max_iter.unwrap_or(d.max_iter),
            homotopy_stages: self.probes.homotopy_stages.unwrap_or(d.homotopy_stages),
        };
        positive(s.tol, "probes.tol")?;
        if s.max_iter == 0 {
            return Err(config_err("probes.max_iter: must be positive"));
        }
        Ok(s)
    }

    fn model_for(&self, kind: &str) -> Result<Option<&ModelSection>> {
        match &self.model {
            Some(m) if m.kind() != kind => {
                Err(config_err(format!("model.kind: expected `{kind}` for this experiment, got `{}`", m.kind())))
            }
            m => Ok(m.as_ref()),
        }
    }

    fn reject_sweep(&self, keys: &[(&str, bool)]) -> Result<()> {
        for (k, present) in keys {
            if *present {
                return Err(config_err(format!("sweep.{k}: not used by this experiment")));
            }
        }
        Ok(())
    }

    pub fn drive_setup(&self) -> Result<DriveSetup> {
        self.check_experiment(Experiment::Drive)?;
        let units = self.units(EnergyUnit::Hopping)?;
        self.reject_sweep(&[("N", self.sweep.n.is_some()), ("gamma_p", self.sweep.gamma_p.is_some())])?;
        let (v, t0, mu) = match self.model_for("rlm")? {
            Some(ModelSection::Rlm { v, t0, mu }) => {
                (opt(v, &units, "model.V", 1.0)?, opt(t0, &units, "model.t0", 1.25)?, opt(mu, &units, "model.mu", 0.0)?)
            }
            _ => (1.0, 1.25, 0.0),
        };
        if t0 == 0.0 {
            return Err(config_err("model.t0: must be nonzero"));
        }
        let d = &self.drive;
        let eps_start = opt(&d.eps_start, &units, "drive.eps_start", 1.0)?;
        let eps_end = opt(&d.eps_end, &units, "drive.eps_end", 1.5)?;
        let temperatures = match &self.sweep.temperature {
            Some(g) => g.resolve(&units, "sweep.T")?,
            None => log_grid(0.01, 1.0, 25),
        };
        for (k, t) in temperatures.iter().enumerate() {
            positive(*t, &format!("sweep.T[{k}]"))?;
        }
        let heat_temperatures = match &d.heat_temperature {
            Some(g) => g.resolve(&units, "drive.heat_T")?,
            None => log_grid(0.01, 5.0, 30),
        };
        for (k, t) in heat_temperatures.iter().enumerate() {
            positive(*t, &format!("drive.heat_T[{k}]"))?;
        }
        let heat_mus = match &self.sweep.mu {
            Some(g) => g.resolve(&units, "sweep.mu")?,
            None => vec![0.0, 0.5, 1.0],
        };
        let defaults = DriveOptions::default();
        let setup = DriveSetup {
            energy_unit: units.energy_unit.to_string(),
            eps_start,
            eps_end,
            v,
            t0,
            mu,
            steps: d.steps.unwrap_or(16),
            temperatures,
            heat_temperatures,
            heat_mus,
            reservoir_sites: d.reservoir_sites.unwrap_or(defaults.initial_sites),
            max_reservoir_sites: d.max_reservoir_sites.unwrap_or(defaults.max_sites),
            convergence: d.convergence.unwrap_or(defaults.convergence),
            quad: self.quad()?,
        };
        if setup.steps == 0 {
            return Err(config_err("drive.steps: must be positive"));
        }
        if setup.reservoir_sites < 2 {
            return Err(config_err("drive.reservoir_sites: must be at least 2"));
        }
        if setup.max_reservoir_sites < setup.reservoir_sites {
            return Err(config_err("drive.max_reservoir_sites: must not be below drive.reservoir_sites"));
        }
        positive(setup.convergence, "drive.convergence")?;
        Ok(setup)
    }

    pub fn ring_setup(&self) -> Result<RingSetup> {
        self.check_experiment(Experiment::Ring)?;
        let units = self.units(EnergyUnit::ElectronVolt)?;
        self.reject_sweep(&[("N", self.sweep.n.is_some()), ("gamma_p", self.sweep.gamma_p.is_some()), ("mu", self.sweep.mu.is_some())])?;
        let default_hop = match units.energy_unit {
            EnergyUnit::ElectronVolt => 2.7,
            EnergyUnit::Hopping => 1.0,
        };
        let none = None;
        let (n, t_hop, flux, gamma, mu, temp) = match self.model_for("ring")? {
            Some(ModelSection::Ring { n, t_hop, flux, surface_gamma, mu, temperature }) => {
                (*n, t_hop, flux, surface_gamma, mu, temperature)
            }
            _ => (None, &none, &none, &none, &none, &none),
        };
        let n = n.unwrap_or(6);
        if n < 3 {
            return Err(config_err(format!("model.n: a ring needs at least 3 sites, got {n}")));
        }
        let t_hop = opt(t_hop, &units, "model.t_hop", default_hop)?;
        if t_hop == 0.0 {
            return Err(config_err("model.t_hop: must be nonzero"));
        }
        let scale = t_hop.abs();
        let surface_gamma = opt(gamma, &units, "model.surface_gamma", 0.05 * scale)?;
        if surface_gamma < 0.0 {
            return Err(config_err("model.surface_gamma: must be non-negative"));
        }
        let temperature = positive(opt(temp, &units, "model.T", 0.1 * scale)?, "model.T")?;
        let temperatures = match &self.sweep.temperature {
            Some(g) => g.resolve(&units, "sweep.T")?,
            None => log_grid(1e-3 * scale, 2.0 * scale, 40),
        };
        for (k, t) in temperatures.iter().enumerate() {
            positive(*t, &format!("sweep.T[{k}]"))?;
        }
        Ok(RingSetup {
            energy_unit: units.energy_unit.to_string(),
            n,
            t_hop,
            flux: opt(flux, &units, "model.flux", 0.05)?,
            surface_gamma,
            mu: opt(mu, &units, "model.mu", 0.5 * scale)?,
            temperature,
            temperatures,
            quad: self.quad()?,
        })
    }

    pub fn probe_setup(&self) -> Result<ProbeSetup> {
        self.check_experiment(Experiment::Probes)?;
        let units = self.units(EnergyUnit::ElectronVolt)?;
        self.reject_sweep(&[("T", self.sweep.temperature.is_some()), ("mu", self.sweep.mu.is_some())])?;
        let (t0_default, t_env_default, bias_default) = match units.energy_unit {
            EnergyUnit::ElectronVolt => (2.7, 115.0 * units.kb, 0.1),
            EnergyUnit::Hopping => (1.0, 0.01, 0.1),
        };
        let none = None;
        let (n, t0, t_env, mu_a, mu_b, delta) = match self.model_for("probed_chain")? {
            Some(ModelSection::ProbedChain { n, t0, t_env, mu_a, mu_b, delta_mu }) => (*n, t0, t_env, mu_a, mu_b, delta_mu),
            _ => (None, &none, &none, &none, &none, &none),
        };
        let t0 = opt(t0, &units, "model.t0", t0_default)?;
        if t0 == 0.0 {
            return Err(config_err("model.t0: must be nonzero"));
        }
        let t_env = positive(opt(t_env, &units, "model.T0", t_env_default)?, "model.T0")?;
        let (mu_a, mu_b) = match (mu_a, mu_b, delta) {
            (Some(_), _, Some(_)) | (_, Some(_), Some(_)) => {
                return Err(config_err("model.delta_mu: give either delta_mu or mu_a/mu_b, not both"));
            }
            (_, _, Some(d)) => {
                let d = d.resolve(&units, "model.delta_mu")?;
                (0.5 * d, -0.5 * d)
            }
            (a, b, None) => (opt(a, &units, "model.mu_a", 0.5 * bias_default)?, opt(b, &units, "model.mu_b", -0.5 * bias_default)?),
        };
        let profile_sites = n.unwrap_or(40);
        if profile_sites == 0 {
            return Err(config_err("model.N: must be positive"));
        }
        let sites = self.sweep.n.clone().unwrap_or_else(|| vec![3, 10, 30, 100]);
        if sites.is_empty() || sites.contains(&0) {
            return Err(config_err("sweep.N: need a nonempty list of positive chain lengths"));
        }
        let gamma_p = match &self.sweep.gamma_p {
            Some(g) => g.resolve(&units, "sweep.gamma_p")?,
            None => [0.03, 0.3, 3.0].iter().map(|x| x * t0.abs()).collect(),
        };
        for (k, g) in gamma_p.iter().enumerate() {
            if *g < 0.0 {
                return Err(config_err(format!("sweep.gamma_p[{k}]: must be non-negative, got {g}")));
            }
        }
        Ok(ProbeSetup {
            energy_unit: units.energy_unit.to_string(),
            t0,
            t_env,
            mu_a,
            mu_b,
            profile_sites,
            sites,
            gamma_p,
            quad: self.quad()?,
            solver: self.solver()?,
        })
    }

    pub fn verify_setup(&self) -> Result<VerifySetup> {
        self.check_experiment(Experiment::Verify)?;
        if self.model.is_some() {
            return Err(config_err("model: verify runs fixed reference models; remove the model section"));
        }
        let sweep = &self.sweep;
        if sweep.temperature.is_some() || sweep.n.is_some() || sweep.gamma_p.is_some() || sweep.mu.is_some() {
            return Err(config_err("sweep: verify runs fixed reference sweeps; remove the sweep section"));
        }
        if self.units.energy.is_some() {
            return Err(config_err("units.energy: verify uses the reference units of each model"));
        }
        let base = ConfigFile { quad: self.quad.clone(), probes: self.probes.clone(), drive: self.drive.clone(), ..Default::default() };
        let v = &self.verify;
        let setup = VerifySetup {
            drive: base.drive_setup()?,
            ring: base.ring_setup()?,
            probes: base.probe_setup()?,
            oracle_sites: v.oracle_sites.unwrap_or(600),
            oracle_ramp_time: v.oracle_ramp_time.unwrap_or(200.0),
            oracle_dt: v.oracle_dt.unwrap_or(0.02),
            crossover_sites: v.crossover_sites.clone().unwrap_or_else(|| vec![3, 10, 30]),
        };
        if setup.oracle_sites < 2 {
            return Err(config_err("verify.oracle_sites: must be at least 2"));
        }
        positive(setup.oracle_ramp_time, "verify.oracle_ramp_time")?;
        positive(setup.oracle_dt, "verify.oracle_dt")?;
        if setup.crossover_sites.len() < 2 || setup.crossover_sites.contains(&0) {
            return Err(config_err("verify.crossover_N: need at least two positive chain lengths"));
        }
        Ok(setup)
    }
}
