//! Run configuration: a TOML file with fixed sections, every key optional,
//! unknown keys rejected. `NFL_<SECTION>_<KEY>` environment variables
//! override single keys before validation.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nfl_core::fock::ModeGrid;
use nfl_core::model::{BosonDispersion, DispersionKind, FormFactor, ModelSpec, ParticleDispersion};
use nfl_core::spectral::SolverOptions;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub dimension: usize,
    pub dispersion: DispersionKind,
    pub mass: f64,
    pub coupling: f64,
    pub alpha: f64,
    /// Ultraviolet cutoff Λ of the form factor.
    pub uv_cutoff: f64,
    /// Total momentum for the flow, pull-through and schedule tasks.
    pub momentum: Vec<f64>,
    /// Boson mass of the mass-shell scan.
    pub mu: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            dimension: 1,
            dispersion: DispersionKind::Nonrelativistic,
            mass: 1.0,
            coupling: 0.5,
            alpha: 0.25,
            uv_cutoff: 4.0,
            momentum: vec![0.3],
            mu: 0.1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub k_max: f64,
    pub modes: usize,
    pub n_max: usize,
    pub basis_limit: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            k_max: 4.0,
            modes: 16,
            n_max: 4,
            basis_limit: 200_000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub mu: Vec<f64>,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            mu: vec![0.4, 0.2, 0.1, 0.05],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub p_min: f64,
    pub p_max: f64,
    pub points: usize,
    pub grad_step: f64,
    pub hess_step: f64,
    pub small_k_modes: usize,
    /// Run the pull-through checks on every scanned momentum as well.
    pub pull_through: bool,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            p_min: -0.6,
            p_max: 0.6,
            points: 13,
            grad_step: 1e-3,
            hess_step: 1e-2,
            small_k_modes: 2,
            pull_through: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub lanczos_tol: f64,
    pub lanczos_max_iter: usize,
    pub lanczos_seed: u64,
    pub energy_tol: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub degenerate_gap: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            lanczos_tol: d.lanczos.tol,
            lanczos_max_iter: d.lanczos.max_iter,
            lanczos_seed: d.lanczos.seed,
            energy_tol: d.energy_tol,
            cg_tol: d.cg.rel_tol,
            cg_max_iter: d.cg.max_iter,
            degenerate_gap: d.degenerate_gap,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    pub max_leakage: f64,
    /// Form-factor exponent of the infrared-regular comparison run.
    pub regular_alpha: f64,
}

impl Default for FlowSection {
    fn default() -> Self {
        Self {
            max_leakage: 0.05,
            regular_alpha: 0.75,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LipschitzSection {
    pub pairs: usize,
    /// Target ‖·‖_# of the dressing pairs.
    pub target: f64,
    /// Modes per axis of the coarse and refined grids.
    pub modes: Vec<usize>,
    pub n_max: usize,
}

impl Default for LipschitzSection {
    fn default() -> Self {
        Self {
            pairs: 10,
            target: 2.0,
            modes: vec![16, 24],
            n_max: 3,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ConvexSection {
    pub parabolas: usize,
    pub resolution: usize,
}

impl Default for ConvexSection {
    fn default() -> Self {
        Self {
            parabolas: 200,
            resolution: 4096,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct IdentitiesSection {
    /// Modes and cutoff of the small space for the dense Weyl exponential.
    pub dense_modes: usize,
    pub dense_n_max: usize,
    /// ‖f‖ of the dense Weyl test function.
    pub dense_norm: f64,
}

impl Default for IdentitiesSection {
    fn default() -> Self {
        Self {
            dense_modes: 4,
            dense_n_max: 8,
            dense_norm: 0.1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub seed: u64,
    pub deterministic: bool,
    pub out: String,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            workers: 0,
            seed: 0,
            deterministic: false,
            out: "out".into(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub model: ModelSection,
    pub grid: GridSection,
    pub schedule: ScheduleSection,
    pub scan: ScanSection,
    pub solver: SolverSection,
    pub flow: FlowSection,
    pub lipschitz: LipschitzSection,
    pub convex: ConvexSection,
    pub identities: IdentitiesSection,
    pub run: RunSection,
}

const SECTIONS: &[&str] = &[
    "model",
    "grid",
    "schedule",
    "scan",
    "solver",
    "flow",
    "lipschitz",
    "convex",
    "identities",
    "run",
];

fn parse_env_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `NFL_<SECTION>_<KEY>` overrides. Section names contain no
/// underscore, so the first one after the prefix splits section from key.
pub fn apply_overrides<I, K, V>(table: &mut toml::Table, vars: I) -> Result<Vec<String>>
where
    I: IntoIterator<Item = (K, V)>,
    K: AsRef<str>,
    V: AsRef<str>,
{
    let mut applied = Vec::new();
    let mut vars: Vec<(String, String)> = vars
        .into_iter()
        .filter(|(k, _)| k.as_ref().starts_with("NFL_"))
        .map(|(k, v)| (k.as_ref().to_string(), v.as_ref().to_string()))
        .collect();
    vars.sort();
    for (name, raw) in vars {
        let rest = name["NFL_".len()..].to_ascii_lowercase();
        let Some((section, key)) = rest.split_once('_') else {
            bail!("environment override {name} does not name a section and key");
        };
        if !SECTIONS.contains(&section) {
            bail!("environment override {name}: unknown section `{section}`");
        }
        let entry = table
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let Some(sec) = entry.as_table_mut() else {
            bail!("section `{section}` is not a table");
        };
        sec.insert(key.to_string(), parse_env_value(&raw));
        applied.push(name);
    }
    Ok(applied)
}

/// Parses `text`, applies overrides from `vars`, deserializes strictly and
/// validates.
pub fn load_from_str<I, K, V>(text: &str, vars: I) -> Result<Config>
where
    I: IntoIterator<Item = (K, V)>,
    K: AsRef<str>,
    V: AsRef<str>,
{
    let mut table: toml::Table = toml::from_str(text).context("config is not valid TOML")?;
    apply_overrides(&mut table, vars)?;
    let cfg: Config = toml::Value::Table(table).try_into().context("invalid config")?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load(path: Option<&std::path::Path>) -> Result<Config> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    load_from_str(&text, std::env::vars())
}

impl Config {
    pub fn spec(&self) -> ModelSpec {
        let m = &self.model;
        ModelSpec {
            dispersion: ParticleDispersion {
                kind: m.dispersion,
                mass: m.mass,
            },
            boson: BosonDispersion { mu: m.mu },
            form_factor: FormFactor {
                coupling: m.coupling,
                alpha: m.alpha,
                cutoff: m.uv_cutoff,
            },
            momentum: m.momentum.clone(),
        }
    }

    pub fn grid(&self) -> Result<ModeGrid<f64>> {
        Ok(ModeGrid::build(self.model.dimension, self.grid.k_max, self.grid.modes)?)
    }

    pub fn solver_options(&self) -> SolverOptions {
        let mut o = SolverOptions::default();
        let s = &self.solver;
        o.lanczos.tol = s.lanczos_tol;
        o.lanczos.max_iter = s.lanczos_max_iter;
        o.lanczos.seed = s.lanczos_seed;
        o.energy_tol = s.energy_tol;
        o.cg.rel_tol = s.cg_tol;
        o.cg.max_iter = s.cg_max_iter;
        o.degenerate_gap = s.degenerate_gap;
        o
    }

    pub fn scan_points(&self) -> Vec<Vec<f64>> {
        let s = &self.scan;
        let d = self.model.dimension;
        (0..s.points)
            .map(|j| {
                let t = if s.points > 1 { j as f64 / (s.points - 1) as f64 } else { 0.5 };
                let mut p = vec![0.0; d];
                // snap the midpoint to an exact zero so E(0) is sampled
                let x = s.p_min + t * (s.p_max - s.p_min);
                p[0] = if x.abs() < 1e-12 * (s.p_max - s.p_min).abs() { 0.0 } else { x };
                p
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        let grid = self.grid()?;
        let spec = self.spec();
        // the square-integrability window is checked first so its error names H4
        spec.validate(&grid)?;
        let mut regular = spec.clone();
        regular.form_factor.alpha = self.flow.regular_alpha;
        regular.validate(&grid).context("flow.regular_alpha")?;
        if !(m.mass > 0.0) {
            bail!("model.mass must be positive");
        }
        if !(m.uv_cutoff > 0.0) {
            bail!("model.uv_cutoff must be positive");
        }
        if !(m.mu >= 0.0) {
            bail!("model.mu must be nonnegative");
        }
        if self.schedule.mu.is_empty() || self.schedule.mu.iter().any(|&x| !(x > 0.0)) {
            bail!("schedule.mu must be a nonempty list of positive masses");
        }
        let mut sorted = self.schedule.mu.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            bail!("schedule.mu contains repeated masses");
        }
        let s = &self.scan;
        if s.points == 0 || !(s.p_max > s.p_min) {
            bail!("scan needs points >= 1 and p_max > p_min");
        }
        if !(s.grad_step > 0.0) || !(s.hess_step > 0.0) {
            bail!("scan steps must be positive");
        }
        if self.lipschitz.modes.is_empty() || self.lipschitz.modes.iter().any(|&x| x == 0 || x % 2 == 1) {
            bail!("lipschitz.modes must list even mode counts");
        }
        if self.convex.resolution < 64 {
            bail!("convex.resolution must be at least 64");
        }
        if self.identities.dense_modes == 0 || self.identities.dense_modes % 2 == 1 {
            bail!("identities.dense_modes must be even and positive");
        }
        if self.run.out.is_empty() {
            bail!("run.out must not be empty");
        }
        Ok(())
    }

    /// SHA-256 of the resolved configuration. Keys that cannot change any
    /// numerical result (worker count, output directory, deterministic
    /// flag) are left out, so reruns elsewhere share the hash.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(run) = v.get_mut("run").and_then(|r| r.as_object_mut()) {
            run.remove("workers");
            run.remove("out");
            run.remove("deterministic");
        }
        hex::encode(Sha256::digest(serde_json::to_vec(&v).unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NONE: [(&str, &str); 0] = [];

    #[test]
    fn empty_config_is_the_default() {
        assert_eq!(load_from_str("", NONE).unwrap(), Config::default());
    }

    #[test]
    fn unknown_key_is_rejected() {
        let e = load_from_str("[grid]\nmodez = 4\n", NONE).unwrap_err();
        assert!(format!("{e:#}").contains("modez"));
        assert!(load_from_str("[gird]\n", NONE).is_err());
    }

    #[test]
    fn env_overrides_single_keys() {
        let cfg = load_from_str("", [("NFL_GRID_N_MAX", "2"), ("NFL_MODEL_DISPERSION", "sr"), ("HOME", "/x")]).unwrap();
        assert_eq!(cfg.grid.n_max, 2);
        assert_eq!(cfg.model.dispersion, DispersionKind::Semirelativistic);
        assert!(load_from_str("", [("NFL_GRID_WIDTH", "2")]).is_err());
        assert!(load_from_str("", [("NFL_NOPE_X", "2")]).is_err());
    }

    #[test]
    fn h4_violation_is_a_load_error() {
        let e = load_from_str("[model]\nalpha = -0.5\n", NONE).unwrap_err();
        assert!(format!("{e:#}").contains("H4"));
    }

    #[test]
    fn hash_ignores_run_plumbing() {
        let a = Config::default();
        let mut b = a.clone();
        b.run.out = "elsewhere".into();
        b.run.workers = 3;
        assert_eq!(a.hash(), b.hash());
        b.run.seed = 9;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn scan_hits_zero() {
        let p = Config::default().scan_points();
        assert_eq!(p.len(), 13);
        assert_eq!(p[6][0], 0.0);
    }
}
