//! Experiment configuration: a TOML document with nested sections. Every
//! command-line flag has a config equivalent and flags override the file,
//! so a run is reproducible from the config alone. Validation collects all
//! violations instead of stopping at the first, and the effective config
//! (after overrides) is hashed so outputs can be traced back to it.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use beltrami_lab::functionals::WeightSpec;
use beltrami_lab::grid::{ComplexGrid, GridDescriptor};
use beltrami_lab::radial::RadialProfile;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub grid: GridSection,
    pub coefficient: CoefficientSection,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_side")]
    pub side: f64,
}

fn default_n() -> usize {
    256
}

fn default_side() -> f64 {
    4.0
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            n: default_n(),
            side: default_side(),
        }
    }
}

/// Which Beltrami coefficient to solve for. `id` selects the catalog entry
/// (`zero`, `power`, `g_eps`, `alpha_sharp`) or `file` for a binary grid
/// dump; the other fields are the entry's parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSection {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    /// Exponential-integrability exponent of the distortion.
    #[serde(default = "default_p")]
    pub p: f64,
    /// Integrability order: `exp(p K^alpha)` is the assumed finite moment.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Decay exponent; defaults to `0.75 p`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Modulus cap applied to the coefficient before solving.
    #[serde(default = "default_k_cap")]
    pub k_cap: f64,
    #[serde(default = "default_n_max")]
    pub n_max: u32,
    /// Early-stop threshold on series term norms. Defaults to an automatic
    /// near-machine value for `solve` and to 0 (full table) for `decay`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Epsilon grid for the damped-energy and Jacobian-energy sweeps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    /// Eta grid for the weight conversion check.
    #[serde(default = "default_eta_list")]
    pub eta_list: Vec<f64>,
    /// Truncation depth for radial tables: inner radii `e^{-k}`, `k` up to
    /// this count.
    #[serde(default = "default_r0_count")]
    pub r0_count: u32,
    /// Depth of the geometric truncation ladder used to classify radial
    /// integrals: log-coordinate depths `2^j` for `j` up to this. Slow
    /// divergence only reveals itself on a geometric grid.
    #[serde(default = "default_log2_depth")]
    pub log2_depth: u32,
    /// Quasiconformality constant for area bounds; defaults to the value
    /// implied by the capped coefficient modulus.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default)]
    pub weights: Vec<WeightSpec>,
    /// Expected truncation verdict per weight (`convergent`, `divergent`,
    /// `slow`); when present, mismatches fail the radial run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expect: Option<Vec<String>>,
}

fn default_p() -> f64 {
    1.0
}

fn default_alpha() -> f64 {
    1.0
}

fn default_k_cap() -> f64 {
    1.0 - 2f64.powi(-10)
}

fn default_n_max() -> u32 {
    30
}

fn default_eta_list() -> Vec<f64> {
    vec![1.0, 0.5, 0.25, 0.125]
}

fn default_r0_count() -> u32 {
    40
}

fn default_log2_depth() -> u32 {
    32
}

impl Default for ParamsSection {
    fn default() -> Self {
        ParamsSection {
            p: default_p(),
            alpha: default_alpha(),
            beta: None,
            k_cap: default_k_cap(),
            n_max: default_n_max(),
            tol: None,
            eps_list: None,
            eta_list: default_eta_list(),
            r0_count: default_r0_count(),
            log2_depth: default_log2_depth(),
            m: None,
            weights: Vec::new(),
            expect: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_out_dir(),
        }
    }
}

/// The subcommand being validated; some preconditions belong to only one
/// consumer module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Decay,
    Regularity,
    Area,
    Sweep,
    Radial,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Decay => "decay",
            Command::Regularity => "regularity",
            Command::Area => "area",
            Command::Sweep => "sweep",
            Command::Radial => "radial",
        }
    }
}

impl ParamsSection {
    /// Effective decay exponent.
    pub fn beta_or_default(&self) -> f64 {
        self.beta.unwrap_or(0.75 * self.p)
    }

    pub fn eps_list_or_default(&self) -> Vec<f64> {
        self.eps_list
            .clone()
            .unwrap_or_else(beltrami_lab::functionals::default_eps_grid)
    }
}

/// Serde ignores `deny_unknown_fields` on internally tagged enums, so a
/// stray key inside a `[[params.weights]]` table would slip through the
/// typed parse silently. Re-walk the raw document and reject it here.
fn reject_stray_weight_keys(text: &str) -> Result<(), String> {
    let doc: toml::Value = toml::from_str(text).map_err(|e| format!("config parse error: {e}"))?;
    let Some(weights) = doc
        .get("params")
        .and_then(|p| p.get("weights"))
        .and_then(|w| w.as_array())
    else {
        return Ok(());
    };
    for (i, entry) in weights.iter().enumerate() {
        let Some(table) = entry.as_table() else {
            continue;
        };
        let allowed: &[&str] = match table.get("kind").and_then(|k| k.as_str()) {
            Some("inv_log_distortion") => &["kind", "exponent"],
            Some("log_deriv_log_log") => &["kind", "p", "loglog_exponent"],
            Some("exp_log_power") => &["kind", "beta"],
            Some("eps_power") => &["kind", "eps"],
            _ => continue,
        };
        let stray: Vec<&str> = table
            .keys()
            .map(String::as_str)
            .filter(|k| !allowed.contains(k))
            .collect();
        if !stray.is_empty() {
            return Err(format!(
                "config parse error: params.weights[{i}]: unknown fields {stray:?}"
            ));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| format!("config parse error: {e}"))?;
        reject_stray_weight_keys(text)?;
        Ok(cfg)
    }

    /// First 12 hex digits of the SHA-256 of the effective (post-override)
    /// config, rendered back to canonical TOML.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        hex[..12].to_string()
    }

    /// Check every field against the preconditions of the modules `cmd`
    /// drives. Returns all violations, each prefixed with its config path.
    pub fn validate(&self, cmd: Command) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();

        if !self.grid.n.is_power_of_two() || self.grid.n < 8 {
            errs.push(format!(
                "grid.n: {} is not a power of two >= 8",
                self.grid.n
            ));
        }
        if !(self.grid.side >= 4.0) || !self.grid.side.is_finite() {
            errs.push(format!(
                "grid.side: {} must be finite and >= 4 so the unit disk has clearance",
                self.grid.side
            ));
        }

        self.validate_coefficient(cmd, &mut errs);

        let p = &self.params;
        if !(p.p > 0.0) || !p.p.is_finite() {
            errs.push(format!("params.p: {} must be positive", p.p));
        }
        if !(p.alpha >= 1.0) || !p.alpha.is_finite() {
            errs.push(format!("params.alpha: {} must be at least 1", p.alpha));
        }
        let beta = p.beta_or_default();
        if !(beta > 0.0 && beta < p.p) {
            errs.push(format!(
                "params.beta: {beta} must lie in (0, p) with p = {}",
                p.p
            ));
        } else if cmd == Command::Decay && beta < p.p / 2.0 {
            errs.push(format!(
                "params.beta: the decay constants need beta in [p/2, p); got {beta} with p = {}",
                p.p
            ));
        }
        if !(p.k_cap > 0.0 && p.k_cap < 1.0) {
            errs.push(format!("params.k_cap: {} must lie in (0, 1)", p.k_cap));
        }
        if p.n_max < 1 {
            errs.push("params.n_max: need at least one iteration".into());
        }
        if let Some(tol) = p.tol {
            if !(tol >= 0.0) || !tol.is_finite() {
                errs.push(format!("params.tol: {tol} must be finite and >= 0"));
            }
        }
        if let Some(list) = &p.eps_list {
            if list.is_empty() {
                errs.push("params.eps_list: must not be empty".into());
            }
            for (i, &e) in list.iter().enumerate() {
                if !(e > 0.0) || !e.is_finite() {
                    errs.push(format!("params.eps_list[{i}]: {e} must be positive"));
                }
            }
        }
        if p.eta_list.is_empty() {
            errs.push("params.eta_list: must not be empty".into());
        }
        for (i, &e) in p.eta_list.iter().enumerate() {
            if !(e > 0.0) || !e.is_finite() {
                errs.push(format!("params.eta_list[{i}]: {e} must be positive"));
            }
        }
        if p.r0_count < 2 {
            errs.push("params.r0_count: need at least two truncation depths".into());
        }
        if !(2..=40).contains(&p.log2_depth) {
            errs.push(format!(
                "params.log2_depth: {} must lie in 2..=40",
                p.log2_depth
            ));
        }
        if let Some(m) = p.m {
            if !(m >= 1.0) || !m.is_finite() {
                errs.push(format!("params.m: {m} must be finite and >= 1"));
            }
        }
        for (i, w) in p.weights.iter().enumerate() {
            if let Err(e) = w.validate() {
                errs.push(format!("params.weights[{i}]: {e}"));
            }
        }
        if let Some(expect) = &p.expect {
            if expect.len() != p.weights.len() {
                errs.push(format!(
                    "params.expect: {} entries for {} weights",
                    expect.len(),
                    p.weights.len()
                ));
            }
            for (i, e) in expect.iter().enumerate() {
                if !matches!(e.as_str(), "convergent" | "divergent" | "slow") {
                    errs.push(format!(
                        "params.expect[{i}]: {e:?} is not convergent, divergent or slow"
                    ));
                }
            }
        }

        if self.output.dir.as_os_str().is_empty() {
            errs.push("output.dir: must not be empty".into());
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    fn validate_coefficient(&self, cmd: Command, errs: &mut Vec<String>) {
        let c = &self.coefficient;
        let reject_extras = |errs: &mut Vec<String>, allowed: &[&str]| {
            let extras = [
                ("k", c.k.is_some()),
                ("p", c.p.is_some()),
                ("eps", c.eps.is_some()),
                ("alpha", c.alpha.is_some()),
                ("path", c.path.is_some()),
            ];
            for (name, present) in extras {
                if present && !allowed.contains(&name) {
                    errs.push(format!(
                        "coefficient.{name}: not a parameter of {:?}",
                        c.id
                    ));
                }
            }
        };
        match c.id.as_str() {
            "zero" => reject_extras(errs, &[]),
            "power" => {
                reject_extras(errs, &["k"]);
                match c.k {
                    Some(k) if k >= 1.0 && k.is_finite() => {}
                    Some(k) => errs.push(format!("coefficient.k: {k} must be >= 1")),
                    None => errs.push("coefficient.k: required for power".into()),
                }
            }
            "g_eps" => {
                reject_extras(errs, &["p", "eps"]);
                match c.p {
                    Some(p) if p > 0.0 && p.is_finite() => {}
                    Some(p) => errs.push(format!("coefficient.p: {p} must be positive")),
                    None => errs.push("coefficient.p: required for g_eps".into()),
                }
                match c.eps {
                    Some(e) if e > 0.0 && e.is_finite() => {}
                    Some(e) => errs.push(format!("coefficient.eps: {e} must be positive")),
                    None => errs.push("coefficient.eps: required for g_eps".into()),
                }
            }
            "alpha_sharp" => {
                reject_extras(errs, &["alpha"]);
                match c.alpha {
                    Some(a) if a > 1.0 && a.is_finite() => {}
                    Some(a) => errs.push(format!("coefficient.alpha: {a} must exceed 1")),
                    None => errs.push("coefficient.alpha: required for alpha_sharp".into()),
                }
            }
            "file" => {
                reject_extras(errs, &["path"]);
                if c.path.is_none() {
                    errs.push("coefficient.path: required for file".into());
                }
                if cmd == Command::Radial {
                    errs.push(
                        "coefficient.id: radial tables need a catalog coefficient, not a file"
                            .into(),
                    );
                }
            }
            other => errs.push(format!(
                "coefficient.id: {other:?} is not one of zero, power, g_eps, alpha_sharp, file"
            )),
        }
    }

    pub fn grid_descriptor(&self) -> Result<GridDescriptor, String> {
        GridDescriptor::new(self.grid.n, self.grid.side).map_err(|e| e.to_string())
    }

    /// The radial closed-form profile for catalog coefficients; `None` for
    /// file-backed fields.
    pub fn profile(&self) -> Option<RadialProfile> {
        let c = &self.coefficient;
        match c.id.as_str() {
            "zero" => Some(RadialProfile::identity()),
            "power" => RadialProfile::power(c.k?).ok(),
            "g_eps" => RadialProfile::g_eps(c.p?, c.eps?).ok(),
            "alpha_sharp" => RadialProfile::alpha_sharp(c.alpha?).ok(),
            _ => None,
        }
    }

    /// Sample or load the raw (uncapped) coefficient on the grid.
    pub fn raw_coefficient(&self, desc: GridDescriptor) -> Result<ComplexGrid, String> {
        if self.coefficient.id == "file" {
            let path = self.coefficient.path.as_ref().expect("validated");
            let g = ComplexGrid::read_binary(path)
                .map_err(|e| format!("coefficient.path: {}: {e}", path.display()))?;
            if g.descriptor() != desc {
                return Err(format!(
                    "coefficient.path: grid in file is {}x{} side {}, config wants {}x{} side {}",
                    g.descriptor().n(),
                    g.descriptor().n(),
                    g.descriptor().side(),
                    desc.n(),
                    desc.n(),
                    desc.side()
                ));
            }
            return Ok(g);
        }
        let prof = self.profile().expect("validated catalog coefficient");
        Ok(ComplexGrid::sample(desc, |z| prof.beltrami(z)))
    }

    pub fn describe_coefficient(&self) -> String {
        match self.profile() {
            Some(p) => p.describe(),
            None => match &self.coefficient.path {
                Some(path) => format!("file({})", path.display()),
                None => "file(?)".into(),
            },
        }
    }
}

/// Flag overrides shared by all subcommands; `None` keeps the config value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n: Option<usize>,
    pub side: Option<f64>,
    pub k_cap: Option<f64>,
    pub n_max: Option<u32>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(n) = o.n {
            self.grid.n = n;
        }
        if let Some(side) = o.side {
            self.grid.side = side;
        }
        if let Some(k_cap) = o.k_cap {
            self.params.k_cap = k_cap;
        }
        if let Some(n_max) = o.n_max {
            self.params.n_max = n_max;
        }
        if let Some(out) = &o.out {
            self.output.dir = out.clone();
        }
    }
}
