//! TOML run configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linsolve::SolverOptions;
use crate::rheology::ViscosityModel;
use crate::stabilization::StabConstants;
use crate::verification::{DiffusionSpec, ManufacturedCase, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Convergence,
    Cavity,
    Solve,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum DtRule {
    /// `dt = scale / n_div`.
    Coupled {
        #[serde(default = "one")]
        scale: f64,
    },
    Fixed {
        dt: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for DtRule {
    fn default() -> Self {
        DtRule::Coupled { scale: 1.0 }
    }
}

impl DtRule {
    pub fn dt(&self, n_div: usize) -> f64 {
        match *self {
            DtRule::Coupled { scale } => scale / n_div as f64,
            DtRule::Fixed { dt } => dt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub n_div: Vec<usize>,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            n_div: vec![10, 20, 40, 80],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: DtRule,
    pub t_final: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            dt: DtRule::default(),
            t_final: 1.0,
        }
    }
}

/// Physical parameters overriding the scenario defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    pub rho: f64,
    pub alpha: f64,
    pub diffusion: DiffusionSpec,
    #[serde(default = "default_d_floor")]
    pub d_floor: f64,
    pub viscosity: ViscosityModel,
}

fn default_d_floor() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavityConfig {
    pub re: Vec<f64>,
    pub grid: usize,
    pub pseudo_dt: f64,
    pub tol_steady: f64,
    pub max_steps: usize,
    pub lid_speed: f64,
    /// Yield stress for a Casson cavity; 0 gives the Newtonian limit.
    pub yield_stress: f64,
}

impl Default for CavityConfig {
    fn default() -> Self {
        CavityConfig {
            re: vec![100.0, 400.0, 1000.0],
            grid: 64,
            pseudo_dt: 1.0,
            tol_steady: 1e-5,
            max_steps: 3000,
            lid_speed: 1.0,
            yield_stress: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub retain_trajectory: bool,
    pub vtk: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("output"),
            retain_trajectory: false,
            vtk: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub physics: Option<PhysicsConfig>,
    #[serde(default)]
    pub stabilization: StabConstants,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub cavity: CavityConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The scenario with any physics overrides applied.
    pub fn case(&self) -> Result<ManufacturedCase> {
        let scenario = self
            .scenario
            .ok_or_else(|| Error::Config("`scenario` is required for this command".into()))?;
        let mut case = scenario.default_case();
        if let Some(p) = self.physics {
            case.rho = p.rho;
            case.alpha = p.alpha;
            case.diffusion = p.diffusion;
            case.d_floor = p.d_floor;
            case.viscosity = p.viscosity;
        }
        Ok(case)
    }

    pub fn label(&self) -> String {
        match (&self.name, &self.scenario) {
            (Some(n), _) => n.clone(),
            (None, Some(s)) => s.label(),
            (None, None) => "run".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        self.stabilization.validate().map_err(to_config)?;
        self.solver.validate().map_err(to_config)?;
        match self.command {
            Command::Convergence | Command::Solve => {
                if self.mesh.n_div.is_empty() {
                    return cfg("mesh.n_div must list at least one resolution".into());
                }
                if let Some(&n) = self.mesh.n_div.iter().find(|&&n| n == 0 || n > 4096) {
                    return cfg(format!("mesh.n_div entries must be in 1..=4096, got {n}"));
                }
                if !(self.time.t_final > 0.0 && self.time.t_final.is_finite()) {
                    return cfg(format!("time.t_final must be positive, got {}", self.time.t_final));
                }
                match self.time.dt {
                    DtRule::Coupled { scale } if !(scale > 0.0 && scale.is_finite()) => {
                        return cfg(format!("time.dt.scale must be positive, got {scale}"));
                    }
                    DtRule::Fixed { dt } if !(dt > 0.0 && dt.is_finite()) => {
                        return cfg(format!("time.dt.dt must be positive, got {dt}"));
                    }
                    _ => {}
                }
                for &n in &self.mesh.n_div {
                    crate::solver::step_count(self.time.dt.dt(n), self.time.t_final).map_err(to_config)?;
                }
                let case = self.case()?;
                if let Scenario::WeakConst { re } = case.scenario {
                    if !(re > 0.0 && re.is_finite()) {
                        return cfg(format!("scenario.re must be positive, got {re}"));
                    }
                }
                case.coefficients().validate().map_err(to_config)?;
                if let DiffusionSpec::Constant { value } = case.diffusion {
                    if !(value > 0.0 && value.is_finite()) {
                        return cfg(format!("physics.diffusion.value must be positive, got {value}"));
                    }
                }
            }
            Command::Cavity => {
                let c = &self.cavity;
                if c.re.is_empty() {
                    return cfg("cavity.re must list at least one Reynolds number".into());
                }
                if let Some(re) = c.re.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
                    return cfg(format!("cavity.re entries must be positive, got {re}"));
                }
                if c.grid < 2 || c.grid > 4096 {
                    return cfg(format!("cavity.grid must be in 2..=4096, got {}", c.grid));
                }
                if !(c.pseudo_dt > 0.0 && c.pseudo_dt.is_finite()) {
                    return cfg(format!("cavity.pseudo_dt must be positive, got {}", c.pseudo_dt));
                }
                if !(c.tol_steady > 0.0 && c.tol_steady.is_finite()) {
                    return cfg(format!("cavity.tol_steady must be positive, got {}", c.tol_steady));
                }
                if c.max_steps == 0 {
                    return cfg("cavity.max_steps must be positive".into());
                }
                if !c.lid_speed.is_finite() || !(c.yield_stress >= 0.0 && c.yield_stress.is_finite()) {
                    return cfg("cavity.lid_speed must be finite and cavity.yield_stress non-negative".into());
                }
            }
        }
        Ok(())
    }
}

fn to_config(e: Error) -> Error {
    match e {
        Error::InvalidParameter(m) => Error::Config(m),
        other => other,
    }
}

/// Parses `10,20,40` into resolutions.
pub fn parse_ndiv_list(text: &str) -> Result<Vec<usize>> {
    let list = text
        .split(',')
        .map(|t| {
            let t = t.trim();
            match t.parse::<usize>() {
                Ok(n) if (1..=4096).contains(&n) => Ok(n),
                _ => Err(Error::Config(format!("invalid n_div entry `{t}`"))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if list.is_empty() {
        return Err(Error::Config("empty n_div list".into()));
    }
    Ok(list)
}

/// Parses `100,400,1000` into Reynolds numbers.
pub fn parse_re_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            match t.parse::<f64>() {
                Ok(r) if r > 0.0 && r.is_finite() => Ok(r),
                _ => Err(Error::Config(format!("invalid Reynolds number `{t}`"))),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
command = "convergence"
[scenario]
kind = "weak_const"
re = 100.0
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.mesh.n_div, vec![10, 20, 40, 80]);
        assert_eq!(c.time.dt.dt(20), 0.05);
        assert_eq!(c.stabilization, StabConstants::default());
        let case = c.case().unwrap();
        assert_eq!(case.viscosity.eta_of_c(0.0), 0.01);
        assert_eq!(c.label(), "Re=100");
    }

    #[test]
    fn round_trip_is_fixed_point() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        let text = c.to_toml().unwrap();
        let again = RunConfig::from_toml(&text).unwrap();
        assert_eq!(c, again);
        assert_eq!(again.to_toml().unwrap(), text);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml(&format!("{MINIMAL}\n[mesh]\nndiv = [10]\n")).unwrap_err();
        assert!(err.is_config_error());
        assert!(err.to_string().contains("ndiv"), "{err}");
    }

    #[test]
    fn invalid_values_are_explained() {
        let bad = [
            ("[mesh]\nn_div = []", "n_div"),
            ("[time]\nt_final = -1.0", "t_final"),
            ("[time]\ndt = { rule = \"fixed\", dt = 0.3 }", "integer"),
            ("[stabilization]\nc1 = -1.0", "c1"),
        ];
        for (extra, needle) in bad {
            let err = RunConfig::from_toml(&format!("{MINIMAL}\n{extra}\n")).unwrap_err();
            assert!(err.is_config_error(), "{extra}");
            assert!(err.to_string().contains(needle), "{extra}: {err}");
        }
        let cav = "command = \"cavity\"\n[cavity]\nre = []\n";
        assert!(RunConfig::from_toml(cav).unwrap_err().to_string().contains("cavity.re"));
        let missing = "command = \"solve\"\n";
        assert!(RunConfig::from_toml(missing).unwrap_err().to_string().contains("scenario"));
    }

    #[test]
    fn physics_override() {
        let text = format!(
            "{MINIMAL}\n[physics]\nrho = 2.0\nalpha = 0.1\ndiffusion = {{ kind = \"variable\" }}\n\
             viscosity = {{ law = \"exp_c\", a = 0.2, b = 0.1, yield_stress = 0.5 }}\n"
        );
        let c = RunConfig::from_toml(&text).unwrap();
        let case = c.case().unwrap();
        assert_eq!(case.rho, 2.0);
        assert_eq!(case.viscosity.yield_stress, 0.5);
        assert_eq!(case.diffusion, DiffusionSpec::Variable);
    }

    #[test]
    fn list_parsers() {
        assert_eq!(parse_ndiv_list("10, 20,40").unwrap(), vec![10, 20, 40]);
        assert!(parse_ndiv_list("").is_err());
        assert!(parse_ndiv_list("10,x").is_err());
        assert!(parse_ndiv_list("0").is_err());
        assert_eq!(parse_re_list("100,400").unwrap(), vec![100.0, 400.0]);
        assert!(parse_re_list("-1").is_err());
        assert!(parse_re_list("nan").is_err());
    }
}
