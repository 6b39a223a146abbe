//! Named run configurations compiled into the binary.

use crate::error::{Error, Result};

use super::config::RunConfig;

pub const PRESETS: &[(&str, &str)] = &[
    ("weak_const_re100", include_str!("../../presets/weak_const_re100.toml")),
    ("weak_const_re500", include_str!("../../presets/weak_const_re500.toml")),
    ("weak_const_re5000", include_str!("../../presets/weak_const_re5000.toml")),
    ("weak_const_re10000", include_str!("../../presets/weak_const_re10000.toml")),
    ("weak_const_re50000", include_str!("../../presets/weak_const_re50000.toml")),
    ("weak_casson_k", include_str!("../../presets/weak_casson_k.toml")),
    ("strong_linear_c", include_str!("../../presets/strong_linear_c.toml")),
    ("strong_exp_c", include_str!("../../presets/strong_exp_c.toml")),
    ("cavity", include_str!("../../presets/cavity.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset(name: &str) -> Result<RunConfig> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        Error::Config(format!(
            "unknown preset `{name}`; available: {}",
            preset_names().collect::<Vec<_>>().join(", ")
        ))
    })?;
    RunConfig::from_toml(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::app::config::Command;
    use crate::verification::Scenario;

    #[test]
    fn every_preset_parses_and_validates() {
        for name in preset_names() {
            let cfg = preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
            assert_eq!(cfg, again, "{name}");
        }
    }

    #[test]
    fn reynolds_presets_carry_their_number() {
        for re in [100, 500, 5000, 10000, 50000] {
            let cfg = preset(&format!("weak_const_re{re}")).unwrap();
            assert_eq!(cfg.command, Command::Convergence);
            assert_eq!(cfg.scenario, Some(Scenario::WeakConst { re: re as f64 }));
            let case = cfg.case().unwrap();
            assert_eq!(case.viscosity.eta_of_c(0.3), 1.0 / re as f64);
            assert_eq!(cfg.time.dt.dt(40), 1.0 / 40.0);
        }
        assert!(preset("nope").unwrap_err().to_string().contains("weak_const_re100"));
    }
}
