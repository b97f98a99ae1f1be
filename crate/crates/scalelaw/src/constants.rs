//! Named constant presets and user overrides.
//!
//! An override file is a JSON object. Its keys are the published symbol names
//! (`alpha_N`, `N_c`, `B_star`, ...) and each value replaces that symbol in
//! every constant set that carries it. The output of `scalelaw fit` is also
//! accepted; there each fitted law updates only the set it describes.

use std::fmt;

use scalelaw_core::fit::LawId;
use scalelaw_core::laws::{DataLawConstants, JointFitConstants, ScalingConstants, StepLawConstants};
use serde_json::Value;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Preset {
    /// Single-variable fits; joint laws built from the same exponents and scales.
    #[default]
    AppendixA,
    /// Single-variable fits with the joint `L(N, D)` fit.
    #[value(name = "table_2")]
    Table2,
    /// Single-variable fits with the joint `L(N, S_min)` fit.
    #[value(name = "table_3")]
    Table3,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::AppendixA => "appendix_a",
            Preset::Table2 => "table_2",
            Preset::Table3 => "table_3",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Every constant the tool uses, kept as separate sets because the joint fits
/// disagree slightly with the single-variable ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantSet {
    pub scaling: ScalingConstants,
    pub joint: JointFitConstants,
}

impl ConstantSet {
    pub fn preset(preset: Preset) -> Self {
        let k = ScalingConstants::appendix_a();
        let derived = JointFitConstants {
            data: DataLawConstants::from_scaling(&k),
            steps: StepLawConstants::from_scaling(&k),
        };
        let joint = match preset {
            Preset::AppendixA => derived,
            Preset::Table2 => JointFitConstants {
                data: DataLawConstants::table_2(),
                ..derived
            },
            Preset::Table3 => JointFitConstants {
                steps: StepLawConstants::table_3(),
                ..derived
            },
        };
        Self { scaling: k, joint }
    }

    pub fn validate(&self) -> Result<()> {
        self.scaling.validate()?;
        self.joint.data.validate()?;
        self.joint.steps.validate()?;
        Ok(())
    }

    /// Sets `symbol` in each selected set that carries it.
    fn set(&mut self, symbol: &str, value: f64, scaling: bool, data: bool, steps: bool) {
        if scaling {
            let k = &mut self.scaling;
            let slot = match symbol {
                "alpha_N" => Some(&mut k.alpha_n),
                "alpha_D" => Some(&mut k.alpha_d),
                "alpha_C" => Some(&mut k.alpha_c),
                "alpha_C_min" => Some(&mut k.alpha_c_min),
                "alpha_B" => Some(&mut k.alpha_b),
                "alpha_S" => Some(&mut k.alpha_s),
                "N_c" => Some(&mut k.n_c),
                "D_c" => Some(&mut k.d_c),
                "C_c" => Some(&mut k.c_c),
                "C_c_min" => Some(&mut k.c_c_min),
                "B_star" => Some(&mut k.b_star),
                "S_c" => Some(&mut k.s_c),
                _ => None,
            };
            if let Some(slot) = slot {
                *slot = value;
            }
        }
        if data {
            let j = &mut self.joint.data;
            let slot = match symbol {
                "alpha_N" => Some(&mut j.alpha_n),
                "alpha_D" => Some(&mut j.alpha_d),
                "N_c" => Some(&mut j.n_c),
                "D_c" => Some(&mut j.d_c),
                _ => None,
            };
            if let Some(slot) = slot {
                *slot = value;
            }
        }
        if steps {
            let j = &mut self.joint.steps;
            let slot = match symbol {
                "alpha_N" => Some(&mut j.alpha_n),
                "alpha_S" => Some(&mut j.alpha_s),
                "N_c" => Some(&mut j.n_c),
                "S_c" => Some(&mut j.s_c),
                _ => None,
            };
            if let Some(slot) = slot {
                *slot = value;
            }
        }
    }

    /// Applies an override document (see the module docs).
    pub fn apply_overrides(&mut self, text: &str) -> Result<()> {
        let doc: Value = serde_json::from_str(text)?;
        let Value::Object(map) = &doc else {
            return Err(CliError::new("invalid_constants", "constants file must hold a JSON object"));
        };
        if let Some(Value::Array(fits)) = map.get("fits") {
            for fit in fits {
                self.apply_fit(fit)?;
            }
        } else if map.contains_key("params") {
            self.apply_fit(&doc)?;
        } else {
            for (symbol, value) in map {
                self.apply_symbol(symbol, value, (true, true, true))?;
            }
        }
        self.validate()
    }

    fn apply_fit(&mut self, fit: &Value) -> Result<()> {
        let law: Option<LawId> = fit.get("law").map(|l| serde_json::from_value(l.clone())).transpose()?;
        let targets = match law {
            Some(LawId::LossOfNAndD) => (false, true, false),
            Some(LawId::LossOfNAndSmin) => (false, false, true),
            Some(_) => (true, false, false),
            None => (true, true, true),
        };
        let Some(Value::Object(params)) = fit.get("params") else {
            return Err(CliError::new("invalid_constants", "fit entry has no `params` object"));
        };
        for (symbol, value) in params {
            self.apply_symbol(symbol, value, targets)?;
        }
        Ok(())
    }

    fn apply_symbol(&mut self, symbol: &str, value: &Value, (k, d, s): (bool, bool, bool)) -> Result<()> {
        let Some(v) = value.as_f64() else {
            return Err(CliError::new("invalid_constants", format!("`{symbol}` must be a number")));
        };
        if !is_known(symbol) {
            return Err(CliError::new("unknown_constant", format!("unknown constant `{symbol}`")));
        }
        self.set(symbol, v, k, d, s);
        Ok(())
    }
}

const SYMBOLS: [&str; 12] = [
    "alpha_N",
    "alpha_D",
    "alpha_C",
    "alpha_C_min",
    "alpha_B",
    "alpha_S",
    "N_c",
    "D_c",
    "C_c",
    "C_c_min",
    "B_star",
    "S_c",
];

/// Symbols a fit may report that no constant set stores.
fn is_known(symbol: &str) -> bool {
    SYMBOLS.contains(&symbol) || matches!(symbol, "alpha" | "X_c")
}

/// Unit of each published symbol, for machine-readable output.
pub fn unit_of(symbol: &str) -> &'static str {
    match symbol {
        "N_c" => "params",
        "D_c" | "B_star" => "tokens",
        "C_c" | "C_c_min" => "pf_days",
        "S_c" => "steps",
        _ => "dimensionless",
    }
}
