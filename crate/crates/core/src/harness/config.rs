use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioId {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig8,
    Fig9,
    Table2,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 8] = [
        ScenarioId::Fig2,
        ScenarioId::Fig3,
        ScenarioId::Fig4,
        ScenarioId::Fig5,
        ScenarioId::Fig6,
        ScenarioId::Fig8,
        ScenarioId::Fig9,
        ScenarioId::Table2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::Fig2 => "fig2",
            ScenarioId::Fig3 => "fig3",
            ScenarioId::Fig4 => "fig4",
            ScenarioId::Fig5 => "fig5",
            ScenarioId::Fig6 => "fig6",
            ScenarioId::Fig8 => "fig8",
            ScenarioId::Fig9 => "fig9",
            ScenarioId::Table2 => "table2",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ScenarioId::Fig2 => "transmit power vs channel strength: multicast, genie, CIPM, CIPMR",
            ScenarioId::Fig3 => "noiseless received points of CIPM and CIPMR for fixed symbols",
            ScenarioId::Fig4 => "SER vs transmit power: CIMM, CIMMR, ZF, MRT",
            ScenarioId::Fig5 => "effective rate per user vs channel strength",
            ScenarioId::Fig6 => "energy efficiency vs channel strength",
            ScenarioId::Fig8 => "energy efficiency and SER vs margin, 13.01 dB target, 20 dB channel",
            ScenarioId::Fig9 => "energy efficiency and SER vs margin, 4.7712 dB target, 0 dB channel",
            ScenarioId::Table2 => "energy efficiency of BPSK and QPSK at four margins",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| {
                let known: Vec<&str> = Self::ALL.iter().map(|s| s.name()).collect();
                Error::Config(format!("unknown scenario '{name}' (known: {})", known.join(", ")))
            })
    }
}

/// SER evaluation of each precoded symbol vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SerSetting {
    Analytic,
    MonteCarlo { symbols: u64 },
}

/// Full experiment description; JSON files override the scenario defaults
/// key by key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    /// Transmit antennas `M`.
    pub antennas: usize,
    /// Users `K`.
    pub users: usize,
    /// PSK orders; one entry except for `table2`.
    pub psk_orders: Vec<usize>,
    /// Common SNR target `ζ` in dB.
    pub target_db: f64,
    pub noise_power_db: f64,
    /// Channel power `σ_h²` sweep in dB (first entry used when not swept).
    pub channel_power_db: Vec<f64>,
    /// Power budget sweep in dB for the max-min scenarios.
    pub budget_db: Vec<f64>,
    /// Max-min SNR weights `r_j`.
    pub weights: Vec<f64>,
    /// Phase margins in degrees.
    pub phi_deg: Vec<f64>,
    /// Offset search grid step in degrees.
    pub phi_grid_step_deg: f64,
    pub trials: u64,
    pub seed: u64,
    pub ser: SerSetting,
}

fn degrees(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize;
    (0..=n).map(|i| start + step * i as f64).collect()
}

impl ScenarioConfig {
    pub fn defaults(id: ScenarioId) -> Self {
        let base = Self {
            scenario: id,
            antennas: 3,
            users: 2,
            psk_orders: vec![4],
            target_db: 4.7712,
            noise_power_db: 0.0,
            channel_power_db: vec![0.0],
            budget_db: vec![20.0],
            weights: vec![1.0, 1.0],
            phi_deg: vec![22.5, 36.0],
            phi_grid_step_deg: 1.0,
            trials: 10_000,
            seed: 1,
            ser: SerSetting::Analytic,
        };
        let sweep = degrees(0.0, 30.0, 5.0);
        match id {
            ScenarioId::Fig2 => Self {
                channel_power_db: sweep,
                ..base
            },
            ScenarioId::Fig3 => Self {
                target_db: 4.7121,
                phi_deg: vec![36.0],
                trials: 10,
                ..base
            },
            ScenarioId::Fig4 => Self {
                budget_db: sweep,
                ..base
            },
            ScenarioId::Fig5 | ScenarioId::Fig6 => Self {
                target_db: 4.7121,
                channel_power_db: sweep,
                ..base
            },
            ScenarioId::Fig8 => Self {
                target_db: 13.01,
                channel_power_db: vec![20.0],
                phi_deg: degrees(0.0, 45.0, 1.0),
                ser: SerSetting::MonteCarlo { symbols: 100 },
                ..base
            },
            ScenarioId::Fig9 => Self {
                target_db: 4.7712,
                channel_power_db: vec![0.0],
                phi_deg: degrees(0.0, 45.0, 1.0),
                ser: SerSetting::MonteCarlo { symbols: 100 },
                ..base
            },
            ScenarioId::Table2 => Self {
                target_db: 4.712,
                channel_power_db: vec![20.0],
                psk_orders: vec![2, 4],
                phi_deg: vec![0.0, 11.25, 22.5, 33.75],
                ser: SerSetting::MonteCarlo { symbols: 100 },
                ..base
            },
        }
    }

    /// Defaults of `id` overlaid with the keys of a JSON object.
    pub fn from_json(id: Option<ScenarioId>, text: &str) -> Result<Self> {
        let overlay: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        let serde_json::Value::Object(map) = overlay else {
            return Err(Error::Config("configuration must be a JSON object".into()));
        };
        let id = match (map.get("scenario"), id) {
            (Some(v), _) => {
                let name = v
                    .as_str()
                    .ok_or_else(|| Error::Config("'scenario' must be a string".into()))?;
                ScenarioId::parse(name)?
            }
            (None, Some(id)) => id,
            (None, None) => return Err(Error::Config("no scenario given".into())),
        };
        let mut merged = serde_json::to_value(Self::defaults(id)).expect("config serialises");
        let target = merged.as_object_mut().expect("config is an object");
        for (k, v) in map {
            if !target.contains_key(&k) {
                return Err(Error::Config(format!("unknown configuration key '{k}'")));
            }
            target.insert(k, v);
        }
        let config: Self =
            serde_json::from_value(merged).map_err(|e| Error::Config(format!("invalid configuration: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(id: Option<ScenarioId>, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(id, &text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.users == 0 || self.antennas < self.users {
            return bad(format!(
                "need 1 ≤ users ≤ antennas, got K={} M={}",
                self.users, self.antennas
            ));
        }
        if self.psk_orders.is_empty() || self.psk_orders.iter().any(|&m| m < 2) {
            return bad("psk_orders must be non-empty with orders ≥ 2".into());
        }
        if self.scenario != ScenarioId::Table2 && self.psk_orders.len() != 1 {
            return bad("only table2 accepts several PSK orders".into());
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !(self.target_db.is_finite() && self.noise_power_db.is_finite()) {
            return bad("target_db and noise_power_db must be finite".into());
        }
        if self.channel_power_db.is_empty() || !finite(&self.channel_power_db) {
            return bad("channel_power_db must be a non-empty list of finite values".into());
        }
        if self.budget_db.is_empty() || !finite(&self.budget_db) {
            return bad("budget_db must be a non-empty list of finite values".into());
        }
        if self.weights.len() != self.users || self.weights.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return bad(format!("weights must hold {} positive values", self.users));
        }
        let min_order = *self.psk_orders.iter().min().expect("non-empty");
        let limit = 180.0 / min_order as f64;
        if self.phi_deg.is_empty() || self.phi_deg.iter().any(|p| !(p.is_finite() && *p >= 0.0 && *p <= limit + 1e-9)) {
            return bad(format!("phi_deg values must lie in [0, {limit}]"));
        }
        if !(self.phi_grid_step_deg.is_finite() && self.phi_grid_step_deg > 0.0) {
            return bad("phi_grid_step_deg must be positive".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if let SerSetting::MonteCarlo { symbols: 0 } = self.ser {
            return bad("Monte-Carlo SER needs at least one symbol".into());
        }
        if self.scenario == ScenarioId::Fig3 && (self.users != 2 || self.psk_orders != [4]) {
            return bad("fig3 uses two QPSK users".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        for id in ScenarioId::ALL {
            ScenarioConfig::defaults(id).validate().unwrap();
            assert_eq!(ScenarioId::parse(id.name()).unwrap(), id);
        }
        assert_eq!(ScenarioConfig::defaults(ScenarioId::Fig8).phi_deg.len(), 46);
    }

    #[test]
    fn overlay_and_rejections() {
        let c = ScenarioConfig::from_json(None, r#"{"scenario": "fig2", "trials": 5, "seed": 9}"#).unwrap();
        assert_eq!((c.trials, c.seed, c.antennas), (5, 9, 3));
        let c = ScenarioConfig::from_json(Some(ScenarioId::Fig9), r#"{"ser": {"mode": "analytic"}}"#).unwrap();
        assert_eq!(c.ser, SerSetting::Analytic);
        for bad in [
            r#"{"scenario": "fig2", "tirals": 5}"#,
            r#"{"scenario": "fig7"}"#,
            r#"{"scenario": "fig2", "users": 4}"#,
            r#"{"scenario": "fig2", "phi_deg": [50]}"#,
            r#"{"scenario": "fig2", "ser": {"mode": "monte_carlo", "symbols": 1, "extra": 2}}"#,
            r#"[1, 2]"#,
            r#"{"trials": 3}"#,
        ] {
            let err = ScenarioConfig::from_json(None, bad).unwrap_err();
            assert!(err.is_config(), "{bad}: {err}");
        }
    }
}
