//! Scenario files: TOML describing a carrier, delay profiles, fronthaul
//! and scheduling, cross-validated and turned into a [`SimConfig`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::delay_profile::{
    derive_du_profile, du_preset, ru_preset, validate_pair, DuDelayProfile, Finding, FronthaulDelay, PresetName,
    RuDelayProfile,
};
use crate::du_engine::{default_prach_offset, Duplex, DuSchedulerConfig, PrachConfig, TddPattern};
use crate::iq_compress::{CompMethod, CompParams};
use crate::ru_engine::RuConfig;
use crate::sim_transport::{Jitter, LinkConfig, SimConfig, UeConfig};
use crate::timing::{slot_duration_us, NumerologyConfig, SlotClock, SlotPoint, DEFAULT_RX_TO_TX_DELAY_NS};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario syntax: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid(e: impl ToString) -> ScenarioError {
    ScenarioError::Invalid(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumerologySection {
    pub scs_khz: u32,
    pub sampling_rate_hz: u64,
    pub nof_prb: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DuplexMode {
    Tdd,
    Fdd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DuplexSection {
    pub mode: DuplexMode,
    /// Slot pattern such as "DDDSU"; TDD only.
    pub pattern: Option<String>,
}

/// A preset, explicit field values, or a preset with overrides.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProfileSection {
    pub preset: Option<String>,
    /// DU only: derive from the RU profile and the fronthaul bounds.
    #[serde(default)]
    pub derive: bool,
    #[serde(flatten)]
    pub fields: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JitterMode {
    #[default]
    None,
    Uniform,
    Sequence,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FronthaulSection {
    #[serde(default)]
    pub t12_min: u32,
    #[serde(default)]
    pub t12_max: u32,
    #[serde(default)]
    pub t34_min: u32,
    #[serde(default)]
    pub t34_max: u32,
    #[serde(default)]
    pub jitter: JitterMode,
    /// Absolute DL delays cycled through in `sequence` mode.
    #[serde(default)]
    pub dl_sequence: Vec<u32>,
    #[serde(default)]
    pub ul_sequence: Vec<u32>,
    #[serde(default)]
    pub drop_rate: f64,
    /// RU clock minus DU clock.
    #[serde(default)]
    pub clock_offset_us: i64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompSection {
    pub meth: String,
    pub width: u8,
}

impl Default for CompSection {
    fn default() -> Self {
        Self { meth: "bfp".into(), width: 9 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DuSection {
    pub lambda: Option<u32>,
    pub tcp_adv_dl_us: Option<u32>,
    pub t1a_cp_dl_point_us: Option<u32>,
    pub t1a_up_point_us: Option<u32>,
    pub t1a_cp_ul_point_us: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuSection {
    pub lowphy_lead_slots: Option<u32>,
    pub ta3_tx_point_us: Option<u32>,
    #[serde(default)]
    pub processing_latency_us: u32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrachSection {
    #[serde(default)]
    pub enabled: bool,
    pub index: Option<u16>,
    /// Half-subcarrier units; defaults to the band starting at subcarrier 0.
    pub freq_offset: Option<i32>,
    pub tone_bin: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_frames: u32,
    pub ports: usize,
    pub numerology: NumerologySection,
    pub duplex: DuplexSection,
    pub ru_profile: ProfileSection,
    pub du_profile: ProfileSection,
    #[serde(default)]
    pub fronthaul: FronthaulSection,
    #[serde(default)]
    pub comp: CompSection,
    #[serde(default)]
    pub du: DuSection,
    #[serde(default)]
    pub ru: RuSection,
    #[serde(default)]
    pub prach: PrachSection,
}

/// A validated scenario ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub sim: SimConfig,
    pub fronthaul: FronthaulDelay,
    /// RU/DU profile audit; warnings do not block a run.
    pub findings: Vec<Finding>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn mu(&self) -> Result<u8, ScenarioError> {
        match self.numerology.scs_khz {
            15 => Ok(0),
            30 => Ok(1),
            60 => Ok(2),
            120 => Ok(3),
            other => Err(invalid(format!("unsupported subcarrier spacing {other} kHz"))),
        }
    }

    pub fn fronthaul_delay(&self) -> Result<FronthaulDelay, ScenarioError> {
        let f = &self.fronthaul;
        FronthaulDelay::new(f.t12_min, f.t12_max, f.t34_min, f.t34_max).map_err(invalid)
    }

    pub fn ru_delay_profile(&self) -> Result<RuDelayProfile, ScenarioError> {
        let s = &self.ru_profile;
        if s.derive {
            return Err(invalid("the RU profile cannot be derived"));
        }
        let mut p = match &s.preset {
            Some(name) => ru_preset(name.parse::<PresetName>().map_err(invalid)?),
            None => {
                require_all(&s.fields, RuDelayProfile::FIELDS)?;
                ru_preset(PresetName::TddScs30)
            }
        };
        for (k, v) in &s.fields {
            *p.field_mut(k).map_err(invalid)? = *v;
        }
        p.validate().map_err(invalid)?;
        Ok(p)
    }

    pub fn du_delay_profile(&self, ru: &RuDelayProfile) -> Result<DuDelayProfile, ScenarioError> {
        let s = &self.du_profile;
        let mut p = match (&s.preset, s.derive) {
            (Some(_), true) => return Err(invalid("du_profile: give either a preset or derive, not both")),
            (None, true) => derive_du_profile(ru, &self.fronthaul_delay()?).map_err(invalid)?,
            (Some(name), false) => du_preset(name.parse::<PresetName>().map_err(invalid)?),
            (None, false) => {
                require_all(&s.fields, DuDelayProfile::FIELDS)?;
                du_preset(PresetName::TddScs30)
            }
        };
        for (k, v) in &s.fields {
            *p.field_mut(k).map_err(invalid)? = *v;
        }
        p.validate().map_err(invalid)?;
        Ok(p)
    }

    fn links(&self, fh: &FronthaulDelay) -> Result<(LinkConfig, LinkConfig), ScenarioError> {
        let f = &self.fronthaul;
        let (mut dl, mut ul) = match f.jitter {
            JitterMode::None => (LinkConfig::fixed(fh.t12_min), LinkConfig::fixed(fh.t34_min)),
            JitterMode::Uniform => (LinkConfig::uniform(fh.t12_min, fh.t12_max), LinkConfig::uniform(fh.t34_min, fh.t34_max)),
            JitterMode::Sequence => {
                let seq = |name: &str, s: &[u32], lo: u32, hi: u32| {
                    if s.is_empty() {
                        return Err(invalid(format!("fronthaul.{name} is empty")));
                    }
                    if let Some(bad) = s.iter().find(|&&d| d < lo || d > hi) {
                        return Err(invalid(format!("fronthaul.{name} value {bad} outside [{lo}, {hi}]")));
                    }
                    Ok(LinkConfig { base_delay_us: 0, jitter: Jitter::FixedSequence(s.to_vec()), drop_rate: 0.0 })
                };
                (
                    seq("dl_sequence", &f.dl_sequence, fh.t12_min, fh.t12_max)?,
                    seq("ul_sequence", &f.ul_sequence, fh.t34_min, fh.t34_max)?,
                )
            }
        };
        if f.jitter != JitterMode::Sequence && !(f.dl_sequence.is_empty() && f.ul_sequence.is_empty()) {
            return Err(invalid("delay sequences need jitter = \"sequence\""));
        }
        dl.drop_rate = f.drop_rate;
        ul.drop_rate = f.drop_rate;
        Ok((dl, ul))
    }

    /// Validates everything and assembles the simulation. `seed` overrides
    /// the scenario seed.
    pub fn build(&self, seed: Option<u64>) -> Result<Scenario, ScenarioError> {
        let mu = self.mu()?;
        let n = &self.numerology;
        let numerology = NumerologyConfig::new(mu, n.sampling_rate_hz, n.nof_prb).map_err(invalid)?;
        if self.n_frames == 0 {
            return Err(invalid("n_frames must be positive"));
        }
        if self.ports == 0 || self.ports > 16 {
            return Err(invalid(format!("{} ports", self.ports)));
        }
        let duplex = match (self.duplex.mode, &self.duplex.pattern) {
            (DuplexMode::Tdd, Some(p)) => Duplex::Tdd(p.parse::<TddPattern>().map_err(invalid)?),
            (DuplexMode::Tdd, None) => return Err(invalid("TDD needs duplex.pattern")),
            (DuplexMode::Fdd, None) => Duplex::Fdd,
            (DuplexMode::Fdd, Some(_)) => return Err(invalid("duplex.pattern is TDD only")),
        };
        let comp = match self.comp.meth.as_str() {
            "bfp" => CompParams::new(CompMethod::Bfp, self.comp.width),
            "none" => CompParams::new(CompMethod::None, self.comp.width),
            other => return Err(invalid(format!("unknown compression method `{other}`"))),
        }
        .map_err(invalid)?;

        let fh = self.fronthaul_delay()?;
        let ru_profile = self.ru_delay_profile()?;
        let du_profile = self.du_delay_profile(&ru_profile)?;
        let (dl_link, ul_link) = self.links(&fh)?;

        let slot_us = slot_duration_us(mu);
        let lead = self
            .ru
            .lowphy_lead_slots
            .unwrap_or_else(|| DEFAULT_RX_TO_TX_DELAY_NS.div_ceil(slot_us as u64 * 1000) as u32);
        let lambda = self.du.lambda.unwrap_or(if matches!(duplex, Duplex::Tdd(_)) { 10 } else { 5 });
        let offset = self.fronthaul.clock_offset_us;
        let du_t0 = (lambda as i64 + lead as i64 + 1) * slot_us + offset.abs();
        let anchor = SlotPoint::from_system_slot(mu, 0);
        let du_clock = SlotClock::new(anchor, du_t0);
        let ru_clock = SlotClock::new(anchor, du_t0 + offset);

        let mut ru = RuConfig::new(numerology.clone(), ru_profile, ru_clock, self.ports);
        ru.lowphy_lead_slots = lead;
        ru.processing_latency_us = self.ru.processing_latency_us;
        if let Some(p) = self.ru.ta3_tx_point_us {
            ru.ta3_tx_point_us = p;
        }
        ru.validate().map_err(invalid)?;

        let mut du = DuSchedulerConfig::new(numerology, du_profile, du_clock, duplex, self.ports);
        du.scheduling_offset_slots = lambda;
        du.comp = comp;
        let d = &self.du;
        if let Some(v) = d.tcp_adv_dl_us {
            du.tcp_adv_dl_us = v;
        }
        if let Some(v) = d.t1a_cp_dl_point_us {
            du.t1a_cp_dl_point_us = v;
        }
        if let Some(v) = d.t1a_up_point_us {
            du.t1a_up_point_us = v;
        }
        if let Some(v) = d.t1a_cp_ul_point_us {
            du.t1a_cp_ul_point_us = v;
        }
        let mut ue = UeConfig::default();
        if self.prach.enabled {
            let index = self.prach.index.ok_or_else(|| invalid("prach.index is required when PRACH is enabled"))?;
            let offset = self.prach.freq_offset.unwrap_or_else(|| default_prach_offset(n.nof_prb));
            du.prach = Some(PrachConfig::from_index(index, offset).map_err(invalid)?);
            if let Some(b) = self.prach.tone_bin {
                ue.prach_tone_bin = b;
            }
        }
        du.validate().map_err(invalid)?;

        let mut sim = SimConfig::new(ru, du, self.n_frames, seed.unwrap_or(self.fronthaul.seed));
        sim.dl_link = dl_link;
        sim.ul_link = ul_link;
        sim.ue = ue;
        sim.validate().map_err(invalid)?;
        let findings = validate_pair(&ru_profile, &du_profile, &fh);
        Ok(Scenario { config: self.clone(), sim, fronthaul: fh, findings })
    }
}

/// Every field must be given when there is no preset to start from.
fn require_all(fields: &BTreeMap<String, u32>, names: [&str; 8]) -> Result<(), ScenarioError> {
    match names.iter().find(|n| !fields.contains_key(**n)) {
        Some(name) => Err(invalid(format!("profile must set `{name}`"))),
        None => Ok(()),
    }
}

/// Delay profiles from a standalone file of flat `field = value` pairs.
/// The file may hold the eight RU fields, the eight DU fields, or both.
pub fn parse_profile_file(text: &str) -> Result<(Option<RuDelayProfile>, Option<DuDelayProfile>), ScenarioError> {
    let fields: BTreeMap<String, u32> = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    if let Some(k) = fields.keys().find(|k| !RuDelayProfile::FIELDS.contains(&k.as_str()) && !DuDelayProfile::FIELDS.contains(&k.as_str())) {
        return Err(invalid(format!("unknown profile field `{k}`")));
    }
    let has_any = |names: [&str; 8]| names.iter().any(|n| fields.contains_key(*n));
    let ru = if has_any(RuDelayProfile::FIELDS) {
        require_all(&fields, RuDelayProfile::FIELDS)?;
        let mut p = ru_preset(PresetName::TddScs30);
        for n in RuDelayProfile::FIELDS {
            *p.field_mut(n).map_err(invalid)? = fields[n];
        }
        p.validate().map_err(invalid)?;
        Some(p)
    } else {
        None
    };
    let du = if has_any(DuDelayProfile::FIELDS) {
        require_all(&fields, DuDelayProfile::FIELDS)?;
        let mut p = du_preset(PresetName::TddScs30);
        for n in DuDelayProfile::FIELDS {
            *p.field_mut(n).map_err(invalid)? = fields[n];
        }
        p.validate().map_err(invalid)?;
        Some(p)
    } else {
        None
    };
    if ru.is_none() && du.is_none() {
        return Err(invalid("profile file sets no fields"));
    }
    Ok((ru, du))
}

#[cfg(test)]
mod tests {
    use super::*;

    const DDDSU: &str = include_str!("../../../scenarios/tdd_dddsu.scenario");
    const D7S1U2: &str = include_str!("../../../scenarios/tdd_7d1s2u.scenario");
    const FDD: &str = include_str!("../../../scenarios/fdd.scenario");

    fn edited(base: &str, from: &str, to: &str) -> ScenarioConfig {
        assert!(base.contains(from), "{from}");
        ScenarioConfig::from_toml(&base.replacen(from, to, 1)).unwrap()
    }

    #[test]
    fn bundled_scenarios_build() {
        for text in [DDDSU, D7S1U2, FDD] {
            let s = ScenarioConfig::from_toml(text).unwrap().build(None).unwrap();
            assert!(s.sim.validate().is_ok());
        }
    }

    #[test]
    fn toml_round_trips() {
        let c = ScenarioConfig::from_toml(D7S1U2).unwrap();
        assert_eq!(ScenarioConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn seed_override_wins() {
        let c = ScenarioConfig::from_toml(DDDSU).unwrap();
        assert_eq!(c.build(None).unwrap().sim.seed, 1);
        assert_eq!(c.build(Some(9)).unwrap().sim.seed, 9);
    }

    #[test]
    fn derived_du_profile_follows_fronthaul() {
        let s = ScenarioConfig::from_toml(D7S1U2).unwrap().build(None).unwrap();
        let ru = ru_preset(PresetName::TddScs30);
        assert_eq!(s.sim.du.profile.t1a_max_cp_dl, ru.t2a_max_cp_dl + 20);
        assert_eq!(s.sim.du.profile.t1a_min_up, ru.t2a_min_up + 60);
        assert!(s.findings.iter().all(|f| !f.is_warning()));
    }

    #[test]
    fn table_pair_reports_two_warnings() {
        let s = ScenarioConfig::from_toml(DDDSU).unwrap().build(None).unwrap();
        let mut w: Vec<_> = s.findings.iter().filter(|f| f.is_warning()).map(|f| (f.field, f.excess_us)).collect();
        w.sort();
        assert_eq!(w, [("t1a_max_cp_ul", 35), ("t1a_max_up", 6)]);
    }

    #[test]
    fn field_override_applies() {
        let c = edited(DDDSU, "[ru_profile]\n", "[ru_profile]\nt2a_min_up = 2100\n");
        assert_eq!(c.ru_delay_profile().unwrap().t2a_min_up, 2100);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            edited(DDDSU, "scs_khz = 30", "scs_khz = 45"),
            edited(DDDSU, "n_frames = 100", "n_frames = 0"),
            edited(DDDSU, "pattern = \"DDDSU\"", "pattern = \"DXDSU\""),
            edited(DDDSU, "width = 9", "width = 17"),
            edited(DDDSU, "preset = \"tdd_scs30\"", "preset = \"tdd_scs60\""),
            edited(DDDSU, "index = 159", "index = 159\nfreq_offset = -611"),
            edited(DDDSU, "[ru_profile]\npreset = \"tdd_scs30\"", "[ru_profile]\nt2a_max_up = 2400"),
            edited(DDDSU, "jitter = \"none\"", "jitter = \"sequence\"\ndl_sequence = [5]\nul_sequence = [0]"),
            edited(DDDSU, "[du_profile]\npreset = \"tdd_scs30\"", "[du_profile]\npreset = \"tdd_scs30\"\nderive = true"),
        ];
        for c in bad {
            assert!(matches!(c.build(None), Err(ScenarioError::Invalid(_))), "{c:?}");
        }
        assert!(matches!(ScenarioConfig::from_toml("n_frames = 1\nbogus = 2\n"), Err(ScenarioError::Parse(_))));
    }

    #[test]
    fn profile_file_sides() {
        let ru_text: String = RuDelayProfile::FIELDS
            .iter()
            .zip(ru_preset(PresetName::FddScs15).values())
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        let (ru, du) = parse_profile_file(&ru_text).unwrap();
        assert_eq!(ru, Some(ru_preset(PresetName::FddScs15)));
        assert_eq!(du, None);
        assert!(parse_profile_file("ta3_max = 1\n").is_err());
        assert!(parse_profile_file("t9_max = 1\n").is_err());
        assert!(parse_profile_file("").is_err());
    }
}
