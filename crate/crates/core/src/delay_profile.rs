//! RU and DU delay profiles and timing-window classification.
//!
//! Every bound is an integer number of microseconds relative to the OTA
//! start of the slot the packet refers to. Reception windows for the RU and
//! transmit windows for the DU lie before OTA; the uplink windows lie after.
//! Both ends of every window are inclusive.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DelayProfileError {
    #[error("unknown delay-profile preset `{0}` (expected tdd_scs30 or fdd_scs15)")]
    UnknownPreset(String),
    #[error("unknown profile side `{0}` (expected ru or du)")]
    UnknownSide(String),
    #[error("window {max_field} = {max} us is below {min_field} = {min} us")]
    InvertedWindow { max_field: &'static str, max: u32, min_field: &'static str, min: u32 },
    #[error("derived window collapsed: {max_field} = {max} us < {min_field} = {min} us")]
    WindowCollapse { max_field: &'static str, max: u32, min_field: &'static str, min: u32 },
    #[error("invalid profile template: {0}")]
    InvalidTemplate(&'static str),
    #[error("window {0:?} is not part of this profile")]
    KindNotInProfile(WindowKind),
    #[error("unknown profile field `{0}`")]
    UnknownField(String),
}

/// RU-side windows (T2a for reception, Ta3 for uplink transmission).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuDelayProfile {
    pub t2a_max_cp_dl: u32,
    pub t2a_min_cp_dl: u32,
    pub t2a_max_cp_ul: u32,
    pub t2a_min_cp_ul: u32,
    pub t2a_max_up: u32,
    pub t2a_min_up: u32,
    pub ta3_max: u32,
    pub ta3_min: u32,
}

/// DU-side windows (T1a for transmission, Ta4 for uplink reception).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuDelayProfile {
    pub t1a_max_cp_dl: u32,
    pub t1a_min_cp_dl: u32,
    pub t1a_max_cp_ul: u32,
    pub t1a_min_cp_ul: u32,
    pub t1a_max_up: u32,
    pub t1a_min_up: u32,
    pub ta4_max: u32,
    pub ta4_min: u32,
}

/// One-way fronthaul delay bounds, downlink (T12) and uplink (T34).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FronthaulDelay {
    pub t12_min: u32,
    pub t12_max: u32,
    pub t34_min: u32,
    pub t34_max: u32,
}

impl FronthaulDelay {
    pub fn new(t12_min: u32, t12_max: u32, t34_min: u32, t34_max: u32) -> Result<Self, DelayProfileError> {
        let fh = Self { t12_min, t12_max, t34_min, t34_max };
        fh.validate()?;
        Ok(fh)
    }

    pub fn validate(&self) -> Result<(), DelayProfileError> {
        check_pair("t12_max", self.t12_max, "t12_min", self.t12_min)?;
        check_pair("t34_max", self.t34_max, "t34_min", self.t34_min)
    }
}

fn check_pair(max_field: &'static str, max: u32, min_field: &'static str, min: u32) -> Result<(), DelayProfileError> {
    if max < min {
        Err(DelayProfileError::InvertedWindow { max_field, max, min_field, min })
    } else {
        Ok(())
    }
}

impl RuDelayProfile {
    pub const FIELDS: [&'static str; 8] = [
        "t2a_max_cp_dl",
        "t2a_min_cp_dl",
        "t2a_max_cp_ul",
        "t2a_min_cp_ul",
        "t2a_max_up",
        "t2a_min_up",
        "ta3_max",
        "ta3_min",
    ];

    pub fn validate(&self) -> Result<(), DelayProfileError> {
        check_pair("t2a_max_cp_dl", self.t2a_max_cp_dl, "t2a_min_cp_dl", self.t2a_min_cp_dl)?;
        check_pair("t2a_max_cp_ul", self.t2a_max_cp_ul, "t2a_min_cp_ul", self.t2a_min_cp_ul)?;
        check_pair("t2a_max_up", self.t2a_max_up, "t2a_min_up", self.t2a_min_up)?;
        check_pair("ta3_max", self.ta3_max, "ta3_min", self.ta3_min)
    }

    pub fn values(&self) -> [u32; 8] {
        [
            self.t2a_max_cp_dl,
            self.t2a_min_cp_dl,
            self.t2a_max_cp_ul,
            self.t2a_min_cp_ul,
            self.t2a_max_up,
            self.t2a_min_up,
            self.ta3_max,
            self.ta3_min,
        ]
    }

    pub fn field_mut(&mut self, name: &str) -> Result<&mut u32, DelayProfileError> {
        Ok(match name {
            "t2a_max_cp_dl" => &mut self.t2a_max_cp_dl,
            "t2a_min_cp_dl" => &mut self.t2a_min_cp_dl,
            "t2a_max_cp_ul" => &mut self.t2a_max_cp_ul,
            "t2a_min_cp_ul" => &mut self.t2a_min_cp_ul,
            "t2a_max_up" => &mut self.t2a_max_up,
            "t2a_min_up" => &mut self.t2a_min_up,
            "ta3_max" => &mut self.ta3_max,
            "ta3_min" => &mut self.ta3_min,
            other => return Err(DelayProfileError::UnknownField(other.to_string())),
        })
    }

    /// Midpoint of the Ta3 window, the default uplink transmit point.
    pub fn ta3_midpoint(&self) -> u32 {
        self.ta3_min + (self.ta3_max - self.ta3_min) / 2
    }
}

impl DuDelayProfile {
    pub const FIELDS: [&'static str; 8] = [
        "t1a_max_cp_dl",
        "t1a_min_cp_dl",
        "t1a_max_cp_ul",
        "t1a_min_cp_ul",
        "t1a_max_up",
        "t1a_min_up",
        "ta4_max",
        "ta4_min",
    ];

    pub fn validate(&self) -> Result<(), DelayProfileError> {
        check_pair("t1a_max_cp_dl", self.t1a_max_cp_dl, "t1a_min_cp_dl", self.t1a_min_cp_dl)?;
        check_pair("t1a_max_cp_ul", self.t1a_max_cp_ul, "t1a_min_cp_ul", self.t1a_min_cp_ul)?;
        check_pair("t1a_max_up", self.t1a_max_up, "t1a_min_up", self.t1a_min_up)?;
        check_pair("ta4_max", self.ta4_max, "ta4_min", self.ta4_min)
    }

    pub fn values(&self) -> [u32; 8] {
        [
            self.t1a_max_cp_dl,
            self.t1a_min_cp_dl,
            self.t1a_max_cp_ul,
            self.t1a_min_cp_ul,
            self.t1a_max_up,
            self.t1a_min_up,
            self.ta4_max,
            self.ta4_min,
        ]
    }

    pub fn field_mut(&mut self, name: &str) -> Result<&mut u32, DelayProfileError> {
        Ok(match name {
            "t1a_max_cp_dl" => &mut self.t1a_max_cp_dl,
            "t1a_min_cp_dl" => &mut self.t1a_min_cp_dl,
            "t1a_max_cp_ul" => &mut self.t1a_max_cp_ul,
            "t1a_min_cp_ul" => &mut self.t1a_min_cp_ul,
            "t1a_max_up" => &mut self.t1a_max_up,
            "t1a_min_up" => &mut self.t1a_min_up,
            "ta4_max" => &mut self.ta4_max,
            "ta4_min" => &mut self.ta4_min,
            other => return Err(DelayProfileError::UnknownField(other.to_string())),
        })
    }
}

/// Published delay-profile presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PresetName {
    /// TDD, 30 kHz SCS.
    TddScs30,
    /// FDD, 15 kHz SCS.
    FddScs15,
}

impl PresetName {
    pub fn as_str(&self) -> &'static str {
        match self {
            PresetName::TddScs30 => "tdd_scs30",
            PresetName::FddScs15 => "fdd_scs15",
        }
    }
}

impl FromStr for PresetName {
    type Err = DelayProfileError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tdd_scs30" => Ok(PresetName::TddScs30),
            "fdd_scs15" => Ok(PresetName::FddScs15),
            other => Err(DelayProfileError::UnknownPreset(other.to_string())),
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Ru,
    Du,
}

impl FromStr for Side {
    type Err = DelayProfileError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ru" => Ok(Side::Ru),
            "du" => Ok(Side::Du),
            other => Err(DelayProfileError::UnknownSide(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Ru(RuDelayProfile),
    Du(DuDelayProfile),
}

impl Profile {
    /// (field name, value) pairs in table order.
    pub fn rows(&self) -> Vec<(&'static str, u32)> {
        match self {
            Profile::Ru(p) => RuDelayProfile::FIELDS.iter().copied().zip(p.values()).collect(),
            Profile::Du(p) => DuDelayProfile::FIELDS.iter().copied().zip(p.values()).collect(),
        }
    }
}

pub fn ru_preset(name: PresetName) -> RuDelayProfile {
    match name {
        PresetName::TddScs30 => RuDelayProfile {
            t2a_max_cp_dl: 2635,
            t2a_min_cp_dl: 2221,
            t2a_max_cp_ul: 2635,
            t2a_min_cp_ul: 2221,
            t2a_max_up: 2454,
            t2a_min_up: 2015,
            ta3_max: 1280,
            ta3_min: 925,
        },
        PresetName::FddScs15 => RuDelayProfile {
            t2a_max_cp_dl: 4135,
            t2a_min_cp_dl: 3721,
            t2a_max_cp_ul: 4135,
            t2a_min_cp_ul: 3721,
            t2a_max_up: 3954,
            t2a_min_up: 3515,
            ta3_max: 1480,
            ta3_min: 1125,
        },
    }
}

pub fn du_preset(name: PresetName) -> DuDelayProfile {
    match name {
        PresetName::TddScs30 => DuDelayProfile {
            t1a_max_cp_dl: 2635,
            t1a_min_cp_dl: 2335,
            t1a_max_cp_ul: 2670,
            t1a_min_cp_ul: 2386,
            t1a_max_up: 2460,
            t1a_min_up: 2180,
            ta4_max: 1325,
            ta4_min: 925,
        },
        PresetName::FddScs15 => DuDelayProfile {
            t1a_max_cp_dl: 4135,
            t1a_min_cp_dl: 3886,
            t1a_max_cp_ul: 4135,
            t1a_min_cp_ul: 3886,
            t1a_max_up: 3990,
            t1a_min_up: 3680,
            ta4_max: 1500,
            ta4_min: 1125,
        },
    }
}

/// Looks up a preset by name and side.
pub fn preset(name: &str, side: Side) -> Result<Profile, DelayProfileError> {
    let name: PresetName = name.parse()?;
    Ok(match side {
        Side::Ru => Profile::Ru(ru_preset(name)),
        Side::Du => Profile::Du(du_preset(name)),
    })
}

/// Parameters of the slot-count template for an RU profile.
///
/// The U-plane window spans from `lowphy_lead + ofh_proc_min` to
/// `lowphy_lead + ofh_proc_max` slots before OTA. The C-plane windows are
/// the U-plane window shifted earlier by `cp_advance_us`. The Ta3 window
/// runs from `ulproc_min` slots to `ulproc_max` slots plus
/// `ul_margin_us` after OTA.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuProfileTemplate {
    pub lowphy_lead_slots: u32,
    pub ofh_proc_slots_max: u32,
    pub ofh_proc_slots_min: u32,
    pub ulproc_slots_max: u32,
    pub ulproc_slots_min: u32,
    pub slot_us: u32,
    pub cp_advance_us: u32,
    pub ul_margin_us: u32,
}

impl RuProfileTemplate {
    /// Template with the default margins: C-plane advance of a quarter slot
    /// and an uplink margin of half a slot.
    pub fn new(
        lowphy_lead_slots: u32,
        ofh_proc_slots_max: u32,
        ofh_proc_slots_min: u32,
        ulproc_slots_max: u32,
        ulproc_slots_min: u32,
        slot_us: u32,
    ) -> Self {
        Self {
            lowphy_lead_slots,
            ofh_proc_slots_max,
            ofh_proc_slots_min,
            ulproc_slots_max,
            ulproc_slots_min,
            slot_us,
            cp_advance_us: slot_us / 4,
            ul_margin_us: slot_us / 2,
        }
    }
}

pub fn derive_ru_profile(t: &RuProfileTemplate) -> Result<RuDelayProfile, DelayProfileError> {
    if t.slot_us == 0 {
        return Err(DelayProfileError::InvalidTemplate("slot duration must be positive"));
    }
    if t.lowphy_lead_slots == 0
        || t.ofh_proc_slots_max == 0
        || t.ofh_proc_slots_min == 0
        || t.ulproc_slots_max == 0
        || t.ulproc_slots_min == 0
    {
        return Err(DelayProfileError::InvalidTemplate("slot counts must be positive"));
    }
    if t.ofh_proc_slots_min > t.ofh_proc_slots_max || t.ulproc_slots_min > t.ulproc_slots_max {
        return Err(DelayProfileError::InvalidTemplate("minimum slot count exceeds maximum"));
    }
    let t2a_max_up = (t.lowphy_lead_slots + t.ofh_proc_slots_max) * t.slot_us;
    let t2a_min_up = (t.lowphy_lead_slots + t.ofh_proc_slots_min) * t.slot_us;
    let profile = RuDelayProfile {
        t2a_max_cp_dl: t2a_max_up + t.cp_advance_us,
        t2a_min_cp_dl: t2a_min_up + t.cp_advance_us,
        t2a_max_cp_ul: t2a_max_up + t.cp_advance_us,
        t2a_min_cp_ul: t2a_min_up + t.cp_advance_us,
        t2a_max_up,
        t2a_min_up,
        ta3_max: t.ulproc_slots_max * t.slot_us + t.ul_margin_us,
        ta3_min: t.ulproc_slots_min * t.slot_us,
    };
    profile.validate()?;
    Ok(profile)
}

/// Shifts RU windows by the fronthaul delay to get the DU windows.
///
/// The DU must send early enough for the slowest transport and late enough
/// for the fastest, so transmit windows shrink by the T12 jitter. Uplink
/// reception windows widen by the T34 jitter.
pub fn derive_du_profile(ru: &RuDelayProfile, fh: &FronthaulDelay) -> Result<DuDelayProfile, DelayProfileError> {
    ru.validate()?;
    fh.validate()?;
    let du = DuDelayProfile {
        t1a_max_cp_dl: ru.t2a_max_cp_dl + fh.t12_min,
        t1a_min_cp_dl: ru.t2a_min_cp_dl + fh.t12_max,
        t1a_max_cp_ul: ru.t2a_max_cp_ul + fh.t12_min,
        t1a_min_cp_ul: ru.t2a_min_cp_ul + fh.t12_max,
        t1a_max_up: ru.t2a_max_up + fh.t12_min,
        t1a_min_up: ru.t2a_min_up + fh.t12_max,
        ta4_max: ru.ta3_max + fh.t34_max,
        ta4_min: ru.ta3_min + fh.t34_min,
    };
    let pairs = [
        ("t1a_max_cp_dl", du.t1a_max_cp_dl, "t1a_min_cp_dl", du.t1a_min_cp_dl),
        ("t1a_max_cp_ul", du.t1a_max_cp_ul, "t1a_min_cp_ul", du.t1a_min_cp_ul),
        ("t1a_max_up", du.t1a_max_up, "t1a_min_up", du.t1a_min_up),
        ("ta4_max", du.ta4_max, "ta4_min", du.ta4_min),
    ];
    for (max_field, max, min_field, min) in pairs {
        if max < min {
            return Err(DelayProfileError::WindowCollapse { max_field, max, min_field, min });
        }
    }
    Ok(du)
}

/// Which window a packet or emission is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WindowKind {
    CPlaneDl,
    CPlaneUl,
    UPlaneDl,
    /// RU uplink transmission (Ta3).
    UPlaneUlTx,
    /// DU uplink reception (Ta4).
    UPlaneUlRx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WindowVerdict {
    Early,
    OnTime,
    Late,
}

/// Where a window lies relative to OTA.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowReference {
    /// `[ota - max, ota - min]`
    BeforeOta,
    /// `[ota + min, ota + max]`
    AfterOta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowBounds {
    pub min_us: u32,
    pub max_us: u32,
    pub reference: WindowReference,
}

impl WindowBounds {
    /// Absolute `[start, end]` of the window for a slot with the given OTA time.
    pub fn interval(&self, ota_us: i64) -> (i64, i64) {
        match self.reference {
            WindowReference::BeforeOta => (ota_us - self.max_us as i64, ota_us - self.min_us as i64),
            WindowReference::AfterOta => (ota_us + self.min_us as i64, ota_us + self.max_us as i64),
        }
    }

    pub fn classify(&self, event_us: i64, ota_us: i64) -> WindowVerdict {
        let (start, end) = self.interval(ota_us);
        if event_us < start {
            WindowVerdict::Early
        } else if event_us > end {
            WindowVerdict::Late
        } else {
            WindowVerdict::OnTime
        }
    }
}

/// A profile that can answer window-bound queries.
pub trait WindowProfile {
    fn bounds(&self, kind: WindowKind) -> Option<WindowBounds>;
}

impl WindowProfile for RuDelayProfile {
    fn bounds(&self, kind: WindowKind) -> Option<WindowBounds> {
        use WindowReference::*;
        let (min_us, max_us, reference) = match kind {
            WindowKind::CPlaneDl => (self.t2a_min_cp_dl, self.t2a_max_cp_dl, BeforeOta),
            WindowKind::CPlaneUl => (self.t2a_min_cp_ul, self.t2a_max_cp_ul, BeforeOta),
            WindowKind::UPlaneDl => (self.t2a_min_up, self.t2a_max_up, BeforeOta),
            WindowKind::UPlaneUlTx => (self.ta3_min, self.ta3_max, AfterOta),
            WindowKind::UPlaneUlRx => return None,
        };
        Some(WindowBounds { min_us, max_us, reference })
    }
}

/// For the DU the plane kinds name its transmit windows.
impl WindowProfile for DuDelayProfile {
    fn bounds(&self, kind: WindowKind) -> Option<WindowBounds> {
        use WindowReference::*;
        let (min_us, max_us, reference) = match kind {
            WindowKind::CPlaneDl => (self.t1a_min_cp_dl, self.t1a_max_cp_dl, BeforeOta),
            WindowKind::CPlaneUl => (self.t1a_min_cp_ul, self.t1a_max_cp_ul, BeforeOta),
            WindowKind::UPlaneDl => (self.t1a_min_up, self.t1a_max_up, BeforeOta),
            WindowKind::UPlaneUlRx => (self.ta4_min, self.ta4_max, AfterOta),
            WindowKind::UPlaneUlTx => return None,
        };
        Some(WindowBounds { min_us, max_us, reference })
    }
}

/// Classifies an event time against the window of `kind` for a slot whose
/// OTA time is `ota_us`.
pub fn check_window<P: WindowProfile + ?Sized>(
    kind: WindowKind,
    event_us: i64,
    ota_us: i64,
    profile: &P,
) -> Result<WindowVerdict, DelayProfileError> {
    let bounds = profile.bounds(kind).ok_or(DelayProfileError::KindNotInProfile(kind))?;
    Ok(bounds.classify(event_us, ota_us))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FindingStatus {
    Ok,
    Warning(String),
}

/// Result of one bound comparison in [`validate_pair`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub field: &'static str,
    /// How far the configured bound exceeds the strict shift relation, in us.
    pub excess_us: u32,
    pub status: FindingStatus,
}

impl Finding {
    pub fn is_warning(&self) -> bool {
        matches!(self.status, FindingStatus::Warning(_))
    }
}

/// Audits a DU profile against the RU profile it feeds.
///
/// A T1a max above `t2a_max + t12_min` means a packet sent at the DU's
/// earliest instant over the fastest path lands before the RU window opens;
/// a T1a min below `t2a_min + t12_max` means one sent at the latest instant
/// over the slowest path lands after it closes. For Ta4 the DU window must
/// cover every arrival the RU can cause: `ta4_max >= ta3_max + t34_max` and
/// `ta4_min <= ta3_min + t34_min`.
pub fn validate_pair(ru: &RuDelayProfile, du: &DuDelayProfile, fh: &FronthaulDelay) -> Vec<Finding> {
    let early = |field, du_max: u32, ru_max: u32| {
        let limit = ru_max + fh.t12_min;
        finding(field, du_max.saturating_sub(limit), || {
            format!("{field} = {du_max} us exceeds RU max + t12_min = {limit} us")
        })
    };
    let late = |field, du_min: u32, ru_min: u32| {
        let limit = ru_min + fh.t12_max;
        finding(field, limit.saturating_sub(du_min), || {
            format!("{field} = {du_min} us is below RU min + t12_max = {limit} us")
        })
    };
    let ta4_upper = ru.ta3_max + fh.t34_max;
    let ta4_lower = ru.ta3_min + fh.t34_min;
    vec![
        early("t1a_max_cp_dl", du.t1a_max_cp_dl, ru.t2a_max_cp_dl),
        late("t1a_min_cp_dl", du.t1a_min_cp_dl, ru.t2a_min_cp_dl),
        early("t1a_max_cp_ul", du.t1a_max_cp_ul, ru.t2a_max_cp_ul),
        late("t1a_min_cp_ul", du.t1a_min_cp_ul, ru.t2a_min_cp_ul),
        early("t1a_max_up", du.t1a_max_up, ru.t2a_max_up),
        late("t1a_min_up", du.t1a_min_up, ru.t2a_min_up),
        finding("ta4_max", ta4_upper.saturating_sub(du.ta4_max), || {
            format!("ta4_max = {} us is below ta3_max + t34_max = {ta4_upper} us", du.ta4_max)
        }),
        finding("ta4_min", du.ta4_min.saturating_sub(ta4_lower), || {
            format!("ta4_min = {} us exceeds ta3_min + t34_min = {ta4_lower} us", du.ta4_min)
        }),
    ]
}

fn finding(field: &'static str, excess_us: u32, detail: impl FnOnce() -> String) -> Finding {
    let status = if excess_us > 0 { FindingStatus::Warning(detail()) } else { FindingStatus::Ok };
    Finding { field, excess_us, status }
}
