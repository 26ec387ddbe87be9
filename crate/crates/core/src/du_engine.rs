//! Distributed unit: per-slot C/U-plane emission inside the T1a windows,
//! Ta4-checked uplink reception, and ownership of the duplex pattern.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::delay_profile::{check_window, DuDelayProfile, WindowKind, WindowVerdict};
use crate::iq_compress::{compress, decompress, to_float, CompParams, RES_PER_PRB};
use crate::low_phy::{Complex64, ResourceGrid};
use crate::ofh_codec::{
    AppHeader, CPlaneMessage, CSection, CodecConfig, DataDirection, EaxcId, OfhCodec, OfhMessage, Plane,
    SectionType, SequenceTracker, SequenceVerdict, Type3Params, UPlaneMessage, USection, FILTER_INDEX_PRACH_SHORT,
};
use crate::ru_engine::{grid_block, RuStream};
use crate::timing::{NumerologyConfig, SlotClock, SlotPoint, NOF_SYMBOLS_PER_SLOT};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DuError {
    #[error("invalid DU configuration: {0}")]
    Config(String),
    #[error("invalid TDD pattern {0:?}")]
    Pattern(String),
    #[error("slot {slot} is {expected} but was given {given}")]
    DirectionMismatch { slot: SlotPoint, expected: &'static str, given: &'static str },
    #[error("slot {slot} must be scheduled at {expected_us} us, not {now_us} us")]
    ScheduleTime { slot: SlotPoint, expected_us: i64, now_us: i64 },
    #[error("{kind:?} emission at {at_us} us falls outside its window")]
    OutsideWindow { kind: WindowKind, at_us: i64 },
    #[error("unsupported PRACH configuration index {0}")]
    PrachIndex(u16),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotKind {
    Downlink,
    Special,
    Uplink,
}

/// Per-slot D/S/U sequence repeated from slot 0 of the run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TddPattern {
    kinds: Vec<SlotKind>,
}

impl TddPattern {
    pub fn new(kinds: Vec<SlotKind>) -> Result<Self, DuError> {
        if kinds.is_empty() {
            return Err(DuError::Pattern(String::new()));
        }
        Ok(Self { kinds })
    }

    pub fn dddsu() -> Self {
        "DDDSU".parse().unwrap()
    }

    pub fn d7s1u2() -> Self {
        "DDDDDDDSUU".parse().unwrap()
    }

    pub fn period_slots(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, abs: i64) -> SlotKind {
        self.kinds[abs.rem_euclid(self.kinds.len() as i64) as usize]
    }
}

impl FromStr for TddPattern {
    type Err = DuError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let kinds = s
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'D' => Ok(SlotKind::Downlink),
                'S' => Ok(SlotKind::Special),
                'U' => Ok(SlotKind::Uplink),
                _ => Err(DuError::Pattern(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(kinds).map_err(|_| DuError::Pattern(s.to_string()))
    }
}

impl fmt::Display for TddPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in &self.kinds {
            f.write_str(match k {
                SlotKind::Downlink => "D",
                SlotKind::Special => "S",
                SlotKind::Uplink => "U",
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Duplex {
    Tdd(TddPattern),
    Fdd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrachFormat {
    B4,
}

/// PRACH occasions and placement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrachConfig {
    pub index: u16,
    pub format: PrachFormat,
    pub subframes: Vec<u8>,
    /// Slot within the subframe hosting the occasion (30 kHz carriers).
    pub slot_in_subframe: u8,
    pub start_symbol: u8,
    pub num_symbols: u8,
    pub freq_offset_halfscs: i32,
    pub start_prb: u16,
    pub num_prb: u8,
}

impl PrachConfig {
    /// Occasion table for the supported configuration indices.
    pub fn from_index(index: u16, freq_offset_halfscs: i32) -> Result<Self, DuError> {
        let (subframes, slot_in_subframe) = match index {
            159 => (vec![9], 1),
            213 => (vec![4, 9], 0),
            other => return Err(DuError::PrachIndex(other)),
        };
        Ok(Self {
            index,
            format: PrachFormat::B4,
            subframes,
            slot_in_subframe,
            start_symbol: 0,
            num_symbols: 12,
            freq_offset_halfscs,
            start_prb: 0,
            num_prb: 12,
        })
    }

    pub fn is_occasion(&self, slot: SlotPoint) -> bool {
        let slot_ok = slot.mu() == 0 || slot.slot() == self.slot_in_subframe;
        slot_ok && self.subframes.contains(&slot.subframe())
    }
}

/// Default PRACH offset: the 139-bin band starts at carrier subcarrier 0.
pub fn default_prach_offset(nof_prb: u16) -> i32 {
    -(nof_prb as i32 * RES_PER_PRB as i32)
}

#[derive(Debug, Clone)]
pub struct DuSchedulerConfig {
    pub numerology: NumerologyConfig,
    pub profile: DuDelayProfile,
    pub clock: SlotClock,
    pub duplex: Duplex,
    pub scheduling_offset_slots: u32,
    pub tcp_adv_dl_us: u32,
    pub t1a_cp_dl_point_us: u32,
    pub t1a_up_point_us: u32,
    pub t1a_cp_ul_point_us: u32,
    pub comp: CompParams,
    pub eaxcs: Vec<EaxcId>,
    pub prach: Option<PrachConfig>,
    pub codec: CodecConfig,
}

impl DuSchedulerConfig {
    pub fn new(numerology: NumerologyConfig, profile: DuDelayProfile, clock: SlotClock, duplex: Duplex, nof_ports: usize) -> Self {
        let mid = |a: u32, b: u32| (a + b) / 2;
        let lambda = if matches!(duplex, Duplex::Tdd(_)) { 10 } else { 5 };
        Self {
            codec: CodecConfig::new(numerology.mu(), numerology.nof_prb()),
            scheduling_offset_slots: lambda,
            tcp_adv_dl_us: 125,
            t1a_cp_dl_point_us: mid(profile.t1a_min_cp_dl, profile.t1a_max_cp_dl),
            t1a_up_point_us: mid(profile.t1a_min_up, profile.t1a_max_up),
            t1a_cp_ul_point_us: mid(profile.t1a_min_cp_ul, profile.t1a_max_cp_ul),
            comp: CompParams::bfp(9).expect("width 9"),
            eaxcs: (0..nof_ports as u8).map(EaxcId::ru_port).collect(),
            prach: None,
            numerology,
            profile,
            clock,
            duplex,
        }
    }

    pub fn validate(&self) -> Result<(), DuError> {
        let p = &self.profile;
        p.validate().map_err(|e| DuError::Config(e.to_string()))?;
        let lead = self.scheduling_offset_slots as i64 * self.numerology.slot_us();
        let deepest = p.t1a_max_cp_dl.max(p.t1a_max_cp_ul).max(p.t1a_max_up) as i64;
        if lead < deepest {
            return Err(DuError::Config(format!(
                "scheduling offset {} slots ({lead} us) is shorter than the {deepest} us T1a window",
                self.scheduling_offset_slots
            )));
        }
        for (name, point, lo, hi) in [
            ("t1a_cp_dl", self.t1a_cp_dl_point_us, p.t1a_min_cp_dl, p.t1a_max_cp_dl),
            ("t1a_up", self.t1a_up_point_us, p.t1a_min_up, p.t1a_max_up),
            ("t1a_cp_ul", self.t1a_cp_ul_point_us, p.t1a_min_cp_ul, p.t1a_max_cp_ul),
        ] {
            if point < lo || point > hi {
                return Err(DuError::Config(format!("{name} emission point {point} us outside [{lo}, {hi}]")));
            }
        }
        if self.t1a_cp_dl_point_us < self.t1a_up_point_us + self.tcp_adv_dl_us {
            return Err(DuError::Config(format!(
                "C-plane point {} us does not lead U-plane point {} us by {} us",
                self.t1a_cp_dl_point_us, self.t1a_up_point_us, self.tcp_adv_dl_us
            )));
        }
        if self.eaxcs.is_empty() {
            return Err(DuError::Config("no eAxC configured".into()));
        }
        for e in &self.eaxcs {
            e.pack(&self.codec.layout).map_err(|e| DuError::Config(e.to_string()))?;
        }
        if let Some(prach) = &self.prach {
            let n = self.numerology.fft_size() as i64;
            let first = (prach.freq_offset_halfscs / 2) as i64;
            if first < -n / 2 || first + crate::low_phy::PRACH_SHORT_LRA as i64 > n / 2 {
                return Err(DuError::Config(format!("PRACH offset {} outside the FFT", prach.freq_offset_halfscs)));
            }
            let span = self.numerology.slots_per_subframe() as i64 * 10 * self.period() as i64;
            for abs in 0..span {
                let plan = self.plan(abs);
                if plan.prach && !plan.ul {
                    return Err(DuError::Config(format!(
                        "PRACH occasion in slot {} which is not uplink",
                        self.clock.slot_point(abs)
                    )));
                }
            }
        }
        Ok(())
    }

    fn period(&self) -> usize {
        match &self.duplex {
            Duplex::Tdd(p) => p.period_slots(),
            Duplex::Fdd => 1,
        }
    }

    /// Directions scheduled for a slot.
    pub fn plan(&self, abs: i64) -> SlotPlan {
        let (dl, ul) = match &self.duplex {
            Duplex::Fdd => (true, true),
            Duplex::Tdd(p) => match p.kind(abs) {
                SlotKind::Downlink | SlotKind::Special => (true, false),
                SlotKind::Uplink => (false, true),
            },
        };
        let slot = self.clock.slot_point(abs);
        let prach = self.prach.as_ref().is_some_and(|p| p.is_occasion(slot));
        SlotPlan { abs, slot, dl, ul, prach }
    }

    /// PRBs granted to PUSCH in a slot; PRACH slots leave the PRACH band free.
    pub fn ul_grant(&self, abs: i64) -> (u16, u16) {
        let nof_prb = self.numerology.nof_prb();
        match &self.prach {
            Some(p) if p.is_occasion(self.clock.slot_point(abs)) => {
                let nsc = nof_prb as i64 * RES_PER_PRB as i64;
                let lo = ((p.freq_offset_halfscs / 2) as i64 + nsc / 2).clamp(0, nsc);
                let hi = (lo + crate::low_phy::PRACH_SHORT_LRA as i64).clamp(0, nsc);
                let lo_prb = (lo / RES_PER_PRB as i64) as u16;
                let hi_prb = (hi as usize).div_ceil(RES_PER_PRB) as u16;
                if nof_prb - hi_prb >= lo_prb {
                    (hi_prb, nof_prb - hi_prb)
                } else {
                    (0, lo_prb)
                }
            }
            _ => (0, nof_prb),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotPlan {
    pub abs: i64,
    pub slot: SlotPoint,
    pub dl: bool,
    pub ul: bool,
    pub prach: bool,
}

/// A frame the DU hands to the fronthaul.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emission {
    pub at_us: i64,
    pub abs: i64,
    pub stream: RuStream,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LambdaStats {
    pub count: u64,
    pub min_us: i64,
    pub max_us: i64,
    pub sum_us: i64,
}

impl LambdaStats {
    fn record(&mut self, v: i64) {
        if self.count == 0 {
            self.min_us = v;
            self.max_us = v;
        } else {
            self.min_us = self.min_us.min(v);
            self.max_us = self.max_us.max(v);
        }
        self.count += 1;
        self.sum_us += v;
    }

    pub fn mean_us(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum_us as f64 / self.count as f64
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DuCounters {
    pub ul_on_time: u64,
    pub ul_early: u64,
    pub ul_late: u64,
    pub ul_decode_errors: u64,
    pub ul_seq_gaps: u64,
    pub ul_duplicates: u64,
    pub dl_slots_scheduled: u64,
    pub ul_slots_scheduled: u64,
    pub prach_slots_scheduled: u64,
    pub sent_cplane_dl: u64,
    pub sent_cplane_ul: u64,
    pub sent_cplane_prach: u64,
    pub sent_uplane_dl: u64,
    pub lambda: LambdaStats,
}

impl DuCounters {
    pub fn sent(&self, s: RuStream) -> u64 {
        match s {
            RuStream::CPlaneDl => self.sent_cplane_dl,
            RuStream::CPlaneUl => self.sent_cplane_ul,
            RuStream::CPlanePrach => self.sent_cplane_prach,
            RuStream::UPlaneDl => self.sent_uplane_dl,
        }
    }

    pub fn sent_total(&self) -> u64 {
        RuStream::ALL.iter().map(|&s| self.sent(s)).sum()
    }

    pub fn rows(&self) -> Vec<(&'static str, &'static str, String)> {
        let mut rows: Vec<(&'static str, &'static str, String)> = RuStream::ALL
            .iter()
            .map(|&s| (s.name(), "sent", self.sent(s).to_string()))
            .collect();
        rows.extend([
            ("uplane_ul", "on_time", self.ul_on_time.to_string()),
            ("uplane_ul", "early", self.ul_early.to_string()),
            ("uplane_ul", "late", self.ul_late.to_string()),
            ("uplane_ul", "decode_error", self.ul_decode_errors.to_string()),
            ("uplane_ul", "seq_gaps", self.ul_seq_gaps.to_string()),
            ("uplane_ul", "duplicates", self.ul_duplicates.to_string()),
            ("dl", "slots_scheduled", self.dl_slots_scheduled.to_string()),
            ("ul", "slots_scheduled", self.ul_slots_scheduled.to_string()),
            ("prach", "slots_scheduled", self.prach_slots_scheduled.to_string()),
            ("lambda", "count", self.lambda.count.to_string()),
            ("lambda", "min_us", self.lambda.min_us.to_string()),
            ("lambda", "mean_us", format!("{:.3}", self.lambda.mean_us())),
            ("lambda", "max_us", self.lambda.max_us.to_string()),
        ]);
        rows
    }
}

/// IQ handed up to the high PHY after an on-time UL frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DeliveredUl {
    pub abs: i64,
    pub eaxc: EaxcId,
    pub symbol: u8,
    pub filter_index: u8,
    pub sections: Vec<DeliveredSection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeliveredSection {
    pub start_prb: u16,
    /// BFP exponent of each PRB (0 when uncompressed).
    pub exponents: Vec<u8>,
    /// Twelve values per PRB.
    pub values: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DuRxOutcome {
    OnTime { abs: i64, sequence: SequenceVerdict },
    Early,
    Late,
    DecodeError,
}

pub struct DuEngine {
    cfg: DuSchedulerConfig,
    codec: OfhCodec,
    counters: DuCounters,
    seq: BTreeMap<(EaxcId, DataDirection, Plane), u8>,
    tracker: SequenceTracker,
    delivered: Vec<DeliveredUl>,
}

impl fmt::Debug for DuEngine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DuEngine").field("counters", &self.counters).finish_non_exhaustive()
    }
}

impl DuEngine {
    pub fn new(cfg: DuSchedulerConfig) -> Result<Self, DuError> {
        cfg.validate()?;
        Ok(Self {
            codec: OfhCodec::new(cfg.codec),
            counters: DuCounters::default(),
            seq: BTreeMap::new(),
            tracker: SequenceTracker::new(),
            delivered: Vec::new(),
            cfg,
        })
    }

    pub fn config(&self) -> &DuSchedulerConfig {
        &self.cfg
    }

    pub fn counters(&self) -> DuCounters {
        self.counters
    }

    pub fn plan(&self, abs: i64) -> SlotPlan {
        self.cfg.plan(abs)
    }

    /// Virtual time at which slot `abs` is scheduled.
    pub fn schedule_time(&self, abs: i64) -> i64 {
        self.cfg.clock.ota_us(abs) - self.cfg.scheduling_offset_slots as i64 * self.cfg.numerology.slot_us()
    }

    /// Slot plans of `n_frames` radio frames starting at slot 0.
    pub fn run_pattern(&self, n_frames: u32) -> Vec<SlotPlan> {
        let n = n_frames as i64 * 10 * self.cfg.numerology.slots_per_subframe() as i64;
        (0..n).map(|abs| self.plan(abs)).collect()
    }

    fn next_seq(&mut self, eaxc: EaxcId, dir: DataDirection, plane: Plane) -> u8 {
        let s = self.seq.entry((eaxc, dir, plane)).or_insert(0);
        let v = *s;
        *s = s.wrapping_add(1);
        v
    }

    fn app(&self, dir: DataDirection, abs: i64, symbol: u8) -> AppHeader {
        let slot = self.cfg.clock.slot_point(abs);
        AppHeader::new(dir, (slot.sfn() % 256) as u8, slot.subframe(), slot.slot(), symbol)
    }

    fn emit_at(&self, kind: WindowKind, point_us: u32, abs: i64) -> Result<i64, DuError> {
        let ota = self.cfg.clock.ota_us(abs);
        let at_us = ota - point_us as i64;
        match check_window(kind, at_us, ota, &self.cfg.profile) {
            Ok(WindowVerdict::OnTime) => Ok(at_us),
            _ => Err(DuError::OutsideWindow { kind, at_us }),
        }
    }

    /// Emits every frame for slot `abs`. `dl_grid` must be present exactly
    /// when the slot carries downlink.
    pub fn schedule_slot(&mut self, abs: i64, now_us: i64, dl_grid: Option<&ResourceGrid>) -> Result<Vec<Emission>, DuError> {
        let plan = self.plan(abs);
        let expected_us = self.schedule_time(abs);
        if now_us != expected_us {
            return Err(DuError::ScheduleTime { slot: plan.slot, expected_us, now_us });
        }
        match (plan.dl, dl_grid.is_some()) {
            (true, false) => {
                return Err(DuError::DirectionMismatch { slot: plan.slot, expected: "downlink", given: "no grid" })
            }
            (false, true) => {
                return Err(DuError::DirectionMismatch { slot: plan.slot, expected: "uplink", given: "a DL grid" })
            }
            _ => {}
        }
        let mut out = Vec::new();
        let nof_prb = self.cfg.numerology.nof_prb();
        let eaxcs = self.cfg.eaxcs.clone();
        if let Some(grid) = dl_grid {
            if grid.nof_subcarriers() != self.cfg.numerology.nof_subcarriers() || grid.nof_ports() < eaxcs.len() {
                return Err(DuError::Config("DL grid does not match the carrier".into()));
            }
            let c_at = self.emit_at(WindowKind::CPlaneDl, self.cfg.t1a_cp_dl_point_us, abs)?;
            let u_at = self.emit_at(WindowKind::UPlaneDl, self.cfg.t1a_up_point_us, abs)?;
            for &eaxc in &eaxcs {
                let msg = CPlaneMessage {
                    app: self.app(DataDirection::Downlink, abs, 0),
                    section_type: SectionType::Type1,
                    comp: self.cfg.comp,
                    type3: None,
                    sections: vec![CSection::new(1, 0, prb_count(nof_prb), NOF_SYMBOLS_PER_SLOT as u8)],
                };
                let seq = self.next_seq(eaxc, DataDirection::Downlink, Plane::Control);
                let bytes = self.codec.encode_cplane(&msg, eaxc, seq).map_err(|e| DuError::Config(e.to_string()))?;
                out.push(Emission { at_us: c_at, abs, stream: RuStream::CPlaneDl, bytes });
                self.counters.sent_cplane_dl += 1;
            }
            for symbol in 0..NOF_SYMBOLS_PER_SLOT {
                for &eaxc in &eaxcs {
                    let port = eaxc.ru_port as usize;
                    let prbs = (0..nof_prb as usize)
                        .map(|p| compress(&grid_block(grid.prb(symbol, port, p)), self.cfg.comp))
                        .collect();
                    let msg = UPlaneMessage {
                        app: self.app(DataDirection::Downlink, abs, symbol as u8),
                        sections: vec![USection {
                            section_id: 1,
                            rb: false,
                            sym_inc: false,
                            start_prb: 0,
                            num_prb: prb_count(nof_prb),
                            comp: self.cfg.comp,
                            prbs,
                        }],
                    };
                    let seq = self.next_seq(eaxc, DataDirection::Downlink, Plane::User);
                    let bytes = self.codec.encode_uplane(&msg, eaxc, seq).map_err(|e| DuError::Config(e.to_string()))?;
                    out.push(Emission { at_us: u_at, abs, stream: RuStream::UPlaneDl, bytes });
                    self.counters.sent_uplane_dl += 1;
                }
            }
            self.counters.dl_slots_scheduled += 1;
        }
        if plan.ul {
            let at = self.emit_at(WindowKind::CPlaneUl, self.cfg.t1a_cp_ul_point_us, abs)?;
            let (start, n) = self.cfg.ul_grant(abs);
            for &eaxc in &eaxcs {
                let msg = CPlaneMessage {
                    app: self.app(DataDirection::Uplink, abs, 0),
                    section_type: SectionType::Type1,
                    comp: self.cfg.comp,
                    type3: None,
                    sections: vec![CSection::new(2, start, prb_count(n), NOF_SYMBOLS_PER_SLOT as u8)],
                };
                let seq = self.next_seq(eaxc, DataDirection::Uplink, Plane::Control);
                let bytes = self.codec.encode_cplane(&msg, eaxc, seq).map_err(|e| DuError::Config(e.to_string()))?;
                out.push(Emission { at_us: at, abs, stream: RuStream::CPlaneUl, bytes });
                self.counters.sent_cplane_ul += 1;
            }
            self.counters.ul_slots_scheduled += 1;
        }
        if plan.prach {
            let prach = self.cfg.prach.clone().expect("PRACH plan implies config");
            let at = self.emit_at(WindowKind::CPlaneUl, self.cfg.t1a_cp_ul_point_us, abs)?;
            for &eaxc in &eaxcs {
                let mut app = self.app(DataDirection::Uplink, abs, prach.start_symbol);
                app.filter_index = FILTER_INDEX_PRACH_SHORT;
                let mut section = CSection::new(3, prach.start_prb, prach.num_prb, prach.num_symbols);
                section.freq_offset = Some(prach.freq_offset_halfscs);
                let msg = CPlaneMessage {
                    app,
                    section_type: SectionType::Type3,
                    comp: self.cfg.comp,
                    type3: Some(Type3Params { time_offset: 0, frame_structure: self.cfg.numerology.mu(), cp_length: 0 }),
                    sections: vec![section],
                };
                let seq = self.next_seq(eaxc, DataDirection::Uplink, Plane::Control);
                let bytes = self.codec.encode_cplane(&msg, eaxc, seq).map_err(|e| DuError::Config(e.to_string()))?;
                out.push(Emission { at_us: at, abs, stream: RuStream::CPlanePrach, bytes });
                self.counters.sent_cplane_prach += 1;
            }
            self.counters.prach_slots_scheduled += 1;
        }
        Ok(out)
    }

    pub fn on_uplink_frame(&mut self, bytes: &[u8], arrival_us: i64) -> DuRxOutcome {
        let msg = match self.codec.decode(bytes) {
            Ok(f) => f,
            Err(_) => {
                self.counters.ul_decode_errors += 1;
                return DuRxOutcome::DecodeError;
            }
        };
        let eaxc = msg.eaxc;
        let seq_id = msg.seq_id;
        let OfhMessage::UPlane(m) = msg.message else {
            self.counters.ul_decode_errors += 1;
            return DuRxOutcome::DecodeError;
        };
        if m.app.data_direction != DataDirection::Uplink {
            self.counters.ul_decode_errors += 1;
            return DuRxOutcome::DecodeError;
        }
        let clock = self.cfg.clock;
        let abs = clock.resolve_frame_id(clock.abs_at(arrival_us), m.app.frame_id, m.app.subframe_id, m.app.slot_id);
        let ota = clock.ota_us(abs);
        match check_window(WindowKind::UPlaneUlRx, arrival_us, ota, &self.cfg.profile).expect("DU Ta4 window") {
            WindowVerdict::Early => {
                self.counters.ul_early += 1;
                return DuRxOutcome::Early;
            }
            WindowVerdict::Late => {
                self.counters.ul_late += 1;
                return DuRxOutcome::Late;
            }
            WindowVerdict::OnTime => self.counters.ul_on_time += 1,
        }
        let sequence = self.tracker.track(eaxc, DataDirection::Uplink, Plane::User, seq_id);
        match sequence {
            SequenceVerdict::Duplicate => {
                self.counters.ul_duplicates += 1;
                return DuRxOutcome::OnTime { abs, sequence };
            }
            SequenceVerdict::Gap(n) => self.counters.ul_seq_gaps += n as u64,
            SequenceVerdict::InOrder => {}
        }
        self.counters.lambda.record(arrival_us - ota);
        let sections = m
            .sections
            .iter()
            .map(|s| {
                let values = s
                    .prbs
                    .iter()
                    .flat_map(|p| {
                        let b = decompress(p);
                        (0..RES_PER_PRB).map(move |k| {
                            let (re, im) = b.re(k);
                            Complex64::new(to_float(re), to_float(im))
                        })
                    })
                    .collect();
                DeliveredSection { start_prb: s.start_prb, exponents: s.prbs.iter().map(|p| p.exponent).collect(), values }
            })
            .collect();
        self.delivered.push(DeliveredUl { abs, eaxc, symbol: m.app.start_symbol_id, filter_index: m.app.filter_index, sections });
        DuRxOutcome::OnTime { abs, sequence }
    }

    /// Hands over everything delivered since the last call.
    pub fn take_delivered(&mut self) -> Vec<DeliveredUl> {
        std::mem::take(&mut self.delivered)
    }
}

fn prb_count(n: u16) -> u8 {
    if n > 255 {
        0
    } else {
        n as u8
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay_profile::{du_preset, PresetName};

    fn cfg(duplex: Duplex) -> DuSchedulerConfig {
        let (num, preset) = match duplex {
            Duplex::Fdd => (NumerologyConfig::new(0, 30_720_000, 106).unwrap(), PresetName::FddScs15),
            Duplex::Tdd(_) => (NumerologyConfig::new(1, 23_040_000, 51).unwrap(), PresetName::TddScs30),
        };
        let clock = SlotClock::new(SlotPoint::from_system_slot(num.mu(), 0), 100_000);
        DuSchedulerConfig::new(num, du_preset(preset), clock, duplex, 2)
    }

    fn count(plans: &[SlotPlan]) -> (usize, usize) {
        (plans.iter().filter(|p| p.dl).count(), plans.iter().filter(|p| p.ul).count())
    }

    #[test]
    fn pattern_expansion() {
        let du = DuEngine::new(cfg(Duplex::Tdd(TddPattern::dddsu()))).unwrap();
        assert_eq!(count(&du.run_pattern(1)[..10]), (8, 2));
        let du = DuEngine::new(cfg(Duplex::Tdd(TddPattern::d7s1u2()))).unwrap();
        assert_eq!(count(&du.run_pattern(1)[..10]), (8, 2));
        let du = DuEngine::new(cfg(Duplex::Fdd)).unwrap();
        assert_eq!(count(&du.run_pattern(1)), (10, 10));
        assert_eq!("DDDSX".parse::<TddPattern>(), Err(DuError::Pattern("DDDSX".into())));
    }

    #[test]
    fn default_points_and_lambda() {
        let c = cfg(Duplex::Tdd(TddPattern::dddsu()));
        assert_eq!((c.t1a_cp_dl_point_us, c.t1a_up_point_us, c.t1a_cp_ul_point_us), (2485, 2320, 2528));
        assert_eq!(c.scheduling_offset_slots, 10);
        assert_eq!(cfg(Duplex::Fdd).scheduling_offset_slots, 5);
        let du = DuEngine::new(c).unwrap();
        assert_eq!(du.schedule_time(4), du.config().clock.ota_us(4) - 5000);
    }

    #[test]
    fn uplink_slot_emits_single_cplane_per_eaxc_in_window() {
        let mut c = cfg(Duplex::Tdd(TddPattern::dddsu()));
        c.eaxcs = vec![EaxcId::ru_port(0)];
        let mut du = DuEngine::new(c).unwrap();
        let ota = du.config().clock.ota_us(4);
        let out = du.schedule_slot(4, du.schedule_time(4), None).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].stream, RuStream::CPlaneUl);
        assert!(out[0].at_us >= ota - 2670 && out[0].at_us <= ota - 2386);
        assert!(du.schedule_slot(0, du.schedule_time(0), None).is_err());
        assert!(du.schedule_slot(9, du.schedule_time(8), None).is_err());
    }

    #[test]
    fn c_before_u() {
        let mut du = DuEngine::new(cfg(Duplex::Fdd)).unwrap();
        let grid = ResourceGrid::new(du.config().clock.slot_point(0), 2, 106);
        let out = du.schedule_slot(0, du.schedule_time(0), Some(&grid)).unwrap();
        let c_max = out.iter().filter(|e| e.stream == RuStream::CPlaneDl).map(|e| e.at_us).max().unwrap();
        let u_min = out.iter().filter(|e| e.stream == RuStream::UPlaneDl).map(|e| e.at_us).min().unwrap();
        assert!(u_min - c_max >= 125);
        assert_eq!(out.iter().filter(|e| e.stream == RuStream::UPlaneDl).count(), 28);
        assert_eq!(out.iter().filter(|e| e.stream == RuStream::CPlaneUl).count(), 2);
    }

    #[test]
    fn prach_occasions() {
        let mut c = cfg(Duplex::Tdd(TddPattern::dddsu()));
        c.prach = Some(PrachConfig::from_index(159, default_prach_offset(51)).unwrap());
        let du = DuEngine::new(c.clone()).unwrap();
        let prach: Vec<i64> = du.run_pattern(2).iter().filter(|p| p.prach).map(|p| p.abs).collect();
        assert_eq!(prach, vec![19, 39]);
        assert_eq!(c.ul_grant(19), (12, 39));
        assert_eq!(c.ul_grant(9), (0, 51));
        c.duplex = Duplex::Tdd("DDDDDDDDDU".parse().unwrap());
        c.prach = Some(PrachConfig::from_index(159, 0).unwrap());
        assert!(DuEngine::new(c.clone()).is_ok());
        c.duplex = Duplex::Tdd("DDDDDDDDUD".parse().unwrap());
        assert!(matches!(DuEngine::new(c), Err(DuError::Config(_))));
    }

    #[test]
    fn config_checks() {
        let mut c = cfg(Duplex::Tdd(TddPattern::dddsu()));
        c.scheduling_offset_slots = 5;
        assert!(DuEngine::new(c.clone()).is_err());
        c.scheduling_offset_slots = 10;
        c.tcp_adv_dl_us = 200;
        assert!(DuEngine::new(c.clone()).is_err());
        c.tcp_adv_dl_us = 125;
        c.t1a_up_point_us = 2100;
        assert!(DuEngine::new(c).is_err());
    }

    #[test]
    fn ta4_window_and_duplicates() {
        use crate::iq_compress::IqBlock;
        let mut du = DuEngine::new(cfg(Duplex::Tdd(TddPattern::dddsu()))).unwrap();
        let clock = du.config().clock;
        let codec = OfhCodec::new(du.config().codec);
        let slot = clock.slot_point(4);
        let comp = CompParams::bfp(9).unwrap();
        let msg = UPlaneMessage {
            app: AppHeader::new(DataDirection::Uplink, (slot.sfn() % 256) as u8, slot.subframe(), slot.slot(), 0),
            sections: vec![USection {
                section_id: 2,
                rb: false,
                sym_inc: false,
                start_prb: 0,
                num_prb: 1,
                comp,
                prbs: vec![compress(&IqBlock([256; 24]), comp)],
            }],
        };
        let f0 = codec.encode_uplane(&msg, EaxcId::ru_port(0), 0).unwrap();
        let f1 = codec.encode_uplane(&msg, EaxcId::ru_port(0), 1).unwrap();
        let ota = clock.ota_us(4);
        assert!(matches!(du.on_uplink_frame(&f0, ota + 925), DuRxOutcome::OnTime { abs: 4, .. }));
        assert_eq!(du.on_uplink_frame(&f1, ota + 1326), DuRxOutcome::Late);
        assert_eq!(du.on_uplink_frame(&f1, ota + 924), DuRxOutcome::Early);
        assert!(matches!(du.on_uplink_frame(&f1, ota + 1325), DuRxOutcome::OnTime { sequence: SequenceVerdict::InOrder, .. }));
        assert!(matches!(du.on_uplink_frame(&f1, ota + 1000), DuRxOutcome::OnTime { sequence: SequenceVerdict::Duplicate, .. }));
        let c = du.counters();
        assert_eq!((c.ul_on_time, c.ul_early, c.ul_late, c.ul_duplicates), (3, 1, 1, 1));
        assert_eq!(du.take_delivered().len(), 2);
        assert_eq!((c.lambda.min_us, c.lambda.max_us), (925, 1325));
        assert_eq!(du.on_uplink_frame(&[0u8; 3], ota), DuRxOutcome::DecodeError);
    }
}
