//! Radio unit: C-plane driven repositories, DL resource-grid filling,
//! slot-boundary low-PHY processing and UL/PRACH U-plane generation.
//!
//! The engine has no notion of a TDD pattern. Which slots it modulates or
//! samples is decided entirely by the C-plane messages it accepts.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use thiserror::Error;

use crate::delay_profile::{RuDelayProfile, WindowBounds, WindowKind, WindowProfile, WindowVerdict};
use crate::iq_compress::{compress, decompress, to_fixed, to_float, CompParams, IqBlock, RES_PER_PRB};
use crate::low_phy::{Complex64, LowPhyError, Ofdm, PrachExtractConfig, ResourceGrid, SampleBlock, PRACH_SHORT_LRA};
use crate::ofh_codec::{
    AppHeader, CPlaneMessage, CodecConfig, DataDirection, EaxcId, OfhCodec, OfhMessage, SectionType, UPlaneMessage,
    USection, FILTER_INDEX_PRACH_SHORT,
};
use crate::timing::{NumerologyConfig, SlotClock, SlotPoint, NOF_SYMBOLS_PER_SLOT};

#[derive(Debug, Error)]
pub enum RuError {
    #[error("invalid RU configuration: {0}")]
    Config(String),
    #[error("slot boundary {got} does not follow {last}")]
    BoundaryOrder { last: i64, got: i64 },
    #[error("slot point {slot} does not match the clock at {now_us} us")]
    BoundaryMismatch { slot: SlotPoint, now_us: i64 },
    #[error(transparent)]
    LowPhy(#[from] LowPhyError),
}

#[derive(Debug, Clone)]
pub struct RuConfig {
    pub numerology: NumerologyConfig,
    pub profile: RuDelayProfile,
    pub clock: SlotClock,
    pub codec: CodecConfig,
    pub nof_ports: usize,
    /// Slots by which DL modulation leads OTA.
    pub lowphy_lead_slots: u32,
    /// Offset after OTA at which UL U-plane frames are handed to the link.
    pub ta3_tx_point_us: u32,
    /// Added to every arrival time before window classification.
    pub processing_latency_us: u32,
    /// Slots held by each context repository; also the RG pool size.
    pub repo_capacity: usize,
}

impl RuConfig {
    pub fn new(numerology: NumerologyConfig, profile: RuDelayProfile, clock: SlotClock, nof_ports: usize) -> Self {
        let codec = CodecConfig::new(numerology.mu(), numerology.nof_prb());
        let slot_us = numerology.slot_us() as u32;
        let deepest = profile.values().into_iter().max().unwrap_or(0);
        Self {
            codec,
            nof_ports,
            lowphy_lead_slots: 3,
            ta3_tx_point_us: profile.ta3_midpoint(),
            processing_latency_us: 0,
            repo_capacity: deepest.div_ceil(slot_us) as usize + 2,
            numerology,
            profile,
            clock,
        }
    }

    pub fn validate(&self) -> Result<(), RuError> {
        let slot_us = self.numerology.slot_us();
        let p = &self.profile;
        p.validate().map_err(|e| RuError::Config(e.to_string()))?;
        if self.nof_ports == 0 || self.nof_ports > 16 {
            return Err(RuError::Config(format!("{} ports", self.nof_ports)));
        }
        if self.clock.mu() != self.numerology.mu() || self.codec.mu != self.numerology.mu() {
            return Err(RuError::Config("clock, codec and numerology disagree on mu".into()));
        }
        if self.codec.nof_prb != self.numerology.nof_prb() {
            return Err(RuError::Config("codec and numerology disagree on PRB count".into()));
        }
        let lead_us = self.lowphy_lead_slots as i64 * slot_us;
        for (name, min) in [("t2a_min_cp_dl", p.t2a_min_cp_dl), ("t2a_min_up", p.t2a_min_up)] {
            if (min as i64) < lead_us {
                return Err(RuError::Config(format!(
                    "{name} = {min} us closes after DL processing starts ({lead_us} us before OTA)"
                )));
            }
        }
        if (self.ta3_tx_point_us as i64) < slot_us
            || self.ta3_tx_point_us < p.ta3_min
            || self.ta3_tx_point_us > p.ta3_max
        {
            return Err(RuError::Config(format!(
                "ta3 transmit point {} us must lie in [{}, {}] and after the slot ends ({slot_us} us)",
                self.ta3_tx_point_us, p.ta3_min, p.ta3_max
            )));
        }
        let deepest = p.values().into_iter().max().unwrap_or(0) as i64;
        let needed = (deepest + slot_us - 1) / slot_us + 2;
        if (self.repo_capacity as i64) < needed {
            return Err(RuError::Config(format!("repository capacity {} < {needed} slots", self.repo_capacity)));
        }
        Ok(())
    }
}

/// Reception counters of one stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StreamCounters {
    pub on_time: u64,
    pub early: u64,
    pub late: u64,
    pub no_context: u64,
}

impl StreamCounters {
    pub fn total(&self) -> u64 {
        self.on_time + self.early + self.late + self.no_context
    }

    fn bump(&mut self, verdict: RxVerdict) {
        match verdict {
            RxVerdict::OnTime => self.on_time += 1,
            RxVerdict::Early => self.early += 1,
            RxVerdict::Late => self.late += 1,
            RxVerdict::NoContext => self.no_context += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuStream {
    CPlaneDl,
    CPlaneUl,
    CPlanePrach,
    UPlaneDl,
}

impl RuStream {
    pub const ALL: [RuStream; 4] = [RuStream::CPlaneDl, RuStream::CPlaneUl, RuStream::CPlanePrach, RuStream::UPlaneDl];

    pub fn name(self) -> &'static str {
        match self {
            RuStream::CPlaneDl => "cplane_dl",
            RuStream::CPlaneUl => "cplane_ul",
            RuStream::CPlanePrach => "cplane_prach",
            RuStream::UPlaneDl => "uplane_dl",
        }
    }

    pub fn window(self) -> WindowKind {
        match self {
            RuStream::CPlaneDl => WindowKind::CPlaneDl,
            RuStream::CPlaneUl | RuStream::CPlanePrach => WindowKind::CPlaneUl,
            RuStream::UPlaneDl => WindowKind::UPlaneDl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RxVerdict {
    OnTime,
    Early,
    Late,
    NoContext,
}

/// What happened to one received frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RxOutcome {
    Accepted { stream: RuStream, verdict: RxVerdict, slot: SlotPoint },
    DecodeError,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RuCounters {
    pub cplane_dl: StreamCounters,
    pub cplane_ul: StreamCounters,
    pub cplane_prach: StreamCounters,
    pub uplane_dl: StreamCounters,
    /// Undecodable frames and frames an RU never accepts (UL U-plane).
    pub decode_error: u64,
    pub dl_slots_modulated: u64,
    pub dl_slots_silent: u64,
    pub ul_slots_emitted: u64,
    pub ul_frames_emitted: u64,
    pub prach_occasions_emitted: u64,
    pub prach_frames_emitted: u64,
    pub ul_samples_discarded: u64,
    pub evictions: u64,
}

impl RuCounters {
    pub fn stream(&self, s: RuStream) -> &StreamCounters {
        match s {
            RuStream::CPlaneDl => &self.cplane_dl,
            RuStream::CPlaneUl => &self.cplane_ul,
            RuStream::CPlanePrach => &self.cplane_prach,
            RuStream::UPlaneDl => &self.uplane_dl,
        }
    }

    fn stream_mut(&mut self, s: RuStream) -> &mut StreamCounters {
        match s {
            RuStream::CPlaneDl => &mut self.cplane_dl,
            RuStream::CPlaneUl => &mut self.cplane_ul,
            RuStream::CPlanePrach => &mut self.cplane_prach,
            RuStream::UPlaneDl => &mut self.uplane_dl,
        }
    }

    /// Frames received, counted once each.
    pub fn received(&self) -> u64 {
        RuStream::ALL.iter().map(|&s| self.stream(s).total()).sum::<u64>() + self.decode_error
    }

    /// Only the counters fed by `on_frame`.
    pub fn reception(&self) -> RuCounters {
        RuCounters {
            cplane_dl: self.cplane_dl,
            cplane_ul: self.cplane_ul,
            cplane_prach: self.cplane_prach,
            uplane_dl: self.uplane_dl,
            decode_error: self.decode_error,
            ..RuCounters::default()
        }
    }

    /// Rows of (stream, counter, value) in a fixed order.
    pub fn rows(&self) -> Vec<(&'static str, &'static str, u64)> {
        let mut rows = Vec::new();
        for s in RuStream::ALL {
            let c = self.stream(s);
            rows.push((s.name(), "on_time", c.on_time));
            rows.push((s.name(), "early", c.early));
            rows.push((s.name(), "late", c.late));
            rows.push((s.name(), "no_context", c.no_context));
        }
        rows.extend([
            ("all", "decode_error", self.decode_error),
            ("dl", "slots_modulated", self.dl_slots_modulated),
            ("dl", "slots_silent", self.dl_slots_silent),
            ("ul", "slots_emitted", self.ul_slots_emitted),
            ("ul", "frames_emitted", self.ul_frames_emitted),
            ("prach", "occasions_emitted", self.prach_occasions_emitted),
            ("prach", "frames_emitted", self.prach_frames_emitted),
            ("ul", "samples_discarded", self.ul_samples_discarded),
            ("all", "evictions", self.evictions),
        ]);
        rows
    }
}

/// One C-plane section as remembered by a context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Allocation {
    pub eaxc: EaxcId,
    pub section_id: u16,
    pub start_symbol: u8,
    pub num_symbol: u8,
    pub start_prb: u16,
    pub num_prb: u16,
}

impl Allocation {
    fn covers_symbol(&self, symbol: u8) -> bool {
        symbol >= self.start_symbol && symbol < self.start_symbol + self.num_symbol
    }

    fn covers(&self, eaxc: EaxcId, section_id: u16, symbol: u8, start_prb: u16, num_prb: u16) -> bool {
        self.eaxc == eaxc
            && self.section_id == section_id
            && self.covers_symbol(symbol)
            && start_prb >= self.start_prb
            && start_prb + num_prb <= self.start_prb + self.num_prb
    }
}

#[derive(Debug)]
pub struct DlContext {
    pub slot: SlotPoint,
    pub allocations: Vec<Allocation>,
    pub comp: CompParams,
    rg: ResourceGrid,
}

impl DlContext {
    pub fn grid(&self) -> &ResourceGrid {
        &self.rg
    }
}

#[derive(Debug, Clone)]
pub struct UlContext {
    pub slot: SlotPoint,
    pub allocations: Vec<Allocation>,
    pub comp: CompParams,
}

#[derive(Debug, Clone)]
pub struct PrachContext {
    pub slot: SlotPoint,
    pub freq_offset_halfscs: i32,
    pub allocations: Vec<Allocation>,
    pub length_ra: usize,
    pub comp: CompParams,
}

/// Fixed-capacity ring of per-slot contexts keyed by the absolute slot
/// counter modulo capacity.
#[derive(Debug)]
pub struct ContextRepository<T> {
    entries: Vec<Option<(i64, T)>>,
}

impl<T> ContextRepository<T> {
    pub fn new(capacity: usize) -> Self {
        Self { entries: (0..capacity).map(|_| None).collect() }
    }

    pub fn capacity(&self) -> usize {
        self.entries.len()
    }

    pub fn len(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn index(&self, abs: i64) -> usize {
        abs.rem_euclid(self.entries.len() as i64) as usize
    }

    pub fn get(&self, abs: i64) -> Option<&T> {
        match &self.entries[self.index(abs)] {
            Some((k, v)) if *k == abs => Some(v),
            _ => None,
        }
    }

    pub fn get_mut(&mut self, abs: i64) -> Option<&mut T> {
        let i = self.index(abs);
        match &mut self.entries[i] {
            Some((k, v)) if *k == abs => Some(v),
            _ => None,
        }
    }

    /// Stores `value` for `abs`, returning whatever previously occupied
    /// the ring position.
    pub fn insert(&mut self, abs: i64, value: T) -> Option<(i64, T)> {
        let i = self.index(abs);
        self.entries[i].replace((abs, value))
    }

    pub fn take(&mut self, abs: i64) -> Option<T> {
        let i = self.index(abs);
        match &self.entries[i] {
            Some((k, _)) if *k == abs => self.entries[i].take().map(|(_, v)| v),
            _ => None,
        }
    }

    /// Removes entries for slots before `abs`.
    pub fn reclaim_before(&mut self, abs: i64) -> Vec<T> {
        let mut out = Vec::new();
        for e in &mut self.entries {
            if matches!(e, Some((k, _)) if *k < abs) {
                out.push(e.take().unwrap().1);
            }
        }
        out
    }
}

/// Pre-allocated resource grids.
#[derive(Debug)]
pub struct RgPool {
    free: Vec<ResourceGrid>,
    acquired: u64,
    released: u64,
}

impl RgPool {
    pub fn new(size: usize, nof_ports: usize, nof_prb: u16, mu: u8) -> Self {
        let slot = SlotPoint::from_system_slot(mu, 0);
        Self { free: (0..size).map(|_| ResourceGrid::new(slot, nof_ports, nof_prb)).collect(), acquired: 0, released: 0 }
    }

    pub fn acquire(&mut self, slot: SlotPoint) -> Option<ResourceGrid> {
        let mut rg = self.free.pop()?;
        rg.reset(slot);
        self.acquired += 1;
        Some(rg)
    }

    pub fn release(&mut self, rg: ResourceGrid) {
        self.released += 1;
        self.free.push(rg);
    }

    pub fn available(&self) -> usize {
        self.free.len()
    }

    pub fn acquired(&self) -> u64 {
        self.acquired
    }

    pub fn released(&self) -> u64 {
        self.released
    }
}

/// Outgoing UL/PRACH frames ordered by transmit time, then insertion.
#[derive(Debug, Default)]
pub struct FramePool {
    heap: BinaryHeap<Reverse<(i64, u64)>>,
    frames: HashMap<u64, Vec<u8>>,
    next: u64,
}

impl FramePool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, transmit_at: i64, frame: Vec<u8>) {
        self.heap.push(Reverse((transmit_at, self.next)));
        self.frames.insert(self.next, frame);
        self.next += 1;
    }

    pub fn drain(&mut self, now: i64) -> Vec<(i64, Vec<u8>)> {
        let mut out = Vec::new();
        while let Some(Reverse((t, id))) = self.heap.peek().copied() {
            if t > now {
                break;
            }
            self.heap.pop();
            out.push((t, self.frames.remove(&id).expect("frame pool entry")));
        }
        out
    }

    pub fn next_due(&self) -> Option<i64> {
        self.heap.peek().map(|Reverse((t, _))| *t)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Result of one slot boundary.
#[derive(Debug, Clone)]
pub struct BoundaryOutput {
    /// Slot whose DL samples were produced.
    pub dl_slot: SlotPoint,
    pub dl_ota_us: i64,
    pub dl_modulated: bool,
    pub dl_blocks: Vec<SampleBlock>,
    /// Slot whose UL samples were processed.
    pub ul_slot: SlotPoint,
    pub ul_frames: usize,
    pub prach_frames: usize,
}

pub struct RuEngine {
    cfg: RuConfig,
    codec: OfhCodec,
    ofdm: Ofdm,
    dl_repo: ContextRepository<DlContext>,
    ul_repo: ContextRepository<UlContext>,
    prach_repo: ContextRepository<PrachContext>,
    pool: RgPool,
    frame_pool: FramePool,
    counters: RuCounters,
    tx_seq: BTreeMap<EaxcId, u8>,
    current_abs: i64,
    last_boundary: Option<i64>,
    last_dl_done: Option<i64>,
}

impl std::fmt::Debug for RuEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RuEngine")
            .field("current_abs", &self.current_abs)
            .field("counters", &self.counters)
            .finish_non_exhaustive()
    }
}

impl RuEngine {
    pub fn new(cfg: RuConfig) -> Result<Self, RuError> {
        cfg.validate()?;
        let n = cfg.repo_capacity;
        Ok(Self {
            codec: OfhCodec::new(cfg.codec),
            ofdm: Ofdm::new(&cfg.numerology),
            dl_repo: ContextRepository::new(n),
            ul_repo: ContextRepository::new(n),
            prach_repo: ContextRepository::new(n),
            pool: RgPool::new(n, cfg.nof_ports, cfg.numerology.nof_prb(), cfg.numerology.mu()),
            frame_pool: FramePool::new(),
            counters: RuCounters::default(),
            tx_seq: BTreeMap::new(),
            current_abs: 0,
            last_boundary: None,
            last_dl_done: None,
            cfg,
        })
    }

    pub fn config(&self) -> &RuConfig {
        &self.cfg
    }

    pub fn snapshot_counters(&self) -> RuCounters {
        self.counters
    }

    pub fn rg_pool(&self) -> &RgPool {
        &self.pool
    }

    pub fn dl_contexts(&self) -> &ContextRepository<DlContext> {
        &self.dl_repo
    }

    pub fn ul_contexts(&self) -> &ContextRepository<UlContext> {
        &self.ul_repo
    }

    pub fn prach_contexts(&self) -> &ContextRepository<PrachContext> {
        &self.prach_repo
    }

    pub fn frame_pool(&self) -> &FramePool {
        &self.frame_pool
    }

    /// Grids currently held by DL contexts.
    pub fn rg_held(&self) -> usize {
        self.dl_repo.len()
    }

    fn bounds(&self, stream: RuStream) -> WindowBounds {
        self.cfg.profile.bounds(stream.window()).expect("RU window")
    }

    pub fn on_frame(&mut self, bytes: &[u8], arrival_us: i64) -> RxOutcome {
        let frame = match self.codec.decode(bytes) {
            Ok(f) => f,
            Err(_) => {
                self.counters.decode_error += 1;
                return RxOutcome::DecodeError;
            }
        };
        let app = *frame.message.app();
        let stream = match (&frame.message, app.data_direction) {
            (OfhMessage::CPlane(m), DataDirection::Uplink) if m.section_type == SectionType::Type3 => RuStream::CPlanePrach,
            (OfhMessage::CPlane(_), DataDirection::Uplink) => RuStream::CPlaneUl,
            (OfhMessage::CPlane(_), DataDirection::Downlink) => RuStream::CPlaneDl,
            (OfhMessage::UPlane(_), DataDirection::Downlink) => RuStream::UPlaneDl,
            (OfhMessage::UPlane(_), DataDirection::Uplink) => {
                self.counters.decode_error += 1;
                return RxOutcome::DecodeError;
            }
        };
        let clock = self.cfg.clock;
        let abs = clock.resolve_frame_id(self.current_abs, app.frame_id, app.subframe_id, app.slot_id);
        let slot = clock.slot_point(abs);
        let effective = arrival_us + self.cfg.processing_latency_us as i64;
        let verdict = match self.bounds(stream).classify(effective, clock.ota_us(abs)) {
            WindowVerdict::Early => RxVerdict::Early,
            WindowVerdict::Late => RxVerdict::Late,
            WindowVerdict::OnTime => self.apply(stream, frame.eaxc, abs, slot, frame.message),
        };
        self.counters.stream_mut(stream).bump(verdict);
        RxOutcome::Accepted { stream, verdict, slot }
    }

    fn already_processed(&self, stream: RuStream, abs: i64) -> bool {
        match stream {
            RuStream::CPlaneDl | RuStream::UPlaneDl => self.last_dl_done.is_some_and(|d| abs <= d),
            // UL slot X is sampled at boundary X + 1
            RuStream::CPlaneUl | RuStream::CPlanePrach => self.last_boundary.is_some_and(|b| abs < b),
        }
    }

    fn apply(&mut self, stream: RuStream, eaxc: EaxcId, abs: i64, slot: SlotPoint, msg: OfhMessage) -> RxVerdict {
        if self.already_processed(stream, abs) {
            return RxVerdict::Late;
        }
        if eaxc.ru_port as usize >= self.cfg.nof_ports {
            return RxVerdict::NoContext;
        }
        match msg {
            OfhMessage::CPlane(m) => {
                self.install(stream, eaxc, abs, slot, &m);
                RxVerdict::OnTime
            }
            OfhMessage::UPlane(m) => self.write_dl(eaxc, abs, &m),
        }
    }

    fn allocations(eaxc: EaxcId, m: &CPlaneMessage, nof_prb: u16) -> Vec<Allocation> {
        m.sections
            .iter()
            .map(|s| Allocation {
                eaxc,
                section_id: s.section_id,
                start_symbol: m.app.start_symbol_id,
                num_symbol: s.num_symbol,
                start_prb: s.start_prb,
                num_prb: s.effective_num_prb(nof_prb),
            })
            .collect()
    }

    fn evict<T>(&mut self, evicted: Option<(i64, T)>) -> Option<T> {
        evicted.map(|(_, v)| {
            self.counters.evictions += 1;
            v
        })
    }

    fn install(&mut self, stream: RuStream, eaxc: EaxcId, abs: i64, slot: SlotPoint, m: &CPlaneMessage) {
        let allocs = Self::allocations(eaxc, m, self.cfg.numerology.nof_prb());
        match stream {
            RuStream::CPlaneDl => {
                if let Some(ctx) = self.dl_repo.get_mut(abs) {
                    ctx.allocations.extend(allocs);
                    return;
                }
                let idx_owner = self.dl_repo.take_slot_owner(abs);
                if let Some(old) = self.evict(idx_owner) {
                    self.pool.release(old.rg);
                }
                let rg = self.pool.acquire(slot).expect("RG pool sized to the DL repository");
                self.dl_repo.insert(abs, DlContext { slot, allocations: allocs, comp: m.comp, rg });
            }
            RuStream::CPlaneUl => {
                if let Some(ctx) = self.ul_repo.get_mut(abs) {
                    ctx.allocations.extend(allocs);
                    return;
                }
                let old = self.ul_repo.insert(abs, UlContext { slot, allocations: allocs, comp: m.comp });
                self.evict(old);
            }
            RuStream::CPlanePrach => {
                let freq_offset_halfscs = m.sections[0].freq_offset.unwrap_or_default();
                if let Some(ctx) = self.prach_repo.get_mut(abs) {
                    ctx.allocations.extend(allocs);
                    return;
                }
                let ctx = PrachContext { slot, freq_offset_halfscs, allocations: allocs, length_ra: PRACH_SHORT_LRA, comp: m.comp };
                let old = self.prach_repo.insert(abs, ctx);
                self.evict(old);
            }
            RuStream::UPlaneDl => unreachable!("U-plane never installs a context"),
        }
    }

    fn write_dl(&mut self, eaxc: EaxcId, abs: i64, m: &UPlaneMessage) -> RxVerdict {
        let nof_prb = self.cfg.numerology.nof_prb();
        let Some(ctx) = self.dl_repo.get_mut(abs) else {
            return RxVerdict::NoContext;
        };
        let symbol = m.app.start_symbol_id;
        let covered = m.sections.iter().all(|s| {
            let n = s.effective_num_prb(nof_prb);
            ctx.allocations.iter().any(|a| a.covers(eaxc, s.section_id, symbol, s.start_prb, n))
        });
        if !covered {
            return RxVerdict::NoContext;
        }
        let port = eaxc.ru_port as usize;
        for s in &m.sections {
            for (i, prb) in s.prbs.iter().enumerate() {
                let block = decompress(prb);
                let mut values = [Complex64::default(); RES_PER_PRB];
                for (k, v) in values.iter_mut().enumerate() {
                    let (re, im) = block.re(k);
                    *v = Complex64::new(to_float(re), to_float(im));
                }
                ctx.rg.write_prb(symbol as usize, port, s.start_prb as usize + i, &values);
            }
        }
        RxVerdict::OnTime
    }

    /// Drives one slot boundary.
    ///
    /// `now_us` is the OTA time of `slot`. DL output is produced for
    /// `slot + lowphy_lead_slots`; `ul_samples` are the received samples of
    /// the slot that just ended (`slot - 1`), one block per port.
    pub fn on_slot_boundary(
        &mut self,
        slot: SlotPoint,
        now_us: i64,
        ul_samples: Option<&[SampleBlock]>,
    ) -> Result<BoundaryOutput, RuError> {
        let clock = self.cfg.clock;
        let abs = clock.abs_at(now_us);
        if clock.slot_point(abs) != slot || clock.ota_us(abs) != now_us {
            return Err(RuError::BoundaryMismatch { slot, now_us });
        }
        if let Some(last) = self.last_boundary {
            if abs <= last {
                return Err(RuError::BoundaryOrder { last, got: abs });
            }
        }
        self.last_boundary = Some(abs);
        self.current_abs = abs;

        let dl_abs = abs + self.cfg.lowphy_lead_slots as i64;
        let dl_slot = clock.slot_point(dl_abs);
        for stale in self.dl_repo.reclaim_before(dl_abs) {
            self.counters.evictions += 1;
            self.pool.release(stale.rg);
        }
        let (dl_modulated, dl_blocks) = match self.dl_repo.take(dl_abs) {
            Some(ctx) => {
                let blocks = self.ofdm.modulate(&ctx.rg)?;
                self.pool.release(ctx.rg);
                self.counters.dl_slots_modulated += 1;
                (true, blocks)
            }
            None => {
                self.counters.dl_slots_silent += 1;
                let start = self.cfg.numerology.slot_start(dl_slot);
                let len = self.cfg.numerology.samples_per_slot() as usize;
                (false, (0..self.cfg.nof_ports).map(|p| SampleBlock::silence(start, p, len)).collect())
            }
        };
        self.last_dl_done = Some(dl_abs);

        let ul_abs = abs - 1;
        let ul_slot = clock.slot_point(ul_abs);
        let ul_ctx = self.ul_repo.take(ul_abs);
        let prach_ctx = self.prach_repo.take(ul_abs);
        self.counters.evictions += (self.ul_repo.reclaim_before(ul_abs).len() + self.prach_repo.reclaim_before(ul_abs).len()) as u64;
        let transmit_at = clock.ota_us(ul_abs) + self.cfg.ta3_tx_point_us as i64;
        let mut ul_frames = 0;
        let mut prach_frames = 0;
        match ul_samples {
            Some(blocks) => {
                if let Some(ctx) = ul_ctx {
                    ul_frames = self.emit_ul(&ctx, ul_slot, blocks, transmit_at)?;
                    if ul_frames > 0 {
                        self.counters.ul_slots_emitted += 1;
                        self.counters.ul_frames_emitted += ul_frames as u64;
                    }
                }
                if let Some(ctx) = prach_ctx {
                    prach_frames = self.emit_prach(&ctx, ul_slot, blocks, transmit_at)?;
                    if prach_frames > 0 {
                        self.counters.prach_occasions_emitted += 1;
                        self.counters.prach_frames_emitted += prach_frames as u64;
                    }
                }
            }
            None => {
                if ul_ctx.is_some() || prach_ctx.is_some() {
                    self.counters.ul_samples_discarded += 1;
                }
            }
        }

        Ok(BoundaryOutput {
            dl_slot,
            dl_ota_us: clock.ota_us(dl_abs),
            dl_modulated,
            dl_blocks,
            ul_slot,
            ul_frames,
            prach_frames,
        })
    }

    fn next_seq(&mut self, eaxc: EaxcId) -> u8 {
        let s = self.tx_seq.entry(eaxc).or_insert(0);
        let v = *s;
        *s = s.wrapping_add(1);
        v
    }

    fn ul_app(slot: SlotPoint, symbol: u8, filter_index: u8) -> AppHeader {
        let mut app = AppHeader::new(DataDirection::Uplink, (slot.sfn() % 256) as u8, slot.subframe(), slot.slot(), symbol);
        app.filter_index = filter_index;
        app
    }

    fn block_for(blocks: &[SampleBlock], port: usize) -> Option<&SampleBlock> {
        blocks.iter().find(|b| b.port == port)
    }

    fn emit_ul(&mut self, ctx: &UlContext, slot: SlotPoint, blocks: &[SampleBlock], transmit_at: i64) -> Result<usize, RuError> {
        let mut eaxcs: Vec<EaxcId> = ctx.allocations.iter().map(|a| a.eaxc).collect();
        eaxcs.sort();
        eaxcs.dedup();
        let mut grid = ResourceGrid::new(slot, 1, self.cfg.numerology.nof_prb());
        let mut emitted = 0;
        for eaxc in eaxcs {
            let Some(block) = Self::block_for(blocks, eaxc.ru_port as usize) else {
                self.counters.ul_samples_discarded += 1;
                continue;
            };
            if self.ofdm.demodulate_into(block, &mut grid, 0).is_err() {
                self.counters.ul_samples_discarded += 1;
                continue;
            }
            for symbol in 0..NOF_SYMBOLS_PER_SLOT as u8 {
                let sections: Vec<USection> = ctx
                    .allocations
                    .iter()
                    .filter(|a| a.eaxc == eaxc && a.covers_symbol(symbol))
                    .map(|a| USection {
                        section_id: a.section_id,
                        rb: false,
                        sym_inc: false,
                        start_prb: a.start_prb,
                        num_prb: prb_field(a.num_prb, a.start_prb, self.cfg.numerology.nof_prb()),
                        comp: ctx.comp,
                        prbs: (a.start_prb..a.start_prb + a.num_prb)
                            .map(|p| compress(&grid_block(grid.prb(symbol as usize, 0, p as usize)), ctx.comp))
                            .collect(),
                    })
                    .collect();
                if sections.is_empty() {
                    continue;
                }
                let msg = UPlaneMessage { app: Self::ul_app(slot, symbol, 0), sections };
                let seq = self.next_seq(eaxc);
                let bytes = self.codec.encode_uplane(&msg, eaxc, seq).expect("UL U-plane from accepted C-plane");
                self.frame_pool.push(transmit_at, bytes);
                emitted += 1;
            }
        }
        Ok(emitted)
    }

    fn emit_prach(&mut self, ctx: &PrachContext, slot: SlotPoint, blocks: &[SampleBlock], transmit_at: i64) -> Result<usize, RuError> {
        let mut emitted = 0;
        for a in &ctx.allocations {
            let Some(block) = Self::block_for(blocks, a.eaxc.ru_port as usize) else {
                self.counters.ul_samples_discarded += 1;
                continue;
            };
            let px = PrachExtractConfig {
                freq_offset_halfscs: ctx.freq_offset_halfscs,
                length_ra: ctx.length_ra,
                start_symbol: a.start_symbol as usize,
                num_symbols: a.num_symbol as usize,
            };
            let rows = match self.ofdm.extract_prach(block, &px) {
                Ok(r) => r,
                Err(_) => {
                    self.counters.ul_samples_discarded += 1;
                    continue;
                }
            };
            let nof_prb_ra = ctx.length_ra.div_ceil(RES_PER_PRB);
            for (i, row) in rows.iter().enumerate() {
                let mut padded = row.clone();
                padded.resize(nof_prb_ra * RES_PER_PRB, Complex64::default());
                let prbs = padded.chunks(RES_PER_PRB).map(|c| compress(&grid_block(c), ctx.comp)).collect();
                let symbol = a.start_symbol + i as u8;
                let msg = UPlaneMessage {
                    app: Self::ul_app(slot, symbol, FILTER_INDEX_PRACH_SHORT),
                    sections: vec![USection {
                        section_id: a.section_id,
                        rb: false,
                        sym_inc: false,
                        start_prb: a.start_prb,
                        num_prb: nof_prb_ra as u8,
                        comp: ctx.comp,
                        prbs,
                    }],
                };
                let seq = self.next_seq(a.eaxc);
                let bytes = self.codec.encode_uplane(&msg, a.eaxc, seq).expect("PRACH U-plane from accepted C-plane");
                self.frame_pool.push(transmit_at, bytes);
                emitted += 1;
            }
        }
        Ok(emitted)
    }

    pub fn drain_frame_pool(&mut self, now_us: i64) -> Vec<(i64, Vec<u8>)> {
        self.frame_pool.drain(now_us)
    }

    pub fn next_transmit_at(&self) -> Option<i64> {
        self.frame_pool.next_due()
    }
}

impl<T> ContextRepository<T> {
    /// Removes whatever entry occupies the ring position of `abs` if it
    /// belongs to another slot.
    fn take_slot_owner(&mut self, abs: i64) -> Option<(i64, T)> {
        let i = self.index(abs);
        match &self.entries[i] {
            Some((k, _)) if *k != abs => self.entries[i].take(),
            _ => None,
        }
    }
}

fn prb_field(num_prb: u16, start_prb: u16, carrier: u16) -> u8 {
    if num_prb > 255 || (start_prb == 0 && num_prb == carrier && carrier > 255) {
        0
    } else {
        num_prb as u8
    }
}

/// Float grid values to a fixed-point PRB block.
pub fn grid_block(values: &[Complex64]) -> IqBlock {
    let mut b = IqBlock::ZERO;
    for (k, v) in values.iter().enumerate() {
        b.0[2 * k] = to_fixed(v.re);
        b.0[2 * k + 1] = to_fixed(v.im);
    }
    b
}
