//! Virtual-time transport: fronthaul links, the air link to a virtual UE,
//! the event loop joining a DU and an RU, and capture replay/analysis.

mod capture;
mod live;
mod ue;

pub use capture::{
    read_capture, CaptureDirection, CaptureError, CaptureMeta, CaptureReader, CaptureRecord, CaptureWriter,
    CAPTURE_MAGIC, CAPTURE_VERSION,
};
pub use live::{live_udp, LiveOptions, LiveOutcome};
pub use ue::{fill_random, tolerance, DlCheck, UeConfig, UePrach, VirtualUe};

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::delay_profile::{check_window, DuDelayProfile, RuDelayProfile, WindowKind, WindowVerdict};
use crate::du_engine::{DeliveredUl, DuCounters, DuEngine, DuError, DuSchedulerConfig};
use crate::iq_compress::RES_PER_PRB;
use crate::low_phy::{Complex64, LowPhyError, Ofdm, ResourceGrid, SampleBlock, PRACH_SHORT_LRA};
use crate::ofh_codec::{
    CodecConfig, DataDirection, EaxcId, EaxcLayout, OfhCodec, OfhMessage, Plane, SequenceTracker, SequenceVerdict,
    FILTER_INDEX_PRACH_SHORT,
};
use crate::ru_engine::{RuConfig, RuCounters, RuEngine, RuError, RuStream, RxOutcome, RxVerdict};
use crate::timing::{NumerologyConfig, SlotClock, SlotPoint};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation: {0}")]
    Config(String),
    #[error(transparent)]
    Ru(#[from] RuError),
    #[error(transparent)]
    Du(#[from] DuError),
    #[error(transparent)]
    LowPhy(#[from] LowPhyError),
    #[error(transparent)]
    Capture(#[from] CaptureError),
    #[error("socket: {0}")]
    Io(#[from] std::io::Error),
    #[error("event at {at_us} us scheduled behind the clock ({now_us} us)")]
    Causality { at_us: i64, now_us: i64 },
}

/// Extra delay added on top of a link's base delay.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Jitter {
    #[default]
    None,
    /// Drawn uniformly from `[lo, hi]`.
    Uniform { lo: u32, hi: u32 },
    /// Applied in turn, cycling.
    FixedSequence(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinkConfig {
    pub base_delay_us: u32,
    pub jitter: Jitter,
    pub drop_rate: f64,
}

impl LinkConfig {
    pub fn fixed(delay_us: u32) -> Self {
        Self { base_delay_us: delay_us, ..Self::default() }
    }

    /// Delay spread uniformly over `[min_us, max_us]`.
    pub fn uniform(min_us: u32, max_us: u32) -> Self {
        Self {
            base_delay_us: min_us,
            jitter: Jitter::Uniform { lo: 0, hi: max_us.saturating_sub(min_us) },
            drop_rate: 0.0,
        }
    }

    /// Smallest and largest delay this link can produce.
    pub fn bounds(&self) -> (u32, u32) {
        let (lo, hi) = match &self.jitter {
            Jitter::None => (0, 0),
            Jitter::Uniform { lo, hi } => (*lo, *hi),
            Jitter::FixedSequence(s) => (s.iter().copied().min().unwrap_or(0), s.iter().copied().max().unwrap_or(0)),
        };
        (self.base_delay_us + lo, self.base_delay_us + hi)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        match &self.jitter {
            Jitter::Uniform { lo, hi } if lo > hi => {
                return Err(SimError::Config(format!("jitter range [{lo}, {hi}] is empty")));
            }
            Jitter::FixedSequence(s) if s.is_empty() => {
                return Err(SimError::Config("jitter sequence is empty".into()));
            }
            _ => {}
        }
        if !(0.0..=1.0).contains(&self.drop_rate) {
            return Err(SimError::Config(format!("drop rate {} outside [0, 1]", self.drop_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub frames: u64,
    pub dropped: u64,
    pub min_delay_us: Option<u32>,
    pub max_delay_us: Option<u32>,
}

/// One direction of the fronthaul.
///
/// The link behaves like a single path and never reorders: a frame whose
/// drawn delay would overtake its predecessor is held behind it.
#[derive(Debug, Clone)]
pub struct LinkModel {
    cfg: LinkConfig,
    rng: ChaCha8Rng,
    next: usize,
    last_arrival: Option<i64>,
    stats: LinkStats,
}

impl LinkModel {
    pub fn new(cfg: LinkConfig, seed: u64) -> Result<Self, SimError> {
        cfg.validate()?;
        Ok(Self { cfg, rng: ChaCha8Rng::seed_from_u64(seed), next: 0, last_arrival: None, stats: LinkStats::default() })
    }

    pub fn config(&self) -> &LinkConfig {
        &self.cfg
    }

    fn draw(&mut self) -> Option<u32> {
        self.stats.frames += 1;
        if self.cfg.drop_rate > 0.0 && self.rng.gen::<f64>() < self.cfg.drop_rate {
            self.stats.dropped += 1;
            return None;
        }
        let extra = match &self.cfg.jitter {
            Jitter::None => 0,
            Jitter::Uniform { lo, hi } => self.rng.gen_range(*lo..=*hi),
            Jitter::FixedSequence(s) => {
                let v = s[self.next % s.len()];
                self.next += 1;
                v
            }
        };
        Some(self.cfg.base_delay_us + extra)
    }

    fn observe(&mut self, d: u32) {
        self.stats.min_delay_us = Some(self.stats.min_delay_us.map_or(d, |m| m.min(d)));
        self.stats.max_delay_us = Some(self.stats.max_delay_us.map_or(d, |m| m.max(d)));
    }

    /// Raw delay draw, or `None` if the link loses the frame.
    pub fn sample(&mut self) -> Option<u32> {
        let d = self.draw()?;
        self.observe(d);
        Some(d)
    }

    /// Arrival time of a frame sent at `sent_us`, or `None` if lost. Calls
    /// must come in send order.
    pub fn transmit(&mut self, sent_us: i64) -> Option<i64> {
        let d = self.draw()?;
        let at = (sent_us + d as i64).max(self.last_arrival.unwrap_or(i64::MIN));
        self.last_arrival = Some(at);
        self.observe((at - sent_us) as u32);
        Some(at)
    }

    pub fn stats(&self) -> LinkStats {
        self.stats
    }
}

struct Pending<T> {
    at_us: i64,
    priority: u8,
    seq: u64,
    payload: T,
}

impl<T> Pending<T> {
    fn key(&self) -> (i64, u8, u64) {
        (self.at_us, self.priority, self.seq)
    }
}

impl<T> PartialEq for Pending<T> {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl<T> Eq for Pending<T> {}

impl<T> PartialOrd for Pending<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Pending<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

/// Virtual clock plus pending events.
///
/// Events pop in `(at, priority, insertion)` order; lower priority values go
/// first at equal times. Scheduling behind the clock is an error.
pub struct EventQueue<T> {
    heap: BinaryHeap<Pending<T>>,
    now_us: i64,
    seq: u64,
}

impl<T> std::fmt::Debug for EventQueue<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventQueue").field("now_us", &self.now_us).field("pending", &self.heap.len()).finish()
    }
}

impl<T> EventQueue<T> {
    pub fn new(start_us: i64) -> Self {
        Self { heap: BinaryHeap::new(), now_us: start_us, seq: 0 }
    }

    pub fn now_us(&self) -> i64 {
        self.now_us
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn push(&mut self, at_us: i64, priority: u8, payload: T) -> Result<(), SimError> {
        if at_us < self.now_us {
            return Err(SimError::Causality { at_us, now_us: self.now_us });
        }
        self.heap.push(Pending { at_us, priority, seq: self.seq, payload });
        self.seq += 1;
        Ok(())
    }

    /// Advances the clock to the next event and returns it.
    pub fn pop(&mut self) -> Option<(i64, T)> {
        let p = self.heap.pop()?;
        self.now_us = p.at_us;
        Some((p.at_us, p.payload))
    }
}

// DU work first so that zero-delay frames still precede a boundary at the
// same instant; frames arriving exactly at a boundary go before it.
const PRIO_SCHEDULE: u8 = 0;
const PRIO_FRAME: u8 = 1;
const PRIO_BOUNDARY: u8 = 2;
const PRIO_AIR: u8 = 3;
const PRIO_DRAIN: u8 = 4;

const DEFAULT_MAX_ASSERTIONS: usize = 64;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub ru: RuConfig,
    pub du: DuSchedulerConfig,
    pub dl_link: LinkConfig,
    pub ul_link: LinkConfig,
    pub n_frames: u32,
    pub seed: u64,
    pub ue: UeConfig,
    /// Assertion messages kept in the log; the count is always exact.
    pub max_assertions: usize,
}

impl SimConfig {
    pub fn new(ru: RuConfig, du: DuSchedulerConfig, n_frames: u32, seed: u64) -> Self {
        Self {
            ru,
            du,
            dl_link: LinkConfig::default(),
            ul_link: LinkConfig::default(),
            n_frames,
            seed,
            ue: UeConfig::default(),
            max_assertions: DEFAULT_MAX_ASSERTIONS,
        }
    }

    pub fn n_slots(&self) -> i64 {
        self.n_frames as i64 * 10 * self.ru.numerology.slots_per_subframe() as i64
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.ru.validate()?;
        self.du.validate()?;
        self.dl_link.validate()?;
        self.ul_link.validate()?;
        if self.n_frames == 0 {
            return Err(SimError::Config("n_frames must be positive".into()));
        }
        if self.ru.numerology != self.du.numerology {
            return Err(SimError::Config("RU and DU numerologies differ".into()));
        }
        if self.ru.clock.anchor() != self.du.clock.anchor() {
            return Err(SimError::Config("RU and DU clocks use different anchors".into()));
        }
        if self.ru.codec != self.du.codec {
            return Err(SimError::Config("RU and DU codec settings differ".into()));
        }
        for e in &self.du.eaxcs {
            if e.ru_port as usize >= self.ru.nof_ports {
                return Err(SimError::Config(format!("eAxC {e:?} addresses a port the RU lacks")));
            }
        }
        if let Some(p) = &self.du.prach {
            if p.freq_offset_halfscs % 2 != 0 {
                return Err(SimError::Config("PRACH offset must be a whole number of subcarriers".into()));
            }
        }
        Ok(())
    }

    pub fn capture_meta(&self) -> CaptureMeta {
        let l = self.ru.codec.layout;
        CaptureMeta {
            mu: self.ru.numerology.mu(),
            sampling_rate_hz: self.ru.numerology.sampling_rate_hz(),
            nof_prb: self.ru.numerology.nof_prb(),
            nof_ports: self.ru.nof_ports,
            eaxc_layout: [l.du_port_bits, l.band_sector_bits, l.cc_bits, l.ru_port_bits],
            anchor_system_slot: self.ru.clock.anchor().system_slot(),
            ru_t0_us: self.ru.clock.t0_us(),
            du_t0_us: self.du.clock.t0_us(),
            lowphy_lead_slots: self.ru.lowphy_lead_slots,
            ta3_tx_point_us: self.ru.ta3_tx_point_us,
            processing_latency_us: self.ru.processing_latency_us,
            repo_capacity: self.ru.repo_capacity,
            first_boundary: -(self.ru.lowphy_lead_slots as i64),
            last_boundary: self.n_slots(),
            ru_profile: self.ru.profile,
            du_profile: self.du.profile,
        }
    }
}

impl CaptureMeta {
    fn numerology(&self) -> Result<NumerologyConfig, SimError> {
        NumerologyConfig::new(self.mu, self.sampling_rate_hz, self.nof_prb).map_err(|e| CaptureError::Meta(e.to_string()).into())
    }

    fn codec(&self) -> Result<CodecConfig, SimError> {
        let [a, b, c, d] = self.eaxc_layout;
        let layout = EaxcLayout::new(a, b, c, d).map_err(|e| CaptureError::Meta(e.to_string()))?;
        Ok(CodecConfig { layout, mu: self.mu, nof_prb: self.nof_prb })
    }

    fn clock(&self, t0_us: i64) -> SlotClock {
        SlotClock::new(SlotPoint::from_system_slot(self.mu, self.anchor_system_slot as u64), t0_us)
    }

    /// RU configuration of the recorded run, optionally with another profile.
    /// Under another profile the UL transmit point moves to that profile's
    /// Ta3 midpoint; replay never transmits.
    pub fn ru_config(&self, profile: Option<RuDelayProfile>) -> Result<RuConfig, SimError> {
        let mut cfg = RuConfig::new(self.numerology()?, profile.unwrap_or(self.ru_profile), self.clock(self.ru_t0_us), self.nof_ports);
        cfg.codec = self.codec()?;
        cfg.lowphy_lead_slots = self.lowphy_lead_slots;
        cfg.ta3_tx_point_us = match profile {
            Some(p) if p != self.ru_profile => p.ta3_midpoint(),
            _ => self.ta3_tx_point_us,
        };
        cfg.processing_latency_us = self.processing_latency_us;
        cfg.repo_capacity = cfg.repo_capacity.max(self.repo_capacity);
        Ok(cfg)
    }
}

/// What was planned for one slot and what the RU actually did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotRecord {
    pub abs: i64,
    pub slot: SlotPoint,
    pub planned_dl: bool,
    pub planned_ul: bool,
    pub planned_prach: bool,
    pub ru_dl_modulated: bool,
    pub ru_ul_emitted: bool,
    pub ru_prach_emitted: bool,
    /// Energy of the DL samples the UE received.
    pub ue_dl_energy: f64,
}

impl SlotRecord {
    pub fn directions_match(&self) -> bool {
        self.planned_dl == self.ru_dl_modulated
            && self.planned_ul == self.ru_ul_emitted
            && self.planned_prach == self.ru_prach_emitted
    }
}

/// One PRACH symbol as delivered to the DU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrachObservation {
    pub abs: i64,
    pub eaxc: EaxcId,
    pub symbol: u8,
    pub filter_index: u8,
    /// Values carried, including zero padding up to whole PRBs.
    pub nof_values: usize,
    /// Strongest of the first `PRACH_SHORT_LRA` bins.
    pub peak_bin: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntegrityReport {
    pub dl_slots_checked: u64,
    pub dl_res_checked: u64,
    pub dl_res_failed: u64,
    pub dl_max_error: f64,
    pub ul_res_checked: u64,
    pub ul_res_failed: u64,
    pub ul_max_error: f64,
    /// Delivered fragments whose injected grid was no longer known.
    pub ul_unverified: u64,
    pub prach_symbols_checked: u64,
    pub prach_bins_failed: u64,
    pub prach_tone_misses: u64,
    pub ta3_checked: u64,
    pub ta3_violations: u64,
    pub direction_mismatches: u64,
    /// Acquired minus released minus held; nonzero means a leak.
    pub rg_imbalance: i64,
}

impl IntegrityReport {
    pub fn passed(&self) -> bool {
        self.dl_res_failed == 0
            && self.ul_res_failed == 0
            && self.ul_unverified == 0
            && self.prach_bins_failed == 0
            && self.prach_tone_misses == 0
            && self.ta3_violations == 0
            && self.direction_mismatches == 0
            && self.rg_imbalance == 0
    }

    pub fn rows(&self) -> Vec<(&'static str, String)> {
        vec![
            ("dl_slots_checked", self.dl_slots_checked.to_string()),
            ("dl_res_checked", self.dl_res_checked.to_string()),
            ("dl_res_failed", self.dl_res_failed.to_string()),
            ("dl_max_error", format!("{:.9}", self.dl_max_error)),
            ("ul_res_checked", self.ul_res_checked.to_string()),
            ("ul_res_failed", self.ul_res_failed.to_string()),
            ("ul_max_error", format!("{:.9}", self.ul_max_error)),
            ("ul_unverified", self.ul_unverified.to_string()),
            ("prach_symbols_checked", self.prach_symbols_checked.to_string()),
            ("prach_bins_failed", self.prach_bins_failed.to_string()),
            ("prach_tone_misses", self.prach_tone_misses.to_string()),
            ("ta3_checked", self.ta3_checked.to_string()),
            ("ta3_violations", self.ta3_violations.to_string()),
            ("direction_mismatches", self.direction_mismatches.to_string()),
            ("rg_imbalance", self.rg_imbalance.to_string()),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub ru: RuCounters,
    pub du: DuCounters,
    pub dl_link: LinkStats,
    pub ul_link: LinkStats,
    /// DL frames lost on the link, per stream.
    pub dl_drops: BTreeMap<RuStream, u64>,
    pub slots: Vec<SlotRecord>,
    pub prach: Vec<PrachObservation>,
    pub integrity: IntegrityReport,
    pub assertions: Vec<String>,
    pub assertion_count: u64,
    pub end_time_us: i64,
}

impl SimOutcome {
    pub fn dl_sent(&self, stream: RuStream) -> u64 {
        self.du.sent(stream)
    }
}

enum Event {
    DuSend { stream: RuStream, bytes: Vec<u8> },
    FrameToRu(Vec<u8>),
    FrameToDu(Vec<u8>),
    RuBoundary(i64),
    DuSchedule(i64),
    AirUl(i64),
    AirDl { abs: i64, blocks: Vec<SampleBlock> },
    PoolDrain,
}

/// Runs a scenario to completion in virtual time.
///
/// When `capture` is given, every delivered frame is recorded at its
/// arrival time, preceded by a metadata record.
pub fn run(cfg: &SimConfig, capture: Option<&mut dyn Write>) -> Result<SimOutcome, SimError> {
    cfg.validate()?;
    let mut sim = Simulation::new(cfg, capture)?;
    sim.execute()?;
    sim.finish()
}

struct Simulation<'a, 'w> {
    cfg: &'a SimConfig,
    ru: RuEngine,
    du: DuEngine,
    ue: VirtualUe,
    dl_link: LinkModel,
    ul_link: LinkModel,
    grid_rng: ChaCha8Rng,
    queue: EventQueue<Event>,
    capture: Option<CaptureWriter<&'w mut dyn Write>>,
    audit_codec: OfhCodec,
    n_slots: i64,
    ul_horizon: i64,
    prach_first_sc: i64,
    dl_sources: BTreeMap<i64, ResourceGrid>,
    channel: BTreeMap<i64, Vec<SampleBlock>>,
    drains: BTreeSet<i64>,
    slots: Vec<SlotRecord>,
    prach: Vec<PrachObservation>,
    integrity: IntegrityReport,
    dl_drops: BTreeMap<RuStream, u64>,
    assertions: Vec<String>,
    assertion_count: u64,
}

impl<'a, 'w> Simulation<'a, 'w> {
    fn new(cfg: &'a SimConfig, capture: Option<&'w mut dyn Write>) -> Result<Self, SimError> {
        let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (grid_seed, ue_seed, dl_seed, ul_seed): (u64, u64, u64, u64) = (master.gen(), master.gen(), master.gen(), master.gen());
        let ru = RuEngine::new(cfg.ru.clone())?;
        let du = DuEngine::new(cfg.du.clone())?;
        let ue = VirtualUe::new(cfg.ue, Ofdm::new(&cfg.ru.numerology), cfg.ru.nof_ports, ue_seed);
        let capture = match capture {
            Some(w) => {
                let mut w = CaptureWriter::new(w)?;
                w.write_meta(&cfg.capture_meta())?;
                Some(w)
            }
            None => None,
        };
        let n_slots = cfg.n_slots();
        let slot_us = cfg.ru.numerology.slot_us();
        let (_, ul_max) = cfg.ul_link.bounds();
        let reach = (cfg.du.profile.ta4_max as i64).max(cfg.ru.profile.ta3_max as i64 + ul_max as i64);
        let nsc = cfg.ru.numerology.nof_subcarriers() as i64;
        let prach_first_sc = cfg.du.prach.as_ref().map_or(0, |p| (p.freq_offset_halfscs / 2) as i64 + nsc / 2);
        let slots = (0..n_slots)
            .map(|abs| {
                let plan = du.plan(abs);
                SlotRecord {
                    abs,
                    slot: plan.slot,
                    planned_dl: false,
                    planned_ul: false,
                    planned_prach: false,
                    ru_dl_modulated: false,
                    ru_ul_emitted: false,
                    ru_prach_emitted: false,
                    ue_dl_energy: 0.0,
                }
            })
            .collect();
        Ok(Self {
            cfg,
            ru,
            du,
            ue,
            dl_link: LinkModel::new(cfg.dl_link.clone(), dl_seed)?,
            ul_link: LinkModel::new(cfg.ul_link.clone(), ul_seed)?,
            grid_rng: ChaCha8Rng::seed_from_u64(grid_seed),
            queue: EventQueue::new(i64::MIN),
            capture,
            audit_codec: OfhCodec::new(cfg.ru.codec),
            n_slots,
            ul_horizon: (reach + slot_us - 1) / slot_us + 2,
            prach_first_sc,
            dl_sources: BTreeMap::new(),
            channel: BTreeMap::new(),
            drains: BTreeSet::new(),
            slots,
            prach: Vec::new(),
            integrity: IntegrityReport::default(),
            dl_drops: RuStream::ALL.iter().map(|&s| (s, 0)).collect(),
            assertions: Vec::new(),
            assertion_count: 0,
        })
    }

    fn assert_fail(&mut self, msg: String) {
        self.assertion_count += 1;
        if self.assertions.len() < self.cfg.max_assertions {
            self.assertions.push(msg);
        }
    }

    fn record(&mut self, abs: i64) -> Option<&mut SlotRecord> {
        if (0..self.n_slots).contains(&abs) {
            Some(&mut self.slots[abs as usize])
        } else {
            None
        }
    }

    fn execute(&mut self) -> Result<(), SimError> {
        let ru_clock = self.cfg.ru.clock;
        let lead = self.cfg.ru.lowphy_lead_slots as i64;
        for x in -lead..=self.n_slots {
            self.queue.push(ru_clock.ota_us(x), PRIO_BOUNDARY, Event::RuBoundary(x))?;
        }
        for abs in 0..self.n_slots {
            self.queue.push(self.du.schedule_time(abs), PRIO_SCHEDULE, Event::DuSchedule(abs))?;
            if self.du.plan(abs).ul {
                self.queue.push(ru_clock.ota_us(abs), PRIO_AIR, Event::AirUl(abs))?;
            }
        }
        while let Some((now, ev)) = self.queue.pop() {
            match ev {
                Event::DuSend { stream, bytes } => match self.dl_link.transmit(now) {
                    Some(at) => self.queue.push(at, PRIO_FRAME, Event::FrameToRu(bytes))?,
                    None => *self.dl_drops.entry(stream).or_default() += 1,
                },
                Event::FrameToRu(bytes) => {
                    if let Some(c) = self.capture.as_mut() {
                        c.write(CaptureDirection::ToRu, now, &bytes)?;
                    }
                    self.ru.on_frame(&bytes, now);
                }
                Event::FrameToDu(bytes) => {
                    if let Some(c) = self.capture.as_mut() {
                        c.write(CaptureDirection::ToDu, now, &bytes)?;
                    }
                    self.du.on_uplink_frame(&bytes, now);
                    for d in self.du.take_delivered() {
                        self.check_ul(&d);
                    }
                }
                Event::RuBoundary(x) => self.ru_boundary(x, now)?,
                Event::DuSchedule(abs) => self.du_schedule(abs, now)?,
                Event::AirUl(abs) => self.air_ul(abs)?,
                Event::AirDl { abs, blocks } => self.air_dl(abs, &blocks)?,
                Event::PoolDrain => {
                    self.drains.remove(&now);
                }
            }
            self.drain(now)?;
        }
        if let Some(c) = self.capture.as_mut() {
            c.flush()?;
        }
        Ok(())
    }

    fn ru_boundary(&mut self, x: i64, now: i64) -> Result<(), SimError> {
        let samples = self.channel.remove(&(x - 1));
        let slot = self.cfg.ru.clock.slot_point(x);
        let out = self.ru.on_slot_boundary(slot, now, samples.as_deref())?;
        let dl_abs = x + self.cfg.ru.lowphy_lead_slots as i64;
        if let Some(r) = self.record(x - 1) {
            r.ru_ul_emitted = out.ul_frames > 0;
            r.ru_prach_emitted = out.prach_frames > 0;
        }
        if let Some(r) = self.record(dl_abs) {
            r.ru_dl_modulated = out.dl_modulated;
            self.queue.push(out.dl_ota_us, PRIO_AIR, Event::AirDl { abs: dl_abs, blocks: out.dl_blocks })?;
        }
        Ok(())
    }

    fn du_schedule(&mut self, abs: i64, now: i64) -> Result<(), SimError> {
        let plan = self.du.plan(abs);
        let grid = if plan.dl {
            let mut g = ResourceGrid::new(plan.slot, self.cfg.ru.nof_ports, self.cfg.ru.numerology.nof_prb());
            fill_random(&mut g, self.cfg.ue.level, &mut self.grid_rng);
            Some(g)
        } else {
            None
        };
        let emissions = self.du.schedule_slot(abs, now, grid.as_ref())?;
        if let Some(g) = grid {
            self.dl_sources.insert(abs, g);
        }
        if let Some(r) = self.record(abs) {
            r.planned_dl = plan.dl;
            r.planned_ul = plan.ul;
            r.planned_prach = plan.prach;
        }
        for e in emissions {
            self.queue.push(e.at_us, PRIO_SCHEDULE, Event::DuSend { stream: e.stream, bytes: e.bytes })?;
        }
        Ok(())
    }

    fn air_ul(&mut self, abs: i64) -> Result<(), SimError> {
        let prach = self.du.plan(abs).prach.then(|| {
            let p = self.cfg.du.prach.as_ref().expect("PRACH plan implies config");
            UePrach {
                first_subcarrier: self.prach_first_sc,
                start_symbol: p.start_symbol as usize,
                num_symbols: p.num_symbols as usize,
            }
        });
        let slot = self.cfg.ru.clock.slot_point(abs);
        let blocks = self.ue.transmit(abs, slot, prach)?;
        self.channel.insert(abs, blocks);
        self.ue.prune_before(abs - self.ul_horizon);
        Ok(())
    }

    fn air_dl(&mut self, abs: i64, blocks: &[SampleBlock]) -> Result<(), SimError> {
        let source = self.dl_sources.remove(&abs);
        let check = self.ue.receive(abs, blocks, source.as_ref(), self.cfg.du.comp)?;
        let energy = self.ue.dl_log().last().map_or(0.0, |&(_, e)| e);
        if let Some(r) = self.record(abs) {
            r.ue_dl_energy = energy;
        }
        if let Some(c) = check {
            let i = &mut self.integrity;
            i.dl_slots_checked += 1;
            i.dl_res_checked += c.checked;
            i.dl_res_failed += c.failed;
            i.dl_max_error = i.dl_max_error.max(c.max_error);
            if let Some((port, sym, k)) = c.first_failure {
                self.assert_fail(format!(
                    "slot {abs}: {} DL REs outside the BFP bound (first: port {port} symbol {sym} subcarrier {k})",
                    c.failed
                ));
            }
        }
        Ok(())
    }

    fn drain(&mut self, now: i64) -> Result<(), SimError> {
        for (_, bytes) in self.ru.drain_frame_pool(now) {
            self.audit_ta3(&bytes, now);
            if let Some(at) = self.ul_link.transmit(now) {
                self.queue.push(at, PRIO_FRAME, Event::FrameToDu(bytes))?;
            }
        }
        if let Some(t) = self.ru.next_transmit_at() {
            if self.drains.insert(t) {
                self.queue.push(t, PRIO_DRAIN, Event::PoolDrain)?;
            }
        }
        Ok(())
    }

    fn audit_ta3(&mut self, bytes: &[u8], sent_us: i64) {
        self.integrity.ta3_checked += 1;
        let clock = self.cfg.ru.clock;
        let verdict = self.audit_codec.decode(bytes).ok().map(|f| {
            let app = *f.message.app();
            let abs = clock.resolve_frame_id(clock.abs_at(sent_us), app.frame_id, app.subframe_id, app.slot_id);
            check_window(WindowKind::UPlaneUlTx, sent_us, clock.ota_us(abs), &self.cfg.ru.profile).expect("RU Ta3 window")
        });
        if verdict != Some(WindowVerdict::OnTime) {
            self.integrity.ta3_violations += 1;
            self.assert_fail(format!("UL frame sent at {sent_us} us: Ta3 verdict {verdict:?}"));
        }
    }

    fn check_ul(&mut self, d: &DeliveredUl) {
        let comp = self.cfg.du.comp;
        let port = d.eaxc.ru_port as usize;
        let Some(grid) = self.ue.injected(d.abs) else {
            self.integrity.ul_unverified += 1;
            self.assert_fail(format!("slot {}: delivered UL data for an unknown UE slot", d.abs));
            return;
        };
        let symbol = d.symbol as usize;
        let mut failed = 0u64;
        let mut checked = 0u64;
        let mut max_err: f64 = 0.0;
        let mut cmp = |got: Complex64, want: Complex64, e: u8| {
            let err = (got.re - want.re).abs().max((got.im - want.im).abs());
            max_err = max_err.max(err);
            checked += 1;
            if err > tolerance(comp, e) {
                failed += 1;
            }
        };
        if d.filter_index == FILTER_INDEX_PRACH_SHORT {
            let nsc = grid.nof_subcarriers() as i64;
            let values: Vec<(Complex64, u8)> = d
                .sections
                .iter()
                .flat_map(|s| s.values.iter().enumerate().map(move |(i, &v)| (v, s.exponents[i / RES_PER_PRB])))
                .collect();
            for (i, &(got, e)) in values.iter().enumerate() {
                let k = self.prach_first_sc + i as i64;
                let want = if i < PRACH_SHORT_LRA && (0..nsc).contains(&k) {
                    grid.get(symbol, k as usize, port)
                } else {
                    Complex64::default()
                };
                cmp(got, want, e);
            }
            let peak_bin = values
                .iter()
                .take(PRACH_SHORT_LRA)
                .enumerate()
                .fold((0, -1.0), |best, (i, (v, _))| if v.norm_sqr() > best.1 { (i, v.norm_sqr()) } else { best })
                .0;
            self.prach.push(PrachObservation {
                abs: d.abs,
                eaxc: d.eaxc,
                symbol: d.symbol,
                filter_index: d.filter_index,
                nof_values: values.len(),
                peak_bin,
            });
            self.integrity.prach_symbols_checked += 1;
            self.integrity.prach_bins_failed += failed;
            let tone = self.prach_first_sc + self.cfg.ue.prach_tone_bin as i64;
            if (0..nsc).contains(&tone) && peak_bin != self.cfg.ue.prach_tone_bin {
                self.integrity.prach_tone_misses += 1;
                self.assert_fail(format!("slot {}: PRACH peak at bin {peak_bin}, tone sent at {}", d.abs, self.cfg.ue.prach_tone_bin));
            }
        } else {
            for s in &d.sections {
                for (j, &e) in s.exponents.iter().enumerate() {
                    let want = grid.prb(symbol, port, s.start_prb as usize + j);
                    for (k, &w) in want.iter().enumerate() {
                        cmp(s.values[j * RES_PER_PRB + k], w, e);
                    }
                }
            }
            self.integrity.ul_res_checked += checked;
            self.integrity.ul_res_failed += failed;
            self.integrity.ul_max_error = self.integrity.ul_max_error.max(max_err);
        }
        if failed > 0 {
            self.assert_fail(format!("slot {} symbol {} eAxC {:?}: {failed} UL values outside the BFP bound", d.abs, d.symbol, d.eaxc));
        }
    }

    fn finish(mut self) -> Result<SimOutcome, SimError> {
        self.integrity.direction_mismatches = self.slots.iter().filter(|r| !r.directions_match()).count() as u64;
        let pool = self.ru.rg_pool();
        self.integrity.rg_imbalance = pool.acquired() as i64 - pool.released() as i64 - self.ru.rg_held() as i64;
        Ok(SimOutcome {
            ru: self.ru.snapshot_counters(),
            du: self.du.counters(),
            dl_link: self.dl_link.stats(),
            ul_link: self.ul_link.stats(),
            dl_drops: self.dl_drops,
            slots: self.slots,
            prach: self.prach,
            integrity: self.integrity,
            assertions: self.assertions,
            assertion_count: self.assertion_count,
            end_time_us: self.queue.now_us(),
        })
    }
}

/// Re-feeds the DU-to-RU frames of a capture into a fresh RU and returns
/// its reception counters. `ru_profile` overrides the recorded profile.
pub fn replay<R: Read>(reader: R, ru_profile: Option<RuDelayProfile>) -> Result<RuCounters, SimError> {
    Ok(replay_frames(reader, ru_profile)?.0)
}

fn replay_frames<R: Read>(reader: R, ru_profile: Option<RuDelayProfile>) -> Result<(RuCounters, Vec<RxOutcome>), SimError> {
    let mut records = CaptureReader::new(reader)?;
    let meta = match records.next() {
        None => return Ok((RuCounters::default(), Vec::new())),
        Some(Err(e)) => return Err(e.into()),
        Some(Ok(r)) if r.direction == CaptureDirection::Meta => CaptureMeta::from_bytes(&r.bytes)?,
        Some(Ok(_)) => return Err(CaptureError::Meta("first record is not the metadata record".into()).into()),
    };
    let mut ru = RuEngine::new(meta.ru_config(ru_profile)?)?;
    let frames = records.filter_map(|r| match r {
        Ok(r) if r.direction == CaptureDirection::ToRu => Some(Ok((r.time_us, r.bytes))),
        Ok(_) => None,
        Err(e) => Some(Err(e.into())),
    });
    let outcomes = feed_ru(&mut ru, meta.first_boundary, meta.last_boundary, frames)?;
    Ok((ru.snapshot_counters().reception(), outcomes))
}

/// Drives boundaries `first..=last` and time-ordered frames through an RU.
/// A frame arriving exactly at a boundary goes first, as in `run`.
fn feed_ru(
    ru: &mut RuEngine,
    first: i64,
    last: i64,
    frames: impl Iterator<Item = Result<(i64, Vec<u8>), SimError>>,
) -> Result<Vec<RxOutcome>, SimError> {
    let clock = ru.config().clock;
    let mut outcomes = Vec::new();
    let mut next = first;
    for f in frames {
        let (t, bytes) = f?;
        while next <= last && clock.ota_us(next) < t {
            ru.on_slot_boundary(clock.slot_point(next), clock.ota_us(next), None)?;
            next += 1;
        }
        outcomes.push(ru.on_frame(&bytes, t));
    }
    while next <= last {
        ru.on_slot_boundary(clock.slot_point(next), clock.ota_us(next), None)?;
        next += 1;
    }
    Ok(outcomes)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UlArrivals {
    pub on_time: u64,
    pub early: u64,
    pub late: u64,
    pub decode_error: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SequenceSummary {
    pub frames: u64,
    pub gaps: u64,
    pub duplicates: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EaxcSummary {
    pub to_ru: u64,
    pub to_du: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameClass {
    OnTime,
    Early,
    Late,
    NoContext,
    DecodeError,
}

impl FrameClass {
    pub fn name(self) -> &'static str {
        match self {
            FrameClass::OnTime => "on_time",
            FrameClass::Early => "early",
            FrameClass::Late => "late",
            FrameClass::NoContext => "no_context",
            FrameClass::DecodeError => "decode_error",
        }
    }
}

impl From<WindowVerdict> for FrameClass {
    fn from(v: WindowVerdict) -> Self {
        match v {
            WindowVerdict::OnTime => FrameClass::OnTime,
            WindowVerdict::Early => FrameClass::Early,
            WindowVerdict::Late => FrameClass::Late,
        }
    }
}

/// Window classification of one captured frame, by the receiving side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameVerdict {
    pub time_us: i64,
    pub direction: CaptureDirection,
    pub eaxc: Option<EaxcId>,
    pub class: FrameClass,
}

/// Offline view of a capture.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Analysis {
    pub records: u64,
    /// RU reception counters from a replay.
    pub ru: RuCounters,
    /// RU-to-DU frames classified against the DU reception window.
    pub ul: UlArrivals,
    pub sequences: BTreeMap<(EaxcId, DataDirection, Plane), SequenceSummary>,
    pub per_eaxc: BTreeMap<EaxcId, EaxcSummary>,
    /// One entry per frame record, in capture order.
    pub frames: Vec<FrameVerdict>,
}

/// Replays and classifies a whole capture. Profiles default to the
/// recorded ones.
pub fn analyze(bytes: &[u8], ru_profile: Option<RuDelayProfile>, du_profile: Option<DuDelayProfile>) -> Result<Analysis, SimError> {
    let records = read_capture(bytes)?;
    let mut out = Analysis::default();
    let Some(first) = records.first() else {
        return Ok(out);
    };
    if first.direction != CaptureDirection::Meta {
        return Err(CaptureError::Meta("first record is not the metadata record".into()).into());
    }
    let meta = CaptureMeta::from_bytes(&first.bytes)?;
    let (ru, ru_outcomes) = replay_frames(bytes, ru_profile)?;
    out.ru = ru;
    let mut ru_outcomes = ru_outcomes.into_iter();
    let codec = OfhCodec::new(meta.codec()?);
    let du_clock = meta.clock(meta.du_t0_us);
    let du_profile = du_profile.unwrap_or(meta.du_profile);
    let mut tracker = SequenceTracker::new();
    for rec in &records[1..] {
        out.records += 1;
        let ru_class = match rec.direction {
            CaptureDirection::ToRu => match ru_outcomes.next() {
                Some(RxOutcome::Accepted { verdict, .. }) => Some(match verdict {
                    RxVerdict::OnTime => FrameClass::OnTime,
                    RxVerdict::Early => FrameClass::Early,
                    RxVerdict::Late => FrameClass::Late,
                    RxVerdict::NoContext => FrameClass::NoContext,
                }),
                _ => Some(FrameClass::DecodeError),
            },
            _ => None,
        };
        let frame = match codec.decode(&rec.bytes) {
            Ok(f) => f,
            Err(_) => {
                if rec.direction == CaptureDirection::ToDu {
                    out.ul.decode_error += 1;
                }
                if rec.direction != CaptureDirection::Meta {
                    out.frames.push(FrameVerdict { time_us: rec.time_us, direction: rec.direction, eaxc: None, class: FrameClass::DecodeError });
                }
                continue;
            }
        };
        let app = *frame.message.app();
        let plane = match frame.message {
            OfhMessage::CPlane(_) => Plane::Control,
            OfhMessage::UPlane(_) => Plane::User,
        };
        let s = out.sequences.entry((frame.eaxc, app.data_direction, plane)).or_default();
        s.frames += 1;
        match tracker.track(frame.eaxc, app.data_direction, plane, frame.seq_id) {
            SequenceVerdict::InOrder => {}
            SequenceVerdict::Gap(n) => s.gaps += n as u64,
            SequenceVerdict::Duplicate => s.duplicates += 1,
        }
        let e = out.per_eaxc.entry(frame.eaxc).or_default();
        e.bytes += rec.bytes.len() as u64;
        match rec.direction {
            CaptureDirection::ToRu => {
                e.to_ru += 1;
                let class = ru_class.unwrap_or(FrameClass::DecodeError);
                out.frames.push(FrameVerdict { time_us: rec.time_us, direction: rec.direction, eaxc: Some(frame.eaxc), class });
            }
            CaptureDirection::ToDu => {
                e.to_du += 1;
                let abs = du_clock.resolve_frame_id(du_clock.abs_at(rec.time_us), app.frame_id, app.subframe_id, app.slot_id);
                let verdict = check_window(WindowKind::UPlaneUlRx, rec.time_us, du_clock.ota_us(abs), &du_profile).expect("DU Ta4 window");
                match verdict {
                    WindowVerdict::OnTime => out.ul.on_time += 1,
                    WindowVerdict::Early => out.ul.early += 1,
                    WindowVerdict::Late => out.ul.late += 1,
                }
                out.frames.push(FrameVerdict { time_us: rec.time_us, direction: rec.direction, eaxc: Some(frame.eaxc), class: verdict.into() });
            }
            CaptureDirection::Meta => {}
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioConfig;
    use proptest::prelude::*;

    fn scenario(text: &str, frames: u32) -> SimConfig {
        let mut c = ScenarioConfig::from_toml(text).unwrap();
        c.n_frames = frames;
        c.build(None).unwrap().sim
    }

    fn dddsu(frames: u32) -> SimConfig {
        scenario(include_str!("../../../../scenarios/tdd_dddsu.scenario"), frames)
    }

    fn captured(cfg: &SimConfig) -> (SimOutcome, Vec<u8>) {
        let mut buf = Vec::new();
        let out = run(cfg, Some(&mut buf)).unwrap();
        (out, buf)
    }

    proptest! {
        #[test]
        fn queue_pops_in_time_priority_insertion_order(events in prop::collection::vec((0i64..50, 0u8..5), 1..200)) {
            let mut q = EventQueue::new(0);
            for (i, &(at, prio)) in events.iter().enumerate() {
                q.push(at, prio, i).unwrap();
            }
            let mut want: Vec<(i64, u8, usize)> = events.iter().enumerate().map(|(i, &(a, p))| (a, p, i)).collect();
            want.sort();
            let mut got = Vec::new();
            while let Some((at, i)) = q.pop() {
                prop_assert_eq!(q.now_us(), at);
                got.push((at, events[i].1, i));
            }
            prop_assert_eq!(got, want);
        }

        #[test]
        fn fifo_link_stays_in_bounds_and_order(
            lo in 0u32..200,
            span in 0u32..200,
            gaps in prop::collection::vec(0i64..100, 1..300),
            seed in any::<u64>(),
        ) {
            let cfg = LinkConfig::uniform(lo, lo + span);
            let mut a = LinkModel::new(cfg.clone(), seed).unwrap();
            let mut b = LinkModel::new(cfg, seed).unwrap();
            let (mut t, mut last) = (0i64, i64::MIN);
            for g in gaps {
                t += g;
                let at = a.transmit(t).unwrap();
                prop_assert_eq!(Some(at), b.transmit(t));
                prop_assert!(at >= last);
                prop_assert!(at - t >= lo as i64 && at - t <= (lo + span) as i64);
                last = at;
            }
            let s = a.stats();
            prop_assert!(s.min_delay_us.unwrap() >= lo && s.max_delay_us.unwrap() <= lo + span);
        }
    }

    #[test]
    fn push_behind_clock_is_rejected() {
        let mut q = EventQueue::new(0);
        q.push(10, 0, ()).unwrap();
        q.pop();
        assert!(matches!(q.push(9, 0, ()), Err(SimError::Causality { at_us: 9, now_us: 10 })));
        q.push(10, 0, ()).unwrap();
    }

    #[test]
    fn fixed_sequence_cycles_and_drops_count() {
        let mut l = LinkModel::new(LinkConfig { base_delay_us: 5, jitter: Jitter::FixedSequence(vec![1, 3]), drop_rate: 0.0 }, 0).unwrap();
        let d: Vec<_> = (0..5).map(|_| l.sample().unwrap()).collect();
        assert_eq!(d, [6, 8, 6, 8, 6]);

        let mut l = LinkModel::new(LinkConfig { drop_rate: 1.0, ..LinkConfig::fixed(3) }, 0).unwrap();
        assert_eq!(l.transmit(0), None);
        assert_eq!(l.stats(), LinkStats { frames: 1, dropped: 1, min_delay_us: None, max_delay_us: None });
    }

    #[test]
    fn link_config_validation() {
        assert!(LinkConfig { jitter: Jitter::Uniform { lo: 3, hi: 2 }, ..LinkConfig::default() }.validate().is_err());
        assert!(LinkConfig { jitter: Jitter::FixedSequence(vec![]), ..LinkConfig::default() }.validate().is_err());
        assert!(LinkConfig { drop_rate: 1.5, ..LinkConfig::default() }.validate().is_err());
        assert_eq!(LinkConfig::uniform(20, 60).bounds(), (20, 60));
    }

    #[test]
    fn one_frame_dddsu_is_clean() {
        let out = run(&dddsu(1), None).unwrap();
        assert!(out.integrity.passed(), "{:?}", out.integrity);
        assert_eq!(out.assertion_count, 0);
        for s in RuStream::ALL {
            let c = out.ru.stream(s);
            assert_eq!(c.on_time, out.du.sent(s), "{s:?}");
            assert_eq!(c.total(), c.on_time);
        }
        assert!(out.slots.iter().all(SlotRecord::directions_match));
        assert!(out.integrity.dl_max_error > 0.0);
    }

    #[test]
    fn capture_is_deterministic_and_replays() {
        let cfg = dddsu(1);
        let (a, cap_a) = captured(&cfg);
        let (_, cap_b) = captured(&cfg);
        assert_eq!(cap_a, cap_b);
        assert_eq!(replay(&cap_a[..], None).unwrap(), a.ru.reception());

        let mut other = cfg.clone();
        other.seed += 1;
        assert_ne!(captured(&other).1, cap_a);
    }

    #[test]
    fn truncated_capture_is_an_error() {
        let (_, cap) = captured(&dddsu(1));
        let cut = &cap[..cap.len() - 3];
        assert!(replay(cut, None).is_err());
        assert!(analyze(cut, None, None).is_err());
    }

    #[test]
    fn analyze_shifted_profile_flags_everything() {
        let (out, cap) = captured(&dddsu(1));
        let base = analyze(&cap, None, None).unwrap();
        assert_eq!(base.ru, out.ru.reception());
        assert_eq!(base.ul.on_time, out.du.ul_on_time);
        assert!(base.sequences.values().all(|s| s.gaps == 0 && s.duplicates == 0));

        // Moving every reception window away from the arrivals, in
        // either direction, flips every frame the same way.
        for (shift, class) in [(1000i64, FrameClass::Late), (-500, FrameClass::Early)] {
            let mut ru = cfg_profile(&cap);
            for f in RuDelayProfile::FIELDS.iter().filter(|f| f.starts_with("t2a")) {
                let v = ru.field_mut(f).unwrap();
                *v = (*v as i64 + shift) as u32;
            }
            let shifted = analyze(&cap, Some(ru), None).unwrap();
            for s in RuStream::ALL {
                let c = shifted.ru.stream(s);
                let n = if class == FrameClass::Late { c.late } else { c.early };
                assert_eq!(n, out.du.sent(s), "{s:?} {shift}");
                assert_eq!(c.total(), n);
            }
            let to_ru = shifted.frames.iter().filter(|f| f.direction == CaptureDirection::ToRu);
            assert!(to_ru.clone().count() > 0 && to_ru.clone().all(|f| f.class == class));
        }
    }

    fn cfg_profile(cap: &[u8]) -> RuDelayProfile {
        let meta = read_capture(cap).unwrap().remove(0);
        CaptureMeta::from_bytes(&meta.bytes).unwrap().ru_profile
    }

    #[test]
    fn jittered_links_keep_sequences_intact() {
        let cfg = scenario(include_str!("../../../../scenarios/tdd_7d1s2u.scenario"), 1);
        let (out, cap) = captured(&cfg);
        assert_eq!(out.du.ul_seq_gaps, 0);
        assert_eq!(out.du.ul_duplicates, 0);
        let (lo, hi) = cfg.dl_link.bounds();
        assert!(out.dl_link.min_delay_us.unwrap() >= lo && out.dl_link.max_delay_us.unwrap() <= hi);
        let a = analyze(&cap, None, None).unwrap();
        assert!(a.sequences.values().all(|s| s.gaps == 0 && s.duplicates == 0));
    }

    #[test]
    fn empty_capture_replays_to_zero() {
        let mut cap = Vec::new();
        CaptureWriter::new(&mut cap).unwrap();
        assert_eq!(replay(&cap[..], None).unwrap(), RuCounters::default());
        assert_eq!(analyze(&cap, None, None).unwrap(), Analysis::default());
    }

    #[test]
    fn live_udp_delivers_every_frame() {
        let cfg = dddsu(1);
        let opts = LiveOptions { slots: 5, ..LiveOptions::default() };
        let out = live_udp(&cfg, &opts, None).unwrap();
        assert!(out.sent > 0);
        assert_eq!(out.received, out.sent);
        let classified: u64 = RuStream::ALL.iter().map(|&s| out.ru.stream(s).total()).sum();
        assert_eq!(classified + out.ru.decode_error, out.received);
    }
}
