//! Numerology, slot points and sample-clock alignment.
//!
//! All quantities here are plain values; nothing holds a clock. Virtual
//! time elsewhere in the crate is integer microseconds, while radio time is
//! an integer count of samples at the configured sampling rate.

use std::fmt;

use thiserror::Error;

/// Frame-number space of the system frame number (SFN).
pub const NOF_SFNS: u32 = 1024;
pub const NOF_SUBFRAMES_PER_FRAME: u32 = 10;
pub const NOF_SYMBOLS_PER_SLOT: usize = 14;
/// Subframes in one hyperframe (10.24 s).
pub const NOF_SUBFRAMES_PER_HYPERFRAME: u64 = (NOF_SFNS * NOF_SUBFRAMES_PER_FRAME) as u64;

/// Reference rate for the 3GPP basic time unit scaled to samples.
const REFERENCE_RATE_HZ: u64 = 30_720_000;
const MAX_MU: u8 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TimingError {
    #[error("numerology mu={0} is not supported (only 0 and 1)")]
    UnsupportedNumerology(u8),
    #[error("sampling rate {0} Hz is not a multiple of 1000")]
    SamplingRateNotKhz(u64),
    #[error("sampling rate {rate_hz} Hz gives a non-integral {what} at mu={mu}")]
    NonIntegralSymbol { rate_hz: u64, mu: u8, what: &'static str },
    #[error("{nof_prb} PRBs ({subcarriers} subcarriers) do not fit an FFT of size {fft_size}")]
    BandwidthExceedsFft { nof_prb: u16, subcarriers: usize, fft_size: usize },
    #[error("invalid numerology: {0}")]
    Inconsistent(String),
    #[error("slot points use different numerologies ({0} vs {1})")]
    MixedNumerology(u8, u8),
    #[error("slot point field out of range: {0}")]
    SlotOutOfRange(String),
    #[error("rx-to-tx delay must be positive")]
    ZeroDelay,
}

/// Carrier numerology and sampling configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumerologyConfig {
    mu: u8,
    sampling_rate_hz: u64,
    nof_prb: u16,
    fft_size: usize,
    symbol_sizes: Vec<u32>,
}

impl NumerologyConfig {
    /// Builds a configuration, deriving the FFT size and the normal-CP
    /// symbol sizes from the numerology and the sampling rate.
    pub fn new(mu: u8, sampling_rate_hz: u64, nof_prb: u16) -> Result<Self, TimingError> {
        let symbol_sizes = symbol_sizes_for(mu, sampling_rate_hz)?;
        let fft_size = (sampling_rate_hz / (scs_khz_for(mu) as u64 * 1000)) as usize;
        Self::from_parts(mu, sampling_rate_hz, nof_prb, fft_size, symbol_sizes)
    }

    /// Builds a configuration from explicit parts and checks every invariant.
    pub fn from_parts(
        mu: u8,
        sampling_rate_hz: u64,
        nof_prb: u16,
        fft_size: usize,
        symbol_sizes: Vec<u32>,
    ) -> Result<Self, TimingError> {
        if mu > MAX_MU {
            return Err(TimingError::UnsupportedNumerology(mu));
        }
        if sampling_rate_hz == 0 || sampling_rate_hz % 1000 != 0 {
            return Err(TimingError::SamplingRateNotKhz(sampling_rate_hz));
        }
        let scs_hz = scs_khz_for(mu) as u64 * 1000;
        if fft_size as u64 * scs_hz != sampling_rate_hz {
            return Err(TimingError::Inconsistent(format!(
                "fft_size {fft_size} x {scs_hz} Hz != {sampling_rate_hz} Hz"
            )));
        }
        let expected_len = (1usize << mu) * NOF_SYMBOLS_PER_SLOT;
        if symbol_sizes.len() != expected_len {
            return Err(TimingError::Inconsistent(format!(
                "{} symbol sizes, expected {expected_len}",
                symbol_sizes.len()
            )));
        }
        let total: u64 = symbol_sizes.iter().map(|&s| s as u64).sum();
        if total != sampling_rate_hz / 1000 {
            return Err(TimingError::Inconsistent(format!(
                "symbol sizes sum to {total}, subframe has {} samples",
                sampling_rate_hz / 1000
            )));
        }
        if symbol_sizes.iter().any(|&s| (s as usize) < fft_size) {
            return Err(TimingError::Inconsistent("symbol shorter than the FFT".into()));
        }
        let subcarriers = 12 * nof_prb as usize;
        if nof_prb == 0 || subcarriers > fft_size {
            return Err(TimingError::BandwidthExceedsFft { nof_prb, subcarriers, fft_size });
        }
        Ok(Self { mu, sampling_rate_hz, nof_prb, fft_size, symbol_sizes })
    }

    pub fn mu(&self) -> u8 {
        self.mu
    }

    pub fn scs_khz(&self) -> u32 {
        scs_khz_for(self.mu)
    }

    pub fn sampling_rate_hz(&self) -> u64 {
        self.sampling_rate_hz
    }

    pub fn nof_prb(&self) -> u16 {
        self.nof_prb
    }

    pub fn nof_subcarriers(&self) -> usize {
        12 * self.nof_prb as usize
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    /// Per-symbol sample counts (CP plus useful part) covering one subframe.
    pub fn symbol_sizes(&self) -> &[u32] {
        &self.symbol_sizes
    }

    pub fn slots_per_subframe(&self) -> u32 {
        1 << self.mu
    }

    pub fn symbols_per_slot(&self) -> usize {
        NOF_SYMBOLS_PER_SLOT
    }

    pub fn samples_per_subframe(&self) -> u64 {
        self.sampling_rate_hz / 1000
    }

    pub fn samples_per_slot(&self) -> u64 {
        self.samples_per_subframe() / self.slots_per_subframe() as u64
    }

    /// Slot duration in microseconds.
    pub fn slot_us(&self) -> i64 {
        slot_duration_us(self.mu)
    }

    /// Symbol sizes of the given slot within its subframe.
    pub fn slot_symbol_sizes(&self, slot_in_subframe: u32) -> &[u32] {
        let start = slot_in_subframe as usize * NOF_SYMBOLS_PER_SLOT;
        &self.symbol_sizes[start..start + NOF_SYMBOLS_PER_SLOT]
    }

    /// Cyclic-prefix length of one symbol of a slot.
    pub fn cp_len(&self, slot_in_subframe: u32, symbol: usize) -> usize {
        self.slot_symbol_sizes(slot_in_subframe)[symbol] as usize - self.fft_size
    }

    pub fn samples_per_hyperframe(&self) -> u64 {
        self.samples_per_subframe() * NOF_SUBFRAMES_PER_HYPERFRAME
    }

    /// Sample timestamp (within the first hyperframe) at which `slot` starts.
    pub fn slot_start(&self, slot: SlotPoint) -> SampleTimestamp {
        SampleTimestamp(slot.system_slot() as u64 * self.samples_per_slot())
    }

    /// Converts virtual microseconds to sample ticks, rounding down.
    pub fn us_to_ticks(&self, us: u64) -> u64 {
        ((us as u128 * self.sampling_rate_hz as u128) / 1_000_000) as u64
    }
}

pub fn scs_khz_for(mu: u8) -> u32 {
    15 << mu
}

/// Slot duration in microseconds: 1000 / 2^mu.
pub fn slot_duration_us(mu: u8) -> i64 {
    1000 >> mu
}

pub fn nof_slots_per_system_frame(mu: u8) -> u32 {
    NOF_SFNS * NOF_SUBFRAMES_PER_FRAME * (1 << mu)
}

/// Normal-CP symbol sizes for one subframe at the given sampling rate.
///
/// The first symbol of each half subframe (index 0 and 7 * 2^mu) carries
/// the long CP of 144 * 2^-mu + 16 basic units; all others carry 144 * 2^-mu.
/// The units scale to samples by `rate / 30.72 MHz`.
pub fn symbol_sizes_for(mu: u8, sampling_rate_hz: u64) -> Result<Vec<u32>, TimingError> {
    if mu > MAX_MU {
        return Err(TimingError::UnsupportedNumerology(mu));
    }
    if sampling_rate_hz == 0 || sampling_rate_hz % 1000 != 0 {
        return Err(TimingError::SamplingRateNotKhz(sampling_rate_hz));
    }
    let scaled = |units: u64, what: &'static str| {
        let num = units * sampling_rate_hz;
        let den = REFERENCE_RATE_HZ << mu;
        if num % den != 0 {
            Err(TimingError::NonIntegralSymbol { rate_hz: sampling_rate_hz, mu, what })
        } else {
            Ok((num / den) as u32)
        }
    };
    let useful = scaled(2048, "useful symbol length")?;
    let cp = scaled(144, "cyclic prefix")?;
    // The long-CP extension is 16 units regardless of mu.
    let extension = scaled(16 << mu, "long cyclic prefix")?;

    let nof_symbols = NOF_SYMBOLS_PER_SLOT << mu;
    let half = nof_symbols / 2;
    let sizes: Vec<u32> = (0..nof_symbols)
        .map(|l| {
            if l % half == 0 {
                useful + cp + extension
            } else {
                useful + cp
            }
        })
        .collect();
    debug_assert_eq!(
        sizes.iter().map(|&s| s as u64).sum::<u64>(),
        sampling_rate_hz / 1000
    );
    Ok(sizes)
}

/// Sample count since the radio epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SampleTimestamp(pub u64);

impl SampleTimestamp {
    pub fn ticks(self) -> u64 {
        self.0
    }

    pub fn advance(self, samples: u64) -> Self {
        SampleTimestamp(self.0.wrapping_add(samples))
    }
}

/// Position in the slot lattice of the 1024-frame system frame space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SlotPoint {
    mu: u8,
    sfn: u16,
    subframe: u8,
    slot: u8,
}

impl SlotPoint {
    pub fn new(mu: u8, sfn: u16, subframe: u8, slot: u8) -> Result<Self, TimingError> {
        if mu > MAX_MU {
            return Err(TimingError::UnsupportedNumerology(mu));
        }
        if sfn as u32 >= NOF_SFNS {
            return Err(TimingError::SlotOutOfRange(format!("sfn {sfn}")));
        }
        if subframe as u32 >= NOF_SUBFRAMES_PER_FRAME {
            return Err(TimingError::SlotOutOfRange(format!("subframe {subframe}")));
        }
        if slot as u32 >= 1 << mu {
            return Err(TimingError::SlotOutOfRange(format!("slot {slot} at mu={mu}")));
        }
        Ok(Self { mu, sfn, subframe, slot })
    }

    /// Builds the slot point whose `system_slot()` is `n mod nof_slots_per_system_frame`.
    pub fn from_system_slot(mu: u8, n: u64) -> Self {
        assert!(mu <= MAX_MU, "unsupported numerology {mu}");
        let n = (n % nof_slots_per_system_frame(mu) as u64) as u32;
        let per_sf = 1u32 << mu;
        let slot = n % per_sf;
        let sf_index = n / per_sf;
        Self {
            mu,
            sfn: (sf_index / NOF_SUBFRAMES_PER_FRAME) as u16,
            subframe: (sf_index % NOF_SUBFRAMES_PER_FRAME) as u8,
            slot: slot as u8,
        }
    }

    pub fn mu(&self) -> u8 {
        self.mu
    }

    pub fn sfn(&self) -> u16 {
        self.sfn
    }

    pub fn subframe(&self) -> u8 {
        self.subframe
    }

    pub fn slot(&self) -> u8 {
        self.slot
    }

    pub fn system_slot(&self) -> u32 {
        ((self.sfn as u32 * NOF_SUBFRAMES_PER_FRAME + self.subframe as u32) << self.mu)
            + self.slot as u32
    }

    pub fn nof_slots_per_system_frame(&self) -> u32 {
        nof_slots_per_system_frame(self.mu)
    }

    /// Slot index within its 10-slot-per-ms-scaled frame (0..10 * 2^mu).
    pub fn slot_in_frame(&self) -> u32 {
        ((self.subframe as u32) << self.mu) + self.slot as u32
    }

    /// Moves by `delta` slots, wrapping modulo the system frame space.
    pub fn offset(&self, delta: i64) -> Self {
        let n = nof_slots_per_system_frame(self.mu) as i64;
        let s = (self.system_slot() as i64 + delta).rem_euclid(n);
        Self::from_system_slot(self.mu, s as u64)
    }

    pub fn next(&self) -> Self {
        self.offset(1)
    }

    pub fn prev(&self) -> Self {
        self.offset(-1)
    }
}

impl fmt::Display for SlotPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.sfn, self.subframe, self.slot)
    }
}

/// Position of a sample within the slot lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotPosition {
    pub slot: SlotPoint,
    pub symbol: usize,
    pub sample: u32,
}

/// Instant of the GPS-disciplined clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct GpsInstant {
    seconds: u64,
    nanoseconds: u32,
}

impl GpsInstant {
    pub fn new(seconds: u64, nanoseconds: u32) -> Result<Self, TimingError> {
        if nanoseconds >= 1_000_000_000 {
            return Err(TimingError::SlotOutOfRange(format!("{nanoseconds} ns")));
        }
        Ok(Self { seconds, nanoseconds })
    }

    pub fn from_nanos(total: u128) -> Self {
        Self {
            seconds: (total / 1_000_000_000) as u64,
            nanoseconds: (total % 1_000_000_000) as u32,
        }
    }

    pub fn seconds(&self) -> u64 {
        self.seconds
    }

    pub fn nanoseconds(&self) -> u32 {
        self.nanoseconds
    }

    pub fn as_nanos(&self) -> u128 {
        self.seconds as u128 * 1_000_000_000 + self.nanoseconds as u128
    }
}

/// Lead of downlink processing over transmission, in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignmentConfig {
    rx_to_tx_max_delay_samples: u64,
}

impl AlignmentConfig {
    pub fn new(rx_to_tx_max_delay_samples: u64) -> Result<Self, TimingError> {
        if rx_to_tx_max_delay_samples == 0 {
            return Err(TimingError::ZeroDelay);
        }
        Ok(Self { rx_to_tx_max_delay_samples })
    }

    /// Converts a delay in nanoseconds to samples, rounding up.
    pub fn from_nanos(delay_ns: u64, sampling_rate_hz: u64) -> Result<Self, TimingError> {
        let product = delay_ns as u128 * sampling_rate_hz as u128;
        Self::new(product.div_ceil(1_000_000_000) as u64)
    }

    pub fn rx_to_tx_max_delay_samples(&self) -> u64 {
        self.rx_to_tx_max_delay_samples
    }
}

/// The stock low-PHY lead: 1.0008 ms.
pub const DEFAULT_RX_TO_TX_DELAY_NS: u64 = 1_000_800;

/// Rounds a radio tick count up to the next subframe boundary.
pub fn align_start_time(now: SampleTimestamp, cfg: &NumerologyConfig) -> SampleTimestamp {
    let sf = cfg.samples_per_subframe();
    SampleTimestamp(now.0.div_ceil(sf) * sf)
}

/// Locates a sample timestamp in the slot lattice.
pub fn slot_point_from_sample_time(t: SampleTimestamp, cfg: &NumerologyConfig) -> SlotPosition {
    let per_sf = cfg.samples_per_subframe();
    let i_sf = (t.0 / per_sf) % NOF_SUBFRAMES_PER_HYPERFRAME;
    let mut i_sample_symbol = (t.0 % per_sf) as u32;
    let mut i_symbol_sf = 0usize;
    while i_sample_symbol >= cfg.symbol_sizes[i_symbol_sf] {
        i_sample_symbol -= cfg.symbol_sizes[i_symbol_sf];
        i_symbol_sf += 1;
    }
    let i_slot = i_sf * cfg.slots_per_subframe() as u64 + (i_symbol_sf / NOF_SYMBOLS_PER_SLOT) as u64;
    SlotPosition {
        slot: SlotPoint::from_system_slot(cfg.mu, i_slot),
        symbol: i_symbol_sf % NOF_SYMBOLS_PER_SLOT,
        sample: i_sample_symbol,
    }
}

/// Slot point of a GPS instant.
///
/// The millisecond count within the 10.24 s hyperframe gives frame and
/// subframe; the microsecond fraction of the subframe divided by the slot
/// duration gives the slot.
pub fn gps_slot_point(now: GpsInstant, mu: u8) -> SlotPoint {
    let total_us = now.as_nanos() / 1000;
    let ms_in_hyperframe = (total_us / 1000) % NOF_SUBFRAMES_PER_HYPERFRAME as u128;
    let us_in_subframe = (total_us % 1000) as i64;
    let slot = (us_in_subframe / slot_duration_us(mu)) as u64;
    SlotPoint::from_system_slot(mu, ((ms_in_hyperframe as u64) << mu) + slot)
}

/// Number of slots `src` must advance to reach `dst`, assuming it runs behind.
pub fn calculate_slot_diff(src: SlotPoint, dst: SlotPoint) -> Result<u32, TimingError> {
    if src.mu != dst.mu {
        return Err(TimingError::MixedNumerology(src.mu, dst.mu));
    }
    let diff = dst.system_slot() as i64 - src.system_slot() as i64;
    let dis = if diff >= 0 { diff } else { diff + dst.nof_slots_per_system_frame() as i64 };
    Ok(dis as u32)
}

/// Slot offset between the hardware and GPS slot lattices, including the
/// downlink processing advance rounded up to whole slots.
pub fn alignment_offset(
    phy_slot: SlotPoint,
    gps_slot: SlotPoint,
    align: &AlignmentConfig,
    cfg: &NumerologyConfig,
) -> Result<u32, TimingError> {
    if phy_slot.mu != cfg.mu {
        return Err(TimingError::MixedNumerology(phy_slot.mu, cfg.mu));
    }
    let diff = calculate_slot_diff(phy_slot, gps_slot)?;
    let cali = align.rx_to_tx_max_delay_samples.div_ceil(cfg.samples_per_slot());
    Ok(diff + cali as u32)
}

/// Maps an unbounded slot counter onto slot points and virtual OTA times.
///
/// Slot `abs == 0` is `anchor` and begins at `t0_us`. Everything in the
/// simulation that needs "the OTA time of slot N" goes through this.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotClock {
    anchor: SlotPoint,
    t0_us: i64,
    slot_us: i64,
}

impl SlotClock {
    pub fn new(anchor: SlotPoint, t0_us: i64) -> Self {
        Self { anchor, t0_us, slot_us: slot_duration_us(anchor.mu) }
    }

    pub fn anchor(&self) -> SlotPoint {
        self.anchor
    }

    pub fn mu(&self) -> u8 {
        self.anchor.mu
    }

    pub fn slot_us(&self) -> i64 {
        self.slot_us
    }

    pub fn t0_us(&self) -> i64 {
        self.t0_us
    }

    pub fn ota_us(&self, abs: i64) -> i64 {
        self.t0_us + abs * self.slot_us
    }

    pub fn slot_point(&self, abs: i64) -> SlotPoint {
        self.anchor.offset(abs)
    }

    /// Slot counter of the slot in progress at `t_us`.
    pub fn abs_at(&self, t_us: i64) -> i64 {
        (t_us - self.t0_us).div_euclid(self.slot_us)
    }

    /// Resolves an 8-bit frame id plus subframe/slot to the slot counter
    /// nearest `reference_abs`.
    ///
    /// Candidates repeat every 256 frames; the one within half that span of
    /// the reference wins (ties go forward).
    pub fn resolve_frame_id(&self, reference_abs: i64, frame_id: u8, subframe: u8, slot: u8) -> i64 {
        let mu = self.anchor.mu;
        let period = (256 * NOF_SUBFRAMES_PER_FRAME as i64) << mu;
        let folded = |sfn: i64, sf: i64, sl: i64| (((sfn % 256) * 10 + sf) << mu) + sl;
        let target = folded(frame_id as i64, subframe as i64, slot as i64);
        let a = self.anchor;
        let anchor_folded = folded(a.sfn as i64, a.subframe as i64, a.slot as i64);
        let current = (anchor_folded + reference_abs).rem_euclid(period);
        let mut delta = (target - current).rem_euclid(period);
        if delta > period / 2 {
            delta -= period;
        }
        reference_abs + delta
    }
}
