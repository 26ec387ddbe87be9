//! Resource grids, OFDM modulation and demodulation, PRACH extraction.
//!
//! Subcarrier `k` of a carrier with `n` subcarriers sits at frequency
//! `k - n/2` relative to DC; negative frequencies occupy the upper half of
//! the FFT. The inverse transform is scaled by `1/fft_size`, the forward
//! transform is not.

use std::fmt;
use std::sync::Arc;

pub use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::iq_compress::RES_PER_PRB;
use crate::timing::{slot_point_from_sample_time, NumerologyConfig, SampleTimestamp, SlotPoint, NOF_SYMBOLS_PER_SLOT};

/// PRACH subcarriers of a short preamble (formats A1..C2).
pub const PRACH_SHORT_LRA: usize = 139;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LowPhyError {
    #[error("grid has {grid} subcarriers, carrier has {carrier}")]
    DimensionMismatch { grid: usize, carrier: usize },
    #[error("sample block has {actual} samples, a slot has {expected}")]
    BlockLength { expected: usize, actual: usize },
    #[error("sample block starting at tick {0} is not slot aligned")]
    Misaligned(u64),
    #[error("PRACH band [{start}, {end}) outside the {fft}-point FFT")]
    BandOutOfRange { start: i64, end: i64, fft: usize },
    #[error("PRACH symbols {start}+{len} outside the slot")]
    SymbolRange { start: usize, len: usize },
    #[error("port {port} out of range ({ports} ports)")]
    PortOutOfRange { port: usize, ports: usize },
}

/// Frequency-domain samples of one slot: symbol × subcarrier × port.
#[derive(Clone, PartialEq)]
pub struct ResourceGrid {
    slot: SlotPoint,
    nof_ports: usize,
    nof_subcarriers: usize,
    // port-major so that one symbol of one port is contiguous
    data: Vec<Complex64>,
    written: Vec<bool>,
}

impl fmt::Debug for ResourceGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ResourceGrid")
            .field("slot", &self.slot)
            .field("nof_ports", &self.nof_ports)
            .field("nof_subcarriers", &self.nof_subcarriers)
            .finish_non_exhaustive()
    }
}

impl ResourceGrid {
    pub fn new(slot: SlotPoint, nof_ports: usize, nof_prb: u16) -> Self {
        let nof_subcarriers = nof_prb as usize * RES_PER_PRB;
        Self {
            slot,
            nof_ports,
            nof_subcarriers,
            data: vec![Complex64::default(); nof_ports * NOF_SYMBOLS_PER_SLOT * nof_subcarriers],
            written: vec![false; nof_ports * NOF_SYMBOLS_PER_SLOT * nof_prb as usize],
        }
    }

    pub fn slot(&self) -> SlotPoint {
        self.slot
    }

    pub fn nof_ports(&self) -> usize {
        self.nof_ports
    }

    pub fn nof_subcarriers(&self) -> usize {
        self.nof_subcarriers
    }

    pub fn nof_prb(&self) -> usize {
        self.nof_subcarriers / RES_PER_PRB
    }

    /// Zeroes the grid and retargets it at `slot`.
    pub fn reset(&mut self, slot: SlotPoint) {
        self.slot = slot;
        self.data.fill(Complex64::default());
        self.written.fill(false);
    }

    fn offset(&self, symbol: usize, port: usize) -> usize {
        (port * NOF_SYMBOLS_PER_SLOT + symbol) * self.nof_subcarriers
    }

    pub fn get(&self, symbol: usize, k: usize, port: usize) -> Complex64 {
        self.data[self.offset(symbol, port) + k]
    }

    pub fn set(&mut self, symbol: usize, k: usize, port: usize, value: Complex64) {
        let o = self.offset(symbol, port);
        self.data[o + k] = value;
        let prb = (port * NOF_SYMBOLS_PER_SLOT + symbol) * self.nof_prb() + k / RES_PER_PRB;
        self.written[prb] = true;
    }

    pub fn symbol(&self, symbol: usize, port: usize) -> &[Complex64] {
        let o = self.offset(symbol, port);
        &self.data[o..o + self.nof_subcarriers]
    }

    pub fn symbol_mut(&mut self, symbol: usize, port: usize) -> &mut [Complex64] {
        let o = self.offset(symbol, port);
        let n = self.nof_prb();
        let w = (port * NOF_SYMBOLS_PER_SLOT + symbol) * n;
        self.written[w..w + n].fill(true);
        &mut self.data[o..o + self.nof_subcarriers]
    }

    pub fn prb(&self, symbol: usize, port: usize, prb: usize) -> &[Complex64] {
        let o = self.offset(symbol, port) + prb * RES_PER_PRB;
        &self.data[o..o + RES_PER_PRB]
    }

    pub fn write_prb(&mut self, symbol: usize, port: usize, prb: usize, values: &[Complex64; RES_PER_PRB]) {
        let o = self.offset(symbol, port) + prb * RES_PER_PRB;
        self.data[o..o + RES_PER_PRB].copy_from_slice(values);
        let w = (port * NOF_SYMBOLS_PER_SLOT + symbol) * self.nof_prb() + prb;
        self.written[w] = true;
    }

    pub fn is_written(&self, symbol: usize, port: usize, prb: usize) -> bool {
        self.written[(port * NOF_SYMBOLS_PER_SLOT + symbol) * self.nof_prb() + prb]
    }

    pub fn written_prbs(&self) -> usize {
        self.written.iter().filter(|&&w| w).count()
    }

    pub fn max_abs_diff(&self, other: &ResourceGrid) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Time-domain samples of one port.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlock {
    pub start: SampleTimestamp,
    pub port: usize,
    pub samples: Vec<Complex64>,
}

impl SampleBlock {
    pub fn silence(start: SampleTimestamp, port: usize, len: usize) -> Self {
        Self { start, port, samples: vec![Complex64::default(); len] }
    }
}

/// Where to find a PRACH occasion in frequency and time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrachExtractConfig {
    /// Offset of the first PRACH subcarrier from DC, in half subcarriers.
    pub freq_offset_halfscs: i32,
    pub length_ra: usize,
    pub start_symbol: usize,
    pub num_symbols: usize,
}

impl PrachExtractConfig {
    /// Format B4 occasion starting at symbol 0.
    pub fn b4(freq_offset_halfscs: i32) -> Self {
        Self { freq_offset_halfscs, length_ra: PRACH_SHORT_LRA, start_symbol: 0, num_symbols: 12 }
    }

    /// Frequency of the first PRACH bin relative to DC, in whole
    /// subcarriers; half-subcarrier offsets round toward zero.
    pub fn first_bin(&self) -> i64 {
        (self.freq_offset_halfscs / 2) as i64
    }
}

/// Maps carrier subcarrier `k` to its FFT bin.
pub fn subcarrier_to_bin(k: usize, nof_subcarriers: usize, fft_size: usize) -> usize {
    frequency_to_bin(k as i64 - (nof_subcarriers / 2) as i64, fft_size)
}

pub fn frequency_to_bin(f: i64, fft_size: usize) -> usize {
    f.rem_euclid(fft_size as i64) as usize
}

/// OFDM modulator/demodulator with cached FFT plans for one numerology.
#[derive(Clone)]
pub struct Ofdm {
    cfg: NumerologyConfig,
    ifft: Arc<dyn Fft<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Ofdm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Ofdm").field("cfg", &self.cfg).finish_non_exhaustive()
    }
}

impl Ofdm {
    pub fn new(cfg: &NumerologyConfig) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            cfg: cfg.clone(),
            ifft: planner.plan_fft_inverse(cfg.fft_size()),
            fft: planner.plan_fft_forward(cfg.fft_size()),
        }
    }

    pub fn config(&self) -> &NumerologyConfig {
        &self.cfg
    }

    pub fn modulate(&self, grid: &ResourceGrid) -> Result<Vec<SampleBlock>, LowPhyError> {
        (0..grid.nof_ports()).map(|p| self.modulate_port(grid, p)).collect()
    }

    pub fn modulate_port(&self, grid: &ResourceGrid, port: usize) -> Result<SampleBlock, LowPhyError> {
        let cfg = &self.cfg;
        if grid.nof_subcarriers() != cfg.nof_subcarriers() {
            return Err(LowPhyError::DimensionMismatch { grid: grid.nof_subcarriers(), carrier: cfg.nof_subcarriers() });
        }
        if port >= grid.nof_ports() {
            return Err(LowPhyError::PortOutOfRange { port, ports: grid.nof_ports() });
        }
        let n = cfg.fft_size();
        let nsc = cfg.nof_subcarriers();
        let scale = 1.0 / n as f64;
        let sizes = cfg.slot_symbol_sizes(grid.slot().slot() as u32);
        let mut out = Vec::with_capacity(cfg.samples_per_slot() as usize);
        let mut buf = vec![Complex64::default(); n];
        let mut scratch = vec![Complex64::default(); self.ifft.get_inplace_scratch_len()];
        for (symbol, &size) in sizes.iter().enumerate() {
            buf.fill(Complex64::default());
            for (k, &v) in grid.symbol(symbol, port).iter().enumerate() {
                buf[subcarrier_to_bin(k, nsc, n)] = v;
            }
            self.ifft.process_with_scratch(&mut buf, &mut scratch);
            let cp = size as usize - n;
            out.extend(buf[n - cp..].iter().map(|x| x * scale));
            out.extend(buf.iter().map(|x| x * scale));
        }
        Ok(SampleBlock { start: cfg.slot_start(grid.slot()), port, samples: out })
    }

    fn check_block(&self, block: &SampleBlock) -> Result<SlotPoint, LowPhyError> {
        let expected = self.cfg.samples_per_slot() as usize;
        if block.samples.len() != expected {
            return Err(LowPhyError::BlockLength { expected, actual: block.samples.len() });
        }
        let pos = slot_point_from_sample_time(block.start, &self.cfg);
        if pos.symbol != 0 || pos.sample != 0 {
            return Err(LowPhyError::Misaligned(block.start.0));
        }
        Ok(pos.slot)
    }

    /// Full-spectrum forward DFT of one symbol (CP dropped).
    fn symbol_spectrum(&self, block: &SampleBlock, slot: SlotPoint, symbol: usize, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        let n = self.cfg.fft_size();
        let sizes = self.cfg.slot_symbol_sizes(slot.slot() as u32);
        let start: usize = sizes[..symbol].iter().map(|&s| s as usize).sum::<usize>() + sizes[symbol] as usize - n;
        buf.copy_from_slice(&block.samples[start..start + n]);
        self.fft.process_with_scratch(buf, scratch);
    }

    /// Demodulates one port into a single-port grid.
    pub fn demodulate(&self, block: &SampleBlock) -> Result<ResourceGrid, LowPhyError> {
        let slot = self.check_block(block)?;
        let mut grid = ResourceGrid::new(slot, 1, self.cfg.nof_prb());
        self.demodulate_into(block, &mut grid, 0)?;
        Ok(grid)
    }

    /// Demodulates into `port` of an existing grid.
    pub fn demodulate_into(&self, block: &SampleBlock, grid: &mut ResourceGrid, port: usize) -> Result<(), LowPhyError> {
        let slot = self.check_block(block)?;
        if grid.nof_subcarriers() != self.cfg.nof_subcarriers() {
            return Err(LowPhyError::DimensionMismatch { grid: grid.nof_subcarriers(), carrier: self.cfg.nof_subcarriers() });
        }
        if port >= grid.nof_ports() {
            return Err(LowPhyError::PortOutOfRange { port, ports: grid.nof_ports() });
        }
        let n = self.cfg.fft_size();
        let nsc = self.cfg.nof_subcarriers();
        let mut buf = vec![Complex64::default(); n];
        let mut scratch = vec![Complex64::default(); self.fft.get_inplace_scratch_len()];
        for symbol in 0..NOF_SYMBOLS_PER_SLOT {
            self.symbol_spectrum(block, slot, symbol, &mut buf, &mut scratch);
            let dst = grid.symbol_mut(symbol, port);
            for (k, v) in dst.iter_mut().enumerate() {
                *v = buf[subcarrier_to_bin(k, nsc, n)];
            }
        }
        Ok(())
    }

    /// Returns `num_symbols` rows of `length_ra` PRACH bins.
    pub fn extract_prach(&self, block: &SampleBlock, px: &PrachExtractConfig) -> Result<Vec<Vec<Complex64>>, LowPhyError> {
        let slot = self.check_block(block)?;
        let n = self.cfg.fft_size();
        let start = px.first_bin();
        let end = start + px.length_ra as i64;
        let half = (n / 2) as i64;
        if start < -half || end > half {
            return Err(LowPhyError::BandOutOfRange { start, end, fft: n });
        }
        if px.num_symbols == 0 || px.start_symbol + px.num_symbols > NOF_SYMBOLS_PER_SLOT {
            return Err(LowPhyError::SymbolRange { start: px.start_symbol, len: px.num_symbols });
        }
        let mut buf = vec![Complex64::default(); n];
        let mut scratch = vec![Complex64::default(); self.fft.get_inplace_scratch_len()];
        let mut rows = Vec::with_capacity(px.num_symbols);
        for symbol in px.start_symbol..px.start_symbol + px.num_symbols {
            self.symbol_spectrum(block, slot, symbol, &mut buf, &mut scratch);
            rows.push((start..end).map(|f| buf[frequency_to_bin(f, n)]).collect());
        }
        Ok(rows)
    }
}

pub fn modulate(grid: &ResourceGrid, cfg: &NumerologyConfig) -> Result<Vec<SampleBlock>, LowPhyError> {
    Ofdm::new(cfg).modulate(grid)
}

pub fn demodulate(block: &SampleBlock, cfg: &NumerologyConfig) -> Result<ResourceGrid, LowPhyError> {
    Ofdm::new(cfg).demodulate(block)
}

pub fn extract_prach(block: &SampleBlock, cfg: &NumerologyConfig, px: &PrachExtractConfig) -> Result<Vec<Vec<Complex64>>, LowPhyError> {
    Ofdm::new(cfg).extract_prach(block, px)
}
