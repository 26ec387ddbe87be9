//! Sample-level stand-in for a UE on an ideal loopback channel.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::iq_compress::{bfp_error_bound, bfp_exponent, CompMethod, CompParams, RES_PER_PRB};
use crate::low_phy::{Complex64, LowPhyError, Ofdm, ResourceGrid, SampleBlock, PRACH_SHORT_LRA};
use crate::ru_engine::grid_block;
use crate::timing::{SlotPoint, NOF_SYMBOLS_PER_SLOT};

/// Quantization slack on top of the BFP bound: half an LSB for the
/// float-to-fixed rounding, half for transform error.
const FIXED_SLACK_LSB: f64 = 1.0;
const LSB: f64 = 1.0 / 32768.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeConfig {
    /// Largest magnitude of each I/Q component; values are uniform in
    /// `[-level, level]`.
    pub level: f64,
    /// PRACH bin carrying the injected tone.
    pub prach_tone_bin: usize,
    pub prach_tone_level: f64,
}

impl Default for UeConfig {
    fn default() -> Self {
        Self { level: 0.25, prach_tone_bin: 7, prach_tone_level: 0.5 }
    }
}

/// PRACH occasion as the UE sees it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UePrach {
    /// Carrier subcarrier of PRACH bin 0 (may be negative or past the carrier).
    pub first_subcarrier: i64,
    pub start_symbol: usize,
    pub num_symbols: usize,
}

/// Fills every RE of every port with uniform random I/Q in `[-level, level]`.
pub fn fill_random(grid: &mut ResourceGrid, level: f64, rng: &mut ChaCha8Rng) {
    for port in 0..grid.nof_ports() {
        for sym in 0..NOF_SYMBOLS_PER_SLOT {
            for v in grid.symbol_mut(sym, port) {
                *v = Complex64::new(rng.gen_range(-level..=level), rng.gen_range(-level..=level));
            }
        }
    }
}

/// Largest tolerated per-component error for a PRB whose BFP exponent is `e`.
pub fn tolerance(comp: CompParams, exponent: u8) -> f64 {
    let e = if comp.method == CompMethod::Bfp { exponent } else { 0 };
    (bfp_error_bound(e) as f64 + FIXED_SLACK_LSB) * LSB
}

fn within(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a.re - b.re).abs() <= tol && (a.im - b.im).abs() <= tol
}

#[derive(Debug)]
pub struct VirtualUe {
    cfg: UeConfig,
    ofdm: Ofdm,
    nof_ports: usize,
    nof_prb: u16,
    rng: ChaCha8Rng,
    injected: BTreeMap<i64, ResourceGrid>,
    dl_log: Vec<(i64, f64)>,
}

impl VirtualUe {
    pub fn new(cfg: UeConfig, ofdm: Ofdm, nof_ports: usize, seed: u64) -> Self {
        let nof_prb = ofdm.config().nof_prb();
        Self { cfg, ofdm, nof_ports, nof_prb, rng: ChaCha8Rng::seed_from_u64(seed), injected: BTreeMap::new(), dl_log: Vec::new() }
    }

    pub fn config(&self) -> &UeConfig {
        &self.cfg
    }

    /// Builds and modulates the UL slot `abs`, remembering the grid.
    pub fn transmit(&mut self, abs: i64, slot: SlotPoint, prach: Option<UePrach>) -> Result<Vec<SampleBlock>, LowPhyError> {
        let mut grid = ResourceGrid::new(slot, self.nof_ports, self.nof_prb);
        fill_random(&mut grid, self.cfg.level, &mut self.rng);
        if let Some(p) = prach {
            let nsc = grid.nof_subcarriers() as i64;
            let lo = p.first_subcarrier.clamp(0, nsc) as usize;
            let hi = (p.first_subcarrier + PRACH_SHORT_LRA as i64).clamp(0, nsc) as usize;
            let lo_prb = lo / RES_PER_PRB;
            let hi_prb = hi.div_ceil(RES_PER_PRB);
            let tone = p.first_subcarrier + self.cfg.prach_tone_bin as i64;
            for port in 0..self.nof_ports {
                for sym in 0..NOF_SYMBOLS_PER_SLOT {
                    let row = grid.symbol_mut(sym, port);
                    row[lo_prb * RES_PER_PRB..hi_prb * RES_PER_PRB].fill(Complex64::default());
                    let in_occasion = sym >= p.start_symbol && sym < p.start_symbol + p.num_symbols;
                    if in_occasion && (0..nsc).contains(&tone) {
                        row[tone as usize] = Complex64::new(self.cfg.prach_tone_level, 0.0);
                    }
                }
            }
        }
        let blocks = self.ofdm.modulate(&grid)?;
        self.injected.insert(abs, grid);
        Ok(blocks)
    }

    pub fn injected(&self, abs: i64) -> Option<&ResourceGrid> {
        self.injected.get(&abs)
    }

    /// Forgets injected grids older than `abs`.
    pub fn prune_before(&mut self, abs: i64) {
        self.injected = self.injected.split_off(&abs);
    }

    /// Receives the DL samples of slot `abs`. When the source grid is known,
    /// returns the REs that fall outside the BFP bound.
    pub fn receive(
        &mut self,
        abs: i64,
        blocks: &[SampleBlock],
        source: Option<&ResourceGrid>,
        comp: CompParams,
    ) -> Result<Option<DlCheck>, LowPhyError> {
        let energy: f64 = blocks.iter().flat_map(|b| b.samples.iter()).map(|x| x.norm_sqr()).sum();
        self.dl_log.push((abs, energy));
        let Some(src) = source else {
            return Ok(None);
        };
        let mut check = DlCheck::default();
        for b in blocks {
            let rx = self.ofdm.demodulate(b)?;
            for sym in 0..NOF_SYMBOLS_PER_SLOT {
                for prb in 0..rx.nof_prb() {
                    let want = src.prb(sym, b.port, prb);
                    let e = bfp_exponent(&grid_block(want), comp.iq_width);
                    let tol = tolerance(comp, e);
                    for (k, (&got, &w)) in rx.prb(sym, 0, prb).iter().zip(want).enumerate() {
                        check.checked += 1;
                        let err = (got.re - w.re).abs().max((got.im - w.im).abs());
                        check.max_error = check.max_error.max(err);
                        if !within(got, w, tol) {
                            check.failed += 1;
                            check.first_failure.get_or_insert((b.port, sym, prb * RES_PER_PRB + k));
                        }
                    }
                }
            }
        }
        Ok(Some(check))
    }

    /// (slot, received energy) for every DL slot seen.
    pub fn dl_log(&self) -> &[(i64, f64)] {
        &self.dl_log
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DlCheck {
    pub checked: u64,
    pub failed: u64,
    pub max_error: f64,
    pub first_failure: Option<(usize, usize, usize)>,
}
