//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero if any criterion fails or overruns its time budget.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::goldens::{golden_codec, goldens};
use common::{random_block, random_message, scenario, scenario_text};
use ofh_core::scenario::ScenarioConfig;
use ofh_core::delay_profile::{
    check_window, derive_ru_profile, du_preset, preset, ru_preset, validate_pair, FindingStatus, FronthaulDelay,
    PresetName, Profile, RuProfileTemplate, Side, WindowKind, WindowVerdict,
};
use ofh_core::iq_compress::{compress, decompress, CompParams, IqBlock, VALUES_PER_PRB};
use ofh_core::low_phy::{Complex64, Ofdm, ResourceGrid};
use ofh_core::ofh_codec::{CodecConfig, OfhCodec, OfhMessage, FILTER_INDEX_PRACH_SHORT};
use ofh_core::report::Report;
use ofh_core::ru_engine::RuStream;
use ofh_core::sim_transport::{analyze, run, CaptureDirection, CaptureReader, Jitter, LinkConfig, SimConfig, SimOutcome};
use ofh_core::timing::{
    calculate_slot_diff, slot_point_from_sample_time, AlignmentConfig, NumerologyConfig, SampleTimestamp, SlotPoint,
    DEFAULT_RX_TO_TX_DELAY_NS,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Wall-clock budget of each criterion.
const TIME_LIMIT: Duration = Duration::from_secs(60);

const SLOT_DIFF_PAIRS: usize = 10_000;
const CODEC_ROUND_TRIPS: usize = 10_000;
const FUZZ_INPUTS: usize = 100_000;
const BFP_BLOCKS: usize = 10_000;
const OFDM_GRIDS: usize = 100;
const OFDM_ROUND_TRIP_TOL: f64 = 1e-6;
const OFDM_TONE_TOL: f64 = 1e-9;
const DERIVE_TOL_US: i64 = 500;
const E2E_FRAMES: u32 = 100;
const TDD_FRAMES: u32 = 20;
const PRACH_FRAMES: u32 = 2;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("delay-profile fidelity", delay_profile_fidelity),
        ("derivation sanity", derivation_sanity),
        ("profile pair audit", profile_pair_audit),
        ("timing arithmetic", timing_arithmetic),
        ("codec", codec),
        ("BFP", bfp),
        ("OFDM", ofdm),
        ("end-to-end integrity", end_to_end_integrity),
        ("window enforcement", window_enforcement),
        ("TDD adaptivity", tdd_adaptivity),
        ("PRACH", prach),
        ("determinism and replay", determinism_and_replay),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let took = start.elapsed();
        let result = match result {
            Ok(_) if took > TIME_LIMIT => Err(format!("took {:.1} s, over the {} s budget", took.as_secs_f64(), TIME_LIMIT.as_secs())),
            r => r,
        };
        let (tag, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {} ({name}): {detail} [{:.1} s]", i + 1, took.as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

// 1

const TDD_RU: [u32; 8] = [2635, 2221, 2635, 2221, 2454, 2015, 1280, 925];
const TDD_DU: [u32; 8] = [2635, 2335, 2670, 2386, 2460, 2180, 1325, 925];
const FDD_RU: [u32; 8] = [4135, 3721, 4135, 3721, 3954, 3515, 1480, 1125];
const FDD_DU: [u32; 8] = [4135, 3886, 4135, 3886, 3990, 3680, 1500, 1125];

fn values(p: &Profile) -> Vec<u32> {
    p.rows().into_iter().map(|(_, v)| v).collect()
}

fn delay_profile_fidelity() -> Outcome {
    let mut matched = 0;
    for (name, side, want) in [
        ("tdd_scs30", Side::Ru, TDD_RU),
        ("tdd_scs30", Side::Du, TDD_DU),
        ("fdd_scs15", Side::Ru, FDD_RU),
        ("fdd_scs15", Side::Du, FDD_DU),
    ] {
        let got = values(&preset(name, side).map_err(|e| e.to_string())?);
        ensure!(got == want, "{name} {side:?}: got {got:?}, want {want:?}");
        matched += got.len();
    }
    ensure!(ru_preset(PresetName::TddScs30).values() == TDD_RU, "typed RU preset differs");
    ensure!(du_preset(PresetName::FddScs15).values() == FDD_DU, "typed DU preset differs");
    Ok(format!("{matched}/32 preset values exact"))
}

// 2

fn derivation_sanity() -> Outcome {
    let cfg = NumerologyConfig::new(1, 23_040_000, 51).unwrap();
    let lead = AlignmentConfig::from_nanos(DEFAULT_RX_TO_TX_DELAY_NS, cfg.sampling_rate_hz())
        .unwrap()
        .rx_to_tx_max_delay_samples()
        .div_ceil(cfg.samples_per_slot());
    ensure!(lead == 3, "1.0008 ms rounds to {lead} slots");
    ensure!(DEFAULT_RX_TO_TX_DELAY_NS.div_ceil(500_000) == 3, "ceil in nanoseconds disagrees");
    let ru = derive_ru_profile(&RuProfileTemplate::new(3, 2, 1, 2, 2, 500)).map_err(|e| e.to_string())?;
    let table = TDD_RU[4] as i64;
    let diff = ru.t2a_max_up as i64 - table;
    ensure!(diff.abs() <= DERIVE_TOL_US, "t2a_max_up {} is {diff} us from {table}", ru.t2a_max_up);
    let sim = scenario("tdd_dddsu", 1).build(None).unwrap().sim;
    ensure!(sim.ru.lowphy_lead_slots == 3, "RU lead {} slots", sim.ru.lowphy_lead_slots);
    Ok(format!("lead 3 slots; derived t2a_max_up {} us, {diff:+} us from {table}", ru.t2a_max_up))
}

// 3

fn audit(name: PresetName) -> Vec<(&'static str, u32, bool)> {
    let fh = FronthaulDelay::new(0, 0, 0, 0).unwrap();
    validate_pair(&ru_preset(name), &du_preset(name), &fh)
        .into_iter()
        .map(|f| (f.field, f.excess_us, matches!(f.status, FindingStatus::Warning(_))))
        .collect()
}

fn profile_pair_audit() -> Outcome {
    let mut detail = Vec::new();
    for (name, want) in [
        (PresetName::TddScs30, vec![("t1a_max_cp_ul", 35), ("t1a_max_up", 6)]),
        (PresetName::FddScs15, vec![("t1a_max_up", 36)]),
    ] {
        let findings = audit(name);
        let mut warnings: Vec<(&str, u32)> = findings.iter().filter(|f| f.2).map(|f| (f.0, f.1)).collect();
        warnings.sort();
        ensure!(warnings == want, "{}: warnings {warnings:?}, want {want:?}", name.as_str());
        let cp_dl = findings.iter().find(|f| f.0 == "t1a_max_cp_dl").ok_or("no cp_dl finding")?;
        ensure!(!cp_dl.2 && cp_dl.1 == 0, "{}: cp_dl max pair flagged {:?}", name.as_str(), cp_dl);
        detail.push(format!("{} {warnings:?}", name.as_str()));
    }
    Ok(detail.join("; "))
}

// 4

fn step(t: (u16, u8, u8), mu: u8) -> (u16, u8, u8) {
    let (mut sfn, mut sf, mut slot) = t;
    slot += 1;
    if slot == 1 << mu {
        slot = 0;
        sf += 1;
        if sf == 10 {
            sf = 0;
            sfn = (sfn + 1) % 1024;
        }
    }
    (sfn, sf, slot)
}

fn brute_force_diff(src: SlotPoint, dst: SlotPoint) -> u32 {
    let target = (dst.sfn(), dst.subframe(), dst.slot());
    let mut t = (src.sfn(), src.subframe(), src.slot());
    let mut n = 0;
    while t != target {
        t = step(t, src.mu());
        n += 1;
    }
    n
}

/// Slot, symbol and offset of sample `off` of a subframe at 23.04 Msps:
/// symbols of 834 samples open each slot, the rest are 822.
fn sample_oracle(off: u64) -> (u64, usize, u32) {
    let slot = off / 11_520;
    let rem = off % 11_520;
    if rem < 834 {
        (slot, 0, rem as u32)
    } else {
        (slot, 1 + ((rem - 834) / 822) as usize, ((rem - 834) % 822) as u32)
    }
}

fn timing_arithmetic() -> Outcome {
    let mut rng = StdRng::seed_from_u64(4);
    let mut checked = 0;
    for mu in 0..2u8 {
        let n = 10_240u64 << mu;
        let per_sf = 1u64 << mu;
        for _ in 0..SLOT_DIFF_PAIRS / 2 {
            let a = SlotPoint::from_system_slot(mu, rng.gen_range(0..n));
            let b = SlotPoint::from_system_slot(mu, rng.gen_range(0..n));
            let got = calculate_slot_diff(a, b).map_err(|e| e.to_string())?;
            ensure!(got == brute_force_diff(a, b), "mu {mu}: diff {a} -> {b} = {got}");
            checked += 1;
        }
        let edges = [0, 1, per_sf - 1, per_sf, 10 * per_sf - 1, 10 * per_sf, n / 2, n - 2, n - 1];
        for &x in &edges {
            for &y in &edges {
                let (a, b) = (SlotPoint::from_system_slot(mu, x), SlotPoint::from_system_slot(mu, y));
                let got = calculate_slot_diff(a, b).map_err(|e| e.to_string())?;
                ensure!(got == brute_force_diff(a, b), "mu {mu}: boundary diff {a} -> {b} = {got}");
                checked += 1;
            }
        }
    }

    let cfg = NumerologyConfig::new(1, 23_040_000, 51).unwrap();
    let per_sf = cfg.samples_per_subframe();
    ensure!(per_sf == 23_040, "{per_sf} samples per subframe");
    let mut samples = 0;
    for sf in [0u64, 10_239] {
        for off in 0..per_sf {
            let t = sf * per_sf + off;
            let pos = slot_point_from_sample_time(SampleTimestamp(t), &cfg);
            let (slot, symbol, sample) = sample_oracle(off);
            ensure!(
                pos.slot.system_slot() as u64 == sf * 2 + slot && pos.symbol == symbol && pos.sample == sample,
                "sample {t}: got {pos:?}, want slot {} symbol {symbol} sample {sample}",
                sf * 2 + slot
            );
            let sizes = cfg.slot_symbol_sizes(pos.slot.slot() as u32);
            let back = cfg.slot_start(pos.slot).ticks() + sizes[..symbol].iter().map(|&s| s as u64).sum::<u64>() + sample as u64;
            ensure!(back == t, "sample {t} maps back to {back}");
            samples += 1;
        }
    }
    Ok(format!("{checked} slot diffs match the stepping oracle; {samples} sample times round-trip"))
}

// 5

fn codec() -> Outcome {
    let mut rng = StdRng::seed_from_u64(5);
    let codecs = [OfhCodec::new(CodecConfig::new(1, 51)), OfhCodec::new(CodecConfig::new(0, 106))];
    let mut corpus = Vec::new();
    for i in 0..CODEC_ROUND_TRIPS {
        let c = &codecs[i % 2];
        let (msg, eaxc, seq) = random_message(&mut rng, c);
        let bytes = c.encode(&msg, eaxc, seq).map_err(|e| format!("encode #{i}: {e}"))?;
        let f = c.decode(&bytes).map_err(|e| format!("decode #{i}: {e}"))?;
        ensure!(f.message == msg && f.eaxc == eaxc && f.seq_id == seq, "message #{i} did not round-trip");
        ensure!(c.encode(&f.message, f.eaxc, f.seq_id).unwrap() == bytes, "message #{i} re-encodes differently");
        if i % 2 == 0 && corpus.len() < 500 {
            corpus.push(bytes);
        }
    }

    let gc = golden_codec();
    let cases = goldens(&gc);
    for g in &cases {
        ensure!(g.encoded == g.expected, "golden {} differs", g.name);
    }

    let c = &codecs[0];
    let (mut panics, mut accepted) = (0, 0);
    let hook = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    for i in 0..FUZZ_INPUTS {
        let mut b = corpus[rng.gen_range(0..corpus.len())].clone();
        match i % 6 {
            0 => {
                for _ in 0..rng.gen_range(1..8) {
                    let j = rng.gen_range(0..b.len());
                    b[j] ^= 1 << rng.gen_range(0..8);
                }
            }
            1 => b.truncate(rng.gen_range(0..b.len())),
            2 => b.extend((0..rng.gen_range(1..64)).map(|_| rng.gen::<u8>())),
            3 => {
                let size: u16 = rng.gen();
                b[2..4].copy_from_slice(&size.to_be_bytes());
            }
            4 => {
                let j = rng.gen_range(8..b.len().min(40));
                b[j] = if rng.gen() { 0xff } else { 0x00 };
            }
            _ => b = (0..rng.gen_range(0..200)).map(|_| rng.gen()).collect(),
        }
        match panic::catch_unwind(|| c.decode(&b).is_ok()) {
            Ok(ok) => accepted += ok as usize,
            Err(_) => panics += 1,
        }
    }
    panic::set_hook(hook);
    ensure!(panics == 0, "decode panicked on {panics} of {FUZZ_INPUTS} fuzz inputs");
    Ok(format!(
        "{CODEC_ROUND_TRIPS} round trips, {} goldens byte-exact, {FUZZ_INPUTS} fuzz inputs without panic ({accepted} decoded)",
        cases.len()
    ))
}

// 6

fn bfp() -> Outcome {
    let mut rng = StdRng::seed_from_u64(6);
    let mut blocks: Vec<IqBlock> = (0..BFP_BLOCKS).map(|_| random_block(&mut rng)).collect();
    let mut edge = [0i16; VALUES_PER_PRB];
    edge[0] = i16::MIN;
    edge[1] = i16::MAX;
    edge[2] = 3;
    blocks.push(IqBlock(edge));
    let (mut clamped, mut lossless, mut worst) = (0u64, 0u64, 0.0f64);
    for w in 2..=16u8 {
        let p = CompParams::bfp(w).unwrap();
        let hi = (1i32 << (w - 1)) - 1;
        for b in &blocks {
            let c = compress(b, p);
            let r = decompress(&c);
            let e = c.exponent as u32;
            let max_abs = b.0.iter().map(|&v| (v as i32).abs()).max().unwrap();
            if max_abs < 1 << (w - 1) || w == 16 {
                ensure!(r == *b, "width {w}: block with max |v| {max_abs} is not reconstructed exactly");
                lossless += 1;
                continue;
            }
            for (i, (&v, &x)) in b.0.iter().zip(&r.0).enumerate() {
                let err = (v as i32 - x as i32).abs();
                if e > 0 && c.mantissas[i] as i32 == hi {
                    clamped += 1;
                    ensure!(err <= 1 << e, "width {w}: clamped {v} -> {x} exceeds 2^{e}");
                } else {
                    ensure!(e > 0 && err <= 1 << (e - 1) || err == 0, "width {w}: {v} -> {x} exceeds 2^({e}-1)");
                    if e > 0 {
                        worst = worst.max(err as f64 / (1u32 << (e - 1)) as f64);
                    }
                }
            }
        }
    }
    let p16 = CompParams::bfp(16).unwrap();
    for v in i16::MIN..=i16::MAX {
        let b = IqBlock([v; VALUES_PER_PRB]);
        ensure!(decompress(&compress(&b, p16)) == b, "width 16 loses {v}");
    }
    Ok(format!(
        "widths 2..16 over {} blocks: {lossless} exact, worst error {worst:.3} x 2^(e-1), {clamped} clamp-extreme components within 2^e; width 16 exact",
        blocks.len()
    ))
}

// 7

fn random_grid(rng: &mut StdRng, slot: SlotPoint, nof_prb: u16) -> ResourceGrid {
    let mut g = ResourceGrid::new(slot, 1, nof_prb);
    for s in 0..14 {
        for v in g.symbol_mut(s, 0) {
            *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    g
}

fn ofdm() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let long = |n: u32, cp: u32| n + cp;
    let configs = [
        (NumerologyConfig::new(1, 23_040_000, 51).unwrap(), 768usize, long(768, 66), long(768, 54)),
        (NumerologyConfig::new(0, 30_720_000, 106).unwrap(), 2048, long(2048, 160), long(2048, 144)),
    ];
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for (cfg, fft, first, other) in configs {
        ensure!(cfg.fft_size() == fft, "mu {} FFT {}", cfg.mu(), cfg.fft_size());
        let sizes = cfg.symbol_sizes();
        let half = sizes.len() / 2;
        let want: Vec<u32> = (0..sizes.len()).map(|i| if i % half == 0 { first } else { other }).collect();
        ensure!(sizes == want.as_slice(), "mu {} symbol sizes {sizes:?}", cfg.mu());
        let total: u64 = sizes.iter().map(|&s| s as u64).sum();
        ensure!(total == cfg.samples_per_subframe(), "mu {} sizes sum to {total}", cfg.mu());

        let ofdm = Ofdm::new(&cfg);
        let nsc = cfg.nof_subcarriers();
        for _ in 0..OFDM_GRIDS {
            let slot = SlotPoint::from_system_slot(cfg.mu(), rng.gen_range(0..10_240 << cfg.mu()));
            let g = random_grid(&mut rng, slot, cfg.nof_prb());
            let block = ofdm.modulate_port(&g, 0).map_err(|e| e.to_string())?;
            let back = ofdm.demodulate(&block).map_err(|e| e.to_string())?;
            worst.0 = worst.0.max(back.max_abs_diff(&g));

            // Parseval on the useful part of every symbol
            let slot_sizes = cfg.slot_symbol_sizes(slot.slot() as u32);
            let mut off = 0;
            for (s, &size) in slot_sizes.iter().enumerate() {
                let useful = &block.samples[off + size as usize - fft..off + size as usize];
                let time: f64 = useful.iter().map(|x| x.norm_sqr()).sum();
                let freq: f64 = g.symbol(s, 0).iter().map(|x| x.norm_sqr()).sum::<f64>() / fft as f64;
                worst.1 = worst.1.max((time - freq).abs() / freq);
                off += size as usize;
            }
        }

        // one subcarrier above DC: a single cycle per useful period
        let slot = SlotPoint::from_system_slot(cfg.mu(), 1);
        let mut g = ResourceGrid::new(slot, 1, cfg.nof_prb());
        g.set(3, nsc / 2 + 1, 0, Complex64::new(1.0, 0.0));
        let block = ofdm.modulate_port(&g, 0).map_err(|e| e.to_string())?;
        let slot_sizes = cfg.slot_symbol_sizes(slot.slot() as u32);
        let start: usize = slot_sizes[..3].iter().map(|&s| s as usize).sum();
        let size = slot_sizes[3] as usize;
        let cp = size - fft;
        for m in 0..size {
            let phase = 2.0 * std::f64::consts::PI * (m as f64 - cp as f64) / fft as f64;
            let want = Complex64::from_polar(1.0 / fft as f64, phase);
            worst.2 = worst.2.max((block.samples[start + m] - want).norm() * fft as f64);
        }
        let silent: f64 = block.samples[..start].iter().chain(&block.samples[start + size..]).map(|x| x.norm()).sum();
        ensure!(silent < OFDM_TONE_TOL, "energy outside the tone symbol: {silent}");
    }
    ensure!(worst.0 < OFDM_ROUND_TRIP_TOL, "round-trip error {:e}", worst.0);
    ensure!(worst.1 < OFDM_TONE_TOL, "Parseval relative error {:e}", worst.1);
    ensure!(worst.2 < OFDM_TONE_TOL, "tone error {:e}", worst.2);
    Ok(format!(
        "{OFDM_GRIDS} grids per config: round trip {:.1e}, Parseval {:.1e}, tone {:.1e}; symbol sizes sum to a subframe",
        worst.0, worst.1, worst.2
    ))
}

// 8

fn late_early_missing(out: &SimOutcome) -> u64 {
    RuStream::ALL
        .iter()
        .map(|&s| {
            let c = out.ru.stream(s);
            c.late + c.early + c.no_context
        })
        .sum()
}

fn end_to_end_integrity() -> Outcome {
    let sc = scenario("tdd_dddsu", E2E_FRAMES).build(None).map_err(|e| e.to_string())?;
    let sim = &sc.sim;
    ensure!(sim.du.comp == CompParams::bfp(9).unwrap() && sim.ru.nof_ports == 2, "scenario is not BFP-9 2x2");
    ensure!(sim.dl_link.jitter == Jitter::None && sim.ul_link.jitter == Jitter::None, "scenario has jitter");
    let out = run(sim, None).map_err(|e| e.to_string())?;
    let i = &out.integrity;
    ensure!(late_early_missing(&out) == 0, "RU late/early/no-context: {:?}", out.ru);
    ensure!(out.ru.decode_error == 0, "{} RU decode errors", out.ru.decode_error);
    ensure!(i.dl_res_checked > 0 && i.dl_res_failed == 0, "DL: {} of {} REs outside the BFP bound", i.dl_res_failed, i.dl_res_checked);
    ensure!(
        i.ul_res_checked > 0 && i.ul_res_failed == 0 && i.ul_unverified == 0,
        "UL: {} of {} REs outside the BFP bound, {} unverified",
        i.ul_res_failed,
        i.ul_res_checked,
        i.ul_unverified
    );
    let p = &sim.ru.profile;
    let l = out.du.lambda;
    ensure!(out.ul_link.max_delay_us == Some(0), "UL link is not zero-delay");
    ensure!(
        l.count > 0 && l.min_us >= p.ta3_min as i64 && l.max_us <= p.ta3_max as i64,
        "UL transmit offsets [{}, {}] outside Ta3 [{}, {}]",
        l.min_us,
        l.max_us,
        p.ta3_min,
        p.ta3_max
    );
    let ul_sent = out.ru.ul_frames_emitted + out.ru.prach_frames_emitted;
    ensure!(
        out.du.ul_early == 0 && out.du.ul_late == 0 && out.du.ul_on_time == ul_sent,
        "DU UL: {} on time of {ul_sent}, {} early, {} late",
        out.du.ul_on_time,
        out.du.ul_early,
        out.du.ul_late
    );
    ensure!(i.passed(), "integrity report failed: {:?}", i.rows());
    Ok(format!(
        "{} frames to RU with no drops; DL max error {:.2e}, UL max error {:.2e}; {} UL frames on time, Ta3 offsets {}..{} us",
        out.du.sent_total(),
        i.dl_max_error,
        i.ul_max_error,
        ul_sent,
        l.min_us,
        l.max_us
    ))
}

// 9

fn with_dl(up_point: u32, cp_dl_point: u32, delay: u32) -> Result<SimOutcome, String> {
    let mut sim = scenario("tdd_dddsu", 1).build(None).map_err(|e| e.to_string())?.sim;
    sim.du.t1a_up_point_us = up_point;
    sim.du.t1a_cp_dl_point_us = cp_dl_point;
    sim.dl_link = LinkConfig::fixed(delay);
    run(&sim, None).map_err(|e| e.to_string())
}

fn window_enforcement() -> Outcome {
    let ru = ru_preset(PresetName::TddScs30);
    let du = du_preset(PresetName::TddScs30);
    // U-plane 1 us past t2a_min_up
    let d = du.t1a_min_up - ru.t2a_min_up + 1;
    let out = with_dl(du.t1a_min_up, 2485, d)?;
    let u = out.ru.uplane_dl;
    ensure!(u.total() > 0 && u.late == u.total(), "U-plane late {} of {}", u.late, u.total());
    for s in [RuStream::CPlaneDl, RuStream::CPlaneUl, RuStream::CPlanePrach] {
        let c = out.ru.stream(s);
        ensure!(c.late == 0 && c.on_time == c.total(), "{} late {} of {}", s.name(), c.late, c.total());
    }
    let late_pct = 100.0 * u.late as f64 / u.total() as f64;

    // exactly on t2a_min_up, exactly on t2a_max_up, and one past each
    let at_min = with_dl(du.t1a_min_up, 2485, d - 1)?.ru.uplane_dl;
    ensure!(at_min.on_time == at_min.total(), "arrival at t2a_min_up: {at_min:?}");
    let d_max = du.t1a_max_up - ru.t2a_max_up;
    let at_max = with_dl(du.t1a_max_up, du.t1a_max_cp_dl, d_max)?.ru.uplane_dl;
    ensure!(at_max.on_time == at_max.total(), "arrival at t2a_max_up: {at_max:?}");
    let early = with_dl(du.t1a_max_up, du.t1a_max_cp_dl, d_max - 1)?.ru.uplane_dl;
    ensure!(early.early == early.total(), "arrival 1 us before t2a_max_up: {early:?}");

    for kind in [WindowKind::CPlaneDl, WindowKind::CPlaneUl, WindowKind::UPlaneDl] {
        for ota in [0i64, 1_000_000] {
            let b = ru_bounds(kind);
            let check = |t| check_window(kind, t, ota, &ru).unwrap();
            ensure!(check(ota - b.1) == WindowVerdict::OnTime && check(ota - b.0) == WindowVerdict::OnTime, "{kind:?} bounds not inclusive");
            ensure!(check(ota - b.1 - 1) == WindowVerdict::Early && check(ota - b.0 + 1) == WindowVerdict::Late, "{kind:?} bounds too wide");
        }
    }
    Ok(format!(
        "U-plane +1 us past t2a_min_up: {late_pct:.1}% late of {}, C-plane 0% late; arrivals on both bounds on time",
        u.total()
    ))
}

fn ru_bounds(kind: WindowKind) -> (i64, i64) {
    let ru = ru_preset(PresetName::TddScs30);
    let (min, max) = match kind {
        WindowKind::CPlaneDl => (ru.t2a_min_cp_dl, ru.t2a_max_cp_dl),
        WindowKind::CPlaneUl => (ru.t2a_min_cp_ul, ru.t2a_max_cp_ul),
        _ => (ru.t2a_min_up, ru.t2a_max_up),
    };
    (min as i64, max as i64)
}

// 10

fn tdd_adaptivity() -> Outcome {
    let a = scenario("tdd_dddsu", TDD_FRAMES).build(None).map_err(|e| e.to_string())?.sim;
    let b = scenario("tdd_7d1s2u", TDD_FRAMES).build(None).map_err(|e| e.to_string())?.sim;
    let ru_a = format!("{:?}", a.ru);
    ensure!(ru_a == format!("{:?}", b.ru), "the two scenarios configure different RUs");
    let lower = ru_a.to_lowercase();
    for word in ["pattern", "duplex", "tdd", "slotkind"] {
        ensure!(!lower.contains(word), "RU configuration mentions `{word}`");
    }
    let mut detail = Vec::new();
    for (name, sim) in [("DDDSU", &a), ("7D1S2U", &b)] {
        let out = run(sim, None).map_err(|e| e.to_string())?;
        let bad: Vec<i64> = out.slots.iter().filter(|s| !s.directions_match()).map(|s| s.abs).collect();
        ensure!(bad.is_empty(), "{name}: RU direction differs from the DU schedule in slots {bad:?}");
        ensure!(out.integrity.direction_mismatches == 0, "{name}: {} direction mismatches", out.integrity.direction_mismatches);
        ensure!(late_early_missing(&out) == 0, "{name}: RU dropped frames");
        let dl = out.slots.iter().filter(|s| s.ru_dl_modulated).count();
        let ul = out.slots.iter().filter(|s| s.ru_ul_emitted).count();
        detail.push(format!("{name} {} slots ({dl} DL, {ul} UL)", out.slots.len()));
    }
    Ok(format!("one RU config; every slot matches the DU schedule: {}", detail.join(", ")))
}

// 11

/// Tone bin seen in each PRACH U-plane frame of a run.
fn prach_frames(tone_bin: usize) -> Result<(Vec<usize>, usize), String> {
    let mut sim: SimConfig = scenario("tdd_dddsu", PRACH_FRAMES).build(None).map_err(|e| e.to_string())?.sim;
    sim.ue.prach_tone_bin = tone_bin;
    let mut cap = Vec::new();
    run(&sim, Some(&mut cap)).map_err(|e| e.to_string())?;
    let codec = OfhCodec::new(sim.du.codec);
    let (mut peaks, mut cplane) = (Vec::new(), 0);
    for r in CaptureReader::new(&cap[..]).map_err(|e| e.to_string())? {
        let r = r.map_err(|e| e.to_string())?;
        if r.direction == CaptureDirection::Meta {
            continue;
        }
        let f = codec.decode(&r.bytes).map_err(|e| e.to_string())?;
        match (&f.message, r.direction) {
            (OfhMessage::CPlane(m), CaptureDirection::ToRu) if m.type3.is_some() => {
                if m.app.filter_index != FILTER_INDEX_PRACH_SHORT {
                    return Err(format!("PRACH C-plane with filter_index {}", m.app.filter_index));
                }
                cplane += 1;
            }
            (OfhMessage::UPlane(m), CaptureDirection::ToDu) if m.app.filter_index == FILTER_INDEX_PRACH_SHORT => {
                let values: Vec<f64> = m
                    .sections
                    .iter()
                    .flat_map(|s| s.prbs.iter())
                    .flat_map(|p| {
                        let b = decompress(p);
                        (0..VALUES_PER_PRB / 2).map(move |k| {
                            let (re, im) = b.re(k);
                            (re as f64).hypot(im as f64)
                        })
                    })
                    .collect();
                if values.len() < 139 || values[139..].iter().any(|&v| v != 0.0) {
                    return Err(format!("PRACH frame carries {} values, non-zero past bin 139", values.len()));
                }
                let peak = (0..139).max_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
                peaks.push(peak);
            }
            _ => {}
        }
    }
    Ok((peaks, cplane))
}

fn prach() -> Outcome {
    const TONE: usize = 7;
    let (peaks, cplane) = prach_frames(TONE)?;
    ensure!(cplane > 0, "no PRACH C-plane frames");
    // 12 symbols per eAxC per occasion
    ensure!(!peaks.is_empty() && peaks.len() % 12 == 0, "{} PRACH U-plane frames", peaks.len());
    ensure!(peaks.iter().all(|&p| p == TONE), "tone at bin {TONE} seen at {peaks:?}");
    let (shifted, _) = prach_frames(TONE + 1)?;
    ensure!(shifted.len() == peaks.len(), "shifted run emitted {} frames", shifted.len());
    ensure!(
        shifted.iter().zip(&peaks).all(|(s, p)| *s == p + 1),
        "shifting the tone by one subcarrier moved the peak to {shifted:?}"
    );
    Ok(format!(
        "{} PRACH frames with filter_index {FILTER_INDEX_PRACH_SHORT} and 139 bins; tone at bin {TONE}, shifted tone at {}",
        peaks.len(),
        TONE + 1
    ))
}

// 12

fn run_twice(name: &str) -> Result<String, String> {
    let sc = ScenarioConfig::from_toml(&scenario_text(name)).map_err(|e| e.to_string())?.build(None).map_err(|e| e.to_string())?;
    let go = || -> Result<(Vec<u8>, String, SimOutcome), String> {
        let mut cap = Vec::new();
        let out = run(&sc.sim, Some(&mut cap)).map_err(|e| e.to_string())?;
        let csv = Report::from_outcome(&out, &sc.findings, sc.sim.seed).to_csv();
        Ok((cap, csv, out))
    };
    let (cap_a, csv_a, out) = go()?;
    let (cap_b, csv_b, _) = go()?;
    ensure!(cap_a == cap_b, "{name}: captures differ");
    ensure!(csv_a == csv_b, "{name}: reports differ");
    let a = analyze(&cap_a, None, None).map_err(|e| e.to_string())?;
    ensure!(a.ru == out.ru.reception(), "{name}: replayed RU counters {:?} differ from the run's {:?}", a.ru, out.ru.reception());
    ensure!(a.ul.on_time == out.du.ul_on_time && a.ul.late == out.du.ul_late, "{name}: replayed UL arrivals differ");
    Ok(format!("{name} {} MB", cap_a.len() / 1_000_000))
}

fn determinism_and_replay() -> Outcome {
    let mut detail = Vec::new();
    for name in ["tdd_7d1s2u", "fdd"] {
        detail.push(run_twice(name)?);
    }
    Ok(format!("identical captures and CSV for equal seeds, analyze reproduces RU counters: {}", detail.join(", ")))
}
