#![allow(dead_code)]

pub mod goldens;

use ofh_core::iq_compress::{compress, CompMethod, CompParams, IqBlock, VALUES_PER_PRB};
use ofh_core::ofh_codec::{
    AppHeader, CPlaneMessage, CSection, DataDirection, EaxcId, OfhCodec, OfhMessage, SectionType, Type3Params,
    UPlaneMessage, USection, PAYLOAD_VERSION,
};
use ofh_core::scenario::ScenarioConfig;
use rand::Rng;

pub fn scenario_text(name: &str) -> String {
    std::fs::read_to_string(format!("{}/../../scenarios/{name}.scenario", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

pub fn scenario(name: &str, frames: u32) -> ScenarioConfig {
    let mut c = ScenarioConfig::from_toml(&scenario_text(name)).unwrap();
    c.n_frames = frames;
    c
}

pub fn random_comp<R: Rng>(rng: &mut R) -> CompParams {
    if rng.gen_bool(0.2) {
        CompParams::UNCOMPRESSED
    } else {
        CompParams::new(CompMethod::Bfp, rng.gen_range(1..=16)).unwrap()
    }
}

pub fn random_block<R: Rng>(rng: &mut R) -> IqBlock {
    // Mix of full-scale and small blocks so every exponent shows up.
    let bits = rng.gen_range(1..=16u32);
    let lim = (1i32 << (bits - 1)) as i32;
    let mut b = [0i16; VALUES_PER_PRB];
    for v in &mut b {
        *v = rng.gen_range(-lim..lim) as i16;
    }
    IqBlock(b)
}

fn random_app<R: Rng>(rng: &mut R, mu: u8) -> AppHeader {
    AppHeader {
        data_direction: if rng.gen() { DataDirection::Downlink } else { DataDirection::Uplink },
        payload_version: PAYLOAD_VERSION,
        filter_index: rng.gen_range(0..16),
        frame_id: rng.gen(),
        subframe_id: rng.gen_range(0..10),
        slot_id: rng.gen_range(0..1u8 << mu),
        start_symbol_id: rng.gen_range(0..14),
    }
}

fn random_span<R: Rng>(rng: &mut R, nof_prb: u16) -> (u16, u8) {
    let start = rng.gen_range(0..nof_prb);
    if rng.gen_bool(0.1) {
        return (start, 0);
    }
    let max = (nof_prb - start).min(255);
    (start, rng.gen_range(1..=max) as u8)
}

/// A structurally valid frame for `codec`, with eAxC and sequence id.
pub fn random_message<R: Rng>(rng: &mut R, codec: &OfhCodec) -> (OfhMessage, EaxcId, u8) {
    let cfg = *codec.config();
    let app = random_app(rng, cfg.mu);
    let eaxc = EaxcId { du_port: rng.gen_range(0..16), band_sector: rng.gen_range(0..16), cc: rng.gen_range(0..16), ru_port: rng.gen_range(0..16) };
    let seq = rng.gen();
    let msg = if rng.gen() {
        let type3 = rng.gen_bool(0.3);
        let n = rng.gen_range(1..=4);
        let sections = (0..n)
            .map(|_| {
                let (start_prb, num_prb) = random_span(rng, cfg.nof_prb);
                CSection {
                    section_id: rng.gen_range(0..4096),
                    rb: rng.gen(),
                    sym_inc: rng.gen(),
                    start_prb,
                    num_prb,
                    re_mask: rng.gen_range(0..4096),
                    num_symbol: rng.gen_range(1..=14 - app.start_symbol_id),
                    ef: false,
                    beam_id: rng.gen_range(0..32768),
                    freq_offset: type3.then(|| rng.gen_range(-(1 << 23)..(1 << 23))),
                }
            })
            .collect();
        OfhMessage::CPlane(CPlaneMessage {
            app,
            section_type: if type3 { SectionType::Type3 } else { SectionType::Type1 },
            comp: random_comp(rng),
            type3: type3.then(|| Type3Params { time_offset: rng.gen(), frame_structure: rng.gen(), cp_length: rng.gen() }),
            sections,
        })
    } else {
        let n = rng.gen_range(1..=3);
        let sections = (0..n)
            .map(|_| {
                let (start_prb, num_prb) = random_span(rng, cfg.nof_prb);
                let count = if num_prb == 0 { cfg.nof_prb - start_prb } else { num_prb as u16 };
                let comp = random_comp(rng);
                USection {
                    section_id: rng.gen_range(0..4096),
                    rb: rng.gen(),
                    sym_inc: rng.gen(),
                    start_prb,
                    num_prb,
                    comp,
                    prbs: (0..count).map(|_| compress(&random_block(rng), comp)).collect(),
                }
            })
            .collect();
        OfhMessage::UPlane(UPlaneMessage { app, sections })
    };
    (msg, eaxc, seq)
}
