//! Hand-assembled frames in testdata/goldens.txt and their encoder inputs.

use std::collections::HashMap;

use ofh_core::iq_compress::{compress, CompParams, IqBlock};
use ofh_core::ofh_codec::{
    AppHeader, CPlaneMessage, CSection, CodecConfig, DataDirection, EaxcId, EaxcLayout, OfhCodec, SectionType,
    UPlaneMessage, USection,
};

pub struct Golden {
    pub name: String,
    pub expected: Vec<u8>,
    pub encoded: Vec<u8>,
}

fn lcg_samples(seed: u64, count: usize, shift: u32) -> Vec<i16> {
    let mut x = seed;
    (0..count)
        .map(|_| {
            x = (x * 1103515245 + 12345) % (1 << 31);
            let v = ((x >> 8) % 65536) as i32 - 32768;
            (v >> shift) as i16
        })
        .collect()
}

fn load() -> Vec<(String, HashMap<String, String>)> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/testdata/goldens.txt")).unwrap();
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let mut parts = line.split_whitespace();
            let name = parts.next().unwrap().to_string();
            let kv = parts
                .map(|p| {
                    let (k, v) = p.split_once('=').unwrap();
                    (k.to_string(), v.to_string())
                })
                .collect();
            (name, kv)
        })
        .collect()
}

fn num<T: std::str::FromStr>(kv: &HashMap<String, String>, key: &str) -> T
where
    T::Err: std::fmt::Debug,
{
    kv[key].parse().unwrap()
}

fn hex(s: &str) -> Vec<u8> {
    (0..s.len()).step_by(2).map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap()).collect()
}

fn app(kv: &HashMap<String, String>) -> AppHeader {
    let dir = if num::<u8>(kv, "dir") == 1 { DataDirection::Downlink } else { DataDirection::Uplink };
    AppHeader::new(dir, num(kv, "frame"), num(kv, "subframe"), num(kv, "slot"), num(kv, "symbol"))
}

/// Every golden case with the bytes the codec produces for it.
pub fn goldens(codec: &OfhCodec) -> Vec<Golden> {
    let layout = EaxcLayout::default();
    load()
        .into_iter()
        .map(|(name, kv)| {
            let expected = hex(&kv["hex"]);
            let eaxc = EaxcId::unpack(num(&kv, "eaxc"), &layout);
            let seq: u8 = num(&kv, "seq");
            let width: u8 = num(&kv, "width");
            let comp = if width == 16 { CompParams::UNCOMPRESSED } else { CompParams::bfp(width).unwrap() };
            let encoded = match kv["kind"].as_str() {
                "cplane" => {
                    let mut section =
                        CSection::new(num(&kv, "section_id"), num(&kv, "start_prb"), num(&kv, "num_prb"), num(&kv, "num_symbol"));
                    section.re_mask = 0xfff;
                    let msg =
                        CPlaneMessage { app: app(&kv), section_type: SectionType::Type1, comp, type3: None, sections: vec![section] };
                    codec.encode_cplane(&msg, eaxc, seq).unwrap()
                }
                _ => {
                    let n: usize = num(&kv, "num_prb");
                    let samples = lcg_samples(num(&kv, "seed"), 24 * n, num(&kv, "shift"));
                    let prbs = samples.chunks(24).map(|c| compress(&IqBlock(c.try_into().unwrap()), comp)).collect();
                    let section = USection {
                        section_id: num(&kv, "section_id"),
                        rb: false,
                        sym_inc: false,
                        start_prb: num(&kv, "start_prb"),
                        num_prb: n as u8,
                        comp,
                        prbs,
                    };
                    let msg = UPlaneMessage { app: app(&kv), sections: vec![section] };
                    codec.encode_uplane(&msg, eaxc, seq).unwrap()
                }
            };
            Golden { name, expected, encoded }
        })
        .collect()
}

pub fn golden_codec() -> OfhCodec {
    OfhCodec::new(CodecConfig::new(1, 51))
}
