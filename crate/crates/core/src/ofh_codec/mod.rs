//! Open Fronthaul C-plane and U-plane messages over eCPRI.
//!
//! Frame layout (all multi-byte fields big-endian):
//!
//! ```text
//! eCPRI common header   4 B  version:4 reserved:3 C:1 | msg_type:8 | payload_size:16
//! eCPRI transport       4 B  eAxC:16 | seq_id:8 | E:1 sub_seq:7
//! application header    4 B  dir:1 payload_version:3 filter_index:4 | frame_id:8 |
//!                            subframe_id:4 slot_id:6 start_symbol_id:6
//! ```
//!
//! C-plane section type 1 continues with `num_sections:8 | section_type:8 |
//! ud_comp_hdr:8 | reserved:8` and 8-byte sections
//! `section_id:12 rb:1 sym_inc:1 start_prb:10 | num_prb:8 | re_mask:12
//! num_symbol:4 | ef:1 beam_id:15`.
//!
//! Section type 3 continues with `num_sections:8 | section_type:8 |
//! time_offset:16 | frame_structure:8 | cp_length:16 | ud_comp_hdr:8` and
//! 12-byte sections: the type-1 section followed by `freq_offset:24`
//! (signed, half-subcarrier units) and a reserved byte.
//!
//! U-plane data sections follow the application header back to back until
//! the end of the payload: `section_id:12 rb:1 sym_inc:1 start_prb:10 |
//! num_prb:8 | ud_comp_hdr:8 | reserved:8` then `num_prb` PRB blocks.

mod sequence;

pub use sequence::{Plane, SequenceTracker, SequenceVerdict};

use thiserror::Error;

use crate::iq_compress::{pack_prb, unpack_prb, CompParams, CompressedPrb, CompressionError};

pub const ECPRI_VERSION: u8 = 1;
pub const MSG_TYPE_IQ_DATA: u8 = 0x00;
pub const MSG_TYPE_RT_CONTROL: u8 = 0x02;
pub const PAYLOAD_VERSION: u8 = 1;
/// Filter index of standard channels.
pub const FILTER_INDEX_STANDARD: u8 = 0;
/// Filter index of short-preamble PRACH (formats A1..C2, including B4).
pub const FILTER_INDEX_PRACH_SHORT: u8 = 4;
/// Frames shorter than a minimum Ethernet payload may carry zero padding.
pub const MIN_FRAME_LEN: usize = 46;

const ECPRI_HEADER_LEN: usize = 4;
const TRANSPORT_LEN: usize = 4;
const APP_HEADER_LEN: usize = 4;
const SECTION_LEN: usize = 8;
const TYPE3_SECTION_LEN: usize = 12;
const U_SECTION_HEADER_LEN: usize = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("field {field} = {value} does not fit in {bits} bits")]
    FieldOverflow { field: &'static str, value: i64, bits: u32 },
    #[error("invalid message: {0}")]
    InvalidMessage(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("buffer truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("unsupported eCPRI version {0}")]
    UnsupportedVersion(u8),
    #[error("unsupported eCPRI message type {0:#04x}")]
    UnsupportedMessageType(u8),
    #[error("unsupported section type {0}")]
    UnsupportedSectionType(u8),
    #[error("unsupported feature: {0}")]
    Unsupported(&'static str),
    #[error("payload_size {declared} but {available} bytes follow the common header")]
    PayloadSize { declared: usize, available: usize },
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("invalid {field}: {value}")]
    InvalidField { field: &'static str, value: i64 },
    #[error("U-plane section carries {actual} payload bytes, {expected} declared")]
    LengthMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Compression(#[from] CompressionError),
    #[error("expected a {expected} message")]
    UnexpectedMessageType { expected: &'static str },
}

/// Bit widths of the four eAxC sub-fields; they must sum to 16.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EaxcLayout {
    pub du_port_bits: u8,
    pub band_sector_bits: u8,
    pub cc_bits: u8,
    pub ru_port_bits: u8,
}

impl Default for EaxcLayout {
    fn default() -> Self {
        Self { du_port_bits: 4, band_sector_bits: 4, cc_bits: 4, ru_port_bits: 4 }
    }
}

impl EaxcLayout {
    pub fn new(du_port_bits: u8, band_sector_bits: u8, cc_bits: u8, ru_port_bits: u8) -> Result<Self, EncodeError> {
        let total = du_port_bits as u32 + band_sector_bits as u32 + cc_bits as u32 + ru_port_bits as u32;
        if total != 16 {
            return Err(EncodeError::InvalidMessage(format!("eAxC field widths sum to {total}, not 16")));
        }
        Ok(Self { du_port_bits, band_sector_bits, cc_bits, ru_port_bits })
    }
}

/// Logical antenna-carrier stream identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct EaxcId {
    pub du_port: u8,
    pub band_sector: u8,
    pub cc: u8,
    pub ru_port: u8,
}

impl EaxcId {
    pub fn ru_port(ru_port: u8) -> Self {
        Self { ru_port, ..Self::default() }
    }

    pub fn pack(&self, layout: &EaxcLayout) -> Result<u16, EncodeError> {
        let mut raw: u32 = 0;
        for (field, value, bits) in [
            ("eaxc.du_port", self.du_port, layout.du_port_bits),
            ("eaxc.band_sector", self.band_sector, layout.band_sector_bits),
            ("eaxc.cc", self.cc, layout.cc_bits),
            ("eaxc.ru_port", self.ru_port, layout.ru_port_bits),
        ] {
            check_unsigned(field, value as u64, bits as u32)?;
            raw = (raw << bits) | value as u32;
        }
        Ok(raw as u16)
    }

    pub fn unpack(raw: u16, layout: &EaxcLayout) -> Self {
        let mut rest = raw as u32;
        let mut take = |bits: u8| {
            let v = rest & ((1u32 << bits) - 1);
            rest >>= bits;
            v as u8
        };
        let ru_port = take(layout.ru_port_bits);
        let cc = take(layout.cc_bits);
        let band_sector = take(layout.band_sector_bits);
        let du_port = take(layout.du_port_bits);
        Self { du_port, band_sector, cc, ru_port }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DataDirection {
    Uplink,
    Downlink,
}

impl DataDirection {
    fn bit(self) -> u8 {
        match self {
            DataDirection::Uplink => 0,
            DataDirection::Downlink => 1,
        }
    }
}

/// Decoded eCPRI common and transport header fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EcpriHeader {
    pub version: u8,
    pub msg_type: u8,
    pub payload_size: u16,
    pub eaxc: EaxcId,
    pub seq_id: u8,
}

/// Radio application header shared by both planes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AppHeader {
    pub data_direction: DataDirection,
    pub payload_version: u8,
    pub filter_index: u8,
    pub frame_id: u8,
    pub subframe_id: u8,
    pub slot_id: u8,
    pub start_symbol_id: u8,
}

impl AppHeader {
    pub fn new(data_direction: DataDirection, frame_id: u8, subframe_id: u8, slot_id: u8, start_symbol_id: u8) -> Self {
        Self {
            data_direction,
            payload_version: PAYLOAD_VERSION,
            filter_index: FILTER_INDEX_STANDARD,
            frame_id,
            subframe_id,
            slot_id,
            start_symbol_id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SectionType {
    Type1,
    Type3,
}

impl SectionType {
    pub fn code(self) -> u8 {
        match self {
            SectionType::Type1 => 1,
            SectionType::Type3 => 3,
        }
    }
}

/// Common-header fields of a section type 3 message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Type3Params {
    pub time_offset: u16,
    pub frame_structure: u8,
    pub cp_length: u16,
}

/// One C-plane section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CSection {
    pub section_id: u16,
    pub rb: bool,
    pub sym_inc: bool,
    pub start_prb: u16,
    /// 0 means every PRB of the carrier.
    pub num_prb: u8,
    pub re_mask: u16,
    pub num_symbol: u8,
    pub ef: bool,
    pub beam_id: u16,
    /// PRACH frequency offset in half-subcarrier units (type 3 only).
    pub freq_offset: Option<i32>,
}

impl CSection {
    pub fn new(section_id: u16, start_prb: u16, num_prb: u8, num_symbol: u8) -> Self {
        Self {
            section_id,
            rb: false,
            sym_inc: false,
            start_prb,
            num_prb,
            re_mask: 0x0fff,
            num_symbol,
            ef: false,
            beam_id: 0,
            freq_offset: None,
        }
    }

    pub fn effective_num_prb(&self, carrier_prb: u16) -> u16 {
        effective_num_prb(self.num_prb, self.start_prb, carrier_prb)
    }
}

fn effective_num_prb(num_prb: u8, start_prb: u16, carrier_prb: u16) -> u16 {
    if num_prb == 0 {
        carrier_prb.saturating_sub(start_prb)
    } else {
        num_prb as u16
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CPlaneMessage {
    pub app: AppHeader,
    pub section_type: SectionType,
    pub comp: CompParams,
    pub type3: Option<Type3Params>,
    pub sections: Vec<CSection>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct USection {
    pub section_id: u16,
    pub rb: bool,
    pub sym_inc: bool,
    pub start_prb: u16,
    /// 0 means every PRB of the carrier from `start_prb`.
    pub num_prb: u8,
    pub comp: CompParams,
    pub prbs: Vec<CompressedPrb>,
}

impl USection {
    pub fn effective_num_prb(&self, carrier_prb: u16) -> u16 {
        effective_num_prb(self.num_prb, self.start_prb, carrier_prb)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UPlaneMessage {
    pub app: AppHeader,
    pub sections: Vec<USection>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OfhMessage {
    CPlane(CPlaneMessage),
    UPlane(UPlaneMessage),
}

impl OfhMessage {
    pub fn app(&self) -> &AppHeader {
        match self {
            OfhMessage::CPlane(m) => &m.app,
            OfhMessage::UPlane(m) => &m.app,
        }
    }
}

/// A decoded frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OfhFrame {
    pub eaxc: EaxcId,
    pub seq_id: u8,
    pub message: OfhMessage,
}

/// Carrier parameters the codec needs to validate and size messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodecConfig {
    pub layout: EaxcLayout,
    pub mu: u8,
    pub nof_prb: u16,
}

impl CodecConfig {
    pub fn new(mu: u8, nof_prb: u16) -> Self {
        Self { layout: EaxcLayout::default(), mu, nof_prb }
    }
}

/// Encoder/decoder bound to one carrier configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OfhCodec {
    cfg: CodecConfig,
}

fn check_unsigned(field: &'static str, value: u64, bits: u32) -> Result<(), EncodeError> {
    if value >> bits != 0 {
        Err(EncodeError::FieldOverflow { field, value: value as i64, bits })
    } else {
        Ok(())
    }
}

fn check_signed(field: &'static str, value: i64, bits: u32) -> Result<(), EncodeError> {
    let lim = 1i64 << (bits - 1);
    if value < -lim || value >= lim {
        Err(EncodeError::FieldOverflow { field, value, bits })
    } else {
        Ok(())
    }
}

fn invalid(msg: impl Into<String>) -> EncodeError {
    EncodeError::InvalidMessage(msg.into())
}

impl OfhCodec {
    pub fn new(cfg: CodecConfig) -> Self {
        Self { cfg }
    }

    pub fn config(&self) -> &CodecConfig {
        &self.cfg
    }

    fn check_app(&self, app: &AppHeader) -> Result<(), EncodeError> {
        check_unsigned("payload_version", app.payload_version as u64, 3)?;
        check_unsigned("filter_index", app.filter_index as u64, 4)?;
        check_unsigned("subframe_id", app.subframe_id as u64, 4)?;
        check_unsigned("slot_id", app.slot_id as u64, 6)?;
        check_unsigned("start_symbol_id", app.start_symbol_id as u64, 6)?;
        if app.payload_version != PAYLOAD_VERSION {
            return Err(invalid(format!("payload_version {}", app.payload_version)));
        }
        if app.subframe_id >= 10 {
            return Err(invalid(format!("subframe_id {}", app.subframe_id)));
        }
        if app.slot_id as u32 >= 1 << self.cfg.mu {
            return Err(invalid(format!("slot_id {} at mu={}", app.slot_id, self.cfg.mu)));
        }
        if app.start_symbol_id >= 14 {
            return Err(invalid(format!("start_symbol_id {}", app.start_symbol_id)));
        }
        Ok(())
    }

    fn check_prb_span(&self, start_prb: u16, num_prb: u8) -> Result<(), EncodeError> {
        let n = effective_num_prb(num_prb, start_prb, self.cfg.nof_prb);
        if start_prb as u32 + n as u32 > self.cfg.nof_prb as u32 || n == 0 {
            return Err(invalid(format!(
                "PRBs {start_prb}+{n} exceed the {}-PRB carrier",
                self.cfg.nof_prb
            )));
        }
        Ok(())
    }

    fn write_headers(&self, out: &mut Vec<u8>, msg_type: u8, eaxc: EaxcId, seq: u8, app: &AppHeader) -> Result<(), EncodeError> {
        let raw = eaxc.pack(&self.cfg.layout)?;
        out.extend_from_slice(&[ECPRI_VERSION << 4, msg_type, 0, 0]);
        out.extend_from_slice(&raw.to_be_bytes());
        out.push(seq);
        out.push(0x80);
        out.push((app.data_direction.bit() << 7) | (app.payload_version << 4) | app.filter_index);
        out.push(app.frame_id);
        let tail = ((app.subframe_id as u16) << 12) | ((app.slot_id as u16) << 6) | app.start_symbol_id as u16;
        out.extend_from_slice(&tail.to_be_bytes());
        Ok(())
    }

    fn finish(out: &mut [u8]) {
        let payload = (out.len() - ECPRI_HEADER_LEN) as u16;
        out[2..4].copy_from_slice(&payload.to_be_bytes());
    }

    pub fn encode_cplane(&self, msg: &CPlaneMessage, eaxc: EaxcId, seq: u8) -> Result<Vec<u8>, EncodeError> {
        self.check_app(&msg.app)?;
        for s in &msg.sections {
            check_unsigned("section_id", s.section_id as u64, 12)?;
            check_unsigned("start_prb", s.start_prb as u64, 10)?;
            check_unsigned("re_mask", s.re_mask as u64, 12)?;
            check_unsigned("num_symbol", s.num_symbol as u64, 4)?;
            check_unsigned("beam_id", s.beam_id as u64, 15)?;
            if let Some(f) = s.freq_offset {
                check_signed("freq_offset", f as i64, 24)?;
            }
        }
        if msg.sections.is_empty() {
            return Err(invalid("C-plane message without sections"));
        }
        check_unsigned("num_sections", msg.sections.len() as u64, 8)?;
        let is_type3 = msg.section_type == SectionType::Type3;
        if is_type3 != msg.type3.is_some() || msg.sections.iter().any(|s| s.freq_offset.is_some() != is_type3) {
            return Err(invalid("section type 3 requires PRACH fields on the message and on every section"));
        }
        for s in &msg.sections {
            if s.ef {
                return Err(invalid("section extensions are not supported"));
            }
            if s.num_symbol == 0 || msg.app.start_symbol_id + s.num_symbol > 14 {
                return Err(invalid(format!(
                    "symbols {}+{} outside the slot",
                    msg.app.start_symbol_id, s.num_symbol
                )));
            }
            self.check_prb_span(s.start_prb, s.num_prb)?;
        }

        let mut out = Vec::with_capacity(32 + msg.sections.len() * TYPE3_SECTION_LEN);
        self.write_headers(&mut out, MSG_TYPE_RT_CONTROL, eaxc, seq, &msg.app)?;
        out.push(msg.sections.len() as u8);
        out.push(msg.section_type.code());
        match msg.type3 {
            None => {
                out.push(msg.comp.ud_comp_hdr());
                out.push(0);
            }
            Some(t3) => {
                out.extend_from_slice(&t3.time_offset.to_be_bytes());
                out.push(t3.frame_structure);
                out.extend_from_slice(&t3.cp_length.to_be_bytes());
                out.push(msg.comp.ud_comp_hdr());
            }
        }
        for s in &msg.sections {
            write_section_prefix(&mut out, s.section_id, s.rb, s.sym_inc, s.start_prb);
            out.push(s.num_prb);
            out.extend_from_slice(&((s.re_mask << 4) | s.num_symbol as u16).to_be_bytes());
            out.extend_from_slice(&(((s.ef as u16) << 15) | s.beam_id).to_be_bytes());
            if let Some(f) = s.freq_offset {
                let raw = (f as u32) & 0x00ff_ffff;
                out.extend_from_slice(&raw.to_be_bytes()[1..]);
                out.push(0);
            }
        }
        Self::finish(&mut out);
        Ok(out)
    }

    pub fn encode_uplane(&self, msg: &UPlaneMessage, eaxc: EaxcId, seq: u8) -> Result<Vec<u8>, EncodeError> {
        self.check_app(&msg.app)?;
        if msg.sections.is_empty() {
            return Err(invalid("U-plane message without data sections"));
        }
        for s in &msg.sections {
            check_unsigned("section_id", s.section_id as u64, 12)?;
            check_unsigned("start_prb", s.start_prb as u64, 10)?;
            self.check_prb_span(s.start_prb, s.num_prb)?;
            let n = s.effective_num_prb(self.cfg.nof_prb) as usize;
            if s.prbs.len() != n {
                return Err(invalid(format!("section {} declares {n} PRBs, carries {}", s.section_id, s.prbs.len())));
            }
            for prb in &s.prbs {
                if prb.params != s.comp {
                    return Err(invalid("PRB compression differs from the section header"));
                }
                check_unsigned("exponent", prb.exponent as u64, 4)?;
                let w = s.comp.iq_width as u32;
                for &m in &prb.mantissas {
                    check_signed("mantissa", m as i64, w)?;
                }
            }
        }
        let total: usize = msg.sections.iter().map(|s| U_SECTION_HEADER_LEN + s.prbs.len() * s.comp.block_size()).sum();
        let mut out = Vec::with_capacity(12 + total);
        self.write_headers(&mut out, MSG_TYPE_IQ_DATA, eaxc, seq, &msg.app)?;
        for s in &msg.sections {
            write_section_prefix(&mut out, s.section_id, s.rb, s.sym_inc, s.start_prb);
            out.push(s.num_prb);
            out.push(s.comp.ud_comp_hdr());
            out.push(0);
            for prb in &s.prbs {
                pack_prb(prb, &mut out);
            }
        }
        Self::finish(&mut out);
        Ok(out)
    }

    pub fn encode(&self, msg: &OfhMessage, eaxc: EaxcId, seq: u8) -> Result<Vec<u8>, EncodeError> {
        match msg {
            OfhMessage::CPlane(m) => self.encode_cplane(m, eaxc, seq),
            OfhMessage::UPlane(m) => self.encode_uplane(m, eaxc, seq),
        }
    }

    /// Parses the eCPRI headers only.
    pub fn decode_header(&self, bytes: &[u8]) -> Result<EcpriHeader, DecodeError> {
        let mut r = Reader::new(bytes);
        let b0 = r.u8()?;
        let version = b0 >> 4;
        if version != ECPRI_VERSION {
            return Err(DecodeError::UnsupportedVersion(version));
        }
        if b0 & 0x01 != 0 {
            return Err(DecodeError::Unsupported("eCPRI concatenation"));
        }
        let msg_type = r.u8()?;
        if msg_type != MSG_TYPE_IQ_DATA && msg_type != MSG_TYPE_RT_CONTROL {
            return Err(DecodeError::UnsupportedMessageType(msg_type));
        }
        let payload_size = r.u16()?;
        let eaxc_raw = r.u16()?;
        let seq_id = r.u8()?;
        let b7 = r.u8()?;
        if b7 != 0x80 {
            return Err(DecodeError::Unsupported("eCPRI fragmentation"));
        }
        Ok(EcpriHeader {
            version,
            msg_type,
            payload_size,
            eaxc: EaxcId::unpack(eaxc_raw, &self.cfg.layout),
            seq_id,
        })
    }

    pub fn decode(&self, bytes: &[u8]) -> Result<OfhFrame, DecodeError> {
        let header = self.decode_header(bytes)?;
        let declared = header.payload_size as usize;
        let available = bytes.len() - ECPRI_HEADER_LEN;
        if declared > available {
            return Err(DecodeError::Truncated { needed: ECPRI_HEADER_LEN + declared, available: bytes.len() });
        }
        if declared < TRANSPORT_LEN + APP_HEADER_LEN {
            return Err(DecodeError::PayloadSize { declared, available });
        }
        let end = ECPRI_HEADER_LEN + declared;
        let padding = &bytes[end..];
        if !padding.is_empty() && (bytes.len() > MIN_FRAME_LEN || padding.iter().any(|&b| b != 0)) {
            return Err(DecodeError::TrailingBytes(padding.len()));
        }
        let mut r = Reader::new(&bytes[ECPRI_HEADER_LEN + TRANSPORT_LEN..end]);
        let app = self.read_app(&mut r)?;
        let message = match header.msg_type {
            MSG_TYPE_RT_CONTROL => OfhMessage::CPlane(self.read_cplane(app, &mut r)?),
            _ => OfhMessage::UPlane(self.read_uplane(app, &mut r)?),
        };
        if r.remaining() > 0 {
            return Err(DecodeError::TrailingBytes(r.remaining()));
        }
        Ok(OfhFrame { eaxc: header.eaxc, seq_id: header.seq_id, message })
    }

    pub fn decode_cplane(&self, bytes: &[u8]) -> Result<(EcpriHeader, CPlaneMessage), DecodeError> {
        let header = self.decode_header(bytes)?;
        match self.decode(bytes)?.message {
            OfhMessage::CPlane(m) => Ok((header, m)),
            OfhMessage::UPlane(_) => Err(DecodeError::UnexpectedMessageType { expected: "C-plane" }),
        }
    }

    pub fn decode_uplane(&self, bytes: &[u8]) -> Result<(EcpriHeader, UPlaneMessage), DecodeError> {
        let header = self.decode_header(bytes)?;
        match self.decode(bytes)?.message {
            OfhMessage::UPlane(m) => Ok((header, m)),
            OfhMessage::CPlane(_) => Err(DecodeError::UnexpectedMessageType { expected: "U-plane" }),
        }
    }

    fn read_app(&self, r: &mut Reader<'_>) -> Result<AppHeader, DecodeError> {
        let b0 = r.u8()?;
        let frame_id = r.u8()?;
        let tail = r.u16()?;
        let app = AppHeader {
            data_direction: if b0 >> 7 == 1 { DataDirection::Downlink } else { DataDirection::Uplink },
            payload_version: (b0 >> 4) & 0x07,
            filter_index: b0 & 0x0f,
            frame_id,
            subframe_id: (tail >> 12) as u8,
            slot_id: ((tail >> 6) & 0x3f) as u8,
            start_symbol_id: (tail & 0x3f) as u8,
        };
        let bad = |field, value: u8| Err(DecodeError::InvalidField { field, value: value as i64 });
        if app.payload_version != PAYLOAD_VERSION {
            return bad("payload_version", app.payload_version);
        }
        if app.subframe_id >= 10 {
            return bad("subframe_id", app.subframe_id);
        }
        if app.slot_id as u32 >= 1 << self.cfg.mu {
            return bad("slot_id", app.slot_id);
        }
        if app.start_symbol_id >= 14 {
            return bad("start_symbol_id", app.start_symbol_id);
        }
        Ok(app)
    }

    fn read_prb_span(&self, start_prb: u16, num_prb: u8) -> Result<u16, DecodeError> {
        let n = effective_num_prb(num_prb, start_prb, self.cfg.nof_prb);
        if n == 0 || start_prb as u32 + n as u32 > self.cfg.nof_prb as u32 {
            return Err(DecodeError::InvalidField { field: "start_prb", value: start_prb as i64 });
        }
        Ok(n)
    }

    fn read_cplane(&self, app: AppHeader, r: &mut Reader<'_>) -> Result<CPlaneMessage, DecodeError> {
        let num_sections = r.u8()?;
        let section_type = match r.u8()? {
            1 => SectionType::Type1,
            3 => SectionType::Type3,
            other => return Err(DecodeError::UnsupportedSectionType(other)),
        };
        let (type3, comp_byte) = match section_type {
            SectionType::Type1 => {
                let comp = r.u8()?;
                r.u8()?;
                (None, comp)
            }
            SectionType::Type3 => {
                let time_offset = r.u16()?;
                let frame_structure = r.u8()?;
                let cp_length = r.u16()?;
                let comp = r.u8()?;
                (Some(Type3Params { time_offset, frame_structure, cp_length }), comp)
            }
        };
        let comp = CompParams::from_ud_comp_hdr(comp_byte)?;
        if num_sections == 0 {
            return Err(DecodeError::InvalidField { field: "num_sections", value: 0 });
        }
        let section_len = if type3.is_some() { TYPE3_SECTION_LEN } else { SECTION_LEN };
        r.need(num_sections as usize * section_len)?;
        let mut sections = Vec::with_capacity(num_sections as usize);
        for _ in 0..num_sections {
            let (section_id, rb, sym_inc, start_prb) = read_section_prefix(r)?;
            let num_prb = r.u8()?;
            let mask_sym = r.u16()?;
            let ef_beam = r.u16()?;
            let freq_offset = if type3.is_some() {
                let raw = ((r.u16()? as u32) << 8) | r.u8()? as u32;
                r.u8()?;
                Some(((raw << 8) as i32) >> 8)
            } else {
                None
            };
            let s = CSection {
                section_id,
                rb,
                sym_inc,
                start_prb,
                num_prb,
                re_mask: mask_sym >> 4,
                num_symbol: (mask_sym & 0x0f) as u8,
                ef: ef_beam >> 15 == 1,
                beam_id: ef_beam & 0x7fff,
                freq_offset,
            };
            if s.ef {
                return Err(DecodeError::Unsupported("section extensions"));
            }
            if s.num_symbol == 0 || app.start_symbol_id + s.num_symbol > 14 {
                return Err(DecodeError::InvalidField { field: "num_symbol", value: s.num_symbol as i64 });
            }
            self.read_prb_span(start_prb, num_prb)?;
            sections.push(s);
        }
        Ok(CPlaneMessage { app, section_type, comp, type3, sections })
    }

    fn read_uplane(&self, app: AppHeader, r: &mut Reader<'_>) -> Result<UPlaneMessage, DecodeError> {
        let mut sections = Vec::new();
        while r.remaining() > 0 {
            let (section_id, rb, sym_inc, start_prb) = read_section_prefix(r)?;
            let num_prb = r.u8()?;
            let comp = CompParams::from_ud_comp_hdr(r.u8()?)?;
            r.u8()?;
            let n = self.read_prb_span(start_prb, num_prb)? as usize;
            let block = comp.block_size();
            let expected = n * block;
            if r.remaining() < expected {
                return Err(DecodeError::LengthMismatch { expected, actual: r.remaining() });
            }
            let mut prbs = Vec::with_capacity(n);
            for _ in 0..n {
                prbs.push(unpack_prb(r.take(block)?, comp)?);
            }
            sections.push(USection { section_id, rb, sym_inc, start_prb, num_prb, comp, prbs });
        }
        if sections.is_empty() {
            return Err(DecodeError::InvalidField { field: "num_sections", value: 0 });
        }
        Ok(UPlaneMessage { app, sections })
    }
}

fn write_section_prefix(out: &mut Vec<u8>, section_id: u16, rb: bool, sym_inc: bool, start_prb: u16) {
    let v: u32 = ((section_id as u32) << 12) | ((rb as u32) << 11) | ((sym_inc as u32) << 10) | start_prb as u32;
    out.extend_from_slice(&v.to_be_bytes()[1..]);
}

fn read_section_prefix(r: &mut Reader<'_>) -> Result<(u16, bool, bool, u16), DecodeError> {
    let b = r.take(3)?;
    let v = ((b[0] as u32) << 16) | ((b[1] as u32) << 8) | b[2] as u32;
    Ok(((v >> 12) as u16, (v >> 11) & 1 == 1, (v >> 10) & 1 == 1, (v & 0x3ff) as u16))
}

/// Bounds-checked cursor; every read reports truncation instead of panicking.
struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn need(&self, n: usize) -> Result<(), DecodeError> {
        if self.remaining() < n {
            Err(DecodeError::Truncated { needed: self.pos + n, available: self.buf.len() })
        } else {
            Ok(())
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        self.need(n)?;
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, DecodeError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }
}
