//! Capture files: `OFHC`, a version byte, then records of
//! `direction:u8 | time_us:i64 LE | len:u32 LE | bytes`.
//!
//! Direction 0 is DU to RU, 1 is RU to DU. Direction 2 carries the run
//! parameters (TOML text) needed to replay the capture.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::delay_profile::{DuDelayProfile, RuDelayProfile};

pub const CAPTURE_MAGIC: &[u8; 4] = b"OFHC";
pub const CAPTURE_VERSION: u8 = 1;
const MAX_RECORD_LEN: u32 = 1 << 20;

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("capture I/O: {0}")]
    Io(#[from] io::Error),
    #[error("not a capture file (bad magic)")]
    BadMagic,
    #[error("unsupported capture version {0}")]
    BadVersion(u8),
    #[error("capture truncated")]
    Truncated,
    #[error("invalid record direction {0}")]
    BadDirection(u8),
    #[error("record length {0} exceeds the limit")]
    RecordTooLong(u32),
    #[error("capture metadata: {0}")]
    Meta(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaptureDirection {
    ToRu,
    ToDu,
    Meta,
}

impl CaptureDirection {
    fn code(self) -> u8 {
        match self {
            CaptureDirection::ToRu => 0,
            CaptureDirection::ToDu => 1,
            CaptureDirection::Meta => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self, CaptureError> {
        match c {
            0 => Ok(CaptureDirection::ToRu),
            1 => Ok(CaptureDirection::ToDu),
            2 => Ok(CaptureDirection::Meta),
            other => Err(CaptureError::BadDirection(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureRecord {
    pub direction: CaptureDirection,
    pub time_us: i64,
    pub bytes: Vec<u8>,
}

/// Run parameters stored in the capture so it can be replayed alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureMeta {
    pub mu: u8,
    pub sampling_rate_hz: u64,
    pub nof_prb: u16,
    pub nof_ports: usize,
    pub eaxc_layout: [u8; 4],
    pub anchor_system_slot: u32,
    pub ru_t0_us: i64,
    pub du_t0_us: i64,
    pub lowphy_lead_slots: u32,
    pub ta3_tx_point_us: u32,
    pub processing_latency_us: u32,
    pub repo_capacity: usize,
    pub first_boundary: i64,
    pub last_boundary: i64,
    pub ru_profile: RuDelayProfile,
    pub du_profile: DuDelayProfile,
}

impl CaptureMeta {
    pub fn to_bytes(&self) -> Vec<u8> {
        toml::to_string(self).expect("metadata serializes").into_bytes()
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, CaptureError> {
        let text = std::str::from_utf8(b).map_err(|e| CaptureError::Meta(e.to_string()))?;
        toml::from_str(text).map_err(|e| CaptureError::Meta(e.to_string()))
    }
}

pub struct CaptureWriter<W: Write> {
    w: W,
}

impl<W: Write> CaptureWriter<W> {
    pub fn new(mut w: W) -> Result<Self, CaptureError> {
        w.write_all(CAPTURE_MAGIC)?;
        w.write_all(&[CAPTURE_VERSION])?;
        Ok(Self { w })
    }

    pub fn write(&mut self, direction: CaptureDirection, time_us: i64, bytes: &[u8]) -> Result<(), CaptureError> {
        self.w.write_all(&[direction.code()])?;
        self.w.write_all(&time_us.to_le_bytes())?;
        self.w.write_all(&(bytes.len() as u32).to_le_bytes())?;
        self.w.write_all(bytes)?;
        Ok(())
    }

    pub fn write_meta(&mut self, meta: &CaptureMeta) -> Result<(), CaptureError> {
        self.write(CaptureDirection::Meta, 0, &meta.to_bytes())
    }

    pub fn flush(&mut self) -> Result<(), CaptureError> {
        self.w.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.w
    }
}

/// Streams records out of a capture.
pub struct CaptureReader<R: Read> {
    r: R,
    done: bool,
}

impl<R: Read> CaptureReader<R> {
    pub fn new(mut r: R) -> Result<Self, CaptureError> {
        let mut head = [0u8; 5];
        match read_full(&mut r, &mut head)? {
            0 => return Err(CaptureError::Truncated),
            n if n < head.len() => return Err(CaptureError::Truncated),
            _ => {}
        }
        if &head[..4] != CAPTURE_MAGIC {
            return Err(CaptureError::BadMagic);
        }
        if head[4] != CAPTURE_VERSION {
            return Err(CaptureError::BadVersion(head[4]));
        }
        Ok(Self { r, done: false })
    }

    fn next_record(&mut self) -> Result<Option<CaptureRecord>, CaptureError> {
        let mut hdr = [0u8; 13];
        match read_full(&mut self.r, &mut hdr)? {
            0 => return Ok(None),
            13 => {}
            _ => return Err(CaptureError::Truncated),
        }
        let direction = CaptureDirection::from_code(hdr[0])?;
        let time_us = i64::from_le_bytes(hdr[1..9].try_into().unwrap());
        let len = u32::from_le_bytes(hdr[9..13].try_into().unwrap());
        if len > MAX_RECORD_LEN {
            return Err(CaptureError::RecordTooLong(len));
        }
        let mut bytes = vec![0u8; len as usize];
        if read_full(&mut self.r, &mut bytes)? != len as usize {
            return Err(CaptureError::Truncated);
        }
        Ok(Some(CaptureRecord { direction, time_us, bytes }))
    }
}

impl<R: Read> Iterator for CaptureReader<R> {
    type Item = Result<CaptureRecord, CaptureError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_record() {
            Ok(Some(r)) => Some(Ok(r)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match r.read(&mut buf[n..]) {
            Ok(0) => break,
            Ok(k) => n += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(n)
}

pub fn read_capture(bytes: &[u8]) -> Result<Vec<CaptureRecord>, CaptureError> {
    CaptureReader::new(bytes)?.collect()
}
