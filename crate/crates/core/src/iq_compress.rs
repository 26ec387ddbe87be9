//! Block-floating-point and pass-through compression of per-PRB IQ blocks.
//!
//! A PRB block is 12 resource elements, interleaved `I0 Q0 I1 Q1 ...`.
//! On the wire a BFP block is one exponent byte (low nibble) followed by
//! 24 two's-complement mantissas of `iq_width` bits, packed MSB first and
//! zero-padded to a byte boundary. Uncompressed blocks are 24 big-endian
//! 16-bit values.

use thiserror::Error;

pub const RES_PER_PRB: usize = 12;
pub const VALUES_PER_PRB: usize = 2 * RES_PER_PRB;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompressionError {
    #[error("iq width {0} is outside 1..=16")]
    InvalidWidth(u8),
    #[error("unsupported compression method {0}")]
    UnsupportedMethod(u8),
    #[error("PRB block needs {expected} bytes, got {actual}")]
    BlockLength { expected: usize, actual: usize },
}

/// Compression method as carried in the `udCompMeth` nibble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompMethod {
    None,
    Bfp,
}

impl CompMethod {
    pub fn code(self) -> u8 {
        match self {
            CompMethod::None => 0,
            CompMethod::Bfp => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, CompressionError> {
        match code {
            0 => Ok(CompMethod::None),
            1 => Ok(CompMethod::Bfp),
            other => Err(CompressionError::UnsupportedMethod(other)),
        }
    }
}

/// Method and mantissa width for a stream of PRB blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CompParams {
    pub method: CompMethod,
    pub iq_width: u8,
}

impl CompParams {
    pub const UNCOMPRESSED: CompParams = CompParams { method: CompMethod::None, iq_width: 16 };

    pub fn bfp(iq_width: u8) -> Result<Self, CompressionError> {
        Self::new(CompMethod::Bfp, iq_width)
    }

    pub fn new(method: CompMethod, iq_width: u8) -> Result<Self, CompressionError> {
        if !(1..=16).contains(&iq_width) {
            return Err(CompressionError::InvalidWidth(iq_width));
        }
        if method == CompMethod::None && iq_width != 16 {
            return Err(CompressionError::InvalidWidth(iq_width));
        }
        Ok(Self { method, iq_width })
    }

    /// The `udCompHdr` byte: width in the high nibble (16 encodes as 0),
    /// method in the low nibble.
    pub fn ud_comp_hdr(&self) -> u8 {
        ((self.iq_width & 0x0f) << 4) | self.method.code()
    }

    pub fn from_ud_comp_hdr(byte: u8) -> Result<Self, CompressionError> {
        let width = match byte >> 4 {
            0 => 16,
            w => w,
        };
        Self::new(CompMethod::from_code(byte & 0x0f)?, width)
    }

    pub fn block_size(&self) -> usize {
        prb_block_size(self.method, self.iq_width)
    }
}

/// Twelve complex fixed-point resource elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct IqBlock(pub [i16; VALUES_PER_PRB]);

impl IqBlock {
    pub const ZERO: IqBlock = IqBlock([0; VALUES_PER_PRB]);

    pub fn from_pairs(pairs: &[(i16, i16); RES_PER_PRB]) -> Self {
        let mut v = [0i16; VALUES_PER_PRB];
        for (k, &(i, q)) in pairs.iter().enumerate() {
            v[2 * k] = i;
            v[2 * k + 1] = q;
        }
        IqBlock(v)
    }

    pub fn re(&self, k: usize) -> (i16, i16) {
        (self.0[2 * k], self.0[2 * k + 1])
    }
}

/// One compressed PRB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CompressedPrb {
    pub params: CompParams,
    /// Shared exponent; always 0 for uncompressed blocks.
    pub exponent: u8,
    pub mantissas: [i16; VALUES_PER_PRB],
}

/// Magnitude bits `v` needs in two's complement, sign excluded.
fn bits_required(v: i16) -> u32 {
    let m = if v < 0 { !(v as i32) } else { v as i32 } as u32;
    32 - m.leading_zeros()
}

fn round_half_away(v: i32, exponent: u8) -> i32 {
    if exponent == 0 {
        return v;
    }
    let scale = 1i32 << exponent;
    let half = scale / 2;
    if v >= 0 {
        (v + half) >> exponent
    } else {
        -((-v + half) >> exponent)
    }
}

/// Exponent the BFP policy picks for a block at the given width.
pub fn bfp_exponent(block: &IqBlock, iq_width: u8) -> u8 {
    let bits = block.0.iter().map(|&v| bits_required(v)).max().unwrap_or(0);
    bits.saturating_sub(iq_width as u32 - 1).min(15) as u8
}

pub fn compress(block: &IqBlock, params: CompParams) -> CompressedPrb {
    match params.method {
        CompMethod::None => CompressedPrb { params, exponent: 0, mantissas: block.0 },
        CompMethod::Bfp => {
            let w = params.iq_width as u32;
            let e = bfp_exponent(block, params.iq_width);
            let hi = (1i32 << (w - 1)) - 1;
            // Only positive values can round past the top; they clamp.
            let lo = -(1i32 << (w - 1));
            let mut mantissas = [0i16; VALUES_PER_PRB];
            for (m, &v) in mantissas.iter_mut().zip(block.0.iter()) {
                *m = round_half_away(v as i32, e).clamp(lo, hi) as i16;
            }
            CompressedPrb { params, exponent: e, mantissas }
        }
    }
}

pub fn decompress(prb: &CompressedPrb) -> IqBlock {
    match prb.params.method {
        CompMethod::None => IqBlock(prb.mantissas),
        CompMethod::Bfp => {
            let mut out = [0i16; VALUES_PER_PRB];
            for (o, &m) in out.iter_mut().zip(prb.mantissas.iter()) {
                let v = (m as i64) << prb.exponent;
                *o = v.clamp(i16::MIN as i64, i16::MAX as i64) as i16;
            }
            IqBlock(out)
        }
    }
}

/// Wire size in bytes of one PRB block.
pub fn prb_block_size(method: CompMethod, iq_width: u8) -> usize {
    match method {
        CompMethod::None => 2 * VALUES_PER_PRB,
        CompMethod::Bfp => 1 + (VALUES_PER_PRB * iq_width as usize).div_ceil(8),
    }
}

/// Largest per-component reconstruction error of a BFP block with exponent
/// `e`, including the clamp extremes.
pub fn bfp_error_bound(exponent: u8) -> u32 {
    1u32 << exponent
}

/// Appends the wire form of `prb` to `out`.
pub fn pack_prb(prb: &CompressedPrb, out: &mut Vec<u8>) {
    match prb.params.method {
        CompMethod::None => {
            for &v in &prb.mantissas {
                out.extend_from_slice(&v.to_be_bytes());
            }
        }
        CompMethod::Bfp => {
            out.push(prb.exponent & 0x0f);
            let w = prb.params.iq_width as u32;
            let mask = (1u32 << w) - 1;
            let mut acc: u64 = 0;
            let mut nbits = 0u32;
            for &m in &prb.mantissas {
                acc = (acc << w) | (m as i32 as u32 & mask) as u64;
                nbits += w;
                while nbits >= 8 {
                    nbits -= 8;
                    out.push((acc >> nbits) as u8);
                }
            }
            if nbits > 0 {
                out.push((acc << (8 - nbits)) as u8);
            }
        }
    }
}

/// Parses one PRB block; `bytes` must be exactly `params.block_size()` long.
pub fn unpack_prb(bytes: &[u8], params: CompParams) -> Result<CompressedPrb, CompressionError> {
    let expected = params.block_size();
    if bytes.len() != expected {
        return Err(CompressionError::BlockLength { expected, actual: bytes.len() });
    }
    let mut mantissas = [0i16; VALUES_PER_PRB];
    match params.method {
        CompMethod::None => {
            for (m, chunk) in mantissas.iter_mut().zip(bytes.chunks_exact(2)) {
                *m = i16::from_be_bytes([chunk[0], chunk[1]]);
            }
            Ok(CompressedPrb { params, exponent: 0, mantissas })
        }
        CompMethod::Bfp => {
            let exponent = bytes[0] & 0x0f;
            let w = params.iq_width as u32;
            let mut acc: u64 = 0;
            let mut nbits = 0u32;
            let mut data = bytes[1..].iter();
            for m in mantissas.iter_mut() {
                while nbits < w {
                    acc = (acc << 8) | *data.next().expect("length checked above") as u64;
                    nbits += 8;
                }
                nbits -= w;
                let raw = ((acc >> nbits) as u32) & ((1u32 << w) - 1);
                // Sign-extend from w bits.
                let shift = 32 - w;
                *m = (((raw << shift) as i32) >> shift) as i16;
            }
            Ok(CompressedPrb { params, exponent, mantissas })
        }
    }
}

/// Float to fixed point at scale 2^15 with rounding and saturation.
pub fn to_fixed(x: f64) -> i16 {
    (x * 32768.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

pub fn to_float(v: i16) -> f64 {
    v as f64 / 32768.0
}
