//! Fixed-rate random-access vector codec.
//!
//! A vector `x ∈ ℝ^d` is stored as its binary16 norm followed by the indices
//! of the nearest codeword for each of the `B = d/k` blocks of `Π x/‖x‖`,
//! packed into a constant number of bytes. Token `t` of a cache lives at byte
//! `HEADER + t·record_bytes` and decodes without touching any other record.

mod fast;
mod pack;

use std::fs::File;
use std::io::{BufReader, Read, Seek, SeekFrom};
use std::path::Path;

use half::f16;
use rayon::prelude::*;

use crate::error::{Error, FormatError, Result};
use crate::points::{norm_sq, PointSet};
use crate::quantizer::BlockQuantizer;
use crate::source::RotationSpec;
use crate::wire::{byte_len, version, Reader};

pub use fast::{complexity_setup, FastChoice, FastEncoder, FastEncoderConfig};
pub use pack::{pack_indices, payload_bits, payload_bytes, unpack_indices};

pub const CACHE_MAGIC: [u8; 4] = *b"FQKV";
pub const CACHE_VERSION: u16 = 1;
pub const CACHE_HEADER_BYTES: usize = 4 + 2 + 4 + 4 + 4 + 8 + 8 + 8 + 4;
const NORM_BYTES: usize = 2;

/// Largest finite binary16 value.
pub const BINARY16_MAX: f64 = 65504.0;

/// A binary16 value and whether the input had to be clamped to 65504.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Binary16 {
    pub value: f16,
    pub saturated: bool,
}

/// Round-to-nearest-even binary16 of a non-negative finite `x`; values
/// above 65504 clamp to 65504 and set `saturated`.
pub fn binary16_round(x: f64) -> Binary16 {
    if x > BINARY16_MAX {
        return Binary16 {
            value: f16::MAX,
            saturated: true,
        };
    }
    Binary16 {
        value: f16::from_f64(x),
        saturated: false,
    }
}

/// One encoded vector: binary16 norm and `B` codeword indices.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenRecord {
    pub norm: f16,
    pub indices: Vec<u32>,
    /// Norm was clamped to 65504 (not stored on the wire).
    pub saturated: bool,
}

impl TokenRecord {
    pub fn to_bytes(&self, n: usize) -> Result<Vec<u8>> {
        let mut out = self.norm.to_le_bytes().to_vec();
        out.extend(pack_indices(&self.indices, n)?);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], blocks: usize, n: usize) -> Result<Self> {
        if bytes.len() < NORM_BYTES {
            return Err(Error::CorruptRecord(format!("record of {} bytes", bytes.len())));
        }
        let norm = f16::from_le_bytes([bytes[0], bytes[1]]);
        if !norm.is_finite() || norm.is_sign_negative() && norm != f16::ZERO {
            return Err(Error::CorruptRecord(format!("invalid norm {norm}")));
        }
        Ok(Self {
            norm,
            indices: unpack_indices(&bytes[NORM_BYTES..], blocks, n)?,
            saturated: false,
        })
    }
}

/// Fixed header of an encoded cache.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CacheHeader {
    pub d: u32,
    pub k: u32,
    pub n: u32,
    pub tokens: u64,
    pub rotation_seed: u64,
    pub codebook_hash: u64,
    pub record_bytes: u32,
}

impl CacheHeader {
    pub fn to_bytes(&self) -> [u8; CACHE_HEADER_BYTES] {
        let mut out = [0u8; CACHE_HEADER_BYTES];
        let mut at = 0;
        let mut put = |bytes: &[u8]| {
            out[at..at + bytes.len()].copy_from_slice(bytes);
            at += bytes.len();
        };
        put(&CACHE_MAGIC);
        put(&CACHE_VERSION.to_le_bytes());
        put(&self.d.to_le_bytes());
        put(&self.k.to_le_bytes());
        put(&self.n.to_le_bytes());
        put(&self.tokens.to_le_bytes());
        put(&self.rotation_seed.to_le_bytes());
        put(&self.codebook_hash.to_le_bytes());
        put(&self.record_bytes.to_le_bytes());
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(CACHE_MAGIC)?;
        version(r.u16()?, CACHE_VERSION)?;
        let header = Self {
            d: r.u32()?,
            k: r.u32()?,
            n: r.u32()?,
            tokens: r.u64()?,
            rotation_seed: r.u64()?,
            codebook_hash: r.u64()?,
            record_bytes: r.u32()?,
        };
        if header.k == 0 || header.n == 0 || !header.d.is_multiple_of(header.k) {
            return Err(FormatError::Malformed(format!(
                "cache shape d={} k={} N={}",
                header.d, header.k, header.n
            ))
            .into());
        }
        let expected = NORM_BYTES + payload_bytes((header.d / header.k) as usize, header.n as usize);
        if header.record_bytes as usize != expected {
            return Err(FormatError::Malformed(format!(
                "record_bytes {} but the shape needs {expected}",
                header.record_bytes
            ))
            .into());
        }
        Ok(header)
    }

    /// Byte offset of token `t` in the file.
    pub fn offset(&self, t: u64) -> u64 {
        CACHE_HEADER_BYTES as u64 + t * self.record_bytes as u64
    }

    pub fn blocks(&self) -> usize {
        (self.d / self.k) as usize
    }
}

/// An in-memory encoded cache: header plus contiguous records.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedCache {
    header: CacheHeader,
    records: Vec<u8>,
    saturated: u64,
}

impl EncodedCache {
    pub fn header(&self) -> &CacheHeader {
        &self.header
    }

    pub fn len(&self) -> u64 {
        self.header.tokens
    }

    pub fn is_empty(&self) -> bool {
        self.header.tokens == 0
    }

    /// Tokens whose norm was clamped to 65504 during encoding.
    pub fn saturated_tokens(&self) -> u64 {
        self.saturated
    }

    /// Raw bytes of record `t`.
    pub fn record(&self, t: u64) -> Result<&[u8]> {
        if t >= self.header.tokens {
            return Err(Error::OutOfRange {
                index: t,
                len: self.header.tokens,
            });
        }
        let rb = self.header.record_bytes as usize;
        let start = t as usize * rb;
        Ok(&self.records[start..start + rb])
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.header.to_bytes().to_vec();
        out.extend_from_slice(&self.records);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header = CacheHeader::parse(bytes)?;
        let body = &bytes[CACHE_HEADER_BYTES..];
        let needed = byte_len(header.tokens, header.record_bytes as u64)?;
        if body.len() < needed {
            return Err(FormatError::Truncated {
                needed: CACHE_HEADER_BYTES + needed,
                available: bytes.len(),
            }
            .into());
        }
        if body.len() > needed {
            return Err(FormatError::Malformed(format!("{} trailing bytes", body.len() - needed)).into());
        }
        Ok(Self {
            header,
            records: body.to_vec(),
            saturated: 0,
        })
    }
}

/// Normalize, rotate, and quantize each block against a shared quantizer.
#[derive(Clone, Debug)]
pub struct VectorCodec<Q> {
    d: usize,
    quantizer: Q,
    rotation: RotationSpec,
}

impl<Q: BlockQuantizer> VectorCodec<Q> {
    pub fn new(quantizer: Q, rotation: RotationSpec) -> Result<Self> {
        let d = rotation.d();
        let k = quantizer.block_dim();
        if k == 0 || !d.is_multiple_of(k) {
            return Err(Error::InvalidConfig(format!("block size {k} does not divide d={d}")));
        }
        if quantizer.is_empty() || quantizer.len() > u32::MAX as usize {
            return Err(Error::InvalidConfig(format!("unsupported codebook size {}", quantizer.len())));
        }
        Ok(Self { d, quantizer, rotation })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.quantizer.block_dim()
    }

    pub fn n(&self) -> usize {
        self.quantizer.len()
    }

    pub fn blocks(&self) -> usize {
        self.d / self.k()
    }

    pub fn quantizer(&self) -> &Q {
        &self.quantizer
    }

    pub fn rotation(&self) -> &RotationSpec {
        &self.rotation
    }

    pub fn record_bytes(&self) -> usize {
        NORM_BYTES + payload_bytes(self.blocks(), self.n())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.d {
            return Err(Error::InvalidInput(format!("vector of length {len}, codec has d={}", self.d)));
        }
        Ok(())
    }

    /// Unit vector `Π x/‖x‖` (zero for `x = 0`) and the exact norm.
    pub fn rotate(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.check_len(x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("vector has non-finite entries".into()));
        }
        let nu = norm_sq(x).sqrt();
        let mut y = vec![0.0; self.d];
        if nu > 0.0 && nu.is_finite() {
            let unit: Vec<f64> = x.iter().map(|v| v / nu).collect();
            self.rotation.apply(&unit, &mut y);
        } else if !nu.is_finite() {
            return Err(Error::InvalidInput("vector norm overflows".into()));
        }
        Ok((y, nu))
    }

    pub fn encode_vector(&self, x: &[f64]) -> Result<TokenRecord> {
        let (y, nu) = self.rotate(x)?;
        if nu == 0.0 {
            return Ok(TokenRecord {
                norm: f16::ZERO,
                indices: vec![0; self.blocks()],
                saturated: false,
            });
        }
        let norm = binary16_round(nu);
        let indices = y
            .chunks_exact(self.k())
            .map(|block| self.quantizer.nearest(block) as u32)
            .collect();
        Ok(TokenRecord {
            norm: norm.value,
            indices,
            saturated: norm.saturated,
        })
    }

    /// Writes `ν Πᵀ (c_{i_1}, …, c_{i_B})` into `out`.
    pub fn decode_into(&self, rec: &TokenRecord, out: &mut [f64]) -> Result<()> {
        self.check_len(out.len())?;
        if rec.indices.len() != self.blocks() {
            return Err(Error::CorruptRecord(format!(
                "{} indices, expected {}",
                rec.indices.len(),
                self.blocks()
            )));
        }
        let k = self.k();
        let mut y = vec![0.0; self.d];
        for (block, &i) in y.chunks_exact_mut(k).zip(&rec.indices) {
            if i as usize >= self.n() {
                return Err(Error::CorruptRecord(format!("index {i} is not below N={}", self.n())));
            }
            block.copy_from_slice(self.quantizer.codeword(i as usize));
        }
        self.rotation.apply_transpose(&y, out);
        let nu = rec.norm.to_f64();
        out.iter_mut().for_each(|v| *v *= nu);
        Ok(())
    }

    pub fn decode_vector(&self, rec: &TokenRecord) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.d];
        self.decode_into(rec, &mut out)?;
        Ok(out)
    }

    pub fn decode_record_bytes(&self, bytes: &[u8]) -> Result<Vec<f64>> {
        if bytes.len() != self.record_bytes() {
            return Err(Error::CorruptRecord(format!(
                "record of {} bytes, expected {}",
                bytes.len(),
                self.record_bytes()
            )));
        }
        self.decode_vector(&TokenRecord::from_bytes(bytes, self.blocks(), self.n())?)
    }

    pub fn header(&self, tokens: u64) -> CacheHeader {
        CacheHeader {
            d: self.d as u32,
            k: self.k() as u32,
            n: self.n() as u32,
            tokens,
            rotation_seed: self.rotation.seed(),
            codebook_hash: self.quantizer.content_hash(),
            record_bytes: self.record_bytes() as u32,
        }
    }

    /// Encodes every row of `x` (T × d); rows are independent and encoded in
    /// parallel.
    pub fn encode_cache(&self, x: &PointSet) -> Result<EncodedCache> {
        self.check_len(x.dim())?;
        let records: Vec<TokenRecord> = x
            .as_slice()
            .par_chunks(self.d)
            .map(|row| self.encode_vector(row))
            .collect::<Result<_>>()?;
        let mut bytes = Vec::with_capacity(records.len() * self.record_bytes());
        let mut saturated = 0;
        for rec in &records {
            bytes.extend(rec.to_bytes(self.n())?);
            saturated += rec.saturated as u64;
        }
        Ok(EncodedCache {
            header: self.header(records.len() as u64),
            records: bytes,
            saturated,
        })
    }

    /// Checks that a cache header was written by a codec of this shape and
    /// codebook.
    pub fn check_header(&self, header: &CacheHeader) -> Result<()> {
        if header.codebook_hash != self.quantizer.content_hash() {
            return Err(Error::CodebookMismatch {
                expected: header.codebook_hash,
                supplied: self.quantizer.content_hash(),
            });
        }
        if header.d as usize != self.d || header.k as usize != self.k() || header.n as usize != self.n() {
            return Err(Error::InvalidConfig(format!(
                "cache shape (d={}, k={}, N={}) does not match codec (d={}, k={}, N={})",
                header.d,
                header.k,
                header.n,
                self.d,
                self.k(),
                self.n()
            )));
        }
        if header.rotation_seed != self.rotation.seed() {
            return Err(Error::InvalidConfig(format!(
                "cache rotation seed {} does not match codec seed {}",
                header.rotation_seed,
                self.rotation.seed()
            )));
        }
        Ok(())
    }

    pub fn decode_token(&self, cache: &EncodedCache, t: u64) -> Result<Vec<f64>> {
        self.check_header(&cache.header)?;
        self.decode_record_bytes(cache.record(t)?)
    }

    /// Decodes every token, in parallel, into a T × d set.
    pub fn decode_all(&self, cache: &EncodedCache) -> Result<PointSet> {
        self.check_header(&cache.header)?;
        let rb = cache.header.record_bytes as usize;
        let rows: Vec<Vec<f64>> = if rb == 0 {
            Vec::new()
        } else {
            cache
                .records
                .par_chunks(rb)
                .map(|r| self.decode_record_bytes(r))
                .collect::<Result<_>>()?
        };
        PointSet::new(self.d, rows.concat())
    }

    /// Encode then decode one vector.
    pub fn round_trip(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.decode_vector(&self.encode_vector(x)?)
    }
}

/// Random-access reader over an encoded cache file. Only the header and the
/// requested records are read; `bytes_read` counts every byte pulled from
/// the underlying stream.
pub struct CacheReader<R> {
    inner: R,
    header: CacheHeader,
    bytes_read: u64,
}

impl CacheReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::new(BufReader::with_capacity(64, file))
    }
}

impl<R: Read + Seek> CacheReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut buf = [0u8; CACHE_HEADER_BYTES];
        let got = read_full(&mut inner, &mut buf)?;
        if got < CACHE_HEADER_BYTES {
            return Err(FormatError::Truncated {
                needed: CACHE_HEADER_BYTES,
                available: got,
            }
            .into());
        }
        let header = CacheHeader::parse(&buf)?;
        Ok(Self {
            inner,
            header,
            bytes_read: CACHE_HEADER_BYTES as u64,
        })
    }

    pub fn header(&self) -> &CacheHeader {
        &self.header
    }

    pub fn bytes_read(&self) -> u64 {
        self.bytes_read
    }

    /// Seeks to the affine offset of token `t` and reads its record.
    pub fn read_record(&mut self, t: u64) -> Result<Vec<u8>> {
        if t >= self.header.tokens {
            return Err(Error::OutOfRange {
                index: t,
                len: self.header.tokens,
            });
        }
        let offset = self.header.offset(t);
        self.inner
            .seek(SeekFrom::Start(offset))
            .map_err(|e| Error::io("<cache>", e))?;
        let mut buf = vec![0u8; self.header.record_bytes as usize];
        let got = read_full(&mut self.inner, &mut buf)?;
        self.bytes_read += got as u64;
        if got < buf.len() {
            return Err(FormatError::Truncated {
                needed: offset as usize + buf.len(),
                available: offset as usize + got,
            }
            .into());
        }
        Ok(buf)
    }

    pub fn decode_token<Q: BlockQuantizer>(&mut self, codec: &VectorCodec<Q>, t: u64) -> Result<Vec<f64>> {
        codec.check_header(&self.header)?;
        let rec = self.read_record(t)?;
        codec.decode_record_bytes(&rec)
    }
}

fn read_full(r: &mut impl Read, buf: &mut [u8]) -> Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(Error::io("<cache>", e)),
        }
    }
    Ok(got)
}
