use std::path::Path;

use crate::directions::DirectionScheme;
use crate::error::{Error, FormatError, Result};
use crate::points::PointSet;
use crate::wire::{byte_len, version, Reader};

use super::{codeword_hash, Codebook, Construction, InitScheme};

pub const CODEBOOK_MAGIC: [u8; 4] = *b"FQCB";
pub const CODEBOOK_VERSION: u16 = 1;
const HEADER_BYTES: usize = 4 + 2 + 4 + 4 + 4 + 1 + 4 + 16;

/// `FQCB` file image: header, `N × k` little-endian f64 codewords, and the
/// content hash as a trailer.
pub fn serialize_codebook(cb: &Codebook) -> Vec<u8> {
    let values = cb.codewords().as_slice();
    let mut out = Vec::with_capacity(HEADER_BYTES + 8 * values.len() + 8);
    out.extend_from_slice(&CODEBOOK_MAGIC);
    out.extend_from_slice(&CODEBOOK_VERSION.to_le_bytes());
    out.extend_from_slice(&(cb.d() as u32).to_le_bytes());
    out.extend_from_slice(&(cb.k() as u32).to_le_bytes());
    out.extend_from_slice(&(cb.n() as u32).to_le_bytes());
    out.push(cb.construction().scheme.code());
    out.extend_from_slice(&cb.construction().shells.to_le_bytes());
    out.extend_from_slice(&[0u8; 16]);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&cb.content_hash().to_le_bytes());
    out
}

/// Parses an `FQCB` image. The direction scheme is not stored; it is
/// reported as the default for `k`.
pub fn deserialize_codebook(bytes: &[u8]) -> Result<Codebook> {
    let mut r = Reader::new(bytes);
    r.magic(CODEBOOK_MAGIC)?;
    version(r.u16()?, CODEBOOK_VERSION)?;
    let d = r.u32()? as usize;
    let k = r.u32()? as usize;
    let n = r.u32()? as usize;
    let scheme_code = r.u8()?;
    let shells = r.u32()?;
    if r.take(16)?.iter().any(|&b| b != 0) {
        return Err(FormatError::Malformed("reserved header bytes are not zero".into()).into());
    }
    if k == 0 || n == 0 {
        return Err(FormatError::Malformed(format!("codebook shape N={n} k={k}")).into());
    }
    let count = n as u64 * k as u64;
    let payload = byte_len(count, 8)?;
    let raw = r.take(payload)?;
    let stored = r.u64()?;
    if r.remaining() != 0 {
        return Err(FormatError::Malformed(format!("{} trailing bytes", r.remaining())).into());
    }
    let values: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let computed = codeword_hash(&values);
    if stored != computed {
        return Err(FormatError::HashMismatch { stored, computed }.into());
    }
    let scheme = InitScheme::from_code(scheme_code)
        .ok_or_else(|| FormatError::Malformed(format!("unknown init scheme {scheme_code}")))?;
    let construction = Construction {
        scheme,
        shells,
        directions: DirectionScheme::for_dimension(k).ok(),
        lloyd: None,
    };
    Codebook::new(d, PointSet::new(k, values)?, construction).map_err(|e| match e {
        Error::Format(f) => Error::Format(f),
        other => Error::Format(FormatError::Malformed(other.to_string())),
    })
}

pub fn write_codebook(path: impl AsRef<Path>, cb: &Codebook) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, serialize_codebook(cb)).map_err(|e| Error::io(path, e))
}

pub fn read_codebook(path: impl AsRef<Path>) -> Result<Codebook> {
    let path = path.as_ref();
    deserialize_codebook(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{init_codebook, multishell_init};

    #[test]
    fn round_trip_is_byte_identical() {
        for cb in [
            init_codebook(64, 2, 64).unwrap(),
            init_codebook(64, 1, 16).unwrap(),
            multishell_init(64, 3, 4, 8).unwrap(),
        ] {
            let bytes = serialize_codebook(&cb);
            assert_eq!(bytes.len(), HEADER_BYTES + 8 * cb.n() * cb.k() + 8);
            let back = deserialize_codebook(&bytes).unwrap();
            assert_eq!(back.codewords(), cb.codewords());
            assert_eq!(back.content_hash(), cb.content_hash());
            assert_eq!(back.construction().scheme, cb.construction().scheme);
            assert_eq!(back.construction().shells, cb.construction().shells);
            assert_eq!(serialize_codebook(&back), bytes);
        }
    }

    #[test]
    fn header_layout() {
        let cb = init_codebook(64, 2, 4).unwrap();
        let bytes = serialize_codebook(&cb);
        assert_eq!(&bytes[..4], b"FQCB");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..10], &64u32.to_le_bytes());
        assert_eq!(&bytes[10..14], &2u32.to_le_bytes());
        assert_eq!(&bytes[14..18], &4u32.to_le_bytes());
        assert_eq!(bytes[18], 0);
        assert_eq!(&bytes[19..23], &4u32.to_le_bytes());
        assert!(bytes[23..39].iter().all(|&b| b == 0));
    }

    #[test]
    fn distinct_errors() {
        let cb = init_codebook(64, 2, 8).unwrap();
        let bytes = serialize_codebook(&cb);
        assert!(matches!(
            deserialize_codebook(&[]),
            Err(Error::Format(FormatError::Truncated { .. }))
        ));
        let mut flipped = bytes.clone();
        flipped[HEADER_BYTES + 3] ^= 0x10;
        assert!(matches!(
            deserialize_codebook(&flipped),
            Err(Error::Format(FormatError::HashMismatch { .. }))
        ));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(
            deserialize_codebook(&magic),
            Err(Error::Format(FormatError::BadMagic { .. }))
        ));
        let mut ver = bytes.clone();
        ver[4] = 2;
        assert!(matches!(
            deserialize_codebook(&ver),
            Err(Error::Format(FormatError::UnsupportedVersion(2)))
        ));
        assert!(matches!(
            deserialize_codebook(&bytes[..bytes.len() - 1]),
            Err(Error::Format(FormatError::Truncated { .. }))
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(
            deserialize_codebook(&long),
            Err(Error::Format(FormatError::Malformed(_)))
        ));
    }
}
