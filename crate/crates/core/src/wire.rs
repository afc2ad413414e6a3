//! Little-endian field access for the binary artifacts.

use crate::error::FormatError;

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.remaining() < n {
            return Err(FormatError::Truncated {
                needed: self.pos + n,
                available: self.buf.len(),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], FormatError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub(crate) fn magic(&mut self, expected: [u8; 4]) -> Result<(), FormatError> {
        let found = self.array::<4>()?;
        if found != expected {
            return Err(FormatError::BadMagic { expected, found });
        }
        Ok(())
    }

    pub(crate) fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.array::<1>()?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub(crate) fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.array()?))
    }
}

/// Checks that the stored version is one this build reads.
pub(crate) fn version(found: u16, supported: u16) -> Result<(), FormatError> {
    if found != supported {
        return Err(FormatError::UnsupportedVersion(found));
    }
    Ok(())
}

/// `count · size` as a byte length, rejecting overflow.
pub(crate) fn byte_len(count: u64, size: u64) -> Result<usize, FormatError> {
    count
        .checked_mul(size)
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| FormatError::Malformed(format!("{count} items of {size} bytes overflow")))
}
