use num_bigint::BigUint;

use crate::error::{Error, Result};

/// Exact payload bits `⌈B·log₂N⌉` for `B` indices in `0..N`.
pub fn payload_bits(blocks: usize, n: usize) -> u64 {
    assert!(n >= 1, "alphabet size must be positive");
    let total = BigUint::from(n).pow(blocks as u32);
    (total - 1u32).bits()
}

/// Bytes of a packed payload, `⌈⌈B·log₂N⌉/8⌉`.
pub fn payload_bytes(blocks: usize, n: usize) -> usize {
    payload_bits(blocks, n).div_ceil(8) as usize
}

/// Packs indices as the little-endian base-`N` integer `Σ_m i_m·N^m`.
pub fn pack_indices(indices: &[u32], n: usize) -> Result<Vec<u8>> {
    let len = payload_bytes(indices.len(), n);
    if let Some((m, &i)) = indices.iter().enumerate().find(|(_, &i)| i as usize >= n) {
        return Err(Error::InvalidInput(format!("index {i} at block {m} is not below N={n}")));
    }
    let mut out = vec![0u8; len];
    if len <= 16 {
        let mut acc: u128 = 0;
        for &i in indices.iter().rev() {
            acc = acc * n as u128 + i as u128;
        }
        out.copy_from_slice(&acc.to_le_bytes()[..len]);
    } else {
        let base = BigUint::from(n);
        let mut acc = BigUint::default();
        for &i in indices.iter().rev() {
            acc = acc * &base + i;
        }
        let bytes = acc.to_bytes_le();
        out[..bytes.len()].copy_from_slice(&bytes);
    }
    Ok(out)
}

/// Inverse of [`pack_indices`]; rejects payloads of the wrong length or
/// whose value is not below `N^B`.
pub fn unpack_indices(bytes: &[u8], blocks: usize, n: usize) -> Result<Vec<u32>> {
    let len = payload_bytes(blocks, n);
    if bytes.len() != len {
        return Err(Error::CorruptRecord(format!(
            "payload of {} bytes, expected {len}",
            bytes.len()
        )));
    }
    let mut out = Vec::with_capacity(blocks);
    if len <= 16 {
        let mut buf = [0u8; 16];
        buf[..len].copy_from_slice(bytes);
        let mut acc = u128::from_le_bytes(buf);
        let base = n as u128;
        for _ in 0..blocks {
            out.push((acc % base) as u32);
            acc /= base;
        }
        if acc != 0 {
            return Err(Error::CorruptRecord("payload value exceeds N^B".into()));
        }
    } else {
        let base = BigUint::from(n);
        let mut acc = BigUint::from_bytes_le(bytes);
        for _ in 0..blocks {
            let digit = &acc % &base;
            out.push(digit.iter_u32_digits().next().unwrap_or(0));
            acc /= &base;
        }
        if acc != BigUint::default() {
            return Err(Error::CorruptRecord("payload value exceeds N^B".into()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn small_examples() {
        assert_eq!(pack_indices(&[2, 1], 3).unwrap(), vec![0x05]);
        assert_eq!(payload_bits(2, 3), 4);
        assert_eq!(payload_bytes(1, 16384), 2);
        assert_eq!(payload_bits(1, 16384), 14);
        assert_eq!(payload_bytes(32, 64), 24);
        assert_eq!(payload_bits(64, 16), 256);
        assert_eq!(payload_bytes(5, 1), 0);
        assert_eq!(unpack_indices(&[], 5, 1).unwrap(), vec![0; 5]);
        // 0.8125 bits per coordinate: 4 blocks of 13 bits
        assert_eq!(payload_bits(4, 8192), 52);
    }

    #[test]
    fn bits_match_log2_for_non_powers() {
        for (b, n) in [(7usize, 100usize), (3, 5), (10, 3), (40, 1000)] {
            let exact = (b as f64 * (n as f64).log2()).ceil() as u64;
            assert_eq!(payload_bits(b, n), exact);
        }
    }

    #[test]
    fn random_round_trip() {
        let mut rng = crate::rng::seeded(3);
        for _ in 0..100_000 {
            let idx: Vec<u32> = (0..7).map(|_| rng.random_range(0..100)).collect();
            let bytes = pack_indices(&idx, 100).unwrap();
            assert_eq!(bytes.len(), 6);
            assert_eq!(unpack_indices(&bytes, 7, 100).unwrap(), idx);
        }
    }

    #[test]
    fn wide_payloads_use_big_integers() {
        let mut rng = crate::rng::seeded(4);
        for _ in 0..200 {
            let idx: Vec<u32> = (0..64).map(|_| rng.random_range(0..1000)).collect();
            let bytes = pack_indices(&idx, 1000).unwrap();
            assert_eq!(bytes.len(), 80);
            assert_eq!(unpack_indices(&bytes, 64, 1000).unwrap(), idx);
        }
    }

    #[test]
    fn rejects_bad_payloads() {
        assert!(matches!(unpack_indices(&[0, 0], 2, 3), Err(Error::CorruptRecord(_))));
        assert!(matches!(unpack_indices(&[0x0f], 2, 3), Err(Error::CorruptRecord(_))));
        assert!(pack_indices(&[3], 3).is_err());
    }
}
