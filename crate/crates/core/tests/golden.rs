mod common;

use common::*;
use fibquant::codebook::deserialize_codebook;
use fibquant::codec::{CacheHeader, EncodedCache, CACHE_HEADER_BYTES};

#[test]
fn codebook_file_is_stable() {
    let bytes = golden_codebook_bytes();
    check_golden("codebook_d64_k2_n16.fqcb", &bytes).unwrap();
    let back = deserialize_codebook(&std::fs::read(golden_dir().join("codebook_d64_k2_n16.fqcb")).unwrap()).unwrap();
    assert_eq!(back.content_hash(), golden_codebook().content_hash());
}

#[test]
fn cache_file_is_stable() {
    let bytes = golden_cache().to_bytes();
    check_golden("cache_d64_k2_n16_t8.fqkv", &bytes).unwrap();
    let header = CacheHeader::parse(&bytes).unwrap();
    assert_eq!((header.d, header.k, header.n, header.tokens), (64, 2, 16, 8));
    assert_eq!(header.rotation_seed, 2024);
    assert_eq!(header.codebook_hash, golden_codebook().content_hash());
    // 16 norm bits plus 32 blocks of 4 bits.
    assert_eq!(header.record_bytes, 2 + 16);
    assert_eq!(bytes.len(), CACHE_HEADER_BYTES + 8 * 18);
}

#[test]
fn golden_cache_decodes() {
    let bytes = std::fs::read(golden_dir().join("cache_d64_k2_n16_t8.fqkv")).unwrap();
    let cache = EncodedCache::from_bytes(&bytes).unwrap();
    let codec = golden_codec();
    let all = codec.decode_all(&cache).unwrap();
    for t in 0..8 {
        assert_eq!(codec.decode_token(&cache, t).unwrap().as_slice(), all.row(t as usize));
    }
}
