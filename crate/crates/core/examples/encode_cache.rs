//! Encodes a synthetic key cache into the FQKV format and measures the
//! reconstruction.
//!
//! ```bash
//! cargo run --release --example encode_cache
//! ```

use fibquant::codebook::{build_codebook, BuildOptions, Layout};
use fibquant::codec::{EncodedCache, VectorCodec};
use fibquant::eval::{gaussian_rows, per_vector_fidelity};
use fibquant::source::haar_rotation;
use fibquant::LloydConfig;

fn main() -> fibquant::Result<()> {
    let (d, k, n, tokens) = (64, 4, 256, 4096);
    let cb = build_codebook(d, k, n, &BuildOptions::new(Layout::BetaQuantile, LloydConfig::standard(n, 7)))?.codebook;
    let codec = VectorCodec::new(cb, haar_rotation(d, 42)?)?;

    let keys = gaussian_rows(tokens, d, 3)?;
    let cache = codec.encode_cache(&keys)?;
    let bytes = cache.to_bytes();
    println!(
        "{} tokens, {} bytes per record ({} bytes raw fp16), file {} bytes",
        cache.len(),
        cache.header().record_bytes,
        2 * d,
        bytes.len()
    );

    let reread = EncodedCache::from_bytes(&bytes)?;
    let decoded = codec.decode_all(&reread)?;
    let fid = per_vector_fidelity(&keys, |x| codec.round_trip(x))?;
    println!("cosine {:.4}, NMSE {:.2} dB", fid.mean_cosine, fid.nmse_db);
    assert_eq!(decoded.row(17), codec.round_trip(keys.row(17))?.as_slice());
    Ok(())
}
