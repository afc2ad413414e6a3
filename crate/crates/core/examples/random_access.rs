//! Decodes single tokens straight from an FQKV file by byte offset.
//!
//! ```bash
//! cargo run --release --example random_access
//! ```

use fibquant::codebook::init_codebook;
use fibquant::codec::{CacheReader, VectorCodec};
use fibquant::eval::gaussian_rows;
use fibquant::source::haar_rotation;

fn main() -> fibquant::Result<()> {
    let d = 64;
    let codec = VectorCodec::new(init_codebook(d, 2, 64)?, haar_rotation(d, 5)?)?;
    let cache = codec.encode_cache(&gaussian_rows(512, d, 11)?)?;

    let path = std::env::temp_dir().join("fibquant-random-access.fqkv");
    std::fs::write(&path, cache.to_bytes()).expect("write cache");

    let mut reader = CacheReader::open(&path)?;
    let full = codec.decode_all(&cache)?;
    for t in [0u64, 255, 511] {
        let before = reader.bytes_read();
        let x = reader.decode_token(&codec, t)?;
        assert_eq!(x.as_slice(), full.row(t as usize));
        println!(
            "token {t:>3} at offset {:>5}: read {} bytes",
            reader.header().offset(t),
            reader.bytes_read() - before
        );
    }
    println!("file size {} bytes, read {} in total", cache.to_bytes().len(), reader.bytes_read());
    let _ = std::fs::remove_file(&path);
    Ok(())
}
