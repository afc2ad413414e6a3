use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fibquant::codebook::{init_codebook, read_codebook};
use fibquant::codec::VectorCodec;
use fibquant::eval::gaussian_rows;
use fibquant::source::haar_rotation;
use fibquant::tensor::{read_tensor, write_tensor};
use fibquant::PointSet;
use tempfile::TempDir;

fn fibquant(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fibquant")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = fibquant(args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}{}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

fn p(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn build(dir: &TempDir, name: &str, extra: &[&str]) -> (PathBuf, String) {
    let out = p(dir, name);
    let mut args = vec!["build", "--d", "64", "--k", "2", "--n", "16", "--out", s(&out)];
    args.extend_from_slice(extra);
    let text = ok(&args);
    (out, text)
}

fn hash_line(text: &str) -> &str {
    text.lines().find(|l| l.starts_with("content hash")).expect("hash line")
}

#[test]
fn builds_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let (a, ta) = build(&dir, "a.fqcb", &["--seed", "5"]);
    let (b, tb) = build(&dir, "b.fqcb", &["--seed", "5"]);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert_eq!(hash_line(&ta), hash_line(&tb));
    assert!(ta.contains("rate=2.0000 bits/coord"));
}

#[test]
fn unrefined_build_is_the_initialisation() {
    let dir = TempDir::new().unwrap();
    let (path, _) = build(&dir, "init.fqcb", &["--restarts", "1", "--iterations", "0"]);
    let cb = read_codebook(path).unwrap();
    assert_eq!(cb.content_hash(), init_codebook(64, 2, 16).unwrap().content_hash());
}

#[test]
fn factor_search_is_reported() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "ms.fqcb");
    let text = ok(&[
        "build", "--d", "64", "--k", "3", "--n", "128", "--scheme", "multishell-auto", "--iterations", "2", "--restarts", "1",
        "--out", s(&out),
    ]);
    assert!(text.contains("factor search: S="), "{text}");
    assert!(text.contains("M_a="));
    assert!(text.contains("does not divide"));
    let cb = read_codebook(out).unwrap();
    assert_eq!(cb.construction().shells * (128 / cb.construction().shells), 128);
}

#[test]
fn encode_decode_matches_the_library() {
    let dir = TempDir::new().unwrap();
    let (cb_path, _) = build(&dir, "cb.fqcb", &[]);
    let rows = gaussian_rows(40, 64, 3).unwrap();
    let input = p(&dir, "x.fqtn");
    write_tensor(&input, &rows).unwrap();
    let cache = p(&dir, "x.fqkv");
    let text = ok(&["encode", "--input", s(&input), "--codebook", s(&cb_path), "--seed", "9", "--out", s(&cache)]);
    assert!(text.contains("encoded 40 tokens: 18 bytes per record"), "{text}");
    let out = p(&dir, "y.fqtn");
    ok(&["decode", "--cache", s(&cache), "--codebook", s(&cb_path), "--out", s(&out)]);
    let decoded = read_tensor(&out).unwrap();

    // The binary reads f32 inputs, so the library sees the same rounding.
    let as_f32 = PointSet::new(64, rows.as_slice().iter().map(|&v| v as f32 as f64).collect()).unwrap();
    let codec = VectorCodec::new(read_codebook(&cb_path).unwrap(), haar_rotation(64, 9).unwrap()).unwrap();
    let expected = codec.decode_all(&codec.encode_cache(&as_f32).unwrap()).unwrap();
    assert_eq!(decoded.len(), 40);
    for (a, b) in decoded.as_slice().iter().zip(expected.as_slice()) {
        assert_eq!(*a, *b as f32 as f64);
    }
}

#[test]
fn random_access_reads_one_record() {
    let dir = TempDir::new().unwrap();
    let (cb_path, _) = build(&dir, "cb.fqcb", &[]);
    let long = gaussian_rows(512, 64, 4).unwrap();
    let short = PointSet::new(64, long.row(300).to_vec()).unwrap();
    let mut decoded = Vec::new();
    for (name, rows, range) in [("long", &long, "300"), ("short", &short, "0")] {
        let input = p(&dir, &format!("{name}.fqtn"));
        write_tensor(&input, rows).unwrap();
        let cache = p(&dir, &format!("{name}.fqkv"));
        ok(&["encode", "--input", s(&input), "--codebook", s(&cb_path), "--out", s(&cache)]);
        let out = p(&dir, &format!("{name}.out.fqtn"));
        let text = ok(&["decode", "--cache", s(&cache), "--codebook", s(&cb_path), "--tokens", range, "--out", s(&out)]);
        // Header plus a single 18-byte record, whatever the cache length.
        assert!(text.contains("read 64 bytes"), "{text}");
        decoded.push(read_tensor(&out).unwrap());
    }
    assert_eq!(decoded[0], decoded[1]);
}

#[test]
fn wrong_codebook_is_a_format_error() {
    let dir = TempDir::new().unwrap();
    let (a, _) = build(&dir, "a.fqcb", &["--seed", "1"]);
    let (b, _) = build(&dir, "b.fqcb", &["--seed", "2", "--iterations", "3"]);
    let input = p(&dir, "x.fqtn");
    write_tensor(&input, &gaussian_rows(4, 64, 1).unwrap()).unwrap();
    let cache = p(&dir, "x.fqkv");
    ok(&["encode", "--input", s(&input), "--codebook", s(&a), "--out", s(&cache)]);
    let o = fibquant(&["decode", "--cache", s(&cache), "--codebook", s(&b), "--out", s(&p(&dir, "y.fqtn"))]);
    assert_eq!(o.status.code(), Some(3));

    let mut bytes = std::fs::read(&cache).unwrap();
    bytes.truncate(bytes.len() - 1);
    std::fs::write(&cache, bytes).unwrap();
    let o = fibquant(&["inspect", s(&cache)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(fibquant(&["encode"]).status.code(), Some(2));
    assert_eq!(fibquant(&["bench", "rd"]).status.code(), Some(2));
    assert_eq!(fibquant(&["bench", "rd", "--codec", "fibquant:2:64", "--samples", "10"]).status.code(), Some(2));
}

#[test]
fn accounting_bench() {
    let dir = TempDir::new().unwrap();
    let csv = p(&dir, "acc.csv");
    let text = ok(&["bench", "accounting", "--codec", "fibquant:64:16384", "--codec", "fibquant:16:8192", "--out", s(&csv)]);
    assert!(text.contains("34.13x"), "{text}");
    assert!(text.contains("record 72 bits"), "{text}");
    let written = std::fs::read_to_string(csv).unwrap();
    assert_eq!(written.lines().count(), 3);
    assert!(written.starts_with("codec,d,k,n,"));
}

#[test]
fn fidelity_bench_writes_csv_and_manifest() {
    let dir = TempDir::new().unwrap();
    let (csv, manifest) = (p(&dir, "fid.csv"), p(&dir, "run.toml"));
    let config = p(&dir, "bench.toml");
    std::fs::write(
        &config,
        "d = 64\ntokens = 2000\nseeds = [1]\n\n[[codecs]]\nkind = \"scalar\"\nbits = 2\n\n[[codecs]]\nkind = \"fib-quant\"\nk = 2\nn = 16\n",
    )
    .unwrap();
    let text = ok(&[
        "bench", "fidelity", "--config", s(&config), "--out", s(&csv), "--manifest", s(&manifest),
    ]);
    assert!(text.contains("cosine="), "{text}");
    let points = fibquant::eval::import_csv(&csv).unwrap();
    assert_eq!(points.len(), 2);
    let scalar = points.iter().find(|p| p.codec == "scalar-lloyd").unwrap();
    assert!((scalar.mean_cosine.unwrap() - 0.942).abs() < 0.01);
    let m = std::fs::read_to_string(manifest).unwrap();
    assert!(m.contains("seeds = [1]"), "{m}");
}

#[test]
fn inspect_reports_each_format() {
    let dir = TempDir::new().unwrap();
    let (cb, _) = build(&dir, "cb.fqcb", &["--restarts", "1", "--iterations", "0"]);
    let text = ok(&["inspect", s(&cb)]);
    assert!(text.starts_with("FQCB codebook\nd=64 k=2 N=16"), "{text}");
    let input = p(&dir, "x.fqtn");
    write_tensor(&input, &gaussian_rows(3, 64, 1).unwrap()).unwrap();
    assert!(ok(&["inspect", s(&input)]).contains("T=3 d=64"));
    let cache = p(&dir, "x.fqkv");
    ok(&["encode", "--input", s(&input), "--codebook", s(&cb), "--seed", "6", "--out", s(&cache)]);
    let text = ok(&["inspect", s(&cache)]);
    assert!(text.contains("tokens=3"), "{text}");
    assert!(text.contains("rotation seed=6"));
    let junk = p(&dir, "junk");
    std::fs::write(&junk, b"NOPE....").unwrap();
    assert_eq!(fibquant(&["inspect", s(&junk)]).status.code(), Some(3));
}
