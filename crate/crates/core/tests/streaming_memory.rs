//! Runs alone in its own binary so the RSS reading is not polluted by other tests.

use std::fs::File;
use std::io::{BufWriter, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use uiloop_core::dataset::{encode_record, load_jsonl, StatsAccumulator, StatsConfig};
use uiloop_core::fixtures::random_record;

const LINES: usize = 100_000;
const CEILING_BYTES: u64 = 64 * 1024 * 1024;

fn rss_bytes() -> u64 {
    let statm = std::fs::read_to_string("/proc/self/statm").expect("procfs available");
    let pages: u64 = statm.split_whitespace().nth(1).unwrap().parse().unwrap();
    pages * 4096
}

#[test]
fn hundred_thousand_lines_stream_under_ceiling() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.jsonl");
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut w = BufWriter::new(File::create(&path).unwrap());
    for i in 0..LINES {
        w.write_all(encode_record(&random_record(&mut rng, &format!("m{i:06}"))).as_bytes())
            .unwrap();
    }
    w.flush().unwrap();
    drop(w);
    let file_size = std::fs::metadata(&path).unwrap().len();

    let before = rss_bytes();
    let mut acc = StatsAccumulator::new(StatsConfig::default());
    let mut n = 0;
    for r in load_jsonl(&path, true).unwrap() {
        acc.push(&r.unwrap());
        n += 1;
    }
    let report = acc.finish().unwrap();
    let growth = rss_bytes().saturating_sub(before);
    assert_eq!(n, LINES);
    assert_eq!(report.n_records, LINES);
    println!("file {} MiB, rss growth {} KiB", file_size >> 20, growth >> 10);
    assert!(growth < CEILING_BYTES, "rss grew by {growth} bytes");
    assert!(growth < file_size / 4, "rss growth {growth} is not small next to file size {file_size}");
}
