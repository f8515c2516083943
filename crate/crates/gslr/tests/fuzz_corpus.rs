//! Replays the checked-in fuzz corpus through the same code paths as the
//! fuzz targets, so the seeds stay valid without a fuzzing toolchain.

use gslr::pipeline::{parse_config_str, read_array_bytes, write_array_bytes};
use std::path::PathBuf;

fn corpus_dir(target: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fuzz/corpus")
        .join(target)
}

#[test]
fn array_corpus_replays_clean() {
    let dir = corpus_dir("array_file_parse");
    let mut entries: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|_| panic!("corpus missing at {}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    assert!(entries.len() >= 4, "corpus should hold several seeds");
    let mut parsed_any = false;
    for path in entries {
        let bytes = std::fs::read(&path).unwrap();
        if let Ok(file) = read_array_bytes(&bytes) {
            parsed_any = true;
            let re = write_array_bytes(&file);
            assert_eq!(read_array_bytes(&re).unwrap(), file, "{}", path.display());
        }
    }
    assert!(parsed_any, "at least one seed must be a valid file");
}

#[test]
fn config_corpus_replays_clean() {
    let dir = corpus_dir("config_parse");
    let mut parsed_any = false;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let bytes = std::fs::read(&path).unwrap();
        if let Ok(text) = std::str::from_utf8(&bytes) {
            if parse_config_str(text).is_ok() {
                parsed_any = true;
            }
        }
    }
    assert!(parsed_any, "at least one seed must be a valid config");
}
