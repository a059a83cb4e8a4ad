use std::fs;
use std::path::Path;

use oodkit::format::{
    decode_oodb, encode_oodb, read_csv, read_dataset, CsvKind, Dataset, StoreError,
};
use oodkit_core::{EmbeddingMatrix, LabeledEmbeddings, LogitMatrix};
use proptest::prelude::*;

fn p() -> &'static Path {
    Path::new("mem.oodb")
}

/// Values already rounded to f32 so a round trip is exact.
fn f32_values(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e6f32..1e6f32, len).prop_map(|v| v.into_iter().map(f64::from).collect())
}

fn dataset() -> impl Strategy<Value = Dataset> {
    (1usize..12, 2usize..6, 0u8..3).prop_flat_map(|(n, d, kind)| {
        (f32_values(n * d), Just((n, d, kind)))
            .prop_filter("rows must be non-zero", |(v, (_, d, _))| {
                v.chunks(*d).all(|r| r.iter().any(|x| *x != 0.0))
            })
            .prop_map(|(v, (n, d, kind))| match kind {
                0 => Dataset::Embeddings(EmbeddingMatrix::new(n, d, v).unwrap()),
                1 => Dataset::Logits(LogitMatrix::new(n, d, v).unwrap()),
                _ => {
                    // Two copies of every row keep each class populated.
                    let rows: Vec<&[f64]> = v.chunks(d).chain(v.chunks(d)).collect();
                    let labels = (0..2 * n as u32).map(|i| i % n as u32).collect();
                    let m = EmbeddingMatrix::from_rows(&rows).unwrap();
                    Dataset::Labeled(LabeledEmbeddings::new(m, labels, n as u32).unwrap())
                }
            })
    })
}

proptest! {
    #[test]
    fn oodb_round_trip_is_exact(data in dataset()) {
        let bytes = encode_oodb(&data, p()).unwrap();
        prop_assert_eq!(decode_oodb(&bytes, p()).unwrap(), data);
    }

    #[test]
    fn every_strict_prefix_is_rejected(data in dataset(), cut in any::<prop::sample::Index>()) {
        let bytes = encode_oodb(&data, p()).unwrap();
        let len = cut.index(bytes.len());
        prop_assert!(decode_oodb(&bytes[..len], p()).is_err());
        let mut longer = bytes.clone();
        longer.push(0);
        prop_assert!(decode_oodb(&longer, p()).is_err());
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        let _ = decode_oodb(&bytes, p());
    }
}

#[test]
fn csv_kinds_parse() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.csv");
    fs::write(&path, "1.0, 0.0, 0\n0.5,0.5,1\n0.0,2.0,1\n3.0,1.0,0\n").unwrap();
    match read_csv(&path, CsvKind::Labeled).unwrap() {
        Dataset::Labeled(l) => {
            assert_eq!((l.rows(), l.dim(), l.classes()), (4, 2, 2));
            assert_eq!(l.labels(), &[0, 1, 1, 0]);
            assert_eq!(l.embeddings().row(1), &[0.5, 0.5]);
        }
        other => panic!("unexpected {}", other.kind()),
    }
    assert_eq!(read_csv(&path, CsvKind::Embeddings).unwrap().cols(), 3);
    assert_eq!(read_csv(&path, CsvKind::Logits).unwrap().kind(), "logits");
}

#[test]
fn csv_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "1,2\n3,x\n").unwrap();
    match read_csv(&path, CsvKind::Embeddings).unwrap_err() {
        StoreError::Csv { line, .. } => assert_eq!(line, 2),
        e => panic!("unexpected {e}"),
    }
    fs::write(&path, "1,2\n3\n").unwrap();
    assert!(read_csv(&path, CsvKind::Embeddings).is_err());
    fs::write(&path, "0,1\n1,inf\n").unwrap();
    assert!(matches!(
        read_csv(&path, CsvKind::Embeddings).unwrap_err(),
        StoreError::Invalid { .. }
    ));
}

#[test]
fn format_follows_extension() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("x.csv");
    fs::write(&csv, "1,2\n").unwrap();
    assert_eq!(
        read_dataset(&csv, None, CsvKind::Embeddings)
            .unwrap()
            .rows(),
        1
    );
    let oodb = dir.path().join("x.oodb");
    fs::write(&oodb, "1,2\n").unwrap();
    assert!(matches!(
        read_dataset(&oodb, None, CsvKind::Embeddings).unwrap_err(),
        StoreError::BadMagic { .. }
    ));
}
