use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;

use super::Dataset;
use crate::error::{Result, SifsError};

/// Parses LibSVM text (`<label> <idx>:<val> ...`, 1-based indices).
///
/// Labels are mapped by sign: anything `> 0` becomes `+1`, everything else
/// `-1`. Column `i` of the result holds `y_i * x_i`. `n_features` pins `p`;
/// otherwise `p` is the largest index seen.
pub fn parse_libsvm<R: BufRead>(reader: R, n_features: Option<usize>) -> Result<Dataset> {
    let mut labels = Vec::new();
    let mut columns = Vec::new();
    let mut max_index = 0usize;
    let mut remapped = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| SifsError::Parse { line: lineno, msg };
        let mut tokens = line.split_whitespace();
        let raw_label = tokens.next().unwrap_or_default();
        let raw: f64 = raw_label
            .parse()
            .map_err(|_| err(format!("invalid label {raw_label:?}")))?;
        if !raw.is_finite() {
            return Err(err(format!("invalid label {raw_label:?}")));
        }
        if raw != 1.0 && raw != -1.0 {
            remapped += 1;
        }
        let y = if raw > 0.0 { 1.0 } else { -1.0 };

        let mut col = Vec::new();
        let mut prev = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected <index>:<value>, got {tok:?}")))?;
            let idx: usize = idx.parse().map_err(|_| err(format!("invalid index {idx:?}")))?;
            let val: f64 = val.parse().map_err(|_| err(format!("invalid value {val:?}")))?;
            if idx == 0 {
                return Err(err("indices are 1-based".into()));
            }
            if idx <= prev {
                return Err(err(format!("non-increasing index {idx} after {prev}")));
            }
            if !val.is_finite() {
                return Err(err(format!("non-finite value {val}")));
            }
            prev = idx;
            if val != 0.0 {
                col.push((idx - 1, y * val));
            }
        }
        max_index = max_index.max(prev);
        labels.push(y);
        columns.push(col);
    }

    if labels.is_empty() {
        return Err(SifsError::EmptyInput);
    }
    if remapped > 0 {
        log::info!("mapped {remapped} labels outside {{-1, +1}} by sign");
    }
    let p = match n_features {
        Some(p) if p < max_index => {
            return Err(SifsError::InvalidParam(format!(
                "feature count {p} is smaller than the largest index {max_index}"
            )))
        }
        Some(p) => p,
        None => max_index,
    };
    Dataset::from_signed_columns(p, labels, columns)
}

/// Reads a LibSVM file, decompressing gzip transparently.
pub fn load_libsvm(path: impl AsRef<Path>, n_features: Option<usize>) -> Result<Dataset> {
    let mut file = File::open(path.as_ref())?;
    let mut magic = [0u8; 2];
    let got = file.read(&mut magic)?;
    let file = File::open(path.as_ref())?;
    if got == 2 && magic == [0x1f, 0x8b] {
        parse_libsvm(BufReader::new(GzDecoder::new(file)), n_features)
    } else {
        parse_libsvm(BufReader::new(file), n_features)
    }
}

fn fmt_value(v: f64) -> String {
    let a = v.abs();
    if (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Renders the dataset back to LibSVM text with the original (unsigned)
/// feature values. Floats use shortest round-trip formatting.
pub fn serialize_libsvm(d: &Dataset) -> String {
    let mut out = String::with_capacity(d.nnz() * 12 + d.n() * 3);
    for i in 0..d.n() {
        let y = d.labels()[i];
        out.push_str(if y > 0.0 { "+1" } else { "-1" });
        for (j, v) in d.col(i).iter() {
            out.push(' ');
            out.push_str(&(j + 1).to_string());
            out.push(':');
            out.push_str(&fmt_value(y * v));
        }
        out.push('\n');
    }
    out
}

pub fn write_libsvm(path: impl AsRef<Path>, d: &Dataset) -> Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path)?);
    f.write_all(serialize_libsvm(d).as_bytes())?;
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str) -> Result<Dataset> {
        parse_libsvm(s.as_bytes(), None)
    }

    #[test]
    fn parses_and_folds_labels() {
        let d = parse("1 1:2.0 3:-1.0\n-1 2:0.5").unwrap();
        assert_eq!((d.n(), d.p()), (2, 3));
        assert_eq!(d.col(0).iter().collect::<Vec<_>>(), vec![(0, 2.0), (2, -1.0)]);
        assert_eq!(d.col(1).iter().collect::<Vec<_>>(), vec![(1, -0.5)]);
        assert_eq!(d.labels(), &[1.0, -1.0]);
    }

    #[test]
    fn empty_stream_is_error() {
        assert!(matches!(parse(""), Err(SifsError::EmptyInput)));
        assert!(matches!(parse("\n\n"), Err(SifsError::EmptyInput)));
    }

    #[test]
    fn non_increasing_indices_report_line() {
        match parse("1 3:1 2:1") {
            Err(SifsError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        match parse("1 1:1\n1 2:1 2:3") {
            Err(SifsError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_tokens() {
        assert!(matches!(parse("abc 1:2"), Err(SifsError::Parse { line: 1, .. })));
        assert!(matches!(parse("1 1-2"), Err(SifsError::Parse { line: 1, .. })));
        assert!(matches!(parse("1 0:2"), Err(SifsError::Parse { .. })));
        assert!(matches!(parse("1 1:x"), Err(SifsError::Parse { .. })));
    }

    #[test]
    fn label_mapping_by_sign() {
        let d = parse("0 1:1\n2 1:1\n1 1:1").unwrap();
        assert_eq!(d.labels(), &[-1.0, 1.0, 1.0]);
        assert_eq!(d.col(0).values(), &[-1.0]);
    }

    #[test]
    fn feature_count_override() {
        let d = parse_libsvm("1 2:1".as_bytes(), Some(5)).unwrap();
        assert_eq!(d.p(), 5);
        assert!(parse_libsvm("1 7:1".as_bytes(), Some(5)).is_err());
    }

    #[test]
    fn gzip_is_transparent() {
        use flate2::write::GzEncoder;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.svm.gz");
        let mut enc = GzEncoder::new(File::create(&path).unwrap(), flate2::Compression::default());
        enc.write_all(b"1 1:2.0 3:-1.0\n-1 2:0.5\n").unwrap();
        enc.finish().unwrap();
        let d = load_libsvm(&path, None).unwrap();
        assert_eq!((d.n(), d.p(), d.nnz()), (2, 3, 3));
    }

    proptest! {
        #[test]
        fn serialize_then_parse_is_identity(
            rows in prop::collection::vec(
                (any::<bool>(), prop::collection::btree_map(0usize..40, -1e6f64..1e6, 0..8)),
                1..20,
            )
        ) {
            let labels: Vec<f64> = rows.iter().map(|(y, _)| if *y { 1.0 } else { -1.0 }).collect();
            let columns: Vec<Vec<(usize, f64)>> = rows
                .iter()
                .map(|(y, m)| {
                    let s = if *y { 1.0 } else { -1.0 };
                    m.iter().filter(|(_, v)| **v != 0.0).map(|(&j, &v)| (j, s * v)).collect()
                })
                .collect();
            let d = Dataset::from_signed_columns(40, labels, columns).unwrap();
            let back = parse_libsvm(serialize_libsvm(&d).as_bytes(), Some(40)).unwrap();
            prop_assert_eq!(back, d);
        }
    }
}
