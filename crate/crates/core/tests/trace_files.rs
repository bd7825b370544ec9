use std::fs;

use dualprobe::trace::{
    read_trace, validate_manifest, value_checksum, write_trace, ActivationTrace, ManifestEntry,
    ManifestViolation, TraceError, TraceHeader, TraceManifest, TraceReader, TRACE_FORMAT_VERSION,
};
use proptest::prelude::*;

fn header(tokens: usize, layers: usize, width: usize, qid: &str) -> TraceHeader {
    TraceHeader {
        format_version: TRACE_FORMAT_VERSION,
        model_id: "m".into(),
        num_layers: layers,
        ffn_width: width,
        question_id: qid.into(),
        language: "zh".into(),
        culture: "CN".into(),
        num_response_tokens: tokens,
    }
}

fn finite_f32() -> impl Strategy<Value = f32> {
    any::<u32>().prop_map(f32::from_bits).prop_filter("finite", |v| v.is_finite())
}

fn arb_trace() -> impl Strategy<Value = ActivationTrace> {
    (0usize..6, 1usize..5, 1usize..24, "[a-z0-9.]{1,12}").prop_flat_map(|(t, l, w, qid)| {
        prop::collection::vec(finite_f32(), t * l * w)
            .prop_map(move |v| ActivationTrace::new(header(t, l, w, &qid), v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn write_read_is_bit_exact(trace in arb_trace()) {
        let mut bytes = Vec::new();
        let n = write_trace(&trace, &mut bytes).unwrap();
        prop_assert_eq!(n as usize, bytes.len());
        let back = read_trace(&mut bytes.as_slice()).unwrap();
        prop_assert_eq!(back.header(), trace.header());
        let a: Vec<u32> = back.values().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = trace.values().iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(a, b);

        let mut reader = TraceReader::new(bytes.as_slice()).unwrap();
        let mut streamed = Vec::new();
        while let Some((_, _, row)) = reader.next_row().unwrap() {
            streamed.extend(row.iter().map(|v| v.to_bits()));
        }
        prop_assert_eq!(reader.finish().unwrap(), value_checksum(&trace));
        prop_assert_eq!(streamed, trace.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}

fn sample_bytes() -> Vec<u8> {
    let t = ActivationTrace::new(header(2, 2, 3, "q1"), (0..12).map(|i| i as f32).collect()).unwrap();
    let mut bytes = Vec::new();
    write_trace(&t, &mut bytes).unwrap();
    bytes
}

#[test]
fn corrupted_files_raise_distinct_errors() {
    let good = sample_bytes();
    let read = |b: &[u8]| read_trace(&mut &b[..]);

    let mut magic = good.clone();
    magic[..4].copy_from_slice(b"JUNK");
    assert!(matches!(read(&magic), Err(TraceError::BadMagic(m)) if &m == b"JUNK"));

    let mut version = good.clone();
    version[4..8].copy_from_slice(&9u32.to_le_bytes());
    assert!(matches!(read(&version), Err(TraceError::UnknownVersion(9))));

    assert!(matches!(read(&good[..10]), Err(TraceError::Truncated(_))));
    assert!(matches!(read(&good[..20]), Err(TraceError::Truncated(_))));
    assert!(matches!(read(&good[..good.len() - 2]), Err(TraceError::Truncated(_))));

    let mut trailing = good.clone();
    trailing.extend_from_slice(&[0, 0, 0, 0, 1]);
    assert!(matches!(
        read(&trailing),
        Err(TraceError::CountMismatch { expected: 12, extra_bytes: 5 })
    ));

    let mut header = good.clone();
    header[12] = b'!';
    assert!(matches!(read(&header), Err(TraceError::Header(_))));

    let mut nan = good.clone();
    let last = nan.len() - 4;
    nan[last..].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(matches!(read(&nan), Err(TraceError::Validation(_))));
}

#[test]
fn manifest_catches_each_violation() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = TraceManifest::default();
    let mut add = |qid: &str, file: &str, culture: &str, tweak: &dyn Fn(&mut ManifestEntry)| {
        let t = ActivationTrace::new(header(1, 1, 2, qid), vec![1.0, 2.0]).unwrap();
        let mut bytes = Vec::new();
        write_trace(&t, &mut bytes).unwrap();
        fs::write(dir.path().join(file), &bytes).unwrap();
        let mut e = ManifestEntry {
            question_id: qid.into(),
            language: "zh".into(),
            culture: culture.into(),
            path: file.into(),
            byte_length: bytes.len() as u64,
            checksum: value_checksum(&t),
        };
        tweak(&mut e);
        manifest.push(e).unwrap();
    };
    add("ok", "ok.ntrc", "CN", &|_| {});
    add("len", "len.ntrc", "CN", &|e| e.byte_length += 1);
    add("crc", "crc.ntrc", "CN", &|e| e.checksum ^= 1);
    add("meta", "meta.ntrc", "US", &|_| {});
    add("gone", "gone.ntrc", "CN", &|e| e.path = "missing.ntrc".into());
    add("ok", "ok2.ntrc", "CN", &|_| {});

    let text = manifest.to_string();
    let parsed: TraceManifest = text.parse().unwrap();
    let v = validate_manifest(&parsed, dir.path());
    let kinds: Vec<(&str, &str)> = v
        .iter()
        .map(|x| {
            let kind = match x {
                ManifestViolation::DuplicateId { .. } => "duplicate",
                ManifestViolation::Unreadable { .. } => "unreadable",
                ManifestViolation::Unparseable { .. } => "unparseable",
                ManifestViolation::ByteLength { .. } => "length",
                ManifestViolation::Checksum { .. } => "checksum",
                ManifestViolation::MetadataMismatch { .. } => "metadata",
            };
            (x.question_id(), kind)
        })
        .collect();
    assert_eq!(
        kinds,
        vec![
            ("ok", "duplicate"),
            ("len", "length"),
            ("crc", "checksum"),
            ("meta", "metadata"),
            ("gone", "unreadable"),
        ]
    );

    fs::write(dir.path().join("crc.ntrc"), b"NTRC").unwrap();
    let v = validate_manifest(&parsed, dir.path());
    assert!(v.iter().any(|x| matches!(x, ManifestViolation::Unparseable { question_id, .. } if question_id == "crc")));
}
