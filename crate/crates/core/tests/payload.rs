use proptest::prelude::*;
use squeeze3d::fingerprint::Fingerprint;
use squeeze3d::payload::*;

const GOLDEN: &[u8] = include_bytes!("data/golden_64x8.sqz3");

fn golden_input() -> Vec<f64> {
    (0..64)
        .map(|i| ((i as f64) * 0.61).sin() * 1.75 - 0.2)
        .collect()
}

#[test]
fn golden_file_is_byte_exact() {
    let bytes = encode_payload(
        &golden_input(),
        8,
        false,
        Fingerprint(*b"codec-fp"),
        Fingerprint(*b"bridgefp"),
    )
    .unwrap();
    assert_eq!(bytes.len(), 64 + 36 + 4);
    assert_eq!(bytes, GOLDEN);
}

#[test]
fn golden_header_fields_by_offset() {
    let g = GOLDEN;
    assert_eq!(&g[..4], b"SQZ3");
    assert_eq!(u16::from_le_bytes([g[4], g[5]]), 1);
    assert_eq!(u32::from_le_bytes(g[6..10].try_into().unwrap()), 64);
    assert_eq!((g[10], g[11]), (8, 0));
    assert_eq!(&g[20..28], b"codec-fp");
    assert_eq!(&g[28..36], b"bridgefp");
    let crc = u32::from_le_bytes(g[100..104].try_into().unwrap());
    assert_eq!(crc, crc32_bitwise(&g[..100]));
    let scale = f32::from_le_bytes(g[12..16].try_into().unwrap()) as f64;
    let offset = f32::from_le_bytes(g[16..20].try_into().unwrap()) as f64;
    for (i, z) in golden_input().iter().enumerate() {
        let back = offset + scale * g[36 + i] as f64;
        assert!((z - back).abs() <= scale / 2.0 + 1e-12);
    }
}

/// Bitwise CRC-32 (reflected, polynomial 0xEDB88320).
fn crc32_bitwise(bytes: &[u8]) -> u32 {
    let mut crc = !0u32;
    for &b in bytes {
        crc ^= b as u32;
        for _ in 0..8 {
            crc = if crc & 1 == 1 {
                (crc >> 1) ^ 0xEDB8_8320
            } else {
                crc >> 1
            };
        }
    }
    !crc
}

#[test]
fn file_round_trip_and_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("z.sqz3");
    let z = golden_input();
    let n = write_payload(
        &path,
        &z,
        16,
        true,
        Fingerprint::default(),
        Fingerprint::default(),
    )
    .unwrap();
    assert_eq!(n, std::fs::metadata(&path).unwrap().len() as usize);
    let (back, header) = read_payload(&path).unwrap();
    assert_eq!(back, dequantize(&quantize(&z, 16).unwrap()).unwrap());
    assert_eq!(header.bits, 16);
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    assert!(matches!(read_payload(&path), Err(PayloadError::Crc { .. })));
}

#[test]
fn sixteen_bits_cost_more_than_eight() {
    let z: Vec<f64> = (0..64).map(|i| (i as f64).cos()).collect();
    let a = encode_payload(&z, 8, false, Fingerprint::default(), Fingerprint::default()).unwrap();
    let b = encode_payload(
        &z,
        16,
        false,
        Fingerprint::default(),
        Fingerprint::default(),
    )
    .unwrap();
    assert!(b.len() > a.len());
}

#[test]
fn random_vector_error_is_exhaustively_bounded() {
    let z: Vec<f64> = (0..64)
        .map(|i| ((i * 7919 % 113) as f64 / 113.0 - 0.5) * 6.0)
        .collect();
    let q = quantize(&z, 8).unwrap();
    let back = dequantize(&q).unwrap();
    for (a, b) in z.iter().zip(&back) {
        assert!((a - b).abs() <= q.scale as f64 / 2.0 + 4.0 * f64::EPSILON * a.abs().max(1.0));
    }
}

fn bound(q: &Quantized, z: &[f64]) -> f64 {
    let m = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    q.scale as f64 / 2.0 + 4.0 * f64::EPSILON * m.max(1.0)
}

proptest! {
    #[test]
    fn quantization_error_within_half_step(
        z in prop::collection::vec(-1e4f64..1e4, 1..200),
        wide in any::<bool>(),
    ) {
        let bits = if wide { 16 } else { 8 };
        let q = quantize(&z, bits).unwrap();
        let back = dequantize(&q).unwrap();
        let tol = bound(&q, &z);
        for (a, b) in z.iter().zip(&back) {
            prop_assert!((a - b).abs() <= tol);
        }
        prop_assert!(q.codes.iter().all(|&c| bits == 16 || c <= 255));
    }

    #[test]
    fn range_coder_is_lossless(codes in prop::collection::vec(any::<u16>(), 0..400)) {
        let enc = range_encode(&codes, 16).unwrap();
        prop_assert_eq!(range_decode(&enc, codes.len(), 16).unwrap(), codes.clone());
        let bytes: Vec<u16> = codes.iter().map(|c| c & 0xff).collect();
        let enc = range_encode(&bytes, 8).unwrap();
        prop_assert_eq!(range_decode(&enc, bytes.len(), 8).unwrap(), bytes);
    }

    #[test]
    fn skewed_streams_shrink(
        n in 200usize..1000,
        rare in prop::collection::vec((0usize..1000, any::<u8>()), 0..10),
    ) {
        let mut codes = vec![42u16; n];
        for (i, v) in rare {
            codes[i % n] = v as u16;
        }
        let enc = range_encode(&codes, 8).unwrap();
        prop_assert!(enc.len() < n);
        prop_assert_eq!(range_decode(&enc, n, 8).unwrap(), codes);
    }

    #[test]
    fn container_round_trip(
        z in prop::collection::vec(-50f64..50.0, 1..130),
        wide in any::<bool>(),
        entropy in any::<bool>(),
    ) {
        let bits = if wide { 16 } else { 8 };
        let bytes = encode_payload(&z, bits, entropy, Fingerprint([1; 8]), Fingerprint([2; 8])).unwrap();
        let (back, h) = decode_payload(&bytes).unwrap();
        prop_assert_eq!(back, dequantize(&quantize(&z, bits).unwrap()).unwrap());
        prop_assert_eq!(h.d_c as usize, z.len());
        if !h.entropy_coded {
            prop_assert_eq!(bytes.len(), 36 + code_bytes(z.len(), bits) + 4);
        } else {
            prop_assert!(bytes.len() < 36 + code_bytes(z.len(), bits) + 4);
        }
    }
}
