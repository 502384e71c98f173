use hygt_cli::*;
use hygt_core::{quantize_model, Block, HyGTModel, ResidualDataset};
use proptest::prelude::*;

fn dataset_bytes(data: &ResidualDataset, format: SampleFormat) -> Vec<u8> {
    let mut buf = Vec::new();
    write_dataset(&mut buf, data, format).unwrap();
    buf
}

fn bundle_bytes(bundle: &ModelBundle) -> Vec<u8> {
    let mut buf = Vec::new();
    write_bundle(&mut buf, bundle).unwrap();
    buf
}

fn sample_model(log2_n: u32, rounds: usize, seed: u64) -> HyGTModel {
    let count = hygt_core::num_parameters(log2_n, rounds);
    let angles = (0..count).map(|i| ((i as u64 * 7 + seed) % 97) as f64 * 0.0731 - 3.0).collect();
    HyGTModel::new(log2_n, rounds, angles, None).unwrap()
}

#[test]
fn dataset_header_layout() {
    let data = ResidualDataset::new(
        4,
        3,
        vec![Block { class_id: 2, values: vec![1.0, -2.0, 0.5, 0.25] }],
    )
    .unwrap();
    let bytes = dataset_bytes(&data, SampleFormat::F32);
    assert_eq!(&bytes[..4], b"RBLK");
    assert_eq!(bytes[4], 1);
    assert_eq!(bytes[5], 2);
    assert_eq!(&bytes[6..8], &3u16.to_le_bytes());
    assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
    assert_eq!(&bytes[12..14], &2u16.to_le_bytes());
    assert_eq!(&bytes[14..18], &1.0f32.to_le_bytes());
    assert_eq!(bytes.len(), 12 + 2 + 4 * 4);
    assert_eq!(dataset_bytes(&data, SampleFormat::F64)[4], 2);
}

#[test]
fn bundle_header_layout_and_size() {
    let model = sample_model(4, 2, 1).with_permutation((0..16).rev().collect()).unwrap();
    let q = quantize_model(&model, 8).unwrap();
    let bundle = ModelBundle::new(4, 10, BundleModels::Quantized(vec![q])).unwrap();
    let bytes = bundle_bytes(&bundle);
    assert_eq!(&bytes[..4], b"HYGT");
    assert_eq!(&bytes[4..10], &[1, 4, 1, 0, 8, 10]);
    assert_eq!(&bytes[10..12], &[2, 1]);
    // One byte per angle, two per permutation index.
    assert_eq!(bytes.len(), 10 + 2 + 64 + 2 * 16);

    let float = ModelBundle::float(vec![sample_model(4, 2, 1)]).unwrap();
    let bytes = bundle_bytes(&float);
    assert_eq!(bytes[8], 0);
    assert_eq!(bytes.len(), 10 + 2 + 8 * 64);
}

#[test]
fn wide_codes_use_two_bytes() {
    let q = quantize_model(&sample_model(2, 1, 3), 10).unwrap();
    let bundle = ModelBundle::new(2, 12, BundleModels::Quantized(vec![q])).unwrap();
    let bytes = bundle_bytes(&bundle);
    assert_eq!(bytes.len(), 10 + 2 + 2 * 4);
    assert_eq!(read_bundle(&mut bytes.as_slice()).unwrap(), bundle);
}

#[test]
fn malformed_files_are_format_errors() {
    let data = ResidualDataset::from_vectors(2, vec![vec![1.0, 2.0]]).unwrap();
    let good = dataset_bytes(&data, SampleFormat::F32);
    for cut in 0..good.len() {
        let err = read_dataset(&mut &good[..cut]).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
    }
    let mut bad = good.clone();
    bad[0] = b'X';
    assert!(matches!(read_dataset(&mut bad.as_slice()), Err(CliError::Format(_))));
    let mut bad = good.clone();
    bad[4] = 9;
    assert!(matches!(read_dataset(&mut bad.as_slice()), Err(CliError::Format(_))));
    let mut bad = good.clone();
    bad[12] = 5;
    assert!(matches!(read_dataset(&mut bad.as_slice()), Err(CliError::Format(_))));
    let mut bad = good.clone();
    bad.push(0);
    assert!(matches!(read_dataset(&mut bad.as_slice()), Err(CliError::Format(_))));

    let bundle = ModelBundle::float(vec![sample_model(1, 1, 0).with_permutation(vec![1, 0]).unwrap()]).unwrap();
    let good = bundle_bytes(&bundle);
    for cut in 0..good.len() {
        assert!(matches!(read_bundle(&mut &good[..cut]), Err(CliError::Format(_))));
    }
    let mut bad = good.clone();
    let last = bad.len() - 2;
    bad[last] = 1; // permutation [1, 1]
    assert!(matches!(read_bundle(&mut bad.as_slice()), Err(CliError::Format(_))));
    let mut bad = good;
    bad[11] = 2;
    assert!(matches!(read_bundle(&mut bad.as_slice()), Err(CliError::Format(_))));
}

#[test]
fn bundle_validation() {
    assert!(ModelBundle::float(vec![]).is_err());
    assert!(ModelBundle::float(vec![sample_model(2, 1, 0), sample_model(3, 1, 0)]).is_err());
    let a = quantize_model(&sample_model(2, 1, 0), 8).unwrap();
    let b = quantize_model(&sample_model(2, 1, 0), 6).unwrap();
    assert!(ModelBundle::new(2, 10, BundleModels::Quantized(vec![a, b])).is_err());
    assert!(ModelBundle::new(2, 3, BundleModels::Float(vec![sample_model(2, 1, 0)])).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dataset_roundtrip_is_bit_exact(
        log2_n in 1u32..=4,
        classes in 1usize..4,
        raw in prop::collection::vec((0usize..100, prop::collection::vec(-1e6f64..1e6, 16)), 0..12),
    ) {
        let dim = 1usize << log2_n;
        let blocks: Vec<Block> = raw
            .into_iter()
            .map(|(c, v)| Block { class_id: c % classes, values: v[..dim].to_vec() })
            .collect();
        let data = ResidualDataset::new(dim, classes, blocks).unwrap();

        let wide = dataset_bytes(&data, SampleFormat::F64);
        let (back, format) = read_dataset(&mut wide.as_slice()).unwrap();
        prop_assert_eq!(format, SampleFormat::F64);
        prop_assert_eq!(&back, &data);

        let narrow = dataset_bytes(&data, SampleFormat::F32);
        let (back, _) = read_dataset(&mut narrow.as_slice()).unwrap();
        prop_assert_eq!(dataset_bytes(&back, SampleFormat::F32), narrow);
    }

    #[test]
    fn bundle_roundtrip_is_bit_exact(
        log2_n in 1u32..=5,
        rounds in 1usize..4,
        classes in 1usize..4,
        bits in 0u32..=12,
        permute in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let dim = 1usize << log2_n;
        let models: Vec<HyGTModel> = (0..classes)
            .map(|c| {
                let m = sample_model(log2_n, rounds, seed.wrapping_add(c as u64));
                if permute { m.with_permutation((0..dim).map(|i| (i + c) % dim).collect()).unwrap() } else { m }
            })
            .collect();
        let bundle = if bits == 0 {
            ModelBundle::float(models).unwrap()
        } else {
            let q = models.iter().map(|m| quantize_model(m, bits).unwrap()).collect();
            ModelBundle::new(log2_n, 10, BundleModels::Quantized(q)).unwrap()
        };
        let bytes = bundle_bytes(&bundle);
        let back = read_bundle(&mut bytes.as_slice()).unwrap();
        prop_assert_eq!(&back, &bundle);
        prop_assert_eq!(bundle_bytes(&back), bytes);
    }
}
