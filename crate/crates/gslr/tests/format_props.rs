//! Property tests for the serialization formats and transform invariants.

use gslr::grid::{fft2_unitary, ifft2_unitary, KArray, KGrid};
use gslr::pipeline::{read_array_bytes, write_array_bytes, ArrayFile, ArrayPayload};
use num_complex::{Complex32, Complex64};
use proptest::prelude::*;
use std::collections::BTreeMap;

fn arb_shape() -> impl Strategy<Value = [usize; 3]> {
    (1usize..3, 1usize..6, 1usize..6).prop_map(|(c, ny, nx)| [c, ny, nx])
}

fn arb_provenance() -> impl Strategy<Value = BTreeMap<String, String>> {
    proptest::collection::btree_map(
        "[a-z][a-z0-9_-]{0,8}",
        "[ -~]{0,16}", // printable ASCII, exercises the escaping
        0..4,
    )
}

fn arb_payload(len: usize) -> impl Strategy<Value = ArrayPayload> {
    prop_oneof![
        proptest::collection::vec(any::<(f64, f64)>(), len)
            .prop_map(|v| ArrayPayload::C128(v.into_iter().map(|(r, i)| Complex64::new(r, i)).collect())),
        proptest::collection::vec(any::<(f32, f32)>(), len)
            .prop_map(|v| ArrayPayload::C64(v.into_iter().map(|(r, i)| Complex32::new(r, i)).collect())),
        proptest::collection::vec(any::<f64>(), len).prop_map(ArrayPayload::F64),
        proptest::collection::vec(any::<u8>(), len).prop_map(ArrayPayload::U8),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn array_file_round_trip_bit_exact(
        (shape, payload) in arb_shape()
            .prop_flat_map(|shape| {
                let len = shape[0] * shape[1] * shape[2];
                arb_payload(len).prop_map(move |p| (shape, p))
            }),
        prov in arb_provenance(),
    ) {
        let file = ArrayFile::new(shape, prov, payload).unwrap();
        let bytes = write_array_bytes(&file);
        let back = read_array_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &file);
        // serializing again reproduces the identical bytes
        prop_assert_eq!(write_array_bytes(&back), bytes);
    }

    #[test]
    fn fft_pair_preserves_norm_and_inverts(
        nx in 1usize..12,
        ny in 1usize..12,
        channels in 1usize..3,
        seed in any::<u32>(),
    ) {
        let grid = KGrid::new(nx, ny).unwrap();
        let mut state = seed as u64 | 1;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let data: Vec<Complex64> = (0..channels * grid.len())
            .map(|_| Complex64::new(next(), next()))
            .collect();
        let x = KArray::from_vec(grid, channels, data).unwrap();
        let spec = fft2_unitary(&x);
        prop_assert!((spec.norm() - x.norm()).abs() <= 1e-12 * (1.0 + x.norm()));
        let back = ifft2_unitary(&spec);
        let diff = back
            .data()
            .iter()
            .zip(x.data())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        prop_assert!(diff < 1e-12);
    }
}
