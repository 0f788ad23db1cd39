use cforge_core::io::{dump, load, read_field, write_field};
use cforge_core::{GridSpec, IoError, OneFormField, ScalarField, SymTensorField};
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = GridSpec> {
    (8usize..12, 0.5f64..4.0).prop_map(|(n, l)| GridSpec::new(n, l).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn scalar_round_trip_is_bit_identical(g in grid_strategy(), seed in any::<u64>()) {
        let f = ScalarField::from_fn(g, |p| ((p[0] + 2.0 * p[1] - p[2]) * (seed % 97) as f64).sin() * 1e10);
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        let back: ScalarField = read_field(buf.as_slice()).unwrap();
        prop_assert_eq!(back.grid(), f.grid());
        prop_assert!(back.values().iter().zip(f.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn one_form_round_trip_through_a_file(g in grid_strategy(), a in -1e300f64..1e300) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.field");
        let f = OneFormField::from_fn(g, |p| [a * p[0], -p[1] / 3.0, f64::MIN_POSITIVE]);
        dump(&f, &path).unwrap();
        let back: OneFormField = load(&path).unwrap();
        prop_assert!(back.as_slice().iter().zip(f.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn tensor_file_is_not_a_scalar_file() {
    let g = GridSpec::unit(8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.field");
    dump(&SymTensorField::identity(g), &path).unwrap();
    assert!(matches!(
        load::<ScalarField>(&path),
        Err(IoError::Format(_))
    ));
    assert!(matches!(
        load::<ScalarField>(&dir.path().join("missing")),
        Err(IoError::Io(_))
    ));
}
