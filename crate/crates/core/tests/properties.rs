use std::sync::Arc;

use proptest::prelude::*;
use safe_csv::invariants::ColumnInvariant;
use safe_csv::value::transpose;
use safe_csv::{
    approx_eq, csv_invariants_failed, parse_cell, BackendKind, CsvError, CsvIo, CsvSettings, CsvType, CsvValue, Data,
    Header, Headers, InvariantSuite, Reason,
};

fn settings() -> impl Strategy<Value = CsvSettings> {
    (
        prop::sample::select(vec![',', ';', '\t', '|', ' ']),
        prop::sample::select(vec!['"', '\'']),
        prop::option::of(prop::sample::select(vec!['#', '!'])),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|(delimiter, quote, line_comment, skip_blank_lines, trim_unquoted)| CsvSettings {
            delimiter,
            quote,
            line_comment,
            skip_blank_lines,
            trim_unquoted,
        })
}

/// Text drawn from characters that matter to the dialect.
fn tricky_text() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop::sample::select(vec![
            'a', 'Z', '7', ',', ';', '|', '"', '\'', '#', '!', ' ', '\t', '\n', '\r', 'é', '\u{feff}',
        ]),
        0..8,
    )
    .prop_map(|chars| chars.into_iter().collect())
}

fn value_of(ty: CsvType) -> BoxedStrategy<CsvValue> {
    match ty {
        CsvType::String => tricky_text().prop_map(CsvValue::Text).boxed(),
        CsvType::Integer => any::<i64>().prop_map(CsvValue::Int).boxed(),
        CsvType::Float => prop_oneof![
            (prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO),
            (-1000i32..1000).prop_map(|n| f64::from(n) / 8.0),
        ]
        .prop_map(CsvValue::Flt)
        .boxed(),
        CsvType::Boolean => any::<bool>().prop_map(CsvValue::Bool).boxed(),
    }
}

fn typed_data() -> impl Strategy<Value = Data> {
    (settings(), prop::collection::vec(prop::sample::select(CsvType::ALL.to_vec()), 1..5))
        .prop_flat_map(|(settings, types)| {
            let row = types.iter().map(|&t| value_of(t)).collect::<Vec<_>>();
            (Just(settings), Just(types), prop::collection::vec(row, 0..6))
        })
        .prop_map(|(settings, types, matrix)| {
            let headers = Headers::simple(&types).unwrap();
            Data::new(settings, headers, matrix).unwrap()
        })
}

fn read_back(text: &[u8], data: &Data, kind: BackendKind) -> Data {
    let mut backend = kind.create(data.settings().clone());
    let mut io = CsvIo::new();
    let outcome = io.read_with(Box::new(text), backend.as_mut(), data.headers(), true);
    assert!(outcome.success, "{:?}", io.last_error());
    assert!(outcome.errors.is_empty(), "{:?}", outcome.errors);
    outcome.data
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn transpose_is_an_involution(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
        let matrix: Vec<Vec<u64>> = (0..rows)
            .map(|r| (0..cols).map(|c| seed ^ (r * 31 + c) as u64).collect())
            .collect();
        let t = transpose(&matrix);
        prop_assert_eq!(t.len(), cols);
        prop_assert!(t.iter().all(|col| col.len() == rows));
        prop_assert_eq!(transpose(&t), matrix);
    }

    #[test]
    fn rendered_values_parse_back(value in prop::sample::select(CsvType::ALL.to_vec()).prop_flat_map(value_of)) {
        let ty = CsvType::ALL.into_iter().find(|&t| value.conforms_to(t)).unwrap();
        prop_assert_eq!(parse_cell(ty, &value.render()), Ok(value));
    }

    #[test]
    fn approx_eq_is_reflexive_and_symmetric(a in -1e6f64..1e6, b in -1e6f64..1e6, p in 0u32..8) {
        prop_assert!(approx_eq(a, a, p));
        prop_assert_eq!(approx_eq(a, b, p), approx_eq(b, a, p));
        prop_assert_eq!(approx_eq(a as f32, b as f32, p), approx_eq(b as f32, a as f32, p));
    }

    #[test]
    fn approx_eq_widens_with_lower_precision(a in -1e3f64..1e3, b in -1e3f64..1e3, p in 1u32..8) {
        if approx_eq(a, b, p) {
            prop_assert!(approx_eq(a, b, p - 1));
        }
    }

    #[test]
    fn write_then_read_is_identity(data in typed_data()) {
        let mut text = Vec::new();
        safe_csv::io::write_csv(&mut text, &data).unwrap();
        for kind in [BackendKind::Native, BackendKind::Fast] {
            let back = read_back(&text, &data, kind);
            prop_assert_eq!(back.matrix(), data.matrix());
        }
    }

    #[test]
    fn backends_agree(settings in settings(), text in tricky_text_long()) {
        let run = |kind: BackendKind| {
            let mut backend = kind.create(settings.clone());
            let rows: Vec<Vec<(String, bool)>> = backend
                .parse(Box::new(text.as_bytes()))
                .map(|row| row.into_iter().map(|f| (f.text, f.quoted)).collect())
                .collect();
            (rows, backend.last_error())
        };
        prop_assert_eq!(run(BackendKind::Native), run(BackendKind::Fast));
    }

    #[test]
    fn column_errors_land_on_the_first_failing_prefix(values in prop::collection::vec(-5i64..5, 1..12), limit in 0i64..10) {
        // not prefix-monotone: fails while the running sum sits above the limit
        let inv = move |_: &Header, column: &[CsvValue]| -> Reason {
            let sum: i64 = column.iter().filter_map(|v| match v { CsvValue::Int(i) => Some(*i), _ => None }).sum();
            (sum > limit).then(|| format!("sum {sum} over {limit}"))
        };
        let expected = (1..=values.len()).find_map(|k| {
            let prefix: Vec<CsvValue> = values[..k].iter().map(|&i| CsvValue::Int(i)).collect();
            let header = Header::new("n", CsvType::Integer, CsvValue::Int(0)).unwrap();
            inv(&header, &prefix).map(|reason| CsvError::new(k, 1, format!("Invalid col invariant: {reason}")))
        });
        let header = Header::new("n", CsvType::Integer, CsvValue::Int(0))
            .unwrap()
            .with_col_inv(Arc::new(inv) as Arc<dyn ColumnInvariant>);
        let data = Data::new(
            CsvSettings::default(),
            Headers::new(vec![header]).unwrap(),
            values.iter().map(|&i| vec![CsvValue::Int(i)]).collect(),
        )
        .unwrap();
        let got = csv_invariants_failed(&data, &InvariantSuite::empty());
        prop_assert_eq!(got.into_iter().next(), expected);
    }
}

fn tricky_text_long() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop::sample::select(vec![
            "a", "b", ",", ";", "|", "\t", " ", "\"", "'", "\"\"", "#", "!", "\n", "\r", "\r\n", "é", "\u{feff}",
        ]),
        0..40,
    )
    .prop_map(|parts| parts.concat())
}
