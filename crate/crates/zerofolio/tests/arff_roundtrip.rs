//! Write-then-parse round-trip over randomly generated relations.

use proptest::prelude::*;
use zerofolio::arff::{parse_arff, to_arff_string, ArffValue, Attribute, AttributeKind, Relation};

fn name_strategy() -> impl Strategy<Value = String> {
    proptest::string::string_regex("[A-Za-z][A-Za-z0-9_]{0,12}").unwrap()
}

fn text_strategy() -> impl Strategy<Value = String> {
    // Printable ASCII plus the separators and escapes the writer must handle.
    proptest::string::string_regex("[ -~]{0,20}").unwrap()
}

fn kind_strategy() -> impl Strategy<Value = AttributeKind> {
    prop_oneof![Just(AttributeKind::Numeric), Just(AttributeKind::Str)]
}

fn value_strategy(kind: &AttributeKind) -> BoxedStrategy<ArffValue> {
    match kind {
        AttributeKind::Numeric => prop_oneof![
            4 => (-1e9f64..1e9).prop_map(ArffValue::Numeric),
            1 => Just(ArffValue::Missing),
        ]
        .boxed(),
        // String columns carry no missing markers in this property (a bare
        // `?` is the missing marker, so only quoted `?` survives).
        AttributeKind::Str | AttributeKind::Nominal(_) => {
            text_strategy().prop_map(ArffValue::Str).boxed()
        }
    }
}

fn relation_strategy() -> impl Strategy<Value = Relation> {
    (
        name_strategy(),
        proptest::collection::vec((name_strategy(), kind_strategy()), 1..5),
        0usize..12,
    )
        .prop_flat_map(|(name, columns, n_rows)| {
            let attributes: Vec<Attribute> = columns
                .iter()
                .enumerate()
                .map(|(i, (n, kind))| Attribute {
                    name: format!("{n}_{i}"),
                    kind: kind.clone(),
                })
                .collect();
            let row_strategy: Vec<BoxedStrategy<ArffValue>> =
                attributes.iter().map(|a| value_strategy(&a.kind)).collect();
            let rows = proptest::collection::vec(row_strategy, n_rows);
            (Just(name), Just(attributes), rows)
        })
        .prop_map(|(name, attributes, rows)| Relation { name, attributes, rows })
}

proptest! {
    #[test]
    fn write_parse_round_trip(relation in relation_strategy()) {
        let text = to_arff_string(&relation);
        let parsed = parse_arff(&text)
            .unwrap_or_else(|e| panic!("failed to reparse:\n{text}\n{e}"));
        prop_assert_eq!(parsed, relation);
    }
}
