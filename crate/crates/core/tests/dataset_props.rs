use std::collections::BTreeMap;

use dualprobe::dualset::{
    assemble_eval_set, validate_pairs, AdaptationRow, AdaptationTable, AnswerBook, AnswerSet,
    DatasetSpec, FaultyTranslator, LanguageLayout, MockTranslator, TemplateQuestion,
};
use proptest::prelude::*;

const CULTURES: &[(&str, &str)] = &[("US", "en"), ("CN", "zh"), ("KR", "ko"), ("IR", "fa")];

fn world(templates: usize) -> (Vec<TemplateQuestion>, AnswerBook, AdaptationTable) {
    let ts: Vec<TemplateQuestion> = (0..templates)
        .map(|i| TemplateQuestion {
            template_id: format!("t{i:02}"),
            text: format!("What is thing {i} in «REGION»?"),
            topic: "misc".into(),
        })
        .collect();
    let mut book = AnswerBook::new();
    let mut rows = Vec::new();
    for (c, l) in CULTURES {
        for t in &ts {
            book.insert((t.template_id.clone(), c.to_string()), AnswerSet::from_texts(&[&format!("{c} answer")]));
        }
        rows.push(AdaptationRow {
            culture: c.to_string(),
            language: l.to_string(),
            region_name: format!("land of {c}"),
            rules: vec![],
        });
    }
    (ts, book, rows.into())
}

fn arb_spec() -> impl Strategy<Value = DatasetSpec> {
    let row = (0usize..4, prop::collection::btree_set(0usize..4, 1..=4), 1usize..4);
    prop::collection::btree_map(0usize..4, row, 1..=4).prop_map(|rows| {
        let layout = rows
            .into_iter()
            .map(|(lang, (_, cultures, n))| LanguageLayout {
                language: CULTURES[lang].1.into(),
                cultures: cultures.into_iter().map(|c| CULTURES[c].0.to_string()).collect(),
                samples_per_cell: n,
            })
            .collect();
        DatasetSpec {
            layout,
            native_languages: CULTURES.iter().map(|(c, l)| (c.to_string(), l.to_string())).collect(),
            pivot_language: "en".into(),
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn counts_pairs_and_reproducibility(spec in arb_spec()) {
        let (ts, book, table) = world(4);
        let a = assemble_eval_set(&spec, &ts, &book, &table, &MockTranslator, Default::default()).unwrap();
        prop_assert_eq!(a.records.len(), spec.total_records());
        let counts = a.cell_counts();
        for (cell, n) in spec.cells() {
            prop_assert_eq!(counts.get(&cell).copied(), Some(n));
        }
        prop_assert!(validate_pairs(&a.records, &a.pairs).is_empty());
        prop_assert!(a.records.windows(2).all(|w| w[0].key() < w[1].key()));
        let b = assemble_eval_set(&spec, &ts, &book, &table, &MockTranslator, Default::default()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn nothing_is_dropped(spec in arb_spec(), bad in 0usize..4) {
        let (ts, book, table) = world(4);
        let marker = format!("thing {bad} ");
        let faulty = FaultyTranslator::new(MockTranslator, move |r| r.text.contains(&marker));
        let a = assemble_eval_set(&spec, &ts, &book, &table, &faulty, Default::default()).unwrap();
        prop_assert_eq!(a.records.len() + a.quarantined.len(), a.requested);
    }
}

#[test]
fn pairs_cover_both_axes() {
    let (ts, book, table) = world(2);
    let spec = DatasetSpec {
        layout: vec![
            LanguageLayout { language: "en".into(), cultures: vec!["US".into(), "CN".into()], samples_per_cell: 2 },
            LanguageLayout { language: "zh".into(), cultures: vec!["US".into(), "CN".into()], samples_per_cell: 2 },
        ],
        native_languages: BTreeMap::from([("US".into(), "en".into()), ("CN".into(), "zh".into())]),
        pivot_language: "en".into(),
    };
    let a = assemble_eval_set(&spec, &ts, &book, &table, &MockTranslator, Default::default()).unwrap();
    assert_eq!(a.records.len(), 8);
    assert_eq!(a.pairs.len(), 8);
    assert_eq!(a.pairs.iter().filter(|p| p.same_culture()).count(), 4);
}
