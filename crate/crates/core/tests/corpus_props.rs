//! Property tests for dataset storage, ingest and word truncation.

use std::collections::BTreeSet;

use disinfo_bench::corpus::{
    self, CorpusError, GenKind, GeneratedArticle, Label, NewsArticle, Outlet, SourceDataset, Topic,
    TopicColumnPolicy,
};
use proptest::prelude::*;

fn text() -> impl Strategy<Value = String> {
    // quotes, commas, newlines and non-ASCII all have to survive storage
    "[a-zA-Z0-9 ,.\"'\n\t\u{e9}\u{4e2d}\u{1f600}-]{0,80}[a-z]"
}

fn topic_for(label: Label) -> impl Strategy<Value = Topic> {
    let mut allowed = match label {
        Label::Fake => Topic::FAKE_TOPICS.to_vec(),
        Label::True => Topic::TRUE_TOPICS.to_vec(),
    };
    allowed.push(Topic::Unknown);
    proptest::sample::select(allowed)
}

fn news_article() -> impl Strategy<Value = NewsArticle> {
    prop_oneof![Just(Label::Fake), Just(Label::True)].prop_flat_map(|label| {
        (any::<u32>(), proptest::option::of(text()), text(), topic_for(label)).prop_map(
            move |(n, headline, content, topic)| NewsArticle {
                id: format!("{label}-{n:08}"),
                headline,
                content,
                label,
                topic,
                source_dataset: SourceDataset::Human,
            },
        )
    })
}

fn generated_article() -> impl Strategy<Value = GeneratedArticle> {
    (
        any::<u32>(),
        prop_oneof![Just(GenKind::Standard), Just(GenKind::Mixture), Just(GenKind::Cot)],
        proptest::sample::select(Outlet::ALL.to_vec()),
        text(),
        proptest::option::of(topic_for(Label::Fake)),
    )
        .prop_map(|(n, kind, outlet, content, topic)| GeneratedArticle {
            id: format!("g-{n}"),
            parent_fake_id: (kind != GenKind::Cot).then(|| format!("fake-{n}")),
            parent_true_id: (kind != GenKind::Standard).then(|| format!("true-{n}")),
            content,
            gen_kind: kind,
            outlet: (kind == GenKind::Cot).then_some(outlet),
            model_name: "gpt-3.5-turbo".into(),
            prompt_digest: format!("{n:064x}"),
            label: Label::Fake,
            topic: if kind == GenKind::Standard { topic } else { None },
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn thousand_record_roundtrip(records in proptest::collection::vec(news_article(), 1000..1100)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("human.jsonl");
        let manifest = corpus::write_jsonl(&records, &path).unwrap();
        prop_assert_eq!(manifest.record_count, records.len());
        let back: Vec<NewsArticle> = corpus::read_jsonl(&path).unwrap();
        prop_assert_eq!(back, records);
    }

    #[test]
    fn generated_roundtrip(records in proptest::collection::vec(generated_article(), 1..200)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gen.jsonl");
        corpus::write_jsonl(&records, &path).unwrap();
        let back: Vec<GeneratedArticle> = corpus::read_jsonl(&path).unwrap();
        prop_assert_eq!(back, records);
    }
}

proptest! {
    #[test]
    fn truncation_bounds_and_idempotence(s in "[a-z \n\t]{0,300}", limit in 0usize..60) {
        let t = corpus::truncate_words(&s, limit);
        prop_assert!(corpus::word_count(&t) <= limit);
        prop_assert!(s.starts_with(&t));
        prop_assert_eq!(corpus::truncate_words(&t, limit), t.clone());
        if corpus::word_count(&s) <= limit {
            prop_assert_eq!(&t, &s);
        } else {
            prop_assert_eq!(corpus::word_count(&t), limit);
            let kept: Vec<&str> = s.split_whitespace().take(limit).collect();
            prop_assert_eq!(t.split_whitespace().collect::<Vec<_>>(), kept);
        }
    }

    #[test]
    fn five_hundred_word_budget(words in 0usize..1500) {
        let s = (0..words).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let t = corpus::truncate_words(&s, 500);
        prop_assert_eq!(corpus::word_count(&t), words.min(500));
    }

    #[test]
    fn sampling_is_seeded_and_without_replacement(len in 0usize..200, frac in 0.0f64..=1.0, seed: u64) {
        let items: Vec<usize> = (0..len).collect();
        let n = (len as f64 * frac) as usize;
        let a = corpus::sample(&items, n, seed).unwrap();
        prop_assert_eq!(&a, &corpus::sample(&items, n, seed).unwrap());
        prop_assert_eq!(a.iter().collect::<BTreeSet<_>>().len(), n);
        let all = corpus::sample(&items, len, seed).unwrap();
        prop_assert_eq!(all.into_iter().collect::<BTreeSet<_>>(), items.iter().copied().collect());
        let too_many = corpus::sample(&items, len + 1, seed);
        prop_assert!(
            matches!(too_many, Err(CorpusError::SampleTooLarge { .. })),
            "expected SampleTooLarge, got {:?}",
            too_many
        );
    }

    #[test]
    fn csv_ingest_preserves_text_and_order(rows in proptest::collection::vec((text(), "[ ]{0,2}"), 1..40)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("Fake.csv");
        let mut w = csv::Writer::from_path(&path).unwrap();
        w.write_record(["title", "text", "subject", "date"]).unwrap();
        for (body, pad) in &rows {
            w.write_record(["t", &format!("{pad}{body}{pad}"), "politics", "2017-01-01"]).unwrap();
        }
        w.flush().unwrap();
        let out = corpus::ingest_human_csv(&path, Label::Fake, TopicColumnPolicy::FromSubject).unwrap();
        prop_assert_eq!(out.skipped_empty, 0);
        prop_assert_eq!(out.articles.len(), rows.len());
        for (i, (a, (body, _))) in out.articles.iter().zip(&rows).enumerate() {
            prop_assert_eq!(&a.content, body.trim());
            prop_assert_eq!(&a.id, &format!("fake-{:06}", i + 1));
            prop_assert_eq!(a.topic, Topic::Politics);
        }
    }
}

#[test]
fn bad_line_reports_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.jsonl");
    let good = serde_json::to_string(&NewsArticle {
        id: "true-1".into(),
        headline: None,
        content: "x".into(),
        label: Label::True,
        topic: Topic::WorldNews,
        source_dataset: SourceDataset::Human,
    })
    .unwrap();
    std::fs::write(&path, format!("{good}\n{good}\n{{\"id\": 3}}\n")).unwrap();
    match corpus::read_jsonl::<NewsArticle>(&path) {
        Err(CorpusError::SchemaMismatch { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn manifest_count_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.jsonl");
    let a = NewsArticle {
        id: "fake-1".into(),
        headline: Some("h".into()),
        content: "body".into(),
        label: Label::Fake,
        topic: Topic::UsNews,
        source_dataset: SourceDataset::Human,
    };
    corpus::write_jsonl(&[a.clone(), a.clone()], &path).unwrap();
    let line = serde_json::to_string(&a).unwrap();
    std::fs::write(&path, format!("{line}\n")).unwrap();
    assert!(matches!(
        corpus::read_jsonl::<NewsArticle>(&path),
        Err(CorpusError::ManifestMismatch { declared: 2, actual: 1, .. })
    ));
}

#[test]
fn topic_must_match_label() {
    let bad = NewsArticle {
        id: "true-1".into(),
        headline: None,
        content: "x".into(),
        label: Label::True,
        topic: Topic::LeftNews,
        source_dataset: SourceDataset::Human,
    };
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        corpus::write_jsonl(&[bad], &dir.path().join("x.jsonl")),
        Err(CorpusError::InvalidRecord(_))
    ));
}
