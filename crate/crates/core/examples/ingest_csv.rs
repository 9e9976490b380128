//! Ingest a `title,text,subject,date` CSV, store it as JSONL with a manifest,
//! then sample and truncate.
//!
//!     cargo run --example ingest_csv

use disinfo_bench::corpus::{self, Label, NewsArticle, TopicColumnPolicy};

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let csv_path = dir.path().join("Fake.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["title", "text", "subject", "date"])?;
    w.write_record(["Memo leak", "A leaked memo, shared online, claims parks were sold.", "politics", "2017-01-01"])?;
    w.write_record(["Blank", "   ", "News", "2017-01-02"])?;
    w.write_record(["Left", "Posts said the vote was \"rigged\" across three states overnight.", "left-news", "2017-01-03"])?;
    w.flush()?;

    let out = corpus::ingest_human_csv(&csv_path, Label::Fake, TopicColumnPolicy::FromSubject)?;
    println!("ingested {} articles, skipped {} blank rows", out.articles.len(), out.skipped_empty);
    for a in &out.articles {
        println!("  {} [{}] {} words", a.id, a.topic.display_name(), corpus::word_count(&a.content));
    }

    let jsonl = dir.path().join("fakes.jsonl");
    let manifest = corpus::write_jsonl(&out.articles, &jsonl)?;
    println!("manifest: {} ({:?}), {} records", manifest.name, manifest.kind, manifest.record_count);
    let back: Vec<NewsArticle> = corpus::read_jsonl(&jsonl)?;
    assert_eq!(back, out.articles);

    let picked = corpus::sample(&back, 1, 7)?;
    println!("sampled {} -> {:?}", picked[0].id, corpus::truncate_words(&picked[0].content, 5));
    Ok(())
}
