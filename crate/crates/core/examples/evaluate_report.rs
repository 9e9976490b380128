//! Misclassification accounting, grouped reports and dataset deltas.
//!
//!     cargo run --example evaluate_report

use disinfo_bench::corpus::{Label, Outlet, Topic};
use disinfo_bench::evaluation::{self, DenominatorPolicy, GroupKey, ReportFormat};
use disinfo_bench::pipelines::{DetectorSpec, Predicted, RunRecord};
use disinfo_bench::prompts::CotVariant;

/// `missed` in every ten items slip through as "true"; one is unparseable.
fn records(model: &str, missed: usize) -> Vec<RunRecord> {
    (0..60)
        .map(|i| {
            let predicted = match i % 10 {
                9 => Predicted::Unparseable,
                k if k < missed => Predicted::True,
                _ => Predicted::Fake,
            };
            RunRecord {
                article_id: format!("g-{i}"),
                dataset: "d_gpt_cot".into(),
                detector: DetectorSpec::llm_cot(model, CotVariant::AllBinary),
                predicted,
                truth: Label::Fake,
                confidence: None,
                outlet: Some(Outlet::ALL[i % Outlet::ALL.len()]),
                topic: Some(Topic::Politics),
                model_name: model.into(),
                duration_ms: 0,
            }
        })
        .collect()
}

fn main() -> anyhow::Result<()> {
    let a = records("gpt-3.5-turbo", 3);
    for policy in [DenominatorPolicy::ParsedOnly, DenominatorPolicy::All] {
        let r = evaluation::misclassification_rate(&a, policy)?;
        println!("{policy:?}: {}/{} = {:.4}", r.misclassified, r.denominator, r.rate);
    }

    let by_outlet = evaluation::evaluate(&a, DenominatorPolicy::ParsedOnly, Some(GroupKey::Outlet))?;
    println!("\n{}", evaluation::render_report(&by_outlet, ReportFormat::Markdown));

    let b = records("gpt-4", 1);
    let other = evaluation::evaluate(&b, DenominatorPolicy::ParsedOnly, Some(GroupKey::Outlet))?;
    let delta = evaluation::compare_reports(&by_outlet, &other)?;
    println!("gpt-4 minus gpt-3.5-turbo, percentage points:");
    for (group, d) in &delta.groups {
        println!("  {group:<10} {:+.1}", evaluation::round_half_up(*d, 1));
    }
    Ok(())
}
