//! Render generation and detection prompts and list the catalog.
//!
//!     cargo run --example render_prompts

use disinfo_bench::prompts::{self, CotVariant, DetectPromptVars, GenPromptVars};

fn main() -> anyhow::Result<()> {
    let article = "Officials confirmed the bridge reopened on Tuesday after repairs.";

    let std = prompts::render_generation(&GenPromptVars::standard(
        "The bridge was closed for good after a secret report.",
        &["bridge", "report"],
        "urgent",
        "local blogger",
    ))?;
    println!("[{}] {}\n{}\n", std.kind_tag, &std.digest[..12], std.text);

    let cot = prompts::render_generation(&GenPromptVars::cot(
        article,
        "the bridge collapsed during the reopening",
        "journalist",
        &["CNN", "Fox News"],
    ))?;
    println!("[{}] {}\n{}\n", cot.kind_tag, &cot.digest[..12], cot.text);

    for variant in [CotVariant::AllBinary, CotVariant::NoTime, CotVariant::AllScale] {
        let vars = DetectPromptVars::cot(article, variant.ablation(), variant.output_mode());
        let p = prompts::render_detection(&vars)?;
        println!("[{} / {}] {} chars", p.kind_tag, variant.label(), p.text.len());
    }

    println!("\ncatalog:");
    for entry in prompts::prompt_catalog() {
        println!("  {:<24} {} chars", entry.kind_tag, entry.skeleton.len());
    }
    Ok(())
}
