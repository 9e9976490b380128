//! Turn raw model replies into typed verdicts.
//!
//!     cargo run --example parse_responses

use disinfo_bench::parsing::{self, RefusalMatcher, DEFAULT_THRESHOLD};
use disinfo_bench::prompts::OutputMode;

fn main() {
    let refusals = RefusalMatcher::default();
    let replies = [
        (OutputMode::Binary, "Step 1: the date is plausible.\nAnswer: Yes, it contains misleading information."),
        (OutputMode::Binary, "No. The article matches official statements."),
        (OutputMode::Binary, "It is hard to say."),
        (OutputMode::Binary, "I'm sorry, but I can't help with that."),
        (OutputMode::Scale1to100, "Several claims lack sources. Confidence: 72"),
        (OutputMode::Scale1to100, "I would give it a score of 150."),
    ];
    for (mode, raw) in replies {
        let shown = raw.replace('\n', " / ");
        match parsing::parse_detection(raw, mode, &refusals) {
            Ok(v) => println!(
                "{:?} -> {:?} (confidence {:?})  {shown}",
                mode,
                parsing::verdict_to_label(&v, DEFAULT_THRESHOLD),
                v.confidence
            ),
            Err(e) => println!("{mode:?} -> error: {e}  {shown}"),
        }
    }
}
