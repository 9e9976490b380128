//! Lexicon category profiles and human-vs-generated change.
//!
//!     cargo run --example lexicon_profile [lexicon.txt]

use disinfo_bench::textstats::{self, CorpusAggregation, Lexicon};

fn main() -> anyhow::Result<()> {
    let lexicon = match std::env::args().nth(1) {
        Some(path) => Lexicon::load(path.as_ref())?,
        None => Lexicon::demo(),
    };
    let human = [
        "The council approved the budget because the data showed a deficit.",
        "Research from the study suggests prices rose by two percent.",
    ];
    let generated = [
        "Shocking! They hate the truth and fear what we know about the election.",
        "Think about it: the government wants control, and the media helps them.",
    ];
    let h = textstats::profile_corpus(&human, &lexicon, CorpusAggregation::TokenWeighted)?;
    let g = textstats::profile_corpus(&generated, &lexicon, CorpusAggregation::TokenWeighted)?;
    println!("{} human tokens, {} generated tokens\n", h.token_count, g.token_count);
    print!("{}", textstats::comparison_markdown(&lexicon, &h, &g));
    Ok(())
}
