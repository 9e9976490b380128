//! Rendered prompts against hand-transcribed golden files.

use std::path::PathBuf;

use disinfo_bench::prompts::{
    self, Ablation, CotVariant, DetectPromptVars, Element, GenPromptVars, OutputMode, PromptError,
};

const FAKE: &str = "ARTICLE_F";
const TRUE: &str = "ARTICLE_T";

fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/prompts").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn generation_prompts_match_golden() {
    let cases = [
        ("gen_standard.txt", GenPromptVars::standard(FAKE, &["study", "evidence", "fact"], "formal", "journalist")),
        ("gen_mixture.txt", GenPromptVars::mixture(FAKE, TRUE, "formal", "journalist")),
        (
            "gen_cot.txt",
            GenPromptVars::cot(TRUE, "2028 U.S. presidential election", "journalists", &["CNN", "FOX News", "Reuters"]),
        ),
    ];
    for (file, vars) in cases {
        let rendered = prompts::render_generation(&vars).unwrap();
        assert_eq!(rendered.text, golden(file), "{file}");
        assert!(!prompts::has_unreplaced_slot(&rendered.text), "{file}");
    }
}

#[test]
fn detection_prompts_match_golden() {
    let mut cases = vec![
        ("detect_std_no_expl.txt", DetectPromptVars::standard(FAKE, false)),
        ("detect_std_with_expl.txt", DetectPromptVars::standard(FAKE, true)),
    ];
    for v in CotVariant::ALL {
        let file = match v {
            CotVariant::NoPerson => "detect_cot_no_person.txt",
            CotVariant::NoPlace => "detect_cot_no_place.txt",
            CotVariant::NoTime => "detect_cot_no_time.txt",
            CotVariant::NoEvent => "detect_cot_no_event.txt",
            CotVariant::AllBinary => "detect_cot_all_binary.txt",
            CotVariant::AllScale => "detect_cot_all_scale.txt",
        };
        cases.push((file, DetectPromptVars::cot(FAKE, v.ablation(), v.output_mode())));
    }
    for (file, vars) in cases {
        let rendered = prompts::render_detection(&vars).unwrap();
        assert_eq!(rendered.text, golden(file), "{file}");
    }
}

#[test]
fn ablated_element_is_absent_and_others_present() {
    for ablation in Ablation::REMOVALS {
        for mode in [OutputMode::Binary, OutputMode::Scale1to100] {
            let text = prompts::render_detection(&DetectPromptVars::cot(FAKE, ablation, mode)).unwrap().text;
            let removed = ablation.removed_element().unwrap();
            assert!(!text.contains(removed.phrase()), "{ablation:?}: {text}");
            for e in Element::ALL.into_iter().filter(|e| *e != removed) {
                assert!(text.contains(e.phrase()), "{ablation:?} lost {e:?}");
            }
        }
    }
}

#[test]
fn cot_versions_follow_outlets() {
    let text = prompts::render_generation(&GenPromptVars::cot(TRUE, "a flood", "reporters", &["CNN"]))
        .unwrap()
        .text;
    assert!(text.ends_with("Assume the roles of reporters from CNN. Following steps 1-3, rewrite the original text in 1 versions."));
    let mut vars = GenPromptVars::cot(TRUE, "a flood", "reporters", &["CNN", "Reuters"]);
    vars.n_versions = 3;
    assert!(matches!(
        prompts::render_generation(&vars),
        Err(PromptError::VersionCountMismatch { .. })
    ));
}

#[test]
fn missing_slots_are_typed_errors() {
    assert_eq!(
        prompts::render_generation(&GenPromptVars::mixture(FAKE, "", "formal", "journalist")),
        Err(PromptError::MissingVariable("true news".into()))
    );
    assert_eq!(
        prompts::render_generation(&GenPromptVars::standard(FAKE, &[], "formal", "journalist")),
        Err(PromptError::EmptyKeywordList)
    );
    assert!(matches!(
        prompts::render_detection(&DetectPromptVars::standard("  ", false)),
        Err(PromptError::MissingVariable(_))
    ));
}

#[test]
fn article_text_with_brackets_is_not_resubstituted() {
    let article = "He wrote [tone] and [fake news] in his notes.";
    let text = prompts::render_detection(&DetectPromptVars::standard(article, false)).unwrap().text;
    assert!(text.contains(article));
}

#[test]
fn catalog_has_twelve_distinct_tags() {
    let catalog = prompts::prompt_catalog();
    assert_eq!(catalog.len(), 12);
    let tags: std::collections::BTreeSet<_> = catalog.iter().map(|e| e.kind_tag.as_str()).collect();
    assert_eq!(tags.len(), 12);
}
