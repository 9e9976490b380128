//! Acceptance checks, one per headline requirement, each with its tolerance
//! and runtime budget. Prints one PASS/FAIL line per check.
//!
//!     cargo test --test acceptance -- --nocapture

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use disinfo_bench::cli::{self, EXIT_OK, EXIT_PARTIAL};
use disinfo_bench::corpus::{self, Label, NewsArticle, Outlet, SourceDataset, Topic};
use disinfo_bench::embed_viz::{self, CorpusTag, EmbeddingMatrix, TsneParams};
use disinfo_bench::evaluation::{self, DenominatorPolicy, GroupKey};
use disinfo_bench::parsing::{self, ParseError, RefusalMatcher};
use disinfo_bench::pipelines::{DetectorSpec, Predicted, RunRecord};
use disinfo_bench::prompts::{self, Ablation, CotVariant, DetectPromptVars, Element, GenPromptVars, OutputMode};
use disinfo_bench::textstats::{self, CategoryProfile, Change, Lexicon};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond { Ok(()) } else { Err(msg()) }
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn rec(i: usize, predicted: Predicted, outlet: Option<Outlet>) -> RunRecord {
    RunRecord {
        article_id: format!("a{i}"),
        dataset: "d_gpt_cot".into(),
        detector: DetectorSpec::llm_cot("gpt-3.5-turbo", CotVariant::AllBinary),
        predicted,
        truth: Label::Fake,
        confidence: None,
        outlet,
        topic: None,
        model_name: "gpt-3.5-turbo".into(),
        duration_ms: 0,
    }
}

fn records(missed: usize, parsed: usize, outlet: Option<Outlet>, start: usize) -> Vec<RunRecord> {
    (0..parsed)
        .map(|i| rec(start + i, if i < missed { Predicted::True } else { Predicted::Fake }, outlet))
        .collect()
}

fn metric_arithmetic() -> Check {
    let r = evaluation::misclassification_rate(&records(154, 1000, None, 0), DenominatorPolicy::ParsedOnly)
        .map_err(|e| e.to_string())?;
    let rendered = evaluation::percent_half_up(r.misclassified, r.denominator, 2);
    ensure(rendered == "15.40", || format!("154/1000 rendered {rendered}"))?;

    let r = evaluation::misclassification_rate(&records(445, 571, None, 0), DenominatorPolicy::ParsedOnly)
        .map_err(|e| e.to_string())?;
    ensure((100.0 * r.rate - 77.93).abs() <= 0.01, || format!("445/571 = {}", 100.0 * r.rate))?;

    let mut rs = Vec::new();
    for (outlet, missed) in Outlet::ALL.into_iter().zip([300, 290, 379]) {
        let start = rs.len();
        rs.extend(records(missed, 571, Some(outlet), start));
    }
    let r = evaluation::evaluate(&rs, DenominatorPolicy::ParsedOnly, Some(GroupKey::Outlet)).map_err(|e| e.to_string())?;
    for (outlet, want) in Outlet::ALL.into_iter().zip([52.5, 50.8, 66.4]) {
        let got = 100.0 * r.groups[outlet.display_name()].rate;
        ensure((got - want).abs() <= 0.1, || format!("{outlet:?}: {got} vs {want}"))?;
    }
    Ok(())
}

fn golden(name: &str) -> Result<String, String> {
    let path = crate_dir().join("tests/golden/prompts").join(name);
    fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))
}

fn prompt_fidelity() -> Check {
    let (f, t) = ("ARTICLE_F", "ARTICLE_T");
    let gens = [
        ("gen_standard.txt", GenPromptVars::standard(f, &["study", "evidence", "fact"], "formal", "journalist")),
        ("gen_mixture.txt", GenPromptVars::mixture(f, t, "formal", "journalist")),
        ("gen_cot.txt", GenPromptVars::cot(t, "2028 U.S. presidential election", "journalists", &["CNN", "FOX News", "Reuters"])),
    ];
    for (file, vars) in gens {
        let text = prompts::render_generation(&vars).map_err(|e| e.to_string())?.text;
        ensure(text == golden(file)?, || format!("{file} differs"))?;
    }
    let mut dets = vec![
        ("detect_std_no_expl.txt".to_string(), DetectPromptVars::standard(f, false)),
        ("detect_std_with_expl.txt".to_string(), DetectPromptVars::standard(f, true)),
    ];
    for v in CotVariant::ALL {
        let tag = match v {
            CotVariant::NoPerson => "no_person",
            CotVariant::NoPlace => "no_place",
            CotVariant::NoTime => "no_time",
            CotVariant::NoEvent => "no_event",
            CotVariant::AllBinary => "all_binary",
            CotVariant::AllScale => "all_scale",
        };
        dets.push((format!("detect_cot_{tag}.txt"), DetectPromptVars::cot(f, v.ablation(), v.output_mode())));
    }
    for (file, vars) in dets {
        let text = prompts::render_detection(&vars).map_err(|e| e.to_string())?.text;
        ensure(text == golden(&file)?, || format!("{file} differs"))?;
    }
    for ablation in Ablation::REMOVALS {
        let removed = ablation.removed_element().ok_or("ablation without element")?;
        for mode in [OutputMode::Binary, OutputMode::Scale1to100] {
            let text = prompts::render_detection(&DetectPromptVars::cot(f, ablation, mode)).map_err(|e| e.to_string())?.text;
            ensure(!text.contains(removed.phrase()), || format!("{ablation:?} still mentions {removed:?}"))?;
            for e in Element::ALL.into_iter().filter(|e| *e != removed) {
                ensure(text.contains(e.phrase()), || format!("{ablation:?} lost {e:?}"))?;
            }
        }
    }
    Ok(())
}

fn parser_robustness() -> Check {
    let path = crate_dir().join("tests/fixtures/parser_corpus.json");
    let cases: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(cases.len() == 50, || format!("{} fixtures", cases.len()))?;
    let refusals = RefusalMatcher::default();
    let mut wrong = Vec::new();
    for c in &cases {
        let mode = if c["mode"] == "scale" { OutputMode::Scale1to100 } else { OutputMode::Binary };
        let raw = c["raw"].as_str().unwrap_or_default();
        let want = &c["expect"];
        let got = parsing::parse_detection(raw, mode, &refusals);
        let ok = match (want.get("error").and_then(|e| e.as_str()), &got) {
            (Some("unparseable"), Err(ParseError::Unparseable(_))) => true,
            (Some("refusal"), Err(ParseError::Refusal)) => true,
            (Some("out_of_range"), Err(ParseError::OutOfRange(v))) => want["value"].as_i64() == Some(*v),
            (None, Ok(v)) => {
                want["flagged"].as_bool() == Some(v.flagged)
                    && want["confidence"].as_u64().map(|c| c as u8) == v.confidence
                    && want["analytic"].as_bool().is_none_or(|a| a == v.analytic_text.is_some())
            }
            _ => false,
        };
        if !ok {
            wrong.push(format!("{}: {got:?}", c["id"]));
        }
    }
    ensure(wrong.is_empty(), || format!("{} mismatches: {}", wrong.len(), wrong.join("; ")))
}

fn disinfo(dir: &Path, args: &[String]) -> i32 {
    let mut argv = vec![
        "disinfo".to_string(),
        "--config".into(),
        crate_dir().join("fixtures/e2e/config.json").display().to_string(),
        "--run-dir".into(),
        dir.display().to_string(),
    ];
    argv.extend(args.iter().cloned());
    cli::run(argv)
}

fn replay_flow(dir: &Path) -> Check {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let mut ablate = s(&["ablate", "--out", "grid.jsonl"]);
    for name in ["d_gpt_std", "d_gpt_mix", "d_gpt_cot"] {
        ablate.push("--in".into());
        ablate.push(format!("{name}={}", dir.join(format!("{name}.jsonl")).display()));
    }
    let cot = dir.join("d_gpt_cot.jsonl").display().to_string();
    let steps = [
        (s(&["generate", "--kind", "standard", "--in", "fakes", "--out", "d_gpt_std.jsonl"]), EXIT_OK),
        (s(&["generate", "--kind", "mixture", "--in", "fakes", "--true-in", "trues", "--out", "d_gpt_mix.jsonl"]), EXIT_OK),
        (s(&["generate", "--kind", "cot", "--in", "trues", "--out", "d_gpt_cot.jsonl"]), EXIT_OK),
        // refused replies are logged item errors, hence a partial exit
        (ablate, EXIT_PARTIAL),
        (s(&["detect", "--detector", "cot", "--variant", "all_binary", "--model", "gpt-4", "--in", &cot, "--dataset", "d_gpt_cot", "--out", "runs.jsonl", "--format", "json"]), EXIT_OK),
        (s(&["report", "--runs", &dir.join("runs.jsonl").display().to_string(), "--group-by", "outlet", "--format", "csv"]), EXIT_OK),
    ];
    for (args, want) in steps {
        let code = disinfo(dir, &args);
        ensure(code == want, || format!("`{}` exited {code}, expected {want}", args.join(" ")))?;
    }
    Ok(())
}

fn run_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .map(|d| d.filter_map(|e| e.ok()).map(|e| e.path()).collect::<Vec<_>>())
        .unwrap_or_default()
        .into_iter()
        .filter(|p| {
            let n = p.file_name().unwrap_or_default().to_string_lossy();
            !n.ends_with(".manifest.json") && !n.ends_with(".invocation.json")
        })
        .map(|p| (p.file_name().unwrap_or_default().to_string_lossy().into_owned(), fs::read(&p).unwrap_or_default()))
        .collect();
    files.sort();
    files
}

fn end_to_end_replay() -> Check {
    let config = fs::read_to_string(crate_dir().join("fixtures/e2e/config.json")).map_err(|e| e.to_string())?;
    ensure(config.contains("\"backend\": \"replay\""), || "config is not offline".into())?;
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    replay_flow(a.path())?;
    replay_flow(b.path())?;
    let (fa, fb) = (run_files(a.path()), run_files(b.path()));
    ensure(fa.len() > 10 && fa == fb, || "runs differ between invocations".into())?;
    let report = fs::read_to_string(a.path().join("report.md")).map_err(|e| e.to_string())?;
    let golden = fs::read_to_string(crate_dir().join("tests/golden/ablation_report.md")).map_err(|e| e.to_string())?;
    ensure(report == golden, || format!("report differs from golden:\n{report}"))
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, dim: usize, offset: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    offset + z
                })
                .collect()
        })
        .collect()
}

fn tsne_numerics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = gaussian(&mut rng, 6, 5, 0.0);
    let p = embed_viz::symmetrize(&embed_viz::conditional_affinities(&x, 2.5).map_err(|e| e.to_string())?);
    let y: Vec<[f64; 2]> = (0..6).map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect();
    let g = embed_viz::gradient(&p, &y);
    let scale = g.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    let eps = 1e-5;
    let mut worst = 0.0_f64;
    for i in 0..6 {
        for c in 0..2 {
            let (mut yp, mut ym) = (y.clone(), y.clone());
            yp[i][c] += eps;
            ym[i][c] -= eps;
            let num = (embed_viz::kl_divergence(&p, &yp) - embed_viz::kl_divergence(&p, &ym)) / (2.0 * eps);
            // components far below the gradient's scale are compared against that scale
            worst = worst.max((num - g[i][c]).abs() / g[i][c].abs().max(1e-3 * scale));
        }
    }
    ensure(worst < 1e-4, || format!("gradient relative error {worst:e}"))?;

    let x = gaussian(&mut rng, 30, 8, 0.0);
    let cond = embed_viz::conditional_affinities(&x, 7.0).map_err(|e| e.to_string())?;
    for i in 0..30 {
        let h: f64 = cond.p[i * 30..(i + 1) * 30].iter().filter(|v| **v > 0.0).map(|v| -v * v.ln()).sum();
        ensure((h.exp() - 7.0).abs() < 1e-4, || format!("row {i} perplexity {}", h.exp()))?;
    }
    let p = embed_viz::symmetrize(&cond);
    ensure((p.iter().sum::<f64>() - 1.0).abs() < 1e-9, || "P does not sum to 1".into())?;
    for i in 0..30 {
        for j in 0..30 {
            ensure((p[i * 30 + j] - p[j * 30 + i]).abs() < 1e-12, || format!("P not symmetric at {i},{j}"))?;
        }
    }

    let mut rows = gaussian(&mut rng, 20, 10, 0.0);
    rows.extend(gaussian(&mut rng, 20, 10, 6.0));
    let labels = [vec![CorpusTag::Human; 20], vec![CorpusTag::Generated; 20]].concat();
    let m = EmbeddingMatrix::new(rows, labels, "blobs").map_err(|e| e.to_string())?;
    let proj = embed_viz::tsne_fit(&m, &TsneParams { perplexity: 10.0, ..TsneParams::default() }).map_err(|e| e.to_string())?;
    let agreement = embed_viz::nearest_neighbor_agreement(&proj.points, &proj.labels);
    ensure(agreement > 0.9, || format!("nearest-neighbour agreement {agreement}"))
}

fn profile(pairs: &[(&str, f64)]) -> CategoryProfile {
    CategoryProfile {
        proportions: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        matches: pairs.iter().map(|(k, _)| (k.to_string(), 0)).collect(),
        token_count: 1000,
    }
}

fn textstats_oracle() -> Check {
    const VOCAB: [&str; 10] = ["help", "helpful", "care", "damn", "hell", "hello", "think", "fact", "factual", "the"];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..100 {
        let cats: Vec<Vec<String>> = (0..rng.gen_range(1..4))
            .map(|_| {
                (0..rng.gen_range(1..4))
                    .map(|_| {
                        let w = VOCAB[rng.gen_range(0..VOCAB.len())];
                        if rng.gen_bool(0.5) { format!("{}*", &w[..rng.gen_range(2..=w.len())]) } else { w.into() }
                    })
                    .collect()
            })
            .collect();
        let spec: String = cats.iter().enumerate().map(|(i, c)| format!("C{i}: {}\n", c.join(", "))).collect();
        let lex = Lexicon::parse(&spec).map_err(|e| e.to_string())?;
        let words: Vec<String> = (0..rng.gen_range(1..40))
            .map(|_| {
                let w = VOCAB[rng.gen_range(0..VOCAB.len())];
                if rng.gen_bool(0.3) { w.to_uppercase() } else { w.to_string() }
            })
            .collect();
        let text = words.join(", ");
        let got = textstats::profile_text(&text, &lex).map_err(|e| e.to_string())?;
        for (i, pats) in cats.iter().enumerate() {
            let hits = words
                .iter()
                .filter(|w| {
                    let w = w.to_lowercase();
                    pats.iter().any(|p| match p.strip_suffix('*') {
                        Some(stem) => w.starts_with(stem),
                        None => w == *p,
                    })
                })
                .count();
            let name = format!("C{i}");
            ensure(got.matches[&name] == hits && got.token_count == words.len(), || {
                format!("case {case} {name}: {} vs {hits}", got.matches[&name])
            })?;
        }
    }
    let h = profile(&[("Prosocial", 0.027), ("Same", 0.05), ("Zero", 0.0), ("Appears", 0.0)]);
    let g = profile(&[("Prosocial", 0.039), ("Same", 0.05), ("Zero", 0.0), ("Appears", 0.01)]);
    let ch = textstats::percent_change(&h, &g);
    match ch["Prosocial"] {
        Change::Percent(v) => ensure((v - 44.4).abs() <= 0.1, || format!("ratio check gave {v}"))?,
        Change::Undefined => return Err("ratio check undefined".into()),
    }
    ensure(ch["Same"] == Change::Percent(0.0), || "equal proportions must give 0".into())?;
    ensure(ch["Zero"] == Change::Percent(0.0), || "0 → 0 must give 0".into())?;
    ensure(ch["Appears"] == Change::Undefined, || "0 → positive must be Undefined".into())
}

fn article_strategy() -> impl Strategy<Value = NewsArticle> {
    (any::<u32>(), proptest::option::of("[ -~]{0,30}"), "[ -~\n\u{e9}\u{1f600}]{0,120}[a-z]", any::<bool>()).prop_map(
        |(n, headline, content, fake)| NewsArticle {
            id: format!("id-{n}"),
            headline,
            content,
            label: if fake { Label::Fake } else { Label::True },
            topic: if fake { Topic::Politics } else { Topic::WorldNews },
            source_dataset: SourceDataset::Human,
        },
    )
}

fn corpus_roundtrip() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("human.jsonl");
    let mut runner = TestRunner::new(Config { cases: 4, failure_persistence: None, ..Config::default() });
    runner
        .run(&proptest::collection::vec(article_strategy(), 1000..1200), |records| {
            corpus::write_jsonl(&records, &path).unwrap();
            let back: Vec<NewsArticle> = corpus::read_jsonl(&path).unwrap();
            prop_assert_eq!(back, records);
            Ok(())
        })
        .map_err(|e| format!("round-trip: {e}"))?;
    let mut runner = TestRunner::new(Config { cases: 256, failure_persistence: None, ..Config::default() });
    runner
        .run(&("[a-z \n\t]{0,400}", 0usize..800), |(s, extra)| {
            let long = format!("{s} {}", "word ".repeat(extra));
            let t = corpus::truncate_words(&long, 500);
            prop_assert!(corpus::word_count(&t) <= 500);
            prop_assert!(long.starts_with(&t));
            prop_assert_eq!(corpus::truncate_words(&t, 500), t);
            Ok(())
        })
        .map_err(|e| format!("truncation: {e}"))
}

#[test]
fn acceptance() {
    let checks: [(&str, fn() -> Check, Option<Duration>); 7] = [
        ("metric arithmetic", metric_arithmetic, Some(Duration::from_secs(1))),
        ("prompt fidelity", prompt_fidelity, None),
        ("parser robustness", parser_robustness, None),
        ("end-to-end replay", end_to_end_replay, Some(Duration::from_secs(10))),
        ("t-SNE numerics", tsne_numerics, Some(Duration::from_secs(30))),
        ("textstats oracle", textstats_oracle, None),
        ("corpus round-trip and truncation", corpus_roundtrip, None),
    ];
    let mut failed = Vec::new();
    for (name, check, budget) in checks {
        let started = Instant::now();
        let outcome = check();
        let elapsed = started.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(()), Some(b)) if elapsed > b => Err(format!("took {elapsed:.2?}, budget {b:?}")),
            (o, _) => o,
        };
        match &outcome {
            Ok(()) => println!("[PASS] {name} ({elapsed:.2?})"),
            Err(e) => {
                println!("[FAIL] {name} ({elapsed:.2?}): {e}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
