//! Replays the shipped generate → ablate → report flow offline.
//!
//!     cargo run --example replay_pipeline
//!
//! Every chat reply comes from `fixtures/replay`; nothing touches the network.
//! The ablation exits with code 2 because a few stored replies are refusals.

use disinfo_bench::cli;

fn main() -> anyhow::Result<()> {
    // the shipped config uses paths relative to the crate
    std::env::set_current_dir(env!("CARGO_MANIFEST_DIR"))?;
    let run_dir = tempfile::tempdir()?;
    let dir = run_dir.path();
    let run = |args: &[&str]| {
        let mut argv = vec!["disinfo", "--config", "fixtures/e2e/config.json", "--run-dir"];
        let d = dir.display().to_string();
        argv.push(&d);
        argv.extend_from_slice(args);
        let code = cli::run(argv.iter().map(|s| s.to_string()));
        println!("exit {code}: {}", args.join(" "));
    };

    run(&["generate", "--kind", "standard", "--in", "fakes", "--out", "d_gpt_std.jsonl"]);
    run(&["generate", "--kind", "mixture", "--in", "fakes", "--true-in", "trues", "--out", "d_gpt_mix.jsonl"]);
    run(&["generate", "--kind", "cot", "--in", "trues", "--out", "d_gpt_cot.jsonl"]);
    let inputs: Vec<String> = ["d_gpt_std", "d_gpt_mix", "d_gpt_cot"]
        .iter()
        .map(|n| format!("{n}={}", dir.join(format!("{n}.jsonl")).display()))
        .collect();
    let mut ablate = vec!["ablate"];
    for i in &inputs {
        ablate.extend(["--in", i.as_str()]);
    }
    ablate.extend(["--out", "grid.jsonl"]);
    run(&ablate);
    let grid = dir.join("grid.jsonl").display().to_string();
    run(&["report", "--grid", &grid, "--format", "markdown"]);

    println!("\n{}", std::fs::read_to_string(dir.join("report.md"))?);
    Ok(())
}
