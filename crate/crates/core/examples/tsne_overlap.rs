//! Embed two small corpora, project them with t-SNE and measure how much the
//! two clouds mix.
//!
//!     cargo run --example tsne_overlap

use disinfo_bench::embed_viz::{self, TsneParams};

fn main() -> anyhow::Result<()> {
    let human: Vec<String> = (0..12)
        .map(|i| format!("The county board met on day {i} and approved road repairs, school funding and a park budget."))
        .collect();
    let generated: Vec<String> = (0..12)
        .map(|i| format!("BREAKING {i}: insiders reveal a secret plot, officials panic as the shocking cover-up spreads online!"))
        .collect();

    // no gateway: the offline hashed bag-of-words embedding
    let x = embed_viz::embed_corpora(None, &human, &generated)?;
    let params = TsneParams { perplexity: 5.0, iterations: 500, seed: 7, ..TsneParams::default() };
    let proj = embed_viz::tsne_fit(&x, &params)?;
    println!("{} points from {}", proj.points.len(), proj.provider);
    for (it, kl) in proj.kl_iterations.iter().zip(&proj.kl_history).step_by(2) {
        println!("  iter {it:>4}  KL {kl:.4}");
    }
    println!("overlap@5: {:.3}", embed_viz::overlap_fraction(&proj, 5)?);
    println!("1-NN agreement: {:.3}", embed_viz::nearest_neighbor_agreement(&proj.points, &proj.labels));

    let dir = tempfile::tempdir()?;
    let (csv, svg) = (dir.path().join("proj.csv"), dir.path().join("proj.svg"));
    embed_viz::write_projection(&proj, &csv, &svg, "human vs generated")?;
    println!("wrote {} and {}", csv.display(), svg.display());
    Ok(())
}
