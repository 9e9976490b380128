//! The small-model detector through the sidecar HTTP client.
//!
//!     cargo run --example sidecar_detect              # in-process stub
//!     cargo run --example sidecar_detect -- http://127.0.0.1:8808
//!
//! Without a URL a tiny stand-in service is started that answers like the real
//! classifier does in stub mode.

use disinfo_bench::corpus::{self, NewsArticle};
use disinfo_bench::evaluation::{self, DenominatorPolicy};
use disinfo_bench::parsing::RefusalMatcher;
use disinfo_bench::pipelines::{self, DetectionItem, DetectorSpec, PipelineContext};
use disinfo_bench::sidecar::{self, SidecarClient};
use serde_json::json;
use tiny_http::{Method, Response, Server};

fn stub_service() -> String {
    let server = Server::http("127.0.0.1:0").expect("bind");
    let url = format!("http://{}", server.server_addr().to_ip().expect("ip addr"));
    std::thread::spawn(move || {
        for mut req in server.incoming_requests() {
            let body = match (req.method(), req.url()) {
                (Method::Get, "/health") => json!({"status": "ok", "mode": "stub", "model_name": "stub"}),
                (Method::Post, "/classify") => {
                    let mut raw = String::new();
                    let _ = req.as_reader().read_to_string(&mut raw);
                    let v: serde_json::Value = serde_json::from_str(&raw).unwrap_or_default();
                    let label = sidecar::stub_label(v["text"].as_str().unwrap_or(""));
                    json!({"label": label, "score": 0.5, "truncated": false})
                }
                _ => json!({}),
            };
            let _ = req.respond(Response::from_string(body.to_string()));
        }
    });
    url
}

fn main() -> anyhow::Result<()> {
    let url = std::env::args().nth(1).unwrap_or_else(stub_service);
    let client = SidecarClient::new(url);
    let health = client.health()?;
    println!("sidecar {} ({} mode, {})", client.base_url(), health.mode, health.model_name);

    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/e2e/fakes.jsonl");
    let fakes: Vec<NewsArticle> = corpus::read_jsonl(path.as_ref())?;
    let items: Vec<DetectionItem> = fakes.iter().map(DetectionItem::from).collect();
    let ctx = PipelineContext {
        gateway: None,
        sidecar: Some(&client),
        refusals: RefusalMatcher::default(),
    };
    let run = pipelines::detect_batch(&ctx, &items, &DetectorSpec::sidecar(), "fakes")?;
    for r in &run.records {
        println!("  {} -> {:?}", r.article_id, r.predicted);
    }
    let report = evaluation::misclassification_rate(&run.records, DenominatorPolicy::ParsedOnly)?;
    println!(
        "misclassified {}/{} = {}%",
        report.misclassified,
        report.denominator,
        evaluation::percent_half_up(report.misclassified, report.denominator.max(1), 2)
    );
    Ok(())
}
