//! Regenerates `tests/fixtures/s_bend_oracle.json`, the frozen arc-chain
//! ground truth for the planar S-bend:
//!
//! ```text
//! cargo run -p elastica-core --example s_bend_oracle > crates/core/tests/fixtures/s_bend_oracle.json
//! ```

use elastica_core::verifier::{arc_chain_oracle, PlanarBoundary};
use serde_json::json;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bc = PlanarBoundary {
        x1: [0.0, 0.0],
        v1: [1.0, 0.0],
        x2: [2.0, 1.0],
        v2: [1.0, 0.0],
        length: 2.6,
    };
    let max_pieces = 3;
    let solution = arc_chain_oracle(&bc, max_pieces)?;
    let fixture = json!({
        "generator": "cargo run -p elastica-core --example s_bend_oracle",
        "bc": bc,
        "max_pieces": max_pieces,
        "solution": solution,
    });
    println!("{}", serde_json::to_string_pretty(&fixture)?);
    Ok(())
}
