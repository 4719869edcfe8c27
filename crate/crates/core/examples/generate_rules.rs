//! Regenerates the archives under `rules/` with the default search settings.
//!
//! `cargo run --release --example generate_rules [out_dir]`

use simplex_sbp::archive::write_rule;
use simplex_sbp::search::{find_rule, FindOptions};
use simplex_sbp::shipped::{file_name, SHIPPED};

fn main() {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/rules").to_string());
    std::fs::create_dir_all(&out).expect("create output directory");
    for &(domain, facet, qv) in SHIPPED {
        let t = std::time::Instant::now();
        let found = find_rule::<f64>(domain, qv, facet, &FindOptions::default()).expect("search succeeds");
        let path = format!("{out}/{}", file_name(domain, facet, qv));
        std::fs::write(&path, write_rule(&found.rule).expect("serializable")).expect("write archive");
        println!("{path}: n_p = {} ({:.1?})", found.rule.n_p(), t.elapsed());
    }
}
