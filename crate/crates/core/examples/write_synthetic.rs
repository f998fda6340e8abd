//! Writes a synthetic low-rank knowledge graph as `train.tsv`, `valid.tsv`
//! and `test.tsv`, ready for the `kge` binary.
//!
//! ```sh
//! cargo run --example write_synthetic -- data/synthetic [n_entities] [seed]
//! ```

use std::path::PathBuf;

use kge::synthetic::{generate, SyntheticConfig};

fn main() -> kge::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/synthetic".into()));
    let n_entities = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    std::fs::create_dir_all(&dir).map_err(|e| kge::KgeError::Io { path: dir.clone(), source: e })?;

    let kg = generate(&SyntheticConfig {
        n_entities,
        seed,
        ..SyntheticConfig::default()
    })?;
    kg.write_tsv(&dir)?;
    println!(
        "wrote {} / {} / {} triples to {}",
        kg.train.len(),
        kg.valid.len(),
        kg.test.len(),
        dir.display()
    );
    Ok(())
}
