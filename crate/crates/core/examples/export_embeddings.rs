//! Saves a model, reloads it and exports entity embeddings as TSV and as
//! the packed f32 binary format.
//!
//! ```sh
//! cargo run --example export_embeddings
//! ```

use kge::io::{
    decode_embeddings_binary, encode_embeddings_binary, entity_export_matrix, load_model,
    save_model, write_embeddings_tsv, SavedModel,
};
use kge::prelude::*;

fn main() -> kge::Result<()> {
    let vocab = Vocab::from_names(
        vec!["paris".into(), "france".into(), "rome".into(), "italy".into()],
        vec!["capital_of".into()],
        true,
    )?;
    let params = ModelParams::random(ModelKind::ComplEx, 4, 2, 6, 0.1, 9)?;
    let path = std::env::temp_dir().join("kge-export-example.kgm");
    save_model(&path, &SavedModel { params, vocab })?;

    let saved = load_model(&path)?;
    println!("reloaded {} model, dim {}", saved.params.kind, saved.params.dim);
    let matrix = entity_export_matrix(&saved.params);

    let mut tsv = Vec::new();
    write_embeddings_tsv(&mut tsv, saved.vocab.entity_names(), &matrix)?;
    print!("{}", String::from_utf8_lossy(&tsv));

    let bytes = encode_embeddings_binary(&matrix)?;
    let back = decode_embeddings_binary(&bytes)?;
    println!("binary export: {} bytes, {:?} matrix", bytes.len(), back.dim());
    Ok(())
}
