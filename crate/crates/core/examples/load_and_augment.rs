//! Loads tab-separated triples, adds reciprocal relations and builds the
//! filter index and tail-frequency weights.
//!
//! ```sh
//! cargo run --example load_and_augment
//! ```

use std::fs;

use kge::prelude::*;

fn main() -> kge::Result<()> {
    let dir = std::env::temp_dir().join("kge-load-example");
    fs::create_dir_all(&dir).map_err(|e| kge::KgeError::Io { path: dir.clone(), source: e })?;
    let files = [
        ("train.tsv", "alice\tknows\tbob\nbob\tknows\tcarol\ncarol\tworks_at\tacme\nalice\tworks_at\tacme\nbob\tworks_at\tacme\n"),
        ("valid.tsv", "carol\tknows\tbob\n"),
        ("test.tsv", "carol\tknows\talice\n"),
    ];
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| kge::KgeError::Io { path, source: e })?;
    }

    let mut vocab = Vocab::new();
    let train = load_triples(dir.join("train.tsv"), Split::Train, &mut vocab)?;
    let valid = load_triples(dir.join("valid.tsv"), Split::Valid, &mut vocab)?;
    println!(
        "{} entities, {} relations, {} train triples",
        vocab.n_entities(),
        vocab.n_relations_original(),
        train.len()
    );

    let train_aug = add_reciprocals(&train, &mut vocab)?;
    let valid_aug = add_reciprocals(&valid, &mut vocab)?;
    for t in train_aug.iter() {
        println!(
            "  {} --{}--> {}",
            vocab.entity_name(t.head).unwrap(),
            vocab.relation_name(t.relation).unwrap(),
            vocab.entity_name(t.tail).unwrap()
        );
    }

    let filter = build_filter_index([&train_aug, &valid_aug]);
    println!("filter index holds {} (head, relation) keys", filter.len());

    let weights = tail_frequency_weights(&train_aug, 0.5, vocab.n_entities())?;
    for (id, name) in vocab.entity_names().iter().enumerate() {
        println!("  w({name}) = {:.3}", weights.get(id));
    }

    // a name unseen in train is rejected outside the train split
    fs::write(dir.join("bad.tsv"), "dave\tknows\talice\n").ok();
    let err = load_triples(dir.join("bad.tsv"), Split::Test, &mut vocab).unwrap_err();
    println!("unseen entity in test: {err}");
    Ok(())
}
