//! Triple ingestion, vocabularies, reciprocal augmentation, the filtered
//! ranking index and tail-frequency loss weights.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use log::warn;

use crate::error::{KgeError, Result};

/// Which part of a dataset a [`TripleStore`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

/// One integer-encoded fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triple {
    pub fn new(head: usize, relation: usize, tail: usize) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }
}

/// Bidirectional name/index maps for entities and original relations.
///
/// Reciprocal relations are not named; relation `r + n_relations_original()`
/// is the inverse of relation `r`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocab {
    entity_names: Vec<String>,
    relation_names: Vec<String>,
    entity_index: HashMap<String, usize>,
    relation_index: HashMap<String, usize>,
    augmented: bool,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a vocabulary from ordered name lists (e.g. read back from a
    /// model file). Fails on duplicate names.
    pub fn from_names(
        entities: Vec<String>,
        relations: Vec<String>,
        augmented: bool,
    ) -> Result<Self> {
        let mut vocab = Vocab::new();
        for name in entities {
            if vocab.entity_index.contains_key(&name) {
                return Err(KgeError::State(format!("duplicate entity name `{name}`")));
            }
            vocab.intern_entity(&name);
        }
        for name in relations {
            if vocab.relation_index.contains_key(&name) {
                return Err(KgeError::State(format!("duplicate relation name `{name}`")));
            }
            vocab.intern_relation(&name);
        }
        vocab.augmented = augmented;
        Ok(vocab)
    }

    pub fn n_entities(&self) -> usize {
        self.entity_names.len()
    }

    pub fn n_relations_original(&self) -> usize {
        self.relation_names.len()
    }

    /// Relation count seen by the models: doubled once reciprocals are added.
    pub fn n_relations_total(&self) -> usize {
        if self.augmented {
            2 * self.relation_names.len()
        } else {
            self.relation_names.len()
        }
    }

    pub fn is_augmented(&self) -> bool {
        self.augmented
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entity_names
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relation_names
    }

    pub fn entity_id(&self, name: &str) -> Option<usize> {
        self.entity_index.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<usize> {
        self.relation_index.get(name).copied()
    }

    pub fn entity_name(&self, id: usize) -> Option<&str> {
        self.entity_names.get(id).map(String::as_str)
    }

    /// Name of a relation index; reciprocal indices get a `_reverse` suffix.
    pub fn relation_name(&self, id: usize) -> Option<String> {
        let n = self.relation_names.len();
        if id < n {
            Some(self.relation_names[id].clone())
        } else if self.augmented && id < 2 * n {
            Some(format!("{}_reverse", self.relation_names[id - n]))
        } else {
            None
        }
    }

    fn intern_entity(&mut self, name: &str) -> usize {
        if let Some(&id) = self.entity_index.get(name) {
            return id;
        }
        let id = self.entity_names.len();
        self.entity_names.push(name.to_owned());
        self.entity_index.insert(name.to_owned(), id);
        id
    }

    fn intern_relation(&mut self, name: &str) -> usize {
        if let Some(&id) = self.relation_index.get(name) {
            return id;
        }
        let id = self.relation_names.len();
        self.relation_names.push(name.to_owned());
        self.relation_index.insert(name.to_owned(), id);
        id
    }

    /// Writes `index<TAB>name` lines for entities and relations.
    pub fn write_tsv<W: Write>(&self, entities: &mut W, relations: &mut W) -> std::io::Result<()> {
        for (i, name) in self.entity_names.iter().enumerate() {
            writeln!(entities, "{i}\t{name}")?;
        }
        for (i, name) in self.relation_names.iter().enumerate() {
            writeln!(relations, "{i}\t{name}")?;
        }
        Ok(())
    }
}

/// Integer-encoded triples of one split.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleStore {
    pub triples: Vec<Triple>,
    pub split: Split,
    augmented: bool,
}

impl TripleStore {
    pub fn new(split: Split, triples: Vec<Triple>) -> Self {
        TripleStore {
            triples,
            split,
            augmented: false,
        }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn is_augmented(&self) -> bool {
        self.augmented
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }
}

/// Parses a tab-separated triple file.
///
/// Unseen names extend `vocab` only for the train split; in valid/test they
/// are an error. Duplicate lines are dropped with a warning.
pub fn load_triples(path: impl AsRef<Path>, split: Split, vocab: &mut Vocab) -> Result<TripleStore> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| KgeError::io(path, e))?;
    parse_triples(&text, path, split, split == Split::Train, vocab)
}

/// Like [`load_triples`] but never extends the vocabulary, whatever the split.
pub fn load_triples_fixed(path: impl AsRef<Path>, split: Split, vocab: &mut Vocab) -> Result<TripleStore> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| KgeError::io(path, e))?;
    parse_triples(&text, path, split, false, vocab)
}

pub(crate) fn parse_triples(
    text: &str,
    path: &Path,
    split: Split,
    extend: bool,
    vocab: &mut Vocab,
) -> Result<TripleStore> {
    let mut seen = HashSet::new();
    let mut triples = Vec::new();
    let mut duplicates = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(KgeError::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                found: fields.len(),
            });
        }
        let (h, r, t) = (fields[0].trim(), fields[1].trim(), fields[2].trim());
        let triple = if extend {
            Triple::new(
                vocab.intern_entity(h),
                vocab.intern_relation(r),
                vocab.intern_entity(t),
            )
        } else {
            let lookup_entity = |name: &str| {
                vocab.entity_id(name).ok_or_else(|| KgeError::UnknownToken {
                    kind: "entity",
                    token: name.to_owned(),
                    split: split.to_string(),
                })
            };
            let relation = vocab.relation_id(r).ok_or_else(|| KgeError::UnknownToken {
                kind: "relation",
                token: r.to_owned(),
                split: split.to_string(),
            })?;
            Triple::new(lookup_entity(h)?, relation, lookup_entity(t)?)
        };
        if seen.insert(triple) {
            triples.push(triple);
        } else {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        warn!(
            "{}: dropped {duplicates} duplicate triple(s) from {split} split",
            path.display()
        );
    }
    Ok(TripleStore::new(split, triples))
}

/// Appends `(t, r + n_original, h)` for every `(h, r, t)` and marks the
/// vocabulary as augmented.
pub fn add_reciprocals(store: &TripleStore, vocab: &mut Vocab) -> Result<TripleStore> {
    let n_rel = vocab.n_relations_original();
    if store.augmented {
        return Err(KgeError::State(format!(
            "{} split already has reciprocal triples",
            store.split
        )));
    }
    if let Some(bad) = store.triples.iter().find(|t| t.relation >= n_rel) {
        return Err(KgeError::State(format!(
            "relation index {} >= {n_rel} original relations; store looks augmented already",
            bad.relation
        )));
    }
    let mut triples = Vec::with_capacity(2 * store.len());
    triples.extend_from_slice(&store.triples);
    triples.extend(
        store
            .triples
            .iter()
            .map(|t| Triple::new(t.tail, t.relation + n_rel, t.head)),
    );
    vocab.augmented = true;
    Ok(TripleStore {
        triples,
        split: store.split,
        augmented: true,
    })
}

/// Known-true tails per `(head, relation)` over every split.
#[derive(Debug, Clone, Default)]
pub struct FilterIndex {
    known: HashMap<(usize, usize), BTreeSet<usize>>,
}

impl FilterIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, triple: Triple) {
        self.known
            .entry((triple.head, triple.relation))
            .or_default()
            .insert(triple.tail);
    }

    pub fn tails(&self, head: usize, relation: usize) -> Option<&BTreeSet<usize>> {
        self.known.get(&(head, relation))
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.tails(triple.head, triple.relation)
            .is_some_and(|s| s.contains(&triple.tail))
    }

    /// Number of distinct `(head, relation)` keys.
    pub fn len(&self) -> usize {
        self.known.len()
    }

    pub fn is_empty(&self) -> bool {
        self.known.is_empty()
    }
}

pub fn build_filter_index<'a>(stores: impl IntoIterator<Item = &'a TripleStore>) -> FilterIndex {
    let mut index = FilterIndex::new();
    for store in stores {
        for &t in &store.triples {
            index.insert(t);
        }
    }
    index
}

/// Per-entity multipliers for the cross-entropy loss.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    pub weights: Vec<f64>,
    pub w0: f64,
}

impl WeightTable {
    /// All-ones table (equivalent to `w0 = 0`).
    pub fn uniform(n_entities: usize) -> Self {
        WeightTable {
            weights: vec![1.0; n_entities],
            w0: 0.0,
        }
    }

    pub fn get(&self, entity: usize) -> f64 {
        self.weights[entity]
    }
}

/// `w(t) = w0 * count(t) / max_count + (1 - w0)`, counting tail occurrences
/// in `train` (pass the reciprocal-augmented split).
pub fn tail_frequency_weights(train: &TripleStore, w0: f64, n_entities: usize) -> Result<WeightTable> {
    if !(0.0..=1.0).contains(&w0) {
        return Err(KgeError::Config(format!("w0 must lie in [0, 1], got {w0}")));
    }
    if train.is_empty() {
        return Err(KgeError::Empty("train split has no triples".into()));
    }
    let mut counts = vec![0usize; n_entities];
    for t in &train.triples {
        counts[t.tail] += 1;
    }
    let max = *counts.iter().max().unwrap_or(&0) as f64;
    let weights = counts
        .iter()
        .map(|&c| w0 * (c as f64 / max) + (1.0 - w0))
        .collect();
    Ok(WeightTable { weights, w0 })
}
