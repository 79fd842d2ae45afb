use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

use super::linking::fold;

pub const TRIPLES_FILE: &str = "triples.tsv";
pub const ENTITY_EMBEDDINGS_FILE: &str = "entity_embeddings.txt";
pub const RELATION_EMBEDDINGS_FILE: &str = "relation_embeddings.txt";

/// A triple of vocabulary indices.
pub type TripleIdx = (u32, u32, u32);

#[derive(Debug, Clone)]
struct Vocab {
    names: Vec<String>,
    index: HashMap<String, u32>,
    embeddings: Vec<f64>,
}

impl Vocab {
    fn build(kind: &'static str, rows: Vec<(String, Vec<f64>)>, dim: usize) -> Result<Self> {
        let mut names = Vec::with_capacity(rows.len());
        let mut index = HashMap::with_capacity(rows.len());
        let mut embeddings = Vec::with_capacity(rows.len() * dim);
        for (name, vector) in rows {
            if vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    message: format!("{kind} {name:?} has {} components, expected {dim}", vector.len()),
                });
            }
            if let Some(bad) = vector.iter().find(|v| !v.is_finite()) {
                return Err(Error::Config(format!("{kind} {name:?} has non-finite component {bad}")));
            }
            let idx = u32::try_from(names.len()).map_err(|_| Error::Config(format!("too many {kind}s")))?;
            if index.insert(name.clone(), idx).is_some() {
                return Err(Error::DuplicateId { kind, id: name });
            }
            names.push(name);
            embeddings.extend(vector);
        }
        Ok(Vocab {
            names,
            index,
            embeddings,
        })
    }
}

/// Entity and relation vocabularies with TransE embeddings and a closed set of
/// known triples. Immutable once built.
#[derive(Debug, Clone)]
pub struct KgStore {
    entities: Vocab,
    relations: Vocab,
    folded_entities: Vec<String>,
    triples: BTreeSet<TripleIdx>,
    dim: usize,
}

impl KgStore {
    /// Builds a store from named embedding rows and name triples.
    pub fn new(
        entities: Vec<(String, Vec<f64>)>,
        relations: Vec<(String, Vec<f64>)>,
        triples: &[(String, String, String)],
    ) -> Result<Self> {
        let dim = entities
            .first()
            .or(relations.first())
            .map(|(_, v)| v.len())
            .ok_or(Error::EmptyInput("knowledge graph vocabulary"))?;
        let entities = Vocab::build("entity", entities, dim)?;
        let relations = Vocab::build("relation", relations, dim)?;
        let folded_entities = entities.names.iter().map(|n| fold(n)).collect();
        let mut store = KgStore {
            entities,
            relations,
            folded_entities,
            triples: BTreeSet::new(),
            dim,
        };
        for (h, r, t) in triples {
            let missing = |kind, name: &String| Error::UnknownVocab {
                path: "<memory>".into(),
                line: 0,
                kind,
                name: name.clone(),
            };
            let h = store.entity_index(h).ok_or_else(|| missing("entity", h))?;
            let r = store.relation_index(r).ok_or_else(|| missing("relation", r))?;
            let t = store.entity_index(t).ok_or_else(|| missing("entity", t))?;
            store.triples.insert((h, r, t));
        }
        Ok(store)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entity_index(&self, name: &str) -> Option<u32> {
        self.entities.index.get(name).copied()
    }

    pub fn relation_index(&self, name: &str) -> Option<u32> {
        self.relations.index.get(name).copied()
    }

    pub fn entity_name(&self, idx: u32) -> &str {
        &self.entities.names[idx as usize]
    }

    pub fn relation_name(&self, idx: u32) -> &str {
        &self.relations.names[idx as usize]
    }

    pub fn entity_count(&self) -> usize {
        self.entities.names.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.names.len()
    }

    /// Entity indices with their case-folded, punctuation-free names.
    pub(crate) fn folded_entities(&self) -> impl Iterator<Item = (u32, &str)> {
        self.folded_entities
            .iter()
            .enumerate()
            .map(|(i, n)| (i as u32, n.as_str()))
    }

    pub fn entity_embedding(&self, idx: u32) -> &[f64] {
        let start = idx as usize * self.dim;
        &self.entities.embeddings[start..start + self.dim]
    }

    pub fn relation_embedding(&self, idx: u32) -> &[f64] {
        let start = idx as usize * self.dim;
        &self.relations.embeddings[start..start + self.dim]
    }

    pub fn contains_triple(&self, triple: TripleIdx) -> bool {
        self.triples.contains(&triple)
    }

    pub fn triples(&self) -> &BTreeSet<TripleIdx> {
        &self.triples
    }
}

/// Named embedding rows in file order.
pub type EmbeddingRows = Vec<(String, Vec<f64>)>;

/// Reads an embedding file: a `N dim` header, then `N` rows of a name followed
/// by `dim` decimals. Names may contain spaces; the last `dim` fields of a row
/// are the vector.
pub fn load_embeddings(path: &Path) -> Result<(usize, EmbeddingRows)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let (count, dim) = loop {
        let Some((idx, line)) = lines.next() else {
            return Err(Error::schema(path, 1, "missing \"N dim\" header"));
        };
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parsed = match fields.as_slice() {
            [n, d] => n.parse::<usize>().ok().zip(d.parse::<usize>().ok()),
            _ => None,
        };
        match parsed {
            Some((n, d)) if d > 0 => break (n, d),
            _ => return Err(Error::schema(path, idx + 1, format!("bad header {line:?}"))),
        }
    };

    let mut rows = Vec::with_capacity(count);
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < dim + 1 {
            return Err(Error::DimensionMismatch {
                message: format!(
                    "{}:{line_no}: row has {} values, header declares {dim}",
                    path.display(),
                    fields.len().saturating_sub(1)
                ),
            });
        }
        let split = fields.len() - dim;
        let name = fields[..split].join(" ");
        let vector = fields[split..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::schema(path, line_no, format!("bad value {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((name, vector));
    }
    if rows.len() != count {
        return Err(Error::schema(
            path,
            1,
            format!("header declares {count} rows, file has {}", rows.len()),
        ));
    }
    Ok((dim, rows))
}

/// Loads a store from a tab-separated triples file and two embedding files.
pub fn load_kg(triples_path: &Path, entity_emb_path: &Path, relation_emb_path: &Path) -> Result<KgStore> {
    let (entity_dim, entities) = load_embeddings(entity_emb_path)?;
    let (relation_dim, relations) = load_embeddings(relation_emb_path)?;
    if entity_dim != relation_dim {
        return Err(Error::DimensionMismatch {
            message: format!("entity dim {entity_dim} vs relation dim {relation_dim}"),
        });
    }
    let mut store = KgStore::new(entities, relations, &[])?;

    let file = File::open(triples_path).map_err(|e| Error::io(triples_path, e))?;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(triples_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [h, r, t] = fields.as_slice() else {
            return Err(Error::schema(
                triples_path,
                line_no,
                format!("expected 3 tab-separated fields, got {}", fields.len()),
            ));
        };
        let unknown = |kind, name: &str| Error::UnknownVocab {
            path: triples_path.to_path_buf(),
            line: line_no,
            kind,
            name: name.to_string(),
        };
        let h = store.entity_index(h).ok_or_else(|| unknown("entity", h))?;
        let r = store.relation_index(r).ok_or_else(|| unknown("relation", r))?;
        let t = store.entity_index(t).ok_or_else(|| unknown("entity", t))?;
        store.triples.insert((h, r, t));
    }
    Ok(store)
}

/// Loads `triples.tsv`, `entity_embeddings.txt` and `relation_embeddings.txt`
/// from a directory.
pub fn load_kg_dir(dir: &Path) -> Result<KgStore> {
    load_kg(
        &dir.join(TRIPLES_FILE),
        &dir.join(ENTITY_EMBEDDINGS_FILE),
        &dir.join(RELATION_EMBEDDINGS_FILE),
    )
}
