//! Corpus ingestion: JSON-lines records, folder trees, gazetteer-based concept
//! extraction and Entity Annotation Table (EAT) import/export.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{ConceptId, EntityId};

/// Longest phrase (in normalised tokens) the gazetteer matcher will consider.
pub const MAX_PHRASE_TOKENS: usize = 6;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record on line {line}: {detail}")]
    MalformedRecord { line: usize, detail: String },
    #[error("duplicate entity id {0:?}")]
    DuplicateId(String),
    #[error("malformed row on line {line}: {detail}")]
    MalformedRow { line: usize, detail: String },
    #[error("duplicate concept id {0:?}")]
    DuplicateConceptId(String),
    #[error("non-positive count on line {line}")]
    NonPositiveCount { line: usize },
}

impl IngestError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// One corpus document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub id: EntityId,
    #[serde(default)]
    pub title: String,
    #[serde(default, rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub year: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub venue: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doi: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    /// Slash-delimited topic paths, normalised (no empty segments).
    #[serde(default, rename = "folders")]
    pub folder_paths: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub concepts: BTreeSet<ConceptId>,
}

impl EntityRecord {
    pub fn new(id: impl Into<String>) -> Self {
        EntityRecord {
            id: id.into(),
            title: String::new(),
            abstract_text: String::new(),
            authors: Vec::new(),
            year: 0,
            venue: None,
            doi: None,
            url: None,
            folder_paths: Vec::new(),
            concepts: BTreeSet::new(),
        }
    }

    /// Text that concept extraction runs over.
    pub fn annotation_text(&self) -> String {
        format!("{} {}", self.title, self.abstract_text)
    }
}

/// Trim segments and drop empty ones; `None` when nothing is left.
pub fn normalise_folder_path(path: &str) -> Option<String> {
    let segments: Vec<&str> = path
        .split('/')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if segments.is_empty() {
        None
    } else {
        Some(segments.join("/"))
    }
}

fn normalise_folders(paths: &[String]) -> Vec<String> {
    let mut seen = HashSet::new();
    paths
        .iter()
        .filter_map(|p| normalise_folder_path(p))
        .filter(|p| seen.insert(p.clone()))
        .collect()
}

/// Parse a JSON-lines corpus. Blank lines are skipped.
pub fn parse_corpus(path: impl AsRef<Path>) -> Result<Vec<EntityRecord>, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    parse_corpus_reader(BufReader::new(file)).map_err(|e| match e {
        IngestError::Io { source, .. } => IngestError::io(path, source),
        other => other,
    })
}

pub fn parse_corpus_reader<R: BufRead>(reader: R) -> Result<Vec<EntityRecord>, IngestError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| IngestError::Io {
            path: String::from("<reader>"),
            source: e,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut record: EntityRecord =
            serde_json::from_str(trimmed).map_err(|e| IngestError::MalformedRecord {
                line: line_no,
                detail: e.to_string(),
            })?;
        if record.id.trim().is_empty() {
            return Err(IngestError::MalformedRecord {
                line: line_no,
                detail: "empty id".into(),
            });
        }
        record.folder_paths = normalise_folders(&record.folder_paths);
        if !seen.insert(record.id.clone()) {
            return Err(IngestError::DuplicateId(record.id));
        }
        records.push(record);
    }
    Ok(records)
}

/// Write records back out as JSON-lines.
pub fn write_corpus(path: impl AsRef<Path>, records: &[EntityRecord]) -> Result<(), IngestError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| IngestError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).expect("records always serialise");
        writeln!(out, "{line}").map_err(|e| IngestError::io(path, e))?;
    }
    out.flush().map_err(|e| IngestError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FolderNode {
    pub label: String,
    /// `None` for top-level folders (children of the implicit root).
    pub parent: Option<String>,
    pub children: BTreeSet<String>,
}

/// Union of all folder paths in a corpus. The root is implicit.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FolderTree {
    pub nodes: BTreeMap<String, FolderNode>,
}

impl FolderTree {
    pub fn top_level(&self) -> impl Iterator<Item = &str> {
        self.nodes
            .iter()
            .filter(|(_, n)| n.parent.is_none())
            .map(|(p, _)| p.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn insert_path(&mut self, path: &str) {
        let mut parent: Option<String> = None;
        let mut prefix = String::new();
        for segment in path.split('/') {
            if !prefix.is_empty() {
                prefix.push('/');
            }
            prefix.push_str(segment);
            if let Some(p) = &parent {
                if let Some(node) = self.nodes.get_mut(p) {
                    node.children.insert(prefix.clone());
                }
            }
            self.nodes.entry(prefix.clone()).or_insert_with(|| FolderNode {
                label: segment.to_string(),
                parent: parent.clone(),
                children: BTreeSet::new(),
            });
            parent = Some(prefix.clone());
        }
    }
}

pub fn parse_folder_tree(records: &[EntityRecord]) -> FolderTree {
    let mut tree = FolderTree::default();
    for record in records {
        for path in &record.folder_paths {
            if let Some(p) = normalise_folder_path(path) {
                tree.insert_path(&p);
            }
        }
    }
    tree
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptEntry {
    pub concept_id: ConceptId,
    pub preferred_name: String,
    /// Raw synonyms, deduplicated by normalised form.
    pub synonyms: Vec<String>,
    pub source_vocab: String,
}

/// Case-fold, turn punctuation into token breaks and collapse whitespace.
pub fn normalise_text(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// A loaded gazetteer with a phrase index for longest-match extraction.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: Vec<ConceptEntry>,
    index: HashMap<Vec<String>, usize>,
}

impl Gazetteer {
    pub fn from_entries(entries: Vec<ConceptEntry>) -> Result<Self, IngestError> {
        let mut index = HashMap::new();
        let mut ids = HashSet::new();
        for (i, entry) in entries.iter().enumerate() {
            if !ids.insert(entry.concept_id.clone()) {
                return Err(IngestError::DuplicateConceptId(entry.concept_id.clone()));
            }
            let forms = std::iter::once(&entry.preferred_name).chain(entry.synonyms.iter());
            for form in forms {
                let tokens = normalise_text(form);
                if tokens.is_empty() {
                    continue;
                }
                if tokens.len() > MAX_PHRASE_TOKENS {
                    log::warn!(
                        "synonym {form:?} of {} exceeds {MAX_PHRASE_TOKENS} tokens; not indexed",
                        entry.concept_id
                    );
                    continue;
                }
                // First concept to claim a surface form keeps it.
                index.entry(tokens).or_insert(i);
            }
        }
        Ok(Gazetteer { entries, index })
    }

    pub fn entries(&self) -> &[ConceptEntry] {
        &self.entries
    }

    pub fn get(&self, concept_id: &str) -> Option<&ConceptEntry> {
        self.entries.iter().find(|e| e.concept_id == concept_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Keep only entries whose source vocabulary is in `vocabs`.
    pub fn filter_vocabs(&self, vocabs: &[&str]) -> Gazetteer {
        let kept = self
            .entries
            .iter()
            .filter(|e| vocabs.contains(&e.source_vocab.as_str()))
            .cloned()
            .collect();
        Gazetteer::from_entries(kept).expect("subset of a valid gazetteer is valid")
    }

    /// Display names keyed by concept id.
    pub fn names(&self) -> BTreeMap<ConceptId, String> {
        self.entries
            .iter()
            .map(|e| (e.concept_id.clone(), e.preferred_name.clone()))
            .collect()
    }
}

pub fn load_gazetteer(path: impl AsRef<Path>) -> Result<Gazetteer, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    let mut entries = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| IngestError::io(path, e))?;
        entries.extend(parse_gazetteer_line(&line, idx + 1)?);
    }
    Gazetteer::from_entries(entries)
}

/// Parse one gazetteer TSV row. Blank lines and `#` comments yield `None`.
pub fn parse_gazetteer_line(line: &str, line_no: usize) -> Result<Option<ConceptEntry>, IngestError> {
    let line = line.trim_end_matches(['\r', '\n']);
    if line.trim().is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let malformed = |detail: &str| IngestError::MalformedRow {
        line: line_no,
        detail: detail.to_string(),
    };
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 4 {
        return Err(malformed("expected 4 tab-separated columns"));
    }
    let concept_id = cols[0].trim();
    let preferred = cols[1].trim();
    if concept_id.is_empty() {
        return Err(malformed("empty concept id"));
    }
    if normalise_text(preferred).is_empty() {
        return Err(malformed("empty preferred name"));
    }
    let mut seen = HashSet::new();
    let mut synonyms = Vec::new();
    if !cols[2].trim().is_empty() {
        for syn in cols[2].split('|') {
            let norm = normalise_text(syn);
            if norm.is_empty() {
                return Err(malformed("synonym is empty after normalisation"));
            }
            if seen.insert(norm) {
                synonyms.push(syn.trim().to_string());
            }
        }
    }
    Ok(Some(ConceptEntry {
        concept_id: concept_id.to_string(),
        preferred_name: preferred.to_string(),
        synonyms,
        source_vocab: cols[3].trim().to_string(),
    }))
}

/// Greedy longest-match, left to right, over the normalised token stream.
pub fn extract_concepts(text: &str, gazetteer: &Gazetteer) -> BTreeMap<ConceptId, u32> {
    let tokens = normalise_text(text);
    let mut counts = BTreeMap::new();
    let mut i = 0;
    while i < tokens.len() {
        let longest = MAX_PHRASE_TOKENS.min(tokens.len() - i);
        let hit = (1..=longest)
            .rev()
            .find_map(|len| gazetteer.index.get(&tokens[i..i + len]).map(|&e| (e, len)));
        match hit {
            Some((entry, len)) => {
                *counts
                    .entry(gazetteer.entries[entry].concept_id.clone())
                    .or_insert(0) += 1;
                i += len;
            }
            None => i += 1,
        }
    }
    counts
}

/// Entity → concept → occurrence count.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationTable {
    pub rows: BTreeMap<EntityId, BTreeMap<ConceptId, u32>>,
}

impl AnnotationTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn concept_set(&self, entity: &str) -> BTreeSet<ConceptId> {
        self.rows
            .get(entity)
            .map(|row| row.keys().cloned().collect())
            .unwrap_or_default()
    }

    pub fn concept_sets(&self) -> BTreeMap<EntityId, BTreeSet<ConceptId>> {
        self.rows
            .iter()
            .map(|(e, row)| (e.clone(), row.keys().cloned().collect()))
            .collect()
    }

    /// Give every record a row (empty if absent) and set its concept set.
    pub fn apply_to(&mut self, records: &mut [EntityRecord]) {
        for record in records.iter_mut() {
            let row = self.rows.entry(record.id.clone()).or_default();
            record.concepts = row.keys().cloned().collect();
        }
    }
}

pub fn build_annotation_table(records: &mut [EntityRecord], gazetteer: &Gazetteer) -> AnnotationTable {
    let rows: BTreeMap<_, _> = records
        .par_iter()
        .map(|r| (r.id.clone(), extract_concepts(&r.annotation_text(), gazetteer)))
        .collect();
    let mut table = AnnotationTable { rows };
    table.apply_to(records);
    table
}

/// Result of importing an externally produced annotation table.
#[derive(Debug, Clone, Default)]
pub struct EatImport {
    pub table: AnnotationTable,
    pub warnings: Vec<String>,
}

/// Import an EAT. Rows for entities not in `known` (when given) are dropped
/// with a warning; duplicate (entity, concept) rows are summed.
pub fn import_eat(path: impl AsRef<Path>, known: Option<&HashSet<EntityId>>) -> Result<EatImport, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    let mut import = EatImport::default();
    let mut unknown = BTreeSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| IngestError::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(IngestError::MalformedRow {
                line: line_no,
                detail: "expected 3 tab-separated columns".into(),
            });
        }
        let (entity, concept) = (cols[0].trim(), cols[1].trim());
        if entity.is_empty() || concept.is_empty() {
            return Err(IngestError::MalformedRow {
                line: line_no,
                detail: "empty id".into(),
            });
        }
        let count: i64 = cols[2].trim().parse().map_err(|_| IngestError::MalformedRow {
            line: line_no,
            detail: format!("count {:?} is not an integer", cols[2]),
        })?;
        if count <= 0 {
            return Err(IngestError::NonPositiveCount { line: line_no });
        }
        if let Some(known) = known {
            if !known.contains(entity) {
                unknown.insert(entity.to_string());
                continue;
            }
        }
        let count = u32::try_from(count).map_err(|_| IngestError::MalformedRow {
            line: line_no,
            detail: "count overflows u32".into(),
        })?;
        let slot = import
            .table
            .rows
            .entry(entity.to_string())
            .or_default()
            .entry(concept.to_string())
            .or_insert(0);
        *slot = slot.saturating_add(count);
    }
    for id in unknown {
        log::warn!("annotation table references unknown entity {id:?}");
        import.warnings.push(format!("unknown entity id {id:?}"));
    }
    Ok(import)
}

pub fn write_eat(path: impl AsRef<Path>, table: &AnnotationTable) -> Result<(), IngestError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| IngestError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for (entity, row) in &table.rows {
        for (concept, count) in row {
            writeln!(out, "{entity}\t{concept}\t{count}").map_err(|e| IngestError::io(path, e))?;
        }
    }
    out.flush().map_err(|e| IngestError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn gaz(rows: &[&str]) -> Gazetteer {
        let entries = rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| parse_gazetteer_line(r, i + 1).unwrap())
            .collect();
        Gazetteer::from_entries(entries).unwrap()
    }

    #[test]
    fn minimal_record() {
        let input = r#"{"id":"p1","title":"T","abstract":"A"}"#;
        let records = parse_corpus_reader(Cursor::new(input)).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].id, "p1");
        assert_eq!(records[0].abstract_text, "A");
        assert!(records[0].folder_paths.is_empty());
    }

    #[test]
    fn empty_corpus() {
        assert!(parse_corpus_reader(Cursor::new("")).unwrap().is_empty());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let input = "{\"id\":\"p1\"}\n{\"id\":\"p1\"}\n";
        match parse_corpus_reader(Cursor::new(input)) {
            Err(IngestError::DuplicateId(id)) => assert_eq!(id, "p1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let input = "{\"id\":\"p1\"}\n\nnot json\n";
        match parse_corpus_reader(Cursor::new(input)) {
            Err(IngestError::MalformedRecord { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn folder_paths_drop_empty_segments() {
        let input = r#"{"id":"p1","folders":["A//B/","  ","/C"]}"#;
        let records = parse_corpus_reader(Cursor::new(input)).unwrap();
        assert_eq!(records[0].folder_paths, vec!["A/B".to_string(), "C".to_string()]);
    }

    fn with_folders(id: &str, folders: &[&str]) -> EntityRecord {
        let mut r = EntityRecord::new(id);
        r.folder_paths = folders.iter().map(|s| s.to_string()).collect();
        r
    }

    #[test]
    fn folder_tree_union() {
        let tree = parse_folder_tree(&[with_folders("a", &["A/B"]), with_folders("b", &["A/C"])]);
        assert_eq!(tree.nodes.len(), 3);
        assert_eq!(tree.top_level().collect::<Vec<_>>(), vec!["A"]);
        let a = &tree.nodes["A"];
        assert_eq!(a.children.iter().cloned().collect::<Vec<_>>(), vec!["A/B", "A/C"]);
        assert_eq!(tree.nodes["A/C"].parent.as_deref(), Some("A"));
    }

    #[test]
    fn folder_tree_materialises_intermediates() {
        let tree = parse_folder_tree(&[with_folders("a", &["A/B/C"])]);
        for p in ["A", "A/B", "A/B/C"] {
            assert!(tree.nodes.contains_key(p), "{p} missing");
        }
        assert_eq!(tree.nodes["A/B/C"].label, "C");
    }

    #[test]
    fn folder_tree_empty() {
        assert!(parse_folder_tree(&[EntityRecord::new("a")]).is_empty());
    }

    #[test]
    fn gazetteer_row() {
        let entry = parse_gazetteer_line("C001\tKRAS\tKRAS|K-ras\tHGNC", 1).unwrap().unwrap();
        assert_eq!(entry.synonyms.len(), 2);
        assert_eq!(entry.source_vocab, "HGNC");
    }

    #[test]
    fn gazetteer_case_fold_collapses() {
        let entry = parse_gazetteer_line("C001\tKRAS\tKRAS|kras|Kras\tHGNC", 1).unwrap().unwrap();
        assert_eq!(entry.synonyms, vec!["KRAS".to_string()]);
    }

    #[test]
    fn gazetteer_bad_rows() {
        assert!(matches!(
            parse_gazetteer_line("C001\tKRAS", 4),
            Err(IngestError::MalformedRow { line: 4, .. })
        ));
        assert!(matches!(
            parse_gazetteer_line("C001\tKRAS\tKRAS|--\tHGNC", 1),
            Err(IngestError::MalformedRow { .. })
        ));
        assert!(parse_gazetteer_line("# comment", 1).unwrap().is_none());
    }

    #[test]
    fn gazetteer_duplicate_concept() {
        let entries = vec![
            parse_gazetteer_line("C001\ta\ta\tX", 1).unwrap().unwrap(),
            parse_gazetteer_line("C001\tb\tb\tX", 2).unwrap().unwrap(),
        ];
        assert!(matches!(
            Gazetteer::from_entries(entries),
            Err(IngestError::DuplicateConceptId(id)) if id == "C001"
        ));
    }

    #[test]
    fn synonyms_collapse_to_one_concept() {
        let g = gaz(&["C001\tKRAS\tKRAS|K-ras\tHGNC"]);
        let counts = extract_concepts("KRAS and K-ras", &g);
        assert_eq!(counts, BTreeMap::from([("C001".to_string(), 2)]));
    }

    #[test]
    fn longest_match_wins() {
        let g = gaz(&[
            "C1\tnon small cell lung cancer\t\tX",
            "C2\tlung cancer\t\tX",
        ]);
        let counts = extract_concepts("Advances in non-small cell lung cancer therapy", &g);
        assert_eq!(counts, BTreeMap::from([("C1".to_string(), 1)]));
        let counts = extract_concepts("lung cancer", &g);
        assert_eq!(counts, BTreeMap::from([("C2".to_string(), 1)]));
    }

    #[test]
    fn empty_text_no_concepts() {
        let g = gaz(&["C1\tx\t\tX"]);
        assert!(extract_concepts("", &g).is_empty());
    }

    #[test]
    fn vocab_filter() {
        let g = gaz(&["C1\talpha\t\tA", "C2\tbeta\t\tB"]);
        let only_a = g.filter_vocabs(&["A"]);
        assert_eq!(only_a.len(), 1);
        assert!(extract_concepts("alpha beta", &only_a).contains_key("C1"));
        assert!(!extract_concepts("alpha beta", &only_a).contains_key("C2"));
    }

    #[test]
    fn annotation_table_is_total() {
        let g = gaz(&["C1\tkras\t\tX"]);
        let mut records = vec![EntityRecord::new("a"), EntityRecord::new("b"), EntityRecord::new("c")];
        records[0].title = "KRAS mutations".into();
        let table = build_annotation_table(&mut records, &g);
        assert_eq!(table.len(), 3);
        assert_eq!(table.rows["a"].len(), 1);
        assert!(table.rows["b"].is_empty());
        assert_eq!(records[0].concepts, BTreeSet::from(["C1".to_string()]));
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn eat_import_rules() {
        let f = write_tmp("p1\tC1\t3\n");
        let t = import_eat(f.path(), None).unwrap().table;
        assert_eq!(t.rows["p1"]["C1"], 3);

        let f = write_tmp("p1\tC1\t0\n");
        assert!(matches!(import_eat(f.path(), None), Err(IngestError::NonPositiveCount { line: 1 })));

        let f = write_tmp("p1\tC1\t2\np1\tC1\t5\n");
        assert_eq!(import_eat(f.path(), None).unwrap().table.rows["p1"]["C1"], 7);

        let f = write_tmp("p1\tC1\n");
        assert!(matches!(import_eat(f.path(), None), Err(IngestError::MalformedRow { .. })));
    }

    #[test]
    fn eat_unknown_entities_warn() {
        let f = write_tmp("p1\tC1\t1\nzz\tC1\t1\n");
        let known = HashSet::from(["p1".to_string()]);
        let import = import_eat(f.path(), Some(&known)).unwrap();
        assert_eq!(import.table.len(), 1);
        assert_eq!(import.warnings.len(), 1);
    }

    #[test]
    fn eat_write_then_import() {
        let mut table = AnnotationTable::default();
        table.rows.insert("p1".into(), BTreeMap::from([("C1".into(), 2), ("C2".into(), 1)]));
        let f = tempfile::NamedTempFile::new().unwrap();
        write_eat(f.path(), &table).unwrap();
        assert_eq!(import_eat(f.path(), None).unwrap().table, table);
    }
}
