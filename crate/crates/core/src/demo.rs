//! Deterministic synthetic corpus: 200 documents in a three-level folder
//! hierarchy with a 500-concept gazetteer.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingestion::{normalise_text, write_corpus, ConceptEntry, EntityRecord, IngestError};

pub const DEMO_SEED: u64 = 20_240_611;
pub const DEMO_DOCUMENTS: usize = 200;
pub const DEMO_CONCEPTS: usize = 500;

/// Subarea name and its two leaf folders.
type Mid = (&'static str, [&'static str; 2]);

const AREAS: [(&str, [Mid; 3]); 4] = [
    (
        "Oncology",
        [
            ("Lung Cancer", ["Biomarkers", "Immunotherapy"]),
            ("Breast Cancer", ["Genomics", "Screening"]),
            ("Leukemia", ["Targeted Therapy", "Transplantation"]),
        ],
    ),
    (
        "Neuroscience",
        [
            ("Neurodegeneration", ["Alzheimer Disease", "Parkinson Disease"]),
            ("Cognition", ["Memory", "Attention"]),
            ("Neuroimaging", ["Functional MRI", "Diffusion Imaging"]),
        ],
    ),
    (
        "Infectious Disease",
        [
            ("Virology", ["Influenza", "Coronaviruses"]),
            ("Bacteriology", ["Antibiotic Resistance", "Tuberculosis"]),
            ("Epidemiology", ["Outbreak Modelling", "Vaccination"]),
        ],
    ),
    (
        "Cardiology",
        [
            ("Heart Failure", ["Devices", "Pharmacotherapy"]),
            ("Arrhythmia", ["Atrial Fibrillation", "Ablation"]),
            ("Prevention", ["Lipids", "Hypertension"]),
        ],
    ),
];

const SYLLABLES: [&str; 24] = [
    "ka", "lo", "mi", "ren", "tas", "vu", "dor", "pel", "zi", "nor", "qua", "bel", "sor", "tin", "gar", "hex", "cy",
    "lum", "fen", "ox", "ra", "mon", "ter", "vin",
];
const SUFFIXES: [&str; 8] = [
    "receptor", "kinase", "syndrome", "protein", "factor", "pathway", "antigen", "inhibitor",
];
const VOCABS: [&str; 4] = ["MSH", "SNOMEDCT_US", "HGNC", "GO"];
const FILLER: [&str; 12] = [
    "we", "examine", "the", "role", "of", "in", "results", "indicate", "that", "with", "and", "study",
];
const AUTHORS: [&str; 16] = [
    "A. Moreau", "B. Okafor", "C. Lindqvist", "D. Tanaka", "E. Novak", "F. Haddad", "G. Rossi", "H. Park",
    "I. Fischer", "J. Alvarez", "K. Mensah", "L. Dubois", "M. Iyer", "N. Kowalski", "O. Brennan", "P. Silva",
];
const VENUES: [&str; 6] = [
    "Journal of Translational Research",
    "Clinical Insights",
    "Annals of Applied Biomedicine",
    "Proceedings of Medical Informatics",
    "Frontiers in Systems Medicine",
    "Review of Biomedical Data",
];

struct Leaf {
    path: String,
    mid: usize,
    top: usize,
}

fn capitalise(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn gazetteer(rng: &mut ChaCha8Rng) -> Vec<ConceptEntry> {
    let filler: HashSet<&str> = FILLER.iter().copied().collect();
    let mut used: HashSet<Vec<String>> = HashSet::new();
    let mut words = BTreeSet::new();
    let mut out = Vec::with_capacity(DEMO_CONCEPTS);
    while out.len() < DEMO_CONCEPTS {
        let n = rng.random_range(2..=3);
        let word: String = (0..n).map(|_| *SYLLABLES.choose(rng).expect("non-empty")).collect();
        if filler.contains(word.as_str()) || words.contains(&word) {
            continue;
        }
        words.insert(word.clone());
        let name = if rng.random_bool(0.5) {
            format!("{word} {}", SUFFIXES.choose(rng).expect("non-empty"))
        } else {
            word.clone()
        };
        let key = normalise_text(&name);
        if !used.insert(key) {
            continue;
        }
        let mut synonyms = Vec::new();
        if rng.random_bool(0.3) {
            let abbr = format!("{}{}", word[..2].to_uppercase(), rng.random_range(1..10));
            if used.insert(normalise_text(&abbr)) {
                synonyms.push(abbr);
            }
        }
        out.push(ConceptEntry {
            concept_id: format!("C{:04}", out.len() + 1),
            preferred_name: name,
            synonyms,
            source_vocab: VOCABS.choose(rng).expect("non-empty").to_string(),
        });
    }
    out
}

fn sentence(rng: &mut ChaCha8Rng, a: &str, b: &str) -> String {
    match rng.random_range(0..3) {
        0 => format!("We examine the role of {a} in {b}."),
        1 => format!("Results indicate that {a} interacts with {b}."),
        _ => format!("This study relates {a} and {b}."),
    }
}

/// Demo documents and the gazetteer they were written against.
pub fn generate_demo(seed: u64) -> (Vec<EntityRecord>, Vec<ConceptEntry>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let concepts = gazetteer(&mut rng);

    let mut leaves = Vec::new();
    for (ti, (top, mids)) in AREAS.iter().enumerate() {
        for (mi, (mid, subs)) in mids.iter().enumerate() {
            for sub in subs {
                leaves.push(Leaf {
                    path: format!("{top}/{mid}/{sub}"),
                    mid: ti * 3 + mi,
                    top: ti,
                });
            }
        }
    }
    // Concept pools: 15 per leaf, 7 per middle topic, 10 per area, 16 general.
    let mut ids: Vec<usize> = (0..concepts.len()).collect();
    ids.shuffle(&mut rng);
    let mut chunks = ids.into_iter();
    let mut take = |n: usize| -> Vec<usize> { chunks.by_ref().take(n).collect() };
    let leaf_pool: Vec<Vec<usize>> = (0..leaves.len()).map(|_| take(15)).collect();
    let mid_pool: Vec<Vec<usize>> = (0..12).map(|_| take(7)).collect();
    let top_pool: Vec<Vec<usize>> = (0..4).map(|_| take(10)).collect();
    let general = take(16);

    let name = |c: usize| concepts[c].preferred_name.clone();
    let mut records = Vec::with_capacity(DEMO_DOCUMENTS);
    for i in 0..DEMO_DOCUMENTS {
        let li = rng.random_range(0..leaves.len());
        let leaf = &leaves[li];
        let mut picked: Vec<usize> = Vec::new();
        picked.extend(leaf_pool[li].choose_multiple(&mut rng, 8));
        picked.extend(mid_pool[leaf.mid].choose_multiple(&mut rng, 2));
        picked.extend(top_pool[leaf.top].choose_multiple(&mut rng, 2));
        picked.extend(general.choose_multiple(&mut rng, 1));

        let mut folders = vec![leaf.path.clone()];
        if rng.random_bool(0.08) {
            // Filed one level up only.
            let parent = leaf.path.rsplit_once('/').expect("three levels").0.to_string();
            folders = vec![parent];
        }
        if rng.random_bool(0.2) {
            let same_area: Vec<usize> = (0..leaves.len())
                .filter(|&j| j != li && leaves[j].top == leaf.top)
                .collect();
            let other = if rng.random_bool(0.5) {
                *same_area.choose(&mut rng).expect("siblings exist")
            } else {
                loop {
                    let j = rng.random_range(0..leaves.len());
                    if j != li {
                        break j;
                    }
                }
            };
            folders.push(leaves[other].path.clone());
            picked.extend(leaf_pool[other].choose_multiple(&mut rng, 4));
        }

        let title = format!("{} and {} in {}", capitalise(&name(picked[0])), name(picked[1]), name(picked[2]));
        let mut body = Vec::new();
        for pair in picked[3..].chunks(2) {
            let b = pair.get(1).copied().unwrap_or(picked[0]);
            body.push(sentence(&mut rng, &name(pair[0]), &name(b)));
        }
        if rng.random_bool(0.3) {
            if let Some(abbr) = concepts[picked[0]].synonyms.first() {
                body.push(format!("We refer to it as {abbr}."));
            }
        }

        let mut r = EntityRecord::new(format!("P{:04}", i + 1));
        r.title = title;
        r.abstract_text = body.join(" ");
        let n_auth = rng.random_range(1..=4);
        r.authors = AUTHORS.choose_multiple(&mut rng, n_auth).map(|s| s.to_string()).collect();
        r.year = rng.random_range(1995..=2024);
        r.venue = Some(VENUES.choose(&mut rng).expect("non-empty").to_string());
        r.doi = Some(format!("10.5555/demo.{:04}", i + 1));
        r.url = Some(format!("https://example.org/docs/P{:04}", i + 1));
        r.folder_paths = folders;
        records.push(r);
    }
    (records, concepts)
}

pub fn write_gazetteer(path: impl AsRef<Path>, entries: &[ConceptEntry]) -> std::io::Result<()> {
    let mut out = String::from("# conceptId\tpreferredName\tsynonyms\tsourceVocab\n");
    for e in entries {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            e.concept_id,
            e.preferred_name,
            e.synonyms.join("|"),
            e.source_vocab
        ));
    }
    std::fs::write(path, out)
}

/// Write `corpus.jsonl` and `gazetteer.tsv` into `dir`.
pub fn write_demo(dir: impl AsRef<Path>, seed: u64) -> Result<(), IngestError> {
    let dir = dir.as_ref();
    let io = |e: std::io::Error| IngestError::Io {
        path: dir.display().to_string(),
        source: e,
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let (records, concepts) = generate_demo(seed);
    write_corpus(dir.join("corpus.jsonl"), &records)?;
    write_gazetteer(dir.join("gazetteer.tsv"), &concepts).map_err(io)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_sized() {
        let (a, ca) = generate_demo(DEMO_SEED);
        let (b, cb) = generate_demo(DEMO_SEED);
        assert_eq!(a, b);
        assert_eq!(ca, cb);
        assert_eq!(a.len(), DEMO_DOCUMENTS);
        assert_eq!(ca.len(), DEMO_CONCEPTS);
        let ids: BTreeSet<_> = ca.iter().map(|c| &c.concept_id).collect();
        assert_eq!(ids.len(), DEMO_CONCEPTS);
    }
}
