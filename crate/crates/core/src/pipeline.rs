//! End-to-end build: corpus + annotations → bundle.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::ceg::{build_ceg, ensure_connected, CegError, DEFAULT_THRESHOLD};
use crate::ingestion::{
    build_annotation_table, import_eat, load_gazetteer, parse_corpus, parse_folder_tree, AnnotationTable, EntityRecord,
    IngestError,
};
use crate::layout::{layout_hierarchy, LayoutError, LayoutParams, DEFAULT_ENCLOSE_SEED, DEFAULT_ENTITY_RADIUS, DEFAULT_PADDING};
use crate::store::{BuildParams, GraphBundle, FORMAT_VERSION};
use crate::thg::{
    backpropagate, build_dthg, build_mthg, validate_pyramid, ConceptMatrix, HierarchyMode, ThgError, DEFAULT_PYRAMID,
};
use crate::tog::{build_tog, TogError};
use crate::topography::{
    default_iso_levels, elevation_grid, extract_contours, ColorScale, TopographyParams, DEFAULT_GRID,
};
use crate::{ConceptId, EntityId, TopicId};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("ingestion: {0}")]
    Ingest(#[from] IngestError),
    #[error("ceg: {0}")]
    Ceg(#[from] CegError),
    #[error("thg: {0}")]
    Thg(#[from] ThgError),
    #[error("tog: {0}")]
    Tog(#[from] TogError),
    #[error("layout: {0}")]
    Layout(#[from] LayoutError),
}

impl PipelineError {
    /// Bad input or configuration, as opposed to an internal failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            PipelineError::Config(_)
                | PipelineError::Ingest(_)
                | PipelineError::Ceg(_)
                | PipelineError::Thg(ThgError::InvalidPyramid(_) | ThgError::EmptyMatrix)
        )
    }
}

/// Build settings. Paths are read by [`build_bundle`]; everything else has a
/// default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildConfig {
    pub corpus: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub eat: Option<PathBuf>,
    /// Restrict the gazetteer to these source vocabularies (empty = all).
    pub vocabs: Vec<String>,
    pub mode: HierarchyMode,
    pub threshold: u32,
    /// Topic counts per level, top to bottom. Data mode only.
    pub pyramid: Option<Vec<usize>>,
    pub padding: f64,
    pub entity_radius: f64,
    pub grid: usize,
    pub bandwidth: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub iso_levels: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            corpus: None,
            gazetteer: None,
            eat: None,
            vocabs: Vec::new(),
            mode: HierarchyMode::Manual,
            threshold: DEFAULT_THRESHOLD,
            pyramid: None,
            padding: DEFAULT_PADDING,
            entity_radius: DEFAULT_ENTITY_RADIUS,
            grid: DEFAULT_GRID,
            bandwidth: None,
            alpha: 0.5,
            beta: 0.5,
            iso_levels: None,
            seed: DEFAULT_ENCLOSE_SEED,
        }
    }
}

impl BuildConfig {
    fn check(&self) -> Result<(), PipelineError> {
        let bad = |msg: String| Err(PipelineError::Config(msg));
        if !(self.padding >= 0.0 && self.padding.is_finite()) {
            return bad(format!("padding must be non-negative, got {}", self.padding));
        }
        if self.grid < 2 {
            return bad(format!("grid must be at least 2, got {}", self.grid));
        }
        if let Some(bw) = self.bandwidth {
            if !(bw > 0.0 && bw.is_finite()) {
                return bad(format!("bandwidth must be positive, got {bw}"));
            }
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.alpha + self.beta <= 0.0 {
            return bad("alpha + beta must be positive".to_string());
        }
        if let Some(levels) = &self.iso_levels {
            if levels.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return bad("iso levels must lie in [0, 1]".to_string());
            }
        }
        if self.mode == HierarchyMode::Manual && self.pyramid.is_some() {
            log::warn!("pyramid is ignored in manual mode");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BuildSummary {
    pub entities: usize,
    pub similarity_edges: usize,
    pub synthetic_edges: usize,
    pub topics: usize,
    pub max_depth: u32,
    pub instances_per_level: BTreeMap<u32, usize>,
}

impl fmt::Display for BuildSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "entities: {}", self.entities)?;
        writeln!(
            f,
            "similarity edges: {} ({} synthetic)",
            self.similarity_edges, self.synthetic_edges
        )?;
        writeln!(f, "topics: {} (depth {})", self.topics, self.max_depth)?;
        for (level, n) in &self.instances_per_level {
            writeln!(f, "level {level}: {n} instances")?;
        }
        Ok(())
    }
}

impl BuildSummary {
    pub fn of(bundle: &GraphBundle) -> Self {
        BuildSummary {
            entities: bundle.ceg.nodes.len(),
            similarity_edges: bundle.ceg.edges.len(),
            synthetic_edges: bundle.ceg.synthetic_edges(),
            topics: bundle.thg.len().saturating_sub(1),
            max_depth: bundle.thg.max_depth,
            instances_per_level: bundle
                .tog
                .levels
                .iter()
                .map(|(l, occ)| (*l, occ.instances.len()))
                .collect(),
        }
    }
}

/// Read the configured inputs and run every stage.
pub fn build_bundle(cfg: &BuildConfig) -> Result<GraphBundle, PipelineError> {
    cfg.check()?;
    let corpus = cfg
        .corpus
        .as_ref()
        .ok_or_else(|| PipelineError::Config("no corpus given".to_string()))?;
    let mut records = parse_corpus(corpus)?;
    let (table, names) = match (&cfg.gazetteer, &cfg.eat) {
        (Some(_), Some(_)) => {
            return Err(PipelineError::Config(
                "give either a gazetteer or an annotation table, not both".to_string(),
            ))
        }
        (None, None) => {
            return Err(PipelineError::Config(
                "need a gazetteer or an annotation table".to_string(),
            ))
        }
        (Some(path), None) => {
            let mut gaz = load_gazetteer(path)?;
            if !cfg.vocabs.is_empty() {
                let vocabs: Vec<&str> = cfg.vocabs.iter().map(String::as_str).collect();
                gaz = gaz.filter_vocabs(&vocabs);
            }
            let table = build_annotation_table(&mut records, &gaz);
            (table, gaz.names())
        }
        (None, Some(path)) => {
            let known: HashSet<EntityId> = records.iter().map(|r| r.id.clone()).collect();
            let import = import_eat(path, Some(&known))?;
            for w in &import.warnings {
                log::warn!("{w}");
            }
            let mut table = import.table;
            table.apply_to(&mut records);
            (table, BTreeMap::new())
        }
    };
    build_from_parts(records, table, names, cfg)
}

/// Run every stage after ingestion.
pub fn build_from_parts(
    records: Vec<EntityRecord>,
    mut table: AnnotationTable,
    concept_names: BTreeMap<ConceptId, String>,
    cfg: &BuildConfig,
) -> Result<GraphBundle, PipelineError> {
    cfg.check()?;
    let mut records = records;
    table.apply_to(&mut records);

    let ceg = build_ceg(&table, cfg.threshold)?;
    let before = ceg.component_count();
    let ceg = ensure_connected(ceg, &table, &records);
    if before > 1 {
        log::info!(
            "joined {before} components with {} synthetic edges",
            ceg.synthetic_edges()
        );
    }

    let (thg, assignment, pyramid) = match cfg.mode {
        HierarchyMode::Manual => {
            if let Some(r) = records.iter().find(|r| r.folder_paths.is_empty()) {
                return Err(PipelineError::Config(format!(
                    "manual mode needs folder paths on every record; {} has none",
                    r.id
                )));
            }
            let thg = build_mthg(&parse_folder_tree(&records));
            let direct: BTreeMap<EntityId, BTreeSet<TopicId>> = records
                .iter()
                .map(|r| (r.id.clone(), r.folder_paths.iter().cloned().collect()))
                .collect();
            let assignment = backpropagate(&direct, &thg)?;
            (thg, assignment, Vec::new())
        }
        HierarchyMode::Data => {
            let pyramid = match &cfg.pyramid {
                Some(p) => p.clone(),
                None => {
                    log::info!("using default topic pyramid {DEFAULT_PYRAMID:?}");
                    DEFAULT_PYRAMID.to_vec()
                }
            };
            validate_pyramid(&pyramid)?;
            let matrix = ConceptMatrix::from_sets(&table.concept_sets(), &concept_names);
            let (thg, assignment) = build_dthg(&matrix, &pyramid)?;
            (thg, assignment, pyramid)
        }
    };

    let tog = build_tog(&ceg, &thg, &assignment, &records)?;
    let layout_params = LayoutParams {
        padding_ratio: cfg.padding,
        entity_radius: cfg.entity_radius,
        seed: cfg.seed,
    };
    let layout = layout_hierarchy(&thg, &tog, layout_params)?;

    let mut topo = TopographyParams::for_entity_radius(cfg.entity_radius);
    topo.width = cfg.grid;
    topo.height = cfg.grid;
    topo.alpha = cfg.alpha;
    topo.beta = cfg.beta;
    if let Some(bw) = cfg.bandwidth {
        topo.bandwidth = bw;
    }
    let elevation = elevation_grid(&layout, &thg, &tog, &topo);
    let iso = cfg.iso_levels.clone().unwrap_or_else(default_iso_levels);
    let contours = extract_contours(&elevation, &iso);

    Ok(GraphBundle {
        format_version: FORMAT_VERSION,
        params: BuildParams {
            mode: cfg.mode,
            threshold: cfg.threshold,
            pyramid,
            padding_ratio: cfg.padding,
            entity_radius: cfg.entity_radius,
            seed: cfg.seed,
            topography: topo,
        },
        records,
        concept_names,
        annotations: table,
        ceg,
        thg,
        assignment,
        tog,
        layout,
        elevation,
        contours,
        color_scale: ColorScale::default(),
    })
}
