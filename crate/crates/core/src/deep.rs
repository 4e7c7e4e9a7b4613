//! Divide-and-conquer generation.
//!
//! The training set is split recursively on the highest-gain feature, as when
//! growing a decision tree, and recursive generation runs at every node on
//! the local subset. Features that only help on a subset (for example one
//! that matters only for women) can surface at the node where the rest of the
//! data no longer masks them. The split tree is thrown away; the generated
//! features are collected in pre-order and deduplicated.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureValue};
use crate::feature::{materialize, Feature};
use crate::kb::KnowledgeBase;
use crate::learners::info::information_gain;
use crate::recursive::{generate_features, CandidateOutcome, FilterReason, GenerationConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeepConfig {
    pub min_node_size: usize,
    pub max_tree_depth: usize,
    pub generation: GenerationConfig,
}

impl Default for DeepConfig {
    fn default() -> Self {
        DeepConfig {
            min_node_size: 10,
            max_tree_depth: 10,
            generation: GenerationConfig::default(),
        }
    }
}

/// Per tree-depth statistics of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DepthStats {
    pub depth: usize,
    pub nodes: usize,
    pub candidates_tried: usize,
    pub features_generated: usize,
    pub filtered_count: usize,
    pub filtered_too_few_objects: usize,
    pub filtered_single_class: usize,
    pub filtered_no_relations: usize,
    /// Mean of `|objects| / |examples at node|` over candidates.
    pub mean_size_ratio: Option<f64>,
    /// Mean share of the smaller class in the recursive problems built.
    pub mean_minority_fraction: Option<f64>,
    /// Mean local gain of the features generated at this depth.
    pub mean_generated_ig: Option<f64>,
    /// Mean over nodes of the best local gain among the original features.
    pub mean_best_base_ig: Option<f64>,
}

#[derive(Default)]
struct DepthAcc {
    stats: DepthStats,
    ratios: Vec<f64>,
    minority: Vec<f64>,
    generated_ig: Vec<f64>,
    base_ig: Vec<f64>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub depths: Vec<DepthStats>,
}

impl GenerationReport {
    pub fn to_table(&self) -> String {
        let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>5} {:>5} {:>6} {:>9} {:>8} {:>10} {:>9} {:>8} {:>9}",
            "depth",
            "nodes",
            "tried",
            "generated",
            "filtered",
            "size_ratio",
            "minority",
            "gen_ig",
            "base_ig"
        );
        for d in &self.depths {
            let _ = writeln!(
                out,
                "{:>5} {:>5} {:>6} {:>9} {:>8} {:>10} {:>9} {:>8} {:>9}",
                d.depth,
                d.nodes,
                d.candidates_tried,
                d.features_generated,
                d.filtered_count,
                fmt(d.mean_size_ratio),
                fmt(d.mean_minority_fraction),
                fmt(d.mean_generated_ig),
                fmt(d.mean_best_base_ig),
            );
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeepOutcome {
    pub features: Vec<Feature>,
    pub report: GenerationReport,
}

fn groups_of(column: impl Iterator<Item = FeatureValue>) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<FeatureValue, Vec<usize>> = BTreeMap::new();
    for (i, v) in column.enumerate() {
        groups.entry(v).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Information gain of every feature over `ds`, on materialized values.
pub fn feature_gains(ds: &Dataset, features: &[Feature], kb: &KnowledgeBase) -> Vec<f64> {
    let m = materialize(ds, features, kb);
    (0..features.len())
        .map(|j| information_gain(&m.labels, &groups_of(m.column(j).cloned())))
        .collect()
}

/// Index and gain of the highest-gain feature among those that split `ds`
/// into at least two groups of at least `min_leaf` examples each, as a tree
/// learner with that leaf size would. Ties go to the smallest name.
pub fn select_feature(
    ds: &Dataset,
    features: &[Feature],
    kb: &KnowledgeBase,
    min_leaf: usize,
) -> Option<(usize, f64)> {
    let m = materialize(ds, features, kb);
    let mut best: Option<(usize, f64)> = None;
    for j in 0..features.len() {
        let groups = groups_of(m.column(j).cloned());
        if groups.len() < 2 || groups.iter().any(|g| g.len() < min_leaf) {
            continue;
        }
        let g = information_gain(&m.labels, &groups);
        best = match best {
            None => Some((j, g)),
            Some((b, bg)) => {
                let better = g > bg + 1e-12
                    || ((g - bg).abs() <= 1e-12 && features[j].name() < features[b].name());
                Some(if better { (j, g) } else { (b, bg) })
            }
        };
    }
    best
}

struct Run<'a> {
    kb: &'a KnowledgeBase,
    cfg: &'a DeepConfig,
    base: BTreeSet<String>,
    depths: Vec<DepthAcc>,
    collected: Vec<Feature>,
    seen: BTreeSet<String>,
}

impl Run<'_> {
    fn node(&mut self, ds: &Dataset, features: &[Feature], depth: usize) {
        let counts = ds.label_counts();
        if ds.is_empty()
            || counts.is_pure()
            || ds.len() < self.cfg.min_node_size
            || depth >= self.cfg.max_tree_depth
        {
            return;
        }
        let gcfg = &self.cfg.generation;
        let local = generate_features(ds, features, self.kb, gcfg, gcfg.depth);

        let mut all: Vec<Feature> = features.to_vec();
        let known: BTreeSet<&str> = features.iter().map(Feature::name).collect();
        let fresh: Vec<Feature> = local
            .features
            .iter()
            .filter(|f| !known.contains(f.name()))
            .cloned()
            .collect();
        all.extend(fresh.iter().cloned());
        let gains = feature_gains(ds, &all, self.kb);

        if self.depths.len() <= depth {
            self.depths.resize_with(depth + 1, DepthAcc::default);
        }
        let acc = &mut self.depths[depth];
        acc.stats.nodes += 1;
        for c in &local.candidates {
            acc.stats.candidates_tried += 1;
            acc.ratios.push(c.objects as f64 / ds.len() as f64);
            if let Some(m) = c.minority_fraction {
                acc.minority.push(m);
            }
            match &c.outcome {
                CandidateOutcome::Generated { .. } => acc.stats.features_generated += 1,
                CandidateOutcome::Filtered(reason) => {
                    acc.stats.filtered_count += 1;
                    match reason {
                        FilterReason::TooFewObjects { .. } => {
                            acc.stats.filtered_too_few_objects += 1
                        }
                        FilterReason::SingleClass => acc.stats.filtered_single_class += 1,
                        FilterReason::NoApplicableRelations => acc.stats.filtered_no_relations += 1,
                    }
                }
            }
        }
        for (f, g) in all.iter().zip(&gains) {
            if local.features.iter().any(|l| l.name() == f.name()) {
                acc.generated_ig.push(*g);
            }
        }
        if let Some(b) = all
            .iter()
            .zip(&gains)
            .filter(|(f, _)| self.base.contains(f.name()))
            .map(|(_, g)| *g)
            .reduce(f64::max)
        {
            acc.base_ig.push(b);
        }

        for f in &local.features {
            let key = serde_json::to_string(f).expect("feature definitions serialize");
            if self.seen.insert(key) {
                self.collected.push(f.clone());
            }
        }

        let min_leaf = self.cfg.generation.train.min_leaf.max(1);
        let Some((split, _)) = select_feature(ds, &all, self.kb, min_leaf) else {
            return;
        };
        let m = materialize(ds, std::slice::from_ref(&all[split]), self.kb);
        let groups = groups_of(m.rows.into_iter().map(|mut r| r.remove(0)));
        for g in groups {
            self.node(&ds.subset(&g), &all, depth + 1);
        }
    }
}

/// Runs divide-and-conquer generation from the root of `ds`.
pub fn deep_generate(
    ds: &Dataset,
    features: &[Feature],
    kb: &KnowledgeBase,
    cfg: &DeepConfig,
) -> DeepOutcome {
    let mut run = Run {
        kb,
        cfg,
        base: features.iter().map(|f| f.name().to_string()).collect(),
        depths: Vec::new(),
        collected: Vec::new(),
        seen: BTreeSet::new(),
    };
    run.node(ds, features, 0);
    let depths = run
        .depths
        .into_iter()
        .enumerate()
        .map(|(depth, acc)| DepthStats {
            depth,
            mean_size_ratio: mean(&acc.ratios),
            mean_minority_fraction: mean(&acc.minority),
            mean_generated_ig: mean(&acc.generated_ig),
            mean_best_base_ig: mean(&acc.base_ig),
            ..acc.stats
        })
        .collect();
    DeepOutcome {
        features: run.collected,
        report: GenerationReport { depths },
    }
}
