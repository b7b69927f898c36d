use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::extract::VisitExtraction;
use super::ColonSite;

/// Per-visit polyp features.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VisitSummary {
    pub polyp_count: u32,
    pub mean_size_mm: Option<f64>,
    pub max_size_mm: Option<f64>,
    pub location_counts: BTreeMap<ColonSite, u32>,
}

impl VisitSummary {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn has_polyps(&self) -> bool {
        self.polyp_count > 0
    }

    pub fn located_count(&self) -> u32 {
        self.location_counts.values().sum()
    }

    pub fn site_count(&self, site: ColonSite) -> u32 {
        self.location_counts.get(&site).copied().unwrap_or(0)
    }
}

/// Aggregates the mentions of one visit.
///
/// The mean size is the count-weighted mean of mention midpoints over the
/// mentions that carry a size; the maximum is the largest upper bound.
pub fn aggregate_visit(extraction: &VisitExtraction) -> VisitSummary {
    let mut summary = VisitSummary::default();
    let mut weighted = 0.0;
    let mut sized = 0u32;
    for mention in &extraction.mentions {
        summary.polyp_count += mention.count;
        if let Some(site) = mention.location {
            *summary.location_counts.entry(site).or_insert(0) += mention.count;
        }
        if let (Some(mid), Some(hi)) = (mention.midpoint_mm(), mention.size_max_mm) {
            weighted += mention.count as f64 * mid;
            sized += mention.count;
            summary.max_size_mm = Some(summary.max_size_mm.map_or(hi, |m: f64| m.max(hi)));
        }
    }
    if sized > 0 {
        summary.mean_size_mm = Some(weighted / sized as f64);
    }
    summary
}
