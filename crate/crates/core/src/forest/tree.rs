use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::data::ForestData;
use super::ForestConfig;
use crate::survival::logrank_increment;

/// How a split routes a case: to the left child when the rule holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SplitRule {
    /// value <= threshold
    Threshold { threshold: f64 },
    /// bit `code` of the mask set
    Levels { left_mask: u64 },
}

impl SplitRule {
    #[inline]
    pub fn goes_left(&self, value: f64) -> bool {
        match *self {
            SplitRule::Threshold { threshold } => value <= threshold,
            SplitRule::Levels { left_mask } => (left_mask >> (value as u64)) & 1 == 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub variable: usize,
    pub rule: SplitRule,
    /// Two-group log-rank chi-square of the children.
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    /// Cumulative hazard jumps as (grid index, value after the jump).
    pub chf: Vec<(u32, f64)>,
    /// Sum of the cumulative hazard over the whole event-time grid.
    pub mortality: f64,
}

impl Leaf {
    /// The leaf CHF evaluated on every grid point.
    pub fn chf_on_grid(&self, grid_len: usize) -> Vec<f64> {
        let mut out = vec![0.0; grid_len];
        for (k, &(start, value)) in self.chf.iter().enumerate() {
            let end = self.chf.get(k + 1).map_or(grid_len, |n| n.0 as usize);
            out[start as usize..end].iter_mut().for_each(|v| *v = value);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Split { split: Split, left: u32, right: u32, size: u32 },
    Leaf { leaf: Leaf, size: u32, events: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalTree {
    pub nodes: Vec<Node>,
    /// Bootstrap multiplicity of every training case.
    pub in_bag: Vec<u32>,
}

impl SurvivalTree {
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Split { split, left, right, .. } => {
                    at = if split.rule.goes_left(row[split.variable]) { *left } else { *right } as usize;
                }
            }
        }
    }

    pub fn leaf(&self, row: &[f64]) -> &Leaf {
        match &self.nodes[self.leaf_index(row)] {
            Node::Leaf { leaf, .. } => leaf,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn is_oob(&self, case: usize) -> bool {
        self.in_bag[case] == 0
    }

    /// In-bag sample (case indices, repeated by multiplicity) reaching each node.
    pub fn node_samples(&self, data: &ForestData) -> Vec<Vec<usize>> {
        let mut samples = vec![Vec::new(); self.nodes.len()];
        for (case, &m) in self.in_bag.iter().enumerate() {
            let row = data.row(case);
            let mut at = 0;
            loop {
                samples[at].extend(std::iter::repeat_n(case, m as usize));
                match &self.nodes[at] {
                    Node::Leaf { .. } => break,
                    Node::Split { split, left, right, .. } => {
                        at = if split.rule.goes_left(row[split.variable]) { *left } else { *right } as usize;
                    }
                }
            }
        }
        samples
    }

    pub fn splits(&self) -> impl Iterator<Item = (usize, &Split)> {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match n {
            Node::Split { split, .. } => Some((i, split)),
            Node::Leaf { .. } => None,
        })
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Two-group log-rank chi-square of `sample` (sorted by time) split by
/// `left`. Accumulates in ascending time, as the general test does.
pub(crate) fn split_statistic(data: &ForestData, sample: &[usize], left: &[bool]) -> f64 {
    let mut n = sample.len() as f64;
    let mut n_left = left.iter().filter(|l| **l).count() as f64;
    let (mut u, mut v) = (0.0, 0.0);
    let mut i = 0;
    while i < sample.len() {
        let t = data.times[sample[i]];
        let (mut d, mut d_left, mut out, mut out_left) = (0.0, 0.0, 0.0, 0.0);
        while i < sample.len() && data.times[sample[i]] == t {
            let is_event = data.events[sample[i]];
            if is_event {
                d += 1.0;
            }
            out += 1.0;
            if left[i] {
                if is_event {
                    d_left += 1.0;
                }
                out_left += 1.0;
            }
            i += 1;
        }
        if d > 0.0 {
            let (du, dv) = logrank_increment(n, n_left, d, d_left);
            u += du;
            v += dv;
        }
        n -= out;
        n_left -= out_left;
    }
    if v > 0.0 {
        (u * u / v).max(0.0)
    } else {
        0.0
    }
}

fn count_events(data: &ForestData, sample: &[usize]) -> usize {
    sample.iter().filter(|&&i| data.events[i]).count()
}

struct Candidate {
    variable: usize,
    rule: SplitRule,
    statistic: f64,
}

/// Searches `mtry` random variables for the split with the largest log-rank
/// statistic whose children both meet the size and event minimums.
pub fn best_logrank_split<R: Rng>(
    data: &ForestData,
    sample: &[usize],
    config: &ForestConfig,
    mtry: usize,
    rng: &mut R,
) -> Option<Split> {
    let p = data.n_variables();
    let mut best: Option<Candidate> = None;
    let mut left = vec![false; sample.len()];
    for variable in sample_variables(rng, p, mtry) {
        for rule in candidate_rules(data, sample, variable, config.n_split_candidates, rng) {
            let mut n_left = 0;
            let mut events_left = 0;
            for (slot, &case) in left.iter_mut().zip(sample) {
                *slot = rule.goes_left(data.value(case, variable));
                if *slot {
                    n_left += 1;
                    events_left += data.events[case] as usize;
                }
            }
            let n_right = sample.len() - n_left;
            let events_right = count_events(data, sample) - events_left;
            if n_left < config.min_node_size
                || n_right < config.min_node_size
                || events_left < config.min_node_events
                || events_right < config.min_node_events
            {
                continue;
            }
            let statistic = split_statistic(data, sample, &left);
            if best.as_ref().is_none_or(|b| statistic > b.statistic) {
                best = Some(Candidate { variable, rule, statistic });
            }
        }
    }
    best.map(|b| Split { variable: b.variable, rule: b.rule, statistic: b.statistic })
}

pub(super) fn sample_variables<R: Rng>(rng: &mut R, p: usize, mtry: usize) -> Vec<usize> {
    sample(rng, p, mtry.min(p)).into_vec()
}

pub(super) fn candidate_rules<R: Rng>(
    data: &ForestData,
    sample: &[usize],
    variable: usize,
    n_candidates: usize,
    rng: &mut R,
) -> Vec<SplitRule> {
    if data.is_factor(variable) {
        let mut observed: u64 = 0;
        for &case in sample {
            observed |= 1 << (data.value(case, variable) as u64);
        }
        level_partitions(observed, n_candidates, rng)
            .into_iter()
            .map(|left_mask| SplitRule::Levels { left_mask })
            .collect()
    } else {
        let mut values: Vec<f64> = sample.iter().map(|&c| data.value(c, variable)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        // the largest value cannot split anything off
        values.pop();
        if values.len() > n_candidates {
            let picks = sample_variables(rng, values.len(), n_candidates);
            picks.into_iter().map(|k| SplitRule::Threshold { threshold: values[k] }).collect()
        } else {
            values.into_iter().map(|threshold| SplitRule::Threshold { threshold }).collect()
        }
    }
}

/// Distinct non-trivial two-way partitions of the observed levels, as the
/// mask of levels sent left. The lowest observed level always goes left so a
/// partition and its mirror image are not both produced.
fn level_partitions<R: Rng>(observed: u64, n_candidates: usize, rng: &mut R) -> Vec<u64> {
    let levels: Vec<u32> = (0..64).filter(|b| (observed >> b) & 1 == 1).collect();
    let k = levels.len();
    if k < 2 {
        return Vec::new();
    }
    let from_bits = |bits: u64| -> u64 {
        // bit j of `bits` assigns levels[j + 1]; levels[0] is always left
        let mut mask = 1u64 << levels[0];
        for (j, &lvl) in levels.iter().enumerate().skip(1) {
            if (bits >> (j - 1)) & 1 == 1 {
                mask |= 1 << lvl;
            }
        }
        mask
    };
    let free = k - 1;
    // bits == all ones puts every level left
    let n_partitions: u64 = if free >= 63 { u64::MAX } else { (1u64 << free) - 1 };
    if n_partitions <= n_candidates as u64 {
        return (0..n_partitions).map(from_bits).collect();
    }
    let mut out: Vec<u64> = Vec::with_capacity(n_candidates);
    let mut attempts = 0;
    while out.len() < n_candidates && attempts < 20 * n_candidates {
        attempts += 1;
        let bits = rng.random_range(0..n_partitions);
        let mask = from_bits(bits);
        if !out.contains(&mask) {
            out.push(mask);
        }
    }
    out
}

/// Grows one tree on a bootstrap sample drawn from `rng`.
pub(crate) fn grow_tree<R: Rng>(data: &ForestData, config: &ForestConfig, mtry: usize, rng: &mut R) -> SurvivalTree {
    let n = data.n_cases();
    let mut in_bag = vec![0u32; n];
    for _ in 0..n {
        in_bag[rng.random_range(0..n)] += 1;
    }
    let mut root: Vec<usize> = Vec::with_capacity(n);
    for &case in &data.time_order {
        root.extend(std::iter::repeat_n(case, in_bag[case] as usize));
    }

    let mut nodes: Vec<Node> = Vec::new();
    // (node slot, sample sorted by time)
    let mut stack: Vec<(usize, Vec<usize>)> = Vec::new();
    nodes.push(placeholder());
    stack.push((0, root));
    while let Some((slot, sample)) = stack.pop() {
        let events = count_events(data, &sample);
        let splittable = sample.len() >= 2 * config.min_node_size && events >= 2 * config.min_node_events;
        let split = if splittable { best_logrank_split(data, &sample, config, mtry, rng) } else { None };
        match split {
            Some(split) => {
                let (left, right): (Vec<usize>, Vec<usize>) = sample
                    .iter()
                    .partition(|&&c| split.rule.goes_left(data.value(c, split.variable)));
                let left_slot = nodes.len();
                nodes.push(placeholder());
                let right_slot = nodes.len();
                nodes.push(placeholder());
                nodes[slot] = Node::Split {
                    split,
                    left: left_slot as u32,
                    right: right_slot as u32,
                    size: sample.len() as u32,
                };
                stack.push((right_slot, right));
                stack.push((left_slot, left));
            }
            None => {
                nodes[slot] = Node::Leaf {
                    leaf: make_leaf(data, &sample),
                    size: sample.len() as u32,
                    events: events as u32,
                };
            }
        }
    }
    SurvivalTree { nodes, in_bag }
}

fn placeholder() -> Node {
    Node::Leaf { leaf: Leaf { chf: Vec::new(), mortality: 0.0 }, size: 0, events: 0 }
}

/// Nelson-Aalen estimate of a time-sorted sample, placed on the forest grid.
fn make_leaf(data: &ForestData, sample: &[usize]) -> Leaf {
    let mut chf = Vec::new();
    let mut at_risk = sample.len() as f64;
    let mut h = 0.0;
    let mut i = 0;
    while i < sample.len() {
        let t = data.times[sample[i]];
        let (mut d, mut out) = (0.0, 0.0);
        while i < sample.len() && data.times[sample[i]] == t {
            d += data.events[sample[i]] as u8 as f64;
            out += 1.0;
            i += 1;
        }
        if d > 0.0 {
            h += d / at_risk;
            chf.push((data.grid_index(t) as u32, h));
        }
        at_risk -= out;
    }
    let grid_len = data.grid.len();
    let mortality = chf
        .iter()
        .enumerate()
        .map(|(k, &(start, value))| {
            let end = chf.get(k + 1).map_or(grid_len, |n| n.0 as usize);
            value * (end - start as usize) as f64
        })
        .sum();
    Leaf { chf, mortality }
}
