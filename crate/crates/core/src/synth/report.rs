use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::parser::{ColonSite, VisitSummary};

/// Phrasing family of a generated report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStyle {
    /// Point sizes in digits, counts mostly as words.
    Plain,
    /// Every group shares one size range whose midpoint is the mean.
    Ranged,
    /// Counts and whole-millimetre sizes spelled out.
    NumberWords,
}

/// Per-mention counts above this would be rejected by the parser's sanity cap.
const MAX_GROUP: u32 = 50;
const CM_PROBABILITY: f64 = 0.25;

const ONES: [&str; 20] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven",
    "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen",
];
const TENS: [&str; 10] = ["", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"];

fn spell<R: Rng>(n: u32, rng: &mut R) -> String {
    match n {
        0..=19 => ONES[n as usize].to_string(),
        20..=99 if n % 10 == 0 => TENS[(n / 10) as usize].to_string(),
        20..=99 => {
            let sep = if rng.random_bool(0.5) { "-" } else { " " };
            format!("{}{sep}{}", TENS[(n / 10) as usize], ONES[(n % 10) as usize])
        }
        _ => n.to_string(),
    }
}

fn site_phrase(site: ColonSite) -> &'static str {
    match site {
        ColonSite::Transverse => "in the transverse colon",
        ColonSite::Sigmoid => "in the sigmoid colon",
        ColonSite::IleumCecum => "in the ileum cecum",
        ColonSite::Anus => "at the anus",
        ColonSite::Ascending => "in the ascending colon",
        ColonSite::Descending => "in the descending colon",
        ColonSite::Hepatic => "at the hepatic flexure",
        ColonSite::Rectum => "in the rectum",
        ColonSite::Ileocecal => "at the ileocecal valve",
        ColonSite::Splenic => "at the splenic flexure",
    }
}

/// `v` in centimetres, if that text parses back to exactly `v` mm.
fn cm_text(v: f64) -> Option<String> {
    let text = format!("{}", v / 10.0);
    (text.parse::<f64>().ok()? * 10.0 == v).then_some(text)
}

fn mm_text(v: f64) -> String {
    format!("{v}")
}

fn size_number<R: Rng>(v: f64, words: bool, rng: &mut R) -> String {
    if words && v.fract() == 0.0 && v < 100.0 {
        spell(v as u32, rng)
    } else {
        mm_text(v)
    }
}

fn point_size<R: Rng>(v: f64, style: ReportStyle, rng: &mut R) -> String {
    if rng.random_bool(CM_PROBABILITY) {
        if let Some(cm) = cm_text(v) {
            return format!("{cm} cm");
        }
    }
    format!("{} mm", size_number(v, style == ReportStyle::NumberWords, rng))
}

fn range_size<R: Rng>(lo: f64, hi: f64, rng: &mut R) -> String {
    if rng.random_bool(CM_PROBABILITY) {
        if let (Some(a), Some(b)) = (cm_text(lo), cm_text(hi)) {
            return format!("{a} to {b} cm");
        }
    }
    if rng.random_bool(0.5) {
        format!("{}-{} mm", mm_text(lo), mm_text(hi))
    } else {
        format!("{} to {} mm", mm_text(lo), mm_text(hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Size {
    None,
    Point(f64),
    Range(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
struct Group {
    site: Option<ColonSite>,
    count: u32,
    size: Size,
}

/// Site of every polyp: located ones in site order, then the unlocated rest.
fn polyp_sites(summary: &VisitSummary) -> Result<Vec<Option<ColonSite>>, SynthError> {
    let located = summary.located_count();
    if located > summary.polyp_count {
        return Err(SynthError::UnrenderableSummary("more located polyps than polyps".into()));
    }
    let mut sites: Vec<Option<ColonSite>> = Vec::with_capacity(summary.polyp_count as usize);
    for (site, &c) in &summary.location_counts {
        sites.extend(std::iter::repeat_n(Some(*site), c as usize));
    }
    sites.extend(std::iter::repeat_n(None, (summary.polyp_count - located) as usize));
    Ok(sites)
}

/// Splits `total` over `k` polyps in multiples of a quantum, keeping each in (0, cap].
fn spread(total: f64, k: usize, cap: f64) -> Option<Vec<f64>> {
    for quantum in [1.0, 0.5, 0.1] {
        let units = total / quantum;
        if (units - units.round()).abs() > 1e-6 {
            continue;
        }
        let units = units.round() as i64;
        let base = units / k as i64;
        let extra = (units % k as i64) as usize;
        if base < 1 {
            continue;
        }
        let hi = (base + extra.min(1) as i64) as f64 * quantum;
        if hi > cap + 1e-9 {
            continue;
        }
        let mut out = vec![(base + 1) as f64 * quantum; extra];
        out.extend(std::iter::repeat_n(base as f64 * quantum, k - extra));
        // tidy multiples of 0.1 (0.30000000000000004 -> 0.3)
        return Some(out.into_iter().map(|v| format!("{v:.1}").parse().unwrap()).collect());
    }
    None
}

fn point_groups(summary: &VisitSummary) -> Result<Vec<Group>, SynthError> {
    let sites = polyp_sites(summary)?;
    let n = sites.len();
    let sizes: Vec<Size> = match (summary.mean_size_mm, summary.max_size_mm) {
        (None, None) => vec![Size::None; n],
        (Some(mean), Some(max)) => {
            if n == 1 {
                if mean != max {
                    return Err(SynthError::UnrenderableSummary("single polyp with mean != max".into()));
                }
                vec![Size::Point(max)]
            } else {
                let rest = spread(n as f64 * mean - max, n - 1, max)
                    .ok_or_else(|| SynthError::UnrenderableSummary(format!("no point sizes give mean {mean} with max {max}")))?;
                std::iter::once(max).chain(rest).map(Size::Point).collect()
            }
        }
        _ => return Err(SynthError::UnrenderableSummary("mean and max must both be present or absent".into())),
    };
    Ok(group(sites.into_iter().zip(sizes)))
}

fn range_groups(summary: &VisitSummary) -> Result<Vec<Group>, SynthError> {
    let sites = polyp_sites(summary)?;
    let (Some(mean), Some(max)) = (summary.mean_size_mm, summary.max_size_mm) else {
        return Err(SynthError::UnrenderableSummary("no sizes to express as a range".into()));
    };
    let lo = 2.0 * mean - max;
    let tidy: f64 = format!("{lo:.1}").parse().unwrap();
    if (lo - tidy).abs() > 1e-6 || tidy <= 0.0 || tidy >= max {
        return Err(SynthError::UnrenderableSummary(format!("range for mean {mean}, max {max} is not expressible")));
    }
    Ok(group(sites.into_iter().map(|s| (s, Size::Range(tidy, max)))))
}

fn group(polyps: impl Iterator<Item = (Option<ColonSite>, Size)>) -> Vec<Group> {
    let mut groups: Vec<Group> = Vec::new();
    for (site, size) in polyps {
        match groups.last_mut() {
            Some(g) if g.site == site && g.size == size && g.count < MAX_GROUP => g.count += 1,
            _ => groups.push(Group { site, count: 1, size }),
        }
    }
    groups
}

fn render_group<R: Rng>(g: &Group, style: ReportStyle, rng: &mut R) -> String {
    let noun = if g.count == 1 { "polyp" } else { "polyps" };
    let count = match (g.count, style) {
        (1, ReportStyle::NumberWords) => "one".to_string(),
        (1, _) => if rng.random_bool(0.5) { "a" } else { "one" }.to_string(),
        (c, ReportStyle::Plain) if rng.random_bool(0.3) => c.to_string(),
        (c, _) => spell(c, rng),
    };
    let size = match g.size {
        Size::None => None,
        Size::Point(v) => Some(point_size(v, style, rng)),
        Size::Range(lo, hi) => Some(range_size(lo, hi, rng)),
    };
    // "fifty three mm" would lex as one compound number
    let words_collide = |s: &str| count.starts_with(char::is_alphabetic) && s.starts_with(char::is_alphabetic);
    let mut text = match (size, rng.random_bool(0.5)) {
        (None, _) => format!("{count} {noun}"),
        (Some(s), true) if !words_collide(&s) => format!("{count} {s} {noun}"),
        (Some(s), _) => format!("{count} {noun} measuring {s}"),
    };
    match g.site {
        Some(site) => {
            text.push(' ');
            text.push_str(site_phrase(site));
        }
        None => text.push_str(" without a recorded location"),
    }
    text
}

const OPENERS: [&str; 4] = [
    "Indication: surveillance colonoscopy.",
    "The bowel preparation was adequate.",
    "The scope was advanced without difficulty.",
    "",
];

const CLOSERS: [&str; 3] = ["The patient tolerated the procedure well.", "Retroflexion was normal.", ""];

/// Renders report text that the parser maps back to exactly `summary`.
///
/// Fails with `UnrenderableSummary` when the style cannot reproduce the mean
/// and maximum size.
pub fn generate_report_text<R: Rng>(summary: &VisitSummary, style: ReportStyle, rng: &mut R) -> Result<String, SynthError> {
    if summary.polyp_count == 0 {
        if summary.mean_size_mm.is_some() || summary.max_size_mm.is_some() || !summary.location_counts.is_empty() {
            return Err(SynthError::UnrenderableSummary("sizes or locations without polyps".into()));
        }
        return Ok("normal colonoscopy, no polyps.".to_string());
    }
    let groups = match style {
        ReportStyle::Ranged => range_groups(summary)?,
        ReportStyle::Plain | ReportStyle::NumberWords => point_groups(summary)?,
    };
    let mut text = String::new();
    let opener = OPENERS[rng.random_range(0..OPENERS.len())];
    text.push_str(opener);
    let mut prev_located = false;
    for (k, g) in groups.iter().enumerate() {
        let clause = render_group(g, style, rng);
        if k == 0 {
            if !text.is_empty() {
                text.push(' ');
            }
            let mut chars = clause.chars();
            let first = chars.next().unwrap().to_uppercase();
            text.extend(first);
            text.push_str(chars.as_str());
        } else if prev_located && rng.random_bool(0.3) {
            // "and" only ends a mention that already has a location
            text.push_str(" and ");
            text.push_str(&clause);
        } else {
            text.push_str(". ");
            text.push_str(&clause);
        }
        prev_located = g.site.is_some();
    }
    text.push('.');
    let closer = CLOSERS[rng.random_range(0..CLOSERS.len())];
    if !closer.is_empty() {
        text.push(' ');
        text.push_str(closer);
    }
    Ok(text)
}

/// Like [`generate_report_text`], falling back to point sizes when the style
/// cannot express the summary.
pub fn render_report<R: Rng>(summary: &VisitSummary, style: ReportStyle, rng: &mut R) -> Result<String, SynthError> {
    match generate_report_text(summary, style, rng) {
        Err(SynthError::UnrenderableSummary(_)) if style != ReportStyle::Plain => {
            generate_report_text(summary, ReportStyle::Plain, rng)
        }
        other => other,
    }
}
