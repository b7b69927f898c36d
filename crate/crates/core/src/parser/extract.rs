use serde::{Deserialize, Serialize};

use super::lexer::{lex, Token, TokenKind, Unit};
use super::{ColonSite, ColonoscopyReport, ParserConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumberRole {
    Size,
    Count,
}

/// One polyp group found in a report: where, how many, how large.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolypMention {
    pub location: Option<ColonSite>,
    pub size_min_mm: Option<f64>,
    pub size_max_mm: Option<f64>,
    pub count: u32,
}

impl PolypMention {
    pub fn midpoint_mm(&self) -> Option<f64> {
        match (self.size_min_mm, self.size_max_mm) {
            (Some(lo), Some(hi)) => Some((lo + hi) / 2.0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VisitExtraction {
    /// In discovery order.
    pub mentions: Vec<PolypMention>,
    pub unparsed_numbers: Vec<Token>,
}

/// Decides whether the number at `index` is a size or a polyp count.
///
/// It is a size iff a unit token appears within the next `window` tokens
/// before any other number.
///
/// # Panics
/// If `tokens[index]` is not a number.
pub fn classify_number(tokens: &[Token], index: usize, window: usize) -> NumberRole {
    assert!(tokens[index].is_number(), "token {index} is not a number");
    unit_after(tokens, index, window).map_or(NumberRole::Count, |_| NumberRole::Size)
}

/// Position and unit of the unit token attached to the number at `index`.
fn unit_after(tokens: &[Token], index: usize, window: usize) -> Option<(usize, Unit)> {
    for (pos, tok) in tokens.iter().enumerate().skip(index + 1).take(window) {
        match tok.kind {
            TokenKind::Unit(u) => return Some((pos, u)),
            TokenKind::Number(_) => return None,
            _ => {}
        }
    }
    None
}

#[derive(Debug, Default)]
struct Draft {
    location: Option<ColonSite>,
    count: Option<u32>,
    size: Option<(f64, f64)>,
}

impl Draft {
    fn finish(self) -> PolypMention {
        PolypMention {
            location: self.location,
            size_min_mm: self.size.map(|s| s.0),
            size_max_mm: self.size.map(|s| s.1),
            count: self.count.unwrap_or(1),
        }
    }
}

/// Slot filling over the token stream. A field that is already filled in the
/// open mention starts a new one; sentence ends (`.`, `;`) and an `and`
/// following a located mention close it.
#[derive(Default)]
struct Assembler {
    done: Vec<PolypMention>,
    open: Option<Draft>,
}

impl Assembler {
    fn close(&mut self) {
        if let Some(d) = self.open.take() {
            self.done.push(d.finish());
        }
    }

    fn open_mut(&mut self, accepts: impl Fn(&Draft) -> bool) -> &mut Draft {
        if !self.open.as_ref().is_some_and(&accepts) {
            self.close();
            self.open = Some(Draft::default());
        }
        self.open.as_mut().unwrap()
    }

    fn location(&mut self, site: ColonSite) {
        self.open_mut(|d| d.location.is_none()).location = Some(site);
    }

    fn count(&mut self, count: u32) {
        // counts precede sizes within a noun phrase
        self.open_mut(|d| d.count.is_none() && d.size.is_none()).count = Some(count);
    }

    fn size(&mut self, lo: f64, hi: f64) {
        self.open_mut(|d| d.size.is_none()).size = Some((lo.min(hi), lo.max(hi)));
    }

    fn has_location(&self) -> bool {
        self.open.as_ref().is_some_and(|d| d.location.is_some())
    }

    fn finish(mut self) -> Vec<PolypMention> {
        self.close();
        self.done
    }
}

fn lower(tok: &Token) -> Option<String> {
    (tok.kind == TokenKind::Word).then(|| tok.lexeme.to_lowercase())
}

/// Matches a vocabulary site starting at `i`; returns it with its token length.
/// Multi-word entries are tried first.
fn match_site(tokens: &[Token], i: usize) -> Option<(ColonSite, usize)> {
    let mut sites = ColonSite::ALL;
    sites.sort_by_key(|s| std::cmp::Reverse(s.vocabulary().len()));
    sites.into_iter().find_map(|site| {
        let words = site.vocabulary();
        let hit = words.iter().enumerate().all(|(k, w)| {
            tokens
                .get(i + k)
                .and_then(lower)
                .is_some_and(|l| l == *w)
        });
        hit.then_some((site, words.len()))
    })
}

fn is_range_marker(tok: &Token, config: &ParserConfig) -> bool {
    match tok.kind {
        TokenKind::Punct => tok.lexeme == "-",
        TokenKind::Word => {
            let l = tok.lexeme.to_lowercase();
            config.range_markers.iter().any(|m| *m == l)
        }
        _ => false,
    }
}

/// `a [unit] marker b unit`: returns (lo_mm, hi_mm, index after the closing unit).
fn match_range(tokens: &[Token], i: usize, config: &ParserConfig) -> Option<(f64, f64, usize)> {
    let first = tokens[i].number()?;
    let mut j = i + 1;
    let first_unit = tokens.get(j).and_then(Token::unit);
    if first_unit.is_some() {
        j += 1;
    }
    if !is_range_marker(tokens.get(j)?, config) {
        return None;
    }
    j += 1;
    let second = tokens.get(j)?.number()?;
    let (unit_pos, second_unit) = unit_after(tokens, j, config.unit_window)?;
    let lo = first_unit.unwrap_or(second_unit).to_mm(first);
    let hi = second_unit.to_mm(second);
    Some((lo, hi, unit_pos + 1))
}

/// Extracts polyp mentions from one report.
pub fn parse_report(report: &ColonoscopyReport, config: &ParserConfig) -> VisitExtraction {
    parse_text(&report.text, config)
}

pub(crate) fn parse_text(text: &str, config: &ParserConfig) -> VisitExtraction {
    let tokens = lex(text);
    let mut asm = Assembler::default();
    let mut unparsed = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let tok = &tokens[i];
        match tok.kind {
            TokenKind::Word => {
                if let Some((site, len)) = match_site(&tokens, i) {
                    asm.location(site);
                    i += len;
                    continue;
                }
                if tok.lexeme.eq_ignore_ascii_case("and") && asm.has_location() {
                    asm.close();
                }
            }
            TokenKind::Punct => {
                if tok.lexeme == "." || tok.lexeme == ";" {
                    asm.close();
                }
            }
            TokenKind::Number(value) => {
                if let Some((lo, hi, next)) = match_range(&tokens, i, config) {
                    asm.size(lo, hi);
                    i = next;
                    continue;
                }
                if let Some((unit_pos, unit)) = unit_after(&tokens, i, config.unit_window) {
                    let mm = unit.to_mm(value);
                    asm.size(mm, mm);
                    i = unit_pos + 1;
                    continue;
                }
                if value >= 1.0 && value <= config.max_count && value.fract() == 0.0 {
                    asm.count(value as u32);
                } else {
                    unparsed.push(tok.clone());
                }
            }
            TokenKind::Unit(_) => {}
        }
        i += 1;
    }
    VisitExtraction {
        mentions: asm.finish(),
        unparsed_numbers: unparsed,
    }
}
