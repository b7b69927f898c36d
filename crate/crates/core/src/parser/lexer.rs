use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    Mm,
    Cm,
}

impl Unit {
    pub fn to_mm(self, value: f64) -> f64 {
        match self {
            Unit::Mm => value,
            Unit::Cm => value * 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TokenKind {
    Word,
    Number(f64),
    Unit(Unit),
    Punct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    /// Half-open character offsets into the source text.
    pub span: (usize, usize),
}

impl Token {
    pub fn number(&self) -> Option<f64> {
        match self.kind {
            TokenKind::Number(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_number(&self) -> bool {
        matches!(self.kind, TokenKind::Number(_))
    }

    pub fn unit(&self) -> Option<Unit> {
        match self.kind {
            TokenKind::Unit(u) => Some(u),
            _ => None,
        }
    }

    fn is_word_number(&self) -> bool {
        self.is_number() && self.lexeme.chars().all(|c| c.is_alphabetic())
    }
}

const UNITS_WORDS: [&str; 20] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen",
];

const TENS_WORDS: [&str; 8] = [
    "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
];

fn simple_number_word(word: &str) -> Option<u32> {
    if let Some(i) = UNITS_WORDS.iter().position(|w| *w == word) {
        return Some(i as u32);
    }
    TENS_WORDS
        .iter()
        .position(|w| *w == word)
        .map(|i| 20 + 10 * i as u32)
}

/// Joins a tens word and a units word (1-9) into one value.
fn compound(tens: u32, units: u32) -> Option<u32> {
    (tens >= 20 && tens % 10 == 0 && (1..=9).contains(&units)).then_some(tens + units)
}

fn number_word(word: &str) -> Option<u32> {
    if let Some(v) = simple_number_word(word) {
        return Some(v);
    }
    let (head, tail) = word.split_once('-')?;
    compound(simple_number_word(head)?, simple_number_word(tail)?)
}

fn classify_word(lexeme: &str) -> TokenKind {
    let lower = lexeme.to_lowercase();
    match lower.as_str() {
        "mm" => TokenKind::Unit(Unit::Mm),
        "cm" => TokenKind::Unit(Unit::Cm),
        _ => match number_word(&lower) {
            Some(v) => TokenKind::Number(v as f64),
            None => TokenKind::Word,
        },
    }
}

/// Splits report text into tokens.
///
/// Digit runs (with an optional decimal part) and number words become
/// `Number` tokens; `mm`/`cm` become `Unit` tokens even when glued to a
/// number (`5mm`); other letter runs are words and every other
/// non-whitespace character is its own `Punct` token.
pub fn lex(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let lexeme: String = chars[start..i].iter().collect();
            // digit strings always parse as f64
            let value = lexeme.parse::<f64>().unwrap_or(f64::NAN);
            tokens.push(Token {
                kind: TokenKind::Number(value),
                lexeme,
                span: (start, i),
            });
        } else if c.is_alphabetic() {
            while i < chars.len() {
                let ch = chars[i];
                let joins = (ch == '-' || ch == '\'')
                    && i + 1 < chars.len()
                    && chars[i + 1].is_alphabetic();
                if ch.is_alphabetic() || (joins && i > start) {
                    i += 1;
                } else {
                    break;
                }
            }
            let lexeme: String = chars[start..i].iter().collect();
            tokens.push(Token {
                kind: classify_word(&lexeme),
                lexeme,
                span: (start, i),
            });
        } else {
            i += 1;
            tokens.push(Token {
                kind: TokenKind::Punct,
                lexeme: c.to_string(),
                span: (start, i),
            });
        }
    }
    merge_compound_numbers(tokens)
}

/// "twenty five" written as two words becomes a single number token.
fn merge_compound_numbers(tokens: Vec<Token>) -> Vec<Token> {
    let mut out: Vec<Token> = Vec::with_capacity(tokens.len());
    for tok in tokens {
        if let Some(prev) = out.last_mut() {
            if prev.is_word_number() && tok.is_word_number() {
                let merged = compound(prev.number().unwrap() as u32, tok.number().unwrap() as u32);
                if let Some(v) = merged {
                    prev.kind = TokenKind::Number(v as f64);
                    prev.lexeme = format!("{} {}", prev.lexeme, tok.lexeme);
                    prev.span.1 = tok.span.1;
                    continue;
                }
            }
        }
        out.push(tok);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<TokenKind> {
        lex(text).into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn number_words_and_units() {
        assert_eq!(
            kinds("three 5 mm polyps"),
            vec![
                TokenKind::Number(3.0),
                TokenKind::Number(5.0),
                TokenKind::Unit(Unit::Mm),
                TokenKind::Word
            ]
        );
    }

    #[test]
    fn empty_text() {
        assert!(lex("").is_empty());
        assert!(lex("   \n\t").is_empty());
    }

    #[test]
    fn decimal_and_cm() {
        let toks = lex("a 1.2 cm sessile polyp");
        assert_eq!(
            toks.iter().map(|t| t.kind).collect::<Vec<_>>(),
            vec![
                TokenKind::Word,
                TokenKind::Number(1.2),
                TokenKind::Unit(Unit::Cm),
                TokenKind::Word,
                TokenKind::Word
            ]
        );
        assert_eq!(toks[0].lexeme, "a");
        assert_eq!(toks[4].lexeme, "polyp");
    }

    #[test]
    fn glued_unit_and_case() {
        assert_eq!(
            kinds("5MM 7cm"),
            vec![
                TokenKind::Number(5.0),
                TokenKind::Unit(Unit::Mm),
                TokenKind::Number(7.0),
                TokenKind::Unit(Unit::Cm)
            ]
        );
    }

    #[test]
    fn compound_number_words() {
        assert_eq!(kinds("twenty-five"), vec![TokenKind::Number(25.0)]);
        assert_eq!(kinds("Forty two"), vec![TokenKind::Number(42.0)]);
        // units words never merge with each other
        assert_eq!(
            kinds("two three"),
            vec![TokenKind::Number(2.0), TokenKind::Number(3.0)]
        );
        // a tens word before a digit stays separate
        assert_eq!(
            kinds("twenty 5"),
            vec![TokenKind::Number(20.0), TokenKind::Number(5.0)]
        );
    }

    #[test]
    fn ranges_and_trailing_period() {
        let toks = lex("3-7 mm. 4.");
        assert_eq!(
            toks.iter().map(|t| t.kind).collect::<Vec<_>>(),
            vec![
                TokenKind::Number(3.0),
                TokenKind::Punct,
                TokenKind::Number(7.0),
                TokenKind::Unit(Unit::Mm),
                TokenKind::Punct,
                TokenKind::Number(4.0),
                TokenKind::Punct
            ]
        );
    }

    #[test]
    fn spans_are_char_offsets() {
        let toks = lex("é 5mm");
        assert_eq!(toks[0].span, (0, 1));
        assert_eq!(toks[1].span, (2, 3));
        assert_eq!(toks[2].span, (3, 5));
    }

    #[test]
    fn hyphenated_words_are_words() {
        let toks = lex("x-ray non-bleeding");
        assert!(toks.iter().all(|t| t.kind == TokenKind::Word));
        assert_eq!(toks[1].lexeme, "non-bleeding");
    }
}
