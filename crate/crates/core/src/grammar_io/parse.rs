//! Line-oriented `.gotm` parser.
//!
//! ```text
//! # comment
//! root s
//! goal g7, g8
//! intervention i11
//! p1: s -> g1 g2 @ 0.95
//! ```

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::model::{build_model, FuzzyRule, ModelError, RuleId, SymbolId, TreatmentModel};

const MAX_FRACTION_DIGITS: usize = 9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: expected {expected}")]
    Syntax { expected: String },

    #[error(transparent)]
    Model(ModelError),
}

/// A parse or build failure pinned to a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    fn syntax(line: usize, column: usize, expected: impl Into<String>) -> Self {
        Self {
            line,
            column,
            kind: ParseErrorKind::Syntax {
                expected: expected.into(),
            },
        }
    }

    fn model(line: usize, column: usize, err: ModelError) -> Self {
        Self {
            line,
            column,
            kind: ParseErrorKind::Model(err),
        }
    }

    pub fn is_syntax(&self) -> bool {
        matches!(self.kind, ParseErrorKind::Syntax { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok<'a> {
    Ident(&'a str),
    Number(&'a str),
    Colon,
    Comma,
    Arrow,
    At,
}

impl Tok<'_> {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Number(s) => format!("`{s}`"),
            Tok::Colon => "`:`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::At => "`@`".into(),
        }
    }
}

/// Tokens of one line with their 1-based columns.
fn lex(line: &str, line_no: usize) -> Result<Vec<(Tok<'_>, usize)>, ParseError> {
    let mut toks = Vec::new();
    let mut chars = line.char_indices().peekable();
    let col_of = |byte: usize| line[..byte].chars().count() + 1;

    while let Some(&(start, c)) = chars.peek() {
        match c {
            '#' => break,
            c if c.is_whitespace() => {
                chars.next();
            }
            c if c.is_ascii_alphabetic() => {
                let mut end = start;
                while let Some(&(i, c)) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        end = i + c.len_utf8();
                        chars.next();
                    } else {
                        break;
                    }
                }
                toks.push((Tok::Ident(&line[start..end]), col_of(start)));
            }
            c if c.is_ascii_digit() => {
                let mut end = start;
                while let Some(&(i, c)) = chars.peek() {
                    // Letters are swallowed so `1e3` is rejected as one bad weight.
                    if c.is_ascii_alphanumeric() || c == '.' || c == '_' {
                        end = i + 1;
                        chars.next();
                    } else {
                        break;
                    }
                }
                toks.push((Tok::Number(&line[start..end]), col_of(start)));
            }
            ':' | ',' | '@' => {
                chars.next();
                let tok = match c {
                    ':' => Tok::Colon,
                    ',' => Tok::Comma,
                    _ => Tok::At,
                };
                toks.push((tok, col_of(start)));
            }
            '-' => {
                chars.next();
                match chars.next() {
                    Some((_, '>')) => toks.push((Tok::Arrow, col_of(start))),
                    _ => return Err(ParseError::syntax(line_no, col_of(start), "`->`")),
                }
            }
            other => {
                return Err(ParseError::syntax(
                    line_no,
                    col_of(start),
                    format!("a token, found `{other}`"),
                ))
            }
        }
    }
    Ok(toks)
}

/// Parses a decimal literal `digits[.digits]` with at most nine fraction
/// digits. Exponents and signs are not part of the grammar.
fn parse_weight(text: &str) -> Option<f64> {
    let (int, frac) = match text.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (text, None),
    };
    if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if let Some(f) = frac {
        if f.is_empty() || f.len() > MAX_FRACTION_DIGITS || !f.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
    }
    text.parse().ok()
}

struct Cursor<'t, 'a> {
    toks: &'t [(Tok<'a>, usize)],
    pos: usize,
    line: usize,
    end_col: usize,
}

impl<'t, 'a> Cursor<'t, 'a> {
    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |t| t.1)
    }

    fn peek(&self) -> Option<Tok<'a>> {
        self.toks.get(self.pos).map(|t| t.0)
    }

    fn err(&self, expected: &str) -> ParseError {
        let found = self
            .peek()
            .map_or_else(|| "end of line".to_string(), |t| t.describe());
        ParseError::syntax(self.line, self.col(), format!("{expected}, found {found}"))
    }

    fn ident(&mut self, what: &str) -> Result<(&'a str, usize), ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let col = self.col();
                self.pos += 1;
                Ok((s, col))
            }
            _ => Err(self.err(what)),
        }
    }

    fn expect(&mut self, tok: Tok<'_>, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(what))
        }
    }

    fn finish(&self) -> Result<(), ParseError> {
        if self.pos < self.toks.len() {
            Err(self.err("end of line"))
        } else {
            Ok(())
        }
    }
}

#[derive(Debug)]
struct RuleSite {
    line: usize,
    lhs_col: usize,
}

#[derive(Debug, Default)]
struct Document {
    root: Option<(SymbolId, usize, usize)>,
    goals: BTreeSet<SymbolId>,
    interventions: BTreeSet<SymbolId>,
    declared_at: HashMap<SymbolId, (usize, usize)>,
    rules: Vec<FuzzyRule>,
    sites: Vec<RuleSite>,
    last_line: usize,
}

impl Document {
    /// Best source position for a build error.
    fn locate(&self, err: &ModelError) -> (usize, usize) {
        let root_pos = self.root.as_ref().map_or((1, 1), |r| (r.1, r.2));
        let lhs_site = |sym: &SymbolId| {
            self.rules
                .iter()
                .zip(&self.sites)
                .find(|(r, _)| &r.lhs == sym)
                .map(|(_, s)| (s.line, s.lhs_col))
        };
        match err {
            ModelError::CycleDetected(cycle) => {
                let (from, to) = (&cycle[0], &cycle[1]);
                self.rules
                    .iter()
                    .zip(&self.sites)
                    .find(|(r, _)| &r.lhs == from && r.rhs.contains(to))
                    .map_or(root_pos, |(_, s)| (s.line, s.lhs_col))
            }
            ModelError::KindConflict { symbol, .. } => {
                if self.interventions.contains(symbol) {
                    if let Some(pos) = lhs_site(symbol) {
                        return pos;
                    }
                }
                self.declared_at.get(symbol).copied().unwrap_or(root_pos)
            }
            ModelError::EmptyModel => (self.last_line.max(1), 1),
            _ => root_pos,
        }
    }
}

fn parse_symbol(name: &str, line: usize, col: usize) -> Result<SymbolId, ParseError> {
    SymbolId::new(name).map_err(|e| ParseError::model(line, col, e))
}

/// Parses a `.gotm` document and builds the model. Accepts LF or CRLF line
/// endings.
pub fn parse_model(text: &str) -> Result<TreatmentModel, ParseError> {
    let mut doc = Document::default();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        doc.last_line = line;
        let toks = lex(raw, line)?;
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor {
            toks: &toks,
            pos: 0,
            line,
            end_col: raw.chars().count() + 1,
        };

        let is_rule = matches!(toks.get(1), Some((Tok::Colon, _)));
        match toks[0].0 {
            Tok::Ident(_) if is_rule => parse_rule_line(&mut cur, &mut doc)?,
            Tok::Ident("root") => {
                cur.pos = 1;
                let (name, col) = cur.ident("a root symbol")?;
                cur.finish()?;
                if doc.root.is_some() {
                    return Err(ParseError::syntax(line, 1, "a single `root` statement"));
                }
                doc.root = Some((parse_symbol(name, line, col)?, line, col));
            }
            Tok::Ident(kw @ ("goal" | "intervention")) => {
                cur.pos = 1;
                let mut names = Vec::new();
                loop {
                    let (name, col) = cur.ident("a symbol name")?;
                    names.push((parse_symbol(name, line, col)?, col));
                    match cur.peek() {
                        None => break,
                        Some(Tok::Comma) => cur.pos += 1,
                        Some(Tok::Ident(_)) => {}
                        Some(_) => return Err(cur.err("`,` or a symbol name")),
                    }
                }
                for (sym, col) in names {
                    doc.declared_at.insert(sym.clone(), (line, col));
                    if kw == "goal" {
                        doc.goals.insert(sym);
                    } else {
                        doc.interventions.insert(sym);
                    }
                }
            }
            _ => {
                return Err(
                    cur.err("a statement (`root`, `goal`, `intervention` or `<id>: <lhs> -> ...`)")
                )
            }
        }
    }

    let Some((root, _, _)) = doc.root.clone() else {
        return Err(ParseError::syntax(
            doc.last_line.max(1),
            1,
            "a `root <symbol>` statement",
        ));
    };
    let goals = (!doc.goals.is_empty()).then_some(&doc.goals);
    let interventions = (!doc.interventions.is_empty()).then_some(&doc.interventions);
    build_model(root, doc.rules.clone(), goals, interventions).map_err(|e| {
        let (line, col) = doc.locate(&e);
        ParseError::model(line, col, e)
    })
}

fn parse_rule_line(cur: &mut Cursor<'_, '_>, doc: &mut Document) -> Result<(), ParseError> {
    let line = cur.line;
    let (id, id_col) = cur.ident("a rule id")?;
    cur.expect(Tok::Colon, "`:`")?;
    let (lhs, lhs_col) = cur.ident("a left-hand goal")?;
    cur.expect(Tok::Arrow, "`->`")?;
    let mut rhs = Vec::new();
    while let Some(Tok::Ident(name)) = cur.peek() {
        rhs.push(parse_symbol(name, line, cur.col())?);
        cur.pos += 1;
    }
    if rhs.is_empty() {
        return Err(cur.err("a right-hand symbol"));
    }
    cur.expect(Tok::At, "`@` or a right-hand symbol")?;
    let weight_col = cur.col();
    let weight = match cur.peek() {
        Some(Tok::Number(text)) => parse_weight(text).ok_or_else(|| {
            ParseError::syntax(
                line,
                weight_col,
                format!("a decimal weight with at most {MAX_FRACTION_DIGITS} fraction digits, found `{text}`"),
            )
        })?,
        _ => return Err(cur.err("a decimal weight")),
    };
    cur.pos += 1;
    cur.finish()?;

    let id = RuleId::new(id).map_err(|e| ParseError::model(line, id_col, e))?;
    if doc.rules.iter().any(|r| r.id == id) {
        return Err(ParseError::model(
            line,
            id_col,
            ModelError::DuplicateRuleId(id),
        ));
    }
    if !(0.0..=1.0).contains(&weight) {
        return Err(ParseError::model(
            line,
            weight_col,
            ModelError::MembershipOutOfRange {
                rule: id,
                value: weight,
            },
        ));
    }
    let lhs = parse_symbol(lhs, line, lhs_col)?;
    doc.rules.push(FuzzyRule::new(id, lhs, rhs, weight));
    doc.sites.push(RuleSite { line, lhs_col });
    Ok(())
}
