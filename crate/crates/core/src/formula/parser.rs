//! Recursive-descent parser for the formula text syntax.
//!
//! ```text
//! formula   := junction
//! junction  := implies ( "&&" weights? implies )*
//!            | implies ( "||" weights? implies )*
//! implies   := until ( "->" until )?
//! until     := unary ( ("U" | "T") unary )*          left-associative
//! unary     := ("!" | "F" | "G") unary | atom
//! atom      := "(" formula ")" | "true" | predicate
//! predicate := name ( "(" arg ("," arg)* ")" )? ( ("<" | ">") number )?
//! weights   := "{" weight ("," weight)* "}"          one per operand
//! weight    := positive-number | name                names come from a weight table
//! ```
//!
//! `&&` and `||` may not be mixed at one level without parentheses.

use std::collections::HashMap;

use super::ast::{Arg, Formula, Predicate};
use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Bang,
    AndAnd,
    OrOr,
    Arrow,
    Lt,
    Gt,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(x) => format!("number {x}"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Bang => "`!`".into(),
            Tok::AndAnd => "`&&`".into(),
            Tok::OrOr => "`||`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let simple = |tok: Tok| Spanned {
            tok,
            line: start_line,
            column: start_col,
        };
        let two = chars.get(i + 1).copied();
        let starts_number = c.is_ascii_digit()
            || (c == '.' && two.is_some_and(|d| d.is_ascii_digit()))
            || (c == '-' && two.is_some_and(|d| d.is_ascii_digit() || d == '.'));
        if starts_number {
            let mut j = i + 1;
            while j < chars.len() {
                let d = chars[j];
                let exp_sign = (d == '-' || d == '+') && matches!(chars[j - 1], 'e' | 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    j += 1;
                } else {
                    break;
                }
            }
            let lexeme: String = chars[i..j].iter().collect();
            let value = lexeme.parse::<f64>().map_err(|_| ParseError::Syntax {
                line: start_line,
                column: start_col,
                expected: vec!["number".into()],
                found: format!("`{lexeme}`"),
            })?;
            out.push(simple(Tok::Number(value)));
            col += j - i;
            i = j;
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let mut j = i + 1;
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            out.push(simple(Tok::Ident(chars[i..j].iter().collect())));
            col += j - i;
            i = j;
            continue;
        }
        let (tok, width) = match (c, two) {
            ('&', Some('&')) => (Tok::AndAnd, 2),
            ('|', Some('|')) => (Tok::OrOr, 2),
            ('-', Some('>')) => (Tok::Arrow, 2),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            ('{', _) => (Tok::LBrace, 1),
            ('}', _) => (Tok::RBrace, 1),
            (',', _) => (Tok::Comma, 1),
            ('!', _) => (Tok::Bang, 1),
            ('<', _) => (Tok::Lt, 1),
            ('>', _) => (Tok::Gt, 1),
            _ => {
                return Err(ParseError::Syntax {
                    line: start_line,
                    column: start_col,
                    expected: vec!["formula token".into()],
                    found: format!("`{c}`"),
                })
            }
        };
        out.push(simple(tok));
        i += width;
        col += width;
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

const KEYWORDS: [&str; 5] = ["F", "G", "U", "T", "true"];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Junction {
    And,
    Or,
}

struct Parser<'w> {
    toks: Vec<Spanned>,
    pos: usize,
    weight_table: &'w HashMap<String, f64>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let s = &self.toks[self.pos];
        ParseError::Syntax {
            line: s.line,
            column: s.column,
            expected: expected.iter().map(|e| e.to_string()).collect(),
            found: s.tok.describe(),
        }
    }

    fn expect(&mut self, tok: Tok, label: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[label]))
        }
    }

    fn is_ident(&self, name: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == name)
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let first = self.implies()?;
        let kind = match self.peek() {
            Tok::AndAnd => Junction::And,
            Tok::OrOr => Junction::Or,
            _ => return Ok(first),
        };
        let mut children = vec![first];
        let mut weights: Option<Vec<f64>> = None;
        loop {
            let op = match (self.peek(), kind) {
                (Tok::AndAnd, Junction::And) | (Tok::OrOr, Junction::Or) => self.bump(),
                (Tok::AndAnd, Junction::Or) | (Tok::OrOr, Junction::And) => {
                    let mut e = self.error(&[if kind == Junction::And { "`&&`" } else { "`||`" }, "`)`"]);
                    if let ParseError::Syntax { found, .. } = &mut e {
                        found.push_str(" (mixing && and || needs parentheses)");
                    }
                    return Err(e);
                }
                _ => break,
            };
            if *self.peek() == Tok::LBrace {
                if weights.is_some() {
                    return Err(ParseError::Syntax {
                        line: op.line,
                        column: op.column,
                        expected: vec!["operand".into()],
                        found: "a second weight list on the same connective".into(),
                    });
                }
                weights = Some(self.weights()?);
            }
            children.push(self.implies()?);
        }
        match kind {
            Junction::And => Formula::and(children, weights),
            Junction::Or => Formula::or(children, weights),
        }
    }

    fn weights(&mut self) -> Result<Vec<f64>, ParseError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut out = Vec::new();
        loop {
            let value = match self.peek().clone() {
                Tok::Number(x) => {
                    self.bump();
                    x
                }
                Tok::Ident(name) => {
                    let v = *self
                        .weight_table
                        .get(&name)
                        .ok_or_else(|| ParseError::UnknownWeight { name: name.clone() })?;
                    self.bump();
                    v
                }
                _ => return Err(self.error(&["positive number", "weight name"])),
            };
            if !(value.is_finite() && value > 0.0) {
                return Err(ParseError::NonPositiveWeight { value });
            }
            out.push(value);
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                Tok::RBrace => {
                    self.bump();
                    return Ok(out);
                }
                _ => return Err(self.error(&["`,`", "`}`"])),
            }
        }
    }

    fn implies(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.until()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.until()?;
            if *self.peek() == Tok::Arrow {
                return Err(self.error(&["`&&`", "`||`", "`)`", "end of input"]));
            }
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.is_ident("U") {
                self.bump();
                lhs = Formula::until(lhs, self.unary()?);
            } else if self.is_ident("T") {
                self.bump();
                lhs = Formula::then(lhs, self.unary()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Tok::Bang => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::Ident(s) if s == "F" => {
                self.bump();
                Ok(Formula::eventually(self.unary()?))
            }
            Tok::Ident(s) if s == "G" => {
                self.bump();
                Ok(Formula::always(self.unary()?))
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Formula, ParseError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let f = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(s) if s == "true" => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                self.predicate(s)
            }
            _ => Err(self.error(&["`(`", "`!`", "`F`", "`G`", "`true`", "predicate"])),
        }
    }

    fn predicate(&mut self, name: String) -> Result<Formula, ParseError> {
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.bump();
            loop {
                match self.peek().clone() {
                    Tok::Number(x) => args.push(Arg::Number(x)),
                    Tok::Ident(s) => args.push(Arg::Name(s)),
                    _ => return Err(self.error(&["number", "name"])),
                }
                self.bump();
                match self.peek() {
                    Tok::Comma => {
                        self.bump();
                    }
                    Tok::RParen => {
                        self.bump();
                        break;
                    }
                    _ => return Err(self.error(&["`,`", "`)`"])),
                }
            }
        }
        let mut p = Predicate::new(name, args);
        let cmp = match self.peek() {
            Tok::Lt => Some(true),
            Tok::Gt => Some(false),
            _ => None,
        };
        if let Some(less) = cmp {
            self.bump();
            let Tok::Number(c) = *self.peek() else {
                return Err(self.error(&["number"]));
            };
            self.bump();
            p = if less { p.less_than(c) } else { p.greater_than(c) };
        }
        Ok(Formula::Predicate(p))
    }
}

/// Parses a formula. Weight lists must be numeric.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    parse_with_weights(text, &HashMap::new())
}

/// Parses a formula whose weight lists may name entries of `weights`
/// (for instance `in(A) ||{w_A, w_B} in(B)`).
pub fn parse_with_weights(text: &str, weights: &HashMap<String, f64>) -> Result<Formula, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        weight_table: weights,
    };
    let f = p.formula()?;
    if *p.peek() != Tok::Eof {
        return Err(p.error(&["`&&`", "`||`", "`->`", "`U`", "`T`", "end of input"]));
    }
    Ok(f)
}
