//! Recursive-descent parser.
//!
//! ```text
//! program := { decl | stmt } ;
//! decl    := "unit" ident ":" dimexpr "scale" rational ["offset" rational]
//!          | "derive" ident "=" ident { ("*"|"/") ident }
//!          | "const" ident ":" ident "=" number
//!          | "var" ident ":" ident ;
//! stmt    := ("check"|"eval"|"assert") expr ;
//! expr    := cmp ;
//! cmp     := sum [("=="|"!="|"<"|"<="|">"|">=") sum] ;
//! sum     := prod { ("+"|"-") prod } ;
//! prod    := pow { ("*"|"/") pow } ;
//! pow     := atom ["^" int] ;
//! atom    := number [ident] | ident | "(" expr ")" | "-" atom ;
//! ```

use std::fmt;

use thiserror::Error;

use super::ast::{BinOp, Decl, Expr, ExprKind, Ident, Item, Program, Stmt, StmtKind};
use super::lexer::{tokenize, LexError, Pos, Token, TokenKind};
use crate::decvalue::{parse_rational, DecValue, Rational};
use crate::dimension::{BaseDimension, Dimension};
use crate::measure::CompareOp;

/// Largest accepted magnitude of a `^` exponent.
pub const MAX_POWER: i32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub pos: Pos,
    pub expected: Vec<String>,
    pub found: String,
    pub message: Option<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(m) = &self.message {
            return f.write_str(m);
        }
        match self.expected.as_slice() {
            [] => write!(f, "unexpected {}", self.found),
            [one] => write!(f, "expected {one}, found {}", self.found),
            many => write!(f, "expected one of {}, found {}", many.join(", "), self.found),
        }
    }
}

/// A program together with the errors recovered from while parsing it.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Parsed {
    pub program: Program,
    pub errors: Vec<ParseError>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SourceError {
    #[error("{0}")]
    Lex(#[from] LexError),
    #[error("{0}")]
    Parse(#[from] ParseError),
}

impl SourceError {
    pub fn pos(&self) -> Pos {
        match self {
            SourceError::Lex(e) => e.pos,
            SourceError::Parse(e) => e.pos,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SourceError::Lex(_) => "LexError",
            SourceError::Parse(_) => "ParseError",
        }
    }
}

/// Parses a token stream, recovering at statement boundaries.
pub fn parse(tokens: &[Token]) -> Parsed {
    let mut p = Parser { tokens, i: 0 };
    let mut parsed = Parsed::default();
    while !p.at(&TokenKind::Eof) {
        let start = p.i;
        match p.item() {
            Ok(item) => parsed.program.items.push(item),
            Err(e) => {
                parsed.errors.push(e);
                p.recover(start);
            }
        }
    }
    parsed
}

/// Tokenizes and parses, failing on the first error.
pub fn parse_source(source: &str) -> Result<Program, SourceError> {
    let tokens = tokenize(source)?;
    let mut parsed = parse(&tokens);
    if parsed.errors.is_empty() {
        Ok(parsed.program)
    } else {
        Err(parsed.errors.swap_remove(0).into())
    }
}

/// Parses a single expression such as `100 gram + 2 pound`.
pub fn parse_expr(source: &str) -> Result<Expr, SourceError> {
    let tokens = tokenize(source)?;
    let mut p = Parser { tokens: &tokens, i: 0 };
    let e = p.expr()?;
    p.expect_end_of_item()?;
    if !p.at(&TokenKind::Eof) {
        return Err(p.unexpected(&["end of input"]).into());
    }
    Ok(e)
}

struct Parser<'a> {
    tokens: &'a [Token],
    i: usize,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    fn peek(&self) -> &'a Token {
        &self.tokens[self.i.min(self.tokens.len() - 1)]
    }

    fn at(&self, kind: &TokenKind) -> bool {
        &self.peek().kind == kind
    }

    fn bump(&mut self) -> &'a Token {
        let t = self.peek();
        if self.i < self.tokens.len() - 1 {
            self.i += 1;
        }
        t
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.at(kind) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        let t = self.peek();
        ParseError {
            pos: t.pos,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.kind.to_string(),
            message: None,
        }
    }

    fn error_at(&self, pos: Pos, message: impl Into<String>) -> ParseError {
        ParseError {
            pos,
            expected: Vec::new(),
            found: self.peek().kind.to_string(),
            message: Some(message.into()),
        }
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<&'a Token> {
        if self.at(&kind) {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&[&kind.to_string()]))
        }
    }

    fn ident(&mut self) -> PResult<Ident> {
        let t = self.peek();
        match &t.kind {
            TokenKind::Ident(name) => {
                self.bump();
                Ok(Ident {
                    name: name.clone(),
                    pos: t.pos,
                })
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    /// Skips to the next token that can start an item, always making
    /// progress past the failed item's first token.
    fn recover(&mut self, start: usize) {
        if self.i == start {
            self.bump();
        }
        while !self.at(&TokenKind::Eof) && !self.peek().kind.starts_item() {
            self.bump();
        }
    }

    fn expect_end_of_item(&self) -> PResult<()> {
        let k = &self.peek().kind;
        if *k == TokenKind::Eof || k.starts_item() {
            Ok(())
        } else {
            Err(self.unexpected(&["operator", "end of statement"]))
        }
    }

    fn item(&mut self) -> PResult<Item> {
        let t = self.peek();
        let item = match t.kind {
            TokenKind::Check | TokenKind::Eval | TokenKind::Assert => {
                self.bump();
                let kind = match t.kind {
                    TokenKind::Check => StmtKind::Check,
                    TokenKind::Eval => StmtKind::Eval,
                    _ => StmtKind::Assert,
                };
                let expr = self.expr()?;
                Item::Stmt(Stmt { kind, expr, pos: t.pos })
            }
            TokenKind::Unit | TokenKind::Derive | TokenKind::Const | TokenKind::Var => Item::Decl(self.decl()?, t.pos),
            _ => {
                return Err(self.unexpected(&[
                    "`unit`", "`derive`", "`const`", "`var`", "`check`", "`eval`", "`assert`",
                ]))
            }
        };
        self.expect_end_of_item()?;
        Ok(item)
    }

    fn decl(&mut self) -> PResult<Decl> {
        match self.bump().kind {
            TokenKind::Unit => {
                let name = self.ident()?;
                self.expect(TokenKind::Colon)?;
                let dimension = self.dimexpr()?;
                self.expect(TokenKind::Scale)?;
                let scale = self.rational()?;
                let offset = if self.eat(&TokenKind::Offset) {
                    Some(self.rational()?)
                } else {
                    None
                };
                Ok(Decl::Unit {
                    name,
                    dimension,
                    scale,
                    offset,
                })
            }
            TokenKind::Derive => {
                let name = self.ident()?;
                self.expect(TokenKind::Assign)?;
                let mut numerator = vec![self.ident()?];
                let mut denominator = Vec::new();
                let mut order = vec![false];
                loop {
                    if self.eat(&TokenKind::Star) {
                        numerator.push(self.ident()?);
                        order.push(false);
                    } else if self.eat(&TokenKind::Slash) {
                        denominator.push(self.ident()?);
                        order.push(true);
                    } else {
                        break;
                    }
                }
                Ok(Decl::Derive {
                    name,
                    numerator,
                    denominator,
                    order,
                })
            }
            TokenKind::Const => {
                let name = self.ident()?;
                self.expect(TokenKind::Colon)?;
                let unit = self.ident()?;
                self.expect(TokenKind::Assign)?;
                let negative = self.eat(&TokenKind::Minus);
                let value = self.number()?;
                Ok(Decl::Const {
                    name,
                    unit,
                    value: if negative { -value } else { value },
                })
            }
            TokenKind::Var => {
                let name = self.ident()?;
                self.expect(TokenKind::Colon)?;
                let unit = self.ident()?;
                Ok(Decl::Var { name, unit })
            }
            _ => unreachable!("decl called on a declaration keyword"),
        }
    }

    fn number(&mut self) -> PResult<DecValue> {
        let t = self.peek();
        match &t.kind {
            TokenKind::Number(text) => {
                self.bump();
                DecValue::parse(text).map_err(|e| self.error_at(t.pos, e.to_string()))
            }
            _ => Err(self.unexpected(&["number"])),
        }
    }

    fn integer(&mut self) -> PResult<i64> {
        let negative = self.eat(&TokenKind::Minus);
        let t = self.peek();
        let TokenKind::Number(text) = &t.kind else {
            return Err(self.unexpected(&["integer"]));
        };
        self.bump();
        let n: i64 = text
            .parse()
            .map_err(|_| self.error_at(t.pos, format!("expected an integer, found `{text}`")))?;
        Ok(if negative { -n } else { n })
    }

    /// `Base ['^' int] { ('*'|'/') Base ['^' int] }`, with `1` for dimensionless.
    fn dimexpr(&mut self) -> PResult<Dimension> {
        let mut result = Dimension::one();
        let mut divide = false;
        loop {
            let t = self.peek();
            let mut term = match &t.kind {
                TokenKind::Number(n) if n == "1" => {
                    self.bump();
                    Dimension::one()
                }
                TokenKind::Ident(name) => {
                    let base: BaseDimension = name
                        .parse()
                        .map_err(|_| self.error_at(t.pos, format!("unknown base dimension `{name}`")))?;
                    self.bump();
                    Dimension::base(base)
                }
                _ => return Err(self.unexpected(&["base dimension"])),
            };
            if self.eat(&TokenKind::Caret) {
                let pos = self.peek().pos;
                let n = self.integer()?;
                term = term
                    .checked_pow(n)
                    .ok_or_else(|| self.error_at(pos, "dimension exponent overflow"))?;
            }
            result = if divide { result / term } else { result * term };
            if self.eat(&TokenKind::Star) {
                divide = false;
            } else if self.eat(&TokenKind::Slash) {
                divide = true;
            } else {
                return Ok(result);
            }
        }
    }

    /// `['-'] number ['/' number]`
    fn rational(&mut self) -> PResult<Rational> {
        let pos = self.peek().pos;
        let mut text = String::new();
        if self.eat(&TokenKind::Minus) {
            text.push('-');
        }
        let TokenKind::Number(n) = &self.peek().kind else {
            return Err(self.unexpected(&["number"]));
        };
        text.push_str(n);
        self.bump();
        if self.eat(&TokenKind::Slash) {
            let TokenKind::Number(d) = &self.peek().kind else {
                return Err(self.unexpected(&["number"]));
            };
            text.push('/');
            text.push_str(d);
            self.bump();
        }
        parse_rational(&text).map_err(|e| self.error_at(pos, format!("bad rational `{text}`: {e}")))
    }

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        let lhs = self.sum()?;
        let op = match self.peek().kind {
            TokenKind::EqEq => CompareOp::Eq,
            TokenKind::NotEq => CompareOp::Neq,
            TokenKind::Lt => CompareOp::Lt,
            TokenKind::Le => CompareOp::Le,
            TokenKind::Gt => CompareOp::Gt,
            TokenKind::Ge => CompareOp::Ge,
            _ => return Ok(lhs),
        };
        let pos = self.bump().pos;
        let rhs = self.sum()?;
        Ok(Expr::new(
            ExprKind::Compare {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            },
            pos,
        ))
    }

    fn sum(&mut self) -> PResult<Expr> {
        let mut lhs = self.prod()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Plus => BinOp::Add,
                TokenKind::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let pos = self.bump().pos;
            let rhs = self.prod()?;
            lhs = Expr::new(
                ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                pos,
            );
        }
    }

    fn prod(&mut self) -> PResult<Expr> {
        let mut lhs = self.pow()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Star => BinOp::Mul,
                TokenKind::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            let pos = self.bump().pos;
            let rhs = self.pow()?;
            lhs = Expr::new(
                ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                pos,
            );
        }
    }

    fn pow(&mut self) -> PResult<Expr> {
        let base = self.atom()?;
        if !self.at(&TokenKind::Caret) {
            return Ok(base);
        }
        let pos = self.bump().pos;
        let n_pos = self.peek().pos;
        let n = self.integer()?;
        if n.unsigned_abs() > MAX_POWER as u64 {
            return Err(self.error_at(n_pos, format!("exponent {n} exceeds the limit of {MAX_POWER}")));
        }
        Ok(Expr::new(
            ExprKind::Pow {
                base: Box::new(base),
                exponent: n as i32,
            },
            pos,
        ))
    }

    fn atom(&mut self) -> PResult<Expr> {
        let t = self.peek();
        match &t.kind {
            TokenKind::Number(_) => {
                let value = self.number()?;
                let unit = match &self.peek().kind {
                    TokenKind::Ident(_) => Some(self.ident()?),
                    _ => None,
                };
                Ok(Expr::new(ExprKind::Literal { value, unit }, t.pos))
            }
            TokenKind::Ident(name) => {
                self.bump();
                Ok(Expr::new(ExprKind::Name(name.clone()), t.pos))
            }
            TokenKind::LParen => {
                self.bump();
                let inner = self.expr()?;
                if matches!(inner.kind, ExprKind::Compare { .. }) {
                    return Err(self.error_at(
                        inner.pos,
                        "comparisons are only allowed at the top level of a statement",
                    ));
                }
                self.expect(TokenKind::RParen)?;
                Ok(inner)
            }
            TokenKind::Minus => {
                self.bump();
                let inner = self.atom()?;
                Ok(Expr::new(ExprKind::Neg(Box::new(inner)), t.pos))
            }
            _ => Err(self.unexpected(&["number", "identifier", "`(`", "`-`"])),
        }
    }
}
