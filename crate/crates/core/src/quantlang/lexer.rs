use std::fmt;

use thiserror::Error;

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Number(String),
    Ident(String),
    Unit,
    Derive,
    Const,
    Var,
    Check,
    Eval,
    Assert,
    Scale,
    Offset,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Colon,
    Assign,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

impl TokenKind {
    fn keyword(word: &str) -> Option<TokenKind> {
        Some(match word {
            "unit" => TokenKind::Unit,
            "derive" => TokenKind::Derive,
            "const" => TokenKind::Const,
            "var" => TokenKind::Var,
            "check" => TokenKind::Check,
            "eval" => TokenKind::Eval,
            "assert" => TokenKind::Assert,
            "scale" => TokenKind::Scale,
            "offset" => TokenKind::Offset,
            _ => return None,
        })
    }

    /// Whether this token can start a declaration or statement.
    pub fn starts_item(&self) -> bool {
        matches!(
            self,
            TokenKind::Unit
                | TokenKind::Derive
                | TokenKind::Const
                | TokenKind::Var
                | TokenKind::Check
                | TokenKind::Eval
                | TokenKind::Assert
        )
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TokenKind::Number(n) => return write!(f, "number `{n}`"),
            TokenKind::Ident(i) => return write!(f, "identifier `{i}`"),
            TokenKind::Unit => "`unit`",
            TokenKind::Derive => "`derive`",
            TokenKind::Const => "`const`",
            TokenKind::Var => "`var`",
            TokenKind::Check => "`check`",
            TokenKind::Eval => "`eval`",
            TokenKind::Assert => "`assert`",
            TokenKind::Scale => "`scale`",
            TokenKind::Offset => "`offset`",
            TokenKind::Plus => "`+`",
            TokenKind::Minus => "`-`",
            TokenKind::Star => "`*`",
            TokenKind::Slash => "`/`",
            TokenKind::Caret => "`^`",
            TokenKind::LParen => "`(`",
            TokenKind::RParen => "`)`",
            TokenKind::Colon => "`:`",
            TokenKind::Assign => "`=`",
            TokenKind::EqEq => "`==`",
            TokenKind::NotEq => "`!=`",
            TokenKind::Lt => "`<`",
            TokenKind::Le => "`<=`",
            TokenKind::Gt => "`>`",
            TokenKind::Ge => "`>=`",
            TokenKind::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct LexError {
    pub pos: Pos,
    pub message: String,
}

/// Splits source text into tokens. `#` starts a comment running to the end
/// of the line. The returned sequence always ends with [`TokenKind::Eof`].
pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
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
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let kind = if c.is_ascii_digit() {
            lex_number(&chars, &mut i).map_err(|message| LexError { pos, message })?
        } else if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            TokenKind::keyword(&word).unwrap_or(TokenKind::Ident(word))
        } else {
            let next = chars.get(i + 1).copied();
            let (kind, len) = match (c, next) {
                ('=', Some('=')) => (TokenKind::EqEq, 2),
                ('!', Some('=')) => (TokenKind::NotEq, 2),
                ('<', Some('=')) => (TokenKind::Le, 2),
                ('>', Some('=')) => (TokenKind::Ge, 2),
                ('=', _) => (TokenKind::Assign, 1),
                ('<', _) => (TokenKind::Lt, 1),
                ('>', _) => (TokenKind::Gt, 1),
                ('+', _) => (TokenKind::Plus, 1),
                ('-', _) => (TokenKind::Minus, 1),
                ('*', _) => (TokenKind::Star, 1),
                ('/', _) => (TokenKind::Slash, 1),
                ('^', _) => (TokenKind::Caret, 1),
                ('(', _) => (TokenKind::LParen, 1),
                (')', _) => (TokenKind::RParen, 1),
                (':', _) => (TokenKind::Colon, 1),
                _ => {
                    return Err(LexError {
                        pos,
                        message: format!("illegal character `{c}`"),
                    })
                }
            };
            i += len;
            kind
        };
        col += i - start;
        tokens.push(Token { kind, pos });
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        pos: Pos { line, col },
    });
    Ok(tokens)
}

/// `digits ['.' digits] [('e'|'E') ['-'] digits]`
fn lex_number(chars: &[char], i: &mut usize) -> Result<TokenKind, String> {
    let start = *i;
    let digits = |i: &mut usize| {
        let s = *i;
        while *i < chars.len() && chars[*i].is_ascii_digit() {
            *i += 1;
        }
        *i > s
    };
    digits(i);
    if *i < chars.len() && chars[*i] == '.' {
        *i += 1;
        if !digits(i) {
            return Err("malformed number: expected digits after `.`".into());
        }
    }
    if *i < chars.len() && (chars[*i] == 'e' || chars[*i] == 'E') {
        let next = chars.get(*i + 1).copied();
        let after = chars.get(*i + 2).copied();
        let exponent_follows = match next {
            Some(d) if d.is_ascii_digit() => true,
            Some('-') => after.is_some_and(|d| d.is_ascii_digit()),
            _ => false,
        };
        if !exponent_follows {
            return Err("malformed number: expected exponent digits".into());
        }
        *i += 1;
        if chars[*i] == '-' {
            *i += 1;
        }
        digits(i);
    }
    if *i < chars.len() && (chars[*i].is_ascii_digit() || chars[*i] == '.') {
        return Err("malformed number".into());
    }
    Ok(TokenKind::Number(chars[start..*i].iter().collect()))
}
