use std::collections::HashSet;
use std::fmt;

use super::{is_identifier, CryptoOp, Protocol, ProtocolError, ProtocolStep};
use crate::category::{Category, Mode};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
    #[error("expected {expected}, found {found}")]
    Syntax { expected: &'static str, found: String },
    #[error("unknown operation `{0}` (expected senc, sdec, hash, aenc or adec)")]
    UnknownOp(String),
    #[error("unknown attribute `{0}` (expected size, alg, mode or key)")]
    UnknownAttribute(String),
    #[error("attribute `{attr}` is not allowed on {op}")]
    AttributeOnWrongCategory { attr: &'static str, op: &'static str },
    #[error("attribute `{0}` given twice")]
    DuplicateAttribute(&'static str),
    #[error("{op} needs a `size` attribute")]
    MissingSize { op: &'static str },
    #[error("size must be positive, got {0}")]
    NonPositiveSize(i128),
    #[error("key must be positive, got {0}")]
    NonPositiveKey(i128),
    #[error("{attr} value {value} is out of range")]
    OutOfRange { attr: &'static str, value: i128 },
    #[error("unknown mode `{0}` (expected ecb, cbc, cfb, ofb or ctr)")]
    UnknownMode(String),
    #[error("duplicate protocol id `{0}`")]
    DuplicateId(String),
    #[error(transparent)]
    Invalid(#[from] ProtocolError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Int(i128),
    Arrow,
    Colon,
    Semi,
    Comma,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Eq,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let mut push = |tok: Tok| out.push(Token { tok, line: start_line, col: start_col });
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
        let single = match c {
            ':' => Some(Tok::Colon),
            ';' => Some(Tok::Semi),
            ',' => Some(Tok::Comma),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '=' => Some(Tok::Eq),
            _ => None,
        };
        if let Some(tok) = single {
            push(tok);
            i += 1;
            col += 1;
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'>') {
            push(Tok::Arrow);
            i += 2;
            col += 2;
            continue;
        }
        let negative = c == '-' && chars.get(i + 1).is_some_and(char::is_ascii_digit);
        if negative || c.is_ascii_alphanumeric() || c == '_' {
            let start = i;
            i += 1;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            let digits = word.strip_prefix('-').unwrap_or(&word);
            if digits.bytes().all(|b| b.is_ascii_digit()) {
                // Overlong literals saturate and then fail the range check.
                push(Tok::Int(word.parse().unwrap_or(if negative { i128::MIN } else { i128::MAX })));
            } else if negative {
                return Err(ParseError { line: start_line, col: start_col, kind: ParseErrorKind::UnexpectedChar('-') });
            } else {
                push(Tok::Word(word));
            }
            continue;
        }
        return Err(ParseError { line, col, kind: ParseErrorKind::UnexpectedChar(c) });
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].tok
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err_at(t: &Token, kind: ParseErrorKind) -> ParseError {
        ParseError { line: t.line, col: t.col, kind }
    }

    fn syntax(t: &Token, expected: &'static str) -> ParseError {
        Self::err_at(t, ParseErrorKind::Syntax { expected, found: t.tok.to_string() })
    }

    fn expect(&mut self, tok: Tok, expected: &'static str) -> Result<Token, ParseError> {
        let t = self.next();
        if t.tok == tok {
            Ok(t)
        } else {
            Err(Self::syntax(&t, expected))
        }
    }

    fn ident(&mut self, expected: &'static str) -> Result<(String, Token), ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Word(w) if is_identifier(w) => Ok((w.clone(), t.clone())),
            _ => Err(Self::syntax(&t, expected)),
        }
    }

    fn protocol(&mut self) -> Result<(Protocol, Token), ParseError> {
        let kw = self.next();
        if kw.tok != Tok::Word("protocol".into()) {
            return Err(Self::syntax(&kw, "`protocol`"));
        }
        let (id, id_tok) = self.ident("protocol id")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut steps = Vec::new();
        loop {
            if self.peek().tok == Tok::RBrace && !steps.is_empty() {
                self.next();
                break;
            }
            steps.push(self.step()?);
        }
        Ok((Protocol { id, steps }, id_tok))
    }

    fn step(&mut self) -> Result<ProtocolStep, ParseError> {
        let (sender, sender_tok) = self.ident("step sender")?;
        self.expect(Tok::Arrow, "`->`")?;
        let (receiver, _) = self.ident("step receiver")?;
        self.expect(Tok::Colon, "`:`")?;
        if sender == receiver {
            return Err(Self::err_at(&sender_tok, ProtocolError::SameEndpoints(sender).into()));
        }
        let mut ops = vec![self.op()?];
        loop {
            let op_follows = matches!(self.peek2(), Tok::LParen);
            match self.peek().tok {
                Tok::Semi => {
                    self.next();
                    // A trailing `;` before the next step or `}` is tolerated.
                    if matches!(self.peek().tok, Tok::Word(_)) && matches!(self.peek2(), Tok::LParen) {
                        ops.push(self.op()?);
                    } else {
                        break;
                    }
                }
                Tok::Word(_) if op_follows => return Err(Self::syntax(self.peek(), "`;` between operations")),
                _ => break,
            }
        }
        Ok(ProtocolStep { sender, receiver, ops })
    }

    fn op(&mut self) -> Result<CryptoOp, ParseError> {
        let kind_tok = self.next();
        let Tok::Word(kind) = &kind_tok.tok else {
            return Err(Self::syntax(&kind_tok, "operation"));
        };
        let category = Category::from_keyword(kind)
            .ok_or_else(|| Self::err_at(&kind_tok, ParseErrorKind::UnknownOp(kind.clone())))?;
        let op_name = category.keyword();
        self.expect(Tok::LParen, "`(`")?;
        let mut op = CryptoOp::new(category, 0);
        let mut seen: Vec<&'static str> = Vec::new();
        let mut size_seen = false;
        loop {
            let name_tok = self.next();
            let attr: &'static str = match &name_tok.tok {
                Tok::Word(w) => match w.as_str() {
                    "size" => "size",
                    "key" => "key",
                    "alg" => "alg",
                    "mode" => "mode",
                    other => return Err(Self::err_at(&name_tok, ParseErrorKind::UnknownAttribute(other.into()))),
                },
                _ => return Err(Self::syntax(&name_tok, "attribute name")),
            };
            if seen.contains(&attr) {
                return Err(Self::err_at(&name_tok, ParseErrorKind::DuplicateAttribute(attr)));
            }
            seen.push(attr);
            let wrong = match attr {
                "mode" => !category.is_symmetric(),
                "key" => category == Category::Hash,
                _ => false,
            };
            if wrong {
                return Err(Self::err_at(&name_tok, ParseErrorKind::AttributeOnWrongCategory { attr, op: op_name }));
            }
            self.expect(Tok::Eq, "`=`")?;
            let value_tok = self.next();
            match (attr, &value_tok.tok) {
                ("size", Tok::Int(n)) => {
                    if *n <= 0 {
                        return Err(Self::err_at(&value_tok, ParseErrorKind::NonPositiveSize(*n)));
                    }
                    op.payload_bytes = u64::try_from(*n)
                        .map_err(|_| Self::err_at(&value_tok, ParseErrorKind::OutOfRange { attr, value: *n }))?;
                    size_seen = true;
                }
                ("key", Tok::Int(n)) => {
                    if *n <= 0 {
                        return Err(Self::err_at(&value_tok, ParseErrorKind::NonPositiveKey(*n)));
                    }
                    op.key_bits = u32::try_from(*n)
                        .map_err(|_| Self::err_at(&value_tok, ParseErrorKind::OutOfRange { attr, value: *n }))?;
                }
                ("alg", Tok::Word(w)) => op.algorithm = w.to_ascii_lowercase(),
                ("mode", Tok::Word(w)) => {
                    let mode: Mode =
                        w.parse().map_err(|_| Self::err_at(&value_tok, ParseErrorKind::UnknownMode(w.clone())))?;
                    op.mode = Some(mode);
                }
                ("size" | "key", _) => return Err(Self::syntax(&value_tok, "integer")),
                _ => return Err(Self::syntax(&value_tok, "identifier")),
            }
            let sep = self.next();
            match sep.tok {
                Tok::Comma => continue,
                Tok::RParen => break,
                _ => return Err(Self::syntax(&sep, "`,` or `)`")),
            }
        }
        if !size_seen {
            return Err(Self::err_at(&kind_tok, ParseErrorKind::MissingSize { op: op_name }));
        }
        op.validate().map_err(|e| Self::err_at(&kind_tok, e.into()))?;
        Ok(op)
    }
}

/// Parses exactly one `protocol` block.
pub fn parse_protocol(text: &str) -> Result<Protocol, ParseError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let (proto, _) = p.protocol()?;
    let t = p.next();
    if t.tok != Tok::Eof {
        return Err(Parser::syntax(&t, "end of input"));
    }
    Ok(proto)
}

/// Parses concatenated `protocol` blocks; ids must be unique.
pub fn parse_corpus(text: &str) -> Result<Vec<Protocol>, ParseError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    while p.peek().tok != Tok::Eof {
        let (proto, id_tok) = p.protocol()?;
        if !ids.insert(proto.id.clone()) {
            return Err(Parser::err_at(&id_tok, ParseErrorKind::DuplicateId(proto.id)));
        }
        out.push(proto);
    }
    Ok(out)
}
