use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

use super::{BinaryOp, Expr, Func};

/// Why an expression failed to parse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedEnd,
    UnexpectedToken(String),
    InvalidNumber(String),
    /// `x0`, or `xN` with N above the model dimension.
    UnknownVariable { name: String, dim: usize },
    UnknownFunction(String),
    UnknownIdentifier(String),
    /// Every function takes exactly one argument.
    Arity { func: String, found: usize },
}

/// Parse failure with the byte offset into the input where it was detected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::UnexpectedChar(c) => {
                write!(f, "unexpected character '{c}' at offset {}", self.offset)
            }
            ParseErrorKind::UnexpectedEnd => write!(f, "unexpected end of input at offset {}", self.offset),
            ParseErrorKind::UnexpectedToken(t) => {
                write!(f, "unexpected '{t}' at offset {}", self.offset)
            }
            ParseErrorKind::InvalidNumber(t) => write!(f, "invalid number '{t}' at offset {}", self.offset),
            ParseErrorKind::UnknownVariable { name, dim } => write!(
                f,
                "unknown variable '{name}' at offset {} (dimension is {dim}, variables are x1..x{dim})",
                self.offset
            ),
            ParseErrorKind::UnknownFunction(name) => {
                write!(f, "unknown function '{name}' at offset {}", self.offset)
            }
            ParseErrorKind::UnknownIdentifier(name) => {
                write!(f, "unknown identifier '{name}' at offset {}", self.offset)
            }
            ParseErrorKind::Arity { func, found } => write!(
                f,
                "function '{func}' takes 1 argument, found {found} at offset {}",
                self.offset
            ),
        }
    }
}

impl core::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Token<'a> {
    Number(f64),
    Ident(&'a str),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    /// Returns the next token and its starting offset.
    fn next(&mut self) -> Result<(Token<'a>, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let Some(&b) = bytes.get(start) else {
            return Ok((Token::End, start));
        };
        let tok = match b {
            b'0'..=b'9' | b'.' => {
                let mut end = start;
                while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                    end += 1;
                }
                if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                    let mut e = end + 1;
                    if e < bytes.len() && (bytes[e] == b'+' || bytes[e] == b'-') {
                        e += 1;
                    }
                    if e < bytes.len() && bytes[e].is_ascii_digit() {
                        while e < bytes.len() && bytes[e].is_ascii_digit() {
                            e += 1;
                        }
                        end = e;
                    }
                }
                let text = &self.src[start..end];
                self.pos = end;
                let value = text.parse::<f64>().map_err(|_| ParseError {
                    offset: start,
                    kind: ParseErrorKind::InvalidNumber(text.into()),
                })?;
                Token::Number(value)
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let mut end = start;
                while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                    end += 1;
                }
                self.pos = end;
                Token::Ident(&self.src[start..end])
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                self.pos += 1;
                Token::Op(b as char)
            }
            b'(' => {
                self.pos += 1;
                Token::LParen
            }
            b')' => {
                self.pos += 1;
                Token::RParen
            }
            b',' => {
                self.pos += 1;
                Token::Comma
            }
            _ => {
                let c = self.src[start..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    offset: start,
                    kind: ParseErrorKind::UnexpectedChar(c),
                });
            }
        };
        Ok((tok, start))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Token<'a>,
    offset: usize,
    dim: usize,
}

/// Parses `text` as an expression over the variables `x1..x{dim}`.
///
/// ```
/// use yauyau_core::expr::{parse, BinaryOp, Expr};
/// let e = parse("x1^3", 1).unwrap();
/// assert_eq!(e, Expr::binary(BinaryOp::Pow, Expr::var(1), Expr::Const(3.0)));
/// ```
pub fn parse(text: &str, dim: usize) -> Result<Expr, ParseError> {
    let mut lexer = Lexer { src: text, pos: 0 };
    let (tok, offset) = lexer.next()?;
    let mut p = Parser {
        lexer,
        tok,
        offset,
        dim,
    };
    let expr = p.expr()?;
    match p.tok {
        Token::End => Ok(expr),
        _ => Err(p.unexpected()),
    }
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), ParseError> {
        let (tok, offset) = self.lexer.next()?;
        self.tok = tok;
        self.offset = offset;
        Ok(())
    }

    fn unexpected(&self) -> ParseError {
        let kind = match &self.tok {
            Token::End => ParseErrorKind::UnexpectedEnd,
            Token::Number(v) => ParseErrorKind::UnexpectedToken(alloc::format!("{v}")),
            Token::Ident(s) => ParseErrorKind::UnexpectedToken((*s).into()),
            Token::Op(c) => ParseErrorKind::UnexpectedToken(alloc::format!("{c}")),
            Token::LParen => ParseErrorKind::UnexpectedToken("(".into()),
            Token::RParen => ParseErrorKind::UnexpectedToken(")".into()),
            Token::Comma => ParseErrorKind::UnexpectedToken(",".into()),
        };
        ParseError {
            offset: self.offset,
            kind,
        }
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Token::Op('+') => BinaryOp::Add,
                Token::Op('-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    // term := unary (('*' | '/') unary)*
    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Token::Op('*') => BinaryOp::Mul,
                Token::Op('/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    // unary := '-' unary | power
    // A minus directly in front of a numeric literal (and not followed by
    // `^`) produces a negative constant.
    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.tok == Token::Op('-') {
            self.bump()?;
            let literal = matches!(self.tok, Token::Number(_));
            let operand = self.unary()?;
            return Ok(match operand {
                Expr::Const(c) if literal => Expr::Const(-c),
                other => Expr::Neg(Box::new(other)),
            });
        }
        self.power()
    }

    // power := primary ('^' unary)?
    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.tok == Token::Op('^') {
            self.bump()?;
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset;
        match self.tok.clone() {
            Token::Number(v) => {
                self.bump()?;
                Ok(Expr::Const(v))
            }
            Token::LParen => {
                self.bump()?;
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Token::Ident(name) => {
                self.bump()?;
                if self.tok == Token::LParen {
                    let func = Func::from_name(name).ok_or_else(|| ParseError {
                        offset,
                        kind: ParseErrorKind::UnknownFunction(name.into()),
                    })?;
                    self.call(func, offset)
                } else {
                    self.variable(name, offset)
                }
            }
            _ => Err(self.unexpected()),
        }
    }

    fn call(&mut self, func: Func, offset: usize) -> Result<Expr, ParseError> {
        self.bump()?;
        if self.tok == Token::RParen {
            return Err(ParseError {
                offset,
                kind: ParseErrorKind::Arity {
                    func: func.name().into(),
                    found: 0,
                },
            });
        }
        let arg = self.expr()?;
        let mut extra = 0;
        while self.tok == Token::Comma {
            self.bump()?;
            self.expr()?;
            extra += 1;
        }
        if extra > 0 {
            return Err(ParseError {
                offset,
                kind: ParseErrorKind::Arity {
                    func: func.name().into(),
                    found: 1 + extra,
                },
            });
        }
        self.expect_rparen()?;
        Ok(Expr::Call(func, Box::new(arg)))
    }

    fn variable(&self, name: &str, offset: usize) -> Result<Expr, ParseError> {
        let digits = name.strip_prefix('x').filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()));
        let Some(digits) = digits else {
            let kind = if Func::from_name(name).is_some() {
                ParseErrorKind::Arity {
                    func: name.into(),
                    found: 0,
                }
            } else {
                ParseErrorKind::UnknownIdentifier(name.into())
            };
            return Err(ParseError { offset, kind });
        };
        match digits.parse::<usize>() {
            Ok(index) if index >= 1 && index <= self.dim => Ok(Expr::Var(index - 1)),
            _ => Err(ParseError {
                offset,
                kind: ParseErrorKind::UnknownVariable {
                    name: name.into(),
                    dim: self.dim,
                },
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if self.tok == Token::RParen {
            self.bump()
        } else {
            Err(self.unexpected())
        }
    }
}
