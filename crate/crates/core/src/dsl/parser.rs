//! Tokenizer and precedence-climbing parser.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = ("-" | "+") unary | power ;
//! power   = primary [ "^" unary ] ;          (* right-associative *)
//! primary = number | ident | ident "(" expr { "," expr } ")" | "(" expr ")" ;
//! number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ]
//!         | "." digits [ exponent ] ;
//! ident   = (letter | "_") { letter | digit | "_" } ;
//! ```

use std::fmt;

use super::ast::{is_coordinate_name, BinaryOp, Expr, Func, Var};

const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    Empty,
    UnexpectedChar(char),
    UnexpectedToken { found: String, expected: &'static str },
    UnexpectedEnd { expected: &'static str },
    InvalidNumber(String),
    UnknownIdentifier(String),
    UnknownFunction(String),
    MissingCall(String),
    Arity { func: &'static str, expected: usize, got: usize },
    MomentumNotAllowed(String),
    TooDeep,
}

/// A parse failure located at a byte offset of the input.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ParseErrorKind::*;
        match &self.kind {
            Empty => write!(f, "empty expression"),
            UnexpectedChar(c) => write!(f, "unexpected character {c:?}"),
            UnexpectedToken { found, expected } => {
                write!(f, "expected {expected}, found `{found}`")
            }
            UnexpectedEnd { expected } => write!(f, "unexpected end of input, expected {expected}"),
            InvalidNumber(s) => write!(f, "invalid number literal `{s}`"),
            UnknownIdentifier(s) => write!(f, "unknown identifier `{s}`"),
            UnknownFunction(s) => write!(f, "unknown function `{s}`"),
            MissingCall(s) => write!(f, "function `{s}` must be called with parentheses"),
            Arity {
                func,
                expected,
                got,
            } => write!(f, "`{func}` takes {expected} argument(s), got {got}"),
            MomentumNotAllowed(s) => write!(f, "momentum `{s}` is not allowed here"),
            TooDeep => write!(f, "expression nested too deeply"),
        }?;
        write!(f, " at offset {}", self.offset)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    start: usize,
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(x) => format!("{x:?}"),
        Tok::Ident(s) => s.clone(),
        Tok::Op(c) => c.to_string(),
        Tok::LParen => "(".into(),
        Tok::RParen => ")".into(),
        Tok::Comma => ",".into(),
        Tok::End => "end of input".into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                i += 1;
                Tok::Op(c as char)
            }
            b'(' => {
                i += 1;
                Tok::LParen
            }
            b')' => {
                i += 1;
                Tok::RParen
            }
            b',' => {
                i += 1;
                Tok::Comma
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit = &text[start..i];
                match lit.parse::<f64>() {
                    Ok(x) if x.is_finite() => Tok::Num(x),
                    _ => {
                        return Err(ParseError {
                            kind: ParseErrorKind::InvalidNumber(lit.to_string()),
                            offset: start,
                        })
                    }
                }
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                Tok::Ident(text[start..i].to_string())
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('\u{fffd}');
                return Err(ParseError {
                    kind: ParseErrorKind::UnexpectedChar(ch),
                    offset: start,
                });
            }
        };
        out.push(Token { tok, start });
    }
    out.push(Token {
        tok: Tok::End,
        start: text.trim_end().len(),
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    n: usize,
    allow_p: bool,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, expected: &'static str) -> ParseError {
        let t = self.peek();
        let kind = match t.tok {
            Tok::End => ParseErrorKind::UnexpectedEnd { expected },
            ref other => ParseErrorKind::UnexpectedToken {
                found: describe(other),
                expected,
            },
        };
        ParseError {
            kind,
            offset: t.start,
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(ParseError {
                kind: ParseErrorKind::TooDeep,
                offset: self.peek().start,
            });
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('+') => BinaryOp::Add,
                Tok::Op('-') => BinaryOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('*') => BinaryOp::Mul,
                Tok::Op('/') => BinaryOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let out = match self.peek().tok {
            Tok::Op('-') => {
                self.bump();
                Expr::Neg(Box::new(self.unary()?))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()?
            }
            _ => self.power()?,
        };
        self.depth -= 1;
        Ok(out)
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek().tok == Tok::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::binary(BinaryOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let token = self.peek().clone();
        match token.tok {
            Tok::Num(x) => {
                self.bump();
                Ok(Expr::Const(x))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                if self.peek().tok != Tok::RParen {
                    return Err(self.error_here("`)`"));
                }
                self.bump();
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                if self.peek().tok == Tok::LParen {
                    self.call(name, token.start)
                } else {
                    self.identifier(name, token.start)
                }
            }
            _ => Err(self.error_here("a number, identifier or `(`")),
        }
    }

    fn call(&mut self, name: String, start: usize) -> Result<Expr, ParseError> {
        let func = Func::from_name(&name).ok_or(ParseError {
            kind: ParseErrorKind::UnknownFunction(name.clone()),
            offset: start,
        })?;
        self.bump(); // (
        let mut args = Vec::new();
        if self.peek().tok != Tok::RParen {
            loop {
                args.push(self.expr()?);
                match self.peek().tok {
                    Tok::Comma => {
                        self.bump();
                    }
                    Tok::RParen => break,
                    _ => return Err(self.error_here("`,` or `)`")),
                }
            }
        }
        self.bump(); // )
        if args.len() != func.arity() {
            return Err(ParseError {
                kind: ParseErrorKind::Arity {
                    func: func.name(),
                    expected: func.arity(),
                    got: args.len(),
                },
                offset: start,
            });
        }
        Ok(Expr::Call(func, args))
    }

    fn identifier(&self, name: String, start: usize) -> Result<Expr, ParseError> {
        if Func::from_name(&name).is_some() {
            return Err(ParseError {
                kind: ParseErrorKind::MissingCall(name),
                offset: start,
            });
        }
        if !is_coordinate_name(&name) {
            return Ok(Expr::Param(name));
        }
        let unknown = || ParseError {
            kind: ParseErrorKind::UnknownIdentifier(name.clone()),
            offset: start,
        };
        let var = match name.as_str() {
            "t" => Var::T,
            "s" => Var::S,
            _ => {
                let index: usize = name[1..].parse().map_err(|_| unknown())?;
                if index == 0 || index > self.n {
                    return Err(unknown());
                }
                match name.as_bytes()[0] {
                    b'q' => Var::Q(index - 1),
                    b'v' => Var::V(index - 1),
                    _ => {
                        if !self.allow_p {
                            return Err(ParseError {
                                kind: ParseErrorKind::MomentumNotAllowed(name),
                                offset: start,
                            });
                        }
                        Var::P(index - 1)
                    }
                }
            }
        };
        Ok(Expr::Var(var))
    }
}

/// Parses `text` over coordinates `t, q1..qn, v1..vn, s` (plus `p1..pn`
/// when `allow_p`). Any other identifier is a parameter reference.
pub fn parse(text: &str, n: usize, allow_p: bool) -> Result<Expr, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError {
            kind: ParseErrorKind::Empty,
            offset: 0,
        });
    }
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        n,
        allow_p,
        depth: 0,
    };
    let e = parser.expr()?;
    if parser.peek().tok != Tok::End {
        return Err(parser.error_here("an operator or end of input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_associativity() {
        let e = parse("-x^2", 1, false).unwrap();
        assert_eq!(
            e,
            Expr::Neg(Box::new(Expr::binary(
                BinaryOp::Pow,
                Expr::Param("x".into()),
                Expr::Const(2.0)
            )))
        );
        let e = parse("2^3^2", 1, false).unwrap();
        match e {
            Expr::Binary(BinaryOp::Pow, lhs, rhs) => {
                assert_eq!(*lhs, Expr::Const(2.0));
                assert!(matches!(*rhs, Expr::Binary(BinaryOp::Pow, _, _)));
            }
            other => panic!("unexpected {other:?}"),
        }
        let e = parse("a - b - c", 1, false).unwrap();
        match e {
            Expr::Binary(BinaryOp::Sub, lhs, _) => {
                assert!(matches!(*lhs, Expr::Binary(BinaryOp::Sub, _, _)))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn incomplete_expression_offset() {
        let err = parse("q1 + ", 1, false).unwrap_err();
        assert_eq!(err.offset, 4);
        assert!(matches!(err.kind, ParseErrorKind::UnexpectedEnd { .. }));
    }

    #[test]
    fn arity_is_checked() {
        let err = parse("sin(q1, q2)", 2, false).unwrap_err();
        assert_eq!(
            err.kind,
            ParseErrorKind::Arity {
                func: "sin",
                expected: 1,
                got: 2
            }
        );
        assert!(parse("pow(q1)", 1, false).is_err());
        assert!(parse("pow(q1, 0.5)", 1, false).is_ok());
    }

    #[test]
    fn coordinate_names_are_checked() {
        assert!(matches!(
            parse("q2", 1, false).unwrap_err().kind,
            ParseErrorKind::UnknownIdentifier(_)
        ));
        assert!(matches!(
            parse("v0", 1, false).unwrap_err().kind,
            ParseErrorKind::UnknownIdentifier(_)
        ));
        assert!(matches!(
            parse("p1*v1", 1, false).unwrap_err().kind,
            ParseErrorKind::MomentumNotAllowed(_)
        ));
        assert!(parse("p1*v1", 1, true).is_ok());
        assert!(matches!(
            parse("sin + 1", 1, false).unwrap_err().kind,
            ParseErrorKind::MissingCall(_)
        ));
        assert!(matches!(
            parse("foo(1)", 1, false).unwrap_err().kind,
            ParseErrorKind::UnknownFunction(_)
        ));
    }

    #[test]
    fn numbers() {
        assert_eq!(parse("1.5e-3", 1, false).unwrap(), Expr::Const(1.5e-3));
        assert_eq!(parse(".5", 1, false).unwrap(), Expr::Const(0.5));
        assert!(parse("1.2.3", 1, false).is_err());
        assert!(parse("1e999", 1, false).is_err());
    }

    #[test]
    fn junk_is_rejected() {
        assert!(parse("", 1, false).is_err());
        assert!(parse("   ", 1, false).is_err());
        assert!(parse("(q1", 1, false).is_err());
        assert!(parse("q1)", 1, false).is_err());
        assert!(parse("q1 $ 2", 1, false).is_err());
        assert!(parse(&"(".repeat(500), 1, false).is_err());
    }
}
