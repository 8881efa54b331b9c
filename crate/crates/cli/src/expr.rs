//! Recursive-descent parser for complex-valued symbol expressions.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := atom ('^' integer)?
//! atom   := number | 'x' | 'theta' | 'i' | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | exp | abs | sqrt | re | im
//! ```
//!
//! Positions are 0-based character offsets into the source text.

use std::fmt;
use std::sync::Arc;

use glt_core::SymbolFunction;
use num_complex::Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Sqrt,
    Re,
    Im,
}

impl Func {
    const ALL: [(&'static str, Func); 7] = [
        ("sin", Func::Sin),
        ("cos", Func::Cos),
        ("exp", Func::Exp),
        ("abs", Func::Abs),
        ("sqrt", Func::Sqrt),
        ("re", Func::Re),
        ("im", Func::Im),
    ];

    fn lookup(name: &str) -> Option<Func> {
        Self::ALL.iter().find(|(n, _)| *n == name).map(|(_, f)| *f)
    }

    fn name(self) -> &'static str {
        Self::ALL
            .iter()
            .find(|(_, f)| *f == self)
            .map(|(n, _)| *n)
            .expect("listed")
    }

    fn apply(self, z: Complex64) -> Complex64 {
        match self {
            Func::Sin => z.sin(),
            Func::Cos => z.cos(),
            Func::Exp => z.exp(),
            Func::Abs => Complex64::new(z.norm(), 0.0),
            Func::Sqrt => z.sqrt(),
            Func::Re => Complex64::new(z.re, 0.0),
            Func::Im => Complex64::new(z.im, 0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Number(f64),
    X,
    Theta,
    I,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, x: f64, theta: f64) -> Complex64 {
        match self {
            Expr::Number(v) => Complex64::new(*v, 0.0),
            Expr::X => Complex64::new(x, 0.0),
            Expr::Theta => Complex64::new(theta, 0.0),
            Expr::I => Complex64::new(0.0, 1.0),
            Expr::Add(a, b) => a.eval(x, theta) + b.eval(x, theta),
            Expr::Sub(a, b) => a.eval(x, theta) - b.eval(x, theta),
            Expr::Mul(a, b) => a.eval(x, theta) * b.eval(x, theta),
            Expr::Div(a, b) => a.eval(x, theta) / b.eval(x, theta),
            Expr::Pow(a, k) => a.eval(x, theta).powi(*k),
            Expr::Call(f, a) => f.apply(a.eval(x, theta)),
        }
    }

    fn any(&self, pred: &dyn Fn(&Expr) -> bool) -> bool {
        pred(self)
            || match self {
                Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                    a.any(pred) || b.any(pred)
                }
                Expr::Pow(a, _) | Expr::Call(_, a) => a.any(pred),
                _ => false,
            }
    }

    pub fn uses_x(&self) -> bool {
        self.any(&|e| matches!(e, Expr::X))
    }

    pub fn uses_theta(&self) -> bool {
        self.any(&|e| matches!(e, Expr::Theta))
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at column {position}: expected {}, found {found}", .expected.join(" | "))]
    Syntax {
        position: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unknown identifier '{name}' at column {position}")]
    UnknownIdentifier { position: usize, name: String },
    #[error("function '{name}' at column {position} takes 1 argument, got {got}")]
    Arity {
        position: usize,
        name: String,
        got: usize,
    },
    #[error("'{variable}' at column {position} is not allowed in a {context} expression")]
    Variable {
        position: usize,
        variable: String,
        context: String,
    },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Syntax { position, .. }
            | ParseError::UnknownIdentifier { position, .. }
            | ParseError::Arity { position, .. }
            | ParseError::Variable { position, .. } => *position,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Symbol(char),
    End,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Number(v) => write!(f, "number {v}"),
            Token::Ident(s) => write!(f, "'{s}'"),
            Token::Symbol(c) => write!(f, "'{c}'"),
            Token::End => write!(f, "end of input"),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut pos = 0;
    while pos < chars.len() {
        let c = chars[pos];
        if c.is_whitespace() {
            pos += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = pos;
            while pos < chars.len() && (chars[pos].is_ascii_digit() || chars[pos] == '.') {
                pos += 1;
            }
            if pos < chars.len() && (chars[pos] == 'e' || chars[pos] == 'E') {
                let mut look = pos + 1;
                if look < chars.len() && (chars[look] == '+' || chars[look] == '-') {
                    look += 1;
                }
                if look < chars.len() && chars[look].is_ascii_digit() {
                    pos = look;
                    while pos < chars.len() && chars[pos].is_ascii_digit() {
                        pos += 1;
                    }
                }
            }
            let literal: String = chars[start..pos].iter().collect();
            let value = literal.parse::<f64>().map_err(|_| ParseError::Syntax {
                position: start,
                expected: vec!["number".into()],
                found: format!("'{literal}'"),
            })?;
            tokens.push((start, Token::Number(value)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = pos;
            while pos < chars.len() && (chars[pos].is_ascii_alphanumeric() || chars[pos] == '_') {
                pos += 1;
            }
            tokens.push((start, Token::Ident(chars[start..pos].iter().collect())));
        } else if "+-*/^(),".contains(c) {
            tokens.push((pos, Token::Symbol(c)));
            pos += 1;
        } else {
            return Err(ParseError::Syntax {
                position: pos,
                expected: atom_start(),
                found: format!("'{c}'"),
            });
        }
    }
    tokens.push((chars.len(), Token::End));
    Ok(tokens)
}

fn atom_start() -> Vec<String> {
    ["number", "x", "theta", "i", "function", "'('"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &(usize, Token) {
        &self.tokens[self.at]
    }

    fn bump(&mut self) -> (usize, Token) {
        let t = self.tokens[self.at].clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected(&self, expected: Vec<String>) -> ParseError {
        let (position, token) = self.peek();
        ParseError::Syntax {
            position: *position,
            expected,
            found: token.to_string(),
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek().1 == Token::Symbol(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(vec![format!("'{c}'")]))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().1 {
                Token::Symbol('+') => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Token::Symbol('-') => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek().1 {
                Token::Symbol('*') => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Token::Symbol('/') => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek().1 != Token::Symbol('^') {
            return Ok(base);
        }
        self.bump();
        match self.peek().clone() {
            (_, Token::Number(v)) if v.fract() == 0.0 && v <= i32::MAX as f64 => {
                self.bump();
                Ok(Expr::Pow(Box::new(base), v as i32))
            }
            _ => Err(self.unexpected(vec!["integer".into()])),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (position, token) = self.peek().clone();
        match token {
            Token::Number(v) => {
                self.bump();
                Ok(Expr::Number(v))
            }
            Token::Symbol('(') => {
                self.bump();
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Token::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "x" => Ok(Expr::X),
                    "theta" => Ok(Expr::Theta),
                    "i" => Ok(Expr::I),
                    _ => match Func::lookup(&name) {
                        Some(f) => self.call(f, position),
                        None => Err(ParseError::UnknownIdentifier { position, name }),
                    },
                }
            }
            _ => Err(self.unexpected(atom_start())),
        }
    }

    fn call(&mut self, f: Func, position: usize) -> Result<Expr, ParseError> {
        self.expect('(')?;
        if self.peek().1 == Token::Symbol(')') {
            return Err(ParseError::Arity {
                position,
                name: f.name().into(),
                got: 0,
            });
        }
        let arg = self.expr()?;
        let mut got = 1;
        while self.peek().1 == Token::Symbol(',') {
            self.bump();
            self.expr()?;
            got += 1;
        }
        if got != 1 {
            return Err(ParseError::Arity {
                position,
                name: f.name().into(),
                got,
            });
        }
        self.expect(')')?;
        Ok(Expr::Call(f, Box::new(arg)))
    }
}

pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut parser = Parser {
        tokens: tokenize(text)?,
        at: 0,
    };
    let e = parser.expr()?;
    if parser.peek().1 != Token::End {
        return Err(parser.unexpected(vec!["operator".into(), "end of input".into()]));
    }
    Ok(e)
}

fn variable_position(text: &str, variable: &str) -> usize {
    tokenize(text)
        .ok()
        .and_then(|t| {
            t.into_iter()
                .find(|(_, tok)| *tok == Token::Ident(variable.into()))
                .map(|(p, _)| p)
        })
        .unwrap_or(0)
}

/// A symbol `k(x, theta)`.
pub fn parse_symbol(text: &str) -> Result<SymbolFunction, ParseError> {
    let e = Arc::new(parse(text)?);
    Ok(SymbolFunction::new(text.trim(), move |x, t| e.eval(x, t)))
}

/// A function of `x` alone, as used for diagonal sampling.
pub fn parse_diag(
    text: &str,
) -> Result<impl Fn(f64) -> Complex64 + Send + Sync + 'static, ParseError> {
    let e = parse(text)?;
    if e.uses_theta() {
        return Err(ParseError::Variable {
            position: variable_position(text, "theta"),
            variable: "theta".into(),
            context: "diagonal".into(),
        });
    }
    Ok(move |x| e.eval(x, 0.0))
}

/// A `2 pi`-periodic function of `theta` alone, as used for Toeplitz generation.
pub fn parse_periodic(
    text: &str,
) -> Result<impl Fn(f64) -> Complex64 + Send + Sync + 'static, ParseError> {
    let e = parse(text)?;
    if e.uses_x() {
        return Err(ParseError::Variable {
            position: variable_position(text, "x"),
            variable: "x".into(),
            context: "Toeplitz".into(),
        });
    }
    Ok(move |t| e.eval(0.0, t))
}
