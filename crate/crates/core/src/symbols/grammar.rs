//! Text grammar for symbols in config files.
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := unary (("*" | "/") unary)*
//! unary  := "-" unary | power
//! power  := atom ("^" INTEGER)?
//! atom   := NUMBER | IDENT | IDENT "(" expr ("," expr)* ")" | "(" expr ")"
//! ```
//!
//! Variables: `x1 x2 x3` on the sphere, `x y` on the plane (and `z zbar`
//! for the complex polynomials of the Bargmann module). `pi` is a constant.
//! Functions: `cutoff(sign|bump, arg, s)` = u(arg/s), `dist(c1, c2, c3)` =
//! geodesic distance to the normalized center, `sin`, `cos`, `sqrt`.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::{cutoff_compose, CutoffProfile, Domain, Symbol, SymbolError, Univariate};

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ParseError {
    pub message: String,
    /// byte offset into the input
    pub position: usize,
    pub input: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let col = self.input[..self.position.min(self.input.len())].chars().count();
        write!(
            f,
            "{} at column {}\n  {}\n  {}^",
            self.message,
            col + 1,
            self.input,
            " ".repeat(col)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ast {
    Num(f64),
    Var(String, usize),
    Neg(Box<Ast>),
    Add(Box<Ast>, Box<Ast>),
    Sub(Box<Ast>, Box<Ast>),
    Mul(Box<Ast>, Box<Ast>),
    Div(Box<Ast>, Box<Ast>, usize),
    Pow(Box<Ast>, u32),
    Call(String, Vec<Ast>, usize),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

struct Parser<'a> {
    input: &'a str,
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

fn tokenize(input: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = input.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let save = i;
                i += 1;
                if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
                    i += 1;
                }
                if i < bytes.len() && bytes[i].is_ascii_digit() {
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let text = &input[start..i];
            let v: f64 = text.parse().map_err(|_| ParseError {
                message: format!("malformed number '{text}'"),
                position: start,
                input: input.to_string(),
            })?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(input[start..i].to_string()), start));
        } else if "+-*/^(),".contains(c) {
            out.push((Tok::Sym(c), i));
            i += 1;
        } else {
            return Err(ParseError {
                message: format!("unexpected character '{}'", input[i..].chars().next().unwrap()),
                position: i,
                input: input.to_string(),
            });
        }
    }
    out.push((Tok::End, input.len()));
    Ok(out)
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn here(&self) -> usize {
        self.toks[self.pos].1
    }

    fn err(&self, message: impl Into<String>, position: usize) -> ParseError {
        ParseError {
            message: message.into(),
            position,
            input: self.input.to_string(),
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Sym(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{c}'"), self.here()))
        }
    }

    fn expr(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Ast::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Ast::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Ast::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if *self.peek() == Tok::Sym('/') {
                let at = self.here();
                self.pos += 1;
                lhs = Ast::Div(Box::new(lhs), Box::new(self.unary()?), at);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Ast, ParseError> {
        if self.eat('-') {
            return Ok(Ast::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Ast, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            let at = self.here();
            match self.peek().clone() {
                Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 && v <= 64.0 => {
                    self.pos += 1;
                    return Ok(Ast::Pow(Box::new(base), v as u32));
                }
                _ => return Err(self.err("exponent must be a nonnegative integer ≤ 64", at)),
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Ast, ParseError> {
        let at = self.here();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Ast::Num(v))
            }
            Tok::Ident(name) => {
                self.pos += 1;
                if self.eat('(') {
                    let mut args = vec![self.expr()?];
                    while self.eat(',') {
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    Ok(Ast::Call(name, args, at))
                } else {
                    Ok(Ast::Var(name, at))
                }
            }
            Tok::Sym('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::End => Err(self.err("unexpected end of input", at)),
            Tok::Sym(c) => Err(self.err(format!("unexpected '{c}'"), at)),
        }
    }
}

pub fn parse_ast(input: &str) -> Result<Ast, ParseError> {
    let toks = tokenize(input)?;
    let mut p = Parser {
        input,
        toks,
        pos: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.err("trailing input", p.here()));
    }
    Ok(e)
}

/// Partially lowered expression: polynomial pieces stay polynomial so that
/// exact quadrature can be selected for them.
enum Lowered {
    Poly(BTreeMap<[u8; 3], f64>),
    Sym(Symbol),
}

impl Lowered {
    fn constant(c: f64) -> Self {
        let mut m = BTreeMap::new();
        m.insert([0, 0, 0], c);
        Lowered::Poly(m)
    }

    fn into_symbol(self, domain: Domain) -> Symbol {
        match self {
            Lowered::Sym(s) => s,
            Lowered::Poly(m) => {
                let terms: Vec<(f64, [u8; 3])> = m.into_iter().map(|(e, c)| (c, e)).collect();
                if terms.len() == 1 && terms[0].1 == [0, 0, 0] {
                    Symbol::constant(domain, terms[0].0)
                } else {
                    Symbol::polynomial(domain, terms)
                }
            }
        }
    }

    fn as_constant(&self) -> Option<f64> {
        match self {
            Lowered::Poly(m) if m.keys().all(|e| *e == [0, 0, 0]) => {
                Some(m.get(&[0, 0, 0]).copied().unwrap_or(0.0))
            }
            _ => None,
        }
    }
}

fn poly_mul(a: &BTreeMap<[u8; 3], f64>, b: &BTreeMap<[u8; 3], f64>) -> BTreeMap<[u8; 3], f64> {
    let mut out = BTreeMap::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]];
            *out.entry(e).or_insert(0.0) += ca * cb;
        }
    }
    out.retain(|_, c| *c != 0.0);
    out
}

fn poly_add(a: &BTreeMap<[u8; 3], f64>, b: &BTreeMap<[u8; 3], f64>, sign: f64) -> BTreeMap<[u8; 3], f64> {
    let mut out = a.clone();
    for (e, c) in b {
        *out.entry(*e).or_insert(0.0) += sign * c;
    }
    out.retain(|_, c| *c != 0.0);
    out
}

fn variable_index(domain: Domain, name: &str) -> Option<usize> {
    match (domain, name) {
        (Domain::Sphere, "x1") => Some(0),
        (Domain::Sphere, "x2") => Some(1),
        (Domain::Sphere, "x3") => Some(2),
        (Domain::Plane, "x") => Some(0),
        (Domain::Plane, "y") => Some(1),
        _ => None,
    }
}

fn lower(ast: &Ast, domain: Domain, src: &str) -> Result<Lowered, ParseError> {
    let perr = |message: String, position: usize| ParseError {
        message,
        position,
        input: src.to_string(),
    };
    Ok(match ast {
        Ast::Num(v) => Lowered::constant(*v),
        Ast::Var(name, at) => {
            if name == "pi" {
                return Ok(Lowered::constant(std::f64::consts::PI));
            }
            let i = variable_index(domain, name)
                .ok_or_else(|| perr(format!("unknown variable '{name}' for the {domain}"), *at))?;
            let mut e = [0u8; 3];
            e[i] = 1;
            let mut m = BTreeMap::new();
            m.insert(e, 1.0);
            Lowered::Poly(m)
        }
        Ast::Neg(a) => match lower(a, domain, src)? {
            Lowered::Poly(m) => Lowered::Poly(m.into_iter().map(|(e, c)| (e, -c)).collect()),
            Lowered::Sym(s) => Lowered::Sym(s.scale(-1.0)),
        },
        Ast::Add(a, b) | Ast::Sub(a, b) => {
            let sign = if matches!(ast, Ast::Add(..)) { 1.0 } else { -1.0 };
            match (lower(a, domain, src)?, lower(b, domain, src)?) {
                (Lowered::Poly(x), Lowered::Poly(y)) => Lowered::Poly(poly_add(&x, &y, sign)),
                (x, y) => {
                    let y = y.into_symbol(domain).scale(sign);
                    Lowered::Sym(x.into_symbol(domain).add(&y).expect("same domain"))
                }
            }
        }
        Ast::Mul(a, b) => match (lower(a, domain, src)?, lower(b, domain, src)?) {
            (Lowered::Poly(x), Lowered::Poly(y)) => Lowered::Poly(poly_mul(&x, &y)),
            (x, y) => {
                if let Some(c) = x.as_constant() {
                    Lowered::Sym(y.into_symbol(domain).scale(c))
                } else if let Some(c) = y.as_constant() {
                    Lowered::Sym(x.into_symbol(domain).scale(c))
                } else {
                    Lowered::Sym(x.into_symbol(domain).mul(&y.into_symbol(domain)).expect("same domain"))
                }
            }
        },
        Ast::Div(a, b, at) => {
            let x = lower(a, domain, src)?;
            let y = lower(b, domain, src)?;
            if let Some(c) = y.as_constant() {
                if c == 0.0 {
                    return Err(perr("division by zero constant".into(), *at));
                }
                match x {
                    Lowered::Poly(m) => Lowered::Poly(m.into_iter().map(|(e, v)| (e, v / c)).collect()),
                    Lowered::Sym(s) => Lowered::Sym(s.scale(1.0 / c)),
                }
            } else {
                Lowered::Sym(x.into_symbol(domain).div(&y.into_symbol(domain)).expect("same domain"))
            }
        }
        Ast::Pow(a, n) => match lower(a, domain, src)? {
            Lowered::Poly(m) => {
                let mut out = BTreeMap::new();
                out.insert([0, 0, 0], 1.0);
                for _ in 0..*n {
                    out = poly_mul(&out, &m);
                }
                Lowered::Poly(out)
            }
            Lowered::Sym(s) => Lowered::Sym(s.compose(Univariate::Pow(*n as f64))),
        },
        Ast::Call(name, args, at) => {
            let argc = |n: usize| -> Result<(), ParseError> {
                if args.len() != n {
                    Err(perr(format!("{name} takes {n} argument(s), got {}", args.len()), *at))
                } else {
                    Ok(())
                }
            };
            match name.as_str() {
                "cutoff" => {
                    argc(3)?;
                    let profile = match &args[0] {
                        Ast::Var(k, _) if k == "sign" => CutoffProfile::sign(),
                        Ast::Var(k, _) if k == "bump" => CutoffProfile::bump(),
                        _ => return Err(perr("cutoff profile must be 'sign' or 'bump'".into(), *at)),
                    };
                    let arg = lower(&args[1], domain, src)?.into_symbol(domain);
                    let s = lower(&args[2], domain, src)?
                        .as_constant()
                        .ok_or_else(|| perr("cutoff scale must be a constant".into(), *at))?;
                    let sym = cutoff_compose(&profile, &arg, s).map_err(|e| perr(e.to_string(), *at))?;
                    Lowered::Sym(sym)
                }
                "dist" => {
                    argc(3)?;
                    if domain != Domain::Sphere {
                        return Err(perr("dist() is only defined on the sphere".into(), *at));
                    }
                    let mut c = [0.0; 3];
                    for (i, a) in args.iter().enumerate() {
                        c[i] = lower(a, domain, src)?
                            .as_constant()
                            .ok_or_else(|| perr("dist() center must be constant".into(), *at))?;
                    }
                    Lowered::Sym(Symbol::distance_to(c).map_err(|e| perr(e.to_string(), *at))?)
                }
                "sin" | "cos" | "sqrt" => {
                    argc(1)?;
                    let inner = lower(&args[0], domain, src)?;
                    if let Some(c) = inner.as_constant() {
                        let v = match name.as_str() {
                            "sin" => c.sin(),
                            "cos" => c.cos(),
                            _ => c.sqrt(),
                        };
                        return Ok(Lowered::constant(v));
                    }
                    let u = match name.as_str() {
                        "sin" => Univariate::Sin,
                        "cos" => Univariate::Cos,
                        _ => Univariate::Pow(0.5),
                    };
                    Lowered::Sym(inner.into_symbol(domain).compose(u))
                }
                _ => return Err(perr(format!("unknown function '{name}'"), *at)),
            }
        }
    })
}

pub fn parse_symbol(input: &str, domain: Domain) -> Result<Symbol, SymbolError> {
    let ast = parse_ast(input)?;
    Ok(lower(&ast, domain, input)?.into_symbol(domain))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_stays_polynomial() {
        let s = parse_symbol("x1*x2 - 3*x3^2 + 1", Domain::Sphere).unwrap();
        assert_eq!(s.polynomial_degree(), Some(2));
        let v = s.value(&[0.6, 0.0, 0.8]).unwrap();
        assert!((v - (1.0 - 3.0 * 0.64)).abs() < 1e-15);
    }

    #[test]
    fn precedence_and_unary_minus() {
        let s = parse_symbol("-x^2 + 2*x*y/4", Domain::Plane).unwrap();
        assert!((s.value(&[3.0, 2.0]).unwrap() - (-9.0 + 3.0)).abs() < 1e-15);
    }

    #[test]
    fn cutoff_and_dist() {
        let s = parse_symbol("cutoff(sign, x1, 0.2)", Domain::Sphere).unwrap();
        assert_eq!(s.value(&[1.0, 0.0, 0.0]).unwrap(), 1.0);
        let d = parse_symbol("cutoff(bump, dist(0, 0, 1)/0.5, 1)", Domain::Sphere).unwrap();
        assert_eq!(d.value(&[0.0, 0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(d.value(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_symbol("x1 + * x2", Domain::Sphere).unwrap_err();
        match e {
            SymbolError::Parse(p) => {
                assert_eq!(p.position, 5);
                assert!(p.to_string().contains("column 6"));
            }
            other => panic!("{other:?}"),
        }
        let e = parse_symbol("x + q", Domain::Plane).unwrap_err();
        assert!(matches!(e, SymbolError::Parse(ParseError { position: 4, .. })));
        let e = parse_symbol("x1 +", Domain::Sphere).unwrap_err();
        assert!(matches!(e, SymbolError::Parse(ParseError { position: 4, .. })));
        assert!(parse_symbol("x1 $ 2", Domain::Sphere).is_err());
        assert!(parse_symbol("dist(0,0,1)", Domain::Plane).is_err());
    }
}
