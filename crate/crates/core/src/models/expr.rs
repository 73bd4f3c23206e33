//! Right-hand sides written as polynomials in the state variables whose
//! coefficients may carry a single `cos(c·t)` or `sin(c·t)` factor.
//!
//! ```text
//! expr   := ['+' | '-'] term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := number | name ['^' integer] | ('cos' | 'sin') '(' product ')'
//! ```
//!
//! A `name` is a state variable, a parameter or `pi`. Division is only
//! allowed by constants, and the argument of a trigonometric factor is a
//! product of constants with exactly one `t`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trig {
    Cos,
    Sin,
}

/// `coefficient · Π x_i^{powers_i} · trig(frequency · t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coefficient: f64,
    pub powers: Vec<u32>,
    pub time_factor: Option<(Trig, f64)>,
}

impl Monomial {
    fn eval(&self, t: f64, x: &[f64]) -> f64 {
        let mut v = self.coefficient;
        for (xi, &k) in x.iter().zip(&self.powers) {
            if k > 0 {
                v *= xi.powi(k as i32);
            }
        }
        match self.time_factor {
            Some((Trig::Cos, c)) => v * (c * t).cos(),
            Some((Trig::Sin, c)) => v * (c * t).sin(),
            None => v,
        }
    }
}

/// One component of a parsed right-hand side.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        self.terms.iter().map(|m| m.eval(t, x)).sum()
    }

    /// Absolute values of the angular frequencies of the time factors.
    pub fn time_frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        self.terms
            .iter()
            .filter_map(|m| m.time_factor.map(|(_, c)| c.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Name(String),
    Op(char),
}

fn tokenize(text: &str) -> Result<Vec<Token>, String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let literal: String = chars[start..i].iter().collect();
            let value = literal
                .parse()
                .map_err(|_| format!("bad number '{literal}'"))?;
            out.push(Token::Number(value));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Name(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(format!("unexpected character '{c}'"));
        }
    }
    Ok(out)
}

/// Names a parsed expression can refer to.
pub struct Scope<'a> {
    pub variables: &'a [String],
    pub parameters: &'a BTreeMap<String, f64>,
}

impl Scope<'_> {
    fn constant(&self, name: &str) -> Option<f64> {
        match name {
            "pi" => Some(PI),
            _ => self.parameters.get(name).copied(),
        }
    }

    fn variable(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }
}

struct Parser<'a, 'b> {
    tokens: Vec<Token>,
    pos: usize,
    scope: &'a Scope<'b>,
}

impl Parser<'_, '_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, op: char) -> Result<(), String> {
        match self.next() {
            Some(Token::Op(c)) if c == op => Ok(()),
            other => Err(format!("expected '{op}', found {other:?}")),
        }
    }

    fn expression(&mut self) -> Result<Polynomial, String> {
        let mut poly = Polynomial::default();
        let mut sign = 1.0;
        if let Some(Token::Op(c @ ('+' | '-'))) = self.peek() {
            sign = if *c == '-' { -1.0 } else { 1.0 };
            self.pos += 1;
        }
        loop {
            let mut term = self.term()?;
            term.coefficient *= sign;
            poly.terms.push(term);
            match self.next() {
                None => return Ok(poly),
                Some(Token::Op('+')) => sign = 1.0,
                Some(Token::Op('-')) => sign = -1.0,
                Some(other) => return Err(format!("unexpected {other:?}")),
            }
        }
    }

    fn term(&mut self) -> Result<Monomial, String> {
        let mut term = Monomial {
            coefficient: 1.0,
            powers: vec![0; self.scope.variables.len()],
            time_factor: None,
        };
        self.factor(&mut term, false)?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek() {
            let divide = *c == '/';
            self.pos += 1;
            self.factor(&mut term, divide)?;
        }
        Ok(term)
    }

    fn factor(&mut self, term: &mut Monomial, divide: bool) -> Result<(), String> {
        match self.next() {
            Some(Token::Number(v)) => apply_constant(term, v, divide),
            Some(Token::Name(name)) if name == "cos" || name == "sin" => {
                if divide {
                    return Err(format!("cannot divide by {name}(..)"));
                }
                if term.time_factor.is_some() {
                    return Err("at most one cos/sin factor per term".into());
                }
                self.expect('(')?;
                let c = self.time_argument()?;
                self.expect(')')?;
                let trig = if name == "cos" { Trig::Cos } else { Trig::Sin };
                term.time_factor = Some((trig, c));
                Ok(())
            }
            Some(Token::Name(name)) => {
                let power = if let Some(Token::Op('^')) = self.peek() {
                    self.pos += 1;
                    match self.next() {
                        Some(Token::Number(k)) if k >= 0.0 && k.fract() == 0.0 => k as u32,
                        other => {
                            return Err(format!(
                                "exponent must be a natural number, found {other:?}"
                            ))
                        }
                    }
                } else {
                    1
                };
                if let Some(i) = self.scope.variable(&name) {
                    if divide {
                        return Err(format!("cannot divide by state variable '{name}'"));
                    }
                    term.powers[i] += power;
                    Ok(())
                } else if let Some(v) = self.scope.constant(&name) {
                    apply_constant(term, v.powi(power as i32), divide)
                } else if name == "t" {
                    Err("time may only appear inside cos(..) or sin(..)".into())
                } else {
                    Err(format!("unknown name '{name}'"))
                }
            }
            other => Err(format!("expected a factor, found {other:?}")),
        }
    }

    /// `c1 * t * c2 ...` with constants only; returns the product of the
    /// constants.
    fn time_argument(&mut self) -> Result<f64, String> {
        let mut value = 1.0;
        let mut seen_t = false;
        let mut divide = false;
        loop {
            let factor = match self.next() {
                Some(Token::Number(v)) => v,
                Some(Token::Name(name)) if name == "t" => {
                    if seen_t || divide {
                        return Err("argument must be linear in t".into());
                    }
                    seen_t = true;
                    1.0
                }
                Some(Token::Name(name)) => self
                    .scope
                    .constant(&name)
                    .ok_or_else(|| format!("'{name}' is not a constant"))?,
                other => return Err(format!("bad trigonometric argument near {other:?}")),
            };
            value = if divide {
                value / factor
            } else {
                value * factor
            };
            match self.peek() {
                Some(Token::Op('*')) => divide = false,
                Some(Token::Op('/')) => divide = true,
                _ => break,
            }
            self.pos += 1;
        }
        if !seen_t {
            return Err("trigonometric argument must contain t".into());
        }
        Ok(value)
    }
}

fn apply_constant(term: &mut Monomial, v: f64, divide: bool) -> Result<(), String> {
    if divide {
        if v == 0.0 {
            return Err("division by zero".into());
        }
        term.coefficient /= v;
    } else {
        term.coefficient *= v;
    }
    Ok(())
}

/// Parses one component of a right-hand side.
pub fn parse_polynomial(text: &str, scope: &Scope<'_>) -> Result<Polynomial, ModelError> {
    let wrap = |reason: String| ModelError::Parse(format!("in '{text}': {reason}"));
    let tokens = tokenize(text).map_err(wrap)?;
    if tokens.is_empty() {
        return Err(wrap("empty expression".into()));
    }
    Parser {
        tokens,
        pos: 0,
        scope,
    }
    .expression()
    .map_err(wrap)
}

/// Evaluates a constant product such as `2*pi`.
pub fn parse_constant(text: &str, parameters: &BTreeMap<String, f64>) -> Result<f64, ModelError> {
    let scope = Scope {
        variables: &[],
        parameters,
    };
    let poly = parse_polynomial(text, &scope)?;
    match poly.terms.as_slice() {
        [m] if m.time_factor.is_none() => Ok(m.coefficient),
        _ => Err(ModelError::Parse(format!("'{text}' is not a constant"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scope_eval(text: &str, t: f64, x: &[f64]) -> Result<f64, ModelError> {
        let vars = vec!["x1".to_string(), "x2".to_string()];
        let params = BTreeMap::from([("alpha".to_string(), 2.0), ("γ".to_string(), 0.5)]);
        let scope = Scope {
            variables: &vars,
            parameters: &params,
        };
        Ok(parse_polynomial(text, &scope)?.eval(t, x))
    }

    #[test]
    fn evaluates_polynomials_with_time_factors() {
        let x = [1.5, -0.5];
        let v = scope_eval(
            "alpha*x1 - alpha*x1*x2 + alpha*γ*x1*cos(2*pi*t) - 3e-1*x1^2/2",
            0.1,
            &x,
        )
        .unwrap();
        let expected = 2.0 * 1.5 - 2.0 * 1.5 * -0.5 + 2.0 * 0.5 * 1.5 * (2.0 * PI * 0.1).cos()
            - 0.3 * 1.5 * 1.5 / 2.0;
        assert!((v - expected).abs() < 1e-15);
        assert_eq!(
            scope_eval("-x2 + sin(t/2)", 1.0, &x).unwrap(),
            0.5 + 0.5f64.sin()
        );
    }

    #[test]
    fn rejects_what_is_not_polynomial() {
        for bad in [
            "x1/x2", "t*x1", "cos(x1)", "cos(t*t)", "x1^1.5", "beta*x1", "x1 +", "", "x1 ? 2",
        ] {
            assert!(scope_eval(bad, 0.0, &[1.0, 1.0]).is_err(), "{bad}");
        }
    }

    #[test]
    fn constants() {
        let params = BTreeMap::from([("w".to_string(), 3.0)]);
        assert_eq!(parse_constant("2*pi", &params).unwrap(), 2.0 * PI);
        assert_eq!(parse_constant("w/2", &params).unwrap(), 1.5);
        assert!(parse_constant("cos(t)", &params).is_err());
    }
}
