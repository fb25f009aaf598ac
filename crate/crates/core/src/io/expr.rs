//! Small expression language for configs: `+ − * /`, integer powers,
//! `sin cos exp sqrt`, coordinates and named parameters.

use std::fmt::Write as _;

use crate::calculus::GenericMap;
use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 4] = [Func::Sin, Func::Cos, Func::Exp, Func::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }

    fn lookup(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Index into the scope's variables.
    Var(usize),
    /// Index into the scope's parameters.
    Param(usize),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

/// Names visible to an expression.
#[derive(Clone, Debug, Default)]
pub struct Scope {
    pub variables: Vec<String>,
    pub parameters: Vec<(String, f64)>,
}

impl Scope {
    pub fn new<I, N>(variables: I) -> Self
    where
        I: IntoIterator<Item = N>,
        N: Into<String>,
    {
        Scope {
            variables: variables.into_iter().map(Into::into).collect(),
            parameters: Vec::new(),
        }
    }

    pub fn with_parameters(mut self, parameters: Vec<(String, f64)>) -> Self {
        self.parameters = parameters;
        self
    }

    pub fn parameter_values(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.1).collect()
    }
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => PREC_ADD,
            Expr::Binary(..) => PREC_MUL,
            Expr::Neg(_) => PREC_NEG,
            Expr::Pow(..) => PREC_POW,
            _ => PREC_ATOM,
        }
    }

    /// Canonical text with the fewest parentheses that parse back to `self`.
    pub fn print(&self, scope: &Scope) -> String {
        let mut s = String::new();
        self.write(scope, &mut s);
        s
    }

    fn write_wrapped(&self, scope: &Scope, out: &mut String, wrap: bool) {
        if wrap {
            out.push('(');
            self.write(scope, out);
            out.push(')');
        } else {
            self.write(scope, out);
        }
    }

    fn write(&self, scope: &Scope, out: &mut String) {
        match self {
            Expr::Const(v) => {
                let _ = write!(out, "{v}");
            }
            Expr::Var(i) => out.push_str(&scope.variables[*i]),
            Expr::Param(i) => out.push_str(&scope.parameters[*i].0),
            Expr::Neg(e) => {
                out.push('-');
                e.write_wrapped(scope, out, e.precedence() < PREC_NEG);
            }
            Expr::Binary(op, l, r) => {
                let (p, sym) = match op {
                    BinOp::Add => (PREC_ADD, " + "),
                    BinOp::Sub => (PREC_ADD, " - "),
                    BinOp::Mul => (PREC_MUL, "*"),
                    BinOp::Div => (PREC_MUL, "/"),
                };
                l.write_wrapped(scope, out, l.precedence() < p);
                out.push_str(sym);
                r.write_wrapped(scope, out, r.precedence() <= p);
            }
            Expr::Pow(b, e) => {
                b.write_wrapped(scope, out, b.precedence() < PREC_ATOM);
                let _ = write!(out, "^{e}");
            }
            Expr::Call(f, a) => {
                out.push_str(f.name());
                out.push('(');
                a.write(scope, out);
                out.push(')');
            }
        }
    }

    /// Evaluates over any scalar; `params` are the scope's parameter values.
    pub fn eval<S: Scalar>(&self, vars: &[S], params: &[f64]) -> S {
        match self {
            Expr::Const(v) => S::c(*v),
            Expr::Var(i) => vars[*i],
            Expr::Param(i) => S::c(params[*i]),
            Expr::Neg(e) => -e.eval(vars, params),
            Expr::Binary(op, l, r) => {
                let (a, b) = (l.eval(vars, params), r.eval(vars, params));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Expr::Pow(b, e) => b.eval(vars, params).powi(*e),
            Expr::Call(f, a) => {
                let x = a.eval(vars, params);
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Sqrt => x.sqrt(),
                }
            }
        }
    }

    /// Value when the expression mentions no variables.
    pub fn constant_value(&self, params: &[f64]) -> Option<f64> {
        if self.mentions_variables() {
            return None;
        }
        Some(self.eval::<f64>(&[], params))
    }

    pub fn mentions_variables(&self) -> bool {
        match self {
            Expr::Var(_) => true,
            Expr::Const(_) | Expr::Param(_) => false,
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Call(_, e) => e.mentions_variables(),
            Expr::Binary(_, l, r) => l.mentions_variables() || r.mentions_variables(),
        }
    }
}

/// Parses `text` against `scope`. Errors carry the byte offset into `text`.
pub fn parse_expression(text: &str, scope: &Scope) -> Result<Expr> {
    let mut p = Parser { src: text, pos: 0, scope };
    p.skip_ws();
    if p.at_end() {
        return Err(p.error("empty expression"));
    }
    let e = p.expr()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.error(format!("unexpected `{}`", p.peek_char().unwrap_or(' '))));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    scope: &'a Scope,
}

impl<'a> Parser<'a> {
    fn error(&self, message: impl Into<String>) -> Error {
        self.error_at(self.pos, message)
    }

    fn error_at(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            offset,
            message: message.into(),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek_char() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek_char() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if !self.eat('^') {
            return Ok(base);
        }
        self.skip_ws();
        let at = self.pos;
        let exponent = self.unary()?;
        let params = self.scope.parameter_values();
        match exponent.constant_value(&params) {
            Some(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => Ok(Expr::Pow(Box::new(base), v as i32)),
            Some(v) => Err(self.error_at(at, format!("exponent {v} is not an integer"))),
            None => Err(self.error_at(at, "exponent must be a constant integer")),
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        match self.peek_char() {
            None => Err(self.error("unexpected end of expression")),
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_alphabetic() || c == '_' => {
                let name = self.identifier();
                self.skip_ws();
                if self.peek_char() == Some('(') {
                    let Some(f) = Func::lookup(name) else {
                        return Err(self.error_at(start, format!("unknown function `{name}`")));
                    };
                    self.pos += 1;
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return Err(self.error("expected `)` after function argument"));
                    }
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                if let Some(i) = self.scope.variables.iter().position(|v| v == name) {
                    Ok(Expr::Var(i))
                } else if let Some(i) = self.scope.parameters.iter().position(|p| p.0 == name) {
                    Ok(Expr::Param(i))
                } else if name == "pi" {
                    Ok(Expr::Const(std::f64::consts::PI))
                } else {
                    Err(self.error_at(start, format!("unknown identifier `{name}`")))
                }
            }
            Some(c) => Err(self.error(format!("unexpected `{c}`"))),
        }
    }

    fn identifier(&mut self) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.peek_char() {
            if !(c.is_alphanumeric() || c == '_') {
                break;
            }
            self.pos += c.len_utf8();
        }
        &self.src[start..self.pos]
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let digits = |p: &mut usize| {
            while *p < bytes.len() && bytes[*p].is_ascii_digit() {
                *p += 1;
            }
        };
        let mut p = self.pos;
        digits(&mut p);
        if p < bytes.len() && bytes[p] == b'.' {
            p += 1;
            digits(&mut p);
        }
        if p < bytes.len() && (bytes[p] == b'e' || bytes[p] == b'E') {
            let mut q = p + 1;
            if q < bytes.len() && (bytes[q] == b'+' || bytes[q] == b'-') {
                q += 1;
            }
            if q < bytes.len() && bytes[q].is_ascii_digit() {
                digits(&mut q);
                p = q;
            }
        }
        self.pos = p;
        let text = &self.src[start..p];
        text.parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| self.error_at(start, format!("malformed number `{text}`")))
    }
}

/// Vector of expressions as a smooth map of the scope's variables.
#[derive(Clone, Debug)]
pub struct ExprMap {
    exprs: Vec<Expr>,
    params: Vec<f64>,
    input_dim: usize,
}

impl ExprMap {
    pub fn new(exprs: Vec<Expr>, scope: &Scope) -> Self {
        ExprMap {
            exprs,
            params: scope.parameter_values(),
            input_dim: scope.variables.len(),
        }
    }

    /// Parses each string in `texts` against `scope`.
    pub fn parse<I, S>(texts: I, scope: &Scope) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let exprs = texts
            .into_iter()
            .map(|t| parse_expression(t.as_ref(), scope))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(exprs, scope))
    }

    pub fn exprs(&self) -> &[Expr] {
        &self.exprs
    }
}

impl<T: Real> GenericMap<T> for ExprMap {
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn output_dim(&self) -> usize {
        self.exprs.len()
    }
    fn call<S: Scalar<Real = T>>(&self, x: &[S]) -> Vec<S> {
        self.exprs.iter().map(|e| e.eval(x, &self.params)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{jacobian, SmoothMap};
    use proptest::prelude::*;

    fn scope() -> Scope {
        Scope::new(["x", "y", "phi"]).with_parameters(vec![("R".into(), 2.0), ("m".into(), 0.5)])
    }

    fn eval(text: &str, vars: &[f64]) -> f64 {
        let s = scope();
        parse_expression(text, &s).unwrap().eval(vars, &s.parameter_values())
    }

    #[test]
    fn precedence_examples() {
        let s = Scope::new(["y"]);
        assert_eq!(parse_expression("y", &s).unwrap(), Expr::Var(0));
        assert_eq!(parse_expression("y", &s).unwrap().eval(&[1.0], &[]), 1.0);
        let s = Scope::new(["phi"]).with_parameters(vec![("R".into(), 1.0)]);
        let e = parse_expression("-sin(phi)*R", &s).unwrap();
        assert_eq!(e.eval(&[0.0], &[1.0]), 0.0);
        assert_eq!(e.eval(&[std::f64::consts::FRAC_PI_2], &[1.0]), -1.0);
        assert_eq!(parse_expression("1 + 2*3^2", &Scope::default()).unwrap().eval::<f64>(&[], &[]), 19.0);
    }

    #[test]
    fn operators_and_associativity() {
        assert_eq!(eval("8 - 3 - 2", &[0.0; 3]), 3.0);
        assert_eq!(eval("8 / 4 / 2", &[0.0; 3]), 1.0);
        assert_eq!(eval("2^3^2", &[0.0; 3]), 512.0);
        assert_eq!(eval("-2^2", &[0.0; 3]), -4.0);
        assert_eq!(eval("x^-2", &[2.0, 0.0, 0.0]), 0.25);
        assert_eq!(eval("R*m + y", &[0.0, 3.0, 0.0]), 4.0);
        assert_eq!(eval("sqrt(x)*exp(0) + cos(0)", &[9.0, 0.0, 0.0]), 4.0);
        assert_eq!(eval("2.5e1 + .5", &[0.0; 3]), 25.5);
        assert_eq!(eval("x^R", &[3.0, 0.0, 0.0]), 9.0);
    }

    #[test]
    fn positioned_errors() {
        let s = scope();
        let offset = |t: &str| match parse_expression(t, &s) {
            Err(Error::Parse { offset, .. }) => offset,
            other => panic!("{t}: {other:?}"),
        };
        assert_eq!(offset("x + "), 4);
        assert_eq!(offset("x + w"), 4);
        assert_eq!(offset("x ^ 1.5"), 4);
        assert_eq!(offset("x ^ y"), 4);
        assert_eq!(offset("(x + 1"), 6);
        assert_eq!(offset("tan(x)"), 0);
        assert_eq!(offset("x $ 1"), 2);
        assert_eq!(offset(""), 0);
        assert_eq!(offset("x y"), 2);
    }

    #[test]
    fn printer_is_minimal() {
        let s = scope();
        for (src, want) in [
            ("(x + y) + phi", "x + y + phi"),
            ("x - (y - phi)", "x - (y - phi)"),
            ("(x*y)^2", "(x*y)^2"),
            ("-(x + 1)", "-(x + 1)"),
            ("(-x)^2", "(-x)^2"),
            ("x*(-y)", "x*-y"),
            ("sin((x))", "sin(x)"),
            ("R/(m*x)", "R/(m*x)"),
        ] {
            assert_eq!(parse_expression(src, &s).unwrap().print(&s), want);
        }
    }

    #[test]
    fn expr_map_jacobian() {
        let s = scope();
        let map = ExprMap::parse(["x*y", "sin(phi)*R"], &s).unwrap();
        let j = jacobian(&map as &dyn SmoothMap<f64>, &[2.0, 3.0, 0.0]).unwrap();
        assert_eq!(j.as_slice(), &[3.0, 2.0, 0.0, 0.0, 0.0, 2.0]);
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0u32..1000, 0u32..4).prop_map(|(a, d)| Expr::Const(a as f64 / 10f64.powi(d as i32))),
            (0usize..3).prop_map(Expr::Var),
            (0usize..2).prop_map(Expr::Param),
        ];
        leaf.prop_recursive(6, 64, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (
                    prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div)],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, l, r)| Expr::Binary(op, Box::new(l), Box::new(r))),
                (inner.clone(), -3i32..4).prop_map(|(b, e)| Expr::Pow(Box::new(b), e)),
                (0usize..4, inner).prop_map(|(f, a)| Expr::Call(Func::ALL[f], Box::new(a))),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let s = scope();
            let text = e.print(&s);
            prop_assert_eq!(parse_expression(&text, &s).unwrap(), e, "{}", text);
        }
    }

    proptest! {
        #[test]
        fn dual_derivative_matches_finite_difference(
            x in -1.0f64..1.0, y in 0.5f64..2.0, phi in -3.0f64..3.0, which in 0usize..4
        ) {
            let texts = ["x^3*y - sin(phi)/y", "exp(x*y)*cos(phi)", "sqrt(y + x^2)", "R*x/(m + y^2)"];
            let s = scope();
            let map = ExprMap::parse([texts[which]], &s).unwrap();
            let at = [x, y, phi];
            let j = jacobian(&map as &dyn SmoothMap<f64>, &at).unwrap();
            for k in 0..3 {
                let h = 1e-6;
                let mut a = at;
                let mut b = at;
                a[k] += h;
                b[k] -= h;
                let fa: f64 = GenericMap::<f64>::call(&map, &a)[0];
                let fb: f64 = GenericMap::<f64>::call(&map, &b)[0];
                let fd = (fa - fb) / (2.0 * h);
                prop_assert!((fd - j[(0, k)]).abs() <= 1e-6 * (1.0 + fd.abs()));
            }
        }
    }
}
