//! Expression trees for scalar field bodies.
//!
//! Expressions are parsed from text (see [`parse`]), bound against a chart's
//! coordinate list plus a parameter table, and then evaluated or
//! differentiated symbolically. Literals are kept as `f64`; evaluation is
//! generic over [`Real`].

mod parser;

use std::collections::BTreeMap;
use std::fmt;

pub use parser::{parse, ParseError};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Elementary functions accepted by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn apply<T: Real>(self, x: T) -> T {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
        }
    }

    fn apply_f64(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
        }
    }
}

/// Scalar expression.
///
/// `Var` nodes come out of the parser; [`Expr::bind`] replaces them with
/// `Coord` indices or numeric parameter values.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Coord(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn num(x: f64) -> Expr {
        Expr::Num(x)
    }

    pub fn coord(i: usize) -> Expr {
        Expr::Coord(i)
    }

    pub fn zero() -> Expr {
        Expr::Num(0.0)
    }

    pub fn one() -> Expr {
        Expr::Num(1.0)
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        simplify_call(f, arg)
    }

    pub fn pow(self, exponent: Expr) -> Expr {
        simplify_pow(self, exponent)
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Expr::Num(x) => Some(*x),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(x) if *x == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Num(x) if *x == 1.0)
    }

    /// Resolves identifiers: coordinates first, then parameters.
    pub fn bind(&self, coordinates: &[String], params: &BTreeMap<String, f64>) -> Result<Expr> {
        Ok(match self {
            Expr::Var(name) => {
                if let Some(i) = coordinates.iter().position(|c| c == name) {
                    Expr::Coord(i)
                } else if let Some(v) = params.get(name) {
                    Expr::Num(*v)
                } else {
                    return Err(Error::UnknownIdentifier { name: name.clone() });
                }
            }
            Expr::Num(_) | Expr::Coord(_) => self.clone(),
            Expr::Neg(a) => -a.bind(coordinates, params)?,
            Expr::Add(a, b) => a.bind(coordinates, params)? + b.bind(coordinates, params)?,
            Expr::Sub(a, b) => a.bind(coordinates, params)? - b.bind(coordinates, params)?,
            Expr::Mul(a, b) => a.bind(coordinates, params)? * b.bind(coordinates, params)?,
            Expr::Div(a, b) => a.bind(coordinates, params)? / b.bind(coordinates, params)?,
            Expr::Pow(a, b) => a.bind(coordinates, params)?.pow(b.bind(coordinates, params)?),
            Expr::Call(f, a) => Expr::call(*f, a.bind(coordinates, params)?),
        })
    }

    /// Names of unresolved identifiers.
    pub fn free_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Var(n) = e {
                if !out.contains(n) {
                    out.push(n.clone());
                }
            }
        });
        out
    }

    /// Highest coordinate index referenced, if any.
    pub fn max_coord(&self) -> Option<usize> {
        let mut m: Option<usize> = None;
        self.visit(&mut |e| {
            if let Expr::Coord(i) = e {
                m = Some(m.map_or(*i, |m| m.max(*i)));
            }
        });
        m
    }

    /// Whether the expression references coordinate `i`.
    pub fn depends_on(&self, i: usize) -> bool {
        let mut hit = false;
        self.visit(&mut |e| {
            if matches!(e, Expr::Coord(j) if *j == i) {
                hit = true;
            }
        });
        hit
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Num(_) | Expr::Var(_) | Expr::Coord(_) => {}
            Expr::Neg(a) | Expr::Call(_, a) => a.visit(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    /// Evaluates a bound expression at coordinate values `x`.
    ///
    /// # Panics
    ///
    /// Panics on unbound `Var` nodes or out-of-range coordinate indices.
    pub fn eval<T: Real>(&self, x: &[T]) -> T {
        match self {
            Expr::Num(v) => T::lit(*v),
            Expr::Var(n) => panic!("unbound identifier `{n}` in evaluated expression"),
            Expr::Coord(i) => x[*i],
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => {
                let base = a.eval(x);
                match b.as_num() {
                    Some(e) if e.fract() == 0.0 && e.abs() < 64.0 => base.powi(e as i32),
                    _ => base.powf(b.eval(x)),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(x)),
        }
    }

    /// Symbolic partial derivative with respect to coordinate `i`.
    /// Unbound identifiers are treated as constants.
    pub fn diff(&self, i: usize) -> Expr {
        match self {
            Expr::Num(_) | Expr::Var(_) => Expr::zero(),
            Expr::Coord(j) => Expr::Num(if *j == i { 1.0 } else { 0.0 }),
            Expr::Neg(a) => -a.diff(i),
            Expr::Add(a, b) => a.diff(i) + b.diff(i),
            Expr::Sub(a, b) => a.diff(i) - b.diff(i),
            Expr::Mul(a, b) => a.diff(i) * (**b).clone() + (**a).clone() * b.diff(i),
            Expr::Div(a, b) => {
                let (a, b) = (&**a, &**b);
                (a.diff(i) * b.clone() - a.clone() * b.diff(i)) / b.clone().pow(Expr::Num(2.0))
            }
            Expr::Pow(a, b) => {
                let (base, e) = (&**a, &**b);
                if !e.depends_on(i) && e.free_vars().is_empty() {
                    // d(u^c) = c u^(c-1) u'
                    let em1 = e.clone() - Expr::one();
                    e.clone() * base.clone().pow(em1) * base.diff(i)
                } else {
                    // d(u^v) = u^v (v' ln u + v u'/u)
                    self.clone()
                        * (e.diff(i) * Expr::call(Func::Log, base.clone())
                            + e.clone() * base.diff(i) / base.clone())
                }
            }
            Expr::Call(f, a) => {
                let u = (**a).clone();
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, u.clone()),
                    Func::Cos => -Expr::call(Func::Sin, u.clone()),
                    Func::Exp => Expr::call(Func::Exp, u.clone()),
                    Func::Log => Expr::one() / u.clone(),
                    Func::Sqrt => Expr::Num(0.5) / Expr::call(Func::Sqrt, u.clone()),
                };
                outer * a.diff(i)
            }
        }
    }

    /// Replaces every `Coord(i)` by `subs[i]`.
    pub fn compose(&self, subs: &[Expr]) -> Expr {
        match self {
            Expr::Num(_) | Expr::Var(_) => self.clone(),
            Expr::Coord(i) => subs[*i].clone(),
            Expr::Neg(a) => -a.compose(subs),
            Expr::Add(a, b) => a.compose(subs) + b.compose(subs),
            Expr::Sub(a, b) => a.compose(subs) - b.compose(subs),
            Expr::Mul(a, b) => a.compose(subs) * b.compose(subs),
            Expr::Div(a, b) => a.compose(subs) / b.compose(subs),
            Expr::Pow(a, b) => a.compose(subs).pow(b.compose(subs)),
            Expr::Call(f, a) => Expr::call(*f, a.compose(subs)),
        }
    }

    /// Renders the expression with coordinate indices replaced by names.
    pub fn to_source(&self, names: &[String]) -> String {
        let mut s = String::new();
        self.write_prec(&mut s, 0, names);
        s
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(v) if *v < 0.0 => 3,
            _ => 5,
        }
    }

    fn write_prec(&self, out: &mut String, min: u8, names: &[String]) {
        let p = self.prec();
        let paren = p < min;
        if paren {
            out.push('(');
        }
        match self {
            Expr::Num(v) => out.push_str(&format_literal(*v)),
            Expr::Var(n) => out.push_str(n),
            Expr::Coord(i) => match names.get(*i) {
                Some(n) => out.push_str(n),
                None => out.push_str(&format!("_x{i}")),
            },
            Expr::Neg(a) => {
                out.push('-');
                a.write_prec(out, 4, names);
            }
            Expr::Add(a, b) => {
                a.write_prec(out, 1, names);
                out.push_str(" + ");
                b.write_prec(out, 2, names);
            }
            Expr::Sub(a, b) => {
                a.write_prec(out, 1, names);
                out.push_str(" - ");
                b.write_prec(out, 2, names);
            }
            Expr::Mul(a, b) => {
                a.write_prec(out, 2, names);
                out.push('*');
                b.write_prec(out, 3, names);
            }
            Expr::Div(a, b) => {
                a.write_prec(out, 2, names);
                out.push('/');
                b.write_prec(out, 3, names);
            }
            Expr::Pow(a, b) => {
                a.write_prec(out, 5, names);
                out.push('^');
                b.write_prec(out, 4, names);
            }
            Expr::Call(f, a) => {
                out.push_str(f.name());
                out.push('(');
                a.write_prec(out, 0, names);
                out.push(')');
            }
        }
        if paren {
            out.push(')');
        }
    }
}

fn format_literal(v: f64) -> String {
    // Debug formatting is the shortest string that parses back to `v`.
    let s = format!("{v:?}");
    match s.strip_suffix(".0") {
        Some(t) => t.to_string(),
        None => s,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_source(&[]))
    }
}

fn simplify_call(f: Func, arg: Expr) -> Expr {
    match arg {
        Expr::Num(v) => Expr::Num(f.apply_f64(v)),
        a => Expr::Call(f, Box::new(a)),
    }
}

fn simplify_pow(base: Expr, e: Expr) -> Expr {
    match (&base, &e) {
        (Expr::Num(a), Expr::Num(b)) => Expr::Num(a.powf(*b)),
        (_, Expr::Num(b)) if *b == 0.0 => Expr::one(),
        (_, Expr::Num(b)) if *b == 1.0 => base,
        (Expr::Num(a), _) if *a == 1.0 => Expr::one(),
        _ => Expr::Pow(Box::new(base), Box::new(e)),
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(-v),
            Expr::Neg(a) => *a,
            a => Expr::Neg(Box::new(a)),
        }
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Num(a), Expr::Num(b)) => Expr::Num(a + b),
            (a, b) if b.is_zero() => a,
            (a, b) if a.is_zero() => b,
            (a, Expr::Neg(b)) => Expr::Sub(Box::new(a), b),
            (a, b) => Expr::Add(Box::new(a), Box::new(b)),
        }
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Num(a), Expr::Num(b)) => Expr::Num(a - b),
            (a, b) if b.is_zero() => a,
            (a, b) if a.is_zero() => -b,
            (a, Expr::Neg(b)) => Expr::Add(Box::new(a), b),
            (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Num(a), Expr::Num(b)) => Expr::Num(a * b),
            (a, b) if a.is_zero() || b.is_zero() => Expr::zero(),
            (a, b) if a.is_one() => b,
            (a, b) if b.is_one() => a,
            (Expr::Num(a), b) if a == -1.0 => -b,
            (a, Expr::Num(b)) if b == -1.0 => -a,
            // keep numeric factors in front
            (a, Expr::Num(b)) => Expr::Mul(Box::new(Expr::Num(b)), Box::new(a)),
            (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Num(a), Expr::Num(b)) if b != 0.0 => Expr::Num(a / b),
            (a, _) if a.is_zero() => Expr::zero(),
            (a, b) if b.is_one() => a,
            (a, b) => Expr::Div(Box::new(a), Box::new(b)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bound(src: &str, coords: &[&str]) -> Expr {
        let names: Vec<String> = coords.iter().map(|s| s.to_string()).collect();
        parse(src).unwrap().bind(&names, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn eval_precedence() {
        let e = bound("1 + 2*x^2 - -3/x", &["x"]);
        assert_eq!(e.eval(&[2.0_f64]), 1.0 + 8.0 + 1.5);
        assert_eq!(bound("-x^2", &["x"]).eval(&[3.0_f64]), -9.0);
        assert_eq!(bound("2^3^2", &[]).eval::<f64>(&[]), 512.0);
    }

    #[test]
    fn derivatives_of_elementary_functions() {
        let e = bound("sin(x)*exp(y) + log(x) + sqrt(y) + x^y", &["x", "y"]);
        let (x, y) = (0.7_f64, 1.3_f64);
        let dx = e.diff(0).eval(&[x, y]);
        let dy = e.diff(1).eval(&[x, y]);
        let want_dx = x.cos() * y.exp() + 1.0 / x + y * x.powf(y - 1.0);
        let want_dy = x.sin() * y.exp() + 0.5 / y.sqrt() + x.powf(y) * x.ln();
        assert!((dx - want_dx).abs() < 1e-14);
        assert!((dy - want_dy).abs() < 1e-14);
    }

    #[test]
    fn bind_rejects_unknown_identifier() {
        let err = parse("x + foo").unwrap().bind(&["x".to_string()], &BTreeMap::new());
        assert_eq!(err, Err(Error::UnknownIdentifier { name: "foo".into() }));
    }

    #[test]
    fn params_substitute_as_numbers() {
        let mut p = BTreeMap::new();
        p.insert("k".to_string(), 2.0);
        let e = parse("k/y^2").unwrap().bind(&["y".to_string()], &p).unwrap();
        assert_eq!(e.eval(&[2.0_f64]), 0.5);
    }

    #[test]
    fn source_round_trip() {
        let names = vec!["x".to_string(), "y".to_string()];
        for src in ["-(x - y)^2/(1 + x)", "x - (y - 1)", "2^-x", "-1.5*x + 1e-3", "x/(y*x)"] {
            let e = parse(src).unwrap().bind(&names, &BTreeMap::new()).unwrap();
            let printed = e.to_source(&names);
            let again = parse(&printed).unwrap().bind(&names, &BTreeMap::new()).unwrap();
            for pt in [[0.3, 1.7], [-2.0, 0.4]] {
                assert_eq!(e.eval(&pt), again.eval(&pt), "{src} -> {printed}");
            }
        }
    }

    #[test]
    fn compose_substitutes_coordinates() {
        let e = bound("x*y", &["x", "y"]);
        let c = e.compose(&[Expr::coord(0) + Expr::one(), Expr::num(3.0)]);
        assert_eq!(c.eval(&[2.0_f64]), 9.0);
    }
}
