//! Scalar and vector fields over a chart's coordinates.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::chart::Chart;
use crate::error::Result;
use crate::expr::Expr;
use crate::scalar::Real;

type Evaluator<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// How partial derivatives of a field are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    Symbolic,
    FiniteDifference,
}

/// A scalar function of the chart coordinates.
///
/// `Symbolic` fields carry an expression tree with exact derivatives;
/// `Opaque` fields wrap an evaluator and differentiate by central
/// differences with step `max(1, |x_i|) * eps^(1/3)`.
#[derive(Clone)]
pub enum ScalarField<T> {
    Symbolic(Expr),
    Opaque(Evaluator<T>),
}

impl<T> fmt::Debug for ScalarField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Symbolic(e) => write!(f, "Symbolic({e})"),
            ScalarField::Opaque(_) => f.write_str("Opaque(..)"),
        }
    }
}

impl<T: Real> ScalarField<T> {
    pub fn constant(v: f64) -> Self {
        ScalarField::Symbolic(Expr::Num(v))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn coordinate(i: usize) -> Self {
        ScalarField::Symbolic(Expr::Coord(i))
    }

    pub fn opaque(f: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        ScalarField::Opaque(Arc::new(f))
    }

    /// Parses `src` over `chart`, substituting `parameters`.
    pub fn parse(src: &str, chart: &Chart, parameters: &BTreeMap<String, f64>) -> Result<Self> {
        Ok(ScalarField::Symbolic(crate::expr::parse(src)?.bind(chart.coordinates(), parameters)?))
    }

    pub fn expr(&self) -> Option<&Expr> {
        match self {
            ScalarField::Symbolic(e) => Some(e),
            ScalarField::Opaque(_) => None,
        }
    }

    pub fn mode(&self) -> DerivativeMode {
        match self {
            ScalarField::Symbolic(_) => DerivativeMode::Symbolic,
            ScalarField::Opaque(_) => DerivativeMode::FiniteDifference,
        }
    }

    /// Same values, but derivatives taken by finite differences.
    pub fn to_finite_difference(&self) -> Self {
        match self {
            ScalarField::Symbolic(e) => {
                let e = e.clone();
                ScalarField::opaque(move |x| e.eval(x))
            }
            ScalarField::Opaque(_) => self.clone(),
        }
    }

    pub fn eval(&self, x: &[T]) -> T {
        match self {
            ScalarField::Symbolic(e) => e.eval(x),
            ScalarField::Opaque(f) => f(x),
        }
    }

    /// Whether the field is the literal zero (symbolic mode only).
    pub fn is_zero(&self) -> bool {
        matches!(self, ScalarField::Symbolic(e) if e.is_zero())
    }

    /// Partial derivative with respect to coordinate `i`, as a field.
    pub fn partial(&self, i: usize) -> Self {
        match self {
            ScalarField::Symbolic(e) => ScalarField::Symbolic(e.diff(i)),
            ScalarField::Opaque(f) => {
                let f = f.clone();
                ScalarField::opaque(move |x| central_difference(&*f, x, i))
            }
        }
    }

    pub fn partial_at(&self, i: usize, x: &[T]) -> T {
        match self {
            ScalarField::Symbolic(e) => e.diff(i).eval(x),
            ScalarField::Opaque(f) => central_difference(&**f, x, i),
        }
    }

    pub fn gradient_at(&self, x: &[T]) -> Vec<T> {
        (0..x.len()).map(|i| self.partial_at(i, x)).collect()
    }

    /// Composition `self ∘ (c_0, .., c_{m-1})` where `c_j` are fields on
    /// another chart.
    pub fn compose(&self, inner: &[ScalarField<T>]) -> Self {
        let all_symbolic: Option<Vec<Expr>> = inner.iter().map(|c| c.expr().cloned()).collect();
        match (self, all_symbolic) {
            (ScalarField::Symbolic(e), Some(subs)) => ScalarField::Symbolic(e.compose(&subs)),
            _ => {
                let outer = self.clone();
                let inner = inner.to_vec();
                ScalarField::opaque(move |x| {
                    let y: Vec<T> = inner.iter().map(|c| c.eval(x)).collect();
                    outer.eval(&y)
                })
            }
        }
    }

    fn combine(self, rhs: Self, sym: fn(Expr, Expr) -> Expr, num: fn(T, T) -> T) -> Self {
        match (self, rhs) {
            (ScalarField::Symbolic(a), ScalarField::Symbolic(b)) => ScalarField::Symbolic(sym(a, b)),
            (a, b) => ScalarField::opaque(move |x| num(a.eval(x), b.eval(x))),
        }
    }
}

fn central_difference<T: Real>(f: &(dyn Fn(&[T]) -> T + Send + Sync), x: &[T], i: usize) -> T {
    let h = T::fd_step(x[i]);
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[i] += h;
    xm[i] -= h;
    // use the representable step actually taken
    let span = xp[i] - xm[i];
    (f(&xp) - f(&xm)) / span
}

impl<T: Real> std::ops::Add for ScalarField<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.combine(rhs, |a, b| a + b, |a, b| a + b)
    }
}

impl<T: Real> std::ops::Sub for ScalarField<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.combine(rhs, |a, b| a - b, |a, b| a - b)
    }
}

impl<T: Real> std::ops::Mul for ScalarField<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.combine(rhs, |a, b| a * b, |a, b| a * b)
    }
}

impl<T: Real> std::ops::Div for ScalarField<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        self.combine(rhs, |a, b| a / b, |a, b| a / b)
    }
}

impl<T: Real> std::ops::Neg for ScalarField<T> {
    type Output = Self;
    fn neg(self) -> Self {
        match self {
            ScalarField::Symbolic(e) => ScalarField::Symbolic(-e),
            ScalarField::Opaque(f) => ScalarField::opaque(move |x| -f(x)),
        }
    }
}

impl<T: Real> From<Expr> for ScalarField<T> {
    fn from(e: Expr) -> Self {
        ScalarField::Symbolic(e)
    }
}

/// A vector field: one component field per coordinate.
#[derive(Debug, Clone)]
pub struct VectorField<T> {
    pub components: Vec<ScalarField<T>>,
}

impl<T: Real> VectorField<T> {
    pub fn new(components: Vec<ScalarField<T>>) -> Self {
        VectorField { components }
    }

    /// Coordinate vector field `∂/∂x^i` on a chart of dimension `dim`.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        VectorField {
            components: (0..dim).map(|j| ScalarField::constant(if i == j { 1.0 } else { 0.0 })).collect(),
        }
    }

    pub fn eval(&self, x: &[T]) -> Vec<T> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    /// Directional derivative `X(f)` at `x`.
    pub fn apply(&self, f: &ScalarField<T>, x: &[T]) -> T {
        self.components
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, c)| acc + c.eval(x) * f.partial_at(i, x))
    }
}
