//! Coordinate charts, domain guards and chart points.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::scalar::Real;

/// Direction of a domain inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Greater,
    Less,
}

/// Inequality `lhs > bound` (or `<`, `>=`, `<=`) that every in-domain point
/// must satisfy. The left side is usually a single coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainGuard {
    pub label: String,
    pub lhs: Expr,
    pub bound: f64,
    pub kind: Bound,
    pub strict: bool,
}

impl DomainGuard {
    pub fn holds<T: Real>(&self, x: &[T]) -> (bool, f64) {
        let v = self.lhs.eval(x).as_f64();
        let ok = match (self.kind, self.strict) {
            (Bound::Greater, true) => v > self.bound,
            (Bound::Greater, false) => v >= self.bound,
            (Bound::Less, true) => v < self.bound,
            (Bound::Less, false) => v <= self.bound,
        };
        (ok, v)
    }
}

impl fmt::Display for DomainGuard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match (self.kind, self.strict) {
            (Bound::Greater, true) => ">",
            (Bound::Greater, false) => ">=",
            (Bound::Less, true) => "<",
            (Bound::Less, false) => "<=",
        };
        write!(f, "{} {} {}", self.label, op, self.bound)
    }
}

/// Serialized form of a guard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expression: Option<String>,
    pub bound: f64,
    pub kind: Bound,
    #[serde(default = "default_strict")]
    pub strict: bool,
}

fn default_strict() -> bool {
    true
}

/// Positions of `(q^i, p_i, kappa)` within a chart's coordinate list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DarbouxLayout {
    pub q: Vec<usize>,
    pub p: Vec<usize>,
    pub kappa: Option<usize>,
}

impl DarbouxLayout {
    pub fn n(&self) -> usize {
        self.q.len()
    }
}

/// A named coordinate chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    name: String,
    coordinates: Vec<String>,
    guards: Vec<DomainGuard>,
    guard_docs: Vec<GuardDoc>,
    darboux: Option<DarbouxLayout>,
}

impl Chart {
    pub fn new(name: impl Into<String>, coordinates: &[&str]) -> Chart {
        Chart {
            name: name.into(),
            coordinates: coordinates.iter().map(|s| s.to_string()).collect(),
            guards: Vec::new(),
            guard_docs: Vec::new(),
            darboux: None,
        }
    }

    /// Adds a guard `coordinate > bound` (strict) or `>=`.
    pub fn with_lower(self, coordinate: &str, bound: f64, strict: bool) -> Result<Chart> {
        self.with_guard(GuardDoc {
            coordinate: Some(coordinate.into()),
            expression: None,
            bound,
            kind: Bound::Greater,
            strict,
        })
    }

    pub fn with_guard(mut self, doc: GuardDoc) -> Result<Chart> {
        let (label, src) = match (&doc.coordinate, &doc.expression) {
            (Some(c), None) => (c.clone(), c.clone()),
            (None, Some(e)) => (e.clone(), e.clone()),
            _ => {
                return Err(Error::InvalidChart(
                    "guard needs exactly one of `coordinate` or `expression`".into(),
                ))
            }
        };
        let lhs = parse(&src)?.bind(&self.coordinates, &BTreeMap::new()).map_err(|e| match e {
            Error::UnknownIdentifier { name } => {
                Error::InvalidChart(format!("guard references undeclared coordinate `{name}`"))
            }
            other => other,
        })?;
        self.guards.push(DomainGuard { label, lhs, bound: doc.bound, kind: doc.kind, strict: doc.strict });
        self.guard_docs.push(doc);
        Ok(self)
    }

    pub fn with_darboux(mut self, layout: DarbouxLayout) -> Result<Chart> {
        let d = self.dimension();
        let all = layout.q.iter().chain(&layout.p).chain(layout.kappa.iter());
        if layout.q.len() != layout.p.len() || all.clone().any(|&i| i >= d) {
            return Err(Error::InvalidChart("inconsistent Darboux layout".into()));
        }
        self.darboux = Some(layout);
        Ok(self)
    }

    /// Darboux layout from coordinate names.
    pub fn with_darboux_names(self, q: &[&str], p: &[&str], kappa: Option<&str>) -> Result<Chart> {
        let idx = |n: &str| {
            self.index_of(n)
                .ok_or_else(|| Error::InvalidChart(format!("unknown coordinate `{n}` in Darboux layout")))
        };
        let layout = DarbouxLayout {
            q: q.iter().map(|n| idx(n)).collect::<Result<_>>()?,
            p: p.iter().map(|n| idx(n)).collect::<Result<_>>()?,
            kappa: kappa.map(idx).transpose()?,
        };
        self.with_darboux(layout)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn coordinates(&self) -> &[String] {
        &self.coordinates
    }

    pub fn dimension(&self) -> usize {
        self.coordinates.len()
    }

    pub fn guards(&self) -> &[DomainGuard] {
        &self.guards
    }

    pub fn guard_docs(&self) -> &[GuardDoc] {
        &self.guard_docs
    }

    pub fn darboux(&self) -> Option<&DarbouxLayout> {
        self.darboux.as_ref()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.coordinates.iter().position(|c| c == name)
    }

    /// Checks length and every guard; first violation is an error.
    pub fn check<T: Real>(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::PointLength {
                chart: self.name.clone(),
                expected: self.dimension(),
                found: x.len(),
            });
        }
        for g in &self.guards {
            let (ok, v) = g.holds(x);
            if !ok {
                return Err(Error::Domain { chart: self.name.clone(), guard: g.to_string(), value: v });
            }
        }
        Ok(())
    }

    pub fn contains<T: Real>(&self, x: &[T]) -> bool {
        self.check(x).is_ok()
    }

    /// Sampling box per coordinate. Coordinates with a single-coordinate
    /// lower (upper) guard are sampled in `[b + 0.25, b + 3]`
    /// (`[b - 3, b - 0.25]`); the rest in `[-2, 2]`.
    pub fn sample_box(&self) -> Vec<(f64, f64)> {
        let mut boxes = vec![(-2.0, 2.0); self.dimension()];
        for g in &self.guards {
            if let Expr::Coord(i) = g.lhs {
                boxes[i] = match g.kind {
                    Bound::Greater => (g.bound + 0.25, g.bound + 3.0),
                    Bound::Less => (g.bound - 3.0, g.bound - 0.25),
                };
            }
        }
        boxes
    }

    /// Deterministic quasi-random in-domain points (Halton sequence over the
    /// sampling box, skipping candidates that violate a guard).
    pub fn probe_points<T: Real>(self: &Arc<Self>, count: usize) -> Vec<ChartPoint<T>> {
        let boxes = self.sample_box();
        let mut out = Vec::with_capacity(count);
        let mut idx = 1u64;
        while out.len() < count && idx < 1_000_000 {
            let x: Vec<T> = boxes
                .iter()
                .enumerate()
                .map(|(d, (lo, hi))| T::lit(lo + (hi - lo) * halton(idx, PRIMES[d % PRIMES.len()])))
                .collect();
            idx += 1;
            if let Ok(p) = ChartPoint::new(self.clone(), x) {
                out.push(p);
            }
        }
        out
    }
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// A point on a chart that satisfied every domain guard at construction.
#[derive(Debug, Clone)]
pub struct ChartPoint<T> {
    chart: Arc<Chart>,
    values: Vec<T>,
}

impl<T: Real> ChartPoint<T> {
    pub fn new(chart: Arc<Chart>, values: Vec<T>) -> Result<Self> {
        chart.check(&values)?;
        Ok(ChartPoint { chart, values })
    }

    pub fn from_f64(chart: Arc<Chart>, values: &[f64]) -> Result<Self> {
        Self::new(chart, values.iter().map(|&v| T::lit(v)).collect())
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<T> {
        self.chart.index_of(name).map(|i| self.values[i])
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn require_chart(&self, chart: &Chart) -> Result<()> {
        same_chart(&self.chart, chart)
    }
}

/// Charts are compared by name and coordinate list.
pub fn same_chart(a: &Chart, b: &Chart) -> Result<()> {
    if a.name == b.name && a.coordinates == b.coordinates {
        Ok(())
    } else {
        Err(Error::ChartMismatch { expected: b.name.clone(), found: a.name.clone() })
    }
}
