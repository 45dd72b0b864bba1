//! Differential forms stored sparsely by strictly increasing multi-index.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::chart::{same_chart, Chart, ChartPoint};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::scalar::Real;

/// Sorts `idx` in place and returns the permutation sign, or `None` when an
/// index repeats.
pub fn sort_with_sign(idx: &mut [usize]) -> Option<i32> {
    let mut sign = 1;
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && idx[j - 1] > idx[j] {
            idx.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(sign)
    }
}

/// Sign and merged index of `dx^I ∧ dx^J`, or `None` if they share an index.
pub fn shuffle(a: &[usize], b: &[usize]) -> Option<(i32, Vec<usize>)> {
    let mut idx: Vec<usize> = a.iter().chain(b).copied().collect();
    sort_with_sign(&mut idx).map(|s| (s, idx))
}

/// Number of strictly increasing index tuples of length `k` over `n`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// All strictly increasing index tuples of length `k` in `0..n`.
pub fn multi_indices(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::with_capacity(binomial(n, k));
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// A k-form evaluated at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct FormValue<T> {
    pub dimension: usize,
    pub degree: usize,
    pub coefficients: BTreeMap<Vec<usize>, T>,
}

impl<T: Real> FormValue<T> {
    pub fn zero(dimension: usize, degree: usize) -> Self {
        FormValue { dimension, degree, coefficients: BTreeMap::new() }
    }

    pub fn scalar(dimension: usize, v: T) -> Self {
        let mut f = Self::zero(dimension, 0);
        f.coefficients.insert(Vec::new(), v);
        f
    }

    /// Dense covector as a degree-1 value.
    pub fn from_covector(v: &[T]) -> Self {
        let mut f = Self::zero(v.len(), 1);
        for (i, &c) in v.iter().enumerate() {
            f.add_term(vec![i], c);
        }
        f
    }

    /// Degree-2 value from the upper triangle of a (not necessarily
    /// antisymmetric) matrix `m`, read as `Σ_{i<j} m_ij dx^i∧dx^j`.
    pub fn from_upper(m: &DMatrix<T>) -> Self {
        let n = m.nrows();
        let mut f = Self::zero(n, 2);
        for i in 0..n {
            for j in i + 1..n {
                f.add_term(vec![i, j], m[(i, j)]);
            }
        }
        f
    }

    /// Adds `c dx^idx` with `idx` in any order.
    pub fn add_term(&mut self, mut idx: Vec<usize>, c: T) {
        if let Some(s) = sort_with_sign(&mut idx) {
            let v = if s < 0 { -c } else { c };
            let e = self.coefficients.entry(idx).or_insert_with(T::zero);
            *e += v;
        }
    }

    pub fn get(&self, idx: &[usize]) -> T {
        let mut sorted = idx.to_vec();
        match sort_with_sign(&mut sorted) {
            None => T::zero(),
            Some(s) => {
                let v = self.coefficients.get(&sorted).copied().unwrap_or_else(T::zero);
                if s < 0 {
                    -v
                } else {
                    v
                }
            }
        }
    }

    /// Scalar value of a 0-form.
    pub fn value(&self) -> T {
        self.get(&[])
    }

    pub fn to_covector(&self) -> Vec<T> {
        (0..self.dimension).map(|i| self.get(&[i])).collect()
    }

    /// Full antisymmetric matrix of a 2-form: `M_ij = α(∂_i, ∂_j)`.
    pub fn to_matrix(&self) -> DMatrix<T> {
        let n = self.dimension;
        DMatrix::from_fn(n, n, |i, j| self.get(&[i, j]))
    }

    pub fn wedge(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.dimension, self.degree + other.degree);
        for (a, &ca) in &self.coefficients {
            for (b, &cb) in &other.coefficients {
                if let Some((s, idx)) = shuffle(a, b) {
                    let v = ca * cb;
                    let e = out.coefficients.entry(idx).or_insert_with(T::zero);
                    *e += if s < 0 { -v } else { v };
                }
            }
        }
        out
    }

    /// `X⌟α`, contracting the first slot.
    pub fn interior(&self, x: &[T]) -> Self {
        let mut out = Self::zero(self.dimension, self.degree.saturating_sub(1));
        if self.degree == 0 {
            return out;
        }
        for (idx, &c) in &self.coefficients {
            for (r, &i) in idx.iter().enumerate() {
                let mut rest = idx.clone();
                rest.remove(r);
                let v = x[i] * c;
                let e = out.coefficients.entry(rest).or_insert_with(T::zero);
                *e += if r % 2 == 1 { -v } else { v };
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (idx, &c) in &other.coefficients {
            let e = out.coefficients.entry(idx.clone()).or_insert_with(T::zero);
            *e += c;
        }
        out
    }

    pub fn scale(&self, s: T) -> Self {
        FormValue {
            dimension: self.dimension,
            degree: self.degree,
            coefficients: self.coefficients.iter().map(|(k, &v)| (k.clone(), v * s)).collect(),
        }
    }

    pub fn max_norm(&self) -> T {
        self.coefficients.values().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Top-degree coefficient (`dx^0∧…∧dx^{n-1}`).
    pub fn top_coefficient(&self) -> T {
        self.get(&(0..self.dimension).collect::<Vec<_>>())
    }
}

/// A k-form field on a chart.
#[derive(Debug, Clone)]
pub struct KForm<T> {
    chart: Arc<Chart>,
    degree: usize,
    coefficients: BTreeMap<Vec<usize>, ScalarField<T>>,
}

impl<T: Real> KForm<T> {
    pub fn zero(chart: Arc<Chart>, degree: usize) -> Result<Self> {
        if degree > chart.dimension() {
            return Err(Error::DegreeOverflow { degree, dimension: chart.dimension() });
        }
        Ok(KForm { chart, degree, coefficients: BTreeMap::new() })
    }

    /// Builds a form from `(index tuple, coefficient)` terms. Tuples may be
    /// unsorted; they are normalized with the permutation sign, and terms
    /// with a repeated index are dropped.
    pub fn from_terms(
        chart: Arc<Chart>,
        degree: usize,
        terms: impl IntoIterator<Item = (Vec<usize>, ScalarField<T>)>,
    ) -> Result<Self> {
        let mut f = Self::zero(chart, degree)?;
        for (idx, c) in terms {
            if idx.len() != degree {
                return Err(Error::InvalidForm(format!("index tuple {idx:?} has length {}, expected {degree}", idx.len())));
            }
            if let Some(&bad) = idx.iter().find(|&&i| i >= f.chart.dimension()) {
                return Err(Error::InvalidForm(format!("index {bad} out of range for dimension {}", f.chart.dimension())));
            }
            f.add_term(idx, c);
        }
        Ok(f)
    }

    /// Dense one-form `Σ c_i dx^i`.
    pub fn one_form(chart: Arc<Chart>, components: Vec<ScalarField<T>>) -> Result<Self> {
        if components.len() != chart.dimension() {
            return Err(Error::InvalidForm(format!(
                "{} components for dimension {}",
                components.len(),
                chart.dimension()
            )));
        }
        Self::from_terms(chart, 1, components.into_iter().enumerate().map(|(i, c)| (vec![i], c)))
    }

    /// `df` for a scalar field.
    pub fn differential(chart: Arc<Chart>, f: &ScalarField<T>) -> Self {
        let n = chart.dimension();
        let mut out = KForm { chart, degree: 1, coefficients: BTreeMap::new() };
        for i in 0..n {
            out.add_term(vec![i], f.partial(i));
        }
        out
    }

    fn add_term(&mut self, mut idx: Vec<usize>, c: ScalarField<T>) {
        if c.is_zero() {
            return;
        }
        if let Some(s) = sort_with_sign(&mut idx) {
            let c = if s < 0 { -c } else { c };
            let merged = match self.coefficients.remove(&idx) {
                Some(old) => old + c,
                None => c,
            };
            if !merged.is_zero() {
                self.coefficients.insert(idx, merged);
            }
        }
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coefficients(&self) -> &BTreeMap<Vec<usize>, ScalarField<T>> {
        &self.coefficients
    }

    pub fn coefficient(&self, idx: &[usize]) -> Option<&ScalarField<T>> {
        self.coefficients.get(idx)
    }

    pub fn wedge(&self, other: &Self) -> Result<Self> {
        same_chart(&other.chart, &self.chart)?;
        let mut out = Self::zero(self.chart.clone(), self.degree + other.degree)?;
        for (a, ca) in &self.coefficients {
            for (b, cb) in &other.coefficients {
                if let Some((s, idx)) = shuffle(a, b) {
                    let v = ca.clone() * cb.clone();
                    out.add_term(idx, if s < 0 { -v } else { v });
                }
            }
        }
        Ok(out)
    }

    /// Exterior derivative; requires `degree < dimension`.
    pub fn exterior_derivative(&self) -> Result<Self> {
        let mut out = Self::zero(self.chart.clone(), self.degree + 1)?;
        for (idx, c) in &self.coefficients {
            for j in 0..self.chart.dimension() {
                if idx.contains(&j) {
                    continue;
                }
                let mut full = vec![j];
                full.extend_from_slice(idx);
                out.add_term(full, c.partial(j));
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_chart(&other.chart, &self.chart)?;
        if self.degree != other.degree {
            return Err(Error::InvalidForm(format!("cannot add degrees {} and {}", self.degree, other.degree)));
        }
        let mut out = self.clone();
        for (idx, c) in &other.coefficients {
            out.add_term(idx.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn scale(&self, s: &ScalarField<T>) -> Self {
        let mut out = KForm { chart: self.chart.clone(), degree: self.degree, coefficients: BTreeMap::new() };
        for (idx, c) in &self.coefficients {
            out.add_term(idx.clone(), s.clone() * c.clone());
        }
        out
    }

    /// Same form with every coefficient differentiated by finite differences.
    pub fn to_finite_difference(&self) -> Self {
        KForm {
            chart: self.chart.clone(),
            degree: self.degree,
            coefficients: self.coefficients.iter().map(|(k, v)| (k.clone(), v.to_finite_difference())).collect(),
        }
    }

    /// Evaluates at raw coordinates without checking guards.
    pub fn eval_raw(&self, x: &[T]) -> FormValue<T> {
        FormValue {
            dimension: self.chart.dimension(),
            degree: self.degree,
            coefficients: self.coefficients.iter().map(|(k, c)| (k.clone(), c.eval(x))).collect(),
        }
    }

    pub fn evaluate(&self, at: &ChartPoint<T>) -> Result<FormValue<T>> {
        at.require_chart(&self.chart)?;
        Ok(self.eval_raw(at.values()))
    }

    /// `X⌟f` at a point.
    pub fn interior_product(&self, x: &VectorField<T>, at: &ChartPoint<T>) -> Result<FormValue<T>> {
        if x.components.len() != self.chart.dimension() {
            return Err(Error::ChartMismatch {
                expected: format!("{} (dimension {})", self.chart.name(), self.chart.dimension()),
                found: format!("vector field with {} components", x.components.len()),
            });
        }
        if self.degree == 0 {
            return Err(Error::InvalidForm("interior product of a 0-form".into()));
        }
        let v = self.evaluate(at)?;
        Ok(v.interior(&x.eval(at.values())))
    }
}

/// A smooth map between charts given by one component field per target
/// coordinate, each a function of the source coordinates.
#[derive(Debug, Clone)]
pub struct ChartMap<T> {
    source: Arc<Chart>,
    target: Arc<Chart>,
    components: Vec<ScalarField<T>>,
}

impl<T: Real> ChartMap<T> {
    pub fn new(source: Arc<Chart>, target: Arc<Chart>, components: Vec<ScalarField<T>>) -> Result<Self> {
        if components.len() != target.dimension() {
            return Err(Error::InvalidChart(format!(
                "map into `{}` needs {} components, got {}",
                target.name(),
                target.dimension(),
                components.len()
            )));
        }
        Ok(ChartMap { source, target, components })
    }

    pub fn identity(chart: Arc<Chart>) -> Self {
        let n = chart.dimension();
        ChartMap { source: chart.clone(), target: chart, components: (0..n).map(ScalarField::coordinate).collect() }
    }

    pub fn source(&self) -> &Arc<Chart> {
        &self.source
    }

    pub fn target(&self) -> &Arc<Chart> {
        &self.target
    }

    pub fn components(&self) -> &[ScalarField<T>] {
        &self.components
    }

    /// Same map with finite-difference Jacobian.
    pub fn to_finite_difference(&self) -> Self {
        ChartMap {
            source: self.source.clone(),
            target: self.target.clone(),
            components: self.components.iter().map(|c| c.to_finite_difference()).collect(),
        }
    }

    /// Image point; errors if it violates a target guard.
    pub fn apply(&self, at: &ChartPoint<T>) -> Result<ChartPoint<T>> {
        at.require_chart(&self.source)?;
        let y = self.components.iter().map(|c| c.eval(at.values())).collect();
        ChartPoint::new(self.target.clone(), y)
    }

    /// `J[a][i] = ∂y^a/∂x^i`.
    pub fn jacobian(&self, at: &ChartPoint<T>) -> Result<DMatrix<T>> {
        at.require_chart(&self.source)?;
        let x = at.values();
        Ok(DMatrix::from_fn(self.target.dimension(), self.source.dimension(), |a, i| {
            self.components[a].partial_at(i, x)
        }))
    }

    /// Pushforward of a tangent vector.
    pub fn push_vector(&self, at: &ChartPoint<T>, v: &[T]) -> Result<Vec<T>> {
        let j = self.jacobian(at)?;
        Ok((j * DVector::from_column_slice(v)).iter().copied().collect())
    }

    /// `m^* f` at a source point, by Jacobian minors:
    /// `(m^* f)_J = Σ_I f_I(m(x)) det(∂y^I/∂x^J)`.
    pub fn pullback(&self, f: &KForm<T>, at: &ChartPoint<T>) -> Result<FormValue<T>> {
        same_chart(&f.chart, &self.target)?;
        let image = self.apply(at)?;
        let value = f.evaluate(&image)?;
        let jac = self.jacobian(at)?;
        Ok(pullback_value(&value, &jac))
    }

    /// Pullback of a scalar field: `f ∘ m` as a field on the source.
    pub fn pullback_function(&self, f: &ScalarField<T>) -> ScalarField<T> {
        f.compose(&self.components)
    }
}

/// Pulls back a form value through a Jacobian `J` (target × source).
pub fn pullback_value<T: Real>(value: &FormValue<T>, jac: &DMatrix<T>) -> FormValue<T> {
    let n = jac.ncols();
    let k = value.degree;
    let mut out = FormValue::zero(n, k);
    for src in multi_indices(n, k) {
        let mut acc = T::zero();
        for (tgt, &c) in &value.coefficients {
            let minor = DMatrix::from_fn(k, k, |r, s| jac[(tgt[r], src[s])]);
            acc += c * if k == 0 { T::one() } else { minor.determinant() };
        }
        if acc != T::zero() {
            out.coefficients.insert(src, acc);
        }
    }
    out
}
