//! JSON documents for charts and structures.
//!
//! Form coefficients are keyed by comma-separated coordinate names
//! (`"x,y"`); keys in non-increasing order carry the permutation sign.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chart::{Chart, GuardDoc};
use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::field::ScalarField;
use crate::forms::KForm;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarbouxDoc {
    pub q: Vec<String>,
    pub p: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartDoc {
    pub name: String,
    pub coordinates: Vec<String>,
    #[serde(default)]
    pub guards: Vec<GuardDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub darboux: Option<DarbouxDoc>,
}

impl ChartDoc {
    pub fn build(&self) -> Result<Chart> {
        if self.coordinates.is_empty() {
            return Err(Error::InvalidChart("chart has no coordinates".into()));
        }
        for (i, c) in self.coordinates.iter().enumerate() {
            if self.coordinates[..i].contains(c) {
                return Err(Error::InvalidChart(format!("duplicate coordinate `{c}`")));
            }
        }
        let names: Vec<&str> = self.coordinates.iter().map(String::as_str).collect();
        let mut chart = Chart::new(self.name.clone(), &names);
        for g in &self.guards {
            chart = chart.with_guard(g.clone())?;
        }
        if let Some(d) = &self.darboux {
            let q: Vec<&str> = d.q.iter().map(String::as_str).collect();
            let p: Vec<&str> = d.p.iter().map(String::as_str).collect();
            chart = chart.with_darboux_names(&q, &p, d.kappa.as_deref())?;
        }
        Ok(chart)
    }

    pub fn from_chart(chart: &Chart) -> ChartDoc {
        let name = |i: &usize| chart.coordinates()[*i].clone();
        ChartDoc {
            name: chart.name().to_string(),
            coordinates: chart.coordinates().to_vec(),
            guards: chart.guard_docs().to_vec(),
            darboux: chart.darboux().map(|d| DarbouxDoc {
                q: d.q.iter().map(name).collect(),
                p: d.p.iter().map(name).collect(),
                kappa: d.kappa.as_ref().map(name),
            }),
        }
    }
}

/// A structure `(θ, Ω)` as loaded from or emitted to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureDoc {
    pub name: String,
    pub chart: ChartDoc,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    pub theta: BTreeMap<String, String>,
    pub omega: BTreeMap<String, String>,
}

impl StructureDoc {
    pub fn from_json(src: &str) -> Result<StructureDoc> {
        Ok(serde_json::from_str(src)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("structure documents always serialize")
    }

    /// Parses an expression over this document's coordinates and parameters.
    pub fn expr(&self, src: &str) -> Result<Expr> {
        parse(src)?.bind(&self.chart.coordinates, &self.parameters)
    }

    pub fn form<T: Real>(&self, chart: &Arc<Chart>, degree: usize, table: &BTreeMap<String, String>) -> Result<KForm<T>> {
        let mut terms = Vec::with_capacity(table.len());
        for (key, src) in table {
            let idx = key
                .split(',')
                .map(|n| {
                    let n = n.trim();
                    chart
                        .index_of(n)
                        .ok_or_else(|| Error::InvalidForm(format!("key `{key}` names unknown coordinate `{n}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            terms.push((idx, ScalarField::Symbolic(self.expr(src)?)));
        }
        KForm::from_terms(chart.clone(), degree, terms)
    }
}

/// Key for a coefficient table: coordinate names joined by commas.
pub fn form_key(chart: &Chart, idx: &[usize]) -> String {
    idx.iter().map(|&i| chart.coordinates()[i].as_str()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
        "name": "toy",
        "chart": {"name": "qpk", "coordinates": ["q", "p", "kappa"],
                  "darboux": {"q": ["q"], "p": ["p"], "kappa": "kappa"}},
        "parameters": {"s": 2.0},
        "theta": {"kappa": "1", "q": "-s*p"},
        "omega": {"p,q": "-1"}
    }"#;

    #[test]
    fn reversed_key_carries_sign() {
        let doc = StructureDoc::from_json(DOC).unwrap();
        let chart = Arc::new(doc.chart.build().unwrap());
        let w: KForm<f64> = doc.form(&chart, 2, &doc.omega).unwrap();
        assert_eq!(w.eval_raw(&[0.0, 0.0, 0.0]).get(&[0, 1]), 1.0);
        let t: KForm<f64> = doc.form(&chart, 1, &doc.theta).unwrap();
        assert_eq!(t.eval_raw(&[0.0, 3.0, 0.0]).get(&[0]), -6.0);
    }

    #[test]
    fn unknown_coordinate_in_key() {
        let mut doc = StructureDoc::from_json(DOC).unwrap();
        doc.omega.insert("q,z".into(), "1".into());
        let chart = Arc::new(doc.chart.build().unwrap());
        assert!(matches!(doc.form::<f64>(&chart, 2, &doc.omega), Err(Error::InvalidForm(_))));
    }

    #[test]
    fn chart_round_trip() {
        let doc = StructureDoc::from_json(DOC).unwrap();
        let chart = doc.chart.build().unwrap();
        assert_eq!(ChartDoc::from_chart(&chart), doc.chart);
    }
}
