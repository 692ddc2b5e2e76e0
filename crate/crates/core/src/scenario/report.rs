//! Scenario reports and their renderings.

use std::fmt::Write as _;

use serde::Serialize;

use super::config::{matrix_to_literal, MatrixLiteral, OutputFormat, ScenarioConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expectation {
    pub observable: String,
    pub value: f64,
}

/// One input label of one procedure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputReport {
    pub m: usize,
    pub probability: f64,
    /// System input state.
    pub prepared: MatrixLiteral,
    /// Environment state right after preparation.
    pub environment: MatrixLiteral,
    /// Reduced system state after the dynamics.
    pub output: MatrixLiteral,
    pub expectations: Vec<Expectation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TomographyReport {
    /// Column-stacking superoperator of the reconstructed map.
    pub process: MatrixLiteral,
    pub choi_min_eigenvalue: f64,
    pub is_cp: bool,
    pub tp_deviation: f64,
    pub linearity_residual: f64,
    pub choi_hermiticity_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcedureReport {
    pub label: String,
    pub kind: String,
    /// Set when the procedure could not be run; the other fields are then empty.
    pub error: Option<String>,
    pub inputs: Vec<InputReport>,
    /// Largest trace distance between prepared environment states.
    pub environment_dependence: Option<f64>,
    pub tomography: Option<TomographyReport>,
    pub tomography_error: Option<String>,
}

impl ProcedureReport {
    pub fn failed(&self) -> bool {
        self.error.is_some() || self.tomography_error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDistance {
    pub m: usize,
    pub trace_distance: f64,
}

/// Output trace distances between two procedures, over the labels whose
/// system inputs agree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub first: String,
    pub second: String,
    pub distances: Vec<InputDistance>,
    pub max_trace_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub tool: String,
    pub version: String,
    pub scenario: String,
    pub description: String,
    pub dim_s: usize,
    pub dim_e: usize,
    /// `‖ρ_SE − ρ_S ⊗ ρ_E‖_F` of the initial state.
    pub initial_correlation_norm: f64,
    pub dynamics_factorized: bool,
    pub observables: Vec<String>,
    pub procedures: Vec<ProcedureReport>,
    pub comparisons: Vec<Comparison>,
    /// The config as run, after command-line overrides.
    pub config: ScenarioConfig,
}

impl ScenarioReport {
    pub fn has_failures(&self) -> bool {
        self.procedures.iter().any(ProcedureReport::failed)
    }

    pub fn procedure(&self, label: &str) -> Option<&ProcedureReport> {
        self.procedures.iter().find(|p| p.label == label)
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Table => self.to_table(),
            OutputFormat::Json => self.to_json(),
            OutputFormat::Csv => self.to_csv(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} :: scenario {}",
            self.tool, self.version, self.scenario
        );
        if !self.description.is_empty() {
            let _ = writeln!(out, "  {}", self.description.trim());
        }
        let _ = writeln!(
            out,
            "  dims S={} E={}  initial correlation {:.6}  dynamics {}",
            self.dim_s,
            self.dim_e,
            self.initial_correlation_norm,
            if self.dynamics_factorized {
                "factorized"
            } else {
                "entangling"
            }
        );
        for p in &self.procedures {
            let _ = writeln!(out, "\n[{}] {}", p.label, p.kind);
            if let Some(e) = &p.error {
                let _ = writeln!(out, "  FAILED: {e}");
                continue;
            }
            let mut header = format!(
                "  {:>3}  {:>11}  {:>10}  {:>10}",
                "m", "probability", "env purity", "out purity"
            );
            for o in &self.observables {
                let _ = write!(header, "  {:>9}", format!("<{o}>"));
            }
            let _ = writeln!(out, "{header}");
            for i in &p.inputs {
                let _ = write!(
                    out,
                    "  {:>3}  {:>11.6}  {:>10.6}  {:>10.6}",
                    i.m,
                    i.probability,
                    purity(&i.environment),
                    purity(&i.output)
                );
                for e in &i.expectations {
                    let _ = write!(out, "  {:>9.6}", e.value);
                }
                let _ = writeln!(out);
            }
            if let Some(d) = p.environment_dependence {
                let _ = writeln!(out, "  environment dependence  {d:.6}");
            }
            if let Some(t) = &p.tomography {
                let _ = writeln!(
                    out,
                    "  process map: {}  choi min eigenvalue {:.6}  tp deviation {:.3e}  linearity residual {:.3e}",
                    if t.is_cp { "CP" } else { "NOT CP" },
                    t.choi_min_eigenvalue,
                    t.tp_deviation,
                    t.linearity_residual
                );
            }
            if let Some(e) = &p.tomography_error {
                let _ = writeln!(out, "  tomography FAILED: {e}");
            }
        }
        if !self.comparisons.is_empty() {
            let _ = writeln!(out, "\noutput trace distances");
            for c in &self.comparisons {
                let per: Vec<String> = c
                    .distances
                    .iter()
                    .map(|d| format!("m={}: {:.6}", d.m, d.trace_distance))
                    .collect();
                let _ = writeln!(
                    out,
                    "  {} vs {}  max {:.6}  ({})",
                    c.first,
                    c.second,
                    c.max_trace_distance,
                    per.join(", ")
                );
            }
        }
        out
    }

    /// One row per procedure input. Matrix entries are flattened row-major
    /// as `<name>_<i><j>_re` / `_im` columns.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = [
            "procedure",
            "kind",
            "m",
            "probability",
            "environment_dependence",
            "error",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(self.observables.iter().map(|o| format!("obs_{o}")));
        header.extend(entry_names("env", self.dim_e));
        header.extend(entry_names("out", self.dim_s));
        w.write_record(&header).expect("in-memory write");

        for p in &self.procedures {
            let dep = p.environment_dependence.map(num).unwrap_or_default();
            if let Some(e) = &p.error {
                let mut row = vec![
                    p.label.clone(),
                    p.kind.clone(),
                    String::new(),
                    String::new(),
                    dep,
                    e.clone(),
                ];
                row.resize(header.len(), String::new());
                w.write_record(&row).expect("in-memory write");
                continue;
            }
            for i in &p.inputs {
                let mut row = vec![
                    p.label.clone(),
                    p.kind.clone(),
                    i.m.to_string(),
                    num(i.probability),
                    dep.clone(),
                    String::new(),
                ];
                row.extend(i.expectations.iter().map(|e| num(e.value)));
                row.extend(entries(&i.environment));
                row.extend(entries(&i.output));
                w.write_record(&row).expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

fn entry_names(prefix: &str, dim: usize) -> Vec<String> {
    let mut v = Vec::with_capacity(2 * dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            v.push(format!("{prefix}_{i}{j}_re"));
            v.push(format!("{prefix}_{i}{j}_im"));
        }
    }
    v
}

fn entries(m: &MatrixLiteral) -> Vec<String> {
    m.iter()
        .flat_map(|row| row.iter().flat_map(|&[re, im]| [num(re), num(im)]))
        .collect()
}

/// `Tr ρ²` from a literal; for a Hermitian ρ this is the squared Frobenius norm.
fn purity(m: &MatrixLiteral) -> f64 {
    m.iter().flatten().map(|&[re, im]| re * re + im * im).sum()
}

pub(crate) fn literal(m: &crate::qmath::ComplexMatrix) -> MatrixLiteral {
    matrix_to_literal(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn purity_of_literals() {
        let mixed = vec![vec![[0.5, 0.0], [0.0, 0.0]], vec![[0.0, 0.0], [0.5, 0.0]]];
        assert!((purity(&mixed) - 0.5).abs() < 1e-15);
        let plus = vec![vec![[0.5, 0.0], [0.5, 0.0]], vec![[0.5, 0.0], [0.5, 0.0]]];
        assert!((purity(&plus) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn entry_columns_match_entries() {
        let m = vec![vec![[1.0, 2.0], [3.0, 4.0]], vec![[5.0, 6.0], [7.0, 8.0]]];
        assert_eq!(entries(&m).len(), entry_names("x", 2).len());
        assert_eq!(entry_names("x", 2)[2], "x_01_re");
        assert_eq!(entries(&m)[2], "3");
    }
}
