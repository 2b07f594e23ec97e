//! Report objects and their JSON and plain-text renderings.

use serde::{Serialize, Serializer};

use crate::optimality::{Certificate, ResidualRow, Verdict};
use crate::solver::{SolveResult, SolveStatus};

/// A float that serializes non-finite values as the strings `"inf"`,
/// `"-inf"` and `"nan"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Value(pub f64);

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let x = self.0;
        if x.is_finite() {
            s.serialize_f64(x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let x = self.0;
        if x.is_finite() && x != 0.0 && (x.abs() < 1e-4 || x.abs() >= 1e8) {
            write!(f, "{x:.6e}")
        } else if x.is_finite() {
            write!(f, "{x:.9}")
        } else {
            write!(f, "{x}")
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Values {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primal: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Named {
    pub name: String,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictEntry {
    pub name: String,
    pub verdict: String,
}

impl VerdictEntry {
    pub fn new(name: &str, verdict: &str) -> Self {
        VerdictEntry {
            name: name.into(),
            verdict: verdict.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub phase: String,
    pub method: String,
    pub status: SolveStatus,
    pub iterations: usize,
    pub residual: Value,
}

impl Diagnostics {
    pub fn new(phase: &str, method: &str, r: &SolveResult) -> Self {
        Diagnostics {
            phase: phase.into(),
            method: method.into(),
            status: r.status,
            iterations: r.iterations,
            residual: Value(r.residual),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub condition: String,
    pub stage: Option<usize>,
    pub node: usize,
    pub residual: Value,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateEntry {
    pub checker: String,
    pub verdict: Verdict,
    pub tol: f64,
    pub max_residual: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// `E f(x, u) - (<u, y> - E f*(v, y))` at the candidate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value_gap: Option<Value>,
    pub rows: Vec<Row>,
}

impl CertificateEntry {
    pub fn new(cert: &Certificate, value_gap: Option<f64>) -> Self {
        let row = |r: &ResidualRow| Row {
            condition: r.condition.clone(),
            stage: r.stage,
            node: r.node,
            residual: Value(r.residual),
            ok: r.residual <= cert.tol,
        };
        CertificateEntry {
            checker: cert.checker.clone(),
            verdict: cert.verdict,
            tol: cert.tol,
            max_residual: Value(cert.max_residual()),
            reason: cert.reason.clone(),
            value_gap: value_gap.map(Value),
            rows: cert.rows.iter().map(row).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub family: String,
    pub inputs_digest: String,
    pub values: Values,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub dual_representation: Vec<Named>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub certificates: Vec<CertificateEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub verdicts: Vec<VerdictEntry>,
    pub solver: Vec<Diagnostics>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub exit_code: i32,
}

impl Report {
    pub fn new(command: &str, family: &str, digest: String) -> Self {
        Report {
            command: command.into(),
            family: family.into(),
            inputs_digest: digest,
            values: Values::default(),
            dual_representation: Vec::new(),
            certificates: Vec::new(),
            verdicts: Vec::new(),
            solver: Vec::new(),
            notes: Vec::new(),
            exit_code: 0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut pairs: Vec<(String, String)> = vec![
            ("command".into(), self.command.clone()),
            ("family".into(), self.family.clone()),
            ("inputs digest".into(), self.inputs_digest.clone()),
        ];
        for (name, v) in [("primal", self.values.primal), ("dual", self.values.dual), ("gap", self.values.gap)] {
            if let Some(v) = v {
                pairs.push((name.into(), v.to_string()));
            }
        }
        for n in &self.dual_representation {
            pairs.push((n.name.clone(), n.value.to_string()));
        }
        for v in &self.verdicts {
            pairs.push((v.name.clone(), v.verdict.clone()));
        }
        for d in &self.solver {
            pairs.push((
                format!("solver {}", d.phase),
                format!(
                    "{} {:?} after {} iterations, residual {}",
                    d.method, d.status, d.iterations, d.residual
                )
                .to_lowercase(),
            ));
        }
        pairs.push(("exit code".into(), self.exit_code.to_string()));
        let width = pairs.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in &pairs {
            out.push_str(&format!("{k:<width$}  {v}\n"));
        }
        for note in &self.notes {
            out.push_str(&format!("note: {note}\n"));
        }
        for c in &self.certificates {
            out.push_str(&format!(
                "\ncertificate {}: {:?} (tol {:e}, max residual {})\n",
                c.checker, c.verdict, c.tol, c.max_residual
            ));
            if let Some(r) = &c.reason {
                out.push_str(&format!("  reason: {r}\n"));
            }
            if let Some(g) = c.value_gap {
                out.push_str(&format!("  value gap: {g}\n"));
            }
            out.push_str(&residual_table(&c.rows));
        }
        out
    }
}

fn residual_table(rows: &[Row]) -> String {
    let cells: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.condition.clone(),
                r.stage.map_or("-".into(), |s| s.to_string()),
                r.node.to_string(),
                r.residual.to_string(),
                if r.ok { "ok" } else { "FAIL" }.into(),
            ]
        })
        .collect();
    let header = ["condition", "stage", "node", "residual", ""];
    let mut widths = header.map(str::len);
    for c in &cells {
        for (w, s) in widths.iter_mut().zip(c) {
            *w = (*w).max(s.len());
        }
    }
    let line = |c: [&str; 5]| {
        format!(
            "  {:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}  {}\n",
            c[0],
            c[1],
            c[2],
            c[3],
            c[4],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2],
            w3 = widths[3]
        )
        .trim_end()
        .to_string()
            + "\n"
    };
    let mut out = line(header);
    for c in &cells {
        out.push_str(&line([&c[0], &c[1], &c[2], &c[3], &c[4]]));
    }
    out
}
