//! Machine-readable verification reports. Floating-point fields are
//! serialized with 17 significant digits (exact f64 round-trip) in both the
//! JSON and CSV emitters; re-running an identical config reproduces the
//! report byte-for-byte except for the runtime fields.

use std::io::{self, Write};

use serde::Serialize;

use crate::config::{OutputFormat, SuiteConfig};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One verified case.
#[derive(Clone, Debug, Serialize)]
pub struct CaseRecord {
    pub suite: String,
    pub case_id: String,
    pub model: String,
    pub params: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub runtime_ms: f64,
}

impl CaseRecord {
    pub fn finite(&self) -> bool {
        self.lhs.is_finite()
            && self.rhs.is_finite()
            && self.margin.is_finite()
            && self.tolerance.is_finite()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteSummary {
    pub suite: String,
    pub cases: usize,
    pub passed: usize,
    pub worst_margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConfigEcho {
    pub suite: String,
    pub models: Vec<String>,
    pub grid: usize,
    pub eps: Vec<f64>,
    pub seed: Option<u64>,
    pub tolerance_overrides: Vec<(String, f64)>,
    pub c_kappa: f64,
    pub h_override: Option<f64>,
    pub format: String,
    pub jobs: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub version: String,
    pub config: ConfigEcho,
    pub cases: Vec<CaseRecord>,
    pub summary: Vec<SuiteSummary>,
    /// Set when the run aborted early; the flushed report is still valid.
    pub partial: bool,
}

impl VerificationReport {
    pub fn new(config: &SuiteConfig, cases: Vec<CaseRecord>, partial: bool) -> Self {
        let mut summary: Vec<SuiteSummary> = Vec::new();
        for case in &cases {
            if summary.last().map(|s| s.suite.as_str()) != Some(case.suite.as_str()) {
                summary.push(SuiteSummary {
                    suite: case.suite.clone(),
                    cases: 0,
                    passed: 0,
                    worst_margin: f64::INFINITY,
                });
            }
            let s = summary.last_mut().unwrap();
            s.cases += 1;
            if case.pass {
                s.passed += 1;
            }
            if case.margin < s.worst_margin {
                s.worst_margin = case.margin;
            }
        }
        VerificationReport {
            version: TOOL_VERSION.to_string(),
            summary,
            config: ConfigEcho {
                suite: config.suite_arg.clone(),
                models: config.models.clone(),
                grid: config.grid,
                eps: config.eps.clone(),
                seed: config.seed,
                tolerance_overrides: config
                    .tol_overrides
                    .iter()
                    .map(|(k, v)| (k.clone(), *v))
                    .collect(),
                c_kappa: config.c_kappa,
                h_override: config.h_override,
                format: config.format.name().to_string(),
                jobs: config.jobs,
            },
            cases,
            partial,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.cases.iter().all(|c| c.pass)
    }

    pub fn write_to(&self, format: OutputFormat, out: &mut dyn Write) -> io::Result<()> {
        match format {
            OutputFormat::Json => self.write_json(out),
            OutputFormat::Csv => self.write_csv(out),
        }
    }

    fn write_json(&self, out: &mut dyn Write) -> io::Result<()> {
        let mut ser = serde_json::Serializer::with_formatter(&mut *out, SigDigitFormatter::new());
        self.serialize(&mut ser)
            .map_err(io::Error::other)?;
        out.write_all(b"\n")
    }

    /// CSV schema: suite,case_id,model,params,lhs,rhs,margin,tol,pass.
    fn write_csv(&self, out: &mut dyn Write) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "suite", "case_id", "model", "params", "lhs", "rhs", "margin", "tol", "pass",
        ])?;
        for c in &self.cases {
            w.write_record([
                c.suite.as_str(),
                c.case_id.as_str(),
                c.model.as_str(),
                c.params.as_str(),
                &fmt17(c.lhs),
                &fmt17(c.rhs),
                &fmt17(c.margin),
                &fmt17(c.tolerance),
                if c.pass { "true" } else { "false" },
            ])?;
        }
        w.flush()
    }
}

/// 17 significant digits: enough to round-trip any f64 exactly.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// serde_json formatter writing every float with 17 significant digits.
struct SigDigitFormatter {
    indent: usize,
}

impl SigDigitFormatter {
    fn new() -> Self {
        SigDigitFormatter { indent: 0 }
    }

    fn newline<W: ?Sized + io::Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(b"\n")?;
        for _ in 0..self.indent {
            w.write_all(b"  ")?;
        }
        Ok(())
    }
}

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.indent += 1;
        writer.write_all(b"[")
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.indent -= 1;
        self.newline(writer)?;
        writer.write_all(b"]")
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        if !first {
            writer.write_all(b",")?;
        }
        self.newline(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.indent += 1;
        writer.write_all(b"{")
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.indent -= 1;
        self.newline(writer)?;
        writer.write_all(b"}")
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        if !first {
            writer.write_all(b",")?;
        }
        self.newline(writer)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        writer.write_all(b": ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{OutputFormat, SuiteId};
    use std::collections::BTreeMap;

    fn test_config() -> SuiteConfig {
        SuiteConfig {
            suites: vec![SuiteId::Thm1],
            suite_arg: String::from("thm1"),
            models: vec![String::from("cauchy:beta=2,n=1")],
            grid: 4096,
            eps: vec![0.1],
            seed: Some(7),
            tol_overrides: BTreeMap::new(),
            c_kappa: 1.0,
            h_override: None,
            out: None,
            format: OutputFormat::Csv,
            jobs: 1,
        }
    }

    fn sample_case() -> CaseRecord {
        CaseRecord {
            suite: String::from("thm1"),
            case_id: String::from("thm1/cauchy:beta=2,n=1/odd/eps=0.1"),
            model: String::from("cauchy:beta=2,n=1"),
            params: String::from("kind=odd,eps=0.1,grid=4096"),
            lhs: 0.1234567890123456789,
            rhs: 0.1,
            margin: 0.0234567890123456789,
            tolerance: 1e-6,
            pass: true,
            runtime_ms: 12.5,
        }
    }

    #[test]
    fn empty_report_is_header_only_csv() {
        let report = VerificationReport::new(&test_config(), Vec::new(), false);
        let mut buf = Vec::new();
        report.write_to(OutputFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.trim(),
            "suite,case_id,model,params,lhs,rhs,margin,tol,pass"
        );
    }

    #[test]
    fn csv_round_trips_floats_exactly() {
        let case = sample_case();
        let report = VerificationReport::new(&test_config(), vec![case.clone()], false);
        let mut buf = Vec::new();
        report.write_to(OutputFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let data_line = text.lines().nth(1).unwrap();
        // params contains a comma, so the csv writer must quote it
        assert!(data_line.contains("\"kind=odd,eps=0.1,grid=4096\""));
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(data_line.as_bytes());
        let rec = rdr.records().next().unwrap().unwrap();
        let margin_back: f64 = rec[6].parse().unwrap();
        assert_eq!(margin_back.to_bits(), case.margin.to_bits());
    }

    #[test]
    fn json_uses_17_significant_digits() {
        let report = VerificationReport::new(&test_config(), vec![sample_case()], false);
        let mut buf = Vec::new();
        report.write_to(OutputFormat::Json, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("2.3456789012345679e-2"), "{text}");
        // and parses back to the same bits
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        let margin = parsed["cases"][0]["margin"].as_f64().unwrap();
        assert_eq!(margin.to_bits(), 0.0234567890123456789f64.to_bits());
    }

    #[test]
    fn summary_counts_per_suite() {
        let mut a = sample_case();
        let mut b = sample_case();
        b.pass = false;
        b.margin = -0.5;
        let mut c = sample_case();
        c.suite = String::from("decomp");
        a.suite = String::from("thm1");
        let report = VerificationReport::new(&test_config(), vec![a, b, c], false);
        assert_eq!(report.summary.len(), 2);
        assert_eq!(report.summary[0].cases, 2);
        assert_eq!(report.summary[0].passed, 1);
        assert_eq!(report.summary[0].worst_margin, -0.5);
        assert!(!report.all_pass());
    }
}
