//! Line-oriented result reports: ordered `key=value` records followed by a
//! summary block. Rendering is a pure function of the pushed entries, so two
//! runs that push the same entries produce byte-identical output.

use std::fmt::Display;

/// An append-only report. Records appear in push order, then one blank
/// line, then the summary entries in push order.
#[derive(Debug, Default, Clone)]
pub struct Report {
    records: Vec<(String, String)>,
    summary: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append one `key=value` record line.
    pub fn record(&mut self, key: impl Into<String>, value: impl Display) {
        self.records.push((key.into(), value.to_string()));
    }

    /// Append one entry to the trailing summary block.
    pub fn summary(&mut self, key: impl Into<String>, value: impl Display) {
        self.summary.push((key.into(), value.to_string()));
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty() && self.summary.is_empty()
    }

    /// Render to text. Every line is `key=value`; the summary block is
    /// separated from the records by a single blank line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.records {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        if !self.records.is_empty() && !self.summary.is_empty() {
            out.push('\n');
        }
        for (k, v) in &self.summary {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

/// Fixed-precision float formatting for report fields, so values render the
/// same way on every platform.
pub fn fmt_float(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{x:.1}")
    } else {
        format!("{x:.9}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_records_then_summary() {
        let mut r = Report::new();
        r.record("check", "validate");
        r.record("chart.1", "F");
        r.summary("status", "ok");
        assert_eq!(r.render(), "check=validate\nchart.1=F\n\nstatus=ok\n");
    }

    #[test]
    fn summary_only_report_has_no_leading_blank() {
        let mut r = Report::new();
        r.summary("status", "ok");
        assert_eq!(r.render(), "status=ok\n");
    }

    #[test]
    fn identical_pushes_render_identical_bytes() {
        let build = || {
            let mut r = Report::new();
            r.record("value", fmt_float(0.25));
            r.record("count", 3);
            r.summary("status", "ok");
            r.render()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn float_formatting_is_fixed_width() {
        assert_eq!(fmt_float(0.25), "0.250000000");
        assert_eq!(fmt_float(2.0), "2.0");
        assert_eq!(fmt_float(-1.25e-3), "-0.001250000");
    }
}
