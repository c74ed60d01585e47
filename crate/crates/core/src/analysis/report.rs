use serde::Serialize;

/// Outcome of one inequality audit `lhs <= rhs` at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub name: String,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`
    pub margin: f64,
    /// Slack the check is allowed; the report passes iff `margin >= -tolerance`.
    pub tolerance: f64,
    pub pass: bool,
    pub context: String,
}

impl EstimateReport {
    pub fn new(name: &str, t: f64, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let margin = rhs - lhs;
        EstimateReport {
            name: name.to_string(),
            t,
            lhs,
            rhs,
            margin,
            tolerance,
            pass: margin >= -tolerance && lhs.is_finite() && !rhs.is_nan(),
            context: String::new(),
        }
    }

    pub fn with_context(mut self, context: impl Into<String>) -> Self {
        self.context = context.into();
        self
    }

    pub const CSV_HEADER: &'static str = "name,t,lhs,rhs,margin,pass";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{:?},{:?},{:?},{:?},{}",
            self.name, self.t, self.lhs, self.rhs, self.margin, self.pass
        )
    }
}

pub fn all_pass(reports: &[EstimateReport]) -> bool {
    reports.iter().all(|r| r.pass)
}

/// Write `name,t,lhs,rhs,margin,pass` lines with a header.
pub fn to_csv(reports: &[EstimateReport]) -> String {
    let mut out = String::from(EstimateReport::CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}
