use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::aggregate::{aggregate, SummaryRow};
use super::plan::Method;
use super::run::TrialResult;
use crate::error::{Error, Result};

pub const RESULTS_HEADER: [&str; 11] = [
    "scenario",
    "method",
    "n",
    "tau",
    "trial",
    "seed",
    "mse",
    "delta_n2",
    "coverage",
    "crossings",
    "runtime_ms",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Markdown,
    Json,
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Markdown => "md",
            OutputFormat::Json => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::InvalidArgument(format!("unknown output format {s:?}"))),
        }
    }
}

/// `v` rounded to `digits` significant digits, printed like C's `%g`.
pub fn format_sig(v: f64, digits: usize) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn results_to_csv(results: &[TrialResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULTS_HEADER).map_err(|e| Error::parse("results", e))?;
    for r in results {
        w.write_record([
            r.scenario.to_string(),
            r.method.to_string(),
            r.n.to_string(),
            format_sig(r.tau, 6),
            r.trial.to_string(),
            r.seed.to_string(),
            format_sig(r.mse, 6),
            format_sig(r.delta_n2, 6),
            format_sig(r.coverage, 6),
            r.crossings.to_string(),
            r.runtime_ms.to_string(),
        ])
        .map_err(|e| Error::parse("results", e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::parse("results", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("ascii output"))
}

pub fn read_results_csv(text: &str) -> Result<Vec<TrialResult>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| Error::parse("header", e))?;
    if header.iter().ne(RESULTS_HEADER) {
        return Err(Error::parse("header", format!("expected {}", RESULTS_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(format!("row {}", i + 1), e))?;
        if rec.len() != RESULTS_HEADER.len() {
            return Err(Error::parse(format!("row {}", i + 1), "wrong number of fields"));
        }
        fn field<T: FromStr>(rec: &csv::StringRecord, row: usize, k: usize) -> Result<T> {
            rec[k].parse().map_err(|_| {
                Error::parse(
                    format!("row {row} column {}", RESULTS_HEADER[k]),
                    format!("cannot parse {:?}", &rec[k]),
                )
            })
        }
        let row = i + 1;
        out.push(TrialResult {
            scenario: field(&rec, row, 0)?,
            method: rec[1].parse::<Method>()?,
            n: field(&rec, row, 2)?,
            tau: field(&rec, row, 3)?,
            trial: field(&rec, row, 4)?,
            seed: field(&rec, row, 5)?,
            mse: field(&rec, row, 6)?,
            delta_n2: field(&rec, row, 7)?,
            coverage: field(&rec, row, 8)?,
            crossings: field(&rec, row, 9)?,
            runtime_ms: field(&rec, row, 10)?,
        });
    }
    Ok(out)
}

pub fn results_to_json(results: &[TrialResult]) -> Result<String> {
    #[derive(serde::Serialize)]
    struct Doc<'a> {
        results: &'a [TrialResult],
        summary: Vec<SummaryRow>,
    }
    let doc = Doc {
        results,
        summary: aggregate(results),
    };
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Error::parse("results", e))?;
    s.push('\n');
    Ok(s)
}

/// One table per `(scenario, n)`: methods as rows, levels as columns, cells hold
/// `mean (se)` of the MSE. Cells a method did not report are `*`.
pub fn summary_to_markdown(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    let groups: BTreeSet<(u8, usize)> = rows.iter().map(|r| (r.scenario, r.n)).collect();
    for (scenario, n) in groups {
        let group: Vec<&SummaryRow> = rows.iter().filter(|r| r.scenario == scenario && r.n == n).collect();
        let taus: BTreeSet<u64> = group.iter().map(|r| r.tau.to_bits()).collect();
        let methods: BTreeSet<Method> = group.iter().map(|r| r.method).collect();
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = writeln!(out, "### Scenario {scenario}, n = {n}\n");
        out.push_str("| method |");
        for t in &taus {
            let _ = write!(out, " tau = {} |", format_sig(f64::from_bits(*t), 6));
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(taus.len()));
        out.push('\n');
        for m in methods {
            let _ = write!(out, "| {m} |");
            for t in &taus {
                match group.iter().find(|r| r.method == m && r.tau.to_bits() == *t) {
                    Some(r) => {
                        let _ = write!(out, " {} ({}) |", format_sig(r.mse_mean, 4), format_sig(r.mse_se, 2));
                    }
                    None => out.push_str(" * |"),
                }
            }
            out.push('\n');
        }
    }
    out
}

/// Writes `results` to `path` in the given format; markdown holds the aggregated table.
pub fn write_results(results: &[TrialResult], path: impl AsRef<Path>, format: OutputFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        OutputFormat::Csv => results_to_csv(results)?,
        OutputFormat::Json => results_to_json(results)?,
        OutputFormat::Markdown => summary_to_markdown(&aggregate(results)),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
