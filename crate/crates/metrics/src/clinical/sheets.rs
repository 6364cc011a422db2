//! Score-sheet files and the per-site Physician Score table.
//!
//! A sheet file is tab separated with the header
//! `rater group case clinical_accuracy factual_completeness terminology clinical_usability`.
//! `group` may be `-` for a rater who forms a column alone. Blank lines and
//! `#` comments are skipped; a `# schema:` comment must name `ldp.scores/v1`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{aggregate_ps, weighted_ps, Aggregate, RubricWeights, ScoreSheet, DIMENSIONS};
use crate::error::{invalid, MetricsError, Result};

pub const SHEET_SCHEMA: &str = "ldp.scores/v1";
const HEADER: [&str; 3] = ["rater", "group", "case"];

fn parse_err<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(MetricsError::Parse { line, msg: msg.into() })
}

/// Rows of a sheet file; a file with only a header and comments yields none.
pub fn parse_sheets(text: &str) -> Result<Vec<ScoreSheet>> {
    let mut header_seen = false;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(c) = t.strip_prefix('#') {
            if let Some(s) = c.trim().strip_prefix("schema:") {
                if s.trim() != SHEET_SCHEMA {
                    return parse_err(line, format!("unsupported schema `{}`, expected {SHEET_SCHEMA}", s.trim()));
                }
            }
            continue;
        }
        let cols: Vec<&str> = t.split('\t').map(str::trim).collect();
        if !header_seen {
            let expected: Vec<&str> = HEADER.iter().chain(DIMENSIONS.iter()).copied().collect();
            if cols != expected {
                return parse_err(line, format!("header must be `{}`", expected.join("\\t")));
            }
            header_seen = true;
            continue;
        }
        if cols.len() != 7 {
            return parse_err(line, format!("expected 7 tab-separated columns, got {}", cols.len()));
        }
        let mut scores = [0.0; 4];
        for (k, s) in scores.iter_mut().enumerate() {
            *s = cols[3 + k]
                .parse()
                .or_else(|_| parse_err(line, format!("{} `{}` is not a number", DIMENSIONS[k], cols[3 + k])))?;
        }
        let group = (cols[1] != "-").then_some(cols[1]);
        let sheet = ScoreSheet::new(cols[0], cols[2], group, scores)
            .or_else(|e| parse_err(line, e.to_string()))?;
        if !seen.insert((sheet.rater.clone(), sheet.case.clone())) {
            return parse_err(line, format!("duplicate score for rater {} on case {}", sheet.rater, sheet.case));
        }
        out.push(sheet);
    }
    Ok(out)
}

/// Weighted scores as `matrix[case][rater]`, with case and rater ids sorted.
pub fn rating_matrix(
    sheets: &[ScoreSheet],
    weights: &RubricWeights,
) -> Result<(Vec<String>, Vec<String>, Vec<Vec<f64>>)> {
    let cases: Vec<String> = sheets.iter().map(|s| s.case.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let raters: Vec<String> = sheets.iter().map(|s| s.rater.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let mut cells: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for s in sheets {
        cells.insert((&s.case, &s.rater), weighted_ps(s, weights)?);
    }
    let mut m = Vec::with_capacity(cases.len());
    for c in &cases {
        let mut row = Vec::with_capacity(raters.len());
        for r in &raters {
            match cells.get(&(c.as_str(), r.as_str())) {
                Some(&v) => row.push(v),
                None => return invalid(format!("rater {r} did not score case {c}")),
            }
        }
        m.push(row);
    }
    Ok((cases, raters, m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsColumn {
    pub label: String,
    pub raters: Vec<String>,
    /// Mean over this column's raters of each rater's mean case score.
    pub ps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsTable {
    pub columns: Vec<PsColumn>,
    pub mean: f64,
    /// Present with at least three columns.
    pub trimmed: Option<f64>,
}

/// Per-site columns in order of first appearance.
pub fn ps_table(sheets: &[ScoreSheet], weights: &RubricWeights) -> Result<PsTable> {
    let mut rater_scores: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut columns: Vec<(String, Vec<String>)> = Vec::new();
    for s in sheets {
        rater_scores.entry(&s.rater).or_default().push(weighted_ps(s, weights)?);
        let label = s.group.clone().unwrap_or_else(|| s.rater.clone());
        match columns.iter_mut().find(|(l, _)| *l == label) {
            Some((_, rs)) if !rs.contains(&s.rater) => rs.push(s.rater.clone()),
            Some(_) => {}
            None => columns.push((label, vec![s.rater.clone()])),
        }
    }
    let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
    for (label, rs) in &columns {
        for r in rs {
            if let Some(prev) = owner.insert(r, label) {
                return invalid(format!("rater {r} appears under both {prev} and {label}"));
            }
        }
    }
    let mut out = Vec::with_capacity(columns.len());
    for (label, raters) in columns {
        let means: Vec<f64> = raters
            .iter()
            .map(|r| aggregate_ps(&rater_scores[r.as_str()], Aggregate::Mean))
            .collect::<Result<_>>()?;
        let ps = aggregate_ps(&means, Aggregate::Mean)?;
        out.push(PsColumn { label, raters, ps });
    }
    let vals: Vec<f64> = out.iter().map(|c| c.ps).collect();
    Ok(PsTable {
        mean: aggregate_ps(&vals, Aggregate::Mean)?,
        trimmed: (vals.len() >= 3).then(|| aggregate_ps(&vals, Aggregate::Trimmed)).transpose()?,
        columns: out,
    })
}

impl PsTable {
    /// Column labels, one PS row, and a note for columns pooled over raters.
    pub fn render(&self) -> String {
        let mut s = String::from("Method");
        for c in &self.columns {
            let _ = write!(s, "\t{}", c.label);
        }
        s.push_str("\tAverage\tTrimmed\nPS");
        for c in &self.columns {
            let _ = write!(s, "\t{:.1}", c.ps);
        }
        let _ = write!(s, "\t{:.1}\t", self.mean);
        match self.trimmed {
            Some(t) => {
                let _ = writeln!(s, "{t:.4}");
            }
            None => s.push_str("-\n"),
        }
        for c in self.columns.iter().filter(|c| c.raters.len() > 1) {
            let _ = writeln!(s, "note: {} is the average of {} individual raters", c.label, c.raters.len());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAD: &str = "rater\tgroup\tcase\tclinical_accuracy\tfactual_completeness\tterminology\tclinical_usability\n";

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = format!("# schema: ldp.scores/v1\n{HEAD}a\t-\tc1\t5\t5\t5\t5\na\t-\tc2\t5\t11\t5\t5\n");
        match parse_sheets(&text) {
            Err(MetricsError::Parse { line, msg }) => {
                assert_eq!(line, 4);
                assert!(msg.contains("factual_completeness"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
        let dup = format!("{HEAD}a\t-\tc1\t5\t5\t5\t5\na\t-\tc1\t6\t5\t5\t5\n");
        assert!(matches!(parse_sheets(&dup), Err(MetricsError::Parse { line: 3, .. })));
        assert!(matches!(parse_sheets("rater\tcase\n"), Err(MetricsError::Parse { line: 1, .. })));
        let nan = format!("{HEAD}a\t-\tc1\tx\t5\t5\t5\n");
        assert!(matches!(parse_sheets(&nan), Err(MetricsError::Parse { line: 2, .. })));
    }

    #[test]
    fn groups_pool_raters_before_averaging() {
        let text = format!(
            "{HEAD}t1\tsite\tc1\t4\t4\t4\t4\nt2\tsite\tc1\t8\t8\t8\t8\nsolo\t-\tc1\t9\t9\t9\t9\n"
        );
        let sheets = parse_sheets(&text).unwrap();
        let t = ps_table(&sheets, &RubricWeights::default()).unwrap();
        assert_eq!(t.columns.len(), 2);
        assert_eq!(t.columns[0].raters, ["t1", "t2"]);
        assert!((t.columns[0].ps - 6.0).abs() < 1e-12);
        assert!(t.trimmed.is_none());
        assert!(t.render().contains("average of 2 individual raters"));
        let (cases, raters, m) = rating_matrix(&sheets, &RubricWeights::default()).unwrap();
        assert_eq!((cases.len(), raters.len(), m[0].len()), (1, 3, 3));
    }
}
