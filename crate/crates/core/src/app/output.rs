//! Convergence tables and small CSV helpers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::verification::TableRow;

pub const TABLE_HEADER: &str = "case,dt,1/h,e_u,RoC,e_c,RoC,e_p,RoC,total,RoC,total_sum,e_p_pbar,status";

/// Environment variable overriding the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "ASGS_OUTPUT_DIR";

/// Three significant digits, `4.48e-3`.
pub fn fmt_error(v: f64) -> String {
    format!("{v:.2e}")
}

pub fn fmt_roc(v: f64) -> String {
    format!("{v:.3}")
}

/// `1/n` when `dt` is the reciprocal of an integer, otherwise the plain value.
pub fn fmt_dt(dt: f64) -> String {
    let inv = 1.0 / dt;
    if inv.is_finite() && inv >= 1.0 && (inv - inv.round()).abs() < 1e-9 * inv {
        format!("1/{}", inv.round() as u64)
    } else {
        format!("{dt}")
    }
}

/// Quotes a CSV field when it contains separators or quotes.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace(['\n', '\r'], " "))
    } else {
        s.to_string()
    }
}

fn row_cells(row: &TableRow) -> Vec<String> {
    let roc = |i: usize| row.roc.map(|r| fmt_roc(r[i])).unwrap_or_default();
    let mut cells = vec![row.case.clone(), fmt_dt(row.dt), row.n_div.to_string()];
    match &row.errors {
        Some(e) => {
            cells.extend([
                fmt_error(e.e_u),
                roc(0),
                fmt_error(e.e_c),
                roc(1),
                fmt_error(e.e_p),
                roc(2),
                fmt_error(e.total),
                roc(3),
                fmt_error(e.total_sum),
                e.e_p_pbar.map(fmt_error).unwrap_or_default(),
            ]);
        }
        None => cells.extend(std::iter::repeat_n(String::new(), 10)),
    }
    cells.push(match &row.failure {
        Some(f) => format!("failed: {f}"),
        None => "ok".into(),
    });
    cells
}

pub fn table_csv(rows: &[TableRow]) -> String {
    let mut s = format!("{TABLE_HEADER}\n");
    for row in rows {
        let cells: Vec<String> = row_cells(row).iter().map(|c| csv_field(c)).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

/// Column-aligned rendering for the terminal.
pub fn table_console(rows: &[TableRow]) -> String {
    let header: Vec<String> = TABLE_HEADER.split(',').map(str::to_string).collect();
    let body: Vec<Vec<String>> = rows.iter().map(row_cells).collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|i| {
            body.iter()
                .map(|r| r[i].len())
                .chain([header[i].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut s = String::new();
    for r in std::iter::once(&header).chain(&body) {
        let line: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(s, "{}", line.join("  ").trim_end());
    }
    s
}

/// `ASGS_OUTPUT_DIR` if set and non-empty, else `configured`.
pub fn resolve_output_dir(configured: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => configured.to_path_buf(),
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// File-name-safe version of a case label (`Re=100` becomes `re100`).
pub fn slug(label: &str) -> String {
    label
        .to_ascii_lowercase()
        .chars()
        .filter_map(|c| match c {
            'a'..='z' | '0'..='9' | '_' | '-' => Some(c),
            '.' => Some('p'),
            ' ' => Some('_'),
            _ => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verification::{roc_table, ErrorReport};

    #[test]
    fn number_formats() {
        assert_eq!(fmt_error(4.48e-3), "4.48e-3");
        assert_eq!(fmt_error(1.58e-1), "1.58e-1");
        assert_eq!(fmt_error(0.0), "0.00e0");
        assert_eq!(fmt_roc(1.2678), "1.268");
        assert_eq!(fmt_dt(0.1), "1/10");
        assert_eq!(fmt_dt(1.0 / 80.0), "1/80");
        assert_eq!(fmt_dt(0.3), "0.3");
    }

    #[test]
    fn golden_header_and_column_count() {
        let rows = roc_table(
            "Re=100",
            &[
                (10, 0.1, Ok(ErrorReport::new(4.48e-3, 1.58e-1, 8.53e-3))),
                (20, 0.05, Ok(ErrorReport::new(1.86e-3, 8.33e-2, 4.3e-3))),
                (40, 0.025, Err("singular, at step 3".into())),
            ],
        );
        let csv = table_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "case,dt,1/h,e_u,RoC,e_c,RoC,e_p,RoC,total,RoC,total_sum,e_p_pbar,status"
        );
        assert_eq!(lines.next().unwrap(), "Re=100,1/10,10,4.48e-3,,8.53e-3,,1.58e-1,,1.58e-1,,1.71e-1,,ok");
        let second = lines.next().unwrap();
        assert!(second.starts_with("Re=100,1/20,20,1.86e-3,1.268,"), "{second}");
        let third = lines.next().unwrap();
        assert!(third.ends_with(",\"failed: singular, at step 3\""), "{third}");
        // every row parses to the header's column count when quoted fields are respected
        for line in csv.lines() {
            let mut cols = 1;
            let mut quoted = false;
            for ch in line.chars() {
                match ch {
                    '"' => quoted = !quoted,
                    ',' if !quoted => cols += 1,
                    _ => {}
                }
            }
            assert_eq!(cols, 14, "{line}");
        }
        assert!(table_console(&rows).lines().count() == 4);
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("Re=100"), "re100");
        assert_eq!(slug("Re=0.5"), "re0p5");
        assert_eq!(slug("strong_exp_c"), "strong_exp_c");
    }
}
