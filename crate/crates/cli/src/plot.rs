//! SVG renderings of CSV artifacts. Every drawn value is also written as a
//! `data-*` attribute so the SVG can be checked against its CSV.

use std::fmt::Write as _;

use kinetext::{Error, Result};

/// A parsed confusion matrix CSV: header `true\predicted,l1,...`, one row per
/// true class.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionTable {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionTable {
    pub fn parse(csv: &str) -> Result<Self> {
        let mut lines = csv.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Validation("confusion CSV is empty".into()))?;
        let labels: Vec<String> = header.split(',').skip(1).map(str::to_string).collect();
        if labels.is_empty() {
            return Err(Error::Validation("confusion CSV has no class columns".into()));
        }
        let mut counts = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<u64> = line
                .split(',')
                .skip(1)
                .map(|v| v.trim().parse::<u64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Validation(format!("confusion CSV row {}: {e}", i + 1)))?;
            if row.len() != labels.len() {
                return Err(Error::Validation(format!(
                    "confusion CSV row {} has {} cells, expected {}",
                    i + 1,
                    row.len(),
                    labels.len()
                )));
            }
            counts.push(row);
        }
        if counts.len() != labels.len() {
            return Err(Error::Validation(format!("confusion CSV has {} rows for {} classes", counts.len(), labels.len())));
        }
        Ok(Self { labels, counts })
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Heatmap with row-normalized shading; each cell carries its raw count.
pub fn confusion_svg(table: &ConfusionTable) -> String {
    let n = table.labels.len();
    let cell = 22.0;
    let margin = 170.0;
    let size = margin + cell * n as f64 + 20.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" font-family="sans-serif" font-size="9" data-kind="confusion" data-classes="{n}">"#
    );
    let _ = writeln!(out, r#"<text x="{}" y="14" font-size="12">predicted</text>"#, margin);
    let _ = writeln!(out, r#"<text x="4" y="{}" font-size="12">true</text>"#, margin - 6.0);
    for (i, row) in table.counts.iter().enumerate() {
        let total: u64 = row.iter().sum();
        let y = margin + cell * i as f64;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            margin - 4.0,
            y + cell * 0.65,
            escape(&table.labels[i])
        );
        for (j, &v) in row.iter().enumerate() {
            let x = margin + cell * j as f64;
            let share = if total == 0 { 0.0 } else { v as f64 / total as f64 };
            let shade = (255.0 * (1.0 - share)).round() as u8;
            let _ = writeln!(
                out,
                r##"<rect class="cell" x="{x}" y="{y}" width="{cell}" height="{cell}" fill="rgb({shade},{shade},255)" stroke="#ccc" data-row="{i}" data-col="{j}" data-value="{v}"/>"##
            );
            if v > 0 {
                let color = if share > 0.5 { "white" } else { "black" };
                let _ = writeln!(
                    out,
                    r#"<text x="{}" y="{}" text-anchor="middle" fill="{color}">{v}</text>"#,
                    x + cell / 2.0,
                    y + cell * 0.65
                );
            }
        }
    }
    for (j, label) in table.labels.iter().enumerate() {
        let x = margin + cell * j as f64 + cell * 0.65;
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{}" transform="rotate(-60 {x} {})">{}</text>"#,
            margin - 4.0,
            margin - 4.0,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Columns of a numeric CSV with a header row; empty cells become NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CurveTable {
    pub fn parse(csv: &str) -> Result<Self> {
        let mut lines = csv.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Validation("training log is empty".into()))?;
        let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
        if columns.len() < 2 {
            return Err(Error::Validation("training log needs a step column and at least one series".into()));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<f64> = line
                .split(',')
                .map(|v| if v.trim().is_empty() { Ok(f64::NAN) } else { v.trim().parse::<f64>() })
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Validation(format!("training log row {}: {e}", i + 1)))?;
            if row.len() != columns.len() {
                return Err(Error::Validation(format!("training log row {} has {} fields", i + 1, row.len())));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Validation("training log has no rows".into()));
        }
        Ok(Self { columns, rows })
    }
}

/// Index pairs kept when thinning `n` points to at most `max`.
fn thin(n: usize, max: usize) -> Vec<usize> {
    if n <= max {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..max).map(|k| k * (n - 1) / (max - 1)).collect();
    idx.dedup();
    idx
}

/// One panel per series against the first column. At most `max_points`
/// samples per series are drawn; they are listed in `data-x`/`data-y`.
pub fn curve_svg(table: &CurveTable, max_points: usize) -> String {
    let panel_w = 520.0;
    let panel_h = 110.0;
    let left = 70.0;
    let series: Vec<usize> = (1..table.columns.len()).collect();
    let height = 30.0 + (panel_h + 30.0) * series.len() as f64;
    let keep = thin(table.rows.len(), max_points.max(2));
    let xs: Vec<f64> = keep.iter().map(|&r| table.rows[r][0]).collect();
    let (x0, x1) = (xs.iter().cloned().fold(f64::INFINITY, f64::min), xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let xspan = if x1 > x0 { x1 - x0 } else { 1.0 };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" font-family="sans-serif" font-size="10" data-kind="curve">"#,
        left + panel_w + 20.0
    );
    for (p, &c) in series.iter().enumerate() {
        let top = 20.0 + (panel_h + 30.0) * p as f64;
        let ys: Vec<f64> = keep.iter().map(|&r| table.rows[r][c]).collect();
        let finite: Vec<f64> = ys.iter().copied().filter(|v| v.is_finite()).collect();
        let (y0, y1) = if finite.is_empty() {
            (0.0, 1.0)
        } else {
            (finite.iter().cloned().fold(f64::INFINITY, f64::min), finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        };
        let yspan = if y1 > y0 { y1 - y0 } else { 1.0 };
        let name = escape(&table.columns[c]);
        let _ = writeln!(out, r#"<text x="{left}" y="{}" font-size="11">{name}</text>"#, top - 4.0);
        let _ = writeln!(
            out,
            r##"<rect x="{left}" y="{top}" width="{panel_w}" height="{panel_h}" fill="none" stroke="#999"/>"##
        );
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{y1:.4}</text>"#, left - 4.0, top + 8.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{y0:.4}</text>"#, left - 4.0, top + panel_h);
        let mut points = String::new();
        for (x, y) in xs.iter().zip(&ys) {
            if y.is_finite() {
                let px = left + (x - x0) / xspan * panel_w;
                let py = top + panel_h - (y - y0) / yspan * panel_h;
                let _ = write!(points, "{px:.2},{py:.2} ");
            }
        }
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let _ = writeln!(
            out,
            r##"<polyline class="series" fill="none" stroke="#1f5fbf" points="{}" data-series="{name}" data-x="{}" data-y="{}"/>"##,
            points.trim_end(),
            list(&xs),
            list(&ys)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{left}" y="{}">{} {x0} .. {x1}</text>"#,
        height - 6.0,
        escape(&table.columns[0])
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attr(tag: &str, name: &str) -> String {
        let key = format!("{name}=\"");
        let start = tag.find(&key).unwrap() + key.len();
        tag[start..start + tag[start..].find('"').unwrap()].to_string()
    }

    #[test]
    fn confusion_cells_match_csv() {
        let csv = "true\\predicted,a,b,c\na,3,0,1\nb,0,5,0\nc,2,0,2\n";
        let t = ConfusionTable::parse(csv).unwrap();
        let svg = confusion_svg(&t);
        let cells: Vec<&str> = svg.lines().filter(|l| l.contains("class=\"cell\"")).collect();
        assert_eq!(cells.len(), 9);
        for c in cells {
            let (i, j): (usize, usize) = (attr(c, "data-row").parse().unwrap(), attr(c, "data-col").parse().unwrap());
            assert_eq!(attr(c, "data-value").parse::<u64>().unwrap(), t.counts[i][j]);
        }
    }

    #[test]
    fn malformed_confusion_rejected() {
        assert!(ConfusionTable::parse("").is_err());
        assert!(ConfusionTable::parse("true\\predicted,a,b\na,1,2\n").is_err());
        assert!(ConfusionTable::parse("true\\predicted,a\na,x\n").is_err());
    }

    #[test]
    fn empty_log_is_an_error() {
        assert!(CurveTable::parse("").is_err());
        assert!(CurveTable::parse("step,recon\n").is_err());
    }

    #[test]
    fn curve_metadata_matches_csv() {
        let csv = "epoch,loss,val\n0,2.5,\n1,1.25,0.5\n2,0.75,0.875\n";
        let t = CurveTable::parse(csv).unwrap();
        let svg = curve_svg(&t, 100);
        let lines: Vec<&str> = svg.lines().filter(|l| l.contains("class=\"series\"")).collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(attr(lines[0], "data-y"), "2.5 1.25 0.75");
        assert_eq!(attr(lines[1], "data-y"), "NaN 0.5 0.875");
        assert_eq!(attr(lines[0], "data-x"), "0 1 2");
    }

    #[test]
    fn thinning_keeps_endpoints() {
        let k = thin(5001, 500);
        assert_eq!((k[0], *k.last().unwrap()), (0, 5000));
        assert!(k.len() <= 500);
        assert_eq!(thin(3, 10), vec![0, 1, 2]);
    }
}
