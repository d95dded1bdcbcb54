//! Artifact writers (CSV, SVG, PGM) and the label-file reader used by `eval`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use aecm_core::Matrix;

use crate::error::{CliError, CliResult};

pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];
pub const SCATTER_SIZE: f64 = 600.0;
const MARGIN: f64 = 20.0;

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::data(format!("cannot create {}: {e}", path.display())))
}

pub fn assignments_csv(labels: &[usize]) -> String {
    let mut s = String::from("index,cluster\n");
    for (i, l) in labels.iter().enumerate() {
        let _ = writeln!(s, "{i},{l}");
    }
    s
}

pub fn matrix_csv(header: &[String], m: &Matrix) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn centroids_csv(c: &Matrix) -> String {
    let header: Vec<String> = (0..c.cols()).map(|j| format!("x{j}")).collect();
    matrix_csv(&header, c)
}

pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Scatter plot of 2-D points coloured by cluster with centroids as squares.
pub fn scatter_svg(x: &Matrix, labels: &[usize], centroids: &Matrix) -> String {
    let all = x.row_iter().chain(centroids.row_iter());
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for r in all {
        for j in 0..2 {
            lo[j] = lo[j].min(r[j]);
            hi[j] = hi[j].max(r[j]);
        }
    }
    let span = |j: usize| if hi[j] > lo[j] { hi[j] - lo[j] } else { 1.0 };
    let inner = SCATTER_SIZE - 2.0 * MARGIN;
    let px = |r: &[f64]| {
        (
            MARGIN + (r[0] - lo[0]) / span(0) * inner,
            SCATTER_SIZE - MARGIN - (r[1] - lo[1]) / span(1) * inner,
        )
    };
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{0}\" viewBox=\"0 0 {0} {0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        SCATTER_SIZE
    );
    for (r, &l) in x.row_iter().zip(labels) {
        let (cx, cy) = px(r);
        let _ = writeln!(s, "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"2\" fill=\"{}\" fill-opacity=\"0.7\"/>", PALETTE[l % 10]);
    }
    for (k, r) in centroids.row_iter().enumerate() {
        let (cx, cy) = px(r);
        let _ = writeln!(
            s,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{}\" stroke=\"black\" stroke-width=\"1.5\"/>",
            cx - 5.0,
            cy - 5.0,
            PALETTE[k % 10]
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Binary greyscale image of the rows laid side by side, each reshaped to
/// `width` columns, with values min-max scaled to 0..=255.
pub fn pgm(rows: &Matrix, width: usize) -> CliResult<Vec<u8>> {
    let d = rows.cols();
    if width == 0 || d % width != 0 {
        return Err(CliError::config(format!("image width {width} does not divide dimension {d}")));
    }
    let height = d / width;
    let total_w = width * rows.rows();
    let (lo, hi) = rows
        .as_slice()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let scale = if hi > lo { 255.0 / (hi - lo) } else { 0.0 };
    let mut out = format!("P5\n{total_w} {height}\n255\n").into_bytes();
    for y in 0..height {
        for row in rows.row_iter() {
            for xx in 0..width {
                out.push(((row[y * width + xx] - lo) * scale).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Ok(out)
}

/// Side length of a square image with `d` pixels, when `d ≥ 64`.
pub fn square_side(d: usize) -> Option<usize> {
    let s = (d as f64).sqrt().round() as usize;
    (d >= 64 && s * s == d).then_some(s)
}

/// Reads one column of a CSV file as labels, mapping distinct values to
/// `0, 1, ...` in order of first appearance. Defaults to the last column.
pub fn read_label_column(path: &Path, header: bool, column: Option<usize>) -> CliResult<Vec<usize>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let col = column.unwrap_or(rec.len().saturating_sub(1));
        let cell = rec
            .get(col)
            .ok_or_else(|| CliError::data(format!("{}: row {i} has no column {col}", path.display())))?;
        let next = ids.len();
        labels.push(*ids.entry(cell.to_string()).or_insert(next));
    }
    if labels.is_empty() {
        return Err(CliError::data(format!("{}: no labels", path.display())));
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_layout() {
        let m = Matrix::from_rows(&[[0.0, 1.0, 2.0, 3.0], [3.0, 3.0, 3.0, 3.0]]).unwrap();
        let img = pgm(&m, 2).unwrap();
        let head = b"P5\n4 2\n255\n";
        assert_eq!(&img[..head.len()], head);
        assert_eq!(&img[head.len()..], &[0, 85, 255, 255, 170, 255, 255, 255]);
        assert!(pgm(&m, 3).is_err());
    }

    #[test]
    fn square_sides() {
        assert_eq!(square_side(784), Some(28));
        assert_eq!(square_side(64), Some(8));
        assert_eq!(square_side(16), None);
        assert_eq!(square_side(65), None);
    }

    #[test]
    fn scatter_has_one_mark_per_point_and_centroid() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 0.5]]).unwrap();
        let c = Matrix::from_rows(&[[0.5, 0.5]]).unwrap();
        let svg = scatter_svg(&x, &[0, 11, 1], &c);
        assert!(svg.contains("width=\"600\""));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches("stroke=\"black\"").count(), 1);
        assert!(svg.contains(PALETTE[1]));
    }

    #[test]
    fn label_column_remaps_in_order_of_appearance() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.csv");
        std::fs::write(&p, "a,label\n1,b\n2,a\n3,b\n").unwrap();
        assert_eq!(read_label_column(&p, true, None).unwrap(), vec![0, 1, 0]);
        assert_eq!(read_label_column(&p, true, Some(0)).unwrap(), vec![0, 1, 2]);
        assert!(read_label_column(&p, true, Some(5)).is_err());
    }
}
