//! Curve CSV: columns `index, s, x_0..x_{n-1}, kappa`, one row per node,
//! `kappa` empty at the two end rows.
//!
//! Values are written in shortest round-trip form, so a curve read back is
//! bit-identical to the one written.

use std::io::{Read, Write};

use crate::curve::{curvature_profile, DiscreteCurve};
use crate::error::{ElasticaError, Result};
use crate::manifold::ManifoldModel;

fn csv_err(e: csv::Error) -> ElasticaError {
    match e.kind() {
        csv::ErrorKind::Io(_) => ElasticaError::Io(e.to_string()),
        _ => ElasticaError::Parse(e.to_string()),
    }
}

/// Column names of the curve CSV for dimension `dim`.
pub fn curve_csv_header(dim: usize) -> Vec<String> {
    let mut cols = vec!["index".to_string(), "s".to_string()];
    cols.extend((0..dim).map(|c| format!("x_{c}")));
    cols.push("kappa".to_string());
    cols
}

pub fn write_curve_csv<W: Write>(curve: &DiscreteCurve, out: W) -> Result<()> {
    let kappa = curvature_profile(curve).kappa;
    let last = curve.segments();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(curve_csv_header(curve.dim())).map_err(csv_err)?;
    for i in 0..curve.num_nodes() {
        let s = if i == last { curve.target_length() } else { curve.arclength(i) };
        let mut row = vec![i.to_string(), s.to_string()];
        row.extend(curve.node(i).iter().map(|c| c.to_string()));
        row.push(if i == 0 || i == last { String::new() } else { kappa[i - 1].to_string() });
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a curve CSV for `model`. The target length is the `s` value of the
/// last row; rows must be ordered by `index`. The `kappa` column is
/// required but ignored (curvature is always recomputed).
pub fn read_curve_csv<R: Read>(model: ManifoldModel, input: R) -> Result<DiscreteCurve> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    let find = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ElasticaError::Parse(format!("missing column {name:?}")))
    };
    let index_col = find("index")?;
    let s_col = find("s")?;
    let x_cols = (0..model.dim())
        .map(|c| find(&format!("x_{c}")))
        .collect::<Result<Vec<_>>>()?;
    find("kappa")?;
    let mut nodes = Vec::new();
    let mut last_s = f64::NAN;
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let field = |col: usize, name: &str| -> Result<f64> {
            let raw = rec.get(col).unwrap_or("");
            raw.parse::<f64>().map_err(|_| {
                ElasticaError::Parse(format!("row {}: column {name:?} holds {raw:?}", row + 1))
            })
        };
        let index = field(index_col, "index")?;
        if index != row as f64 {
            return Err(ElasticaError::Parse(format!(
                "row {}: expected index {row}, found {index}",
                row + 1
            )));
        }
        last_s = field(s_col, "s")?;
        for (c, &col) in x_cols.iter().enumerate() {
            nodes.push(field(col, &format!("x_{c}"))?);
        }
    }
    if nodes.is_empty() {
        return Err(ElasticaError::Parse("curve CSV has no rows".into()));
    }
    DiscreteCurve::from_flat(model, nodes, last_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::test_curves::circle_arc;

    #[test]
    fn round_trip_is_exact() {
        let curve = circle_arc(0.7, 0.3, 2.0, 64);
        let mut buf = Vec::new();
        write_curve_csv(&curve, &mut buf).unwrap();
        let back = read_curve_csv(*curve.model(), buf.as_slice()).unwrap();
        assert_eq!(back, curve);
    }

    #[test]
    fn end_rows_have_empty_kappa() {
        let curve = circle_arc(1.0, 0.0, 1.0, 16);
        let mut buf = Vec::new();
        write_curve_csv(&curve, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,s,x_0,x_1,kappa");
        assert!(lines[1].ends_with(','));
        assert!(lines[17].ends_with(','));
        assert!(!lines[2].ends_with(','));
        assert_eq!(lines.len(), 18);
    }

    #[test]
    fn missing_column_is_named() {
        let text = "index,s,x_0,kappa\n0,0,0,\n";
        let err = read_curve_csv(ManifoldModel::euclidean(2).unwrap(), text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("x_1"), "{err}");
    }

    #[test]
    fn bad_number_is_reported() {
        let curve = circle_arc(1.0, 0.0, 1.0, 8);
        let mut buf = Vec::new();
        write_curve_csv(&curve, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen("\n1,", "\n1,abc", 1);
        let err = read_curve_csv(*curve.model(), text.as_bytes()).unwrap_err();
        assert!(matches!(err, ElasticaError::Parse(_)), "{err}");
    }
}
