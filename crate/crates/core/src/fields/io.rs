//! CSV and JSON encodings of two-dimensional fields.
//!
//! CSV layout:
//!
//! ```text
//! # nx,ny,dx,dy,x0,y0,periodic_x,periodic_y
//! 64,32,0.1,0.2,0,0,true,false
//! v(0,0),v(1,0),...,v(nx-1,0)
//! ...
//! v(0,ny-1),...,v(nx-1,ny-1)
//! ```
//!
//! JSON layout: `{"grid": {...}, "values": [[row 0], [row 1], ...]}` with the
//! same row convention (one row per axis-2 index).

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Grid2D, ScalarField2D};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CSV_HEADER: &str = "# nx,ny,dx,dy,x0,y0,periodic_x,periodic_y";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldJson<T> {
    pub grid: Grid2D<T>,
    pub values: Vec<Vec<T>>,
}

pub fn write_field_csv<T: Scalar, W: Write>(field: &ScalarField2D<T>, out: W) -> Result<()> {
    let mut out = out;
    writeln!(out, "{CSV_HEADER}")?;
    let g = field.grid;
    writeln!(
        out,
        "{},{},{},{},{},{},{},{}",
        g.nx, g.ny, g.dx, g.dy, g.x0, g.y0, g.periodic_x, g.periodic_y
    )?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for j in 0..g.ny {
        w.write_record(field.row(j).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn parse<V: std::str::FromStr>(s: &str, what: &str) -> Result<V> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("cannot parse {what} from {s:?}")))
}

pub fn read_field_csv<T: Scalar, R: Read>(input: R) -> Result<ScalarField2D<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut records = rdr.records();
    let meta = records
        .next()
        .ok_or_else(|| Error::Parse("missing grid metadata row".into()))??;
    if meta.len() != 8 {
        return Err(Error::Parse(format!(
            "grid metadata row has {} entries, expected 8",
            meta.len()
        )));
    }
    let grid = Grid2D {
        nx: parse(&meta[0], "nx")?,
        ny: parse(&meta[1], "ny")?,
        dx: T::lit(parse::<f64>(&meta[2], "dx")?),
        dy: T::lit(parse::<f64>(&meta[3], "dy")?),
        x0: T::lit(parse::<f64>(&meta[4], "x0")?),
        y0: T::lit(parse::<f64>(&meta[5], "y0")?),
        periodic_x: parse(&meta[6], "periodic_x")?,
        periodic_y: parse(&meta[7], "periodic_y")?,
    };
    grid.validate()?;
    let mut values = Vec::with_capacity(grid.len());
    let mut rows = 0usize;
    for rec in records {
        let rec = rec?;
        if rec.len() != grid.nx {
            return Err(Error::Dimension(format!(
                "row {rows} has {} values, grid has nx = {}",
                rec.len(),
                grid.nx
            )));
        }
        for v in rec.iter() {
            values.push(T::lit(parse::<f64>(v, "value")?));
        }
        rows += 1;
    }
    if rows != grid.ny {
        return Err(Error::Dimension(format!(
            "{rows} rows, grid has ny = {}",
            grid.ny
        )));
    }
    ScalarField2D::new(grid, values)
}

pub fn write_field_json<T: Scalar, W: Write>(field: &ScalarField2D<T>, out: W) -> Result<()> {
    let doc = FieldJson {
        grid: field.grid,
        values: (0..field.grid.ny).map(|j| field.row(j).to_vec()).collect(),
    };
    serde_json::to_writer_pretty(out, &doc)?;
    Ok(())
}

pub fn read_field_json<T: Scalar, R: Read>(input: R) -> Result<ScalarField2D<T>> {
    let doc: FieldJson<T> = serde_json::from_reader(input)?;
    doc.grid.validate()?;
    if doc.values.len() != doc.grid.ny {
        return Err(Error::Dimension(format!(
            "{} rows, grid has ny = {}",
            doc.values.len(),
            doc.grid.ny
        )));
    }
    let mut values = Vec::with_capacity(doc.grid.len());
    for (j, row) in doc.values.into_iter().enumerate() {
        if row.len() != doc.grid.nx {
            return Err(Error::Dimension(format!(
                "row {j} has {} values, grid has nx = {}",
                row.len(),
                doc.grid.nx
            )));
        }
        values.extend(row);
    }
    ScalarField2D::new(doc.grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid1D;
    use proptest::prelude::*;

    fn sample() -> ScalarField2D<f64> {
        let g = Grid2D::new(
            Grid1D::periodic(5, 0.0, 1.0).unwrap(),
            Grid1D::closed(4, -1.0, 1.0).unwrap(),
        );
        ScalarField2D::from_fn(g, |x, y| x * 10.0 + y).unwrap()
    }

    #[test]
    fn csv_layout_and_rejection() {
        let f = sample();
        let mut buf = Vec::new();
        write_field_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert_eq!(text.lines().count(), 2 + 4);
        let back: ScalarField2D<f64> = read_field_csv(text.as_bytes()).unwrap();
        assert_eq!(back, f);

        // drop one value from the last row
        let mut lines: Vec<&str> = text.lines().collect();
        let last = lines.pop().unwrap();
        let shortened = last.rsplit_once(',').unwrap().0.to_string();
        let broken = format!("{}\n{}\n", lines.join("\n"), shortened);
        assert!(matches!(
            read_field_csv::<f64, _>(broken.as_bytes()),
            Err(Error::Dimension(_))
        ));
        // drop a whole row
        let broken = lines.join("\n");
        assert!(read_field_csv::<f64, _>(broken.as_bytes()).is_err());
    }

    #[test]
    fn json_rejects_ragged_rows() {
        let f = sample();
        let mut buf = Vec::new();
        write_field_json(&f, &mut buf).unwrap();
        let mut doc: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(read_field_json::<f64, _>(buf.as_slice()).unwrap(), f);
        doc["values"][1].as_array_mut().unwrap().pop();
        let text = doc.to_string();
        assert!(read_field_json::<f64, _>(text.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn csv_and_json_roundtrip(vals in prop::collection::vec(-1e6f64..1e6, 20)) {
            let g = Grid2D::new(
                Grid1D::new(5, 0.25, -1.0, false).unwrap(),
                Grid1D::new(4, 0.5, 2.0, true).unwrap(),
            );
            let f = ScalarField2D::new(g, vals).unwrap();
            let mut c = Vec::new();
            write_field_csv(&f, &mut c).unwrap();
            prop_assert_eq!(read_field_csv::<f64, _>(c.as_slice()).unwrap(), f.clone());
            let mut j = Vec::new();
            write_field_json(&f, &mut j).unwrap();
            prop_assert_eq!(read_field_json::<f64, _>(j.as_slice()).unwrap(), f);
        }
    }
}
