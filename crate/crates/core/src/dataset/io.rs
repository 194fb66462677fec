use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{CategoricalColumn, FirmPanel, NumericColumn, Schema};
use crate::error::{Error, Result};

fn is_missing(cell: &str) -> bool {
    let cell = cell.trim();
    cell.is_empty() || cell == "NA"
}

/// Reads a firm-year panel from a CSV file. Lines starting with `#` are
/// skipped; empty cells and `NA` mark missing values.
pub fn ingest_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<FirmPanel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<FirmPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let declared = schema.column_names();
    for h in &header {
        if !declared.contains(h) {
            return Err(Error::Schema(format!("unknown column {h:?}")));
        }
    }
    let position = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("declared column {name:?} missing from header")))
    };
    let id_pos = position(&schema.firm_id)?;
    let year_pos = position(&schema.year)?;
    let num_pos: Vec<usize> = schema.numeric.iter().map(|n| position(n)).collect::<Result<_>>()?;
    let cat_pos: Vec<usize> = schema
        .categorical
        .iter()
        .map(|c| position(&c.name))
        .collect::<Result<_>>()?;

    let mut firm_ids = Vec::new();
    let mut years = Vec::new();
    let mut num_cells: Vec<Vec<Option<f64>>> = vec![Vec::new(); num_pos.len()];
    let mut cat_cells: Vec<Vec<Option<String>>> = vec![Vec::new(); cat_pos.len()];

    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let id = record.get(id_pos).unwrap_or("").trim();
        if is_missing(id) {
            return Err(Error::Schema(format!("row {row}: empty firm id")));
        }
        firm_ids.push(id.to_string());
        let year_cell = record.get(year_pos).unwrap_or("").trim();
        let year: i32 = year_cell.parse().map_err(|_| Error::Parse {
            row,
            column: schema.year.clone(),
            value: year_cell.to_string(),
        })?;
        years.push(year);

        for (k, &pos) in num_pos.iter().enumerate() {
            let cell = record.get(pos).unwrap_or("");
            if is_missing(cell) {
                num_cells[k].push(None);
                continue;
            }
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row,
                column: schema.numeric[k].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: schema.numeric[k].clone(),
                    value: cell.to_string(),
                });
            }
            num_cells[k].push(Some(v));
        }
        for (k, &pos) in cat_pos.iter().enumerate() {
            let cell = record.get(pos).unwrap_or("").trim();
            if is_missing(cell) {
                cat_cells[k].push(None);
                continue;
            }
            let spec = &schema.categorical[k];
            if let Some(vocab) = &spec.vocabulary {
                if !vocab.iter().any(|v| v == cell) {
                    return Err(Error::Schema(format!(
                        "row {row}: {cell:?} not in vocabulary of {}",
                        spec.name
                    )));
                }
            }
            cat_cells[k].push(Some(cell.to_string()));
        }
    }

    let numeric = schema
        .numeric
        .iter()
        .zip(num_cells)
        .map(|(name, cells)| NumericColumn::from_options(name.clone(), cells))
        .collect();
    let categorical = schema
        .categorical
        .iter()
        .zip(cat_cells)
        .map(|(spec, values)| CategoricalColumn {
            name: spec.name.clone(),
            values,
        })
        .collect();
    FirmPanel::new(firm_ids, years, numeric, categorical)
}

/// Writes the panel as CSV, preceded by `# `-prefixed comment lines. Missing
/// cells are written empty; floats use the shortest round-trip form.
pub fn write_csv<W: Write>(panel: &FirmPanel, mut out: W, comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}").map_err(|e| Error::io("<csv output>", e))?;
    }
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["firm_id".to_string(), "year".to_string()];
    header.extend(panel.numeric.iter().map(|c| c.name.clone()));
    header.extend(panel.categorical.iter().map(|c| c.name.clone()));
    wtr.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for r in 0..panel.n_rows() {
        record.clear();
        record.push(panel.firm_ids[r].clone());
        record.push(panel.years[r].to_string());
        for c in &panel.numeric {
            record.push(match c.get(r) {
                Some(v) => format!("{v}"),
                None => String::new(),
            });
        }
        for c in &panel.categorical {
            record.push(c.get(r).unwrap_or("").to_string());
        }
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::CategoricalSpec;

    fn schema() -> Schema {
        Schema {
            firm_id: "firm_id".into(),
            year: "year".into(),
            numeric: vec!["fixed_assets".into(), "employees".into()],
            categorical: vec![CategoricalSpec {
                name: "region".into(),
                vocabulary: Some(vec!["FR10".into(), "FR71".into()]),
            }],
        }
    }

    #[test]
    fn fully_observed_file() {
        let csv = "firm_id,year,fixed_assets,employees,region\n\
                   a,2010,1.5,3,FR10\na,2011,2,4,FR10\nb,2010,7,1,FR71\n";
        let p = read_csv(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(p.n_rows(), 3);
        assert!(p.numeric.iter().all(|c| c.missing.iter().all(|m| !m)));
    }

    #[test]
    fn empty_cell_sets_single_mask_bit() {
        let csv = "firm_id,year,fixed_assets,employees,region\n\
                   a,2010,,3,FR10\na,2011,2,NA,FR10\nb,2010,7,1,FR71\n";
        let p = read_csv(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(p.numeric[0].missing, vec![true, false, false]);
        assert_eq!(p.numeric[1].missing, vec![false, true, false]);
    }

    #[test]
    fn misspelled_header_named_in_error() {
        let csv = "firm_id,year,fixd_assets,employees,region\na,2010,1,3,FR10\n";
        let err = read_csv(csv.as_bytes(), &schema()).unwrap_err();
        assert!(err.to_string().contains("fixd_assets"), "{err}");
    }

    #[test]
    fn duplicate_key_error() {
        let csv = "firm_id,year,fixed_assets,employees,region\na,2010,1,3,FR10\na,2010,1,3,FR10\n";
        let err = read_csv(csv.as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, Error::DuplicateKey { .. }));
    }

    #[test]
    fn text_in_numeric_column_reports_row() {
        let csv = "firm_id,year,fixed_assets,employees,region\na,2010,1,3,FR10\nb,2010,abc,3,FR10\n";
        match read_csv(csv.as_bytes(), &schema()).unwrap_err() {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "fixed_assets");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn vocabulary_enforced() {
        let csv = "firm_id,year,fixed_assets,employees,region\na,2010,1,3,XX99\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), &schema()).unwrap_err(),
            Error::Schema(_)
        ));
    }
}
