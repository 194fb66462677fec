use exportscore::dataset::{read_csv, write_csv, CategoricalColumn, CategoricalSpec, NumericColumn};
use exportscore::{FirmPanel, Schema};
use proptest::prelude::*;

fn schema(numeric: usize) -> Schema {
    Schema {
        firm_id: "firm_id".into(),
        year: "year".into(),
        numeric: (0..numeric).map(|j| format!("v{j}")).collect(),
        categorical: vec![CategoricalSpec { name: "region".into(), vocabulary: None }],
    }
}

fn cell() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![
        1 => Just(None),
        4 => (-1e12f64..1e12).prop_map(Some),
        1 => prop::num::f64::NORMAL.prop_map(Some),
    ]
}

prop_compose! {
    fn panel()(firms in 1usize..6, years in 1usize..5, cols in 1usize..5)
        (cells in prop::collection::vec(cell(), firms * years * cols),
         regions in prop::collection::vec(prop::option::of("[A-Z]{2}[0-9]{2}"), firms * years),
         firms in Just(firms), years in Just(years), cols in Just(cols)) -> FirmPanel {
        let n = firms * years;
        let ids = (0..n).map(|r| format!("f{}", r / years)).collect();
        let yrs = (0..n).map(|r| 2000 + (r % years) as i32).collect();
        let numeric = (0..cols)
            .map(|j| NumericColumn::from_options(format!("v{j}"), (0..n).map(|r| cells[j * n + r])))
            .collect();
        let region = CategoricalColumn { name: "region".into(), values: regions };
        FirmPanel::new(ids, yrs, numeric, vec![region]).unwrap()
    }
}

proptest! {
    #[test]
    fn csv_round_trip_preserves_values_and_mask(p in panel()) {
        let mut buf = Vec::new();
        write_csv(&p, &mut buf, &["generated for a test".to_string()]).unwrap();
        let back = read_csv(buf.as_slice(), &schema(p.numeric.len())).unwrap();
        prop_assert_eq!(&back.firm_ids, &p.firm_ids);
        prop_assert_eq!(&back.years, &p.years);
        for (a, b) in p.numeric.iter().zip(&back.numeric) {
            prop_assert_eq!(&a.missing, &b.missing);
            for r in 0..p.n_rows() {
                prop_assert_eq!(a.get(r).map(f64::to_bits), b.get(r).map(f64::to_bits));
            }
        }
        prop_assert_eq!(&p.categorical, &back.categorical);
    }
}

#[test]
fn na_and_empty_cells_are_missing() {
    let text = "# header comment\nfirm_id,year,v0,region\na,2010,NA,FR10\na,2011,,\na,2012,1.5,FR10\n";
    let p = read_csv(text.as_bytes(), &schema(1)).unwrap();
    let v = p.numeric("v0").unwrap();
    assert_eq!(v.missing, vec![true, true, false]);
    assert_eq!(v.get(2), Some(1.5));
    assert_eq!(p.categorical("region").unwrap().get(1), None);
}

#[test]
fn duplicate_keys_are_rejected() {
    let text = "firm_id,year,v0,region\na,2010,1,FR10\na,2010,2,FR10\n";
    let err = read_csv(text.as_bytes(), &schema(1)).unwrap_err();
    assert_eq!(err.kind(), "duplicate_key");
}
