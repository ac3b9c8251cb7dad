//! CSV ingestion driven by a column schema.
//!
//! The schema assigns every header a role: `continuous`, `binary`,
//! `categorical`, `label` or `drop`. Binary columns map their two values to
//! {-1, +1} (smaller value low); categorical columns expand to one
//! {-1, +1} column per category; the label column becomes a class index.
//! Continuous columns are loaded raw — standardization happens later, with
//! statistics fitted on the training split (see [`super::Preprocessor`]).

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::Mat;

use super::{DataSet, FeatureKind};

/// Column roles for a CSV file. Every header must be covered by exactly one
/// of the lists (or be the label).
#[derive(Debug, Clone, Deserialize)]
pub struct Schema {
    pub label: String,
    #[serde(default)]
    pub continuous: Vec<String>,
    #[serde(default)]
    pub binary: Vec<String>,
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default)]
    pub drop: Vec<String>,
    /// Optional explicit category lists. When a categorical column is listed
    /// here, a value outside the list is an error; otherwise categories are
    /// discovered from the file.
    #[serde(default)]
    pub categories: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Continuous,
    Binary,
    Categorical,
    Label,
    Drop,
}

impl Schema {
    pub fn from_toml_str(text: &str) -> Result<Schema> {
        toml::from_str(text).map_err(|e| Error::Config(format!("schema parse error: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Schema> {
        Schema::from_toml_str(&std::fs::read_to_string(path)?)
    }

    fn role_of(&self, header: &str) -> Option<Role> {
        if header == self.label {
            Some(Role::Label)
        } else if self.continuous.iter().any(|c| c == header) {
            Some(Role::Continuous)
        } else if self.binary.iter().any(|c| c == header) {
            Some(Role::Binary)
        } else if self.categorical.iter().any(|c| c == header) {
            Some(Role::Categorical)
        } else if self.drop.iter().any(|c| c == header) {
            Some(Role::Drop)
        } else {
            None
        }
    }
}

/// Sorts values numerically when they all parse as finite numbers,
/// lexicographically otherwise.
fn sorted_distinct(values: &[String]) -> Vec<String> {
    let mut distinct: Vec<String> = Vec::new();
    for v in values {
        if !distinct.contains(v) {
            distinct.push(v.clone());
        }
    }
    let numeric: Option<Vec<f64>> = distinct
        .iter()
        .map(|v| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
        .collect();
    match numeric {
        Some(nums) => {
            let mut pairs: Vec<(f64, String)> = nums.into_iter().zip(distinct).collect();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            pairs.into_iter().map(|(_, s)| s).collect()
        }
        None => {
            distinct.sort();
            distinct
        }
    }
}

/// Loads a CSV file through a schema. Cell coordinates in errors are
/// 1-based data rows (the header is row 0) and 0-based columns.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<DataSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data(format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();

    let mut roles = Vec::with_capacity(headers.len());
    for h in &headers {
        match schema.role_of(h) {
            Some(r) => roles.push(r),
            None => {
                return Err(Error::Config(format!(
                    "column \"{h}\" is not covered by the schema"
                )))
            }
        }
    }
    for name in schema
        .continuous
        .iter()
        .chain(&schema.binary)
        .chain(&schema.categorical)
        .chain(std::iter::once(&schema.label))
    {
        if !headers.iter().any(|h| h == name) {
            return Err(Error::Config(format!(
                "schema column \"{name}\" is missing from the file"
            )));
        }
    }
    if roles.iter().filter(|r| **r == Role::Label).count() != 1 {
        return Err(Error::Config("exactly one label column required".into()));
    }

    // first pass: collect raw cells
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("row {}: {e}", i + 1)))?;
        if record.len() != headers.len() {
            return Err(Error::Data(format!(
                "row {} has {} cells, header has {}",
                i + 1,
                record.len(),
                headers.len()
            )));
        }
        rows.push(record.iter().map(str::to_string).collect());
    }

    // per-column value domains
    let column_values = |c: usize| -> Vec<String> { rows.iter().map(|r| r[c].clone()).collect() };

    // label classes
    let label_col = roles.iter().position(|r| *r == Role::Label).unwrap();
    let classes = sorted_distinct(&column_values(label_col));
    if classes.len() < 2 {
        return Err(Error::Data(format!(
            "label column \"{}\" has {} distinct values; need at least 2",
            headers[label_col],
            classes.len()
        )));
    }

    // binary domains and category lists
    let mut binary_domains: BTreeMap<usize, (String, String)> = BTreeMap::new();
    let mut category_lists: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (c, role) in roles.iter().enumerate() {
        match role {
            Role::Binary => {
                let distinct = sorted_distinct(&column_values(c));
                if distinct.len() != 2 {
                    return Err(Error::Data(format!(
                        "binary column \"{}\" has {} distinct values, expected 2",
                        headers[c],
                        distinct.len()
                    )));
                }
                binary_domains.insert(c, (distinct[0].clone(), distinct[1].clone()));
            }
            Role::Categorical => {
                let list = match schema.categories.get(&headers[c]) {
                    Some(explicit) => explicit.clone(),
                    None => sorted_distinct(&column_values(c)),
                };
                if list.is_empty() {
                    return Err(Error::Data(format!(
                        "categorical column \"{}\" has no categories",
                        headers[c]
                    )));
                }
                category_lists.insert(c, list);
            }
            _ => {}
        }
    }

    // output layout: original column order, categoricals expanded in place
    let mut kinds: Vec<FeatureKind> = Vec::new();
    for (c, role) in roles.iter().enumerate() {
        match role {
            Role::Continuous => kinds.push(FeatureKind::Continuous),
            Role::Binary => kinds.push(FeatureKind::Binary),
            Role::Categorical => {
                kinds.extend(
                    std::iter::repeat(FeatureKind::CategoricalExpanded)
                        .take(category_lists[&c].len()),
                );
            }
            _ => {}
        }
    }

    let d = kinds.len();
    let mut x = Mat::zeros(rows.len(), d);
    let mut labels = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        let mut out_c = 0usize;
        for (c, role) in roles.iter().enumerate() {
            let cell = row[c].trim();
            match role {
                Role::Continuous => {
                    let v: f64 = cell.parse().map_err(|_| Error::Cell {
                        row: r + 1,
                        col: c,
                        message: format!("\"{cell}\" is not a number"),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Cell {
                            row: r + 1,
                            col: c,
                            message: format!("non-finite value {cell}"),
                        });
                    }
                    *x.at_mut(r, out_c) = v;
                    out_c += 1;
                }
                Role::Binary => {
                    let (low, high) = &binary_domains[&c];
                    *x.at_mut(r, out_c) = if cell == low {
                        -1.0
                    } else if cell == high {
                        1.0
                    } else {
                        return Err(Error::Cell {
                            row: r + 1,
                            col: c,
                            message: format!("\"{cell}\" not in binary domain {{{low}, {high}}}"),
                        });
                    };
                    out_c += 1;
                }
                Role::Categorical => {
                    let list = &category_lists[&c];
                    let hit = list.iter().position(|cat| cat == cell);
                    match hit {
                        Some(k) => {
                            for (j, _) in list.iter().enumerate() {
                                *x.at_mut(r, out_c + j) = if j == k { 1.0 } else { -1.0 };
                            }
                        }
                        None => {
                            return Err(Error::Data(format!(
                                "unknown category \"{cell}\" in column \"{}\" (row {})",
                                headers[c],
                                r + 1
                            )))
                        }
                    }
                    out_c += list.len();
                }
                Role::Label => {
                    let k = classes.iter().position(|v| v == cell).unwrap();
                    labels.push(k);
                }
                Role::Drop => {}
            }
        }
    }

    let n_classes = classes.len();
    DataSet::from_features(
        x,
        labels,
        n_classes,
        kinds,
        vec![
            format!("load_csv({})", path.display()),
            format!(
                "schema: label={}, {} continuous, {} binary, {} categorical (expanded), {} dropped",
                schema.label,
                schema.continuous.len(),
                schema.binary.len(),
                schema.categorical.len(),
                schema.drop.len()
            ),
            "continuous columns raw; standardization pending".to_string(),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        (dir, path)
    }

    fn demo_schema() -> Schema {
        Schema::from_toml_str(
            r#"
label = "y"
continuous = ["a"]
binary = ["b"]
categorical = ["c"]
drop = ["junk"]
"#,
        )
        .unwrap()
    }

    #[test]
    fn structural_transforms_apply() {
        let (_d, path) = write_tmp(
            "a,b,c,junk,y\n\
             1.5,0,red,x,0\n\
             -2.0,1,blue,x,1\n\
             0.25,0,green,x,0\n",
        );
        let ds = load_csv(&path, &demo_schema()).unwrap();
        // a (1) + b (1) + c (3 categories) = 5 columns
        assert_eq!(ds.dim(), 5);
        assert_eq!(ds.feature_kinds[0], FeatureKind::Continuous);
        assert_eq!(ds.feature_kinds[1], FeatureKind::Binary);
        assert_eq!(ds.feature_kinds[2], FeatureKind::CategoricalExpanded);
        // continuous stays raw
        assert_eq!(ds.x.at(0, 0), 1.5);
        // binary: 0 -> -1, 1 -> +1
        assert_eq!(ds.x.at(0, 1), -1.0);
        assert_eq!(ds.x.at(1, 1), 1.0);
        // categories sorted lexicographically: blue, green, red
        assert_eq!(ds.x.row(0)[2..5], [-1.0, -1.0, 1.0]);
        assert_eq!(ds.x.row(1)[2..5], [1.0, -1.0, -1.0]);
        assert_eq!(ds.labels, vec![0, 1, 0]);
    }

    #[test]
    fn unparseable_cell_reports_coordinates() {
        let (_d, path) = write_tmp("a,b,c,junk,y\n1.0,0,red,x,0\noops,1,red,x,1\n");
        match load_csv(&path, &demo_schema()) {
            Err(Error::Cell { row, col, .. }) => {
                assert_eq!((row, col), (2, 0));
            }
            other => panic!("expected Cell error, got {other:?}"),
        }
    }

    #[test]
    fn uncovered_column_is_a_config_error() {
        let (_d, path) = write_tmp("a,b,c,junk,extra,y\n1,0,red,x,1,0\n2,1,red,x,1,1\n");
        assert!(matches!(
            load_csv(&path, &demo_schema()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn explicit_categories_reject_unknown_values() {
        let schema = Schema::from_toml_str(
            r#"
label = "y"
continuous = ["a"]
binary = ["b"]
categorical = ["c"]
drop = ["junk"]
[categories]
c = ["red", "blue"]
"#,
        )
        .unwrap();
        let (_d, path) = write_tmp("a,b,c,junk,y\n1,0,red,x,0\n2,1,violet,x,1\n");
        match load_csv(&path, &schema) {
            Err(Error::Data(msg)) => assert!(msg.contains("unknown category")),
            other => panic!("expected Data error, got {other:?}"),
        }
    }

    #[test]
    fn explicit_categories_pin_width_and_order() {
        let schema = Schema::from_toml_str(
            r#"
label = "y"
continuous = ["a"]
binary = ["b"]
categorical = ["c"]
drop = ["junk"]
[categories]
c = ["red", "blue", "green", "yellow"]
"#,
        )
        .unwrap();
        let (_d, path) = write_tmp("a,b,c,junk,y\n1,0,red,x,0\n2,1,blue,x,1\n");
        let ds = load_csv(&path, &schema).unwrap();
        assert_eq!(ds.dim(), 1 + 1 + 4);
        assert_eq!(ds.x.row(0)[2..6], [1.0, -1.0, -1.0, -1.0]);
    }

    #[test]
    fn numeric_category_values_sort_numerically() {
        let schema = Schema::from_toml_str(
            r#"
label = "y"
categorical = ["c"]
"#,
        )
        .unwrap();
        let (_d, path) = write_tmp("c,y\n10,0\n2,1\n2,0\n10,1\n1,0\n");
        let ds = load_csv(&path, &schema).unwrap();
        // categories 1, 2, 10 in numeric order; row 0 has c=10 -> last column
        assert_eq!(ds.x.row(0), &[-1.0, -1.0, 1.0]);
        assert_eq!(ds.x.row(4), &[1.0, -1.0, -1.0]);
    }

    #[test]
    fn binary_column_with_three_values_is_rejected() {
        let (_d, path) = write_tmp("a,b,c,junk,y\n1,0,red,x,0\n2,1,red,x,1\n3,2,red,x,0\n");
        assert!(matches!(
            load_csv(&path, &demo_schema()),
            Err(Error::Data(_))
        ));
    }
}
