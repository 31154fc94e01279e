//! CSV ingestion into a [`Dataset`].

use std::path::Path;

use piic::models::{ColumnScale, Dataset, ResponseKind};
use serde::{Deserialize, Serialize};

use crate::error::{config, tagged, CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub response: String,
    /// Covariate columns in order; `None` takes every non-response column.
    pub covariates: Option<Vec<String>>,
    pub standardize: bool,
    pub kind: ResponseKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub name: String,
    /// Centering and scaling applied to the column, when standardized.
    pub scale: Option<ColumnScale>,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub data: Dataset,
    /// Same data before standardization.
    pub raw: Dataset,
    pub columns: Vec<ColumnInfo>,
}

pub fn ingest_csv(path: &Path, schema: &Schema) -> CliResult<Ingested> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    ingest_str(&text, schema).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn ingest_str(text: &str, schema: &Schema) -> CliResult<Ingested> {
    if text.trim().is_empty() {
        return config("empty file");
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers: Vec<String> =
        reader.headers().map_err(|e| CliError::Config(format!("header: {e}")))?.iter().map(str::to_string).collect();
    let position = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| CliError::Config(format!("no column named '{name}'")))
    };
    let response = position(&schema.response)?;
    let names: Vec<String> = match &schema.covariates {
        Some(c) => c.clone(),
        None => headers.iter().filter(|h| **h != schema.response).cloned().collect(),
    };
    if names.is_empty() {
        return config("no covariate columns");
    }
    let cols = names.iter().map(|n| position(n)).collect::<CliResult<Vec<_>>>()?;

    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut missing = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| CliError::Config(format!("row {row}: {e}")))?;
        let cell = |c: usize| -> CliResult<Option<f64>> {
            let s = record.get(c).unwrap_or("");
            if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") {
                return Ok(None);
            }
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                _ => config(format!("non-numeric cell '{s}' at row {row}, column '{}'", headers[c])),
            }
        };
        let yi = cell(response)?;
        let xi = cols.iter().map(|&c| cell(c)).collect::<CliResult<Vec<_>>>()?;
        match (yi, xi.iter().all(Option::is_some)) {
            (Some(v), true) => {
                y.push(v);
                x.extend(xi.into_iter().flatten());
            }
            _ => missing.push(row),
        }
    }
    if !missing.is_empty() {
        let rows: Vec<String> = missing.iter().map(usize::to_string).collect();
        return config(format!("missing values in rows {}", rows.join(", ")));
    }
    if y.is_empty() {
        return config("no data rows");
    }
    let (n, p) = (y.len(), names.len());
    let raw = Dataset::from_row_major(n, p, x, y, schema.kind).map_err(tagged("models"))?;
    if !schema.standardize {
        let columns = names.into_iter().map(|name| ColumnInfo { name, scale: None }).collect();
        return Ok(Ingested { data: raw.clone(), raw, columns });
    }
    for (j, name) in names.iter().enumerate() {
        let first = raw.row(0)[j];
        if (1..n).all(|i| raw.row(i)[j] == first) {
            return config(format!("zero variance column '{name}'"));
        }
    }
    let (data, scales) = raw.standardized().map_err(tagged("models"))?;
    let columns = names.into_iter().zip(scales).map(|(name, s)| ColumnInfo { name, scale: Some(s) }).collect();
    Ok(Ingested { data, raw, columns })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(standardize: bool) -> Schema {
        Schema { response: "y".into(), covariates: None, standardize, kind: ResponseKind::Gaussian }
    }

    #[test]
    fn reads_named_columns_in_order() {
        let s = Schema { covariates: Some(vec!["b".into(), "a".into()]), ..schema(false) };
        let got = ingest_str("a,y,b\n1,10,2\n3,30,4\n", &s).unwrap();
        assert_eq!(got.data.covariates(), &[2.0, 1.0, 4.0, 3.0]);
        assert_eq!(got.data.responses(), &[10.0, 30.0]);
    }

    #[test]
    fn missing_cells_are_listed_by_row() {
        let err = ingest_str("a,y\n1,2\n,3\n4,\n5,6\n", &schema(false)).unwrap_err();
        assert_eq!(err.to_string(), "missing values in rows 2, 3");
    }

    #[test]
    fn non_numeric_cells_are_rejected() {
        let err = ingest_str("a,y\n1,2\nx,3\n", &schema(false)).unwrap_err();
        assert!(err.to_string().contains("non-numeric cell 'x' at row 2"), "{err}");
    }

    #[test]
    fn standardized_columns_have_zero_mean_unit_variance() {
        let got = ingest_str("a,b,y\n1,5,0\n2,7,1\n6,9,0\n", &schema(true)).unwrap();
        for j in 0..2 {
            let col: Vec<f64> = (0..3).map(|i| got.data.row(i)[j]).collect();
            let mean = col.iter().sum::<f64>() / 3.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
            assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        }
        assert_eq!(got.columns[1].scale.unwrap().mean, 7.0);
    }
}
