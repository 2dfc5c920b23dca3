//! Small grid-report container shared by the study pipelines: one row per
//! loss, one column per prior, replicate means with standard errors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportTable {
    pub row_names: Vec<String>,
    pub col_names: Vec<String>,
    pub mean: Vec<Vec<f64>>,
    pub se: Vec<Vec<f64>>,
}

impl ReportTable {
    /// Build from per-replicate cell values, row-major `[row][col][replicate]`.
    pub fn from_replicates(
        row_names: Vec<String>,
        col_names: Vec<String>,
        cells: &[Vec<Vec<f64>>],
    ) -> Self {
        let mut mean = vec![vec![0.0; col_names.len()]; row_names.len()];
        let mut se = vec![vec![0.0; col_names.len()]; row_names.len()];
        for (i, row) in cells.iter().enumerate() {
            for (j, values) in row.iter().enumerate() {
                let n = values.len() as f64;
                let m = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
                mean[i][j] = m;
                se[i][j] = (var / n).sqrt();
            }
        }
        Self { row_names, col_names, mean, se }
    }

    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        let mut header = vec!["loss".to_string()];
        header.extend(self.col_names.iter().cloned());
        wtr.write_record(&header)?;
        for (i, name) in self.row_names.iter().enumerate() {
            let mut row = vec![name.clone()];
            row.extend(self.mean[i].iter().map(|v| format!("{v}")));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
