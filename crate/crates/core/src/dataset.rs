//! The sample matrix `(X, Y)` with uniform empirical weights, CSV input and
//! output, and residual statistics.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{check_dim, Error, Result};
use crate::numeric::mean_rnorm;

/// `n` rows of covariates `x_i in R^d` and outcomes `y_i`.
///
/// Invariants: `n >= 1`, every row has `d` covariates, all entries finite.
/// Covariates are stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    x_names: Vec<String>,
    y_name: String,
}

impl Dataset {
    /// Builds a dataset from covariate rows and outcomes.
    pub fn new(rows: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut x = Vec::with_capacity(rows.len() * d);
        for row in &rows {
            check_dim(d, row.len())?;
            x.extend_from_slice(row);
        }
        Self::from_flat(d, x, y)
    }

    /// Builds a dataset from a row-major `n * d` covariate buffer.
    pub fn from_flat(d: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::validation("dataset has no rows"));
        }
        check_dim(n * d, x.len())?;
        for (k, v) in x.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::validation(format!(
                    "non-finite covariate at row {}, column {}",
                    k / d.max(1) + 1,
                    k % d.max(1) + 1
                )));
            }
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("non-finite outcome at row {}", i + 1)));
        }
        Ok(Dataset {
            n,
            d,
            x,
            y,
            x_names: (1..=d).map(|j| format!("x{j}")).collect(),
            y_name: "y".to_string(),
        })
    }

    /// Replaces the column names used for CSV output.
    pub fn with_names(mut self, x_names: Vec<String>, y_name: String) -> Result<Self> {
        check_dim(self.d, x_names.len())?;
        self.x_names = x_names;
        self.y_name = y_name;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    /// Row-major covariates.
    pub fn x_flat(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x_names(&self) -> &[String] {
        &self.x_names
    }

    pub fn y_name(&self) -> &str {
        &self.y_name
    }

    /// `X beta`.
    pub fn predict(&self, beta: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.d, beta.len())?;
        Ok((0..self.n)
            .map(|i| crate::numeric::dot(self.x_row(i), beta))
            .collect())
    }

    /// `y - X beta`.
    pub fn residuals(&self, beta: &[f64]) -> Result<Vec<f64>> {
        let fit = self.predict(beta)?;
        Ok(self.y.iter().zip(fit).map(|(y, f)| y - f).collect())
    }

    /// The first `m` rows.
    pub fn head(&self, m: usize) -> Result<Dataset> {
        if m == 0 || m > self.n {
            return Err(Error::validation(format!("cannot take {m} of {} rows", self.n)));
        }
        let mut out = Dataset::from_flat(self.d, self.x[..m * self.d].to_vec(), self.y[..m].to_vec())?;
        out.x_names = self.x_names.clone();
        out.y_name = self.y_name.clone();
        Ok(out)
    }

    /// Serializes as CSV with a header row. Values use shortest round-trip
    /// formatting, so reloading reproduces every `f64` bit-exactly.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::new();
        let header: Vec<&str> = self
            .x_names
            .iter()
            .map(String::as_str)
            .chain(std::iter::once(self.y_name.as_str()))
            .collect();
        s.push_str(&header.join(","));
        s.push('\n');
        for i in 0..self.n {
            for v in self.x_row(i) {
                let _ = write!(s, "{v},");
            }
            let _ = writeln!(s, "{}", self.y[i]);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Loads a headed CSV file; `outcome` names the outcome column and every
/// other column becomes a covariate, in file order.
pub fn load_dataset(path: &Path, outcome: &str) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text, outcome)
}

/// Parses CSV text; see [`load_dataset`].
pub fn parse_csv(text: &str, outcome: &str) -> Result<Dataset> {
    if text.trim().is_empty() {
        return Err(Error::validation("empty file"));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse { row: 0, column: None, msg: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    let y_col = headers
        .iter()
        .position(|h| h == outcome)
        .ok_or_else(|| Error::validation(format!("outcome column `{outcome}` not found in header")))?;
    let x_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != y_col)
        .map(|(_, h)| h.clone())
        .collect();
    let d = x_names.len();

    let mut x = Vec::new();
    let mut y = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| Error::Parse { row, column: None, msg: e.to_string() })?;
        if rec.len() != headers.len() {
            return Err(Error::Parse {
                row,
                column: None,
                msg: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                column: Some(headers[j].clone()),
                msg: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::validation(format!(
                    "non-finite value `{field}` at data row {row}, column `{}`",
                    headers[j]
                )));
            }
            if j == y_col {
                y.push(v);
            } else {
                x.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(Error::validation("file has a header but no data rows"));
    }
    Dataset::from_flat(d, x, y)?.with_names(x_names, outcome.to_string())
}

/// `((1/n) sum_i |y_i - x_i' beta|^r)^(1/r)`.
pub fn residual_rnorm(data: &Dataset, beta: &[f64], r: f64) -> Result<f64> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::validation(format!("exponent r must be finite and >= 1, got {r}")));
    }
    Ok(mean_rnorm(&data.residuals(beta)?, r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]], vec![1.0, 2.0, 3.5]).unwrap()
    }

    #[test]
    fn three_row_csv_parses() {
        let ds = parse_csv("a,b,y\n1,2,3\n4,5,6\n7,8,9\n", "y").unwrap();
        assert_eq!((ds.n(), ds.d()), (3, 2));
        assert_eq!(ds.x_row(1), &[4.0, 5.0]);
        assert_eq!(ds.y(), &[3.0, 6.0, 9.0]);
    }

    #[test]
    fn outcome_column_may_sit_anywhere() {
        let ds = parse_csv("y,a\n1,2\n", "y").unwrap();
        assert_eq!(ds.x_row(0), &[2.0]);
        assert_eq!(ds.x_names(), &["a".to_string()]);
    }

    #[test]
    fn empty_file_is_rejected() {
        assert!(matches!(parse_csv("", "y"), Err(Error::Validation(_))));
        assert!(matches!(parse_csv("a,y\n", "y"), Err(Error::Validation(_))));
    }

    #[test]
    fn nan_cell_is_named() {
        let err = parse_csv("a,y\n1,2\nNaN,3\n", "y").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Validation(_)));
        assert!(msg.contains("row 2") && msg.contains("`a`"), "{msg}");
    }

    #[test]
    fn malformed_row_reports_index() {
        let err = parse_csv("a,y\n1,2\n3\n", "y").unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }), "{err}");
        let err = parse_csv("a,y\n1,2\nx,3\n", "y").unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }), "{err}");
    }

    #[test]
    fn missing_outcome_column() {
        assert!(parse_csv("a,b\n1,2\n", "y").is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let ds = Dataset::new(
            vec![vec![0.1 + 0.2, -1e-300], vec![std::f64::consts::PI, 1.0 / 3.0]],
            vec![2.0f64.sqrt(), -7.25e17],
        )
        .unwrap();
        let back = parse_csv(&ds.to_csv_string(), "y").unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn residual_rnorm_examples() {
        let ds = toy();
        let got = residual_rnorm(&ds, &[1.0, 2.0], 3.0).unwrap();
        assert!((got - 0.5 / 3f64.powf(1.0 / 3.0)).abs() < 1e-15);
        let sym = Dataset::new(vec![vec![0.0], vec![0.0]], vec![1.0, -1.0]).unwrap();
        assert_eq!(residual_rnorm(&sym, &[0.0], 2.0).unwrap(), 1.0);
        let one = Dataset::new(vec![vec![0.0]; 3], vec![3.0, 0.0, 0.0]).unwrap();
        assert_eq!(residual_rnorm(&one, &[0.0], 1.0).unwrap(), 1.0);
    }

    #[test]
    fn exact_fit_has_zero_residual() {
        let ds = Dataset::new(vec![vec![1.0, 2.0], vec![-1.0, 0.5]], vec![5.0, 0.0]).unwrap();
        for r in [1.0, 2.0, 4.5] {
            assert_eq!(residual_rnorm(&ds, &[1.0, 2.0], r).unwrap(), 0.0);
        }
    }

    #[test]
    fn residual_rnorm_rejects_bad_inputs() {
        let ds = toy();
        assert!(matches!(residual_rnorm(&ds, &[1.0], 2.0), Err(Error::Dimension { .. })));
        assert!(residual_rnorm(&ds, &[1.0, 1.0], 0.5).is_err());
    }
}
