use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// A finite, uniformly weighted point cloud in `R^d`.
///
/// CSV layout: a `# d=<d> n=<n>` line, a header `x0,...,x{d-1}`, then one
/// point per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCloud {
    dim: usize,
    points: Vec<DVector<f64>>,
}

impl SampleCloud {
    pub fn new(points: Vec<DVector<f64>>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::invalid("a sample cloud needs at least one point"))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::invalid("points must have dimension at least 1"));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid("sample cloud contains a non-finite point"));
            }
        }
        Ok(Self { dim, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<DVector<f64>> {
        self.points
    }

    /// Applies `f` to every point.
    pub fn map(&self, f: impl Fn(&DVector<f64>) -> DVector<f64>) -> Result<Self> {
        Self::new(self.points.iter().map(f).collect())
    }

    pub fn mean(&self) -> DVector<f64> {
        let mut acc = DVector::zeros(self.dim);
        for p in &self.points {
            acc += p;
        }
        acc / self.len() as f64
    }

    /// Sample covariance with the `1/(n-1)` normalisation (zero for `n = 1`).
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.len();
        let mean = self.mean();
        let mut acc = DMatrix::zeros(self.dim, self.dim);
        for p in &self.points {
            let c = p - &mean;
            acc += &c * c.transpose();
        }
        if n > 1 {
            acc / (n - 1) as f64
        } else {
            acc
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# d={} n={}", self.dim, self.len())?;
        let header: Vec<String> = (0..self.dim).map(|i| format!("x{i}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for p in &self.points {
            let row: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let meta = lines
            .next()
            .ok_or_else(|| Error::Parse("empty cloud file".into()))??;
        let (d, n) = parse_meta(&meta)?;
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("missing column header".into()))??;
        let expected: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
        if header.trim().split(',').map(str::trim).ne(expected.iter().map(String::as_str)) {
            return Err(Error::Parse(format!("expected header x0..x{}", d - 1)));
        }
        let mut points = Vec::with_capacity(n);
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let values = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", row + 1)))?;
            if values.len() != d {
                return Err(Error::Parse(format!(
                    "row {} has {} columns, expected {d}",
                    row + 1,
                    values.len()
                )));
            }
            points.push(DVector::from_vec(values));
        }
        if points.len() != n {
            return Err(Error::Parse(format!(
                "header announces n={n} but {} rows were read",
                points.len()
            )));
        }
        Self::new(points)
    }
}

fn parse_meta(line: &str) -> Result<(usize, usize)> {
    let body = line
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse("first line must be `# d=<d> n=<n>`".into()))?;
    let mut d = None;
    let mut n = None;
    for tok in body.split_whitespace() {
        if let Some(v) = tok.strip_prefix("d=") {
            d = v.parse().ok();
        } else if let Some(v) = tok.strip_prefix("n=") {
            n = v.parse().ok();
        }
    }
    match (d, n) {
        (Some(d), Some(n)) if d > 0 => Ok((d, n)),
        _ => Err(Error::Parse(format!("malformed cloud metadata line `{line}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_empty_and_ragged() {
        assert!(SampleCloud::new(vec![]).is_err());
        let ragged = vec![DVector::zeros(2), DVector::zeros(3)];
        assert!(SampleCloud::new(ragged).is_err());
        assert!(SampleCloud::new(vec![DVector::from_vec(vec![f64::NAN])]).is_err());
    }

    #[test]
    fn csv_layout() {
        let cloud = SampleCloud::new(vec![
            DVector::from_vec(vec![1.0, -2.5]),
            DVector::from_vec(vec![0.125, 3.0]),
        ])
        .unwrap();
        let mut buf = Vec::new();
        cloud.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "# d=2 n=2\nx0,x1\n1,-2.5\n0.125,3\n");
    }

    #[test]
    fn csv_rejects_count_mismatch() {
        let text = "# d=1 n=3\nx0\n1\n2\n";
        assert!(SampleCloud::read_csv(text.as_bytes()).is_err());
        let text = "d=1 n=1\nx0\n1\n";
        assert!(SampleCloud::read_csv(text.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(
            rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..20)
        ) {
            let cloud = SampleCloud::new(rows.into_iter().map(DVector::from_vec).collect()).unwrap();
            let mut buf = Vec::new();
            cloud.write_csv(&mut buf).unwrap();
            let back = SampleCloud::read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back, cloud);
        }
    }
}
