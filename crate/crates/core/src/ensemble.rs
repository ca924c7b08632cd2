use crate::error::{LabError, Result};

/// `R` independent realisations of a process window of length `N`, stored
/// row-major. Row `r` holds sites `offset .. offset + N` of replica `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaEnsemble {
    data: Vec<f64>,
    replicas: usize,
    len: usize,
    offset: i64,
}

impl ReplicaEnsemble {
    pub fn new(data: Vec<f64>, replicas: usize, len: usize, offset: i64) -> Result<Self> {
        if replicas == 0 || len == 0 {
            return Err(LabError::InvalidParameter("ensemble needs at least one replica and one site".into()));
        }
        if data.len() != replicas * len {
            return Err(LabError::InvalidParameter(format!(
                "ensemble data has {} entries, expected {replicas} x {len}",
                data.len()
            )));
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(LabError::NonFinite { index, value });
        }
        Ok(ReplicaEnsemble {
            data,
            replicas,
            len,
            offset,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, offset: i64) -> Result<Self> {
        let replicas = rows.len();
        let len = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != len) {
            return Err(LabError::InvalidParameter("ragged ensemble rows".into()));
        }
        Self::new(rows.into_iter().flatten().collect(), replicas, len, offset)
    }

    pub fn replicas(&self) -> usize {
        self.replicas
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.len..(r + 1) * self.len]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.len)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Column `site` (window-relative) across replicas.
    pub fn column(&self, site: usize) -> Vec<f64> {
        self.rows().map(|row| row[site]).collect()
    }

    /// Window sums `S_{[start, start+n)}` per replica (window-relative `start`).
    pub fn window_sums(&self, start: usize, n: usize) -> Vec<f64> {
        self.rows().map(|row| row[start..start + n].iter().sum()).collect()
    }

    /// Columns `[start, start + n)` as an ensemble offset by `start`.
    pub fn window(&self, start: usize, n: usize) -> Result<Self> {
        if n == 0 || start + n > self.len {
            return Err(LabError::InvalidParameter(format!(
                "window [{start}, {}) outside length {}",
                start + n,
                self.len
            )));
        }
        let mut data = Vec::with_capacity(self.replicas * n);
        for row in self.rows() {
            data.extend_from_slice(&row[start..start + n]);
        }
        Ok(ReplicaEnsemble {
            data,
            replicas: self.replicas,
            len: n,
            offset: self.offset + start as i64,
        })
    }

    /// Sub-ensemble made of the given replica rows.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.len);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        ReplicaEnsemble {
            data,
            replicas: rows.len(),
            len: self.len,
            offset: self.offset,
        }
    }

    /// Even rows and odd rows, as two independent halves.
    pub fn split_halves(&self) -> (Self, Self) {
        let even: Vec<usize> = (0..self.replicas).step_by(2).collect();
        let odd: Vec<usize> = (1..self.replicas).step_by(2).collect();
        (self.select_rows(&even), self.select_rows(&odd))
    }
}
