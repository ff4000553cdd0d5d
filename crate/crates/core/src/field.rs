//! Dense space-time fields stored step-major.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    steps: usize,
    cells: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(steps: usize, cells: usize) -> Self {
        Field {
            steps,
            cells,
            data: vec![0.0; steps * cells],
        }
    }

    pub fn from_fn(steps: usize, cells: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(steps * cells);
        for k in 0..steps {
            for i in 0..cells {
                data.push(f(k, i));
            }
        }
        Field { steps, cells, data }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    #[inline]
    pub fn get(&self, step: usize, cell: usize) -> f64 {
        self.data[step * self.cells + cell]
    }

    #[inline]
    pub fn set(&mut self, step: usize, cell: usize, value: f64) {
        self.data[step * self.cells + cell] = value;
    }

    #[inline]
    pub fn row(&self, step: usize) -> &[f64] {
        &self.data[step * self.cells..(step + 1) * self.cells]
    }

    #[inline]
    pub fn row_mut(&mut self, step: usize) -> &mut [f64] {
        &mut self.data[step * self.cells..(step + 1) * self.cells]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Keeps the first `steps` rows.
    pub fn truncate(&mut self, steps: usize) {
        if steps < self.steps {
            self.steps = steps;
            self.data.truncate(steps * self.cells);
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert_eq!((self.steps, self.cells), (other.steps, other.cells));
        Field {
            steps: self.steps,
            cells: self.cells,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `sup |self - other|` over all steps and cells.
    pub fn sup_distance(&self, other: &Field) -> f64 {
        assert_eq!((self.steps, self.cells), (other.steps, other.cells));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
