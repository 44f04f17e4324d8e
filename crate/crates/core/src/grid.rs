use crate::error::{Error, Result};

/// How values are continued past the ends of the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    /// The window is one period of a circle.
    Periodic,
    /// The window is a piece of the real line; the edge cells continue as constants.
    ConstantExtension,
}

/// Piecewise-constant field on a uniform 1-D mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub values: Vec<f64>,
    pub dx: f64,
    pub x0: f64,
    pub boundary: Boundary,
}

impl GridFunction {
    pub fn new(values: Vec<f64>, dx: f64, x0: f64, boundary: Boundary) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("grid function has no cells".into()));
        }
        if !(dx > 0.0 && dx.is_finite()) || !x0.is_finite() {
            return Err(Error::InvalidInput(format!("bad mesh: dx = {dx}, x0 = {x0}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value in cell {i}")));
        }
        Ok(Self {
            values,
            dx,
            x0,
            boundary,
        })
    }

    /// Samples `f` at the cell centres of `n` cells covering `[a, b]`.
    pub fn from_fn(n: usize, a: f64, b: f64, boundary: Boundary, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n == 0 || !(b > a) {
            return Err(Error::InvalidInput(format!("bad window [{a}, {b}] with {n} cells")));
        }
        let dx = (b - a) / n as f64;
        let values = (0..n).map(|i| f(a + (i as f64 + 0.5) * dx)).collect();
        Self::new(values, dx, a, boundary)
    }

    /// Same mesh, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            values,
            dx: self.dx,
            x0: self.x0,
            boundary: self.boundary,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Window length |M|.
    pub fn length(&self) -> f64 {
        self.dx * self.len() as f64
    }

    pub fn x_end(&self) -> f64 {
        self.x0 + self.length()
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.dx
    }

    /// Left edge of cell `i`; `edge(len())` is the right end of the window.
    pub fn edge(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    /// Value in cell `i`, continued past the window according to the boundary.
    pub fn at(&self, i: isize) -> f64 {
        let n = self.len() as isize;
        let j = match self.boundary {
            Boundary::Periodic => i.rem_euclid(n),
            Boundary::ConstantExtension => i.clamp(0, n - 1),
        };
        self.values[j as usize]
    }

    /// Index of the cell containing `x` (edges belong to the cell on their right).
    pub fn cell_of(&self, x: f64) -> usize {
        let n = self.len();
        let s = match self.boundary {
            Boundary::Periodic => (x - self.x0).rem_euclid(self.length()),
            Boundary::ConstantExtension => x - self.x0,
        };
        let i = (s / self.dx).floor();
        if i < 0.0 {
            0
        } else {
            (i as usize).min(n - 1)
        }
    }

    /// Σ values·dx, summed left to right.
    pub fn integral(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc + v) * self.dx
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Total variation, including the wrap-around jump on a circle.
    pub fn total_variation(&self) -> f64 {
        let interior: f64 = self.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        match self.boundary {
            Boundary::Periodic => interior + (self.values[0] - self.values[self.len() - 1]).abs(),
            Boundary::ConstantExtension => interior,
        }
    }

    /// Normalised L¹ distance (1/|M|) Σ |a - b| dx between two fields on the same mesh.
    pub fn l1_distance(&self, other: &GridFunction) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum();
        s * self.dx / self.length()
    }
}
