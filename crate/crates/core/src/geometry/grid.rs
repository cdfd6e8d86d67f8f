use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

/// Box `[lower, upper]` split into `res[a]` cells per axis. Samples live at
/// cell centers; the flat index is row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub res: Vec<usize>,
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, res: Vec<usize>) -> Result<Self> {
        let d = lower.len();
        if d == 0 || upper.len() != d || res.len() != d {
            return Err(Error::invalid("grid corner/resolution dimensions disagree"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::invalid("grid lower corner must be below the upper corner"));
        }
        if res.iter().any(|&r| r == 0) {
            return Err(Error::invalid("grid resolution must be positive"));
        }
        Ok(GridSpec { lower, upper, res })
    }

    /// Cube `[-half, half]^dim` with `n` cells per axis.
    pub fn cube(dim: usize, half: f64, n: usize) -> Self {
        GridSpec::new(vec![-half; dim], vec![half; dim], vec![n; dim]).expect("valid cube")
    }

    /// Grid whose cell centers are exactly the nodes `lower + i * h`,
    /// `i = 0..n`, with `h = (upper - lower) / (n - 1)`.
    pub fn nodes(lower: Vec<f64>, upper: Vec<f64>, n: Vec<usize>) -> Result<Self> {
        if n.iter().any(|&k| k < 2) {
            return Err(Error::invalid("node grids need at least 2 nodes per axis"));
        }
        let h: Vec<f64> = (0..lower.len()).map(|a| (upper[a] - lower[a]) / (n[a] - 1) as f64).collect();
        GridSpec::new(
            lower.iter().zip(&h).map(|(l, h)| l - h / 2.0).collect(),
            upper.iter().zip(&h).map(|(u, h)| u + h / 2.0).collect(),
            n,
        )
    }

    pub fn dim(&self) -> usize {
        self.res.len()
    }

    pub fn len(&self) -> usize {
        self.res.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / self.res[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let d = self.dim();
        let mut s = vec![1; d];
        for a in (0..d.saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.res[a + 1];
        }
        s
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = flat % self.res[a];
            flat /= self.res[a];
        }
        idx
    }

    /// Coordinate of sample `i` along `axis`.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.lower[axis] + (i as f64 + 0.5) * self.spacing(axis)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.unflatten(flat).iter().enumerate().map(|(a, &i)| self.coord(a, i)).collect()
    }

    /// All sample points, flat.
    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).flat_map(|i| self.point(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::invalid(format!(
                "grid has {} values, resolution needs {}",
                values.len(),
                spec.len()
            )));
        }
        Ok(ScalarGrid { spec, values })
    }

    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let values = (0..spec.len()).map(|i| f(&spec.point(i))).collect();
        ScalarGrid { spec, values }
    }

    /// Multilinear interpolation in sample-point coordinates, clamped to the
    /// sample hull.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let d = self.spec.dim();
        let strides = self.spec.strides();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for a in 0..d {
            let r = self.spec.res[a];
            let u = ((x[a] - self.spec.lower[a]) / self.spec.spacing(a) - 0.5).clamp(0.0, (r - 1) as f64);
            let i = (u.floor() as usize).min(r.saturating_sub(2));
            base[a] = i;
            frac[a] = if r > 1 { u - i as f64 } else { 0.0 };
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0;
            for a in 0..d {
                let bit = (corner >> a) & 1;
                if bit == 1 && self.spec.res[a] == 1 {
                    w = 0.0;
                }
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                flat += (base[a] + bit) * strides[a];
            }
            if w != 0.0 {
                acc += w * self.values[flat];
            }
        }
        acc
    }
}

/// Text form: a `grid` header line, `lower`, `upper` and `res` lines, then one
/// value per line in flat order.
pub fn write_grid(grid: &ScalarGrid) -> String {
    let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let mut s = String::with_capacity(grid.values.len() * 22 + 128);
    let _ = writeln!(s, "grid {}", grid.spec.dim());
    let _ = writeln!(s, "lower {}", join(&grid.spec.lower));
    let _ = writeln!(s, "upper {}", join(&grid.spec.upper));
    let _ = writeln!(s, "res {}", grid.spec.res.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(" "));
    for v in &grid.values {
        let _ = writeln!(s, "{v}");
    }
    s
}

pub fn parse_grid(text: &str) -> Result<ScalarGrid> {
    let mut lines = text.lines().enumerate();
    let mut header = |key: &str| -> Result<Vec<String>> {
        let (i, line) = lines.next().ok_or_else(|| Error::Parse { line: 0, message: format!("missing '{key}' line") })?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(Error::Parse { line: i + 1, message: format!("expected '{key}'") });
        }
        Ok(parts.map(str::to_string).collect())
    };
    let bad = |line: usize, what: &str| Error::Parse { line, message: format!("malformed {what}") };
    let dim: usize = header("grid")?.first().and_then(|d| d.parse().ok()).ok_or_else(|| bad(1, "dimension"))?;
    let floats = |v: Vec<String>, line: usize, what: &str| -> Result<Vec<f64>> {
        let out: Vec<f64> = v.iter().map(|x| x.parse()).collect::<std::result::Result<_, _>>().map_err(|_| bad(line, what))?;
        if out.len() == dim { Ok(out) } else { Err(bad(line, what)) }
    };
    let lower = floats(header("lower")?, 2, "lower corner")?;
    let upper = floats(header("upper")?, 3, "upper corner")?;
    let res: Vec<usize> = header("res")?.iter().map(|x| x.parse()).collect::<std::result::Result<_, _>>().map_err(|_| bad(4, "resolution"))?;
    if res.len() != dim {
        return Err(bad(4, "resolution"));
    }
    let spec = GridSpec::new(lower, upper, res)?;
    let mut values = Vec::with_capacity(spec.len());
    for (i, line) in lines {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        values.push(t.parse::<f64>().map_err(|_| bad(i + 1, "value"))?);
    }
    ScalarGrid::new(spec, values)
}

pub fn save_grid(grid: &ScalarGrid, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_grid(grid))?;
    Ok(())
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<ScalarGrid> {
    parse_grid(&std::fs::read_to_string(path)?)
}
