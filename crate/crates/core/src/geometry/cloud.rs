use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

/// Maps stored coordinates back to source coordinates: `source = stored * scale + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    pub scale: f64,
    pub offset: Vec<f64>,
}

impl Transform {
    pub fn identity(dim: usize) -> Self {
        Transform { scale: 1.0, offset: vec![0.0; dim] }
    }

    pub fn to_source(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.offset).map(|(x, o)| x * self.scale + o).collect()
    }

    pub fn to_stored(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.offset).map(|(x, o)| (x - o) / self.scale).collect()
    }
}

/// Points of dimension `dim` stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    points: Vec<f64>,
    pub transform: Transform,
}

impl PointCloud {
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::invalid(format!("point dimension {dim} not in 1..=3")));
        }
        if points.len() % dim != 0 {
            return Err(Error::invalid("flat coordinate count is not a multiple of the dimension"));
        }
        Ok(PointCloud { dim, points, transform: Transform::identity(dim) })
    }

    pub fn from_points(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::invalid(format!("point of dimension {} in a {dim}-d cloud", p.len())));
        }
        PointCloud::new(dim, points.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }

    /// Cloud holding the points at `indices`, in order.
    pub fn subset(&self, indices: &[usize]) -> PointCloud {
        let mut points = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            points.extend_from_slice(self.point(i));
        }
        PointCloud { dim: self.dim, points, transform: self.transform.clone() }
    }

    /// Points mapped back through the stored transform.
    pub fn source_points(&self) -> PointCloud {
        let points = self.iter().flat_map(|p| self.transform.to_source(p)).collect();
        PointCloud { dim: self.dim, points, transform: Transform::identity(self.dim) }
    }
}

/// Center on the centroid and scale uniformly so that the `ceil(fraction * n)`-th
/// smallest point norm equals `radius`.
pub fn normalize_cloud(cloud: &PointCloud, fraction: f64, radius: f64) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::invalid("cannot normalize an empty cloud"));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid("fraction must lie in (0, 1]"));
    }
    if !(radius > 0.0) {
        return Err(Error::invalid("radius must be positive"));
    }
    let (d, n) = (cloud.dim, cloud.len());
    let mut centroid = vec![0.0; d];
    for p in cloud.iter() {
        for (c, x) in centroid.iter_mut().zip(p) {
            *c += x;
        }
    }
    centroid.iter_mut().for_each(|c| *c /= n as f64);

    let mut norms: Vec<f64> = cloud.iter().map(|p| super::dist(p, &centroid)).collect();
    let k = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    let (_, q, _) = norms.select_nth_unstable_by(k - 1, f64::total_cmp);
    let q = *q;
    if !(q > 0.0) {
        return Err(Error::DegenerateCloud(format!(
            "the {k}-th smallest distance to the centroid is zero"
        )));
    }
    let s = radius / q;
    let points = cloud
        .iter()
        .flat_map(|p| p.iter().zip(&centroid).map(|(x, c)| (x - c) * s).collect::<Vec<_>>())
        .collect();
    // Compose with any transform the input already carried.
    let prev = &cloud.transform;
    let transform = Transform {
        scale: prev.scale / s,
        offset: centroid.iter().zip(&prev.offset).map(|(c, o)| c * prev.scale + o).collect(),
    };
    Ok(PointCloud { dim: d, points, transform })
}

/// Parse the whitespace-separated text format. `#` starts a comment; the
/// dimension comes from the first data line.
pub fn parse_cloud(text: &str) -> Result<PointCloud> {
    let mut dim = None;
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        let vals = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse { line: lineno, message: format!("{e}: {line:?}") })?;
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse { line: lineno, message: "non-finite coordinate".into() });
        }
        let d = *dim.get_or_insert(vals.len());
        if vals.len() != d {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {d} coordinates, found {}", vals.len()),
            });
        }
        if !(1..=3).contains(&d) {
            return Err(Error::Parse { line: lineno, message: format!("dimension {d} not in 1..=3") });
        }
        points.extend(vals);
    }
    let dim = dim.ok_or_else(|| Error::Parse { line: 0, message: "no points".into() })?;
    PointCloud::new(dim, points)
}

pub fn write_cloud(cloud: &PointCloud) -> String {
    let mut out = String::new();
    let t = &cloud.transform;
    if t.scale != 1.0 || t.offset.iter().any(|&o| o != 0.0) {
        let offs: Vec<String> = t.offset.iter().map(|o| o.to_string()).collect();
        let _ = writeln!(out, "# transform scale={} offset={}", t.scale, offs.join(","));
    }
    for p in cloud.iter() {
        let row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn load_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path)?;
    let mut cloud = parse_cloud(&text)?;
    if let Some(t) = parse_transform_comment(&text, cloud.dim) {
        cloud.transform = t;
    }
    Ok(cloud)
}

pub fn save_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_cloud(cloud))?;
    Ok(())
}

fn parse_transform_comment(text: &str, dim: usize) -> Option<Transform> {
    let line = text.lines().find_map(|l| l.trim().strip_prefix("# transform "))?;
    let mut scale = None;
    let mut offset = None;
    for part in line.split_whitespace() {
        if let Some(v) = part.strip_prefix("scale=") {
            scale = v.parse().ok();
        } else if let Some(v) = part.strip_prefix("offset=") {
            offset = v.split(',').map(|x| x.parse().ok()).collect::<Option<Vec<f64>>>();
        }
    }
    let offset = offset.filter(|o| o.len() == dim)?;
    Some(Transform { scale: scale.filter(|s: &f64| *s > 0.0)?, offset })
}
