use std::collections::HashMap;

use super::ScalarGrid;
use crate::{Error, Result};

/// Piecewise-linear iso-contour: segments in 2D, triangles in 3D.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LevelSet {
    pub dim: usize,
    pub vertices: Vec<Vec<f64>>,
    /// Index pairs (2D) or triples (3D).
    pub elements: Vec<Vec<usize>>,
}

impl LevelSet {
    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Length of each segment (2D) or area of each triangle (3D).
    pub fn element_measures(&self) -> Vec<f64> {
        self.elements.iter().map(|e| self.element_measure(e)).collect()
    }

    pub fn measure(&self) -> f64 {
        self.element_measures().iter().sum()
    }

    fn element_measure(&self, e: &[usize]) -> f64 {
        let v = |i: usize| &self.vertices[e[i]];
        if e.len() == 2 {
            super::dist(v(0), v(1))
        } else {
            let a: Vec<f64> = (0..3).map(|k| v(1)[k] - v(0)[k]).collect();
            let b: Vec<f64> = (0..3).map(|k| v(2)[k] - v(0)[k]).collect();
            let c = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
            0.5 * super::norm(&c)
        }
    }

    /// Text dump: `v x y [z]` lines then `e i j [k]` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let xs: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            out.push_str(&format!("v {}\n", xs.join(" ")));
        }
        for e in &self.elements {
            let is: Vec<String> = e.iter().map(|i| i.to_string()).collect();
            out.push_str(&format!("e {}\n", is.join(" ")));
        }
        out
    }
}

/// Collects edge-crossing vertices, shared between neighbouring cells.
struct Builder<'a> {
    grid: &'a ScalarGrid,
    iso: f64,
    cache: HashMap<(usize, usize), usize>,
    out: LevelSet,
}

impl<'a> Builder<'a> {
    fn inside(&self, node: usize) -> bool {
        self.grid.values[node] < self.iso
    }

    fn vertex(&mut self, a: usize, b: usize) -> usize {
        let key = if a < b { (a, b) } else { (b, a) };
        if let Some(&i) = self.cache.get(&key) {
            return i;
        }
        let (a, b) = key;
        let (fa, fb) = (self.grid.values[a], self.grid.values[b]);
        let t = (self.iso - fa) / (fb - fa);
        let (pa, pb) = (self.grid.spec.point(a), self.grid.spec.point(b));
        let p = pa.iter().zip(&pb).map(|(x, y)| x + t * (y - x)).collect();
        let i = self.out.vertices.len();
        self.out.vertices.push(p);
        self.cache.insert(key, i);
        i
    }
}

/// Zero crossing of `grid - iso` by linear interpolation along cell edges:
/// marching squares in 2D and marching tetrahedra (six tetrahedra per cube)
/// in 3D. Samples with value `< iso` count as inside.
pub fn extract_level_set(grid: &ScalarGrid, iso: f64) -> Result<LevelSet> {
    let d = grid.spec.dim();
    if d == 1 {
        return Err(Error::Unsupported("level sets of 1D grids".into()));
    }
    if d > 3 {
        return Err(Error::Unsupported(format!("level sets in {d} dimensions")));
    }
    if grid.spec.res.iter().any(|&r| r < 2) {
        return Err(Error::invalid("level-set extraction needs at least 2 samples per axis"));
    }
    let mut b = Builder { grid, iso, cache: HashMap::new(), out: LevelSet { dim: d, ..Default::default() } };
    if d == 2 {
        marching_squares(&mut b);
    } else {
        marching_tetrahedra(&mut b);
    }
    Ok(b.out)
}

fn marching_squares(b: &mut Builder) {
    let res = &b.grid.spec.res;
    let (nx, ny) = (res[0], res[1]);
    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            // Corners counter-clockwise: (i,j) (i+1,j) (i+1,j+1) (i,j+1).
            let c = [i * ny + j, (i + 1) * ny + j, (i + 1) * ny + j + 1, i * ny + j + 1];
            let ins: Vec<bool> = c.iter().map(|&n| b.inside(n)).collect();
            let mask = ins.iter().enumerate().fold(0, |m, (k, &v)| m | ((v as u8) << k));
            if mask == 0 || mask == 15 {
                continue;
            }
            // Edge k joins corner k and k+1.
            let crossing: Vec<usize> = (0..4).filter(|&k| ins[k] != ins[(k + 1) % 4]).collect();
            let pairs: Vec<(usize, usize)> = if crossing.len() == 2 {
                vec![(crossing[0], crossing[1])]
            } else {
                // Saddle: resolve with the cell-center average.
                let center = c.iter().map(|&n| b.grid.values[n]).sum::<f64>() / 4.0;
                let center_inside = center < b.iso;
                if center_inside == ins[0] {
                    vec![(0, 1), (2, 3)]
                } else {
                    vec![(3, 0), (1, 2)]
                }
            };
            for (e0, e1) in pairs {
                let v0 = b.vertex(c[e0], c[(e0 + 1) % 4]);
                let v1 = b.vertex(c[e1], c[(e1 + 1) % 4]);
                b.out.elements.push(vec![v0, v1]);
            }
        }
    }
}

/// Kuhn decomposition: each tetrahedron walks from corner (0,0,0) to (1,1,1)
/// raising one axis at a time, so face diagonals agree between neighbours.
const AXIS_ORDERS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

fn marching_tetrahedra(b: &mut Builder) {
    let res = b.grid.spec.res.clone();
    let strides = b.grid.spec.strides();
    for i in 0..res[0] - 1 {
        for j in 0..res[1] - 1 {
            for k in 0..res[2] - 1 {
                let origin = i * strides[0] + j * strides[1] + k * strides[2];
                for order in AXIS_ORDERS {
                    let mut tet = [origin; 4];
                    for s in 0..3 {
                        tet[s + 1] = tet[s] + strides[order[s]];
                    }
                    polygonize_tet(b, tet);
                }
            }
        }
    }
}

fn polygonize_tet(b: &mut Builder, tet: [usize; 4]) {
    let (inn, out): (Vec<usize>, Vec<usize>) = tet.iter().partition(|&&n| b.inside(n));
    match inn.len() {
        1 | 3 => {
            let (lone, others) = if inn.len() == 1 { (inn[0], out) } else { (out[0], inn) };
            let v: Vec<usize> = others.iter().map(|&o| b.vertex(lone, o)).collect();
            b.out.elements.push(v);
        }
        2 => {
            let v00 = b.vertex(inn[0], out[0]);
            let v01 = b.vertex(inn[0], out[1]);
            let v11 = b.vertex(inn[1], out[1]);
            let v10 = b.vertex(inn[1], out[0]);
            b.out.elements.push(vec![v00, v01, v11]);
            b.out.elements.push(vec![v00, v11, v10]);
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{GridSpec, Shape};
    use std::f64::consts::PI;

    #[test]
    fn uniform_sign_gives_empty_set() {
        let g = ScalarGrid::from_fn(GridSpec::cube(2, 1.0, 8), |_| 1.0);
        assert!(extract_level_set(&g, 0.0).unwrap().is_empty());
        let g = ScalarGrid::from_fn(GridSpec::cube(3, 1.0, 4), |_| -1.0);
        assert!(extract_level_set(&g, 0.0).unwrap().is_empty());
    }

    #[test]
    fn one_dimensional_grid_unsupported() {
        let g = ScalarGrid::from_fn(GridSpec::cube(1, 1.0, 8), |p| p[0]);
        assert!(matches!(extract_level_set(&g, 0.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn circle_perimeter() {
        let c = Shape::circle([0.0, 0.0], 0.5).unwrap();
        let g = ScalarGrid::from_fn(GridSpec::cube(2, 1.0, 256), |p| crate::geometry::signed_distance_oracle(&c, p).unwrap());
        let ls = extract_level_set(&g, 0.0).unwrap();
        let len = ls.measure();
        assert!((len / (PI) - 1.0).abs() < 0.01, "length {len}");
        // Closed loops: every vertex has even degree.
        let mut deg = vec![0; ls.vertices.len()];
        for e in &ls.elements {
            deg[e[0]] += 1;
            deg[e[1]] += 1;
        }
        assert!(deg.iter().all(|d| d % 2 == 0));
        for v in &ls.vertices {
            assert!(g.interpolate(v).abs() < 1e-9);
        }
    }

    #[test]
    fn sphere_area() {
        let s = Shape::sphere([0.0; 3], 0.5).unwrap();
        let g = ScalarGrid::from_fn(GridSpec::cube(3, 1.0, 128), |p| crate::geometry::signed_distance_oracle(&s, p).unwrap());
        let ls = extract_level_set(&g, 0.0).unwrap();
        let area = ls.measure();
        assert!((area / PI - 1.0).abs() < 0.03, "area {area}");
        // Watertight: every edge is shared by exactly two triangles.
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &ls.elements {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        assert!(edges.values().all(|&c| c == 2));
    }

    #[test]
    fn vertices_on_zero_of_interpolant_3d() {
        let t = Shape::torus([0.0; 3], 0.5, 0.2).unwrap();
        let g = ScalarGrid::from_fn(GridSpec::cube(3, 0.8, 24), |p| crate::geometry::signed_distance_oracle(&t, p).unwrap());
        let ls = extract_level_set(&g, 0.0).unwrap();
        assert!(!ls.is_empty());
        // Trilinear interpolation is linear only along axis-aligned edges;
        // vertices on tetrahedron diagonals follow the simplicial interpolant.
        let h = g.spec.spacing(0);
        let on_axis_edge = |v: &Vec<f64>| {
            v.iter().filter(|&&x| (((x + 0.8) / h - 0.5).round() - ((x + 0.8) / h - 0.5)).abs() > 1e-9).count() == 1
        };
        let checked = ls.vertices.iter().filter(|v| on_axis_edge(v)).map(|v| {
            assert!(g.interpolate(v).abs() < 1e-9);
        }).count();
        assert!(checked > 100);
    }
}
