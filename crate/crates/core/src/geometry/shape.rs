use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{dist, norm, PointCloud};
use crate::rng;
use crate::{Error, Result};

type P2 = [f64; 2];
type P3 = [f64; 3];

/// Analytic solid (or curve) whose boundary is the reconstruction target.
///
/// Signed distances are negative inside. `Union` is exact only when its
/// children are disjoint; `Difference` is the usual `max(a, -b)` bound.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Circle { center: P2, radius: f64 },
    /// Closed polygon; orientation does not matter.
    Polygon { vertices: Vec<P2> },
    /// Open curves. Has no interior, so the distance is unsigned.
    SegmentSoup { segments: Vec<(P2, P2)> },
    Sphere { center: P3, radius: f64 },
    /// Torus around the z axis.
    Torus { center: P3, major: f64, minor: f64 },
    Union(Vec<Shape>),
    Difference(Box<Shape>, Box<Shape>),
}

impl Shape {
    pub fn circle(center: P2, radius: f64) -> Result<Self> {
        positive(radius, "radius")?;
        Ok(Shape::Circle { center, radius })
    }

    pub fn sphere(center: P3, radius: f64) -> Result<Self> {
        positive(radius, "radius")?;
        Ok(Shape::Sphere { center, radius })
    }

    pub fn torus(center: P3, major: f64, minor: f64) -> Result<Self> {
        positive(major, "major radius")?;
        positive(minor, "minor radius")?;
        if minor >= major {
            return Err(Error::invalid("torus minor radius must be below the major radius"));
        }
        Ok(Shape::Torus { center, major, minor })
    }

    pub fn polygon(vertices: Vec<P2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::invalid("polygon needs at least 3 vertices"));
        }
        let n = vertices.len();
        let area2: f64 = (0..n)
            .map(|i| {
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                a[0] * b[1] - a[1] * b[0]
            })
            .sum();
        if area2.abs() < 1e-14 {
            return Err(Error::invalid("polygon has zero area"));
        }
        for i in 0..n {
            if dist(&vertices[i], &vertices[(i + 1) % n]) == 0.0 {
                return Err(Error::invalid("polygon has a zero-length edge"));
            }
        }
        Ok(Shape::Polygon { vertices })
    }

    pub fn segments(segments: Vec<(P2, P2)>) -> Result<Self> {
        if segments.iter().any(|(a, b)| dist(a, b) == 0.0) {
            return Err(Error::invalid("zero-length segment"));
        }
        Ok(Shape::SegmentSoup { segments })
    }

    /// Axis-aligned rectangle as a polygon.
    pub fn rectangle(lower: P2, upper: P2) -> Result<Self> {
        Shape::polygon(vec![lower, [upper[0], lower[1]], upper, [lower[0], upper[1]]])
    }

    /// Star polygon with `points` tips alternating between two radii.
    pub fn star(center: P2, outer: f64, inner: f64, points: usize) -> Result<Self> {
        let n = 2 * points;
        let vertices = (0..n)
            .map(|i| {
                let r = if i % 2 == 0 { outer } else { inner };
                let a = PI / 2.0 + i as f64 * PI / points as f64;
                [center[0] + r * a.cos(), center[1] + r * a.sin()]
            })
            .collect();
        Shape::polygon(vertices)
    }

    pub fn union(children: Vec<Shape>) -> Result<Self> {
        if children.is_empty() {
            return Err(Error::invalid("empty union"));
        }
        let d = children[0].dim();
        if children.iter().any(|c| c.dim() != d) {
            return Err(Error::invalid("union children differ in dimension"));
        }
        Ok(Shape::Union(children))
    }

    pub fn difference(a: Shape, b: Shape) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::invalid("difference operands differ in dimension"));
        }
        Ok(Shape::Difference(Box::new(a), Box::new(b)))
    }

    /// Named shapes used by the command line and the benchmark suites:
    /// `circle`, `square`, `rings` (two nested circles bounding an annulus),
    /// `star`, `sphere`, `torus`.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "circle" => Shape::circle([0.0, 0.0], 0.5),
            "square" => Shape::rectangle([-0.5, -0.5], [0.5, 0.5]),
            "rings" => Shape::difference(Shape::circle([0.0, 0.0], 0.6)?, Shape::circle([0.0, 0.0], 0.3)?),
            "star" => Shape::star([0.0, 0.0], 0.6, 0.3, 5),
            "sphere" => Shape::sphere([0.0; 3], 0.5),
            "torus" => Shape::torus([0.0; 3], 0.35, 0.12),
            _ => Err(Error::invalid(format!(
                "unknown shape '{name}'; expected one of {}",
                Shape::PRESETS.join(", ")
            ))),
        }
    }

    pub const PRESETS: [&'static str; 6] = ["circle", "square", "rings", "star", "sphere", "torus"];

    pub fn dim(&self) -> usize {
        match self {
            Shape::Circle { .. } | Shape::Polygon { .. } | Shape::SegmentSoup { .. } => 2,
            Shape::Sphere { .. } | Shape::Torus { .. } => 3,
            Shape::Union(c) => c[0].dim(),
            Shape::Difference(a, _) => a.dim(),
        }
    }

    fn sdf(&self, x: &[f64]) -> f64 {
        match self {
            Shape::Circle { center, radius } => dist(x, center) - radius,
            Shape::Sphere { center, radius } => dist(x, center) - radius,
            Shape::Torus { center, major, minor } => {
                let (px, py, pz) = (x[0] - center[0], x[1] - center[1], x[2] - center[2]);
                let q = (px * px + py * py).sqrt() - major;
                (q * q + pz * pz).sqrt() - minor
            }
            Shape::Polygon { vertices } => {
                let p = [x[0], x[1]];
                let n = vertices.len();
                let d = (0..n)
                    .map(|i| segment_distance(p, vertices[i], vertices[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min);
                if winding_number(p, vertices) != 0 {
                    -d
                } else {
                    d
                }
            }
            Shape::SegmentSoup { segments } => {
                let p = [x[0], x[1]];
                segments.iter().map(|&(a, b)| segment_distance(p, a, b)).fold(f64::INFINITY, f64::min)
            }
            Shape::Union(children) => children.iter().map(|c| c.sdf(x)).fold(f64::INFINITY, f64::min),
            Shape::Difference(a, b) => a.sdf(x).max(-b.sdf(x)),
        }
    }

    /// Total boundary measure (length in 2D, area in 3D) of the primitive
    /// boundaries, before any boolean trimming.
    fn raw_measure(&self) -> f64 {
        match self {
            Shape::Circle { radius, .. } => 2.0 * PI * radius,
            Shape::Sphere { radius, .. } => 4.0 * PI * radius * radius,
            Shape::Torus { major, minor, .. } => 4.0 * PI * PI * major * minor,
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                (0..n).map(|i| dist(&vertices[i], &vertices[(i + 1) % n])).sum()
            }
            Shape::SegmentSoup { segments } => segments.iter().map(|(a, b)| dist(a, b)).sum(),
            Shape::Union(c) => c.iter().map(Shape::raw_measure).sum(),
            Shape::Difference(a, b) => a.raw_measure() + b.raw_measure(),
        }
    }

    /// A point distributed uniformly (by measure) over the primitive boundaries.
    fn raw_sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Shape::Circle { center, radius } => {
                let t = rng.random::<f64>() * 2.0 * PI;
                vec![center[0] + radius * t.cos(), center[1] + radius * t.sin()]
            }
            Shape::Sphere { center, radius } => {
                let v = unit_normal3(rng);
                (0..3).map(|i| center[i] + radius * v[i]).collect()
            }
            Shape::Torus { center, major, minor } => {
                // Area element is proportional to (R + r cos phi).
                let phi = loop {
                    let phi = rng.random::<f64>() * 2.0 * PI;
                    let accept = (major + minor * phi.cos()) / (major + minor);
                    if rng.random::<f64>() < accept {
                        break phi;
                    }
                };
                let theta = rng.random::<f64>() * 2.0 * PI;
                let ring = major + minor * phi.cos();
                vec![
                    center[0] + ring * theta.cos(),
                    center[1] + ring * theta.sin(),
                    center[2] + minor * phi.sin(),
                ]
            }
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                let edges: Vec<(P2, P2)> = (0..n).map(|i| (vertices[i], vertices[(i + 1) % n])).collect();
                sample_segments(&edges, rng)
            }
            Shape::SegmentSoup { segments } => sample_segments(segments, rng),
            Shape::Union(children) => pick_by_measure(children.iter(), rng).raw_sample(rng),
            Shape::Difference(a, b) => {
                let parts = [a.as_ref(), b.as_ref()];
                pick_by_measure(parts.into_iter(), rng).raw_sample(rng)
            }
        }
    }
}

fn positive(v: f64, what: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} must be positive")))
    }
}

fn pick_by_measure<'a, R: Rng>(shapes: impl Iterator<Item = &'a Shape> + Clone, rng: &mut R) -> &'a Shape {
    let total: f64 = shapes.clone().map(Shape::raw_measure).sum();
    let mut t = rng.random::<f64>() * total;
    let mut last = None;
    for s in shapes {
        let m = s.raw_measure();
        if t < m {
            return s;
        }
        t -= m;
        last = Some(s);
    }
    last.expect("non-empty shape list")
}

fn sample_segments<R: Rng>(segments: &[(P2, P2)], rng: &mut R) -> Vec<f64> {
    let total: f64 = segments.iter().map(|(a, b)| dist(a, b)).sum();
    let mut t = rng.random::<f64>() * total;
    let mut chosen = segments[segments.len() - 1];
    for &(a, b) in segments {
        let len = dist(&a, &b);
        if t < len {
            chosen = (a, b);
            break;
        }
        t -= len;
    }
    let (a, b) = chosen;
    let s = rng.random::<f64>();
    vec![a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}

fn unit_normal3<R: Rng>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let n = norm(&v);
        if n > 1e-12 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Exact distance from `p` to the segment `[a, b]`.
pub(crate) fn segment_distance(p: P2, a: P2, b: P2) -> f64 {
    let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
    let (wx, wy) = (p[0] - a[0], p[1] - a[1]);
    let t = ((wx * ex + wy * ey) / (ex * ex + ey * ey)).clamp(0.0, 1.0);
    let (dx, dy) = (wx - t * ex, wy - t * ey);
    (dx * dx + dy * dy).sqrt()
}

fn winding_number(p: P2, vertices: &[P2]) -> i32 {
    let n = vertices.len();
    let mut wn = 0;
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= p[1] {
            if b[1] > p[1] && cross > 0.0 {
                wn += 1;
            }
        } else if b[1] <= p[1] && cross < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Exact signed distance from `x` to the boundary of `shape`, negative inside.
pub fn signed_distance_oracle(shape: &Shape, x: &[f64]) -> Result<f64> {
    if x.len() != shape.dim() {
        return Err(Error::invalid(format!(
            "point has dimension {}, shape has dimension {}",
            x.len(),
            shape.dim()
        )));
    }
    Ok(shape.sdf(x))
}

/// `n` points on the boundary of `shape`, uniform with respect to boundary
/// measure. Point `i` depends only on `(seed, i)`.
pub fn sample_boundary(shape: &Shape, n: usize, seed: u64) -> PointCloud {
    let d = shape.dim();
    let scale = shape.raw_measure().max(1.0);
    let mut points = Vec::with_capacity(n * d);
    for i in 0..n {
        let mut r = rng::stream(seed, "boundary-sample", i as u64);
        // Boolean results trim primitive boundaries; reject trimmed samples.
        let p = loop {
            let p = shape.raw_sample(&mut r);
            if shape.sdf(&p).abs() <= 1e-12 * scale {
                break p;
            }
        };
        points.extend_from_slice(&p);
    }
    PointCloud::new(d, points).expect("sampled cloud is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn unit_square() -> Shape {
        Shape::rectangle([-0.5, -0.5], [0.5, 0.5]).unwrap()
    }

    #[test]
    fn trivial_values() {
        let c = Shape::circle([0.0, 0.0], 0.5).unwrap();
        assert_eq!(signed_distance_oracle(&c, &[0.0, 0.0]).unwrap(), -0.5);
        let s = Shape::sphere([0.0; 3], 0.5).unwrap();
        assert_eq!(signed_distance_oracle(&s, &[2.0, 0.0, 0.0]).unwrap(), 1.5);
        assert!(matches!(signed_distance_oracle(&s, &[0.0, 0.0]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn invalid_shapes_rejected() {
        assert!(Shape::circle([0.0, 0.0], 0.0).is_err());
        assert!(Shape::torus([0.0; 3], 0.2, 0.3).is_err());
        assert!(Shape::polygon(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
        assert!(Shape::polygon(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).is_err());
        assert!(Shape::segments(vec![([0.0, 0.0], [0.0, 0.0])]).is_err());
    }

    // Brute force: densely subsample the square's edges, sign by point-in-box.
    #[test]
    fn polygon_matches_edge_subsampling_oracle() {
        let sq = unit_square();
        let per_edge = 25_000;
        let corners = [[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]];
        let mut samples = Vec::with_capacity(4 * per_edge);
        for e in 0..4 {
            let (a, b): ([f64; 2], [f64; 2]) = (corners[e], corners[(e + 1) % 4]);
            for k in 0..per_edge {
                let t = k as f64 / per_edge as f64;
                samples.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        let mut r = rng::stream(1, "test", 0);
        for _ in 0..200 {
            let x = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
            let d = samples
                .iter()
                .map(|s| ((s[0] - x[0]).powi(2) + (s[1] - x[1]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            let inside = x[0].abs() < 0.5 && x[1].abs() < 0.5;
            let expected = if inside { -d } else { d };
            let got = signed_distance_oracle(&sq, &x).unwrap();
            assert!((got - expected).abs() < 1e-4, "{x:?}: {got} vs {expected}");
        }
    }

    #[test]
    fn winding_sign_for_star() {
        let star = Shape::star([0.0, 0.0], 0.6, 0.25, 5).unwrap();
        assert!(star.sdf(&[0.0, 0.0]) < 0.0);
        assert!(star.sdf(&[0.0, 0.55]) < 0.0);
        assert!(star.sdf(&[0.45, 0.45]) > 0.0);
    }

    #[test]
    fn boolean_shapes() {
        let ring = Shape::difference(
            Shape::circle([0.0, 0.0], 0.6).unwrap(),
            Shape::circle([0.0, 0.0], 0.3).unwrap(),
        )
        .unwrap();
        assert!((ring.sdf(&[0.45, 0.0]) + 0.15).abs() < 1e-15);
        assert!((ring.sdf(&[0.0, 0.0]) - 0.3).abs() < 1e-15);
        let cloud = sample_boundary(&ring, 500, 3);
        for p in cloud.iter() {
            assert!(ring.sdf(p).abs() < 1e-10);
        }
    }

    #[test]
    fn sampling_edge_cases() {
        let c = Shape::circle([0.0, 0.0], 0.5).unwrap();
        assert!(sample_boundary(&c, 0, 1).is_empty());
        let cloud = sample_boundary(&c, 4, 1);
        assert_eq!(cloud.len(), 4);
        for p in cloud.iter() {
            assert!((norm(p) - 0.5).abs() < 1e-12);
        }
        assert_eq!(sample_boundary(&c, 50, 9), sample_boundary(&c, 50, 9));
        assert_ne!(sample_boundary(&c, 50, 9), sample_boundary(&c, 50, 10));
    }

    #[test]
    fn rectangle_edge_counts_fit_length_ratio() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let rect = Shape::rectangle([0.0, 0.0], [1.0, 3.0]).unwrap();
        let n = 10_000;
        let cloud = sample_boundary(&rect, n, 42);
        let mut counts = [0f64; 4];
        for p in cloud.iter() {
            let edge = if p[1] == 0.0 {
                0
            } else if p[0] == 1.0 {
                1
            } else if p[1] == 3.0 {
                2
            } else {
                3
            };
            counts[edge] += 1.0;
        }
        let expected = [1.0, 3.0, 1.0, 3.0].map(|l| l / 8.0 * n as f64);
        let chi2: f64 = counts.iter().zip(&expected).map(|(o, e)| (o - e).powi(2) / e).sum();
        let p_value = 1.0 - ChiSquared::new(3.0).unwrap().cdf(chi2);
        assert!(p_value > 0.01, "chi2 = {chi2}, p = {p_value}");
    }

    #[test]
    fn torus_and_sphere_samples_on_surface() {
        let t = Shape::torus([0.0; 3], 0.35, 0.12).unwrap();
        let s = Shape::sphere([0.1, 0.0, -0.1], 0.5).unwrap();
        for shape in [t, s] {
            for p in sample_boundary(&shape, 300, 5).iter() {
                assert!(shape.sdf(p).abs() < 1e-10);
            }
        }
    }

    fn any_shape() -> impl Strategy<Value = Shape> {
        prop_oneof![
            Just(Shape::circle([0.1, -0.2], 0.4).unwrap()),
            Just(Shape::star([0.0, 0.0], 0.7, 0.3, 6).unwrap()),
            Just(Shape::segments(vec![([-0.5, 0.0], [0.5, 0.2]), ([0.0, -0.6], [0.1, 0.6])]).unwrap()),
            Just(
                Shape::union(vec![
                    Shape::circle([-0.5, 0.0], 0.3).unwrap(),
                    Shape::rectangle([0.2, -0.3], [0.8, 0.3]).unwrap()
                ])
                .unwrap()
            ),
        ]
    }

    proptest! {
        #[test]
        fn sdf_is_one_lipschitz(shape in any_shape(), a in prop::array::uniform2(-1.5f64..1.5), b in prop::array::uniform2(-1.5f64..1.5)) {
            let (fa, fb) = (shape.sdf(&a), shape.sdf(&b));
            prop_assert!((fa - fb).abs() <= dist(&a, &b) + 1e-12);
        }

        #[test]
        fn boundary_samples_have_zero_distance(shape in any_shape(), seed in 0u64..1000) {
            for p in sample_boundary(&shape, 20, seed).iter() {
                prop_assert!(shape.sdf(p).abs() < 1e-10);
            }
        }
    }
}
