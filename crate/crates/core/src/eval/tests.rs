use std::cell::RefCell;

use proptest::prelude::*;
use rand::Rng;

use super::trace::TraceTarget;
use super::*;
use crate::field::{init_analytic, init_geometric_with, Architecture, PrefitConfig};
use crate::trainer::desk_arch;

fn affine(dim: usize, w: &[f64], b: f64) -> NeuralField {
    let arch = Architecture { layers: 0, ..desk_arch(dim, 1, 1) };
    let mut p = w.to_vec();
    p.push(b);
    NeuralField::new(arch, p).unwrap()
}

fn grid_of(values: Vec<f64>, n: usize) -> ScalarGrid {
    ScalarGrid::new(GridSpec::cube(2, 1.0, n), values).unwrap()
}

fn cloud(points: &[Vec<f64>]) -> PointCloud {
    PointCloud::from_points(points[0].len(), points).unwrap()
}

fn random_cloud(seed: u64, n: usize, d: usize, scale: f64) -> PointCloud {
    let mut r = crate::rng::stream(seed, "test", 0);
    PointCloud::new(d, (0..n * d).map(|_| r.random_range(-scale..scale)).collect()).unwrap()
}

#[test]
fn grid_eval_constant_and_linear() {
    let spec = GridSpec::cube(2, 1.0, 16);
    let c = grid_eval(&affine(2, &[0.0, 0.0], 0.3), &spec).unwrap();
    assert!(c.values.iter().all(|&v| v == 0.3));
    let f = affine(2, &[0.5, -2.0], 0.1);
    let g = grid_eval(&f, &spec).unwrap();
    let mut r = crate::rng::stream(0, "cells", 0);
    for _ in 0..10 {
        let i = r.random_range(0..spec.len());
        let p = spec.point(i);
        assert!((g.values[i] - (0.5 * p[0] - 2.0 * p[1] + 0.1)).abs() < 1e-14);
    }
    assert!(grid_eval(&f, &GridSpec::cube(3, 1.0, 4)).is_err());
}

#[test]
fn grid_eval_is_thread_independent() {
    let f = init_analytic(&desk_arch(2, 16, 2), 0.5, 3);
    let spec = GridSpec::cube(2, 1.0, 64);
    let a = crate::parallel::with_threads(1, || grid_eval(&f, &spec).unwrap());
    let b = crate::parallel::with_threads(4, || grid_eval(&f, &spec).unwrap());
    assert_eq!(a.values, b.values);
}

#[test]
fn iou_examples() {
    let n = 4;
    let b = grid_of(vec![-1.0; 16], n);
    assert_eq!(iou(&b, &b).unwrap(), 1.0);
    let a = grid_of((0..16).map(|i| if i < 8 { -1.0 } else { 1.0 }).collect(), n);
    assert_eq!(iou(&a, &b).unwrap(), 0.5);
    assert_eq!(iou(&b, &a).unwrap(), 0.5);
    let c = grid_of((0..16).map(|i| if i < 8 { 1.0 } else { -1.0 }).collect(), n);
    assert_eq!(iou(&a, &c).unwrap(), 0.0);
    let empty = grid_of(vec![1.0; 16], n);
    assert_eq!(iou(&empty, &empty).unwrap(), 1.0);
    assert!(matches!(iou(&a, &grid_of(vec![1.0; 25], 5)), Err(Error::InvalidArgument(_))));
}

#[test]
fn chamfer_examples() {
    let a = random_cloud(1, 50, 2, 1.0);
    assert_eq!(chamfer_hausdorff(&a, &a, false).unwrap(), (0.0, 0.0));
    let p = cloud(&[vec![0.0, 0.0]]);
    let q = cloud(&[vec![3.0, 4.0]]);
    assert_eq!(chamfer_hausdorff(&p, &q, false).unwrap(), (5.0, 5.0));
    assert_eq!(chamfer_hausdorff(&p, &q, true).unwrap(), (5.0, 5.0));
    let empty = PointCloud::new(2, vec![]).unwrap();
    assert!(matches!(chamfer_hausdorff(&empty, &q, false), Err(Error::InvalidArgument(_))));
}

#[test]
fn bucketed_matches_brute_force() {
    for (seed, d) in [(1, 2), (2, 3), (3, 2), (4, 3)] {
        let a = random_cloud(seed, 700, d, 1.5);
        let b = random_cloud(seed + 100, 500, d, 0.7);
        for one in [false, true] {
            let fast = chamfer_hausdorff(&a, &b, one).unwrap();
            let slow = chamfer_hausdorff_brute(&a, &b, one).unwrap();
            assert!((fast.0 - slow.0).abs() < 1e-12 && (fast.1 - slow.1).abs() < 1e-12, "{fast:?} {slow:?}");
        }
    }
    // Clustered targets with a far query.
    let b = cloud(&[vec![0.0, 0.0], vec![0.0, 1e-9], vec![10.0, 10.0]]);
    let a = cloud(&[vec![-50.0, 3.0], vec![5.0, 5.0]]);
    let fast = chamfer_hausdorff(&a, &b, false).unwrap();
    let slow = chamfer_hausdorff_brute(&a, &b, false).unwrap();
    assert!((fast.0 - slow.0).abs() < 1e-12 && (fast.1 - slow.1).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn chamfer_symmetric_and_below_hausdorff(s1 in 0u64..1000, s2 in 0u64..1000, n in 1usize..60, m in 1usize..60) {
        let a = random_cloud(s1, n, 2, 1.0);
        let b = random_cloud(s2 + 5000, m, 2, 1.0);
        let (c1, h1) = chamfer_hausdorff(&a, &b, false).unwrap();
        let (c2, h2) = chamfer_hausdorff(&b, &a, false).unwrap();
        prop_assert!((c1 - c2).abs() < 1e-14 && h1 == h2);
        prop_assert!(c1 <= h1 + 1e-15);
    }

    #[test]
    fn smape_in_range(vals in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 16)) {
        let p = grid_of(vals.iter().map(|v| v.0).collect(), 4);
        let g = grid_of(vals.iter().map(|v| v.1).collect(), 4);
        let m = sdf_metrics(&p, &g, 0.1).unwrap();
        prop_assert!(m.full.smape >= 0.0 && m.full.smape <= 2.0);
        prop_assert!(iou(&p, &g).unwrap() == iou(&g, &p).unwrap());
    }
}

#[test]
fn sdf_metric_examples() {
    let g = grid_of((0..16).map(|i| i as f64 / 8.0 - 1.0 + 0.03).collect(), 4);
    let m = sdf_metrics(&g, &g, 0.1).unwrap();
    assert_eq!((m.full.rmse, m.full.mae, m.full.smape), (0.0, 0.0, 0.0));
    let shifted = grid_of(g.values.iter().map(|v| v + 0.05).collect(), 4);
    let m = sdf_metrics(&shifted, &g, 0.1).unwrap();
    assert!((m.full.mae - 0.05).abs() < 1e-12 && (m.full.rmse - 0.05).abs() < 1e-12);
    let flipped = grid_of(g.values.iter().map(|v| -v).collect(), 4);
    let m = sdf_metrics(&flipped, &g, 0.1).unwrap();
    assert!((m.full.smape - 2.0).abs() < 1e-6 && m.full.smape < 2.0);
    let far = grid_of(vec![1.0; 16], 4);
    assert!(sdf_metrics(&far, &far, 0.1).unwrap().near.is_none());
    assert!(sdf_metrics(&g, &grid_of(vec![1.0; 25], 5), 0.1).is_err());
}

#[test]
fn level_set_samples_lie_on_circle() {
    let shape = Shape::circle([0.0, 0.0], 0.5).unwrap();
    let g = gt_grid(&shape, &GridSpec::cube(2, 1.0, 128)).unwrap();
    let set = extract_level_set(&g, 0.0).unwrap();
    let pts = sample_level_set(&set, 2000, 1).unwrap();
    assert_eq!(pts.len(), 2000);
    assert!(pts.iter().all(|p| (crate::geometry::norm(p) - 0.5).abs() < 1e-3));
    assert!(sample_level_set(&LevelSet::default(), 10, 1).is_err());
}

#[test]
fn report_matches_independent_computation() {
    let shape = Shape::circle([0.0, 0.0], 0.5).unwrap();
    let arch = desk_arch(2, 16, 2);
    let field = init_geometric_with(&arch, 0.5, 2, &PrefitConfig::default());
    let cfg = EvalConfig { res: 64, samples: 1500, ..EvalConfig::default_for(2) };
    let report = evaluate_field(&field, &shape, &cfg).unwrap();

    // Plain loops over the same cells.
    let spec = cfg.spec(2);
    let (mut inter, mut union, mut sq, mut ab, mut sm, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..spec.len() {
        let p = spec.point(i);
        let u = field.forward(&p);
        let g = (p[0] * p[0] + p[1] * p[1]).sqrt() - 0.5;
        if u < 0.0 && g < 0.0 {
            inter += 1.0;
        }
        if u < 0.0 || g < 0.0 {
            union += 1.0;
        }
        sq += (u - g) * (u - g);
        ab += (u - g).abs();
        sm += (u - g).abs() / ((u.abs() + g.abs()) / 2.0 + 1e-8);
        n += 1.0;
    }
    assert!((report.iou - inter / union).abs() < 1e-10);
    assert!((report.sdf.full.rmse - (sq / n).sqrt()).abs() < 1e-10);
    assert!((report.sdf.full.mae - ab / n).abs() < 1e-10);
    assert!((report.sdf.full.smape - sm / n).abs() < 1e-10);

    let set = extract_level_set(&grid_eval(&field, &spec).unwrap(), 0.0).unwrap();
    let ours = sample_level_set(&set, cfg.samples, cfg.seed).unwrap();
    let reference = sample_boundary(&shape, cfg.samples, cfg.seed);
    let (c, h) = chamfer_hausdorff_brute(&ours, &reference, false).unwrap();
    assert!((report.chamfer - c).abs() < 1e-10 && (report.hausdorff - h).abs() < 1e-10);
    assert!(report.iou > 0.8 && report.chamfer < 0.05, "{report:?}");

    let csv = report.to_csv();
    assert!(csv.starts_with("metric,value\nresolution,64\niou,"), "{csv}");
    assert!(report.summary_line().starts_with("iou="));
}

#[test]
fn report_marks_absent_near_metrics() {
    let r = MetricsReport {
        resolution: 4,
        iou: 1.0,
        chamfer: 0.0,
        hausdorff: 0.0,
        sdf: SdfMetrics { full: ErrorStats { rmse: 0.0, mae: 0.0, smape: 0.0 }, near: None },
        trace: None,
    };
    assert!(r.to_csv().contains("rmse_near,NA"));
    assert!(r.summary_line().contains("smape_near=NA"));
    assert!(r.summary_line().contains("iou=1.00000000e0"));
}

fn sphere() -> Shape {
    Shape::sphere([0.0; 3], 0.5).unwrap()
}

#[test]
fn exact_sphere_center_pixel() {
    for cam in pose_ring(10, 1.0, 0.5, 501).unwrap() {
        let center = Camera { width: 1, height: 1, ..cam.clone() };
        let r = sphere_trace(&sphere(), &center, TraceOptions::default());
        assert!(r.hit[0]);
        let dist = crate::geometry::norm(&cam.position);
        assert!((r.depth[0] - (dist - 0.5)).abs() < 1e-3);
        assert!(r.iterations[0] <= 10);
    }
}

#[test]
fn ray_away_from_sphere_diverges() {
    let cam = Camera::new([0.0, 0.0, 2.0], [0.0, 0.0, 5.0], [0.0, 1.0, 0.0], 10.0, 3, 3).unwrap();
    let r = sphere_trace(&sphere(), &cam, TraceOptions::default());
    assert!(r.diverged.iter().all(|&d| d));
    assert!(r.iterations.iter().all(|&i| i <= 3));
    assert!(r.hit.iter().all(|&h| !h));
}

#[test]
fn normals_are_radial_and_depths_exact() {
    let cam = pose_ring(10, 1.0, 0.5, 40).unwrap().remove(3);
    let r = sphere_trace(&sphere(), &cam, TraceOptions::default());
    let mut hits = 0;
    for i in 0..r.len() {
        if r.hit[i] {
            hits += 1;
            let n = r.normals[i];
            assert!(((n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt() - 1.0).abs() < 1e-6);
            let d = cam.ray(i % 40, i / 40);
            let p: Vec<f64> = (0..3).map(|k| cam.position[k] + r.depth[i] * d[k]).collect();
            let pn = crate::geometry::norm(&p);
            assert!((n[0] * p[0] + n[1] * p[1] + n[2] * p[2]) / pn > 0.999);
            let exact = analytic_sphere_depth(&cam, i % 40, i / 40, [0.0; 3], 0.5).unwrap();
            assert!((r.depth[i] - exact).abs() < 1e-3);
        }
        assert!(r.iterations[i] <= 30);
    }
    assert!(hits > 100);
    let s = r.stats();
    assert!(s.hit_ratio > 0.0 && s.hit_ratio <= 1.0 && s.max_iterations <= 30);
}

struct Recording {
    shape: Shape,
    seen: RefCell<Vec<f64>>,
}

impl TraceTarget for Recording {
    fn values(&self, points: &[f64]) -> Vec<f64> {
        let v = self.shape.values(points);
        self.seen.borrow_mut().extend(&v);
        v
    }
    fn gradients(&self, points: &[f64]) -> Vec<f64> {
        self.shape.gradients(points)
    }
}

#[test]
fn exact_sdf_never_overshoots() {
    let target = Recording { shape: sphere(), seen: RefCell::new(Vec::new()) };
    let cam = pose_ring(10, 1.0, 0.5, 30).unwrap().remove(0);
    sphere_trace(&target, &cam, TraceOptions::default());
    let seen = target.seen.borrow();
    assert!(!seen.is_empty());
    assert!(seen.iter().all(|&u| u >= -5e-5));
}

#[test]
fn camera_validation() {
    assert!(Camera::new([1.0; 3], [1.0; 3], [0.0, 0.0, 1.0], 60.0, 4, 4).is_err());
    assert!(Camera::new([1.0, 0.0, 0.0], [0.0; 3], [0.0, 0.0, 1.0], 60.0, 0, 4).is_err());
}

#[test]
fn heatmap_conventions() {
    let zero = grid_of(vec![0.0; 16], 4);
    let img = sdf_heatmap(&zero).unwrap();
    assert!(img.pixels.iter().all(|&p| p == [255, 255, 255]));
    let vals: Vec<f64> = (0..64).map(|i| ((i * 37 % 64) as f64 - 31.5) / 10.0).collect();
    let a = sdf_heatmap(&grid_of(vals.clone(), 8)).unwrap();
    let b = sdf_heatmap(&grid_of(vals.iter().map(|v| -v).collect(), 8)).unwrap();
    for (p, q) in a.pixels.iter().zip(&b.pixels) {
        assert_eq!([p[2], p[1], p[0]], *q);
    }
    let ppm = encode_ppm(&a);
    assert!(ppm.starts_with(b"P6\n8 8\n255\n"));
    assert_eq!(ppm.len(), "P6\n8 8\n255\n".len() + 64 * 3);
    // A circle grid has a zero contour.
    let circle = gt_grid(&Shape::circle([0.0, 0.0], 0.5).unwrap(), &GridSpec::cube(2, 1.0, 32)).unwrap();
    assert!(sdf_heatmap(&circle).unwrap().pixels.contains(&[0, 0, 0]));
}

#[test]
fn trace_images() {
    let cam = pose_ring(10, 1.0, 0.5, 24).unwrap().remove(0);
    let r = sphere_trace(&sphere(), &cam, TraceOptions::default());
    let it = iteration_map(&r);
    for (p, &n) in it.pixels.iter().zip(&r.iterations) {
        assert_eq!(p[0], (255.0 * n as f64 / 30.0).round() as u8);
    }
    let d = depth_map(&r);
    let nm = normal_map(&r);
    for i in 0..r.len() {
        assert_eq!(d.pixels[i] == [0, 0, 0], !r.hit[i]);
        if !r.hit[i] {
            assert_eq!(nm.pixels[i], [0, 0, 0]);
        }
    }
    let csv = iteration_histogram_csv(&r);
    assert_eq!(csv.lines().count(), 32);
    let total: usize = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, r.len());
    let dir = tempfile::tempdir().unwrap();
    write_ppm(&it, dir.path().join("it.ppm")).unwrap();
    assert!(write_ppm(&it, dir.path().join("missing/it.ppm")).is_err());
}
