use crate::{Error, Result};

/// Point-source solution in 3D: `h(r) = (eps / r) h0 e^(lambda (eps - r))`.
pub fn h_point_3d(r: f64, eps: f64, lambda: f64, h0: f64) -> Result<f64> {
    check_radius(r, eps)?;
    Ok(eps / r * h0 * (lambda * (eps - r)).exp())
}

/// Point-source solution in 2D: `h(r) = e^(-lambda eps) K0(lambda r) / K0(lambda eps)`.
pub fn h_point_2d(r: f64, eps: f64, lambda: f64) -> Result<f64> {
    check_radius(r, eps)?;
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda must be positive"));
    }
    let ratio = bessel_k0_scaled(lambda * r)? / bessel_k0_scaled(lambda * eps)?;
    Ok((-lambda * eps).exp() * ratio * (-lambda * (r - eps)).exp())
}

fn check_radius(r: f64, eps: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be positive"));
    }
    if !(r >= eps) {
        return Err(Error::invalid(format!("radius {r} is inside the source ball of radius {eps}")));
    }
    Ok(())
}

/// Modified Bessel function of the second kind, order zero.
pub fn bessel_k0(x: f64) -> Result<f64> {
    Ok(bessel_k0_scaled(x)? * (-x).exp())
}

/// `e^x K0(x)`, evaluated as `int_0^inf e^(-x (cosh t - 1)) dt` by adaptive
/// Simpson quadrature.
pub fn bessel_k0_scaled(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("K0 needs a finite positive argument, got {x}")));
    }
    // Beyond t_max the integrand is below e^-60.
    let t_max = (1.0 + 60.0 / x).acosh();
    let f = |t: f64| {
        let s = (0.5 * t).sinh();
        (-2.0 * x * s * s).exp()
    };
    // Split so each panel sees at most one transition region.
    let panels = 16;
    let mut total = 0.0;
    for k in 0..panels {
        let a = t_max * k as f64 / panels as f64;
        let b = t_max * (k + 1) as f64 / panels as f64;
        total += adaptive_simpson(&f, a, b, 1e-15, 60);
    }
    Ok(total)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Distance recovered from a heat value: `-ln(h) / lambda`.
pub fn varadhan_recover(h: f64, lambda: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("heat value {h} is not positive")));
    }
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda must be positive"));
    }
    Ok(-h.ln() / lambda)
}

/// Elementwise [`varadhan_recover`].
pub fn varadhan_recover_all(h: &[f64], lambda: f64) -> Result<Vec<f64>> {
    h.iter().map(|&v| varadhan_recover(v, lambda)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    /// Power series `-(ln(x/2) + gamma) I0(x) + sum (x^2/4)^k / (k!)^2 H_k`.
    fn k0_series(x: f64) -> f64 {
        let q = x * x / 4.0;
        let mut term = 1.0;
        let mut i0 = 1.0;
        let mut tail = 0.0;
        let mut harmonic = 0.0;
        for k in 1..200 {
            term *= q / (k * k) as f64;
            harmonic += 1.0 / k as f64;
            i0 += term;
            tail += term * harmonic;
            if term < 1e-18 * i0 {
                break;
            }
        }
        -((x / 2.0).ln() + EULER_GAMMA) * i0 + tail
    }

    /// Large-argument expansion of `e^x K0(x)`, summed to its smallest term.
    fn k0_scaled_asymptotic(x: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            let next = -term * ((2 * k - 1) as f64).powi(2) / (k as f64 * 8.0 * x);
            if next.abs() > term.abs() {
                break;
            }
            term = next;
            sum += term;
        }
        (std::f64::consts::PI / (2.0 * x)).sqrt() * sum
    }

    #[test]
    fn k0_matches_series_for_small_arguments() {
        for &x in &[1e-3, 5e-3, 0.01, 0.1, 0.5, 1.0, 2.0, 3.0] {
            let got = bessel_k0(x).unwrap();
            let want = k0_series(x);
            assert!(((got - want) / want).abs() < 1e-8, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn k0_matches_asymptotics_for_large_arguments() {
        for &x in &[20.0, 25.0, 30.0, 40.0, 50.0] {
            let got = bessel_k0_scaled(x).unwrap();
            let want = k0_scaled_asymptotic(x);
            assert!(((got - want) / want).abs() < 1e-8, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn k0_reference_values() {
        // Independently tabulated at 30 digits.
        let table = [
            (1.0, 0.421_024_438_240_708_333_f64),
            (5.0, 3.691_098_334_042_594_3e-3),
            (10.0, 1.778_006_231_616_765_2e-5),
            (15.0, 9.819_536_482_396_434_5e-8),
        ];
        for (x, want) in table {
            let got = bessel_k0(x).unwrap();
            assert!(((got - want) / want).abs() < 1e-8, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn k0_limits() {
        let asym = |x: f64| (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp();
        // The leading correction is -1/(8x): the ratio at 10 sits 1.2% below one.
        let r10 = bessel_k0(10.0).unwrap() / asym(10.0);
        assert!((r10 - (1.0 - 1.0 / 80.0 + 9.0 / 12800.0)).abs() < 1e-4);
        for &x in &[13.0, 20.0, 50.0] {
            assert!((bessel_k0(x).unwrap() / asym(x) - 1.0).abs() < 0.01);
        }
        let s = bessel_k0(1e-3).unwrap() + (5e-4f64).ln() + EULER_GAMMA;
        assert!(s.abs() < 1e-3);
        assert!(matches!(bessel_k0(0.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_k0(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn point_source_examples() {
        assert_eq!(h_point_3d(0.1, 0.1, 10.0, 1.0).unwrap(), 1.0);
        let v = h_point_3d(0.2, 0.1, 10.0, 1.0).unwrap();
        assert!((v - 0.5 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.183940).abs() < 1e-6);
        assert!(h_point_3d(0.05, 0.1, 10.0, 1.0).is_err());

        assert!((h_point_2d(0.2, 0.2, 5.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for k in 0..200 {
            let v = h_point_2d(0.2 + 0.05 * k as f64, 0.2, 5.0).unwrap();
            assert!(v > 0.0 && v < prev);
            prev = v;
        }
        assert!(h_point_2d(0.1, 0.2, 5.0).is_err());
    }

    #[test]
    fn closed_forms_solve_the_pde() {
        let (eps, lam) = (0.1, 7.0);
        for &r in &[0.15, 0.3, 0.7, 1.2, 2.0] {
            let step = 1e-3 * r;
            // Radial Laplacian: h'' + (d - 1)/r h'.
            for (dim, h) in [
                (3.0, &(|r: f64| h_point_3d(r, eps, lam, 1.0).unwrap()) as &dyn Fn(f64) -> f64),
                (2.0, &|r: f64| h_point_2d(r, eps, lam).unwrap()),
            ] {
                let (hm, h0, hp) = (h(r - step), h(r), h(r + step));
                let d2 = (hp - 2.0 * h0 + hm) / (step * step);
                let d1 = (hp - hm) / (2.0 * step);
                let residual = d2 + (dim - 1.0) / r * d1 - lam * lam * h0;
                assert!((residual / (lam * lam * h0)).abs() < 1e-4, "d={dim} r={r}: {residual}");
            }
        }
    }

    #[test]
    fn exponential_decay_dominates() {
        for &(eps, lam) in &[(0.01, 10.0), (0.05, 30.0), (0.1, 80.0)] {
            for k in 1..50 {
                let r = 2.0 * eps * (1.0 + 0.2 * k as f64);
                let ratio = h_point_3d(2.0 * r, eps, lam, 1.0).unwrap() / h_point_3d(r, eps, lam, 1.0).unwrap();
                assert!(ratio < (-lam * r * 0.9).exp());
            }
        }
    }

    #[test]
    fn varadhan_inverse_pairs() {
        for &lam in &[0.5f64, 3.0, 40.0] {
            for &d in &[0.0, 0.1, 1.7] {
                assert!((varadhan_recover((-lam * d).exp(), lam).unwrap() - d).abs() < 1e-14);
            }
        }
        let xs: Vec<f64> = (-10..=10).map(|i| i as f64 * 0.1).collect();
        let h: Vec<f64> = xs.iter().map(|x| (-8.0 * x.abs()).exp()).collect();
        let d = varadhan_recover_all(&h, 8.0).unwrap();
        for (x, d) in xs.iter().zip(d) {
            assert!((d - x.abs()).abs() < 1e-14);
        }
        assert!(matches!(varadhan_recover(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(varadhan_recover(-1.0, 1.0), Err(Error::Domain(_))));
    }
}
