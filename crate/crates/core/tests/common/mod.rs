#![allow(dead_code)]

use cocontact::systems::SystemPreset;
use cocontact::verify::sample_points;
use cocontact::LagrangianPoint;
use rand::rngs::StdRng;
use rand::SeedableRng;

/// Classical RK4 for `ẋ = f(t, x)`, sampled at `t0 + k·h`.
pub fn rk4<F>(f: F, t0: f64, x0: &[f64], h: f64, steps: usize) -> Vec<(f64, Vec<f64>)>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let axpy = |x: &[f64], a: f64, k: &[f64]| -> Vec<f64> { x.iter().zip(k).map(|(x, k)| x + a * k).collect() };
    let mut out = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    out.push((t0, x.clone()));
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let k1 = f(t, &x);
        let k2 = f(t + h / 2.0, &axpy(&x, h / 2.0, &k1));
        let k3 = f(t + h / 2.0, &axpy(&x, h / 2.0, &k2));
        let k4 = f(t + h, &axpy(&x, h, &k3));
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push((t0 + (k + 1) as f64 * h, x.clone()));
    }
    out
}

pub fn points(preset: &SystemPreset, count: usize, seed: u64) -> Vec<LagrangianPoint> {
    sample_points(preset, count, &mut StdRng::seed_from_u64(seed))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    assert!(
        (got - want).abs() <= tol,
        "{what}: got {got:e}, want {want:e} (diff {:e} > {tol:e})",
        (got - want).abs()
    );
}
