//! One-dimensional Gauss rules (Hermite and Legendre) computed by Newton
//! iteration on the orthonormal three-term recurrences.

use crate::scalar::Real;

/// Gauss–Hermite rule for the weight `e^{-x^2}`.
#[derive(Clone, Debug)]
pub struct GaussHermiteRule<T> {
    /// Nodes in ascending order.
    pub nodes: Vec<T>,
    /// Weights for `∫ f(x) e^{-x^2} dx ≈ Σ w_i f(x_i)`.
    pub weights: Vec<T>,
    /// Weights for plain integrals: `∫ g(x) dx ≈ Σ W_i g(x_i)` with `W_i = w_i e^{x_i^2}`.
    pub lebesgue_weights: Vec<T>,
}

/// Evaluates the normalized Hermite functions `h_0..=h_n` at `t`, walking the
/// recurrence from the Gaussian `h_0` so that no intermediate value overflows.
pub(crate) fn hermite_function_values<T: Real>(n: usize, t: T, out: &mut Vec<T>) {
    out.clear();
    let h0 = T::PI().powf(T::lit(-0.25)) * (-t * t * T::lit(0.5)).exp();
    out.push(h0);
    if n == 0 {
        return;
    }
    out.push(T::SQRT_2() * t * h0);
    for j in 2..=n {
        let jt = T::count(j);
        let next = (T::lit(2.0) / jt).sqrt() * t * out[j - 1] - ((jt - T::one()) / jt).sqrt() * out[j - 2];
        out.push(next);
    }
}

fn newton_converged<T: Real>(z: T, z_prev: T) -> bool {
    (z - z_prev).abs() <= T::lit(4.0) * T::epsilon() * z.abs().max(T::one())
}

pub fn gauss_hermite<T: Real>(m: usize) -> GaussHermiteRule<T> {
    assert!(m >= 1, "Gauss-Hermite rule needs at least one node");
    let mut roots: Vec<T> = Vec::with_capacity(m);
    let mut lebesgue = Vec::with_capacity(m);
    let mut h = Vec::with_capacity(m + 1);
    let mf = T::count(m);
    let mut z = T::zero();
    for i in 0..m.div_ceil(2) {
        z = match i {
            0 => {
                let s = T::lit(2.0) * mf + T::one();
                s.sqrt() - T::lit(1.85575) * s.powf(T::lit(-0.16667))
            }
            1 => z - T::lit(1.14) * mf.powf(T::lit(0.426)) / z,
            2 => T::lit(1.86) * z - T::lit(0.86) * roots[0],
            3 => T::lit(1.91) * z - T::lit(0.91) * roots[1],
            _ => T::lit(2.0) * z - roots[i - 2],
        };
        for _ in 0..100 {
            hermite_function_values(m, z, &mut h);
            // h_m / h_m' at a root equals p_m / p_m' for the polynomial part
            let step = h[m] / ((T::lit(2.0) * mf).sqrt() * h[m - 1]);
            let prev = z;
            z = z - step;
            if newton_converged(z, prev) {
                break;
            }
        }
        hermite_function_values(m, z, &mut h);
        roots.push(z);
        lebesgue.push(T::one() / (mf * h[m - 1] * h[m - 1]));
    }
    // roots are descending and non-negative; mirror them
    let mut nodes = vec![T::zero(); m];
    let mut big_w = vec![T::zero(); m];
    for (i, (&x, &w)) in roots.iter().zip(&lebesgue).enumerate() {
        nodes[m - 1 - i] = x;
        big_w[m - 1 - i] = w;
        nodes[i] = -x;
        big_w[i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = T::zero();
    }
    let weights = nodes.iter().zip(&big_w).map(|(&x, &w)| w * (-x * x).exp()).collect();
    GaussHermiteRule { nodes, weights, lebesgue_weights: big_w }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre<T: Real>(m: usize) -> (Vec<T>, Vec<T>) {
    assert!(m >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![T::zero(); m];
    let mut weights = vec![T::zero(); m];
    let mf = T::count(m);
    for i in 0..m.div_ceil(2) {
        let mut z = (T::PI() * (T::count(i + 1) - T::lit(0.25)) / (mf + T::lit(0.5))).cos();
        let mut pp = T::one();
        for _ in 0..100 {
            let (mut p1, mut p2) = (T::one(), T::zero());
            for j in 1..=m {
                let jf = T::count(j);
                let p3 = p2;
                p2 = p1;
                p1 = ((T::lit(2.0) * jf - T::one()) * z * p2 - (jf - T::one()) * p3) / jf;
            }
            pp = mf * (z * p1 - p2) / (z * z - T::one());
            let prev = z;
            z = prev - p1 / pp;
            if newton_converged(z, prev) {
                break;
            }
        }
        let w = T::lit(2.0) / ((T::one() - z * z) * pp * pp);
        nodes[i] = -z;
        nodes[m - 1 - i] = z;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = T::zero();
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule on `[a, b]` with `panels` equal panels of `order` points.
pub fn composite_gauss_legendre<T: Real>(a: T, b: T, panels: usize, order: usize) -> (Vec<T>, Vec<T>) {
    let (x, w) = gauss_legendre::<T>(order);
    let width = (b - a) / T::count(panels);
    let half = width * T::lit(0.5);
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let mid = a + width * (T::count(p) + T::lit(0.5));
        for (&xi, &wi) in x.iter().zip(&w) {
            nodes.push(mid + half * xi);
            weights.push(half * wi);
        }
    }
    (nodes, weights)
}
