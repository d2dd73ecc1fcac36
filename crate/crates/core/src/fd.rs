//! Finite-difference stencils, spline slopes and cubic Hermite helpers shared by
//! the grid operators, the interpolants and the 1D curve types.

/// Fourth-order first derivative of uniformly spaced samples (non-periodic).
/// Central five-point in the interior, biased five-point stencils at the ends.
pub fn deriv4(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    deriv4_into(f, h, &mut d);
    d
}

pub fn deriv4_into(f: &[f64], h: f64, d: &mut [f64]) {
    let n = f.len();
    debug_assert!(n >= 5);
    let s = 1.0 / (12.0 * h);
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) * s;
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) * s;
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) * s;
    }
    let m = n - 1;
    d[m - 1] = (3.0 * f[m] + 10.0 * f[m - 1] - 18.0 * f[m - 2] + 6.0 * f[m - 3] - f[m - 4]) * s;
    d[m] = (25.0 * f[m] - 48.0 * f[m - 1] + 36.0 * f[m - 2] - 16.0 * f[m - 3] + 3.0 * f[m - 4]) * s;
}

/// One-sided fourth-order derivative at the first sample.
#[inline]
pub fn deriv4_left(f0: f64, f1: f64, f2: f64, f3: f64, f4: f64, h: f64) -> f64 {
    (-25.0 * f0 + 48.0 * f1 - 36.0 * f2 + 16.0 * f3 - 3.0 * f4) / (12.0 * h)
}

/// Fourth-order first derivative of periodic samples.
pub fn deriv4_periodic(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let s = 1.0 / (12.0 * h);
    (0..n)
        .map(|i| {
            let m2 = f[(i + n - 2) % n];
            let m1 = f[(i + n - 1) % n];
            let p1 = f[(i + 1) % n];
            let p2 = f[(i + 2) % n];
            (m2 - 8.0 * m1 + 8.0 * p1 - p2) * s
        })
        .collect()
}

/// Slopes of the clamped cubic spline through uniformly spaced samples, with
/// end slopes from the fourth-order one-sided stencils. Reproduces quartics at
/// the ends and cubics everywhere.
pub fn spline_slopes(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut m = vec![0.0; n];
    spline_slopes_into(f, h, &mut m, &mut vec![0.0; n]);
    m
}

/// Allocation-free variant; `work` must have the same length as `f`.
pub fn spline_slopes_into(f: &[f64], h: f64, m: &mut [f64], work: &mut [f64]) {
    let n = f.len();
    let last = n - 1;
    m[0] = deriv4_left(f[0], f[1], f[2], f[3], f[4], h);
    m[last] = -deriv4_left(f[last], f[last - 1], f[last - 2], f[last - 3], f[last - 4], h);
    if n == 2 {
        return;
    }
    // Thomas algorithm on rows 1..n-2 of m[i-1] + 4 m[i] + m[i+1] = 3 (f[i+1]-f[i-1]) / h.
    let c3 = 3.0 / h;
    let cp = work;
    let mut prev_c = 0.0;
    for i in 1..last {
        let mut rhs = c3 * (f[i + 1] - f[i - 1]);
        if i == 1 {
            rhs -= m[0];
        }
        if i == last - 1 {
            rhs -= m[last];
        }
        let denom = 4.0 - prev_c;
        let c = if i < last - 1 { 1.0 / denom } else { 0.0 };
        let prev_d = if i == 1 { 0.0 } else { m[i - 1] };
        m[i] = (rhs - prev_d) / denom;
        cp[i] = c;
        prev_c = c;
    }
    for i in (1..last - 1).rev() {
        m[i] -= cp[i] * m[i + 1];
    }
}

/// Slopes of the periodic cubic spline through uniformly spaced periodic samples.
pub fn periodic_spline_slopes(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let rhs: Vec<f64> = (0..n).map(|i| 3.0 / h * (f[(i + 1) % n] - f[(i + n - 1) % n])).collect();
    solve_cyclic_141(&rhs)
}

/// Solves the cyclic system x[i-1] + 4 x[i] + x[i+1] = b[i] by Sherman-Morrison.
pub fn solve_cyclic_141(b: &[f64]) -> Vec<f64> {
    let n = b.len();
    // Write the cyclic matrix as T + u v^T with T tridiagonal (corner-adjusted).
    let gamma = -4.0;
    let mut diag = vec![4.0; n];
    diag[0] -= gamma;
    diag[n - 1] -= 1.0 / gamma;
    let x = thomas_unit_offdiag(&diag, b);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = 1.0;
    let z = thomas_unit_offdiag(&diag, &u);
    let vx = x[0] + x[n - 1] / gamma;
    let vz = z[0] + z[n - 1] / gamma;
    let fac = vx / (1.0 + vz);
    x.iter().zip(z.iter()).map(|(xi, zi)| xi - fac * zi).collect()
}

fn thomas_unit_offdiag(diag: &[f64], b: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = 1.0 / diag[0];
    d[0] = b[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - c[i - 1];
        c[i] = 1.0 / denom;
        d[i] = (b[i] - d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Cubic Hermite basis at local coordinate u (values) for an interval of width h.
#[inline]
pub fn hermite_basis(u: f64) -> [f64; 4] {
    let u2 = u * u;
    let u3 = u2 * u;
    [2.0 * u3 - 3.0 * u2 + 1.0, u3 - 2.0 * u2 + u, -2.0 * u3 + 3.0 * u2, u3 - u2]
}

/// Derivatives of the Hermite basis with respect to u.
#[inline]
pub fn hermite_basis_d1(u: f64) -> [f64; 4] {
    let u2 = u * u;
    [6.0 * u2 - 6.0 * u, 3.0 * u2 - 4.0 * u + 1.0, -6.0 * u2 + 6.0 * u, 3.0 * u2 - 2.0 * u]
}

/// Second derivatives of the Hermite basis with respect to u.
#[inline]
pub fn hermite_basis_d2(u: f64) -> [f64; 4] {
    [12.0 * u - 6.0, 6.0 * u - 4.0, -12.0 * u + 6.0, 6.0 * u - 2.0]
}

/// Value, first and second derivative of the cubic Hermite segment.
#[inline]
pub fn hermite_eval(f0: f64, f1: f64, m0: f64, m1: f64, h: f64, u: f64) -> (f64, f64, f64) {
    let b = hermite_basis(u);
    let b1 = hermite_basis_d1(u);
    let b2 = hermite_basis_d2(u);
    let v = b[0] * f0 + b[1] * h * m0 + b[2] * f1 + b[3] * h * m1;
    let d = (b1[0] * f0 + b1[1] * h * m0 + b1[2] * f1 + b1[3] * h * m1) / h;
    let dd = (b2[0] * f0 + b2[1] * h * m0 + b2[2] * f1 + b2[3] * h * m1) / (h * h);
    (v, d, dd)
}

/// Solves a small dense system by Gaussian elimination with partial pivoting.
pub fn solve_dense_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deriv4_exact_for_quartics() {
        let h = 0.1;
        let f: Vec<f64> = (0..12).map(|i| (i as f64 * h).powi(4) - (i as f64 * h)).collect();
        let d = deriv4(&f, h);
        for (i, di) in d.iter().enumerate() {
            let x = i as f64 * h;
            assert!((di - (4.0 * x.powi(3) - 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn spline_slopes_reproduce_cubics() {
        let h = 0.25;
        let f: Vec<f64> = (0..9).map(|i| {
            let x = i as f64 * h;
            x * x * x - 2.0 * x
        }).collect();
        let m = spline_slopes(&f, h);
        for (i, mi) in m.iter().enumerate() {
            let x = i as f64 * h;
            assert!((mi - (3.0 * x * x - 2.0)).abs() < 1e-10, "{i}");
        }
    }

    #[test]
    fn periodic_spline_slopes_of_sine() {
        let n = 64;
        let h = std::f64::consts::TAU / n as f64;
        let f: Vec<f64> = (0..n).map(|i| (i as f64 * h).sin()).collect();
        let m = periodic_spline_slopes(&f, h);
        for (i, mi) in m.iter().enumerate() {
            assert!((mi - (i as f64 * h).cos()).abs() < 1e-5);
        }
    }
}
