//! Independent reference implementations used only by the integration tests.
#![allow(dead_code)]

/// `erf` at 40 digits, rounded to 20.
pub const ERF_TABLE: [(f64, f64); 13] = [
    (0.0, 0.0),
    (1e-10, 1.128_379_167_095_512_6e-10),
    (0.1, 0.112_462_916_018_284_89),
    (0.5, 0.520_499_877_813_046_5),
    (1.0, 0.842_700_792_949_714_9),
    (1.5, 0.966_105_146_475_310_8),
    (2.0, 0.995_322_265_018_952_7),
    (2.5, 0.999_593_047_982_555),
    (3.0, 0.999_977_909_503_001_4),
    (4.0, 0.999_999_984_582_742_1),
    (5.5, 0.999_999_999_999_992_7),
    (-0.7, -0.677_801_193_837_418_4),
    (-3.2, -0.999_993_974_238_848_3),
];

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Nodes and weights mapped to `[a, b]`.
pub fn gl_on(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(&w).map(|(&x, &w)| (c + h * x, h * w)).collect()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &v)| r.iter().copied().chain([v]).collect()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..=n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

/// Least squares through the normal equations `MᵀM x = Mᵀb`.
pub fn normal_equations(m: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let cols = m[0].len();
    let ata: Vec<Vec<f64>> =
        (0..cols).map(|i| (0..cols).map(|j| m.iter().map(|r| r[i] * r[j]).sum()).collect()).collect();
    let atb: Vec<f64> = (0..cols).map(|i| m.iter().zip(b).map(|(r, v)| r[i] * v).sum()).collect();
    gauss_solve(&ata, &atb)
}

/// `r ∫∫ exp(-(x-y)²/2L²)` over a unit cell at 0 and a width-`1/r` cell at `delta`.
pub fn box_factor_quadrature(delta: f64, l: f64, r: u32, nodes: usize) -> f64 {
    let rf = r as f64;
    let qx = gl_on(-0.5, 0.5, nodes);
    let qy = gl_on(delta - 0.5 / rf, delta + 0.5 / rf, nodes);
    let mut s = 0.0;
    for &(x, wx) in &qx {
        for &(y, wy) in &qy {
            s += wx * wy * (-(x - y) * (x - y) / (2.0 * l * l)).exp();
        }
    }
    rf * s
}

/// Full tensor-product quadrature of the 2-D double cell average, without
/// using separability.
pub fn box_2d_quadrature(delta: [f64; 2], l: f64, r: u32, nodes: usize) -> f64 {
    let rf = r as f64;
    let q0 = gl_on(-0.5, 0.5, nodes);
    let qs: Vec<Vec<(f64, f64)>> = delta.iter().map(|&d| gl_on(d - 0.5 / rf, d + 0.5 / rf, nodes)).collect();
    let mut s = 0.0;
    for &(x0, w0) in &q0 {
        for &(x1, w1) in &q0 {
            for &(y0, v0) in &qs[0] {
                for &(y1, v1) in &qs[1] {
                    let d2 = (x0 - y0) * (x0 - y0) + (x1 - y1) * (x1 - y1);
                    s += w0 * w1 * v0 * v1 * (-d2 / (2.0 * l * l)).exp();
                }
            }
        }
    }
    rf * rf * s
}

/// Real roots of a monic cubic by bisection on sign changes between its
/// critical points; independent of any eigen-solver.
pub fn cubic_roots(c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    let p = |x: f64| ((x + c2) * x + c1) * x + c0;
    let disc = c2 * c2 - 3.0 * c1;
    let bound = 1.0 + c2.abs().max(c1.abs()).max(c0.abs());
    let mut pts = vec![-bound];
    if disc > 0.0 {
        let s = disc.sqrt();
        pts.push((-c2 - s) / 3.0);
        pts.push((-c2 + s) / 3.0);
    }
    pts.push(bound);
    let mut roots = Vec::new();
    for w in pts.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        if p(a) == 0.0 {
            roots.push(a);
            continue;
        }
        if p(a).signum() == p(b).signum() {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if p(a).signum() == p(m).signum() {
                a = m;
            } else {
                b = m;
            }
        }
        roots.push(0.5 * (a + b));
    }
    roots
}
