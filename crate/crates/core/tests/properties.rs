use gpamr_core::kernels::{cross_cov, integrated_cov, KernelParams};
use gpamr_core::prolong::{alpha_of, betas, omega, prolong_cell, prolong_linear, prolong_weno};
use gpamr_core::smallmat::{cholesky_solve, lstsq_qr, sym_eigen, Cholesky, RectMatrix, SymMatrix};
use gpamr_core::stencil::{build_geometry, fine_points};
use gpamr_core::weights::{build_weights, ProlongWeights};
use gpamr_core::{CoarseWindow, DataMode, GpConfig};
use proptest::prelude::*;
use std::sync::OnceLock;

fn weights2(mode: DataMode) -> &'static ProlongWeights {
    static CELL: OnceLock<ProlongWeights> = OnceLock::new();
    static POINT: OnceLock<ProlongWeights> = OnceLock::new();
    let cell = match mode {
        DataMode::CellAveraged => &CELL,
        DataMode::Pointwise => &POINT,
    };
    cell.get_or_init(|| build_weights(&GpConfig::new(2, vec![2, 2], mode)).unwrap())
}

fn cfg2(mode: DataMode) -> GpConfig {
    GpConfig::new(2, vec![2, 2], mode)
}

fn spd(n: usize, seed: &[f64]) -> SymMatrix {
    // B Bᵀ + n I from a seeded square B
    let b = |i: usize, j: usize| seed[(i * n + j) % seed.len()] * (1.0 + ((i + 2 * j) % 7) as f64 * 0.1);
    SymMatrix::from_fn(n, |i, j| (0..n).map(|k| b(i, k) * b(j, k)).sum::<f64>() + if i == j { n as f64 } else { 0.0 })
}

fn mode_strategy() -> impl Strategy<Value = DataMode> {
    prop_oneof![Just(DataMode::CellAveraged), Just(DataMode::Pointwise)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cholesky_and_qr_round_trip(n in 1usize..=25, seed in prop::collection::vec(-1.0f64..1.0, 1..40), b in prop::collection::vec(-10.0f64..10.0, 25)) {
        let a = spd(n, &seed);
        let b = &b[..n];
        let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let x = cholesky_solve(&a, b).unwrap();
        let r: f64 = a.mul_vec(&x).iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        prop_assert!(r <= 1e-9 * nb);
        let m = RectMatrix::from_row_major(n, n, a.as_slice().to_vec()).unwrap();
        let q = lstsq_qr(&m, b).unwrap();
        let r: f64 = a.mul_vec(&q.x).iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        prop_assert!(r <= 1e-9 * nb);
    }

    #[test]
    fn eigenvalues_sum_to_trace(n in 1usize..=13, seed in prop::collection::vec(-1.0f64..1.0, 1..40)) {
        let a = spd(n, &seed);
        let e = sym_eigen(&a).unwrap();
        let s: f64 = e.values.iter().sum();
        prop_assert!((s - a.trace()).abs() <= 1e-10 * a.trace().abs());
    }

    #[test]
    fn lstsq_residual_is_orthogonal(rows in 5usize..=13, data in prop::collection::vec(-1.0f64..1.0, 13 * 5), b in prop::collection::vec(-1.0f64..1.0, 13)) {
        let cols = 5;
        let mut m = RectMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                // diagonal boost keeps the draw full rank
                m.set(i, j, data[i * cols + j] + if i == j { 2.0 } else { 0.0 });
            }
        }
        let b = &b[..rows];
        let q = lstsq_qr(&m, b).unwrap();
        let res: Vec<f64> = m.mul_vec(&q.x).iter().zip(b).map(|(u, v)| u - v).collect();
        let g = m.tr_mul_vec(&res);
        let ng = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(ng <= 1e-9 * m.norm() * nb.max(1e-300));
    }

    #[test]
    fn kernels_factor_and_are_bounded(d in prop::collection::vec(-3.0f64..3.0, 3), l in 1.5f64..12.0, r in 1u32..=4) {
        let p3 = KernelParams::new(l, 1.0, vec![1.0; 3], vec![r; 3]).unwrap();
        let p1 = KernelParams::new(l, 1.0, vec![1.0], vec![r]).unwrap();
        let full = cross_cov(&d, &p3).unwrap();
        let prod: f64 = d.iter().map(|&x| cross_cov(&[x], &p1).unwrap()).product();
        prop_assert!((full - prod).abs() <= 1e-13 * prod);
        prop_assert!(full > 0.0 && full <= 1.0);
        let c = integrated_cov(&d, &p3).unwrap();
        let cp: f64 = d.iter().map(|&x| integrated_cov(&[x], &p1).unwrap()).product();
        prop_assert!((c - cp).abs() <= 1e-13 * cp);
        prop_assert!(c > 0.0 && c <= 1.0);
    }

    #[test]
    fn omega_is_a_partition_of_unity(beta in prop::collection::vec(0.0f64..1e6, 5), i in 0usize..4, mode in mode_strategy()) {
        let w = weights2(mode);
        let om = omega(&beta, &w.gamma[i], 1e-36, 2.0);
        let s: f64 = om.iter().sum();
        // signed γ makes the terms cancel; round-off scales with Σ|ω|
        let mag: f64 = om.iter().map(|o| o.abs()).sum();
        prop_assert!((s - 1.0).abs() <= 4.0 * f64::EPSILON * mag, "sum {s}, sum |w| {mag}");
        if w.gamma[i].iter().all(|&g| g >= 0.0) {
            prop_assert!(om.iter().all(|&o| o >= 0.0));
        }
    }

    #[test]
    fn betas_are_nonnegative(v in prop::collection::vec(-1e3f64..1e3, 13), mode in mode_strategy()) {
        prop_assert!(betas(&v, weights2(mode)).iter().all(|&b| b >= 0.0));
    }

    #[test]
    fn prolongation_commutes_with_reflection(v in prop::collection::vec(-1.0f64..1.0, 13), axis in 0usize..2, mode in mode_strategy()) {
        let w = weights2(mode);
        let cfg = cfg2(mode);
        let g = &w.geometry;
        let win = CoarseWindow::new(v.clone(), g).unwrap();
        let flipped = CoarseWindow::new((0..v.len()).map(|k| v[g.reflect_total(k, axis)]).collect(), g).unwrap();
        let (la, lb) = (prolong_linear(&win, w), prolong_linear(&flipped, w));
        let (wa, wb) = (prolong_weno(&win, w, &cfg), prolong_weno(&flipped, w, &cfg));
        let b = betas(&v, w);
        for i in 0..w.num_fine() {
            let j = w.fine_points.reflect(i, axis);
            prop_assert!((la.fine_values[i] - lb.fine_values[j]).abs() <= 1e-12);
            // signed pointwise γ let the ω normalisation cancel; the round-off
            // bound grows with Σ|ω| times the spread of substencil predictions
            let om = omega(&b, &w.gamma[i], cfg.eps, cfg.p);
            let spread: f64 = (0..g.num_sub())
                .map(|m| {
                    let f: f64 = g.sub_index[m].iter().zip(&w.w_sub[i][m]).map(|(&k, c)| c * v[k]).sum();
                    (om[m] * f).abs()
                })
                .sum();
            let kappa: f64 = om.iter().map(|o| o.abs()).sum();
            prop_assert!((wa.fine_values[i] - wb.fine_values[j]).abs() <= 1e-13 * kappa * spread.max(1.0));
        }
    }

    #[test]
    fn switch_is_bitwise_consistent(v in prop::collection::vec(-1.0f64..1.0, 13), jump in 0.0f64..50.0, mode in mode_strategy()) {
        let w = weights2(mode);
        let cfg = cfg2(mode);
        let mut v = v;
        v[12] += jump;
        let win = CoarseWindow::new(v.clone(), &w.geometry).unwrap();
        let a = alpha_of(&v, w, cfg.eps2);
        let c = prolong_cell(&win, w, &cfg);
        let reference = if a > cfg.alpha_c { prolong_weno(&win, w, &cfg) } else { prolong_linear(&win, w) };
        prop_assert_eq!(c.used_weno, a > cfg.alpha_c);
        for (x, y) in c.fine_values.iter().zip(&reference.fine_values) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn prolongation_scales(v in prop::collection::vec(0.5f64..1.5, 13), k in -20i32..20, c in 1e-3f64..1e3, mode in mode_strategy()) {
        let w = weights2(mode);
        let cfg = cfg2(mode);
        let win = CoarseWindow::new(v.clone(), &w.geometry).unwrap();
        // powers of two scale every product exactly
        let p2 = 2f64.powi(k);
        let scaled = CoarseWindow::new(v.iter().map(|x| x * p2).collect(), &w.geometry).unwrap();
        let (a, b) = (prolong_linear(&win, w), prolong_linear(&scaled, w));
        for (x, y) in a.fine_values.iter().zip(&b.fine_values) {
            prop_assert_eq!((x * p2).to_bits(), y.to_bits());
        }
        let scaled = CoarseWindow::new(v.iter().map(|x| x * c).collect(), &w.geometry).unwrap();
        let (a, b) = (prolong_weno(&win, w, &cfg), prolong_weno(&scaled, w, &cfg));
        for (x, y) in a.fine_values.iter().zip(&b.fine_values) {
            prop_assert!((x * c - y).abs() <= 1e-9 * y.abs());
        }
    }

    #[test]
    fn weno_tracks_linear_on_quadratics(q in prop::collection::vec(-1.0f64..1.0, 6), mode in mode_strategy()) {
        let w = weights2(mode);
        let cfg = cfg2(mode);
        let win = CoarseWindow::from_fn(&w.geometry, |o| {
            let (x, y) = (o[0] as f64, o[1] as f64);
            q[0] + q[1] * x + q[2] * y + q[3] * x * x + q[4] * x * y + q[5] * y * y
        });
        let nf = win.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (a, b) = (prolong_weno(&win, w, &cfg), prolong_linear(&win, w));
        for i in 0..w.num_fine() {
            prop_assert!((a.fine_values[i] - b.fine_values[i]).abs() <= 10.0 * w.gamma_residual[i] * nf);
        }
    }
}

#[test]
fn total_stencil_kernel_matrices_are_spd() {
    for dim in 1..=3 {
        let g = build_geometry(dim).unwrap();
        for l in [1.5, 3.0, 12.0] {
            let p = KernelParams::new(l, 1.0, vec![1.0; dim], vec![1; dim]).unwrap();
            let off = &g.total_offsets;
            let a = SymMatrix::try_from_fn(off.len(), |i, j| {
                let d: Vec<f64> = off[i].iter().zip(&off[j]).map(|(a, b)| (b - a) as f64).collect();
                integrated_cov(&d, &p)
            })
            .unwrap();
            assert!(Cholesky::factor(&a).is_ok(), "D={dim} L={l}");
            assert!(sym_eigen(&a).unwrap().values[0] > 0.0, "D={dim} L={l}");
        }
    }
}

#[test]
fn fine_points_tile_the_coarse_cell() {
    for ratio in [vec![1u32], vec![3], vec![2, 2], vec![4, 4], vec![2, 3, 4]] {
        let fp = fine_points(&ratio).unwrap();
        let n: u32 = ratio.iter().product();
        assert_eq!(fp.len(), n as usize);
        for d in 0..ratio.len() {
            let mean: f64 = fp.offsets.iter().map(|o| o[d]).sum::<f64>() / fp.len() as f64;
            assert!(mean.abs() < 1e-15);
        }
        // distinct cells of width 1/r inside [-½, ½]
        let mut keys: Vec<Vec<i64>> = fp
            .offsets
            .iter()
            .map(|o| o.iter().zip(&ratio).map(|(x, &r)| ((x + 0.5) * r as f64 - 0.5).round() as i64).collect())
            .collect();
        for (k, o) in keys.iter().zip(&fp.offsets) {
            for ((&c, &r), x) in k.iter().zip(&ratio).zip(o) {
                assert!((0..r as i64).contains(&c));
                assert!((x - ((c as f64 + 0.5) / r as f64 - 0.5)).abs() < 1e-15);
            }
        }
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), fp.len());
    }
}
