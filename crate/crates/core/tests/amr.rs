use gpamr_core::amr::{average_down, check_nesting, fill_halo, fill_halos, regrid, tag_cells, Hierarchy, IndexBox};
use gpamr_core::prolong::Prolongator;
use gpamr_core::solver::{initial_hierarchy, level_prolongators, AdvectConfig, Profile};
use gpamr_core::{DataMode, GpConfig, ProlongMethod};

fn gp() -> GpConfig {
    GpConfig::new(2, vec![2, 2], DataMode::CellAveraged)
}

fn pros(h: &Hierarchy, m: ProlongMethod) -> Vec<Prolongator> {
    level_prolongators(h, m, &gp()).unwrap()
}

/// Base level plus one centred fine patch, all filled with exact averages of `p`.
fn two_level(n: i64, p: Profile) -> Hierarchy {
    let (lo, hi) = p.domain();
    let mut h = Hierarchy::new([n, n], lo, hi, 1, 2, 1, 4 * n).unwrap();
    let q = n / 4;
    h.set_level_boxes(1, &[IndexBox::new([2 * q, 2 * q], [6 * q - 1, 6 * q - 1])]);
    h.fill_from(&move |a, b| vec![p.cell_value(a, b)]);
    h
}

fn ghost_cells(h: &Hierarchy, level: usize) -> Vec<(usize, i64, i64)> {
    let mut out = Vec::new();
    for (k, p) in h.levels[level].patches.iter().enumerate() {
        for (i, j) in p.grown().cells() {
            if !p.bx.contains(i, j) {
                out.push((k, i, j));
            }
        }
    }
    out
}

#[test]
fn constant_hierarchy_fills_constant_ghosts() {
    let c = 2.75;
    for m in [ProlongMethod::Gp, ProlongMethod::GpWenoAlways, ProlongMethod::McLinear] {
        let mut h = two_level(16, Profile::AccuracyGaussian);
        h.fill_from(&move |_, _| vec![c]);
        let pro = pros(&h, m);
        fill_halos(&mut h, &pro).unwrap();
        for l in 0..2 {
            for (k, i, j) in ghost_cells(&h, l) {
                let v = h.levels[l].patches[k].get(0, i, j);
                // forced WENO carries the substencils' own ~1e-6 constant bias
                let tol = if m == ProlongMethod::GpWenoAlways { 2e-6 } else { 5e-7 };
                assert!((v - c).abs() <= tol * c, "{m:?} level {l}: {v}");
            }
        }
    }
}

#[test]
fn halo_fill_is_idempotent() {
    let mut h = two_level(16, Profile::AccuracyGaussian);
    let pro = pros(&h, ProlongMethod::Gp);
    fill_halo(&mut h, 1, &pro).unwrap();
    let once = h.clone();
    fill_halo(&mut h, 1, &pro).unwrap();
    assert_eq!(once, h);
}

#[test]
fn coarse_fine_ghosts_converge_at_third_order() {
    let p = Profile::AccuracyGaussian;
    let mut errs = Vec::new();
    for n in [16, 32, 64] {
        let mut h = two_level(n, p);
        let pro = pros(&h, ProlongMethod::Gp);
        let stats = fill_halo(&mut h, 1, &pro).unwrap();
        assert!(stats.prolong_calls > 0);
        let dx = h.level_dx(1);
        let mut e: f64 = 0.0;
        for (k, i, j) in ghost_cells(&h, 1) {
            let a = h.cell_lo(1, i, j);
            let exact = p.cell_value(a, [a[0] + dx[0], a[1] + dx[1]]);
            e = e.max((h.levels[1].patches[k].get(0, i, j) - exact).abs());
        }
        errs.push(e);
    }
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log2() >= 2.7, "{errs:?}");
    }
}

#[test]
fn average_down_checkerboard_and_constant() {
    let mut h = two_level(8, Profile::AccuracyGaussian);
    for p in &mut h.levels[1].patches {
        for (i, j) in p.bx.cells() {
            p.set(0, i, j, if (i + j) % 2 == 0 { 1.0 } else { -1.0 });
        }
    }
    average_down(&mut h);
    let cov = IndexBox::new([2, 2], [5, 5]);
    for (i, j) in cov.cells() {
        assert_eq!(h.levels[0].patches[0].get(0, i, j), 0.0);
    }
    h.fill_from(&|_, _| vec![0.3]);
    let before = h.clone();
    average_down(&mut h);
    assert_eq!(before, h);
}

#[test]
fn slotted_cylinder_tags_match_direct_count() {
    let p = Profile::SlottedCylinder;
    let n = 64;
    let mut h = Hierarchy::new([n, n], [0.0, 0.0], [1.0, 1.0], 1, 2, 2, 32).unwrap();
    h.fill_from(&move |a, b| vec![p.cell_value(a, b)]);
    let tags = tag_cells(&h.levels[0], 0.5);
    let dx = 1.0 / n as f64;
    let mut want = 0;
    for j in 0..n {
        for i in 0..n {
            let a = [i as f64 * dx, j as f64 * dx];
            if p.cell_value(a, [a[0] + dx, a[1] + dx]) >= 0.5 {
                want += 1;
            }
        }
    }
    assert_eq!(tags.count(), want);
    assert!(want > 0);
}

#[test]
fn regrid_keeps_nesting_and_near_conservation() {
    for problem in [Profile::VortexGaussian, Profile::SlottedCylinder] {
        let mut cfg = AdvectConfig::new(problem, ProlongMethod::Gp);
        cfg.base_n = 32;
        let (mut h, pro) = initial_hierarchy(&cfg, None).unwrap();
        check_nesting(&h).unwrap();
        assert_eq!(h.num_levels(), 3);
        // shift the data so the tagged region moves, then regrid
        for l in 0..h.num_levels() {
            let dx = h.level_dx(l);
            let lo = h.lo;
            for p in &mut h.levels[l].patches {
                for (i, j) in p.bx.cells() {
                    let a = [lo[0] + i as f64 * dx[0] - 0.09375, lo[1] + j as f64 * dx[1]];
                    p.set(0, i, j, problem.cell_value(a, [a[0] + dx[0], a[1] + dx[1]]));
                }
            }
        }
        average_down(&mut h);
        let before = h.integral(0);
        let thr = problem.tag_threshold();
        regrid(&mut h, thr, &pro, None).unwrap();
        check_nesting(&h).unwrap();
        average_down(&mut h);
        let after = h.integral(0);
        let rel = ((after - before) / before).abs();
        // only fills of newly refined cells move the integral; WENO fills at
        // the cylinder edge are not conservative (measured 1.2e-5)
        let tol = if problem == Profile::VortexGaussian { 1e-6 } else { 5e-5 };
        assert!(rel <= tol, "{problem:?}: {rel:e}");
    }
}
