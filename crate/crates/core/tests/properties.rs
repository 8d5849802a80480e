use proptest::prelude::*;
use ris_core::dissipation::ProxOptions;
use ris_core::history::{history_derivative, history_eval};
use ris_core::qp::QpOptions;
use ris_core::spatial::{cone_project, in_cone};
use ris_core::verify::compatibility_check;
use ris_core::*;
use std::sync::Arc;

fn specs() -> Vec<DissipationSpec64> {
    vec![
        DissipationSpec::fatigue(ScalarFn::new(|z: f64| (1.0 - 0.5 * z).max(0.2)), None, 0.5),
        DissipationSpec::fatigue(
            ScalarFn::new(|z: f64| 0.5 + 0.5 * (-z * z).exp()),
            Some(ScalarFn::new(|z: f64| -z * (-z * z).exp())),
            0.43,
        ),
        DissipationSpec::weighted_l1(ScalarFn::new(|z: f64| 0.5 + 0.3 * z.sin()), 0.3),
        DissipationSpec::weighted_l1(ScalarFn::new(|z: f64| (0.8 - 0.4 * z).abs() + 0.1), 0.4),
    ]
}

fn vec_of(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, n)
}

/// (n, ζ, η₁, η₂) with rates nonnegative when `fatigue`.
fn instance(max_n: usize) -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (2..=max_n).prop_flat_map(|n| {
        (
            Just(n),
            vec_of(n, -2.0, 3.0),
            vec_of(n, -2.0, 3.0),
            vec_of(n, -1.0, 1.0),
            vec_of(n, -1.0, 1.0),
        )
    })
}

fn admissible(spec: &DissipationSpec64, v: &[f64]) -> Field64 {
    if spec.is_fatigue() {
        Field::new(v.iter().map(|x| x.abs()).collect())
    } else {
        Field::new(v.to_vec())
    }
}

fn mesh(n: usize) -> Mesh64 {
    Mesh::uniform(n, 1.0).unwrap()
}

fn rate_objective(
    spec: &DissipationSpec64,
    m: &Mesh64,
    zeta: &Field64,
    f: &DualField64,
    eps: f64,
    eta: &Field64,
) -> f64 {
    match spec.eval(m, zeta, eta).finite() {
        Some(r) => 0.5 * eps * m.h1_norm(eta).powi(2) - f.pair(eta) + r,
        None => f64::INFINITY,
    }
}

/// Dense Gaussian elimination with partial pivoting, independent of the
/// library's Cholesky.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Enumerates every sign/active pattern of the rate problem
/// `min ε/2 ηᵀVη − fᵀη + R(ζ,η)` and returns the unique KKT point.
fn brute_force_rate(spec: &DissipationSpec64, m: &Mesh64, zeta: &Field64, f: &DualField64, eps: f64) -> Vec<f64> {
    let n = m.n_nodes();
    let c = spec.threshold(m, zeta);
    let v = m.riesz();
    let states: &[i32] = if spec.is_fatigue() { &[0, 1] } else { &[-1, 0, 1] };
    let mut patterns = vec![vec![]];
    for _ in 0..n {
        patterns = patterns
            .into_iter()
            .flat_map(|p: Vec<i32>| states.iter().map(move |&s| [p.clone(), vec![s]].concat()))
            .collect();
    }
    let mut found = None;
    for p in patterns {
        let free: Vec<usize> = (0..n).filter(|&i| p[i] != 0).collect();
        let mut eta = vec![0.0; n];
        if !free.is_empty() {
            let a: Vec<Vec<f64>> = free
                .iter()
                .map(|&i| free.iter().map(|&j| eps * v[(i, j)]).collect())
                .collect();
            let b: Vec<f64> = free.iter().map(|&i| f[i] - p[i] as f64 * c[i]).collect();
            for (k, x) in gauss_solve(a, b).into_iter().enumerate() {
                eta[free[k]] = x;
            }
        }
        let tol = 1e-11;
        let sign_ok = (0..n).all(|i| p[i] == 0 || eta[i] * p[i] as f64 > 0.0);
        let grad: Vec<f64> = (0..n)
            .map(|i| eps * (0..n).map(|j| v[(i, j)] * eta[j]).sum::<f64>() - f[i])
            .collect();
        let mult_ok = (0..n).filter(|&i| p[i] == 0).all(|i| {
            if spec.is_fatigue() {
                grad[i] + c[i] >= -tol
            } else {
                grad[i].abs() <= c[i] + tol
            }
        });
        if sign_ok && mult_ok {
            found = Some(eta);
            break;
        }
    }
    found.expect("strictly convex problem has a KKT point")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn positive_homogeneity((n, z, _, e, _) in instance(8), which in 0usize..4, gamma in 0.0f64..100.0) {
        let spec = &specs()[which];
        let m = mesh(n);
        prop_assert!(spec.check_homogeneity(&m, &Field::new(z), &Field::new(e), gamma));
    }

    #[test]
    fn four_point_condition((n, z1, z2, e1, e2) in instance(8), which in 0usize..4) {
        let spec = &specs()[which];
        let m = mesh(n);
        let excess = spec
            .check_lipschitz_axiom(&m, &Field::new(z1), &Field::new(z2), &admissible(spec, &e1), &admissible(spec, &e2))
            .unwrap();
        prop_assert!(excess <= 1e-10, "excess {excess}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn riesz_is_spd_and_h1_is_a_norm((n, a, b, c, _) in instance(12), s in -5.0f64..5.0) {
        let m = mesh(n);
        let (a, b, c) = (Field::new(a), Field::new(b), Field::new(c));
        prop_assert!(m.riesz().bilinear(a.values(), a.values()) > 0.0);
        let tri = m.h1_norm(&(&a + &b)) - m.h1_norm(&a) - m.h1_norm(&b);
        prop_assert!(tri <= 1e-12);
        prop_assert!((m.h1_norm(&(&c * s)) - s.abs() * m.h1_norm(&c)).abs() <= 1e-12 * (1.0 + m.h1_norm(&c)));
    }

    #[test]
    fn cone_projection_properties((_, a, b, _, _) in instance(12)) {
        let (a, b) = (Field::new(a), Field::new(b));
        let pa = cone_project(&a);
        prop_assert!(in_cone(&pa));
        prop_assert_eq!(cone_project(&pa), pa.clone());
        let pb = cone_project(&b);
        prop_assert!((&pa - &pb).norm_euclid() <= (&a - &b).norm_euclid() + 1e-15);
    }

    #[test]
    fn riesz_round_trip((n, a, _, _, _) in instance(50)) {
        let m = mesh(n);
        let a = Field::new(a);
        let back = m.riesz_solve(&m.riesz_apply(&a));
        prop_assert!((&back - &a).norm_inf() <= 1e-12 * (1.0 + a.norm_inf()));
    }

    #[test]
    fn prox_is_first_order_optimal((n, z, f, d1, d2) in instance(8), which in 0usize..4, eps in 0.01f64..2.0) {
        let spec = &specs()[which];
        let m = mesh(n);
        let (z, f) = (Field::new(z), DualField::new(f.iter().map(|x| 3.0 * x).collect()));
        let eta = spec.prox_rate(&m, &z, &f, eps, None, &ProxOptions::default()).unwrap().rate;
        let base = rate_objective(spec, &m, &z, &f, eps, &eta);
        for d in [d1, d2] {
            for s in [1e-3, 1e-1] {
                let mut trial = eta.clone();
                trial.axpy(s, &Field::new(d.clone()));
                if spec.in_domain(&trial) {
                    prop_assert!(rate_objective(spec, &m, &z, &f, eps, &trial) >= base - 1e-12 * (1.0 + base.abs()));
                }
            }
        }
    }

    #[test]
    fn projection_idempotent_and_nonexpansive((n, z, a, b, _) in instance(8), which in 0usize..4) {
        let spec = &specs()[which];
        let m = mesh(n);
        let z = Field::new(z);
        let opts = QpOptions::default();
        let (a, b) = (DualField::new(a.iter().map(|x| 4.0 * x).collect()), DualField::new(b.iter().map(|x| 4.0 * x).collect()));
        let pa = spec.project_subdiff_zero(&m, &z, &a, &opts).unwrap();
        let pb = spec.project_subdiff_zero(&m, &z, &b, &opts).unwrap();
        let ppa = spec.project_subdiff_zero(&m, &z, &pa, &opts).unwrap();
        prop_assert!((&ppa - &pa).norm_inf() <= 1e-10);
        prop_assert!(m.dual_norm(&(&pa - &pb)) <= m.dual_norm(&(&a - &b)) + 1e-10);
    }

    #[test]
    fn prox_is_lipschitz_in_history((n, z1, z2, f, _) in instance(8), which in 0usize..4, eps in 0.05f64..2.0) {
        let spec = &specs()[which];
        let m = mesh(n);
        let f = DualField::new(f.iter().map(|x| 3.0 * x).collect());
        let (z1, z2) = (Field::new(z1), Field::new(z2));
        let o = ProxOptions::default();
        let e1 = spec.prox_rate(&m, &z1, &f, eps, None, &o).unwrap().rate;
        let e2 = spec.prox_rate(&m, &z2, &f, eps, None, &o).unwrap().rate;
        let bound = spec.lipschitz_constant() / eps * m.l2_norm(&(&z1 - &z2));
        prop_assert!(m.h1_norm(&(&e1 - &e2)) <= bound * (1.0 + 1e-8) + 1e-10);
    }

    #[test]
    fn dissipation_is_convex_in_rate((n, z, e1, e2, _) in instance(8), which in 0usize..4) {
        let spec = &specs()[which];
        let m = mesh(n);
        let z = Field::new(z);
        let (e1, e2) = (admissible(spec, &e1), admissible(spec, &e2));
        let mid = &(&e1 + &e2) * 0.5;
        let r = |e: &Field64| spec.eval(&m, &z, e).finite().unwrap();
        prop_assert!(r(&mid) <= 0.5 * (r(&e1) + r(&e2)) + 1e-14);
    }

    #[test]
    fn prox_matches_projection_formula(z in vec_of(8, -2.0, 3.0), f in vec_of(8, -4.0, 4.0), which in 0usize..4, eps in 0.01f64..2.0) {
        // η = ε⁻¹ V⁻¹ (f − P f) for the V⁻¹-metric projection P onto ∂₂R(ζ, 0)
        let spec = &specs()[which];
        let m = mesh(8);
        let (z, f) = (Field::new(z), DualField::new(f));
        let eta = spec.prox_rate(&m, &z, &f, eps, None, &ProxOptions::default()).unwrap().rate;
        let p = spec.project_subdiff_zero(&m, &z, &f, &QpOptions::default()).unwrap();
        let via = m.riesz_solve(&(&f - &p)).scaled(1.0 / eps);
        prop_assert!((&eta - &via).norm_inf() <= 1e-8 * (1.0 + eta.norm_inf()));
    }

    #[test]
    fn prox_matches_active_set_enumeration(z in vec_of(3, -2.0, 3.0), f in vec_of(3, -4.0, 4.0), which in 0usize..4, eps in 0.01f64..2.0) {
        let spec = &specs()[which];
        let m = mesh(3);
        let (z, f) = (Field::new(z), DualField::new(f));
        let eta = spec.prox_rate(&m, &z, &f, eps, None, &ProxOptions::default()).unwrap().rate;
        let brute = brute_force_rate(spec, &m, &z, &f, eps);
        for i in 0..3 {
            prop_assert!((eta[i] - brute[i]).abs() <= 1e-9 * (1.0 + brute[i].abs()), "{:?} vs {:?}", eta, brute);
        }
    }

    #[test]
    fn zero_initial_load_is_always_compatible(which in 0usize..4, y0 in vec_of(5, -2.0, 3.0)) {
        let spec = specs()[which].clone();
        let m = Arc::new(mesh(5));
        let s = Scenario::new(
            m,
            1.0,
            LoadSpec::uniform(ScalarFn::new(|t: f64| 5.0 * t), 5),
            KernelSpec::identity(Field::new(y0)),
            spec,
            1.0,
            10,
        )
        .unwrap();
        prop_assert!(compatibility_check(&s).compatible);
    }

    #[test]
    fn history_is_affine(a in -3.0f64..3.0, b in -3.0f64..3.0, w1 in vec_of(11, -1.0, 1.0), w2 in vec_of(11, -1.0, 1.0)) {
        let y0 = Field::new(vec![0.3, -0.7]);
        let kernels = [
            KernelSpec::identity(y0.clone()),
            KernelSpec::convolution(ScalarFn::new(|t: f64| 1.0 - t), ScalarFn::constant(-1.0), y0.clone()),
        ];
        let make = |w: &[f64]| Trajectory::new(0.1, w.iter().map(|&v| Field::new(vec![v, 2.0 * v])).collect()).unwrap();
        let (y1, y2) = (make(&w1), make(&w2));
        let comb = make(&w1.iter().zip(&w2).map(|(p, q)| a * p + b * q).collect::<Vec<_>>());
        for k in &kernels {
            for i in [0, 4, 10] {
                let lhs = &history_eval(k, &comb, i).unwrap() - &y0;
                let r1 = &history_eval(k, &y1, i).unwrap() - &y0;
                let r2 = &history_eval(k, &y2, i).unwrap() - &y0;
                let rhs = &(&r1 * a) + &(&r2 * b);
                prop_assert!((&lhs - &rhs).norm_inf() <= 1e-13);
                if i == 0 {
                    prop_assert_eq!(history_eval(k, &comb, 0).unwrap(), y0.clone());
                }
                let sup = comb.states().iter().map(|q| q.norm_inf()).fold(0.0, f64::max);
                let d = history_derivative(k, &comb, i).unwrap();
                prop_assert!(d.norm_inf() <= k.derivative_bound_factor(1.0, 1000) * sup + 1e-12);
            }
        }
    }
}
