use std::sync::Arc;

use nalgebra::DVector;
use proptest::prelude::*;

use rwf::characteristics::{
    conservativity_probe, expanded_form_discrete, mixed_diagonal_field, probe_loops, random_similarity_field,
    resolvent, transport, PathCurve, ThirdOrderField,
};
use rwf::forward::{solve_harmonic, BoundaryCondition, ExactParamField};
use rwf::mesh::{generate_triangular, generate_triangular_seeded, BoundaryTag, Rect};
use rwf::rwf::{interpolate_to_mesh, DataSet};
use rwf::tensors::make_isotropic_basis;

fn point() -> impl Strategy<Value = [f64; 2]> {
    (-0.8..0.8f64, -0.8..0.8f64).prop_map(|(x, y)| [x, y])
}

fn path_between(a: [f64; 2], b: [f64; 2], mids: Vec<[f64; 2]>) -> PathCurve {
    let mut pts = vec![a];
    pts.extend(mids);
    pts.push(b);
    PathCurve::new(pts).unwrap()
}

// ν = 0.7 sin(1.3x − 0.4y) + 0.5xy, B = ∇ν, kernel μ = exp(−ν).
fn nu(p: [f64; 2]) -> f64 {
    0.7 * (1.3 * p[0] - 0.4 * p[1]).sin() + 0.5 * p[0] * p[1]
}

fn grad_nu(p: [f64; 2]) -> [f64; 2] {
    let c = 0.7 * (1.3 * p[0] - 0.4 * p[1]).cos();
    [1.3 * c + 0.5 * p[1], -0.4 * c + 0.5 * p[0]]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn transported_kernel_element_matches_its_values(
        a in point(),
        b in point(),
        mids in prop::collection::vec(point(), 0..3),
    ) {
        let field = ThirdOrderField::scalar_gradient(Rect::omega(), grad_nu);
        let path = path_between(a, b, mids);
        let mu = |p: [f64; 2]| (-nu(p)).exp();
        let tr = transport(&field, &path, &DVector::from_element(1, mu(a)), 256).unwrap();
        let got = tr.last()[0];
        prop_assert!((got - mu(b)).abs() <= 1e-8 * mu(b), "{} vs {}", got, mu(b));
    }

    #[test]
    fn transported_fields_stay_away_from_zero(
        seed in 0u64..1000,
        a in point(),
        b in point(),
        mids in prop::collection::vec(point(), 0..3),
        v in prop::collection::vec(-1.0..1.0f64, 3),
    ) {
        let v = DVector::from_vec(v);
        prop_assume!(v.norm() > 1e-3);
        let field = random_similarity_field(3, seed, Rect::omega());
        let path = path_between(a, b, mids);
        let tr = transport(&field, &path, &v, 32).unwrap();
        // R = M(y)⁻¹M(x) with M diagonally dominant: |φ| ≥ |v|·σ_min(M)/σ_max(M).
        prop_assert!(tr.min_norm > 0.3 * v.norm(), "{} for |v| = {}", tr.min_norm, v.norm());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn degree_is_independent_of_the_base_point(n in 1usize..4, k_frac in 0.0..1.0f64, seed in 0u64..500) {
        let k = ((n + 1) as f64 * k_frac).floor().min(n as f64) as usize;
        let field = mixed_diagonal_field(n, k, seed, Rect::omega());
        let mut ks = Vec::new();
        for i in 0..5 {
            let t = i as f64 * 1.3 + seed as f64;
            let x = [0.5 * t.cos(), 0.5 * (1.7 * t).sin()];
            let loops = probe_loops(x, 0.4, 6, field.domain()).unwrap();
            ks.push(conservativity_probe(&field, x, &loops, 1e-6, 64).unwrap().k);
        }
        prop_assert!(ks.iter().all(|&c| c == k), "expected {} got {:?}", k, ks);
    }

    #[test]
    fn degree_never_exceeds_the_dimension(n in 1usize..5, seed in 0u64..500, tol in 1e-9..1e-2f64, x in point()) {
        for field in [random_similarity_field(n, seed, Rect::omega()), mixed_diagonal_field(n, n / 2, seed, Rect::omega())] {
            let loops = probe_loops(x, 0.3, 4, field.domain()).unwrap();
            let p = conservativity_probe(&field, x, &loops, tol, 16).unwrap();
            prop_assert!(p.k <= n);
            prop_assert_eq!(p.basis.ncols(), p.k);
        }
    }
}

#[test]
fn resolvent_of_a_gradient_field_is_path_independent() {
    let field = ThirdOrderField::scalar_gradient(Rect::omega(), grad_nu);
    let (a, b) = ([-0.5, -0.4], [0.6, 0.3]);
    let exact = (-(nu(b) - nu(a))).exp();
    for mids in [vec![], vec![[0.0, 0.7]], vec![[-0.7, 0.6], [0.7, -0.7]]] {
        let r = resolvent(&field, &path_between(a, b, mids), 256).unwrap().matrix[(0, 0)];
        assert!((r - exact).abs() < 1e-10);
    }
}

/// Constant Lamé parameters, two time-harmonic fields: `μ₀ = (4, 5)` solves
/// `B·μ₀ = F` exactly, so the discrete residual measures consistency.
#[test]
fn expanded_form_residual_decays_with_resolution() {
    let fwd = Arc::new(generate_triangular_seeded(&Rect::omega(), 0.01, 3).unwrap());
    let basis = make_isotropic_basis();
    let mu0 = [4.0, 5.0];
    let params = ExactParamField::constant(&mu0);
    let omega = 4.0;
    let bcs = [
        BoundaryCondition::new(BoundaryTag::Bottom, BoundaryTag::Top, [1.0, -0.5]).unwrap(),
        BoundaryCondition::new(BoundaryTag::Left, BoundaryTag::Right, [-0.5, 1.0]).unwrap(),
    ];
    let fields: Vec<_> = bcs.iter().map(|bc| solve_harmonic(&fwd, &basis, &params, bc, omega).unwrap()).collect();

    let residual = |h: f64| {
        let mesh = Arc::new(generate_triangular(&Rect::subdomain(), h).unwrap());
        let us: Vec<_> = fields.iter().map(|u| interpolate_to_mesh(u, &mesh).unwrap()).collect();
        let loads = us.iter().map(|u| Some(u.scaled(omega * omega))).collect();
        let data = DataSet::new(us, loads).unwrap();
        let ef = expanded_form_discrete(&data, &basis).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for t in 0..mesh.n_triangles() {
            let x = mesh.barycenter(t);
            let f = (ef.f)(x);
            let r = ef.b.eval(x).dot_last(&mu0) - &f;
            num += mesh.area(t) * r.norm_squared();
            den += mesh.area(t) * f.norm_squared();
        }
        (num / den).sqrt()
    };
    let (coarse, fine) = (residual(0.1), residual(0.05));
    assert!(fine < coarse, "{coarse} → {fine}");
    assert!(fine < 0.5, "{fine}");
}
