use std::collections::BTreeMap;

use elastic_cloak::layered::*;
use elastic_cloak::materials::*;
use elastic_cloak::mesh::{build_mesh, region, GeometrySpec, Shape};
use elastic_cloak::tensor::{Tensor3, Tensor4};
use elastic_cloak::transform::*;
use proptest::prelude::*;

fn material() -> impl Strategy<Value = IsotropicMaterial> {
    // λ may be negative down to the convexity limit λ > −μ
    (1e9..2e11_f64, -0.9..3.0_f64).prop_map(|(mu, r)| IsotropicMaterial { lambda: r * mu, mu })
}

fn symmetric() -> impl Strategy<Value = Mat2> {
    (-1.0..1.0_f64, -1.0..1.0_f64, -1.0..1.0_f64).prop_map(|(a, b, c)| [[a, b], [b, c]])
}

fn frob2(a: &Mat2) -> f64 {
    a.iter().flatten().map(|v| v * v).sum()
}

fn rel_close(a: &Tensor4, b: &Tensor4, tol: f64) -> bool {
    let scale = a.max_abs().max(b.max_abs());
    (*a - *b).max_abs() <= tol * scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn quadratic_form_within_bounds(m in material(), a in symmetric()) {
        let c = isotropic_tensor(&m, 2).unwrap();
        let (lo, hi) = form_bounds(&m, 2);
        let q = quadratic_form(&c, &a);
        let n = frob2(&a);
        prop_assert!(q >= lo * n - 1e-12 * hi * n);
        prop_assert!(q <= hi * n + 1e-12 * hi * n);
    }

    #[test]
    fn quadratic_form_expansion(m in material(), a in symmetric()) {
        let c = isotropic_tensor(&m, 2).unwrap();
        let q = quadratic_form(&c, &a);
        let tr = a[0][0] + a[1][1];
        let e = 0.5 * (2.0 * m.lambda + 2.0 * m.mu) * tr * tr
            + 4.0 * m.mu * a[0][1] * a[0][1]
            + m.mu * (a[0][0] - a[1][1]).powi(2);
        prop_assert!((q - e).abs() <= 1e-12 * (q.abs() + m.mu * frob2(&a)));
    }

    #[test]
    fn ordering_implies_form_ordering(m1 in material(), s in (1.0..4.0_f64, 1.0..4.0_f64), a in symmetric()) {
        let m2 = IsotropicMaterial { lambda: m1.lambda + (s.0 - 1.0) * m1.mu, mu: m1.mu * s.1 };
        prop_assume!(is_ordered(&m1, &m2, 2));
        let diff = isotropic_tensor(&m2, 2).unwrap() - isotropic_tensor(&m1, 2).unwrap();
        prop_assert!(quadratic_form(&diff, &a) >= -1e-12 * frob2(&a) * m2.mu);
    }

    #[test]
    fn isotropic_major_symmetry(m in material()) {
        let c = isotropic_tensor(&m, 2).unwrap();
        for i in 0..2 { for j in 0..2 { for k in 0..2 { for l in 0..2 {
            prop_assert_eq!(c.get(i, j, k, l).to_bits(), c.get(k, l, i, j).to_bits());
        }}}}
    }

    #[test]
    fn kohn_map_is_continuous(eps in 0.05..0.95_f64, theta in 0.0..std::f64::consts::TAU) {
        let m = KohnMap::new(eps).unwrap();
        let dir = [theta.cos(), theta.sin()];
        for r in [eps, 2.0] {
            let lo = m.map([dir[0] * r * (1.0 - 1e-15), dir[1] * r * (1.0 - 1e-15)]).y;
            let hi = m.map([dir[0] * r * (1.0 + 1e-15), dir[1] * r * (1.0 + 1e-15)]).y;
            prop_assert!((lo[0] - hi[0]).hypot(lo[1] - hi[1]) < 1e-12);
        }
    }

    #[test]
    fn cosserat_pushforward_composes(m in material(), j1 in prop::array::uniform4(0.5..2.0_f64), j2 in prop::array::uniform4(-0.3..0.3_f64)) {
        let a = [[j1[0], j2[0]], [j2[1], j1[1]]];
        let b = [[j1[2], j2[2]], [j2[3], j1[3]]];
        let (da, db) = (a[0][0] * a[1][1] - a[0][1] * a[1][0], b[0][0] * b[1][1] - b[0][1] * b[1][0]);
        prop_assume!(da > 0.1 && db > 0.1);
        let c = isotropic_tensor(&m, 2).unwrap();
        let ba = [
            [b[0][0] * a[0][0] + b[0][1] * a[1][0], b[0][0] * a[0][1] + b[0][1] * a[1][1]],
            [b[1][0] * a[0][0] + b[1][1] * a[1][0], b[1][0] * a[0][1] + b[1][1] * a[1][1]],
        ];
        let twice = pushforward_cosserat(&pushforward_cosserat(&c, &a, da).unwrap(), &b, db).unwrap();
        let once = pushforward_cosserat(&c, &ba, da * db).unwrap();
        prop_assert!(rel_close(&twice, &once, 1e-12));
        prop_assert!(twice.has_major_symmetry(1e-12));
    }

    #[test]
    fn ball_pulls_back_to_scaled_defect(m in material(), eps in 0.05..1.0_f64, t in 0.0..std::f64::consts::TAU, s in 0.0..0.99_f64) {
        // inside B_ε the map is y = x/ε
        let x = [s * eps * t.cos(), s * eps * t.sin()];
        let p = kohn_map(eps, x).unwrap();
        let h = KohnMap::new(eps).unwrap().second_derivatives(x);
        let c1 = isotropic_tensor(&m, 2).unwrap();
        let cos = pushforward_cosserat(&c1, &p.j, p.det).unwrap();
        prop_assert!(rel_close(&cos, &c1, 1e-12));
        let wil = pushforward_willis(&(eps * eps * c1), &p.j, &h, p.det).unwrap();
        prop_assert!(rel_close(&wil.f1, &c1, 1e-12));
        prop_assert_eq!(wil.f2.max_abs(), 0.0);
        prop_assert_eq!(wil.f4, [[0.0; 2]; 2]);
    }

    #[test]
    fn cosserat_profile_positive_on_symmetric(m in material(), eps in 0.05..1.0_f64, rp in 1.0..=2.0_f64, a in symmetric()) {
        prop_assume!(frob2(&a) > 1e-6);
        let c = cosserat_cloak_polar(eps, rp, &m).unwrap().to_tensor();
        prop_assert!(quadratic_form(&c, &a) > 0.0);
    }

    #[test]
    fn symmetrized_profile_is_symmetric_and_positive(m in material(), eps in 0.05..1.0_f64, rp in 1.0..=2.0_f64, a in symmetric()) {
        let c = symmetrize_cosserat(eps, rp, &m).unwrap().to_tensor();
        prop_assert!(c.has_major_symmetry(1e-14));
        prop_assert!(c.has_minor_symmetry(1e-14));
        prop_assume!(frob2(&a) > 1e-6);
        prop_assert!(quadratic_form(&c, &a) > 0.0);
    }

    #[test]
    fn backus_round_trip(m1 in material(), m2 in material()) {
        let spec = LaminateSpec { lam1: m1.lambda, mu1: m1.mu, lam2: m2.lambda, mu2: m2.mu };
        let target = backus_effective(&spec);
        let back = invert_backus(&target).unwrap();
        prop_assert!(back.check().is_ok());
        prop_assert!(backus_effective(&back).relative_residual(&target) < 1e-8);
    }

    #[test]
    fn backus_is_symmetric_in_phases(m1 in material(), m2 in material()) {
        let a = backus_effective(&LaminateSpec { lam1: m1.lambda, mu1: m1.mu, lam2: m2.lambda, mu2: m2.mu });
        let b = backus_effective(&LaminateSpec { lam1: m2.lambda, mu1: m2.mu, lam2: m1.lambda, mu2: m1.mu });
        prop_assert!(a.relative_residual(&b) < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn meshes_are_valid_and_deterministic(h in 0.8..2.0_f64, a in 1.0..3.0_f64, cloak in any::<bool>()) {
        let mut spec = GeometrySpec::disk(10.0, h).with_inclusion(Shape::Ellipse { a, b: 1.0 / a });
        if cloak {
            spec = GeometrySpec::disk(10.0, h).with_inclusion(Shape::Disk { r: 1.0 }).with_cloak(1.0, 2.0);
        }
        let m = build_mesh(&spec).unwrap();
        prop_assert!(m.min_area() > 1e-14 * h * h);
        prop_assert_eq!(&m, &build_mesh(&spec).unwrap());

        let mut owners: BTreeMap<(usize, usize), Vec<u32>> = BTreeMap::new();
        for (t, tri) in m.triangles.iter().enumerate() {
            for k in 0..3 {
                let (p, q) = (tri[k], tri[(k + 1) % 3]);
                owners.entry((p.min(q), p.max(q))).or_default().push(m.regions[t]);
            }
        }
        for e in &m.edges {
            let o = &owners[&(e.v[0].min(e.v[1]), e.v[0].max(e.v[1]))];
            if e.tag == elastic_cloak::mesh::boundary::OUTER {
                prop_assert_eq!(o.len(), 1);
                prop_assert_eq!(o[0], region::BACKGROUND);
            } else {
                prop_assert_eq!(o.len(), 2);
                prop_assert_ne!(o[0], o[1]);
            }
        }
    }
}

#[test]
fn minor_symmetry_breaking_at_inner_radius() {
    let m = IsotropicMaterial::steel();
    let p = cosserat_cloak_polar(0.2, 1.0, &m).unwrap();
    assert!((p.rtrt - p.rttr).abs() / m.mu >= 0.3);
}

#[test]
fn willis_polar_matches_pushforward_at_a_point() {
    let m = IsotropicMaterial::steel();
    let eps = 0.3;
    let map = KohnMap::new(eps).unwrap();
    let x = [0.7 * 0.6, 0.7 * 0.8];
    let p = map.map(x);
    let pf = pushforward_willis(&isotropic_tensor(&m, 2).unwrap(), &p.j, &map.second_derivatives(x), p.det).unwrap();
    let w = WillisTensors::from_pushforward(&pf);
    let rp = p.y[0].hypot(p.y[1]);
    let polar = willis_cloak_polar(eps, rp, &m).unwrap().to_tensors().rotate(&elastic_cloak::tensor::polar_frame(p.y[1].atan2(p.y[0])));
    assert!(rel_close(&w.c, &polar.c, 1e-12));
    let d = Tensor3::from_fn(|i, j, k| w.d.get(i, j, k) - polar.d.get(i, j, k));
    assert!(d.max_abs() <= 1e-12 * w.d.max_abs());
}
