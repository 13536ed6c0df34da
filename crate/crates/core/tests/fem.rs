use std::collections::BTreeMap;
use std::sync::Arc;

use elastic_cloak::analysis::{norm_l1_region, norm_l2_boundary_mod_rigid, norm_l2_region};
use elastic_cloak::fem::assembly::assemble_with;
use elastic_cloak::fem::*;
use elastic_cloak::materials::IsotropicMaterial;
use elastic_cloak::mesh::{boundary, build_mesh, region, GeometrySpec, Shape};
use elastic_cloak::tensor::Tensor4;
use elastic_cloak::transform::{CosseratCloak, WillisCloak, WillisTensors};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn steel() -> IsotropicMaterial {
    IsotropicMaterial::steel()
}

fn space(spec: &GeometrySpec, order: usize) -> Arc<Space> {
    Space::new(Arc::new(build_mesh(spec).unwrap()), order).unwrap()
}

fn disk(h: f64, order: usize) -> Arc<Space> {
    space(&GeometrySpec::disk(10.0, h), order)
}

fn with_inclusion(r: f64, h: f64, order: usize) -> Arc<Space> {
    space(&GeometrySpec::disk(10.0, h).with_inclusion(Shape::Disk { r }), order)
}

fn max_nodal_error(f: &Field, exact: impl Fn([f64; 2]) -> [f64; 2]) -> f64 {
    f.space
        .nodes
        .iter()
        .enumerate()
        .map(|(n, &x)| {
            let (u, e) = (f.node(n), exact(x));
            (u[0] - e[0]).abs().max((u[1] - e[1]).abs())
        })
        .fold(0.0, f64::max)
}

const A: [[f64; 2]; 2] = [[1e-3, 4e-4], [-2e-4, 5e-4]];

fn affine(x: [f64; 2]) -> [f64; 2] {
    [A[0][0] * x[0] + A[0][1] * x[1], A[1][0] * x[0] + A[1][1] * x[1]]
}

#[test]
fn patch_test_reproduces_linear_fields() {
    for order in [1, 2] {
        let s = disk(1.5, order);
        let c = CoefficientField::uniform(&steel(), &[region::BACKGROUND]);
        let u = solve(&s, &c, &BoundaryCondition::linear(A)).unwrap();
        assert!(max_nodal_error(&u, affine) < 1e-10 * 1e-2, "order {order}");
    }
}

#[test]
fn interior_residual_of_linear_field_vanishes() {
    let s = disk(1.5, 2);
    let c = CoefficientField::uniform(&steel(), &[region::BACKGROUND]);
    let sys = assemble(&s, &c).unwrap();
    let u = Field::interpolate(&s, affine);
    let r = sys.apply(&u.values);
    let boundary: std::collections::BTreeSet<usize> = s.nodes_on(boundary::OUTER).into_iter().collect();
    let mut scale = vec![0.0_f64; sys.n];
    for &(i, j, v) in &sys.entries {
        scale[i] += (v * u.values[j]).abs();
    }
    for d in 0..sys.n {
        if !boundary.contains(&(d / 2)) {
            assert!(r[d].abs() <= 1e-10 * scale[d].max(1e-300), "dof {d}");
        }
    }
}

#[test]
fn cosserat_assembly_is_symmetric() {
    let spec = GeometrySpec::disk(10.0, 1.0).with_inclusion(Shape::Disk { r: 2.0 }).with_cloak(2.0, 4.0);
    let s = space(&spec, 2);
    let cloak = CosseratCloak::new(0.2, steel(), 2.0).unwrap();
    let c = CoefficientField::uniform(&steel(), &[region::BACKGROUND, region::INCLUSION])
        .with(region::layer(0), TensorSource::Cosserat(cloak));
    let sys = assemble(&s, &c).unwrap();
    assert!(sys.symmetric);
    assert!(sys.asymmetry() < 1e-12, "{}", sys.asymmetry());
}

#[test]
fn zero_traction_gives_zero_field() {
    let s = disk(1.5, 2);
    let c = CoefficientField::uniform(&steel(), &[region::BACKGROUND]);
    let u = solve(&s, &c, &BoundaryCondition::neumann(|_| [0.0, 0.0])).unwrap();
    assert_eq!(u.max_abs(), 0.0);
}

#[test]
fn unbalanced_traction_is_rejected() {
    let s = disk(1.5, 1);
    let c = CoefficientField::uniform(&steel(), &[region::BACKGROUND]);
    assert!(solve(&s, &c, &BoundaryCondition::neumann(|_| [1e6, 0.0])).is_err());
}

#[test]
fn radial_traction_on_homogeneous_disk() {
    // u = a x with 2(λ+μ) a = t0
    let m = steel();
    let t0 = 1e9;
    let a = t0 / (2.0 * (m.lambda + m.mu));
    for order in [1, 2] {
        // the polygonal boundary sees the traction on chords, not on the circle
        let err = |h: f64| {
            let s = disk(h, order);
            let c = CoefficientField::uniform(&m, &[region::BACKGROUND]);
            let u = solve(&s, &c, &BoundaryCondition::radial_traction(t0)).unwrap();
            max_nodal_error(&u, |x| [a * x[0], a * x[1]])
        };
        let (coarse, fine) = (err(1.0), err(0.5));
        assert!(coarse < 5e-3 * a * 10.0, "order {order}: {coarse}");
        assert!(fine < 0.5 * coarse, "order {order}: {fine} vs {coarse}");
    }
}

/// Radial two-phase disk: `u_r = a1 r` in the core, `a r + b/r` outside.
struct Axisymmetric {
    core: f64,
    a1: f64,
    a: f64,
    b: f64,
}

impl Axisymmetric {
    /// Unit radial displacement at `r = 10`; `inner = None` is the cavity.
    fn new(m0: &IsotropicMaterial, inner: Option<&IsotropicMaterial>, core: f64) -> Self {
        let (k0, m) = (m0.lambda + m0.mu, m0.mu);
        let r = 10.0;
        match inner {
            None => {
                // k0 a = μ b / c²,  a R + b / R = 1
                let ratio = k0 * core * core / m;
                let a = 1.0 / (r + ratio / r);
                Axisymmetric { core, a1: 0.0, a, b: ratio * a }
            }
            Some(m1) => {
                let k1 = m1.lambda + m1.mu;
                // a1 c = a c + b / c;  k1 a1 = k0 a − μ b / c²;  a R + b/R = 1
                let mat = nalgebra::Matrix3::new(core, -core, -1.0 / core, k1, -k0, m / (core * core), 0.0, r, 1.0 / r);
                let x = mat.lu().solve(&nalgebra::Vector3::new(0.0, 0.0, 1.0)).unwrap();
                Axisymmetric { core, a1: x[0], a: x[1], b: x[2] }
            }
        }
    }

    fn radial(&self, r: f64) -> f64 {
        if r < self.core {
            self.a1 * r
        } else {
            self.a * r + self.b / r
        }
    }

    fn field(&self, x: [f64; 2]) -> [f64; 2] {
        let r = x[0].hypot(x[1]);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let ur = self.radial(r);
        [ur * x[0] / r, ur * x[1] / r]
    }
}

#[test]
fn axisymmetric_inclusion_matches_radial_oracle() {
    let (m0, m1) = (steel(), IsotropicMaterial::aluminium());
    let s = with_inclusion(1.0, 0.5, 2);
    let c = CoefficientField::inclusion(&m0, &m1, 1.0);
    let u = solve_transmission(&s, &c, &BoundaryCondition::radial_dirichlet()).unwrap();
    let oracle = Axisymmetric::new(&m0, Some(&m1), 1.0);
    let err = max_nodal_error(&u, |x| oracle.field(x));
    assert!(err < 1e-3, "{err}");
    let fine = with_inclusion(1.0, 0.25, 2);
    let u = solve_transmission(&fine, &c, &BoundaryCondition::radial_dirichlet()).unwrap();
    assert!(max_nodal_error(&u, |x| oracle.field(x)) < 0.5 * err);
}

#[test]
fn soft_distance_matches_radial_oracle() {
    let (m0, m1) = (steel(), IsotropicMaterial::aluminium());
    let eta = 1e-2;
    let s = with_inclusion(1.0, 0.3, 2);
    let bc = BoundaryCondition::radial_dirichlet();
    let bg = CoefficientField::uniform(&m0, &[region::BACKGROUND]);
    let u0 = solve_soft_limit(&s, &bg.clone().with(region::INCLUSION, TensorSource::Void), &bc).unwrap();
    let ue = solve_transmission(&s, &CoefficientField::inclusion(&m0, &m1, eta), &bc).unwrap();
    let fe = norm_l1_region(&ue, &u0, &[region::BACKGROUND]).unwrap();

    let cav = Axisymmetric::new(&m0, None, 1.0);
    let tr = Axisymmetric::new(&m0, Some(&m1.scaled(eta)), 1.0);
    // ∫ |Δu_r| 2πr dr over 1 < r < 10 by composite Simpson
    let n = 20_000;
    let h = 9.0 / n as f64;
    let f = |r: f64| (tr.radial(r) - cav.radial(r)).abs() * 2.0 * std::f64::consts::PI * r;
    let mut exact = f(1.0) + f(10.0);
    for k in 1..n {
        exact += f(1.0 + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    exact *= h / 3.0;
    assert!((fe - exact).abs() < 1e-2 * exact, "{fe} vs {exact}");
}

#[test]
fn energy_equals_boundary_work() {
    let (m0, m1) = (steel(), IsotropicMaterial::aluminium());
    let s = with_inclusion(1.5, 0.8, 2);
    let c = CoefficientField::inclusion(&m0, &m1, 1.0);
    let g: VectorFn = Arc::new(|x: [f64; 2]| {
        let th = x[1].atan2(x[0]);
        [1e8 * (2.0 * th).cos(), 5e7 * (3.0 * th).sin()]
    });
    let u = solve(&s, &c, &BoundaryCondition::Neumann(g.clone())).unwrap();
    let e = energy(&u, &c).unwrap();
    let w = boundary_work(&u, &g, boundary::OUTER);
    assert!((e - w).abs() <= 1e-8 * w.abs(), "{e} vs {w}");
}

#[test]
fn strain_outputs_of_simple_fields() {
    for order in [1, 2] {
        let s = disk(3.0, order);
        let check = |f: fn([f64; 2]) -> [f64; 2], dil: f64, sh: f64| {
            for p in strain_outputs(&Field::interpolate(&s, f)) {
                assert!((p.dilation - dil).abs() < 1e-12 && (p.shear - sh).abs() < 1e-12);
            }
        };
        check(|x| x, 1.0, 0.0);
        check(|x| [x[1], x[0]], 0.0, 1.0);
        check(|x| [-x[1], x[0]], 0.0, 0.0);
    }
}

#[test]
fn soft_limit_ignores_inclusion_coefficient() {
    let s = with_inclusion(1.0, 1.0, 2);
    let bc = BoundaryCondition::radial_dirichlet();
    let a = solve_soft_limit(&s, &CoefficientField::inclusion(&steel(), &steel(), 1.0), &bc).unwrap();
    let b = solve_soft_limit(&s, &CoefficientField::inclusion(&steel(), &steel(), 1e-7), &bc).unwrap();
    assert_eq!(a.values, b.values);
}

#[test]
fn hard_limit_radial_source_has_no_rigid_motion() {
    let s = with_inclusion(1.0, 0.8, 2);
    let bg = CoefficientField::uniform(&steel(), &[region::BACKGROUND, region::INCLUSION]);
    let bc = BoundaryCondition::radial_dirichlet();
    let (u, alpha) = solve_hard_limit(&s, &bg, &bc).unwrap();
    // zero up to the asymmetry of the unstructured mesh
    for a in alpha {
        assert!(a.abs() < 1e-6, "{alpha:?}");
    }
    let c = bg.clone().with(region::INCLUSION, TensorSource::Void);
    let flux = rigid_flux_residual(&u, &c, &bc).unwrap();
    assert!(flux.max_relative() < 1e-8, "{flux:?}");
}

#[test]
fn hard_limit_orthogonality_under_shear_source() {
    let s = space(
        &GeometrySpec::disk(10.0, 0.8).with_inclusion(Shape::Ellipse { a: 2.0, b: 0.5 }),
        2,
    );
    let bg = CoefficientField::uniform(&steel(), &[region::BACKGROUND, region::INCLUSION]);
    let bc = BoundaryCondition::dirichlet(|x| [0.3 * x[1] + 0.1, 0.05 * x[0]]);
    let (u, alpha) = solve_hard_limit(&s, &bg, &bc).unwrap();
    assert!(alpha.iter().any(|a| a.abs() > 1e-6));
    let c = bg.clone().with(region::INCLUSION, TensorSource::Void);
    assert!(rigid_flux_residual(&u, &c, &bc).unwrap().max_relative() < 1e-8);
}

#[test]
fn stiff_transmission_approaches_hard_limit() {
    let (m0, m1) = (steel(), IsotropicMaterial::aluminium());
    let s = with_inclusion(1.0, 0.6, 2);
    let bc = BoundaryCondition::radial_dirichlet();
    let bg = CoefficientField::uniform(&m0, &[region::BACKGROUND, region::INCLUSION]);
    let (hard, _) = solve_hard_limit(&s, &bg, &bc).unwrap();
    let gap = |eta: f64| {
        let u = solve_transmission(&s, &CoefficientField::inclusion(&m0, &m1, eta), &bc).unwrap();
        norm_l2_region(&u, &hard, &[region::BACKGROUND]).unwrap()
    };
    let (g5, g6) = (gap(1e5), gap(1e6));
    assert!(g6 <= 10.0 * g5, "{g6} vs {g5}");
    assert!(g6 < g5);
}

#[test]
fn zero_frequency_is_static() {
    let (m0, m1) = (steel(), IsotropicMaterial::aluminium());
    let s = with_inclusion(1.0, 1.0, 2);
    let c = CoefficientField::inclusion(&m0, &m1, 1e-2);
    let rho: BTreeMap<u32, f64> = [(region::BACKGROUND, 7850.0), (region::INCLUSION, 2700.0)].into();
    let g: VectorFn = Arc::new(|x: [f64; 2]| {
        let r = x[0].hypot(x[1]);
        [x[0] / r, x[1] / r]
    });
    let dynamic = solve_elastodynamic(&s, &c, &rho, 0.0, g.clone()).unwrap();
    let stat = solve_dirichlet(&s, &c, g).unwrap();
    assert_eq!(dynamic.values, stat.values);
}

#[test]
fn inertia_perturbs_static_field() {
    let s = disk(1.5, 2);
    let m = steel();
    let c = CoefficientField::uniform(&m, &[region::BACKGROUND]);
    let rho: BTreeMap<u32, f64> = [(region::BACKGROUND, 7850.0)].into();
    let omega: f64 = 100.0;
    let g: VectorFn = Arc::new(|x: [f64; 2]| [1e-3 * x[0], 0.0]);
    let dynamic = solve_elastodynamic(&s, &c, &rho, omega, g.clone()).unwrap();
    let stat = solve_dirichlet(&s, &c, g).unwrap();
    let diff = norm_l2_region(&dynamic, &stat, &[region::BACKGROUND]).unwrap();
    assert!(diff > 0.0);
    assert!(diff < 0.1 * norm_l2_region(&stat, &Field::zeros(&s), &[region::BACKGROUND]).unwrap());
}

#[test]
fn contrast_one_transmission_equals_homogeneous() {
    let s = with_inclusion(1.0, 1.0, 2);
    let bc = BoundaryCondition::radial_dirichlet();
    let hom = CoefficientField::uniform(&steel(), &[region::BACKGROUND, region::INCLUSION]);
    let a = solve(&s, &hom, &bc).unwrap();
    let b = solve_transmission(&s, &CoefficientField::inclusion(&steel(), &steel(), 1.0), &bc).unwrap();
    let scale = a.max_abs();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() <= 1e-10 * scale);
    }
}

#[test]
fn willis_with_elastic_part_only_matches_elastic_solve() {
    let s = with_inclusion(1.0, 1.0, 2);
    let (m0, m1) = (steel(), IsotropicMaterial::aluminium());
    let elastic = CoefficientField::inclusion(&m0, &m1, 1.0);
    let mut willis = CoefficientField::new();
    for (&tag, src) in &elastic.sources {
        willis.set(tag, TensorSource::WillisConstant(WillisTensors::elastic(src.tensor_at([0.0, 0.0]).unwrap())));
    }
    let bc = BoundaryCondition::radial_dirichlet();
    let a = solve(&s, &elastic, &bc).unwrap();
    let b = solve_willis(&s, &willis, &bc).unwrap();
    assert_eq!(b.info.factorization, Factorization::Lu);
    let scale = a.max_abs();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() <= 1e-10 * scale);
    }
}

fn cloak_geometry(h: f64, length: f64) -> GeometrySpec {
    let mut spec = GeometrySpec::disk(10.0, h)
        .with_inclusion(Shape::Disk { r: length })
        .with_cloak(length, 2.0 * length);
    spec.h_cloak = Some(0.1);
    spec
}

/// Boundary work of a radial traction on the original defect problem:
/// a disk of radius `r` with material `m1` in steel.
fn defect_work(r: f64, m1: &IsotropicMaterial, g: &VectorFn) -> f64 {
    let mut spec = GeometrySpec::disk(10.0, 0.3).with_inclusion(Shape::Disk { r });
    spec.h_inclusion = Some(r / 16.0);
    let s = space(&spec, 2);
    let c = CoefficientField::inclusion(&steel(), m1, 1.0);
    let u = solve(&s, &c, &BoundaryCondition::Neumann(g.clone())).unwrap();
    boundary_work(&u, g, boundary::OUTER)
}

fn shear_traction() -> VectorFn {
    Arc::new(|x: [f64; 2]| {
        let th = x[1].atan2(x[0]);
        let (c, s) = (th.cos(), th.sin());
        // n·T n for T = diag(1, -1) · 1e9
        [1e9 * c, -1e9 * s]
    })
}

#[test]
fn cosserat_cloak_equals_small_defect() {
    // Outside the cloak the field equals that of a defect of radius εL with
    // the ball material unchanged.
    let (eps, l) = (0.2, 2.0);
    let m1 = steel().scaled(1e2);
    let g = shear_traction();
    let s = space(&cloak_geometry(0.3, l), 2);
    let cloak = CosseratCloak::new(eps, steel(), l).unwrap();
    let c = CoefficientField::new()
        .with(region::BACKGROUND, TensorSource::isotropic(&steel()))
        .with(region::INCLUSION, TensorSource::isotropic(&m1))
        .with(region::layer(0), TensorSource::Cosserat(cloak));
    let u = solve(&s, &c, &BoundaryCondition::Neumann(g.clone())).unwrap();
    let w_cloak = boundary_work(&u, &g, boundary::OUTER);
    let w_defect = defect_work(eps * l, &m1, &g);
    let w_hom = defect_work(eps * l, &steel(), &g);
    assert!(
        (w_cloak - w_defect).abs() < 0.05 * (w_hom - w_defect).abs(),
        "cloak {w_cloak} defect {w_defect} hom {w_hom}"
    );
}

#[test]
fn willis_cloak_equals_rescaled_small_defect() {
    // Ball material C₁ behind a Willis cloak acts as ε²C₁ on radius εL.
    let (eps, l) = (0.2, 2.0);
    let m1 = steel().scaled(1e2);
    let g = shear_traction();
    let s = space(&cloak_geometry(0.3, l), 2);
    let cloak = WillisCloak::new(eps, steel(), l).unwrap();
    let c = CoefficientField::new()
        .with(region::BACKGROUND, TensorSource::isotropic(&steel()))
        .with(region::INCLUSION, TensorSource::isotropic(&m1))
        .with(region::layer(0), TensorSource::Willis(cloak));
    let u = solve_willis(&s, &c, &BoundaryCondition::Neumann(g.clone())).unwrap();
    let w_cloak = boundary_work(&u, &g, boundary::OUTER);
    let w_defect = defect_work(eps * l, &m1.scaled(eps * eps), &g);
    let w_hom = defect_work(eps * l, &steel(), &g);
    assert!(
        (w_cloak - w_defect).abs() < 0.05 * (w_hom - w_defect).abs(),
        "cloak {w_cloak} defect {w_defect} hom {w_hom}"
    );
}

#[test]
fn willis_cloak_around_matched_ball_is_invisible() {
    // C₀/ε² in the ball is the homogeneous medium before the change of variables.
    let (eps, l) = (0.3, 2.0);
    let s = space(&cloak_geometry(0.4, l), 2);
    let cloak = WillisCloak::new(eps, steel(), l).unwrap();
    let c = CoefficientField::new()
        .with(region::BACKGROUND, TensorSource::isotropic(&steel()))
        .with(region::INCLUSION, TensorSource::isotropic(&steel().scaled(1.0 / (eps * eps))))
        .with(region::layer(0), TensorSource::Willis(cloak));
    let hom = CoefficientField::uniform(&steel(), &s.mesh.region_tags());
    let bc = BoundaryCondition::radial_traction(1e9);
    let u = solve_willis(&s, &c, &bc).unwrap();
    let v = solve(&s, &hom, &bc).unwrap();
    let d = norm_l2_boundary_mod_rigid(&u, &v, boundary::OUTER).unwrap();
    let scale = norm_l2_boundary_mod_rigid(&v, &Field::zeros(&s), boundary::OUTER).unwrap();
    assert!(d < 1e-6 * scale, "{d} vs {scale}");
}

fn compliance(s: &Arc<Space>, c: &CoefficientField, g: &VectorFn, hard: bool) -> f64 {
    let bc = BoundaryCondition::Neumann(g.clone());
    let u = if hard {
        solve_hard_limit(s, c, &bc).unwrap().0
    } else {
        solve(s, c, &bc).unwrap()
    };
    boundary_work(&u, g, boundary::OUTER)
}

#[test]
fn softer_inclusions_are_more_compliant() {
    // Compliance ⟨u, g⟩ decreases from the cavity through finite contrast to the rigid limit.
    let (m0, m1) = (steel(), IsotropicMaterial::aluminium());
    let s = with_inclusion(0.5 * 2.0, 0.6, 2);
    let g = shear_traction();
    let bg = CoefficientField::uniform(&m0, &[region::BACKGROUND, region::INCLUSION]);
    let soft = compliance(&s, &bg.clone().with(region::INCLUSION, TensorSource::Void), &g, false);
    let hard = compliance(&s, &bg, &g, true);
    for eta in [1e-2, 1.0, 1e2] {
        let mid = compliance(&s, &CoefficientField::inclusion(&m0, &m1, eta), &g, false);
        assert!(soft >= mid && mid >= hard, "eta {eta}: {soft} {mid} {hard}");
    }
}

#[test]
fn stiffer_media_have_smaller_boundary_energy() {
    let s = disk(2.0, 1);
    let g = shear_traction();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let m1 = IsotropicMaterial::new(rng.gen_range(1e10..2e11), rng.gen_range(1e10..1e11)).unwrap();
        let m2 = IsotropicMaterial::new(m1.lambda * rng.gen_range(1.0..3.0), m1.mu * rng.gen_range(1.0..3.0)).unwrap();
        assert!(elastic_cloak::materials::is_ordered(&m1, &m2, 2));
        let e1 = compliance(&s, &CoefficientField::uniform(&m1, &[region::BACKGROUND]), &g, false);
        let e2 = compliance(&s, &CoefficientField::uniform(&m2, &[region::BACKGROUND]), &g, false);
        assert!(e1 >= e2, "{e1} {e2}");
    }
}

#[test]
fn missing_region_is_an_error() {
    let s = with_inclusion(1.0, 1.5, 1);
    let c = CoefficientField::uniform(&steel(), &[region::BACKGROUND]);
    assert!(assemble(&s, &c).is_err());
}

#[test]
fn non_finite_profile_is_an_error() {
    let s = disk(3.0, 1);
    let mut t = Tensor4::isotropic(1.0, 1.0);
    t.set(0, 0, 0, 0, f64::NAN);
    let c = CoefficientField::new().with(region::BACKGROUND, TensorSource::Constant(t));
    assert!(solve(&s, &c, &BoundaryCondition::radial_dirichlet()).is_err());
}

#[test]
fn parallel_and_sequential_assembly_agree() {
    let spec = GeometrySpec::disk(10.0, 0.8).with_inclusion(Shape::Disk { r: 2.0 }).with_cloak(2.0, 4.0);
    let s = space(&spec, 2);
    let cloak = CosseratCloak::new(0.3, steel(), 2.0).unwrap();
    let c = CoefficientField::uniform(&steel(), &[region::BACKGROUND, region::INCLUSION])
        .with(region::layer(0), TensorSource::Cosserat(cloak));
    let opts = Default::default();
    let one = elastic_cloak::par::with_threads(1, || assemble_with(&s, &c, &opts).unwrap());
    let two = elastic_cloak::par::with_threads(2, || assemble_with(&s, &c, &opts).unwrap());
    assert_eq!(one.entries, two.entries);
}
