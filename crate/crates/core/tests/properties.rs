use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use grstokes::assembly::{assemble_diffusion, assemble_upwind_transport, DEFAULT_ALPHA};
use grstokes::cli::RunConfig;
use grstokes::manufactured::{eoc, make_case, CaseId};
use grstokes::mesh::{local_edge, read_mesh, write_mesh, Mesh};
use grstokes::polybasis::{quadrature, BdmBasis, Element, ScalarBasis, MAX_QUADRATURE_DEGREE};
use grstokes::spaces::{build_spaces, Variant};
use grstokes::verify::{check_m_matrix, check_upwind_identity, jittered_square, Entropy};

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn mountain_mesh() -> &'static Mesh {
    static MESH: OnceLock<Mesh> = OnceLock::new();
    MESH.get_or_init(|| CaseId::Mountain.domain().mesh(0).unwrap())
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn triangle_rules_integrate_monomials(degree in 0..=MAX_QUADRATURE_DEGREE, a in 0u32..=20, b in 0u32..=20) {
        prop_assume!((a + b) as usize <= degree);
        let rule = quadrature(Element::Triangle, degree).unwrap();
        let sum: f64 = rule.iter().map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32)).sum();
        let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
        prop_assert!((sum - exact).abs() <= 1e-14 * exact.max(1e-3), "{sum} vs {exact}");
    }

    #[test]
    fn segment_rules_integrate_monomials(degree in 0..=MAX_QUADRATURE_DEGREE, a in 0u32..=20) {
        prop_assume!(a as usize <= degree);
        let rule = quadrature(Element::Segment, degree).unwrap();
        let sum: f64 = rule.iter().map(|(p, w)| w * p[0].powi(a as i32)).sum();
        prop_assert!((sum - 1.0 / f64::from(a + 1)).abs() < 1e-14);
    }

    #[test]
    fn lagrange_basis_is_a_partition_of_unity(k in 0usize..=3, s in 0.0..1.0f64, t in 0.0..1.0f64) {
        let p = [s * (1.0 - t), t];
        let (values, grads) = ScalarBasis::lagrange(k).unwrap().eval(p);
        prop_assert!((values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let g = grads.iter().fold([0.0, 0.0], |acc, g| [acc[0] + g[0], acc[1] + g[1]]);
        prop_assert!(g[0].abs() < 1e-11 && g[1].abs() < 1e-11);
    }

    #[test]
    fn bdm_dofs_are_dual_to_the_basis(k in 1usize..=3, j in 0usize..30) {
        let basis = BdmBasis::new(k).unwrap();
        prop_assume!(j < basis.dim());
        prop_assert_eq!(basis.dim(), (k + 1) * (k + 2));
        let dofs = basis.interpolate(&|p| basis.eval(p).0[j]);
        for (i, d) in dofs.iter().enumerate() {
            let expected = if i == j { 1.0 } else { 0.0 };
            prop_assert!((d - expected).abs() < 1e-11, "dof {} of function {}: {}", i, j, d);
        }
    }

    #[test]
    fn refinement_conserves_area_and_counts(n in 2usize..=5, seed in any::<u64>()) {
        let mesh = jittered_square(n, seed).unwrap();
        let fine = mesh.uniform_refine();
        prop_assert_eq!(fine.num_cells(), 4 * mesh.num_cells());
        prop_assert_eq!(fine.num_facets(), 2 * mesh.num_facets() + 3 * mesh.num_cells());
        prop_assert!((fine.area() - 1.0).abs() < 1e-12);
        prop_assert!((0..fine.num_cells()).all(|c| fine.cell_area(c) > 0.0));
    }

    #[test]
    fn cell_normals_match_facet_normals(n in 2usize..=5, seed in any::<u64>()) {
        let mesh = jittered_square(n, seed).unwrap();
        for c in 0..mesh.num_cells() {
            let v = mesh.cell_vertices(c);
            for e in 0..3 {
                let (a, b) = local_edge(e);
                let (dx, dy) = (v[b][0] - v[a][0], v[b][1] - v[a][1]);
                let len = dx.hypot(dy);
                let outward = [dy / len, -dx / len];
                let f = mesh.cell_facets(c)[e];
                let sign = if mesh.is_left(c, e) { 1.0 } else { -1.0 };
                let nf = mesh.facet_normal(f);
                prop_assert!((sign * nf[0] - outward[0]).abs() < 1e-14 && (sign * nf[1] - outward[1]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn mesh_files_round_trip_exactly(n in 2usize..=4, seed in any::<u64>()) {
        let mesh = jittered_square(n, seed).unwrap();
        let mut buf = Vec::new();
        write_mesh(&mesh, &mut buf).unwrap();
        let back = read_mesh(buf.as_slice()).unwrap();
        prop_assert_eq!(back.vertices(), mesh.vertices());
        prop_assert_eq!(back.cells(), mesh.cells());
        prop_assert_eq!(back.num_facets(), mesh.num_facets());
        let markers = |m: &Mesh| m.boundary_facets().map(|f| (m.facets()[f], m.boundary_marker(f).map(String::from))).collect::<Vec<_>>();
        prop_assert_eq!(markers(&back), markers(&mesh));
    }

    #[test]
    fn eoc_recovers_power_laws(c in 1e-6..1e3f64, p in 0.5..5.0f64, h in 1e-3..1.0f64, ratio in 1.2..4.0f64) {
        let coarse = c * h.powf(p);
        let fine = c * (h / ratio).powf(p);
        prop_assert!((eoc(coarse, fine, h, h / ratio) - p).abs() < 1e-10);
    }

    #[test]
    fn run_configs_round_trip(
        k in 1usize..=3,
        nu in 1e-8..10.0f64,
        c_m in 1e-2..1e3f64,
        levels in proptest::collection::btree_set(0usize..6, 1..4),
        plots in any::<bool>(),
    ) {
        let text = format!(
            r#"{{"case": "nonhydro", "variants": ["full-hdg"], "orders": [{k}], "nu": [{nu:e}], "c_m": [{c_m:e}], "levels": {:?}, "emit_plots": {plots}}}"#,
            levels.iter().collect::<Vec<_>>()
        );
        let config = RunConfig::from_json(&text).unwrap();
        prop_assert_eq!(&config.nu, &vec![nu]);
        let again = RunConfig::from_json(&serde_json::to_string(&config).unwrap()).unwrap();
        prop_assert_eq!(again, config);
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn exact_solutions_satisfy_continuity(case in prop::sample::select(CaseId::ALL.to_vec()), s in 0.0..1.0f64, t in 0.0..1.0f64) {
        let mesh = mountain_mesh();
        let c = make_case(case, 1.0, 1.0, mesh);
        let x = match case.domain() {
            grstokes::manufactured::Domain::Mountain => {
                let bottom = grstokes::mesh::mountain_height(s);
                [s, bottom + t * (1.0 - bottom)]
            }
            grstokes::manufactured::Domain::UnitSquare => [s, t],
        };
        prop_assert!(c.continuity_residual(x).abs() < 1e-10);
    }

    #[test]
    fn diffusion_is_symmetric(n in 2usize..=3, seed in any::<u64>(), k in 1usize..=3, full in any::<bool>()) {
        let variant = if full { Variant::FullHdg } else { Variant::HdivHdg };
        let spaces = build_spaces(Arc::new(jittered_square(n, seed).unwrap()), k, variant).unwrap();
        let tables = spaces.tables(spaces.default_quadrature_degree()).unwrap();
        let a = assemble_diffusion(&spaces, &tables, DEFAULT_ALPHA).unwrap();
        let scale = a.entries().map(|(_, _, v)| v.abs()).fold(0.0, f64::max);
        prop_assert!(a.max_asymmetry() < 1e-13 * scale);
    }

    #[test]
    fn transport_vanishes_for_resting_fluid(n in 2usize..=4, seed in any::<u64>(), k in 1usize..=3) {
        let spaces = build_spaces(Arc::new(jittered_square(n, seed).unwrap()), k, Variant::HdivHdg).unwrap();
        let tables = spaces.tables(spaces.default_quadrature_degree()).unwrap();
        let c = assemble_upwind_transport(&spaces, &tables, &vec![0.0; spaces.num_velocity()]);
        prop_assert!(c.entries().all(|(_, _, v)| v == 0.0));
    }

    #[test]
    fn upwind_identity_holds(seed in any::<u64>(), boltzmann in any::<bool>()) {
        let phi = if boltzmann { Entropy::Boltzmann } else { Entropy::Quadratic };
        let r = check_upwind_identity(seed, phi).unwrap();
        prop_assert!(r.passed, "{:?}", r);
    }

    #[test]
    fn density_matrix_is_an_m_matrix(seed in any::<u64>()) {
        let r = check_m_matrix(seed).unwrap();
        prop_assert!(r.passed, "{:?}", r);
    }
}
