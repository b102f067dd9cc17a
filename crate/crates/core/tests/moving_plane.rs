use serrin_core::geometry::SpaceForm;
use serrin_core::grid::{howard_solve, BoundaryMode, GridDomain, GridField, Shape, SolverConfig};
use serrin_core::movingplane::{find_critical_s_in, reflected_field, sweep_both, w_field, Situation, SweepDirection};
use serrin_core::pucci::{Extremal, PucciParams};
use serrin_core::radial::AffineSource;

fn euclid_disc(h: f64) -> GridDomain {
    GridDomain::from_shape(
        SpaceForm::euclidean(2).unwrap(),
        Shape::Ball { center: [0.0, 0.0], radius: 1.0 },
        h,
        3,
        BoundaryMode::CutCell,
    )
    .unwrap()
}

fn smooth(x: [f64; 2]) -> f64 {
    (3.0 * x[0]).sin() + x[1] * x[1]
}

/// Max error of the reflected values at a plane halfway between lattice
/// lines, where every reflected point needs interpolation.
fn half_offset_error(h: f64) -> f64 {
    let dom = euclid_disc(h);
    let u = GridField::from_fn(&dom, smooth);
    let s = 0.25 * h;
    let cap = reflected_field(&u, &dom, s).unwrap();
    let mut err: f64 = 0.0;
    for ((&id, &v), &flag) in cap.nodes.iter().zip(&cap.values).zip(&cap.flagged) {
        if !flag {
            let x = dom.coords(id);
            err = err.max((v - smooth([2.0 * s - x[0], x[1]])).abs());
        }
    }
    err
}

#[test]
fn reflection_off_lattice_is_second_order() {
    let (e1, e2) = (half_offset_error(1.0 / 16.0), half_offset_error(1.0 / 32.0));
    // linear interpolation at a half offset: error ≤ h² max|u₁₁| / 8
    assert!(e1 <= 9.0 / 8.0 / 256.0 + 1e-12, "{e1}");
    assert!(e1 / e2 > 3.5, "ratio {}", e1 / e2);
}

#[test]
fn even_field_has_zero_w_and_odd_field_doubles() {
    let dom = euclid_disc(1.0 / 32.0);
    let even = GridField::from_fn(&dom, |x| (1.0 - x[0] * x[0] - x[1] * x[1]) * (2.0 + x[1]));
    let w = w_field(&even, &dom, 0.0).unwrap();
    assert!(!w.is_empty());
    assert_eq!(w.sup_abs(), 0.0);

    let odd = GridField::from_fn(&dom, |x| x[0] * (1.0 + x[1] * x[1]));
    let w = w_field(&odd, &dom, 0.0).unwrap();
    for (&id, &v) in w.nodes.iter().zip(&w.values) {
        assert!((v + 2.0 * odd.get(id)).abs() < 1e-15);
    }
}

#[test]
fn reflection_about_a_lattice_plane_is_exact() {
    let dom = euclid_disc(1.0 / 16.0);
    let u = GridField::from_fn(&dom, smooth);
    let s = 2.0 / 16.0;
    let cap = reflected_field(&u, &dom, s).unwrap();
    for ((&id, &v), &flag) in cap.nodes.iter().zip(&cap.values).zip(&cap.flagged) {
        if !flag {
            let x = dom.coords(id);
            // the reflected point is a node, so no interpolation error
            assert!((v - smooth([2.0 * s - x[0], x[1]])).abs() < 1e-14);
        }
    }
}

#[test]
fn w_is_antisymmetric_across_the_plane() {
    // u and its mirror image give opposite w at s = 0
    let dom = euclid_disc(1.0 / 32.0);
    let u = GridField::from_fn(&dom, smooth);
    let mirrored = GridField::from_fn(&dom, |x| smooth([-x[0], x[1]]));
    let a = w_field(&u, &dom, 0.0).unwrap();
    let b = w_field(&mirrored, &dom, 0.0).unwrap();
    assert_eq!(a.nodes, b.nodes);
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x + y).abs() < 1e-14);
    }
}

#[test]
fn solved_ball_is_symmetric_both_ways() {
    let dom = GridDomain::from_shape(
        SpaceForm::hyperbolic(2).unwrap(),
        Shape::Ball { center: [0.0, 1.0], radius: 0.5 },
        1.0 / 32.0,
        3,
        BoundaryMode::CutCell,
    )
    .unwrap();
    let p = PucciParams::new(1.0, 1.1, 0.0).unwrap();
    let sol = howard_solve(&dom, &p, AffineSource::constant(1.0), Extremal::Minus, &SolverConfig::default()).unwrap();
    let tol = (5e-3 * sol.field.sup_interior(&dom)).max(10.0 * dom.h() * dom.h());
    let [plus, minus] = sweep_both(&sol.field, &dom, tol).unwrap();
    for r in [&plus, &minus] {
        assert!(r.symmetric, "{r:?}");
        assert!(r.s_star.abs() < 1e-12);
        assert!(matches!(r.situation, Situation::Corner | Situation::Tangency));
    }
    assert_eq!(plus.direction, SweepDirection::PlusE1);
    assert_eq!(minus.direction, SweepDirection::MinusE1);
}

#[test]
fn shifted_plane_floor_stops_early() {
    let dom = euclid_disc(1.0 / 16.0);
    let u = GridField::from_fn(&dom, |x| 1.0 - x[0] * x[0] - x[1] * x[1]);
    let r = find_critical_s_in(&u, &dom, 1e-3, SweepDirection::PlusE1, Some(0.5)).unwrap();
    assert_eq!(r.situation, Situation::Exhausted, "{r:?}");
    assert!((r.s_star - 0.5).abs() < 1e-12);
    // the cap is reflected onto larger values, so w is positive there
    assert!(r.w_sup_at_star > r.tol && !r.symmetric);
}
