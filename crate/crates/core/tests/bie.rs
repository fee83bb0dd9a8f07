use degpot::bie::{solve_ibvp, BieSystem};
use degpot::density::{BoundaryDensity, FourierProfile, SpaceTimeDensity, TimeFactor};
use degpot::potentials::{eval_double_layer_direct, PotentialField, PotentialKind, Resolution};
use degpot::{BoundaryGeometry, Error, TimeCoefficient};
use nalgebra::DVector;
use rayon::prelude::*;

fn smooth_density() -> BoundaryDensity {
    BoundaryDensity::Separable {
        time: TimeFactor::Sine(2.0),
        angular: FourierProfile {
            cos: vec![0.3, 1.0],
            sin: vec![0.0, 0.0, 0.5],
        },
    }
}

/// `g = (-½I + D)φ*` at the system's nodes and levels, with `D` from the adaptive layer routine.
fn synthetic_data(sys: &BieSystem, c: &TimeCoefficient, g: &BoundaryGeometry, phi: &BoundaryDensity) -> Vec<DVector<f64>> {
    let field = PotentialField::new(
        PotentialKind::D,
        c.clone(),
        g.clone(),
        SpaceTimeDensity::Boundary(phi.clone()),
        Resolution {
            tolerance: 1e-10,
            ..Resolution::default()
        },
    )
    .unwrap();
    sys.times()
        .par_iter()
        .zip(sys.sigmas())
        .map(|(&t, &s)| {
            DVector::from_iterator(
                sys.m_space(),
                sys.nodes()
                    .iter()
                    .map(|n| eval_double_layer_direct(&field, n.s, t).unwrap() - 0.5 * phi.eval(n.s, t, s)),
            )
        })
        .collect()
}

fn relative_error(sys: &BieSystem, phi: &[DVector<f64>], exact: &BoundaryDensity) -> f64 {
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (k, level) in phi.iter().enumerate() {
        for (i, n) in sys.nodes().iter().enumerate() {
            let e = exact.eval(n.s, sys.times()[k], sys.sigmas()[k]);
            err = err.max((level[i] - e).abs());
            scale = scale.max(e.abs());
        }
    }
    err / scale
}

#[test]
fn synthetic_inverse_on_circle_and_ellipse() {
    let c = TimeCoefficient::constant(1.0, 1.0).unwrap();
    let phi = smooth_density();
    for g in [
        BoundaryGeometry::circle([0.0, 0.0], 1.0).unwrap(),
        BoundaryGeometry::ellipse([0.0, 0.0], [1.3, 0.8]).unwrap(),
    ] {
        let mut errors = Vec::new();
        for (m, mt) in [(16, 8), (32, 16), (64, 32)] {
            let sys = BieSystem::assemble(&g, &c, m, mt, 3.0, 0.75).unwrap();
            let data = synthetic_data(&sys, &c, &g, &phi);
            let sol = sys.solve_march(&data).unwrap();
            errors.push(relative_error(&sys, &sol, &phi));
        }
        println!("{errors:?}");
        assert!(errors[2] <= 1e-3);
        assert!(errors[0] / errors[1] >= 2.0 && errors[1] / errors[2] >= 2.0);
    }
}

#[test]
fn power_coefficient_recovery() {
    let c = TimeCoefficient::power(2.0, 1.0).unwrap();
    let g = BoundaryGeometry::circle([0.0, 0.0], 1.0).unwrap();
    // τ³ = 3a1(τ), so this density is smooth in the transformed time
    let phi = BoundaryDensity::Separable {
        time: TimeFactor::Polynomial(vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -0.5]),
        angular: FourierProfile {
            cos: vec![0.3, 1.0],
            sin: vec![0.0, 0.0, 0.5],
        },
    };
    let mut errors = Vec::new();
    for (m, mt) in [(16, 8), (32, 16)] {
        let sys = BieSystem::assemble(&g, &c, m, mt, 3.0, 0.75).unwrap();
        let data = synthetic_data(&sys, &c, &g, &phi);
        let sol = sys.solve_march(&data).unwrap();
        errors.push(relative_error(&sys, &sol, &phi));
    }
    println!("power: {errors:?}");
    assert!(errors[1] <= 1e-3 && errors[0] / errors[1] >= 2.0);
}

#[test]
fn picard_matches_march_and_zero_data_gives_zero() {
    let c = TimeCoefficient::constant(1.0, 1.0).unwrap();
    let g = BoundaryGeometry::circle([0.0, 0.0], 1.0).unwrap();
    let sys = BieSystem::assemble(&g, &c, 32, 16, 3.0, 0.75).unwrap();
    let data = sys.sample(&smooth_density()).unwrap();
    let march = sys.solve_march(&data).unwrap();
    let tol = 1e-10;
    let picard = sys.solve_picard(&data, 500, tol).unwrap();
    println!("picard iterations {}", picard.history.len());
    let diff = march
        .iter()
        .zip(&picard.phi)
        .map(|(a, b)| (a - b).amax())
        .fold(0.0, f64::max);
    assert!(diff <= 10.0 * tol, "{diff}");

    let zero = sys.sample(&BoundaryDensity::Zero).unwrap();
    let phi0 = sys.solve_march(&zero).unwrap();
    assert!(phi0.iter().all(|v| v.amax() <= 1e-10));
    let p0 = sys.solve_picard(&zero, 10, 1e-12).unwrap();
    assert_eq!(p0.history.len(), 1);
    let report = sys.diagonal_report();
    assert!(report.smallest_singular_value > 0.1, "{report:?}");
}

#[test]
fn compatibility_and_causality() {
    let c = TimeCoefficient::constant(1.0, 1.0).unwrap();
    let g = BoundaryGeometry::circle([0.0, 0.0], 1.0).unwrap();
    let sys = BieSystem::assemble(&g, &c, 16, 6, 3.0, 0.75).unwrap();
    assert!(matches!(sys.sample(&BoundaryDensity::Constant(1.0)), Err(Error::Compatibility(_))));
    let data = sys.sample(&smooth_density()).unwrap();
    let base = sys.solve_march(&data).unwrap();
    let mut perturbed = data.clone();
    perturbed[4][3] += 1.0;
    let other = sys.solve_march(&perturbed).unwrap();
    for k in 0..4 {
        assert_eq!(base[k], other[k]);
    }
    assert_ne!(base[4], other[4]);
}

#[test]
fn ibvp_boundary_trace_matches_data() {
    let c = TimeCoefficient::constant(1.0, 1.0).unwrap();
    let g = BoundaryGeometry::circle([0.0, 0.0], 1.0).unwrap();
    let data = smooth_density();
    let res = Resolution {
        m_space: 32,
        m_time: 16,
        ..Resolution::default()
    };
    let sol = solve_ibvp(&g, &c, &data, &res, 0.75).unwrap();
    let zero = solve_ibvp(&g, &c, &BoundaryDensity::Zero, &res, 0.75).unwrap();
    assert_eq!(zero.field.eval(&[0.2, 0.1, 0.0], 0.7).unwrap(), 0.0);
    // -½φ + Dφ on the boundary reproduces g at a non-node point and time
    let (s0, t) = (0.37, 0.77);
    let phi_field = &sol.field;
    let direct = eval_double_layer_direct(phi_field, s0, t).unwrap();
    let density = match phi_field.density() {
        SpaceTimeDensity::Boundary(b) => b.clone(),
        _ => unreachable!(),
    };
    let trace = direct - 0.5 * density.eval(s0, t, t);
    let expected = data.eval(s0, t, t);
    // sup of the data: 0.3 + 1 + 0.5
    assert!((trace - expected).abs() <= 1e-2 * 1.8, "{trace} vs {expected}");
}
