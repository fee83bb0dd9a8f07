use degpot::density::{BoundaryDensity, SpaceTimeDensity, SpatialProfile, TimeFactor, VolumeDensity};
use degpot::potentials::{
    double_layer_boundary_limit, eval_adjoint_double_layer_direct, eval_double_layer_direct, poisson_of_indicator,
    single_layer_gradient_limit, PotentialField, PotentialKind, Resolution, Side,
};
use degpot::{BoundaryGeometry, Error, TimeCoefficient};

fn circle() -> BoundaryGeometry {
    BoundaryGeometry::circle([0.0, 0.0], 1.0).unwrap()
}

fn field(kind: PotentialKind, c: &TimeCoefficient, g: &BoundaryGeometry, d: SpaceTimeDensity) -> PotentialField {
    PotentialField::new(kind, c.clone(), g.clone(), d, Resolution::default()).unwrap()
}

#[test]
fn manufactured_volume_potential() {
    let g = circle();
    let beta = SpatialProfile::bump(0.6, [0.1, -0.05, 0.0]);
    for c in [
        TimeCoefficient::constant(1.0, 1.0).unwrap(),
        TimeCoefficient::power(2.0, 1.0).unwrap(),
    ] {
        let f = VolumeDensity::Manufactured {
            profile: beta.clone(),
            coefficient: c.clone(),
        };
        let v = field(PotentialKind::V, &c, &g, SpaceTimeDensity::Volume(f.clone()));
        for x in [[0.1, -0.05, 0.0], [0.4, 0.2, 0.0], [-0.3, -0.3, 0.0], [0.8, 0.0, 0.0]] {
            for t in [0.3, 1.0] {
                let value = v.eval(&x, t).unwrap();
                let exact = f.manufactured_solution(&x, t).unwrap();
                assert!((value - exact).abs() <= 1e-6, "x={x:?} t={t}: {value} vs {exact}");
            }
        }
    }
}

#[test]
fn poisson_of_gaussian_matches_closed_form() {
    let g = circle();
    let sigma = 0.005;
    let phi = SpatialProfile::gaussian(sigma, [0.0; 3]);
    let c = TimeCoefficient::power(1.0, 1.0).unwrap();
    let p = field(PotentialKind::P, &c, &g, SpaceTimeDensity::Initial(phi.clone()));
    for x in [[0.0, 0.0, 0.0], [0.2, -0.1, 0.0], [0.5, 0.5, 0.0]] {
        for t in [0.0, 0.01, 0.3, 1.0] {
            let s = t * t / 2.0;
            let r2: f64 = x[0] * x[0] + x[1] * x[1];
            let exact = sigma / (sigma + s) * (-r2 / (4.0 * (sigma + s))).exp();
            let v = p.eval(&x, t).unwrap();
            assert!((v - exact).abs() <= 1e-6 * exact, "x={x:?} t={t}: {v} vs {exact}");
        }
    }
}

#[test]
fn kind_and_assumption_errors() {
    let g = circle();
    let c = TimeCoefficient::constant(1.0, 1.0).unwrap();
    let wrong = PotentialField::new(
        PotentialKind::V,
        c.clone(),
        g.clone(),
        SpaceTimeDensity::Boundary(BoundaryDensity::Zero),
        Resolution::default(),
    );
    assert!(matches!(wrong, Err(Error::KindMismatch { .. })));
    let neg = TimeCoefficient::affine(1.0, -2.0, 0.9).unwrap();
    let s = PotentialField::new(
        PotentialKind::S,
        neg,
        g,
        SpaceTimeDensity::Boundary(BoundaryDensity::tau_cos()),
        Resolution::default(),
    );
    assert!(matches!(s, Err(Error::Assumption(_))));
}

#[test]
fn zero_densities_and_initial_time() {
    let g = circle();
    let c = TimeCoefficient::constant(1.0, 1.0).unwrap();
    let s = field(PotentialKind::S, &c, &g, SpaceTimeDensity::Boundary(BoundaryDensity::Zero));
    assert_eq!(s.eval(&[0.3, 0.0, 0.0], 0.5).unwrap(), 0.0);
    let d = field(PotentialKind::D, &c, &g, SpaceTimeDensity::Boundary(BoundaryDensity::tau_cos()));
    assert_eq!(d.eval(&[0.3, 0.0, 0.0], 0.0).unwrap(), 0.0);
    let v = field(
        PotentialKind::V,
        &c,
        &g,
        SpaceTimeDensity::Volume(VolumeDensity::Separable {
            profile: SpatialProfile::bump(0.5, [0.0; 3]),
            time: TimeFactor::One,
        }),
    );
    assert_eq!(v.eval(&[0.0; 3], 0.0).unwrap(), 0.0);
}

#[test]
fn constant_density_double_layer_identity() {
    let g = circle();
    let c = TimeCoefficient::constant(1.0, 1.0).unwrap();
    let d = field(PotentialKind::D, &c, &g, SpaceTimeDensity::Boundary(BoundaryDensity::Constant(1.0)));
    let t = 0.5;
    for x in [[0.0, 0.0, 0.0], [0.5, 0.3, 0.0], [-0.9, 0.0, 0.0]] {
        let v = d.eval(&x, t).unwrap();
        let oracle = poisson_of_indicator(&g, &c, &x, t).unwrap() - 1.0;
        assert!((v - oracle).abs() <= 1e-8, "x={x:?}: {v} vs {oracle}");
    }
    let direct = eval_double_layer_direct(&d, 0.3, t).unwrap();
    let p1 = poisson_of_indicator(&g, &c, &[0.3f64.cos(), 0.3f64.sin(), 0.0], t).unwrap();
    assert!((direct - (p1 - 0.5)).abs() <= 1e-6, "{direct} vs {}", p1 - 0.5);
}

#[test]
fn jump_relations_for_smooth_density() {
    let g = circle();
    let c = TimeCoefficient::constant(1.0, 1.0).unwrap();
    let density = SpaceTimeDensity::Boundary(BoundaryDensity::tau_cos());
    let s = field(PotentialKind::S, &c, &g, density.clone());
    let d = field(PotentialKind::D, &c, &g, density);
    let t = 0.5;
    for s0 in [0.0, 1.0, 2.5] {
        let phi = t * f64::cos(s0);
        let inner = single_layer_gradient_limit(&s, s0, t, Side::Interior).unwrap();
        let outer = single_layer_gradient_limit(&s, s0, t, Side::Exterior).unwrap();
        let adjoint = eval_adjoint_double_layer_direct(&s, s0, t).unwrap();
        assert!((inner.value - outer.value - phi).abs() <= 1e-3, "{inner:?} {outer:?} {phi}");
        assert!((inner.value - adjoint - 0.5 * phi).abs() <= 1e-3);
        let limit = double_layer_boundary_limit(&d, s0, t).unwrap();
        let direct = eval_double_layer_direct(&d, s0, t).unwrap();
        assert!((limit.value - direct + 0.5 * phi).abs() <= 1e-3, "{limit:?} {direct} {phi}");
    }
}
