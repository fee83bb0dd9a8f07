use degpot::density::{SpaceTimeDensity, SpatialProfile, TimeFactor, VolumeDensity};
use degpot::potentials::{PotentialField, PotentialKind, Resolution};
use degpot::trace::{
    boundary_normal_derivative, representation_identity_check, trace_residual, verify_uniqueness, TraceFunctional,
};
use nalgebra::DVector;
use degpot::{BoundaryGeometry, Error, TimeCoefficient};

fn circle() -> BoundaryGeometry {
    BoundaryGeometry::circle([0.0, 0.0], 1.0).unwrap()
}

fn ellipse() -> BoundaryGeometry {
    BoundaryGeometry::ellipse([0.0, 0.0], [1.3, 0.8]).unwrap()
}

fn poisson(c: &TimeCoefficient, g: &BoundaryGeometry, profile: SpatialProfile) -> PotentialField {
    PotentialField::new(
        PotentialKind::P,
        c.clone(),
        g.clone(),
        SpaceTimeDensity::Initial(profile),
        Resolution::default(),
    )
    .unwrap()
}

fn volume(c: &TimeCoefficient, g: &BoundaryGeometry, f: VolumeDensity) -> PotentialField {
    PotentialField::new(
        PotentialKind::V,
        c.clone(),
        g.clone(),
        SpaceTimeDensity::Volume(f),
        Resolution::default(),
    )
    .unwrap()
}

/// A source whose potential does not vanish on the boundary; the time factor is `a(t)`, so
/// the potential is smooth in `a1(t)`.
fn spreading_source(time: TimeFactor) -> VolumeDensity {
    VolumeDensity::Separable {
        profile: SpatialProfile::bump(0.6, [0.1, 0.0, 0.0]),
        time,
    }
}

#[test]
fn normal_derivative_matches_finite_differences() {
    let g = circle();
    let c = TimeCoefficient::constant(1.0, 1.0).unwrap();
    let fields = [
        volume(&c, &g, spreading_source(TimeFactor::One)),
        poisson(&c, &g, SpatialProfile::bump(0.6, [0.1, 0.0, 0.0])),
    ];
    for u in &fields {
        for (s0, t) in [(0.3, 0.4), (2.0, 1.0)] {
            let d = boundary_normal_derivative(u, s0, t).unwrap();
            let node = g.boundary_point(s0);
            let at = |h: f64| {
                let x = [node.point[0] + h * node.normal[0], node.point[1] + h * node.normal[1], 0.0];
                u.eval(&x, t).unwrap()
            };
            // fourth-order central differences
            let h = 1e-2;
            let fd = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
            assert!((d - fd).abs() <= 1e-5 * d.abs(), "{:?} s0={s0}: {d} vs {fd}", u.kind());
        }
    }
}

#[test]
fn normal_derivative_symmetry_and_small_time() {
    let g = circle();
    let c = TimeCoefficient::constant(1.0, 1.0).unwrap();
    let u = volume(
        &c,
        &g,
        VolumeDensity::Separable {
            profile: SpatialProfile::bump(0.5, [0.0; 3]),
            time: TimeFactor::One,
        },
    );
    let values: Vec<f64> = (0..7)
        .map(|k| boundary_normal_derivative(&u, 0.9 * k as f64, 0.6).unwrap())
        .collect();
    let spread = values.iter().cloned().fold(f64::MIN, f64::max) - values.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread <= 1e-10, "{values:?}");
    assert!(values[0] < 0.0);
    let mut last = f64::INFINITY;
    // margin 0.5: the kernel across it is at most e^{-1/(16t)}
    for k in 1..13 {
        let t = 0.5f64.powi(k);
        let d = boundary_normal_derivative(&u, 0.0, t).unwrap().abs();
        assert!(d <= last);
        last = d;
    }
    assert!(last < 1e-30);
}

#[test]
fn trace_functional_rejects_layer_potentials() {
    let c = TimeCoefficient::constant(1.0, 1.0).unwrap();
    let s = PotentialField::new(
        PotentialKind::S,
        c,
        circle(),
        SpaceTimeDensity::Boundary(degpot::density::BoundaryDensity::tau_cos()),
        Resolution::default(),
    )
    .unwrap();
    assert!(matches!(trace_residual(&s, 16, 8), Err(Error::UnsupportedKind(_))));
}

fn sup_ladder(u: &PotentialField, rungs: &[(usize, usize)]) -> (Vec<f64>, f64) {
    let mut sups = Vec::new();
    let mut scale = 0.0;
    for &(m, mt) in rungs {
        let report = trace_residual(u, m, mt).unwrap();
        assert_eq!(report.points.len(), m * mt);
        scale = report.scale;
        sups.push(report.sup_residual);
    }
    (sups, scale)
}

#[test]
fn poisson_residual_converges() {
    let c = TimeCoefficient::constant(1.0, 1.0).unwrap();
    for g in [circle(), ellipse()] {
        let u = poisson(&c, &g, SpatialProfile::gaussian(0.004, [0.0; 3]));
        let (sups, scale) = sup_ladder(&u, &[(32, 16), (64, 32), (128, 64)]);
        println!("{sups:?} scale {scale:.3e}");
        assert_eq!(scale, 1.0);
        assert!(sups.iter().all(|&r| r <= 1e-3 * scale));
        assert!(sups.windows(2).all(|w| w[0] / w[1] >= 1.5));
    }
}

#[test]
fn volume_residual_converges() {
    // boundary values of order 1e-2 and a nonzero normal derivative
    let c = TimeCoefficient::constant(1.0, 1.0).unwrap();
    let u = volume(&c, &circle(), spreading_source(TimeFactor::One));
    let (sups, scale) = sup_ladder(&u, &[(16, 8), (32, 16), (64, 32)]);
    println!("{sups:?} scale {scale:.3e}");
    assert!(sups[2] <= 1e-3 * scale);
    assert!(sups.windows(2).all(|w| w[0] / w[1] >= 1.5));
}

#[test]
fn zero_initial_data_has_zero_residual() {
    let u = poisson(
        &TimeCoefficient::power(2.0, 1.0).unwrap(),
        &ellipse(),
        SpatialProfile::Gaussian {
            sigma: 0.004,
            center: [0.0; 3],
            amplitude: 0.0,
        },
    );
    let report = trace_residual(&u, 16, 8).unwrap();
    assert!(report.points.iter().all(|p| p.residual == 0.0));
}

#[test]
fn functional_is_linear() {
    let c = TimeCoefficient::power(2.0, 1.0).unwrap();
    let f = TraceFunctional::new(&ellipse(), &c, 16, 6).unwrap();
    let mut seed = 0x2545f4914f6cdd1du64;
    let mut next = move || {
        seed ^= seed << 13;
        seed ^= seed >> 7;
        seed ^= seed << 17;
        (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut draw = |levels: usize| -> Vec<DVector<f64>> { (0..levels).map(|_| DVector::from_fn(16, |_, _| next())).collect() };
    let (u1, n1, m1) = (draw(7), draw(7), draw(6));
    let (u2, n2, m2) = (draw(7), draw(7), draw(6));
    let comb = |a: &[DVector<f64>], b: &[DVector<f64>]| -> Vec<DVector<f64>> {
        a.iter().zip(b).map(|(x, y)| x * 2.0 - y * 0.5).collect()
    };
    let b1 = f.apply(&u1, &n1, &m1).unwrap();
    let b2 = f.apply(&u2, &n2, &m2).unwrap();
    let b = f.apply(&comb(&u1, &u2), &comb(&n1, &n2), &comb(&m1, &m2)).unwrap();
    for ((x, y), z) in b1.iter().zip(&b2).zip(&b) {
        assert!((z - (x * 2.0 - y * 0.5)).amax() <= 1e-12);
    }
    assert!(f.apply(&u1, &n1, &u1).is_err());
}

#[test]
fn representation_identity() {
    let g = circle();
    let c = TimeCoefficient::constant(1.0, 1.0).unwrap();
    let res = Resolution {
        m_space: 32,
        m_time: 16,
        ..Resolution::default()
    };
    let x = [0.1, 0.2, 0.0];
    let t = 0.7;
    let p = poisson(&c, &g, SpatialProfile::gaussian(0.005, [0.0; 3]));
    let r = representation_identity_check(&p, &x, t, &res).unwrap();
    println!("P: {r:?}");
    let [j1, j2, j3, j4, j5] = r.terms;
    assert!((j1 - j2).abs() <= 1e-4 && (j3 - j4).abs() <= 1e-4 && j5.abs() <= 1e-4, "{r:?}");
    assert!((j1 - r.u).abs() <= 1e-4);

    let f = VolumeDensity::Manufactured {
        profile: SpatialProfile::bump(0.6, [0.1, -0.05, 0.0]),
        coefficient: c.clone(),
    };
    let v = volume(&c, &g, f.clone());
    let r = representation_identity_check(&v, &x, t, &res).unwrap();
    println!("V: {r:?}");
    let [i1, i2, i3, i4, i5] = r.terms;
    let exact = f.manufactured_solution(&x, t).unwrap();
    assert!((i1 - exact).abs() <= 1e-4 && i2.abs() <= 1e-12, "{r:?}");
    assert!((i3 - i4).abs() <= 1e-4 && i5.abs() <= 1e-4);
}

#[test]
fn homogeneous_problem_has_only_the_zero_solution() {
    let res = Resolution {
        m_space: 32,
        m_time: 32,
        ..Resolution::default()
    };
    for (g, c) in [
        (circle(), TimeCoefficient::constant(1.0, 1.0).unwrap()),
        (circle(), TimeCoefficient::power(2.0, 1.0).unwrap()),
        (ellipse(), TimeCoefficient::constant(1.0, 1.0).unwrap()),
    ] {
        let report = verify_uniqueness(&g, &c, &res, 0.75).unwrap();
        assert!(report.omega_sup <= 1e-10 && report.probes > 0);
        assert!(report.diagonal.smallest_singular_value > 0.0);
    }
}
