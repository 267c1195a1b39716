use std::f64::consts::PI;

use proptest::prelude::*;
use relay_outage::interference::{
    laplace_joint, laplace_marginal, pgfl_joint_oracle, JointTransformArgs, QuadratureSpec,
};
use relay_outage::model::{LinkGeometry, NetworkModel, Point};
use relay_outage::quad::{integrate_to_infinity, Tolerance};

fn quad() -> QuadratureSpec {
    QuadratureSpec::default()
}

#[test]
fn swapping_the_points_swaps_the_arguments() {
    let n = NetworkModel::new(1e-3, 4.0).unwrap();
    let (a, b) = (Point::new(10.0, 0.0), Point::new(3.0, 4.0));
    let x = laplace_joint(&JointTransformArgs::at_points(50.0, 800.0, a, b, &n), &quad()).unwrap();
    let y = laplace_joint(&JointTransformArgs::at_points(800.0, 50.0, b, a, &n), &quad()).unwrap();
    assert!((x / y - 1.0).abs() < 1e-9, "{x} {y}");
}

// Independent fades towards each receiver: with both at one point the
// exponent is a single radial integral.
#[test]
fn coincident_points_radial_integral() {
    let alpha = 3.0;
    let n = NetworkModel::new(1e-3, alpha).unwrap();
    let (w1, w2) = (40.0, 60.0);
    let exponent = integrate_to_infinity(
        |r: f64| {
            let (a, b) = (w1 * r.powf(-alpha), w2 * r.powf(-alpha));
            2.0 * PI * r * (a + b + a * b) / ((1.0 + a) * (1.0 + b))
        },
        &[0.0, 1.0, 3.0, 10.0],
        Tolerance::relative(1e-12),
        1_000_000,
    )
    .unwrap()
    .value;
    let p = Point::new(5.0, 5.0);
    let joint = laplace_joint(&JointTransformArgs::at_points(w1, w2, p, p, &n), &quad()).unwrap();
    let expected = (-1e-3 * exponent).exp();
    assert!((joint / expected - 1.0).abs() < 1e-8, "{joint} {expected}");
}

#[test]
fn distant_points_decouple() {
    let n = NetworkModel::new(1e-3, 4.0).unwrap();
    let joint = laplace_joint(
        &JointTransformArgs::at_points(100.0, 100.0, Point::ORIGIN, Point::new(1e5, 0.0), &n),
        &quad(),
    )
    .unwrap();
    let product = laplace_marginal(100.0, &n).unwrap().powi(2);
    assert!((joint / product - 1.0).abs() < 1e-6);
}

#[test]
fn density_scales_the_exponent() {
    let g = LinkGeometry::new(10.0, 0.6, 1.0, 4.0).unwrap();
    let n1 = NetworkModel::new(1e-4, 4.0).unwrap();
    let n2 = NetworkModel::new(3e-4, 4.0).unwrap();
    let l1 = laplace_joint(&JointTransformArgs::new(200.0, 30.0, &g, &n1), &quad()).unwrap();
    let l2 = laplace_joint(&JointTransformArgs::new(200.0, 30.0, &g, &n2), &quad()).unwrap();
    assert!((l2.ln() / l1.ln() - 3.0).abs() < 1e-7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn joint_agrees_with_oracle_and_sandwich(
        lw1 in -1.0f64..4.0,
        lw2 in -1.0f64..4.0,
        k in 0.05f64..1.5,
        theta in 0.0f64..std::f64::consts::PI,
        alpha in 2.5f64..5.0,
    ) {
        let n = NetworkModel::new(1e-3, alpha).unwrap();
        let Ok(g) = LinkGeometry::new(10.0, k, theta, alpha) else { return Ok(()); };
        let (w1, w2) = (10f64.powf(lw1), 10f64.powf(lw2));
        let args = JointTransformArgs::new(w1, w2, &g, &n);
        let joint = laplace_joint(&args, &quad()).unwrap();
        let oracle = pgfl_joint_oracle(&args, &quad()).unwrap();
        prop_assert!((joint / oracle - 1.0).abs() < 1e-5, "{} vs {}", joint, oracle);
        let (m1, m2) = (laplace_marginal(w1, &n).unwrap(), laplace_marginal(w2, &n).unwrap());
        prop_assert!(joint >= m1 * m2 * (1.0 - 1e-9));
        prop_assert!(joint <= m1.min(m2) * (1.0 + 1e-9));
    }
}
