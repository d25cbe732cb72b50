mod common;

use common::*;
use proptest::prelude::*;

use plate_channel::ndim::{
    build_ndim, default_directions, halton_directions, ndim_classify, ndim_generator, scan_direction,
    NdChannelConfig, ValidatedNdConfig,
};
use plate_channel::spectral::{build_abc, build_generator};
use plate_channel::stability::{geomspace, Verdict, ALPHA_TOL};
use plate_channel::{ChannelConfig, Error};

fn rotate(v: &[f64], theta: f64) -> Vec<f64> {
    let (s, c) = theta.sin_cos();
    vec![c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

fn planar_flows() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>)> {
    (1usize..=5).prop_flat_map(|n| {
        (
            prop::collection::vec(0.5f64..5.0, n + 1),
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2), n + 1),
        )
    })
}

fn nd(gaps: &[f64], flows: Vec<Vec<f64>>) -> ValidatedNdConfig {
    let mut h = vec![0.0];
    for g in gaps {
        h.push(h.last().unwrap() + g);
    }
    NdChannelConfig::new(h, flows).validate().unwrap()
}

fn max_abs_real(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

fn sheared() -> ValidatedNdConfig {
    NdChannelConfig::new(vec![0.0, 1.0, 2.0, 3.0], vec![vec![0.3, 0.0], vec![0.0, 0.0], vec![-0.3, 0.0]])
        .validate()
        .unwrap()
}

#[test]
fn zero_wavevector_is_rejected() {
    assert!(matches!(build_ndim(&sheared(), &[0.0, 0.0]), Err(Error::ZeroWavevector)));
}

#[test]
fn flow_dimension_must_be_consistent() {
    let c = NdChannelConfig::new(vec![0.0, 1.0, 2.0], vec![vec![0.1, 0.0], vec![0.2]]);
    assert!(c.validate().is_err());
    let c = NdChannelConfig::new(vec![0.0, 1.0, 2.0], vec![vec![0.1, 0.0]]);
    assert!(c.validate().is_err());
}

#[test]
fn p_is_a_of_the_wavevector_norm() {
    let c = sheared();
    let planar = ChannelConfig::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0; 3]).validate().unwrap();
    let k = [0.6, -0.8];
    let sm = build_ndim(&c, &k).unwrap();
    let a = build_abc(&planar, 1.0).unwrap().a;
    assert!(max_abs_real(&sm.p.to_dense(), &a.to_dense()) < 1e-14);
}

#[test]
fn transverse_wavevector_sees_no_flow() {
    let c = sheared();
    let sm = build_ndim(&c, &[0.0, 1.3]).unwrap();
    assert!(sm.q.to_dense().iter().all(|&v| v == 0.0));
    assert!(sm.r.to_dense().iter().all(|&v| v == 0.0));
}

#[test]
fn instability_follows_the_flow_direction() {
    let c = sheared();
    let radii = geomspace(1e-3, 10.0, 150);
    let along = scan_direction(&c, &[1.0, 0.0], &radii).unwrap();
    let across = scan_direction(&c, &[0.0, 1.0], &radii).unwrap();
    assert!(along.max_abscissa > ALPHA_TOL);
    assert!(across.max_abscissa <= ALPHA_TOL, "{:e}", across.max_abscissa);
    let r = ndim_classify(&c).unwrap();
    assert_eq!(r.verdict, Verdict::Unstable);
    assert!(r.corroborated);
}

#[test]
fn zero_flow_is_stable_in_every_direction() {
    let c = NdChannelConfig::new(vec![0.0, 1.0, 2.5, 3.0], vec![vec![0.0; 3]; 3]).validate().unwrap();
    let r = ndim_classify(&c).unwrap();
    assert_eq!(r.verdict, Verdict::Stable);
    assert!(r.max_abscissa <= ALPHA_TOL);
    assert!(r.corroborated);
}

#[test]
fn default_directions_include_axes_and_flows() {
    let c = NdChannelConfig::new(vec![0.0, 1.0, 2.0], vec![vec![0.3, 0.4], vec![0.0, 0.0]]).validate().unwrap();
    let dirs = default_directions(&c, 4);
    assert!(dirs.contains(&vec![1.0, 0.0]));
    assert!(dirs.contains(&vec![0.0, 1.0]));
    assert!(dirs.iter().any(|d| (d[0] - 0.6).abs() < 1e-15 && (d[1] - 0.8).abs() < 1e-15));
    for d in halton_directions(2, 10) {
        assert!((d[0].hypot(d[1]) - 1.0).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rotating_flows_and_wavevector_together_changes_nothing(
        (gaps, flows) in planar_flows(),
        k in prop::collection::vec(-5.0f64..5.0, 2),
        theta in 0.0f64..6.3,
    ) {
        prop_assume!(k[0].hypot(k[1]) > 1e-3);
        let base = build_ndim(&nd(&gaps, flows.clone()), &k).unwrap();
        let turned = nd(&gaps, flows.iter().map(|u| rotate(u, theta)).collect());
        let rot = build_ndim(&turned, &rotate(&k, theta)).unwrap();
        for (x, y) in [(&base.p, &rot.p), (&base.q, &rot.q), (&base.r, &rot.r)] {
            let scale = x.to_dense().abs().max().max(1.0);
            prop_assert!(max_abs_real(&x.to_dense(), &y.to_dense()) <= 1e-12 * scale);
        }
    }

    #[test]
    fn aligned_flows_reduce_to_the_planar_generator(
        seed in 0u64..500,
        s in prop_oneof![1e-3f64..20.0, -20.0f64..-1e-3],
        theta in 0.0f64..6.3,
    ) {
        let c = battery(seed, 1).pop().unwrap();
        let dir = [theta.cos(), theta.sin()];
        let lifted = NdChannelConfig::from_planar(&c, &dir).validate().unwrap();
        let g = ndim_generator(&lifted, &[s * dir[0], s * dir[1]]).unwrap().m;
        let planar = build_generator(&c, s).unwrap().m;
        prop_assert!(max_abs(&(&g - &planar)) <= 1e-11 * max_abs(&planar));
    }

    #[test]
    fn opposite_wavevectors_give_conjugate_generators(
        (gaps, flows) in planar_flows(),
        k in prop::collection::vec(-5.0f64..5.0, 2),
    ) {
        prop_assume!(k[0].hypot(k[1]) > 1e-3);
        let c = nd(&gaps, flows);
        let g = ndim_generator(&c, &k).unwrap().m;
        let h = ndim_generator(&c, &[-k[0], -k[1]]).unwrap().m;
        prop_assert!(max_abs(&(&h - &g.map(|z| z.conj()))) <= 1e-12 * max_abs(&g));
    }
}
