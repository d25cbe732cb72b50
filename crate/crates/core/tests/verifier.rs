mod common;

use common::*;
use rand::Rng;

use plate_channel::linalg::eigen;
use plate_channel::spectral::{build_abc, build_generator};
use plate_channel::verifier::{
    assembly_residual, assembly_residual_of, boundary_flux_residual, boundary_flux_residual_simpson,
    corrupted_generator, curved_surfaces, divergence_residual, integrate_adaptive, integrate_simpson,
    recover_potentials, run_battery, ManufacturedPotential, StaticSurfacePair, Surface, ASSEMBLY_TOL,
    CURVED_FLUX_TOL, DIVERGENCE_TOL, FLAT_FLUX_TOL, FLUX_X0,
};
use plate_channel::{ChannelConfig, Error};

use ManufacturedPotential::*;

const HARMONIC: [ManufacturedPotential; 5] = [Constant(2.0), SaddleXY, ProductXY, GaussRe, GaussIm];

fn laplacian(p: &ManufacturedPotential, x: f64, y: f64, h: f64) -> f64 {
    // fourth-order five-point second differences in each direction
    let d2 = |g: &dyn Fn(f64) -> f64| (-g(2.0 * h) + 16.0 * g(h) - 30.0 * g(0.0) + 16.0 * g(-h) - g(-2.0 * h)) / (12.0 * h * h);
    d2(&|s| p.value(x + s, y)) + d2(&|s| p.value(x, y + s))
}

#[test]
fn manufactured_potentials_are_harmonic() {
    let mut r = rng(41);
    for p in HARMONIC {
        for _ in 0..50 {
            let (x, y) = (r.random_range(-3.0..3.0), r.random_range(-0.5..1.5));
            assert!(laplacian(&p, x, y, 2e-3).abs() <= 1e-8, "{p:?} at ({x}, {y})");
        }
    }
    assert!((laplacian(&SquareX, 0.3, 0.2, 2e-3) - 2.0).abs() < 1e-8);
}

#[test]
fn gradients_match_finite_differences() {
    let h = 1e-5;
    for p in HARMONIC.iter().chain([SquareX].iter()) {
        for &(x, y) in &[(0.3, 0.1), (-1.2, 0.7), (2.0, -0.4)] {
            let (gx, gy) = p.grad(x, y);
            let fx = (p.value(x + h, y) - p.value(x - h, y)) / (2.0 * h);
            let fy = (p.value(x, y + h) - p.value(x, y - h)) / (2.0 * h);
            assert!((gx - fx).abs() < 1e-8 && (gy - fy).abs() < 1e-8, "{p:?}");
        }
    }
}

#[test]
fn decay_certificate_holds_outside_the_window() {
    for p in [GaussRe, GaussIm] {
        let bound = p.decay_bound(FLUX_X0, 1.5).unwrap();
        assert!(bound < 1e-12);
        for x in [FLUX_X0, 9.0, 12.0] {
            let (gx, gy) = p.grad(x, 1.5);
            assert!(p.value(x, 1.5).abs() + gx.hypot(gy) <= bound);
        }
    }
    assert!(SaddleXY.decay_bound(FLUX_X0, 1.0).is_none());
}

#[test]
fn divergence_identity_for_polynomials() {
    let r = divergence_residual(&SaddleXY, &ProductXY, 0.4, -0.3, 1e-4);
    assert!(r <= DIVERGENCE_TOL, "{r:e}");
}

#[test]
fn divergence_identity_for_gaussians() {
    let mut r = rng(42);
    for _ in 0..40 {
        let (x, y) = (r.random_range(-3.0..3.0), r.random_range(0.0..1.0));
        for (u, v) in [(GaussRe, GaussRe), (GaussRe, GaussIm), (GaussIm, SaddleXY)] {
            assert!(divergence_residual(&u, &v, x, y, 1e-3) <= DIVERGENCE_TOL);
        }
    }
}

#[test]
fn divergence_identity_needs_harmonicity() {
    // with v = x^2 the left side is u_y times the Laplacian of v, i.e. 2 u_y = 2 x for u = x y
    for &(x, y) in &[(0.7, 0.3), (-1.5, 0.9)] {
        let r = divergence_residual(&ProductXY, &SquareX, x, y, 1e-3);
        assert!((r - 2.0 * f64::abs(x)).abs() < 1e-6);
    }
}

#[test]
fn surfaces_must_be_separated() {
    assert!(StaticSurfacePair::flat(1.0, 0.5).is_err());
    assert!(StaticSurfacePair::new(Surface::Sech { base: 0.0, amp: 1.5 }, Surface::Flat(1.0)).is_err());
    assert!(StaticSurfacePair::new(Surface::Sech { base: 0.0, amp: 0.2 }, Surface::Flat(1.0)).is_ok());
}

#[test]
fn constant_potential_has_no_flux() {
    let s = StaticSurfacePair::flat(0.0, 1.0).unwrap();
    for k in [0.5, 1.0, 3.0] {
        let f = boundary_flux_residual(&Constant(3.5), &s, k, 1.0).unwrap();
        assert_eq!(f.absolute, 0.0);
    }
}

#[test]
fn flux_identity_on_flat_surfaces() {
    let s = StaticSurfacePair::flat(0.0, 1.0).unwrap();
    for p in [GaussRe, GaussIm] {
        for k in [0.5, 1.0, 3.0] {
            for sign in [1.0, -1.0] {
                let f = boundary_flux_residual(&p, &s, k, sign).unwrap();
                assert!(f.relative <= FLAT_FLUX_TOL, "{p:?} k={k} sign={sign}: {:e}", f.relative);
                assert!(f.scale > 0.0);
            }
        }
    }
}

#[test]
fn flux_identity_on_curved_surfaces() {
    let s = curved_surfaces();
    for p in [GaussRe, GaussIm] {
        for k in [0.5, 1.0, 3.0] {
            for sign in [1.0, -1.0] {
                let f = boundary_flux_residual(&p, &s, k, sign).unwrap();
                assert!(f.relative <= CURVED_FLUX_TOL, "{p:?} k={k} sign={sign}: {:e}", f.relative);
            }
        }
    }
}

#[test]
fn flux_identity_needs_harmonicity() {
    let s = curved_surfaces();
    let good = boundary_flux_residual(&GaussRe, &s, 1.0, 1.0).unwrap().relative;
    let bad = boundary_flux_residual(&SquareX, &s, 1.0, 1.0).unwrap().relative;
    assert!(bad > 1e4 * good.max(1e-16), "good {good:e} bad {bad:e}");
}

#[test]
fn simpson_residual_converges_at_least_at_fourth_order() {
    // the integrand and its derivatives vanish at both ends, so the endpoint
    // error terms drop out and convergence is faster than the rule's order
    let s = curved_surfaces();
    let sizes = [32usize, 48, 64, 96, 128, 192];
    for p in [GaussRe, GaussIm] {
        for k in [0.5, 3.0] {
            let r: Vec<f64> = sizes.iter().map(|&n| boundary_flux_residual_simpson(&p, &s, k, -1.0, n)).collect();
            for i in 1..sizes.len() {
                if r[i] > 1e-11 {
                    let refinement = sizes[i] as f64 / sizes[i - 1] as f64;
                    assert!(r[i - 1] / r[i] >= refinement.powf(3.9), "{p:?} k={k}: residuals {r:?}");
                }
            }
            assert!(r[sizes.len() - 1] < 1e-10, "{p:?} k={k}: residuals {r:?}");
        }
    }
}

#[test]
fn adaptive_quadrature_of_a_gaussian() {
    let i = integrate_adaptive(|x| C::new((-x * x).exp(), 0.0), -FLUX_X0, FLUX_X0, 1e-13, 1000).unwrap();
    assert!((i.value.re - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    let s = integrate_simpson(|x| C::new((-x * x).exp(), 0.0), -FLUX_X0, FLUX_X0, 400);
    assert!((s.re - std::f64::consts::PI.sqrt()).abs() < 1e-9);
}

#[test]
fn adaptive_quadrature_reports_exhausted_budget() {
    let r = integrate_adaptive(|x| C::new((200.0 * x).sin().abs(), 0.0), 0.0, 10.0, 1e-14, 4);
    assert!(matches!(r, Err(Error::QuadratureBudgetExceeded { budget: 4 })));
}

#[test]
fn still_single_plate_closed_form_mode() {
    let c = ChannelConfig::uniform(1, 1.0, vec![0.0, 0.0]).validate().unwrap();
    assert!(assembly_residual(&c, 1.0).unwrap() <= ASSEMBLY_TOL);
    // lambda = i k^2 / sqrt(A) with eta = 1, pi = lambda
    let a = build_abc(&c, 1.0).unwrap().a.diag()[0];
    let lambda = C::new(0.0, 1.0 / a.sqrt());
    let xi = recover_potentials(&c, 1.0, &[C::new(1.0, 0.0)], &[lambda]).unwrap();
    let r = plate_channel::verifier::bernoulli_residual(&c, 1.0, lambda, &[C::new(1.0, 0.0)], &[lambda], &xi);
    assert!(r <= ASSEMBLY_TOL);
}

#[test]
fn figure_two_modes_satisfy_the_linear_equations() {
    let c = ChannelConfig::uniform(6, 1.0, vec![0.1; 7]).validate().unwrap();
    for k in [-0.3, 0.3, 2.0] {
        assert!(assembly_residual(&c, k).unwrap() <= ASSEMBLY_TOL);
    }
}

#[test]
fn random_configurations_satisfy_the_linear_equations() {
    let mut r = rng(43);
    for c in battery(44, 30) {
        let k = random_k(&mut r, 0.05, 6.0);
        let res = assembly_residual(&c, k).unwrap();
        assert!(res <= ASSEMBLY_TOL, "n={} k={k}: {res:e}", c.n());
    }
}

#[test]
fn zero_data_gives_zero_potentials() {
    let c = ChannelConfig::uniform(3, 1.5, vec![0.2, -0.1, 0.4, 0.0]).validate().unwrap();
    let z = vec![C::new(0.0, 0.0); 3];
    let xi = recover_potentials(&c, 0.7, &z, &z).unwrap();
    assert!(xi.plus.iter().chain(&xi.minus).all(|v| v.norm() == 0.0));
    assert!(matches!(recover_potentials(&c, 0.0, &z, &z), Err(Error::ZeroWavenumber)));
}

#[test]
fn corrupted_generators_are_detected() {
    let c = ChannelConfig::uniform(6, 1.0, vec![0.1; 7]).validate().unwrap();
    let pristine = assembly_residual_of(&c, &build_generator(&c, 0.3).unwrap()).unwrap();
    for plate in [0, 2, 5] {
        let bad = assembly_residual_of(&c, &corrupted_generator(&c, 0.3, plate, false).unwrap()).unwrap();
        assert!(bad > 1e-2, "plate {plate}: {bad:e}");
        assert!(bad > 1e4 * pristine);
    }
}

#[test]
fn wrong_eigenvalue_is_detected() {
    let c = ChannelConfig::uniform(2, 1.0, vec![0.2, 0.0, -0.2]).validate().unwrap();
    let g = build_generator(&c, 0.8).unwrap();
    let e = eigen(&g.m).unwrap();
    let col = e.vectors.column(0);
    let eta = [col[0], col[1]];
    let pi = [col[2], col[3]];
    let xi = recover_potentials(&c, 0.8, &eta, &pi).unwrap();
    let right = plate_channel::verifier::bernoulli_residual(&c, 0.8, e.values[0], &eta, &pi, &xi);
    let wrong = plate_channel::verifier::bernoulli_residual(&c, 0.8, e.values[0] * 1.01, &eta, &pi, &xi);
    assert!(right <= ASSEMBLY_TOL);
    assert!(wrong > 1e4 * right.max(1e-16));
}

#[test]
fn battery_passes_on_the_pristine_build() {
    let cases = run_battery(7, 8);
    assert!(!cases.is_empty());
    let failed: Vec<_> = cases.iter().filter(|c| !c.pass).collect();
    assert!(failed.is_empty(), "{failed:?}");
    assert!(cases.iter().any(|c| c.id.contains("corrupt")));
}
