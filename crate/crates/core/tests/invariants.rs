use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use proptest::prelude::*;
use qfluid::container;
use qfluid::coulomb::{kernel_gradient, kernel_value};
use qfluid::hartree::{kinetic_energy, total_energy, MixedState, PhysicalParams};
use qfluid::spectral::{self, SpectralCoeffs};
use qfluid::{ComplexField, GridSpec, ScalarField};

/// Band-limited field built from up to six random modes.
fn field_from(g: GridSpec, modes: &[(i64, i64, f64, f64)]) -> ScalarField {
    ScalarField::from_fn(g, |x| {
        modes
            .iter()
            .map(|&(k1, k2, a, ph)| a * (2.0 * PI * (k1 as f64 * x[0] + k2 as f64 * x[1]) + ph).cos())
            .sum()
    })
}

fn modes() -> impl Strategy<Value = Vec<(i64, i64, f64, f64)>> {
    prop::collection::vec((-5i64..=5, -5i64..=5, -1.0f64..1.0, 0.0f64..6.3), 1..6)
}

/// `f` with its zero mode removed; `f - mean(f)` can leave a constant of
/// round-off size when the modes cancel.
fn mean_free(f: &ScalarField) -> ScalarField {
    spectral::transform(f)
        .map_modes(|k, c| if k == [0, 0, 0] { Complex64::new(0.0, 0.0) } else { c })
        .to_real()
}

fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn round_trip_and_hminus1_at_n256() {
    let g = GridSpec::new(2, 256).unwrap();
    let f = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).cos());
    let clock = Instant::now();
    let back = spectral::transform(&f).to_real();
    let h = spectral::hminus1_norm(&f).unwrap();
    assert!(clock.elapsed().as_secs_f64() < 1.0);
    assert!(max_diff(&back, &f) <= 1e-13);
    // quadrature oracle: ‖f‖²_{Ḣ^{-1}} = ∫ f ψ with ψ = cos(2πx₁)/(4π²)
    let psi = f.scaled(1.0 / (4.0 * PI * PI));
    let quad = f.dot(&psi).unwrap().sqrt();
    assert!((h - quad).abs() <= 1e-10);
    assert!((h - (8.0 * PI * PI).powf(-0.5)).abs() <= 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transform_round_trip_and_parseval(m in modes()) {
        let g = GridSpec::new(2, 32).unwrap();
        let f = field_from(g, &m);
        let c = spectral::transform(&f);
        prop_assert!(max_diff(&c.to_real(), &f) <= 1e-13);
        let mean_sq = f.values().iter().map(|v| v * v).sum::<f64>() / g.len() as f64;
        prop_assert!((c.energy() - mean_sq).abs() <= 1e-12);
    }

    #[test]
    fn inverse_laplacian_inverts(m in modes()) {
        let g = GridSpec::new(2, 32).unwrap();
        let f = field_from(g, &m);
        let f0 = mean_free(&f);
        let psi = spectral::inverse_laplacian(&f0).unwrap();
        let back = spectral::laplacian(&psi).scaled(-1.0);
        prop_assert!(max_diff(&back, &f0) <= 1e-12);
        prop_assert!(psi.mean().abs() <= 1e-14);
    }

    #[test]
    fn hminus1_is_homogeneous(m in modes(), s in -3.0f64..3.0) {
        let g = GridSpec::new(2, 16).unwrap();
        let f = field_from(g, &m);
        let f0 = mean_free(&f);
        let a = spectral::hminus1_norm(&f0).unwrap();
        let b = spectral::hminus1_norm(&f0.scaled(s)).unwrap();
        prop_assert!((b - s.abs() * a).abs() <= 1e-12 * (1.0 + a));
    }

    #[test]
    fn sobolev_norms_are_ordered(m in modes()) {
        let g = GridSpec::new(2, 16).unwrap();
        let f = field_from(g, &m);
        let n3 = spectral::sobolev_norm(&f, -3.0);
        let n1 = spectral::sobolev_norm(&f, -1.0);
        let n0 = spectral::sobolev_norm(&f, 0.0);
        prop_assert!(n3 <= n1 + 1e-15 && n1 <= n0 + 1e-15);
    }

    #[test]
    fn dealiased_product_is_symmetric_and_band_limited(a in modes(), b in modes()) {
        let g = GridSpec::new(2, 32).unwrap();
        let (f, h) = (field_from(g, &a), field_from(g, &b));
        let p = spectral::dealiased_product(&f, &h).unwrap();
        let q = spectral::dealiased_product(&h, &f).unwrap();
        prop_assert!(max_diff(&p, &q) <= 1e-13);
        let c = spectral::transform(&p);
        let cut = spectral::dealias_cutoff(32);
        for i in 0..g.len() {
            let k = g.mode(i);
            if k[0].abs() > cut || k[1].abs() > cut {
                prop_assert!(c.coeffs()[i].norm() <= 1e-15);
            }
        }
    }

    #[test]
    fn kernel_is_even_with_odd_gradient(x in 0.01f64..0.99, y in 0.01f64..0.99, z in 0.01f64..0.99) {
        for dim in [2usize, 3] {
            let p = [x, y, z];
            let m = [-x, -y, -z];
            prop_assert!((kernel_value(dim, p).unwrap() - kernel_value(dim, m).unwrap()).abs() <= 1e-12);
            let (gp, gm) = (kernel_gradient(dim, p).unwrap(), kernel_gradient(dim, m).unwrap());
            for a in 0..dim {
                prop_assert!((gp[a] + gm[a]).abs() <= 1e-11);
            }
        }
    }

    #[test]
    fn container_round_trip(m in modes()) {
        let g = GridSpec::new(2, 16).unwrap();
        let f = field_from(g, &m);
        let bytes = container::encode_real(&f);
        match container::decode(&bytes).unwrap() {
            container::StoredField::Real(back) => prop_assert_eq!(back, f),
            _ => prop_assert!(false, "wrong kind"),
        }
    }

    #[test]
    fn global_phase_changes_no_observable(theta in 0.0f64..6.3, m in modes()) {
        let g = GridSpec::new(2, 16).unwrap();
        let f = field_from(g, &m);
        let raw = ComplexField::from_fn(g, |x| {
            let i = g.flat_index([(x[0] * 16.0).round() as usize % 16, (x[1] * 16.0).round() as usize % 16, 0]);
            Complex64::new(1.0 + 0.3 * f.values()[i].tanh(), 0.2 * f.values()[i])
        });
        let norm = raw.l2_norm();
        let orbital = raw.scaled(Complex64::new(1.0 / norm, 0.0));
        let s = MixedState::pure(orbital).unwrap();
        let p = PhysicalParams::new(0.05, 0.5).unwrap();
        let t = s.with_global_phase(theta);
        prop_assert!(max_diff(&s.density(), &t.density()) <= 1e-14);
        let (ja, jb) = (s.current(&p), t.current(&p));
        for a in 0..2 {
            prop_assert!(max_diff(ja.component(a), jb.component(a)) <= 1e-14);
        }
        prop_assert!((total_energy(&s, &p) - total_energy(&t, &p)).abs() <= 1e-14);
        prop_assert!(kinetic_energy(&s, &p) >= 0.0);
    }

    #[test]
    fn spectral_coeffs_are_hermitian_for_real_fields(m in modes()) {
        let g = GridSpec::new(2, 16).unwrap();
        let c: SpectralCoeffs = spectral::transform(&field_from(g, &m));
        for i in 0..g.len() {
            let k = g.mode(i);
            if g.touches_nyquist(k) {
                continue;
            }
            let mk = c.get([-k[0], -k[1], 0]);
            prop_assert!((c.coeffs()[i] - mk.conj()).norm() <= 1e-15);
        }
    }
}
