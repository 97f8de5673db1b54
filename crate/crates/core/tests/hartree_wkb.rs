use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use qfluid::euler::AnalyticFlow;
use qfluid::hartree::{kinetic_energy, total_energy, HartreeStepper, MixedState, PhysicalParams};
use qfluid::modulated::{kinetic_term, potential_term};
use qfluid::spectral;
use qfluid::wkb::{default_density, gaussian_packet, monokinetic_mixture, PacketSpec};
use qfluid::{GridSpec, ScalarField, VectorField};

fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn shear_mixture(n: usize, m: usize, hbar: f64, eps: f64) -> (MixedState, PhysicalParams) {
    let g = GridSpec::new(2, n).unwrap();
    let p = PhysicalParams::new(hbar, eps).unwrap();
    let u = AnalyticFlow::Shear2d.velocity(g).unwrap();
    let rho = ScalarField::from_fn(g, |x| 1.0 + 0.2 * (2.0 * PI * x[0]).cos());
    let s = monokinetic_mixture(&u, &rho, &p, m, PacketSpec::default_sigma(&p)).unwrap();
    (s, p)
}

#[test]
fn packet_kinetic_energy_is_the_gaussian_value() {
    let g = GridSpec::new(2, 64).unwrap();
    let p = PhysicalParams::new(0.01, 0.5).unwrap();
    let sigma = 1.0 / 16.0;
    let phi = gaussian_packet(&PacketSpec::new([0.3, 0.6, 0.0], [0.0; 3], sigma).unwrap(), g, &p).unwrap();
    let s = MixedState::pure(phi).unwrap();
    let value = 2.0 * kinetic_energy(&s, &p);
    assert_abs_diff_eq!(value, 2.0 * 0.01f64.powi(2) / (4.0 * sigma * sigma), epsilon = 1e-10);
}

#[test]
fn packet_density_is_the_squared_periodized_envelope() {
    let g = GridSpec::new(2, 64).unwrap();
    let p = PhysicalParams::new(0.01, 0.5).unwrap();
    let sigma = 0.1;
    let x0 = [0.3, 0.55, 0.0];
    let phi = gaussian_packet(&PacketSpec::new(x0, [0.0; 3], sigma).unwrap(), g, &p).unwrap();
    let rho = phi.norm_sqr_field();
    let s2 = sigma * sigma;
    // ∫ (Σ_m e^{-(x-m)²/4σ²})² over one period, per axis
    let norm1: f64 = (-6..=6).map(|m| (2.0 * PI * s2).sqrt() * (-((m * m) as f64) / (8.0 * s2)).exp()).sum();
    let envelope = |t: f64| -> f64 { (-6..=6).map(|m| (-(t - m as f64).powi(2) / (4.0 * s2)).exp()).sum() };
    let exact = ScalarField::from_fn(g, |x| {
        (envelope(x[0] - x0[0]) * envelope(x[1] - x0[1])).powi(2) / (norm1 * norm1)
    });
    assert!(max_diff(&rho, &exact) <= 1e-10 * exact.max_abs());
}

#[test]
fn packet_momentum_and_translation() {
    let g = GridSpec::new(2, 64).unwrap();
    let p = PhysicalParams::new(0.02, 0.5).unwrap();
    let v0 = [0.7, -0.4, 0.0];
    // the mean wavenumber of the sampled spectrum is off by ~exp(-1/(8σ²))
    let phi = gaussian_packet(&PacketSpec::new([0.25, 0.5, 0.0], v0, 0.06).unwrap(), g, &p).unwrap();
    let j = MixedState::pure(phi.clone()).unwrap().current(&p);
    for a in 0..2 {
        assert_abs_diff_eq!(j.component(a).mean(), v0[a], epsilon = 1e-8);
    }
    let shifted = gaussian_packet(
        &PacketSpec::new([0.25 + 5.0 / 64.0, 0.5 + 3.0 / 64.0, 0.0], v0, 0.06).unwrap(),
        g,
        &p,
    )
    .unwrap();
    // the carrier phase is referenced to the center, so moduli shift exactly
    let moved = phi.norm_sqr_field().shifted([5, 3, 0]);
    assert!(max_diff(&moved, &shifted.norm_sqr_field()) < 1e-12);
}

#[test]
fn mixture_at_rest_costs_the_envelope_energy() {
    let g = GridSpec::new(2, 64).unwrap();
    let hbar = 0.01;
    let p = PhysicalParams::new(hbar, 0.5).unwrap();
    let one = ScalarField::constant(g, 1.0);
    let zero = VectorField::zeros(g);
    let s = monokinetic_mixture(&zero, &one, &p, 8, PacketSpec::default_sigma(&p)).unwrap();
    let k0 = kinetic_term(&s, &zero, &p).unwrap();
    assert!((k0 - 2.0 * hbar / 4.0).abs() <= 1e-3 * hbar);
    assert_abs_diff_eq!(s.density().mean(), 1.0, epsilon = 1e-10);

    // Galilean shift by a lattice momentum 2πħk
    let c = [2.0 * PI * hbar * 3.0, -2.0 * PI * hbar * 2.0, 0.0];
    let moving = VectorField::constant(g, c);
    let sc = monokinetic_mixture(&moving, &one, &p, 8, PacketSpec::default_sigma(&p)).unwrap();
    assert_abs_diff_eq!(kinetic_term(&sc, &moving, &p).unwrap(), k0, epsilon = 1e-12);
}

#[test]
fn shear_mixture_potential_term_is_small() {
    let g = GridSpec::new(2, 64).unwrap();
    let p = PhysicalParams::new(0.01, 0.2).unwrap();
    let snap = AnalyticFlow::Shear2d.snapshot(g, 0.0).unwrap();
    let rho0 = default_density(&snap.corrector, &p);
    let s = monokinetic_mixture(&snap.u, &rho0, &p, 32, PacketSpec::default_sigma(&p)).unwrap();
    let pot = potential_term(&s.density(), &snap, &p).unwrap();
    assert!(pot <= 1e-3, "{pot}");
}

#[test]
fn mixture_density_converges_to_the_smoothed_target() {
    let g = GridSpec::new(2, 64).unwrap();
    let p = PhysicalParams::new(0.01, 0.5).unwrap();
    let sigma = 0.03;
    let rho0 = ScalarField::from_fn(g, |x| 1.0 + 0.3 * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).sin());
    // packets of width σ smooth the target by the heat kernel at time σ²/2
    let smoothed = spectral::transform(&rho0)
        .map_modes(|k, c| c * (-2.0 * PI * PI * sigma * sigma * (k[0] * k[0] + k[1] * k[1]) as f64).exp())
        .to_real();
    let bias = spectral::hminus1_norm_unchecked(&(&smoothed - &rho0));
    let zero = VectorField::zeros(g);
    let mut last = f64::INFINITY;
    for m in [16, 32, 64] {
        let s = monokinetic_mixture(&zero, &rho0, &p, m, sigma).unwrap();
        let rho = s.density();
        assert_abs_diff_eq!(rho.mean(), 1.0, epsilon = 1e-10);
        let sampling = spectral::hminus1_norm_unchecked(&(&rho - &smoothed));
        assert!(sampling < last, "m = {m}: {sampling} after {last}");
        last = sampling;
        let total = spectral::hminus1_norm_unchecked(&(&rho - &rho0));
        assert!((total - bias).abs() <= sampling + 1e-15);
    }
}

#[test]
fn strang_steps_preserve_every_orbital_norm() {
    let (s, p) = shear_mixture(64, 6, 0.01, 0.2);
    let mut st = HartreeStepper::new(s, p).unwrap();
    for _ in 0..20 {
        let before: Vec<f64> = st.state().orbitals().iter().map(|o| o.l2_norm()).collect();
        st.step(1e-3).unwrap();
        for (o, b) in st.state().orbitals().iter().zip(&before) {
            assert!((o.l2_norm() - b).abs() <= 1e-12);
        }
        assert!(st.density().min() >= -1e-13);
    }
}

fn energy_drift(s: &MixedState, p: &PhysicalParams, dt: f64, t_end: f64) -> f64 {
    let e0 = total_energy(s, p);
    let mut st = HartreeStepper::new(s.clone(), *p).unwrap();
    let steps = (t_end / dt).round() as usize;
    let mut worst = 0.0f64;
    for _ in 0..steps {
        st.step(dt).unwrap();
        worst = worst.max((total_energy(st.state(), p) - e0).abs());
    }
    worst / e0.abs()
}

#[test]
fn energy_drift_is_second_order() {
    let (s, p) = shear_mixture(64, 6, 0.01, 0.2);
    let a = energy_drift(&s, &p, 2e-3, 0.2);
    let b = energy_drift(&s, &p, 1e-3, 0.2);
    let ratio = a / b;
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio} ({a:e}, {b:e})");
}

fn continuity_residual(s: &MixedState, p: &PhysicalParams, dt: f64) -> f64 {
    let mut st = HartreeStepper::new(s.clone(), *p).unwrap();
    for _ in 0..5 {
        st.step(dt).unwrap();
    }
    let rho_prev = st.state().density();
    st.step(dt).unwrap();
    let div_j = spectral::divergence(&st.state().current(p));
    st.step(dt).unwrap();
    let rho_next = st.state().density();
    let residual = &(&rho_next - &rho_prev).scaled(1.0 / (2.0 * dt)) + &div_j;
    residual.l2_norm()
}

#[test]
fn continuity_residual_is_second_order() {
    let (s, p) = shear_mixture(64, 6, 0.01, 0.2);
    let a = continuity_residual(&s, &p, 2e-3);
    let b = continuity_residual(&s, &p, 1e-3);
    let ratio = a / b;
    assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio} ({a:e}, {b:e})");
}

#[test]
fn state_directory_round_trip() {
    let (s, p) = shear_mixture(32, 2, 0.04, 0.4);
    let dir = tempfile::tempdir().unwrap();
    s.write_dir(dir.path(), &p).unwrap();
    let (back, q) = MixedState::read_dir(dir.path()).unwrap();
    assert_eq!(q, p);
    assert_eq!(back.weights(), s.weights());
    for (a, b) in back.orbitals().iter().zip(s.orbitals()) {
        assert_eq!(a.values(), b.values());
    }
}
