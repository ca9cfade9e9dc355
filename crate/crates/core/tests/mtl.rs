use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use plnet_core::linalg::{frobenius, identity, rel_diff, CMat};
use plnet_core::mtl::{
    ctf_line, echo_voltage, input_admittance_line, input_reflection, line_input_reflection,
    line_propagation_params, load_reflection, modal_transform, propagation_at,
    series_truncated_responses, ModalDirection, ReflectionRoute,
};
use plnet_core::{CableModel, CableSpec, Error, FrequencyGrid, Rlgc, SkinEffect};
use proptest::prelude::*;
use std::f64::consts::PI;

fn m1(z: C) -> CMat<f64> {
    DMatrix::from_element(1, 1, z)
}

fn rel(a: C, b: C) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn coupled_cable() -> CableSpec<f64> {
    CableSpec::new("pair", CableModel::SkinEffect(SkinEffect::plc_default(2))).unwrap()
}

#[test]
fn lossless_scalar_line_has_closed_form_parameters() {
    let (cl, cc) = (0.25e-6, 100e-12);
    let cab = CableSpec::scalar("x", 0.0, cl, 0.0, cc);
    for f in [1e5, 3.3e6, 80e6] {
        let p = propagation_at(&cab, f).unwrap();
        let gamma = C::new(0.0, 2.0 * PI * f * (cl * cc).sqrt());
        assert!(rel(p.gamma[0], gamma) < 1e-12);
        assert!(rel(p.yc[(0, 0)], C::new((cc / cl).sqrt(), 0.0)) < 1e-12);
    }
}

#[test]
fn coupled_pair_is_diagonalized_on_the_whole_grid() {
    let cab = coupled_cable();
    let grid = FrequencyGrid::new(1e5, 1e5, 300).unwrap();
    let params = line_propagation_params(&cab, &grid).unwrap();
    for p in &params {
        let m = &p.t_inv * &p.yz * &p.t;
        let off = m[(0, 1)].norm().max(m[(1, 0)].norm());
        assert!(off <= 1e-9 * frobenius(&p.yz), "f = {}", p.freq);
        assert!(p.gamma.iter().all(|g| g.re >= 0.0));
        // Y_C is the inverse of Z_C and symmetric for a reciprocal cable
        assert!(rel_diff(&(&p.yc * &p.zc), &identity(2)) < 1e-12);
        assert!(rel_diff(&p.yc, &p.yc.transpose()) < 1e-9);
    }
}

#[test]
fn tracked_modes_do_not_swap() {
    let cab = coupled_cable();
    let grid = FrequencyGrid::new(1e5, 1e5, 400).unwrap();
    let params = line_propagation_params(&cab, &grid).unwrap();
    for w in params.windows(2) {
        let overlap = w[0].t.adjoint() * &w[1].t;
        assert!(overlap[(0, 0)].norm() > overlap[(0, 1)].norm());
        assert!(overlap[(1, 1)].norm() > overlap[(1, 0)].norm());
    }
}

#[test]
fn decoupled_pair_still_satisfies_the_residual() {
    let r = Rlgc {
        r: DMatrix::from_diagonal_element(2, 2, 0.05),
        l: DMatrix::from_diagonal_element(2, 2, 0.5e-6),
        g: DMatrix::from_diagonal_element(2, 2, 1e-6),
        c: DMatrix::from_diagonal_element(2, 2, 100e-12),
    };
    let cab = CableSpec::new("d", CableModel::Constant(r)).unwrap();
    let p = propagation_at(&cab, 2e6).unwrap();
    assert!(p.diagonalization_residual() < 1e-12);
}

#[test]
fn asymmetric_cable_is_rejected() {
    let mut l = DMatrix::from_diagonal_element(2, 2, 0.5e-6);
    l[(0, 1)] = 0.1e-6;
    let r = Rlgc {
        r: DMatrix::zeros(2, 2),
        l,
        g: DMatrix::zeros(2, 2),
        c: DMatrix::from_diagonal_element(2, 2, 100e-12),
    };
    let bad = CableSpec::new("a", CableModel::Constant(r));
    let grid = FrequencyGrid::new(1e5, 1e5, 4).unwrap();
    let err = match bad {
        Err(e) => e,
        Ok(cab) => line_propagation_params(&cab, &grid).unwrap_err(),
    };
    assert!(matches!(err, Error::Validation(_)), "{err}");
}

#[test]
fn load_reflection_extremes() {
    let yc = m1(C::new(0.02, 0.0));
    let matched = load_reflection(&yc, &yc).unwrap();
    assert!(matched[(0, 0)].norm() < 1e-12);
    let open = load_reflection(&m1(C::new(0.0, 0.0)), &yc).unwrap();
    assert!((open[(0, 0)] + 1.0).norm() < 1e-12);
    let short = load_reflection(&m1(C::new(1e9, 0.0)), &yc).unwrap();
    assert!((short[(0, 0)] - 1.0).norm() < 1e-7);
}

#[test]
fn load_reflection_degenerate_sum_is_an_error() {
    let yc = m1(C::new(0.02, 0.0));
    let err = load_reflection(&(-&yc), &yc).unwrap_err();
    assert!(matches!(err, Error::MatchedDegenerate { .. }));
}

#[test]
fn modal_transform_round_trip() {
    let t = CMat::from_row_slice(2, 2, &[C::new(1.0, 0.2), C::new(0.3, 0.0), C::new(-0.4, 0.1), C::new(0.9, -0.5)]);
    let a = CMat::from_row_slice(2, 2, &[C::new(0.1, 2.0), C::new(-1.0, 0.0), C::new(3.0, 0.5), C::new(0.0, -0.7)]);
    let to = modal_transform(&a, &t, ModalDirection::ToModal).unwrap();
    let back = modal_transform(&to, &t, ModalDirection::FromModal).unwrap();
    assert!(rel_diff(&back, &a) < 1e-12);
    let i = modal_transform(&identity(2), &t, ModalDirection::ToModal).unwrap();
    assert!(rel_diff(&i, &identity(2)) < 1e-12);
    assert!(modal_transform(&a, &CMat::zeros(2, 2), ModalDirection::ToModal).is_err());
}

#[test]
fn quarter_wave_transformer() {
    // Z_C = 50 Ω with v = 2e8 m/s; Z_L = 100 Ω.
    let (cl, cc) = (250e-9, 100e-12);
    let cab = CableSpec::scalar("q", 0.0, cl, 0.0, cc);
    let f = 10e6;
    let len = 2e8 / f / 4.0;
    let p = propagation_at(&cab, f).unwrap();
    let rho = load_reflection(&m1(C::new(0.01, 0.0)), &p.yc).unwrap();
    let y_in = input_admittance_line(&p, len, &p.to_modal(&rho)).unwrap();
    assert!(rel(y_in[(0, 0)], C::new(0.04, 0.0)) < 1e-9);
}

#[test]
fn zero_length_and_matched_identities() {
    let cab = coupled_cable();
    let p = propagation_at(&cab, 7e6).unwrap();
    let y_l = CMat::from_row_slice(2, 2, &[C::new(0.03, 0.01), C::new(-0.002, 0.0), C::new(-0.002, 0.0), C::new(0.01, -0.004)]);
    let rho = p.to_modal(&load_reflection(&y_l, &p.yc).unwrap());
    let y0 = input_admittance_line(&p, 0.0, &rho).unwrap();
    assert!(rel_diff(&y0, &y_l) < 1e-9);
    let zero = CMat::zeros(2, 2);
    let y_m = input_admittance_line(&p, 123.0, &zero).unwrap();
    assert!(rel_diff(&y_m, &p.yc) < 1e-9);
    let h_m = ctf_line(&p, 123.0, &zero).unwrap();
    let expect = p.from_modal(&CMat::from_diagonal(&nalgebra::DVector::from_vec(p.exp_gamma(123.0))));
    assert!(rel_diff(&h_m, &expect) < 1e-9);
    let h0 = ctf_line(&p, 0.0, &p.from_modal(&rho)).unwrap();
    assert!(rel_diff(&h0, &identity(2)) < 1e-9);
}

#[test]
fn open_lossless_line_transfer_is_secant() {
    let cab = CableSpec::scalar("o", 0.0, 250e-9, 0.0, 100e-12);
    let len = 37.0;
    for f in [1e5, 1.7e6, 4.4e6] {
        let p = propagation_at(&cab, f).unwrap();
        let rho = load_reflection(&m1(C::new(0.0, 0.0)), &p.yc).unwrap();
        let h = ctf_line(&p, len, &rho).unwrap();
        let beta = 2.0 * PI * f / 2e8;
        let expect = 1.0 / (beta * len).cos().abs();
        assert!((h[(0, 0)].norm() - expect).abs() / expect < 1e-9);
    }
}

#[test]
fn lossless_resonance_is_reported() {
    // open end, quarter wavelength: I − B is singular
    let cab = CableSpec::scalar("r", 0.0, 250e-9, 0.0, 100e-12);
    let f = 1e6;
    let p = propagation_at(&cab, f).unwrap();
    let rho = load_reflection(&m1(C::new(0.0, 0.0)), &p.yc).unwrap();
    let err = input_admittance_line(&p, 50.0, &p.to_modal(&rho)).unwrap_err();
    assert!(matches!(err, Error::Resonance { freq: Some(x), .. } if x == f), "{err}");
}

#[test]
fn input_reflection_extremes() {
    let y_r = m1(C::new(0.02, 0.0));
    assert!(input_reflection(&y_r, &y_r).unwrap()[(0, 0)].norm() < 1e-15);
    let open = input_reflection(&m1(C::new(0.0, 0.0)), &y_r).unwrap();
    assert!((open[(0, 0)] + 1.0).norm() < 1e-15);
}

#[test]
fn echo_voltage_cases() {
    let y_r = m1(C::new(0.02, 0.0));
    let v = nalgebra::DVector::from_vec(vec![C::new(1.5, -0.5)]);
    let zero = echo_voltage(&CMat::zeros(1, 1), &y_r, &v).unwrap();
    assert_eq!(zero[0], C::new(0.0, 0.0));
    let rho = C::new(0.3, 0.1);
    let e = echo_voltage(&m1(rho), &y_r, &v).unwrap();
    assert!((e[0] + rho * v[0]).norm() < 1e-15);

    let (a, b) = (C::new(0.02, 0.0), C::new(0.05, 0.0));
    let y_r = CMat::from_row_slice(2, 2, &[a, C::new(0.0, 0.0), C::new(0.0, 0.0), b]);
    let r = [C::new(0.1, 0.0), C::new(0.2, 0.1), C::new(-0.05, 0.0), C::new(0.4, -0.2)];
    let rho = CMat::from_row_slice(2, 2, &r);
    let v = nalgebra::DVector::from_vec(vec![C::new(1.0, 0.0), C::new(0.0, 2.0)]);
    let e = echo_voltage(&rho, &y_r, &v).unwrap();
    let e0 = -(r[0] * a * v[0] + r[1] * b * v[1]) / a;
    let e1 = -(r[2] * a * v[0] + r[3] * b * v[1]) / b;
    assert!((e[0] - e0).norm() < 1e-14 && (e[1] - e1).norm() < 1e-14);
    assert!(echo_voltage(&rho, &CMat::zeros(2, 2), &v).is_err());
}

#[test]
fn coupled_routes_agree() {
    let cab = coupled_cable();
    let p = propagation_at(&cab, 12e6).unwrap();
    let y_l = CMat::from_row_slice(2, 2, &[C::new(0.004, 0.002), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(0.1, 0.0)]);
    let y_r = CMat::from_diagonal_element(2, 2, C::new(0.02, 0.0));
    let rho = p.to_modal(&load_reflection(&y_l, &p.yc).unwrap());
    let a = line_input_reflection(&p, 61.0, &rho, &y_r, ReflectionRoute::Direct).unwrap();
    let b = line_input_reflection(&p, 61.0, &rho, &y_r, ReflectionRoute::Modal).unwrap();
    assert!(rel_diff(&a, &b) < 1e-9);
}

fn distortionless(radius: f64) -> (CableSpec<f64>, f64) {
    // R/L = G/C makes α frequency independent; e^{−2αℓ} = radius with an open end
    let (l, c): (f64, f64) = (250e-9, 100e-12);
    let len = 50.0;
    let alpha = -(radius.ln()) / (2.0 * len);
    let zc = (l / c).sqrt();
    let cab = CableSpec::scalar("dl", alpha * zc, l, alpha / zc, c);
    (cab, len)
}

#[test]
fn series_matches_exact_on_half_radius_line() {
    let (cab, len) = distortionless(0.5);
    let grid = FrequencyGrid::new(1e5, 1e5, 200).unwrap();
    let params = line_propagation_params(&cab, &grid).unwrap();
    let y_r = m1(C::new(1.0 / 75.0, 0.0));
    let rho: Vec<_> = params
        .iter()
        .map(|p| p.to_modal(&load_reflection(&CMat::zeros(1, 1), &p.yc).unwrap()))
        .collect();
    let s = series_truncated_responses(&params, len, &rho, &y_r, 50).unwrap();
    assert!(s.converges());
    for (k, p) in params.iter().enumerate() {
        assert!((s.spectral_radius[k] - 0.5).abs() < 1e-12);
        let y = input_admittance_line(p, len, &rho[k]).unwrap();
        let r = line_input_reflection(p, len, &rho[k], &y_r, ReflectionRoute::Direct).unwrap();
        assert!(rel_diff(&s.y_in_approx[k], &y) <= 1e-6);
        assert!(rel_diff(&s.rho_in_approx[k], &r) <= 1e-6);
    }
}

#[test]
fn series_leading_terms_and_matched_load() {
    let cab = coupled_cable();
    let grid = FrequencyGrid::new(1e6, 1e6, 10).unwrap();
    let params = line_propagation_params(&cab, &grid).unwrap();
    let y_r = CMat::from_diagonal_element(2, 2, C::new(0.02, 0.0));
    let zeros = vec![CMat::zeros(2, 2); params.len()];
    let y_l = CMat::from_diagonal_element(2, 2, C::new(0.001, 0.0));
    let rho: Vec<_> = params
        .iter()
        .map(|p| p.to_modal(&load_reflection(&y_l, &p.yc).unwrap()))
        .collect();
    let s0 = series_truncated_responses(&params, 80.0, &rho, &y_r, 0).unwrap();
    for (k, p) in params.iter().enumerate() {
        assert!(rel_diff(&s0.y_in_approx[k], &p.yc) < 1e-12);
        let n = p.n_matrix(&y_r);
        let lead = &n * p.from_modal(&p.rho_g_modal(&y_r).unwrap()) * n.try_inverse().unwrap();
        assert!(rel_diff(&s0.rho_in_approx[k], &lead) < 1e-12);
    }
    for n_terms in [0, 1, 3, 7] {
        let s = series_truncated_responses(&params, 80.0, &zeros, &y_r, n_terms).unwrap();
        for (k, p) in params.iter().enumerate() {
            let exact = line_input_reflection(p, 80.0, &zeros[k], &y_r, ReflectionRoute::Direct).unwrap();
            assert!(rel_diff(&s.y_in_approx[k], &p.yc) < 1e-12);
            assert!(rel_diff(&s.rho_in_approx[k], &exact) < 1e-9);
        }
    }
}

#[test]
fn series_error_is_monotone_when_damped() {
    let cab = coupled_cable();
    let grid = FrequencyGrid::new(2e6, 2e6, 15).unwrap();
    let params = line_propagation_params(&cab, &grid).unwrap();
    let y_r = CMat::from_diagonal_element(2, 2, C::new(0.02, 0.0));
    let rho: Vec<_> = params
        .iter()
        .map(|p| p.to_modal(&load_reflection(&CMat::zeros(2, 2), &p.yc).unwrap()))
        .collect();
    let len = 150.0;
    let mut prev = vec![f64::INFINITY; params.len()];
    for n in [1, 2, 5, 10, 50] {
        let s = series_truncated_responses(&params, len, &rho, &y_r, n).unwrap();
        assert!(s.spectral_radius.iter().all(|r| *r < 0.9));
        for (k, p) in params.iter().enumerate() {
            let y = input_admittance_line(p, len, &rho[k]).unwrap();
            let e = rel_diff(&s.y_in_approx[k], &y);
            assert!(e <= prev[k] * (1.0 + 1e-9) + 1e-15, "n = {n}, k = {k}");
            prev[k] = e;
        }
    }
}

fn tanh(z: C) -> C {
    let e = (-2.0 * z).exp();
    (1.0 - e) / (1.0 + e)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scalar_input_impedance_matches_tanh_form(
        r in 0.0..2.0f64, l in 0.1e-6..1.0e-6f64, g in 0.0..1e-4f64, c in 20e-12..200e-12f64,
        len in 1.0..500.0f64, zl_re in 1.0..500.0f64, zl_im in -200.0..200.0f64,
    ) {
        let cab = CableSpec::scalar("p", r, l, g, c);
        let grid = FrequencyGrid::new(1e5, 5e5, 60).unwrap();
        let params = line_propagation_params(&cab, &grid).unwrap();
        let z_l = C::new(zl_re, zl_im);
        for p in &params {
            let w = 2.0 * PI * p.freq;
            let zs = C::new(r, w * l);
            let ys = C::new(g, w * c);
            let gamma = (zs * ys).sqrt();
            let zc = (zs / ys).sqrt();
            let th = tanh(gamma * len);
            let z_in = zc * (z_l + zc * th) / (zc + z_l * th);
            let rho = load_reflection(&m1(1.0 / z_l), &p.yc).unwrap();
            let y_in = input_admittance_line(p, len, &p.to_modal(&rho)).unwrap();
            prop_assert!(rel(1.0 / y_in[(0, 0)], z_in) < 1e-9);
        }
    }

    #[test]
    fn scalar_routes_agree(
        r in 0.0..2.0f64, g in 0.0..1e-4f64, len in 0.0..400.0f64,
        yl_re in 0.0..0.1f64, yl_im in -0.05..0.05f64, yr in 0.001..0.1f64, f in 1e5..30e6f64,
    ) {
        let cab = CableSpec::scalar("p", r, 0.4e-6, g, 80e-12);
        let p = propagation_at(&cab, f).unwrap();
        let rho = p.to_modal(&load_reflection(&m1(C::new(yl_re, yl_im)), &p.yc).unwrap());
        let y_r = m1(C::new(yr, 0.0));
        let a = line_input_reflection(&p, len, &rho, &y_r, ReflectionRoute::Direct);
        let b = line_input_reflection(&p, len, &rho, &y_r, ReflectionRoute::Modal);
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!(rel_diff(&a, &b) < 1e-9);
        }
    }

    #[test]
    fn zero_length_reproduces_random_loads(
        a in 0.0001..0.2f64, b in -0.1..0.1f64, cpl in -0.01..0.01f64, d in 0.0001..0.2f64,
    ) {
        let p = propagation_at(&coupled_cable(), 3e6).unwrap();
        let y_l = CMat::from_row_slice(2, 2, &[C::new(a, b), C::new(cpl, 0.0), C::new(cpl, 0.0), C::new(d, -b)]);
        let rho = p.to_modal(&load_reflection(&y_l, &p.yc).unwrap());
        let y0 = input_admittance_line(&p, 0.0, &rho).unwrap();
        prop_assert!(rel_diff(&y0, &y_l) < 1e-9);
    }
}
