use ndarray::Axis;
use pclab_core::energy::{ep_energy, pc_energy, ActivityState};
use pclab_core::hessian::{assemble_linear_hessian, condition_number, sylvester_pd_check, HessianLayout};
use pclab_core::inference::{activity_gradient, assemble_linear_system, infer_analytic, infer_gd, InferenceConfig};
use pclab_core::learning::{backprop_gradient, weight_gradient};
use pclab_core::{Activation, InitScheme, Network, NetworkSpec, Parameterisation};
use pclab_linalg::{frobenius_norm, gaussian_matrix, max_abs, sym_eigvals, Matrix, RngStream};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = Parameterisation> {
    prop_oneof![
        Just(Parameterisation::Sp),
        Just(Parameterisation::MuPc),
        Just(Parameterisation::Orthogonal)
    ]
}

fn data(d_in: usize, d_out: usize, b: usize, seed: u64) -> (Matrix, Matrix) {
    let mut rng = RngStream::new(seed);
    (
        gaussian_matrix(d_in, b, 1.0, &mut rng),
        gaussian_matrix(d_out, b, 1.0, &mut rng),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linear_forward_is_homogeneous(n in 1usize..12, h in 1usize..6, alpha in -3.0f64..3.0, seed in any::<u64>(), residual: bool) {
        let spec = NetworkSpec::new(3, n, h, 2, Parameterisation::MuPc).with_residual(residual).with_seed(seed);
        let net = Network::init(spec).unwrap();
        let (x, _) = data(3, 2, 4, seed);
        let a = net.forward(&(&x * alpha)).unwrap();
        let b = net.forward(&x).unwrap();
        for (za, zb) in a.z.iter().zip(&b.z) {
            prop_assert!(max_abs(&(za - &(zb * alpha))) <= 1e-12 * (1.0 + max_abs(zb)));
        }
    }

    #[test]
    fn energy_is_permutation_invariant(seed in any::<u64>(), act in prop_oneof![Just(Activation::Tanh), Just(Activation::Relu)]) {
        let spec = NetworkSpec::new(3, 5, 3, 2, Parameterisation::Sp).with_activation(act).with_seed(seed);
        let net = Network::init(spec).unwrap();
        let (x, y) = data(3, 2, 6, seed);
        let mut rng = RngStream::new(seed ^ 1);
        let s = ActivityState::gaussian(&net, x, Some(y), &mut rng).unwrap();
        let perm = [3usize, 0, 5, 1, 4, 2];
        let p = ActivityState::clamped(
            s.x.select(Axis(1), &perm),
            s.y.as_ref().unwrap().select(Axis(1), &perm),
            s.z.iter().map(|z| z.select(Axis(1), &perm)).collect(),
        );
        let e1 = pc_energy(&net, &s).unwrap().total;
        let e2 = pc_energy(&net, &p).unwrap().total;
        prop_assert!((e1 - e2).abs() <= 1e-12 * e1);
    }

    #[test]
    fn ep_energy_is_quadratic_in_activities(seed in any::<u64>(), beta in 0.0f64..3.0) {
        let spec = NetworkSpec::new(3, 4, 2, 2, Parameterisation::Sp).with_seed(seed);
        let net = Network::init(spec).unwrap();
        let (x, y) = data(3, 2, 3, seed);
        let mut rng = RngStream::new(seed ^ 2);
        let z: Vec<Matrix> = [4usize, 4, 2].iter().map(|&n| gaussian_matrix(n, 3, 1.0, &mut rng)).collect();
        let e = |lam: f64| {
            let s = ActivityState::free_output(x.clone(), y.clone(), z.iter().map(|m| m * lam).collect());
            ep_energy(&net, &s, beta, true).unwrap().total
        };
        let (e0, e1, e2) = (e(0.0), e(1.0), e(2.0));
        let q = (e2 - 2.0 * e1 + e0) / 2.0;
        let l = e1 - e0 - q;
        let predicted = e0 + 3.0 * l + 9.0 * q;
        prop_assert!((e(3.0) - predicted).abs() <= 1e-10 * (1.0 + predicted.abs()));
    }

    #[test]
    fn energy_matches_quadratic_form(seed in any::<u64>(), n in 1usize..8, h in 1usize..6) {
        let spec = NetworkSpec::new(n, n, h, n, Parameterisation::Sp).with_seed(seed);
        let net = Network::init(spec).unwrap();
        let (x, y) = data(n, n, 1, seed);
        let sys = assemble_linear_system(&net, &x, &y).unwrap();
        let mut rng = RngStream::new(seed ^ 3);
        let s = ActivityState::gaussian(&net, x.clone(), Some(y.clone()), &mut rng).unwrap();
        let zero = ActivityState::zeros(&net, x, Some(y)).unwrap();
        let z: Vec<f64> = s.z.iter().flat_map(|m| m.iter().copied()).collect();
        let z = ndarray::Array1::from(z);
        let quad = 0.5 * z.dot(&sys.hessian.matrix.dot(&z)) - sys.b.column(0).dot(&z);
        let diff = pc_energy(&net, &s).unwrap().total - pc_energy(&net, &zero).unwrap().total;
        prop_assert!((diff - quad).abs() <= 1e-8 * (1.0 + quad.abs()));
    }

    #[test]
    fn fc_dln_hessians_are_positive_definite(n in 2usize..33, h in 1usize..12, p in params(), seed in any::<u64>()) {
        let spec = NetworkSpec::new(n, n, h, n, p).with_seed(seed);
        let net = Network::init(spec).unwrap();
        let bundle = assemble_linear_hessian(&net, HessianLayout::Supervised).unwrap();
        let rep = sylvester_pd_check(&bundle).unwrap();
        prop_assert!(rep.lambda_min > 0.0);
        prop_assert!(rep.positive_definite);
        prop_assert!(rep.agrees_with_spectrum(1e-10));
    }

    #[test]
    fn analytic_and_iterative_inference_agree(n in 2usize..17, h in 1usize..6, seed in any::<u64>()) {
        let spec = NetworkSpec::new(n, n, h, n, Parameterisation::Sp).with_seed(seed);
        let net = Network::init(spec).unwrap();
        let (x, y) = data(n, n, 1, seed);
        let sys = assemble_linear_system(&net, &x, &y).unwrap();
        let lmax = sym_eigvals(&sys.hessian.matrix).unwrap().max();
        let kappa = condition_number(&sys.hessian).unwrap().kappa;
        prop_assume!(kappa < 2e3);
        let s0 = ActivityState::from_forward(&net, x.clone(), Some(y.clone())).unwrap();
        let out = infer_gd(&net, &s0, &InferenceConfig::gd(20_000, 1.0 / lmax)).unwrap();
        let zs = infer_analytic(&net, &x, &y).unwrap();
        for (a, b) in out.state.z.iter().zip(&zs.z) {
            prop_assert!(frobenius_norm(&(a - b)) <= 1e-6 * (1e-12 + frobenius_norm(b)) + 1e-12);
        }
    }
}

#[test]
fn unclamped_inference_keeps_forward_state() {
    for seed in 0..5 {
        let spec = NetworkSpec::new(4, 7, 3, 3, Parameterisation::Sp).with_seed(seed);
        let net = Network::init(spec).unwrap();
        let (x, _) = data(4, 3, 5, seed);
        let s = ActivityState::from_forward(&net, x, None).unwrap();
        let g = activity_gradient(&net, &s).unwrap();
        assert!(g.iter().all(|m| m.iter().all(|&v| v == 0.0)));
    }
}

#[test]
fn envelope_identity_on_linear_resnets() {
    for seed in 0..3 {
        let spec = NetworkSpec::new(4, 6, 3, 2, Parameterisation::MuPc)
            .with_residual(true)
            .with_seed(seed);
        let net = Network::init(spec).unwrap();
        let (x, y) = data(4, 2, 3, seed);
        let z = infer_analytic(&net, &x, &y).unwrap();
        let g = weight_gradient(&net, &z).unwrap();
        let eq = |n: &Network| pc_energy(n, &infer_analytic(n, &x, &y).unwrap()).unwrap().total;
        for l in 0..4 {
            let h = 1e-5;
            let mut p = net.clone();
            p.params.weights[l][[1, 1]] += h;
            let mut q = net.clone();
            q.params.weights[l][[1, 1]] -= h;
            let fd = (eq(&p) - eq(&q)) / (2.0 * h);
            assert!(
                (fd - g[l][[1, 1]]).abs() <= 1e-4 * fd.abs().max(1e-6),
                "layer {l}: {fd} vs {}",
                g[l][[1, 1]]
            );
        }
    }
}

#[test]
fn zero_inference_steps_match_backprop_at_the_output() {
    let spec = NetworkSpec::new(5, 8, 4, 3, Parameterisation::MuPc)
        .with_activation(Activation::Relu)
        .with_residual(true)
        .with_init(InitScheme::Gaussian)
        .with_seed(4);
    let net = Network::init(spec).unwrap();
    let (x, y) = data(5, 3, 6, 9);
    let s = ActivityState::from_forward(&net, x.clone(), Some(y.clone())).unwrap();
    let out = infer_gd(&net, &s, &InferenceConfig::gd(0, 0.1)).unwrap();
    let pc = weight_gradient(&net, &out.state).unwrap();
    let (bp, _) = backprop_gradient(&net, &x, &y).unwrap();
    for g in &pc[..4] {
        assert!(max_abs(g) < 1e-12);
    }
    assert_eq!(pc[4], bp[4]);
}
