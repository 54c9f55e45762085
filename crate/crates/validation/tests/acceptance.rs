//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! `cargo test --test acceptance -- 3 8` runs only criteria 3 and 8.
//! MNIST is read from `$PCLAB_DATA_ROOT` or `<workspace>/data`.

use std::path::PathBuf;
use std::time::Instant;

use pclab_cli::commands::fwd::{depth_summary, FwdConfig, Variant};
use pclab_cli::commands::ratio::RatioConfig;
use pclab_cli::commands::rmt::RmtSpectraConfig;
use pclab_cli::commands::spectrum::SpectrumInitConfig;
use pclab_cli::commands::train::TrainCmdConfig;
use pclab_cli::commands::transfer::{argmin_cell, TransferConfig};
use pclab_cli::config::{resolve, Experiment, Overrides};
use pclab_cli::data::DATA_ROOT_ENV;
use pclab_core::energy::{pc_energy, ActivityState};
use pclab_core::hessian::{
    assemble_hessian_ep, assemble_linear_hessian, condition_number, hessian_with_decay, HessianLayout,
};
use pclab_core::inference::{activity_gradient, infer_analytic, infer_gd, InferenceConfig};
use pclab_core::learning::{backprop_gradient, mse_loss, weight_gradient};
use pclab_core::{Activation, InitScheme, Matrix, Network, NetworkSpec, Parameterisation, RngStream};
use pclab_linalg::gaussian_matrix;

// Learning rates for the MNIST criteria, chosen on short pilot runs.
const MUPC_LR: f64 = 1e-1;
const MUPC_BETA: f64 = 5.0;
const SP_LR: f64 = 1e-3;
const SP_BETA: f64 = 0.1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn preset<T: Experiment>(name: &str) -> T {
    resolve::<T>(
        None,
        &Overrides {
            preset: Some(name.into()),
            ..Default::default()
        },
    )
    .expect("preset resolves")
    .config
}

fn data_root() -> PathBuf {
    std::env::var_os(DATA_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

const PARAMS: [Parameterisation; 3] = [
    Parameterisation::Sp,
    Parameterisation::MuPc,
    Parameterisation::Orthogonal,
];

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    d / n.max(1e-300)
}

fn flat(ms: &[Matrix]) -> Vec<f64> {
    ms.iter().flat_map(|m| m.iter().copied()).collect()
}

fn data(d_in: usize, d_out: usize, b: usize, rng: &mut RngStream) -> (Matrix, Matrix) {
    (gaussian_matrix(d_in, b, 1.0, rng), gaussian_matrix(d_out, b, 1.0, rng))
}

fn c1_convexity() -> Outcome {
    let mut rng = RngStream::new(101);
    let mut worst = f64::INFINITY;
    for k in 0..200 {
        let n = 2 + rng.below(63);
        let h = 1 + rng.below(16);
        let p = PARAMS[k % 3];
        let spec = NetworkSpec::new(n, n, h, n, p).with_seed(rng.next_u64());
        let net = Network::init(spec).unwrap();
        let lmin = condition_number(&assemble_linear_hessian(&net, HessianLayout::Supervised).unwrap())
            .unwrap()
            .lambda_min;
        worst = worst.min(lmin);
    }
    outcome(
        worst > -1e-8,
        format!("smallest lambda_min over 200 nets = {worst:.3e}"),
    )
}

fn c2_conditioning_growth() -> Outcome {
    let cfg: SpectrumInitConfig = preset("sp-depth-n128");
    let t = &cfg.run().unwrap()[0];
    let mut means = Vec::new();
    for &h in &cfg.depths {
        let ks: Vec<f64> = t
            .rows
            .iter()
            .filter(|r| t.get(r, "H") == h.to_string())
            .map(|r| t.get_f64(r, "kappa").unwrap())
            .collect();
        means.push(ks.iter().sum::<f64>() / ks.len() as f64);
    }
    let increasing = means.windows(2).all(|w| w[1] > w[0]);
    let shown: Vec<String> = cfg
        .depths
        .iter()
        .zip(&means)
        .map(|(h, k)| format!("H={h}: {k:.3e}"))
        .collect();
    outcome(increasing, format!("mean kappa {}", shown.join(", ")))
}

fn c3_rmt_extremes() -> Outcome {
    let cfg: RmtSpectraConfig = preset("sp-n512-h8");
    let s = cfg.spectra(cfg.seed).unwrap();
    let (dlo, dhi) = (s.d[0], *s.d.last().unwrap());
    let (olo, ohi) = (s.o[0], *s.o.last().unwrap());
    let hmax = *s.h.last().unwrap();
    let d_ok = dlo >= 0.85 && dhi <= 5.5;
    let o_ok = olo >= -2.5 && ohi <= 2.5;
    let h_ok = hmax <= 7.5;
    outcome(
        d_ok && o_ok && h_ok,
        format!(
            "D in [{dlo:.3}, {dhi:.3}] ({}), O in [{olo:.3}, {ohi:.3}] ({}), lambda_max(H) = {hmax:.3} ({})",
            if d_ok { "ok" } else { "out of [0.85, 5.5]" },
            if o_ok { "ok" } else { "out of [-2.5, 2.5]" },
            if h_ok { "ok" } else { "above 7.5" },
        ),
    )
}

fn c4_analytic_vs_iterative() -> Outcome {
    let mut rng = RngStream::new(104);
    let mut worst: f64 = 0.0;
    let mut worst_kappa = 0.0;
    for _ in 0..50 {
        let n = 2 + rng.below(31);
        let h = 1 + rng.below(8);
        let net = Network::init(NetworkSpec::new(n, n, h, n, Parameterisation::Sp).with_seed(rng.next_u64())).unwrap();
        let (x, y) = data(n, n, 1, &mut rng);
        let spec = condition_number(&assemble_linear_hessian(&net, HessianLayout::Supervised).unwrap()).unwrap();
        let s0 = ActivityState::from_forward(&net, x.clone(), Some(y.clone())).unwrap();
        let gd = infer_gd(&net, &s0, &InferenceConfig::gd(10_000, 1.0 / spec.lambda_max)).unwrap();
        let exact = infer_analytic(&net, &x, &y).unwrap();
        let e = rel_err(&flat(&gd.state.z), &flat(&exact.z));
        if e > worst {
            worst = e;
            worst_kappa = spec.kappa;
        }
    }
    outcome(
        worst <= 1e-6,
        format!("worst relative error {worst:.3e} (kappa {worst_kappa:.3e})"),
    )
}

fn c5_unclamped_fixed_point() -> Outcome {
    let mut rng = RngStream::new(105);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let n = 2 + rng.below(30);
        let h = 1 + rng.below(8);
        let spec = NetworkSpec::new(5, n, h, 3, PARAMS[k % 3])
            .with_residual(k % 2 == 0 && k % 3 != 2)
            .with_seed(rng.next_u64());
        let net = Network::init(spec).unwrap();
        let x = gaussian_matrix(5, 4, 1.0, &mut rng);
        let s = ActivityState::from_forward(&net, x, None).unwrap();
        let g = flat(&activity_gradient(&net, &s).unwrap());
        worst = worst.max(g.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    outcome(worst <= 1e-10, format!("largest gradient norm {worst:.3e}"))
}

fn c6_gradient_oracles() -> Outcome {
    let mut rng = RngStream::new(106);
    let (mut wa, mut ww, mut wb): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let h = 1e-6;
    for k in 0..20 {
        let n = 2 + rng.below(5);
        let depth = 1 + rng.below(3);
        let p = if k % 2 == 0 {
            Parameterisation::Sp
        } else {
            Parameterisation::MuPc
        };
        let spec = NetworkSpec::new(3, n, depth, 2, p)
            .with_activation(Activation::Tanh)
            .with_residual(k % 4 == 1)
            .with_init(InitScheme::Gaussian)
            .with_seed(rng.next_u64());
        let net = Network::init(spec).unwrap();
        let (x, y) = data(3, 2, 3, &mut rng);
        let s = ActivityState::gaussian(&net, x.clone(), Some(y.clone()), &mut rng).unwrap();
        let energy = |net: &Network, s: &ActivityState| pc_energy(net, s).unwrap().total;

        let mut fd = Vec::new();
        for l in 0..s.z.len() {
            for i in 0..s.z[l].len() {
                let mut p = s.clone();
                p.z[l].as_slice_mut().unwrap()[i] += h;
                let mut m = s.clone();
                m.z[l].as_slice_mut().unwrap()[i] -= h;
                fd.push((energy(&net, &p) - energy(&net, &m)) / (2.0 * h));
            }
        }
        wa = wa.max(rel_err(&flat(&activity_gradient(&net, &s).unwrap()), &fd));

        let mut fd_w = Vec::new();
        let mut fd_bp = Vec::new();
        for l in 0..net.params.weights.len() {
            for i in 0..net.params.weights[l].len() {
                let mut p = net.clone();
                p.params.weights[l].as_slice_mut().unwrap()[i] += h;
                let mut m = net.clone();
                m.params.weights[l].as_slice_mut().unwrap()[i] -= h;
                fd_w.push((energy(&p, &s) - energy(&m, &s)) / (2.0 * h));
                fd_bp.push((mse_loss(&p, &x, &y).unwrap() - mse_loss(&m, &x, &y).unwrap()) / (2.0 * h));
            }
        }
        ww = ww.max(rel_err(&flat(&weight_gradient(&net, &s).unwrap()), &fd_w));
        wb = wb.max(rel_err(&flat(&backprop_gradient(&net, &x, &y).unwrap().0), &fd_bp));
    }
    let worst = wa.max(ww).max(wb);
    outcome(
        worst <= 1e-5,
        format!("worst relative error: activities {wa:.2e}, weights {ww:.2e}, backprop {wb:.2e}"),
    )
}

fn c7_envelope() -> Outcome {
    let mut rng = RngStream::new(107);
    let mut worst: f64 = 0.0;
    let h = 1e-5;
    for _ in 0..10 {
        let n = 3 + rng.below(6);
        let depth = 2 + rng.below(3);
        let spec = NetworkSpec::new(4, n, depth, 3, Parameterisation::MuPc)
            .with_residual(true)
            .with_seed(rng.next_u64());
        let net = Network::init(spec).unwrap();
        let (x, y) = data(4, 3, 3, &mut rng);
        let eq = |net: &Network| pc_energy(net, &infer_analytic(net, &x, &y).unwrap()).unwrap().total;
        let g = flat(&weight_gradient(&net, &infer_analytic(&net, &x, &y).unwrap()).unwrap());
        let mut fd = Vec::new();
        for l in 0..net.params.weights.len() {
            for i in 0..net.params.weights[l].len() {
                let mut p = net.clone();
                p.params.weights[l].as_slice_mut().unwrap()[i] += h;
                let mut m = net.clone();
                m.params.weights[l].as_slice_mut().unwrap()[i] -= h;
                fd.push((eq(&p) - eq(&m)) / (2.0 * h));
            }
        }
        worst = worst.max(rel_err(&g, &fd));
    }
    outcome(worst <= 1e-4, format!("worst relative error {worst:.3e}"))
}

fn c8_ratio() -> Outcome {
    let cfg: RatioConfig = preset("mupc-h4-init");
    let t = &cfg.run().unwrap()[0];
    let ratios: Vec<(usize, f64)> = t
        .rows
        .iter()
        .map(|r| (t.get(r, "N").parse().unwrap(), t.get_f64(r, "ratio").unwrap()))
        .collect();
    let gaps: Vec<f64> = ratios.iter().map(|(_, r)| (r - 1.0).abs()).collect();
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
    let last = *gaps.last().unwrap();
    let shown: Vec<String> = ratios.iter().map(|(n, r)| format!("N={n}: {r:.4}")).collect();
    outcome(monotone && last <= 0.1, format!("ratio {} (H = 4)", shown.join(", ")))
}

fn c9_activity_decay() -> Outcome {
    let mut rng = RngStream::new(109);
    let mut worst = f64::INFINITY;
    for k in 0..20 {
        let n = 2 + rng.below(31);
        let h = 1 + rng.below(8);
        let net = Network::init(NetworkSpec::new(n, n, h, n, PARAMS[k % 3]).with_seed(rng.next_u64())).unwrap();
        let b = hessian_with_decay(&assemble_linear_hessian(&net, HessianLayout::Supervised).unwrap(), 1.0).unwrap();
        worst = worst.min(condition_number(&b).unwrap().lambda_min);
    }
    outcome(
        worst >= 1.0 - 1e-8,
        format!("smallest lambda_min with decay 1: {worst:.6}"),
    )
}

fn c10_ep_nonconvexity() -> Outcome {
    let net = Network::scalar(Parameterisation::Sp, &[1.0, 2.0], false).unwrap();
    let lmin = condition_number(&assemble_hessian_ep(&net, 0.0, true).unwrap())
        .unwrap()
        .lambda_min;
    outcome((lmin + 1.0).abs() <= 1e-10, format!("lambda_min = {lmin:.12}"))
}

fn c11_forward_stability() -> Outcome {
    let cfg = FwdConfig::default();
    let t = &cfg.run().unwrap()[0];
    let v = |p, a, r, i| Variant {
        param: p,
        activation: a,
        residual: r,
        init: i,
    };
    let mupc = v(Parameterisation::MuPc, Activation::Tanh, true, None);
    let sp_res = v(Parameterisation::Sp, Activation::Linear, true, None);
    let sp_tanh = v(
        Parameterisation::Sp,
        Activation::Tanh,
        false,
        Some(InitScheme::KaimingUniform),
    );
    let mu: Vec<f64> = cfg
        .depths
        .iter()
        .map(|&l| depth_summary(t, &mupc, l).unwrap())
        .collect();
    let band = mu.iter().cloned().fold(f64::MIN, f64::max) / mu.iter().cloned().fold(f64::MAX, f64::min);
    let grow = depth_summary(t, &sp_res, 128).unwrap() / depth_summary(t, &sp_res, 8).unwrap();
    let shrink = depth_summary(t, &sp_tanh, 64).unwrap() / depth_summary(t, &sp_tanh, 8).unwrap();
    outcome(
        band <= 3.0 && grow > 10.0 && shrink < 0.1,
        format!("muPC max/min {band:.3}, SP ResNet L=128/L=8 {grow:.3e}, SP tanh L=64/L=8 {shrink:.3e}"),
    )
}

/// `(H, final test accuracy, diverged_at)` per run.
type RunSummary = (usize, Option<f64>, Option<usize>);

fn mnist_train(cfg: &mut TrainCmdConfig) -> Result<Vec<RunSummary>, String> {
    cfg.data.root = Some(data_root());
    let data = cfg.data.load().map_err(|e| e.to_string())?;
    let runs = cfg.run_grid(&data).map_err(|e| e.to_string())?;
    Ok(runs
        .iter()
        .map(|r| (r.h, r.log.final_test_accuracy, r.log.diverged_at))
        .collect())
}

fn c12_desk_training() -> Outcome {
    let mut cfg: TrainCmdConfig = preset("mupc-desk");
    cfg.lr = MUPC_LR;
    cfg.beta = MUPC_BETA;
    cfg.eval_every = None;
    match mnist_train(&mut cfg) {
        Err(e) => outcome(false, e),
        Ok(r) => {
            let acc = r[0].1.unwrap_or(0.0);
            outcome(
                acc >= 0.90,
                format!("test accuracy {acc:.4} after one epoch (N = 256, H = 16)"),
            )
        }
    }
}

fn c13_depth_robustness() -> Outcome {
    let mut mu: TrainCmdConfig = preset("depth-robustness");
    mu.lr = MUPC_LR;
    mu.beta = MUPC_BETA;
    let mut sp = mu.clone();
    sp.param = Parameterisation::Sp;
    sp.lr = SP_LR;
    sp.beta = SP_BETA;
    let (mu, sp) = match (mnist_train(&mut mu), mnist_train(&mut sp)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return outcome(false, e),
    };
    let acc = |r: &[RunSummary], h: usize| r.iter().find(|x| x.0 == h).and_then(|x| x.1);
    let (m8, m64) = (acc(&mu, 8).unwrap_or(0.0), acc(&mu, 64).unwrap_or(0.0));
    let s8 = acc(&sp, 8).unwrap_or(0.0);
    let s64 = acc(&sp, 64);
    let mu_ok = (m64 - m8).abs() <= 0.05;
    let sp_ok = match s64 {
        None => true,
        Some(a) => s8 - a > 0.15,
    };
    let sp_text = s64.map(|a| format!("{a:.4}")).unwrap_or_else(|| "diverged".into());
    outcome(
        mu_ok && sp_ok,
        format!("muPC H=8 {m8:.4}, H=64 {m64:.4}; SP H=8 {s8:.4}, H=64 {sp_text}"),
    )
}

fn c14_transfer() -> Outcome {
    let mut cfg: TransferConfig = preset("reduced");
    cfg.data.root = Some(data_root());
    let data = match cfg.data.load() {
        Ok(d) => d,
        Err(e) => return outcome(false, e.to_string()),
    };
    let (cells, res) = cfg.run_cells(&data).unwrap();
    let pts = cfg.aggregate(&cells, &res);
    let at = |n, h| argmin_cell(&pts, n, h, &cfg.etas, &cfg.betas);
    let (base, wide, deep) = (at(64, 8), at(128, 8), at(64, 16));
    let near = |a: Option<(usize, usize)>, b: Option<(usize, usize)>| match (a, b) {
        (Some(a), Some(b)) => a.0.abs_diff(b.0) <= 1 && a.1.abs_diff(b.1) <= 1,
        _ => false,
    };
    let name = |c: Option<(usize, usize)>| {
        let etas = pclab_cli::config::sorted(&cfg.etas);
        let betas = pclab_cli::config::sorted(&cfg.betas);
        c.map(|(i, j)| format!("(eta {:e}, beta {:e})", etas[i], betas[j]))
            .unwrap_or_else(|| "none".into())
    };
    outcome(
        near(base, wide) && near(base, deep),
        format!(
            "argmin N=64,H=8 {}; N=128,H=8 {}; N=64,H=16 {}",
            name(base),
            name(wide),
            name(deep)
        ),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

const CRITERIA: &[Criterion] = &[
    (1, "convexity of linear PC inference", c1_convexity),
    (2, "conditioning grows with depth", c2_conditioning_growth),
    (3, "random-matrix extremes", c3_rmt_extremes),
    (4, "analytic vs iterative inference", c4_analytic_vs_iterative),
    (5, "unclamped forward fixed point", c5_unclamped_fixed_point),
    (6, "gradient oracles", c6_gradient_oracles),
    (7, "envelope identity", c7_envelope),
    (8, "loss/energy ratio", c8_ratio),
    (9, "activity decay shift", c9_activity_decay),
    (10, "EP non-convexity", c10_ep_nonconvexity),
    (11, "forward-pass stability", c11_forward_stability),
    (12, "desk-scale training", c12_desk_training),
    (13, "depth robustness", c13_depth_robustness),
    (14, "learning-rate transfer [slow]", c14_transfer),
];

fn main() {
    // libtest flags such as --nocapture may be forwarded; numbers select criteria.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for &(id, name, f) in CRITERIA {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let o = f();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {verdict} {name}: {} [{:.1}s]",
            o.detail,
            t.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
