//! Architecture, parameterisation and forward pass.

use ndarray::Zip;
use pclab_linalg::{gaussian_matrix, orthogonal_init, uniform_matrix, Matrix, RngStream};
use serde::{Deserialize, Serialize};

use crate::{PcError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Tanh,
    Relu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }

    pub fn apply(self, z: &Matrix) -> Matrix {
        match self {
            Activation::Linear => z.clone(),
            Activation::Tanh => z.mapv(f64::tanh),
            Activation::Relu => z.mapv(|v| v.max(0.0)),
        }
    }

    /// Elementwise derivative. ReLU'(0) is taken to be 0.
    pub fn derivative(self, z: &Matrix) -> Matrix {
        match self {
            Activation::Linear => Matrix::ones(z.raw_dim()),
            Activation::Tanh => z.mapv(|v| {
                let t = v.tanh();
                1.0 - t * t
            }),
            Activation::Relu => z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = PcError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Activation::Linear),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            _ => Err(PcError::InvalidSpec(format!("unknown activation '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parameterisation {
    #[serde(rename = "sp")]
    Sp,
    #[serde(rename = "mupc")]
    MuPc,
    #[serde(rename = "orthogonal")]
    Orthogonal,
}

impl Parameterisation {
    pub fn name(self) -> &'static str {
        match self {
            Parameterisation::Sp => "sp",
            Parameterisation::MuPc => "mupc",
            Parameterisation::Orthogonal => "orthogonal",
        }
    }
}

impl std::str::FromStr for Parameterisation {
    type Err = PcError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sp" => Ok(Parameterisation::Sp),
            "mupc" | "mu_pc" | "µpc" => Ok(Parameterisation::MuPc),
            "orthogonal" => Ok(Parameterisation::Orthogonal),
            _ => Err(PcError::InvalidSpec(format!("unknown parameterisation '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    Gaussian,
    /// Uniform on `(-sqrt(b_l), sqrt(b_l))`; under SP that is
    /// `(-1/sqrt(N_{l-1}), 1/sqrt(N_{l-1}))`.
    KaimingUniform,
    Orthogonal,
}

impl InitScheme {
    pub fn name(self) -> &'static str {
        match self {
            InitScheme::Gaussian => "gaussian",
            InitScheme::KaimingUniform => "kaiming_uniform",
            InitScheme::Orthogonal => "orthogonal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub d_in: usize,
    pub width: usize,
    pub hidden: usize,
    pub d_out: usize,
    pub activation: Activation,
    /// 1-skip connections on layers `2..=H`. Input and output layers never
    /// carry a skip.
    pub residual: bool,
    pub param: Parameterisation,
    pub init: InitScheme,
    pub seed: u64,
}

impl NetworkSpec {
    /// Linear, no skips, default init for `param`, seed 0.
    pub fn new(d_in: usize, width: usize, hidden: usize, d_out: usize, param: Parameterisation) -> Self {
        let init = match param {
            Parameterisation::Orthogonal => InitScheme::Orthogonal,
            _ => InitScheme::Gaussian,
        };
        NetworkSpec {
            d_in,
            width,
            hidden,
            d_out,
            activation: Activation::Linear,
            residual: false,
            param,
            init,
            seed: 0,
        }
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn with_residual(mut self, residual: bool) -> Self {
        self.residual = residual;
        self
    }

    pub fn with_init(mut self, init: InitScheme) -> Self {
        self.init = init;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn depth(&self) -> usize {
        self.hidden + 1
    }

    /// `[N_0, N_1, ..., N_L]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden + 2);
        d.push(self.d_in);
        d.extend(std::iter::repeat_n(self.width, self.hidden));
        d.push(self.d_out);
        d
    }

    /// Skip coefficient of layer `l` (1-based).
    pub fn tau(&self, l: usize) -> f64 {
        if self.residual && l >= 2 && l <= self.hidden {
            1.0
        } else {
            0.0
        }
    }

    pub fn is_linear(&self) -> bool {
        self.activation == Activation::Linear
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_in == 0 || self.d_out == 0 {
            return Err(PcError::InvalidSpec("d_in and d_out must be positive".into()));
        }
        if self.hidden > 0 && self.width == 0 {
            return Err(PcError::InvalidSpec("hidden width must be positive".into()));
        }
        if self.param == Parameterisation::Orthogonal && self.init != InitScheme::Orthogonal {
            return Err(PcError::InvalidSpec(
                "orthogonal parameterisation requires orthogonal init".into(),
            ));
        }
        Ok(())
    }
}

/// Premultipliers `a_l` and init variances `b_l`, `l = 1..=L`.
pub fn make_premultipliers(spec: &NetworkSpec) -> (Vec<f64>, Vec<f64>) {
    let dims = spec.dims();
    let l_total = spec.depth();
    let fan_in = |l: usize| dims[l - 1] as f64;
    match spec.param {
        Parameterisation::Sp | Parameterisation::Orthogonal => {
            let a = vec![1.0; l_total];
            let b = (1..=l_total).map(|l| 1.0 / fan_in(l)).collect();
            (a, b)
        }
        Parameterisation::MuPc => {
            let a = (1..=l_total)
                .map(|l| {
                    if l == 1 {
                        fan_in(1).powf(-0.5)
                    } else if l == l_total {
                        1.0 / fan_in(l)
                    } else {
                        (fan_in(l) * l_total as f64).powf(-0.5)
                    }
                })
                .collect();
            (a, vec![1.0; l_total])
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    /// `W_l` of shape `N_l x N_{l-1}`, stored at index `l - 1`.
    pub weights: Vec<Matrix>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// Preactivations `z_1..z_L` of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub z: Vec<Matrix>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Matrix {
        self.z.last().expect("at least one layer")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: NetworkSpec,
    pub params: ParameterSet,
}

impl Network {
    /// Draws weights according to `spec.init`. Layer `l` uses the child stream
    /// `split(l)` of `spec.seed`, so widths of other layers do not perturb it.
    pub fn init(spec: NetworkSpec) -> Result<Network> {
        spec.validate()?;
        let (a, b) = make_premultipliers(&spec);
        let dims = spec.dims();
        let root = RngStream::new(spec.seed);
        let weights = (1..=spec.depth())
            .map(|l| {
                let mut rng = root.split(l as u64);
                let (rows, cols) = (dims[l], dims[l - 1]);
                match spec.init {
                    InitScheme::Gaussian => gaussian_matrix(rows, cols, b[l - 1], &mut rng),
                    InitScheme::KaimingUniform => uniform_matrix(rows, cols, b[l - 1].sqrt(), &mut rng),
                    InitScheme::Orthogonal => orthogonal_init(rows, cols, &mut rng),
                }
            })
            .collect();
        Ok(Network {
            spec,
            params: ParameterSet { weights, a, b },
        })
    }

    /// Explicit weights with the premultipliers of the given `NetworkSpec`.
    pub fn from_weights(spec: NetworkSpec, weights: Vec<Matrix>) -> Result<Network> {
        spec.validate()?;
        let dims = spec.dims();
        if weights.len() != spec.depth() {
            return Err(PcError::Dimension(format!(
                "expected {} weight matrices, got {}",
                spec.depth(),
                weights.len()
            )));
        }
        for (k, w) in weights.iter().enumerate() {
            if w.dim() != (dims[k + 1], dims[k]) {
                return Err(PcError::Dimension(format!(
                    "W_{} is {:?}, expected {:?}",
                    k + 1,
                    w.dim(),
                    (dims[k + 1], dims[k])
                )));
            }
        }
        let (a, b) = make_premultipliers(&spec);
        Ok(Network {
            spec,
            params: ParameterSet { weights, a, b },
        })
    }

    /// Scalar network (all dims 1) with the given weights, convenient for
    /// hand-checkable cases.
    pub fn scalar(param: Parameterisation, weights: &[f64], residual: bool) -> Result<Network> {
        if weights.is_empty() {
            return Err(PcError::InvalidSpec("need at least one weight".into()));
        }
        let spec = NetworkSpec::new(1, 1, weights.len() - 1, 1, param).with_residual(residual);
        let spec = if param == Parameterisation::Orthogonal {
            spec
        } else {
            spec.with_init(InitScheme::Gaussian)
        };
        let w = weights.iter().map(|&v| Matrix::from_elem((1, 1), v)).collect();
        Network::from_weights(spec, w)
    }

    pub fn with_premultipliers(mut self, a: Vec<f64>) -> Result<Network> {
        if a.len() != self.depth() || a.iter().any(|v| !(*v > 0.0)) {
            return Err(PcError::InvalidSpec(
                "premultipliers must be positive, one per layer".into(),
            ));
        }
        self.params.a = a;
        Ok(self)
    }

    pub fn zeroed(mut self) -> Network {
        for w in &mut self.params.weights {
            w.fill(0.0);
        }
        self
    }

    pub fn depth(&self) -> usize {
        self.spec.depth()
    }

    pub fn hidden(&self) -> usize {
        self.spec.hidden
    }

    pub fn dims(&self) -> Vec<usize> {
        self.spec.dims()
    }

    pub fn weight(&self, l: usize) -> &Matrix {
        &self.params.weights[l - 1]
    }

    pub fn a(&self, l: usize) -> f64 {
        self.params.a[l - 1]
    }

    pub fn tau(&self, l: usize) -> f64 {
        self.spec.tau(l)
    }

    pub fn activation(&self) -> Activation {
        self.spec.activation
    }

    pub fn is_linear(&self) -> bool {
        self.spec.is_linear()
    }

    /// Linear layer map `B_l = a_l W_l + tau_l I`.
    pub fn layer_map(&self, l: usize) -> Matrix {
        let mut m = self.weight(l) * self.a(l);
        let tau = self.tau(l);
        if tau != 0.0 {
            for i in 0..m.nrows() {
                m[[i, i]] += tau;
            }
        }
        m
    }

    /// Input to the weights of layer `l`: `x` for the first layer, otherwise
    /// `phi(z_{l-1})`.
    pub(crate) fn layer_input(&self, l: usize, prev: &Matrix) -> Matrix {
        if l == 1 {
            prev.clone()
        } else {
            self.activation().apply(prev)
        }
    }

    /// Prediction of layer `l` from `z_{l-1}` (or `x`) and, when already
    /// computed, `phi(z_{l-1})`.
    pub(crate) fn predict(&self, l: usize, prev: &Matrix, prev_act: &Matrix) -> Matrix {
        let mut mu = self.weight(l).dot(prev_act);
        let a = self.a(l);
        let tau = self.tau(l);
        if tau != 0.0 {
            Zip::from(&mut mu).and(prev).for_each(|m, &p| *m = a * *m + tau * p);
        } else if a != 1.0 {
            mu *= a;
        }
        mu
    }

    pub(crate) fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.nrows() != self.spec.d_in {
            return Err(PcError::Dimension(format!(
                "input has {} rows, network expects {}",
                x.nrows(),
                self.spec.d_in
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Matrix) -> Result<ForwardTrace> {
        self.check_input(x)?;
        let mut z: Vec<Matrix> = Vec::with_capacity(self.depth());
        for l in 1..=self.depth() {
            let prev = if l == 1 { x } else { &z[l - 2] };
            let act = self.layer_input(l, prev);
            z.push(self.predict(l, prev, &act));
        }
        Ok(ForwardTrace { z })
    }

    pub fn output(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward(x)?.z.pop().expect("at least one layer"))
    }
}

/// Per-layer mean `|z_l|_1 / N_l` of the forward pass over `n_samples`
/// standard Gaussian inputs drawn from `rng`. Weights come from `spec.seed`.
pub fn forward_norm_profile(spec: &NetworkSpec, rng: &mut RngStream, n_samples: usize) -> Result<Vec<f64>> {
    if n_samples == 0 {
        return Err(PcError::InvalidArgument("n_samples must be positive".into()));
    }
    let net = Network::init(spec.clone())?;
    let x = gaussian_matrix(spec.d_in, n_samples, 1.0, rng);
    let trace = net.forward(&x)?;
    Ok(trace
        .z
        .iter()
        .map(|z| z.mapv(f64::abs).sum() / (z.nrows() * n_samples) as f64)
        .collect())
}
