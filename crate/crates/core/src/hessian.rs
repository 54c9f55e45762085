//! Activity Hessians, their spectra and positive-definiteness checks.

use ndarray::s;
use pclab_linalg::{
    block_det_recurrence, block_schur_complements, block_schur_minors, cholesky, sym_eigvals, Matrix, SignedLog,
};

use crate::energy::{residuals, ActivityState};
use crate::inference::{gradient_from, stack};
use crate::{Network, PcError, Result};

/// Largest dense Hessian (rows) the lab will build.
pub const MAX_HESSIAN_ROWS: usize = 16384;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HessianVariant {
    Fc,
    Resnet1Skip,
    /// Free output layer, no target.
    Unclamped,
    /// Free input layer, clamped output.
    UnsupervisedFc,
    Ep {
        beta: f64,
        l2: bool,
    },
    FiniteDifference,
}

impl HessianVariant {
    pub fn name(&self) -> &'static str {
        match self {
            HessianVariant::Fc => "fc",
            HessianVariant::Resnet1Skip => "resnet_1skip",
            HessianVariant::Unclamped => "unclamped",
            HessianVariant::UnsupervisedFc => "unsupervised_fc",
            HessianVariant::Ep { .. } => "ep",
            HessianVariant::FiniteDifference => "finite_difference",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HessianBundle {
    pub matrix: Matrix,
    pub block_sizes: Vec<usize>,
    pub variant: HessianVariant,
    /// Activity decay already added to the diagonal.
    pub decay: f64,
}

impl HessianBundle {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn block_count(&self) -> usize {
        self.block_sizes.len()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut o = vec![0];
        for s in &self.block_sizes {
            o.push(o.last().unwrap() + s);
        }
        o
    }

    pub fn diag_blocks(&self) -> Vec<Matrix> {
        let o = self.offsets();
        (0..self.block_count())
            .map(|k| self.matrix.slice(s![o[k]..o[k + 1], o[k]..o[k + 1]]).to_owned())
            .collect()
    }

    /// Sub-diagonal blocks at block position `(k + 1, k)`.
    pub fn sub_blocks(&self) -> Vec<Matrix> {
        let o = self.offsets();
        (1..self.block_count())
            .map(|k| self.matrix.slice(s![o[k]..o[k + 1], o[k - 1]..o[k]]).to_owned())
            .collect()
    }

    /// Block-diagonal part `D` and off-diagonal part `O` with `H = D + O`.
    pub fn decompose(&self) -> (Matrix, Matrix) {
        let o = self.offsets();
        let mut d = Matrix::zeros(self.matrix.raw_dim());
        for k in 0..self.block_count() {
            d.slice_mut(s![o[k]..o[k + 1], o[k]..o[k + 1]])
                .assign(&self.matrix.slice(s![o[k]..o[k + 1], o[k]..o[k + 1]]));
        }
        let off = &self.matrix - &d;
        (d, off)
    }

    /// True when every entry outside the three block diagonals is zero.
    pub fn is_block_tridiagonal(&self) -> bool {
        let o = self.offsets();
        let n = self.block_count();
        for bi in 0..n {
            for bj in 0..n {
                if bi.abs_diff(bj) > 1
                    && self
                        .matrix
                        .slice(s![o[bi]..o[bi + 1], o[bj]..o[bj + 1]])
                        .iter()
                        .any(|&v| v != 0.0)
                {
                    return false;
                }
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianLayout {
    /// Input and output clamped; free `z_1..z_H`.
    Supervised,
    /// Output free; free `z_1..z_L`.
    Unclamped,
    /// Input free, output clamped; free `z_0..z_H`.
    Unsupervised,
}

fn check_cap(rows: usize) -> Result<()> {
    if rows > MAX_HESSIAN_ROWS {
        return Err(PcError::ResourceCap {
            rows,
            cap: MAX_HESSIAN_ROWS,
        });
    }
    Ok(())
}

fn require_linear(net: &Network) -> Result<()> {
    if !net.is_linear() {
        return Err(PcError::Unsupported(
            "analytic Hessians need linear activations; use hessian_fd".into(),
        ));
    }
    Ok(())
}

/// Hessian of the per-sample energy of a linear network with layer maps
/// `B_l = a_l W_l + tau_l I`: diagonal blocks `[l >= 1] I + B_{l+1}^T B_{l+1}`
/// (the second term only for `l < L`) and sub-diagonal blocks `-B_l`.
pub fn assemble_linear_hessian(net: &Network, layout: HessianLayout) -> Result<HessianBundle> {
    require_linear(net)?;
    let depth = net.depth();
    let dims = net.dims();
    let free: Vec<usize> = match layout {
        HessianLayout::Supervised => (1..depth).collect(),
        HessianLayout::Unclamped => (1..=depth).collect(),
        HessianLayout::Unsupervised => (0..depth).collect(),
    };
    let block_sizes: Vec<usize> = free.iter().map(|&l| dims[l]).collect();
    let n: usize = block_sizes.iter().sum();
    check_cap(n)?;
    let maps: Vec<Matrix> = (1..=depth).map(|l| net.layer_map(l)).collect();
    let mut h = Matrix::zeros((n, n));
    let mut start = 0;
    let mut prev_start = 0;
    for (k, &l) in free.iter().enumerate() {
        let size = dims[l];
        {
            let mut blk = h.slice_mut(s![start..start + size, start..start + size]);
            if l >= 1 {
                for i in 0..size {
                    blk[[i, i]] += 1.0;
                }
            }
            if l < depth {
                let b = &maps[l];
                blk += &b.t().dot(b);
            }
        }
        if k > 0 {
            let b = &maps[l - 1];
            let psize = dims[l - 1];
            h.slice_mut(s![start..start + size, prev_start..prev_start + psize])
                .assign(&(-b));
            h.slice_mut(s![prev_start..prev_start + psize, start..start + size])
                .assign(&(-&b.t()));
        }
        prev_start = start;
        start += size;
    }
    let variant = match layout {
        HessianLayout::Supervised if net.spec.residual => HessianVariant::Resnet1Skip,
        HessianLayout::Supervised => HessianVariant::Fc,
        HessianLayout::Unclamped => HessianVariant::Unclamped,
        HessianLayout::Unsupervised => HessianVariant::UnsupervisedFc,
    };
    Ok(HessianBundle {
        matrix: h,
        block_sizes,
        variant,
        decay: 0.0,
    })
}

/// Fully connected linear network (no skips).
pub fn assemble_hessian_fc(net: &Network) -> Result<HessianBundle> {
    if net.spec.residual {
        return Err(PcError::Unsupported(
            "network has skips; use assemble_hessian_resnet".into(),
        ));
    }
    assemble_linear_hessian(net, HessianLayout::Supervised)
}

/// Linear 1-skip ResNet: diagonal blocks `2I + a^2 W^T W + a(W + W^T)` except
/// the last, `I + a_L^2 W_L^T W_L`; off-diagonal blocks `-(aW + I)`.
pub fn assemble_hessian_resnet(net: &Network) -> Result<HessianBundle> {
    if !net.spec.residual {
        return Err(PcError::Unsupported(
            "network has no skips; use assemble_hessian_fc".into(),
        ));
    }
    assemble_linear_hessian(net, HessianLayout::Supervised)
}

pub fn assemble_hessian_unsupervised(net: &Network) -> Result<HessianBundle> {
    assemble_linear_hessian(net, HessianLayout::Unsupervised)
}

/// Equilibrium-propagation Hessian over `z_1..z_L`: identity diagonal blocks
/// (dropped when `l2` is false), `beta I` added on the output block and
/// off-diagonal blocks `-a_l W_l`.
pub fn assemble_hessian_ep(net: &Network, beta: f64, l2: bool) -> Result<HessianBundle> {
    require_linear(net)?;
    if net.spec.residual {
        return Err(PcError::Unsupported("EP Hessian is defined without skips".into()));
    }
    if !(beta >= 0.0) {
        return Err(PcError::InvalidArgument(format!("nudge must be >= 0, got {beta}")));
    }
    let depth = net.depth();
    let dims = net.dims();
    let block_sizes: Vec<usize> = dims[1..].to_vec();
    let n: usize = block_sizes.iter().sum();
    check_cap(n)?;
    let mut h = Matrix::zeros((n, n));
    let mut start = 0;
    let mut prev_start = 0;
    for l in 1..=depth {
        let size = dims[l];
        let diag = if l2 { 1.0 } else { 0.0 } + if l == depth { beta } else { 0.0 };
        for i in 0..size {
            h[[start + i, start + i]] = diag;
        }
        if l > 1 {
            let w = net.weight(l) * net.a(l);
            let psize = dims[l - 1];
            h.slice_mut(s![start..start + size, prev_start..prev_start + psize])
                .assign(&(-&w));
            h.slice_mut(s![prev_start..prev_start + psize, start..start + size])
                .assign(&(-&w.t()));
        }
        prev_start = start;
        start += size;
    }
    Ok(HessianBundle {
        matrix: h,
        block_sizes,
        variant: HessianVariant::Ep { beta, l2 },
        decay: 0.0,
    })
}

/// Central finite differences of the activity gradient of a single-sample
/// state, with step `1e-5 max(1, |z_i|)`, symmetrised.
pub fn hessian_fd(net: &Network, state: &ActivityState) -> Result<HessianBundle> {
    state.check(net)?;
    if state.batch_size() != 1 {
        return Err(PcError::InvalidArgument(format!(
            "finite-difference Hessian needs a single sample, got {}",
            state.batch_size()
        )));
    }
    let block_sizes: Vec<usize> = state.z.iter().map(|z| z.nrows()).collect();
    let n: usize = block_sizes.iter().sum();
    check_cap(n)?;
    let drive = net.predict(1, &state.x, &state.x);
    let grad_at = |s: &ActivityState| -> Matrix {
        let r = residuals(net, s, Some(&drive));
        stack(&gradient_from(net, s, &r, 0.0))
    };
    let mut h = Matrix::zeros((n, n));
    let mut work = state.clone();
    let mut col = 0;
    for l in 0..work.z.len() {
        for i in 0..block_sizes[l] {
            let z0 = work.z[l][[i, 0]];
            let step = 1e-5 * z0.abs().max(1.0);
            if z0 + step == z0 || z0 - step == z0 {
                return Err(PcError::Degenerate(format!(
                    "finite-difference step underflows at coordinate {col}"
                )));
            }
            work.z[l][[i, 0]] = z0 + step;
            let gp = grad_at(&work);
            work.z[l][[i, 0]] = z0 - step;
            let gm = grad_at(&work);
            work.z[l][[i, 0]] = z0;
            let inv = 1.0 / (2.0 * step);
            for r in 0..n {
                h[[r, col]] = (gp[[r, 0]] - gm[[r, 0]]) * inv;
            }
            col += 1;
        }
    }
    let sym = (&h + &h.t()) * 0.5;
    Ok(HessianBundle {
        matrix: sym,
        block_sizes,
        variant: HessianVariant::FiniteDifference,
        decay: 0.0,
    })
}

/// Adds `alpha I`, the Hessian of the activity decay `(alpha/2) |z|^2`.
pub fn hessian_with_decay(bundle: &HessianBundle, alpha: f64) -> Result<HessianBundle> {
    if !(alpha >= 0.0) {
        return Err(PcError::InvalidArgument(format!("decay must be >= 0, got {alpha}")));
    }
    let mut out = bundle.clone();
    for i in 0..out.dim() {
        out.matrix[[i, i]] += alpha;
    }
    out.decay += alpha;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSummary {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `|lambda_max| / |lambda_min|`; `+inf` when `lambda_min = 0`.
    pub kappa: f64,
    pub eigenvalues: Option<Vec<f64>>,
}

pub fn kappa_of(lambda_min: f64, lambda_max: f64) -> f64 {
    if lambda_min == 0.0 {
        f64::INFINITY
    } else {
        lambda_max.abs() / lambda_min.abs()
    }
}

pub fn spectrum_summary(bundle: &HessianBundle, keep_eigenvalues: bool) -> Result<SpectrumSummary> {
    if bundle.dim() == 0 {
        return Err(PcError::Degenerate("empty Hessian has no spectrum".into()));
    }
    let spec = sym_eigvals(&bundle.matrix)?;
    let (lo, hi) = (spec.min(), spec.max());
    Ok(SpectrumSummary {
        lambda_min: lo,
        lambda_max: hi,
        kappa: kappa_of(lo, hi),
        eigenvalues: keep_eigenvalues.then_some(spec.values),
    })
}

pub fn condition_number(bundle: &HessianBundle) -> Result<SpectrumSummary> {
    spectrum_summary(bundle, false)
}

/// Eigenvalues (ascending) of `D` and of `O`. The spectrum of `D` is the
/// union of its diagonal blocks' spectra.
pub fn hessian_decomposition_spectra(bundle: &HessianBundle) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut d = Vec::with_capacity(bundle.dim());
    for blk in bundle.diag_blocks() {
        d.extend(sym_eigvals(&blk)?.values);
    }
    d.sort_by(f64::total_cmp);
    let (_, off) = bundle.decompose();
    let o = sym_eigvals(&off)?.values;
    Ok((d, o))
}

/// Reference extremes of the unit-shifted Marchenko-Pastur law for `D`, the
/// semicircle for `O`, and the Weyl bounds for `H = D + O`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmtPrediction {
    pub d_extremes: (f64, f64),
    pub o_extremes: (f64, f64),
    pub weyl_upper: f64,
    pub weyl_lower: f64,
}

pub const RMT_PREDICTION: RmtPrediction = RmtPrediction {
    d_extremes: (1.0, 5.0),
    o_extremes: (-2.0, 2.0),
    weyl_upper: 7.0,
    weyl_lower: -1.0,
};

/// Spectral edge of the off-diagonal part for `blocks` coupled blocks of
/// square Gaussian matrices with entry variance `1/N`: the block path
/// graph contributes `2 cos(pi / (blocks + 1))` to the squared edge,
/// i.e. `2 sqrt(2 cos(pi / (blocks + 1)))`, which is above 2 for
/// `blocks >= 3`.
pub fn block_tridiagonal_edge(blocks: usize) -> f64 {
    if blocks < 2 {
        return 0.0;
    }
    2.0 * (2.0 * (std::f64::consts::PI / (blocks as f64 + 1.0)).cos()).sqrt()
}

#[derive(Debug, Clone)]
pub struct SylvesterReport {
    /// Decided by block Cholesky of the Schur complements.
    pub positive_definite: bool,
    /// `[D_0, ..., D_H]` from the scalar-style block recurrence; `None` when
    /// some off-diagonal block is not square.
    pub recurrence: Option<Vec<SignedLog>>,
    pub recurrence_positive: Option<bool>,
    /// Exact leading block minors `[1, M_1, ..., M_H]`.
    pub block_minors: Vec<SignedLog>,
    pub lambda_min: f64,
}

impl SylvesterReport {
    /// Whether the verdict agrees with the sign of the smallest eigenvalue.
    pub fn agrees_with_spectrum(&self, tol: f64) -> bool {
        if self.lambda_min.abs() <= tol {
            return true;
        }
        self.positive_definite == (self.lambda_min > 0.0)
    }
}

pub fn sylvester_pd_check(bundle: &HessianBundle) -> Result<SylvesterReport> {
    if bundle.dim() == 0 {
        return Err(PcError::Degenerate("empty Hessian".into()));
    }
    let diag = bundle.diag_blocks();
    let off = bundle.sub_blocks();
    let square = off.iter().all(|o| o.nrows() == o.ncols());
    let recurrence = if square {
        Some(block_det_recurrence(&diag, &off)?)
    } else {
        None
    };
    let recurrence_positive = recurrence.as_ref().map(|r| r.iter().all(|d| d.is_positive()));
    let positive_definite = match block_schur_complements(&diag, &off) {
        Ok(schur) => schur.iter().all(|s| cholesky(s).is_ok()),
        Err(pclab_linalg::LinalgError::Singular(_)) => false,
        Err(e) => return Err(e.into()),
    };
    let block_minors = match block_schur_minors(&diag, &off) {
        Ok(m) => m,
        Err(pclab_linalg::LinalgError::Singular(_)) => vec![SignedLog::ZERO; diag.len() + 1],
        Err(e) => return Err(e.into()),
    };
    let lambda_min = sym_eigvals(&bundle.matrix)?.min();
    Ok(SylvesterReport {
        positive_definite,
        recurrence,
        recurrence_positive,
        block_minors,
        lambda_min,
    })
}
