//! Trainable MLP potential with exact layer-wise derivatives.
//!
//! Time is fed as an extra input coordinate, so the network maps
//! `z = (x, t) ∈ ℝ^{d+1}` to a scalar through fully-connected layers with a
//! smooth activation. Everything downstream needs exact derivatives of the
//! scalar output:
//!
//! - input gradient `(∇_x s, ∂s/∂t)` — one reverse sweep;
//! - Laplacian `Δ_x s` — a sum of `d` second directional derivatives along
//!   the coordinate axes, each from a forward tangent/curvature sweep;
//! - second directional derivatives `vᵀ(∇²s)v` for arbitrary spatial `v`;
//! - parameter gradients of any functional of the above — one combined
//!   reverse sweep through the value, tangent, and curvature recurrences.
//!
//! For the parameter gradient of a functional `F`, the gradient cotangent
//! `γ = ∂F/∂(∇s, ∂s/∂t)` is handled by differentiating a fresh forward
//! tangent sweep along the constant direction `γ` (the directional
//! derivative `⟨∇s, γ⟩` equals that sweep's output, so its parameter
//! gradient is obtained by ordinary backpropagation through the sweep).
//! Curvature cotangents require the activation's third derivative, hence
//! the `C²`-and-smoother whitelist.
//!
//! At the dimensions this crate targets (`d ≤ 16`) the exact `O(d)` passes
//! beat stochastic trace estimation, so no Hutchinson-style estimator is
//! provided. All arithmetic is in `f64`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::{
    check_point, ActionField, Activation, DifferentiableField, FieldError, FieldJet, JetRequest,
    PointCotangents, PointEval,
};

/// Fully-connected scalar field over `(x, t)`.
///
/// Re-creating a field with identical `(input_dim, widths, activation,
/// seed)` yields bitwise-identical parameters.
#[derive(Debug, Clone)]
pub struct MlpField {
    input_dim: usize,
    widths: Vec<usize>,
    activation: Activation,
    seed: u64,
    params: Vec<f64>,
    // Offsets into `params`, per hidden layer.
    w_off: Vec<usize>,
    b_off: Vec<usize>,
    out_w_off: usize,
    out_c_off: usize,
}

impl MlpField {
    /// Builds a field with deterministic symmetric-uniform fan-in
    /// initialization (biases zero).
    pub fn new(
        input_dim: usize,
        hidden_widths: &[usize],
        activation: Activation,
        seed: u64,
    ) -> Result<Self, FieldError> {
        if input_dim == 0 {
            return Err(FieldError::ZeroInputDim);
        }
        if hidden_widths.is_empty() {
            return Err(FieldError::EmptyWidths);
        }
        if hidden_widths.contains(&0) {
            return Err(FieldError::ZeroWidth);
        }
        let mut field = Self::layout(input_dim, hidden_widths.to_vec(), activation, seed);
        field.init_params();
        Ok(field)
    }

    /// Rebuilds a field from explicit parameters (checkpoint restore).
    pub fn from_params(
        input_dim: usize,
        hidden_widths: &[usize],
        activation: Activation,
        seed: u64,
        params: Vec<f64>,
    ) -> Result<Self, FieldError> {
        let mut field = Self::new(input_dim, hidden_widths, activation, seed)?;
        if params.len() != field.params.len() {
            return Err(FieldError::ParamCount { expected: field.params.len(), got: params.len() });
        }
        field.params = params;
        Ok(field)
    }

    fn layout(input_dim: usize, widths: Vec<usize>, activation: Activation, seed: u64) -> Self {
        let mut sizes = Vec::with_capacity(widths.len() + 1);
        sizes.push(input_dim + 1);
        sizes.extend_from_slice(&widths);
        let mut w_off = Vec::new();
        let mut b_off = Vec::new();
        let mut off = 0;
        for l in 0..widths.len() {
            w_off.push(off);
            off += sizes[l + 1] * sizes[l];
            b_off.push(off);
            off += sizes[l + 1];
        }
        let out_w_off = off;
        off += *sizes.last().unwrap();
        let out_c_off = off;
        off += 1;
        MlpField {
            input_dim,
            widths,
            activation,
            seed,
            params: vec![0.0; off],
            w_off,
            b_off,
            out_w_off,
            out_c_off,
        }
    }

    fn init_params(&mut self) {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        let sizes = self.layer_sizes();
        for l in 0..self.widths.len() {
            let bound = 1.0 / (sizes[l] as f64).sqrt();
            let (n_out, n_in) = (sizes[l + 1], sizes[l]);
            for k in 0..n_out * n_in {
                self.params[self.w_off[l] + k] = (2.0 * rng.random::<f64>() - 1.0) * bound;
            }
            // biases stay zero
        }
        let bound = 1.0 / (*sizes.last().unwrap() as f64).sqrt();
        for k in 0..*sizes.last().unwrap() {
            self.params[self.out_w_off + k] = (2.0 * rng.random::<f64>() - 1.0) * bound;
        }
    }

    /// Layer input sizes: `[d+1, n_1, ..., n_L]`.
    fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.widths.len() + 1);
        sizes.push(self.input_dim + 1);
        sizes.extend_from_slice(&self.widths);
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<(), FieldError> {
        if params.len() != self.params.len() {
            return Err(FieldError::ParamCount { expected: self.params.len(), got: params.len() });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    #[inline]
    fn weights(&self, l: usize) -> &[f64] {
        let sizes = [self.in_size(l), self.out_size(l)];
        &self.params[self.w_off[l]..self.w_off[l] + sizes[0] * sizes[1]]
    }

    #[inline]
    fn biases(&self, l: usize) -> &[f64] {
        &self.params[self.b_off[l]..self.b_off[l] + self.out_size(l)]
    }

    #[inline]
    fn out_w(&self) -> &[f64] {
        &self.params[self.out_w_off..self.out_w_off + *self.widths.last().unwrap()]
    }

    #[inline]
    fn in_size(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim + 1
        } else {
            self.widths[l - 1]
        }
    }

    #[inline]
    fn out_size(&self, l: usize) -> usize {
        self.widths[l]
    }

    /// `out = W_l · v`
    fn matvec(&self, l: usize, v: &[f64], out: &mut [f64]) {
        let (n_in, n_out) = (self.in_size(l), self.out_size(l));
        let w = self.weights(l);
        for i in 0..n_out {
            let row = &w[i * n_in..(i + 1) * n_in];
            let mut acc = 0.0;
            for j in 0..n_in {
                acc += row[j] * v[j];
            }
            out[i] = acc;
        }
    }

    /// `out = W_lᵀ · v`
    fn matvec_t(&self, l: usize, v: &[f64], out: &mut [f64]) {
        let (n_in, n_out) = (self.in_size(l), self.out_size(l));
        let w = self.weights(l);
        out[..n_in].fill(0.0);
        for i in 0..n_out {
            let row = &w[i * n_in..(i + 1) * n_in];
            let vi = v[i];
            for j in 0..n_in {
                out[j] += row[j] * vi;
            }
        }
    }

    /// `grad[W_l] += left ⊗ right`
    fn outer_acc(&self, l: usize, left: &[f64], right: &[f64], grad: &mut [f64]) {
        let (n_in, n_out) = (self.in_size(l), self.out_size(l));
        let base = self.w_off[l];
        for i in 0..n_out {
            let li = left[i];
            if li == 0.0 {
                continue;
            }
            let row = &mut grad[base + i * n_in..base + (i + 1) * n_in];
            for j in 0..n_in {
                row[j] += li * right[j];
            }
        }
    }
}

#[inline]
fn act_eval(act: Activation, a: f64) -> (f64, f64, f64) {
    match act {
        Activation::Tanh => {
            let t = a.tanh();
            let d1 = 1.0 - t * t;
            (t, d1, -2.0 * t * d1)
        }
        Activation::Softplus => {
            let s = if a >= 0.0 { 1.0 / (1.0 + (-a).exp()) } else { let e = a.exp(); e / (1.0 + e) };
            let v = if a > 0.0 { a + (-a).exp().ln_1p() } else { a.exp().ln_1p() };
            (v, s, s * (1.0 - s))
        }
    }
}

/// Third derivative reconstructed from the stored `(value, d1, d2)` triple.
#[inline]
fn act_d3(act: Activation, value: f64, d1: f64, d2: f64) -> f64 {
    match act {
        Activation::Tanh => d1 * (6.0 * value * value - 2.0),
        Activation::Softplus => d2 * (1.0 - 2.0 * d1),
    }
}

#[derive(Debug, Clone, Default)]
struct DirStream {
    /// `ȧ_l` per layer (tangent pre-activations).
    ad: Vec<Vec<f64>>,
    /// `ḣ_l` per level 0..=L (`ḣ_0` is the direction embedding).
    hd: Vec<Vec<f64>>,
    /// `ä_l` per layer.
    add: Vec<Vec<f64>>,
    /// `ḧ_l` per level 0..=L (`ḧ_0 = 0`).
    hdd: Vec<Vec<f64>>,
    /// Cotangent ping-pong buffers for the backward sweep.
    chd_cur: Vec<f64>,
    chd_nxt: Vec<f64>,
    chdd_cur: Vec<f64>,
    chdd_nxt: Vec<f64>,
}

/// Reusable evaluation state for one point at a time.
#[derive(Debug, Clone)]
pub struct MlpWorkspace {
    /// Activations per level 0..=L (`h_0` is the input embedding).
    h: Vec<Vec<f64>>,
    /// Activation derivative triples per hidden layer.
    act: Vec<Vec<f64>>,
    d1: Vec<Vec<f64>>,
    d2: Vec<Vec<f64>>,
    /// Input gradient of the value head, length `d+1`.
    g: Vec<f64>,
    /// Second-order streams: coordinate axes first (when the Laplacian is
    /// requested), then extra requested directions.
    dirs: Vec<DirStream>,
    n_axis_dirs: usize,
    n_extra_dirs: usize,
    /// Tangent sweep along the gradient cotangent direction.
    ag: Vec<Vec<f64>>,
    hg: Vec<Vec<f64>>,
    // Backward scratch.
    ca: Vec<f64>,
    cad: Vec<f64>,
    cadd: Vec<f64>,
    ch_cur: Vec<f64>,
    ch_nxt: Vec<f64>,
    cg_cur: Vec<f64>,
    cg_nxt: Vec<f64>,
    scratch_a: Vec<f64>,
    scratch_b: Vec<f64>,
    max_width: usize,
}

impl MlpWorkspace {
    fn new(field: &MlpField) -> Self {
        let sizes = field.layer_sizes();
        let levels: Vec<usize> = sizes.clone();
        let n_layers = field.widths.len();
        let max_width = *sizes.iter().max().unwrap();
        let per_level = |filled: bool| -> Vec<Vec<f64>> {
            levels.iter().map(|&n| vec![0.0; if filled { n } else { n }]).collect()
        };
        let per_layer = || -> Vec<Vec<f64>> { (0..n_layers).map(|l| vec![0.0; sizes[l + 1]]).collect() };
        MlpWorkspace {
            h: per_level(true),
            act: per_layer(),
            d1: per_layer(),
            d2: per_layer(),
            g: vec![0.0; field.input_dim + 1],
            dirs: Vec::new(),
            n_axis_dirs: 0,
            n_extra_dirs: 0,
            ag: per_layer(),
            hg: per_level(true),
            ca: vec![0.0; max_width],
            cad: vec![0.0; max_width],
            cadd: vec![0.0; max_width],
            ch_cur: vec![0.0; max_width],
            ch_nxt: vec![0.0; max_width],
            cg_cur: vec![0.0; max_width],
            cg_nxt: vec![0.0; max_width],
            scratch_a: vec![0.0; max_width],
            scratch_b: vec![0.0; max_width],
            max_width,
        }
    }

    fn ensure_dirs(&mut self, n: usize, field: &MlpField) {
        let sizes = field.layer_sizes();
        while self.dirs.len() < n {
            let n_layers = field.widths.len();
            self.dirs.push(DirStream {
                ad: (0..n_layers).map(|l| vec![0.0; sizes[l + 1]]).collect(),
                hd: sizes.iter().map(|&w| vec![0.0; w]).collect(),
                add: (0..n_layers).map(|l| vec![0.0; sizes[l + 1]]).collect(),
                hdd: sizes.iter().map(|&w| vec![0.0; w]).collect(),
                chd_cur: vec![0.0; self.max_width],
                chd_nxt: vec![0.0; self.max_width],
                chdd_cur: vec![0.0; self.max_width],
                chdd_nxt: vec![0.0; self.max_width],
            });
        }
    }
}

impl MlpField {
    /// Forward pass; fills `h`, `act`, `d1`, `d2` and returns the value.
    fn forward(&self, ws: &mut MlpWorkspace, t: f64, x: &[f64]) -> f64 {
        let m = self.input_dim + 1;
        ws.h[0][..self.input_dim].copy_from_slice(x);
        ws.h[0][m - 1] = t;
        for l in 0..self.widths.len() {
            let (h_prev, h_rest) = ws.h.split_at_mut(l + 1);
            let h_prev = &h_prev[l];
            let h_out = &mut h_rest[0];
            self.matvec(l, h_prev, &mut ws.scratch_a);
            let b = self.biases(l);
            for i in 0..self.out_size(l) {
                let a = ws.scratch_a[i] + b[i];
                let (v, d1, d2) = act_eval(self.activation, a);
                ws.act[l][i] = v;
                ws.d1[l][i] = d1;
                ws.d2[l][i] = d2;
                h_out[i] = v;
            }
        }
        let h_last = ws.h.last().unwrap();
        let mut value = self.params[self.out_c_off];
        let w = self.out_w();
        for i in 0..h_last.len() {
            value += w[i] * h_last[i];
        }
        value
    }

    /// Reverse sweep for the input gradient of the value head.
    fn input_grad(&self, ws: &mut MlpWorkspace) {
        let l_last = self.widths.len();
        ws.scratch_a[..self.widths[l_last - 1]].copy_from_slice(self.out_w());
        for l in (0..l_last).rev() {
            let n_out = self.out_size(l);
            for i in 0..n_out {
                ws.scratch_a[i] *= ws.d1[l][i];
            }
            let (dst, src) = (&mut ws.scratch_b, &ws.scratch_a);
            self.matvec_t(l, src, dst);
            std::mem::swap(&mut ws.scratch_a, &mut ws.scratch_b);
        }
        ws.g.copy_from_slice(&ws.scratch_a[..self.input_dim + 1]);
    }

    /// Forward tangent + curvature sweep for one direction (already embedded
    /// in ℝ^{d+1}); returns the second directional derivative `eᵀ(∇²s)e`.
    fn dir_sweep(&self, ws: &mut MlpWorkspace, k: usize, embed: &[f64]) -> f64 {
        let n_layers = self.widths.len();
        let dir = &mut ws.dirs[k];
        dir.hd[0].copy_from_slice(embed);
        for v in dir.hdd[0].iter_mut() {
            *v = 0.0;
        }
        for l in 0..n_layers {
            let n_out = self.out_size(l);
            {
                let (prev, rest) = dir.hd.split_at_mut(l + 1);
                self.matvec(l, &prev[l], &mut dir.ad[l]);
                let _ = rest;
            }
            if l == 0 {
                for v in dir.add[l].iter_mut() {
                    *v = 0.0;
                }
            } else {
                let (prev, _) = dir.hdd.split_at_mut(l + 1);
                self.matvec(l, &prev[l], &mut dir.add[l]);
            }
            for i in 0..n_out {
                let ad = dir.ad[l][i];
                dir.hd[l + 1][i] = ws.d1[l][i] * ad;
                dir.hdd[l + 1][i] = ws.d2[l][i] * ad * ad + ws.d1[l][i] * dir.add[l][i];
            }
        }
        let w = self.out_w();
        let hdd_last = dir.hdd.last().unwrap();
        let mut q = 0.0;
        for i in 0..hdd_last.len() {
            q += w[i] * hdd_last[i];
        }
        q
    }
}

impl ActionField for MlpField {
    fn dim(&self) -> usize {
        self.input_dim
    }

    fn jet(&self, t: f64, x: &[f64]) -> Result<FieldJet, FieldError> {
        let mut ws = self.workspace();
        let eval = self.eval_with(&mut ws, t, x, &JetRequest::with_laplacian())?;
        Ok(FieldJet {
            value: eval.value,
            time_deriv: eval.time_deriv(),
            laplacian: eval.laplacian.unwrap(),
            spatial_grad: {
                let mut g = eval.grad;
                g.truncate(self.input_dim);
                g
            },
        })
    }

    fn spatial_grad_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), FieldError> {
        check_point(self.input_dim, t, x)?;
        let mut ws = self.workspace();
        self.forward(&mut ws, t, x);
        self.input_grad(&mut ws);
        out.copy_from_slice(&ws.g[..self.input_dim]);
        Ok(())
    }

    fn value(&self, t: f64, x: &[f64]) -> Result<f64, FieldError> {
        check_point(self.input_dim, t, x)?;
        let mut ws = self.workspace();
        Ok(self.forward(&mut ws, t, x))
    }
}

impl DifferentiableField for MlpField {
    type Workspace = MlpWorkspace;

    fn workspace(&self) -> MlpWorkspace {
        MlpWorkspace::new(self)
    }

    fn param_len(&self) -> usize {
        self.params.len()
    }

    fn eval_with(
        &self,
        ws: &mut MlpWorkspace,
        t: f64,
        x: &[f64],
        request: &JetRequest,
    ) -> Result<PointEval, FieldError> {
        check_point(self.input_dim, t, x)?;
        let d = self.input_dim;
        let m = d + 1;
        for v in &request.second_dirs {
            if v.len() != d {
                return Err(FieldError::DimMismatch { expected: d, got: v.len() });
            }
        }
        let n_axis = if request.laplacian { d } else { 0 };
        let n_dirs = n_axis + request.second_dirs.len();
        ws.ensure_dirs(n_dirs, self);
        ws.n_axis_dirs = n_axis;
        ws.n_extra_dirs = request.second_dirs.len();

        let value = self.forward(ws, t, x);
        self.input_grad(ws);

        let mut embed = vec![0.0; m];
        let mut laplacian = request.laplacian.then_some(0.0);
        for k in 0..n_axis {
            embed.fill(0.0);
            embed[k] = 1.0;
            let q = self.dir_sweep(ws, k, &embed);
            *laplacian.as_mut().unwrap() += q;
        }
        let mut dir_second = Vec::with_capacity(request.second_dirs.len());
        for (j, v) in request.second_dirs.iter().enumerate() {
            embed[..d].copy_from_slice(v);
            embed[d] = 0.0;
            dir_second.push(self.dir_sweep(ws, n_axis + j, &embed));
        }

        Ok(PointEval { value, grad: ws.g.clone(), laplacian, dir_second })
    }

    fn accumulate_param_grad(
        &self,
        ws: &mut MlpWorkspace,
        cot: &PointCotangents,
        grad: &mut [f64],
    ) {
        debug_assert_eq!(grad.len(), self.params.len());
        debug_assert_eq!(cot.d_grad.len(), self.input_dim + 1);
        debug_assert_eq!(cot.d_dir_second.len(), ws.n_extra_dirs);
        if ws.n_axis_dirs == 0 {
            debug_assert_eq!(cot.d_laplacian, 0.0, "Laplacian cotangent without Laplacian request");
        }

        let n_layers = self.widths.len();
        let n_last = self.widths[n_layers - 1];
        let alpha = cot.d_value;
        let gamma_active = cot.d_grad.iter().any(|&v| v != 0.0);

        // β per second-order stream: coordinate axes share the Laplacian
        // cotangent, extra directions get their own.
        let mut betas = vec![0.0; ws.n_axis_dirs + ws.n_extra_dirs];
        for b in betas.iter_mut().take(ws.n_axis_dirs) {
            *b = cot.d_laplacian;
        }
        for (j, b) in betas.iter_mut().skip(ws.n_axis_dirs).enumerate() {
            *b = cot.d_dir_second[j];
        }
        let active: Vec<usize> =
            (0..betas.len()).filter(|&k| betas[k] != 0.0).collect();

        // Tangent sweep along the gradient cotangent direction γ.
        if gamma_active {
            ws.hg[0].copy_from_slice(&cot.d_grad);
            for l in 0..n_layers {
                let (prev, rest) = ws.hg.split_at_mut(l + 1);
                self.matvec(l, &prev[l], &mut ws.ag[l]);
                let h_out = &mut rest[0];
                for i in 0..self.out_size(l) {
                    h_out[i] = ws.d1[l][i] * ws.ag[l][i];
                }
            }
        }

        // Head: s = w·h_L + c, ⟨∇s, γ⟩ = w·ḣ^γ_L, q_k = w·ḧ^k_L.
        {
            let w_grad = &mut grad[self.out_w_off..self.out_w_off + n_last];
            let h_last = ws.h.last().unwrap();
            if alpha != 0.0 {
                for i in 0..n_last {
                    w_grad[i] += alpha * h_last[i];
                }
            }
            if gamma_active {
                let hg_last = ws.hg.last().unwrap();
                for i in 0..n_last {
                    w_grad[i] += hg_last[i];
                }
            }
            for &k in &active {
                let hdd_last = ws.dirs[k].hdd.last().unwrap();
                let beta = betas[k];
                for i in 0..n_last {
                    w_grad[i] += beta * hdd_last[i];
                }
            }
        }
        grad[self.out_c_off] += alpha;

        // Seed the cotangent streams at the top level.
        let out_w = self.out_w().to_vec();
        for i in 0..n_last {
            ws.ch_cur[i] = alpha * out_w[i];
            ws.cg_cur[i] = out_w[i];
        }
        for &k in &active {
            let beta = betas[k];
            let dir = &mut ws.dirs[k];
            for i in 0..n_last {
                dir.chdd_cur[i] = beta * out_w[i];
                dir.chd_cur[i] = 0.0;
            }
        }

        // Combined reverse sweep, layer by layer.
        for l in (0..n_layers).rev() {
            let n_out = self.out_size(l);
            let n_in = self.in_size(l);

            ws.ca[..n_out].fill(0.0);
            // h_l = φ(a_l)
            for i in 0..n_out {
                ws.ca[i] += ws.d1[l][i] * ws.ch_cur[i];
            }
            // γ stream: ḣ^γ_l = φ'(a_l) ⊙ ȧ^γ_l
            if gamma_active {
                for i in 0..n_out {
                    let cg = ws.cg_cur[i];
                    ws.ca[i] += ws.d2[l][i] * ws.ag[l][i] * cg;
                    ws.cad[i] = ws.d1[l][i] * cg;
                }
                self.outer_acc(l, &ws.cad[..n_out], &ws.hg[l], grad);
                self.matvec_t(l, &ws.cad[..n_out], &mut ws.cg_nxt);
            }
            // Second-order streams.
            for &k in &active {
                {
                    let dir = &mut ws.dirs[k];
                    for i in 0..n_out {
                        let chd = dir.chd_cur[i];
                        let chdd = dir.chdd_cur[i];
                        let ad = dir.ad[l][i];
                        let d1 = ws.d1[l][i];
                        let d2 = ws.d2[l][i];
                        let d3 = act_d3(self.activation, ws.act[l][i], d1, d2);
                        // ḣ_l = φ' ⊙ ȧ_l
                        ws.ca[i] += d2 * ad * chd;
                        ws.cad[i] = d1 * chd;
                        // ḧ_l = φ'' ⊙ ȧ² + φ' ⊙ ä
                        ws.ca[i] += (d3 * ad * ad + d2 * dir.add[l][i]) * chdd;
                        ws.cad[i] += 2.0 * d2 * ad * chdd;
                        ws.cadd[i] = d1 * chdd;
                    }
                }
                // ä_l = W_l ḧ_{l-1}: ḧ_0 ≡ 0, so layer 0 contributes nothing.
                if l > 0 {
                    let cadd = ws.cadd[..n_out].to_vec();
                    self.outer_acc(l, &cadd, &ws.dirs[k].hdd[l], grad);
                    self.matvec_t(l, &cadd, &mut ws.dirs[k].chdd_nxt);
                }
                // ȧ_l = W_l ḣ_{l-1}
                let cad = ws.cad[..n_out].to_vec();
                self.outer_acc(l, &cad, &ws.dirs[k].hd[l], grad);
                if l > 0 {
                    self.matvec_t(l, &cad, &mut ws.dirs[k].chd_nxt);
                }
                let dir = &mut ws.dirs[k];
                std::mem::swap(&mut dir.chd_cur, &mut dir.chd_nxt);
                std::mem::swap(&mut dir.chdd_cur, &mut dir.chdd_nxt);
            }
            // a_l = W_l h_{l-1} + b_l
            {
                let ca = &ws.ca[..n_out];
                let base = self.b_off[l];
                for i in 0..n_out {
                    grad[base + i] += ca[i];
                }
            }
            let ca = ws.ca[..n_out].to_vec();
            self.outer_acc(l, &ca, &ws.h[l], grad);
            if l > 0 {
                self.matvec_t(l, &ca, &mut ws.ch_nxt);
            }

            std::mem::swap(&mut ws.ch_cur, &mut ws.ch_nxt);
            std::mem::swap(&mut ws.cg_cur, &mut ws.cg_nxt);
            let _ = n_in;
        }
    }
}
