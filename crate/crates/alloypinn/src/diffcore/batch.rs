//! Batched jet arithmetic for dense networks.
//!
//! A [`JetBatch`] holds a batch of jet columns: one value matrix plus
//! derivative matrices described by a [`JetLayout`]. Each derivative group
//! corresponds to one seeded input coordinate and carries a first derivative
//! and optionally the matching second derivative. PDE residuals need
//! (value, ∂/∂ε, ∂²/∂ε², ∂/∂τ), which is one batch with two groups.
//!
//! The layer kernels here are shared by the streaming (no-grad) forward pass
//! and by the tape ops in [`super::tape`], so value and gradient paths cannot
//! drift apart.

use ndarray::{Array1, Array2};

/// Derivative components carried alongside the value. At most two seeded
/// coordinates (ε and τ) ever appear together.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct JetLayout {
    n_groups: u8,
    has_d2: [bool; 2],
}

impl JetLayout {
    /// Plain values, no derivatives.
    pub const VALUE: JetLayout = JetLayout { n_groups: 0, has_d2: [false, false] };
    /// One seeded coordinate, first derivative only.
    pub const FIRST: JetLayout = JetLayout { n_groups: 1, has_d2: [false, false] };
    /// One seeded coordinate with first and second derivatives.
    pub const SECOND: JetLayout = JetLayout { n_groups: 1, has_d2: [true, false] };
    /// Two coordinates: group 0 with second derivative (ε), group 1 first
    /// derivative only (τ). The collocation-residual layout.
    pub const COLLOCATION: JetLayout = JetLayout { n_groups: 2, has_d2: [true, false] };

    #[inline]
    pub fn n_groups(&self) -> usize {
        self.n_groups as usize
    }

    #[inline]
    pub fn group_has_d2(&self, g: usize) -> bool {
        self.has_d2[g]
    }

    /// Total number of component matrices (value included).
    pub fn n_comps(&self) -> usize {
        let mut n = 1;
        for g in 0..self.n_groups() {
            n += 1 + usize::from(self.has_d2[g]);
        }
        n
    }

    /// Component index of group `g`'s first derivative.
    pub fn d1_idx(&self, g: usize) -> usize {
        assert!(g < self.n_groups());
        let mut idx = 1;
        for k in 0..g {
            idx += 1 + usize::from(self.has_d2[k]);
        }
        idx
    }

    /// Component index of group `g`'s second derivative, if it carries one.
    pub fn d2_idx(&self, g: usize) -> Option<usize> {
        self.has_d2[g].then(|| self.d1_idx(g) + 1)
    }
}

/// A batch of jets: `rows` quantities at `cols` points.
#[derive(Clone, Debug)]
pub struct JetBatch {
    pub layout: JetLayout,
    pub comps: Vec<Array2<f64>>,
}

impl JetBatch {
    pub fn zeros(layout: JetLayout, rows: usize, cols: usize) -> Self {
        let comps = (0..layout.n_comps()).map(|_| Array2::zeros((rows, cols))).collect();
        JetBatch { layout, comps }
    }

    pub fn from_comps(layout: JetLayout, comps: Vec<Array2<f64>>) -> Self {
        assert_eq!(comps.len(), layout.n_comps());
        let dim = comps[0].dim();
        assert!(comps.iter().all(|c| c.dim() == dim));
        JetBatch { layout, comps }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.comps[0].nrows()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.comps[0].ncols()
    }

    #[inline]
    pub fn value(&self) -> &Array2<f64> {
        &self.comps[0]
    }

    pub fn all_finite(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }
}

/// One dense layer: `w` is (out × in), `b` is (out).
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Bare stack of dense layers; the numerical substrate of an MLP.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseNet {
    pub layers: Vec<DenseLayer>,
}

impl DenseNet {
    pub fn in_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().w.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }
}

/// z = W·a (+ b on the value component). Derivative components share W
/// because an affine map is its own Jacobian.
pub fn affine_fwd(w: &Array2<f64>, b: &Array1<f64>, a: &JetBatch) -> JetBatch {
    let mut comps = Vec::with_capacity(a.comps.len());
    for (ci, comp) in a.comps.iter().enumerate() {
        let mut z = w.dot(comp);
        if ci == 0 {
            for mut col in z.columns_mut() {
                col += b;
            }
        }
        comps.push(z);
    }
    JetBatch { layout: a.layout, comps }
}

/// Input adjoint of the affine map: ā_c = Wᵀ·z̄_c per component. The
/// transpose is materialized once; the copy is tiny next to the products and
/// keeps the multiply kernel on its fast path.
pub fn affine_adj_input(w: &Array2<f64>, zbar: &JetBatch) -> JetBatch {
    let wt = w.t().as_standard_layout().to_owned();
    let comps = zbar.comps.iter().map(|c| wt.dot(c)).collect();
    JetBatch { layout: zbar.layout, comps }
}

/// Parameter gradients of the affine map, accumulated in place:
/// gW += Σ_c z̄_c·a_cᵀ and gb += row-sums of z̄ value component.
pub fn affine_grads(zbar: &JetBatch, a: &JetBatch, gw: &mut Array2<f64>, gb: &mut Array1<f64>) {
    for (zc, ac) in zbar.comps.iter().zip(&a.comps) {
        ndarray::linalg::general_mat_mul(1.0, zc, &ac.t(), 1.0, gw);
    }
    *gb += &zbar.comps[0].sum_axis(ndarray::Axis(1));
}

/// Swish activation with jet propagation. Returns the activated batch plus
/// the sigmoid values, cached so the backward pass avoids recomputing exp.
/// The slope factors are materialized once so the per-group maps reduce to
/// plain vectorizable multiply loops.
pub fn swish_fwd(z: &JetBatch) -> (JetBatch, Array2<f64>) {
    let layout = z.layout;
    let (rows, cols) = z.comps[0].dim();
    let mut out = JetBatch::zeros(layout, rows, cols);
    let mut sigma = Array2::zeros((rows, cols));

    let zv = z.comps[0].as_slice().unwrap();
    let n = zv.len();
    let sig = sigma.as_slice_mut().unwrap();
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];

    // value component, sigmoid cache and slope factors in one sweep
    {
        let ov = out.comps[0].as_slice_mut().unwrap();
        for i in 0..n {
            let x = zv[i];
            let s = if x >= 0.0 { 1.0 / (1.0 + (-x).exp()) } else { let e = x.exp(); e / (1.0 + e) };
            let s1 = s * (1.0 - s);
            sig[i] = s;
            ov[i] = x * s;
            w1[i] = s + x * s1;
            w2[i] = 2.0 * s1 + x * s1 * (1.0 - 2.0 * s);
        }
    }

    for g in 0..layout.n_groups() {
        let i1 = layout.d1_idx(g);
        let zd1 = z.comps[i1].as_slice().unwrap();
        if let Some(i2) = layout.d2_idx(g) {
            let zd2 = z.comps[i2].as_slice().unwrap();
            let (head, tail) = out.comps.split_at_mut(i2);
            let od1 = head[i1].as_slice_mut().unwrap();
            let od2 = tail[0].as_slice_mut().unwrap();
            for i in 0..n {
                od1[i] = w1[i] * zd1[i];
                od2[i] = w2[i] * zd1[i] * zd1[i] + w1[i] * zd2[i];
            }
        } else {
            let od1 = out.comps[i1].as_slice_mut().unwrap();
            for i in 0..n {
                od1[i] = w1[i] * zd1[i];
            }
        }
    }
    (out, sigma)
}

/// Adjoint of `swish_fwd`: given ā on the outputs, accumulate z̄ on the
/// pre-activations. `z` and `sigma` are the forward inputs and cache.
pub fn swish_adj(z: &JetBatch, sigma: &Array2<f64>, abar: &JetBatch) -> JetBatch {
    let layout = z.layout;
    let (rows, cols) = z.comps[0].dim();
    let mut zbar = JetBatch::zeros(layout, rows, cols);

    let zv = z.comps[0].as_slice().unwrap();
    let n = zv.len();
    let sig = sigma.as_slice().unwrap();
    let av = abar.comps[0].as_slice().unwrap();

    let needs_w3 = (0..layout.n_groups()).any(|g| layout.group_has_d2(g));
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut w3 = vec![0.0; if needs_w3 { n } else { 0 }];
    {
        let bv = zbar.comps[0].as_slice_mut().unwrap();
        for i in 0..n {
            let (x, s) = (zv[i], sig[i]);
            let s1 = s * (1.0 - s);
            let s2 = s1 * (1.0 - 2.0 * s);
            w1[i] = s + x * s1;
            w2[i] = 2.0 * s1 + x * s2;
            if needs_w3 {
                let s3 = s2 * (1.0 - 2.0 * s) - 2.0 * s1 * s1;
                w3[i] = 3.0 * s2 + x * s3;
            }
            bv[i] = av[i] * w1[i];
        }
    }

    for g in 0..layout.n_groups() {
        let i1 = layout.d1_idx(g);
        let zd1 = z.comps[i1].as_slice().unwrap();
        let ad1 = abar.comps[i1].as_slice().unwrap();
        if let Some(i2) = layout.d2_idx(g) {
            let zd2 = z.comps[i2].as_slice().unwrap();
            let ad2 = abar.comps[i2].as_slice().unwrap();
            let (head, tail) = zbar.comps.split_at_mut(i2);
            let (v_head, d1_head) = head.split_at_mut(i1);
            let bv = v_head[0].as_slice_mut().unwrap();
            let bd1 = d1_head[0].as_slice_mut().unwrap();
            let bd2 = tail[0].as_slice_mut().unwrap();
            for i in 0..n {
                bv[i] += ad1[i] * w2[i] * zd1[i] + ad2[i] * (w3[i] * zd1[i] * zd1[i] + w2[i] * zd2[i]);
                bd1[i] = ad1[i] * w1[i] + ad2[i] * 2.0 * w2[i] * zd1[i];
                bd2[i] = ad2[i] * w1[i];
            }
        } else {
            let (head, tail) = zbar.comps.split_at_mut(i1);
            let bv = head[0].as_slice_mut().unwrap();
            let bd1 = tail[0].as_slice_mut().unwrap();
            for i in 0..n {
                bv[i] += ad1[i] * w2[i] * zd1[i];
                bd1[i] = ad1[i] * w1[i];
            }
        }
    }
    zbar
}

/// Forward evaluation of a dense net with swish hidden activations and a
/// linear output layer, keeping nothing but the result. Used for
/// evaluation-only paths (metrics grids, loss values at perturbed
/// parameters); gradient work goes through the tape instead.
pub fn stream_forward(net: &DenseNet, input: &JetBatch) -> JetBatch {
    let mut a = affine_fwd(&net.layers[0].w, &net.layers[0].b, input);
    for layer in &net.layers[1..] {
        let (act, _) = swish_fwd(&a);
        a = affine_fwd(&layer.w, &layer.b, &act);
    }
    a
}
