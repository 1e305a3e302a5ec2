//! Reverse-mode accumulation over jet-valued operations.
//!
//! The tape records elementary operations on (value, d1, d2) batches during
//! an eager forward pass; replaying adjoints in reverse yields gradients with
//! respect to every registered parameter. Because tape values are jets, the
//! recorded loss may depend on input derivatives of network outputs (PDE
//! residuals) and the parameter gradient is still exact — the activation
//! adjoint just reaches one derivative order deeper.
//!
//! Parameters are registered up front as borrowed [`DenseNet`]s plus trainable
//! scalars; gradients come back in matching shapes via [`Grads`].

use ndarray::{Array1, Array2};
use thiserror::Error;

use super::batch::{
    affine_adj_input, affine_fwd, affine_grads, swish_adj, swish_fwd, DenseNet, JetBatch,
    JetLayout,
};

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("non-finite activations in network {net} at layer {layer}")]
    NonFinite { net: usize, layer: usize },
    #[error("non-finite values in tape input")]
    NonFiniteInput,
    #[error("node does not belong to this tape")]
    ForeignNode,
    #[error("backward root must be a 1x1 value-only scalar")]
    NotScalar,
}

/// Handle to a tape node. Carries the owning tape's identity so that using a
/// node against the wrong tape is a checked usage error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeRef {
    idx: u32,
    tape: u64,
}

enum Op {
    /// Constant leaf; no adjoint flows past it.
    Const,
    /// One value row from `a` equipped with constant derivative seeds.
    WithSeeds { a: NodeRef },
    /// Vertical concatenation of equal-layout batches.
    Stack { parts: Vec<NodeRef> },
    /// Dense layer of a registered net applied to `a`.
    Affine { net: usize, layer: usize, a: NodeRef },
    /// Swish on every element; sigmoid cached at the node.
    Swish { a: NodeRef },
    /// Single (row, component) of `a` as a value-only row.
    Extract { a: NodeRef, row: usize, comp: usize },
    /// Elementwise Σ cₖ·xₖ + bias over value-only rows.
    Lin { terms: Vec<(NodeRef, f64)> },
    /// Elementwise product of two value-only rows.
    MulEl { a: NodeRef, b: NodeRef },
    /// Per-column choice: `a` where mask is true, else `b`.
    Select { a: NodeRef, b: NodeRef, take_a: Vec<bool> },
    /// A registered scalar parameter broadcast to a row.
    BroadcastScalar { slot: usize },
    /// Σⱼ wⱼ·aⱼ² over a value-only row; produces a scalar node.
    SumSq { a: NodeRef, w: Vec<f64> },
    /// Σⱼ wⱼ·aⱼ over a value-only row; produces a scalar node.
    Dot { a: NodeRef, w: Vec<f64> },
    /// Σₖ cₖ·sₖ over scalar nodes.
    Combine { terms: Vec<(NodeRef, f64)> },
}

/// Gradients in parameter shape: one (gW, gb) per layer per net, plus one
/// slot per registered scalar.
#[derive(Clone, Debug)]
pub struct Grads {
    pub nets: Vec<Vec<(Array2<f64>, Array1<f64>)>>,
    pub scalars: Vec<f64>,
}

impl Grads {
    fn zeros_like(nets: &[&DenseNet], n_scalars: usize) -> Self {
        let nets = nets
            .iter()
            .map(|n| {
                n.layers
                    .iter()
                    .map(|l| (Array2::zeros(l.w.dim()), Array1::zeros(l.b.len())))
                    .collect()
            })
            .collect();
        Grads { nets, scalars: vec![0.0; n_scalars] }
    }

    /// Flatten one net's gradient: layer 0 weights row-major, layer 0 bias,
    /// layer 1 weights, ... — the same order `DenseNet` parameters flatten to.
    pub fn flatten_net(&self, net: usize) -> Vec<f64> {
        let mut out = Vec::new();
        for (gw, gb) in &self.nets[net] {
            out.extend(gw.iter().copied());
            out.extend(gb.iter().copied());
        }
        out
    }

    /// Combined in-place update: self += c · other.
    pub fn axpy(&mut self, c: f64, other: &Grads) {
        for (mine, theirs) in self.nets.iter_mut().zip(&other.nets) {
            for ((gw, gb), (ow, ob)) in mine.iter_mut().zip(theirs) {
                gw.scaled_add(c, ow);
                gb.scaled_add(c, ob);
            }
        }
        for (s, o) in self.scalars.iter_mut().zip(&other.scalars) {
            *s += c * o;
        }
    }
}

static TAPE_COUNTER: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(1);

/// Wengert-style tape over jet batches. Forward values are computed eagerly
/// at push time; `grad` replays adjoints in reverse order.
pub struct Tape<'p> {
    id: u64,
    nets: Vec<&'p DenseNet>,
    scalars: Vec<f64>,
    ops: Vec<Op>,
    vals: Vec<JetBatch>,
    sigmoids: Vec<Option<Array2<f64>>>,
}

impl<'p> Tape<'p> {
    pub fn new(nets: Vec<&'p DenseNet>, scalars: Vec<f64>) -> Self {
        Tape {
            id: TAPE_COUNTER.fetch_add(1, std::sync::atomic::Ordering::Relaxed),
            nets,
            scalars,
            ops: Vec::new(),
            vals: Vec::new(),
            sigmoids: Vec::new(),
        }
    }

    /// Drop all recorded nodes, keeping parameter registration. A reused tape
    /// starts from a clean slate.
    pub fn reset(&mut self) {
        self.id = TAPE_COUNTER.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        self.ops.clear();
        self.vals.clear();
        self.sigmoids.clear();
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Forward value of a node.
    pub fn value(&self, n: NodeRef) -> &JetBatch {
        assert_eq!(n.tape, self.id, "node from another tape");
        &self.vals[n.idx as usize]
    }

    /// Value of a scalar node.
    pub fn scalar(&self, n: NodeRef) -> f64 {
        self.value(n).comps[0][[0, 0]]
    }

    fn push(&mut self, op: Op, val: JetBatch) -> NodeRef {
        self.push_cached(op, val, None)
    }

    fn push_cached(&mut self, op: Op, val: JetBatch, cache: Option<Array2<f64>>) -> NodeRef {
        let idx = self.ops.len() as u32;
        self.ops.push(op);
        self.vals.push(val);
        self.sigmoids.push(cache);
        NodeRef { idx, tape: self.id }
    }

    fn check(&self, n: NodeRef) -> Result<(), DiffError> {
        if n.tape != self.id {
            return Err(DiffError::ForeignNode);
        }
        Ok(())
    }

    // ---- builders ------------------------------------------------------

    pub fn constant(&mut self, val: JetBatch) -> Result<NodeRef, DiffError> {
        if !val.all_finite() {
            return Err(DiffError::NonFiniteInput);
        }
        Ok(self.push(Op::Const, val))
    }

    /// Constant value-only row.
    pub fn const_row(&mut self, values: &[f64]) -> Result<NodeRef, DiffError> {
        let arr = Array2::from_shape_vec((1, values.len()), values.to_vec()).unwrap();
        self.constant(JetBatch::from_comps(JetLayout::VALUE, vec![arr]))
    }

    /// Equip a value-only row with constant derivative seeds, one per extra
    /// component of `layout`. Adjoints flow back into the value only.
    pub fn with_seeds(
        &mut self,
        a: NodeRef,
        layout: JetLayout,
        seeds: &[f64],
    ) -> Result<NodeRef, DiffError> {
        self.check(a)?;
        let av = self.vals[a.idx as usize].value().clone();
        assert_eq!(av.nrows(), 1);
        assert_eq!(seeds.len(), layout.n_comps() - 1);
        let cols = av.ncols();
        let mut comps = vec![av];
        for &s in seeds {
            comps.push(Array2::from_elem((1, cols), s));
        }
        Ok(self.push(Op::WithSeeds { a }, JetBatch::from_comps(layout, comps)))
    }

    pub fn stack(&mut self, parts: &[NodeRef]) -> Result<NodeRef, DiffError> {
        for p in parts {
            self.check(*p)?;
        }
        let layout = self.vals[parts[0].idx as usize].layout;
        let cols = self.vals[parts[0].idx as usize].cols();
        let rows: usize = parts.iter().map(|p| self.vals[p.idx as usize].rows()).sum();
        let mut out = JetBatch::zeros(layout, rows, cols);
        for c in 0..layout.n_comps() {
            let mut r0 = 0;
            for p in parts {
                let pv = &self.vals[p.idx as usize];
                assert_eq!(pv.layout, layout);
                assert_eq!(pv.cols(), cols);
                let pr = pv.rows();
                out.comps[c]
                    .slice_mut(ndarray::s![r0..r0 + pr, ..])
                    .assign(&pv.comps[c]);
                r0 += pr;
            }
        }
        Ok(self.push(Op::Stack { parts: parts.to_vec() }, out))
    }

    pub fn affine(&mut self, net: usize, layer: usize, a: NodeRef) -> Result<NodeRef, DiffError> {
        self.check(a)?;
        let l = &self.nets[net].layers[layer];
        let z = affine_fwd(&l.w, &l.b, &self.vals[a.idx as usize]);
        if !z.all_finite() {
            return Err(DiffError::NonFinite { net, layer });
        }
        Ok(self.push(Op::Affine { net, layer, a }, z))
    }

    pub fn swish(&mut self, a: NodeRef) -> Result<NodeRef, DiffError> {
        self.check(a)?;
        let (out, sigma) = swish_fwd(&self.vals[a.idx as usize]);
        Ok(self.push_cached(Op::Swish { a }, out, Some(sigma)))
    }

    /// Full MLP pass: affine layers with swish between, linear output.
    pub fn mlp(&mut self, net: usize, input: NodeRef) -> Result<NodeRef, DiffError> {
        let n_layers = self.nets[net].layers.len();
        let mut a = self.affine(net, 0, input)?;
        for layer in 1..n_layers {
            let act = self.swish(a)?;
            a = self.affine(net, layer, act)?;
        }
        Ok(a)
    }

    pub fn extract(&mut self, a: NodeRef, row: usize, comp: usize) -> Result<NodeRef, DiffError> {
        self.check(a)?;
        let src = &self.vals[a.idx as usize];
        let out = src.comps[comp].row(row).insert_axis(ndarray::Axis(0)).to_owned();
        Ok(self.push(
            Op::Extract { a, row, comp },
            JetBatch::from_comps(JetLayout::VALUE, vec![out]),
        ))
    }

    pub fn lin(&mut self, terms: &[(NodeRef, f64)], bias: f64) -> Result<NodeRef, DiffError> {
        for (t, _) in terms {
            self.check(*t)?;
        }
        let cols = self.vals[terms[0].0.idx as usize].cols();
        let mut out = Array2::from_elem((1, cols), bias);
        for (t, c) in terms {
            out.scaled_add(*c, &self.vals[t.idx as usize].comps[0]);
        }
        Ok(self.push(
            Op::Lin { terms: terms.to_vec() },
            JetBatch::from_comps(JetLayout::VALUE, vec![out]),
        ))
    }

    pub fn mul(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef, DiffError> {
        self.check(a)?;
        self.check(b)?;
        let out = &self.vals[a.idx as usize].comps[0] * &self.vals[b.idx as usize].comps[0];
        Ok(self.push(Op::MulEl { a, b }, JetBatch::from_comps(JetLayout::VALUE, vec![out])))
    }

    pub fn select(
        &mut self,
        a: NodeRef,
        b: NodeRef,
        take_a: Vec<bool>,
    ) -> Result<NodeRef, DiffError> {
        self.check(a)?;
        self.check(b)?;
        let av = &self.vals[a.idx as usize].comps[0];
        let bv = &self.vals[b.idx as usize].comps[0];
        let mut out = Array2::zeros((1, take_a.len()));
        for j in 0..take_a.len() {
            out[[0, j]] = if take_a[j] { av[[0, j]] } else { bv[[0, j]] };
        }
        Ok(self.push(Op::Select { a, b, take_a }, JetBatch::from_comps(JetLayout::VALUE, vec![out])))
    }

    pub fn broadcast_scalar(&mut self, slot: usize, cols: usize) -> Result<NodeRef, DiffError> {
        let out = Array2::from_elem((1, cols), self.scalars[slot]);
        Ok(self.push(Op::BroadcastScalar { slot }, JetBatch::from_comps(JetLayout::VALUE, vec![out])))
    }

    pub fn sum_sq(&mut self, a: NodeRef, w: Vec<f64>) -> Result<NodeRef, DiffError> {
        self.check(a)?;
        let av = &self.vals[a.idx as usize].comps[0];
        assert_eq!(av.ncols(), w.len());
        let mut s = 0.0;
        for (j, &wj) in w.iter().enumerate() {
            let x = av[[0, j]];
            s += wj * x * x;
        }
        Ok(self.push(Op::SumSq { a, w }, scalar_batch(s)))
    }

    pub fn dot(&mut self, a: NodeRef, w: Vec<f64>) -> Result<NodeRef, DiffError> {
        self.check(a)?;
        let av = &self.vals[a.idx as usize].comps[0];
        assert_eq!(av.ncols(), w.len());
        let mut s = 0.0;
        for (j, &wj) in w.iter().enumerate() {
            s += wj * av[[0, j]];
        }
        Ok(self.push(Op::Dot { a, w }, scalar_batch(s)))
    }

    pub fn combine(&mut self, terms: &[(NodeRef, f64)]) -> Result<NodeRef, DiffError> {
        let mut s = 0.0;
        for (t, c) in terms {
            self.check(*t)?;
            s += c * self.scalar(*t);
        }
        Ok(self.push(Op::Combine { terms: terms.to_vec() }, scalar_batch(s)))
    }

    // ---- backward ------------------------------------------------------

    /// Reverse sweep from a scalar loss node. Returns gradients for every
    /// registered parameter (zero where the loss does not depend on one).
    pub fn grad(&self, root: NodeRef) -> Result<Grads, DiffError> {
        self.check(root)?;
        let rv = &self.vals[root.idx as usize];
        if rv.rows() != 1 || rv.cols() != 1 || rv.layout != JetLayout::VALUE {
            return Err(DiffError::NotScalar);
        }

        let n = self.ops.len();
        let mut adj: Vec<Option<JetBatch>> = (0..n).map(|_| None).collect();
        adj[root.idx as usize] = Some(scalar_batch(1.0));

        let mut grads = Grads::zeros_like(&self.nets, self.scalars.len());

        for i in (0..=root.idx as usize).rev() {
            let Some(nbar) = adj[i].take() else { continue };
            match &self.ops[i] {
                Op::Const => {}
                Op::WithSeeds { a } => {
                    // only the value component feeds back; seeds are constants
                    let mut up = zeros_like_comp(&self.vals[a.idx as usize]);
                    up.comps[0] += &nbar.comps[0];
                    accumulate(&mut adj, *a, up);
                }
                Op::Stack { parts } => {
                    let mut r0 = 0;
                    for p in parts {
                        let pv = &self.vals[p.idx as usize];
                        let pr = pv.rows();
                        let mut up = zeros_like_comp(pv);
                        for c in 0..pv.layout.n_comps() {
                            up.comps[c].assign(&nbar.comps[c].slice(ndarray::s![r0..r0 + pr, ..]));
                        }
                        accumulate(&mut adj, *p, up);
                        r0 += pr;
                    }
                }
                Op::Affine { net, layer, a } => {
                    let l = &self.nets[*net].layers[*layer];
                    let (gw, gb) = &mut grads.nets[*net][*layer];
                    affine_grads(&nbar, &self.vals[a.idx as usize], gw, gb);
                    accumulate(&mut adj, *a, affine_adj_input(&l.w, &nbar));
                }
                Op::Swish { a } => {
                    let z = &self.vals[a.idx as usize];
                    let sigma = self.sigmoids[i].as_ref().unwrap();
                    accumulate(&mut adj, *a, swish_adj(z, sigma, &nbar));
                }
                Op::Extract { a, row, comp } => {
                    let mut up = zeros_like_comp(&self.vals[a.idx as usize]);
                    up.comps[*comp]
                        .row_mut(*row)
                        .assign(&nbar.comps[0].row(0));
                    accumulate(&mut adj, *a, up);
                }
                Op::Lin { terms } => {
                    for (t, c) in terms {
                        let mut up = zeros_like_comp(&self.vals[t.idx as usize]);
                        up.comps[0].scaled_add(*c, &nbar.comps[0]);
                        accumulate(&mut adj, *t, up);
                    }
                }
                Op::MulEl { a, b } => {
                    let av = self.vals[a.idx as usize].comps[0].clone();
                    let bv = self.vals[b.idx as usize].comps[0].clone();
                    let mut ua = zeros_like_comp(&self.vals[a.idx as usize]);
                    ua.comps[0].assign(&(&nbar.comps[0] * &bv));
                    accumulate(&mut adj, *a, ua);
                    let mut ub = zeros_like_comp(&self.vals[b.idx as usize]);
                    ub.comps[0].assign(&(&nbar.comps[0] * &av));
                    accumulate(&mut adj, *b, ub);
                }
                Op::Select { a, b, take_a } => {
                    let mut ua = zeros_like_comp(&self.vals[a.idx as usize]);
                    let mut ub = zeros_like_comp(&self.vals[b.idx as usize]);
                    for (j, &ta) in take_a.iter().enumerate() {
                        if ta {
                            ua.comps[0][[0, j]] = nbar.comps[0][[0, j]];
                        } else {
                            ub.comps[0][[0, j]] = nbar.comps[0][[0, j]];
                        }
                    }
                    accumulate(&mut adj, *a, ua);
                    accumulate(&mut adj, *b, ub);
                }
                Op::BroadcastScalar { slot } => {
                    grads.scalars[*slot] += nbar.comps[0].sum();
                }
                Op::SumSq { a, w } => {
                    let s = nbar.comps[0][[0, 0]];
                    let av = &self.vals[a.idx as usize].comps[0];
                    let mut up = zeros_like_comp(&self.vals[a.idx as usize]);
                    for (j, &wj) in w.iter().enumerate() {
                        up.comps[0][[0, j]] = 2.0 * s * wj * av[[0, j]];
                    }
                    accumulate(&mut adj, *a, up);
                }
                Op::Dot { a, w } => {
                    let s = nbar.comps[0][[0, 0]];
                    let mut up = zeros_like_comp(&self.vals[a.idx as usize]);
                    for (j, &wj) in w.iter().enumerate() {
                        up.comps[0][[0, j]] = s * wj;
                    }
                    accumulate(&mut adj, *a, up);
                }
                Op::Combine { terms } => {
                    let s = nbar.comps[0][[0, 0]];
                    for (t, c) in terms {
                        accumulate(&mut adj, *t, scalar_batch(s * c));
                    }
                }
            }
        }
        Ok(grads)
    }
}

fn scalar_batch(v: f64) -> JetBatch {
    JetBatch::from_comps(JetLayout::VALUE, vec![Array2::from_elem((1, 1), v)])
}

fn zeros_like_comp(template: &JetBatch) -> JetBatch {
    JetBatch::zeros(template.layout, template.rows(), template.cols())
}

fn accumulate(adj: &mut [Option<JetBatch>], target: NodeRef, up: JetBatch) {
    match &mut adj[target.idx as usize] {
        Some(existing) => {
            for (e, u) in existing.comps.iter_mut().zip(&up.comps) {
                *e += u;
            }
        }
        slot @ None => *slot = Some(up),
    }
}
