//! The three feed-forward networks plus the trainable solid-composition
//! scalar: Glorot-normal initialization, swish activation, scalar and jet
//! forward passes, flat parameter views and the checkpoint format.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::diffcore::batch::{DenseLayer, DenseNet};
use crate::diffcore::JetValue;
use crate::physics::{FieldJets, FieldModel};

/// Default architecture: five hidden layers of a hundred neurons.
pub const DEFAULT_HIDDEN: [usize; 5] = [100; 5];

#[derive(Debug, Error)]
pub enum NetError {
    #[error("non-finite activations at layer {layer}")]
    NonFinite { layer: usize },
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Format(String),
}

/// swish(x) = x·sigmoid(x).
#[inline]
pub fn swish(x: f64) -> f64 {
    x * crate::diffcore::sigmoid(x)
}

/// Glorot-normal weight matrix for a layer mapping `in_dim` to `out_dim`
/// inputs: i.i.d. normal with standard deviation sqrt(2/(in+out)).
pub fn glorot_init<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Array2<f64> {
    let std = (2.0 / (in_dim + out_dim) as f64).sqrt();
    let dist = Normal::new(0.0, std).unwrap();
    Array2::from_shape_fn((out_dim, in_dim), |_| dist.sample(rng))
}

/// Which input coordinate a jet pass differentiates against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coord {
    Eps,
    Tau,
}

/// Weights and biases of one feed-forward network.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub net: DenseNet,
}

impl MlpParams {
    /// Fresh network with Glorot-normal weights and zero biases.
    pub fn init<R: Rng>(in_dim: usize, hidden: &[usize], out_dim: usize, rng: &mut R) -> Self {
        let mut dims = vec![in_dim];
        dims.extend_from_slice(hidden);
        dims.push(out_dim);
        let layers = dims
            .windows(2)
            .map(|w| DenseLayer { w: glorot_init(w[0], w[1], rng), b: Array1::zeros(w[1]) })
            .collect();
        MlpParams { net: DenseNet { layers } }
    }

    pub fn in_dim(&self) -> usize {
        self.net.in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.net.out_dim()
    }

    pub fn hidden(&self) -> Vec<usize> {
        self.net.layers[..self.net.layers.len() - 1].iter().map(|l| l.w.nrows()).collect()
    }

    pub fn n_params(&self) -> usize {
        self.net.n_params()
    }

    /// Scalar forward pass: swish after each hidden layer, linear output.
    pub fn forward(&self, inputs: &[f64]) -> Result<Vec<f64>, NetError> {
        debug_assert_eq!(inputs.len(), self.in_dim());
        let n_layers = self.net.layers.len();
        let mut act: Vec<f64> = inputs.to_vec();
        for (li, layer) in self.net.layers.iter().enumerate() {
            let mut next = vec![0.0; layer.w.nrows()];
            for r in 0..layer.w.nrows() {
                let mut acc = layer.b[r];
                for c in 0..act.len() {
                    acc += layer.w[[r, c]] * act[c];
                }
                if !acc.is_finite() {
                    return Err(NetError::NonFinite { layer: li });
                }
                next[r] = if li + 1 < n_layers { swish(acc) } else { acc };
            }
            act = next;
        }
        Ok(act)
    }

    /// Jet forward pass from already-seeded inputs; exact derivative
    /// propagation, one output jet per output neuron.
    pub fn forward_jets(&self, inputs: &[JetValue]) -> Result<Vec<JetValue>, NetError> {
        debug_assert_eq!(inputs.len(), self.in_dim());
        let n_layers = self.net.layers.len();
        let mut act: Vec<JetValue> = inputs.to_vec();
        for (li, layer) in self.net.layers.iter().enumerate() {
            let mut next = vec![JetValue::constant(0.0); layer.w.nrows()];
            for r in 0..layer.w.nrows() {
                let mut acc = JetValue::constant(layer.b[r]);
                for c in 0..act.len() {
                    acc = acc + act[c] * layer.w[[r, c]];
                }
                if !acc.is_finite() {
                    return Err(NetError::NonFinite { layer: li });
                }
                next[r] = if li + 1 < n_layers { acc.swish() } else { acc };
            }
            act = next;
        }
        Ok(act)
    }

    /// Value, first and second derivative of each output with respect to the
    /// selected input coordinate at (eps, tau), for two-input networks.
    pub fn jet_forward(&self, eps: f64, tau: f64, wrt: Coord) -> Result<Vec<JetValue>, NetError> {
        if !eps.is_finite() || !tau.is_finite() {
            return Err(NetError::NonFinite { layer: 0 });
        }
        let inputs = match wrt {
            Coord::Eps => [JetValue::seed(eps), JetValue::constant(tau)],
            Coord::Tau => [JetValue::constant(eps), JetValue::seed(tau)],
        };
        self.forward_jets(&inputs)
    }

    /// Flat parameter vector: per layer, weights row-major then the bias.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        for l in &self.net.layers {
            v.extend(l.w.iter().copied());
            v.extend(l.b.iter().copied());
        }
        v
    }

    /// Inverse of [`flat`](Self::flat).
    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params());
        let mut at = 0;
        for l in &mut self.net.layers {
            for w in l.w.iter_mut() {
                *w = flat[at];
                at += 1;
            }
            for b in l.b.iter_mut() {
                *b = flat[at];
                at += 1;
            }
        }
    }
}

/// The trainable solid-composition scalar. Once frozen it never reverts
/// within a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolidComposition {
    pub value: f64,
    pub frozen: bool,
}

impl SolidComposition {
    /// Initial value 0.2 per the training scheme.
    pub fn new() -> Self {
        SolidComposition { value: 0.2, frozen: false }
    }
}

impl Default for SolidComposition {
    fn default() -> Self {
        Self::new()
    }
}

/// The full trainable state: temperature network (two outputs: theta_s,
/// theta_l), liquid-composition network, interface network (tau input only)
/// and the solid-composition scalar.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    pub theta: MlpParams,
    pub cnet: MlpParams,
    pub snet: MlpParams,
    pub c_s: SolidComposition,
    /// Interface network frozen (sequential-focus schedule).
    pub snet_frozen: bool,
}

impl ParamSet {
    pub fn init<R: Rng>(hidden: &[usize], rng: &mut R) -> Self {
        ParamSet {
            theta: MlpParams::init(2, hidden, 2, rng),
            cnet: MlpParams::init(2, hidden, 1, rng),
            snet: MlpParams::init(1, hidden, 1, rng),
            c_s: SolidComposition::new(),
            snet_frozen: false,
        }
    }

    pub fn forward_theta(&self, eps: f64, tau: f64) -> Result<(f64, f64), NetError> {
        let out = self.theta.forward(&[eps, tau])?;
        Ok((out[0], out[1]))
    }

    pub fn forward_c(&self, eps: f64, tau: f64) -> Result<f64, NetError> {
        Ok(self.cnet.forward(&[eps, tau])?[0])
    }

    pub fn forward_s(&self, tau: f64) -> Result<f64, NetError> {
        Ok(self.snet.forward(&[tau])?[0])
    }
}

// Field-model view of the networks. Evaluation must not fail on finite
// parameters, so non-finite activations surface as NaN here; training uses
// the checked paths instead.
impl FieldModel for ParamSet {
    fn theta(&self, eps: f64, tau: f64) -> (f64, f64) {
        self.forward_theta(eps, tau).unwrap_or((f64::NAN, f64::NAN))
    }

    fn theta_jets(&self, eps: f64, tau: f64) -> (FieldJets, FieldJets) {
        let we = self.theta.jet_forward(eps, tau, Coord::Eps).unwrap();
        let wt = self.theta.jet_forward(eps, tau, Coord::Tau).unwrap();
        (FieldJets::new(we[0], wt[0]), FieldJets::new(we[1], wt[1]))
    }

    fn c_l(&self, eps: f64, tau: f64) -> f64 {
        self.forward_c(eps, tau).unwrap_or(f64::NAN)
    }

    fn c_l_jets(&self, eps: f64, tau: f64) -> FieldJets {
        let we = self.cnet.jet_forward(eps, tau, Coord::Eps).unwrap();
        let wt = self.cnet.jet_forward(eps, tau, Coord::Tau).unwrap();
        FieldJets::new(we[0], wt[0])
    }

    fn interface(&self, tau: f64) -> f64 {
        self.forward_s(tau).unwrap_or(f64::NAN)
    }

    fn interface_jet(&self, tau: f64) -> JetValue {
        self.snet.forward_jets(&[JetValue::seed(tau)]).unwrap()[0]
    }

    fn c_s(&self) -> f64 {
        self.c_s.value
    }

    // Batched override: stream the grids through the dense kernels instead of
    // evaluating neuron by neuron. Row-major [i_eps * n_tau + j_tau].
    fn composed_grid(&self, eps: &[f64], tau: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        use crate::diffcore::batch::{stream_forward, JetBatch, JetLayout};
        use rayon::prelude::*;

        let n_t = tau.len();
        let s_in = JetBatch::from_comps(
            JetLayout::VALUE,
            vec![Array2::from_shape_vec((1, n_t), tau.to_vec()).unwrap()],
        );
        let eps_star: Vec<f64> =
            stream_forward(&self.snet.net, &s_in).comps[0].row(0).iter().copied().collect();

        let total = eps.len() * n_t;
        let mut theta = vec![0.0; total];
        let mut c = vec![0.0; total];
        let chunk = 8192usize;
        theta
            .par_chunks_mut(chunk)
            .zip(c.par_chunks_mut(chunk))
            .enumerate()
            .for_each(|(ci, (tchunk, cchunk))| {
                let start = ci * chunk;
                let m = tchunk.len();
                let mut input = Array2::zeros((2, m));
                for k in 0..m {
                    let idx = start + k;
                    input[[0, k]] = eps[idx / n_t];
                    input[[1, k]] = tau[idx % n_t];
                }
                let batch = JetBatch::from_comps(JetLayout::VALUE, vec![input]);
                let th = stream_forward(&self.theta.net, &batch);
                let cl = stream_forward(&self.cnet.net, &batch);
                for k in 0..m {
                    let idx = start + k;
                    let (e, j) = (eps[idx / n_t], idx % n_t);
                    let ts = th.comps[0][[0, k]];
                    let tl = th.comps[0][[1, k]];
                    tchunk[k] = crate::physics::compose_theta(e, eps_star[j], ts, tl);
                    cchunk[k] = crate::physics::compose_c(
                        e,
                        eps_star[j],
                        self.c_s.value,
                        cl.comps[0][[0, k]],
                    );
                }
            });
        (theta, c, eps_star)
    }
}

// ---- checkpoint format -------------------------------------------------
//
// Versioned binary layout, everything little-endian:
//   magic "APNN", u32 version, u8 flags (bit 0: snet frozen, bit 1: c_s
//   frozen, bit 2: adam section present), rng seed [u8; 32], rng word
//   position u128, then 3 networks (u32 layer count; per layer u32 rows,
//   u32 cols, f64 weights row-major, f64 biases), then c_s as f64, then the
//   optional Adam section (4 states: t u64, lr f64, m and v vectors sized
//   like the flat parameters, scalars last).

const MAGIC: &[u8; 4] = b"APNN";
const VERSION: u32 = 1;

/// RNG state captured alongside the parameters so a run directory fully
/// describes the sampling stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct RngState {
    pub seed: [u8; 32],
    pub word_pos: u128,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ParamSet,
    pub rng: RngState,
    /// (t, lr, m, v) per optimizer state: theta, cnet, snet, c_s.
    pub adam: Option<Vec<(u64, f64, Vec<f64>, Vec<f64>)>>,
}

impl Checkpoint {
    pub fn write(&self, path: &std::path::Path) -> Result<(), NetError> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        let mut flags = 0u8;
        if self.params.snet_frozen {
            flags |= 1;
        }
        if self.params.c_s.frozen {
            flags |= 2;
        }
        if self.adam.is_some() {
            flags |= 4;
        }
        buf.push(flags);
        buf.extend_from_slice(&self.rng.seed);
        buf.extend_from_slice(&self.rng.word_pos.to_le_bytes());
        for mlp in [&self.params.theta, &self.params.cnet, &self.params.snet] {
            buf.extend_from_slice(&(mlp.net.layers.len() as u32).to_le_bytes());
            for l in &mlp.net.layers {
                buf.extend_from_slice(&(l.w.nrows() as u32).to_le_bytes());
                buf.extend_from_slice(&(l.w.ncols() as u32).to_le_bytes());
                for v in l.w.iter() {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
                for v in l.b.iter() {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        buf.extend_from_slice(&self.params.c_s.value.to_le_bytes());
        if let Some(states) = &self.adam {
            buf.extend_from_slice(&(states.len() as u32).to_le_bytes());
            for (t, lr, m, v) in states {
                buf.extend_from_slice(&t.to_le_bytes());
                buf.extend_from_slice(&lr.to_le_bytes());
                buf.extend_from_slice(&(m.len() as u64).to_le_bytes());
                for x in m {
                    buf.extend_from_slice(&x.to_le_bytes());
                }
                for x in v {
                    buf.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn read(path: &std::path::Path) -> Result<Checkpoint, NetError> {
        let buf = std::fs::read(path)?;
        let mut rd = Reader { buf: &buf, at: 0 };
        if rd.bytes(4)? != MAGIC {
            return Err(NetError::Format("bad magic; not a checkpoint file".into()));
        }
        let version = rd.u32()?;
        if version != VERSION {
            return Err(NetError::Format(format!("unsupported version {version}")));
        }
        let flags = rd.bytes(1)?[0];
        let mut seed = [0u8; 32];
        seed.copy_from_slice(rd.bytes(32)?);
        let word_pos = u128::from_le_bytes(rd.bytes(16)?.try_into().unwrap());
        let mut nets = Vec::with_capacity(3);
        for _ in 0..3 {
            let n_layers = rd.u32()? as usize;
            if n_layers == 0 || n_layers > 1000 {
                return Err(NetError::Format(format!("implausible layer count {n_layers}")));
            }
            let mut layers = Vec::with_capacity(n_layers);
            for _ in 0..n_layers {
                let rows = rd.u32()? as usize;
                let cols = rd.u32()? as usize;
                if rows == 0 || cols == 0 || rows * cols > 100_000_000 {
                    return Err(NetError::Format(format!("implausible layer shape {rows}x{cols}")));
                }
                let mut w = Vec::with_capacity(rows * cols);
                for _ in 0..rows * cols {
                    w.push(rd.f64()?);
                }
                let mut b = Vec::with_capacity(rows);
                for _ in 0..rows {
                    b.push(rd.f64()?);
                }
                layers.push(DenseLayer {
                    w: Array2::from_shape_vec((rows, cols), w).unwrap(),
                    b: Array1::from_vec(b),
                });
            }
            nets.push(MlpParams { net: DenseNet { layers } });
        }
        let c_s = rd.f64()?;
        let adam = if flags & 4 != 0 {
            let n = rd.u32()? as usize;
            let mut states = Vec::with_capacity(n);
            for _ in 0..n {
                let t = u64::from_le_bytes(rd.bytes(8)?.try_into().unwrap());
                let lr = rd.f64()?;
                let len = u64::from_le_bytes(rd.bytes(8)?.try_into().unwrap()) as usize;
                if len > 100_000_000 {
                    return Err(NetError::Format("implausible adam state length".into()));
                }
                let mut m = Vec::with_capacity(len);
                for _ in 0..len {
                    m.push(rd.f64()?);
                }
                let mut v = Vec::with_capacity(len);
                for _ in 0..len {
                    v.push(rd.f64()?);
                }
                states.push((t, lr, m, v));
            }
            Some(states)
        } else {
            None
        };
        let mut it = nets.into_iter();
        let params = ParamSet {
            theta: it.next().unwrap(),
            cnet: it.next().unwrap(),
            snet: it.next().unwrap(),
            c_s: SolidComposition { value: c_s, frozen: flags & 2 != 0 },
            snet_frozen: flags & 1 != 0,
        };
        Ok(Checkpoint { params, rng: RngState { seed, word_pos }, adam })
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn bytes(&mut self, n: usize) -> Result<&'a [u8], NetError> {
        if self.at + n > self.buf.len() {
            return Err(NetError::Format("truncated checkpoint".into()));
        }
        let s = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NetError> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, NetError> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn glorot_std_matches_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let w = glorot_init(100, 100, &mut rng);
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let var = w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        assert!((std - 0.1).abs() < 0.005, "sample std {std} not within 5% of 0.1");
        // minimal shape: sqrt(2/2) = 1
        let w1 = glorot_init(1, 1, &mut rng);
        assert!(w1[[0, 0]].is_finite());
    }

    #[test]
    fn glorot_is_deterministic_per_seed() {
        let a = glorot_init(7, 5, &mut ChaCha8Rng::seed_from_u64(9));
        let b = glorot_init(7, 5, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn swish_values() {
        assert_eq!(swish(0.0), 0.0);
        assert!((swish(1.0) - 7.31058578630004896e-01).abs() < 1e-15);
        assert!(swish(-30.0) < 0.0 && swish(-30.0) > -2.785e-1);
    }

    #[test]
    fn zero_weights_output_equals_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut mlp = MlpParams::init(2, &[4, 4], 1, &mut rng);
        for l in &mut mlp.net.layers {
            l.w.fill(0.0);
            l.b.fill(0.0);
        }
        mlp.net.layers.last_mut().unwrap().b[0] = 0.75;
        assert_eq!(mlp.forward(&[0.3, 0.9]).unwrap()[0], 0.75);
    }

    #[test]
    fn forward_is_deterministic_and_matches_jets() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mlp = MlpParams::init(2, &[8, 8], 2, &mut rng);
        let v1 = mlp.forward(&[0.2, 3.0]).unwrap();
        let v2 = mlp.forward(&[0.2, 3.0]).unwrap();
        assert_eq!(v1, v2);
        let jets = mlp.jet_forward(0.2, 3.0, Coord::Eps).unwrap();
        assert_eq!(jets[0].v, v1[0]);
        assert_eq!(jets[1].v, v1[1]);
    }

    #[test]
    fn affine_network_jets() {
        // y = 2 eps + 3 tau (+ bias): first derivative equals the
        // coefficient, curvature exactly zero
        let mut mlp = MlpParams::init(2, &[], 1, &mut ChaCha8Rng::seed_from_u64(0));
        mlp.net.layers[0].w[[0, 0]] = 2.0;
        mlp.net.layers[0].w[[0, 1]] = 3.0;
        mlp.net.layers[0].b[0] = 0.25;
        let j = mlp.jet_forward(0.5, 1.0, Coord::Eps).unwrap()[0];
        assert_eq!(j.v, 2.0 * 0.5 + 3.0 * 1.0 + 0.25);
        assert_eq!(j.d1, 2.0);
        assert_eq!(j.d2, 0.0);
    }

    #[test]
    fn jet_second_derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mlp = MlpParams::init(2, &[16, 16], 1, &mut rng);
        let f = |t: f64| mlp.forward(&[0.4, t]).unwrap()[0];
        let h = 1e-4;
        let (e, t) = (0.4, 2.5);
        let fd2 = (f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h);
        let j = mlp.jet_forward(e, t, Coord::Tau).unwrap()[0];
        assert!(
            (j.d2 - fd2).abs() / fd2.abs().max(1e-3) < 1e-5,
            "jet {} vs fd {}",
            j.d2,
            fd2
        );
    }

    #[test]
    fn param_count_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mlp = MlpParams::init(2, &DEFAULT_HIDDEN, 1, &mut rng);
        // 2-input/1-output: 2*100+100 + 4*(100*100+100) + 100+1
        assert_eq!(mlp.n_params(), 2 * 100 + 100 + 4 * (100 * 100 + 100) + 100 + 1);
        assert_eq!(mlp.n_params(), 40801);
    }

    #[test]
    fn flat_roundtrip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mlp = MlpParams::init(2, &[6, 5], 2, &mut rng);
        let mut copy = mlp.clone();
        let flat = mlp.flat();
        copy.set_flat(&flat);
        assert_eq!(mlp, copy);
    }

    #[test]
    fn lipschitz_bound_on_compact_domain() {
        // |f(x) - f(y)| <= K |x - y| with K from layer norms and the swish
        // slope bound (max |swish'| < 1.1)
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mlp = MlpParams::init(2, &[10, 10], 1, &mut rng);
        let mut k = 1.0;
        for (i, l) in mlp.net.layers.iter().enumerate() {
            let frob = l.w.iter().map(|x| x * x).sum::<f64>().sqrt();
            k *= frob;
            if i + 1 < mlp.net.layers.len() {
                k *= 1.1;
            }
        }
        let mut rng2 = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..50 {
            let x = [rng2.gen::<f64>(), rng2.gen::<f64>() * 10.0];
            let y = [rng2.gen::<f64>(), rng2.gen::<f64>() * 10.0];
            let fx = mlp.forward(&x).unwrap()[0];
            let fy = mlp.forward(&y).unwrap()[0];
            let dist = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
            assert!((fx - fy).abs() <= k * dist + 1e-12);
        }
    }

    #[test]
    fn nonfinite_parameters_name_the_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut mlp = MlpParams::init(2, &[4], 1, &mut rng);
        mlp.net.layers[1].w[[0, 0]] = f64::INFINITY;
        match mlp.forward(&[0.1, 0.1]) {
            Err(NetError::NonFinite { layer }) => assert_eq!(layer, 1),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn checkpoint_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut params = ParamSet::init(&[5, 4], &mut rng);
        params.c_s.value = 0.123;
        params.c_s.frozen = true;
        params.snet_frozen = true;
        let ck = Checkpoint {
            params,
            rng: RngState { seed: [7; 32], word_pos: 1234567890123 },
            adam: Some(vec![(42, 1e-3, vec![0.1, 0.2], vec![0.3, 0.4])]),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        ck.write(&path).unwrap();
        let rt = Checkpoint::read(&path).unwrap();
        assert_eq!(ck, rt);
    }

    #[test]
    fn corrupted_checkpoint_is_diagnosed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"not a checkpoint").unwrap();
        match Checkpoint::read(&path) {
            Err(NetError::Format(msg)) => assert!(msg.contains("magic")),
            other => panic!("expected format error, got {other:?}"),
        }
    }
}
