// temporary perf probe
use alloypinn::diffcore::batch::{affine_fwd, swish_fwd, swish_adj, affine_grads, affine_adj_input, DenseLayer, DenseNet, JetBatch, JetLayout};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = 2048usize;
    let w: Array2<f64> = Array2::from_shape_fn((100,100), |_| rng.gen::<f64>()-0.5);
    let b: Array1<f64> = Array1::zeros(100);
    let layer = DenseLayer{w: w.clone(), b};
    let _net = DenseNet{layers: vec![layer]};
    let mut a = JetBatch::zeros(JetLayout::COLLOCATION, 100, m);
    for c in &mut a.comps { for v in c.iter_mut() { *v = rng.gen::<f64>()-0.5; } }

    let reps = 50;
    let t0 = std::time::Instant::now();
    for _ in 0..reps {
        let z = affine_fwd(&w, &Array1::zeros(100), &a);
        std::hint::black_box(&z);
    }
    let dt = t0.elapsed().as_secs_f64()/reps as f64;
    let gf = 2.0*100.0*100.0*(4*m) as f64 / dt / 1e9;
    println!("affine_fwd 4-comp m={m}: {:.4} s  ({:.1} Gflop/s)", dt, gf);

    let z = affine_fwd(&w, &Array1::zeros(100), &a);
    let t0 = std::time::Instant::now();
    for _ in 0..reps { let (s, sig) = swish_fwd(&z); std::hint::black_box((&s, &sig)); }
    println!("swish_fwd: {:.4} s", t0.elapsed().as_secs_f64()/reps as f64);

    let (act, sig) = swish_fwd(&z);
    let t0 = std::time::Instant::now();
    for _ in 0..reps { let zb = swish_adj(&z, &sig, &act); std::hint::black_box(&zb); }
    println!("swish_adj: {:.4} s", t0.elapsed().as_secs_f64()/reps as f64);

    let mut gw = Array2::zeros((100,100));
    let mut gb = Array1::zeros(100);
    let t0 = std::time::Instant::now();
    for _ in 0..reps { affine_grads(&act, &a, &mut gw, &mut gb); std::hint::black_box(&gw); }
    println!("affine_grads: {:.4} s", t0.elapsed().as_secs_f64()/reps as f64);

    let t0 = std::time::Instant::now();
    for _ in 0..reps { let ab = affine_adj_input(&w, &act); std::hint::black_box(&ab); }
    println!("affine_adj_input: {:.4} s", t0.elapsed().as_secs_f64()/reps as f64);
}
