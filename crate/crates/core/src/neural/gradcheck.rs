//! Central finite-difference gradient checks.
//!
//! The relative error of an analytic value `a` against a numerical value `n`
//! is `|a - n| / max(|a|, |n|, 1e-6)`; the floor keeps entries whose true
//! gradient is zero from dividing by round-off.

use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, Var};
use super::params::{GradStore, ParamStore};
use super::tensor::Matrix;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
const FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Where the largest error occurred.
    pub worst: String,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < TOLERANCE
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// Checks every parameter entry in `store` and every entry of `inputs`
/// against central differences of the scalar built by `build`.
pub fn check_gradients<F>(store: &ParamStore, inputs: &[Matrix], build: F) -> GradCheckReport
where
    F: Fn(&mut Graph, &[Var]) -> Var,
{
    let eval = |s: &ParamStore, xs: &[Matrix]| {
        let mut g = Graph::new(s);
        let vars: Vec<Var> = xs.iter().map(|x| g.input(x.clone())).collect();
        let loss = build(&mut g, &vars);
        g.scalar(loss)
    };

    let mut grads = GradStore::zeros_like(store);
    let mut g = Graph::new(store);
    let vars: Vec<Var> = inputs.iter().map(|x| g.input(x.clone())).collect();
    let loss = build(&mut g, &vars);
    let node_grads = g.backward(loss, &mut grads);
    let input_grads: Vec<Matrix> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, x)| node_grads.get(v).cloned().unwrap_or_else(|| Matrix::zeros(x.rows, x.cols)))
        .collect();

    let mut report = GradCheckReport { max_rel_error: 0.0, worst: String::new(), checked: 0 };
    let mut note = |err: f64, at: String| {
        report.checked += 1;
        if err > report.max_rel_error || report.worst.is_empty() {
            report.max_rel_error = err;
            report.worst = at;
        }
    };

    let mut probe = store.clone();
    for id in store.ids() {
        for k in 0..store.get(id).len() {
            let original = store.get(id).data[k];
            probe.get_mut(id).data[k] = original + STEP;
            let up = eval(&probe, inputs);
            probe.get_mut(id).data[k] = original - STEP;
            let down = eval(&probe, inputs);
            probe.get_mut(id).data[k] = original;
            let numeric = (up - down) / (2.0 * STEP);
            note(relative_error(grads.get(id).data[k], numeric), format!("{}[{k}]", store.name(id)));
        }
    }
    let mut xs = inputs.to_vec();
    for (i, analytic) in input_grads.iter().enumerate() {
        for k in 0..xs[i].len() {
            let original = xs[i].data[k];
            xs[i].data[k] = original + STEP;
            let up = eval(store, &xs);
            xs[i].data[k] = original - STEP;
            let down = eval(store, &xs);
            xs[i].data[k] = original;
            let numeric = (up - down) / (2.0 * STEP);
            note(relative_error(analytic.data[k], numeric), format!("input{i}[{k}]"));
        }
    }
    report
}

/// Reduces a matrix output to a scalar through a fixed random weighting, so
/// every output entry influences the checked loss differently.
pub fn probe(g: &mut Graph, out: Var, rng: &mut ChaCha8Rng) -> Var {
    let (r, c) = g.value(out).shape();
    let weights = Matrix::uniform(r, c, 1.0, rng);
    let weighted = g.mul_const(out, weights);
    g.sum(weighted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn run(inputs: Vec<Matrix>, build: impl Fn(&mut Graph, &[Var]) -> Var) {
        let store = ParamStore::new();
        let report = check_gradients(&store, &inputs, build);
        assert!(report.passed(), "{report:?}");
        assert!(report.checked > 0);
    }

    fn m(r: usize, c: usize, s: u64) -> Matrix {
        Matrix::uniform(r, c, 1.0, &mut seed::rng(s))
    }

    #[test]
    fn elementwise_and_products() {
        run(vec![m(3, 4, 1), m(4, 2, 2), m(3, 4, 3), m(1, 4, 4)], |g, v| {
            let mut rng = seed::rng(9);
            let a = g.matmul(v[0], v[1]);
            let b = g.matmul_bt(v[0], v[2]);
            let c = g.mul(v[0], v[2]);
            let c = g.add_row(c, v[3]);
            let c = g.sigmoid(c);
            let d = g.tanh(b);
            let e = g.gelu(a);
            let e = g.scale(e, 0.7);
            let t = g.transpose(d);
            let l1 = probe(g, c, &mut rng);
            let l2 = probe(g, t, &mut rng);
            let l3 = probe(g, e, &mut rng);
            let s = g.add(l1, l2);
            g.add(s, l3)
        });
    }

    #[test]
    fn softmax_and_norms() {
        run(vec![m(3, 5, 5), m(1, 5, 6), m(1, 5, 7)], |g, v| {
            let mut rng = seed::rng(10);
            let p = g.softmax_rows(v[0], Some(&[true, false, true, true, false]));
            let q = g.softmax_rows(v[0], None);
            let ln = g.layer_norm(v[0], v[1], v[2]);
            let mean = g.masked_mean_rows(ln, &[true, false, true]);
            let a = probe(g, p, &mut rng);
            let b = probe(g, q, &mut rng);
            let c = probe(g, mean, &mut rng);
            let s = g.add(a, b);
            g.add(s, c)
        });
    }

    #[test]
    fn indexing() {
        run(vec![m(4, 6, 11), m(2, 3, 12)], |g, v| {
            let mut rng = seed::rng(13);
            let rows = g.gather_rows(v[0], &[3, 0, 3]);
            let cols = g.slice_cols(v[0], 1, 3);
            let sliced = g.slice_rows(cols, 1, 2);
            let joined = g.concat_rows(&[sliced, v[1]]);
            let wide = g.concat_cols(&[joined, joined]);
            let picked = g.gather_cols(v[0], &[0, 5, 5, 1, 2, 2, 4, 3], 2);
            let a = probe(g, rows, &mut rng);
            let b = probe(g, wide, &mut rng);
            let c = probe(g, picked, &mut rng);
            let s = g.add(a, b);
            g.add(s, c)
        });
    }

    #[test]
    fn losses() {
        let target = Matrix::from_rows(&[vec![0.2, 0.8], vec![0.6, 0.4], vec![1.0, 0.0]]);
        run(vec![m(3, 2, 21)], move |g, v| {
            let ce = g.cross_entropy(v[0], &[1, 0, 1]);
            let kl = g.soft_target_kl(v[0], &target, 2.5);
            g.add(ce, kl)
        });
    }

    #[test]
    fn kl_is_zero_at_target() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let logits = Matrix::from_rows(&[vec![0.3, -1.2]]);
        let t = 1.7;
        let target = crate::neural::graph::softmax_matrix(&logits, t);
        let z = g.input(logits);
        let kl = g.soft_target_kl(z, &target, t);
        assert!(g.scalar(kl).abs() < 1e-15);
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 1.0001) - 1e-4 / 1.0001).abs() < 1e-12);
    }
}
