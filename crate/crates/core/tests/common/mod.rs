//! Gradient checks shared by the gradient suite and the acceptance run.
//! Each block is checked on five random shapes.

#![allow(dead_code)]

use newsbench::neural::attention::{AttentionLayer, RelativeContext};
use newsbench::neural::gradcheck::{check_gradients, probe, GradCheckReport};
use newsbench::neural::layers::{Embedding, FeedForward, LayerNorm, Linear};
use newsbench::neural::{
    distillation_loss, AttentionVariant, DistillConfig, LstmClassifier, LstmConfig, Matrix, ParamStore, SequenceModel,
    TransformerClassifier, TransformerConfig,
};
use newsbench::seed;

pub type Reports = Vec<(String, GradCheckReport)>;

/// Every block in one list.
pub fn all_blocks() -> Reports {
    [
        embedding(),
        layer_norm(),
        feed_forward(),
        classifier_head_with_cross_entropy(),
        standard_attention(),
        disentangled_attention(),
        lstm_gates_end_to_end(),
        transformer_classifier_both_variants(),
        pretraining_heads(),
        distillation_objective(),
    ]
    .concat()
}

fn ids(n: usize, rows: usize, s: u64) -> Vec<usize> {
    use rand::Rng;
    let mut rng = seed::rng(s);
    (0..n).map(|_| rng.gen_range(0..rows)).collect()
}

pub fn embedding() -> Reports {
    let mut out = Vec::new();
    for (i, &(rows, dim, n)) in [(3, 2, 4), (5, 3, 2), (7, 4, 6), (4, 1, 3), (10, 5, 5)].iter().enumerate() {
        let mut store = ParamStore::new();
        let emb = Embedding::new(&mut store, "emb", rows, dim, &mut seed::rng(i as u64));
        let tokens = ids(n, rows, 100 + i as u64);
        let report = check_gradients(&store, &[], |g, _| {
            let x = emb.forward(g, &tokens);
            probe(g, x, &mut seed::rng(7))
        });
        out.push((format!("embedding {rows}x{dim} seq {n}"), report));
    }
    out
}

pub fn layer_norm() -> Reports {
    let mut out = Vec::new();
    for (i, &(n, d)) in [(1, 2), (2, 3), (3, 5), (4, 4), (6, 8)].iter().enumerate() {
        let mut store = ParamStore::new();
        let ln = LayerNorm::new(&mut store, "ln", d);
        // Move gamma and beta away from their 1/0 initialization.
        for id in store.ids().collect::<Vec<_>>() {
            let m = Matrix::uniform(1, d, 1.0, &mut seed::rng(50 + i as u64));
            store.get_mut(id).add_assign(&m);
        }
        let x = Matrix::uniform(n, d, 2.0, &mut seed::rng(i as u64));
        let report = check_gradients(&store, &[x], |g, v| {
            let y = ln.forward(g, v[0]);
            probe(g, y, &mut seed::rng(8))
        });
        out.push((format!("layer norm {n}x{d}"), report));
    }
    out
}

pub fn feed_forward() -> Reports {
    let mut out = Vec::new();
    for (i, &(n, d, ff)) in [(1, 2, 3), (2, 3, 6), (3, 4, 8), (5, 2, 4), (4, 6, 5)].iter().enumerate() {
        let mut store = ParamStore::new();
        let ffn = FeedForward::new(&mut store, "ffn", d, ff, &mut seed::rng(i as u64));
        let x = Matrix::uniform(n, d, 1.5, &mut seed::rng(20 + i as u64));
        let report = check_gradients(&store, &[x], |g, v| {
            let y = ffn.forward(g, v[0]);
            probe(g, y, &mut seed::rng(9))
        });
        out.push((format!("feed-forward {n}x{d} inner {ff}"), report));
    }
    out
}

pub fn classifier_head_with_cross_entropy() -> Reports {
    let mut out = Vec::new();
    for (i, &(n, d)) in [(1, 2), (2, 3), (3, 4), (5, 6), (4, 1)].iter().enumerate() {
        let mut store = ParamStore::new();
        let head = Linear::new(&mut store, "head", d, 2, true, &mut seed::rng(i as u64));
        let x = Matrix::uniform(n, d, 1.0, &mut seed::rng(30 + i as u64));
        let targets: Vec<usize> = (0..n).map(|r| (r + i) % 2).collect();
        let report = check_gradients(&store, &[x], |g, v| {
            let logits = head.forward(g, v[0]);
            g.cross_entropy(logits, &targets)
        });
        out.push((format!("classifier head {n}x{d}"), report));
    }
    out
}

fn masks(n: usize, padded: usize) -> Vec<bool> {
    (0..n).map(|j| j < n - padded).collect()
}

pub fn standard_attention() -> Reports {
    let mut out = Vec::new();
    for (i, &(n, d, heads, padded)) in
        [(1, 2, 1, 0), (3, 4, 2, 1), (4, 6, 3, 0), (5, 4, 1, 2), (6, 8, 2, 3)].iter().enumerate()
    {
        let mut store = ParamStore::new();
        let layer =
            AttentionLayer::new(&mut store, "att", d, heads, AttentionVariant::Standard, &mut seed::rng(i as u64));
        let x = Matrix::uniform(n, d, 1.0, &mut seed::rng(40 + i as u64));
        let mask = masks(n, padded);
        let report = check_gradients(&store, &[x], |g, v| {
            let y = layer.forward(g, v[0], &mask, None, None);
            probe(g, y, &mut seed::rng(10))
        });
        out.push((format!("standard attention n {n} d {d} heads {heads} pad {padded}"), report));
    }
    out
}

pub fn disentangled_attention() -> Reports {
    let mut out = Vec::new();
    for (i, &(n, d, heads, k, padded)) in
        [(2, 2, 1, 1, 0), (3, 4, 2, 1, 1), (4, 4, 1, 3, 0), (5, 6, 3, 2, 2), (6, 4, 2, 8, 1)].iter().enumerate()
    {
        let variant = AttentionVariant::Disentangled { max_distance: k, decoder_absolute_positions: false };
        let mut store = ParamStore::new();
        let mut rng = seed::rng(i as u64);
        let layer = AttentionLayer::new(&mut store, "att", d, heads, variant, &mut rng);
        let table = store.add("relative", Matrix::uniform(2 * k + 1, d, 0.5, &mut rng));
        let x = Matrix::uniform(n, d, 1.0, &mut seed::rng(60 + i as u64));
        let mask = masks(n, padded);
        let index = newsbench::neural::relative_index(n, k);
        let report = check_gradients(&store, &[x], |g, v| {
            let ctx = RelativeContext { table: g.param(table), index: index.clone() };
            let y = layer.forward(g, v[0], &mask, Some(&ctx), None);
            probe(g, y, &mut seed::rng(11))
        });
        out.push((format!("disentangled attention n {n} d {d} heads {heads} k {k} pad {padded}"), report));
    }
    out
}

pub fn lstm_gates_end_to_end() -> Reports {
    let mut out = Vec::new();
    for (i, &(vocab, d_emb, hidden, n)) in
        [(3, 2, 2, 1), (4, 3, 2, 3), (5, 2, 4, 4), (6, 4, 3, 2), (3, 3, 5, 5)].iter().enumerate()
    {
        let cfg = LstmConfig { d_emb, hidden, max_len: 8 };
        let model = LstmClassifier::new(cfg, vocab, 70 + i as u64).unwrap();
        let mut seq: Vec<u32> = ids(n, vocab + 1, 80 + i as u64).into_iter().map(|t| t as u32 + 1).collect();
        seq.push(0);
        let label = i % 2;
        let report = check_gradients(model.params(), &[], |g, _| {
            let logits = model.logits(g, &seq, None).unwrap();
            g.cross_entropy(logits, &[label])
        });
        out.push((format!("lstm vocab {vocab} emb {d_emb} hidden {hidden} steps {n}"), report));
    }
    out
}

fn tiny_transformer(i: usize, attention: AttentionVariant, heads_on: bool) -> TransformerClassifier {
    let shapes = [(2, 1, 1, 3), (4, 2, 1, 4), (4, 1, 2, 2), (6, 3, 1, 5), (4, 2, 2, 6)];
    let (d_model, heads, layers, d_ff) = shapes[i];
    let cfg = TransformerConfig {
        d_model,
        heads,
        layers,
        d_ff,
        max_len: 6,
        dropout: 0.0,
        attention,
        pretraining_heads: heads_on,
    };
    TransformerClassifier::new(cfg, 3, 90 + i as u64).unwrap()
}

pub fn transformer_classifier_both_variants() -> Reports {
    let mut out = Vec::new();
    let variants = [
        AttentionVariant::Standard,
        AttentionVariant::Disentangled { max_distance: 2, decoder_absolute_positions: true },
    ];
    for variant in variants {
        for i in 0..5 {
            let model = tiny_transformer(i, variant, false);
            let seq: Vec<u32> = [2, 4, 1, 3, 0, 0][..3 + i % 3].to_vec();
            let report = check_gradients(model.params(), &[], |g, _| {
                let logits = model.logits(g, &seq, None).unwrap();
                g.cross_entropy(logits, &[i % 2])
            });
            out.push((format!("transformer {} shape {i}", variant.name()), report));
        }
    }
    out
}

pub fn pretraining_heads() -> Reports {
    let mut out = Vec::new();
    for variant in [AttentionVariant::Standard, AttentionVariant::disentangled()] {
        for i in 0..5 {
            let model = tiny_transformer(i, variant, true);
            let seq: Vec<u32> = vec![2, model.mask_id(), 3, model.sep_id(), 4];
            let report = check_gradients(model.params(), &[], |g, _| {
                let (hidden, _) = model.encode(g, &seq, None, None).unwrap();
                let mlm = model.mlm_logits(g, hidden, &[1, 4]).unwrap();
                let mlm_loss = g.cross_entropy(mlm, &[3, 2]);
                let nsp = model.nsp_logits(g, &seq, None).unwrap();
                let nsp_loss = g.cross_entropy(nsp, &[i % 2]);
                g.add(mlm_loss, nsp_loss)
            });
            out.push((format!("pretraining heads {} shape {i}", variant.name()), report));
        }
    }
    out
}

pub fn distillation_objective() -> Reports {
    let mut out = Vec::new();
    for (i, &(t, alpha)) in [(1.0, 0.0), (2.0, 0.5), (0.5, 0.3), (4.0, 0.9), (1.5, 1.0)].iter().enumerate() {
        let logits = Matrix::uniform(1, 2, 2.0, &mut seed::rng(i as u64));
        let teacher = [0.3 + 0.1 * i as f64, 0.7 - 0.1 * i as f64];
        let cfg = DistillConfig { temperature: t, alpha };
        let report =
            check_gradients(&ParamStore::new(), &[logits], |g, v| distillation_loss(g, v[0], i % 2, &teacher, &cfg));
        out.push((format!("distillation loss T {t} alpha {alpha}"), report));
    }
    out
}
