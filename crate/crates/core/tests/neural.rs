use newsbench::neural::graph::Graph;
use newsbench::neural::{
    adamw_step, attention, build_mlm_batch, build_nsp_pairs, distill, distillation_loss, pretrain, relative_index,
    train_classifier, AdamWConfig, AttentionVariant, DistillConfig, Example, GradStore, LstmClassifier, LstmConfig,
    Matrix, MlmObjective, NspObjective, OptimizerState, ParamStore, PretrainConfig, PretrainObjective, RelativeInputs,
    SequenceModel, TrainConfig, TransformerClassifier, TransformerConfig,
};
use newsbench::{seed, Error};
use proptest::prelude::*;
use rand::Rng;

fn tiny_transformer(variant: AttentionVariant, heads: bool) -> TransformerConfig {
    TransformerConfig {
        d_model: 8,
        heads: 2,
        layers: 1,
        d_ff: 16,
        max_len: 24,
        attention: variant,
        pretraining_heads: heads,
        ..Default::default()
    }
}

/// Class 0 draws ids from 2..7, class 1 from 7..12.
fn toy_examples(n: usize, seed_: u64) -> Vec<Example> {
    let mut rng = seed::rng(seed_);
    (0..n)
        .map(|i| {
            let label = i % 2;
            let len = rng.gen_range(3..10);
            let base = if label == 0 { 2 } else { 7 };
            let ids = (0..len).map(|_| base + rng.gen_range(0..5)).collect();
            Example { ids, label }
        })
        .collect()
}

fn accuracy<M: SequenceModel>(model: &M, examples: &[Example]) -> f64 {
    let hits = examples
        .iter()
        .filter(|e| {
            let l = model.predict_logits(&e.ids).unwrap();
            usize::from(l[1] > l[0]) == e.label
        })
        .count();
    hits as f64 / examples.len() as f64
}

#[test]
fn attention_singleton_and_symmetric_keys() {
    let mut rng = seed::rng(1);
    let q = Matrix::uniform(1, 3, 2.0, &mut rng);
    let out = attention(&q, &q, &q, &[true], None).unwrap();
    assert_eq!(out.probs.data, vec![1.0]);

    let q = Matrix::uniform(2, 3, 2.0, &mut rng);
    let k = Matrix::from_vec(2, 3, vec![0.3, -0.1, 0.7, 0.3, -0.1, 0.7]);
    let out = attention(&q, &k, &q, &[true, true], None).unwrap();
    for i in 0..2 {
        assert_eq!(out.probs.row(i), &[0.5, 0.5]);
    }
}

#[test]
fn attention_rejects_all_padding() {
    let m = Matrix::zeros(3, 2);
    assert!(matches!(attention(&m, &m, &m, &[false; 3], None), Err(Error::Data(_))));
}

#[test]
fn zero_relative_tables_leave_only_content_scores() {
    let mut rng = seed::rng(2);
    let (n, d) = (5, 4);
    let q = Matrix::uniform(n, d, 1.0, &mut rng);
    let k = Matrix::uniform(n, d, 1.0, &mut rng);
    let zeros = Matrix::zeros(2 * 2 + 1, d);
    let out = attention(
        &q,
        &k,
        &q,
        &[true; 5],
        Some(RelativeInputs { rel_queries: &zeros, rel_keys: &zeros, max_distance: 2 }),
    )
    .unwrap();
    let scale = 1.0 / (3.0 * d as f64).sqrt();
    for i in 0..n {
        for j in 0..n {
            let c2c: f64 = (0..d).map(|x| q.get(i, x) * k.get(j, x)).sum();
            assert!((out.scores.get(i, j) - c2c * scale).abs() < 1e-12);
        }
    }
    assert!(out.c2p.unwrap().data.iter().all(|&x| x == 0.0));
    assert!(out.p2c.unwrap().data.iter().all(|&x| x == 0.0));
}

proptest! {
    #[test]
    fn relative_distances_are_clipped(n in 1usize..20, k in 1usize..6) {
        let index = relative_index(n, k);
        prop_assert_eq!(index.len(), n * n);
        for i in 0..n {
            for j in 0..n {
                let expected = (i as i64 - j as i64).clamp(-(k as i64), k as i64) + k as i64;
                prop_assert_eq!(index[i * n + j] as i64, expected);
            }
        }
    }

    #[test]
    fn attention_rows_are_distributions(n in 1usize..8, d in 1usize..5, s in any::<u64>()) {
        let mut rng = seed::rng(s);
        let q = Matrix::uniform(n, d, 4.0, &mut rng);
        let k = Matrix::uniform(n, d, 4.0, &mut rng);
        let mut mask: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.6)).collect();
        mask[0] = true;
        let out = attention(&q, &k, &q, &mask, None).unwrap();
        for i in 0..n {
            let row = out.probs.row(i);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert!(row.iter().zip(&mask).all(|(&p, &m)| (m && p >= 0.0) || p == 0.0));
        }
    }
}

#[test]
fn adamw_examples() {
    let mut store = ParamStore::new();
    let id = store.add("w", Matrix::from_vec(1, 1, vec![1.0]));
    let mut grads = GradStore::zeros_like(&store);
    grads.get_mut(id).data[0] = 0.5;
    let mut state = OptimizerState::new(AdamWConfig::new(0.001, 0.0), &store);
    adamw_step(&mut state, &mut store, &grads).unwrap();
    assert!((store.get(id).data[0] - 0.999).abs() < 1e-9);
    assert_eq!(state.step, 1);

    let mut store = ParamStore::new();
    let id = store.add("w", Matrix::from_vec(1, 1, vec![1.0]));
    let grads = GradStore::zeros_like(&store);
    let mut state = OptimizerState::new(AdamWConfig::new(0.001, 0.01), &store);
    adamw_step(&mut state, &mut store, &grads).unwrap();
    assert!((store.get(id).data[0] - (1.0 - 1e-5)).abs() < 1e-15);
}

#[test]
fn mlm_batch_examples() {
    let seqs = vec![vec![2, 3, 4, 5, 0, 0], vec![6, 7, 0]];
    let none = MlmObjective { mask_rate: 0.0, ..Default::default() };
    let batch = build_mlm_batch(&seqs, &none, 99, 2..12, 1).unwrap();
    assert_eq!(batch.target_count(), 0);
    assert_eq!(batch.inputs, seqs);

    let all = MlmObjective { mask_rate: 1.0, mask_prob: 1.0, keep_prob: 0.0, random_prob: 0.0 };
    let batch = build_mlm_batch(&seqs, &all, 99, 2..12, 1).unwrap();
    assert_eq!(batch.inputs, vec![vec![99, 99, 99, 99, 0, 0], vec![99, 99, 0]]);
    assert_eq!(batch.targets[0], vec![(0, 2), (1, 3), (2, 4), (3, 5)]);

    let thousand = vec![(2..1002).collect::<Vec<u32>>()];
    let batch = build_mlm_batch(&thousand, &MlmObjective::default(), 5000, 2..1002, 7).unwrap();
    let sigma = (1000.0f64 * 0.15 * 0.85).sqrt();
    assert!((batch.target_count() as f64 - 150.0).abs() <= 3.0 * sigma, "{}", batch.target_count());
    assert_eq!(batch, build_mlm_batch(&thousand, &MlmObjective::default(), 5000, 2..1002, 7).unwrap());
}

#[test]
fn mlm_objective_validation() {
    for bad in
        [MlmObjective { mask_rate: 1.2, ..Default::default() }, MlmObjective { mask_prob: 0.5, ..Default::default() }]
    {
        assert!(build_mlm_batch(&[vec![2]], &bad, 9, 2..5, 0).is_err());
    }
}

fn sentence_docs() -> Vec<Vec<Vec<u32>>> {
    (0..12u32).map(|d| (0..1 + d % 4).map(|s| vec![2 + d, 30 + s]).collect()).collect()
}

#[test]
fn nsp_pairs() {
    let docs = sentence_docs();
    let pairs = build_nsp_pairs(&docs, 100, 3).unwrap();
    assert_eq!(pairs.iter().filter(|p| p.is_next).count(), 50);
    for p in &pairs {
        if p.is_next {
            assert_eq!(p.first_doc, p.second_doc);
            let s = docs[p.first_doc].iter().position(|x| *x == p.first).unwrap();
            assert_eq!(docs[p.first_doc][s + 1], p.second);
        } else {
            assert_ne!(p.first_doc, p.second_doc);
        }
    }
    assert_eq!(pairs, build_nsp_pairs(&docs, 100, 3).unwrap());
    let single_sentences: Vec<Vec<Vec<u32>>> = (0..5).map(|d| vec![vec![d + 2]]).collect();
    assert!(build_nsp_pairs(&single_sentences, 10, 0).is_err());
}

#[test]
fn pretraining_contracts() {
    let docs = sentence_docs();
    let mut without_heads =
        TransformerClassifier::new(tiny_transformer(AttentionVariant::Standard, false), 40, 1).unwrap();
    let objective = PretrainObjective::default();
    let config = PretrainConfig { steps: 3, batch_size: 4, ..Default::default() };
    assert!(matches!(pretrain(&mut without_heads, &docs, &objective, &config), Err(Error::Config(_))));

    let fresh = || TransformerClassifier::new(tiny_transformer(AttentionVariant::disentangled(), true), 40, 1).unwrap();
    let mut model = fresh();
    let no_mask = PretrainObjective { mlm: MlmObjective { mask_rate: 0.0, ..Default::default() }, nsp: None };
    assert!(matches!(pretrain(&mut model, &docs, &no_mask, &config), Err(Error::NoTargets(_))));

    let with_nsp = PretrainObjective { nsp: Some(NspObjective { seed: 4 }), ..Default::default() };
    let (mut a, mut b) = (fresh(), fresh());
    let ta = pretrain(&mut a, &docs, &with_nsp, &config).unwrap();
    let tb = pretrain(&mut b, &docs, &with_nsp, &config).unwrap();
    assert_eq!(ta, tb);
    assert_eq!(ta.mlm_loss.len(), 3);
    assert_eq!(ta.nsp_loss.len(), 3);
    assert_eq!(a.params().to_named(), b.params().to_named());
}

#[test]
fn lstm_gates_stay_in_range() {
    let model = LstmClassifier::new(LstmConfig { d_emb: 6, hidden: 5, max_len: 20 }, 10, 4).unwrap();
    let steps = model.gate_values(&[2, 5, 9, 11, 3, 0, 0]).unwrap();
    assert!(!steps.is_empty());
    for s in &steps {
        for m in [&s.input, &s.forget, &s.output] {
            assert!(m.data.iter().all(|&x| x > 0.0 && x < 1.0));
        }
        assert!(s.cell.data.iter().all(|&x| x > -1.0 && x < 1.0));
    }
    assert_eq!(model.predict_logits(&[2, 5, 9]).unwrap(), model.predict_logits(&[2, 5, 9]).unwrap());
}

#[test]
fn classifiers_learn_the_toy_task() {
    let train = toy_examples(80, 5);
    let val = toy_examples(20, 6);
    let test = toy_examples(40, 7);
    let config = TrainConfig { epochs: 8, batch_size: 8, lr: 5e-3, seed: 8, ..Default::default() };

    let mut lstm = LstmClassifier::new(LstmConfig { d_emb: 8, hidden: 8, max_len: 24 }, 12, 9).unwrap();
    train_classifier(&mut lstm, &train, &val, &config).unwrap();
    assert!(accuracy(&lstm, &test) >= 0.95);

    for variant in [AttentionVariant::Standard, AttentionVariant::disentangled()] {
        let mut model = TransformerClassifier::new(tiny_transformer(variant, false), 12, 9).unwrap();
        train_classifier(&mut model, &train, &val, &config).unwrap();
        assert!(accuracy(&model, &test) >= 0.95, "{}", variant.name());
    }
}

#[test]
fn training_is_deterministic_and_rejects_one_class() {
    let train = toy_examples(30, 10);
    let val = toy_examples(10, 11);
    let config = TrainConfig { epochs: 2, batch_size: 4, seed: 12, ..Default::default() };
    let run = || {
        let mut m =
            TransformerClassifier::new(tiny_transformer(AttentionVariant::disentangled(), false), 12, 13).unwrap();
        let trace = train_classifier(&mut m, &train, &val, &config).unwrap();
        (trace, m.params().to_named())
    };
    assert_eq!(run(), run());

    let one_class: Vec<Example> = train.iter().filter(|e| e.label == 0).cloned().collect();
    let mut m = LstmClassifier::new(LstmConfig::default(), 12, 0).unwrap();
    assert!(matches!(train_classifier(&mut m, &one_class, &val, &config), Err(Error::SingleClass(_))));
}

#[test]
fn patience_zero_stops_after_first_bad_epoch() {
    let train = toy_examples(40, 14);
    // Validation labels contradict the training signal, so validation loss
    // rises once the model starts fitting.
    let val: Vec<Example> = toy_examples(20, 15).into_iter().map(|e| Example { label: 1 - e.label, ..e }).collect();
    let config = TrainConfig { epochs: 10, batch_size: 8, lr: 1e-2, patience: 0, seed: 16, ..Default::default() };
    let mut m = LstmClassifier::new(LstmConfig { d_emb: 8, hidden: 8, max_len: 24 }, 12, 17).unwrap();
    let trace = train_classifier(&mut m, &train, &val, &config).unwrap();
    assert!(trace.stopped_early);
    assert_eq!(trace.val_loss.len(), trace.best_epoch + 2);
    let last = *trace.val_loss.last().unwrap();
    assert!(last >= trace.val_loss[trace.best_epoch]);
}

#[test]
fn distillation_loss_limits() {
    let empty = ParamStore::new();
    let mut rng = seed::rng(18);
    for _ in 0..20 {
        let logits = Matrix::uniform(1, 2, 4.0, &mut rng);
        let p: f64 = rng.gen_range(0.01..0.99);
        let teacher = [p, 1.0 - p];
        let mut g = Graph::new(&empty);
        let x = g.input(logits.clone());
        let d = distillation_loss(&mut g, x, 0, &teacher, &DistillConfig { temperature: 1.0, alpha: 0.0 });
        let (a, b) = (logits.data[0], logits.data[1]);
        let lse = a.max(b) + ((a - a.max(b)).exp() + (b - a.max(b)).exp()).ln();
        let q = [(a - lse).exp(), (b - lse).exp()];
        let kl: f64 = teacher.iter().zip(q).map(|(p, q)| p * (p / q).ln()).sum();
        assert!((g.scalar(d) - kl).abs() < 1e-12);
    }
}

#[test]
fn distill_validates_and_shrinks() {
    let train = toy_examples(40, 19);
    let val = toy_examples(10, 20);
    let teacher_cfg = TransformerConfig { layers: 2, ..tiny_transformer(AttentionVariant::Standard, false) };
    let teacher = TransformerClassifier::new(teacher_cfg.clone(), 12, 21).unwrap();
    let student_cfg = TransformerConfig { layers: 1, ..teacher_cfg };
    let tc = TrainConfig { epochs: 1, batch_size: 8, ..Default::default() };
    for bad in [DistillConfig { temperature: 0.0, alpha: 0.5 }, DistillConfig { temperature: 2.0, alpha: 1.5 }] {
        assert!(distill(&teacher, student_cfg.clone(), 12, &train, &val, &bad, &tc).is_err());
    }
    let (student, _) = distill(&teacher, student_cfg, 12, &train, &val, &DistillConfig::default(), &tc).unwrap();
    assert!(student.params().count() < teacher.params().count());
}
