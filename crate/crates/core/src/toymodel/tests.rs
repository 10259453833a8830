use super::*;
use crate::adapters::{adapter_params, OperatorKind};
use crate::clipgen::{generate_corpus, CorpusConfig};
use crate::tensor::finite_difference_check;

fn tiny_dims() -> ModelDims {
    ModelDims {
        width: 8,
        patches: 2,
        frames: 4,
        d_raw: 8,
        blocks: 1,
        heads: 2,
        mlp_hidden: 16,
        ..ModelDims::default()
    }
}

fn tiny_cfg(kind: AdapterKind) -> AdapterConfig {
    AdapterConfig {
        kind,
        rank: 4,
        heads: 2,
        t_max: 4,
        ..AdapterConfig::default()
    }
}

fn random_clip(dims: &ModelDims, t: usize, seed: u64) -> Vec<f32> {
    let mut rng = SplitMix64::new(seed);
    (0..t * dims.patches * dims.d_raw)
        .map(|_| rng.normal() as f32)
        .collect()
}

fn question(seed: u64) -> Vec<usize> {
    let vocab = Vocab::from_template_bank();
    let mut rng = SplitMix64::new(seed);
    (0..5).map(|_| 1 + rng.below(vocab.len() - 1)).collect()
}

fn frozen_backbone(dims: &ModelDims) -> ToyVqaModel {
    let mut m = ToyVqaModel::backbone(dims, 3).unwrap();
    m.freeze();
    m
}

fn wrapped(dims: &ModelDims, vision: AdapterKind, question: AdapterKind) -> ToyVqaModel {
    let mut m = frozen_backbone(dims);
    let policy = ModelPolicy {
        vision: tiny_cfg(vision),
        question: tiny_cfg(question),
    };
    m.wrap(&policy, 11).unwrap();
    m
}

fn perturb_trainable(model: &mut ToyVqaModel, seed: u64, std: f64) {
    let mut rng = SplitMix64::new(seed);
    for id in model.store.trainable_ids() {
        let shape = model.store.value(id).shape().to_vec();
        let noise = Tensor::randn(&shape, std, &mut rng);
        let t = model.store.value_mut(id);
        *t = Tensor::new(
            shape,
            t.data()
                .iter()
                .zip(noise.data())
                .map(|(a, b)| a + b)
                .collect(),
        )
        .unwrap();
    }
}

fn reverse_clip(dims: &ModelDims, clip: &[f32]) -> Vec<f32> {
    let frame = dims.patches * dims.d_raw;
    clip.chunks(frame).rev().flatten().copied().collect()
}

/// Reference logits with the adapters detached: same frozen weights and
/// head, nothing else.
fn head_only(model: &ToyVqaModel) -> ToyVqaModel {
    let mut plain = model.clone();
    for b in &mut plain.blocks {
        b.qkv = AdaptedLinear::frozen(b.qkv.name.clone(), b.qkv.base.clone());
        b.out = AdaptedLinear::frozen(b.out.name.clone(), b.out.base.clone());
    }
    for p in plain.question.projections_mut() {
        *p = AdaptedLinear::frozen(p.name.clone(), p.base.clone());
    }
    plain
}

#[test]
fn every_vision_adapter_starts_as_the_frozen_model() {
    let dims = tiny_dims();
    for kind in AdapterKind::ALL {
        let m = wrapped(&dims, kind, AdapterKind::Lora);
        let plain = head_only(&m);
        for s in 0..5 {
            let clip = random_clip(&dims, 4, s);
            let q = question(s);
            let a = m.logits(&clip, &q).unwrap();
            let b = plain.logits(&clip, &q).unwrap();
            let worst = a
                .iter()
                .zip(&b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(worst <= 1e-12, "{kind}: {worst}");
        }
    }
}

#[test]
fn none_policy_adds_only_the_head() {
    let dims = tiny_dims();
    let m = wrapped(&dims, AdapterKind::None, AdapterKind::None);
    let head = 2 * dims.width * dims.answers + dims.answers;
    assert_eq!(m.store.count().0, head);
    assert!(m.adapter_ids().is_empty());
}

#[test]
fn trainable_count_matches_closed_form() {
    let dims = ModelDims::default();
    for kind in AdapterKind::ALL {
        let mut m = ToyVqaModel::backbone(&dims, 1).unwrap();
        m.freeze();
        let policy = ModelPolicy::with_vision(AdapterConfig::of_kind(kind));
        m.wrap(&policy, 2).unwrap();
        let c = dims.width;
        let vision = dims.blocks
            * (adapter_params(&policy.vision, c, 3 * c) + adapter_params(&policy.vision, c, c));
        let question = 4 * adapter_params(&policy.question, c, c);
        let head = 2 * c * dims.answers + dims.answers;
        assert_eq!(m.store.count().0, vision + question + head, "{kind}");
    }
}

#[test]
fn per_token_models_ignore_frame_order() {
    let dims = tiny_dims();
    for kind in [AdapterKind::None, AdapterKind::Lora, AdapterKind::Dora] {
        let mut m = wrapped(&dims, kind, AdapterKind::Dora);
        perturb_trainable(&mut m, 5, 0.3);
        for s in 0..5 {
            let clip = random_clip(&dims, 4, 100 + s);
            let q = question(s);
            let a = m.logits(&clip, &q).unwrap();
            let b = m.logits(&reverse_clip(&dims, &clip), &q).unwrap();
            let worst = a
                .iter()
                .zip(&b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(worst <= 1e-9, "{kind}: {worst}");
        }
    }
}

#[test]
fn temporal_models_see_frame_order() {
    let dims = tiny_dims();
    for kind in [
        AdapterKind::TemporalDora,
        AdapterKind::StAdapter,
        AdapterKind::LoraMha,
    ] {
        let mut m = wrapped(&dims, kind, AdapterKind::Dora);
        perturb_trainable(&mut m, 6, 0.5);
        let clip = random_clip(&dims, 4, 7);
        let q = question(1);
        let a = m.logits(&clip, &q).unwrap();
        let b = m.logits(&reverse_clip(&dims, &clip), &q).unwrap();
        let worst = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(worst > 1e-6, "{kind}: {worst}");
    }
}

#[test]
fn wrapped_model_gradients_match_finite_differences() {
    let dims = tiny_dims();
    for kind in [
        AdapterKind::TemporalDora,
        AdapterKind::Lora,
        AdapterKind::StAdapter,
        AdapterKind::DoraMha,
    ] {
        let mut m = wrapped(&dims, kind, AdapterKind::Dora);
        perturb_trainable(&mut m, 8, 0.2);
        let clip = random_clip(&dims, 3, 9);
        let q = question(2);
        let ids = m.store.trainable_ids();
        let model = m.clone();
        let report =
            finite_difference_check(&mut m.store, &ids, 1e-5, |g| model.loss(g, &clip, &q, 4))
                .unwrap();
        assert!(report.worst() < 1e-4, "{kind}: {:?}", report.worst_param());
    }
}

#[test]
fn shorter_clips_are_accepted_and_longer_rejected() {
    let dims = tiny_dims();
    let m = wrapped(&dims, AdapterKind::TemporalDora, AdapterKind::Dora);
    assert!(m.logits(&random_clip(&dims, 1, 1), &question(0)).is_ok());
    assert!(matches!(
        m.logits(&random_clip(&dims, 5, 1), &question(0)),
        Err(Error::Config(_))
    ));
    assert!(m.logits(&[0.0; 3], &question(0)).is_err());
}

#[test]
fn out_of_range_token_is_an_error() {
    let dims = tiny_dims();
    let m = wrapped(&dims, AdapterKind::Lora, AdapterKind::Dora);
    assert!(m
        .logits(&random_clip(&dims, 2, 1), &[dims.vocab_size])
        .is_err());
    assert!(m.logits(&random_clip(&dims, 2, 1), &[]).is_err());
}

#[test]
fn wrap_rules() {
    let dims = tiny_dims();
    let mut m = ToyVqaModel::backbone(&dims, 1).unwrap();
    assert!(matches!(
        m.wrap(&ModelPolicy::default(), 0),
        Err(Error::Config(_))
    ));
    m.freeze();
    let temporal_question = ModelPolicy {
        vision: tiny_cfg(AdapterKind::Lora),
        question: tiny_cfg(AdapterKind::TemporalDora),
    };
    assert!(m.wrap(&temporal_question, 0).is_err());
    m.wrap(&ModelPolicy::frozen(), 0).unwrap();
    assert!(m.wrap(&ModelPolicy::frozen(), 0).is_err());
    assert!(m.logits(&random_clip(&dims, 2, 1), &question(0)).is_ok());
}

#[test]
fn identical_seeds_build_identical_models() {
    let dims = tiny_dims();
    let a = wrapped(&dims, AdapterKind::TemporalDora, AdapterKind::Dora);
    let b = wrapped(&dims, AdapterKind::TemporalDora, AdapterKind::Dora);
    for ((_, pa), (_, pb)) in a.store.iter().zip(b.store.iter()) {
        assert_eq!(pa.name, pb.name);
        assert_eq!(pa.value, pb.value);
    }
}

#[test]
fn identity_operator_model_matches_plain_residual_path() {
    let dims = tiny_dims();
    let mut m = frozen_backbone(&dims);
    let mut cfg = tiny_cfg(AdapterKind::TemporalDora);
    cfg.operator = OperatorKind::Identity;
    m.wrap(&ModelPolicy::with_vision(cfg), 4).unwrap();
    perturb_trainable(&mut m, 10, 0.3);
    let clip = random_clip(&dims, 4, 3);
    let a = m.logits(&clip, &question(3)).unwrap();
    let b = m.logits(&reverse_clip(&dims, &clip), &question(3)).unwrap();
    let worst = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-9, "{worst}");
}

#[test]
fn pretraining_is_deterministic_and_freezes_everything() {
    let corpus = generate_corpus(&CorpusConfig {
        train: 64,
        val: 16,
        test_instances: 8,
        ..CorpusConfig::default()
    })
    .unwrap();
    let dims = ModelDims::default();
    let cfg = PretrainConfig {
        steps: 40,
        ..PretrainConfig::default()
    };
    let run = || {
        let mut m = ToyVqaModel::backbone(&dims, 5).unwrap();
        let before = m.store.len();
        let report = pretrain_backbone(&mut m, &corpus, &cfg, 5).unwrap();
        assert_eq!(m.store.len(), before);
        assert_eq!(m.store.count().0, 0);
        assert!(m
            .store
            .iter()
            .all(|(_, p)| !p.name.starts_with("pretrain.")));
        report
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert_eq!(a.loss_curve.len(), 1);
    assert!(a.loss_curve[0].is_finite());
}

#[test]
fn argmax_prefers_the_first_maximum() {
    assert_eq!(argmax(&[0.1, 0.3, 0.3, -1.0]), 1);
    assert_eq!(argmax(&[2.0]), 0);
}
