use std::collections::HashSet;

use ndarray::{Array1, Array2};
use proptest::prelude::*;

use jmrm::data::{parse_corpus_file, parse_episode_file, serialize_corpora, serialize_episodes};
use jmrm::encoder::{Encoder, EncoderConfig, EncoderKind, EncoderParams};
use jmrm::episodes::{build_episode, build_episodes, generate_synthetic, SynthSpec};
use jmrm::experiment::{build_benchmark, Benchmark, EpisodePlan, ExperimentConfig};
use jmrm::rng::stream;
use jmrm::trainer::{evaluate, train, RunConfig};

fn small_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        n_source_domains: 3,
        n_dev_domains: 1,
        n_target_domains: 2,
        samples_per_domain: 30,
        seed,
        ..SynthSpec::default()
    }
}

fn small_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        synth: SynthSpec {
            n_source_domains: 4,
            ..small_spec(seed)
        },
        episodes: EpisodePlan {
            per_source_domain: 6,
            per_dev_domain: 4,
            per_target_domain: 6,
            seed,
            ..EpisodePlan::default()
        },
        encoder: EncoderConfig {
            dim: 64,
            context_window: 0,
            seed,
            ..EncoderConfig::default()
        },
        run: RunConfig {
            learning_rate: 0.01,
            lambda: 10.0,
            max_steps: 150,
            eval_every: 50,
            seed,
            ..RunConfig::default()
        },
        n_seeds: 1,
    }
}

fn untrained(cfg: &ExperimentConfig, bench: &Benchmark) -> Encoder {
    Encoder::new(cfg.encoder.clone(), &bench.vocab).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn corpora_and_episodes_round_trip(seed in 0u64..10_000, k in 1usize..3) {
        let corpora = generate_synthetic(&small_spec(seed)).unwrap();
        let text = serialize_corpora(&corpora.source);
        let parsed = parse_corpus_file(&text).unwrap();
        prop_assert_eq!(&parsed, &corpora.source);

        let episodes = build_episodes(&corpora.target[0], k, 6, 3, seed).unwrap();
        let again = parse_episode_file(&serialize_episodes(&episodes)).unwrap();
        prop_assert_eq!(again, episodes);
    }
}

#[test]
fn support_and_query_never_share_a_sample() {
    let corpora = generate_synthetic(&small_spec(5)).unwrap();
    let mut corpus = corpora.source[0].clone();
    // Tag every utterance so that equal token lists mean the same sample.
    let outside = corpus.label_space.outside();
    for (i, s) in corpus.samples.iter_mut().enumerate() {
        s.tokens.push(format!("id{i}"));
        s.slots.push(outside);
    }
    for seed in 0..100 {
        let mut rng = stream(seed, "disjoint");
        let ep = build_episode(&corpus, 1 + (seed as usize % 2), 8, &mut rng).unwrap();
        let support: HashSet<&Vec<String>> = ep.support.iter().map(|s| &s.tokens).collect();
        assert_eq!(support.len(), ep.support.len());
        for q in ep.raw_queries() {
            assert!(
                !support.contains(&q.tokens),
                "seed {seed}: query repeats a support sample"
            );
        }
        assert_eq!(ep.n_queries(), 8);
    }
}

#[test]
fn training_is_deterministic() {
    let cfg = small_config(2);
    let bench = build_benchmark(&cfg).unwrap();
    let run = || train(untrained(&cfg, &bench), &bench.train, &bench.dev, &cfg.run).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.encoder.to_checkpoint(), b.encoder.to_checkpoint());
    assert_eq!(a.log_jsonl(), b.log_jsonl());
    assert_eq!(a.best_step, b.best_step);
}

#[test]
fn zero_steps_returns_the_initial_encoder() {
    let cfg = small_config(3);
    let bench = build_benchmark(&cfg).unwrap();
    let run = RunConfig {
        max_steps: 0,
        ..cfg.run.clone()
    };
    let init = untrained(&cfg, &bench);
    let out = train(init.clone(), &bench.train, &bench.dev, &run).unwrap();
    assert_eq!(out.encoder.params(), init.params());
    assert_eq!(out.best_step, 0);
    assert_eq!(out.steps, 0);
}

#[test]
fn evaluation_leaves_the_encoder_untouched() {
    let cfg = small_config(4);
    let bench = build_benchmark(&cfg).unwrap();
    let enc = untrained(&cfg, &bench);
    let before = enc.to_checkpoint();
    let first = evaluate(&bench.test, &enc, &cfg.run).unwrap();
    let second = evaluate(&bench.test, &enc, &cfg.run).unwrap();
    assert_eq!(enc.to_checkpoint(), before);
    assert_eq!(first.metrics, second.metrics);
    assert_eq!(first.predictions, second.predictions);
}

#[test]
fn training_beats_the_untrained_encoder_on_target_domains() {
    let mut gains = Vec::new();
    for seed in 0..5 {
        let cfg = small_config(seed);
        let bench = build_benchmark(&cfg).unwrap();
        let init = untrained(&cfg, &bench);
        let before = evaluate(&bench.test, &init, &cfg.run).unwrap().metrics;
        let out = train(init, &bench.train, &bench.dev, &cfg.run).unwrap();
        let after = evaluate(&bench.test, &out.encoder, &cfg.run).unwrap().metrics;
        gains.push(after.slot_f1.unwrap() - before.slot_f1.unwrap());
    }
    let mean = gains.iter().sum::<f64>() / gains.len() as f64;
    assert!(mean > 0.0, "slot F1 gains {gains:?}");
}

/// One coordinate per filler family and head/tail part, per carrier word, and
/// one each for cue words and the remaining outside words.
fn oracle_coordinate(token: &str) -> usize {
    let base = token.rsplit('_').next().unwrap();
    let bytes = base.as_bytes();
    if bytes[0] == b'f' && bytes.len() > 3 && (bytes[3] == b'h' || bytes[3] == b't') {
        let family: usize = base[1..3].parse().unwrap();
        return 40 + 2 * family + usize::from(bytes[3] == b't');
    }
    if let Some(n) = token.strip_prefix('v').and_then(|n| n.parse::<usize>().ok()) {
        return n;
    }
    if token.starts_with('c') && token[1..].parse::<usize>().is_ok() {
        return 40 + 2 * 9;
    }
    40 + 2 * 9 + 1
}

#[test]
fn structure_aware_encoder_decodes_the_benchmark_exactly() {
    let cfg = small_config(6);
    let bench = build_benchmark(&cfg).unwrap();
    let dim = 64;
    let mut table = Array2::zeros((bench.vocab.len() + 1, dim));
    for (i, tok) in bench.vocab.iter().enumerate() {
        table[[i + 1, oracle_coordinate(tok)]] = 1.0;
    }
    let params = EncoderParams {
        vocab: bench.vocab.clone(),
        table,
        projection: Array2::eye(dim),
        bias: Array1::zeros(dim),
    };
    let config = EncoderConfig {
        kind: EncoderKind::Trainable,
        dim,
        context_window: 0,
        ..EncoderConfig::default()
    };
    let enc = Encoder::from_parts(config, params);
    let report = evaluate(&bench.test, &enc, &cfg.run).unwrap();
    assert_eq!(report.metrics.joint_acc, Some(1.0), "{:?}", report.metrics);
    assert_eq!(report.metrics.slot_f1, Some(1.0));
}

#[test]
fn relation_mask_at_eval_rules_out_relation_violations() {
    let cfg = small_config(7);
    let bench = build_benchmark(&cfg).unwrap();
    let enc = untrained(&cfg, &bench);
    let masked = RunConfig {
        i2s_eval: true,
        msd_eval: true,
        ..cfg.run.clone()
    };
    let report = evaluate(&bench.test, &enc, &masked).unwrap();
    assert_eq!(report.relation_violations, 0);
    assert_eq!(report.bio_violations, 0);

    let open = RunConfig {
        i2s_eval: false,
        msd_eval: false,
        ..cfg.run.clone()
    };
    let report = evaluate(&bench.test, &enc, &open).unwrap();
    assert!(report.relation_violations > 0);
}
