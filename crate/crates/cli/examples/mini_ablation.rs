//! Variant comparison on a richer synthetic corpus: 20 planted topics with
//! zipf-ish word draws, per-document topic mixtures, and a shared background
//! vocabulary. Prints the NPMI trajectory of each encoder variant.
//!
//!     cargo run --release -p tanntm --example mini_ablation
use std::ops::ControlFlow;
use tanntm_core::npmi::{npmi_coherence, CoherenceConfig};
use tanntm_core::topwords::top_words;
use tanntm_core::*;

fn zipf_pick(rng: &mut Rng, n: usize) -> usize {
    // crude zipf: invert a power of a uniform draw
    let u = rng.next_f64().max(1e-9);
    let r = (u.powf(1.5) * n as f64) as usize;
    r.min(n - 1)
}

fn corpus(rng: &mut Rng, k_true: usize, pool: usize, background: usize, docs: usize) -> Vec<EncodedDoc> {
    (0..docs)
        .map(|i| {
            let main = i % k_true;
            let side = (i * 13 + 5) % k_true;
            let len = 50 + rng.next_below(60);
            let ids: Vec<u32> = (0..len)
                .map(|_| {
                    let roll = rng.next_f64();
                    if roll < 0.70 {
                        (main * pool + zipf_pick(rng, pool) + 1) as u32
                    } else if roll < 0.90 {
                        (side * pool + zipf_pick(rng, pool) + 1) as u32
                    } else {
                        (k_true * pool + zipf_pick(rng, background) + 1) as u32
                    }
                })
                .collect();
            EncodedDoc::from_ids(ids, Some(main as u32))
        })
        .collect()
}

fn npmi_now(params: &ModelParams, docs: &[EncodedDoc]) -> f64 {
    let t_w = tanntm_core::model::ops::topic_word_distribution(&params.decoder.w);
    let tops = top_words(&t_w, 10).unwrap();
    let refs: Vec<&[u32]> = docs.iter().map(|d| d.ids.as_slice()).collect();
    npmi_coherence(&tops, refs.iter().copied(), &CoherenceConfig::default())
        .unwrap()
        .mean_npmi
}

fn main() {
    let k_true = 20usize;
    let pool = 35usize;
    let background = 100usize;
    let vocab = k_true * pool + background; // 800
    let mut rng = Rng::seed_from_u64(2027);
    let docs = corpus(&mut rng, k_true, pool, background, 2000);

    for variant in [Variant::TTan, Variant::VanillaAttn, Variant::OnlyLstm] {
        let mut cfg = ModelConfig::new(vocab, variant).with_topics(k_true);
        cfg.embed_dim = 64;
        cfg.hidden_dim = 96;
        cfg.attn_dim = 64;
        let train_cfg = TrainConfig {
            batch_size: 100,
            epochs: 60,
            seed: 9,
            threads: 2,
            ..TrainConfig::default()
        };
        let mut params = ModelParams::init(&cfg, &mut Rng::seed_from_u64(9));
        let t0 = std::time::Instant::now();
        let recs = train(&docs, 110, &cfg, &train_cfg, &mut params, |snap| {
            if snap.state.epoch % 20 == 0 {
                eprintln!(
                    "  {} epoch {:>3} loss {:.1} npmi {:.4} ({:?})",
                    variant.as_str(),
                    snap.state.epoch,
                    snap.record.total,
                    npmi_now(snap.params, &docs),
                    t0.elapsed()
                );
            }
            ControlFlow::Continue(())
        })
        .unwrap();
        println!(
            "{}: final npmi {:.4} (loss {:.1} -> {:.1}, {:?})",
            variant.as_str(),
            npmi_now(&params, &docs),
            recs[0].total,
            recs.last().unwrap().total,
            t0.elapsed()
        );
    }
}
