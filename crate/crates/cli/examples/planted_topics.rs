//! End-to-end demo on a synthetic corpus with planted topics: 8 disjoint
//! word pools, each document drawn from one main pool plus a side pool.
//! Training drives NPMI far above the random-init topics and the learned
//! topics concentrate on the planted pools.
//!
//!     cargo run --release -p tanntm --example planted_topics
use std::ops::ControlFlow;
use tanntm_core::npmi::{npmi_coherence, CoherenceConfig};
use tanntm_core::topwords::top_words;
use tanntm_core::*;

fn npmi_now(params: &ModelParams, docs: &[EncodedDoc]) -> f64 {
    let t_w = tanntm_core::model::ops::topic_word_distribution(&params.decoder.w);
    let tops = top_words(&t_w, 10).unwrap();
    let refs: Vec<&[u32]> = docs.iter().map(|d| d.ids.as_slice()).collect();
    npmi_coherence(&tops, refs.iter().copied(), &CoherenceConfig::default())
        .unwrap()
        .mean_npmi
}

fn main() {
    let k_true = 8usize;
    let pool = 40usize; // words per pool -> vocab 320
    let vocab = k_true * pool;
    let mut rng = Rng::seed_from_u64(123);
    let docs: Vec<EncodedDoc> = (0..600)
        .map(|i| {
            let main = i % k_true;
            let side = (i * 7 + 3) % k_true;
            let len = 30 + rng.next_below(30);
            let ids: Vec<u32> = (0..len)
                .map(|_| {
                    let p = if rng.next_f64() < 0.8 { main } else { side };
                    (p * pool + rng.next_below(pool) + 1) as u32
                })
                .collect();
            EncodedDoc::from_ids(ids, Some(main as u32))
        })
        .collect();

    let mut cfg = ModelConfig::new(vocab, Variant::TTan).with_topics(k_true);
    cfg.embed_dim = 32;
    cfg.hidden_dim = 48;
    cfg.attn_dim = 24;
    let train_cfg = TrainConfig {
        batch_size: 100,
        epochs: 40,
        seed: 1,
        threads: 2,
        ..TrainConfig::default()
    };
    let mut params = ModelParams::init(&cfg, &mut Rng::seed_from_u64(1));
    let initial = npmi_now(&params, &docs);
    let t0 = std::time::Instant::now();
    let records = train(&docs, 60, &cfg, &train_cfg, &mut params, |snap| {
        if snap.state.epoch % 10 == 0 {
            eprintln!(
                "epoch {:>3}  total {:.2}  npmi {:.4}  ({:?})",
                snap.state.epoch,
                snap.record.total,
                npmi_now(snap.params, &docs),
                t0.elapsed()
            );
        }
        ControlFlow::Continue(())
    })
    .unwrap();
    let final_npmi = npmi_now(&params, &docs);
    println!(
        "initial NPMI {initial:.4} -> final NPMI {final_npmi:.4} after {} epochs (loss {:.2} -> {:.2})",
        records.len(),
        records[0].total,
        records.last().unwrap().total
    );

    // How well do learned topics align with planted pools?
    let t_w = tanntm_core::model::ops::topic_word_distribution(&params.decoder.w);
    let tops = top_words(&t_w, 10).unwrap();
    for (k, words) in tops.iter().enumerate() {
        let mut pool_hits = vec![0usize; k_true];
        for &w in words {
            pool_hits[((w - 1) as usize) / pool] += 1;
        }
        let (best_pool, hits) = pool_hits
            .iter()
            .enumerate()
            .max_by_key(|(_, &h)| h)
            .unwrap();
        println!("topic {k}: {hits}/10 top words from pool {best_pool}");
    }
}
