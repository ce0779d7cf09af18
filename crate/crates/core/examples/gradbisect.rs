// Temporary diagnostic: desk-preset calibration sweep on the planted corpus.

use mitopic::corpus::{Corpus, PreprocessConfig};
use mitopic::metrics::{evaluate, MetricsConfig};
use mitopic::trainer::{train, TrainConfig};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn planted_texts(n_docs: usize, seed: u64) -> (Vec<String>, Vec<u32>) {
    let make = |prefix: &str, n: usize| -> Vec<String> {
        (0..n)
            .map(|i| {
                format!(
                    "{prefix}{}{}",
                    (b'a' + (i / 26) as u8) as char,
                    (b'a' + (i % 26) as u8) as char
                )
            })
            .collect()
    };
    let topic_a = make("zqa", 20);
    let topic_b = make("zqb", 20);
    let noise = make("zqn", 4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut texts = Vec::new();
    let mut labels = Vec::new();
    for d in 0..n_docs {
        let label = (d % 2) as u32;
        let pool = if label == 0 { &topic_a } else { &topic_b };
        let len = rng.gen_range(15..26);
        let tokens: Vec<&str> = (0..len)
            .map(|_| {
                if rng.gen_bool(0.10) {
                    noise[rng.gen_range(0..noise.len())].as_str()
                } else {
                    pool[rng.gen_range(0..pool.len())].as_str()
                }
            })
            .collect();
        texts.push(tokens.join(" "));
        labels.push(label);
    }
    (texts, labels)
}

fn main() {
    let (texts, labels) = planted_texts(400, 99);
    let corpus = Corpus::from_texts(&texts, Some(&labels), &PreprocessConfig::default()).unwrap();
    println!("vocab {} docs {}", corpus.vocab.len(), corpus.n_docs());
    let mcfg = MetricsConfig {
        top_m: 5,
        ..MetricsConfig::default()
    };
    for (lr, temp, nneg, hard) in [
        (1e-3, 1.0, 1usize, false),
        (1e-3, 0.3, 1, false),
        (1e-3, 0.1, 1, false),
        (1e-3, 0.3, 4, false),
        (1e-3, 0.1, 4, false),
        (3e-3, 0.3, 4, false),
        (1e-3, 1.0, 4, true),
        (1e-3, 0.5, 4, true),
        (3e-3, 0.5, 4, true),
    ] {
        for seed in [4u64, 11] {
            let mut config = TrainConfig::desk(2);
            config.lr = lr;
            config.gumbel.temperature = temp;
            config.gumbel.hard = hard;
            config.strategy.n_neg_docs = nneg;
            config.strategy.n_neg_words = nneg;
            config.seed = seed;
            let t0 = std::time::Instant::now();
            let (params, report) = train(&corpus, &config).unwrap();
            let secs = t0.elapsed().as_secs_f64();
            let m = evaluate(&params, &corpus, &mcfg).unwrap();
            let kl_traj: Vec<f64> = [0usize, 5, 10, 25, 49]
                .iter()
                .map(|&e| report.epochs[e].l_kl)
                .collect();
            let last = report.epochs.last().unwrap();
            println!(
                "lr {lr:<6} temp {temp:<4} nneg {nneg} hard {hard:<5} seed {seed:<3} acc {:.3} tu {:.3} npmi {:+.3} | kl {:?} js_g {:+.3} js_l {:+.3} | {secs:.1}s",
                m.acc.unwrap(),
                m.tu.mean,
                m.npmi.mean,
                kl_traj.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
                last.l_global,
                last.l_local,
            );
        }
    }
}
