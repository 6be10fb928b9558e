//! Cross-entropy search over controller weights.
//!
//! ```text
//! cargo run --release --example tune_weights -- [variant] [iters] [pop] [seed] [shared|full] [mean]
//! ```
//!
//! Scores each candidate by running Phase II for every case of the variant
//! from one shared Phase-I model and prints the best weight vector found.

use koopman_robots::config::RunConfig;
use koopman_robots::harness::{run_control, run_identification, CaseSpec, Surrogate, Variant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

struct Outcome {
    score: f64,
    passed: usize,
    detail: Vec<(Option<usize>, f64, f64)>,
}

fn evaluate(cfg: &RunConfig, base: &Surrogate, cases: &[CaseSpec], w: &[f64; 18]) -> Outcome {
    let mut cfg = cfg.clone();
    cfg.weights.control = *w;
    cfg.decentralized_weights.control = *w;
    let mut score = 0.0;
    let mut passed = 0;
    let mut detail = Vec::new();
    for case in cases {
        let mut s = base.clone();
        let log = run_control(&cfg, &mut s, case, cfg.identification_steps).unwrap();
        let mut best = f64::INFINITY;
        let mut min_surface = f64::INFINITY;
        for r in &log.records {
            let d = (0..3)
                .map(|i| {
                    (r.state[2 * i] - case.targets.0[i][0])
                        .hypot(r.state[2 * i + 1] - case.targets.0[i][1])
                })
                .fold(0.0, f64::max);
            best = best.min(d);
            min_surface = r.distances.iter().copied().fold(min_surface, f64::min);
        }
        let arrived = log.phases[0].arrived_at;
        if arrived.is_some() && min_surface > 0.0 {
            passed += 1;
        }
        score += best.max(0.45) + if min_surface <= 0.0 { 5.0 } else { 0.0 };
        detail.push((arrived, best, min_surface));
    }
    Outcome {
        score,
        passed,
        detail,
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let variant = match args.get(1).map(String::as_str) {
        Some("decentralized") => Variant::DecentralizedBilinear,
        Some("linear") => Variant::Linear,
        _ => Variant::Bilinear,
    };
    let iters: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(40);
    let pop: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(48);
    let seed: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0);
    let shared = args.get(5).map(|s| s == "shared").unwrap_or(false);

    let cfg = RunConfig::for_variant(variant);
    let (base, _) = run_identification(&cfg).unwrap();

    let cases = CaseSpec::all(variant);
    let dim = if shared { 6 } else { 18 };
    let expand =
        |x: &[f64]| -> [f64; 18] { std::array::from_fn(|k| if shared { x[k % 6] } else { x[k] }) };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    // optional warm start: comma-separated initial mean
    let mut mu: Vec<f64> = match args.get(6) {
        Some(s) => s.split(',').map(|v| v.trim().parse().unwrap()).collect(),
        None => vec![0.0; dim],
    };
    let mut sigma = vec![if args.len() > 6 { 0.5 } else { 1.0 }; dim];
    let mut best: (f64, Vec<f64>) = (f64::INFINITY, mu.clone());
    for it in 0..iters {
        let mut scored: Vec<(f64, Vec<f64>)> = (0..pop)
            .map(|_| {
                let x: Vec<f64> = (0..dim)
                    .map(|k| mu[k] + sigma[k] * normal.sample(&mut rng))
                    .collect();
                (evaluate(&cfg, &base, &cases, &expand(&x)).score, x)
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        let elite = &scored[..pop / 5];
        for k in 0..dim {
            let m = elite.iter().map(|e| e.1[k]).sum::<f64>() / elite.len() as f64;
            let v = elite.iter().map(|e| (e.1[k] - m).powi(2)).sum::<f64>() / elite.len() as f64;
            mu[k] = m;
            sigma[k] = v.sqrt().max(0.02);
        }
        if scored[0].0 < best.0 {
            best = scored[0].clone();
        }
        println!("{it} best {:.3} iter-best {:.3}", best.0, scored[0].0);
    }
    let w = expand(&best.1);
    let o = evaluate(&cfg, &base, &cases, &w);
    println!(
        "weights {:?}",
        w.iter()
            .map(|v| (v * 1e4).round() / 1e4)
            .collect::<Vec<_>>()
    );
    println!("passed {}/{}", o.passed, cases.len());
    for (c, d) in cases.iter().zip(&o.detail) {
        println!(
            "case {} arrived {:?} best-max-dist {:.3} min-surface {:.3}",
            c.id, d.0, d.1, d.2
        );
    }
}
