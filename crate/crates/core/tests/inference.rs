use ldtm::ldtm::{run_inference, DynamicsMode, ModelConfig};
use ldtm::synth::{generate_corpus, planted_truth};

fn fit(topics: usize, items: usize, mode: DynamicsMode, seed: u64) -> ldtm::ldtm::Model {
    let truth = planted_truth(20, 8, topics, items, 30, seed, |n| if n % 2 == 0 { 0.3 } else { 0.9 });
    let corpus = generate_corpus(&truth, 20, 8, seed).unwrap().corpus;
    let config = ModelConfig {
        topics,
        iterations: 50,
        dynamics_mode: mode,
        seed,
        ..ModelConfig::default()
    };
    run_inference(&corpus, &config).unwrap()
}

#[test]
fn likelihood_trace_plateaus() {
    for mode in DynamicsMode::ALL {
        let model = fit(3, 60, mode, 11);
        let trace = &model.trace;
        assert_eq!(trace.len(), 50);
        let lo = trace.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = trace.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tail = &trace[trace.len() - 10..];
        let slope = (tail[9] - tail[0]) / 9.0;
        assert!(
            slope.abs() <= 0.01 * (hi - lo),
            "{}: tail slope {slope} against range {}",
            mode.as_str(),
            hi - lo
        );
        assert!(
            tail[0] > trace[0],
            "{}: no improvement over the first sweep",
            mode.as_str()
        );
    }
}

#[test]
fn two_block_topics_are_recovered() {
    let items = 40;
    for mode in DynamicsMode::ALL {
        let phi = fit(2, items, mode, 7).phi();
        let low: Vec<f64> = (0..2).map(|k| phi.row(k)[..items / 2].iter().sum()).collect();
        let (hi, lo) = (low[0].max(low[1]), low[0].min(low[1]));
        assert!(hi > 0.9 && lo < 0.1, "{}: block mass {low:?}", mode.as_str());
    }
}
