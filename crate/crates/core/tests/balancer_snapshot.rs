//! Corpus-level balancer regressions.

use signum_core::balancer::{
    balance_exhaustive, balance_greedy, block_sign_converge, max_term_norm, unit_vector_corpus, Strategy,
    CORPUS_SEED, C_EMP_SNAPSHOT,
};
use signum_core::config::parse_spec;
use signum_core::linalg::distance;
use signum_core::Norm;

#[test]
fn corpus_constant_does_not_regress() {
    let corpus = unit_vector_corpus(CORPUS_SEED, 1000, 14);
    let mut worst: f64 = 0.0;
    for v in &corpus {
        let opt = balance_exhaustive(v, Norm::Euclidean).unwrap();
        let greedy = balance_greedy(v, Norm::Euclidean).unwrap();
        assert!(opt.max_prefix_norm <= greedy.max_prefix_norm + 1e-12);
        worst = worst.max(opt.max_prefix_norm / max_term_norm(v, Norm::Euclidean));
    }
    assert!(worst <= C_EMP_SNAPSHOT, "corpus constant {worst} > snapshot {C_EMP_SNAPSHOT}");
}

#[test]
fn log_decay_blocks_telescope() {
    let spec = parse_spec("family = random-directions\nseed = 7\n").unwrap();
    let (_, plan, trace) = block_sign_converge(&spec, 100_000, Strategy::Lookahead, Norm::Euclidean).unwrap();
    for b in &plan.blocks {
        assert!(
            b.max_prefix_norm <= C_EMP_SNAPSHOT * b.level_bound,
            "level {}: {} > {}",
            b.level,
            b.max_prefix_norm,
            C_EMP_SNAPSHOT * b.level_bound
        );
    }
    // Cauchy tails: past the start of level m the sums move by at most
    // 4 C M 2^-m.
    let c = C_EMP_SNAPSHOT;
    for b in plan.blocks.iter().filter(|b| b.start > spec.start_index()) {
        let from = (b.start - spec.start_index()) as usize;
        if from > trace.len() {
            break;
        }
        let anchor = trace.sum(from.max(1)).to_vec();
        let drift = (from.max(1)..=trace.len()).map(|n| distance(trace.sum(n), &anchor)).fold(0.0, f64::max);
        assert!(drift <= 4.0 * c * b.level_bound, "level {}: drift {drift}", b.level);
    }
}

#[test]
fn alternating_harmonic_stays_within_two() {
    let spec = parse_spec("family = alternating\ninner.family = power-decay\ninner.coeffs = 1\ninner.exponents = 1\n")
        .unwrap();
    let (_, _, trace) = block_sign_converge(&spec, 10_000, Strategy::Greedy, Norm::Euclidean).unwrap();
    assert!(trace.sup_norm() <= 2.0);
}
