use proptest::prelude::*;

use tad_core::agents::{gamma, replay_states, Decision};
use tad_core::decoder::{
    greedy_select, guarded_decode, tad_decode, tad_decode_abstain, AbstainParams, DecodeOptions, DecodeStatus, NullRetriever,
};
use tad_core::kb::knowledge_consistent;
use tad_core::metrics::{
    entropy_bound_of, mass_of, restricted_entropy, risk, benchmark_stats, BenchmarkCounts, RiskPolicy,
};
use tad_core::model::ScoringModel;
use tad_core::oracle::safe_set;
use tad_core::perf::{amdahl, complexity_estimate, cpi, ComplexityParams, CpiParams};
use tad_core::sweep::{random_toy, trial_rng};
use tad_core::{json, Exec, TokenId, Trace, Vocabulary};

fn dist(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 2..=max_len).prop_filter_map("all zero", |w| {
        let total: f64 = w.iter().sum();
        (total > 1e-6).then(|| w.iter().map(|x| x / total).collect())
    })
}

fn subset(n: usize, mask: u64) -> Vec<TokenId> {
    (0..n).filter(|i| mask >> i & 1 == 1).map(TokenId::from).collect()
}

/// Reference argmax: highest score, lowest id among ties.
fn brute_argmax(probs: &[f64], safe: &[TokenId]) -> TokenId {
    let mut best = safe[0];
    for &w in safe {
        if probs[w.index()] > probs[best.index()] {
            best = w;
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn restricted_entropy_matches_definition(p in dist(8), mask in 1u64..256) {
        let safe = subset(p.len(), mask);
        prop_assume!(!safe.is_empty());
        let pi: f64 = safe.iter().map(|w| p[w.index()]).sum();
        prop_assume!(pi > 1e-9);
        let mut h = 0.0;
        for w in &safe {
            let q = p[w.index()] / pi;
            if q > 0.0 {
                h -= q * q.ln();
            }
        }
        let got = restricted_entropy(&p, &safe).unwrap();
        prop_assert!((got - h).abs() < 1e-12);
        prop_assert!(got <= (safe.len() as f64).ln() + 1e-9);
        let bound = entropy_bound_of(&p, &safe).unwrap();
        prop_assert!(got <= bound.bound + 1e-9);
    }

    #[test]
    fn uniform_restriction_attains_log_cardinality(n in 2usize..8, mask in 1u64..256) {
        let p = vec![1.0 / n as f64; n];
        let safe = subset(n, mask);
        prop_assume!(!safe.is_empty());
        let h = restricted_entropy(&p, &safe).unwrap();
        prop_assert!((h - (safe.len() as f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn safe_mass_monotone_under_inclusion(p in dist(8), a in 0u64..256, b in 0u64..256) {
        let small = subset(p.len(), a & b);
        let large = subset(p.len(), a | b);
        prop_assert!(mass_of(&p, &small) <= mass_of(&p, &large) + 1e-12);
    }

    #[test]
    fn risk_monotone_in_safe_mass(omega in 0.0f64..=1.0, x in 0.0f64..=1.0, y in 0.0f64..=1.0, consistent: bool) {
        let policy = RiskPolicy::new(omega).unwrap();
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        prop_assert!(risk(consistent, hi, policy) <= risk(consistent, lo, policy) + 1e-15);
        let r = risk(consistent, x, RiskPolicy::new(0.0).unwrap());
        prop_assert_eq!(r, if consistent { 0.0 } else { 1.0 });
    }

    #[test]
    fn benchmark_utility_and_coverage(total in 1u64..5000, answered_frac in 0.0f64..=1.0, correct_frac in 0.0f64..=1.0, omega in 0.0f64..=1.0) {
        let answered = (total as f64 * answered_frac) as u64;
        let correct = (answered as f64 * correct_frac) as u64;
        let c = BenchmarkCounts::new(total, answered, correct, total - answered).unwrap();
        let r = benchmark_stats(&c, RiskPolicy::new(omega).unwrap(), None).unwrap();
        prop_assert!((r.accuracy + r.error - 1.0).abs() < 1e-12);
        prop_assert!(r.utility >= r.accuracy - 1e-12);
        prop_assert!(r.utility <= r.accuracy + omega * (1.0 - r.coverage) + 1e-12);
    }

    #[test]
    fn cpi_is_linear_and_hit_rate_helps(cpi0 in 0.0f64..10.0, h in 0.0f64..=1.0, c_hit in 0.0f64..2.0, extra in 0.0f64..5.0, agents in 0.0f64..3.0, k in 0.0f64..4.0) {
        let c_miss = c_hit + extra;
        let base = CpiParams { cpi0, h_kb: h, c_hit, c_miss, c_agents: agents, clock_hz: 1e9 };
        let expected = cpi0 + h * c_hit + (1.0 - h) * c_miss + agents;
        prop_assert!((cpi(&base) - expected).abs() < 1e-12);
        let bumped = CpiParams { c_agents: agents + k, ..base };
        prop_assert!((cpi(&bumped) - cpi(&base) - k).abs() < 1e-9);
        let better = CpiParams { h_kb: (h + 0.1).min(1.0), ..base };
        prop_assert!(cpi(&better) <= cpi(&base) + 1e-12);
    }

    #[test]
    fn amdahl_between_one_and_limit(f in 0.0f64..0.99, s in 1.0001f64..1e6) {
        let x = amdahl(f, s);
        prop_assert!(x >= 1.0 - 1e-12);
        prop_assert!(x < 1.0 / (1.0 - f) + 1e-12);
        prop_assert!((amdahl(f, 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn complexity_speedup_is_batch_over_density(v in 1u64..100_000, t in 1u64..512, c in 1e-7f64..1e-3, d in 0.01f64..=1.0, b in 1.0f64..16.0) {
        let e = complexity_estimate(&ComplexityParams { vocab_size: v, horizon: t, oracle_cost: c, delta_avg: d, batch_factor: b });
        prop_assert!((e.speedup - b / d).abs() <= 1e-9 * (b / d));
        prop_assert!((e.naive_seconds - t as f64 * v as f64 * c).abs() <= 1e-9 * e.naive_seconds);
    }

    #[test]
    fn greedy_select_is_lowest_id_argmax(p in dist(8), mask in 1u64..256, coarse: bool) {
        let p: Vec<f64> = if coarse {
            let g: Vec<f64> = p.iter().map(|x| (x * 4.0).round()).collect();
            let t: f64 = g.iter().sum();
            prop_assume!(t > 0.0);
            g.iter().map(|x| x / t).collect()
        } else { p };
        let safe = subset(p.len(), mask);
        prop_assume!(!safe.is_empty());
        let vocab = Vocabulary::new((0..p.len()).map(|i| format!("w{i}"))).unwrap();
        let model = ScoringModel::constant(vocab, p.clone(), true).unwrap();
        prop_assert_eq!(greedy_select(&model, &safe, &[]).unwrap(), brute_argmax(&p, &safe));
    }

    #[test]
    fn decode_stays_in_safe_set_and_consistent(seed: u64) {
        let scn = random_toy(&mut trial_rng(seed, 0)).unwrap();
        let oracle = scn.oracle();
        let r = tad_decode(&scn.model, &oracle, scn.max_len, &Trace::new()).unwrap();
        let mut prefix: Vec<TokenId> = Vec::new();
        for st in &r.steps {
            let expected = safe_set(&oracle, &prefix, &scn.vocab);
            prop_assert_eq!(&st.safe_set, &expected);
            match st.chosen {
                Some(w) => {
                    let probs = scn.model.distribution(&prefix).unwrap();
                    prop_assert_eq!(w, brute_argmax(probs, &expected));
                    prefix.push(w);
                    prop_assert!(knowledge_consistent(&prefix, &scn.kb));
                }
                None => prop_assert!(expected.is_empty()),
            }
        }
        prop_assert_eq!(prefix.as_slice(), r.trace.as_slice());
        let done = r.status == DecodeStatus::Completed;
        prop_assert_eq!(done, r.trace.len() == scn.max_len);
    }

    #[test]
    fn zero_threshold_abstention_is_plain_decoding(seed: u64) {
        let scn = random_toy(&mut trial_rng(seed, 1)).unwrap();
        let oracle = scn.oracle();
        let plain = tad_decode(&scn.model, &oracle, scn.max_len, &Trace::new()).unwrap();
        let params = AbstainParams { tau: 0.0, retry_budget: 0 };
        let alg2 = tad_decode_abstain(&scn.model, &oracle, scn.max_len, &Trace::new(), params, &mut NullRetriever, DecodeOptions::default()).unwrap();
        prop_assert_eq!(json::to_string(&plain).unwrap(), json::to_string(&alg2).unwrap());
    }

    #[test]
    fn parallel_and_sequential_decodes_agree(seed: u64) {
        let scn = random_toy(&mut trial_rng(seed, 2)).unwrap();
        let oracle = scn.oracle();
        let run = |exec| tad_decode_abstain(
            &scn.model, &oracle, scn.max_len, &Trace::new(),
            AbstainParams::default(), &mut NullRetriever,
            DecodeOptions { caching: true, exec },
        ).unwrap();
        prop_assert_eq!(run(Exec::Sequential), run(Exec::Parallel));
    }

    #[test]
    fn raising_tau_never_lengthens_the_trace(seed: u64, t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0, budget in 0usize..3) {
        let scn = random_toy(&mut trial_rng(seed, 3)).unwrap();
        let oracle = scn.oracle();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let len = |tau| tad_decode_abstain(
            &scn.model, &oracle, scn.max_len, &Trace::new(),
            AbstainParams { tau, retry_budget: budget }, &mut NullRetriever, DecodeOptions::default(),
        ).unwrap().trace.len();
        prop_assert!(len(hi) <= len(lo));
    }

    #[test]
    fn gamma_ignores_agent_order(seed: u64) {
        let scn = random_toy(&mut trial_rng(seed, 4)).unwrap();
        let mut reversed = scn.agents.clone();
        reversed.reverse();
        let g = guarded_decode(&scn.model, &scn.agents, scn.max_len, &Trace::new(), Exec::Sequential).unwrap();
        let r = guarded_decode(&scn.model, &reversed, scn.max_len, &Trace::new(), Exec::Sequential).unwrap();
        prop_assert_eq!(&g.trace, &r.trace);
        for (a, b) in g.steps.iter().zip(&r.steps) {
            prop_assert_eq!(&a.safe_set, &b.safe_set);
        }
        let mut prefix: Vec<TokenId> = Vec::new();
        for w in g.trace.iter() {
            let states = replay_states(&scn.agents, &prefix);
            let out = gamma(&scn.agents, &states, &prefix, scn.vocab.len(), Exec::Sequential);
            // conflict resolution: one rejection removes the token
            for v in scn.vocab.ids() {
                let all = out.verdicts.iter().filter(|x| x.token == v).all(|x| x.decision == Decision::Accept);
                prop_assert_eq!(all, out.safe.contains(&v));
            }
            prop_assert!(out.verdicts.iter().all(|x| x.decision == Decision::Accept || !x.justification.is_empty()));
            prefix.push(*w);
        }
    }

    #[test]
    fn chain_rule_is_exact(seed: u64, picks in prop::collection::vec(0usize..6, 0..6)) {
        let scn = random_toy(&mut trial_rng(seed, 5)).unwrap();
        let n = scn.vocab.len();
        let trace: Vec<TokenId> = picks.iter().map(|&i| TokenId::from(i % n)).collect();
        for k in 0..trace.len() {
            let head = scn.model.sequence_prob(&trace[..k]).unwrap();
            let next = scn.model.prob(&trace[..k], trace[k]).unwrap();
            prop_assert_eq!(scn.model.sequence_prob(&trace[..=k]).unwrap(), head * next);
        }
        for k in 0..=trace.len() {
            let total: f64 = scn.model.distribution(&trace[..k]).unwrap().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn consistency_is_prefix_closed(seed: u64, picks in prop::collection::vec(0usize..6, 0..6)) {
        let scn = random_toy(&mut trial_rng(seed, 6)).unwrap();
        let n = scn.vocab.len();
        let trace: Vec<TokenId> = picks.iter().map(|&i| TokenId::from(i % n)).collect();
        if knowledge_consistent(&trace, &scn.kb) {
            for k in 0..=trace.len() {
                prop_assert!(knowledge_consistent(&trace[..k], &scn.kb));
            }
        }
    }

    #[test]
    fn round_sig_is_idempotent(x in -1e12f64..1e12) {
        let once = json::round_sig(x);
        prop_assert_eq!(json::round_sig(once), once);
        prop_assert!((once - x).abs() <= 1e-11 * x.abs().max(f64::MIN_POSITIVE));
    }
}
