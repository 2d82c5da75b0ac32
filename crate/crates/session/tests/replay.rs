use ide_core::ea::Algorithm;
use ide_session::protocol::{
    Answer, AnswerRecord, Choice, EvalQuery, QueryKind, SessionHeader, SessionParams, SessionStatus,
};
use ide_session::render::PhenotypeSpec;
use ide_session::session::validate_params;
use ide_session::Session;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn random_answer<R: Rng>(q: &EvalQuery, rng: &mut R) -> Answer {
    let levels = q.levels.unwrap_or(5);
    let choice = [Choice::A, Choice::B, Choice::Tie][rng.gen_range(0..3)];
    match q.kind {
        QueryKind::Pair => Answer::Pair { choice },
        QueryKind::PairWithMagnitude => Answer::PairWithMagnitude {
            choice,
            magnitude: if choice == Choice::Tie { 0 } else { rng.gen_range(0..levels) },
        },
        QueryKind::RateAll => {
            Answer::RateAll { levels: (0..q.items.len()).map(|_| rng.gen_range(1..=levels)).collect() }
        }
    }
}

fn header(algorithm: Algorithm, population: usize, seed: u64) -> SessionHeader {
    let params = SessionParams { dim: 3, population, generations: 3, ..SessionParams::default() };
    SessionHeader {
        id: "audit".into(),
        algorithm,
        config: validate_params(algorithm, &params).unwrap(),
        phenotype_spec: PhenotypeSpec::default(),
        seed,
        created_at_ms: 0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// The state after k answers equals the state rebuilt from the first k
    /// answers of the log.
    #[test]
    fn every_prefix_replays_to_the_live_state(
        algorithm in prop::sample::select(Algorithm::ALL.to_vec()),
        population in prop::sample::select(vec![4usize, 8]),
        seed in any::<u64>(),
        answer_seed in any::<u64>(),
    ) {
        let h = header(algorithm, population, seed);
        let mut live = Session::new(h.clone()).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(answer_seed);
        let mut k = 0;
        while let Some(q) = live.pending_query() {
            let record = AnswerRecord { query_id: q.query_id.clone(), answer: random_answer(&q, &mut rng), timestamp_ms: k as u64 };
            live.apply(record).unwrap();
            k += 1;
            let rebuilt = Session::replay(h.clone(), &live.answers()[..k]).unwrap();
            prop_assert_eq!(rebuilt.snapshot(), live.snapshot());
        }
        prop_assert_eq!(live.status(), SessionStatus::Finished);
        prop_assert_eq!(live.engine().generation(), 3);
        let charged = live.tallies().comparisons;
        let expected = match algorithm {
            Algorithm::De => (population - 1 + 3 * 2 * population) as u64,
            Algorithm::Tga1 | Algorithm::Tga2 => 3 * (population - 1) as u64,
            Algorithm::Ga => 0,
        };
        prop_assert_eq!(charged, expected);
        if algorithm == Algorithm::Ga {
            prop_assert_eq!(live.tallies().evaluations, 3 * population as u64);
            prop_assert_eq!(k, 3);
        } else {
            prop_assert_eq!(k as u64, expected);
        }
    }
}
