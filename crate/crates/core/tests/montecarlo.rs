//! Statistical checks of the simulation against known distributions. Every
//! test uses a fixed seed; bands are three standard errors unless noted.

mod support;

use detinfo::channel::ChannelMode;
use detinfo::detectors::{
    sap_decide, typical_set_decide, MapDetector, NpConfig, NpDetector, SapDetector,
};
use detinfo::metrics::{
    default_pfa_grid, detector_confusion, di_monte_carlo, di_monte_carlo_with,
    invert_prior_from_pfa, kondo_di, np_theoretical_di, McSettings, StatisticSamples,
};
use detinfo::rng::{Lane, StreamKey, Substream};
use detinfo::sigmodel::{
    noise_field, synthesize, synthesize_with_state, ScenarioConfig, TargetState,
};
use detinfo::typicality::{
    count_conditional_typical, count_typical_state_seqs, draw_extended_trial,
    estimate_reference_entropies, extended_fano_check, is_jointly_typical, is_jointly_typical_with,
    is_typical_state_seq, TypicalityConfig,
};
use detinfo::{binary_entropy, marcum_q1, np_decide, special_case_statistic, PosteriorPair};
use support::oracles;

fn cfg(tb: usize, snr_db: f64, prior: f64, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        tb,
        snr_db,
        prior_present: prior,
        seed,
        ..Default::default()
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (
        m,
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0),
    )
}

#[test]
fn noise_field_has_sinc_correlation() {
    let c = cfg(64, 5.0, 0.5, 1);
    let n = 100_000;
    let lags = [0.0, 0.25, 0.5, 1.0];
    let x0 = 0.3;
    let mut re = Vec::with_capacity(n);
    let mut cross = vec![Vec::with_capacity(n); lags.len()];
    for t in 0..n {
        let s = synthesize_with_state(
            &c,
            TargetState::Absent,
            &mut Substream::new(1, 0, t as u64, Lane::Scenario),
        );
        let w0 = noise_field(&s, x0).unwrap();
        re.push(w0.re);
        for (k, lag) in lags.iter().enumerate() {
            let w1 = noise_field(&s, x0 + lag).unwrap();
            cross[k].push((w0 * w1.conj()).re);
        }
    }
    let (_, v) = mean_var(&re);
    assert!(
        (v - 0.5).abs() < 3.0 * 0.5 * (2.0 / n as f64).sqrt() + 0.005,
        "Re variance {v}"
    );
    for (k, lag) in lags.iter().enumerate() {
        let (m, v) = mean_var(&cross[k]);
        // Finite-interval covariance Σ sinc(n − x)·sinc(n − x′).
        let exact: f64 = (-32..32)
            .map(|i| oracles::sinc(i as f64 - x0) * oracles::sinc(i as f64 - x0 - lag))
            .sum();
        let se = (v / n as f64).sqrt();
        assert!((m - exact).abs() < 3.0 * se, "lag {lag}: {m} vs {exact}");
        assert!((exact - oracles::sinc(*lag)).abs() < 0.02);
    }
}

#[test]
fn received_energy_matches_signal_plus_noise() {
    for state in [TargetState::Absent, TargetState::Present] {
        let c = cfg(32, 3.0, 0.5, 2);
        let e: Vec<f64> = (0..100_000u64)
            .map(|t| {
                let s =
                    synthesize_with_state(&c, state, &mut Substream::new(2, 0, t, Lane::Scenario));
                s.samples.iter().map(|y| y.norm_sqr()).sum()
            })
            .collect();
        let (m, v) = mean_var(&e);
        let want = if state.is_present() {
            c.alpha().powi(2)
        } else {
            0.0
        } + 32.0;
        assert!(
            (m - want).abs() < 3.0 * (v / e.len() as f64).sqrt(),
            "{state:?}: {m} vs {want}"
        );
    }
}

#[test]
fn sap_frequency_matches_posterior() {
    let p = PosteriorPair::from_present(0.7).unwrap();
    let n = 100_000u64;
    let ones = (0..n)
        .filter(|t| {
            sap_decide(&p, &mut Substream::new(3, 0, *t, Lane::Decision))
                .declared_state
                .is_present()
        })
        .count() as f64;
    let se = (0.7 * 0.3 / n as f64).sqrt();
    assert!((ones / n as f64 - 0.7).abs() < 3.0 * se);
}

#[test]
fn np_is_calibrated_and_follows_marcum() {
    let n = 100_000u64;
    for (snr, pfa) in [(f64::NEG_INFINITY, 0.1), (0.0, 0.1), (5.0, 0.01)] {
        let c = ScenarioConfig {
            true_position: 0.0,
            ..cfg(32, snr, 0.5, 4)
        };
        let np = NpConfig::new(pfa).unwrap();
        let rate = |state: TargetState| {
            (0..n)
                .filter(|t| {
                    let s = synthesize_with_state(
                        &c,
                        state,
                        &mut Substream::new(4, 1, *t, Lane::Scenario),
                    );
                    np_decide(&s, &c, &np).unwrap().declared_state.is_present()
                })
                .count() as f64
                / n as f64
        };
        let fa = rate(TargetState::Absent);
        assert!(
            (fa - pfa).abs() < 3.0 * (pfa * (1.0 - pfa) / n as f64).sqrt(),
            "P_FA {fa}"
        );
        let pd = rate(TargetState::Present);
        let want = marcum_q1((2.0 * c.rho2()).sqrt(), (-2.0 * pfa.ln()).sqrt()).unwrap();
        assert!(
            (pd - want).abs() < 3.0 * (want * (1.0 - want) / n as f64).sqrt() + 1e-12,
            "P_D {pd} vs {want}"
        );
    }
}

#[test]
fn typical_decoder_joint_law() {
    let probs = [0.2, 0.7, 0.55];
    let posts: Vec<_> = probs
        .iter()
        .map(|p| PosteriorPair::from_present(*p).unwrap())
        .collect();
    let n = 100_000u64;
    let mut cells = [0u64; 8];
    for t in 0..n {
        let d = typical_set_decide(&posts, &mut Substream::new(5, 0, t, Lane::Decision));
        let idx = d
            .iter()
            .enumerate()
            .fold(0, |acc, (i, x)| acc | (x.declared_state.index() << i));
        cells[idx] += 1;
    }
    let chi2: f64 = (0..8)
        .map(|idx| {
            let p: f64 = (0..3)
                .map(|i| {
                    if idx >> i & 1 == 1 {
                        probs[i]
                    } else {
                        1.0 - probs[i]
                    }
                })
                .product();
            let e = p * n as f64;
            (cells[idx] as f64 - e).powi(2) / e
        })
        .sum();
    // χ²₇ upper 1% point.
    assert!(chi2 < 18.475, "χ² = {chi2}");
}

#[test]
fn posterior_is_a_martingale() {
    // E[P(1|y)] = π(1) when the channel model is the generating law, which
    // holds exactly at the matched position with x₀ on the sample grid.
    let mode = ChannelMode::MatchedPosition;
    let c = cfg(32, 3.0, 0.3, 6);
    let ev = detinfo::ChannelEvaluator::new(&c, mode, 8).unwrap();
    let p: Vec<f64> = (0..20_000u64)
        .map(|t| {
            let mut rng = Substream::new(6, 0, t, Lane::Scenario);
            let state = TargetState::from_present(rng.uniform() < 0.3);
            let s = synthesize_with_state(&c, state, &mut rng);
            detinfo::posterior(&ev.statistic(&s), 0.3)
                .unwrap()
                .p_present
        })
        .collect();
    let (m, v) = mean_var(&p);
    assert!(
        (m - 0.3).abs() < 3.0 * (v / p.len() as f64).sqrt(),
        "{mode}: {m}"
    );
}

#[test]
fn likelihood_ratio_has_unit_mean_under_noise() {
    let c = cfg(32, 0.0, 0.5, 7);
    let u: Vec<f64> = (0..100_000u64)
        .map(|t| {
            let s = synthesize_with_state(
                &c,
                TargetState::Absent,
                &mut Substream::new(7, 0, t, Lane::Scenario),
            );
            special_case_statistic(&s, &c).unwrap().log_upsilon.exp()
        })
        .collect();
    let (m, v) = mean_var(&u);
    assert!(
        (m - 1.0).abs() < 3.0 * (v / u.len() as f64).sqrt(),
        "E[Υ] = {m}"
    );
}

#[test]
fn reference_entropies_obey_chain_rule() {
    let s = McSettings::new(10_000, ChannelMode::FullInterval);
    let r = estimate_reference_entropies(&cfg(32, 5.0, 0.5, 8), &s).unwrap();
    let residual = r.h_vy_nats - r.h_y_nats - r.h_v_given_y_bits * std::f64::consts::LN_2;
    assert!((residual - r.chain_rule_residual_nats).abs() < 1e-9);
    assert!(
        residual.abs() < 3.0 * r.chain_rule_stderr_nats,
        "{residual} ± {}",
        r.chain_rule_stderr_nats
    );

    // Independent seed for the cross-estimator check.
    let d = di_monte_carlo(&cfg(32, 5.0, 0.5, 9), 10_000, ChannelMode::FullInterval).unwrap();
    let se = (d.std_error_bits.powi(2) + r.h_v_given_y_stderr.powi(2)).sqrt();
    assert!((r.di_bits() - d.value_bits).abs() < 3.0 * se);

    let z = estimate_reference_entropies(&cfg(32, f64::NEG_INFINITY, 0.3, 8), &s).unwrap();
    assert!((z.h_v_given_y_bits - z.h_v_bits).abs() < 1e-12);
}

#[test]
fn detectors_respect_data_processing() {
    for mode in [ChannelMode::FullInterval, ChannelMode::MatchedPosition] {
        let c = cfg(32, 5.0, 0.5, 10);
        let s = McSettings::new(10_000, mode);
        let di = di_monte_carlo_with(&c, &s).unwrap();
        let tables =
            detector_confusion(&c, &s.with_grid_index(1), &[&MapDetector, &SapDetector]).unwrap();
        for t in tables {
            let k = kondo_di(&t, 0.5).unwrap();
            let se = (k.std_error_bits.powi(2) + di.std_error_bits.powi(2)).sqrt();
            assert!(
                k.value_bits <= di.value_bits + 3.0 * se,
                "{mode}: {k:?} vs {di:?}"
            );
        }
    }
    let c = cfg(32, 5.0, 0.5, 10);
    let di = di_monte_carlo(&c, 10_000, ChannelMode::MatchedPosition).unwrap();
    let np = np_theoretical_di(&c, 0.5, &default_pfa_grid()).unwrap();
    assert!(np.value_bits <= di.value_bits + 3.0 * di.std_error_bits);
    let det = NpDetector::new(&c, NpConfig::new(0.1).unwrap()).unwrap();
    let t = detector_confusion(
        &c,
        &McSettings::new(10_000, ChannelMode::MatchedPosition),
        &[&det],
    )
    .unwrap();
    assert!(kondo_di(&t[0], 0.5).unwrap().value_bits <= di.value_bits + 3.0 * di.std_error_bits);
}

#[test]
fn di_nearly_symmetric_in_prior() {
    let s = StatisticSamples::draw(
        &cfg(32, 5.0, 0.5, 11),
        &McSettings::new(5000, ChannelMode::MatchedPosition),
    )
    .unwrap();
    for p in [0.2, 0.35] {
        let (a, b) = (s.di(p), s.di(1.0 - p));
        let se = (a.std_error_bits.powi(2) + b.std_error_bits.powi(2)).sqrt();
        assert!(
            (a.value_bits - b.value_bits).abs() < 5.0 * se + 0.02,
            "{a:?} vs {b:?}"
        );
    }
}

#[test]
fn prior_inversion_round_trips() {
    let c = cfg(64, 5.0, 0.5, 12);
    let s = StatisticSamples::draw_absent(&c, &McSettings::new(2000, ChannelMode::FullInterval))
        .unwrap();
    let tol = 1e-3;
    for p in [0.1, 0.4, 0.8] {
        let pfa = s.pfa(p).mean;
        let back = s.invert_prior(pfa, tol).unwrap();
        assert!((s.pfa(back).mean - pfa).abs() <= 2.0 * tol);
        assert!((back - p).abs() < 1e-6);
    }
    assert!(s.invert_prior(1.5, tol).is_err());
    assert_eq!(s.invert_prior(0.0, tol).unwrap(), 0.0);
    assert_eq!(s.invert_prior(1.0, tol).unwrap(), 1.0);
}

#[test]
fn long_interval_prior_tracks_false_alarm_rate() {
    let c = cfg(2048, 5.0, 0.5, 13);
    for target in [0.2, 0.5, 0.8] {
        let p = invert_prior_from_pfa(&c, target, 1000, 0.02).unwrap();
        assert!((p - target).abs() < 0.02, "{target} -> {p}");
    }
}

#[test]
fn state_sequences_concentrate() {
    // Exact probability of typicality from the binomial law.
    let (p1, eps) = (0.11, 0.1);
    let h = binary_entropy(p1).unwrap();
    let exact = |m: usize| -> f64 {
        let mut total = 0.0;
        let mut ln_binom = 0.0f64;
        for k in 0..=m {
            let mut seq = vec![TargetState::Absent; m];
            seq[..k].fill(TargetState::Present);
            if is_typical_state_seq(&seq, p1, eps, h) {
                total += (ln_binom + k as f64 * p1.ln() + (m - k) as f64 * (1.0 - p1).ln()).exp();
            }
            ln_binom += ((m - k) as f64).ln() - ((k + 1) as f64).ln();
        }
        total
    };
    assert!((exact(200) - 0.859_646_605_962_98).abs() < 1e-9);
    assert!(exact(400) > 1.0 - eps);

    let m = 400;
    let n = 4000u64;
    let hits = (0..n)
        .filter(|t| {
            let mut rng = Substream::new(14, 0, *t, Lane::Scenario);
            let seq: Vec<_> = (0..m)
                .map(|_| TargetState::from_present(rng.uniform() < p1))
                .collect();
            is_typical_state_seq(&seq, p1, eps, h)
        })
        .count() as f64
        / n as f64;
    let p = exact(m);
    assert!((hits - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt());
}

#[test]
fn typical_set_size_within_aep_bracket() {
    let mut inside = 0;
    let mut total = 0;
    for m in [20, 40, 60, 80, 100] {
        for p1 in [0.1, 0.2, 0.3, 0.4, 0.5] {
            for eps in [0.1, 0.2] {
                let h = binary_entropy(p1).unwrap();
                let size = count_typical_state_seqs(m, p1, eps, h).unwrap() as f64;
                let lo = (1.0 - eps) * 2f64.powf(m as f64 * (h - eps));
                let hi = 2f64.powf(m as f64 * (h + eps));
                total += 1;
                if size <= hi && (size >= lo || size == 0.0 && lo < 1.0) {
                    inside += 1;
                }
                assert!(size <= hi, "upper bound always holds");
            }
        }
    }
    assert!(inside as f64 >= 0.9 * total as f64, "{inside}/{total}");
}

fn reference(c: &ScenarioConfig) -> detinfo::ReferenceEntropies {
    estimate_reference_entropies(
        c,
        &McSettings::new(20_000, ChannelMode::FullInterval).with_grid_index(99),
    )
    .unwrap()
}

#[test]
fn joint_typicality_concentrates_and_independent_pairs_do_not() {
    let c = cfg(32, 5.0, 0.5, 15);
    let tc = TypicalityConfig::new(400, 0.1, reference(&c)).unwrap();
    let s = McSettings::new(1, ChannelMode::FullInterval).with_grid_index(3);
    let n = 300;
    let (mut joint, mut indep) = (0, 0);
    for t in 0..n {
        let a = draw_extended_trial(&c, &s, 400, t).unwrap();
        let b = draw_extended_trial(&c, &s, 400, t + n).unwrap();
        joint += is_jointly_typical(&a, &tc) as usize;
        indep += is_jointly_typical_with(&b.states, &a.log_upsilons, &tc) as usize;
    }
    let (fj, fi) = (joint as f64 / n as f64, indep as f64 / n as f64);
    assert!(fj >= 1.0 - tc.epsilon, "joint {fj}");
    assert!(fi < 0.1 * fj, "independent {fi} vs joint {fj}");

    let wide = TypicalityConfig::new(400, f64::MAX, tc.reference.clone()).unwrap();
    let a = draw_extended_trial(&c, &s, 400, 0).unwrap();
    assert!(is_jointly_typical(&a, &wide));
}

#[test]
fn conditional_typical_count_within_bracket_for_typical_outputs() {
    let c = cfg(32, 5.0, 0.5, 16);
    let eps = 0.15;
    let m = 16;
    let tc = TypicalityConfig::new(m, eps, reference(&c)).unwrap();
    let h = tc.reference.h_v_given_y_bits;
    let lo = (1.0 - eps) * 2f64.powf(m as f64 * (h - 2.0 * eps));
    let hi = 2f64.powf(m as f64 * (h + 2.0 * eps));
    let s = McSettings::new(1, ChannelMode::FullInterval).with_grid_index(4);
    let (mut typical_y, mut inside) = (0, 0);
    for t in 0..200 {
        let trial = draw_extended_trial(&c, &s, m, t).unwrap();
        let count = count_conditional_typical(&trial, &tc).unwrap() as f64;
        if count > 0.0 {
            typical_y += 1;
            inside += (count > lo && count < hi) as usize;
        }
    }
    assert!(typical_y > 50);
    assert!(
        inside as f64 >= 0.9 * typical_y as f64,
        "{inside}/{typical_y}"
    );
}

#[test]
fn extended_fano_holds() {
    let c = cfg(32, 5.0, 0.5, 17);
    let tc = TypicalityConfig::new(8, 0.1, reference(&c)).unwrap();
    for run in 0..100u64 {
        let s = McSettings::new(50, ChannelMode::FullInterval).with_grid_index(1000 + run);
        let f = extended_fano_check(&c, &tc, &s).unwrap();
        assert!(f.holds, "run {run}: {f:?}");
    }
    let z = cfg(32, f64::NEG_INFINITY, 0.5, 18);
    let tz = TypicalityConfig::new(8, 0.1, reference(&z)).unwrap();
    let f = extended_fano_check(&z, &tz, &McSettings::new(200, ChannelMode::FullInterval)).unwrap();
    assert_eq!(f.outcome.p_f, 0.0);
    assert!(f.lhs < f.rhs, "{f:?}");
}

#[test]
fn substreams_do_not_depend_on_order() {
    let key = StreamKey::new(42, 3);
    let c = cfg(32, 5.0, 0.5, 42);
    let forward: Vec<_> = (0..20)
        .map(|t| synthesize(&c, &mut key.substream(t, Lane::Scenario)))
        .collect();
    let backward: Vec<_> = (0..20)
        .rev()
        .map(|t| synthesize(&c, &mut key.substream(t, Lane::Scenario)))
        .collect();
    assert!(forward.iter().eq(backward.iter().rev()));
}
