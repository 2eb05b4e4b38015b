use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rba::scenarios::{scenario, synth_scenario, SCENARIO_NAMES};

fn noise_rate(name: &str) -> f64 {
    let s = scenario(name).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 100_000;
    let d = s.draw(true, n, &mut rng).unwrap();
    let flipped = d
        .features()
        .iter_rows()
        .zip(d.labels())
        .filter(|(x, &y)| s.true_label(x) != y)
        .count();
    flipped as f64 / n as f64
}

#[test]
fn noise_rates_match_the_scenarios() {
    let r3 = noise_rate("fig3");
    let r5 = noise_rate("fig5");
    assert!((r3 - 0.20).abs() <= 0.01, "fig3 {r3}");
    assert!((r5 - 0.10).abs() <= 0.01, "fig5 {r5}");
    assert_eq!(noise_rate("fig2"), 0.0);
}

#[test]
fn every_scenario_is_valid_and_seeded() {
    for name in SCENARIO_NAMES {
        let a = synth_scenario(name, 50, 60, 9).unwrap();
        let b = synth_scenario(name, 50, 60, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.src.len(), a.trg.len()), (50, 60));
        assert_ne!(a, synth_scenario(name, 50, 60, 10).unwrap());
    }
    assert!(scenario("fig4").is_err());
    assert!(synth_scenario("fig2", 0, 10, 1).is_err());
}
