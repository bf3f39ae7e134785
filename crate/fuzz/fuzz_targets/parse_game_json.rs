#![no_main]

use apla::Game;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(game) = Game::from_json_str(s) {
            // bound the enumeration cost on huge action sets
            if game.num_profiles() <= 4096 {
                let report = game.check_coordination();
                assert!(report.payoff_dominant_set.iter().all(|p| report.nash_set.contains(p)));
            }
            let again = Game::from_json_str(&game.to_json_value().to_string()).unwrap();
            assert_eq!(again.actions(), game.actions());
        }
    }
});
