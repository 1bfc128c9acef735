#![no_main]

use causalflow::formats::{parse_trajectories, write_trajectories};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(ensemble) = parse_trajectories(text) {
        let written = write_trajectories(&ensemble);
        let again = parse_trajectories(&written).expect("written trajectories reparse");
        assert_eq!(write_trajectories(&again), written);
    }
});
