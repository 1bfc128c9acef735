#![no_main]

use causalflow::network::parse_network;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(net) = parse_network(text) else {
        return;
    };
    // whatever parses must print back to something that parses the same way
    let printed = net.to_string();
    let again = parse_network(&printed).expect("printed network reparses");
    assert_eq!(again.to_string(), printed);
    let _ = net.validate();
});
