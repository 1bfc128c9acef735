#![no_main]

use causalflow::formats::parse_table;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = parse_table(text) {
        let csv = table.to_csv();
        let again = parse_table(&csv).expect("written table reparses");
        assert_eq!(again.to_csv(), csv);
    }
});
