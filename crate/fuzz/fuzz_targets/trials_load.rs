#![no_main]
use fusionloc::db::TrialSet;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(set) = TrialSet::from_json_bytes(data) {
        let json = serde_json::to_vec(&set).unwrap();
        assert_eq!(TrialSet::from_json_bytes(&json).unwrap(), set);
    }
});
