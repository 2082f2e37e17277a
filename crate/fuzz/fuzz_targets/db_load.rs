#![no_main]
use fusionloc::db::RpDatabase;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // anything that loads must survive a save/load round trip unchanged
    if let Ok(db) = RpDatabase::from_json_bytes(data) {
        let json = db.to_json().expect("loaded database re-serializes");
        let again = RpDatabase::from_json_bytes(json.as_bytes()).expect("saved database reloads");
        assert_eq!(db, again);
    }
});
