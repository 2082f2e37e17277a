#![no_main]
use fusionloc_service::api::parse_step_request;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Err(e) = parse_step_request(data) {
        assert!(e.status.is_client_error(), "{e:?}");
    }
});
