#![no_main]
use fusionloc_service::api::parse_localize_request;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // rejections must carry a client error, never a 5xx
    if let Err(e) = parse_localize_request(data) {
        assert!(e.status.is_client_error(), "{e:?}");
    }
});
