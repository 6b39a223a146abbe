#![no_main]

use asgs_flow::app::config::{parse_ndiv_list, parse_re_list};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(list) = parse_ndiv_list(text) {
        assert!(!list.is_empty() && list.iter().all(|&n| (1..=4096).contains(&n)));
    }
    if let Ok(list) = parse_re_list(text) {
        assert!(list.iter().all(|r| *r > 0.0 && r.is_finite()));
    }
});
