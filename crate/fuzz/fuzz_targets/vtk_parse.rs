#![no_main]

use asgs_flow::app::vtk::parse_vtk;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(d) = parse_vtk(text) {
        assert!(d.cells.iter().flatten().all(|&i| i < d.points.len()));
        assert_eq!(d.velocity.len(), d.points.len());
    }
});
