#![no_main]
use libfuzzer_sys::fuzz_target;
use pfc_core::resnet::parse_idx_images;

fuzz_target!(|data: &[u8]| {
    if let Ok(images) = parse_idx_images(data) {
        assert_eq!(images.pixels.len(), images.count * images.rows * images.cols);
        if images.count > 0 {
            let _ = images.image(images.count - 1);
        }
    }
});
