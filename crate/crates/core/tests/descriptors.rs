use egc_core::descriptors::{Descriptor, LbpParams, LpqParams};
use egc_core::preprocess::to_grayscale;
use egc_core::ImageBuffer;
use proptest::prelude::*;

fn gray_image() -> impl Strategy<Value = ImageBuffer> {
    (12usize..28, 12usize..28).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<u8>(), w * h).prop_map(move |d| ImageBuffer::new(w, h, 1, d).unwrap())
    })
}

fn replicate(gray: &ImageBuffer) -> ImageBuffer {
    let data = gray.data().iter().flat_map(|&v| [v, v, v]).collect();
    ImageBuffer::new(gray.width(), gray.height(), 3, data).unwrap()
}

fn descriptors() -> Vec<Descriptor> {
    vec![
        Descriptor::Lbp(LbpParams::new(8, 1.0).unwrap()),
        Descriptor::Lbp(LbpParams::new(8, 2.0).unwrap()),
        Descriptor::Rlbp(LbpParams::new(8, 2.0).unwrap()),
        Descriptor::Lpq(LpqParams::new(5).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn histograms_are_distributions(img in gray_image()) {
        for d in descriptors() {
            let v = d.extract(&img).unwrap().values;
            prop_assert_eq!(v.len(), d.bins());
            prop_assert!(v.iter().all(|x| *x >= 0.0));
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn robust_repair_only_moves_mass_out_of_the_pooled_bin(img in gray_image(), r in 1u32..3) {
        let p = LbpParams::new(8, f64::from(r)).unwrap();
        let lbp = Descriptor::Lbp(p).extract(&img).unwrap().values;
        let rlbp = Descriptor::Rlbp(p).extract(&img).unwrap().values;
        let pooled = lbp.len() - 1;
        prop_assert!(rlbp[pooled] <= lbp[pooled] + 1e-12);
        for b in 0..pooled {
            prop_assert!(rlbp[b] + 1e-12 >= lbp[b]);
        }
    }

    #[test]
    fn replicated_gray_describes_as_three_equal_thirds(img in gray_image()) {
        let rgb = replicate(&img);
        for d in descriptors() {
            let gray = d.extract(&img).unwrap().values;
            let color = d.extract(&rgb).unwrap().values;
            prop_assert_eq!(color.len(), 3 * gray.len());
            for (i, v) in color.iter().enumerate() {
                prop_assert!((v - gray[i % gray.len()] / 3.0).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn replicated_gray_converts_back_exactly(img in gray_image()) {
        prop_assert_eq!(to_grayscale(&replicate(&img)).unwrap(), img);
    }

    #[test]
    fn constant_image_is_a_single_uniform_bin(w in 8usize..20, v in any::<u8>()) {
        let img = ImageBuffer::filled(w, w, 1, v).unwrap();
        let h = Descriptor::Lbp(LbpParams::new(8, 1.0).unwrap()).extract(&img).unwrap().values;
        // All neighbors tie with the center, so every code is 0xFF.
        prop_assert_eq!(h.iter().filter(|x| **x == 1.0).count(), 1);
    }
}
