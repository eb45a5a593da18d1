use proptest::prelude::*;
use roadlabel_core::compositor::{
    assign_pixels, decode_label_map, encode_label_map, read_stack, write_stack, ContributionStack,
    FmssLabeling, LabelMap, Layer,
};
use roadlabel_core::taxonomy::road_scene_palette;
use roadlabel_core::world::FmssId;

/// Weights on a coarse grid so ties are common.
fn stack_strategy() -> impl Strategy<Value = (u32, u32, Vec<Vec<u8>>)> {
    (1u32..9, 1u32..9, 0usize..6).prop_flat_map(|(w, h, n)| {
        let px = (w * h) as usize;
        (
            Just(w),
            Just(h),
            prop::collection::vec(prop::collection::vec(0u8..=4, px), n),
        )
    })
}

fn build(w: u32, h: u32, layers: &[Vec<u8>], scale: f32) -> (ContributionStack, FmssLabeling) {
    let layers: Vec<Layer> = layers
        .iter()
        .enumerate()
        .map(|(i, ws)| Layer {
            fmss: FmssId::new("f.ydr", format!("m{i}"), i as u32 % 3, 0),
            weights: ws.iter().map(|&q| q as f32 / 4.0 * scale).collect(),
        })
        .collect();
    let labeling = FmssLabeling(
        layers
            .iter()
            .enumerate()
            .map(|(i, l)| (l.fmss.clone(), i as u8 * 3))
            .collect(),
    );
    (ContributionStack::new(w, h, layers).unwrap(), labeling)
}

proptest! {
    #[test]
    fn layer_order_does_not_matter((w, h, layers) in stack_strategy(), rot in 0usize..6) {
        let (stack, labeling) = build(w, h, &layers, 1.0);
        let mut shuffled = stack.layers().to_vec();
        if !shuffled.is_empty() {
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
        }
        let other = ContributionStack::new(w, h, shuffled).unwrap();
        prop_assert_eq!(assign_pixels(&stack, &labeling), assign_pixels(&other, &labeling));
    }

    #[test]
    fn uniform_scaling_does_not_matter((w, h, layers) in stack_strategy(), halvings in 1i32..6) {
        let (a, labeling) = build(w, h, &layers, 1.0);
        let (b, _) = build(w, h, &layers, 0.5f32.powi(halvings));
        prop_assert_eq!(assign_pixels(&a, &labeling), assign_pixels(&b, &labeling));
    }

    #[test]
    fn stack_file_round_trip((w, h, layers) in stack_strategy()) {
        let (stack, _) = build(w, h, &layers, 0.7);
        let mut bytes = Vec::new();
        write_stack(&stack, &mut bytes).unwrap();
        prop_assert_eq!(read_stack(bytes.as_slice()).unwrap(), stack);
    }

    #[test]
    fn ppm_round_trip(w in 1u32..12, h in 1u32..12, seed in prop::collection::vec(0u8..38, 1..144)) {
        let data: Vec<u8> = (0..(w * h) as usize).map(|i| {
            let c = seed[i % seed.len()];
            if c == 37 { 255 } else { c }
        }).collect();
        let m = LabelMap { width: w, height: h, data };
        let palette = road_scene_palette();
        let bytes = encode_label_map(&m, &palette).unwrap();
        prop_assert_eq!(decode_label_map(&bytes, &palette).unwrap(), m);
    }
}
