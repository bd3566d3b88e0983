use rand::Rng;

/// One random draw of the augmentation pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentDraw {
    pub flip_h: bool,
    pub flip_v: bool,
    /// Height stretch factor in `[1, 2]`.
    pub scale_h: f64,
    /// Width stretch factor in `[1, 2]`.
    pub scale_w: f64,
}

impl AugmentDraw {
    pub const IDENTITY: AugmentDraw = AugmentDraw {
        flip_h: false,
        flip_v: false,
        scale_h: 1.0,
        scale_w: 1.0,
    };

    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        AugmentDraw {
            flip_h: rng.gen_bool(0.5),
            flip_v: rng.gen_bool(0.5),
            scale_h: rng.gen_range(1.0..=2.0),
            scale_w: rng.gen_range(1.0..=2.0),
        }
    }
}

/// Random reflections on both axes followed by independent stretches of
/// both axes, center-cropped back to `h x w`.
pub fn augment<R: Rng + ?Sized>(image: &[f64], h: usize, w: usize, rng: &mut R) -> Vec<f64> {
    augment_with(image, h, w, AugmentDraw::sample(rng))
}

/// Deterministic core of [`augment`]. Each output pixel center is mapped
/// back into the source image and bilinearly interpolated, so values never
/// leave the input's range.
pub fn augment_with(image: &[f64], h: usize, w: usize, draw: AugmentDraw) -> Vec<f64> {
    assert_eq!(image.len(), h * w, "image is not {h}x{w}");
    let px = |r: usize, c: usize| {
        let r = if draw.flip_v { h - 1 - r } else { r };
        let c = if draw.flip_h { w - 1 - c } else { c };
        image[r * w + c]
    };
    // source coordinate of output index i after stretching by s and cropping
    // the central n pixels
    let source = |i: usize, n: usize, s: f64| {
        let offset = (n as f64 * s - n as f64) / 2.0;
        ((i as f64 + offset + 0.5) / s - 0.5).clamp(0.0, (n - 1) as f64)
    };
    let mut out = Vec::with_capacity(h * w);
    for i in 0..h {
        let y = source(i, h, draw.scale_h);
        let y0 = y.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let ty = y - y0 as f64;
        for j in 0..w {
            let x = source(j, w, draw.scale_w);
            let x0 = x.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let tx = x - x0 as f64;
            let top = px(y0, x0) * (1.0 - tx) + px(y0, x1) * tx;
            let bottom = px(y1, x0) * (1.0 - tx) + px(y1, x1) * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn ramp(h: usize, w: usize) -> Vec<f64> {
        (0..h * w).map(|i| (i * 7 % 11) as f64 - 3.0).collect()
    }

    #[test]
    fn identity_draw_is_identity() {
        let img = ramp(5, 4);
        assert_eq!(augment_with(&img, 5, 4, AugmentDraw::IDENTITY), img);
    }

    #[test]
    fn double_horizontal_flip_is_identity() {
        let img = ramp(4, 6);
        let flip = AugmentDraw {
            flip_h: true,
            ..AugmentDraw::IDENTITY
        };
        let once = augment_with(&img, 4, 6, flip);
        assert_ne!(once, img);
        assert_eq!(once[0], img[5]);
        assert_eq!(augment_with(&once, 4, 6, flip), img);
    }

    #[test]
    fn constant_stays_constant_and_range_is_kept() {
        let mut rng = seed::rng(1);
        let flat = vec![0.25; 36];
        let img = ramp(6, 6);
        let (lo, hi) = (-3.0, 7.0);
        for _ in 0..200 {
            let out = augment(&flat, 6, 6, &mut rng);
            assert!(out.iter().all(|&v| (v - 0.25).abs() < 1e-15));
            let out = augment(&img, 6, 6, &mut rng);
            assert_eq!(out.len(), 36);
            assert!(out.iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
        }
    }

    #[test]
    fn stretch_magnifies_the_centre() {
        // a 4x4 image stretched 2x on both axes shows the central 2x2 block
        let img: Vec<f64> = (0..16).map(f64::from).collect();
        let draw = AugmentDraw {
            scale_h: 2.0,
            scale_w: 2.0,
            ..AugmentDraw::IDENTITY
        };
        let out = augment_with(&img, 4, 4, draw);
        assert!((out[0] - 3.75).abs() < 1e-12);
        assert!((out[15] - 11.25).abs() < 1e-12);
    }
}
