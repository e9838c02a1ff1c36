//! Branch-free `sin`/`cos` for the MLP inner loops.
//!
//! Cody-Waite reduction by pi/2 followed by the fdlibm minimax kernels on
//! `[-pi/4, pi/4]`. Accurate to a few ulp for `|x| < 2^20`, which covers every
//! pre-activation the networks produce. Written so the slice versions
//! auto-vectorize.

// The constants keep the digits they were published with.
#![allow(clippy::excessive_precision)]

const TWO_OVER_PI: f64 = std::f64::consts::FRAC_2_PI;
const PIO2_1: f64 = 1.570_796_326_734_125_614_17e0;
const PIO2_2: f64 = 6.077_100_506_303_965_976_60e-11;
const PIO2_3: f64 = 2.022_266_248_711_166_455_80e-21;
const ROUND_MAGIC: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52

const S1: f64 = -1.666_666_666_666_663_243_48e-01;
const S2: f64 = 8.333_333_333_322_489_461_24e-03;
const S3: f64 = -1.984_126_982_985_794_931_34e-04;
const S4: f64 = 2.755_731_370_707_006_767_89e-06;
const S5: f64 = -2.505_076_025_340_686_341_95e-08;
const S6: f64 = 1.589_690_995_211_550_102_21e-10;

const C1: f64 = 4.166_666_666_666_660_190_37e-02;
const C2: f64 = -1.388_888_888_887_410_957_49e-03;
const C3: f64 = 2.480_158_728_947_672_941_78e-05;
const C4: f64 = -2.755_731_435_139_066_330_35e-07;
const C5: f64 = 2.087_572_321_298_174_827_90e-09;
const C6: f64 = -1.135_964_755_778_819_482_65e-11;

#[inline(always)]
pub fn sin_cos(x: f64) -> (f64, f64) {
    let shifted = x * TWO_OVER_PI + ROUND_MAGIC;
    let quadrant = shifted.to_bits() as u32 & 3;
    let k = shifted - ROUND_MAGIC;
    let r = ((x - k * PIO2_1) - k * PIO2_2) - k * PIO2_3;
    let z = r * r;
    let s = r + r * z * (S1 + z * (S2 + z * (S3 + z * (S4 + z * (S5 + z * S6)))));
    let c = 1.0 - 0.5 * z + z * z * (C1 + z * (C2 + z * (C3 + z * (C4 + z * (C5 + z * C6)))));
    let swap = quadrant & 1 == 1;
    let (sa, ca) = if swap { (c, s) } else { (s, c) };
    let sin_neg = quadrant & 2 != 0;
    let cos_neg = (quadrant + 1) & 2 != 0;
    (if sin_neg { -sa } else { sa }, if cos_neg { -ca } else { ca })
}

#[inline(always)]
pub fn sin(x: f64) -> f64 {
    sin_cos(x).0
}

/// In-place `x <- sin(x)` writing `cos(x)` into `cos_out`.
pub fn sin_cos_in_place(values: &mut [f64], cos_out: &mut [f64]) {
    for (v, c) in values.iter_mut().zip(cos_out.iter_mut()) {
        let (s, co) = sin_cos(*v);
        *v = s;
        *c = co;
    }
}

pub fn sin_in_place(values: &mut [f64]) {
    for v in values.iter_mut() {
        *v = sin(*v);
    }
}
