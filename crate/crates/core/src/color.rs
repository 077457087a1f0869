//! BT.709 full-range colour conversions.

/// Luma weights (Kr, Kg, Kb).
pub const BT709_LUMA: [f64; 3] = [0.2126, 0.7152, 0.0722];

/// RGB -> YCbCr matrix, rows Y, Cb, Cr. Chroma rows get a +128 offset.
pub const BT709_RGB_TO_YUV: [[f64; 3]; 3] = [
    [0.2126, 0.7152, 0.0722],
    [-0.1146, -0.3854, 0.5],
    [0.5, -0.4542, -0.0458],
];

#[inline]
pub fn luma(r: f64, g: f64, b: f64) -> f64 {
    BT709_LUMA[0] * r + BT709_LUMA[1] * g + BT709_LUMA[2] * b
}

/// Converts an 8-bit RGB triple to full-range Y, Cb, Cr in 8-bit code values.
#[inline]
pub fn rgb_to_yuv(rgb: [u8; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(f64::from);
    let m = &BT709_RGB_TO_YUV;
    [
        m[0][0] * r + m[0][1] * g + m[0][2] * b,
        m[1][0] * r + m[1][1] * g + m[1][2] * b + 128.0,
        m[2][0] * r + m[2][1] * g + m[2][2] * b + 128.0,
    ]
}
