//! Bundled synthetic test images on [0, 255], generated procedurally at any
//! lattice size so the repository ships no binary assets.

use crate::field::ImageField;

/// Deterministic multiscale texture so regions are not perfectly flat.
fn texture(y: f64, x: f64, amplitude: f64) -> f64 {
    use std::f64::consts::TAU;
    amplitude
        * ((TAU * 5.0 * x).sin() * (TAU * 3.5 * y).sin()
            + 0.7 * (TAU * (9.0 * x + 6.5 * y)).cos()
            + 0.5 * (TAU * (4.0 * x - 7.5 * y) + 1.1).sin()
            + 0.45 * (TAU * (14.0 * x + 11.0 * y)).sin()
            + 0.35 * (TAU * (16.0 * y - 3.0 * x) + 0.7).cos())
}

/// Cartoon with shaded regions: rectangles, a disk and a dark bar over a
/// textured background. Piecewise smooth rather than piecewise constant.
pub fn shapes(rows: usize, cols: usize) -> ImageField {
    let (r, c) = (rows as f64, cols as f64);
    ImageField::from_fn(rows, cols, |i, j| {
        let (y, x) = (i as f64 / r, j as f64 / c);
        let mut v = 40.0 + 15.0 * x;
        if y > 0.15 && y < 0.55 && x > 0.1 && x < 0.45 {
            v = 190.0 + 25.0 * (y - 0.15);
        }
        let (dy, dx) = (y - 0.62, x - 0.68);
        if (dy * dy + dx * dx).sqrt() < 0.21 {
            v = 120.0 - 90.0 * (dy * dy + dx * dx).sqrt();
        }
        if y > 0.72 && y < 0.92 && x > 0.08 && x < 0.3 {
            v = 222.0;
        }
        if x > 0.55 && x < 0.62 && y < 0.4 {
            v = 60.0;
        }
        (v + texture(y, x, 9.0)).clamp(0.0, 255.0)
    })
}

/// Blocky "house" scene with shaded patches: sky band, facade, roof band,
/// door and window patches over mild texture.
pub fn house(rows: usize, cols: usize) -> ImageField {
    let (r, c) = (rows as f64, cols as f64);
    ImageField::from_fn(rows, cols, |i, j| {
        let (y, x) = (i as f64 / r, j as f64 / c);
        let mut v = if y < 0.2 { 185.0 + 30.0 * x } else { 160.0 };
        if y >= 0.35 && x > 0.2 && x < 0.8 {
            v = 105.0 + 20.0 * y;
        }
        if y >= 0.28 && y < 0.42 && x > 0.15 && x < 0.85 {
            v = 70.0 + 25.0 * (x - 0.15);
        }
        if y >= 0.55 && y < 0.85 && x > 0.44 && x < 0.56 {
            v = 40.0;
        }
        if y >= 0.5 && y < 0.62 && x > 0.25 && x < 0.37 {
            v = 222.0;
        }
        if y >= 0.5 && y < 0.62 && x > 0.63 && x < 0.75 {
            v = 222.0;
        }
        if y >= 0.9 {
            v = 95.0 + 18.0 * x;
        }
        (v + texture(y, x, 9.5)).clamp(0.0, 255.0)
    })
}

/// Smooth scene: a ramp plus broad Gaussian bumps, for smooth-prior models.
pub fn smooth(rows: usize, cols: usize) -> ImageField {
    let (r, c) = (rows as f64, cols as f64);
    let bump = |y: f64, x: f64, cy: f64, cx: f64, s: f64, a: f64| {
        let (dy, dx) = (y - cy, x - cx);
        a * (-(dy * dy + dx * dx) / (2.0 * s * s)).exp()
    };
    ImageField::from_fn(rows, cols, |i, j| {
        let (y, x) = (i as f64 / r, j as f64 / c);
        let mut v = 40.0 + 60.0 * x + 30.0 * y;
        v += bump(y, x, 0.3, 0.3, 0.15, 120.0);
        v += bump(y, x, 0.7, 0.65, 0.2, 80.0);
        v -= bump(y, x, 0.55, 0.25, 0.1, 45.0);
        v.clamp(0.0, 255.0)
    })
}

/// Looks a bundled image up by name.
pub fn bundled(name: &str, rows: usize, cols: usize) -> Option<ImageField> {
    match name {
        "shapes" => Some(shapes(rows, cols)),
        "house" => Some(house(rows, cols)),
        "smooth" => Some(smooth(rows, cols)),
        _ => None,
    }
}

pub const BUNDLED_NAMES: &[&str] = &["shapes", "house", "smooth"];
