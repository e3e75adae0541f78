use super::{ImageGrid, ScalarGrid};
use crate::error::Result;

/// Rec.601 luma weights for R, G, B.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

pub fn to_grayscale(img: &ImageGrid) -> Result<ScalarGrid> {
    let (w, h) = (img.width(), img.height());
    let data = match img.channels() {
        1 => img.data().to_vec(),
        3 => {
            let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
            (0..w * h)
                .map(|i| {
                    let v = LUMA_WEIGHTS[0] * r[i] + LUMA_WEIGHTS[1] * g[i] + LUMA_WEIGHTS[2] * b[i];
                    v.clamp(0.0, 1.0)
                })
                .collect()
        }
        c => return Err(crate::Error::contract(format!("grayscale needs 1 or 3 channels, got {c}"))),
    };
    ScalarGrid::new(w, h, data)
}

/// Per-pixel `sqrt(Gx^2 + Gy^2)` with 3x3 Sobel kernels and edge replication.
pub fn sobel_gradient_magnitude(gray: &ScalarGrid) -> ScalarGrid {
    let (w, h) = (gray.width(), gray.height());
    let at = |x: isize, y: isize| {
        let xc = x.clamp(0, w as isize - 1) as usize;
        let yc = y.clamp(0, h as isize - 1) as usize;
        gray.get(xc, yc)
    };
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            out.push(gx.hypot(gy));
        }
    }
    ScalarGrid {
        width: w,
        height: h,
        data: out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> ScalarGrid {
        let mut d = Vec::new();
        for y in 0..h {
            for x in 0..w {
                d.push(f(x, y));
            }
        }
        ScalarGrid::new(w, h, d).unwrap()
    }

    #[test]
    fn luma_of_primaries() {
        let white = ImageGrid::filled(1, 1, 3, 1.0).unwrap();
        assert!((to_grayscale(&white).unwrap().get(0, 0) - 1.0).abs() < 1e-12);
        let red = ImageGrid::new(1, 1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        assert!((to_grayscale(&red).unwrap().get(0, 0) - 0.299).abs() < 1e-12);
    }

    #[test]
    fn single_channel_is_copied() {
        let img = ImageGrid::new(2, 1, 1, vec![0.25, 0.75]).unwrap();
        assert_eq!(to_grayscale(&img).unwrap().data(), &[0.25, 0.75]);
    }

    #[test]
    fn constant_grid_has_zero_gradient() {
        let g = sobel_gradient_magnitude(&grid(7, 5, |_, _| 0.42));
        assert!(g.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn vertical_step_gives_four_on_adjacent_columns() {
        // step between columns 3 and 4
        let g = sobel_gradient_magnitude(&grid(8, 6, |x, _| if x >= 4 { 1.0 } else { 0.0 }));
        for y in 1..5 {
            for x in 0..8 {
                let expect = if x == 3 || x == 4 { 4.0 } else { 0.0 };
                assert!((g.get(x, y) - expect).abs() < 1e-12, "({x},{y}) = {}", g.get(x, y));
            }
        }
    }

    #[test]
    fn single_row_reduces_to_horizontal_kernel() {
        let row = grid(5, 1, |x, _| (x * x) as f64 * 0.1);
        let g = sobel_gradient_magnitude(&row);
        for x in 0..5usize {
            let l = row.get(x.saturating_sub(1), 0);
            let r = row.get((x + 1).min(4), 0);
            assert!((g.get(x, 0) - 4.0 * (r - l).abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn offset_does_not_change_magnitude() {
        let a = grid(6, 6, |x, y| ((x * 7 + y * 3) % 5) as f64 * 0.1);
        let b = grid(6, 6, |x, y| ((x * 7 + y * 3) % 5) as f64 * 0.1 + 0.3);
        let (ga, gb) = (sobel_gradient_magnitude(&a), sobel_gradient_magnitude(&b));
        for (u, v) in ga.data().iter().zip(gb.data()) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}
