//! Binary dilation and erosion with a `(2r+1)x(2r+1)` square element.
//!
//! Both passes are separable. Erosion treats out-of-grid pixels as 0, so
//! `erode(M, r) == !dilate(!M, r)` holds exactly once `M` is viewed as
//! zero-padded (its complement is then set outside the grid).

use super::RegionMask;

pub fn dilate(mask: &RegionMask, radius: usize) -> RegionMask {
    if radius == 0 {
        return mask.clone();
    }
    let rows = window_pass(mask.bits(), mask.width(), mask.height(), radius, Axis::Row, Rule::Any);
    let bits = window_pass(&rows, mask.width(), mask.height(), radius, Axis::Col, Rule::Any);
    RegionMask {
        width: mask.width(),
        height: mask.height(),
        bits,
    }
}

pub fn erode(mask: &RegionMask, radius: usize) -> RegionMask {
    if radius == 0 {
        return mask.clone();
    }
    let rows = window_pass(mask.bits(), mask.width(), mask.height(), radius, Axis::Row, Rule::All);
    let bits = window_pass(&rows, mask.width(), mask.height(), radius, Axis::Col, Rule::All);
    RegionMask {
        width: mask.width(),
        height: mask.height(),
        bits,
    }
}

#[derive(Clone, Copy)]
enum Axis {
    Row,
    Col,
}

#[derive(Clone, Copy)]
enum Rule {
    Any,
    All,
}

fn window_pass(bits: &[bool], w: usize, h: usize, r: usize, axis: Axis, rule: Rule) -> Vec<bool> {
    let (lines, len) = match axis {
        Axis::Row => (h, w),
        Axis::Col => (w, h),
    };
    let index = |line: usize, i: usize| match axis {
        Axis::Row => line * w + i,
        Axis::Col => i * w + line,
    };
    let mut out = vec![false; w * h];
    let mut prefix = vec![0usize; len + 1];
    for line in 0..lines {
        for i in 0..len {
            prefix[i + 1] = prefix[i] + bits[index(line, i)] as usize;
        }
        for i in 0..len {
            let lo = i.saturating_sub(r);
            let hi = (i + r).min(len - 1);
            let ones = prefix[hi + 1] - prefix[lo];
            out[index(line, i)] = match rule {
                Rule::Any => ones > 0,
                // window must lie fully inside the grid and be all ones
                Rule::All => i >= r && i + r < len && ones == 2 * r + 1,
            };
        }
    }
    out
}
