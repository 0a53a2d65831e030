//! Normalized boxes and temporal intervals.

use serde::{Deserialize, Serialize};

/// Normalized box in center format: `(x, y)` is the center, `(w, h)` the size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const EMPTY: BBox = BBox {
        x: 0.0,
        y: 0.0,
        w: 0.0,
        h: 0.0,
    };

    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self {
            x: 0.5 * (x1 + x2),
            y: 0.5 * (y1 + y2),
            w: x2 - x1,
            h: y2 - y1,
        }
    }

    /// `(x1, y1, x2, y2)`
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.x - 0.5 * self.w,
            self.y - 0.5 * self.h,
            self.x + 0.5 * self.w,
            self.y + 0.5 * self.h,
        )
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let (ax1, ay1, ax2, ay2) = self.corners();
        let (bx1, by1, bx2, by2) = other.corners();
        let iw = (ax2.min(bx2) - ax1.max(bx1)).max(0.0);
        let ih = (ay2.min(by2) - ay1.max(by1)).max(0.0);
        iw * ih
    }

    /// Intersection over union; zero-area boxes give 0, identical boxes 1.
    pub fn iou(&self, other: &BBox) -> f64 {
        let (a, b) = (self.area(), other.area());
        if a <= 0.0 || b <= 0.0 {
            return 0.0;
        }
        if self == other {
            return 1.0;
        }
        let inter = self.intersection_area(other);
        let union = a + b - inter;
        if union <= 0.0 {
            0.0
        } else {
            (inter / union).clamp(0.0, 1.0)
        }
    }

    /// Tightest box containing both.
    pub fn union_box(&self, other: &BBox) -> BBox {
        let (ax1, ay1, ax2, ay2) = self.corners();
        let (bx1, by1, bx2, by2) = other.corners();
        BBox::from_corners(ax1.min(bx1), ay1.min(by1), ax2.max(bx2), ay2.max(by2))
    }

    /// True when `self` lies within `other` (closed containment).
    pub fn is_inside(&self, other: &BBox) -> bool {
        let (ax1, ay1, ax2, ay2) = self.corners();
        let (bx1, by1, bx2, by2) = other.corners();
        ax1 >= bx1 && ay1 >= by1 && ax2 <= bx2 && ay2 <= by2
    }

    pub fn in_unit_range(&self) -> bool {
        [self.x, self.y, self.w, self.h]
            .iter()
            .all(|v| (0.0..=1.0).contains(v))
    }
}

impl From<[f64; 4]> for BBox {
    fn from(a: [f64; 4]) -> Self {
        BBox::new(a[0], a[1], a[2], a[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.to_array()
    }
}

/// Temporal IoU of two continuous intervals `(start, end)`, measured by length.
///
/// Identical zero-length intervals count as a perfect match.
pub fn interval_iou(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (a0, a1) = (a.0.min(a.1), a.0.max(a.1));
    let (b0, b1) = (b.0.min(b.1), b.0.max(b.1));
    let inter = (a1.min(b1) - a0.max(b0)).max(0.0);
    let union = (a1 - a0) + (b1 - b0) - inter;
    if union <= 0.0 {
        if a0 == b0 && a1 == b1 {
            1.0
        } else {
            0.0
        }
    } else {
        inter / union
    }
}

/// Temporal IoU of two inclusive frame ranges, counted in frames.
pub fn frame_iou(a: (usize, usize), b: (usize, usize)) -> f64 {
    interval_iou(
        (a.0 as f64, a.1 as f64 + 1.0),
        (b.0 as f64, b.1 as f64 + 1.0),
    )
}
