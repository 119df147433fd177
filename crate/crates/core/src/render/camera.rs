//! The six axis-aligned orthographic cameras.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewId {
    Top,
    Bottom,
    Left,
    Right,
    Front,
    Back,
}

impl ViewId {
    pub const ALL: [ViewId; 6] = [ViewId::Top, ViewId::Bottom, ViewId::Left, ViewId::Right, ViewId::Front, ViewId::Back];

    pub fn name(self) -> &'static str {
        match self {
            ViewId::Top => "top",
            ViewId::Bottom => "bottom",
            ViewId::Left => "left",
            ViewId::Right => "right",
            ViewId::Front => "front",
            ViewId::Back => "back",
        }
    }

    /// Viewing direction and screen-up vector. Front looks down −z with +y up;
    /// every pair of opposite views shares its up vector.
    pub fn basis(self) -> ([f64; 3], [f64; 3]) {
        match self {
            ViewId::Front => ([0.0, 0.0, -1.0], [0.0, 1.0, 0.0]),
            ViewId::Back => ([0.0, 0.0, 1.0], [0.0, 1.0, 0.0]),
            ViewId::Top => ([0.0, -1.0, 0.0], [0.0, 0.0, -1.0]),
            ViewId::Bottom => ([0.0, 1.0, 0.0], [0.0, 0.0, 1.0]),
            ViewId::Right => ([-1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
            ViewId::Left => ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
        }
    }
}

impl fmt::Display for ViewId {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Orthographic camera centred on a bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewCamera {
    pub view: ViewId,
    pub position: [f64; 3],
    pub look_at: [f64; 3],
    pub up: [f64; 3],
    pub forward: [f64; 3],
    pub right: [f64; 3],
    /// Pixels per model unit.
    pub scale: f64,
    /// Screen position of `look_at`.
    pub center_px: [f64; 2],
}

/// Fraction of the viewport the bounding box may fill.
const FILL: f64 = 0.85;

impl ViewCamera {
    /// Fits the box `[lo, hi]` into a `viewport_w × viewport_h` viewport.
    pub fn fit(view: ViewId, lo: [f64; 3], hi: [f64; 3], viewport_w: usize, viewport_h: usize) -> Self {
        let (forward, up) = view.basis();
        let right = cross(forward, up);
        let look_at = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])];
        let ext = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        let span = |d: [f64; 3]| dot(ext, d.map(f64::abs)).max(1e-12);
        let scale = FILL * (viewport_w as f64 / span(right)).min(viewport_h as f64 / span(up));
        let dist = (dot(ext, ext)).sqrt().max(1e-12);
        let position = [look_at[0] - dist * forward[0], look_at[1] - dist * forward[1], look_at[2] - dist * forward[2]];
        Self {
            view,
            position,
            look_at,
            up,
            forward,
            right,
            scale,
            center_px: [0.5 * viewport_w as f64, 0.5 * viewport_h as f64],
        }
    }

    /// Screen coordinates (pixels, y down) and depth along the view
    /// direction; smaller depth is nearer.
    pub fn project(&self, p: [f64; 3]) -> [f64; 3] {
        let d = [p[0] - self.look_at[0], p[1] - self.look_at[1], p[2] - self.look_at[2]];
        [
            self.center_px[0] + self.scale * dot(d, self.right),
            self.center_px[1] - self.scale * dot(d, self.up),
            dot(d, self.forward),
        ]
    }

    /// Screen-space direction (pixels per unit) of a model-space vector.
    pub fn project_direction(&self, v: [f64; 3]) -> [f64; 2] {
        [self.scale * dot(v, self.right), -self.scale * dot(v, self.up)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_are_right_handed_and_axis_aligned() {
        for v in ViewId::ALL {
            let (f, u) = v.basis();
            let r = cross(f, u);
            assert_eq!(dot(f, u), 0.0);
            for axis in [f, u, r] {
                assert_eq!(axis.iter().filter(|c| c.abs() == 1.0).count(), 1);
            }
        }
    }

    #[test]
    fn camera_is_centred_on_the_box() {
        let cam = ViewCamera::fit(ViewId::Front, [0.0; 3], [2.0, 1.0, 0.5], 200, 100);
        let c = cam.project([1.0, 0.5, 0.25]);
        assert_eq!([c[0], c[1]], [100.0, 50.0]);
        assert_eq!(cam.scale, 0.85 * 100.0);
        let near = cam.project([1.0, 0.5, 0.5])[2];
        let far = cam.project([1.0, 0.5, 0.0])[2];
        assert!(near < far);
    }

    #[test]
    fn opposite_views_mirror_horizontally() {
        let (lo, hi) = ([0.0; 3], [1.0, 2.0, 3.0]);
        for (a, b) in [(ViewId::Front, ViewId::Back), (ViewId::Left, ViewId::Right)] {
            let ca = ViewCamera::fit(a, lo, hi, 64, 64);
            let cb = ViewCamera::fit(b, lo, hi, 64, 64);
            let p = [0.2, 1.7, 0.9];
            let (pa, pb) = (ca.project(p), cb.project(p));
            assert!((pa[0] - (64.0 - pb[0])).abs() < 1e-12);
            assert!((pa[1] - pb[1]).abs() < 1e-12);
        }
    }
}
