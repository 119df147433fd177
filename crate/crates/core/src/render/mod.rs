//! Offscreen multiview rendering of thresholded density fields: six
//! orthographic views with depth-encoded Viridis colouring, a colorbar strip
//! and overlay glyphs for loads and supports.

mod camera;
mod raster;
mod surface;
mod viridis;

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::fem::{DirichletBc, LoadCase};
use crate::mesh::StructuredMesh;

pub use camera::{ViewCamera, ViewId};
pub use raster::{Canvas, Image, Rgba};
pub use surface::{extract_surface, solid_mask, SurfaceMesh};
pub use viridis::VIRIDIS;

pub const BACKGROUND: Rgba = [255, 255, 255, 255];
pub const FORCE_COLOR: Rgba = [220, 20, 60, 255];
pub const SUPPORT_COLOR: Rgba = [255, 128, 0, 255];
pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const MANIFEST_FILE: &str = "views.json";

/// Linearly interpolated Viridis at `t ∈ [0, 1]`.
pub fn viridis(t: f64) -> [f32; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let pos = t * 255.0;
    let i = (pos.floor() as usize).min(254);
    let f = (pos - i as f64) as f32;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]), a[2] + f * (b[2] - a[2])]
}

fn to_rgba(c: [f32; 3]) -> Rgba {
    let q = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    [q(c[0]), q(c[1]), q(c[2]), 255]
}

/// Relative luminance of an 8-bit sRGB colour on the gamma-encoded values.
pub fn luminance(c: Rgba) -> f64 {
    0.2126 * c[0] as f64 + 0.7152 * c[1] as f64 + 0.0722 * c[2] as f64
}

/// Per-vertex colours `Viridis(1 − d)` with `d` the depth along the view
/// direction normalised over all vertices, so nearer vertices are brighter.
/// Returns the colours and the raw depth range.
pub fn depth_colorize(surface: &SurfaceMesh, camera: &ViewCamera) -> (Vec<[f32; 3]>, [f64; 2]) {
    if surface.vertices.is_empty() {
        return (Vec::new(), [0.0, 0.0]);
    }
    let depths: Vec<f64> = surface.vertices.iter().map(|p| camera.project(*p)[2]).collect();
    let lo = depths.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = depths.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let colors = depths
        .iter()
        .map(|z| if range > 0.0 { viridis(1.0 - (z - lo) / range) } else { viridis(1.0) })
        .collect();
    (colors, [lo, hi])
}

/// Loads and supports to overlay, per node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Glyphs {
    pub forces: Vec<([f64; 3], [f64; 3])>,
    pub supports: Vec<([f64; 3], [bool; 3])>,
    /// Approximate element edge length in model units.
    pub element_size: f64,
}

impl Glyphs {
    pub fn from_problem(mesh: &StructuredMesh, loads: &[LoadCase], bcs: &[DirichletBc]) -> Self {
        let h = mesh.spacing();
        let element_size = (h[0] + h[1] + h[2]) / 3.0;
        let mut forces = Vec::new();
        for load in loads {
            let nodes = load.select.select(mesh);
            if nodes.is_empty() {
                continue;
            }
            let share = load.force.as_array().map(|f| f / nodes.len() as f64);
            forces.extend(nodes.into_iter().map(|n| (mesh.node_coords(n), share)));
        }
        let mut mask = vec![[false; 3]; mesh.num_nodes()];
        for bc in bcs {
            let dofs = bc.dofs.as_array();
            for n in bc.select.select(mesh) {
                for d in 0..3 {
                    mask[n][d] |= dofs[d];
                }
            }
        }
        let supports = mask
            .iter()
            .enumerate()
            .filter(|(_, m)| m.iter().any(|b| *b))
            .map(|(n, m)| (mesh.node_coords(n), *m))
            .collect();
        Self { forces, supports, element_size }
    }

    pub fn is_empty(&self) -> bool {
        self.forces.is_empty() && self.supports.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderOptions {
    pub width: usize,
    pub height: usize,
    pub threshold: f64,
    pub colorbar: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { width: 1920, height: 1080, threshold: DEFAULT_THRESHOLD, colorbar: true }
    }
}

impl RenderOptions {
    /// Width of the geometry viewport; the colorbar occupies the rest.
    pub fn viewport_width(&self) -> usize {
        if self.colorbar {
            self.width - (self.width / 16).max(8).min(self.width / 2)
        } else {
            self.width
        }
    }
}

fn draw_colorbar(img: &mut Image, viewport_w: usize) {
    let reserve = img.width - viewport_w;
    let (x0, x1) = (viewport_w + reserve / 3, viewport_w + (2 * reserve) / 3);
    let (y0, y1) = (img.height / 8, img.height - img.height / 8);
    if x1 <= x0 + 2 || y1 <= y0 + 2 {
        return;
    }
    raster::fill_rect(img, x0 - 1, y0 - 1, x1 + 1, y1 + 1, [0, 0, 0, 255]);
    for y in y0..y1 {
        // Top of the strip is the nearest depth.
        let t = 1.0 - (y - y0) as f64 / (y1 - y0 - 1).max(1) as f64;
        raster::fill_rect(img, x0, y, x1, y + 1, to_rgba(viridis(t)));
    }
}

fn draw_glyphs(img: &mut Image, glyphs: &Glyphs, camera: &ViewCamera) {
    let elem_px = glyphs.element_size * camera.scale;
    let marker = (0.6 * elem_px).clamp(3.0, 10.0);

    let mut seen = HashSet::new();
    for (p, m) in &glyphs.supports {
        let s = camera.project(*p);
        for (axis, fixed) in m.iter().enumerate() {
            if !*fixed {
                continue;
            }
            let mut e = [0.0; 3];
            e[axis] = 1.0;
            let d = camera.project_direction(e);
            let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
            let key = (s[0].round() as i64, s[1].round() as i64, axis);
            if !seen.insert(key) {
                continue;
            }
            if len < 1e-9 {
                raster::draw_ring(img, [s[0], s[1]], 0.5 * marker, SUPPORT_COLOR);
                continue;
            }
            // Triangle pointing at the node along the fixed axis.
            let (ux, uy) = (d[0] / len, d[1] / len);
            let base = [s[0] + ux * marker, s[1] + uy * marker];
            let half = 0.5 * marker;
            raster::fill_overlay_triangle(
                img,
                [[s[0], s[1]], [base[0] - uy * half, base[1] + ux * half], [base[0] + uy * half, base[1] - ux * half]],
                SUPPORT_COLOR,
            );
        }
    }

    let fmax = glyphs.forces.iter().map(|(_, f)| (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt()).fold(0.0, f64::max);
    if fmax == 0.0 {
        return;
    }
    let cap = (4.0 * elem_px).clamp(12.0, 80.0);
    let mut seen = HashSet::new();
    for (p, f) in &glyphs.forces {
        let mag = (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt();
        if mag == 0.0 {
            continue;
        }
        let s = camera.project(*p);
        if !seen.insert((s[0].round() as i64, s[1].round() as i64)) {
            continue;
        }
        let d = camera.project_direction(f.map(|v| v / mag));
        let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
        if len < 1e-9 * camera.scale {
            raster::draw_ring(img, [s[0], s[1]], 0.5 * marker, FORCE_COLOR);
            continue;
        }
        let (ux, uy) = (d[0] / len, d[1] / len);
        let length = (cap * mag / fmax).max(6.0);
        let tail = [s[0] - ux * length, s[1] - uy * length];
        let head = 0.35 * length;
        let neck = [s[0] - ux * head, s[1] - uy * head];
        raster::draw_line(img, tail, neck, 1, FORCE_COLOR);
        raster::fill_overlay_triangle(
            img,
            [[s[0], s[1]], [neck[0] - uy * 0.5 * head, neck[1] + ux * 0.5 * head], [neck[0] + uy * 0.5 * head, neck[1] - ux * 0.5 * head]],
            FORCE_COLOR,
        );
    }
}

/// Rasterises one view: z-buffered flat faces coloured by the mean of their
/// vertex colours, then glyphs and the colorbar.
pub fn render_view(
    surface: &SurfaceMesh,
    colors: &[[f32; 3]],
    glyphs: &Glyphs,
    camera: &ViewCamera,
    options: &RenderOptions,
) -> Image {
    assert_eq!(colors.len(), surface.vertices.len(), "one colour per vertex");
    let mut img = Image::new(options.width, options.height, BACKGROUND);
    let vw = options.viewport_width();
    {
        let mut canvas = Canvas::new(&mut img, vw);
        let screen: Vec<[f64; 3]> = surface.vertices.iter().map(|p| camera.project(*p)).collect();
        for t in &surface.triangles {
            let [a, b, c] = t.map(|i| i as usize);
            let mut mean = [0.0f32; 3];
            for k in 0..3 {
                mean[k] = (colors[a][k] + colors[b][k] + colors[c][k]) / 3.0;
            }
            canvas.fill_triangle([screen[a], screen[b], screen[c]], to_rgba(mean));
        }
    }
    draw_glyphs(&mut img, glyphs, camera);
    if options.colorbar {
        draw_colorbar(&mut img, vw);
    }
    img
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedView {
    pub view: ViewId,
    pub camera: ViewCamera,
    pub depth_range: [f64; 2],
    pub image: Image,
}

/// Six labelled renders of one design.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiviewRenderSet {
    pub views: Vec<RenderedView>,
    pub options: RenderOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewRecord {
    pub view: ViewId,
    pub file: String,
    pub camera: ViewCamera,
    pub depth_range: [f64; 2],
}

/// Sidecar describing a saved render set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderManifest {
    pub options: RenderOptions,
    pub views: Vec<ViewRecord>,
}

impl RenderManifest {
    pub fn load(dir: &Path) -> io::Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    /// PNG bytes of every view in manifest order.
    pub fn read_pngs(&self, dir: &Path) -> io::Result<Vec<(ViewId, Vec<u8>)>> {
        self.views.iter().map(|v| Ok((v.view, fs::read(dir.join(&v.file))?))).collect()
    }
}

impl MultiviewRenderSet {
    pub fn get(&self, view: ViewId) -> Option<&RenderedView> {
        self.views.iter().find(|v| v.view == view)
    }

    /// Writes `{view}.png` per view and the JSON sidecar into `dir`.
    pub fn save(&self, dir: &Path) -> io::Result<RenderManifest> {
        fs::create_dir_all(dir)?;
        let mut views = Vec::new();
        for v in &self.views {
            let file = format!("{}.png", v.view);
            fs::write(dir.join(&file), v.image.to_png()?)?;
            views.push(ViewRecord { view: v.view, file, camera: v.camera, depth_range: v.depth_range });
        }
        let manifest = RenderManifest { options: self.options, views };
        let text = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
        fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(manifest)
    }
}

/// Renders the six axis-aligned views of the design `densities` (projected
/// densities, one per element), with cameras fitted to the mesh domain.
pub fn render_sixpack(
    densities: &[f64],
    mesh: &StructuredMesh,
    loads: &[LoadCase],
    bcs: &[DirichletBc],
    options: &RenderOptions,
) -> MultiviewRenderSet {
    let surface = extract_surface(densities, mesh, options.threshold);
    let glyphs = Glyphs::from_problem(mesh, loads, bcs);
    let hi = mesh.extents();
    let views = std::thread::scope(|scope| {
        let handles: Vec<_> = ViewId::ALL
            .into_iter()
            .map(|view| {
                let (surface, glyphs) = (&surface, &glyphs);
                scope.spawn(move || {
                    let camera = ViewCamera::fit(view, [0.0; 3], hi, options.viewport_width(), options.height);
                    let (colors, depth_range) = depth_colorize(surface, &camera);
                    let image = render_view(surface, &colors, glyphs, &camera, options);
                    RenderedView { view, camera, depth_range, image }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("render thread panicked")).collect()
    });
    MultiviewRenderSet { views, options: *options }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::phone_stand;

    fn small() -> RenderOptions {
        RenderOptions { width: 320, height: 180, threshold: 0.5, colorbar: false }
    }

    #[test]
    fn viridis_endpoints_and_interpolation() {
        assert_eq!(viridis(0.0), VIRIDIS[0]);
        assert_eq!(viridis(1.0), VIRIDIS[255]);
        let mid = viridis(0.5 / 255.0);
        for k in 0..3 {
            assert!((mid[k] - 0.5 * (VIRIDIS[0][k] + VIRIDIS[1][k])).abs() < 1e-6);
        }
        assert!(luminance(to_rgba(viridis(1.0))) > luminance(to_rgba(viridis(0.0))));
    }

    #[test]
    fn single_voxel_depth_endpoints() {
        let mesh = StructuredMesh::new(1, 1, 1, 1.0, 1.0, 1.0).unwrap();
        let s = extract_surface(&[1.0], &mesh, 0.5);
        let cam = ViewCamera::fit(ViewId::Front, [0.0; 3], [1.0; 3], 100, 100);
        let (colors, range) = depth_colorize(&s, &cam);
        assert_eq!(range, [-0.5, 0.5]);
        for (p, c) in s.vertices.iter().zip(&colors) {
            assert_eq!(*c, if p[2] == 1.0 { viridis(1.0) } else { viridis(0.0) });
        }
    }

    #[test]
    fn flat_scene_is_uniformly_bright() {
        let s = SurfaceMesh { vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], triangles: vec![[0, 1, 2]], scalars: None };
        let cam = ViewCamera::fit(ViewId::Front, [0.0; 3], [1.0; 3], 10, 10);
        assert!(depth_colorize(&s, &cam).0.iter().all(|c| *c == viridis(1.0)));
    }

    #[test]
    fn empty_surface_renders_background() {
        let mesh = StructuredMesh::new(2, 2, 2, 1.0, 1.0, 1.0).unwrap();
        let set = render_sixpack(&[0.0; 8], &mesh, &[], &[], &small());
        assert_eq!(set.views.len(), 6);
        for v in &set.views {
            assert!(v.image.data.chunks(4).all(|p| p == BACKGROUND));
        }
    }

    #[test]
    fn unit_cube_projects_to_predicted_square() {
        let mesh = StructuredMesh::new(1, 1, 1, 1.0, 1.0, 1.0).unwrap();
        let opts = RenderOptions { width: 200, height: 100, threshold: 0.5, colorbar: false };
        let s = extract_surface(&[1.0], &mesh, 0.5);
        let cam = ViewCamera::fit(ViewId::Front, [0.0; 3], [1.0; 3], 200, 100);
        let (colors, _) = depth_colorize(&s, &cam);
        let img = render_view(&s, &colors, &Glyphs::default(), &cam, &opts);
        // Side length 0.85 · 100 px centred at (100, 50): centres in [57.5, 142.5) × [7.5, 92.5).
        let face = to_rgba(viridis(1.0));
        for y in 0..100 {
            for x in 0..200 {
                let inside = (57..=142).contains(&x) && (7..=92).contains(&y);
                let expect = if inside { face } else { BACKGROUND };
                assert_eq!(img.pixel(x, y), expect, "pixel ({x}, {y})");
            }
        }
    }

    fn region_luminance(img: &Image, cam: &ViewCamera, lo: [f64; 3], hi: [f64; 3]) -> f64 {
        let a = cam.project(lo);
        let b = cam.project(hi);
        let (x0, x1) = (a[0].min(b[0]).ceil() as usize + 1, a[0].max(b[0]).floor() as usize - 1);
        let (y0, y1) = (a[1].min(b[1]).ceil() as usize + 1, a[1].max(b[1]).floor() as usize - 1);
        let mut sum = 0.0;
        let mut n = 0.0;
        for y in y0..y1 {
            for x in x0..x1 {
                sum += luminance(img.pixel(x, y));
                n += 1.0;
            }
        }
        sum / n
    }

    #[test]
    fn nearer_voxel_is_brighter_and_reversal_swaps() {
        let mesh = StructuredMesh::new(2, 1, 2, 2.0, 1.0, 2.0).unwrap();
        let mut d = vec![0.0; 4];
        d[mesh.element_index(0, 0, 1)] = 1.0;
        d[mesh.element_index(1, 0, 0)] = 1.0;
        let opts = small();
        let set = render_sixpack(&d, &mesh, &[], &[], &opts);
        let front = set.get(ViewId::Front).unwrap();
        let back = set.get(ViewId::Back).unwrap();
        let near_f = region_luminance(&front.image, &front.camera, [0.0, 0.0, 2.0], [1.0, 1.0, 2.0]);
        let far_f = region_luminance(&front.image, &front.camera, [1.0, 0.0, 1.0], [2.0, 1.0, 1.0]);
        assert!(near_f > far_f);
        let near_b = region_luminance(&back.image, &back.camera, [1.0, 0.0, 0.0], [2.0, 1.0, 0.0]);
        let far_b = region_luminance(&back.image, &back.camera, [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]);
        assert_eq!(near_b, near_f);
        assert_eq!(far_b, far_f);
    }

    #[test]
    fn rendering_is_byte_deterministic() {
        let spec = phone_stand().coarsened(8);
        let n = spec.mesh.num_elements();
        let d: Vec<f64> = (0..n).map(|e| ((e * 7919) % 13) as f64 / 12.0).collect();
        let opts = RenderOptions { width: 256, height: 144, ..Default::default() };
        let a = render_sixpack(&d, &spec.mesh, &spec.loads, &spec.bcs, &opts);
        let b = render_sixpack(&d, &spec.mesh, &spec.loads, &spec.bcs, &opts);
        for (x, y) in a.views.iter().zip(&b.views) {
            assert_eq!(x.image.to_png().unwrap(), y.image.to_png().unwrap());
        }
    }

    #[test]
    fn support_markers_line_the_bottom_of_the_front_view() {
        let spec = phone_stand().coarsened(4);
        let n = spec.mesh.num_elements();
        let opts = RenderOptions { width: 640, height: 360, ..Default::default() };
        let set = render_sixpack(&vec![1.0; n], &spec.mesh, &spec.loads, &spec.bcs, &opts);
        let front = set.get(ViewId::Front).unwrap();
        let y0 = front.camera.project([0.5, 0.0, 0.0])[1];
        let near_bottom = (0..front.image.width)
            .flat_map(|x| ((y0 as usize).saturating_sub(12)..(y0 as usize + 12)).map(move |y| (x, y)))
            .filter(|&(x, y)| front.image.pixel(x, y) == SUPPORT_COLOR)
            .count();
        assert!(near_bottom > 50, "{near_bottom}");
        assert!(front.image.data.chunks(4).any(|p| p == FORCE_COLOR));
    }

    #[test]
    fn bare_geometry_has_no_glyph_colours() {
        let spec = phone_stand().coarsened(8);
        let n = spec.mesh.num_elements();
        let set = render_sixpack(&vec![1.0; n], &spec.mesh, &[], &[], &RenderOptions { width: 256, height: 144, ..Default::default() });
        for v in &set.views {
            assert!(v.image.data.chunks(4).all(|p| p != FORCE_COLOR && p != SUPPORT_COLOR));
            assert!(v.image.data.chunks(4).any(|p| p != BACKGROUND));
        }
    }

    #[test]
    fn mirror_symmetric_solid_gives_mirrored_front_and_back() {
        let mesh = StructuredMesh::new(6, 5, 4, 1.2, 1.0, 0.8).unwrap();
        let mut d = vec![0.0; mesh.num_elements()];
        for e in 0..mesh.num_elements() {
            let [i, j, k] = mesh.element_ijk(e);
            let kk = k.min(3 - k);
            if (i * 3 + j * 5 + kk * 7) % 4 != 0 {
                d[e] = 1.0;
            }
        }
        let opts = RenderOptions { width: 300, height: 200, ..Default::default() };
        let set = render_sixpack(&d, &mesh, &[], &[], &opts);
        let (f, b) = (&set.get(ViewId::Front).unwrap().image, &set.get(ViewId::Back).unwrap().image);
        let vw = opts.viewport_width();
        for y in 0..f.height {
            for x in 0..vw {
                assert_eq!(f.pixel(x, y), b.pixel(vw - 1 - x, y));
            }
        }
    }

    #[test]
    fn saved_sets_reload() {
        let mesh = StructuredMesh::new(2, 2, 1, 1.0, 1.0, 0.5).unwrap();
        let set = render_sixpack(&[1.0, 0.0, 1.0, 1.0], &mesh, &[], &[], &small());
        let dir = tempfile::tempdir().unwrap();
        let manifest = set.save(dir.path()).unwrap();
        assert_eq!(RenderManifest::load(dir.path()).unwrap(), manifest);
        let pngs = manifest.read_pngs(dir.path()).unwrap();
        assert_eq!(pngs.len(), 6);
        assert_eq!(Image::from_png(&pngs[0].1).unwrap(), set.views[0].image);
    }
}
