//! Static PNG rendering of sweep maps and trajectories. Plots carry no text;
//! the CSV files next to them hold the numbers.

use std::path::Path;

use anyhow::{Context, Result};
use image::{Rgb, RgbImage};

const CELL_PX: u32 = 24;
const BAR_PX: u32 = 16;
const MARGIN: u32 = 8;
const NAN_COLOR: Rgb<u8> = Rgb([128, 128, 128]);
const CONTOUR_COLOR: Rgb<u8> = Rgb([0, 0, 0]);
const ISO_COLOR: Rgb<u8> = Rgb([40, 90, 255]);

/// Viridis control points.
const VIRIDIS: [[f64; 3]; 6] = [
    [68.0, 1.0, 84.0],
    [65.0, 68.0, 135.0],
    [42.0, 120.0, 142.0],
    [34.0, 168.0, 132.0],
    [122.0, 209.0, 81.0],
    [253.0, 231.0, 37.0],
];

pub fn colormap(v: f64) -> Rgb<u8> {
    let x = v.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f64;
    let i = (x.floor() as usize).min(VIRIDIS.len() - 2);
    let f = x - i as f64;
    let c = |k: usize| (VIRIDIS[i][k] + f * (VIRIDIS[i + 1][k] - VIRIDIS[i][k])).round() as u8;
    Rgb([c(0), c(1), c(2)])
}

/// Bilinear interpolation of a grid at fractional cell coordinates;
/// NaN if any contributing corner is missing.
fn bilinear(grid: &[Vec<f64>], r: f64, c: f64) -> f64 {
    let rows = grid.len();
    let cols = grid[0].len();
    let r0 = (r.floor().max(0.0) as usize).min(rows - 1);
    let c0 = (c.floor().max(0.0) as usize).min(cols - 1);
    let r1 = (r0 + 1).min(rows - 1);
    let c1 = (c0 + 1).min(cols - 1);
    let fr = (r - r0 as f64).clamp(0.0, 1.0);
    let fc = (c - c0 as f64).clamp(0.0, 1.0);
    let top = grid[r0][c0] * (1.0 - fc) + grid[r0][c1] * fc;
    let bottom = grid[r1][c0] * (1.0 - fc) + grid[r1][c1] * fc;
    top * (1.0 - fr) + bottom * fr
}

pub struct Heatmap<'a> {
    /// Row-major values; the first row is drawn at the bottom.
    pub values: &'a [Vec<f64>],
    pub range: (f64, f64),
    /// Grid drawn as iso-lines every `step` units.
    pub contours: Option<(&'a [Vec<f64>], f64)>,
    /// Iso-line of `values` at one level.
    pub iso: Option<f64>,
}

impl Heatmap<'_> {
    pub fn render(&self) -> RgbImage {
        let rows = self.values.len().max(1) as u32;
        let cols = self.values.first().map_or(1, Vec::len).max(1) as u32;
        let (w, h) = (cols * CELL_PX, rows * CELL_PX);
        let mut img = RgbImage::from_pixel(w + 3 * MARGIN + BAR_PX, h + 2 * MARGIN, Rgb([255, 255, 255]));
        let (lo, hi) = self.range;
        let span = if hi > lo { hi - lo } else { 1.0 };
        // pixel centers map onto grid coordinates so cell centers hit grid points
        let to_grid = |px: u32, n: u32| ((px as f64 + 0.5) / CELL_PX as f64 - 0.5).clamp(0.0, (n - 1) as f64);
        let sample = |grid: &[Vec<f64>], x: u32, y: u32| bilinear(grid, to_grid(h - 1 - y, rows), to_grid(x, cols));
        let band = |v: f64, step: f64| if v.is_finite() { (v / step).floor() } else { f64::NAN };
        for y in 0..h {
            for x in 0..w {
                let v = sample(self.values, x, y);
                let mut color = if v.is_finite() { colormap((v - lo) / span) } else { NAN_COLOR };
                let edge = |f: &dyn Fn(u32, u32) -> f64| {
                    let here = f(x, y);
                    let right = if x + 1 < w { f(x + 1, y) } else { here };
                    let up = if y + 1 < h { f(x, y + 1) } else { here };
                    here.is_finite() && ((right.is_finite() && right != here) || (up.is_finite() && up != here))
                };
                if let Some((grid, step)) = self.contours {
                    if step > 0.0 && edge(&|a, b| band(sample(grid, a, b), step)) {
                        color = CONTOUR_COLOR;
                    }
                }
                if let Some(level) = self.iso {
                    let side = |a, b| {
                        let v = sample(self.values, a, b);
                        if v.is_finite() {
                            f64::from(u8::from(v >= level))
                        } else {
                            f64::NAN
                        }
                    };
                    if (x / 3 + y / 3) % 2 == 0 && edge(&side) {
                        color = ISO_COLOR;
                    }
                }
                img.put_pixel(x + MARGIN, y + MARGIN, color);
            }
        }
        for y in 0..h {
            let c = colormap(1.0 - y as f64 / (h - 1).max(1) as f64);
            for x in 0..BAR_PX {
                img.put_pixel(w + 2 * MARGIN + x, y + MARGIN, c);
            }
        }
        img
    }
}

/// Line plot of several series on shared axes; each series gets one color.
pub fn line_plot(xs: &[f64], series: &[(&[f64], Rgb<u8>)], y_range: (f64, f64), width: u32, height: u32) -> RgbImage {
    let mut img = RgbImage::from_pixel(width + 2 * MARGIN, height + 2 * MARGIN, Rgb([255, 255, 255]));
    let axis = Rgb([0, 0, 0]);
    for x in 0..width {
        img.put_pixel(x + MARGIN, height - 1 + MARGIN, axis);
    }
    for y in 0..height {
        img.put_pixel(MARGIN, y + MARGIN, axis);
    }
    if xs.len() < 2 {
        return img;
    }
    let (x0, x1) = (xs[0], xs[xs.len() - 1]);
    let (y0, y1) = y_range;
    let px = |x: f64| ((x - x0) / (x1 - x0) * (width - 1) as f64).round() as i64;
    let py = |y: f64| ((1.0 - (y - y0) / (y1 - y0)) * (height - 1) as f64).round() as i64;
    for (ys, color) in series {
        for k in 1..xs.len().min(ys.len()) {
            let (a, b) = ((px(xs[k - 1]), py(ys[k - 1])), (px(xs[k]), py(ys[k])));
            let steps = (b.0 - a.0).abs().max((b.1 - a.1).abs()).max(1);
            for s in 0..=steps {
                let x = a.0 + (b.0 - a.0) * s / steps;
                let y = a.1 + (b.1 - a.1) * s / steps;
                if (0..width as i64).contains(&x) && (0..height as i64).contains(&y) {
                    img.put_pixel(x as u32 + MARGIN, y as u32 + MARGIN, *color);
                }
            }
        }
    }
    img
}

pub fn save(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colormap_endpoints() {
        assert_eq!(colormap(0.0), Rgb([68, 1, 84]));
        assert_eq!(colormap(1.0), Rgb([253, 231, 37]));
        assert_eq!(colormap(-3.0), colormap(0.0));
    }

    #[test]
    fn heatmap_dimensions_and_nan() {
        let values = vec![vec![0.0, 0.5, f64::NAN], vec![1.0, 0.2, 0.3]];
        let img = Heatmap { values: &values, range: (0.0, 1.0), contours: None, iso: Some(0.5) }.render();
        assert_eq!(img.width(), 3 * CELL_PX + 3 * MARGIN + BAR_PX);
        assert_eq!(img.height(), 2 * CELL_PX + 2 * MARGIN);
        // bottom-right cell is the NaN entry of the first row
        assert_eq!(*img.get_pixel(MARGIN + 3 * CELL_PX - 2, MARGIN + 2 * CELL_PX - 2), NAN_COLOR);
    }

    #[test]
    fn contours_are_drawn() {
        let values: Vec<Vec<f64>> = (0..4).map(|r| (0..4).map(|c| (r + c) as f64).collect()).collect();
        let img = Heatmap { values: &values, range: (0.0, 6.0), contours: Some((&values, 2.0)), iso: None }.render();
        assert!(img.pixels().any(|p| *p == CONTOUR_COLOR));
    }

    #[test]
    fn line_plot_marks_series() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [0.0, 1.0, 0.0];
        let red = Rgb([255, 0, 0]);
        let img = line_plot(&xs, &[(&ys, red)], (0.0, 1.0), 50, 40);
        assert!(img.pixels().any(|p| *p == red));
    }
}
