//! Heatmap rendering of grid values to PNG.
//!
//! Values are scaled by their maximum and mapped through a fixed 9-anchor
//! viridis ramp; the top PNG row corresponds to the top of the grid (largest
//! y). Rendering is a pure function of the value array, so a dumped grid
//! reproduces its PNG byte for byte.

use crate::error::Result;
use crate::grid::GridDensity;
use std::path::Path;

const VIRIDIS: [[u8; 3]; 9] = [
    [68, 1, 84],
    [72, 40, 120],
    [62, 74, 137],
    [49, 104, 142],
    [38, 130, 142],
    [31, 158, 137],
    [53, 183, 121],
    [109, 205, 89],
    [253, 231, 37],
];

fn colormap(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f64;
    let i = (t.floor() as usize).min(VIRIDIS.len() - 2);
    let frac = t - i as f64;
    let a = VIRIDIS[i];
    let b = VIRIDIS[i + 1];
    [
        (a[0] as f64 + frac * (b[0] as f64 - a[0] as f64)).round() as u8,
        (a[1] as f64 + frac * (b[1] as f64 - a[1] as f64)).round() as u8,
        (a[2] as f64 + frac * (b[2] as f64 - a[2] as f64)).round() as u8,
    ]
}

/// Render row-major values (`ny` rows of `nx`, row 0 at the bottom of the
/// grid) to a PNG file.
pub fn write_values_png(values: &[f64], nx: usize, ny: usize, path: &Path) -> Result<()> {
    assert_eq!(values.len(), nx * ny);
    let max = values.iter().copied().fold(0.0f64, f64::max);
    let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
    let mut img = image::RgbImage::new(nx as u32, ny as u32);
    for (iy, row) in values.chunks(nx).enumerate() {
        let py = (ny - 1 - iy) as u32;
        for (ix, &v) in row.iter().enumerate() {
            img.put_pixel(ix as u32, py, image::Rgb(colormap(v * scale)));
        }
    }
    img.save(path)?;
    Ok(())
}

pub fn write_density_png(density: &GridDensity, path: &Path) -> Result<()> {
    write_values_png(
        density.values(),
        density.grid().nx,
        density.grid().ny,
        path,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;

    #[test]
    fn png_roundtrip_is_deterministic() {
        let grid = Grid2D::new(-1.0, 1.0, -1.0, 1.0, 32, 32);
        let values: Vec<f64> = (0..grid.len()).map(|i| (i % 7) as f64).collect();
        let density = crate::grid::GridDensity::from_values(grid, values).unwrap();
        let dir = std::env::temp_dir();
        let p1 = dir.join("induced_heatmap_test_1.png");
        let p2 = dir.join("induced_heatmap_test_2.png");
        write_density_png(&density, &p1).unwrap();
        write_density_png(&density, &p2).unwrap();
        let b1 = std::fs::read(&p1).unwrap();
        let b2 = std::fs::read(&p2).unwrap();
        assert_eq!(b1, b2);
        let _ = std::fs::remove_file(p1);
        let _ = std::fs::remove_file(p2);
    }
}
