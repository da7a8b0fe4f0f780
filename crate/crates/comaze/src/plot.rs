//! Correlation heatmaps rendered as PNG.

use std::path::Path;

use anyhow::Result;

const CELL_PX: usize = 32;
const MISSING: [u8; 3] = [160, 160, 160];

/// Blue at -1, white at 0, red at +1.
pub fn diverging(v: f64) -> [u8; 3] {
    let t = v.clamp(-1.0, 1.0);
    let fade = |k: f64| (255.0 * (1.0 - k)).round() as u8;
    if t >= 0.0 {
        [255, fade(t), fade(t)]
    } else {
        [fade(-t), fade(-t), 255]
    }
}

/// Renders `cells[row][col]`; `None` cells are drawn gray.
pub fn heatmap_png(cells: &[Vec<Option<f64>>]) -> Result<Vec<u8>> {
    let rows = cells.len();
    let cols = cells.first().map_or(0, Vec::len);
    let (w, h) = (cols * CELL_PX, rows * CELL_PX);
    let mut pixels = vec![0u8; w * h * 3];
    for (r, row) in cells.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            let rgb = cell.map_or(MISSING, diverging);
            for py in r * CELL_PX..(r + 1) * CELL_PX {
                for px in c * CELL_PX..(c + 1) * CELL_PX {
                    let i = (py * w + px) * 3;
                    pixels[i..i + 3].copy_from_slice(&rgb);
                }
            }
        }
    }
    let mut out = Vec::new();
    let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    enc.write_header()?.write_image_data(&pixels)?;
    Ok(out)
}

pub fn write_heatmap(path: &Path, cells: &[Vec<Option<f64>>]) -> Result<()> {
    std::fs::write(path, heatmap_png(cells)?)?;
    Ok(())
}
