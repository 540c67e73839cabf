//! PNG export of image grids.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const GUTTER: usize = 2;

/// Inverse of the dataset pixel mapping: `(x + 1) · 127.5`, rounded and
/// clamped to `0..=255`.
pub fn unit_to_pixel(x: f32) -> u8 {
    ((x as f64 + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

/// Tiles `[C, H, W]` images (values in `[-1, 1]`) row-major into an 8-bit
/// RGB raster with 2-pixel black gutters between cells. One-channel
/// images are replicated to gray. Returns `(width, height, rgb bytes)`.
pub fn tile_grid(cells: &[Tensor<f32>], rows: usize, cols: usize) -> Result<(usize, usize, Vec<u8>)> {
    if rows == 0 || cols == 0 || cells.len() != rows * cols {
        return Err(Error::invalid(format!(
            "{} cells do not fill a {rows}x{cols} grid",
            cells.len()
        )));
    }
    let shape = cells[0].shape().to_vec();
    let [c, h, w] = match shape[..] {
        [c, h, w] if c == 1 || c == 3 => [c, h, w],
        _ => return Err(Error::shape(format!("grid cells must be [1|3, H, W], got {shape:?}"))),
    };
    let width = cols * w + (cols - 1) * GUTTER;
    let height = rows * h + (rows - 1) * GUTTER;
    let mut rgb = vec![0u8; width * height * 3];
    for (idx, cell) in cells.iter().enumerate() {
        if cell.shape() != shape.as_slice() {
            return Err(Error::shape("grid cells differ in shape"));
        }
        let (r, col) = (idx / cols, idx % cols);
        let (oy, ox) = (r * (h + GUTTER), col * (w + GUTTER));
        let d = cell.data();
        for y in 0..h {
            for x in 0..w {
                for ch in 0..3 {
                    let src = if c == 1 { 0 } else { ch };
                    rgb[((oy + y) * width + ox + x) * 3 + ch] = unit_to_pixel(d[(src * h + y) * w + x]);
                }
            }
        }
    }
    Ok((width, height, rgb))
}

/// Writes a grid PNG carrying `grid_rows` / `grid_cols` text chunks.
pub fn write_png_grid(path: &Path, cells: &[Tensor<f32>], rows: usize, cols: usize) -> Result<()> {
    let (width, height, rgb) = tile_grid(cells, rows, cols)?;
    let file = File::create(path)?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let png_err = |e: png::EncodingError| Error::Format(format!("png encoding: {e}"));
    enc.add_text_chunk("grid_rows".into(), rows.to_string()).map_err(png_err)?;
    enc.add_text_chunk("grid_cols".into(), cols.to_string()).map_err(png_err)?;
    let mut writer = enc.write_header().map_err(png_err)?;
    writer.write_image_data(&rgb).map_err(png_err)?;
    writer.finish().map_err(png_err)?;
    Ok(())
}

/// Reads back `(width, height, rgb, grid_rows, grid_cols)` from a PNG
/// written by [`write_png_grid`].
pub fn read_png_grid(path: &Path) -> Result<(usize, usize, Vec<u8>, Option<usize>, Option<usize>)> {
    let decoder = png::Decoder::new(File::open(path)?);
    let png_err = |e: png::DecodingError| Error::Format(format!("png decoding: {e}"));
    let mut reader = decoder.read_info().map_err(png_err)?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let frame = reader.next_frame(&mut buf).map_err(png_err)?;
    buf.truncate(frame.buffer_size());
    let info = reader.info();
    let text = |key: &str| {
        info.uncompressed_latin1_text
            .iter()
            .find(|t| t.keyword == key)
            .and_then(|t| t.text.parse().ok())
    };
    Ok((
        frame.width as usize,
        frame.height as usize,
        buf,
        text("grid_rows"),
        text("grid_cols"),
    ))
}
