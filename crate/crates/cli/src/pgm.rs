//! Binary PGM (P5) image grids: no codec dependency, trivially parseable.

use snsgan_core::error::{Error, Result};
use std::io::Write;
use std::path::Path;

/// Packs `count` grayscale images (values in [-1, 1], row-major h*w each)
/// into a near-square tile grid and writes a P5 file with a one-pixel gap
/// between tiles.
pub fn write_grid(
    path: impl AsRef<Path>,
    images: &[f64],
    count: usize,
    h: usize,
    w: usize,
    seed: u64,
    class: usize,
) -> Result<()> {
    if images.len() != count * h * w {
        return Err(Error::shape(format!(
            "pgm grid: {} values do not hold {count} images of {h}x{w}",
            images.len()
        )));
    }
    let cols = (count as f64).sqrt().ceil() as usize;
    let rows = count.div_ceil(cols);
    let gap = 1usize;
    let grid_w = cols * w + (cols - 1) * gap;
    let grid_h = rows * h + (rows - 1) * gap;
    let mut pixels = vec![0u8; grid_w * grid_h];
    for (i, img) in images.chunks_exact(h * w).enumerate() {
        let (r, c) = (i / cols, i % cols);
        let (y0, x0) = (r * (h + gap), c * (w + gap));
        for y in 0..h {
            for x in 0..w {
                let v = ((img[y * w + x] + 1.0) / 2.0 * 255.0).round().clamp(0.0, 255.0);
                pixels[(y0 + y) * grid_w + x0 + x] = v as u8;
            }
        }
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "P5\n# seed={seed} class={class}\n{grid_w} {grid_h}\n255\n")?;
    out.write_all(&pixels)?;
    out.flush()?;
    Ok(())
}

/// Minimal P5 parser for round-trip checks: returns (width, height, pixels).
pub fn read_p5(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u8>)> {
    let data = std::fs::read(path.as_ref())?;
    let mut pos = 0usize;

    let token = |data: &[u8], pos: &mut usize| -> Result<String> {
        // skip whitespace and comment lines
        loop {
            while *pos < data.len() && data[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < data.len() && data[*pos] == b'#' {
                while *pos < data.len() && data[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(Error::format("pgm: truncated header".to_string()));
        }
        Ok(String::from_utf8_lossy(&data[start..*pos]).into_owned())
    };

    if token(&data, &mut pos)? != "P5" {
        return Err(Error::format("pgm: missing P5 magic".to_string()));
    }
    let w: usize = token(&data, &mut pos)?
        .parse()
        .map_err(|_| Error::format("pgm: bad width".to_string()))?;
    let h: usize = token(&data, &mut pos)?
        .parse()
        .map_err(|_| Error::format("pgm: bad height".to_string()))?;
    let maxval: usize = token(&data, &mut pos)?
        .parse()
        .map_err(|_| Error::format("pgm: bad maxval".to_string()))?;
    if maxval != 255 {
        return Err(Error::format(format!("pgm: unsupported maxval {maxval}")));
    }
    pos += 1; // the single whitespace byte after maxval
    if data.len() < pos + w * h {
        return Err(Error::format(format!(
            "pgm: payload holds {} bytes, header promises {}",
            data.len().saturating_sub(pos),
            w * h
        )));
    }
    Ok((w, h, data[pos..pos + w * h].to_vec()))
}
