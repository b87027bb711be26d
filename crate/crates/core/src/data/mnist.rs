use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::problems::CcaProblem;

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const SIDE: usize = 28;

/// Raw IDX3 image file contents, row-major pixels per image.
#[derive(Debug, Clone)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format("truncated IDX header".into()))?;
    Ok(u32::from_be_bytes(buf))
}

pub fn parse_idx_images<R: Read>(mut r: R) -> Result<IdxImages> {
    let magic = read_u32(&mut r)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "bad IDX magic {magic:#010x}, expected {IDX_IMAGE_MAGIC:#010x}"
        )));
    }
    let count = read_u32(&mut r)? as usize;
    let rows = read_u32(&mut r)? as usize;
    let cols = read_u32(&mut r)? as usize;
    let len = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::Format("IDX dimensions overflow".into()))?;
    let mut pixels = Vec::with_capacity(len);
    r.take(len as u64).read_to_end(&mut pixels)?;
    if pixels.len() != len {
        return Err(Error::Format(format!(
            "IDX payload has {} bytes, header promises {len}",
            pixels.len()
        )));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

/// Left and right image halves as `(rows·cols/2)×count` matrices, pixels
/// scaled to `[0, 1]` and each row centered.
pub fn split_halves(images: &IdxImages) -> Result<(Mat, Mat)> {
    if images.rows != SIDE || images.cols != SIDE {
        return Err(Error::Format(format!(
            "expected {SIDE}x{SIDE} images, got {}x{}",
            images.rows, images.cols
        )));
    }
    if images.count < 2 {
        return Err(Error::Format("need at least two images".into()));
    }
    let half = SIDE / 2;
    let dim = SIDE * half;
    let mut left = Mat::zeros(dim, images.count);
    let mut right = Mat::zeros(dim, images.count);
    for (k, img) in images.pixels.chunks_exact(SIDE * SIDE).enumerate() {
        for r in 0..SIDE {
            for c in 0..half {
                left[(r * half + c, k)] = img[r * SIDE + c] as f64 / 255.0;
                right[(r * half + c, k)] = img[r * SIDE + half + c] as f64 / 255.0;
            }
        }
    }
    for m in [&mut left, &mut right] {
        let mean = m.column_mean();
        for mut col in m.column_iter_mut() {
            col -= &mean;
        }
    }
    Ok((left, right))
}

/// Reads an IDX3 image file and builds the left/right-half CCA problem.
pub fn load_mnist_split(path: impl AsRef<Path>, ridge: Option<f64>) -> Result<CcaProblem> {
    let images = parse_idx_images(BufReader::new(File::open(path)?))?;
    let (left, right) = split_halves(&images)?;
    CcaProblem::new(left, right, ridge)
}
