//! PPM/PGM frame and mask files, and the on-disk dataset layout
//! `<root>/<sequence>/frames/%05d.ppm`, `<root>/<sequence>/masks/%05d.pgm`.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder};

use crate::error::{Error, Result};
use crate::mask::MaskSet;
use crate::pipeline::SequenceRecord;
use crate::tensor::Tensor;

pub fn frame_path(seq_dir: &Path, t: usize) -> PathBuf {
    seq_dir.join("frames").join(format!("{t:05}.ppm"))
}

pub fn mask_path(seq_dir: &Path, t: usize) -> PathBuf {
    seq_dir.join("masks").join(format!("{t:05}.pgm"))
}

fn decode(path: &Path) -> Result<image::DynamicImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    image::load_from_memory_with_format(&bytes, image::ImageFormat::Pnm).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads an 8-bit PPM as a `3 × h × w` tensor scaled to `[0, 1]`.
pub fn read_ppm(path: &Path) -> Result<Tensor> {
    let img = decode(path)?;
    if img.color() != image::ColorType::Rgb8 {
        return Err(Error::Input(format!("{}: expected an 8-bit RGB PPM", path.display())));
    }
    let rgb = img.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::Input(format!("{}: empty image", path.display())));
    }
    let mut data = vec![0.0f32; 3 * h * w];
    for (i, px) in rgb.pixels().enumerate() {
        for c in 0..3 {
            data[c * h * w + i] = f32::from(px[c]) / 255.0;
        }
    }
    Tensor::new(vec![3, h, w], data)
}

pub fn write_ppm(path: &Path, frame: &Tensor) -> Result<()> {
    let (c, h, w) = frame.dims3()?;
    if c != 3 {
        return Err(Error::Dimension(format!("PPM needs 3 channels, got {c}")));
    }
    let mut buf = Vec::with_capacity(3 * h * w);
    for i in 0..h * w {
        for ch in 0..3 {
            buf.push((frame.plane(ch)[i].clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    write_pnm(path, &buf, w, h, PnmSubtype::Pixmap(SampleEncoding::Binary), ExtendedColorType::Rgb8)
}

/// Reads an 8-bit PGM whose pixel values are object IDs.
pub fn read_pgm(path: &Path) -> Result<MaskSet> {
    let img = decode(path)?;
    if img.color() != image::ColorType::L8 {
        return Err(Error::Input(format!("{}: expected an 8-bit PGM", path.display())));
    }
    let g = img.to_luma8();
    MaskSet::new(g.height() as usize, g.width() as usize, g.into_raw())
}

pub fn write_pgm(path: &Path, mask: &MaskSet) -> Result<()> {
    write_pnm(
        path,
        mask.labels(),
        mask.width(),
        mask.height(),
        PnmSubtype::Graymap(SampleEncoding::Binary),
        ExtendedColorType::L8,
    )
}

fn write_pnm(path: &Path, buf: &[u8], w: usize, h: usize, subtype: PnmSubtype, color: ExtendedColorType) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    PnmEncoder::new(BufWriter::new(file))
        .with_subtype(subtype)
        .write_image(buf, w as u32, h as u32, color)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

fn count_numbered(dir: &Path, ext: &str) -> Result<usize> {
    let mut n = 0;
    while dir.join(format!("{n:05}.{ext}")).is_file() {
        n += 1;
    }
    if n == 0 {
        return Err(Error::Dataset(format!("no {ext} files found in {}", dir.display())));
    }
    Ok(n)
}

/// Loads one sequence directory. `masks/00000.pgm` is the annotation; if a
/// mask exists for every frame they are kept as ground truth.
pub fn load_sequence(seq_dir: &Path) -> Result<SequenceRecord> {
    let name = seq_dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let n = count_numbered(&seq_dir.join("frames"), "ppm")?;
    let frames = (0..n).map(|t| read_ppm(&frame_path(seq_dir, t))).collect::<Result<Vec<_>>>()?;
    let first_annotation = read_pgm(&mask_path(seq_dir, 0))?;
    let gt = if (0..n).all(|t| mask_path(seq_dir, t).is_file()) {
        Some((0..n).map(|t| read_pgm(&mask_path(seq_dir, t))).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    let rec = SequenceRecord {
        name,
        frames,
        first_annotation,
        gt,
    };
    rec.validate()?;
    Ok(rec)
}

/// Sorted sequence directories under a dataset root.
pub fn list_sequences(root: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let p = entry.path();
        if p.join("frames").is_dir() || p.join("masks").is_dir() {
            dirs.push(p);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Dataset(format!("no sequences under {}", root.display())));
    }
    Ok(dirs)
}

pub fn write_masks(seq_dir: &Path, masks: &[MaskSet]) -> Result<()> {
    for (t, m) in masks.iter().enumerate() {
        write_pgm(&mask_path(seq_dir, t), m)?;
    }
    Ok(())
}

pub fn load_masks(seq_dir: &Path) -> Result<Vec<MaskSet>> {
    let n = count_numbered(&seq_dir.join("masks"), "pgm")?;
    (0..n).map(|t| read_pgm(&mask_path(seq_dir, t))).collect()
}

/// Writes frames and either the full ground truth or just the annotation.
pub fn write_sequence(root: &Path, rec: &SequenceRecord) -> Result<PathBuf> {
    let dir = root.join(&rec.name);
    for (t, f) in rec.frames.iter().enumerate() {
        write_ppm(&frame_path(&dir, t), f)?;
    }
    match &rec.gt {
        Some(gt) => write_masks(&dir, gt)?,
        None => write_pgm(&mask_path(&dir, 0), &rec.first_annotation)?,
    }
    Ok(dir)
}
