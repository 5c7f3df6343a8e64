use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use super::IoError;
use crate::image::Image;

/// Reads an 8-bit RGB or RGBA PNG; alpha is dropped and channels map to `v / 255`.
pub fn load_png(path: impl AsRef<Path>) -> Result<Image, IoError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| IoError::open(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| IoError::malformed_png(path, e))?;
    let info = reader.info();
    if info.bit_depth != BitDepth::Eight {
        return Err(IoError::UnsupportedBitDepth {
            path: path.to_path_buf(),
            depth: info.bit_depth as u8,
        });
    }
    let channels = match info.color_type {
        ColorType::Rgb => 3,
        ColorType::Rgba => 4,
        other => {
            return Err(IoError::UnsupportedColorType {
                path: path.to_path_buf(),
                color_type: format!("{other:?}"),
            })
        }
    };
    let (width, height) = (info.width as usize, info.height as usize);
    let mut buf = vec![
        0u8;
        reader.output_buffer_size().ok_or_else(|| IoError::MalformedPng {
            path: path.to_path_buf(),
            reason: "image too large".into(),
        })?
    ];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| IoError::malformed_png(path, e))?;
    let stride = frame.line_size;
    let mut data = Vec::with_capacity(width * height * 3);
    for row in buf[..frame.buffer_size()].chunks_exact(stride).take(height) {
        for px in row[..width * channels].chunks_exact(channels) {
            data.extend(px[..3].iter().map(|&v| f64::from(v) / 255.0));
        }
    }
    Image::from_vec(height, width, data).map_err(|e| IoError::MalformedPng {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Writes an 8-bit RGB PNG with channels `round(clamp(v) * 255)`.
pub fn save_png(image: &Image, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| IoError::write(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), image.width() as u32, image.height() as u32);
    encoder.set_color(ColorType::Rgb);
    encoder.set_depth(BitDepth::Eight);
    let bytes = to_rgb8(image);
    let mut writer = encoder.write_header().map_err(|e| IoError::encode(path, e))?;
    writer.write_image_data(&bytes).map_err(|e| IoError::encode(path, e))?;
    writer.finish().map_err(|e| IoError::encode(path, e))
}

pub fn to_rgb8(image: &Image) -> Vec<u8> {
    image
        .as_slice()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_at_8_bits() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        let img = Image::from_fn(5, 7, |i, j| [i as f64 / 4.0, j as f64 / 6.0, 0.3337]).unwrap();
        save_png(&img, &p).unwrap();
        let back = load_png(&p).unwrap();
        assert_eq!(to_rgb8(&back), to_rgb8(&img));
        assert_eq!((back.height(), back.width()), (5, 7));
        assert!(back
            .as_slice()
            .iter()
            .all(|v| (v * 255.0).fract() == 0.0 || ((v * 255.0).round() - v * 255.0).abs() < 1e-9));
    }

    #[test]
    fn white_png_is_exactly_one() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.png");
        save_png(&Image::filled(3, 3, [1.0; 3]).unwrap(), &p).unwrap();
        assert!(load_png(&p).unwrap().as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn rgba_alpha_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rgba.png");
        let mut enc = png::Encoder::new(BufWriter::new(File::create(&p).unwrap()), 2, 1);
        enc.set_color(ColorType::Rgba);
        enc.set_depth(BitDepth::Eight);
        let mut w = enc.write_header().unwrap();
        w.write_image_data(&[255, 0, 51, 7, 0, 255, 0, 200]).unwrap();
        w.finish().unwrap();
        let img = load_png(&p).unwrap();
        assert_eq!(img.get(0, 0), [1.0, 0.0, 0.2]);
        assert_eq!(img.get(0, 1), [0.0, 1.0, 0.0]);
    }

    #[test]
    fn distinct_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_png(dir.path().join("missing.png")),
            Err(IoError::NotFound { .. })
        ));

        let junk = dir.path().join("junk.png");
        std::fs::write(&junk, b"definitely not a png").unwrap();
        assert!(matches!(load_png(&junk), Err(IoError::MalformedPng { .. })));

        let deep = dir.path().join("deep.png");
        let mut enc = png::Encoder::new(BufWriter::new(File::create(&deep).unwrap()), 1, 1);
        enc.set_color(ColorType::Rgb);
        enc.set_depth(BitDepth::Sixteen);
        let mut w = enc.write_header().unwrap();
        w.write_image_data(&[0; 6]).unwrap();
        w.finish().unwrap();
        assert!(matches!(
            load_png(&deep),
            Err(IoError::UnsupportedBitDepth { depth: 16, .. })
        ));
    }
}
