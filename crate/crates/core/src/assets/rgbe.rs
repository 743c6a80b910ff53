//! Radiance RGBE (`.hdr`) codec. Texel `(r, g, b, e)` decodes to
//! `(r, g, b) · 2^(e - 136)`; `e = 0` is black.

use std::io::{BufRead, Read, Write};

use crate::image::HdrImage;
use crate::math::Rgb;

#[derive(Debug, thiserror::Error)]
pub enum RgbeError {
    #[error("bad header: {0}")]
    Header(String),
    #[error("scanline {row}: {message}")]
    Scanline { row: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[inline]
pub fn decode_texel(t: [u8; 4]) -> Rgb {
    if t[3] == 0 {
        return Rgb::ZERO;
    }
    let f = 2f64.powi(t[3] as i32 - 136);
    Rgb::new(t[0] as f64, t[1] as f64, t[2] as f64) * f
}

/// Shared-exponent encoding with round-to-nearest mantissas.
pub fn encode_texel(c: Rgb) -> [u8; 4] {
    let c = c.max(Rgb::ZERO);
    let v = c.max_element();
    if !(v >= 1e-32) || !v.is_finite() {
        return [0; 4];
    }
    // v = m · 2^e with m in [0.5, 1).
    let mut e = v.log2().floor() as i32 + 1;
    let mut scale = 2f64.powi(8 - e);
    if (v * scale).round() >= 256.0 {
        e += 1;
        scale *= 0.5;
    }
    if e + 128 > 255 {
        return [255, 255, 255, 255];
    }
    if e + 128 < 1 {
        return [0; 4];
    }
    let q = |x: f64| (x * scale).round().min(255.0) as u8;
    [q(c.x), q(c.y), q(c.z), (e + 128) as u8]
}

pub fn read<R: BufRead>(mut r: R) -> Result<HdrImage, RgbeError> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    if !(line.starts_with("#?RADIANCE") || line.starts_with("#?RGBE")) {
        return Err(RgbeError::Header("missing #?RADIANCE signature".into()));
    }
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(RgbeError::Header("missing resolution line".into()));
        }
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        if let Some(fmt) = l.strip_prefix("FORMAT=") {
            if fmt != "32-bit_rle_rgbe" {
                return Err(RgbeError::Header(format!("unsupported format {fmt}")));
            }
        }
    }
    line.clear();
    r.read_line(&mut line)?;
    let parts: Vec<&str> = line.split_whitespace().collect();
    let (height, width) = match parts.as_slice() {
        ["-Y", h, "+X", w] => (
            h.parse::<usize>().map_err(|_| RgbeError::Header(format!("bad height `{h}`")))?,
            w.parse::<usize>().map_err(|_| RgbeError::Header(format!("bad width `{w}`")))?,
        ),
        _ => return Err(RgbeError::Header(format!("unsupported orientation `{}`", line.trim_end()))),
    };
    if width == 0 || height == 0 {
        return Err(RgbeError::Header("empty image".into()));
    }
    let mut pixels = Vec::with_capacity(width * height);
    let mut row = vec![[0u8; 4]; width];
    for y in 0..height {
        read_scanline(&mut r, &mut row).map_err(|e| match e {
            RgbeError::Io(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
                RgbeError::Scanline { row: y, message: "truncated".into() }
            }
            RgbeError::Scanline { message, .. } => RgbeError::Scanline { row: y, message },
            other => other,
        })?;
        pixels.extend(row.iter().map(|t| decode_texel(*t)));
    }
    Ok(HdrImage { width, height, pixels })
}

fn read_scanline<R: Read>(r: &mut R, row: &mut [[u8; 4]]) -> Result<(), RgbeError> {
    let width = row.len();
    let mut head = [0u8; 4];
    r.read_exact(&mut head)?;
    let rle = (8..32768).contains(&width) && head[0] == 2 && head[1] == 2 && head[2] & 0x80 == 0;
    if !rle {
        row[0] = head;
        for t in row.iter_mut().skip(1) {
            r.read_exact(t)?;
        }
        return Ok(());
    }
    if ((head[2] as usize) << 8 | head[3] as usize) != width {
        return Err(RgbeError::Scanline { row: 0, message: "scanline width mismatch".into() });
    }
    for ch in 0..4 {
        let mut x = 0;
        while x < width {
            let mut b = [0u8; 1];
            r.read_exact(&mut b)?;
            let count = b[0] as usize;
            if count > 128 {
                let n = count - 128;
                if x + n > width {
                    return Err(RgbeError::Scanline { row: 0, message: "run overflows scanline".into() });
                }
                r.read_exact(&mut b)?;
                for t in &mut row[x..x + n] {
                    t[ch] = b[0];
                }
                x += n;
            } else {
                if count == 0 || x + count > width {
                    return Err(RgbeError::Scanline { row: 0, message: "bad literal length".into() });
                }
                let mut buf = vec![0u8; count];
                r.read_exact(&mut buf)?;
                for (t, v) in row[x..x + count].iter_mut().zip(buf) {
                    t[ch] = v;
                }
                x += count;
            }
        }
    }
    Ok(())
}

/// Writes run-length encoded scanlines when the width allows it.
pub fn write<W: Write>(mut w: W, img: &HdrImage) -> std::io::Result<()> {
    write!(w, "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y {} +X {}\n", img.height, img.width)?;
    let rle = (8..32768).contains(&img.width);
    let mut channel = vec![0u8; img.width];
    for y in 0..img.height {
        let texels: Vec<[u8; 4]> = (0..img.width).map(|x| encode_texel(img.get(x, y))).collect();
        if !rle {
            for t in &texels {
                w.write_all(t)?;
            }
            continue;
        }
        w.write_all(&[2, 2, (img.width >> 8) as u8, (img.width & 0xff) as u8])?;
        for ch in 0..4 {
            for (c, t) in channel.iter_mut().zip(&texels) {
                *c = t[ch];
            }
            write_rle_channel(&mut w, &channel)?;
        }
    }
    Ok(())
}

fn write_rle_channel<W: Write>(w: &mut W, data: &[u8]) -> std::io::Result<()> {
    const MIN_RUN: usize = 4;
    let mut x = 0;
    while x < data.len() {
        // Find the next run of at least MIN_RUN equal bytes.
        let mut run_start = x;
        let mut run_len = 0;
        while run_start < data.len() {
            run_len = 1;
            while run_start + run_len < data.len() && run_len < 127 && data[run_start + run_len] == data[run_start] {
                run_len += 1;
            }
            if run_len >= MIN_RUN {
                break;
            }
            run_start += run_len;
        }
        if run_len < MIN_RUN {
            run_start = data.len();
        }
        while x < run_start {
            let n = (run_start - x).min(128);
            w.write_all(&[n as u8])?;
            w.write_all(&data[x..x + n])?;
            x += n;
        }
        if run_start < data.len() {
            w.write_all(&[128 + run_len as u8, data[run_start]])?;
            x = run_start + run_len;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn texel_arithmetic() {
        assert_eq!(decode_texel([128, 128, 128, 136]), Rgb::splat(128.0));
        assert_eq!(decode_texel([128, 128, 128, 129]), Rgb::ONE);
        assert_eq!(decode_texel([200, 10, 3, 0]), Rgb::ZERO);
        assert_eq!(encode_texel(Rgb::ONE), [128, 128, 128, 129]);
        assert_eq!(encode_texel(Rgb::ZERO), [0; 4]);
    }

    #[test]
    fn encode_decode_relative_error() {
        let mut v = 1e-6;
        while v < 1e6 {
            let c = Rgb::new(v, v * 0.5, v * 0.9);
            let d = decode_texel(encode_texel(c));
            assert!((d - c).abs().max_element() / v < 0.01, "{c} -> {d}");
            v *= 1.37;
        }
    }

    #[test]
    fn file_round_trip_rle_and_flat() {
        for width in [5usize, 64] {
            let img =
                HdrImage::from_fn(
                    width,
                    3,
                    |i, j| {
                        if i % 7 < 4 {
                            Rgb::splat(2.0)
                        } else {
                            Rgb::new(i as f64 * 0.1 + 0.01, j as f64 + 0.5, 3.0)
                        }
                    },
                );
            let mut bytes = Vec::new();
            write(&mut bytes, &img).unwrap();
            let back = read(std::io::Cursor::new(&bytes)).unwrap();
            assert_eq!((back.width, back.height), (width, 3));
            for (a, b) in img.pixels.iter().zip(&back.pixels) {
                assert!((*a - *b).abs().max_element() / a.max_element() < 0.01);
            }
        }
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(read(std::io::Cursor::new(b"P6\n")), Err(RgbeError::Header(_))));
        let mut bytes = Vec::new();
        write(&mut bytes, &HdrImage::filled(16, 4, Rgb::ONE)).unwrap();
        bytes.truncate(bytes.len() - 5);
        assert!(matches!(read(std::io::Cursor::new(&bytes)), Err(RgbeError::Scanline { row: 3, .. })));
    }
}
