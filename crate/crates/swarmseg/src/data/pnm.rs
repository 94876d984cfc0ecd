//! Binary PPM (P6) and PGM (P5) image I/O at 8 bits per sample.
//!
//! Three-channel tensors round-trip through P6, single-channel masks through
//! P5. Values map linearly between [0,1] and 0..=255, so any tensor already
//! quantized to the 8-bit grid survives a save/load cycle exactly.

use crate::error::{Error, Result};
use crate::tensor::{Real, Shape4, Tensor4};
use std::path::Path;

/// Writes a [1,3,h,w] tensor as P6 or a [1,1,h,w] tensor as P5.
pub fn save_image<T: Real>(path: &Path, t: &Tensor4<T>) -> Result<()> {
    let s = t.shape;
    if s.n != 1 || (s.c != 1 && s.c != 3) {
        return Err(Error::InvalidArgument(format!(
            "save_image expects [1,1,h,w] or [1,3,h,w], got {s}"
        )));
    }
    let magic = if s.c == 3 { "P6" } else { "P5" };
    let mut bytes = format!("{magic}\n{} {}\n255\n", s.w, s.h).into_bytes();
    bytes.reserve(s.c * s.h * s.w);
    for y in 0..s.h {
        for x in 0..s.w {
            for c in 0..s.c {
                let v = t.at(0, c, y, x).to_f64_lossy().clamp(0.0, 1.0);
                bytes.push((v * 255.0).round() as u8);
            }
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a str,
}

impl<'a> HeaderCursor<'a> {
    /// Next whitespace-delimited token, skipping '#' comment lines.
    fn token(&mut self) -> Result<&'a [u8]> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedHeader {
                path: self.path.to_string(),
                detail: "unexpected end of header".into(),
            });
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::MalformedHeader {
                path: self.path.to_string(),
                detail: format!("{what} is not a number: {:?}", String::from_utf8_lossy(tok)),
            })
    }
}

/// Reads a P6 file into [1,3,h,w] or a P5 file into [1,1,h,w].
pub fn load_image<T: Real>(path: &Path) -> Result<Tensor4<T>> {
    let display = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|e| Error::io(display.clone(), e))?;
    let mut cur = HeaderCursor {
        bytes: &bytes,
        pos: 0,
        path: &display,
    };
    let magic = cur.token().map_err(|_| Error::BadMagic {
        path: display.clone(),
        expected: "P5 or P6".into(),
        found: "empty file".into(),
    })?;
    let channels = match magic {
        b"P6" => 3,
        b"P5" => 1,
        other => {
            let found = String::from_utf8_lossy(other).into_owned();
            return Err(Error::BadMagic {
                path: display,
                expected: "P5 or P6".into(),
                found,
            });
        }
    };
    let w = cur.number("width")?;
    let h = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if w == 0 || h == 0 {
        return Err(Error::MalformedHeader {
            path: display,
            detail: format!("degenerate dimensions {w}x{h}"),
        });
    }
    if maxval != 255 {
        return Err(Error::MalformedHeader {
            path: display,
            detail: format!("unsupported maxval {maxval}, only 255 is handled"),
        });
    }
    // Exactly one whitespace byte separates header from payload.
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(Error::MalformedHeader {
            path: display,
            detail: "missing separator before payload".into(),
        });
    }
    let payload = &bytes[cur.pos + 1..];
    let expected = w * h * channels;
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            path: display,
            expected,
            got: payload.len(),
        });
    }

    let scale = 1.0 / 255.0;
    let mut t = Tensor4::<T>::zeros(Shape4::new(1, channels, h, w));
    for y in 0..h {
        for x in 0..w {
            for c in 0..channels {
                let b = payload[(y * w + x) * channels + c];
                *t.at_mut(0, c, y, x) = T::from_f64_lossy(b as f64 * scale);
            }
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use tempfile::tempdir;

    fn quantized_tensor(shape: Shape4, seed: u64) -> Tensor4<f32> {
        let mut r = rng::stream(seed, &[shape.len() as u64]);
        Tensor4 {
            shape,
            data: (0..shape.len())
                .map(|_| r.random_range(0..=255u32) as f32 / 255.0)
                .collect(),
        }
    }

    #[test]
    fn ppm_round_trip_exact() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("img.ppm");
        let t = quantized_tensor(Shape4::new(1, 3, 5, 7), 1);
        save_image(&p, &t).unwrap();
        let back: Tensor4<f32> = load_image(&p).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn pgm_round_trip_exact_and_binary_masks_stay_binary() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("mask.pgm");
        let t = Tensor4::from_vec(
            Shape4::new(1, 1, 2, 2),
            vec![0.0f64, 1.0, 1.0, 0.0],
        )
        .unwrap();
        save_image(&p, &t).unwrap();
        let back: Tensor4<f64> = load_image(&p).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn gray_128_maps_linearly() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("gray.pgm");
        std::fs::write(&p, [b"P5\n1 1\n255\n".as_ref(), &[128u8]].concat()).unwrap();
        let t: Tensor4<f64> = load_image(&p).unwrap();
        assert!((t.data[0] - 128.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn header_comments_and_whitespace_tolerated() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("c.pgm");
        std::fs::write(
            &p,
            [b"P5 # magic\n# a comment line\n  2\t1 # dims\n255\n".as_ref(), &[7u8, 9]].concat(),
        )
        .unwrap();
        let t: Tensor4<f64> = load_image(&p).unwrap();
        assert_eq!(t.shape, Shape4::new(1, 1, 1, 2));
    }

    #[test]
    fn distinct_errors_for_distinct_corruption() {
        let dir = tempdir().unwrap();

        let p = dir.path().join("bad_magic.pgm");
        std::fs::write(&p, b"P4\n1 1\n255\nx").unwrap();
        assert!(matches!(
            load_image::<f64>(&p),
            Err(Error::BadMagic { .. })
        ));

        let p = dir.path().join("bad_header.pgm");
        std::fs::write(&p, b"P5\nwide 1\n255\nx").unwrap();
        assert!(matches!(
            load_image::<f64>(&p),
            Err(Error::MalformedHeader { .. })
        ));

        let p = dir.path().join("bad_maxval.pgm");
        std::fs::write(&p, b"P5\n1 1\n65535\nxx").unwrap();
        assert!(matches!(
            load_image::<f64>(&p),
            Err(Error::MalformedHeader { .. })
        ));

        let p = dir.path().join("truncated.ppm");
        std::fs::write(&p, b"P6\n2 2\n255\nabc").unwrap();
        assert!(matches!(
            load_image::<f64>(&p),
            Err(Error::TruncatedPayload {
                expected: 12,
                got: 3,
                ..
            })
        ));

        let p = dir.path().join("missing.ppm");
        assert!(matches!(load_image::<f64>(&p), Err(Error::Io { .. })));
    }

    #[test]
    fn save_rejects_unsupported_shapes() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("x.ppm");
        let t = Tensor4::<f64>::zeros(Shape4::new(2, 3, 2, 2));
        assert!(save_image(&p, &t).is_err());
        let t = Tensor4::<f64>::zeros(Shape4::new(1, 2, 2, 2));
        assert!(save_image(&p, &t).is_err());
    }

    #[test]
    fn many_random_round_trips() {
        let dir = tempdir().unwrap();
        for seed in 0..50u64 {
            let c = if seed % 2 == 0 { 3 } else { 1 };
            let h = 1 + (seed as usize % 6);
            let w = 1 + ((seed as usize * 7) % 9);
            let t = quantized_tensor(Shape4::new(1, c, h, w), seed);
            let p = dir.path().join(format!("t{seed}.pnm"));
            save_image(&p, &t).unwrap();
            let back: Tensor4<f32> = load_image(&p).unwrap();
            assert_eq!(t, back, "seed {seed}");
        }
    }
}
