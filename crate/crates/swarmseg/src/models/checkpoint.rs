//! Flat binary checkpoint: versioned header, a key=value config echo, then
//! named parameter groups in declaration order with their Adam state.
//! All reals are little-endian; round-trips are bit-exact, which is what
//! makes resumed runs indistinguishable from uninterrupted ones.

use crate::error::{Error, Result};
use crate::models::{ModelParams, ParamEntry};
use crate::tensor::{AdamState, Real, Shape4, Tensor4};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"SWSGCKPT";
const VERSION: u32 = 1;

fn ps(path: &Path) -> String {
    path.display().to_string()
}

/// Everything a run needs to continue exactly where it stopped.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T: Real> {
    pub config_echo: Vec<(String, String)>,
    pub iteration: u64,
    pub groups: Vec<(String, ModelParams<T>)>,
}

fn echo_blob(echo: &[(String, String)]) -> Result<Vec<u8>> {
    let mut out = String::new();
    for (k, v) in echo {
        if k.contains('=') || k.contains('\n') || v.contains('\n') {
            return Err(Error::InvalidArgument(format!(
                "config echo key/value may not contain '=' in key or newlines: {k}"
            )));
        }
        out.push_str(k);
        out.push('=');
        out.push_str(v);
        out.push('\n');
    }
    Ok(out.into_bytes())
}

fn parse_echo(blob: &[u8], path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::str::from_utf8(blob).map_err(|_| Error::Checkpoint {
        path: ps(path),
        detail: "config echo is not valid UTF-8".into(),
    })?;
    let mut echo = Vec::new();
    for line in text.lines() {
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Checkpoint {
            path: ps(path),
            detail: format!("config echo line without '=': {line}"),
        })?;
        echo.push((k.to_string(), v.to_string()));
    }
    Ok(echo)
}

struct Writer<W: Write> {
    inner: W,
}

impl<W: Write> Writer<W> {
    fn bytes(&mut self, path: &Path, b: &[u8]) -> Result<()> {
        self.inner.write_all(b).map_err(|e| Error::io(ps(path), e))
    }

    fn u32(&mut self, path: &Path, v: u32) -> Result<()> {
        self.bytes(path, &v.to_le_bytes())
    }

    fn u64(&mut self, path: &Path, v: u64) -> Result<()> {
        self.bytes(path, &v.to_le_bytes())
    }

    fn str(&mut self, path: &Path, s: &str) -> Result<()> {
        self.u32(path, s.len() as u32)?;
        self.bytes(path, s.as_bytes())
    }

    fn tensor<T: Real>(&mut self, path: &Path, t: &Tensor4<T>) -> Result<()> {
        let mut buf = Vec::with_capacity(t.len() * T::BYTE_WIDTH as usize);
        for v in &t.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.bytes(path, &buf)
    }
}

pub fn save_checkpoint<T: Real>(path: &Path, ckpt: &Checkpoint<T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(ps(path), e))?;
    let mut w = Writer {
        inner: BufWriter::new(file),
    };
    w.bytes(path, MAGIC)?;
    w.u32(path, VERSION)?;
    w.bytes(path, &[T::BYTE_WIDTH])?;
    let blob = echo_blob(&ckpt.config_echo)?;
    w.u32(path, blob.len() as u32)?;
    w.bytes(path, &blob)?;
    w.u64(path, ckpt.iteration)?;
    w.u32(path, ckpt.groups.len() as u32)?;
    for (name, params) in &ckpt.groups {
        w.str(path, name)?;
        w.u32(path, params.entries.len() as u32)?;
        for e in &params.entries {
            w.str(path, &e.name)?;
            let s = e.tensor.shape;
            for d in [s.n, s.c, s.h, s.w] {
                w.u64(path, d as u64)?;
            }
            w.tensor(path, &e.tensor)?;
            w.tensor(path, &e.adam.m)?;
            w.tensor(path, &e.adam.v)?;
            w.u64(path, e.adam.t)?;
        }
    }
    w.inner.flush().map_err(|e| Error::io(ps(path), e))
}

struct Reader<R: Read> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, path: &Path, n: usize, what: &str) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner.read_exact(&mut buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Checkpoint {
                    path: ps(path),
                    detail: format!("truncated while reading {what}"),
                }
            } else {
                Error::io(ps(path), e)
            }
        })?;
        Ok(buf)
    }

    fn u32(&mut self, path: &Path, what: &str) -> Result<u32> {
        let b = self.bytes(path, 4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self, path: &Path, what: &str) -> Result<u64> {
        let b = self.bytes(path, 8, what)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn str(&mut self, path: &Path, what: &str) -> Result<String> {
        let n = self.u32(path, what)? as usize;
        let b = self.bytes(path, n, what)?;
        String::from_utf8(b).map_err(|_| Error::Checkpoint {
            path: ps(path),
            detail: format!("{what} is not valid UTF-8"),
        })
    }

    fn tensor<T: Real>(&mut self, path: &Path, shape: Shape4, what: &str) -> Result<Tensor4<T>> {
        let width = T::BYTE_WIDTH as usize;
        let raw = self.bytes(path, shape.len() * width, what)?;
        let data = raw.chunks_exact(width).map(T::from_le_slice).collect();
        Ok(Tensor4 { shape, data })
    }
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<Checkpoint<T>> {
    let file = File::open(path).map_err(|e| Error::io(ps(path), e))?;
    let mut r = Reader {
        inner: BufReader::new(file),
    };
    let magic = r.bytes(path, 8, "magic")?;
    if magic != MAGIC {
        return Err(Error::Checkpoint {
            path: ps(path),
            detail: format!("bad magic {magic:?}, expected {MAGIC:?}"),
        });
    }
    let version = r.u32(path, "version")?;
    if version != VERSION {
        return Err(Error::Checkpoint {
            path: ps(path),
            detail: format!("unsupported version {version}, expected {VERSION}"),
        });
    }
    let width = r.bytes(path, 1, "scalar width")?[0];
    if width != T::BYTE_WIDTH {
        return Err(Error::Checkpoint {
            path: ps(path),
            detail: format!(
                "scalar width {width} does not match requested width {}",
                T::BYTE_WIDTH
            ),
        });
    }
    let blob_len = r.u32(path, "config echo length")? as usize;
    let blob = r.bytes(path, blob_len, "config echo")?;
    let config_echo = parse_echo(&blob, path)?;
    let iteration = r.u64(path, "iteration")?;
    let group_count = r.u32(path, "group count")?;
    let mut groups = Vec::with_capacity(group_count as usize);
    for _ in 0..group_count {
        let group_name = r.str(path, "group name")?;
        let entry_count = r.u32(path, "entry count")?;
        let mut entries = Vec::with_capacity(entry_count as usize);
        for _ in 0..entry_count {
            let name = r.str(path, "parameter name")?;
            let mut dims = [0usize; 4];
            for d in &mut dims {
                *d = r.u64(path, "shape")? as usize;
            }
            let shape = Shape4::new(dims[0], dims[1], dims[2], dims[3]);
            let tensor = r.tensor::<T>(path, shape, &name)?;
            let m = r.tensor::<T>(path, shape, "adam m")?;
            let v = r.tensor::<T>(path, shape, "adam v")?;
            let t = r.u64(path, "adam t")?;
            entries.push(ParamEntry {
                name,
                tensor,
                adam: AdamState { m, v, t },
            });
        }
        groups.push((group_name, ModelParams { entries }));
    }
    // Trailing garbage means the file is not what it claims to be.
    let mut probe = [0u8; 1];
    match r.inner.read(&mut probe) {
        Ok(0) => {}
        Ok(_) => {
            return Err(Error::Checkpoint {
                path: ps(path),
                detail: "trailing bytes after final group".into(),
            })
        }
        Err(e) => return Err(Error::io(ps(path), e)),
    }
    Ok(Checkpoint {
        config_echo,
        iteration,
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Discriminator, DiscriminatorConfig, Segmenter, SegmenterConfig};

    fn toy_checkpoint() -> Checkpoint<f32> {
        let mut seg = Segmenter::<f32>::init(
            SegmenterConfig {
                base_channels: 2,
                depth: 1,
                ..SegmenterConfig::default()
            },
            1,
        )
        .unwrap();
        let disc = Discriminator::<f32>::init(
            DiscriminatorConfig {
                base_channels: 2,
                layers: 3,
                ..DiscriminatorConfig::default()
            },
            2,
        )
        .unwrap();
        // A couple of optimizer steps so m, v, t are nontrivial.
        for _ in 0..2 {
            let grads: Vec<_> = seg
                .params
                .entries
                .iter()
                .map(|e| Tensor4::full(e.tensor.shape, 0.25))
                .collect();
            seg.params.apply_adam(&grads, 0.01, 0.5, 0.9, 1e-8).unwrap();
        }
        Checkpoint {
            config_echo: vec![
                ("seg.depth".into(), "1".into()),
                ("note".into(), "lr = 1e-4".into()),
            ],
            iteration: 137,
            groups: vec![
                ("segmenter".into(), seg.params),
                ("discriminator".into(), disc.params),
            ],
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let ckpt = toy_checkpoint();
        save_checkpoint(&path, &ckpt).unwrap();
        let back = load_checkpoint::<f32>(&path).unwrap();
        assert_eq!(ckpt, back);

        // Saving the loaded copy reproduces the file byte for byte.
        let path2 = dir.path().join("model2.ckpt");
        save_checkpoint(&path2, &back).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn echo_and_iteration_survive() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &toy_checkpoint()).unwrap();
        let back = load_checkpoint::<f32>(&path).unwrap();
        assert_eq!(back.iteration, 137);
        assert_eq!(back.config_echo[1], ("note".into(), "lr = 1e-4".into()));
        assert_eq!(back.groups[0].0, "segmenter");
    }

    #[test]
    fn rejects_bad_magic_version_and_width() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &toy_checkpoint()).unwrap();

        let good = std::fs::read(&path).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        let err = load_checkpoint::<f32>(&path).unwrap_err();
        assert!(matches!(err, Error::Checkpoint { .. }), "{err}");
        assert!(err.to_string().contains("magic"));

        let mut bad = good.clone();
        bad[8] = 99;
        std::fs::write(&path, &bad).unwrap();
        let err = load_checkpoint::<f32>(&path).unwrap_err();
        assert!(err.to_string().contains("version"));

        std::fs::write(&path, &good).unwrap();
        let err = load_checkpoint::<f64>(&path).unwrap_err();
        assert!(err.to_string().contains("width"));
    }

    #[test]
    fn rejects_truncated_and_padded_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &toy_checkpoint()).unwrap();
        let good = std::fs::read(&path).unwrap();

        std::fs::write(&path, &good[..good.len() - 3]).unwrap();
        let err = load_checkpoint::<f32>(&path).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");

        let mut padded = good.clone();
        padded.push(0);
        std::fs::write(&path, &padded).unwrap();
        let err = load_checkpoint::<f32>(&path).unwrap_err();
        assert!(err.to_string().contains("trailing"), "{err}");
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_checkpoint::<f32>(Path::new("/nonexistent/x.ckpt")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
