//! Frame container used for clip and gaze-map media.
//!
//! Layout (little endian):
//!
//! ```text
//! magic    [u8; 4] = "XNVF"
//! version  u16     = 1
//! width    u16
//! height   u16
//! channels u8      (1 = gaze density, 3 = RGB)
//! reserved u8
//! frames   u32
//! then `frames` records of: timestamp f64 (seconds), pixels [u8; width*height*channels]
//! ```
//!
//! Records are fixed-size so any frame can be addressed by offset.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"XNVF";
pub const VERSION: u16 = 1;
const HEADER_LEN: u64 = 4 + 2 + 2 + 2 + 1 + 1 + 4;

#[derive(Debug, Error)]
pub enum MediaError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a frame container (bad magic)")]
    BadMagic,
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u16),
    #[error("container truncated: expected {expected} frames, found {found}")]
    Truncated { expected: u32, found: u32 },
    #[error("invalid geometry {width}x{height}x{channels}")]
    BadGeometry { width: u16, height: u16, channels: u8 },
    #[error("frame {index} out of range ({len} frames)")]
    FrameOutOfRange { index: usize, len: usize },
    #[error("frame {index} has {actual} bytes, expected {expected}")]
    FrameSize { index: usize, actual: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub width: u16,
    pub height: u16,
    pub channels: u8,
}

impl Geometry {
    pub fn frame_bytes(&self) -> usize {
        self.width as usize * self.height as usize * self.channels as usize
    }

    fn validate(&self) -> Result<(), MediaError> {
        if self.width == 0 || self.height == 0 || !matches!(self.channels, 1 | 3) {
            return Err(MediaError::BadGeometry {
                width: self.width,
                height: self.height,
                channels: self.channels,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub timestamp: f64,
    /// Row-major, channel-interleaved (HWC).
    pub pixels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    pub geometry: Geometry,
    pub frames: Vec<Frame>,
}

impl Video {
    pub fn new(geometry: Geometry) -> Self {
        Self { geometry, frames: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn push(&mut self, timestamp: f64, pixels: Vec<u8>) -> Result<(), MediaError> {
        let expected = self.geometry.frame_bytes();
        if pixels.len() != expected {
            return Err(MediaError::FrameSize {
                index: self.frames.len(),
                actual: pixels.len(),
                expected,
            });
        }
        self.frames.push(Frame { timestamp, pixels });
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, MediaError> {
        let mut r = BufReader::new(File::open(path)?);
        let (geometry, count) = read_header(&mut r)?;
        let mut frames = Vec::with_capacity(count as usize);
        for i in 0..count {
            match read_frame(&mut r, geometry) {
                Ok(f) => frames.push(f),
                Err(MediaError::Io(e)) if e.kind() == io::ErrorKind::UnexpectedEof => {
                    return Err(MediaError::Truncated { expected: count, found: i });
                }
                Err(e) => return Err(e),
            }
        }
        Ok(Self { geometry, frames })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), MediaError> {
        self.geometry.validate()?;
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.geometry.width.to_le_bytes())?;
        w.write_all(&self.geometry.height.to_le_bytes())?;
        w.write_all(&[self.geometry.channels, 0])?;
        w.write_all(&(self.frames.len() as u32).to_le_bytes())?;
        for f in &self.frames {
            w.write_all(&f.timestamp.to_le_bytes())?;
            w.write_all(&f.pixels)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn read_header(r: &mut impl Read) -> Result<(Geometry, u32), MediaError> {
    let mut buf = [0u8; HEADER_LEN as usize];
    r.read_exact(&mut buf).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            MediaError::BadMagic
        } else {
            MediaError::Io(e)
        }
    })?;
    if &buf[0..4] != MAGIC {
        return Err(MediaError::BadMagic);
    }
    let version = u16::from_le_bytes([buf[4], buf[5]]);
    if version != VERSION {
        return Err(MediaError::UnsupportedVersion(version));
    }
    let geometry = Geometry {
        width: u16::from_le_bytes([buf[6], buf[7]]),
        height: u16::from_le_bytes([buf[8], buf[9]]),
        channels: buf[10],
    };
    geometry.validate()?;
    let count = u32::from_le_bytes([buf[12], buf[13], buf[14], buf[15]]);
    Ok((geometry, count))
}

fn read_frame(r: &mut impl Read, geometry: Geometry) -> Result<Frame, MediaError> {
    let mut ts = [0u8; 8];
    r.read_exact(&mut ts)?;
    let mut pixels = vec![0u8; geometry.frame_bytes()];
    r.read_exact(&mut pixels)?;
    Ok(Frame { timestamp: f64::from_le_bytes(ts), pixels })
}

/// Random-access reader that touches only the requested frame.
pub struct VideoReader {
    file: BufReader<File>,
    geometry: Geometry,
    count: u32,
}

impl VideoReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, MediaError> {
        let mut file = BufReader::new(File::open(path)?);
        let (geometry, count) = read_header(&mut file)?;
        Ok(Self { file, geometry, count })
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn len(&self) -> usize {
        self.count as usize
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn frame(&mut self, index: usize) -> Result<Frame, MediaError> {
        if index >= self.count as usize {
            return Err(MediaError::FrameOutOfRange { index, len: self.count as usize });
        }
        let record = 8 + self.geometry.frame_bytes() as u64;
        self.file.seek(SeekFrom::Start(HEADER_LEN + index as u64 * record))?;
        read_frame(&mut self.file, self.geometry).map_err(|e| match e {
            MediaError::Io(io) if io.kind() == io::ErrorKind::UnexpectedEof => {
                MediaError::Truncated { expected: self.count, found: index as u32 }
            }
            other => other,
        })
    }
}
