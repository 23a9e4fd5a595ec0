//! Binary columnar export of envelopes and traces.
//!
//! All integers and floats little-endian:
//!
//! | offset | size | field                                         |
//! |--------|------|-----------------------------------------------|
//! | 0      | 8    | magic `OPTOCOL1`                              |
//! | 8      | 4    | u32 format version (1)                        |
//! | 12     | 4    | u32 channel count `C`                         |
//! | 16     | 8    | f64 sample step, s                            |
//! | 24     | 8    | u64 samples per channel `n`                   |
//! | 32     | 8    | u64 seed                                      |
//! | 40     | 4    | u32 flags (bit 0: seed present)               |
//! | 44     | 4    | u32 downsampling factor                       |
//! | 48     | 32   | SHA-256 of the drive description              |
//! | 80     | ...  | `C` × (u16 name length, UTF-8 name)           |
//! | ...    | ...  | `C` × `n` × (f64 re, f64 im), channel-major   |

use std::io::{Read, Write};

use num_complex::Complex;

use crate::drive::Envelope;
use crate::error::{Error, Result};
use crate::langevin::SimTrace;
use crate::real::Real;

pub const MAGIC: [u8; 8] = *b"OPTOCOL1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnFile {
    pub dt: f64,
    pub seed: Option<u64>,
    pub downsample: u32,
    pub digest: [u8; 32],
    pub channels: Vec<(String, Vec<Complex<f64>>)>,
}

fn widen<T: Real>(xs: &[Complex<T>], every: usize) -> Vec<Complex<f64>> {
    xs.iter()
        .step_by(every.max(1))
        .map(|z| Complex::new(z.re.as_f64(), z.im.as_f64()))
        .collect()
}

impl ColumnFile {
    pub fn from_envelope<T: Real>(env: &Envelope<T>) -> Self {
        ColumnFile {
            dt: env.dt.as_f64(),
            seed: env.seed,
            downsample: 1,
            digest: env.spec.digest(),
            channels: vec![("r".into(), widen(&env.samples, 1))],
        }
    }

    /// Keeps every `downsample`-th recorded sample of each channel.
    pub fn from_trace<T: Real>(trace: &SimTrace<T>, downsample: u32) -> Self {
        let every = downsample.max(1) as usize;
        ColumnFile {
            dt: trace.dt.as_f64() * every as f64,
            seed: Some(trace.seed),
            downsample: every as u32,
            digest: trace.spec.digest(),
            channels: vec![
                ("b".into(), widen(&trace.b, every)),
                ("a".into(), widen(&trace.a, every)),
                ("alpha".into(), widen(&trace.alpha, every)),
            ],
        }
    }

    pub fn channel(&self, name: &str) -> Option<&[Complex<f64>]> {
        self.channels.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.channels.first().map_or(0, |(_, v)| v.len());
        if self.channels.iter().any(|(_, v)| v.len() != n) {
            return Err(Error::ColumnFile("channels differ in length".into()));
        }
        w.write_all(&MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.channels.len() as u32).to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&(n as u64).to_le_bytes())?;
        w.write_all(&self.seed.unwrap_or(0).to_le_bytes())?;
        w.write_all(&(self.seed.is_some() as u32).to_le_bytes())?;
        w.write_all(&self.downsample.to_le_bytes())?;
        w.write_all(&self.digest)?;
        for (name, _) in &self.channels {
            let bytes = name.as_bytes();
            let len = u16::try_from(bytes.len()).map_err(|_| Error::ColumnFile("channel name too long".into()))?;
            w.write_all(&len.to_le_bytes())?;
            w.write_all(bytes)?;
        }
        for (_, data) in &self.channels {
            for z in data {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(Error::ColumnFile("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::ColumnFile(format!("unsupported version {version}")));
        }
        let count = read_u32(&mut r)? as usize;
        let dt = f64::from_le_bytes(read_array(&mut r)?);
        let n = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let seed = u64::from_le_bytes(read_array(&mut r)?);
        let flags = read_u32(&mut r)?;
        let downsample = read_u32(&mut r)?;
        let digest: [u8; 32] = read_array(&mut r)?;
        let mut names = Vec::with_capacity(count);
        for _ in 0..count {
            let len = u16::from_le_bytes(read_array(&mut r)?) as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            names.push(String::from_utf8(buf).map_err(|_| Error::ColumnFile("channel name not UTF-8".into()))?);
        }
        let mut channels = Vec::with_capacity(count);
        for name in names {
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                let re = f64::from_le_bytes(read_array(&mut r)?);
                let im = f64::from_le_bytes(read_array(&mut r)?);
                data.push(Complex::new(re, im));
            }
            channels.push((name, data));
        }
        Ok(ColumnFile {
            dt,
            seed: (flags & 1 == 1).then_some(seed),
            downsample,
            digest,
            channels,
        })
    }
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}
