//! Binary dataset file holding aligned traces.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic        4 bytes  "HVDS"
//! version      u32      1
//! dt_hours     f64
//! cycle_steps  u32
//! clock_offset u32
//! len          u64
//! t_out_degc   f64 x len
//! rho_per_kwh  f64 x len
//! occupancy    u8  x len   (0 or 1)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::domain::ExogenousTraces;
use crate::error::{Error, Result};

pub const DATASET_MAGIC: &[u8; 4] = b"HVDS";
pub const DATASET_VERSION: u32 = 1;

pub fn write_dataset(traces: &ExogenousTraces, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + traces.len() * 17);
    buf.extend_from_slice(DATASET_MAGIC);
    buf.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    buf.extend_from_slice(&traces.dt_hours.to_le_bytes());
    buf.extend_from_slice(&(traces.cycle_steps as u32).to_le_bytes());
    buf.extend_from_slice(&(traces.clock_offset as u32).to_le_bytes());
    buf.extend_from_slice(&(traces.len() as u64).to_le_bytes());
    for v in traces.t_out_degc.iter().chain(&traces.rho_per_kwh) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend(traces.occupancy.iter().map(|&o| o as u8));
    let mut f = std::fs::File::create(path)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    f.write_all(&buf)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Format(format!(
                "dataset truncated at byte {} (need {n} more)",
                self.pos
            )));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_dataset(path: &Path) -> Result<ExogenousTraces> {
    let mut data = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut data))
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut c = Cursor { data: &data, pos: 0 };
    if c.take(4)? != DATASET_MAGIC {
        return Err(Error::Format(format!("{}: not a dataset file", path.display())));
    }
    let version = c.u32()?;
    if version != DATASET_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported dataset version {version}",
            path.display()
        )));
    }
    let dt_hours = c.f64()?;
    let cycle_steps = c.u32()? as usize;
    let clock_offset = c.u32()? as usize;
    let len = c.u64()? as usize;
    let t_out = (0..len).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
    let rho = (0..len).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
    let occ = c
        .take(len)?
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::Format(format!("occupancy byte {other} is not 0 or 1"))),
        })
        .collect::<Result<Vec<_>>>()?;
    if c.pos != data.len() {
        return Err(Error::Format(format!(
            "{}: {} trailing bytes",
            path.display(),
            data.len() - c.pos
        )));
    }
    ExogenousTraces::new(t_out, rho, occ, dt_hours, cycle_steps, clock_offset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{synth_traces, SynthProfile};

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.bin");
        let t = synth_traces(2, 5, &SynthProfile::default()).unwrap().slice(7, 100).unwrap();
        write_dataset(&t, &p).unwrap();
        assert_eq!(read_dataset(&p).unwrap(), t);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.bin");
        std::fs::write(&p, b"NOPE0000").unwrap();
        assert!(matches!(read_dataset(&p), Err(Error::Format(_))));
        let t = synth_traces(1, 5, &SynthProfile::default()).unwrap();
        write_dataset(&t, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_dataset(&p), Err(Error::Format(_))));
    }
}
