//! Little-endian binary encoding of fitted parameters. Floats are stored as
//! raw bit patterns so a reload reproduces predictions exactly.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;

use crate::error::{Error, Result};

#[derive(Debug, Default)]
pub struct ParamWriter {
    buf: Vec<u8>,
}

impl ParamWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, v: &[f64]) {
        self.usize(v.len());
        v.iter().for_each(|&x| self.f64(x));
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn into_base64(self) -> String {
        STANDARD.encode(self.buf)
    }
}

#[derive(Debug)]
pub struct ParamReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ParamReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Decode("model parameter block truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Decode("length overflows usize".into()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.usize()?;
        if n > self.buf.len() / 8 {
            return Err(Error::Decode("implausible vector length".into()));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn finish(self) -> Result<()> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(Error::Decode(format!(
                "{} trailing bytes in parameter block",
                self.buf.len() - self.pos
            )))
        }
    }
}

pub fn decode_base64(s: &str) -> Result<Vec<u8>> {
    STANDARD
        .decode(s)
        .map_err(|e| Error::Decode(format!("parameter block: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_bits() {
        let vals = [0.1, -0.0, f64::MIN_POSITIVE, 1e300, std::f64::consts::PI];
        let mut w = ParamWriter::new();
        w.usize(7);
        w.f64s(&vals);
        let bytes = w.into_bytes();
        let mut r = ParamReader::new(&bytes);
        assert_eq!(r.usize().unwrap(), 7);
        let back = r.f64s().unwrap();
        r.finish().unwrap();
        for (a, b) in vals.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncation_detected() {
        let mut w = ParamWriter::new();
        w.f64s(&[1.0, 2.0]);
        let bytes = w.into_bytes();
        assert!(ParamReader::new(&bytes[..20]).f64s().is_err());
        let mut r = ParamReader::new(&bytes);
        r.u64().unwrap();
        assert!(r.finish().is_err());
    }
}
