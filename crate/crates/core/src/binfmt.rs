//! Little-endian primitives shared by the embedding and model files.

use crate::error::{Error, Result};
use crate::numeric::Tensor;

#[derive(Default)]
pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, vals: &[f64]) {
        for v in vals {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    /// `u32` byte length, then UTF-8 bytes.
    pub fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }

    /// Rank, dims, then values.
    pub fn tensor(&mut self, t: &Tensor) {
        self.u32(t.rank() as u32);
        for &d in t.shape() {
            self.u64(d as u64);
        }
        self.f64s(t.data());
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8], what: &'static str) -> Self {
        Self { buf, pos: 0, what }
    }

    pub fn fail(&self, message: impl Into<String>) -> Error {
        Error::Format {
            path: self.what.into(),
            message: format!("{} (at byte {})", message.into(), self.pos),
        }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.fail("unexpected end of data"));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| self.fail("size out of range"))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| self.fail("size overflow"))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let b = self.take(n)?;
        String::from_utf8(b.to_vec()).map_err(|_| self.fail("invalid UTF-8"))
    }

    pub fn tensor(&mut self) -> Result<Tensor> {
        let rank = self.u32()? as usize;
        if rank == 0 || rank > 8 {
            return Err(self.fail(format!("unsupported tensor rank {rank}")));
        }
        let shape = (0..rank)
            .map(|_| self.usize())
            .collect::<Result<Vec<_>>>()?;
        let numel = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| self.fail("tensor size overflow"))?;
        let data = self.f64s(numel)?;
        Tensor::new(shape, data).map_err(|e| self.fail(e.to_string()))
    }

    pub fn expect_end(&self) -> Result<()> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(self.fail(format!("{} trailing byte(s)", self.buf.len() - self.pos)))
        }
    }
}
