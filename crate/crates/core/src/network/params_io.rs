//! Binary serialization of network parameters.
//!
//! Layout: magic `SCNP`, format version (u32), input shape (3 x u64), the
//! conv layers, the fc layers, and the head. Each layer stores its u64
//! dimensions followed by length-prefixed little-endian f64 arrays.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{ConvLayer, FcLayer, NetworkParams};

const MAGIC: [u8; 4] = *b"SCNP";
const VERSION: u32 = 1;

struct Reader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Reader<R> {
    fn corrupt(&self, detail: impl Into<String>) -> Error {
        Error::CorruptParams { offset: self.offset, detail: detail.into() }
    }

    fn read_exact(&mut self, buf: &mut [u8]) -> Result<()> {
        match self.inner.read_exact(buf) {
            Ok(()) => {
                self.offset += buf.len() as u64;
                Ok(())
            }
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
                Err(self.corrupt("unexpected end of file"))
            }
            Err(e) => Err(e.into()),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        let mut buf = [0u8; 4];
        self.read_exact(&mut buf)?;
        Ok(u32::from_le_bytes(buf))
    }

    fn u64(&mut self) -> Result<u64> {
        let mut buf = [0u8; 8];
        self.read_exact(&mut buf)?;
        Ok(u64::from_le_bytes(buf))
    }

    fn dim(&mut self, what: &str) -> Result<usize> {
        let v = self.u64()?;
        if v == 0 || v > 1 << 32 {
            return Err(self.corrupt(format!("implausible {what} {v}")));
        }
        Ok(v as usize)
    }

    fn f64_array(&mut self, expected_len: usize, what: &str) -> Result<Vec<f64>> {
        let len = self.u64()? as usize;
        if len != expected_len {
            return Err(self.corrupt(format!(
                "{what} has {len} values, expected {expected_len}"
            )));
        }
        let mut buf = vec![0u8; len * 8];
        self.read_exact(&mut buf)?;
        let values: Vec<f64> = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(self.corrupt(format!("{what} value {bad} is not finite")));
        }
        Ok(values)
    }
}

fn write_f64_array<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    w.write_all(&(values.len() as u64).to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn write_fc<W: Write>(w: &mut W, layer: &FcLayer) -> Result<()> {
    w.write_all(&(layer.in_dim as u64).to_le_bytes())?;
    w.write_all(&(layer.out_dim as u64).to_le_bytes())?;
    write_f64_array(w, &layer.w)?;
    write_f64_array(w, &layer.b)
}

fn read_fc<R: Read>(r: &mut Reader<R>) -> Result<FcLayer> {
    let in_dim = r.dim("fc input width")?;
    let out_dim = r.dim("fc output width")?;
    let w = r.f64_array(in_dim * out_dim, "fc weights")?;
    let b = r.f64_array(out_dim, "fc biases")?;
    Ok(FcLayer { in_dim, out_dim, w, b })
}

pub fn save_params(params: &NetworkParams, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for d in [params.input_shape.0, params.input_shape.1, params.input_shape.2] {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    w.write_all(&(params.conv.len() as u64).to_le_bytes())?;
    for layer in &params.conv {
        for d in [layer.in_ch, layer.out_ch, layer.kernel, layer.stride] {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        write_f64_array(&mut w, &layer.w)?;
        write_f64_array(&mut w, &layer.b)?;
    }
    w.write_all(&(params.fc.len() as u64).to_le_bytes())?;
    for layer in &params.fc {
        write_fc(&mut w, layer)?;
    }
    write_fc(&mut w, &params.head)?;
    w.flush()?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<NetworkParams> {
    let mut r = Reader { inner: BufReader::new(File::open(path)?), offset: 0 };
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::CorruptParams {
            offset: 0,
            detail: "bad magic, not a parameter file".into(),
        });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::ParamsVersion { found: version, expected: VERSION });
    }
    let input_shape =
        (r.dim("input channels")?, r.dim("input height")?, r.dim("input width")?);

    let n_conv = r.u64()? as usize;
    if n_conv > 64 {
        return Err(r.corrupt(format!("implausible conv layer count {n_conv}")));
    }
    let mut conv = Vec::with_capacity(n_conv);
    for _ in 0..n_conv {
        let in_ch = r.dim("conv input channels")?;
        let out_ch = r.dim("conv output channels")?;
        let kernel = r.dim("conv kernel")?;
        let stride = r.dim("conv stride")?;
        let w = r.f64_array(out_ch * in_ch * kernel * kernel, "conv weights")?;
        let b = r.f64_array(out_ch, "conv biases")?;
        conv.push(ConvLayer { in_ch, out_ch, kernel, stride, w, b });
    }

    let n_fc = r.u64()? as usize;
    if n_fc == 0 || n_fc > 64 {
        return Err(r.corrupt(format!("implausible fc layer count {n_fc}")));
    }
    let mut fc = Vec::with_capacity(n_fc);
    for _ in 0..n_fc {
        fc.push(read_fc(&mut r)?);
    }
    let head = read_fc(&mut r)?;

    let mut rest = [0u8; 1];
    match r.inner.read(&mut rest)? {
        0 => Ok(NetworkParams { input_shape, conv, fc, head }),
        _ => Err(r.corrupt("trailing data after parameters")),
    }
}
