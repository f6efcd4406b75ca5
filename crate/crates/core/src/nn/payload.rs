//! Binary tensor payload: per tensor a u64 element count, the little-endian
//! f64 values, and a CRC32 over both.

use crate::error::{Error, Result};

pub fn encode_tensors(tensors: &[Vec<f64>]) -> Vec<u8> {
    let mut out = Vec::new();
    for t in tensors {
        let start = out.len();
        out.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&out[start..]);
        out.extend_from_slice(&crc.to_le_bytes());
    }
    out
}

pub fn decode_tensors(buf: &[u8], names: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut pos = 0;
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let start = pos;
        if buf.len() < pos + 8 {
            return Err(Error::Truncated(format!("tensor {name} header")));
        }
        let n = u64::from_le_bytes(buf[pos..pos + 8].try_into().unwrap()) as usize;
        pos += 8;
        let bytes = n.checked_mul(8).filter(|b| buf.len() >= pos + b + 4);
        let Some(bytes) = bytes else {
            return Err(Error::Truncated(format!("tensor {name} data")));
        };
        let data =
            buf[pos..pos + bytes].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        pos += bytes;
        let computed = crc32fast::hash(&buf[start..pos]);
        let stored = u32::from_le_bytes(buf[pos..pos + 4].try_into().unwrap());
        pos += 4;
        if stored != computed {
            return Err(Error::Checksum { what: format!("tensor {name}"), stored, computed });
        }
        out.push(data);
    }
    if pos != buf.len() {
        return Err(Error::Parse(format!("{} trailing payload bytes", buf.len() - pos)));
    }
    Ok(out)
}
