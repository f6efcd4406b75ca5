//! On-disk dataset bundle: a directory with a TOML `manifest` and a binary
//! `samples.bin`.
//!
//! `samples.bin` layout (little-endian):
//!
//! ```text
//! magic    8 bytes  "INRTDS01"
//! count    u64
//! record*  label f64 | ndim u32 (= 3) | dims 3×u32 | data f32 × prod(dims) | crc32 u32
//! ```
//!
//! The CRC covers every byte of its record before the checksum field.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Manifest, Normalization, Sample, SampleMeta, Split, SCHEMA_VERSION};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"INRTDS01";
pub const MANIFEST_FILE: &str = "manifest";
pub const SAMPLES_FILE: &str = "samples.bin";

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    manifest: Manifest,
    split: Split,
    normalization: Option<Normalization>,
    samples: Vec<SampleMeta>,
}

pub fn encode_samples(samples: &[Sample]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(samples.len() as u64).to_le_bytes());
    for s in samples {
        let start = out.len();
        out.extend_from_slice(&s.label.to_le_bytes());
        out.extend_from_slice(&3u32.to_le_bytes());
        for d in s.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &s.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&out[start..]);
        out.extend_from_slice(&crc.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Truncated(format!("{what} at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Decodes `samples.bin`, returning `(label, shape, data)` per record.
pub fn decode_samples(buf: &[u8]) -> Result<Vec<(f64, [usize; 3], Vec<f32>)>> {
    if buf.len() < 8 || &buf[..8] != MAGIC {
        if buf.len() >= 8 && buf[..6] == MAGIC[..6] {
            return Err(Error::Version(String::from_utf8_lossy(&buf[..8]).into_owned()));
        }
        return Err(Error::BadMagic(String::from_utf8_lossy(&buf[..buf.len().min(8)]).into_owned()));
    }
    let mut r = Reader { buf, pos: 8 };
    let count = u64::from_le_bytes(r.take(8, "sample count")?.try_into().unwrap());
    let mut out = Vec::new();
    for i in 0..count {
        let start = r.pos;
        let label = f64::from_le_bytes(r.take(8, "label")?.try_into().unwrap());
        let ndim = r.u32("ndim")?;
        if ndim != 3 {
            return Err(Error::Parse(format!("record {i}: expected 3 dims, got {ndim}")));
        }
        let mut shape = [0usize; 3];
        for d in &mut shape {
            *d = r.u32("dims")? as usize;
        }
        let n: usize = shape.iter().product();
        let data: Vec<f32> = r
            .take(4 * n, "tensor data")?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let computed = crc32fast::hash(&buf[start..r.pos]);
        let stored = r.u32("checksum")?;
        if stored != computed {
            return Err(Error::Checksum { what: format!("sample {i}"), stored, computed });
        }
        out.push((label, shape, data));
    }
    if r.pos != buf.len() {
        return Err(Error::Parse(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    Ok(out)
}

pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let file = ManifestFile {
        manifest: dataset.manifest.clone(),
        split: dataset.split.clone(),
        normalization: dataset.normalization.clone(),
        samples: dataset.samples.iter().map(|s| s.meta.clone()).collect(),
    };
    let text = toml::to_string(&file).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(dir.join(MANIFEST_FILE), text)?;
    let mut f = fs::File::create(dir.join(SAMPLES_FILE))?;
    f.write_all(&encode_samples(&dataset.samples))?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let bytes = fs::read(dir.join(SAMPLES_FILE))?;
    let records = decode_samples(&bytes)?;
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let file: ManifestFile = toml::from_str(&text).map_err(|e| Error::Parse(format!("manifest: {e}")))?;
    if file.manifest.schema_version != SCHEMA_VERSION {
        return Err(Error::Version(format!("manifest schema {}", file.manifest.schema_version)));
    }
    if file.samples.len() != records.len() {
        return Err(Error::Parse(format!(
            "manifest lists {} samples, samples.bin holds {}",
            file.samples.len(),
            records.len()
        )));
    }
    let n = records.len();
    if file.split.train.iter().chain(&file.split.val).any(|&i| i >= n) {
        return Err(Error::Parse("split index out of range".into()));
    }
    let samples = records
        .into_iter()
        .zip(file.samples)
        .map(|((label, shape, data), meta)| Sample { shape, data, label, meta })
        .collect();
    Ok(Dataset { samples, normalization: file.normalization, split: file.split, manifest: file.manifest })
}

/// CSV with columns `time,bus,feature,value`; bus is the external number.
pub fn sample_to_csv(dataset: &Dataset, index: usize) -> String {
    let m = &dataset.manifest;
    let s = &dataset.samples[index];
    let mut out = String::from("time,bus,feature,value\n");
    for t in 0..s.shape[2] {
        let time = m.window[0] + t as f64 / m.rate;
        for (b, bus) in m.bus_numbers.iter().enumerate() {
            for (f, feat) in m.features.iter().enumerate() {
                let v = s.data[(b * s.shape[1] + f) * s.shape[2] + t];
                out.push_str(&format!("{time},{bus},{},{v}\n", feat.name()));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_ieee24;
    use crate::pipeline::{assemble_dataset, FeatureId};

    fn small() -> Dataset {
        let sys = build_ieee24();
        assemble_dataset(&sys, &[3.0, 5.5], &[0.001, 0.004, 0.01], &FeatureId::ALL, [0.0, 1.0], Some(45.0), 2)
            .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let d = small();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&d, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back, d);
        let again = tempfile::tempdir().unwrap();
        save_dataset(&back, again.path()).unwrap();
        for f in [MANIFEST_FILE, SAMPLES_FILE] {
            assert_eq!(fs::read(dir.path().join(f)).unwrap(), fs::read(again.path().join(f)).unwrap());
        }
    }

    #[test]
    fn corruption_is_detected() {
        let d = small();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&d, dir.path()).unwrap();
        let path = dir.path().join(SAMPLES_FILE);
        let mut bytes = fs::read(&path).unwrap();
        let pos = bytes.len() / 2;
        bytes[pos] ^= 0x10;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Checksum { .. })));

        bytes.truncate(pos);
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Truncated(_))));

        fs::write(&path, b"").unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::BadMagic(_))));

        fs::write(&path, b"INRTDS99\0\0\0\0\0\0\0\0").unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Version(_))));
    }

    #[test]
    fn csv_export_layout() {
        let d = small();
        let csv = sample_to_csv(&d, 0);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "time,bus,feature,value");
        assert_eq!(lines.len(), 1 + 11 * 3 * 200);
        assert!(lines[1].starts_with("0,1,delta_omega,"));
    }
}
