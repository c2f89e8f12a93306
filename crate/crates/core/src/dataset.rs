//! Reproducible datasets of channel realizations.
//!
//! A dataset directory holds `manifest.json` and `records.bin`. Sample `i`
//! is generated from seed `master_seed + i`; the first `n_train` samples form
//! the training split and the rest the validation split.
//!
//! `records.bin` layout, little-endian:
//!
//! ```text
//! magic    b"RISD"
//! version  u32
//! count    u64
//! record*  len u64 (bytes after this field), seed u64, arrays u32, array*
//! array    name_len u32, name utf-8, kind u8 (0 real, 1 complex),
//!          rows u64, cols u64, row-major f64 data (complex as re, im)
//! ```
//!
//! Arrays per record: `ue_positions` (K×3), `blockages` (B×5: center x,
//! center y, length, width, orientation), `direct_links` and `ris_links`
//! (K×2: los, clamped), `h_direct`, `g_ris`, `h_rb`, `w`.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alloc::mrt_beamformers;
use crate::binio::{put_f64s, put_u32, put_u64, Reader};
use crate::channel::{synth_channels, ChannelSet, LinkState};
use crate::error::{Error, Result};
use crate::metrics::Beamformers;
use crate::netgeom::{Blockage, Deployment, ScenarioConfig};
use crate::{CMat, C64};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "records.bin";
const RECORDS_MAGIC: &[u8; 4] = b"RISD";

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub seed: u64,
    pub deployment: Deployment,
    pub channels: ChannelSet,
    pub beamformers: Beamformers,
}

impl Sample {
    /// Draws the sample for `seed`, with MRT beamformers at full power.
    pub fn generate(config: &ScenarioConfig, seed: u64) -> Result<Self> {
        let deployment = Deployment::generate(config, seed)?;
        let channels = synth_channels(config, &deployment, seed)?;
        let beamformers = mrt_beamformers(&channels, config.tx_power_watts())?;
        Ok(Self {
            seed,
            deployment,
            channels,
            beamformers,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub config: ScenarioConfig,
    pub master_seed: u64,
    pub n_train: usize,
    pub n_val: usize,
    pub sample_count: usize,
    /// Hex SHA-256 of `records.bin`.
    pub records_sha256: String,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn train(&self) -> &[Sample] {
        &self.samples[..self.manifest.n_train]
    }

    pub fn validation(&self) -> &[Sample] {
        &self.samples[self.manifest.n_train..]
    }
}

/// Generates `n_train + n_val` samples in parallel and writes them to `dir`.
pub fn generate_dataset(
    config: &ScenarioConfig,
    n_train: usize,
    n_val: usize,
    master_seed: u64,
    dir: &Path,
) -> Result<DatasetManifest> {
    if n_train == 0 || n_val == 0 {
        return Err(Error::InvalidInput(format!(
            "both splits need at least one sample, got {n_train} train / {n_val} validation"
        )));
    }
    config.validate()?;
    let total = n_train + n_val;
    let samples = (0..total as u64)
        .into_par_iter()
        .map(|i| Sample::generate(config, master_seed.wrapping_add(i)))
        .collect::<Result<Vec<_>>>()?;
    save_dataset(config, &samples, n_train, master_seed, dir)
}

/// Writes samples and their manifest to `dir`, creating it if needed.
pub fn save_dataset(
    config: &ScenarioConfig,
    samples: &[Sample],
    n_train: usize,
    master_seed: u64,
    dir: &Path,
) -> Result<DatasetManifest> {
    if n_train > samples.len() {
        return Err(Error::InvalidInput(format!(
            "training split {n_train} exceeds {} samples",
            samples.len()
        )));
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(RECORDS_MAGIC);
    put_u32(&mut buf, FORMAT_VERSION);
    put_u64(&mut buf, samples.len() as u64);
    for s in samples {
        let body = encode_record(s);
        put_u64(&mut buf, body.len() as u64);
        buf.extend_from_slice(&body);
    }
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        config: config.clone(),
        master_seed,
        n_train,
        n_val: samples.len() - n_train,
        sample_count: samples.len(),
        records_sha256: hex::encode(Sha256::digest(&buf)),
    };
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(RECORDS_FILE), &buf)?;
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    std::fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(manifest)
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    // Check the version before the schema so old files get a version error.
    if let Some(v) = value.get("format_version").and_then(|v| v.as_u64()) {
        if v != FORMAT_VERSION as u64 {
            return Err(Error::VersionMismatch {
                file: path_str(&path),
                found: u32::try_from(v).unwrap_or(u32::MAX),
                expected: FORMAT_VERSION,
            });
        }
    }
    Ok(serde_json::from_value(value)?)
}

/// Loads and verifies a dataset. Version, truncation and checksum problems
/// are reported as distinct errors, checked in that order.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = read_manifest(dir)?;
    let path: PathBuf = dir.join(RECORDS_FILE);
    let file = path_str(&path);
    let bytes = std::fs::read(&path)?;

    let mut r = Reader::new(&bytes, &file);
    if r.take(4, "magic")? != RECORDS_MAGIC {
        return Err(r.corrupt("not a dataset record file (bad magic)"));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            file,
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let count = r.len("record count")?;
    let mut samples = Vec::with_capacity(count.min(1 << 20));
    for i in 0..count {
        let len = r.len("record length")?;
        let body = r.take(len, &format!("record {i}"))?;
        samples.push(decode_record(body, &file)?);
    }
    if r.remaining() != 0 {
        return Err(r.corrupt(&format!(
            "{} trailing bytes after {count} records",
            r.remaining()
        )));
    }
    let digest = hex::encode(Sha256::digest(&bytes));
    if digest != manifest.records_sha256 {
        return Err(Error::Checksum {
            file,
            expected: manifest.records_sha256.clone(),
            found: digest,
        });
    }
    if count != manifest.sample_count || manifest.n_train + manifest.n_val != count {
        return Err(Error::Corrupt {
            file,
            detail: format!(
                "manifest lists {} samples ({} + {}), file holds {count}",
                manifest.sample_count, manifest.n_train, manifest.n_val
            ),
        });
    }
    Ok(Dataset { manifest, samples })
}

enum Array {
    Real(DMatrix<f64>),
    Complex(CMat),
}

fn put_array(out: &mut Vec<u8>, name: &str, a: &Array) {
    put_u32(out, name.len() as u32);
    out.extend_from_slice(name.as_bytes());
    match a {
        Array::Real(m) => {
            out.push(0);
            put_u64(out, m.nrows() as u64);
            put_u64(out, m.ncols() as u64);
            put_f64s(out, m.transpose().iter().copied());
        }
        Array::Complex(m) => {
            out.push(1);
            put_u64(out, m.nrows() as u64);
            put_u64(out, m.ncols() as u64);
            put_f64s(out, m.transpose().iter().flat_map(|z| [z.re, z.im]));
        }
    }
}

fn links_matrix(links: &[LinkState]) -> DMatrix<f64> {
    DMatrix::from_fn(links.len(), 2, |r, c| {
        let flag = if c == 0 {
            links[r].los
        } else {
            links[r].clamped
        };
        f64::from(u8::from(flag))
    })
}

fn encode_record(s: &Sample) -> Vec<u8> {
    let d = &s.deployment;
    let ues = DMatrix::from_fn(d.ue_positions.len(), 3, |r, c| d.ue_positions[r][c]);
    let blocks = DMatrix::from_fn(d.blockages.len(), 5, |r, c| {
        let b = &d.blockages[r];
        [b.center[0], b.center[1], b.length, b.width, b.orientation][c]
    });
    let ch = &s.channels;
    let arrays = [
        ("ue_positions", Array::Real(ues)),
        ("blockages", Array::Real(blocks)),
        ("direct_links", Array::Real(links_matrix(&ch.direct_links))),
        ("ris_links", Array::Real(links_matrix(&ch.ris_links))),
        ("h_direct", Array::Complex(ch.h_direct.clone())),
        ("g_ris", Array::Complex(ch.g_ris.clone())),
        ("h_rb", Array::Complex(ch.h_rb.clone())),
        ("w", Array::Complex(s.beamformers.w.clone())),
    ];
    let mut out = Vec::new();
    put_u64(&mut out, s.seed);
    put_u32(&mut out, arrays.len() as u32);
    for (name, a) in &arrays {
        put_array(&mut out, name, a);
    }
    out
}

fn read_array(r: &mut Reader) -> Result<(String, Array)> {
    let name_len = r.u32("array name length")? as usize;
    let name = String::from_utf8(r.take(name_len, "array name")?.to_vec())
        .map_err(|_| r.corrupt("array name is not UTF-8"))?;
    let kind = r.take(1, "array kind")?[0];
    let rows = r.len("array rows")?;
    let cols = r.len("array cols")?;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| r.corrupt("array size overflow"))?;
    let array = match kind {
        0 => Array::Real(DMatrix::from_row_slice(rows, cols, &r.f64s(n, &name)?)),
        1 => {
            let data = r.f64s(
                n.checked_mul(2)
                    .ok_or_else(|| r.corrupt("array size overflow"))?,
                &name,
            )?;
            let values: Vec<C64> = data.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
            Array::Complex(DMatrix::from_row_slice(rows, cols, &values))
        }
        other => return Err(r.corrupt(&format!("array `{name}` has unknown kind {other}"))),
    };
    Ok((name, array))
}

fn decode_record(body: &[u8], file: &str) -> Result<Sample> {
    let mut r = Reader::new(body, file);
    let seed = r.u64("sample seed")?;
    let n = r.u32("array count")? as usize;
    let mut arrays = Vec::with_capacity(n);
    for _ in 0..n {
        arrays.push(read_array(&mut r)?);
    }
    if r.remaining() != 0 {
        return Err(r.corrupt("record length disagrees with its arrays"));
    }
    let mut find = |name: &str| -> Result<Array> {
        let pos = arrays
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::Corrupt {
                file: file.to_string(),
                detail: format!("record for seed {seed} lacks array `{name}`"),
            })?;
        Ok(arrays.swap_remove(pos).1)
    };
    let wrong_kind = |name: &str| Error::Corrupt {
        file: file.to_string(),
        detail: format!("array `{name}` has the wrong kind or shape"),
    };
    let real = |a: Array, name: &str, cols: usize| match a {
        Array::Real(m) if m.ncols() == cols || m.nrows() == 0 => Ok(m),
        _ => Err(wrong_kind(name)),
    };
    let complex = |a: Array, name: &str| match a {
        Array::Complex(m) => Ok(m),
        _ => Err(wrong_kind(name)),
    };
    let links = |m: DMatrix<f64>| -> Vec<LinkState> {
        (0..m.nrows())
            .map(|r| LinkState {
                los: m[(r, 0)] != 0.0,
                clamped: m[(r, 1)] != 0.0,
            })
            .collect()
    };

    let ues = real(find("ue_positions")?, "ue_positions", 3)?;
    let blocks = real(find("blockages")?, "blockages", 5)?;
    let direct_links = links(real(find("direct_links")?, "direct_links", 2)?);
    let ris_links = links(real(find("ris_links")?, "ris_links", 2)?);
    let channels = ChannelSet {
        h_direct: complex(find("h_direct")?, "h_direct")?,
        g_ris: complex(find("g_ris")?, "g_ris")?,
        h_rb: complex(find("h_rb")?, "h_rb")?,
        direct_links,
        ris_links,
    };
    channels.validate().map_err(|e| Error::Corrupt {
        file: file.to_string(),
        detail: format!("record for seed {seed}: {e}"),
    })?;
    let w = complex(find("w")?, "w")?;
    Ok(Sample {
        seed,
        deployment: Deployment {
            ue_positions: (0..ues.nrows())
                .map(|r| [ues[(r, 0)], ues[(r, 1)], ues[(r, 2)]])
                .collect(),
            blockages: (0..blocks.nrows())
                .map(|r| Blockage {
                    center: [blocks[(r, 0)], blocks[(r, 1)]],
                    length: blocks[(r, 2)],
                    width: blocks[(r, 3)],
                    orientation: blocks[(r, 4)],
                })
                .collect(),
        },
        channels,
        beamformers: Beamformers { w },
    })
}
