//! File formats: the HTEN binary tensor container, simulation manifests,
//! solver trace CSV, and a flat-CSV interchange path.
//!
//! HTEN layout: magic `HTEN`, version byte (1), order byte, `order` u32
//! little-endian extents, dtype byte (1 = f64 little-endian), then the
//! payload in the canonical linearization. Round-trips are bit-exact.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::solver::{FusionMode, TraceRow};
use crate::tensor::{DenseTensor, Matrix};

const MAGIC: &[u8; 4] = b"HTEN";
const VERSION: u8 = 1;
const DTYPE_F64_LE: u8 = 1;

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Writes bytes to a sibling temp file and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let n = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = dir.join(format!(
        ".{}.tmp.{}.{}",
        path.file_name().and_then(|f| f.to_str()).unwrap_or("out"),
        std::process::id(),
        n
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_tensor(path: &Path, t: &DenseTensor) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 + t.len() * 8);
    bytes.extend_from_slice(MAGIC);
    bytes.push(VERSION);
    if t.order() > u8::MAX as usize {
        return Err(Error::InvalidArgument("tensor order exceeds 255".into()));
    }
    bytes.push(t.order() as u8);
    for &d in t.shape() {
        if d > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!("extent {d} exceeds u32")));
        }
        bytes.extend_from_slice(&(d as u32).to_le_bytes());
    }
    bytes.push(DTYPE_F64_LE);
    for &v in t.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &bytes)
}

pub fn read_tensor(path: &Path) -> Result<DenseTensor> {
    let mut f = fs::File::open(path)?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes)?;
    parse_tensor(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_tensor(bytes: &[u8]) -> Result<DenseTensor> {
    if bytes.len() < 6 {
        return Err(Error::Format("file too short for a header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic, expected HTEN".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!("unsupported version {}", bytes[4])));
    }
    let order = bytes[5] as usize;
    let mut off = 6;
    if bytes.len() < off + 4 * order + 1 {
        return Err(Error::Format("truncated dimension table".into()));
    }
    let mut shape = Vec::with_capacity(order);
    for _ in 0..order {
        let d = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
        shape.push(d);
        off += 4;
    }
    if bytes[off] != DTYPE_F64_LE {
        return Err(Error::Format(format!("unsupported dtype {}", bytes[off])));
    }
    off += 1;
    let expect: usize = shape.iter().product();
    if bytes.len() != off + expect * 8 {
        return Err(Error::Format(format!(
            "payload is {} bytes, header implies {}",
            bytes.len() - off,
            expect * 8
        )));
    }
    let mut data = Vec::with_capacity(expect);
    for k in 0..expect {
        let s = off + k * 8;
        data.push(f64::from_le_bytes(bytes[s..s + 8].try_into().unwrap()));
    }
    DenseTensor::new(shape, data)
}

/// Matrices travel as order-2 tensors.
pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let t = DenseTensor::new(
        vec![m.nrows(), m.ncols()],
        m.iter().cloned().collect(),
    )?;
    write_tensor(path, &t)
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let t = read_tensor(path)?;
    if t.order() != 2 {
        return Err(Error::Format(format!(
            "{}: expected an order-2 tensor, got order {}",
            path.display(),
            t.order()
        )));
    }
    Matrix::from_shape_vec((t.shape()[0], t.shape()[1]), t.data().to_vec())
        .map_err(|e| Error::Format(e.to_string()))
}

/// Everything needed to reproduce a simulation run bit-exactly, plus the
/// operator and output file names (relative to the manifest directory).
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationManifest {
    pub hr_shape: [usize; 3],
    pub spatial_factor: usize,
    pub kernel_size: usize,
    /// Empty when the spectral operator came from an explicit response file.
    pub band_groups: Vec<(usize, usize)>,
    pub snr_db: f64,
    pub seed: u64,
    pub scale_max: f64,
    pub p1_file: String,
    pub p2_file: String,
    pub p3_file: String,
    pub y_file: String,
    pub z_file: String,
    pub xref_file: String,
}

/// `0..23;23..46` style half-open group list.
pub fn format_band_groups(groups: &[(usize, usize)]) -> String {
    groups
        .iter()
        .map(|(lo, hi)| format!("{lo}..{hi}"))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn parse_band_groups(s: &str) -> Result<Vec<(usize, usize)>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|g| {
            let (lo, hi) = g
                .trim()
                .split_once("..")
                .ok_or_else(|| Error::Format(format!("bad band group {g:?}")))?;
            Ok((
                lo.parse()
                    .map_err(|_| Error::Format(format!("bad group bound {lo:?}")))?,
                hi.parse()
                    .map_err(|_| Error::Format(format!("bad group bound {hi:?}")))?,
            ))
        })
        .collect()
}

impl SimulationManifest {
    pub fn format(&self) -> String {
        let groups = format_band_groups(&self.band_groups);
        format!(
            "hr_shape={},{},{}\nspatial_factor={}\nkernel_size={}\nband_groups={}\nsnr_db={}\nseed={}\nscale_max={}\np1={}\np2={}\np3={}\ny={}\nz={}\nxref={}\n",
            self.hr_shape[0],
            self.hr_shape[1],
            self.hr_shape[2],
            self.spatial_factor,
            self.kernel_size,
            groups,
            fmt_f64(self.snr_db),
            self.seed,
            fmt_f64(self.scale_max),
            self.p1_file,
            self.p2_file,
            self.p3_file,
            self.y_file,
            self.z_file,
            self.xref_file,
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut fields = std::collections::HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("manifest line without '=': {line:?}")))?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| -> Result<&String> {
            fields
                .get(k)
                .ok_or_else(|| Error::Format(format!("manifest missing key {k:?}")))
        };
        let shape_parts: Vec<usize> = get("hr_shape")?
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| Error::Format(format!("bad hr_shape entry {s:?}"))))
            .collect::<Result<_>>()?;
        if shape_parts.len() != 3 {
            return Err(Error::Format("hr_shape needs three extents".into()));
        }
        let band_groups = parse_band_groups(get("band_groups")?)?;
        Ok(Self {
            hr_shape: [shape_parts[0], shape_parts[1], shape_parts[2]],
            spatial_factor: parse_num(get("spatial_factor")?)?,
            kernel_size: parse_num(get("kernel_size")?)?,
            band_groups,
            snr_db: parse_f64(get("snr_db")?)?,
            seed: parse_num(get("seed")?)?,
            scale_max: parse_f64(get("scale_max")?)?,
            p1_file: get("p1")?.clone(),
            p2_file: get("p2")?.clone(),
            p3_file: get("p3")?.clone(),
            y_file: get("y")?.clone(),
            z_file: get("z")?.clone(),
            xref_file: get("xref")?.clone(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.format().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Resolves a file reference relative to the manifest location.
    pub fn sibling(&self, manifest_path: &Path, file: &str) -> PathBuf {
        manifest_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(file)
    }
}

fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Format(format!("bad number {s:?}")))
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse::<T>()
        .map_err(|_| Error::Format(format!("bad number {s:?}")))
}

/// Trace CSV: one row per sweep. CTRF mode omits the `mu` and
/// `g0_g3_residual` columns; `nuclear_term` is written (as zero) either way.
pub fn format_trace_csv(rows: &[TraceRow], mode: FusionMode, wall_seconds: &[f64]) -> String {
    let mut out = String::new();
    match mode {
        FusionMode::Nctrf => {
            out.push_str(
                "iteration,objective,hsi_term,msi_term,nuclear_term,mu,g0_g3_residual,wall_seconds\n",
            );
        }
        FusionMode::Ctrf => {
            out.push_str("iteration,objective,hsi_term,msi_term,nuclear_term,wall_seconds\n");
        }
    }
    for (k, row) in rows.iter().enumerate() {
        let wall = wall_seconds.get(k).copied().unwrap_or(0.0);
        match mode {
            FusionMode::Nctrf => {
                out.push_str(&format!(
                    "{},{:?},{:?},{:?},{:?},{:?},{:?},{wall:.3}\n",
                    row.sweep,
                    row.objective,
                    row.hsi_term,
                    row.msi_term,
                    row.nuclear_term,
                    row.mu.unwrap_or(f64::NAN),
                    row.g0_g3_residual.unwrap_or(f64::NAN),
                ));
            }
            FusionMode::Ctrf => {
                out.push_str(&format!(
                    "{},{:?},{:?},{:?},{:?},{wall:.3}\n",
                    row.sweep, row.objective, row.hsi_term, row.msi_term, row.nuclear_term,
                ));
            }
        }
    }
    out
}

pub fn write_trace_csv(
    path: &Path,
    rows: &[TraceRow],
    mode: FusionMode,
    wall_seconds: &[f64],
) -> Result<()> {
    write_atomic(path, format_trace_csv(rows, mode, wall_seconds).as_bytes())
}

/// Writes a tensor as one value per line with a `.shape` sidecar.
pub fn export_tensor_csv(path: &Path, t: &DenseTensor) -> Result<()> {
    let mut body = String::with_capacity(t.len() * 20);
    for &v in t.data() {
        body.push_str(&format!("{v:?}\n"));
    }
    write_atomic(path, body.as_bytes())?;
    let shape = t
        .shape()
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(",");
    write_atomic(&sidecar_path(path), format!("{shape}\n").as_bytes())
}

/// Reads a flattened tensor back; the shape comes from the argument or the
/// `.shape` sidecar.
pub fn import_tensor_csv(path: &Path, shape: Option<Vec<usize>>) -> Result<DenseTensor> {
    let shape = match shape {
        Some(s) => s,
        None => {
            let text = fs::read_to_string(sidecar_path(path))?;
            text.trim()
                .split(',')
                .map(|s| parse_num::<usize>(s.trim()))
                .collect::<Result<_>>()?
        }
    };
    let body = fs::read_to_string(path)?;
    let data: Vec<f64> = body
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|tok| !tok.is_empty())
        .map(parse_f64)
        .collect::<Result<_>>()?;
    DenseTensor::new(shape, data)
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".shape");
    PathBuf::from(os)
}

/// One class label per line.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(parse_num)
        .collect()
}
