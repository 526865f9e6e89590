//! Bit-exact reader/writer for a defined NIfTI-1 single-file subset carrying
//! label volumes and probability volumes.
//!
//! Supported: magic `n+1\0`, datatypes uint8/int16/uint16/float32, `dim[0] ==
//! 3`, little-endian and byte-swapped headers, plain or gzip-compressed
//! streams (gzip detected by the 0x1f 0x8b magic). Two-file `ni1\0` pairs,
//! NIfTI-2 and DICOM are out of scope. The qform/sform affines are parsed
//! only to warn when the slice axis does not look like the third array
//! dimension; no spatial reorientation is performed.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian, WriteBytesExt};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{io_err, Error, Result};
use crate::volume::{Dims, LabelSemantics, LabelVolume, Spacing, TumorClass};

pub const HEADER_SIZE: usize = 348;
pub const MIN_VOX_OFFSET: u32 = 352;

pub const DT_UINT8: i16 = 2;
pub const DT_INT16: i16 = 4;
pub const DT_FLOAT32: i16 = 16;
pub const DT_UINT16: i16 = 512;

const MAGIC_SINGLE: [u8; 4] = *b"n+1\0";
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Relative tolerance when two files must agree on pixdim.
pub const PIXDIM_REL_TOL: f64 = 1e-5;
/// Probability values may exceed [0, 1] by at most this much before the
/// file is rejected; smaller excursions are clamped.
pub const PROBABILITY_CLAMP_TOL: f64 = 1e-6;

/// The header fields this subset reads, plus the affine rows kept for the
/// slice-axis sanity check.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeaderSubset {
    pub dim: [i16; 8],
    pub datatype: i16,
    pub bitpix: i16,
    pub pixdim: [f32; 8],
    pub vox_offset: u32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub magic: [u8; 4],
    pub sform_code: i16,
    pub srow: [[f32; 4]; 3],
    /// True when the on-disk header was byte-swapped relative to
    /// little-endian.
    pub swapped: bool,
}

impl NiftiHeaderSubset {
    pub fn dims(&self) -> Result<Dims> {
        Dims::new(
            self.dim[1] as usize,
            self.dim[2] as usize,
            self.dim[3] as usize,
        )
    }

    pub fn spacing(&self) -> Result<Spacing> {
        Spacing::new(
            self.pixdim[1] as f64,
            self.pixdim[2] as f64,
            self.pixdim[3] as f64,
        )
    }

    fn bytes_per_voxel(&self) -> usize {
        (self.bitpix / 8) as usize
    }

    /// Warns when the sform affine says the third array axis is not the
    /// scanner z axis. Orientation handling beyond this check is a non-goal;
    /// measurements are always taken on planes of the third dimension.
    pub fn slice_axis_warning(&self) -> Option<String> {
        if self.sform_code <= 0 {
            return None;
        }
        let col_z = [self.srow[0][2], self.srow[1][2], self.srow[2][2]];
        let dominant = col_z
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)?;
        if dominant != 2 {
            Some(format!(
                "sform affine maps the third array axis mostly onto world axis {dominant}; \
                 slices are still taken along the third array dimension"
            ))
        } else {
            None
        }
    }
}

struct Decoded {
    header: NiftiHeaderSubset,
    payload: Vec<u8>,
}

fn bad_header(path: &Path, reason: impl Into<String>) -> Error {
    Error::BadHeader {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn parse_header(path: &Path, raw: &[u8; HEADER_SIZE]) -> Result<NiftiHeaderSubset> {
    // Detect byte order from dim[0] (offset 40), which must be in 1..=7.
    let dim0_le = LittleEndian::read_i16(&raw[40..42]);
    let swapped = if (1..=7).contains(&dim0_le) {
        false
    } else if (1..=7).contains(&BigEndian::read_i16(&raw[40..42])) {
        true
    } else {
        return Err(bad_header(path, "dim[0] out of range in both byte orders"));
    };

    macro_rules! rd {
        (i32, $off:expr) => {
            if swapped {
                BigEndian::read_i32(&raw[$off..$off + 4])
            } else {
                LittleEndian::read_i32(&raw[$off..$off + 4])
            }
        };
        (i16, $off:expr) => {
            if swapped {
                BigEndian::read_i16(&raw[$off..$off + 2])
            } else {
                LittleEndian::read_i16(&raw[$off..$off + 2])
            }
        };
        (f32, $off:expr) => {
            if swapped {
                BigEndian::read_f32(&raw[$off..$off + 4])
            } else {
                LittleEndian::read_f32(&raw[$off..$off + 4])
            }
        };
    }

    let sizeof_hdr = rd!(i32, 0);
    if sizeof_hdr != HEADER_SIZE as i32 {
        return Err(bad_header(path, format!("sizeof_hdr is {sizeof_hdr}, must be 348")));
    }

    let mut magic = [0u8; 4];
    magic.copy_from_slice(&raw[344..348]);
    if magic != MAGIC_SINGLE {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found: magic,
        });
    }

    let mut dim = [0i16; 8];
    for (i, d) in dim.iter_mut().enumerate() {
        *d = rd!(i16, 40 + 2 * i);
    }
    if dim[0] != 3 {
        return Err(bad_header(path, format!("dim[0] is {}, this subset requires 3", dim[0])));
    }
    if dim[1] < 1 || dim[2] < 1 || dim[3] < 1 {
        return Err(bad_header(path, format!("dim[1..3] must all be >= 1, got {:?}", &dim[1..4])));
    }

    let datatype = rd!(i16, 70);
    if ![DT_UINT8, DT_INT16, DT_UINT16, DT_FLOAT32].contains(&datatype) {
        return Err(Error::UnsupportedDatatype {
            path: path.to_path_buf(),
            code: datatype,
        });
    }
    let bitpix = rd!(i16, 72);
    let expected_bitpix = match datatype {
        DT_UINT8 => 8,
        DT_INT16 | DT_UINT16 => 16,
        _ => 32,
    };
    if bitpix != expected_bitpix {
        return Err(bad_header(
            path,
            format!("bitpix {bitpix} does not match datatype {datatype} (expected {expected_bitpix})"),
        ));
    }

    let mut pixdim = [0f32; 8];
    for (i, p) in pixdim.iter_mut().enumerate() {
        *p = rd!(f32, 76 + 4 * i);
    }
    for (i, &p) in pixdim.iter().enumerate().take(4).skip(1) {
        if !(p.is_finite() && p > 0.0) {
            return Err(bad_header(path, format!("pixdim[{i}] must be finite and > 0, got {p}")));
        }
    }

    let vox_offset_f = rd!(f32, 108);
    if !(vox_offset_f.is_finite() && vox_offset_f >= MIN_VOX_OFFSET as f32 && vox_offset_f.fract() == 0.0)
    {
        return Err(bad_header(path, format!("vox_offset {vox_offset_f} invalid (must be integral and >= 352)")));
    }

    let mut srow = [[0f32; 4]; 3];
    for (r, row) in srow.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = rd!(f32, 280 + 16 * r + 4 * c);
        }
    }

    Ok(NiftiHeaderSubset {
        dim,
        datatype,
        bitpix,
        pixdim,
        vox_offset: vox_offset_f as u32,
        scl_slope: rd!(f32, 112),
        scl_inter: rd!(f32, 116),
        magic,
        sform_code: rd!(i16, 254),
        srow,
        swapped,
    })
}

/// Reads the header plus exactly the header-declared payload; anything
/// shorter is a truncation error, never a partial volume.
fn read_decoded(path: &Path) -> Result<Decoded> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut head = [0u8; 2];
    let mut probe = BufReader::new(file);
    let n = probe.read(&mut head).map_err(io_err(path))?;
    let file = probe.into_inner();
    let gz = n == 2 && head == GZIP_MAGIC;

    // Restart the stream from the beginning with the right decoder.
    let file = {
        use std::io::Seek;
        let mut f = file;
        f.seek(std::io::SeekFrom::Start(0)).map_err(io_err(path))?;
        f
    };
    let mut reader: Box<dyn Read> = if gz {
        Box::new(GzDecoder::new(BufReader::new(file)))
    } else {
        Box::new(BufReader::new(file))
    };

    let mut raw = [0u8; HEADER_SIZE];
    reader.read_exact(&mut raw).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::TruncatedPayload {
                path: path.to_path_buf(),
                expected: HEADER_SIZE,
                actual: 0,
            }
        } else {
            io_err(path)(e)
        }
    })?;
    let header = parse_header(path, &raw)?;

    let dims = header.dims()?;
    let nvox = dims.len();
    let nbytes = nvox
        .checked_mul(header.bytes_per_voxel())
        .ok_or_else(|| Error::DimsOverflow {
            path: path.to_path_buf(),
            dims: [header.dim[1], header.dim[2], header.dim[3]],
        })?;

    // Skip any extension bytes between the header and vox_offset.
    let skip = header.vox_offset as usize - HEADER_SIZE;
    std::io::copy(&mut reader.by_ref().take(skip as u64), &mut std::io::sink())
        .map_err(io_err(path))?;

    // `take` bounds the allocation at the declared payload size.
    let mut payload = Vec::new();
    reader
        .by_ref()
        .take(nbytes as u64)
        .read_to_end(&mut payload)
        .map_err(io_err(path))?;
    if payload.len() < nbytes {
        return Err(Error::TruncatedPayload {
            path: path.to_path_buf(),
            expected: nbytes,
            actual: payload.len(),
        });
    }

    Ok(Decoded { header, payload })
}

fn check_label_scaling(path: &Path, header: &NiftiHeaderSubset) -> Result<()> {
    if !(header.scl_slope == 0.0 || header.scl_slope == 1.0) || header.scl_inter != 0.0 {
        return Err(bad_header(
            path,
            format!(
                "label volume must not carry intensity scaling (scl_slope {}, scl_inter {})",
                header.scl_slope, header.scl_inter
            ),
        ));
    }
    Ok(())
}

fn decode_labels(path: &Path, header: &NiftiHeaderSubset, payload: &[u8]) -> Result<Vec<u8>> {
    let swapped = header.swapped;
    let n = header.dims()?.len();
    let mut labels = Vec::with_capacity(n);
    match header.datatype {
        DT_UINT8 => labels.extend_from_slice(payload),
        DT_INT16 | DT_UINT16 => {
            for i in 0..n {
                let chunk = &payload[2 * i..2 * i + 2];
                let v: i64 = if header.datatype == DT_INT16 {
                    if swapped {
                        BigEndian::read_i16(chunk) as i64
                    } else {
                        LittleEndian::read_i16(chunk) as i64
                    }
                } else if swapped {
                    BigEndian::read_u16(chunk) as i64
                } else {
                    LittleEndian::read_u16(chunk) as i64
                };
                if !(0..=255).contains(&v) {
                    return Err(Error::LabelOutOfRange {
                        path: path.to_path_buf(),
                        index: i,
                        value: v as f64,
                    });
                }
                labels.push(v as u8);
            }
        }
        DT_FLOAT32 => {
            for i in 0..n {
                let chunk = &payload[4 * i..4 * i + 4];
                let v = if swapped {
                    BigEndian::read_f32(chunk)
                } else {
                    LittleEndian::read_f32(chunk)
                } as f64;
                if !v.is_finite() || v.fract() != 0.0 {
                    return Err(Error::NonIntegerLabel {
                        path: path.to_path_buf(),
                        index: i,
                        value: v,
                    });
                }
                if !(0.0..=255.0).contains(&v) {
                    return Err(Error::LabelOutOfRange {
                        path: path.to_path_buf(),
                        index: i,
                        value: v,
                    });
                }
                labels.push(v as u8);
            }
        }
        _ => unreachable!("datatype validated during header parse"),
    }
    Ok(labels)
}

/// Reads a label volume using the default 0/1/2/3 label semantics.
pub fn read_label_volume(path: impl AsRef<Path>) -> Result<LabelVolume> {
    read_label_volume_with(path, LabelSemantics::default())
}

/// Reads a label volume interpreting stored values through `semantics`.
pub fn read_label_volume_with(
    path: impl AsRef<Path>,
    semantics: LabelSemantics,
) -> Result<LabelVolume> {
    let path = path.as_ref();
    let decoded = read_decoded(path)?;
    check_label_scaling(path, &decoded.header)?;
    let labels = decode_labels(path, &decoded.header, &decoded.payload)?;
    LabelVolume::new(
        decoded.header.dims()?,
        decoded.header.spacing()?,
        labels,
        semantics,
    )
}

/// Reads a label volume and also returns its parsed header subset (for
/// affine warnings and provenance).
pub fn read_label_volume_with_header(
    path: impl AsRef<Path>,
    semantics: LabelSemantics,
) -> Result<(LabelVolume, NiftiHeaderSubset)> {
    let path = path.as_ref();
    let decoded = read_decoded(path)?;
    check_label_scaling(path, &decoded.header)?;
    let labels = decode_labels(path, &decoded.header, &decoded.payload)?;
    let vol = LabelVolume::new(
        decoded.header.dims()?,
        decoded.header.spacing()?,
        labels,
        semantics,
    )?;
    Ok((vol, decoded.header))
}

/// Per-class softmax probability channels sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVolume {
    dims: Dims,
    spacing: Spacing,
    channels: [Vec<f64>; 3],
}

impl ProbabilityVolume {
    pub fn new(dims: Dims, spacing: Spacing, channels: [Vec<f64>; 3]) -> Result<Self> {
        for ch in &channels {
            if ch.len() != dims.len() {
                return Err(Error::LabelLengthMismatch {
                    expected: dims.len(),
                    actual: ch.len(),
                });
            }
            if ch.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::InvalidParameter(
                    "probability channel contains values outside [0, 1]".into(),
                ));
            }
        }
        Ok(ProbabilityVolume {
            dims,
            spacing,
            channels,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn channel(&self, class: TumorClass) -> &[f64] {
        match class {
            TumorClass::Et => &self.channels[0],
            TumorClass::Ed => &self.channels[1],
            TumorClass::Cavity => &self.channels[2],
        }
    }
}

/// Reads the three per-class probability channels (ET, ED, cavity order).
/// All files must be float32 and share dims and pixdim (relative tolerance
/// 1e-5 on pixdim). Values within 1e-6 outside [0, 1] are clamped; anything
/// farther out is rejected.
pub fn read_probability_volume(paths: [&Path; 3]) -> Result<ProbabilityVolume> {
    let mut dims: Option<Dims> = None;
    let mut spacing: Option<Spacing> = None;
    let mut channels: Vec<Vec<f64>> = Vec::with_capacity(3);

    for path in paths {
        let decoded = read_decoded(path)?;
        let header = &decoded.header;
        if header.datatype != DT_FLOAT32 {
            return Err(bad_header(
                path,
                format!("probability channel must be float32 (datatype 16), got {}", header.datatype),
            ));
        }
        check_label_scaling(path, header)?;
        let d = header.dims()?;
        let s = header.spacing()?;
        match (&dims, &spacing) {
            (None, _) => {
                dims = Some(d);
                spacing = Some(s);
            }
            (Some(d0), Some(s0)) => {
                if d != *d0 {
                    return Err(Error::DimsMismatch {
                        a: d0.as_array(),
                        b: d.as_array(),
                    });
                }
                if !s0.approx_eq(&s, PIXDIM_REL_TOL) {
                    return Err(Error::SpacingMismatch {
                        a: s0.as_array(),
                        b: s.as_array(),
                    });
                }
            }
            _ => unreachable!(),
        }

        let n = d.len();
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            let chunk = &decoded.payload[4 * i..4 * i + 4];
            let v = if header.swapped {
                BigEndian::read_f32(chunk)
            } else {
                LittleEndian::read_f32(chunk)
            } as f64;
            if !v.is_finite() || v < -PROBABILITY_CLAMP_TOL || v > 1.0 + PROBABILITY_CLAMP_TOL {
                return Err(Error::ProbabilityOutOfRange {
                    path: path.to_path_buf(),
                    index: i,
                    value: v,
                });
            }
            values.push(v.clamp(0.0, 1.0));
        }
        channels.push(values);
    }

    let [et, ed, cavity]: [Vec<f64>; 3] = channels.try_into().expect("three channels");
    ProbabilityVolume::new(dims.unwrap(), spacing.unwrap(), [et, ed, cavity])
}

fn encode_header(dims: Dims, spacing: Spacing, datatype: i16, bitpix: i16) -> Vec<u8> {
    let mut h = vec![0u8; HEADER_SIZE];
    LittleEndian::write_i32(&mut h[0..4], HEADER_SIZE as i32);
    let dim: [i16; 8] = [
        3,
        dims.nx as i16,
        dims.ny as i16,
        dims.nz as i16,
        1,
        1,
        1,
        1,
    ];
    for (i, d) in dim.iter().enumerate() {
        LittleEndian::write_i16(&mut h[40 + 2 * i..42 + 2 * i], *d);
    }
    LittleEndian::write_i16(&mut h[70..72], datatype);
    LittleEndian::write_i16(&mut h[72..74], bitpix);
    let pixdim: [f32; 8] = [
        1.0,
        spacing.dx as f32,
        spacing.dy as f32,
        spacing.dz as f32,
        0.0,
        0.0,
        0.0,
        0.0,
    ];
    for (i, p) in pixdim.iter().enumerate() {
        LittleEndian::write_f32(&mut h[76 + 4 * i..80 + 4 * i], *p);
    }
    LittleEndian::write_f32(&mut h[108..112], MIN_VOX_OFFSET as f32);
    LittleEndian::write_f32(&mut h[112..116], 1.0); // scl_slope
    LittleEndian::write_f32(&mut h[116..120], 0.0); // scl_inter
    h[123] = 2; // xyzt_units: millimeters
    h[344..348].copy_from_slice(&MAGIC_SINGLE);
    h
}

fn open_writer(path: &Path) -> Result<Box<dyn Write>> {
    let file = File::create(path).map_err(io_err(path))?;
    let buf = BufWriter::new(file);
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(GzEncoder::new(buf, Compression::default())))
    } else {
        Ok(Box::new(buf))
    }
}

/// Writes a label volume as single-file NIfTI-1, datatype uint8, with fully
/// deterministic header bytes. `read_label_volume(write_label_volume(v))`
/// round-trips exactly. A `.gz` extension selects gzip output.
pub fn write_label_volume(v: &LabelVolume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = open_writer(path)?;
    let header = encode_header(v.dims(), v.spacing(), DT_UINT8, 8);
    w.write_all(&header).map_err(io_err(path))?;
    w.write_all(&[0u8; 4]).map_err(io_err(path))?; // no extensions
    w.write_all(v.labels()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Writes a float32 volume (e.g. a probability channel) in the same subset.
pub fn write_float_volume(
    dims: Dims,
    spacing: Spacing,
    values: &[f64],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if values.len() != dims.len() {
        return Err(Error::LabelLengthMismatch {
            expected: dims.len(),
            actual: values.len(),
        });
    }
    let mut w = open_writer(path)?;
    let header = encode_header(dims, spacing, DT_FLOAT32, 32);
    w.write_all(&header).map_err(io_err(path))?;
    w.write_all(&[0u8; 4]).map_err(io_err(path))?;
    for &v in values {
        w.write_f32::<LittleEndian>(v as f32).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}
