//! Plain EDF reader and writer.
//!
//! Only continuous EDF is supported. Signals labeled `EDF Annotations` are
//! skipped on read; every other signal must share one sampling rate.

use std::path::Path;

use nalgebra::DMatrix;

use super::Recording;
use crate::{Error, Result};

const FIXED_HEADER: usize = 256;
const PER_SIGNAL: usize = 256;
const DIGITAL_MIN: i32 = -32768;
const DIGITAL_MAX: i32 = 32767;

/// Per-signal header fields, in on-disk order with their widths.
const SIGNAL_FIELDS: [(&str, usize); 10] = [
    ("label", 16),
    ("transducer", 80),
    ("physical dimension", 8),
    ("physical minimum", 8),
    ("physical maximum", 8),
    ("digital minimum", 8),
    ("digital maximum", 8),
    ("prefiltering", 80),
    ("samples per record", 8),
    ("reserved", 32),
];

#[derive(Debug, Clone)]
struct SignalHeader {
    label: String,
    physical_min: f64,
    physical_max: f64,
    digital_min: i32,
    digital_max: i32,
    samples_per_record: usize,
}

impl SignalHeader {
    fn is_annotation(&self) -> bool {
        self.label.trim() == "EDF Annotations"
    }

    fn gain(&self) -> f64 {
        (self.physical_max - self.physical_min) / (self.digital_max - self.digital_min) as f64
    }

    fn to_physical(&self, digital: i16) -> f64 {
        self.physical_min + (digital as i32 - self.digital_min) as f64 * self.gain()
    }
}

pub fn read_edf(path: impl AsRef<Path>) -> Result<Recording> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_edf(&bytes)
}

fn ascii_field(bytes: &[u8], offset: usize, width: usize, name: &str) -> Result<String> {
    let end = offset + width;
    if bytes.len() < end {
        return Err(Error::parse(
            format!("byte {offset}"),
            format!("header truncated while reading {name}"),
        ));
    }
    let raw = &bytes[offset..end];
    if !raw.is_ascii() {
        return Err(Error::parse(
            format!("byte {offset}"),
            format!("{name} is not ASCII"),
        ));
    }
    Ok(String::from_utf8_lossy(raw).trim().to_string())
}

fn numeric_field<T: std::str::FromStr>(
    bytes: &[u8],
    offset: usize,
    width: usize,
    name: &str,
) -> Result<T> {
    let text = ascii_field(bytes, offset, width, name)?;
    text.parse::<T>().map_err(|_| {
        Error::parse(
            format!("byte {offset}"),
            format!("{name} {text:?} is not a number"),
        )
    })
}

/// Parses an in-memory EDF file.
pub fn parse_edf(bytes: &[u8]) -> Result<Recording> {
    let version = ascii_field(bytes, 0, 8, "version")?;
    if version != "0" {
        return Err(Error::parse(
            "byte 0",
            format!("unknown EDF version {version:?}"),
        ));
    }
    let header_bytes: usize = numeric_field(bytes, 184, 8, "header size")?;
    let reserved = ascii_field(bytes, 192, 44, "reserved")?;
    if reserved.starts_with("EDF+D") {
        return Err(Error::Unsupported("discontinuous EDF+ recordings".into()));
    }
    let declared_records: i64 = numeric_field(bytes, 236, 8, "number of data records")?;
    let record_duration: f64 = numeric_field(bytes, 244, 8, "data record duration")?;
    let signal_count: usize = numeric_field(bytes, 252, 4, "number of signals")?;
    if signal_count == 0 {
        return Err(Error::parse("byte 252", "file declares no signals"));
    }
    if header_bytes != FIXED_HEADER + PER_SIGNAL * signal_count {
        return Err(Error::parse(
            "byte 184",
            format!("header size {header_bytes} does not match {signal_count} signals"),
        ));
    }
    if !(record_duration.is_finite() && record_duration > 0.0) {
        return Err(Error::parse(
            "byte 244",
            format!("record duration must be positive, got {record_duration}"),
        ));
    }

    // field_offsets[f] = start of the block holding field f for all signals
    let mut field_offsets = [0usize; SIGNAL_FIELDS.len()];
    let mut cursor = FIXED_HEADER;
    for (slot, (_, width)) in field_offsets.iter_mut().zip(SIGNAL_FIELDS) {
        *slot = cursor;
        cursor += width * signal_count;
    }
    let field = |f: usize, s: usize| {
        let (name, width) = SIGNAL_FIELDS[f];
        (field_offsets[f] + s * width, width, name)
    };

    let mut signals = Vec::with_capacity(signal_count);
    for s in 0..signal_count {
        let (o, w, n) = field(0, s);
        let label = ascii_field(bytes, o, w, n)?;
        let (o, w, n) = field(3, s);
        let physical_min: f64 = numeric_field(bytes, o, w, n)?;
        let (o, w, n) = field(4, s);
        let physical_max: f64 = numeric_field(bytes, o, w, n)?;
        let (o, w, n) = field(5, s);
        let digital_min: i32 = numeric_field(bytes, o, w, n)?;
        let (o, w, n) = field(6, s);
        let digital_max: i32 = numeric_field(bytes, o, w, n)?;
        let (o, w, n) = field(8, s);
        let samples_per_record: usize = numeric_field(bytes, o, w, n)?;
        if digital_max <= digital_min {
            let (o, _, _) = field(5, s);
            return Err(Error::parse(
                format!("byte {o}"),
                format!("signal {label:?} has empty digital range"),
            ));
        }
        if physical_max == physical_min {
            let (o, _, _) = field(3, s);
            return Err(Error::parse(
                format!("byte {o}"),
                format!("signal {label:?} has empty physical range"),
            ));
        }
        signals.push(SignalHeader {
            label,
            physical_min,
            physical_max,
            digital_min,
            digital_max,
            samples_per_record,
        });
    }

    let record_samples: usize = signals.iter().map(|s| s.samples_per_record).sum();
    let record_bytes = 2 * record_samples;
    let data = &bytes[header_bytes.min(bytes.len())..];
    let record_count = if declared_records < 0 {
        // -1: unknown, derive from file size
        data.len() / record_bytes.max(1)
    } else {
        declared_records as usize
    };

    let eeg: Vec<usize> = (0..signal_count)
        .filter(|&s| !signals[s].is_annotation())
        .collect();
    if eeg.is_empty() {
        return Err(Error::parse(
            "byte 256",
            "file holds only annotation signals",
        ));
    }
    let spr = signals[eeg[0]].samples_per_record;
    if let Some(&odd) = eeg.iter().find(|&&s| signals[s].samples_per_record != spr) {
        return Err(Error::Unsupported(format!(
            "mixed sampling rates: {} has {} samples per record, {} has {}",
            signals[eeg[0]].label, spr, signals[odd].label, signals[odd].samples_per_record
        )));
    }

    let total = record_count * spr;
    if total < 2 {
        return Err(Error::parse(
            "byte 236",
            format!("{record_count} data records hold fewer than 2 samples"),
        ));
    }

    let mut samples = DMatrix::zeros(eeg.len(), total);
    for r in 0..record_count {
        let start = r * record_bytes;
        if data.len() < start + record_bytes {
            return Err(Error::parse(
                format!("data record {r}"),
                format!(
                    "record truncated: {} of {record_bytes} bytes present",
                    data.len().saturating_sub(start)
                ),
            ));
        }
        let record = &data[start..start + record_bytes];
        let mut offset = 0;
        let mut row = 0;
        for signal in &signals {
            let n = signal.samples_per_record;
            if !signal.is_annotation() {
                for k in 0..n {
                    let at = 2 * (offset + k);
                    let digital = i16::from_le_bytes([record[at], record[at + 1]]);
                    samples[(row, r * spr + k)] = signal.to_physical(digital);
                }
                row += 1;
            }
            offset += n;
        }
    }

    let channels = eeg.iter().map(|&s| signals[s].label.clone()).collect();
    Recording::new(channels, samples, spr as f64 / record_duration)
}

/// Formats `value` into at most `width` characters, rounding in the given
/// direction so the printed bound still encloses the data.
fn bound_field(value: f64, width: usize, round_up: bool) -> Result<(String, f64)> {
    for decimals in (0..=6).rev() {
        let scale = 10f64.powi(decimals);
        let rounded = if round_up {
            (value * scale).ceil() / scale
        } else {
            (value * scale).floor() / scale
        };
        let text = format!("{rounded:.*}", decimals as usize);
        if text.len() <= width {
            let parsed: f64 = text.parse().expect("formatted float parses");
            return Ok((text, parsed));
        }
    }
    Err(Error::Unsupported(format!(
        "amplitude {value} does not fit an EDF header field"
    )))
}

fn pad(out: &mut Vec<u8>, text: &str, width: usize) {
    let bytes = text.as_bytes();
    let n = bytes.len().min(width);
    out.extend_from_slice(&bytes[..n]);
    out.extend(std::iter::repeat_n(b' ', width - n));
}

/// Serializes a recording as EDF with one-second data records.
///
/// The rate must be a whole number of hertz and the recording a whole
/// number of seconds long. Each channel gets its own physical range, taken
/// from its data extent, quantized over the full 16-bit digital range.
pub fn to_edf_bytes(rec: &Recording) -> Result<Vec<u8>> {
    let rate = rec.rate();
    if rate.fract() != 0.0 || rate > 99_999_999.0 {
        return Err(Error::Unsupported(format!(
            "EDF export needs an integral sampling rate, got {rate}"
        )));
    }
    let spr = rate as usize;
    if rec.len() % spr != 0 {
        return Err(Error::Unsupported(format!(
            "EDF export needs whole seconds: {} samples at {rate} Hz",
            rec.len()
        )));
    }
    let records = rec.len() / spr;
    let ns = rec.channel_count();
    if ns > 9999 {
        return Err(Error::Unsupported(format!(
            "{ns} signals exceed the EDF limit"
        )));
    }

    let mut ranges = Vec::with_capacity(ns);
    for row in rec.samples().row_iter() {
        let lo = row.min();
        let hi = row.max();
        let (lo_text, lo_val) = bound_field(lo, 8, false)?;
        let (mut hi_text, mut hi_val) = bound_field(hi, 8, true)?;
        if hi_val <= lo_val {
            let (t, v) = bound_field(lo_val + 1.0, 8, true)?;
            hi_text = t;
            hi_val = v;
        }
        ranges.push((lo_text, lo_val, hi_text, hi_val));
    }

    let header_bytes = FIXED_HEADER + PER_SIGNAL * ns;
    let mut out = Vec::with_capacity(header_bytes + records * spr * ns * 2);
    pad(&mut out, "0", 8);
    pad(&mut out, "X X X X", 80);
    pad(&mut out, "Startdate X X X X", 80);
    pad(&mut out, "01.01.00", 8);
    pad(&mut out, "00.00.00", 8);
    pad(&mut out, &header_bytes.to_string(), 8);
    pad(&mut out, "", 44);
    pad(&mut out, &records.to_string(), 8);
    pad(&mut out, "1", 8);
    pad(&mut out, &ns.to_string(), 4);

    for label in rec.channels() {
        pad(&mut out, label, 16);
    }
    for _ in 0..ns {
        pad(&mut out, "", 80);
    }
    for _ in 0..ns {
        pad(&mut out, "uV", 8);
    }
    for r in &ranges {
        pad(&mut out, &r.0, 8);
    }
    for r in &ranges {
        pad(&mut out, &r.2, 8);
    }
    for _ in 0..ns {
        pad(&mut out, &DIGITAL_MIN.to_string(), 8);
    }
    for _ in 0..ns {
        pad(&mut out, &DIGITAL_MAX.to_string(), 8);
    }
    for _ in 0..ns {
        pad(&mut out, "", 80);
    }
    for _ in 0..ns {
        pad(&mut out, &spr.to_string(), 8);
    }
    for _ in 0..ns {
        pad(&mut out, "", 32);
    }
    debug_assert_eq!(out.len(), header_bytes);

    let digital_span = (DIGITAL_MAX - DIGITAL_MIN) as f64;
    for r in 0..records {
        for (c, &(_, lo, _, hi)) in ranges.iter().enumerate() {
            for k in 0..spr {
                let x = rec.samples()[(c, r * spr + k)];
                let d = ((x - lo) / (hi - lo) * digital_span + DIGITAL_MIN as f64).round();
                let d = d.clamp(DIGITAL_MIN as f64, DIGITAL_MAX as f64) as i16;
                out.extend_from_slice(&d.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn write_edf(path: impl AsRef<Path>, rec: &Recording) -> Result<()> {
    let path = path.as_ref();
    let bytes = to_edf_bytes(rec)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
