//! Report envelope and deterministic JSON encoding.
//!
//! Reports are schema-versioned and echo the configuration plus the
//! master seed they were produced from, so re-running a saved config
//! reproduces the report byte for byte (modulo the timestamp field).
//! Floating-point numbers are rendered in scientific notation with 17
//! significant digits, enough for exact round-tripping in any language.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::ser::Formatter;

pub struct SigDigitFormatter;

impl Formatter for SigDigitFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        write!(writer, "{value:.8e}")
    }
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigitFormatter);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

#[derive(Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
    pub generator: &'static str,
}

#[derive(Serialize)]
pub struct Envelope<T: Serialize> {
    pub schema: &'static str,
    pub tool: Tool,
    pub seed: u64,
    pub jobs: usize,
    pub config: serde_json::Value,
    pub timestamp_ms: u128,
    pub report: T,
}

pub fn envelope<T: Serialize>(seed: u64, jobs: usize, config: serde_json::Value, report: T) -> Envelope<T> {
    Envelope {
        schema: "1",
        tool: Tool {
            name: "specsysid",
            version: env!("CARGO_PKG_VERSION"),
            generator: specsysid_core::rng::GENERATOR_NAME,
        },
        seed,
        jobs,
        config,
        timestamp_ms: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0),
        report,
    }
}

/// Writes the report to `out` when given, otherwise to stdout.
pub fn emit<T: Serialize>(out: Option<&Path>, value: &Envelope<T>) -> std::io::Result<()> {
    let bytes = to_json_bytes(value).map_err(std::io::Error::other)?;
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(path, bytes)
        }
        None => std::io::stdout().write_all(&bytes),
    }
}

pub fn write_samples_csv(path: &Path, samples: &[f64]) -> std::io::Result<()> {
    let mut s = String::with_capacity(samples.len() * 20);
    for v in samples {
        s.push_str(&format!("{v:.16e}\n"));
    }
    std::fs::write(path, s)
}
