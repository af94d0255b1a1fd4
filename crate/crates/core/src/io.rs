//! Field files and run configuration.
//!
//! Two single-field formats are supported, both carrying 32-bit
//! little-endian floats (computation is done in 64-bit and narrowed on
//! write):
//!
//! * **PFM**, grayscale variant: `Pf\n<w> <h>\n-1.0\n` followed by rows
//!   stored bottom-up as the format prescribes. Rows are flipped to top-down
//!   on load. Big-endian files (positive scale) are read too; files are
//!   always written little-endian. PFM carries no pitch, so loads default to
//!   1 m unless the caller supplies one.
//! * **raw**: a three-line ASCII header `<w>\n<h>\n<pitch_m>\n` followed by
//!   row-major floats. The header tokens may also share a line.
//!
//! Errors report the byte offset where parsing failed.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::diffops::{Boundary, StencilKind, StencilScheme};
use crate::error::{MistError, Result};
use crate::field::ScalarField;
use crate::geometry::Geometry;
use crate::model::SpecklePair;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldFormat {
    Pfm,
    Raw,
}

impl FieldFormat {
    /// `.pfm` selects PFM, `.raw` and `.f32` the raw format.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("pfm") => Ok(FieldFormat::Pfm),
            Some("raw") | Some("f32") => Ok(FieldFormat::Raw),
            _ => Err(MistError::invalid(format!(
                "cannot infer field format from {}; use .pfm or .raw",
                path.display()
            ))),
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            FieldFormat::Pfm => "pfm",
            FieldFormat::Raw => "raw",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldFile {
    pub format: FieldFormat,
    pub path: PathBuf,
}

impl FieldFile {
    pub fn new(format: FieldFormat, path: impl Into<PathBuf>) -> Self {
        Self {
            format,
            path: path.into(),
        }
    }

    /// Format inferred from the extension.
    pub fn infer(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        Ok(Self {
            format: FieldFormat::from_path(&path)?,
            path,
        })
    }
}

pub const PFM_DEFAULT_PITCH: f64 = 1.0;

pub fn read_field(file: &FieldFile) -> Result<ScalarField> {
    read_field_with_pitch(file, None)
}

/// Reads a field, overriding the pitch when `pitch` is given (for raw files
/// the header pitch is replaced).
pub fn read_field_with_pitch(file: &FieldFile, pitch: Option<f64>) -> Result<ScalarField> {
    let bytes = fs::read(&file.path).map_err(|e| MistError::io(&file.path, e))?;
    let field = decode_field(&bytes, file.format, &file.path)?;
    match pitch {
        Some(p) => field.with_pitch(p),
        None => Ok(field),
    }
}

pub fn write_field(field: &ScalarField, file: &FieldFile) -> Result<()> {
    let bytes = encode_field(field, file.format)?;
    fs::write(&file.path, bytes).map_err(|e| MistError::io(&file.path, e))
}

/// Writes a display copy, optionally with negative values clamped to zero.
/// The field itself is not modified.
pub fn write_display_field(field: &ScalarField, file: &FieldFile, clamp_negative: bool) -> Result<()> {
    if clamp_negative {
        write_field(&field.clamped_non_negative(), file)
    } else {
        write_field(field, file)
    }
}

fn to_f32(field: &ScalarField) -> Result<Vec<f32>> {
    field
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let narrow = v as f32;
            if narrow.is_finite() {
                Ok(narrow)
            } else {
                Err(MistError::invalid(format!(
                    "value {v} at pixel {i} does not fit in a 32-bit float"
                )))
            }
        })
        .collect()
}

/// Serialises a field to the bytes of the given format.
pub fn encode_field(field: &ScalarField, format: FieldFormat) -> Result<Vec<u8>> {
    let data = to_f32(field)?;
    let (w, h) = (field.width(), field.height());
    let mut out = match format {
        FieldFormat::Pfm => format!("Pf\n{w} {h}\n-1.0\n").into_bytes(),
        FieldFormat::Raw => format!("{w}\n{h}\n{}\n", field.pitch()).into_bytes(),
    };
    out.reserve(data.len() * 4);
    match format {
        FieldFormat::Pfm => {
            for y in (0..h).rev() {
                for v in &data[y * w..(y + 1) * w] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        FieldFormat::Raw => {
            for v in &data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Header<'a> {
    fn err(&self, offset: usize, message: impl Into<String>) -> MistError {
        MistError::Format {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            message: message.into(),
        }
    }

    fn token(&mut self, what: &str) -> Result<(usize, &'a str)> {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(start, format!("missing {what}")));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| self.err(start, format!("{what} is not ASCII")))?;
        Ok((start, text))
    }

    fn parse<T: std::str::FromStr>(&mut self, what: &str) -> Result<(usize, T)> {
        let (at, text) = self.token(what)?;
        let v = text
            .parse()
            .map_err(|_| self.err(at, format!("cannot parse {what} from {text:?}")))?;
        Ok((at, v))
    }

    fn dimension(&mut self, what: &str) -> Result<usize> {
        let (at, v): (usize, usize) = self.parse(what)?;
        if v == 0 {
            return Err(self.err(at, format!("{what} must be positive")));
        }
        Ok(v)
    }

    /// Consumes the single whitespace byte that ends the header.
    fn end(&mut self) -> Result<usize> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => Ok(self.pos + 1),
            _ => Err(self.err(self.pos, "header must end with a newline")),
        }
    }
}

/// Parses field bytes; `path` is only used in error messages.
pub fn decode_field(bytes: &[u8], format: FieldFormat, path: &Path) -> Result<ScalarField> {
    let mut hdr = Header {
        bytes,
        pos: 0,
        path,
    };
    let (w, h, pitch, little_endian) = match format {
        FieldFormat::Pfm => {
            let (at, magic) = hdr.token("PFM magic")?;
            match magic {
                "Pf" => {}
                "PF" => return Err(hdr.err(at, "colour PFM is not supported, expected Pf")),
                other => return Err(hdr.err(at, format!("bad PFM magic {other:?}"))),
            }
            let w = hdr.dimension("width")?;
            let h = hdr.dimension("height")?;
            let (scale_at, scale): (usize, f64) = hdr.parse("scale")?;
            if scale == 0.0 || !scale.is_finite() {
                return Err(hdr.err(scale_at, "PFM scale must be non-zero"));
            }
            (w, h, PFM_DEFAULT_PITCH, scale < 0.0)
        }
        FieldFormat::Raw => {
            let w = hdr.dimension("width")?;
            let h = hdr.dimension("height")?;
            let (pitch_at, pitch): (usize, f64) = hdr.parse("pitch")?;
            if !(pitch.is_finite() && pitch > 0.0) {
                return Err(hdr.err(pitch_at, format!("pitch must be positive, got {pitch}")));
            }
            (w, h, pitch, true)
        }
    };
    let start = hdr.end()?;
    let payload = &bytes[start..];
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| hdr.err(0, "dimensions overflow"))?;
    if payload.len() != expected {
        let what = if payload.len() < expected {
            "truncated payload"
        } else {
            "trailing bytes after payload"
        };
        return Err(hdr.err(
            start + payload.len().min(expected),
            format!(
                "{what}: expected {expected} bytes for {w}x{h}, found {}",
                payload.len()
            ),
        ));
    }

    let mut values = vec![0.0; w * h];
    for (k, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little_endian {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        if !v.is_finite() {
            return Err(hdr.err(start + 4 * k, format!("non-finite sample {v}")));
        }
        let (x, row) = (k % w, k / w);
        let y = match format {
            FieldFormat::Pfm => h - 1 - row,
            FieldFormat::Raw => row,
        };
        values[y * w + x] = v as f64;
    }
    ScalarField::new(w, h, pitch, values)
}

/// Validated contents of a run configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub delta_m: f64,
    pub energy_ev: f64,
    pub pitch_m: f64,
    pub scheme: StencilScheme,
    pub epsilon: f64,
    /// (reference, sample) paths in mask-position order.
    pub pairs: Vec<(PathBuf, PathBuf)>,
    pub output_dir: PathBuf,
}

const CONFIG_KEYS: [&str; 8] = [
    "delta_m",
    "energy_ev",
    "pitch_m",
    "scheme",
    "boundary",
    "epsilon",
    "pairs",
    "output_dir",
];

impl RunConfig {
    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::new(self.delta_m, self.energy_ev, self.pitch_m)
    }

    /// Loads every pair; mask-position ids are the list indices.
    pub fn load_pairs(&self) -> Result<Vec<SpecklePair>> {
        load_pairs(&self.pairs, Some(self.pitch_m))
    }
}

/// Reads `(reference, sample)` files into pairs labelled by list position.
pub fn load_pairs(paths: &[(PathBuf, PathBuf)], pitch: Option<f64>) -> Result<Vec<SpecklePair>> {
    paths
        .iter()
        .enumerate()
        .map(|(i, (r, s))| {
            let reference = read_field_with_pitch(&FieldFile::infer(r)?, pitch)?;
            let sample = read_field_with_pitch(&FieldFile::infer(s)?, pitch)?;
            SpecklePair::new(reference, sample, i.to_string())
        })
        .collect()
}

/// Parses a `key = value` run configuration.
///
/// Recognised keys: `delta_m`, `energy_ev`, `pitch_m`, `scheme` (`fd` or
/// `spectral`, default `fd`), `boundary` (`mirror` or `periodic`, default
/// `mirror`, forced periodic for spectral), `epsilon` (default 1e-6),
/// `pairs` (`ref, sample; ref, sample; ...`) and `output_dir`. Relative
/// paths are resolved against the config file's directory. `#` starts a
/// comment. Unknown and repeated keys are errors.
pub fn read_run_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| MistError::io(path, e))?;
    parse_run_config(&text, path)
}

pub fn parse_run_config(text: &str, path: &Path) -> Result<RunConfig> {
    let err = |line: usize, message: String| MistError::Config {
        path: path.to_path_buf(),
        line,
        message,
    };
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |p: &str| {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };

    let mut entries: HashMap<&str, (usize, &str)> = HashMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, format!("expected key = value, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        if !CONFIG_KEYS.contains(&key) {
            return Err(err(line_no, format!("unknown key {key:?}")));
        }
        if let Some((first, _)) = entries.insert(key, (line_no, value)) {
            return Err(err(
                line_no,
                format!("duplicate key {key:?} (first set on line {first})"),
            ));
        }
    }

    let required = |key: &str| {
        entries
            .get(key)
            .copied()
            .ok_or_else(|| err(0, format!("missing required key {key:?}")))
    };
    let number = |key: &str, (line, value): (usize, &str)| -> Result<f64> {
        value
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| err(line, format!("{key}: cannot parse number from {value:?}")))
    };

    let delta_m = number("delta_m", required("delta_m")?)?;
    let energy_ev = number("energy_ev", required("energy_ev")?)?;
    let pitch_m = number("pitch_m", required("pitch_m")?)?;
    Geometry::new(delta_m, energy_ev, pitch_m).map_err(|e| err(0, e.to_string()))?;

    let kind = match entries.get("scheme") {
        None => StencilKind::FivePointFd,
        Some(&(_, "fd")) => StencilKind::FivePointFd,
        Some(&(_, "spectral")) => StencilKind::SpectralFourier,
        Some(&(line, other)) => {
            return Err(err(line, format!("scheme must be fd or spectral, got {other:?}")))
        }
    };
    let boundary = match entries.get("boundary") {
        None if kind == StencilKind::SpectralFourier => Boundary::Periodic,
        None => Boundary::Mirror,
        Some(&(_, "mirror")) => Boundary::Mirror,
        Some(&(_, "periodic")) => Boundary::Periodic,
        Some(&(line, other)) => {
            return Err(err(line, format!("boundary must be mirror or periodic, got {other:?}")))
        }
    };
    let scheme = StencilScheme::new(kind, boundary).map_err(|e| {
        err(entries.get("boundary").map_or(0, |e| e.0), e.to_string())
    })?;

    let epsilon = match entries.get("epsilon") {
        None => 1e-6,
        Some(&entry) => {
            let v = number("epsilon", entry)?;
            if v < 0.0 {
                return Err(err(entry.0, format!("epsilon must be non-negative, got {v}")));
            }
            v
        }
    };

    let (pairs_line, pairs_text) = required("pairs")?;
    let mut pairs = Vec::new();
    for item in pairs_text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let (r, s) = item.split_once(',').ok_or_else(|| {
            err(pairs_line, format!("pair {item:?} must be \"reference, sample\""))
        })?;
        let (r, s) = (resolve(r.trim()), resolve(s.trim()));
        for p in [&r, &s] {
            if !p.is_file() {
                return Err(err(pairs_line, format!("input {} does not exist", p.display())));
            }
        }
        pairs.push((r, s));
    }
    if pairs.is_empty() {
        return Err(err(pairs_line, "pairs list is empty".into()));
    }

    let (_, out) = required("output_dir")?;
    Ok(RunConfig {
        delta_m,
        energy_ev,
        pitch_m,
        scheme,
        epsilon,
        pairs,
        output_dir: resolve(out),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_field() -> ScalarField {
        ScalarField::from_fn(16, 16, 5.8e-6, |x, y| (x * 1e5).sin() - y * 3e4 + 0.1).unwrap()
    }

    #[test]
    fn one_pixel_payload_bytes() {
        let f = ScalarField::filled(1, 1, 1.0, 1.0).unwrap();
        let bytes = encode_field(&f, FieldFormat::Raw).unwrap();
        assert_eq!(&bytes[bytes.len() - 4..], &[0x00, 0x00, 0x80, 0x3F]);
        let bytes = encode_field(&f, FieldFormat::Pfm).unwrap();
        assert_eq!(bytes, b"Pf\n1 1\n-1.0\n\x00\x00\x80\x3F");
    }

    #[test]
    fn pfm_rows_are_bottom_up_on_disk() {
        let f = ScalarField::new(1, 2, 1.0, vec![1.0, 2.0]).unwrap();
        let bytes = encode_field(&f, FieldFormat::Pfm).unwrap();
        let payload = &bytes[bytes.len() - 8..];
        assert_eq!(&payload[..4], &2.0f32.to_le_bytes());
        let back = decode_field(&bytes, FieldFormat::Pfm, Path::new("t.pfm")).unwrap();
        assert_eq!(back.values(), &[1.0, 2.0]);
    }

    #[test]
    fn big_endian_pfm_is_read() {
        let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&1.5f32.to_be_bytes());
        bytes.extend_from_slice(&(-2.0f32).to_be_bytes());
        let f = decode_field(&bytes, FieldFormat::Pfm, Path::new("be.pfm")).unwrap();
        assert_eq!(f.values(), &[1.5, -2.0]);
        assert_eq!(f.pitch(), PFM_DEFAULT_PITCH);
    }

    #[test]
    fn raw_header_with_beamline_pitch() {
        let mut bytes = b"256 256 5.8e-6\n".to_vec();
        bytes.extend(std::iter::repeat_n(0u8, 256 * 256 * 4));
        let f = decode_field(&bytes, FieldFormat::Raw, Path::new("x.raw")).unwrap();
        assert_eq!((f.width(), f.height()), (256, 256));
        assert_eq!(f.pitch(), 5.8e-6);
    }

    #[test]
    fn raw_three_line_header_round_trip() {
        let f = sample_field();
        let bytes = encode_field(&f, FieldFormat::Raw).unwrap();
        assert!(bytes.starts_with(b"16\n16\n0.0000058\n"));
        let back = decode_field(&bytes, FieldFormat::Raw, Path::new("x.raw")).unwrap();
        assert_eq!(back.pitch(), 5.8e-6);
        for (a, b) in f.values().iter().zip(back.values()) {
            assert_eq!(*a as f32, *b as f32);
        }
    }

    #[test]
    fn truncated_payload_names_byte_counts() {
        for format in [FieldFormat::Pfm, FieldFormat::Raw] {
            let mut bytes = encode_field(&sample_field(), format).unwrap();
            bytes.truncate(bytes.len() - 4);
            let err = decode_field(&bytes, format, Path::new("t")).unwrap_err();
            let msg = err.to_string();
            assert!(msg.contains("expected 1024 bytes"), "{msg}");
            assert!(msg.contains("found 1020"), "{msg}");
            match err {
                MistError::Format { offset, .. } => assert_eq!(offset as usize, bytes.len()),
                other => panic!("{other}"),
            }
        }
    }

    #[test]
    fn malformed_headers() {
        let p = Path::new("bad");
        let cases: [(&[u8], FieldFormat, u64); 6] = [
            (b"PF\n1 1\n-1.0\n\0\0\0\0", FieldFormat::Pfm, 0),
            (b"P5\n1 1\n-1.0\n", FieldFormat::Pfm, 0),
            (b"Pf\n1 x\n-1.0\n", FieldFormat::Pfm, 5),
            (b"Pf\n1 1\n0\n\0\0\0\0", FieldFormat::Pfm, 7),
            (b"4\n4\n-1\n", FieldFormat::Raw, 4),
            (b"4\n0\n1\n", FieldFormat::Raw, 2),
        ];
        for (bytes, format, offset) in cases {
            match decode_field(bytes, format, p) {
                Err(MistError::Format { offset: o, .. }) => assert_eq!(o, offset, "{bytes:?}"),
                other => panic!("{bytes:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn non_finite_payload_is_rejected_with_offset() {
        let mut bytes = b"2\n1\n1\n".to_vec();
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        bytes.extend_from_slice(&f32::NAN.to_le_bytes());
        match decode_field(&bytes, FieldFormat::Raw, Path::new("n")) {
            Err(MistError::Format { offset, .. }) => assert_eq!(offset, 10),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn too_large_for_f32_is_rejected() {
        let f = ScalarField::filled(1, 1, 1.0, 1e300).unwrap();
        assert!(encode_field(&f, FieldFormat::Pfm).is_err());
    }

    #[test]
    fn display_copy_is_clamped_primary_untouched() {
        let dir = tempfile::tempdir().unwrap();
        let f = ScalarField::new(2, 2, 1.0, vec![-1.0, 2.0, -3.0, 4.0]).unwrap();
        let primary = FieldFile::new(FieldFormat::Pfm, dir.path().join("d.pfm"));
        let display = FieldFile::new(FieldFormat::Pfm, dir.path().join("d_display.pfm"));
        write_field(&f, &primary).unwrap();
        write_display_field(&f, &display, true).unwrap();
        assert!(read_field(&display).unwrap().min() >= 0.0);
        assert_eq!(read_field(&primary).unwrap().values(), f.values());
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(FieldFormat::from_path(Path::new("a.PFM")).unwrap(), FieldFormat::Pfm);
        assert_eq!(FieldFormat::from_path(Path::new("a.raw")).unwrap(), FieldFormat::Raw);
        assert!(FieldFormat::from_path(Path::new("a.tif")).is_err());
    }

    fn config_dir() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for name in ["r1.pfm", "s1.pfm", "r2.pfm", "s2.pfm"] {
            fs::write(dir.path().join(name), b"").unwrap();
        }
        dir
    }

    const GOOD: &str = "\
# beamline setup
delta_m = 1.0
energy_ev = 17000
pitch_m = 5.8e-6
pairs = r1.pfm, s1.pfm; r2.pfm, s2.pfm
output_dir = out
";

    #[test]
    fn config_round_trip() {
        let dir = config_dir();
        let path = dir.path().join("run.cfg");
        fs::write(&path, GOOD).unwrap();
        let cfg = read_run_config(&path).unwrap();
        let g = cfg.geometry().unwrap();
        assert_eq!(g, Geometry::new(1.0, 17_000.0, 5.8e-6).unwrap());
        assert_eq!(cfg.scheme, StencilScheme::FD_MIRROR);
        assert_eq!(cfg.epsilon, 1e-6);
        assert_eq!(cfg.pairs.len(), 2);
        assert_eq!(cfg.pairs[1].0, dir.path().join("r2.pfm"));
        assert_eq!(cfg.output_dir, dir.path().join("out"));
    }

    #[test]
    fn config_errors() {
        let dir = config_dir();
        let path = dir.path().join("run.cfg");
        let check = |text: String, needle: &str| {
            let e = parse_run_config(&text, &path).unwrap_err().to_string();
            assert!(e.contains(needle), "{e} does not mention {needle}");
        };
        check(GOOD.replace("energy_ev = 17000\n", ""), "energy_ev");
        check(format!("{GOOD}delta_m = 2.0\n"), "duplicate key \"delta_m\"");
        check(format!("{GOOD}detla_m = 2.0\n"), "unknown key");
        check(GOOD.replace("17000", "17 keV"), "cannot parse");
        check(GOOD.replace("r2.pfm", "missing.pfm"), "does not exist");
        check(format!("{GOOD}scheme = spectral\nboundary = mirror\n"), "periodic");
        check(format!("{GOOD}epsilon = -1\n"), "non-negative");
    }

    #[test]
    fn config_spectral_defaults_to_periodic() {
        let dir = config_dir();
        let path = dir.path().join("run.cfg");
        let cfg = parse_run_config(&format!("{GOOD}scheme = spectral\n"), &path).unwrap();
        assert_eq!(cfg.scheme, StencilScheme::SPECTRAL);
    }
}
