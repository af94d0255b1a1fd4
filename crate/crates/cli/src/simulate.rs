use std::fs;
use std::path::PathBuf;

use mist_core::forward::non_positive_pixels;
use mist_core::io::{write_field, FieldFile, FieldFormat};
use mist_core::synth::{gaussian_phase_phantom, grid_center, smooth_diffusion_phantom, GaussianBlob};
use mist_core::*;

use crate::report::Report;
use crate::{scheme_from_args, scheme_name, BoundaryArg, CliError, FormatArg, SchemeArg};

/// Offsets separating the noise streams from the speckle seeds.
const REFERENCE_NOISE_SEED: u64 = 1000;
const SAMPLE_NOISE_SEED: u64 = 2000;

#[derive(clap::Args)]
pub struct Args {
    /// Base seed; reference `i` uses `seed + i`.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Image side length in pixels.
    #[arg(long, default_value_t = 256)]
    size: usize,
    /// Pixel size in meters.
    #[arg(long, default_value_t = 5.8e-6)]
    pitch: f64,
    /// Sample-to-detector distance in meters.
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Photon energy in eV.
    #[arg(long, default_value_t = 17_000.0)]
    energy: f64,
    /// Peak phase shift in radians.
    #[arg(long, default_value_t = 2.0)]
    phase_amplitude: f64,
    /// Phase phantom width in pixels.
    #[arg(long, default_value_t = 30.0)]
    phase_sigma: f64,
    /// Peak diffusion coefficient in meters (D_yy in tensor mode).
    #[arg(long, default_value_t = 2e-11)]
    diffusion_peak: f64,
    /// Diffusion phantom width in pixels.
    #[arg(long, default_value_t = 80.0)]
    diffusion_sigma: f64,
    /// D_xx / D_yy in tensor mode.
    #[arg(long, default_value_t = 1.0)]
    anisotropy: f64,
    /// Number of mask positions.
    #[arg(long, default_value_t = 2)]
    n_positions: usize,
    /// Gaussian noise std relative to the image mean, added to every image.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Forward model: full, simplified or tensor. The default matches the
    /// model the reconstruction inverts.
    #[arg(long, default_value = "simplified")]
    mode: ForwardMode,
    /// Speckle correlation length in pixels.
    #[arg(long, default_value_t = 3.0)]
    correlation_length: f64,
    /// Speckle contrast (std / mean).
    #[arg(long, default_value_t = 0.2)]
    contrast: f64,
    #[arg(long, value_enum, default_value_t = SchemeArg::Fd)]
    scheme: SchemeArg,
    #[arg(long, value_enum)]
    boundary: Option<BoundaryArg>,
    #[arg(long, value_enum, default_value_t = FormatArg::Raw)]
    format: FormatArg,
    #[arg(long)]
    out_dir: PathBuf,
}

struct Writer {
    dir: PathBuf,
    format: FieldFormat,
    manifest: Report,
}

impl Writer {
    fn write(&mut self, role: &str, name: &str, field: &ScalarField) -> Result<(), MistError> {
        let file_name = format!("{name}.{}", self.format.extension());
        write_field(field, &FieldFile::new(self.format, self.dir.join(&file_name)))?;
        self.manifest.put(&format!("file.{role}"), file_name);
        Ok(())
    }
}

pub fn run(args: &Args) -> Result<(), CliError> {
    if args.n_positions < 1 {
        return Err(CliError::Usage("--n-positions must be at least 1".into()));
    }
    if args.noise.is_nan() || args.noise < 0.0 {
        return Err(CliError::Usage(format!("--noise must be non-negative, got {}", args.noise)));
    }
    let scheme = scheme_from_args(args.scheme, args.boundary)?;
    let geometry = Geometry::new(args.delta, args.energy, args.pitch)?;
    let (n, p) = (args.size, args.pitch);
    let center = grid_center(n, n, p);

    let phi = gaussian_phase_phantom(n, n, p, args.phase_amplitude, args.phase_sigma * p, center)?;
    let lap_phi = GaussianBlob {
        amplitude: args.phase_amplitude,
        sigma: args.phase_sigma * p,
        center,
    }
    .sample_laplacian(n, n, p)?;
    let d = smooth_diffusion_phantom(n, n, p, args.diffusion_peak, args.diffusion_sigma * p, center)?;
    let d_xx = d.scaled(args.anisotropy);
    let zero = ScalarField::zeros(n, n, p)?;
    let diffusion = match args.mode {
        ForwardMode::Tensor => Diffusion::Tensor {
            xx: &d_xx,
            yy: &d,
            xy: &zero,
        },
        _ => Diffusion::Scalar(&d),
    };

    fs::create_dir_all(&args.out_dir).map_err(|e| MistError::io(&args.out_dir, e))?;
    let mut out = Writer {
        dir: args.out_dir.clone(),
        format: args.format.into(),
        manifest: Report::default(),
    };
    let (kind, boundary) = scheme_name(scheme);
    let m = &mut out.manifest;
    m.put("seed", args.seed);
    m.put("size", n);
    m.num("pitch_m", p);
    m.num("delta_m", args.delta);
    m.num("energy_ev", args.energy);
    m.num("wave_number", geometry.wave_number());
    m.put("mode", args.mode.name());
    m.put("scheme", kind);
    m.put("boundary", boundary);
    m.put("n_positions", args.n_positions);
    m.num("noise", args.noise);
    m.num("correlation_length_px", args.correlation_length);
    m.num("contrast", args.contrast);
    m.num("phase_amplitude_rad", args.phase_amplitude);
    m.num("phase_sigma_px", args.phase_sigma);
    m.num("diffusion_peak_m", args.diffusion_peak);
    m.num("diffusion_sigma_px", args.diffusion_sigma);
    m.num("anisotropy", args.anisotropy);
    m.put("format", out.format.extension());

    let mut non_positive = 0;
    for i in 0..args.n_positions {
        let seed = args.seed + i as u64;
        let reference = generate_speckle(&SpeckleSpec {
            seed,
            width: n,
            height: n,
            pitch: p,
            correlation_length: args.correlation_length * p,
            mean_intensity: 1.0,
            contrast: args.contrast,
        })?;
        let sample = forward(args.mode, &reference, &phi, diffusion, &geometry, scheme)?;
        let (reference, sample) = if args.noise > 0.0 {
            (
                add_noise(&reference, seed + REFERENCE_NOISE_SEED, args.noise)?,
                add_noise(&sample, seed + SAMPLE_NOISE_SEED, args.noise)?,
            )
        } else {
            (reference, sample)
        };
        non_positive += non_positive_pixels(&sample) + non_positive_pixels(&reference);
        out.write(&format!("reference.{i}"), &format!("ref_{i}"), &reference)?;
        out.write(&format!("sample.{i}"), &format!("sample_{i}"), &sample)?;
    }
    out.write("truth.phi", "truth_phi", &phi)?;
    out.write("truth.lap_phi", "truth_lap_phi", &lap_phi)?;
    if args.mode == ForwardMode::Tensor {
        out.write("truth.d_xx", "truth_d_xx", &d_xx)?;
        out.write("truth.d_yy", "truth_d_yy", &d)?;
        out.write("truth.d_xy", "truth_d_xy", &zero)?;
    } else {
        out.write("truth.d_eff", "truth_d_eff", &d)?;
    }
    out.manifest.put("non_positive_pixels", non_positive);
    if non_positive > 0 {
        eprintln!("mist: warning: {non_positive} image pixels are <= 0; the inverse model needs positive intensities");
    }
    out.manifest.write(&args.out_dir.join("manifest.txt"))?;
    Ok(())
}
