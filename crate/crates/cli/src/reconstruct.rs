use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mist_core::io::{load_pairs, read_field_with_pitch, read_run_config, write_display_field, write_field, FieldFile, FieldFormat};
use mist_core::metrics::rms_relative_error;
use mist_core::*;

use crate::report::Report;
use crate::{scheme_from_args, scheme_name, BoundaryArg, CliError, FormatArg, SchemeArg};

#[derive(clap::Args)]
pub struct Args {
    /// Run configuration (key = value); replaces the pair and geometry flags.
    #[arg(long, conflicts_with_all = ["pairs", "delta", "energy", "scheme", "boundary", "epsilon"])]
    config: Option<PathBuf>,
    /// Reference and sample files as REFERENCE,SAMPLE; repeat per mask position.
    #[arg(long = "pair", value_name = "REFERENCE,SAMPLE", value_parser = parse_pair)]
    pairs: Vec<(PathBuf, PathBuf)>,
    /// Sample-to-detector distance in meters.
    #[arg(long, required_unless_present = "config")]
    delta: Option<f64>,
    /// Photon energy in eV.
    #[arg(long, required_unless_present = "config")]
    energy: Option<f64>,
    /// Pixel size in meters; defaults to the first reference's header.
    #[arg(long)]
    pitch: Option<f64>,
    /// Degeneracy threshold relative to the median system volume.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long, value_enum)]
    boundary: Option<BoundaryArg>,
    /// Solve for the diffusion tensor (needs at least 4 positions).
    #[arg(long)]
    tensor: bool,
    /// Mirror-extend the phase Laplacian before integrating.
    #[arg(long)]
    even_extension: bool,
    /// Also write diffusion display copies with negative values set to zero.
    #[arg(long)]
    clamp_display: bool,
    /// Ground-truth diffusion map for error reporting (D_xx in tensor mode).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Ground-truth phase Laplacian for error reporting.
    #[arg(long)]
    truth_lap_phi: Option<PathBuf>,
    /// Border excluded from truth comparisons, in pixels.
    #[arg(long, default_value_t = 8)]
    border: usize,
    #[arg(long, value_enum, default_value_t = FormatArg::Raw)]
    format: FormatArg,
    /// Output directory; overrides the config's output_dir.
    #[arg(long, required_unless_present = "config")]
    out_dir: Option<PathBuf>,
}

fn parse_pair(text: &str) -> Result<(PathBuf, PathBuf), String> {
    let (r, s) = text
        .split_once(',')
        .ok_or_else(|| format!("expected REFERENCE,SAMPLE, got {text:?}"))?;
    Ok((PathBuf::from(r.trim()), PathBuf::from(s.trim())))
}

/// Everything the run depends on, after merging config file and flags.
struct Plan {
    pairs: Vec<(PathBuf, PathBuf)>,
    delta: f64,
    energy: f64,
    pitch: Option<f64>,
    epsilon: f64,
    scheme: StencilScheme,
    out_dir: PathBuf,
}

fn plan(args: &Args) -> Result<Plan, CliError> {
    if let Some(path) = &args.config {
        let c = read_run_config(path)?;
        return Ok(Plan {
            pitch: Some(args.pitch.unwrap_or(c.pitch_m)),
            pairs: c.pairs,
            delta: c.delta_m,
            energy: c.energy_ev,
            epsilon: c.epsilon,
            scheme: c.scheme,
            out_dir: args.out_dir.clone().unwrap_or(c.output_dir),
        });
    }
    Ok(Plan {
        pairs: args.pairs.clone(),
        delta: args.delta.expect("required by clap"),
        energy: args.energy.expect("required by clap"),
        pitch: args.pitch,
        epsilon: args.epsilon.unwrap_or(SolverOptions::default().denominator_epsilon),
        scheme: scheme_from_args(args.scheme.unwrap_or(SchemeArg::Fd), args.boundary)?,
        out_dir: args.out_dir.clone().expect("required by clap"),
    })
}

struct Output<'a> {
    dir: &'a Path,
    format: FieldFormat,
}

impl Output<'_> {
    fn file(&self, name: &str) -> FieldFile {
        FieldFile::new(self.format, self.dir.join(format!("{name}.{}", self.format.extension())))
    }

    fn write(&self, name: &str, field: &ScalarField) -> Result<(), MistError> {
        write_field(field, &self.file(name))
    }

    fn write_mask(&self, mask: &[bool], like: &ScalarField) -> Result<(), MistError> {
        let values = mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        self.write("degenerate_mask", &ScalarField::new(like.width(), like.height(), like.pitch(), values)?)
    }
}

fn absolute(path: &Path) -> PathBuf {
    fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf())
}

fn truth_error(
    report: &mut Report,
    key: &str,
    path: &Option<PathBuf>,
    estimate: &ScalarField,
    border: usize,
) -> Result<(), CliError> {
    if let Some(path) = path {
        let truth = read_field_with_pitch(&FieldFile::infer(path)?, Some(estimate.pitch()))?;
        report.put(&format!("{key}_truth"), absolute(path).display());
        report.num(&format!("{key}_rms_relative_error"), rms_relative_error(estimate, &truth, border)?);
    }
    Ok(())
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let plan = plan(args)?;
    let minimum = if args.tensor { 4 } else { 2 };
    if plan.pairs.len() < minimum {
        return Err(CliError::Usage(format!(
            "need at least {minimum} pairs{}, got {}",
            if args.tensor { " for the tensor solve" } else { "" },
            plan.pairs.len()
        )));
    }
    if plan.epsilon.is_nan() || plan.epsilon < 0.0 {
        return Err(CliError::Usage(format!("--epsilon must be non-negative, got {}", plan.epsilon)));
    }
    let pairs = load_pairs(&plan.pairs, plan.pitch)?;
    let pitch = pairs[0].reference().pitch();
    let geometry = Geometry::new(plan.delta, plan.energy, pitch)?;
    let poisson = PoissonOptions {
        even_extension: args.even_extension,
    };
    let opts = SolverOptions {
        denominator_epsilon: plan.epsilon,
        clamp_negative_d: args.clamp_display,
        scheme: plan.scheme,
        integrate: Some(poisson),
    };

    fs::create_dir_all(&plan.out_dir).map_err(|e| MistError::io(&plan.out_dir, e))?;
    let out = Output {
        dir: &plan.out_dir,
        format: args.format.into(),
    };
    let mut report = Report::default();
    let (kind, boundary) = scheme_name(plan.scheme);
    report.put("n_pairs", pairs.len());
    for (i, (r, s)) in plan.pairs.iter().enumerate() {
        report.put(&format!("pair.{i}"), format!("{}, {}", absolute(r).display(), absolute(s).display()));
    }
    report.num("delta_m", plan.delta);
    report.num("energy_ev", plan.energy);
    report.num("wave_number", geometry.wave_number());
    report.num("pitch_m", pitch);
    report.put("scheme", kind);
    report.put("boundary", boundary);
    report.num("epsilon", plan.epsilon);
    report.put("even_extension", args.even_extension);
    report.put("clamp_display", args.clamp_display);
    report.put("format", out.format.extension());
    report.put("border", args.border);

    if args.tensor {
        let start = Instant::now();
        let t = solve_tensor(&pairs, &geometry, &opts)?;
        let phi = integrate_phase(&t.lap_phi, &poisson)?;
        let elapsed = start.elapsed().as_secs_f64();
        report.put("solver", "tensor");
        report.num("wall_time_s", elapsed);
        report.put("degenerate_pixels", t.degenerate_count());
        for (name, field) in [
            ("lap_phi", &t.lap_phi),
            ("phi", &phi),
            ("d_xx", &t.d_xx),
            ("d_yy", &t.d_yy),
            ("d_xy", &t.d_xy),
            ("residual_rms", &t.residual_rms),
        ] {
            out.write(name, field)?;
            report.stats(name, field);
        }
        out.write_mask(&t.degenerate, &t.lap_phi)?;
        if args.clamp_display {
            write_display_field(&t.d_xx, &out.file("d_xx_display"), true)?;
            write_display_field(&t.d_yy, &out.file("d_yy_display"), true)?;
        }
        truth_error(&mut report, "d_xx", &args.truth, &t.d_xx, args.border)?;
        truth_error(&mut report, "lap_phi", &args.truth_lap_phi, &t.lap_phi, args.border)?;
    } else {
        let start = Instant::now();
        let (solver, r) = if pairs.len() == 2 {
            ("two_shot", solve_two_shot(&pairs[0], &pairs[1], &geometry, &opts)?)
        } else {
            ("least_squares", solve_least_squares(&pairs, &geometry, &opts)?)
        };
        let elapsed = start.elapsed().as_secs_f64();
        let phi = r.phi.as_ref().expect("integration requested");
        report.put("solver", solver);
        report.num("wall_time_s", elapsed);
        report.put("degenerate_pixels", r.degenerate_count());
        for (name, field) in [
            ("d_eff", &r.d_eff),
            ("lap_phi", &r.lap_phi),
            ("phi", phi),
            ("residual_rms", &r.residual_rms),
        ] {
            out.write(name, field)?;
            report.stats(name, field);
        }
        out.write_mask(&r.degenerate, &r.d_eff)?;
        if args.clamp_display {
            write_display_field(&r.d_eff, &out.file("d_eff_display"), true)?;
        }
        truth_error(&mut report, "d_eff", &args.truth, &r.d_eff, args.border)?;
        truth_error(&mut report, "lap_phi", &args.truth_lap_phi, &r.lap_phi, args.border)?;
    }
    report.write(&plan.out_dir.join("report.txt"))?;
    Ok(())
}
