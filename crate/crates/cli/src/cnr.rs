use std::path::PathBuf;

use mist_core::io::{read_field_with_pitch, FieldFile};
use mist_core::{cnr, Roi};

use crate::report::significant;
use crate::CliError;

#[derive(clap::Args)]
pub struct Args {
    /// Field file (.raw or .pfm).
    field: PathBuf,
    /// Background region as x0,y0,width,height.
    #[arg(long)]
    background: Roi,
    /// Feature region as x0,y0,width,height.
    #[arg(long)]
    feature: Roi,
    /// Pixel size in meters (overrides the file header).
    #[arg(long)]
    pitch: Option<f64>,
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let field = read_field_with_pitch(&FieldFile::infer(&args.field)?, args.pitch)?;
    let report = cnr(&field, &args.background, &args.feature)?;
    println!("cnr = {}", significant(report.cnr, 4));
    println!("mean_background = {:e}", report.mean_background);
    println!("std_background = {:e}", report.std_background);
    println!("mean_feature = {:e}", report.mean_feature);
    Ok(())
}
