//! `ewsp`: encode, decode and analyze energy-weighted 3-D wavelet video streams.
//!
//! Worker threads follow `RAYON_NUM_THREADS`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ewsp_core::analysis::{clip_energy_report, clip_zerotree_table, rd_csv, rd_curve, weight_table_text, zerotree_csv};
use ewsp_core::codec::{decode_stream, encode_clip, CodecParams, PlaneCoder};
use ewsp_core::videoio::{read_yuv420, synthetic_clip, write_yuv420, SyntheticParams, VideoClip};
use ewsp_core::{build_weight_table, TreeKind};

#[derive(Parser)]
#[command(name = "ewsp", version, about = "Energy-weighted 3-D wavelet video codec")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a raw I420 file into an embedded stream.
    Encode(EncodeArgs),
    /// Decode a stream, optionally at a lower rate than it was encoded with.
    Decode(DecodeArgs),
    /// Print weight tables, subband energies, zerotree ratios or RD curves.
    Analyze(AnalyzeArgs),
}

#[derive(Args, Clone)]
struct CodingArgs {
    /// Frames per GOP (power of two).
    #[arg(long, default_value_t = 16, value_parser = parse_gop)]
    gop: usize,
    /// Temporal decomposition levels.
    #[arg(long, default_value_t = 4)]
    tlevels: u32,
    /// Spatial decomposition levels.
    #[arg(long, default_value_t = 3)]
    slevels: u32,
    #[arg(long, value_enum, default_value_t = Tree::Ewspb)]
    tree: Tree,
    /// Code plain transform coefficients instead of energy-weighted ones.
    #[arg(long)]
    no_weights: bool,
    /// Y:U:V budget shares, or `auto` to split by sample count.
    #[arg(long, default_value = "auto", value_parser = parse_split)]
    rate_split: Split,
    /// Frame rate used to turn kbit/s into bits per GOP.
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u16).range(1..))]
    fps: u16,
}

impl CodingArgs {
    fn params(&self, bitrate_kbps: Option<f64>) -> CodecParams {
        CodecParams {
            gop_length: self.gop,
            temporal_levels: self.tlevels,
            spatial_levels: self.slevels,
            tree: self.tree.into(),
            weighted: !self.no_weights,
            fps: self.fps,
            bitrate_kbps,
            rate_split: self.rate_split.0,
            ..CodecParams::default()
        }
    }
}

#[derive(Args)]
struct EncodeArgs {
    /// Raw planar YUV 4:2:0 input.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    /// Number of frames to code from the start of the input.
    #[arg(long)]
    frames: usize,
    /// Target rate in kbit/s.
    #[arg(long, value_parser = parse_rate)]
    bitrate: f64,
    #[command(flatten)]
    coding: CodingArgs,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Decode only the prefix of each GOP that fits this rate in kbit/s.
    #[arg(long, value_parser = parse_rate)]
    budget: Option<f64>,
    /// Raw planar YUV 4:2:0 output.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    /// Raw I420 clip to analyze; a seeded synthetic clip is used when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 352)]
    width: usize,
    #[arg(long, default_value_t = 288)]
    height: usize,
    /// Frames to read or synthesize (default: whole input, or one GOP when synthetic).
    #[arg(long)]
    frames: Option<usize>,
    /// Seed of the synthetic clip.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of scans for `zerotree`.
    #[arg(long, default_value_t = 7, value_parser = clap::value_parser!(u32).range(1..=64))]
    scans: u32,
    /// Comma-separated rates in kbit/s for `rd`.
    #[arg(long, value_delimiter = ',', default_value = "128,256,384,500,768,1000,1500", value_parser = parse_rate)]
    bitrates: Vec<f64>,
    #[command(flatten)]
    coding: CodingArgs,
    /// Write the result as CSV to this file instead of printing it.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Tree {
    Ewspb,
    Asym,
}

impl From<Tree> for TreeKind {
    fn from(t: Tree) -> Self {
        match t {
            Tree::Ewspb => TreeKind::Ewspb,
            Tree::Asym => TreeKind::Asymmetric3D,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Weights,
    Energy,
    Zerotree,
    Rd,
}

#[derive(Clone, Copy)]
struct Split(Option<[u16; 3]>);

fn parse_split(s: &str) -> Result<Split, String> {
    if s == "auto" {
        return Ok(Split(None));
    }
    let parts: Vec<u16> = s
        .split(':')
        .map(|p| p.parse::<u16>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [y, u, v] if y as u32 + u as u32 + v as u32 > 0 => Ok(Split(Some([y, u, v]))),
        [_, _, _] => Err("shares must not all be zero".into()),
        _ => Err("expected `auto` or three shares y:u:v".into()),
    }
}

fn parse_gop(s: &str) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("{e}"))?;
    if n == 0 || !n.is_power_of_two() || n > u16::MAX as usize {
        return Err(format!("{n} is not a power of two up to 32768"));
    }
    Ok(n)
}

fn parse_rate(s: &str) -> Result<f64, String> {
    let r: f64 = s.trim().parse().map_err(|e| format!("{e}"))?;
    if !r.is_finite() || r < 0.0 {
        return Err(format!("{r} is not a non-negative rate"));
    }
    Ok(r)
}

fn load_clip(path: &Path, width: usize, height: usize, frames: Option<usize>) -> Result<VideoClip> {
    let mut clip = read_yuv420(path, width, height).with_context(|| format!("reading {}", path.display()))?;
    if let Some(n) = frames {
        if n == 0 || n > clip.frame_count() {
            bail!("{} holds {} frames, {n} requested", path.display(), clip.frame_count());
        }
        clip.frames.truncate(n);
    }
    Ok(clip)
}

fn encode(args: &EncodeArgs) -> Result<()> {
    let clip = load_clip(&args.input, args.width, args.height, Some(args.frames))?;
    let stream = encode_clip(&clip, &args.coding.params(Some(args.bitrate)))?;
    fs::write(&args.output, &stream).with_context(|| format!("writing {}", args.output.display()))?;
    eprintln!("{} frames -> {} bytes", clip.frame_count(), stream.len());
    Ok(())
}

fn decode(args: &DecodeArgs) -> Result<()> {
    let stream = fs::read(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let clip = decode_stream(&stream, args.budget)?;
    write_yuv420(&clip, &args.output).with_context(|| format!("writing {}", args.output.display()))?;
    eprintln!("{} frames of {}x{}", clip.frame_count(), clip.width, clip.height);
    Ok(())
}

fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let params = args.coding.params(None);
    let clip = || -> Result<VideoClip> {
        match &args.input {
            Some(path) => load_clip(path, args.width, args.height, args.frames),
            None => Ok(synthetic_clip(&SyntheticParams::new(
                args.width,
                args.height,
                args.frames.unwrap_or(params.gop_length),
                args.seed,
            ))),
        }
    };
    let (text, csv) = match args.mode {
        Mode::Weights => {
            let table = build_weight_table(&PlaneCoder::from_params(&params, args.width, args.height)?.spec)?;
            (weight_table_text(&table), table.to_csv())
        }
        Mode::Energy => {
            let csv = clip_energy_report(&clip()?, &params)?.to_csv();
            (csv.clone(), csv)
        }
        Mode::Zerotree => {
            let csv = zerotree_csv(&clip_zerotree_table(&clip()?, &params, args.scans)?);
            (csv.clone(), csv)
        }
        Mode::Rd => {
            let csv = rd_csv(&rd_curve(&clip()?, &params, &args.bitrates)?);
            (csv.clone(), csv)
        }
    };
    match &args.csv {
        Some(path) => fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Encode(a) => encode(a),
        Command::Decode(a) => decode(a),
        Command::Analyze(a) => analyze(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
