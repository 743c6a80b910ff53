//! `pbrview`: render scenes, bake IBL assets, render trajectories, or serve
//! a live scene. Exit codes: 0 success, 2 bad scene or arguments, 3 I/O.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use pbrview_core::assets::{self, encode_png, parse_scene, write_atomic, LoadedScene};
use pbrview_core::error::Error;
use pbrview_core::ibl::{BakeSettings, IblSet};
use pbrview_core::math::Pose;
use pbrview_core::pipeline::{render_frame, render_trajectory, Frame, FrameCaches};

const EXIT_SCENE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "pbrview", version, about = "Deterministic CPU physically-based renderer")]
struct Cli {
    /// Worker threads for intra-frame parallelism. Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render one frame of a scene to PNG.
    Render(RenderArgs),
    /// Prefilter an equirectangular HDR into an IBL asset directory.
    Bake(BakeArgs),
    /// Render a camera trajectory through key poses as numbered PNGs.
    Trajectory(TrajectoryArgs),
    /// Run the interactive render service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Output PNG; defaults to the scene's `output.path`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Also write albedo, normals, metal_rough, ssao and final PNGs here.
    #[arg(long)]
    dump_gbuffer: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BakeArgs {
    #[arg(long)]
    hdr: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 128)]
    face_size: usize,
    #[arg(long, default_value_t = 5)]
    mips: usize,
    #[arg(long, default_value_t = 64)]
    lut: usize,
    #[arg(long, default_value_t = 32)]
    irradiance_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrajectoryArgs {
    #[arg(long)]
    scene: PathBuf,
    /// JSON list of `{"pose": ..., "duration": seconds}`; the last duration is unused.
    #[arg(long)]
    poses: PathBuf,
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: std::net::SocketAddr,
    /// Scene loaded at startup.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Directory that relative paths in posted scenes resolve against.
    #[arg(long, default_value = ".")]
    root: PathBuf,
    /// Where recordings are written.
    #[arg(long)]
    record_dir: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

type Outcome = Result<(), Failure>;

fn scene_err(e: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_SCENE, message: e.to_string() }
}

fn io_err(e: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_IO, message: e.to_string() }
}

/// Rendering failures are I/O only when a file operation caused them.
fn render_err(e: Error) -> Failure {
    if e.is_io() {
        io_err(e)
    } else {
        scene_err(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_SCENE);
        }
    }
    let outcome = match cli.command {
        Command::Render(a) => render(a),
        Command::Bake(a) => bake(a),
        Command::Trajectory(a) => trajectory(a),
        Command::Serve(a) => serve(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load(path: &Path, width: Option<usize>, height: Option<usize>, seed: Option<u64>) -> Result<LoadedScene, Failure> {
    let mut loaded = parse_scene(path).map_err(scene_err)?;
    for w in &loaded.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    if width.is_some() || height.is_some() {
        let (w, h) = (width.unwrap_or(loaded.output.width), height.unwrap_or(loaded.output.height));
        if w == 0 || h == 0 {
            return Err(scene_err("--width and --height must be positive"));
        }
        loaded.set_resolution(w, h);
    }
    if let Some(seed) = seed {
        loaded.setup.effects.seed = seed;
    }
    Ok(loaded)
}

fn create_dir(dir: &Path) -> Outcome {
    std::fs::create_dir_all(dir).map_err(|e| io_err(format!("{}: {e}", dir.display())))
}

fn write_png(path: &Path, img: &pbrview_core::image::LdrImage) -> Outcome {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_atomic(path, &encode_png(img)).map_err(io_err)
}

fn render(a: RenderArgs) -> Outcome {
    let loaded = load(&a.scene, a.width, a.height, a.seed)?;
    let out = a.out.unwrap_or_else(|| loaded.output.path.clone());
    let scene = loaded.finalize().map_err(scene_err)?;
    let frame = render_frame(&scene, &mut FrameCaches::new()).map_err(render_err)?;
    write_png(&out, &frame.ldr)?;
    if let Some(dir) = &a.dump_gbuffer {
        dump_channels(dir, &frame)?;
    }
    println!("{}", out.display());
    Ok(())
}

fn dump_channels(dir: &Path, frame: &Frame) -> Outcome {
    create_dir(dir)?;
    for (name, img) in frame.gbuffer.debug_images() {
        if matches!(name, "albedo" | "normals" | "metal_rough") {
            write_png(&dir.join(format!("{name}.png")), &img)?;
        }
    }
    let ao = frame.ao.clone().unwrap_or_else(|| {
        let (w, h) = (frame.ldr.width.div_ceil(2), frame.ldr.height.div_ceil(2));
        pbrview_core::image::ScalarImage::filled(w, h, 1.0)
    });
    write_png(&dir.join("ssao.png"), &ao.to_ldr(0.0, 1.0))?;
    write_png(&dir.join("final.png"), &frame.ldr)
}

fn bake(a: BakeArgs) -> Outcome {
    let settings = BakeSettings {
        face_size: a.face_size,
        specular_mips: a.mips,
        lut_size: a.lut,
        irradiance_size: a.irradiance_size,
        seed: a.seed,
        ..BakeSettings::default()
    };
    settings.validate().map_err(scene_err)?;
    let hdr = assets::load_hdr(&a.hdr).map_err(io_err)?;
    let set = IblSet::bake(&hdr, &settings).map_err(scene_err)?;
    let manifest = assets::save_ibl(&set, &a.out).map_err(io_err)?;
    if set.sanitized_texels > 0 {
        eprintln!("warning: {} non-finite or negative texels replaced", set.sanitized_texels);
    }
    println!("{}", manifest.display());
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyPose {
    pose: Pose,
    #[serde(default)]
    duration: Option<f64>,
}

fn read_key_poses(path: &Path) -> Result<(Vec<Pose>, Vec<f64>), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| scene_err(format!("{}: {e}", path.display())))?;
    let keys: Vec<KeyPose> = serde_json::from_str(&text).map_err(|e| scene_err(format!("{}: {e}", path.display())))?;
    if keys.len() < 2 {
        return Err(scene_err(format!("{}: a trajectory needs at least two poses, found {}", path.display(), keys.len())));
    }
    let durations = keys[..keys.len() - 1]
        .iter()
        .enumerate()
        .map(|(k, p)| p.duration.ok_or_else(|| scene_err(format!("{}: pose {k} has no duration", path.display()))))
        .collect::<Result<_, _>>()?;
    Ok((keys.into_iter().map(|k| k.pose).collect(), durations))
}

fn trajectory(a: TrajectoryArgs) -> Outcome {
    let scene = load(&a.scene, a.width, a.height, a.seed)?.finalize().map_err(scene_err)?;
    let (poses, durations) = read_key_poses(&a.poses)?;
    create_dir(&a.out)?;
    let mut write_failure = None;
    let frames = render_trajectory(&scene, &poses, &durations, a.fps, &mut FrameCaches::new(), |i, frame| {
        let path = a.out.join(format!("frame_{i:05}.png"));
        write_png(&path, &frame.ldr).map_err(|f| {
            let e = Error::io(&path, std::io::Error::other(f.message.clone()));
            write_failure = Some(f);
            e
        })
    });
    match (frames, write_failure) {
        (Ok(n), _) => {
            println!("{n}");
            Ok(())
        }
        (Err(_), Some(f)) => Err(f),
        (Err(e), None) => Err(render_err(e)),
    }
}

fn serve(a: ServeArgs) -> Outcome {
    let mut config = pbrview_serve::ServiceConfig { scene_root: a.root, ..Default::default() };
    if let Some(dir) = a.record_dir {
        config.record_root = dir;
    }
    let service = pbrview_serve::Service::new(config);
    if let Some(scene) = &a.scene {
        let path = std::path::absolute(scene).map_err(|e| io_err(format!("{}: {e}", scene.display())))?;
        service.load_scene(serde_json::json!({ "path": path })).map_err(scene_err)?;
    }
    let rt = tokio::runtime::Runtime::new().map_err(io_err)?;
    rt.block_on(pbrview_serve::run(service, a.addr)).map_err(io_err)
}
