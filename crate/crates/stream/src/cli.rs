//! The `videorf` command line. Pipeline stages communicate through a work
//! directory:
//!
//! ```text
//! W/scene.json                      synth
//! W/volumes/{t}.density.vrfv        synth
//! W/volumes/{t}.features.vrfv       synth
//! W/plan.json                       plan
//! W/groups/{id}/mapping.vrfm        bake
//! W/groups/{id}/occupancy.bin       bake
//! W/baked.vrfc                      bake (ground-truth images + reference decoder)
//! W/fitted.vrfc, W/fit_report.json  fit
//! ```
//!
//! `encode` turns a checkpoint into a bundle directory that `render` and
//! `serve` consume.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use videorf_core::bench::{layout_ablation, FitExperiment};
use videorf_core::checkpoint::Checkpoint;
use videorf_core::codec::{
    encode_feature_gof, external_encode, quantize, rate_distortion, EncodedGof, ExternalCodec, QuantizationProfile,
    Quantizer, RdContext, RdGroup,
};
use videorf_core::feature::{bake, DensityActivation, FeatureImage};
use videorf_core::mapping::{build_mapping_with, Layout, MappingTable};
use videorf_core::occupancy::{
    build_pyramid, plan_groups, threshold_occupancy, union, FrameGroup, GroupRange, OccupancyGrid,
    OccupancyPyramid, DEFAULT_GAMMA, DEFAULT_THETA,
};
use videorf_core::pipeline::{image_size_for, GroupAssets};
use videorf_core::render::{Background, Camera, RenderOptions, TinyMlp};
use videorf_core::scene::{reference_mlp, SyntheticScene};
use videorf_core::train::{fit_sequence, orbit_views, FitConfig, LossWeights, View};
use videorf_core::volume::{DensityVolume, FeatureVolume};

use crate::bundle::{bundle, render_from_assets, BundleInput};
use crate::error::{Result, StreamError};
use crate::server::{serve, ServeConfig};

#[derive(Debug, Parser)]
#[command(name = "videorf", version, about = "Streamable dynamic radiance fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate per-frame density and feature volumes from a scene description.
    Synth {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Threshold the volumes and group frames under a pixel budget.
    Plan {
        #[arg(long)]
        work: PathBuf,
        #[arg(long, default_value_t = DEFAULT_GAMMA)]
        gamma: f64,
        #[arg(long, default_value_t = DEFAULT_THETA)]
        theta: usize,
    },
    /// Build mapping tables and pyramids, and bake ground-truth feature images.
    Bake {
        #[arg(long)]
        work: PathBuf,
        #[arg(long, value_enum, default_value_t = LayoutArg::Morton)]
        layout: LayoutArg,
    },
    /// Optimize feature images and the decoder against rendered views.
    Fit {
        #[arg(long)]
        work: PathBuf,
        /// Fit configuration JSON; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        views: usize,
        #[arg(long, default_value_t = 40)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        mlp_seed: u64,
    },
    /// Code a checkpoint's feature images and write a streamable bundle.
    Encode {
        #[arg(long)]
        work: PathBuf,
        #[arg(long, value_enum, default_value_t = Source::Fitted)]
        from: Source,
        /// Quantizer of the bundled streams: `lossless` or a step scale.
        #[arg(long, default_value = "8")]
        q: Quantizer,
        /// Also report bytes for these quantizers, as CSV on stdout.
        #[arg(long, value_delimiter = ',')]
        sweep: Vec<Quantizer>,
        /// External encoder description (JSON) measured alongside the sweep.
        #[arg(long)]
        external: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "sequence")]
        id: String,
    },
    /// Render one frame of a bundle to PNG.
    Render {
        #[arg(long)]
        assets: PathBuf,
        #[arg(long)]
        frame: usize,
        /// Camera JSON.
        #[arg(long)]
        camera: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rate-distortion sweeps and paired ablations, as CSV.
    Bench {
        #[arg(long, value_enum)]
        ablate: Option<Ablation>,
        /// Rate-distortion sweep over a work directory's checkpoint.
        #[arg(long)]
        rd: bool,
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        work: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Source::Fitted)]
        from: Source,
        #[arg(long, default_value_t = DEFAULT_THETA)]
        theta: usize,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32")]
        q: Vec<Quantizer>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve a bundle over HTTP.
    Serve {
        /// Bundle directory; `VIDEORF_ASSET_ROOT` overrides it.
        #[arg(long, default_value = ".")]
        root: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    Morton,
    RowMajor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Source {
    Baked,
    Fitted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Ablation {
    Layout,
    Temporal,
    Spatial,
}

/// Contents of `plan.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub gamma: f64,
    pub theta: usize,
    pub layout: Option<String>,
    pub groups: Vec<GroupRange>,
}

/// Parses `args` (without the program name), runs the command and returns
/// the process exit code. Failures print one `error kind=... msg=...` line.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv = std::iter::once(OsString::from("videorf")).chain(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("error kind=usage msg={first:?}");
            return 2;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error kind={} msg={:?}", e.kind(), e.to_string());
            if matches!(e, StreamError::Usage(_)) {
                2
            } else {
                1
            }
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Synth { scene, out } => synth(&scene, &out),
        Command::Plan { work, gamma, theta } => {
            let plan = plan(&work, gamma, theta)?;
            print!("{}", plan_csv(&plan));
            Ok(())
        }
        Command::Bake { work, layout } => bake_work(&work, layout),
        Command::Fit {
            work,
            config,
            views,
            size,
            mlp_seed,
        } => {
            let cfg = match config {
                Some(p) => FitConfig::from_json(&fs::read_to_string(p)?)?,
                None => FitConfig::default(),
            };
            fit(&work, &cfg, views, size, mlp_seed)
        }
        Command::Encode {
            work,
            from,
            q,
            sweep,
            external,
            out,
            id,
        } => {
            let external = external
                .map(|p| Ok::<_, StreamError>(serde_json::from_str::<ExternalCodec>(&fs::read_to_string(p)?)?))
                .transpose()?;
            let csv = encode(&work, from, q, &sweep, external.as_ref(), &out, &id)?;
            print!("{csv}");
            Ok(())
        }
        Command::Render {
            assets,
            frame,
            camera,
            out,
        } => {
            let camera: Camera = serde_json::from_str(&fs::read_to_string(camera)?)?;
            let img = render_from_assets(&assets, frame, &camera)?;
            fs::write(out, img.color.to_png()?)?;
            Ok(())
        }
        Command::Bench {
            ablate,
            rd,
            scene,
            work,
            from,
            theta,
            q,
            seeds,
            out,
        } => {
            let csv = match (ablate, rd) {
                (Some(_), true) | (None, false) => {
                    return Err(StreamError::Usage("pass exactly one of --ablate or --rd".into()))
                }
                (Some(Ablation::Layout), false) => {
                    let scene = scene.ok_or_else(|| StreamError::Usage("--ablate layout needs --scene".into()))?;
                    let q = *q.first().unwrap_or(&Quantizer::Lossy(8));
                    bench_layout(&load_scene(&scene)?, theta, q)?
                }
                (Some(which), false) => bench_regularizer(which, &seeds)?,
                (None, true) => {
                    let work = work.ok_or_else(|| StreamError::Usage("--rd needs --work".into()))?;
                    bench_rd(&work, from, &q)?
                }
            };
            match out {
                Some(p) => fs::write(p, csv)?,
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Serve { root, addr } => {
            let cfg = ServeConfig::new(addr, root).with_env_override();
            tokio::runtime::Runtime::new()?.block_on(serve(cfg))
        }
    }
}

fn density_path(work: &Path, t: usize) -> PathBuf {
    work.join("volumes").join(format!("{t:05}.density.vrfv"))
}

fn features_path(work: &Path, t: usize) -> PathBuf {
    work.join("volumes").join(format!("{t:05}.features.vrfv"))
}

fn group_dir(work: &Path, id: usize) -> PathBuf {
    work.join("groups").join(id.to_string())
}

fn checkpoint_path(work: &Path, from: Source) -> PathBuf {
    work.join(match from {
        Source::Baked => "baked.vrfc",
        Source::Fitted => "fitted.vrfc",
    })
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| StreamError::Usage(format!("{}: {e}", path.display())))
}

fn load_scene(path: &Path) -> Result<SyntheticScene> {
    let text = fs::read_to_string(path).map_err(|e| StreamError::Usage(format!("{}: {e}", path.display())))?;
    Ok(SyntheticScene::from_json(&text)?)
}

/// `synth`: writes the scene and its per-frame ground-truth volumes.
pub fn synth(scene_path: &Path, work: &Path) -> Result<()> {
    let scene = load_scene(scene_path)?;
    fs::create_dir_all(work.join("volumes"))?;
    fs::write(work.join("scene.json"), serde_json::to_string_pretty(&scene)?)?;
    for t in 0..scene.frame_count {
        let (d, f) = scene.generate_frame(t)?;
        fs::write(density_path(work, t), d.to_vrfv())?;
        fs::write(features_path(work, t), f.to_vrfv())?;
    }
    log::info!("wrote {} frames of {}^3 volumes", scene.frame_count, scene.resolution);
    Ok(())
}

fn work_scene(work: &Path) -> Result<SyntheticScene> {
    load_scene(&work.join("scene.json"))
}

fn frame_grids(work: &Path, frames: usize, gamma: f64) -> Result<Vec<OccupancyGrid>> {
    (0..frames)
        .map(|t| {
            let d = DensityVolume::from_vrfv(&read(&density_path(work, t))?)?;
            Ok(threshold_occupancy(&d, gamma))
        })
        .collect()
}

/// `plan`: groups the synthesized frames and writes `plan.json`.
pub fn plan(work: &Path, gamma: f64, theta: usize) -> Result<PlanFile> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(StreamError::Usage(format!("gamma must be a nonnegative number, got {gamma}")));
    }
    let scene = work_scene(work)?;
    let grids = frame_grids(work, scene.frame_count, gamma)?;
    let plan = plan_groups(&grids, theta)?;
    let file = PlanFile {
        gamma,
        theta,
        layout: None,
        groups: plan.ranges(),
    };
    fs::write(work.join("plan.json"), serde_json::to_string_pretty(&file)?)?;
    Ok(file)
}

pub fn plan_csv(plan: &PlanFile) -> String {
    let mut s = String::from("group,start,end\n");
    for (i, g) in plan.groups.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{}", g.start, g.end);
    }
    s
}

fn load_plan(work: &Path) -> Result<PlanFile> {
    let text = fs::read_to_string(work.join("plan.json"))
        .map_err(|e| StreamError::Usage(format!("plan.json: {e}; run `plan` first")))?;
    Ok(serde_json::from_str(&text)?)
}

/// Rebuilds the group unions recorded in `plan.json` from the volumes.
fn plan_groups_from_file(work: &Path, plan: &PlanFile) -> Result<Vec<FrameGroup>> {
    let frames = plan.groups.last().map_or(0, |g| g.end + 1);
    let grids = frame_grids(work, frames, plan.gamma)?;
    let mut next = 0;
    plan.groups
        .iter()
        .map(|r| {
            if r.start != next || r.end < r.start {
                return Err(StreamError::Usage(format!("plan.json: group {}..={} is out of order", r.start, r.end)));
            }
            next = r.end + 1;
            let union = union(&grids[r.start..=r.end].iter().collect::<Vec<_>>())?;
            if union.count() > plan.theta {
                return Err(videorf_core::Error::Capacity {
                    needed: union.count(),
                    available: plan.theta,
                }
                .into());
            }
            Ok(FrameGroup {
                start: r.start,
                end: r.end,
                union,
            })
        })
        .collect()
}

/// `bake`: mapping tables, pyramids and ground-truth images for every group.
pub fn bake_work(work: &Path, layout: LayoutArg) -> Result<()> {
    let mut plan = load_plan(work)?;
    let groups = plan_groups_from_file(work, &plan)?;
    let (w, h) = image_size_for(&videorf_core::occupancy::GroupPlan { groups: groups.clone() });
    let layout_value = match layout {
        LayoutArg::Morton => Layout::MORTON_BLOCKS,
        LayoutArg::RowMajor => Layout::ROW_MAJOR,
    };
    let act = DensityActivation::default();
    let mut images = Vec::new();
    for (gi, g) in groups.iter().enumerate() {
        let map = build_mapping_with(&g.union, w, h, layout_value)?;
        let pyramid = build_pyramid(&g.union)?;
        let dir = group_dir(work, gi);
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("mapping.vrfm"), map.to_vrfm()?)?;
        fs::write(dir.join("occupancy.bin"), pyramid.to_bytes())?;
        for t in g.start..=g.end {
            let d = DensityVolume::from_vrfv(&read(&density_path(work, t))?)?;
            let f = FeatureVolume::from_vrfv(&read(&features_path(work, t))?)?;
            images.push(bake(&d, &f, &map, &act, plan.gamma, t, gi)?);
        }
    }
    let ckpt = Checkpoint {
        images,
        mlp: reference_mlp(),
    };
    fs::write(checkpoint_path(work, Source::Baked), ckpt.to_bytes()?)?;
    plan.layout = Some(format!("{layout:?}").to_lowercase());
    fs::write(work.join("plan.json"), serde_json::to_string_pretty(&plan)?)?;
    log::info!("baked {} groups into {w}x{h} images", groups.len());
    Ok(())
}

/// Group assets written by `bake`.
pub fn load_groups(work: &Path) -> Result<Vec<GroupAssets>> {
    let plan = load_plan(work)?;
    plan.groups
        .iter()
        .enumerate()
        .map(|(gi, r)| {
            let dir = group_dir(work, gi);
            let map = MappingTable::from_vrfm(&read(&dir.join("mapping.vrfm"))?)?;
            let pyramid = OccupancyPyramid::from_bytes(&read(&dir.join("occupancy.bin"))?)?;
            Ok(GroupAssets {
                group: FrameGroup {
                    start: r.start,
                    end: r.end,
                    union: pyramid.base().clone(),
                },
                map,
                pyramid,
            })
        })
        .collect()
}

/// `fit`: optimizes against reference renders of the scene.
pub fn fit(work: &Path, cfg: &FitConfig, views: usize, size: usize, mlp_seed: u64) -> Result<()> {
    if views == 0 || size == 0 {
        return Err(StreamError::Usage("--views and --size must be positive".into()));
    }
    let scene = work_scene(work)?;
    let groups = load_groups(work)?;
    let cams = orbit_views(views, size);
    let targets = (0..scene.frame_count)
        .map(|t| {
            cams.iter()
                .map(|c| {
                    Ok(View {
                        camera: c.clone(),
                        target: scene.reference_render(t, c)?.color,
                    })
                })
                .collect::<videorf_core::Result<Vec<_>>>()
        })
        .collect::<videorf_core::Result<Vec<_>>>()?;
    let fit = fit_sequence(
        &targets,
        &groups,
        DensityActivation::default(),
        TinyMlp::random(mlp_seed, videorf_core::render::mlp::DEFAULT_FREQUENCIES),
        cfg,
    )?;
    let ckpt = Checkpoint {
        images: fit.images,
        mlp: fit.mlp,
    };
    fs::write(checkpoint_path(work, Source::Fitted), ckpt.to_bytes()?)?;
    fs::write(work.join("fit_report.json"), serde_json::to_string_pretty(&fit.reports)?)?;
    Ok(())
}

fn load_checkpoint(work: &Path, from: Source) -> Result<Checkpoint> {
    Ok(Checkpoint::from_bytes(&read(&checkpoint_path(work, from))?)?)
}

fn group_frames<'a>(ckpt: &'a Checkpoint, g: &GroupAssets) -> Result<&'a [FeatureImage]> {
    ckpt.images
        .get(g.group.start..=g.group.end)
        .ok_or_else(|| StreamError::Bundle(format!("checkpoint lacks frames {}..={}", g.group.start, g.group.end)))
}

fn encode_groups(ckpt: &Checkpoint, groups: &[GroupAssets], q: Quantizer) -> Result<Vec<EncodedGof>> {
    groups
        .iter()
        .enumerate()
        .map(|(gi, g)| Ok(encode_feature_gof(gi as u32, g.group.start, group_frames(ckpt, g)?, q)?))
        .collect()
}

/// `encode`: bundles the checkpoint at `q`; returns the sweep CSV (empty
/// without `sweep`).
pub fn encode(
    work: &Path,
    from: Source,
    q: Quantizer,
    sweep: &[Quantizer],
    external: Option<&ExternalCodec>,
    out: &Path,
    id: &str,
) -> Result<String> {
    let groups = load_groups(work)?;
    let ckpt = load_checkpoint(work, from)?;
    let mut csv = String::new();
    if !sweep.is_empty() || external.is_some() {
        csv.push_str("codec,quantizer,bytes,bytes_per_frame\n");
        let frames = ckpt.images.len().max(1) as f64;
        for &sq in sweep {
            let bytes: usize = encode_groups(&ckpt, &groups, sq)?.iter().map(EncodedGof::size_bytes).sum();
            let _ = writeln!(csv, "builtin,{sq},{bytes},{:.1}", bytes as f64 / frames);
        }
        if let Some(ext) = external {
            match external_bytes(&ckpt, &groups, ext) {
                Ok(bytes) => {
                    let _ = writeln!(csv, "external,,{bytes},{:.1}", bytes as f64 / frames);
                }
                Err(videorf_core::Error::Unavailable(why)) => {
                    log::warn!("external encoder unavailable ({why}); only the built-in codec was measured");
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    let gofs = encode_groups(&ckpt, &groups, q)?;
    fs::create_dir_all(out)?;
    let manifest = bundle(
        &BundleInput {
            sequence_id: id,
            groups: &groups,
            gofs: &gofs,
            mlp: &ckpt.mlp,
            act: DensityActivation::default(),
            background: Background::White,
        },
        out,
    )?;
    let s = manifest.storage;
    log::info!(
        "bundle {} bytes: feature images {}, mapping {}, occupancy {}, mlp {}",
        manifest.total_bytes,
        s.feature_images,
        s.mapping,
        s.occupancy,
        s.mlp
    );
    Ok(csv)
}

fn external_bytes(ckpt: &Checkpoint, groups: &[GroupAssets], codec: &ExternalCodec) -> videorf_core::Result<usize> {
    let mut total = 0;
    for g in groups {
        let frames = ckpt
            .images
            .get(g.group.start..=g.group.end)
            .ok_or_else(|| videorf_core::Error::Shape("checkpoint shorter than plan".into()))?;
        let profile = QuantizationProfile::covering(frames)?;
        let q8 = frames
            .iter()
            .map(|f| quantize(f, &profile))
            .collect::<videorf_core::Result<Vec<_>>>()?;
        total += external_encode(&q8, codec)?.len();
    }
    Ok(total)
}

pub fn bench_layout(scene: &SyntheticScene, theta: usize, q: Quantizer) -> Result<String> {
    let a = layout_ablation(scene, theta, q)?;
    Ok(format!(
        "quantizer,morton_bytes,row_major_bytes,morton_adjacency,row_major_adjacency\n{q},{},{},{:.4},{:.4}\n",
        a.morton_bytes, a.row_major_bytes, a.morton_adjacency, a.row_major_adjacency
    ))
}

/// Paired fits with and without one regularizer on the translating sphere.
pub fn bench_regularizer(which: Ablation, seeds: &[u64]) -> Result<String> {
    let mut csv = String::from("seed,regularizer,base_bytes,reg_bytes,base_key_bytes,reg_key_bytes,base_inter_bytes,reg_inter_bytes\n");
    for &seed in seeds {
        let exp = FitExperiment::translating_sphere(seed)?;
        let (name, reg) = match which {
            Ablation::Temporal => (
                "temporal",
                LossWeights {
                    lambda_t: LossWeights::default().lambda_t,
                    ..LossWeights::NONE
                },
            ),
            Ablation::Spatial => (
                "spatial",
                LossWeights {
                    lambda_s: LossWeights::default().lambda_s,
                    ..LossWeights::NONE
                },
            ),
            Ablation::Layout => unreachable!("layout is not a fitting ablation"),
        };
        let base = exp.run(LossWeights::NONE)?;
        let with = exp.run(reg)?;
        let _ = writeln!(
            csv,
            "{seed},{name},{},{},{},{},{},{}",
            base.total_bytes,
            with.total_bytes,
            base.keyframe_bytes,
            with.keyframe_bytes,
            base.inter_bytes,
            with.inter_bytes
        );
    }
    Ok(csv)
}

/// Rate-distortion sweep of a checkpoint, scored against its own
/// lossless-path renders from a held-out camera.
pub fn bench_rd(work: &Path, from: Source, quantizers: &[Quantizer]) -> Result<String> {
    let groups = load_groups(work)?;
    let ckpt = load_checkpoint(work, from)?;
    let camera = Camera::orbit(videorf_core::math::Vec3::splat(0.5), 37.0, 10.0, 2.4, 40.0, 64, 64);
    let grid = groups
        .first()
        .ok_or_else(|| StreamError::Bundle("no groups".into()))?
        .map
        .grid();
    let ctx = RdContext {
        act: DensityActivation::default(),
        mlp: &ckpt.mlp,
        camera: &camera,
        opts: RenderOptions::for_grid(grid).with_background(Background::White),
    };
    let rd_groups = groups
        .iter()
        .enumerate()
        .map(|(gi, g)| {
            Ok(RdGroup {
                group_id: gi as u32,
                first_frame: g.group.start,
                frames: group_frames(&ckpt, g)?,
                map: &g.map,
                pyramid: &g.pyramid,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("quantizer,bytes,bytes_per_frame,psnr\n");
    for p in rate_distortion(&rd_groups, &ctx, quantizers)? {
        let _ = writeln!(csv, "{},{},{:.1},{:.3}", p.quantizer, p.bytes, p.bytes_per_frame, p.psnr);
    }
    Ok(csv)
}
