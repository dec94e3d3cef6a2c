use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use simpaste::buffer::{ingest_buffer, CutoutBuffer, DEFAULT_MIN_CUTOUT_AREA, MANIFEST_FILE};
use simpaste::compose::{compose_scene, ComposeConfig};
use simpaste::config::FileConfig;
use simpaste::eval::{evaluate, parse_predictions, ImageEval, Interpolation, DEFAULT_CONF_THRESH, DEFAULT_IOU_THRESH};
use simpaste::labels::{
    color_code_map, emit_labels, load_instance_map, parse_labels, pasted_instances, LabelFormat, MapEncoding,
};
use simpaste::rng::{scene_rng, scene_seed, Stream};
use simpaste::synth::{synth_cutout, synth_scene, write_scene, LightingLevel, SceneEcho, SynthSceneSpec};
use simpaste::SceneInstance;

use crate::args::{Command, Common, ComposeArgs, EvalArgs, IngestArgs, SynthArgs};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Finished, but some scenes could not be produced.
    Partial,
}

pub fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Compose(a) => cmd_compose(a),
        Command::Eval(a) => cmd_eval(a),
    }
}

fn load_config(common: &Common) -> Result<FileConfig> {
    match &common.config {
        Some(p) => Ok(FileConfig::load(p)?),
        None => Ok(FileConfig::default()),
    }
}

fn master_seed(common: &Common, file: &FileConfig) -> u64 {
    common.seed.or(file.master_seed).unwrap_or(0)
}

fn thread_pool(common: &Common, file: &FileConfig) -> Result<rayon::ThreadPool> {
    let workers = common.workers.or(file.workers).unwrap_or(1).max(1);
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers).build()?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_ingest(a: IngestArgs) -> Result<Outcome> {
    let file = load_config(&a.common)?;
    let min_area = a
        .min_cutout_area
        .or(file.min_cutout_area)
        .unwrap_or(DEFAULT_MIN_CUTOUT_AREA);
    let ingested = ingest_buffer(&a.buffer, min_area)?;
    for s in &ingested.skipped {
        println!("skipped {}: {} ({})", s.id, s.kind, s.reason);
    }
    let out = a.out.unwrap_or_else(|| a.buffer.join(MANIFEST_FILE));
    ingested.buffer.manifest().write(&out)?;
    println!(
        "ingested {} cutout(s), skipped {}, digest {}",
        ingested.buffer.len(),
        ingested.skipped.len(),
        ingested.buffer.manifest_digest()
    );
    Ok(Outcome::Success)
}

/// Largest-remainder apportionment of `n` items over `weights`. When
/// `n >= weights.len()` every bucket receives at least one item, taken from
/// the currently largest bucket.
pub fn apportion(n: usize, weights: &[u64]) -> Result<Vec<usize>> {
    let total: u64 = weights.iter().sum();
    if total == 0 {
        bail!("apportionment weights sum to zero");
    }
    let n64 = n as u64;
    let mut counts: Vec<usize> = weights.iter().map(|&w| (n64 * w / total) as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(n64 * weights[i] % total));
    let missing = n - counts.iter().sum::<usize>();
    for &i in order.iter().take(missing) {
        counts[i] += 1;
    }
    if n >= weights.len() {
        while let Some(empty) = counts.iter().position(|&c| c == 0) {
            let donor = (0..counts.len()).max_by_key(|&i| (counts[i], std::cmp::Reverse(i))).unwrap();
            counts[donor] -= 1;
            counts[empty] += 1;
        }
    }
    Ok(counts)
}

#[derive(Serialize)]
struct SynthManifest {
    seed: u64,
    level_counts: Vec<(LightingLevel, usize)>,
    scenes: Vec<SynthEntry>,
    cutouts: Option<String>,
}

#[derive(Serialize)]
struct SynthEntry {
    scene_id: String,
    lighting_level: LightingLevel,
    n_instances: usize,
}

fn cmd_synth(a: SynthArgs) -> Result<Outcome> {
    let file = load_config(&a.common)?;
    let seed = master_seed(&a.common, &file);
    let pool = thread_pool(&a.common, &file)?;
    let counts = match &a.level_counts {
        Some(c) => c.clone(),
        None => apportion(a.n, &a.level_ratios)?,
    };
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;

    let jobs: Vec<(usize, LightingLevel)> = LightingLevel::ALL
        .iter()
        .zip(&counts)
        .flat_map(|(&level, &c)| std::iter::repeat_n(level, c))
        .enumerate()
        .collect();

    let results: Vec<Result<SynthEntry>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, level)| {
                let scene_id = format!("scene_{i:05}");
                let spec = SynthSceneSpec {
                    width: a.width,
                    height: a.height,
                    n_instances: a.instances,
                    size_range: (a.min_size, a.max_size),
                    orientation_range: (-FRAC_PI_2, FRAC_PI_2),
                    lighting_level: level,
                    leaf_occluders: a.occluders,
                    seed: scene_seed(seed, i as u64),
                };
                let scene = synth_scene(&spec)?;
                let echo = SceneEcho {
                    scene_id: scene_id.clone(),
                    master_seed: Some(seed),
                    spec,
                    instance_ids: scene.instances.iter().map(|s| s.instance_id).collect(),
                };
                write_scene(&a.out, &scene_id, &scene, &echo)?;
                if a.color_maps {
                    let path = a.out.join(format!("{scene_id}.inst_color.png"));
                    color_code_map(&scene.instance_map)
                        .save(&path)
                        .with_context(|| format!("writing {}", path.display()))?;
                }
                Ok(SynthEntry {
                    scene_id,
                    lighting_level: level,
                    n_instances: scene.instances.len(),
                })
            })
            .collect()
    });
    let scenes = results.into_iter().collect::<Result<Vec<_>>>()?;

    if let Some(dir) = &a.cutouts {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let size = (0.5 * a.min_size, 0.8 * a.max_size);
        pool.install(|| {
            (0..a.n_cutouts).into_par_iter().try_for_each(|k| -> Result<()> {
                let c = synth_cutout(&format!("cut_{k:04}"), scene_seed(seed, k as u64), size)?;
                c.write_pair(dir)?;
                Ok(())
            })
        })?;
    }

    let manifest = SynthManifest {
        seed,
        level_counts: LightingLevel::ALL.iter().copied().zip(counts.iter().copied()).collect(),
        scenes,
        cutouts: a.cutouts.as_ref().map(|d| d.display().to_string()),
    };
    write_json(&a.out.join("synth.json"), &manifest)?;
    println!(
        "wrote {} scene(s) (low/medium/high/backlight = {:?}) to {}",
        manifest.scenes.len(),
        counts,
        a.out.display()
    );
    Ok(Outcome::Success)
}

fn list_ids(dir: &Path, suffix: &str) -> Result<BTreeSet<String>> {
    let mut ids = BTreeSet::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let name = entry?.file_name();
        if let Some(id) = name.to_str().and_then(|n| n.strip_suffix(suffix)) {
            ids.insert(id.to_string());
        }
    }
    Ok(ids)
}

#[derive(Serialize)]
struct DatasetEntry {
    scene_id: String,
    image: String,
    label: String,
    labels_json: String,
    record: String,
}

#[derive(Serialize)]
struct DatasetManifest {
    seed: u64,
    buffer_digest: String,
    config: ComposeConfig,
    scenes: Vec<DatasetEntry>,
    failed: Vec<String>,
}

struct ComposeJob<'a> {
    scenes: &'a Path,
    out: &'a Path,
    buffer: &'a CutoutBuffer,
    config: &'a ComposeConfig,
    encoding: MapEncoding,
    seed: u64,
}

impl DatasetEntry {
    fn new(id: &str) -> Self {
        Self {
            scene_id: id.to_string(),
            image: format!("{id}.rgb.png"),
            label: format!("{id}.txt"),
            labels_json: format!("{id}.labels.json"),
            record: format!("{id}.record.json"),
        }
    }

    fn paths(&self, dir: &Path) -> [PathBuf; 4] {
        [&self.image, &self.label, &self.labels_json, &self.record].map(|f| dir.join(f))
    }
}

fn compose_one(job: &ComposeJob<'_>, index: usize, id: &str, resume: bool) -> Result<DatasetEntry> {
    let entry = DatasetEntry::new(id);
    let [image_path, label_path, json_path, record_path] = entry.paths(job.out);
    if resume && entry.paths(job.out).iter().all(|p| p.exists()) {
        return Ok(entry);
    }
    let rgb_in = job.scenes.join(format!("{id}.rgb.png"));
    let scene = image::open(&rgb_in)
        .with_context(|| format!("reading {}", rgb_in.display()))?
        .to_rgb8();
    let instances: Vec<SceneInstance> = load_instance_map(&job.scenes.join(format!("{id}.inst.png")), job.encoding)?;
    let mut rng = scene_rng(job.seed, index as u64, Stream::Compose);
    let mut composite = compose_scene(id, &scene, &instances, job.buffer, &mut rng, job.config)?;
    composite.record.seed = Some(job.seed);

    let labelled: Vec<SceneInstance> = pasted_instances(&instances, &composite.record)
        .into_iter()
        .cloned()
        .collect();
    let dims = scene.dimensions();
    composite
        .image
        .save(&image_path)
        .with_context(|| format!("writing {}", image_path.display()))?;
    fs::write(&label_path, emit_labels(&labelled, dims, LabelFormat::NormalizedText, None))?;
    fs::write(
        &json_path,
        emit_labels(&labelled, dims, LabelFormat::JsonManifest, Some(&composite.record)),
    )?;
    // Written last: its presence marks the scene as complete for --resume.
    write_json(&record_path, &composite.record)?;
    Ok(entry)
}

fn cmd_compose(a: ComposeArgs) -> Result<Outcome> {
    let file = load_config(&a.common)?;
    let seed = master_seed(&a.common, &file);
    let pool = thread_pool(&a.common, &file)?;
    let encoding: MapEncoding = a.encoding.parse()?;
    let defaults = ComposeConfig::default();
    let config = ComposeConfig {
        min_paste_area: a.min_paste_area.or(file.min_paste_area).unwrap_or(defaults.min_paste_area),
        feather_radius: a.feather.or(file.feather_radius).unwrap_or(defaults.feather_radius),
        paste_order: file.paste_order.unwrap_or(defaults.paste_order),
        scale_reference: file.scale_reference.unwrap_or(defaults.scale_reference),
    };
    let min_cutout = a
        .min_cutout_area
        .or(file.min_cutout_area)
        .unwrap_or(DEFAULT_MIN_CUTOUT_AREA);
    let ingested = ingest_buffer(&a.buffer, min_cutout)?;
    for s in &ingested.skipped {
        eprintln!("buffer: skipped {}: {} ({})", s.id, s.kind, s.reason);
    }
    let buffer = ingested.buffer;

    let ids: Vec<String> = list_ids(&a.scenes, ".inst.png")?.into_iter().collect();
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let job = ComposeJob {
        scenes: &a.scenes,
        out: &a.out,
        buffer: &buffer,
        config: &config,
        encoding,
        seed,
    };
    let results: Vec<Result<DatasetEntry>> = pool.install(|| {
        ids.par_iter()
            .enumerate()
            .map(|(i, id)| compose_one(&job, i, id, a.resume))
            .collect()
    });

    let mut scenes = Vec::new();
    let mut failed = Vec::new();
    for (id, r) in ids.iter().zip(results) {
        match r {
            Ok(e) => scenes.push(e),
            Err(e) => {
                eprintln!("scene {id} skipped: {e:#}");
                failed.push(id.clone());
            }
        }
    }
    let manifest = DatasetManifest {
        seed,
        buffer_digest: buffer.manifest_digest().to_string(),
        config,
        scenes,
        failed,
    };
    write_json(&a.out.join("dataset.json"), &manifest)?;
    println!(
        "composed {} scene(s), {} failed, into {}",
        manifest.scenes.len(),
        manifest.failed.len(),
        a.out.display()
    );
    Ok(if manifest.failed.is_empty() {
        Outcome::Success
    } else {
        Outcome::Partial
    })
}

fn parse_size(s: &str) -> Result<(u32, u32)> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .with_context(|| format!("image size {s:?} is not WxH"))?;
    Ok((w.trim().parse()?, h.trim().parse()?))
}

fn check_unit(name: &str, v: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        bail!("{name} = {v} outside [0, 1]");
    }
    Ok(v)
}

fn cmd_eval(a: EvalArgs) -> Result<Outcome> {
    let file = load_config(&a.common)?;
    let conf = check_unit(
        "conf_thresh",
        a.conf_thresh.or(file.conf_thresh).unwrap_or(DEFAULT_CONF_THRESH),
    )?;
    let iou_t = check_unit(
        "iou_thresh",
        a.iou_thresh.or(file.iou_thresh).unwrap_or(DEFAULT_IOU_THRESH),
    )?;
    let interpolation = if a.points101 {
        Interpolation::Points101
    } else {
        file.interpolation.unwrap_or_default()
    };
    let fixed_size = a.image_size.as_deref().map(parse_size).transpose()?;

    let mut ids = list_ids(&a.gt, ".txt")?;
    if a.pred.is_dir() {
        ids.extend(list_ids(&a.pred, ".txt")?);
    } else {
        bail!("prediction directory {} not found", a.pred.display());
    }

    let mut images = Vec::with_capacity(ids.len());
    for id in &ids {
        let dims = match fixed_size {
            Some(d) => d,
            None => {
                let img = a.gt.join(format!("{id}.rgb.png"));
                if img.exists() {
                    image::image_dimensions(&img).with_context(|| format!("reading {}", img.display()))?
                } else {
                    (1, 1)
                }
            }
        };
        let read = |dir: &Path| -> Result<Option<(PathBuf, String)>> {
            let p = dir.join(format!("{id}.txt"));
            if !p.exists() {
                return Ok(None);
            }
            let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            Ok(Some((p, text)))
        };
        let gts = match read(&a.gt)? {
            Some((p, t)) => parse_labels(&t, &p)?.iter().map(|l| l.denormalize(dims)).collect(),
            None => Vec::new(),
        };
        let preds = match read(&a.pred)? {
            Some((p, t)) => parse_predictions(&t, dims, &p)?,
            None => Vec::new(),
        };
        images.push(ImageEval::new(id.clone(), preds, gts));
    }

    let mut report = evaluate(&images, conf, iou_t, interpolation);
    report.seed = a.common.seed.or(file.master_seed);
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_json(&a.out.join("report.json"), &report)?;
    let table = report.to_table(&a.name);
    fs::write(a.out.join("report.txt"), &table)?;
    print!("{table}");
    Ok(Outcome::Success)
}
